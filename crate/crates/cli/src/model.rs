//! Model JSON: `{"objective", "base_score", "feature_names", "trees", "meta"}`.
//!
//! Split nodes are `{"split", "threshold", "default_left", "left", "right"}`
//! and leaves `{"leaf"}`. Errors carry a path to the offending node.

use std::path::Path;

use eqopt_core::features::{DecisionNode, ModelError, Objective, TreeEnsembleModel, FEATURE_NAMES};
use serde_json::{json, Map, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn schema(path: &str, message: impl Into<String>) -> ModelError {
    ModelError::Schema { path: path.into(), message: message.into() }
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value, ModelError> {
    obj.get(key).ok_or_else(|| schema(path, format!("missing `{key}`")))
}

fn number(v: &Value, path: &str) -> Result<f64, ModelError> {
    v.as_f64().ok_or_else(|| schema(path, "expected a number"))
}

fn node(v: &Value, path: &str) -> Result<DecisionNode, ModelError> {
    let obj = v.as_object().ok_or_else(|| schema(path, "expected an object"))?;
    if let Some(leaf) = obj.get("leaf") {
        return Ok(DecisionNode::Leaf(number(leaf, &format!("{path}.leaf"))?));
    }
    let feature = field(obj, "split", path)?;
    let feature = feature.as_u64().ok_or_else(|| schema(&format!("{path}.split"), "expected a feature index"))?;
    let threshold = number(field(obj, "threshold", path)?, &format!("{path}.threshold"))?;
    let default_left = match obj.get("default_left") {
        None => true,
        Some(b) => b.as_bool().ok_or_else(|| schema(&format!("{path}.default_left"), "expected a boolean"))?,
    };
    let left = node(field(obj, "left", path)?, &format!("{path}.left"))?;
    let right = node(field(obj, "right", path)?, &format!("{path}.right"))?;
    Ok(DecisionNode::Split {
        feature: usize::try_from(feature).unwrap_or(usize::MAX),
        threshold,
        default_left,
        left: Box::new(left),
        right: Box::new(right),
    })
}

pub fn parse_model(text: &str) -> Result<TreeEnsembleModel, LoadError> {
    let doc: Value = serde_json::from_str(text)?;
    let obj = doc.as_object().ok_or_else(|| schema("$", "expected an object"))?;
    let objective = match field(obj, "objective", "$")?.as_str() {
        Some("delay") => Objective::Delay,
        Some("area") => Objective::Area,
        _ => return Err(schema("$.objective", "expected \"delay\" or \"area\"").into()),
    };
    let base_score = number(field(obj, "base_score", "$")?, "$.base_score")?;
    let names = field(obj, "feature_names", "$")?.as_array().ok_or_else(|| schema("$.feature_names", "expected an array"))?;
    if names.len() != FEATURE_NAMES.len() {
        return Err(schema("$.feature_names", format!("expected {} names", FEATURE_NAMES.len())).into());
    }
    for (i, (got, want)) in names.iter().zip(FEATURE_NAMES).enumerate() {
        if got.as_str() != Some(want) {
            return Err(schema(&format!("$.feature_names[{i}]"), format!("unknown feature {got}, expected \"{want}\"")).into());
        }
    }
    let trees = field(obj, "trees", "$")?.as_array().ok_or_else(|| schema("$.trees", "expected an array"))?;
    let trees = trees.iter().enumerate().map(|(i, t)| node(t, &format!("trees[{i}]"))).collect::<Result<Vec<_>, _>>()?;
    let provenance = obj.get("meta").and_then(|m| m.get("provenance")).and_then(Value::as_str).unwrap_or_default();
    Ok(TreeEnsembleModel::new(objective, base_score, &trees, provenance)?)
}

pub fn load_model(path: &Path) -> Result<TreeEnsembleModel, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.display().to_string(), source })?;
    parse_model(&text)
}

fn node_json(n: &DecisionNode) -> Value {
    match n {
        DecisionNode::Leaf(v) => json!({ "leaf": v }),
        DecisionNode::Split { feature, threshold, default_left, left, right } => json!({
            "split": feature,
            "threshold": threshold,
            "default_left": default_left,
            "left": node_json(left),
            "right": node_json(right),
        }),
    }
}

/// Serializes `model`; numbers are written so that they parse back to the
/// same doubles.
pub fn model_to_json(model: &TreeEnsembleModel) -> String {
    let trees: Vec<Value> = (0..model.tree_count()).map(|i| node_json(&model.tree(i))).collect();
    let doc = json!({
        "objective": model.objective().as_str(),
        "base_score": model.base_score(),
        "feature_names": FEATURE_NAMES,
        "trees": trees,
        "meta": { "provenance": model.provenance() },
    });
    serde_json::to_string_pretty(&doc).expect("JSON values always serialize")
}
