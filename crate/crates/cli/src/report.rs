//! Run reports: JSON for machines, an aligned table for people.

use std::fmt::Write as _;
use std::time::Duration;

use eqopt_core::equiv::EquivReport;
use eqopt_core::extract::Provenance;
use eqopt_core::features::FeatureVector;
use eqopt_core::pipeline::Optimized;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Features {
    pub and_count: usize,
    pub or_count: usize,
    pub not_count: usize,
    pub node_count: usize,
    pub depth: usize,
    pub density: f64,
    pub edge_sum: usize,
}

impl From<FeatureVector> for Features {
    fn from(f: FeatureVector) -> Self {
        Features {
            and_count: f.and_count,
            or_count: f.or_count,
            not_count: f.not_count,
            node_count: f.node_count,
            depth: f.depth,
            density: f.density,
            edge_sum: f.edge_sum,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Saturation {
    pub stop_reason: String,
    pub iterations: usize,
    pub enodes: usize,
    pub classes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pool {
    pub requested: usize,
    pub size: usize,
    pub min_size: usize,
    pub min_depth: usize,
    pub strategy_a: usize,
    pub strategy_b: usize,
    pub draws_a: usize,
    pub draws_b: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selected {
    pub index: usize,
    pub provenance: String,
    pub draw: Option<usize>,
    pub local_cost: String,
    pub model_cost: f64,
    pub features: Features,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cec {
    pub verdict: String,
    pub method: String,
    pub vectors_tested: u64,
    pub counterexample: Option<Counterexample>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub output: String,
    pub assignment: Vec<(String, bool)>,
}

impl From<&EquivReport> for Cec {
    fn from(r: &EquivReport) -> Self {
        Cec {
            verdict: r.verdict.as_str().into(),
            method: r.method.as_str().into(),
            vectors_tested: r.vectors_tested,
            counterexample: r.counterexample.as_ref().map(|c| Counterexample {
                output: c.output.to_string(),
                assignment: c.assignment.iter().map(|(n, v)| (n.to_string(), *v)).collect(),
            }),
        }
    }
}

/// Wall-clock seconds per stage. Kept apart from everything else so that
/// reports of identical runs differ only here.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Times {
    pub parse: f64,
    pub saturate: f64,
    pub extract: f64,
    pub select: f64,
    pub verify: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub input: String,
    pub objective: String,
    pub seed: u64,
    pub input_features: Features,
    pub saturation: Saturation,
    pub pool: Pool,
    pub selected: Selected,
    pub cec: Cec,
    pub times: Times,
}

impl RunReport {
    pub fn new(input: &str, objective: &str, seed: u64, run: &Optimized, parse: Duration) -> Self {
        let pool = &run.pool;
        let cand = &pool.candidates[run.selected];
        let t = &run.times;
        let busy = [parse, t.saturate, t.extract, t.select, t.verify];
        RunReport {
            input: input.into(),
            objective: objective.into(),
            seed,
            input_features: run.input_features.into(),
            saturation: Saturation {
                stop_reason: run.saturation.stop_reason.as_str().into(),
                iterations: run.saturation.iterations,
                enodes: run.saturation.enodes,
                classes: run.saturation.classes,
            },
            pool: Pool {
                requested: pool.draws.strategy_a + pool.draws.strategy_b + 2,
                size: pool.len(),
                min_size: pool.min_size,
                min_depth: pool.min_depth,
                strategy_a: pool.count(Provenance::StrategyA),
                strategy_b: pool.count(Provenance::StrategyB),
                draws_a: pool.draws.strategy_a,
                draws_b: pool.draws.strategy_b,
            },
            selected: Selected {
                index: run.selected,
                provenance: cand.provenance.as_str().into(),
                draw: cand.draw,
                local_cost: cand.local_cost.name().into(),
                model_cost: run.selected_cost,
                features: run.selected_features.into(),
            },
            cec: (&run.equiv).into(),
            times: Times {
                parse: parse.as_secs_f64(),
                saturate: t.saturate.as_secs_f64(),
                extract: t.extract.as_secs_f64(),
                select: t.select.as_secs_f64(),
                verify: t.verify.as_secs_f64(),
                total: busy.iter().sum::<Duration>().as_secs_f64(),
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn to_table(&self) -> String {
        let f = |x: &Features| {
            format!(
                "and={} or={} not={} nodes={} depth={} density={:.4} edges={}",
                x.and_count, x.or_count, x.not_count, x.node_count, x.depth, x.density, x.edge_sum
            )
        };
        let s = &self.saturation;
        let p = &self.pool;
        let rows = [
            ("input", self.input.clone()),
            ("objective", self.objective.clone()),
            ("seed", self.seed.to_string()),
            ("input features", f(&self.input_features)),
            ("saturation", format!("{} after {} iterations, {} e-nodes, {} classes", s.stop_reason, s.iterations, s.enodes, s.classes)),
            ("pool", format!("{} unique of {} (a: {}/{}, b: {}/{})", p.size, p.requested, p.strategy_a, p.draws_a, p.strategy_b, p.draws_b)),
            ("selected", format!("#{} {} via {}", self.selected.index, self.selected.provenance, self.selected.local_cost)),
            ("model cost", format!("{}", self.selected.model_cost)),
            ("output features", f(&self.selected.features)),
            ("cec", format!("{} ({}, {} vectors)", self.cec.verdict, self.cec.method, self.cec.vectors_tested)),
            (
                "time (s)",
                format!(
                    "parse {:.3}  saturate {:.3}  extract {:.3}  select {:.3}  verify {:.3}  total {:.3}",
                    self.times.parse, self.times.saturate, self.times.extract, self.times.select, self.times.verify, self.times.total
                ),
            ),
        ];
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<width$}  {v}");
        }
        out
    }
}
