"""Fits the bundled toy delay/area models on analytic pseudo-labels.

    eqopt gen /tmp/toy --count 3000 --seed 7
    eqopt features /tmp/toy -o /tmp/toy.csv
    python3 make_toy.py /tmp/toy.csv .

Labels: delay = depth, area = 1 + 2*and + 2*or + not (the 1 keeps bare
wires above zero, which the balanced cost needs). These stand in for
post-mapping measurements and are marked as such in the model metadata.
"""

import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd
from sklearn.ensemble import GradientBoostingRegressor

FEATURES = ["and_count", "or_count", "not_count", "node_count", "depth", "density", "edge_sum"]


def export_tree(tree, lr):
    t = tree.tree_

    def node(i):
        if t.children_left[i] == -1:
            return {"leaf": float(lr * t.value[i][0][0])}
        # sklearn sends x <= t left; the loader sends x < threshold left.
        return {
            "split": int(t.feature[i]),
            "threshold": float(np.nextafter(t.threshold[i], np.inf)),
            "default_left": True,
            "left": node(t.children_left[i]),
            "right": node(t.children_right[i]),
        }

    return node(0)


def fit(x, y, objective, provenance):
    m = GradientBoostingRegressor(n_estimators=200, max_depth=5, learning_rate=0.1, random_state=0)
    m.fit(x, y)
    doc = {
        "objective": objective,
        "base_score": float(m.init_.constant_[0][0]),
        "feature_names": FEATURES,
        "trees": [export_tree(est[0], m.learning_rate) for est in m.estimators_],
        "meta": {"provenance": provenance, "n_estimators": 200, "max_depth": 5, "rows": len(y)},
    }
    return m, doc


def main():
    csv, out = Path(sys.argv[1]), Path(sys.argv[2])
    df = pd.read_csv(csv)
    x = df[FEATURES].to_numpy(dtype=np.float64)
    labels = {
        "delay": df["depth"].to_numpy(dtype=np.float64),
        "area": (1 + 2 * df["and_count"] + 2 * df["or_count"] + df["not_count"]).to_numpy(dtype=np.float64),
    }
    for objective, y in labels.items():
        _, doc = fit(x, y, objective, f"toy model: analytic pseudo-labels ({objective}), not measured QoR")
        (out / f"{objective}.json").write_text(json.dumps(doc, indent=1) + "\n")
        print(f"{objective}: {len(doc['trees'])} trees from {len(y)} rows")


if __name__ == "__main__":
    main()
