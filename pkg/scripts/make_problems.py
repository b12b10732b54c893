#!/usr/bin/env python3
"""Emit a folder of sample problem files covering every input schema.

Usage:
    python scripts/make_problems.py [--out problems] [--seed 0]

The files are ready for the CLI, e.g.:
    conebellman solve problems/graph_chain.json --trace
    conebellman verify problems/ldp_single.json --trials 2000
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from conebellman.generators import random_ldp, random_lqr, random_ssp_graph
from conebellman.io import dumps_deterministic
from conebellman.ssp import GraphSsp


def graph_to_json(g: GraphSsp) -> dict:
    edges = []
    for e in g.edges:
        entry = {"from": e.source, "cost": e.cost}
        if len(e.targets) == 1:
            entry["to"] = e.targets[0]
        else:
            entry["to"] = list(e.targets)
            entry["prob"] = list(e.probs)
        edges.append(entry)
    return {
        "type": "ssp-graph",
        "nodes": g.n_nodes,
        "goal": list(g.goals),
        "edges": edges,
        "s": g.s,
    }


def build_samples(seed: int) -> dict:
    lqr = random_lqr(4, 2, seed=seed)
    det = random_ssp_graph(12, seed=seed)
    sto = random_ssp_graph(12, seed=seed + 1, stochastic=True)
    ldp = random_ldp(10, seed=seed)
    return {
        "lqr_scalar": {
            "type": "lqr",
            "A": [[1.0]],
            "B": [[1.0]],
            "Q": [[1.0]],
            "R": [[1.0]],
        },
        "lqr_random": {"type": "lqr", "A": lqr.A, "B": lqr.B, "Q": lqr.Q, "R": lqr.R},
        "graph_chain": {
            "type": "ssp-graph",
            "nodes": 4,
            "goal": 3,
            "edges": [
                {"from": 0, "to": 1, "cost": 1.0},
                {"from": 1, "to": 2, "cost": 2.0},
                {"from": 1, "to": 3, "cost": 5.0},
                {"from": 2, "to": 3, "cost": 1.0},
            ],
            "s": [0.1, 0.1, 0.1, 0.0],
        },
        "graph_random": graph_to_json(det),
        "graph_stochastic": graph_to_json(sto),
        "ssp_raw_single": {
            "type": "ssp",
            "A": [[1.0]],
            "B": [[-1.0]],
            "s": [1.0],
            "r": [2.0],
            "blocks": [1],
            "E": [[1.0]],
        },
        "ldp_single": {
            "type": "ldp",
            "Pbar": [[0.5, 0.0], [0.5, 1.0]],
            "s": [1.0, 0.0],
            "goals": [1],
        },
        "ldp_random": {
            "type": "ldp",
            "Pbar": ldp.Pbar,
            "s": ldp.s,
            "goals": list(ldp.goals),
        },
    }


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="problems")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    os.makedirs(args.out, exist_ok=True)
    for name, obj in build_samples(args.seed).items():
        path = os.path.join(args.out, f"{name}.json")
        with open(path, "w") as fh:
            fh.write(dumps_deterministic(obj))
            fh.write("\n")
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
