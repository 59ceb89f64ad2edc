#!/usr/bin/env python3
"""Survival-at-k experiment over a synthetically corrupted sequence batch.

Serializes random valid build sequences, corrupts a fraction of them with a
single bad token at a random placement action, validates every prefix, and
prints the survival curve plus aggregate metrics (optionally as CSV).
"""

import argparse
import json

import numpy as np

from brickir.demo import build_demo_catalog, generate_random_path
from brickir.metrics import (
    invalid_flags_from_report,
    mean_valid_steps,
    p_invalid,
    survival_curve,
)
from brickir.program import serialize, validate_prefix

CORRUPTIONS = ("unknown-part", "bad-token", "bad-params", "dangling-target")


def corrupt(text: str, rng) -> str:
    lines = text.splitlines()
    intros = [i for i, l in enumerate(lines) if " | " in l]
    if len(intros) < 2:
        return text
    action = int(rng.integers(1, len(intros)))
    kind = CORRUPTIONS[int(rng.integers(len(CORRUPTIONS)))]
    if kind == "unknown-part":
        li = intros[action]
        node, rest = lines[li].split(" ", 1)
        lines[li] = f"{node} mystery widget | {rest.split(' | ')[1]}"
    else:
        li = intros[action] + 1
        tokens = lines[li].split()
        if kind == "bad-token":
            lines[li] = "%% not a step %%"
        elif kind == "bad-params":
            tokens[-1] = "banana"
            lines[li] = " ".join(tokens)
        else:
            tokens[0] = "zz"
            lines[li] = " ".join(tokens)
    return "\n".join(lines) + "\n"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=500, help="sequences in the batch")
    ap.add_argument("--max-parts", type=int, default=40)
    ap.add_argument("--corrupt-fraction", type=float, default=0.6)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--csv", help="write the survival curve to this CSV path")
    args = ap.parse_args()

    catalog = build_demo_catalog()
    rng = np.random.default_rng(args.seed)
    reports = []
    flags = []
    for _ in range(args.count):
        n = int(rng.integers(3, args.max_parts + 1))
        text = serialize(generate_random_path(catalog, rng, n), catalog)
        if rng.random() < args.corrupt_fraction:
            text = corrupt(text, rng)
        report = validate_prefix(text, catalog)
        reports.append(report)
        attempted = sum(1 for l in text.splitlines() if " | " in l)
        flags.extend(
            invalid_flags_from_report(report, max(attempted, report.connectivity_steps))
        )

    curve = survival_curve(reports)
    summary = {
        "sequences": args.count,
        "mean_valid_steps": mean_valid_steps(reports),
        "p_invalid": p_invalid(flags),
        "survival": curve.to_json_obj(),
    }
    print(json.dumps(summary, indent=1, sort_keys=True))
    if args.csv:
        with open(args.csv, "w") as f:
            f.write(curve.to_csv())
        print(f"curve written to {args.csv}")


if __name__ == "__main__":
    main()
