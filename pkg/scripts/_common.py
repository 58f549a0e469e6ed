"""Shared argument handling for the study scripts."""

import argparse
import json
import logging

import numpy as np


def parser(description: str, reps: int, n: int = 500) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--reps", type=int, default=reps, help="number of replicates (seeds 0..reps-1)")
    p.add_argument("--first-seed", type=int, default=0, help="seed of the first replicate")
    p.add_argument("-n", type=int, default=n, help="sample size")
    p.add_argument("--out", default=None, help="write per-replicate results as JSON here")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def seeds(args) -> range:
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    return range(args.first_seed, args.first_seed + args.reps)


def save(args, result, **summary) -> None:
    for k, v in summary.items():
        print(f"{k}: {v}")
    print(f"seconds: {result.seconds:.1f}")
    if args.out:
        payload = {
            "summary": summary,
            "estimates": {m: np.asarray(v, dtype=float).tolist() for m, v in result.estimates.items()},
            "extra": {k: np.asarray(v, dtype=float).tolist() for k, v in result.extra.items()},
            "failures": result.failures,
            "seconds": result.seconds,
        }
        with open(args.out, "w") as fh:
            json.dump(payload, fh, indent=1)
