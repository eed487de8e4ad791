#!/usr/bin/env python3
"""Writes a synthetic multi-year (Hs, Tp) sample file in the wave-sample format.

One record per day: lognormal Hs with a seasonal cycle, Tp correlated with Hs
through a wave-steepness relation plus noise.
"""
import argparse

import numpy as np


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="data/synthetic_waves.csv")
    ap.add_argument("--first-year", type=int, default=1976)
    ap.add_argument("--years", type=int, default=30)
    ap.add_argument("--per-year", type=int, default=365)
    ap.add_argument("--seed", type=int, default=20230101)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    with open(args.out, "w") as f:
        f.write("year,hs,tp\n")
        for y in range(args.first_year, args.first_year + args.years):
            day = np.arange(args.per_year)
            season = 0.25 * np.cos(2.0 * np.pi * day / args.per_year)
            year_shift = rng.normal(0.0, 0.05)
            hs = np.exp(np.log(1.8) + season + year_shift + rng.normal(0.0, 0.35, args.per_year))
            hs = np.clip(hs, 0.3, 7.5)
            tp = 4.8 * np.sqrt(hs) + 3.0 + rng.normal(0.0, 1.2, args.per_year)
            tp = np.clip(tp, 3.0, 19.0)
            for h, t in zip(hs, tp):
                f.write(f"{y},{h:.3f},{t:.2f}\n")


if __name__ == "__main__":
    main()
