#!/usr/bin/env python3
"""Writes the synthetic 240-hour diurnal arrival-rate trace used by the
sensitivity experiments: one row per hour, a daily sinusoid with a small
weekly modulation and smoothed noise, rescaled so that the minimum and
maximum rates are exactly 2688 and 5729 jobs/s."""

import argparse
import math
import random

LOW, HIGH = 2688.0, 5729.0
HOURS = 240


def build(seed: int) -> list[float]:
    rng = random.Random(seed)
    noise = 0.0
    raw = []
    for h in range(HOURS):
        noise = 0.7 * noise + 0.3 * rng.gauss(0.0, 0.04)
        daily = math.sin(2.0 * math.pi * (h - 9) / 24.0)
        weekly = 0.08 * math.sin(2.0 * math.pi * h / 168.0)
        raw.append(1.0 + 0.45 * daily + weekly + noise)
    lo, hi = min(raw), max(raw)
    return [LOW + (r - lo) * (HIGH - LOW) / (hi - lo) for r in raw]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="fixtures/diurnal_240h.csv")
    parser.add_argument("--seed", type=int, default=2011)
    args = parser.parse_args()
    rates = build(args.seed)
    with open(args.out, "w", encoding="ascii") as f:
        f.write("time_s,rate_jobs_per_s\n")
        for h, rate in enumerate(rates):
            f.write(f"{h * 3600},{rate:.3f}\n")


if __name__ == "__main__":
    main()
