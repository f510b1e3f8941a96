"""Completeness and soundness sweeps for every tester; writes one CSV per class.

    python3 scripts/power_sweep.py --trials 20 --out results/
"""
import argparse
import csv
import pathlib

from disttest.cli import POWER_COLUMNS, power_rows
from disttest.ledger import load_ledger

SWEEPS = [
    ("pbd", ["binomial", "uniform"], [64, 256, 1024], None, [0.25, 0.1]),
    ("siirv", ["binomial", "uniform"], [30, 60], 3, [0.25]),
    ("pmd", ["iid", "composition-uniform"], [40, 100], 2, [0.25, 0.1]),
    ("logconcave", ["binomial", "two-spike"], [40, 200], None, [0.25, 0.1]),
    ("plugin:uniform-interval", ["uniform", "two-block"], [20], 10, [0.25]),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ledger = load_ledger()
    for cls, inst, ns, k, epss in SWEEPS:
        rows = power_rows(cls, inst, ns, k, epss, args.trials, args.seed, ledger, args.workers)
        path = out / f"power_{cls.replace(':', '_')}.csv"
        with path.open("w", newline="") as fh:
            w = csv.DictWriter(fh, POWER_COLUMNS, lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
        for r in rows:
            print(f"{cls:24s} {r['instance']:20s} n={r['n']:<5} eps={r['epsilon']:<5} "
                  f"accept={r['accept_rate']:.2f} m={r['m_total_mean']:.3e}")


if __name__ == "__main__":
    main()
