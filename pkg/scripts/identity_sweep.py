"""Run the randomized identity suites over several seeds and tabulate the worst values."""

import argparse

from qflow.checks import TARGETS, run_checks


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--n", type=int, default=256)
    args = ap.parse_args()
    worst = {}
    for seed in range(args.seeds):
        for r in run_checks("all", seed=seed, n=args.n):
            prev = worst.get(r.name)
            if prev is None or (r.worst > prev.worst if r.sense == "max" else r.worst < prev.worst):
                worst[r.name] = r
    print(f"{'check':<44} {'worst':>11}  {'bound':>9}  result   ({args.seeds} seeds, targets: {len(TARGETS)})")
    for name, r in worst.items():
        print(f"{name:<44} {r.worst:>11.3e}  {r.threshold:>9.1e}  {'PASS' if r.passed else 'FAIL'}")


if __name__ == "__main__":
    main()
