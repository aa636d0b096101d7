"""Evolution-equation residuals against the difference step h.

Probes the alpha = 4 and alpha = 1 runs at a few times and prints the max
residual of the R, Q and length-weighted integral rates for a sequence of
halved steps, with successive ratios (4 for a second-order difference).
"""

import argparse

import numpy as np

from qflow import spectral
from qflow.conformal import project_to_orthogonal
from qflow.curvature import ConformalFactor
from qflow.flow import FlowConfig, evolution_residuals, prepare_initial, run

PROBES = (0.0, 0.05, 0.1, 0.2, 0.4)


def probe_states(alpha, v0):
    cfg = FlowConfig(alpha=alpha, T=max(PROBES) + 1e-3)
    states = {0.0: prepare_initial(v0, cfg)}

    def keep(s):
        for t in PROBES:
            if t not in states and s.t >= t:
                states[t] = s.m

    run(cfg, v0, record=keep)
    return [states[t] for t in PROBES]


def main():
    ap = argparse.ArgumentParser(description="residual versus difference step")
    ap.add_argument("--h0", type=float, default=4e-3)
    ap.add_argument("--levels", type=int, default=5)
    args = ap.parse_args()
    th = spectral.grid(256)
    cases = {
        "alpha=4": (4.0, 1 + 0.05 * np.cos(2 * th)),
        "alpha=1": (1.0, project_to_orthogonal(ConformalFactor(1 + 0.05 * np.cos(4 * th), 1.0)).v),
    }
    for name, (alpha, v0) in cases.items():
        states = probe_states(alpha, v0)
        print(name)
        prev = None
        for i in range(args.levels):
            h = args.h0 / 2**i
            rs = [evolution_residuals(m, h) for m in states]
            cur = np.array([max(getattr(r, k) for r in rs) for k in ("R", "Q", "dsigma")])
            ratio = "" if prev is None else "  ratios " + " ".join(f"{x:5.2f}" for x in prev / cur)
            print(f"  h={h:.1e}  R={cur[0]:.2e}  Q={cur[1]:.2e}  dsigma={cur[2]:.2e}{ratio}")
            prev = cur


if __name__ == "__main__":
    main()
