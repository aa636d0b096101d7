"""Randomized identity suites behind ``qflow check``.

Every suite draws its cases from ``numpy.random.default_rng(seed)`` in a fixed
order, so a report depends only on ``(target, seed, n)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spectral
from .conformal import project_to_orthogonal
from .curvature import ConformalFactor, conformal_covariance_residual
from .identities import (
    SHARP_CONSTANT,
    ExtremalParams,
    euler_lagrange_residual,
    extremal_metric,
    integral_identity_residual,
    kazdan_warner_residual,
    sharp_inequality_check,
    sharp_product,
    steady_state_report,
    symmetry_residual,
)

TARGETS = ("kazdan-warner", "lemma-identity", "covariance", "sharp-inequality", "extremal")
ALPHAS = (4.0, 1.0)


def random_trig(rng, n: int, modes: int = 6, decay: float = 2.0) -> np.ndarray:
    """Random real trigonometric polynomial with ``|c_k| ~ k**-decay``."""
    theta = spectral.grid(n)
    k = np.arange(1, modes + 1)
    a, b = rng.normal(size=(2, modes)) / k**decay
    return a @ np.cos(np.outer(k, theta)) + b @ np.sin(np.outer(k, theta))


def random_positive_field(rng, n: int, modes: int = 6, amp: float = 0.4) -> np.ndarray:
    """``c (1 + p)`` with ``p`` a random trig polynomial scaled to ``max|p| <= amp``."""
    p = random_trig(rng, n, modes)
    p *= amp * rng.uniform(0.2, 1.0) / np.max(np.abs(p))
    return np.exp(rng.uniform(-0.5, 0.5)) * (1.0 + p)


@dataclass(frozen=True)
class CheckResult:
    name: str
    cases: int
    worst: float
    threshold: float
    # "max": worst must not exceed threshold; "min": worst must not fall below it
    sense: str = "max"

    @property
    def passed(self) -> bool:
        if self.sense == "max":
            return bool(self.worst <= self.threshold)
        return bool(self.worst >= self.threshold)


def check_kazdan_warner(rng, n: int) -> list[CheckResult]:
    out = []
    for alpha in ALPHAS:
        worst = 0.0
        for _ in range(100):
            m = ConformalFactor(random_positive_field(rng, n), alpha)
            worst = max(worst, *map(abs, kazdan_warner_residual(m)))
        out.append(CheckResult(f"kazdan-warner alpha={alpha:g}", 100, worst, 1e-10))
    return out


def check_lemma_identity(rng, n: int) -> list[CheckResult]:
    out = []
    for alpha in ALPHAS:
        worst = 0.0
        for _ in range(100):
            phi = rng.normal() + random_trig(rng, n, modes=8)
            worst = max(worst, abs(integral_identity_residual(phi, alpha)))
        out.append(CheckResult(f"lemma-identity alpha={alpha:g}", 100, worst, 1e-10))
    return out


def check_covariance(rng, n: int) -> list[CheckResult]:
    """Round reference metric, random conformal factor and test function."""
    out = []
    for alpha in ALPHAS:
        worst = 0.0
        for _ in range(20):
            phi = random_positive_field(rng, n, modes=4, amp=0.3)
            psi = random_trig(rng, n, modes=4)
            m1 = ConformalFactor(np.ones(n), alpha)
            worst = max(worst, conformal_covariance_residual(m1, phi, psi))
        out.append(CheckResult(f"covariance alpha={alpha:g}", 20, worst, 1e-9))
    return out


def check_sharp_inequality(rng, n: int) -> list[CheckResult]:
    worst = np.inf
    for _ in range(200):
        u = project_to_orthogonal(ConformalFactor(random_positive_field(rng, n), 1.0))
        _, margin = sharp_inequality_check(u.v)
        worst = min(worst, margin / SHARP_CONSTANT)
    equality = abs(sharp_product(np.ones(n)) / SHARP_CONSTANT - 1.0)
    for lam in (1.3, 2.0, 3.0):
        u = extremal_metric(ExtremalParams(1.0, lam, 0.4, 1.0), n).v
        _, margin = sharp_inequality_check(u)
        equality = max(equality, abs(margin) / SHARP_CONSTANT)
    return [
        CheckResult("sharp-inequality min relative margin", 200, worst, -1e-6, sense="min"),
        CheckResult("sharp-inequality equality cases", 4, equality, 1e-6),
    ]


EXTREMAL_LAMBDAS = (1.0, 1.3, 2.0, 3.0)
EXTREMAL_BETAS = (0.0, 1.0, 2.5)
NEGATIVE_CONTROL = "1 + 0.1 cos(theta) + 0.05 sin(3 theta)"


def negative_control(n: int) -> np.ndarray:
    theta = spectral.grid(n)
    return 1.0 + 0.1 * np.cos(theta) + 0.05 * np.sin(3 * theta)


def check_extremal(rng, n: int) -> list[CheckResult]:
    q = {a: 0.0 for a in ALPHAS}
    el = symm = 0.0
    cases = 0
    for lam in EXTREMAL_LAMBDAS:
        for beta in EXTREMAL_BETAS:
            for alpha in ALPHAS:
                m = extremal_metric(ExtremalParams(1.0, lam, beta, alpha), n, normalize_length=True)
                rep = steady_state_report(m)
                q[alpha] = max(q[alpha], rep.q_constancy)
                if alpha == 1.0:
                    el = max(el, rep.el_residual)
                    symm = max(symm, rep.symm_residual)
                    cases += 1
    ctrl = ConformalFactor(negative_control(n), 1.0)
    ctrl_q = steady_state_report(ctrl).q_constancy
    ctrl_el = euler_lagrange_residual(ctrl)[1]
    ctrl_symm = symmetry_residual(ctrl)
    return [
        CheckResult("extremal Q constancy alpha=4", cases, q[4.0], 1e-8),
        CheckResult("extremal Q constancy alpha=1", cases, q[1.0], 1e-8),
        CheckResult("extremal Euler-Lagrange alpha=1", cases, el, 1e-7),
        CheckResult("extremal symmetry alpha=1", cases, symm, 1e-8),
        CheckResult(
            "negative control fails (min of 3 defects)",
            1,
            min(ctrl_q, ctrl_el, ctrl_symm),
            1e-3,
            sense="min",
        ),
    ]


SUITES = {
    "kazdan-warner": check_kazdan_warner,
    "lemma-identity": check_lemma_identity,
    "covariance": check_covariance,
    "sharp-inequality": check_sharp_inequality,
    "extremal": check_extremal,
}


def run_checks(target: str, seed: int = 0, n: int = 256) -> list[CheckResult]:
    if target == "all":
        names = TARGETS
    elif target in SUITES:
        names = (target,)
    else:
        raise KeyError(target)
    results = []
    for name in names:
        # each suite gets its own stream so suites are reproducible in isolation
        rng = np.random.default_rng([seed, TARGETS.index(name)])
        results.extend(SUITES[name](rng, n))
    return results


def format_report(target: str, seed: int, n: int, results: list[CheckResult]) -> str:
    lines = [
        f"qflow check {target}  seed={seed}  N={n}",
        f"{'check':<44}{'cases':>6}  {'value':>11}  {'bound':>11}  result",
    ]
    for r in results:
        bound = ("<= " if r.sense == "max" else ">= ") + f"{r.threshold:.1e}"
        lines.append(
            f"{r.name:<44}{r.cases:>6}  {r.worst:>11.3e}  {bound:>11}  "
            + ("PASS" if r.passed else "FAIL")
        )
    ok = all(r.passed for r in results)
    lines.append(f"overall: {'PASS' if ok else 'FAIL'}")
    return "\n".join(lines) + "\n"
