"""Integral identities, steady-state tests and the extremal families.

Every function returns a residual that vanishes in exact arithmetic for the
inputs it admits; the test suite pairs each one with negative controls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import spectral
from .conformal import MobiusParams, mobius_factor, orthogonality_moments
from .curvature import ConformalFactor, q_curvature, scalar_curvature, mean_q
from .errors import OrthogonalityError, PreconditionError
from .spectral import TWO_PI

SHARP_CONSTANT = 144.0 * math.pi**4
# moment norm required by the constrained inequality
ORTHOGONALITY_TOL = 1e-8


@dataclass(frozen=True)
class ExtremalParams:
    c: float = 1.0
    lam: float = 1.0
    beta: float = 0.0
    alpha: float = 1.0

    def __post_init__(self):
        if not (self.c > 0 and self.lam > 0):
            raise ValueError(f"c and lambda must be positive, got c={self.c}, lambda={self.lam}")
        if float(self.alpha) not in (1.0, 4.0):
            raise ValueError(f"extremal families exist for alpha in (1, 4), got {self.alpha}")


def extremal_metric(
    p: ExtremalParams, n: int = 256, normalize_length: bool = False
) -> ConformalFactor:
    """``c (lam^2 cos^2 + lam^-2 sin^2)^(3/2)``: full angle for alpha 1, half angle for alpha 4."""
    alpha = float(p.alpha)
    v = p.c * mobius_factor(MobiusParams(p.lam, p.beta), alpha, n=n)
    if normalize_length:
        length = spectral.integrate(spectral.pointwise_power(v, -2.0 / 3.0))
        v = v * (length / TWO_PI) ** 1.5
    return ConformalFactor(v, alpha)


def _low_harmonic(alpha: float) -> int:
    if alpha == 4.0:
        return 1
    if alpha == 1.0:
        return 2
    raise PreconditionError(f"no Kazdan-Warner harmonic for alpha = {alpha}")


def kazdan_warner_residual(m: ConformalFactor) -> tuple[float, float]:
    """``(int Q' v^(-2/3) cos k theta, int Q' v^(-2/3) sin k theta)``, k = 1 (alpha 4) or 2 (alpha 1)."""
    k = _low_harmonic(m.alpha)
    dq = spectral.derivatives(q_curvature(m), 1)[1]
    w = dq * m.density
    theta = m.theta
    return (
        spectral.integrate(w * np.cos(k * theta)),
        spectral.integrate(w * np.sin(k * theta)),
    )


def integral_identity_residual(phi, alpha: float) -> float:
    """Algebraic identity pairing the round operator with a conformal Killing field.

    alpha 4: ``int (16 phi'''' + 40 phi'' + 9 phi)(2/3 phi' cos + phi sin) = 0``;
    alpha 1: ``int (phi'''' + 10 phi'' + 9 phi)(1/3 phi' cos 2x + phi sin 2x) = 0``.
    """
    phi = spectral.check_field(phi)
    f0, f1, f2, _, f4 = spectral.derivatives(phi, 4)
    theta = spectral.grid(phi.size)
    alpha = float(alpha)
    if alpha == 4.0:
        op = 16.0 * f4 + 40.0 * f2 + 9.0 * f0
        field = (2.0 / 3.0) * f1 * np.cos(theta) + f0 * np.sin(theta)
    elif alpha == 1.0:
        op = f4 + 10.0 * f2 + 9.0 * f0
        field = (1.0 / 3.0) * f1 * np.cos(2 * theta) + f0 * np.sin(2 * theta)
    else:
        raise PreconditionError(f"identity is stated for alpha in (1, 4), got {alpha}")
    return spectral.integrate(op * field)


def _require_alpha_one(m: ConformalFactor, what: str) -> None:
    if m.alpha != 1.0:
        raise PreconditionError(f"{what} is defined for alpha = 1, got {m.alpha}")


def euler_lagrange_residual(m: ConformalFactor) -> tuple[float, float]:
    """Least-squares ``tau`` and max defect of ``v'''' + 10 v'' + 9 v = tau v^(-5/3)``.

    The left side equals ``9 Q v^(-5/3)`` for the alpha-1 curvature, which is
    how it is evaluated (see the curvature module on accuracy).
    """
    _require_alpha_one(m, "the Euler-Lagrange check")
    basis = spectral.pointwise_power(m.v, -5.0 / 3.0)
    lhs = 9.0 * q_curvature(m) * basis
    tau = float(np.dot(lhs, basis) / np.dot(basis, basis))
    return tau, float(np.max(np.abs(lhs - tau * basis)))


def symmetry_residual(m: ConformalFactor) -> float:
    """Antipodal defect of ``w^5 (w'' + w)``, ``w = v^(1/3)``.

    ``w^5 (w'' + w) = v^(2/3) R`` with ``R`` the alpha-1 scalar curvature.
    """
    _require_alpha_one(m, "the symmetry check")
    q = m.speed * scalar_curvature(m)
    return float(np.max(np.abs(q - np.roll(q, m.n // 2))))


def sharp_product(u) -> float:
    """``int (u''^2 - 10 u'^2 + 9 u^2) (int u^(-2/3))^3``."""
    u = spectral.check_field(u)
    f0, f1, f2 = spectral.derivatives(u, 2)
    quad = spectral.integrate(f2 * f2 - 10.0 * f1 * f1 + 9.0 * f0 * f0)
    return quad * spectral.integrate(spectral.pointwise_power(u, -2.0 / 3.0)) ** 3


def sharp_inequality_check(u) -> tuple[float, float]:
    """``(product, product - 144 pi^4)`` for an admissible ``u``.

    Raises :class:`OrthogonalityError` when the cubic moments of ``u`` do not
    vanish to ``1e-8``.
    """
    m = ConformalFactor(u, 1.0)
    mv = orthogonality_moments(m)
    if not mv.norm() < ORTHOGONALITY_TOL:
        raise OrthogonalityError(
            f"u violates the orthogonality constraint: moment norm {mv.norm():.3e}", moments=mv
        )
    prod = sharp_product(m.v)
    return prod, prod - SHARP_CONSTANT


def mode_decay_coefficients(alpha: float, n: int) -> float:
    """Linear decay coefficient of the n-th mode of ``Q - Qbar`` near the round metric.

    Equals ``-(alpha^2 n^4 - 10 alpha n^2 + 24) / 6``: ``-(8/3) n^4 + (20/3) n^2 - 4``
    for alpha 4 (``n >= 2``) and ``-(1/6) n^4 + (5/3) n^2 - 4`` for alpha 1 (``n != 2``).
    """
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"mode index must be a positive integer, got {n!r}")
    alpha = float(alpha)
    if alpha == 4.0 and n < 2:
        raise ValueError("alpha = 4 coefficients are defined for n >= 2")
    if alpha == 1.0 and n == 2:
        raise ValueError("alpha = 1 coefficients exclude n = 2")
    if alpha not in (1.0, 4.0):
        raise ValueError(f"alpha must be 1 or 4, got {alpha}")
    return -(alpha * alpha * n**4 - 10.0 * alpha * n * n + 24.0) / 6.0


def predicted_rate(alpha: float) -> float:
    """Slowest admissible mode rate: n = 2 for alpha 4, n = 4 for alpha 1."""
    return -mode_decay_coefficients(alpha, 2 if float(alpha) == 4.0 else 4)


@dataclass(frozen=True)
class SteadyStateReport:
    q_constancy: float
    el_residual: float | None = None
    tau: float | None = None
    symm_residual: float | None = None


def steady_state_report(m: ConformalFactor) -> SteadyStateReport:
    """Constancy of ``Q``; for alpha 1 also the Euler-Lagrange and symmetry defects."""
    Q = q_curvature(m)
    qc = float(np.max(np.abs(Q - mean_q(m, Q))))
    if m.alpha != 1.0:
        return SteadyStateReport(q_constancy=qc)
    tau, el = euler_lagrange_residual(m)
    return SteadyStateReport(
        q_constancy=qc, el_residual=el, tau=tau, symm_residual=symmetry_residual(m)
    )
