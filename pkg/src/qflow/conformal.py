"""Moebius-type reparametrizations of the circle and the centering solver.

For ``alpha = 4`` the family is built on half angles,

    Psi(theta)   = (lam**2 cos^2((theta-beta)/2) + lam**-2 sin^2((theta-beta)/2))**(3/2)
    omega(theta) = beta + 2 arctan(lam**-2 tan((theta-beta)/2)),

and for ``alpha = 1`` on full angles: ``Gamma`` is ``Psi`` with ``(theta-beta)/2``
replaced by ``theta-beta``, and ``sigma(theta) = beta + arctan(lam**-2 tan(theta-beta))``.  The transform is
``(T v)(theta) = v(map(theta)) * factor(theta)``; it preserves the arc length
``int v**(-2/3)`` because ``map' = factor**(-2/3)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import spectral
from .curvature import ConformalFactor
from .errors import ConvergenceError, PositivityError
from .spectral import TWO_PI

# resampling error above which mobius_apply warns
RESAMPLE_WARN = 1e-9
MOMENT_TOL = 1e-10
FD_STEP = 1e-6


@dataclass(frozen=True)
class MobiusParams:
    lam: float = 1.0
    beta: float = 0.0

    def __post_init__(self):
        lam = float(self.lam)
        if not (math.isfinite(lam) and lam > 0):
            raise ValueError(f"lambda must be positive and finite, got {self.lam!r}")
        beta = float(self.beta)
        if not math.isfinite(beta):
            raise ValueError(f"beta must be finite, got {self.beta!r}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "beta", beta % TWO_PI)

    @property
    def s(self) -> float:
        return math.log(self.lam)

    @property
    def is_identity(self) -> bool:
        return self.lam == 1.0

    def inverse(self) -> "MobiusParams":
        return MobiusParams(1.0 / self.lam, self.beta)


def _angle_factor(alpha: float) -> float:
    """Angle scale of the building block: 1/2 for ``alpha = 4``, 1 for ``alpha = 1``."""
    if alpha == 4.0:
        return 0.5
    if alpha == 1.0:
        return 1.0
    raise ValueError(f"Moebius families exist for alpha in (1, 4), got {alpha}")


def _shift(y, mu):
    """``arctan(mu tan y) - y`` as a smooth periodic function of ``y``."""
    cy, sy = np.cos(y), np.sin(y)
    return np.arctan2((mu - 1.0) * sy * cy, cy * cy + mu * sy * sy)


def mobius_factor(p: MobiusParams, alpha: float, theta=None, n: int = 256) -> np.ndarray:
    """``Psi`` (alpha 4) or ``Gamma`` (alpha 1) at ``theta`` (default: the n-point grid)."""
    half = _angle_factor(float(alpha))
    if theta is None:
        theta = spectral.grid(n)
    y = half * (np.asarray(theta, dtype=float) - p.beta)
    return (p.lam**2 * np.cos(y) ** 2 + np.sin(y) ** 2 / p.lam**2) ** 1.5


def mobius_reparam(p: MobiusParams, alpha: float, theta) -> np.ndarray:
    """The circle map ``omega`` (alpha 4) or ``sigma`` (alpha 1).

    Written as ``theta + d(theta)`` with ``d`` bounded and periodic, which
    glues the arctan branches continuously and fixes ``theta = beta``.
    """
    half = _angle_factor(float(alpha))
    theta = np.asarray(theta, dtype=float)
    return theta + _shift(half * (theta - p.beta), p.lam**-2) / half


def mobius_apply(m: ConformalFactor, p: MobiusParams) -> ConformalFactor:
    """``(T v)(theta) = v(map(theta)) * factor(theta)`` on the grid of ``m``."""
    if p.is_identity:
        return m
    u = _transform_samples(m, p, m.n)
    err = _resample_error(m, p, u)
    if err > RESAMPLE_WARN:
        warnings.warn(
            f"Moebius composition under-resolved at N={m.n}: estimated error {err:.2e}",
            RuntimeWarning,
            stacklevel=2,
        )
    spectral.check_positive(u, "transformed factor")
    return m.with_v(u)


def _transform_samples(m: ConformalFactor, p: MobiusParams, n: int) -> np.ndarray:
    theta = spectral.grid(n)
    x = mobius_reparam(p, m.alpha, theta)
    return spectral.evaluate(m.v, x) * mobius_factor(p, m.alpha, theta)


def _resample_error(m: ConformalFactor, p: MobiusParams, u) -> float:
    """Difference between the N-point result interpolated to 2N and a direct 2N evaluation."""
    fine = _transform_samples(m, p, 2 * m.n)
    return float(np.max(np.abs(spectral.interpolate(u, 2 * m.n) - fine)))


# --- centering -------------------------------------------------------------


def _target_harmonic(alpha: float) -> int:
    return 1 if alpha == 4.0 else 2


def _target_moments(u, k: int, theta) -> np.ndarray:
    return np.array(
        [spectral.integrate(u * np.cos(k * theta)), spectral.integrate(u * np.sin(k * theta))]
    )


def _params_from_xy(xy, k: int) -> MobiusParams:
    # (x, y) = s (cos k beta, sin k beta); beta has period 2 pi / k in the family
    s = math.hypot(xy[0], xy[1])
    beta = math.atan2(xy[1], xy[0]) / k if s > 0 else 0.0
    return MobiusParams(math.exp(s), beta)


def _xy_from_params(p: MobiusParams, k: int) -> np.ndarray:
    return p.s * np.array([math.cos(k * p.beta), math.sin(k * p.beta)])


def _newton(residual, x0, max_iter: int = 40):
    x = np.array(x0, dtype=float)
    r = residual(x)
    for _ in range(max_iter):
        if np.max(np.abs(r)) < 0.01 * MOMENT_TOL:
            break
        jac = np.empty((2, 2))
        for j in range(2):
            e = np.zeros(2)
            e[j] = FD_STEP
            jac[:, j] = (residual(x + e) - residual(x - e)) / (2 * FD_STEP)
        try:
            dx = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            break
        t = 1.0
        while t > 1e-4:
            trial = x + t * dx
            r_trial = residual(trial)
            if np.linalg.norm(r_trial) < np.linalg.norm(r):
                x, r = trial, r_trial
                break
            t *= 0.5
        else:
            break
    return x, r


def center_normalize(
    m: ConformalFactor, hint: MobiusParams | None = None
) -> tuple[MobiusParams, ConformalFactor]:
    """Find ``(lam, beta)`` whose transform kills the target harmonic of ``u = T v``.

    The target harmonic is ``cos, sin theta`` for ``alpha = 4`` and
    ``cos, sin 2 theta`` for ``alpha = 1``; moments use ``dtheta``.  Newton
    runs in the Cartesian chart ``s (cos k beta, sin k beta)``, ``s = log lam``,
    which is regular at the identity.  It starts from ``hint`` (continuity
    along a flow) or from the identity, and falls back to a 64 x 64 grid
    search over ``s in [-3, 3]`` when it stalls.
    """
    k = _target_harmonic(m.alpha)
    theta = m.theta

    def residual(xy):
        p = _params_from_xy(xy, k)
        u = _transform_samples(m, p, m.n) if not p.is_identity else m.v
        return _target_moments(u, k, theta)

    starts = [np.zeros(2)]
    if hint is not None:
        starts.insert(0, _xy_from_params(hint, k))
    best_x, best_r = None, None
    for x0 in starts:
        x, r = _newton(residual, x0)
        if best_r is None or np.max(np.abs(r)) < np.max(np.abs(best_r)):
            best_x, best_r = x, r
        if np.max(np.abs(r)) < MOMENT_TOL:
            break
    else:
        x0 = _grid_search(residual, k)
        x, r = _newton(residual, x0)
        if np.max(np.abs(r)) < np.max(np.abs(best_r)):
            best_x, best_r = x, r
    resid = float(np.max(np.abs(best_r)))
    if not resid < MOMENT_TOL:
        raise ConvergenceError(
            f"centering did not converge; best moment residual {resid:.3e}", residual=resid
        )
    p = _params_from_xy(best_x, k)
    return p, mobius_apply(m, p)


def _grid_search(residual, k: int, size: int = 64) -> np.ndarray:
    best, best_val = np.zeros(2), np.inf
    for s in np.linspace(-3.0, 3.0, size):
        for beta in np.linspace(0.0, TWO_PI, size, endpoint=False):
            xy = s * np.array([math.cos(k * beta), math.sin(k * beta)])
            try:
                val = float(np.linalg.norm(residual(xy)))
            except PositivityError:
                continue
            if val < best_val:
                best, best_val = xy, val
    return best


# --- orthogonality moments -------------------------------------------------


@dataclass(frozen=True)
class MomentVector:
    """Moments of ``v**(-5/3)`` against ``cos, sin theta`` and ``cos, sin 3 theta``."""

    m_c1: float
    m_s1: float
    m_c3: float
    m_s3: float

    def __iter__(self) -> Iterator[float]:
        return iter((self.m_c1, self.m_s1, self.m_c3, self.m_s3))

    def as_array(self) -> np.ndarray:
        return np.array(list(self))

    def norm(self) -> float:
        return float(np.linalg.norm(self.as_array()))


def _moment_basis(n: int) -> np.ndarray:
    theta = spectral.grid(n)
    return np.array([np.cos(theta), np.sin(theta), np.cos(3 * theta), np.sin(3 * theta)])


def orthogonality_moments(m: ConformalFactor) -> MomentVector:
    # int z cos k = 2 pi Re c_k and int z sin k = -2 pi Im c_k; exact zeros for constant z
    c = spectral.to_spectrum(spectral.pointwise_power(m.v, -5.0 / 3.0))
    return MomentVector(
        TWO_PI * c[1].real, -TWO_PI * c[1].imag, TWO_PI * c[3].real, -TWO_PI * c[3].imag
    )


def project_to_orthogonal(
    m: ConformalFactor, tol: float = 1e-12, max_iter: int = 50
) -> ConformalFactor:
    """Remove the four moments by a multiplicative correction of ``z = v**(-5/3)``.

    ``z <- z (1 + sum eps_i b_i)`` with ``eps`` from the linear system that
    cancels the moments exactly; repeated until the moment norm is below
    ``tol``.  The constraint is linear in ``z``, so one pass normally suffices.
    """
    basis = _moment_basis(m.n)
    z = spectral.pointwise_power(m.v, -5.0 / 3.0)
    changed = False
    for _ in range(max_iter):
        b = np.array([spectral.integrate(z * h) for h in basis])
        if np.linalg.norm(b) < tol:
            break
        gram = np.array([[spectral.integrate(z * hi * hj) for hj in basis] for hi in basis])
        eps = np.linalg.solve(gram, -b)
        corr = 1.0 + eps @ basis
        if not np.min(corr) > 0:
            raise PositivityError(
                "orthogonal projection would make v nonpositive; "
                f"moments {b.tolist()}, min correction {np.min(corr):.3g}"
            )
        z = z * corr
        changed = True
    else:
        raise ConvergenceError(
            f"orthogonal projection stalled at moment norm {np.linalg.norm(b):.3e}",
            residual=float(np.linalg.norm(b)),
        )
    if not changed:
        return m
    return m.with_v(spectral.pointwise_power(z, -3.0 / 5.0))
