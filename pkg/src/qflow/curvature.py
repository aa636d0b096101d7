"""Conformal curvatures of metrics ``g = v**(-4/3) g_s`` on the circle.

All quantities are evaluated through the speed ``h = v**(2/3) = dtheta/dsigma``.
In that variable the arclength derivative is ``D_sigma = h * d/dtheta`` and
both curvatures are polynomial differential expressions in ``h``:

    R = h**2 + (alpha/2) h h'' - (alpha/4) h'**2
    Q = h**4 + alpha (5/3 h**3 h'' + 5/6 h**2 h'**2)
          + alpha**2 (h**3 h''''/6 + h**2 h' h'''/3 + h**2 h''**2/4
                      - h h'**2 h''/4 + h'**4/16)

which is algebraically the same as ``v**(5/3) (alpha**2/9 v'''' + 10 alpha/9 v''
+ v)``.  For the Moebius family ``h`` is a trigonometric polynomial of
degree one or two while ``v`` is not band-limited, and for a trigonometric
polynomial ``v`` it is the other way round.  The derivatives of ``h`` are
therefore taken from whichever of the two has the narrower spectrum (see
``ConformalFactor.jet``), which keeps both cases at round-off level.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import spectral
from .errors import PreconditionError
from .spectral import TWO_PI

SUPPORTED_ALPHAS = (1.0, 4.0)


@dataclass(frozen=True)
class ConformalFactor:
    """Positive factor ``v`` of the metric ``v**(-4/3) g_s`` together with ``alpha``."""

    v: np.ndarray
    alpha: float = 4.0

    def __post_init__(self):
        v = spectral.check_field(self.v).copy()
        spectral.check_positive(v, "conformal factor")
        v.flags.writeable = False
        object.__setattr__(self, "v", v)
        alpha = float(self.alpha)
        if not alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha!r}")
        object.__setattr__(self, "alpha", alpha)

    @property
    def n(self) -> int:
        return self.v.size

    @property
    def theta(self) -> np.ndarray:
        return spectral.grid(self.n)

    @cached_property
    def speed(self) -> np.ndarray:
        return spectral.pointwise_power(self.v, 2.0 / 3.0)

    @cached_property
    def density(self) -> np.ndarray:
        """``dsigma/dtheta = v**(-2/3)``."""
        return spectral.pointwise_power(self.v, -2.0 / 3.0)

    @cached_property
    def jet(self) -> list[np.ndarray]:
        """``[h, h', h'', h''', h'''']`` at the nodes.

        Differentiated spectrally in whichever of ``h`` and ``v`` has the
        narrower spectrum; starting from ``v`` the chain rule for
        ``v**(2/3)`` is applied pointwise.
        """
        if spectral.bandwidth(self.speed) < spectral.bandwidth(self.v):
            return spectral.derivatives(self.speed, 4)
        return _power_jet(spectral.derivatives(self.v, 4), 2.0 / 3.0)

    def with_v(self, v) -> "ConformalFactor":
        return ConformalFactor(v, self.alpha)

    def scaled(self, c: float) -> "ConformalFactor":
        return ConformalFactor(c * self.v, self.alpha)


@dataclass(frozen=True)
class CurvatureBundle:
    R: np.ndarray
    Q: np.ndarray
    Qbar: float
    L: float


def round_metric(n: int = 256, alpha: float = 4.0) -> ConformalFactor:
    return ConformalFactor(np.ones(n), alpha)


def _power_jet(vj, p):
    """Derivatives of ``v**p`` up to fourth order from those of ``v``."""
    v, v1, v2, v3, v4 = vj
    g1, g2, g3, g4 = (
        np.prod([p - i for i in range(k)]) * v ** (p - k) for k in range(1, 5)
    )
    return [
        v**p,
        g1 * v1,
        g1 * v2 + g2 * v1 * v1,
        g1 * v3 + 3.0 * g2 * v1 * v2 + g3 * v1**3,
        g1 * v4
        + g2 * (4.0 * v1 * v3 + 3.0 * v2 * v2)
        + 6.0 * g3 * v1 * v1 * v2
        + g4 * v1**4,
    ]


def _r_from_jet(jet, alpha):
    h, h1, h2 = jet[:3]
    return h * h + 0.5 * alpha * h * h2 - 0.25 * alpha * h1 * h1


def _q_from_jet(jet, alpha):
    h, h1, h2, h3, h4 = jet
    h_2 = h * h
    h_3 = h_2 * h
    first = (5.0 / 3.0) * h_3 * h2 + (5.0 / 6.0) * h_2 * h1 * h1
    second = (
        h_3 * h4 / 6.0
        + h_2 * h1 * h3 / 3.0
        + 0.25 * h_2 * h2 * h2
        - 0.25 * h * h1 * h1 * h2
        + h1**4 / 16.0
    )
    return h_2 * h_2 + alpha * first + alpha * alpha * second


def sigma_derivatives(f, jet) -> list[np.ndarray]:
    """``[f, D f, D^2 f, D^3 f, D^4 f]`` with ``D = h d/dtheta``, expanded in theta-derivatives."""
    h, h1, h2, h3, _ = jet
    f0, f1, f2, f3, f4 = spectral.derivatives(f, 4)
    h_2 = h * h
    h_3 = h_2 * h
    d1 = h * f1
    d2 = h * h1 * f1 + h_2 * f2
    d3 = (h * h1 * h1 + h_2 * h2) * f1 + 3.0 * h_2 * h1 * f2 + h_3 * f3
    d4 = (
        (h * h1**3 + 4.0 * h_2 * h1 * h2 + h_3 * h3) * f1
        + (7.0 * h_2 * h1 * h1 + 4.0 * h_3 * h2) * f2
        + 6.0 * h_3 * h1 * f3
        + h_2 * h_2 * f4
    )
    return [f0, d1, d2, d3, d4]


def scalar_curvature(m: ConformalFactor) -> np.ndarray:
    return _r_from_jet(m.jet, m.alpha)


def q_curvature(m: ConformalFactor) -> np.ndarray:
    return _q_from_jet(m.jet, m.alpha)


def arc_length(m: ConformalFactor) -> float:
    return spectral.integrate(m.density)


def mean_q(m: ConformalFactor, Q=None) -> float:
    """Mean of ``Q`` against ``dsigma``, from the same quadrature as :func:`g_norm`."""
    if Q is None:
        Q = q_curvature(m)
    return spectral.integrate(Q * m.density) / arc_length(m)


def curvature_bundle(m: ConformalFactor) -> CurvatureBundle:
    Q = q_curvature(m)
    return CurvatureBundle(
        R=scalar_curvature(m), Q=Q, Qbar=mean_q(m, Q), L=arc_length(m)
    )


def apply_conformal_operator(m: ConformalFactor, f) -> np.ndarray:
    """``P_g f = alpha**2/9 D^4 f + 10 alpha/9 D(R D f) + Q f`` with ``D = D_sigma``."""
    jet = m.jet
    a = m.alpha
    h, h1, _, h3, _ = jet
    R = _r_from_jet(jet, a)
    dR = 2.0 * h * h1 + 0.5 * a * h * h3
    f0, d1, _, _, d4 = sigma_derivatives(f, jet)
    f1 = d1 / h
    f2 = spectral.derivatives(f, 2)[2]
    div_r_grad = h * h * dR * f1 + h * h1 * R * f1 + h * h * R * f2
    return (a * a / 9.0) * d4 + (10.0 * a / 9.0) * div_r_grad + _q_from_jet(jet, a) * f0


def round_operator(f, alpha: float) -> np.ndarray:
    """``P_{g_s} f = alpha**2/9 f'''' + 10 alpha/9 f'' + f``."""
    f0, _, f2, _, f4 = spectral.derivatives(f, 4)
    return (alpha * alpha / 9.0) * f4 + (10.0 * alpha / 9.0) * f2 + f0


def conformal_covariance_residual(m1: ConformalFactor, phi, psi) -> float:
    """Max-norm of ``P_{g2} psi - phi**(5/3) P_{g1}(psi phi)`` for ``g2 = phi**(-4/3) g1``.

    Both metrics are written against ``g_s``: ``g1`` has factor ``v1`` and
    ``g2`` has factor ``phi * v1``, so both sides live on the theta grid.
    """
    phi = spectral.check_field(phi)
    spectral.check_positive(phi, "phi")
    psi = spectral.check_field(psi)
    m2 = m1.with_v(phi * m1.v)
    lhs = apply_conformal_operator(m2, psi)
    rhs = spectral.pointwise_power(phi, 5.0 / 3.0) * apply_conformal_operator(m1, psi * phi)
    return float(np.max(np.abs(lhs - rhs)))


def functional_F(phi, alpha: float) -> float:
    """Scale-invariant total-Q functional ``(int phi P_{g_s} phi) (int phi**(-2/3))**3``.

    For ``alpha = 4`` this is ``16/9 (int phi''^2 - 5/2 phi'^2 + 9/16 phi^2)
    (int phi^(-2/3))^3`` and for ``alpha = 1`` it is ``1/9 (int phi''^2 -
    10 phi'^2 + 9 phi^2)(int phi^(-2/3))^3``.  It equals ``Qbar * L**4`` of the
    metric ``phi**(-4/3) g_s``.
    """
    phi = spectral.check_field(phi)
    spectral.check_positive(phi, "phi")
    a = float(alpha)
    f0, f1, f2 = spectral.derivatives(phi, 2)
    quad = (
        (a * a / 9.0) * spectral.integrate(f2 * f2)
        - (10.0 * a / 9.0) * spectral.integrate(f1 * f1)
        + spectral.integrate(f0 * f0)
    )
    length = spectral.integrate(spectral.pointwise_power(phi, -2.0 / 3.0))
    return quad * length**3


def _excluded_modes(alpha: float) -> tuple[int, ...]:
    if alpha == 4.0:
        return (1,)
    if alpha == 1.0:
        return (1, 2, 3)
    return ()


def _mode_amplitudes(u) -> np.ndarray:
    """Cosine amplitudes ``a_k`` of ``u = a_0 + sum a_k cos(k theta - gamma_k)``."""
    c = spectral.to_spectrum(u)
    amp = 2.0 * np.abs(c)
    amp[0] = c[0].real
    amp[-1] = abs(c[-1].real)
    return amp


def _check_unit_length(u, tol: float = 1e-8) -> None:
    length = spectral.integrate(spectral.pointwise_power(u, -2.0 / 3.0))
    if abs(length - TWO_PI) > tol:
        raise PreconditionError(
            f"u must be normalised to length 2*pi (|L - 2pi| <= {tol:g}); got L = {length:.12g}"
        )


def fourier_quadratic_form(u, alpha: float) -> float:
    """Mode-sum value of :func:`functional_F` for a unit-length ``u``.

    ``(2 pi)**4 (a_0**2 + 1/18 sum_k (alpha**2 k**4 - 10 alpha k**2 + 9) a_k**2)``
    with the sum over the modes a centred field may occupy: ``k >= 2`` for
    ``alpha = 4`` and ``k >= 4`` for ``alpha = 1``.  Mode restrictions are
    not enforced; see :func:`excluded_mode_energy`.
    """
    u = spectral.check_field(u)
    spectral.check_positive(u, "u")
    _check_unit_length(u)
    a = float(alpha)
    amp = _mode_amplitudes(u)
    k = np.arange(amp.size, dtype=float)
    weight = (a * a * k**4 - 10.0 * a * k**2 + 9.0) / 18.0
    keep = k >= 1
    keep[list(_excluded_modes(a))] = False
    return TWO_PI**4 * (amp[0] ** 2 + float(np.sum(weight[keep] * amp[keep] ** 2)))


def excluded_mode_energy(u, alpha: float) -> float:
    """``sum a_k**2`` over the modes :func:`fourier_quadratic_form` leaves out."""
    amp = _mode_amplitudes(spectral.check_field(u))
    return float(sum(amp[k] ** 2 for k in _excluded_modes(float(alpha))))


def g_norm(m: ConformalFactor, p: float = 2.0) -> float:
    """``G_p = int |Q - Qbar|**p dsigma``."""
    if p < 2:
        raise ValueError(f"G_p is defined for p >= 2, got {p}")
    Q = q_curvature(m)
    dev = np.abs(Q - mean_q(m, Q))
    return spectral.integrate(dev**p * m.density)


def sobolev_diagnostics(m: ConformalFactor, Q=None) -> tuple[float, float]:
    """``(||Q_sigma||**2, ||Q_sigma sigma||**2)`` in ``L^2(dsigma)``."""
    if Q is None:
        Q = q_curvature(m)
    _, qs, qss, _, _ = sigma_derivatives(Q, m.jet)
    w = m.density
    return spectral.integrate(qs * qs * w), spectral.integrate(qss * qss * w)
