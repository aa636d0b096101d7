"""Time integration of the length-normalized Q-curvature flow.

The flow is evolved in the conformal factor,

    v_t = -(3/4) (Q - Qbar) v,

with a first-order linearly implicit step: the frozen operator
``-kappa d^4/dtheta^4``, ``kappa = alpha^2/12 max(v^(8/3))``, is treated
implicitly (diagonal in Fourier space) and everything else explicitly.  After
each step ``v`` is multiplied by ``(L/2 pi)^(3/2)``, which restores the length
``2 pi`` exactly; the pre-rescale drift is recorded and gated.  For
``alpha = 1`` the four orthogonality moments, which the exact flow conserves,
are treated the same way: their per-step drift is recorded and gated and the
state is projected back before the length rescale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import spectral
from .conformal import orthogonality_moments, project_to_orthogonal
from .curvature import (
    ConformalFactor,
    CurvatureBundle,
    arc_length,
    curvature_bundle,
    mean_q,
    q_curvature,
    scalar_curvature,
    sigma_derivatives,
    sobolev_diagnostics,
)
from .errors import (
    BlowUpError,
    ConfigError,
    InsufficientDecayError,
    OrthogonalityError,
)
from .spectral import TWO_PI

MOMENT_TOL = 1e-8


@dataclass(frozen=True)
class FlowConfig:
    alpha: float = 4.0
    n: int = 256
    dt_max: float = 1e-3
    safety: float = 0.5
    T: float = 50.0
    g2_stop: float = 1e-12
    sample_stride: int = 1
    snapshot_stride: int = 0
    length_tol: float = 1e-8
    moment_tol: float = 1e-8
    qbar_slack: float = 1e-12
    max_halvings: int = 20
    dt_init: float = 1e-5
    orthogonality: str = "project"

    def __post_init__(self):
        if float(self.alpha) not in (1.0, 4.0):
            raise ConfigError(f"alpha must be 1 or 4, got {self.alpha!r}")
        object.__setattr__(self, "alpha", float(self.alpha))
        if self.n < spectral.MIN_POINTS or self.n % 2:
            raise ConfigError(f"n must be even and >= {spectral.MIN_POINTS}, got {self.n!r}")
        for name in ("dt_max", "safety", "T", "g2_stop", "length_tol", "moment_tol", "dt_init"):
            val = getattr(self, name)
            if not (isinstance(val, (int, float)) and math.isfinite(val) and val > 0):
                raise ConfigError(f"{name} must be a positive number, got {val!r}")
        if self.qbar_slack < 0:
            raise ConfigError(f"qbar_slack must be nonnegative, got {self.qbar_slack!r}")
        if self.sample_stride < 1 or self.snapshot_stride < 0 or self.max_halvings < 0:
            raise ConfigError("strides and max_halvings must be nonnegative (sample_stride >= 1)")
        if self.orthogonality not in ("project", "strict"):
            raise ConfigError(
                f"orthogonality must be 'project' or 'strict', got {self.orthogonality!r}"
            )


@dataclass(frozen=True)
class FlowState:
    t: float
    m: ConformalFactor
    bundle: CurvatureBundle
    g2: float
    dt_used: float = 0.0
    length_drift: float = 0.0
    moment_drift: float = 0.0
    rejected: int = 0

    @classmethod
    def from_factor(cls, m: ConformalFactor, t: float = 0.0, **kw) -> "FlowState":
        b = curvature_bundle(m)
        g2 = spectral.integrate((b.Q - b.Qbar) ** 2 * m.density)
        return cls(t=t, m=m, bundle=b, g2=g2, **kw)

    @property
    def v(self) -> np.ndarray:
        return self.m.v


SERIES_COLUMNS = (
    "t", "Qbar", "L", "G2", "Qs2", "Qss2", "minv", "maxv", "m_c1", "m_s1", "m_c3", "m_s3",
)


@dataclass
class Trajectory:
    alpha: float
    rows: list[dict] = field(default_factory=list)
    snapshots: list[tuple[float, np.ndarray]] = field(default_factory=list)
    step_drift: list[float] = field(default_factory=list)
    step_moment_drift: list[float] = field(default_factory=list)
    step_dt: list[float] = field(default_factory=list)
    rejected: int = 0
    status: str = "running"
    message: str = ""
    final: FlowState | None = None

    def record(self, s: FlowState) -> None:
        qs2, qss2 = sobolev_diagnostics(s.m, s.bundle.Q)
        row = dict(
            t=s.t, Qbar=s.bundle.Qbar, L=s.bundle.L, G2=s.g2, Qs2=qs2, Qss2=qss2,
            minv=float(s.v.min()), maxv=float(s.v.max()),
        )
        if self.alpha == 1.0:
            row.update(zip(("m_c1", "m_s1", "m_c3", "m_s3"), orthogonality_moments(s.m)))
        self.rows.append(row)

    def column(self, name: str) -> np.ndarray:
        return np.array([r.get(name, np.nan) for r in self.rows])

    def __len__(self) -> int:
        return len(self.rows)

    def moment_norms(self) -> np.ndarray:
        return np.sqrt(sum(self.column(k) ** 2 for k in ("m_c1", "m_s1", "m_c3", "m_s3")))


# --- right-hand sides ------------------------------------------------------


def flow_rhs(m: ConformalFactor, normalized: bool = True) -> np.ndarray:
    """``-(3/4)(Q - Qbar) v``; without normalization ``-(3/4) Q v``."""
    Q = q_curvature(m)
    shift = mean_q(m, Q) if normalized else 0.0
    return -0.75 * (Q - shift) * m.v


def flow_rhs_expanded(m: ConformalFactor) -> np.ndarray:
    """The same velocity expanded in theta-derivatives of ``v``.

    ``-(alpha^2/12) v^(8/3) v'''' - (5 alpha/6) v^(8/3) v'' - (3/4) v^(11/3) + (3/4) Qbar v``
    with ``Qbar L = alpha^2/9 int v''^2 - 10 alpha/9 int v'^2 + int v^2``.
    """
    a = m.alpha
    v, v1, v2, _, v4 = spectral.derivatives(m.v, 4)
    total_q = (
        (a * a / 9.0) * spectral.integrate(v2 * v2)
        - (10.0 * a / 9.0) * spectral.integrate(v1 * v1)
        + spectral.integrate(v * v)
    )
    qbar = total_q / spectral.integrate(spectral.pointwise_power(v, -2.0 / 3.0))
    v83 = spectral.pointwise_power(v, 8.0 / 3.0)
    return (
        -(a * a / 12.0) * v83 * v4
        - (5.0 * a / 6.0) * v83 * v2
        - 0.75 * spectral.pointwise_power(v, 11.0 / 3.0)
        + 0.75 * qbar * v
    )


# --- stepping --------------------------------------------------------------


def _stiff_coefficient(m: ConformalFactor) -> float:
    return (m.alpha**2 / 12.0) * float(np.max(spectral.pointwise_power(m.v, 8.0 / 3.0)))


def _raw_update(m: ConformalFactor, dt: float, normalized: bool = True) -> np.ndarray:
    """``v + dt IFFT[f_hat / (1 + dt kappa k^4)]`` with ``f`` the flow velocity."""
    f = flow_rhs(m, normalized)
    k4 = spectral.wavenumbers(m.n) ** 4
    damp = 1.0 / (1.0 + dt * _stiff_coefficient(m) * k4)
    return m.v + dt * np.fft.irfft(np.fft.rfft(f) * damp, m.n)


def _try_step(s: FlowState, dt: float, cfg: FlowConfig) -> FlowState | str:
    """One attempt; returns the new state or the reason for rejection."""
    v_new = _raw_update(s.m, dt)
    if not np.all(np.isfinite(v_new)) or not v_new.min() > 1e-6:
        return "positivity"
    m_new = s.m.with_v(v_new)
    moment_drift = 0.0
    if m_new.alpha == 1.0:
        moment_drift = orthogonality_moments(m_new).norm()
        if moment_drift > cfg.moment_tol:
            return "moments"
        m_new = project_to_orthogonal(m_new)
    length = arc_length(m_new)
    drift = abs(length - TWO_PI)
    if drift > cfg.length_tol:
        return "length"
    m_new = m_new.scaled((length / TWO_PI) ** 1.5)
    new = FlowState.from_factor(
        m_new, s.t + dt, dt_used=dt, length_drift=drift, moment_drift=moment_drift
    )
    if new.bundle.Qbar > s.bundle.Qbar + cfg.qbar_slack:
        return "qbar"
    return new


def step(s: FlowState, dt: float, cfg: FlowConfig = FlowConfig()) -> FlowState:
    """Advance by ``dt``, halving on rejection (positivity, moment or length drift, Qbar rise)."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    dt = min(dt, cfg.dt_max)
    reasons = []
    for attempt in range(cfg.max_halvings + 1):
        out = _try_step(s, dt, cfg)
        if isinstance(out, FlowState):
            return replace(out, rejected=attempt)
        reasons.append(out)
        dt *= 0.5
    raise BlowUpError(
        f"step rejected {cfg.max_halvings + 1} times at t={s.t:.6g} "
        f"(last reason: {reasons[-1]}, min v {s.v.min():.3g})",
        t=s.t,
        dt=dt,
    )


def _proposed_dt(s: FlowState, dt_prev: float, cfg: FlowConfig) -> float:
    dev = float(np.max(np.abs(s.bundle.Q - s.bundle.Qbar)))
    limit = cfg.safety / (0.75 * dev) if dev > 0 else math.inf
    if s.length_drift > 0:
        # the pre-rescale drift grows like dt^2; aim at half the gate
        limit = min(limit, dt_prev * math.sqrt(0.5 * cfg.length_tol / s.length_drift))
    return min(cfg.dt_max, 1.5 * dt_prev, limit)


def normalize_length(m: ConformalFactor) -> ConformalFactor:
    return m.scaled((arc_length(m) / TWO_PI) ** 1.5)


def prepare_initial(v0, cfg: FlowConfig) -> ConformalFactor:
    """Validate ``v0``, enforce orthogonality for alpha 1, rescale to length ``2 pi``."""
    m = v0 if isinstance(v0, ConformalFactor) else ConformalFactor(v0, cfg.alpha)
    if m.alpha != cfg.alpha:
        m = ConformalFactor(m.v, cfg.alpha)
    if m.n != cfg.n:
        m = m.with_v(spectral.interpolate(m.v, cfg.n))
    if cfg.alpha == 1.0:
        mv = orthogonality_moments(m)
        if not mv.norm() < MOMENT_TOL:
            if cfg.orthogonality == "strict":
                raise OrthogonalityError(
                    f"initial data violates the orthogonality condition "
                    f"(moment norm {mv.norm():.3e})",
                    moments=mv,
                )
            m = project_to_orthogonal(m)
    return normalize_length(m)


def run(cfg: FlowConfig, v0, record=None, raise_on_blowup: bool = True) -> Trajectory:
    """Integrate to ``cfg.T`` or until ``G2 < cfg.g2_stop``.

    ``record``, if given, is called with every accepted state.  With
    ``raise_on_blowup=False`` a failed step ends the run with status
    ``"blow-up"`` and the trajectory up to the last accepted state.
    """
    s = FlowState.from_factor(prepare_initial(v0, cfg))
    traj = Trajectory(alpha=cfg.alpha)
    traj.record(s)
    if cfg.snapshot_stride:
        traj.snapshots.append((s.t, s.v.copy()))
    dt = cfg.dt_init
    k = 0
    while True:
        if s.g2 < cfg.g2_stop:
            traj.status = "converged"
            break
        if s.t >= cfg.T * (1 - 1e-14):
            traj.status = "horizon"
            break
        dt_try = min(_proposed_dt(s, dt, cfg), cfg.T - s.t)
        try:
            s = step(s, dt_try, cfg)
        except BlowUpError as exc:
            if raise_on_blowup:
                raise
            traj.status, traj.message = "blow-up", str(exc)
            break
        dt = s.dt_used
        k += 1
        traj.rejected += s.rejected
        traj.step_drift.append(s.length_drift)
        traj.step_moment_drift.append(s.moment_drift)
        traj.step_dt.append(s.dt_used)
        if record is not None:
            record(s)
        final = s.g2 < cfg.g2_stop or s.t >= cfg.T * (1 - 1e-14)
        if k % cfg.sample_stride == 0 or final:
            traj.record(s)
        if cfg.snapshot_stride and (k % cfg.snapshot_stride == 0 or final):
            traj.snapshots.append((s.t, s.v.copy()))
    traj.final = s
    return traj


# --- rate fitting ----------------------------------------------------------


@dataclass(frozen=True)
class DecayFit:
    C: float
    a: float
    residual: float
    samples: int


def fit_decay_rate(traj, window=(1e-12, 1e-3), min_samples: int = 10) -> DecayFit:
    """Least-squares fit of ``log G2 = log C - a t`` over samples with ``G2`` in ``window``.

    ``traj`` is a :class:`Trajectory` or a ``(t, G2)`` pair of arrays; the
    residual is the rms misfit in ``log G2``.
    """
    if isinstance(traj, Trajectory):
        t, g2 = traj.column("t"), traj.column("G2")
    else:
        t, g2 = (np.asarray(x, dtype=float) for x in traj)
    lo, hi = window
    sel = (g2 >= lo) & (g2 <= hi)
    if sel.sum() < min_samples:
        raise InsufficientDecayError(
            f"only {int(sel.sum())} samples with G2 in [{lo:g}, {hi:g}]; need {min_samples}"
        )
    A = np.column_stack([np.ones(sel.sum()), -t[sel]])
    coef, *_ = np.linalg.lstsq(A, np.log(g2[sel]), rcond=None)
    resid = np.log(g2[sel]) - A @ coef
    return DecayFit(
        C=float(np.exp(coef[0])),
        a=float(coef[1]),
        residual=float(np.sqrt(np.mean(resid**2))),
        samples=int(sel.sum()),
    )


# --- unnormalized flow -----------------------------------------------------


@dataclass(frozen=True)
class EquivalenceReport:
    discrepancy: float
    t_hat_end: float
    steps: int
    scale_end: float
    # max relative gap between the scale from the Qbar quadrature and 4 pi^2 / L^2
    scale_mismatch: float


def unnormalized_equivalence(
    v0, T: float, alpha: float = 4.0, dt: float = 1e-4
) -> EquivalenceReport:
    """Compare the unnormalized flow ``v_t = -(3/4) Q v``, mapped to normalized
    variables, with the normalized flow at matched normalized times.

    The metric scale is ``s(t) = 4 pi^2 / L0^2 exp(-int Qbar)``, which equals
    ``4 pi^2 / L(t)^2`` because ``L' = Qbar L / 2`` along the unnormalized
    flow.  The mapped factor is ``s^(-3/4) v`` and the normalized time is
    ``int s^2 dt`` (trapezoid rule).  The length form of ``s`` is used for the
    mapping, since it is exact for the discrete states; the quadrature form is
    reported as ``scale_mismatch``.  The normalized leg takes exactly the
    matched time increments.
    """
    if not 0 < T <= 0.1:
        raise ValueError(f"horizon must lie in (0, 0.1], got {T}")
    m = v0 if isinstance(v0, ConformalFactor) else ConformalFactor(v0, alpha)
    steps = max(1, int(math.ceil(T / dt - 1e-9)))
    h = T / steps
    L0 = arc_length(m)
    qbars, lengths, states = [mean_q(m)], [L0], [m.v]
    for i in range(steps):
        v_new = _raw_update(m, h, normalized=False)
        if not np.all(np.isfinite(v_new)) or not v_new.min() > 1e-6:
            raise BlowUpError(f"unnormalized flow lost positivity at t={i * h:.4g}", t=i * h, dt=h)
        m = m.with_v(v_new)
        qbars.append(mean_q(m))
        lengths.append(arc_length(m))
        states.append(m.v)
    qbars = np.array(qbars)
    scale = 4.0 * math.pi**2 / np.array(lengths) ** 2
    int_q = np.concatenate([[0.0], np.cumsum(0.5 * h * (qbars[1:] + qbars[:-1]))])
    scale_q = (4.0 * math.pi**2 / L0**2) * np.exp(-int_q)
    s2 = scale**2
    t_hat = np.concatenate([[0.0], np.cumsum(0.5 * h * (s2[1:] + s2[:-1]))])

    mn = ConformalFactor(scale[0] ** -0.75 * states[0], m.alpha)
    worst = float(np.max(np.abs(mn.v - normalize_length(mn).v)))
    for i in range(steps):
        mn = normalize_length(mn.with_v(_raw_update(mn, t_hat[i + 1] - t_hat[i])))
        mapped = scale[i + 1] ** -0.75 * states[i + 1]
        worst = max(worst, float(np.max(np.abs(mapped - mn.v))))
    return EquivalenceReport(
        discrepancy=worst,
        t_hat_end=float(t_hat[-1]),
        steps=steps,
        scale_end=float(scale[-1]),
        scale_mismatch=float(np.max(np.abs(scale_q / scale - 1.0))),
    )


# --- evolution identities --------------------------------------------------


@dataclass(frozen=True)
class EvolutionResiduals:
    R: float
    Q: float
    dsigma: float


def predicted_rates(m: ConformalFactor, phi=None):
    """Time derivatives of ``R``, ``Q`` and ``int phi dsigma`` implied by the flow.

    ``R_t = -(alpha/4) Q_ss - R (Q - Qbar)``,
    ``Q_t = -(alpha^2/12) Q_ssss - (5 alpha/6) (R Q_s)_s - 2 Q (Q - Qbar)``,
    ``(int phi dsigma)_t = 1/2 int phi (Q - Qbar) dsigma``, with ``s`` arclength.
    """
    a = m.alpha
    b = curvature_bundle(m)
    dev = b.Q - b.Qbar
    jet = m.jet
    _, qs, qss, _, qssss = sigma_derivatives(b.Q, jet)
    # (R Q_s)_s = R_s Q_s + R Q_ss
    rs = sigma_derivatives(b.R, jet)[1]
    r_t = -(a / 4.0) * qss - b.R * dev
    q_t = -(a * a / 12.0) * qssss - (5.0 * a / 6.0) * (rs * qs + b.R * qss) - 2.0 * b.Q * dev
    if phi is None:
        phi = np.cos(m.theta) + 0.5
    ds_t = 0.5 * spectral.integrate(phi * dev * m.density)
    return r_t, q_t, ds_t


def evolution_residuals(m: ConformalFactor, h: float, phi=None) -> EvolutionResiduals:
    """Max-norm gap between central differences along the flow velocity and :func:`predicted_rates`.

    The difference quotient ``(X(v + h f) - X(v - h f)) / 2h`` with
    ``f = v_t`` has error ``O(h^2)``, so the residual should fall fourfold
    when ``h`` is halved until round-off takes over.  ``Q_t`` contains an
    eighth derivative of ``v``, which amplifies the round-off tail of the
    spectrum by ``k**8``; the probe state is therefore passed through
    :func:`spectral.denoise` first (a change at the 1e-16 level).
    """
    m = m.with_v(spectral.to_grid(spectral.denoise(spectral.to_spectrum(m.v)), m.n))
    if phi is None:
        phi = np.cos(m.theta) + 0.5
    f = flow_rhs(m)
    plus, minus = m.with_v(m.v + h * f), m.with_v(m.v - h * f)
    dr = (scalar_curvature(plus) - scalar_curvature(minus)) / (2 * h)
    dq = (q_curvature(plus) - q_curvature(minus)) / (2 * h)
    dsig = (
        spectral.integrate(phi * plus.density) - spectral.integrate(phi * minus.density)
    ) / (2 * h)
    r_t, q_t, ds_t = predicted_rates(m, phi)
    return EvolutionResiduals(
        R=float(np.max(np.abs(dr - r_t))),
        Q=float(np.max(np.abs(dq - q_t))),
        dsigma=abs(dsig - ds_t),
    )


def qbar_rate_residuals(traj: Trajectory, probes: int = 10):
    """Relative gaps between central-difference ``dQbar/dt`` and ``-(3/(4 pi)) G2``.

    Probes are spread over the interior samples where the predicted change of
    ``Qbar`` across the stencil exceeds ``1e4`` ulp of ``Qbar``, so round-off
    in the difference stays below about ``2e-4`` relative; returns
    ``(times, relative residuals)``.
    """
    t, qbar, g2 = traj.column("t"), traj.column("Qbar"), traj.column("G2")
    change = (3.0 / (4.0 * math.pi)) * g2[1:-1] * (t[2:] - t[:-2])
    usable = np.flatnonzero(change > 1e4 * np.spacing(np.abs(qbar[1:-1]))) + 1
    if usable.size < probes:
        raise InsufficientDecayError(f"only {usable.size} interior samples with a resolvable Qbar change")
    idx = usable[np.linspace(0, usable.size - 1, probes).round().astype(int)]
    rates = (qbar[idx + 1] - qbar[idx - 1]) / (t[idx + 1] - t[idx - 1])
    target = -(3.0 / (4.0 * math.pi)) * g2[idx]
    return t[idx], np.abs(rates - target) / np.abs(target)

