import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from conftest import N, positive_fields
from qflow import spectral
from qflow.curvature import (
    ConformalFactor,
    _power_jet,
    apply_conformal_operator,
    arc_length,
    conformal_covariance_residual,
    curvature_bundle,
    excluded_mode_energy,
    fourier_quadratic_form,
    functional_F,
    g_norm,
    mean_q,
    q_curvature,
    round_operator,
    scalar_curvature,
    sigma_derivatives,
    sobolev_diagnostics,
)
from qflow.conformal import project_to_orthogonal
from qflow.errors import PositivityError, PreconditionError

TH = sp.symbols("theta", real=True)
TWO_PI = 2 * np.pi


def _sym_curvatures(v_expr, alpha):
    """R and Q straight from their definitions in v, as numpy callables."""
    a = sp.Rational(alpha)
    R = v_expr * (a * sp.diff(v_expr ** sp.Rational(1, 3), TH, 2) + v_expr ** sp.Rational(1, 3))
    Q = v_expr ** sp.Rational(5, 3) * (
        a**2 / 9 * sp.diff(v_expr, TH, 4) + 10 * a / 9 * sp.diff(v_expr, TH, 2) + v_expr
    )
    return sp.lambdify(TH, R, "numpy"), sp.lambdify(TH, Q, "numpy")


SYM_FIELDS = [
    1 + sp.Rational(3, 10) * sp.cos(2 * TH) + sp.Rational(1, 10) * sp.sin(3 * TH),
    sp.exp(sp.Rational(1, 5) * sp.cos(TH)),
    2 + sp.sin(TH) / 2,
]


@pytest.mark.parametrize("alpha", [1, 4])
@pytest.mark.parametrize("idx", range(len(SYM_FIELDS)))
def test_curvatures_match_symbolic_definitions(alpha, idx, theta):
    expr = SYM_FIELDS[idx]
    R_fn, Q_fn = _sym_curvatures(expr, alpha)
    v = sp.lambdify(TH, expr, "numpy")(theta) * np.ones(N)
    m = ConformalFactor(v, alpha)
    Q_ref = Q_fn(theta)
    assert np.max(np.abs(scalar_curvature(m) - R_fn(theta))) < 1e-11
    assert np.max(np.abs(q_curvature(m) - Q_ref)) < 1e-10 * np.max(np.abs(Q_ref))


def test_sigma_derivative_expansion_is_exact():
    # D = h d/dtheta applied k times, expanded symbolically and compared with the coded form
    h, f = sp.Function("h")(TH), sp.Function("f")(TH)
    D = [f]
    for _ in range(4):
        D.append(sp.expand(h * sp.diff(D[-1], TH)))
    hs = [sp.diff(h, TH, k) for k in range(5)]
    fs = [sp.diff(f, TH, k) for k in range(5)]
    coded = [
        fs[0],
        hs[0] * fs[1],
        hs[0] * hs[1] * fs[1] + hs[0] ** 2 * fs[2],
        (hs[0] * hs[1] ** 2 + hs[0] ** 2 * hs[2]) * fs[1]
        + 3 * hs[0] ** 2 * hs[1] * fs[2]
        + hs[0] ** 3 * fs[3],
        (hs[0] * hs[1] ** 3 + 4 * hs[0] ** 2 * hs[1] * hs[2] + hs[0] ** 3 * hs[3]) * fs[1]
        + (7 * hs[0] ** 2 * hs[1] ** 2 + 4 * hs[0] ** 3 * hs[2]) * fs[2]
        + 6 * hs[0] ** 3 * hs[1] * fs[3]
        + hs[0] ** 4 * fs[4],
    ]
    for sym, code in zip(D, coded):
        assert sp.simplify(sym - sp.expand(code)) == 0


def test_sigma_derivatives_numeric(theta):
    v = 1 + 0.2 * np.cos(2 * theta)
    m = ConformalFactor(v, 4)
    f = np.sin(theta)
    d = sigma_derivatives(f, m.jet)
    # D_sigma f = v^{2/3} f', twice
    once = m.speed * np.cos(theta)
    twice = m.speed * spectral.derivative(once)
    assert np.max(np.abs(d[1] - once)) < 1e-13
    assert np.max(np.abs(d[2] - twice)) < 1e-11


def test_power_jet_matches_sympy(theta):
    expr = 1 + sp.Rational(1, 4) * sp.cos(TH) + sp.Rational(1, 10) * sp.sin(2 * TH)
    v = sp.lambdify(TH, expr, "numpy")(theta)
    got = _power_jet(spectral.derivatives(v, 4), 2.0 / 3.0)
    for k in range(5):
        ref = sp.lambdify(TH, sp.diff(expr ** sp.Rational(2, 3), TH, k), "numpy")(theta)
        assert np.max(np.abs(got[k] - ref)) < 1e-12


def test_round_metric_values(theta):
    for alpha in (1, 4):
        m = ConformalFactor(np.ones(N), alpha)
        assert np.max(np.abs(q_curvature(m) - 1)) < 1e-14
        assert np.max(np.abs(scalar_curvature(m) - 1)) < 1e-14
        assert arc_length(m) == pytest.approx(TWO_PI, rel=1e-15)


@pytest.mark.parametrize("alpha", [1, 4])
def test_constant_factor(alpha):
    m = ConformalFactor(np.full(N, 1.7), alpha)
    assert np.max(np.abs(q_curvature(m) - 1.7 ** (8 / 3))) < 1e-13


def test_constant_q_on_extremal_alpha1():
    from qflow.identities import ExtremalParams, extremal_metric

    m = extremal_metric(ExtremalParams(1.0, 1.5, 0.7, 1.0), N, normalize_length=True)
    Q = q_curvature(m)
    assert abs(arc_length(m) - TWO_PI) < 1e-12
    assert np.max(np.abs(Q - Q.mean())) < 1e-8


def test_operator_examples(theta):
    one = ConformalFactor(np.ones(N), 1)
    assert np.max(np.abs(apply_conformal_operator(one, np.cos(theta)))) < 1e-12
    assert np.max(np.abs(apply_conformal_operator(one, np.cos(3 * theta)))) < 1e-12
    four = ConformalFactor(np.ones(N), 4)
    f = np.cos(2 * theta)
    assert np.max(np.abs(apply_conformal_operator(four, f) - 105 / 9 * f)) < 1e-11


@pytest.mark.parametrize("alpha", [1, 4])
@pytest.mark.parametrize("k", range(7))
def test_round_operator_symbol(alpha, k, theta):
    f = np.cos(k * theta)
    sym = (alpha**2 * k**4 - 10 * alpha * k**2 + 9) / 9
    out = apply_conformal_operator(ConformalFactor(np.ones(N), alpha), f)
    assert np.max(np.abs(out - sym * f)) < 1e-11 * max(1.0, abs(sym))
    assert np.max(np.abs(round_operator(f, alpha) - sym * f)) < 1e-11 * max(1.0, abs(sym))


@given(positive_fields(), st.sampled_from([1.0, 4.0]))
def test_q_is_p_applied_to_v(v, alpha):
    m = ConformalFactor(v, alpha)
    ref = spectral.pointwise_power(v, 5 / 3) * round_operator(v, alpha)
    assert np.max(np.abs(q_curvature(m) - ref)) < 1e-11 * max(1.0, np.max(np.abs(ref)))


@given(positive_fields(), st.sampled_from([1.0, 4.0]))
def test_mean_of_q_deviation_vanishes(v, alpha):
    m = ConformalFactor(v, alpha)
    b = curvature_bundle(m)
    assert abs(spectral.measure_integral(b.Q - b.Qbar, v)) < 1e-10 * max(1.0, abs(b.Qbar))


@given(positive_fields(), st.floats(0.3, 3.0), st.sampled_from([1.0, 4.0]))
def test_scaling_law(v, c, alpha):
    m = ConformalFactor(v, alpha)
    mc = m.scaled(c)
    Q, Qc = q_curvature(m), q_curvature(mc)
    assert np.max(np.abs(Qc - c ** (8 / 3) * Q)) <= 1e-11 * np.max(np.abs(c ** (8 / 3) * Q))
    assert arc_length(mc) == pytest.approx(c ** (-2 / 3) * arc_length(m), rel=1e-11)


def test_covariance_examples(theta):
    one = ConformalFactor(np.ones(N), 4)
    psi = np.sin(theta) + 0.3 * np.cos(5 * theta)
    assert conformal_covariance_residual(one, np.ones(N), psi) < 1e-12
    g1 = ConformalFactor(np.ones(N), 1)
    assert conformal_covariance_residual(g1, 2 + np.cos(theta), np.ones(N)) < 1e-9
    assert conformal_covariance_residual(
        one, 1.5 + 0.5 * np.sin(2 * theta), np.cos(3 * theta)
    ) < 1e-9


def test_covariance_against_non_round_reference(theta):
    m1 = ConformalFactor(1 + 0.2 * np.cos(theta), 4)
    assert conformal_covariance_residual(m1, 1 + 0.3 * np.sin(2 * theta), np.cos(theta)) < 1e-9


def test_functional_constant_field():
    for alpha in (1, 4):
        assert functional_F(np.ones(N), alpha) == pytest.approx(TWO_PI**4, rel=1e-14)


@given(positive_fields(), st.sampled_from([1.0, 4.0]))
def test_functional_is_total_q(v, alpha):
    m = ConformalFactor(v, alpha)
    m = m.scaled((arc_length(m) / TWO_PI) ** 1.5)
    assert functional_F(m.v, alpha) == pytest.approx(TWO_PI**4 * mean_q(m), rel=1e-10)


@given(positive_fields(), st.floats(0.3, 3.0))
def test_functional_is_scale_invariant(v, c):
    assert functional_F(c * v, 4) == pytest.approx(functional_F(v, 4), rel=1e-12)


def _unit(u):
    return u * (spectral.integrate(u ** (-2 / 3)) / TWO_PI) ** 1.5


@pytest.mark.parametrize("alpha,k", [(4, 2), (1, 4)])
def test_fourier_form_matches_functional(alpha, k, theta):
    eps = 1e-3
    u = _unit(1 + eps * np.cos(k * theta))
    assert abs(fourier_quadratic_form(u, alpha) - functional_F(u, alpha)) < TWO_PI**4 * eps**3
    assert fourier_quadratic_form(np.ones(N), alpha) == pytest.approx(TWO_PI**4, rel=1e-14)


def test_fourier_form_requires_unit_length(theta):
    with pytest.raises(PreconditionError):
        fourier_quadratic_form(1 + 0.1 * np.cos(2 * theta), 4)


def test_excluded_mode_energy(theta):
    u = 1 + 0.1 * np.cos(theta) + 0.02 * np.sin(2 * theta) + 0.03 * np.cos(5 * theta)
    assert excluded_mode_energy(u, 4) == pytest.approx(0.01, rel=1e-12)
    assert excluded_mode_energy(u, 1) == pytest.approx(0.01 + 0.0004, rel=1e-12)


@given(positive_fields(amp=0.3))
def test_functional_lower_bound_alpha4(v):
    # centring kills the k = 1 mode, where the symbol is negative
    from qflow.conformal import center_normalize

    _, u = center_normalize(ConformalFactor(v, 4))
    assert functional_F(u.v, 4) >= TWO_PI**4 - 1e-6


@given(positive_fields(amp=0.3))
def test_functional_lower_bound_alpha1(v):
    u = project_to_orthogonal(ConformalFactor(v, 1))
    assert functional_F(u.v, 1) >= TWO_PI**4 - 1e-6


def test_g_norm_trivial_cases():
    for c in (1.0, 2.5):
        m = ConformalFactor(np.full(N, c), 4)
        assert g_norm(m, 2) < 1e-24 and g_norm(m, 3) < 1e-24
    assert max(sobolev_diagnostics(ConformalFactor(np.ones(N), 1))) < 1e-24


def test_g_norm_against_fine_grid_oracle(theta):
    m = ConformalFactor(1 + 0.1 * np.cos(2 * theta), 4)
    x = spectral.grid(8 * N)
    fine = ConformalFactor(1 + 0.1 * np.cos(2 * x), 4)
    Qf = q_curvature(fine)
    w = fine.density
    qbar = np.sum(Qf * w) / np.sum(w)
    ref = TWO_PI * np.mean((Qf - qbar) ** 2 * w)
    assert abs(g_norm(m, 2) - ref) < 1e-10


def test_g_norm_rejects_small_p():
    with pytest.raises(ValueError):
        g_norm(ConformalFactor(np.ones(N), 4), 1.5)


def test_sobolev_diagnostics_chain_rule(theta):
    v = 1 + 0.15 * np.sin(3 * theta)
    m = ConformalFactor(v, 1)
    Q = q_curvature(m)
    h = m.speed
    qs = h * spectral.derivative(Q)
    qss = h * spectral.derivative(qs)
    a, b = sobolev_diagnostics(m)
    assert a == pytest.approx(spectral.integrate(qs**2 * m.density), rel=1e-10)
    assert b == pytest.approx(spectral.integrate(qss**2 * m.density), rel=1e-8)


def test_factor_validation(theta):
    with pytest.raises(PositivityError):
        ConformalFactor(np.cos(theta), 4)
    with pytest.raises(ValueError):
        ConformalFactor(np.ones(N), -1)
    m = ConformalFactor(np.ones(N), 4)
    with pytest.raises(ValueError):
        m.v[0] = 2.0
