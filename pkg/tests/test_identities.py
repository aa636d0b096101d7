import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from conftest import N, band_limited, positive_fields
from qflow import spectral
from qflow.conformal import center_normalize, orthogonality_moments, project_to_orthogonal
from qflow.curvature import ConformalFactor, arc_length, g_norm, q_curvature
from qflow.errors import OrthogonalityError, PreconditionError
from qflow.flow import flow_rhs
from qflow.identities import (
    SHARP_CONSTANT,
    ExtremalParams,
    euler_lagrange_residual,
    extremal_metric,
    integral_identity_residual,
    kazdan_warner_residual,
    mode_decay_coefficients,
    predicted_rate,
    sharp_inequality_check,
    sharp_product,
    steady_state_report,
    symmetry_residual,
)

TWO_PI = 2 * np.pi


def test_kazdan_warner_examples(theta):
    assert kazdan_warner_residual(ConformalFactor(np.ones(N), 4)) == (0.0, 0.0)
    assert kazdan_warner_residual(ConformalFactor(np.ones(N), 1)) == (0.0, 0.0)
    r = kazdan_warner_residual(ConformalFactor(1 + 0.3 * np.cos(3 * theta), 4))
    assert max(map(abs, r)) < 1e-10
    v = 1.2 + 0.4 * np.sin(2 * theta) + 0.1 * np.cos(5 * theta)
    assert max(map(abs, kazdan_warner_residual(ConformalFactor(v, 1)))) < 1e-10


@given(positive_fields(), st.sampled_from([1.0, 4.0]))
def test_kazdan_warner_property(v, alpha):
    r = kazdan_warner_residual(ConformalFactor(v, alpha))
    scale = max(1.0, float(np.max(np.abs(q_curvature(ConformalFactor(v, alpha))))))
    assert max(map(abs, r)) < 1e-10 * scale


def test_kazdan_warner_is_not_vacuous(theta):
    # the same integral against a harmonic outside the identity does not vanish
    m = ConformalFactor(1 + 0.3 * np.cos(3 * theta), 4)
    dq = spectral.derivative(q_curvature(m))
    assert abs(spectral.integrate(dq * m.density * np.sin(3 * theta))) > 1e-2


def test_kazdan_warner_rejects_other_alpha():
    with pytest.raises(PreconditionError):
        kazdan_warner_residual(ConformalFactor(np.ones(N), 2.0))


def test_integral_identity_examples(theta):
    assert abs(integral_identity_residual(np.ones(N), 4)) < 1e-14
    assert abs(integral_identity_residual(2 + np.cos(5 * theta), 4)) < 1e-10
    phi = 1 + 0.5 * np.sin(3 * theta) - 0.2 * np.cos(6 * theta)
    assert abs(integral_identity_residual(phi, 1)) < 1e-10


@pytest.mark.parametrize("alpha", [1, 4])
def test_integral_identity_symbolic(alpha):
    # exact integral for a symbolic trigonometric phi
    x = sp.symbols("x", real=True)
    phi = 2 + sp.cos(x) / 3 + sp.sin(2 * x) / 5 - sp.cos(4 * x) / 7
    d = [sp.diff(phi, x, k) for k in range(5)]
    if alpha == 4:
        expr = (16 * d[4] + 40 * d[2] + 9 * d[0]) * (sp.Rational(2, 3) * d[1] * sp.cos(x) + d[0] * sp.sin(x))
    else:
        expr = (d[4] + 10 * d[2] + 9 * d[0]) * (d[1] * sp.cos(2 * x) / 3 + d[0] * sp.sin(2 * x))
    assert sp.simplify(sp.integrate(sp.expand(expr), (x, 0, 2 * sp.pi))) == 0
    grid_phi = sp.lambdify(x, phi, "numpy")(spectral.grid(N))
    assert abs(integral_identity_residual(grid_phi, alpha)) < 1e-10


@given(band_limited(), st.sampled_from([1.0, 4.0]))
def test_integral_identity_property(phi, alpha):
    scale = max(1.0, float(np.max(np.abs(phi))) ** 2)
    assert abs(integral_identity_residual(phi, alpha)) < 1e-10 * scale


def test_integral_identity_rejects_other_alpha():
    with pytest.raises(PreconditionError):
        integral_identity_residual(np.ones(N), 2.0)


def test_extremal_examples():
    assert np.max(np.abs(extremal_metric(ExtremalParams(1.0, 1.0, 0.4, 1.0), N).v - 1)) < 1e-15
    assert extremal_metric(ExtremalParams(1.0, 2.0, 0.0, 1.0), N).v[0] == pytest.approx(8.0)
    m = extremal_metric(ExtremalParams(1.0, 1.5, 0.7, 1.0), N, normalize_length=True)
    assert abs(arc_length(m) - TWO_PI) < 1e-12
    assert steady_state_report(m).q_constancy < 1e-8
    assert np.max(np.abs(orthogonality_moments(m).as_array())) < 1e-10


def test_extremal_params_validation():
    with pytest.raises(ValueError):
        ExtremalParams(c=-1.0)
    with pytest.raises(ValueError):
        ExtremalParams(lam=0.0)
    with pytest.raises(ValueError):
        ExtremalParams(alpha=2.0)


@pytest.mark.parametrize("alpha", [1.0, 4.0])
@pytest.mark.parametrize("lam", [1.3, 2.0, 3.0])
@pytest.mark.parametrize("beta", [0.0, 1.0, 2.5])
def test_extremal_family_has_constant_q(alpha, lam, beta):
    m = extremal_metric(ExtremalParams(1.0, lam, beta, alpha), N, normalize_length=True)
    rep = steady_state_report(m)
    assert rep.q_constancy < 1e-8
    if alpha == 1.0:
        assert rep.el_residual < 1e-7 and rep.tau > 0
        assert rep.symm_residual < 1e-8
    else:
        assert rep.el_residual is None


def test_euler_lagrange_examples(theta):
    tau, res = euler_lagrange_residual(ConformalFactor(np.ones(N), 1))
    assert tau == 9.0 and res == 0.0
    tau, res = euler_lagrange_residual(extremal_metric(ExtremalParams(1.0, 2.0, 0.0, 1.0), N))
    assert res < 1e-7 and tau > 0
    _, res = euler_lagrange_residual(ConformalFactor(1 + 0.2 * np.cos(4 * theta), 1))
    assert res > 1e-3


def test_euler_lagrange_lhs_is_the_operator(theta):
    # 9 Q v^(-5/3) is v'''' + 10 v'' + 9 v for alpha = 1
    v = 1 + 0.2 * np.cos(2 * theta) + 0.1 * np.sin(3 * theta)
    m = ConformalFactor(v, 1)
    lhs = 9 * q_curvature(m) * v ** (-5 / 3)
    d = spectral.derivatives(v, 4)
    assert np.max(np.abs(lhs - (d[4] + 10 * d[2] + 9 * d[0]))) < 1e-11


def test_alpha_one_only_checks():
    m = ConformalFactor(np.ones(N), 4)
    with pytest.raises(PreconditionError):
        euler_lagrange_residual(m)
    with pytest.raises(PreconditionError):
        symmetry_residual(m)


def test_symmetry_examples(theta):
    assert symmetry_residual(ConformalFactor(np.ones(N), 1)) == 0.0
    ext = extremal_metric(ExtremalParams(1.0, 1.8, 0.3, 1.0), N)
    assert symmetry_residual(ext) < 1e-8
    assert symmetry_residual(ConformalFactor(1 + 0.1 * np.cos(theta), 1)) > 1e-3


def test_symmetry_quantity_matches_w_form(theta):
    v = 1 + 0.2 * np.cos(3 * theta)
    w = v ** (1 / 3)
    ref = w**5 * (spectral.derivative(w, 2) + w)
    m = ConformalFactor(v, 1)
    from qflow.curvature import scalar_curvature

    assert np.max(np.abs(m.speed * scalar_curvature(m) - ref)) < 1e-12


def test_sharp_examples(theta):
    prod, margin = sharp_inequality_check(np.ones(N))
    assert prod == pytest.approx(144 * math.pi**4, rel=1e-14)
    assert abs(margin) < 1e-8
    _, margin = sharp_inequality_check(extremal_metric(ExtremalParams(1.0, 2.0, 0.0, 1.0), N).v)
    assert abs(margin) < 1e-6 * SHARP_CONSTANT
    u = project_to_orthogonal(ConformalFactor(1 + 0.05 * np.cos(4 * theta), 1)).v
    assert sharp_inequality_check(u)[1] > 0


def test_sharp_product_scale_invariant(theta):
    u = 1 + 0.1 * np.cos(5 * theta)
    assert sharp_product(3.0 * u) == pytest.approx(sharp_product(u), rel=1e-13)


def test_sharp_rejects_non_orthogonal(theta):
    with pytest.raises(OrthogonalityError) as info:
        sharp_inequality_check(1 + 0.1 * np.cos(theta))
    assert info.value.moments.norm() > 1e-3


@given(positive_fields(amp=0.4))
def test_sharp_inequality_property(v):
    u = project_to_orthogonal(ConformalFactor(v, 1)).v
    _, margin = sharp_inequality_check(u)
    assert margin >= -1e-6 * SHARP_CONSTANT


def test_mode_coefficient_examples():
    assert mode_decay_coefficients(4, 2) == -20.0
    assert mode_decay_coefficients(1, 1) == -2.5
    assert mode_decay_coefficients(1, 4) == -20.0
    assert predicted_rate(4) == 20.0 and predicted_rate(1) == 20.0


def test_mode_coefficient_polynomials():
    n = sp.symbols("n")
    gen = -(sp.Symbol("a") ** 2 * n**4 - 10 * sp.Symbol("a") * n**2 + 24) / 6
    assert sp.expand(gen.subs("a", 4)) == sp.expand(-sp.Rational(8, 3) * n**4 + sp.Rational(20, 3) * n**2 - 4)
    assert sp.expand(gen.subs("a", 1)) == sp.expand(-n**4 / 6 + sp.Rational(5, 3) * n**2 - 4)
    for k in range(1, 9):
        if k != 2:
            assert mode_decay_coefficients(1, k) == pytest.approx(float(gen.subs({"a": 1, n: k})))
        if k >= 2:
            assert mode_decay_coefficients(4, k) == pytest.approx(float(gen.subs({"a": 4, n: k})))


@pytest.mark.parametrize("alpha,n", [(4.0, 2), (4.0, 3), (1.0, 1), (1.0, 3), (1.0, 4), (1.0, 5)])
def test_mode_coefficient_is_linearised_g2_rate(alpha, n, theta):
    # d/dt log G2 along the flow for a small single-mode perturbation
    eps, h = 1e-4, 1e-6
    m = ConformalFactor(1 + eps * np.cos(n * theta), alpha)
    r = flow_rhs(m)
    rate = (g_norm(m.with_v(m.v + h * r)) - g_norm(m.with_v(m.v - h * r))) / (2 * h * g_norm(m))
    assert rate == pytest.approx(mode_decay_coefficients(alpha, n), rel=1e-5)


@pytest.mark.parametrize("alpha,n", [(4.0, 1), (1.0, 2), (2.0, 3), (4.0, 0)])
def test_mode_coefficient_domain(alpha, n):
    with pytest.raises(ValueError):
        mode_decay_coefficients(alpha, n)


def test_centered_alpha4_bound(theta):
    # the k = 1 mode is the only one with a non-positive symbol for alpha 4
    from qflow.curvature import functional_F

    _, u = center_normalize(ConformalFactor(1 + 0.3 * np.cos(theta) + 0.1 * np.sin(2 * theta), 4))
    assert functional_F(u.v, 4) >= TWO_PI**4
