"""Exterior-calculus layer: wedge, d, pullback, complex-structure action,
and the i del-delbar operator."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kummerflat import forms as F

C2 = F.COMPLEX2


def c2_coords(rng, n=1):
    return rng.uniform(-2, 2, size=(n, 4))


coord_strategy = st.lists(
    st.floats(-2, 2, allow_nan=False, allow_infinity=False), min_size=4, max_size=4
).map(np.array)


# ---------------------------------------------------------------------------
# charts and points


def test_chart_validate_rejects_out_of_domain():
    with pytest.raises(ValueError, match="r"):
        F.EH_R.validate(np.array([-1.0, 1.0, 0.0, 0.0]))
    with pytest.raises(ValueError, match="theta"):
        F.EH_R.validate(np.array([2.0, 4.0, 0.0, 0.0]))
    F.EH_R.validate(np.array([2.0, 1.0, 0.0, 0.0]))


def test_chart_margin_shrinks_domain():
    F.EH_R.validate(np.array([2.0, 0.01, 0.0, 0.0]))
    with pytest.raises(ValueError, match="margin"):
        F.EH_R.validate(np.array([2.0, 0.01, 0.0, 0.0]), margin=0.05)


def test_point_helper_validates():
    p = F.point(F.EH_R, 2.0, 1.0, 0.5, 0.5)
    assert p.chart is F.EH_R
    with pytest.raises(ValueError):
        F.point(F.EH_R, 0.5, 4.0, 0.0, 0.0)


def test_chart_reduce_wraps_periodic_coords():
    c = F.EH_R.reduce(np.array([2.0, 1.0, 2.5 * np.pi, 5.0 * np.pi]))
    assert abs(c[2] - 0.5 * np.pi) < 1e-12
    assert abs(c[3] - np.pi) < 1e-12


# ---------------------------------------------------------------------------
# coefficient forms and wedge


def test_one_form_evaluation(rng):
    f = F.one_form(C2, [1.0, 0.0, lambda c: c[0], 0.0])
    c = np.array([0.3, 0.1, -0.2, 0.5])
    assert np.allclose(f.as_vector(c), [1.0, 0.0, 0.3, 0.0])


def test_form_addition_and_scaling(rng):
    f = F.one_form(C2, [1.0, 2.0, 0.0, 0.0])
    g = F.one_form(C2, [0.0, 1.0, -1.0, 0.0])
    c = c2_coords(rng)[0]
    assert np.allclose((f + g).as_vector(c), [1, 3, -1, 0])
    assert np.allclose((f - g).as_vector(c), [1, 1, 1, 0])
    assert np.allclose((f * 2.5).as_vector(c), [2.5, 5, 0, 0])
    assert np.allclose((2.5 * f).as_vector(c), [2.5, 5, 0, 0])


def test_wedge_antisymmetry(rng):
    dx = [F.coordinate_differential(C2, i) for i in range(4)]
    c = c2_coords(rng)[0]
    for i in range(4):
        assert F.wedge(dx[i], dx[i]).max_abs(c) == 0.0
    fg = F.wedge(dx[0], dx[2])
    gf = F.wedge(dx[2], dx[0])
    assert (fg + gf).max_abs(c) == 0.0
    assert fg.coeff((0, 2), c) == 1.0


def test_wedge_sign_rule(rng):
    # (dx0 ^ dx2) ^ dx1 = -dx0 ^ dx1 ^ dx2
    dx = [F.coordinate_differential(C2, i) for i in range(4)]
    c = c2_coords(rng)[0]
    w = F.wedge(F.wedge(dx[0], dx[2]), dx[1])
    assert w.coeff((0, 1, 2), c) == -1.0


def test_wedge_bilinear(rng):
    c = c2_coords(rng)[0]
    f = F.one_form(C2, [lambda c: c[1], 1.0, 0.0, lambda c: c[0] * c[2]])
    g = F.one_form(C2, [0.0, lambda c: np.sin(c[0]), 2.0, 1.0])
    h = F.one_form(C2, [1.0, 1.0, lambda c: c[3], 0.0])
    lhs = F.wedge(f, g + h)
    rhs = F.wedge(f, g) + F.wedge(f, h)
    assert (lhs - rhs).max_abs(c) < 1e-14


def test_wedge_rejects_degree_overflow():
    dx = [F.coordinate_differential(C2, i) for i in range(4)]
    vol = F.wedge(F.wedge(dx[0], dx[1]), F.wedge(dx[2], dx[3]))
    with pytest.raises(ValueError, match="degree"):
        F.wedge(vol, dx[0])


def test_wedge_rejects_chart_mismatch():
    with pytest.raises(ValueError, match="chart"):
        F.wedge(F.coordinate_differential(C2, 0), F.coordinate_differential(F.EH_R, 0))


def test_top_degree_wedge_of_volume_factor(rng):
    dx = [F.coordinate_differential(C2, i) for i in range(4)]
    c = c2_coords(rng)[0]
    vol = F.wedge(F.wedge(dx[0], dx[1]), F.wedge(dx[2], dx[3]))
    assert vol.coeff((0, 1, 2, 3), c) == 1.0


# ---------------------------------------------------------------------------
# exterior derivative


def test_d_of_constant_form_vanishes(rng):
    f = F.one_form(C2, [1.0, -3.0, 2.0, 0.5])
    df = F.ext_d(f)
    assert df.max_abs(c2_coords(rng)[0]) < 1e-10


def test_d_of_zero_form_is_gradient(rng):
    f = F.zero_form(C2, lambda c: c[0] ** 2 + 3 * c[1] * c[2])
    df = F.ext_d(f, step=1e-5)
    c = c2_coords(rng)[0]
    grad = np.array([2 * c[0], 3 * c[2], 3 * c[1], 0.0])
    assert np.max(np.abs(df.as_vector(c) - grad)) < 1e-8


def test_d_squared_vanishes(rng):
    # nested central stencils commute, so d(d f) is round-off only
    f = F.one_form(C2, [
        lambda c: np.sin(c[1] * c[2]),
        lambda c: c[0] * c[3] ** 2,
        lambda c: np.cos(c[0]) * c[1],
        lambda c: c[1] * c[2],
    ])
    c = np.array([0.4, -0.3, 0.8, 0.2])
    assert F.ext_d(F.ext_d(f, step=1e-3), step=1e-3).max_abs(c) < 1e-8


def test_ext_d_second_order_accurate(rng):
    f = F.one_form(C2, [lambda c: np.sin(c[1] * c[2]), 0.0, 0.0, 0.0])
    exact = F.CoefficientForm(C2, 2, {
        (0, 1): lambda c: -c[2] * np.cos(c[1] * c[2]),
        (0, 2): lambda c: -c[1] * np.cos(c[1] * c[2]),
    })
    c = np.array([0.4, 1.1, 0.8, 0.2])
    e1 = (F.ext_d(f, step=4e-2) - exact).max_abs(c)
    e2 = (F.ext_d(f, step=2e-2) - exact).max_abs(c)
    order = np.log2(e1 / e2)
    assert 1.8 < order < 2.2


def test_leibniz_rule(rng):
    f = F.zero_form(C2, lambda c: c[0] * c[1])
    g = F.one_form(C2, [0.0, lambda c: np.sin(c[2]), 0.0, lambda c: c[0]])
    c = np.array([0.5, 0.25, -0.4, 0.9])
    lhs = F.ext_d(g * (lambda cc: cc[0] * cc[1]), step=1e-4)
    rhs = F.wedge(F.ext_d(f, step=1e-4), g) + F.ext_d(g, step=1e-4) * (lambda cc: cc[0] * cc[1])
    assert (lhs - rhs).max_abs(c) < 1e-7


# ---------------------------------------------------------------------------
# pullback


def test_pullback_identity(rng):
    ident = F.identity_map(C2)
    f = F.CoefficientForm(C2, 2, {(0, 1): lambda c: c[2], (1, 3): 1.0})
    c = c2_coords(rng)[0]
    assert (F.pullback(ident, f) - f).max_abs(c) < 1e-10


def test_pullback_linear_map(rng):
    A = np.array([
        [1.0, 2.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 3.0, 1.0],
        [0.0, 0.0, 0.0, 1.0],
    ])
    m = F.ChartMap(C2, C2, lambda c: A @ c, jac=lambda c: A, name="lin")
    f = F.wedge(F.coordinate_differential(C2, 0), F.coordinate_differential(C2, 2))
    c = c2_coords(rng)[0]
    got = F.pullback(m, f).as_matrix(c)
    # F*(dx0 ^ dx2) with dx0 -> dx0 + 2 dx1, dx2 -> 3 dx2 + dx3
    a = np.array([1.0, 2.0, 0.0, 0.0])
    b = np.array([0.0, 0.0, 3.0, 1.0])
    want = np.outer(a, b) - np.outer(b, a)
    assert np.max(np.abs(got - want)) < 1e-10


def test_pullback_functoriality(rng):
    A = rng.normal(size=(4, 4))
    B = rng.normal(size=(4, 4))
    mA = F.ChartMap(C2, C2, lambda c: A @ c, jac=lambda c: A, name="A")
    mB = F.ChartMap(C2, C2, lambda c: B @ c, jac=lambda c: B, name="B")
    f = F.CoefficientForm(C2, 2, {(0, 1): lambda c: np.sin(c[0]), (2, 3): lambda c: c[1] ** 2, (0, 3): 2.0})
    c = c2_coords(rng)[0]
    lhs = F.pullback(mB, F.pullback(mA, f))
    rhs = F.pullback(F.compose(mA, mB), f)
    assert (lhs - rhs).max_abs(c) < 1e-10


def test_pullback_degree_zero(rng):
    m = F.ChartMap(C2, C2, lambda c: 2 * c, jac=lambda c: 2 * np.eye(4), name="scale")
    f = F.zero_form(C2, lambda c: c[0] + c[3])
    c = c2_coords(rng)[0]
    assert abs(F.pullback(m, f).coeff((), c) - (2 * c[0] + 2 * c[3])) < 1e-12


def test_chart_map_numeric_jacobian_matches_analytic(rng):
    m = F.ChartMap(
        C2, C2,
        lambda c: np.array([c[0] + 0.5 * np.sin(c[1]), c[1] + 0.2 * c[2] ** 2, c[2], c[3] + c[0] * c[1]]),
        name="nl",
    )
    c = np.array([0.3, 0.7, -0.2, 0.4])
    want = np.array([
        [1.0, 0.5 * np.cos(c[1]), 0, 0],
        [0, 1.0, 0.4 * c[2], 0],
        [0, 0, 1.0, 0],
        [c[1], c[0], 0, 1.0],
    ])
    assert np.max(np.abs(m.jacobian(c) - want)) < 1e-6


def test_degenerate_jacobian_rejected():
    m = F.ChartMap(C2, C2, lambda c: np.array([c[0], c[1], c[2], 0.0 * c[3]]), name="deg")
    with pytest.raises(ValueError, match="jacobian"):
        m.jacobian(np.array([0.1, 0.2, 0.3, 0.4]))


# ---------------------------------------------------------------------------
# complex structure action


def _toy_structure():
    A = np.array([
        [0, 1, 0, 0],
        [-1, 0, 0, 0],
        [0, 0, 0, 1],
        [0, 0, -1, 0],
    ], dtype=float)
    return F.ComplexStructure("toy", A, C2, lambda c: np.eye(4))


def test_structure_requires_square_minus_identity():
    bad = np.eye(4)
    with pytest.raises(ValueError, match="minus"):
        F.ComplexStructure("bad", bad, C2, lambda c: np.eye(4))


def test_apply_j_euclidean_frame(rng):
    J = _toy_structure()
    f = F.one_form(C2, [1.0, 0.0, 2.0, 0.0])
    c = c2_coords(rng)[0]
    got = F.apply_J(J, f).as_vector(c)
    assert np.allclose(got, J.action @ np.array([1.0, 0.0, 2.0, 0.0]))


def test_apply_j_squares_to_minus_identity(rng):
    J = _toy_structure()
    f = F.one_form(C2, [lambda c: c[0], 1.0, lambda c: np.sin(c[3]), 0.5])
    c = c2_coords(rng)[0]
    twice = F.apply_J(J, F.apply_J(J, f))
    assert (twice + f).max_abs(c) < 1e-14


def test_apply_j_rejects_degree_two():
    J = _toy_structure()
    f = F.CoefficientForm(C2, 2, {(0, 1): 1.0})
    with pytest.raises(ValueError, match="degree"):
        F.apply_J(J, f)


# ---------------------------------------------------------------------------
# i del-delbar


def test_i_ddbar_flat_potential(rng):
    # |z|^2 -> 2 (dx1^dy1 + dx2^dy2)
    phi = lambda c: c[0] ** 2 + c[1] ** 2 + c[2] ** 2 + c[3] ** 2
    om = F.i_ddbar(phi)
    c = c2_coords(rng)[0]
    got = om.as_matrix(c)
    want = np.zeros((4, 4))
    want[0, 1] = 2.0
    want[2, 3] = 2.0
    want -= want.T
    assert np.max(np.abs(got - want)) < 1e-6


def test_i_ddbar_pluriharmonic_vanishes(rng):
    # Re(z1^2) = x1^2 - y1^2
    phi = lambda c: c[0] ** 2 - c[1] ** 2
    om = F.i_ddbar(phi)
    assert om.max_abs(c2_coords(rng)[0]) < 1e-7


def test_i_ddbar_mixed_potential(rng):
    # phi = x1 * y2 has h_{12bar} = i/4, h_{11} = h_{22} = 0
    phi = lambda c: c[0] * c[3]
    c = c2_coords(rng)[0]
    d2 = F.second_derivative_matrix(phi, c)
    h = F.hermitian_from_second_derivs(d2)
    assert abs(h[0, 0]) < 1e-7 and abs(h[1, 1]) < 1e-7
    assert abs(h[0, 1] - 0.25j) < 1e-7
    assert abs(h[1, 0] + 0.25j) < 1e-7


def test_hermitian_round_trip(rng):
    h = np.array([[1.5, 0.2 + 0.3j], [0.2 - 0.3j, 0.8]])
    comp = F.hermitian_to_real_two_form(h)
    assert comp[(0, 1)] == pytest.approx(2 * 1.5)
    assert comp[(2, 3)] == pytest.approx(2 * 0.8)
    assert comp[(0, 3)] == pytest.approx(2 * 0.2)
    assert comp[(1, 2)] == pytest.approx(-2 * 0.2)
    assert comp[(0, 2)] == pytest.approx(-2 * 0.3)
    assert comp[(1, 3)] == pytest.approx(-2 * 0.3)


@given(coord_strategy)
@settings(max_examples=25, deadline=None)
def test_i_ddbar_matrix_antisymmetric(c):
    phi = lambda cc: cc[0] ** 2 * cc[2] + np.sin(cc[1]) * cc[3]
    m = F.i_ddbar(phi).as_matrix(c)
    assert np.max(np.abs(m + m.T)) < 1e-12


@given(st.integers(0, 3), st.integers(0, 3), coord_strategy)
@settings(max_examples=40, deadline=None)
def test_wedge_of_differentials_matches_sign_count(i, j, c):
    dx_i = F.coordinate_differential(C2, i)
    dx_j = F.coordinate_differential(C2, j)
    w = F.wedge(dx_i, dx_j)
    if i == j:
        assert w.max_abs(c) == 0.0
    else:
        lo, hi = min(i, j), max(i, j)
        assert w.coeff((lo, hi), c) == (1.0 if i < j else -1.0)
