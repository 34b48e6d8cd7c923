import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stablefield.geometry import (
    ActionGeometry,
    UnsupportedGeometryError,
    delta_bounds,
    delta_contains,
    fourier_motzkin,
    grid_integral_v_alpha,
    integral_v_alpha,
    leb_delta,
    q_volume,
)
from stablefield.lattice_algebra import analyze_action, trivial_action


def test_diagonal_polytope(diagonal_geometry):
    g = diagonal_geometry
    assert np.allclose(delta_bounds(g), [[-2, 2]])
    assert leb_delta(g) == 4.0
    assert q_volume(0.0, g) == 2.0
    assert q_volume(1.0, g) == 1.0
    assert q_volume(2.0, g) == 0.0
    assert q_volume(-1.5, g) == 0.5
    assert q_volume(2.5, g) == 0.0
    assert delta_contains([2.0], g) and not delta_contains([2.5], g)


@pytest.mark.parametrize("alpha", [1e-4, 0.5, 1.0, 1.5, 1.99])
def test_integral_closed_form(diagonal_geometry, alpha):
    exact = 2 * 2 ** (1 + alpha) / (1 + alpha)
    assert integral_v_alpha(alpha, diagonal_geometry) == pytest.approx(exact, rel=1e-10)


def test_integral_of_volume_is_box_volume_over_determinant():
    # int_Delta V(y) dy = Leb([-1,1]^d) / |det[U V]|
    for basis in ([[1], [1]], [[2], [0]], [[1], [2]], [[1], [1], [1]], [[1, 0], [0, 1], [1, 1]]):
        G = analyze_action(np.array(basis))
        g = ActionGeometry(G)
        det = abs(round(np.linalg.det(np.hstack([G.U, G.V]).astype(float))))
        assert integral_v_alpha(1.0, g) == pytest.approx(2.0**G.d / det, rel=1e-6)


def test_grid_oracle_agrees():
    for basis in ([[1], [1]], [[1], [2]], [[3], [1]]):
        g = ActionGeometry(analyze_action(np.array(basis)))
        for alpha in (0.5, 1.3):
            assert integral_v_alpha(alpha, g) == pytest.approx(grid_integral_v_alpha(alpha, g, 20000), rel=1e-5)


def test_three_dimensional_diagonal():
    g = ActionGeometry(analyze_action(np.array([[1], [1], [1]])))
    assert leb_delta(g) == pytest.approx(12.0)
    assert integral_v_alpha(1.0, g) == pytest.approx(8.0, rel=1e-6)


def test_no_fibre_rejected():
    g = ActionGeometry(trivial_action(2))
    with pytest.raises(UnsupportedGeometryError):
        integral_v_alpha(1.0, g)


def test_fourier_motzkin_projects_square():
    # |x| <= 1, |x + y| <= 1 projected onto x
    A = [[0, 1], [0, -1], [1, 1], [-1, -1]]
    rows = fourier_motzkin(A, [1, 1, 1, 1], 1)
    xs = np.linspace(-3, 3, 61)
    inside = [all(float(a[0]) * x <= float(b) + 1e-12 for a, b in rows) for x in xs]
    assert np.array_equal(inside, np.abs(xs) <= 2 + 1e-12)


@settings(max_examples=60, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0, 1))
def test_volume_is_concave_on_delta(a, b, t):
    g = ActionGeometry(analyze_action(np.array([[1], [2]])))
    lo, hi = delta_bounds(g)[0]
    a, b = lo + (a + 2) / 4 * (hi - lo), lo + (b + 2) / 4 * (hi - lo)
    mid = q_volume(t * a + (1 - t) * b, g)
    assert mid >= t * q_volume(a, g) + (1 - t) * q_volume(b, g) - 1e-12


@settings(max_examples=60, deadline=None)
@given(st.floats(-3, 3))
def test_volume_lipschitz_and_vanishes_outside(y):
    g = ActionGeometry(analyze_action(np.array([[1], [1]])))
    h = 1e-3
    assert abs(q_volume(y + h, g) - q_volume(y, g)) <= 1.0 * h + 1e-12
    if not delta_contains([y], g):
        assert q_volume(y, g) == 0.0


def test_two_dimensional_free_part():
    # d = 3, kernel <(1,1,1)>: Delta is a hexagon in the free plane
    g = ActionGeometry(analyze_action(np.array([[0], [0], [1]])))
    assert g.p == 2
    assert leb_delta(g) == pytest.approx(4.0)
    assert q_volume(np.array([0.3, -0.5]), g) == pytest.approx(2.0)
