import cmath

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from kobhahn.auts import (IDENTITY, NEG_ID, DiscAut, aut_expr, compose_auts, invert, moebius_distance,
                          moebius_h, one_minus_m2, phi_involution, rotation, two_point_interpolant)
from kobhahn.holo import evaluate

point = st.builds(lambda r, t: 0.9 * r * cmath.exp(2j * cmath.pi * t), st.floats(0, 1), st.floats(0, 1))
auts = st.builds(lambda t, a: DiscAut(cmath.exp(2j * cmath.pi * t), a), st.floats(0, 1), point)
PROBE = np.array([0, 0.3, -0.5j, 0.7 + 0.2j, -0.6 - 0.6j])


@settings(max_examples=60)
@given(auts, auts, auts)
def test_composition_is_associative(f, g, h):
    assert np.allclose(((f @ g) @ h)(PROBE), (f @ (g @ h))(PROBE), atol=1e-12)


@settings(max_examples=60)
@given(auts, auts)
def test_composition_matches_pointwise(f, g):
    assert np.allclose((f @ g)(PROBE), f(g(PROBE)), atol=1e-12)


@settings(max_examples=60)
@given(auts)
def test_inverse(f):
    assert (f @ invert(f)).is_identity(1e-12)
    assert (invert(f) @ f).is_identity(1e-12)


@settings(max_examples=60)
@given(auts, point, point)
def test_moebius_distance_is_invariant(f, z, w):
    assert moebius_distance(f(z), f(w)) == pytest.approx(moebius_distance(z, w), abs=1e-12)
    assert one_minus_m2(z, w) == pytest.approx(1 - moebius_distance(z, w) ** 2, abs=1e-12)


@settings(max_examples=60)
@given(auts, point, point)
def test_two_point_interpolant_recovers_the_map(f, x1, x2):
    assume(abs(x1 - x2) > 1e-3)
    phi = two_point_interpolant(x1, f(x1), x2, f(x2))
    assert abs(phi(x1) - f(x1)) < 1e-10
    assert abs(phi(x2) - f(x2)) < 1e-10


def test_two_point_interpolant_rejects_mismatched_distances():
    with pytest.raises(ValueError):
        two_point_interpolant(0, 0, 0.5, 0.9)


@settings(max_examples=60)
@given(point, auts)
def test_involution_swaps_and_squares_to_identity(a, psi):
    assume(abs(psi(a) - a) > 1e-3)
    phi = phi_involution(a, psi)
    b = psi(a)
    assert abs(phi(a) - b) < 1e-10
    assert abs(phi(b) - a) < 1e-10
    assert (phi @ phi).is_identity(1e-10)
    assert abs(phi.deriv(a) * phi.deriv(b) - 1) < 1e-10


def test_involution_rejects_fixed_point():
    with pytest.raises(ValueError):
        phi_involution(0, rotation(0.4))


def test_normal_form_validation():
    with pytest.raises(ValueError):
        DiscAut(1, 1.0)
    with pytest.raises(ValueError):
        DiscAut(2, 0)
    with pytest.raises(ValueError):
        moebius_distance(1.0, 0)


def test_moebius_h_basics():
    h = moebius_h(0.5)
    assert h(0.5) == 0
    assert h.deriv(0.5) == pytest.approx(1 / 0.75)
    assert NEG_ID(0.3) == -0.3
    assert IDENTITY.is_identity()


def test_from_matrix_round_trip():
    f = DiscAut(cmath.exp(0.7j), 0.3 - 0.4j)
    g = DiscAut.from_matrix(5 * f.matrix())
    assert abs(g.phase - f.phase) < 1e-15 and abs(g.center - f.center) < 1e-15


def test_fixed_points_are_fixed():
    f = DiscAut(cmath.exp(0.2j), 0.5)
    for p in f.fixed_points():
        assert abs(f(p) - p) < 1e-12


def test_aut_expr_evaluates_like_the_map():
    f = compose_auts(rotation(1.1), moebius_h(0.2 + 0.3j))
    assert np.allclose(evaluate(aut_expr(f), PROBE), f(PROBE), atol=1e-15)
