import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kobhahn.auts import moebius_h
from kobhahn.counterexample import (SCHEMA_VERSION, DifferenceSurface, build_certificate, certify,
                                    d_from_eps, dichotomy_factors, find_equal_displacement,
                                    intersection_persistence, normalize, transversality_check)
from kobhahn.coverings import covering_of, parse_domain

PAIRS = [("pdisc", "pdisc"), ("annulus:0.3", "pdisc"), ("annulus:0.3", "annulus:0.5"),
         ("annulus:0.3", "annulus:0.3")]


def cov(desc):
    return covering_of(parse_domain(desc))


@pytest.fixture(scope="module", params=PAIRS, ids=lambda p: "x".join(p))
def cert(request):
    d1, d2 = request.param
    return certify(parse_domain(d1), parse_domain(d2))


def test_d_from_eps():
    assert d_from_eps(0.2) == pytest.approx(0.5)
    d = d_from_eps(0.2)
    assert -2 * d / (1 + d * d) == pytest.approx(-0.8)
    for eps in (1e-6, 0.01, 0.5, 0.9):
        d = d_from_eps(eps)
        assert 0 < d < 1 and 2 * d / (1 + d * d) == pytest.approx(1 - eps)


def test_symmetric_punctured_disc_displacement():
    eq = find_equal_displacement(cov("pdisc"), cov("pdisc"))
    assert eq.z1 == eq.z2
    assert eq.level >= math.pi / math.hypot(math.pi, 1) - 1e-12
    assert eq.level == pytest.approx(0.953, abs=1e-3)
    deck = cov("pdisc").deck
    assert deck.displacement(eq.z1) == pytest.approx(eq.level, abs=1e-10)


def test_annulus_and_punctured_disc_share_a_level():
    c1, c2 = cov("annulus:0.3"), cov("pdisc")
    eq = find_equal_displacement(c1, c2)
    assert eq.level >= 0.9
    assert c1.deck.displacement(eq.z1) == pytest.approx(eq.level, abs=1e-10)
    assert c2.deck.displacement(eq.z2) == pytest.approx(eq.level, abs=1e-10)


def test_identity_deck_rejected():
    with pytest.raises(ValueError):
        find_equal_displacement(cov("disc"), cov("pdisc"))
    with pytest.raises(ValueError):
        find_equal_displacement(cov("pdisc"), cov("cstar"))


def test_branches():
    assert certify(parse_domain("pdisc"), parse_domain("pdisc")).branch == "reduced-common-deck"
    assert certify(parse_domain("annulus:0.3"), parse_domain("annulus:0.3")).branch == "reduced-to-h_c"
    assert certify(parse_domain("annulus:0.3"), parse_domain("pdisc")).branch == "direct"


def test_certificate_invariants(cert):
    rt = cert.residual_table
    assert cert.q[0] != cert.q[1]
    assert all(abs(q) < 1 for q in cert.q)
    assert rt["covering_equality_1"] < 1e-9 and rt["covering_equality_2"] < 1e-9
    assert abs(cert.det_value) > 1e-6
    assert cert.det_relative_gap < 1e-9
    if cert.branch == "direct":
        assert rt["involution"] is None and cert.a is None
    else:
        assert rt["involution"] < 1e-10
        assert rt["involution_derivative"] < 1e-10
        assert cert.a.imag != 0


def test_transversality_sign(cert):
    s1, s2 = DifferenceSurface.of(cert)
    jac = transversality_check(s1, s2, cert.q)
    assert abs(jac + cert.det_value) / abs(cert.det_value) < 1e-9
    assert s1(*cert.q) == pytest.approx(0, abs=1e-9)
    w = 0.3 + 0.1j
    assert s1(w, w) == 0 and s2(w, w) == 0


def test_persistence(cert):
    s1, s2 = DifferenceSurface.of(cert)
    runs = [intersection_persistence(s1, s2, cert.q, dl, cert.det_value) for dl in (1e-3, 1e-2)]
    for r in runs:
        assert r.converged and r.off_diagonal and r.in_neighbourhood
        assert r.residual < 1e-10
        assert r.constant is not None and r.constant > 0
    assert 5 <= runs[1].displacement / runs[0].displacement <= 20


def test_persistence_with_zero_delta_takes_no_steps(cert):
    s1, s2 = DifferenceSurface.of(cert)
    r = intersection_persistence(s1, s2, cert.q, 0.0, cert.det_value)
    assert r.steps == 0 and r.displacement == 0 and r.converged
    with pytest.raises(ValueError):
        intersection_persistence(s1, s2, cert.q, 0.1)


def test_real_a_is_rejected():
    norm = normalize(cov("pdisc"), cov("pdisc"))
    with pytest.raises(ValueError, match="real"):
        build_certificate(norm, 0.3)


def test_explicit_nonreal_a_is_used():
    c = certify(parse_domain("pdisc"), parse_domain("pdisc"), 0.5j)
    assert c.a == 0.5j and c.a_seed == 0.5j


PSI = moebius_h(-0.8)


@settings(max_examples=40)
@given(st.floats(-0.95, 0.95))
def test_dichotomy_on_real_points(x):
    plus, minus = dichotomy_factors(x, PSI)
    assert plus < 1e-10 and minus > 1e-3


@settings(max_examples=40)
@given(st.floats(-0.9, 0.9), st.floats(0.05, 0.9))
def test_dichotomy_off_the_real_line(x, y):
    if x * x + y * y >= 0.9:
        return
    plus, minus = dichotomy_factors(complex(x, y), PSI)
    assert plus > 1e-3 and minus > 1e-3


def test_certificate_json():
    c = certify(parse_domain("pdisc"), parse_domain("pdisc"))
    data = json.loads(json.dumps(c.to_json(), allow_nan=False))
    assert data["schema_version"] == SCHEMA_VERSION
    assert data["branch"] == "reduced-common-deck"
    assert data["det_abs"] == pytest.approx(abs(c.det_value))
    assert set(data) >= {"q", "phi1", "phi2", "det_value", "d", "c", "a", "eps", "residual_table"}
    assert np.allclose(data["a"], [0, 0.5])
