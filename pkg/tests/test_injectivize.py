import json
import math

import numpy as np
import pytest

from kobhahn.coverings import parse_domain
from kobhahn.holo import eval_jet, evaluate, parse
from kobhahn.injectivize import (BRANCHES, JET_TOL, DegenerateJet, DiscPair, injectivize,
                                 prop2_injectivize, prop3_injectivize, random_disc,
                                 theta_family_report, verify_injectivity, winding_number)


def pair(c1, c2, t1, t2, check=True):
    return DiscPair(parse(c1), parse(c2), parse_domain(t1), parse_domain(t2), check)


def jets(g):
    return g.jet0()


def test_case1_disc_factor():
    f = pair("z", "0.5+0.3*z", "disc", "pdisc")
    r = prop2_injectivize(f, 0.5)
    assert r.case_tag == "sc-injective-factor"
    (v1, v2), (d1, d2) = jets(r.g)
    assert abs(v1) < 1e-15 and abs(d1 - 0.5) < 1e-15
    assert abs(v2 - 0.5) < 1e-15 and abs(d2 - 0.15) < 1e-15
    assert max(r.residuals.values()) < JET_TOL
    z = np.array([0.3, -0.7j])
    assert np.allclose(evaluate(r.g.comp1, z), 0.5 * z)
    assert verify_injectivity(r.g, 10_000, 0, r.injective_components).passed


def test_case1_plane_factor_is_affine():
    f = pair("2+3*z+z^2", "0.2*z^2", "plane", "disc")
    r = prop2_injectivize(f, 0.4)
    assert r.case_tag == "sc-injective-factor"
    assert evaluate(r.g.comp1, 0.5) == pytest.approx(2 + 0.4 * 3 * 0.5)
    assert max(r.residuals.values()) < JET_TOL


def test_case2_worked_example():
    f = pair("0.5*z^2", "0.3+0.4*z+0.1*z^2", "disc", "disc")
    r = prop2_injectivize(f, 0.5)
    assert r.case_tag == "sc-flat-factor"
    assert r.params["M"] == pytest.approx(0.5625, rel=2e-6)
    assert r.params["d"] == pytest.approx(0.5)
    z = np.linspace(-0.9, 0.9, 7) + 0.2j
    assert np.allclose(evaluate(r.g.comp1, z), 0.02 * z ** 2, rtol=1e-5)
    (_, _), (d1, d2) = jets(r.g)
    assert abs(d1) < 1e-12 and abs(d2 - 0.2) < 1e-12
    assert r.params["max_offset"] < r.params["d"]
    assert verify_injectivity(r.g, 10_000, 0, r.injective_components).passed


def test_prop3_general_worked_example():
    f = pair("exp(z)", "0.1+0.5*z", "cstar", "disc")
    r = prop3_injectivize(f, 0.5)
    assert r.case_tag == "cstar-general"
    assert r.params["k"] == 1
    assert r.params["M"] == pytest.approx(0.35, rel=2e-6)
    assert complex(r.params["c_k"]) == pytest.approx(0.6)
    z = np.array([0.0, 0.5, -0.3 + 0.4j])
    assert np.allclose(evaluate(r.g.comp1, z), (1 + z) * (1 - 0.5 * z))
    (v1, _), (d1, _) = jets(r.g)
    assert v1 == pytest.approx(1) and d1 == pytest.approx(0.5)
    assert r.params["min_abs_g1"] > 0
    rep = verify_injectivity(r.g, 10_000, 0, r.injective_components)
    assert rep.passed and rep.min_separation_ratio > 0


def test_prop3_unit_branch():
    f = pair("exp(2*z)", "0.1+0.5*z", "cstar", "disc")
    r = prop3_injectivize(f, 0.5)
    assert r.case_tag == "cstar-unit"
    (v1, v2), (d1, d2) = jets(r.g)
    assert (v1, d1) == (pytest.approx(1), pytest.approx(1))
    assert d2 == pytest.approx(0.25)
    assert evaluate(r.g.comp1, 0.4) == pytest.approx(1.4)


def test_prop3_swapped_branch():
    f = pair("exp(z)", "0.3", "cstar", "disc")
    r = prop3_injectivize(f, 0.5)
    assert r.case_tag == "cstar-swapped"
    assert max(r.residuals.values()) < JET_TOL
    assert verify_injectivity(r.g, 10_000, 0, r.injective_components).passed


def test_router_swaps_factors():
    f = pair("0.1+0.5*z", "exp(z)", "disc", "cstar")
    assert injectivize(f, 0.5).case_tag.startswith("sc-")
    g = pair("0.5+0.3*z", "0.2+0.5*z", "pdisc", "disc")
    r = injectivize(g, 0.5)
    assert r.case_tag.endswith("-swapped-factors")
    assert r.injective_components == (2,)
    assert max(r.residuals.values()) < JET_TOL
    with pytest.raises(ValueError, match="neither factor"):
        injectivize(pair("0.5+0.3*z", "0.5", "pdisc", "annulus:0.3"), 0.5)


def test_degenerate_jet_and_bad_targets():
    with pytest.raises(DegenerateJet):
        prop2_injectivize(pair("0.1", "0.2", "disc", "disc"), 0.5)
    with pytest.raises(DegenerateJet):
        prop3_injectivize(pair("2", "0.2", "cstar", "disc"), 0.5)
    with pytest.raises(ValueError):
        prop3_injectivize(pair("exp(z)", "z", "cstar", "plane"), 0.5)
    with pytest.raises(ValueError):
        prop2_injectivize(pair("0.5+0.3*z", "z", "pdisc", "disc"), 0.5)
    with pytest.raises(ValueError):
        prop2_injectivize(pair("z", "z", "disc", "disc"), 1.0)


def test_disc_pair_containment_and_json():
    with pytest.raises(ValueError, match="leaves"):
        pair("2*z", "0", "disc", "plane")
    with pytest.raises(ValueError, match="missing"):
        DiscPair.from_json({"comp1": "z"})
    f = pair("z", "0.5+0.3*z", "disc", "pdisc")
    assert DiscPair.from_json(json.loads(json.dumps(f.to_json()))) == f


def test_verifier_trivial_cases():
    assert verify_injectivity(pair("z", "0", "disc", "plane"), 10_000, 0, (1,)).passed
    rep = verify_injectivity(pair("z^2", "z^2", "disc", "disc"), 10_000, 0)
    assert not rep.passed and rep.collisions
    with pytest.raises(ValueError):
        verify_injectivity(pair("z", "0", "disc", "plane"), 100)


def test_winding_number():
    assert list(winding_number(parse("z^2"), [0.1, 2.0])) == [2, 0]
    assert list(winding_number(parse("(1+z)*(1-0.5*z)"), [0.0])) == [0]


def test_theta_family():
    f = pair("z", "0.5+0.3*z", "disc", "pdisc")
    rows = theta_family_report(f, [0.3, 0.6, 0.9, 0.99])
    assert [r["theta"] for r in rows] == [0.3, 0.6, 0.9, 0.99]
    assert all(r["passed"] for r in rows)
    assert theta_family_report(f, []) == []


def _collision_pairs(f, theta, rng, count):
    """Pairs z1 != z2 with f2(theta z1) = f2(theta z2), for quadratic f2."""
    j = eval_jet(f.comp2, 0j, 2)
    c1, c2 = j.d1, j.d2 / 2
    s = -c1 / (c2 * theta)  # z1 + z2
    if abs(s) > 1.9:
        return []
    out = []
    while len(out) < count:
        z1 = 0.99 * math.sqrt(rng.random()) * np.exp(2j * np.pi * rng.random())
        z2 = s - z1
        if abs(z2) < 0.99 and abs(z1 - z2) > 1e-3:
            out.append((z1, z2))
    return out


@pytest.mark.parametrize("branch", ["sc-flat-factor", "cstar-general"])
def test_structural_injectivity_on_engineered_collisions(branch):
    rng = np.random.default_rng(11)
    theta = 0.9
    checked = 0
    while checked < 50:
        f = random_disc(branch, rng, theta)
        if abs(eval_jet(f.comp2, 0j, 2).d2) < 1e-3:
            continue
        pairs = _collision_pairs(f, theta, rng, 5)
        if not pairs:
            continue
        g = injectivize(f, theta).g
        for z1, z2 in pairs:
            a1, a2 = g.values(np.array([z1, z2]))
            assert abs(a2[0] - a2[1]) < 1e-12 * (1 + abs(a2[0]))
            assert abs(a1[0] - a1[1]) > 1e-8 * abs(z1 - z2)
        checked += len(pairs)


@pytest.mark.parametrize("branch", BRANCHES)
def test_random_branches(branch):
    rng = np.random.default_rng(3)
    for theta in (0.3, 0.9):
        for _ in range(3):
            r = injectivize(random_disc(branch, rng, theta), theta)
            assert r.case_tag == branch
            assert max(r.residuals.values()) < JET_TOL
            assert verify_injectivity(r.g, 10_000, 0, r.injective_components).passed
            if branch.startswith("cstar"):
                assert r.params["min_abs_g1"] > 0
            if branch == "sc-flat-factor":
                assert r.params["max_offset"] < r.params["d"]
