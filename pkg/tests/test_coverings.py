import math

import numpy as np
import pytest

from kobhahn.coverings import (PlanarDomain, cayley, cayley_inv, covering_of, half_plane_distance,
                               lift_disc, parse_domain, sup_displacement_probe)
from kobhahn.holo import parse

rng = np.random.default_rng(7)
DISC_PTS = 0.9 * np.sqrt(rng.random(300)) * np.exp(2j * np.pi * rng.random(300))
DISC_COVERED = ["pdisc", "annulus:0.3", "annulus:0.5"]


def test_cayley_round_trip_and_distance():
    assert np.allclose(cayley_inv(cayley(DISC_PTS)), DISC_PTS, atol=1e-14)
    assert np.all(cayley(DISC_PTS).imag > 0)
    # origin maps to i; distance to 2i is log 2
    assert cayley(0) == pytest.approx(1j)
    assert half_plane_distance(1j, 2j) == pytest.approx(math.log(2))


@pytest.mark.parametrize("desc", ["disc", "plane", "cstar", "pdisc", "annulus:0.3"])
def test_parse_domain_round_trip(desc):
    assert parse_domain(desc).descriptor == desc


@pytest.mark.parametrize("bad", ["annulus:1.5", "annulus:x", "torus", "annulus:0"])
def test_parse_domain_rejects(bad):
    with pytest.raises(ValueError):
        parse_domain(bad)


def test_domain_validation():
    with pytest.raises(ValueError):
        PlanarDomain("disc", 0.5)
    with pytest.raises(ValueError):
        PlanarDomain("pdisc", scale=0)


@pytest.mark.parametrize("desc", DISC_COVERED)
def test_deck_invariance(desc):
    cov = covering_of(parse_domain(desc))
    z = cov.balanced_samples(DISC_PTS)
    assert np.max(np.abs(cov.p(cov.deck(z)) - cov.p(z))) < 1e-9
    tau = cayley(z)
    assert np.max(np.abs(cov.hp_p(cov.deck.hp_apply(tau)) - cov.hp_p(tau))) < 1e-12


@pytest.mark.parametrize("desc", ["disc", "plane", "cstar", *DISC_COVERED])
def test_fiber_points_lie_over_w(desc):
    d = parse_domain(desc)
    cov = covering_of(d)
    w = cov.p(cov.balanced_samples(DISC_PTS) if cov.cover == "E" else DISC_PTS)
    assert np.all(d.contains(w))
    assert np.max(np.abs(cov.p(cov.fiber(w)) - w)) < 1e-9
    if cov.cover == "E":
        for k in (-1, 2):
            assert np.max(np.abs(cov.hp_p(cov.fiber_hp(w, k)) - w)) < 1e-9


def test_fiber_rejects_points_outside():
    cov = covering_of(parse_domain("annulus:0.3"))
    with pytest.raises(ValueError):
        cov.fiber(0.1)
    with pytest.raises(ValueError):
        covering_of(parse_domain("cstar")).fiber_hp(1.0)


def test_annulus_image():
    for r in (0.3, 0.5, 0.7):
        w = covering_of(parse_domain(f"annulus:{r}")).p(DISC_PTS)
        assert np.all((np.abs(w) > r) & (np.abs(w) < 1))


def test_thin_annulus_rejected():
    covering_of(parse_domain("annulus:0.7"))
    with pytest.raises(ValueError, match="too thin"):
        covering_of(parse_domain("annulus:0.9"))


def test_pdisc_deck_image_of_origin():
    cov = covering_of(parse_domain("pdisc"))
    assert cov.deck(0) == pytest.approx(math.pi / (math.pi + 1j))
    assert cov.deck.displacement(0) == pytest.approx(math.pi / math.hypot(math.pi, 1))
    assert cov.deck.displacement(0) == pytest.approx(0.953, abs=1e-3)


def test_shifted_domain_covering():
    d = PlanarDomain("pdisc", scale=2, shift=1j)
    cov = covering_of(d)
    w = cov.p(DISC_PTS)
    assert np.all(d.contains(w))
    assert np.max(np.abs(cov.p(cov.fiber(w)) - w)) < 1e-12


@pytest.mark.parametrize("desc", DISC_COVERED)
def test_displacement_probe_approaches_one(desc):
    cov = covering_of(parse_domain(desc))
    assert 1 - sup_displacement_probe(cov, 1e-4) < 1e-6
    assert sup_displacement_probe(cov, 1e-3) <= sup_displacement_probe(cov, 1e-4) <= 1


def test_displacement_probe_errors():
    with pytest.raises(ValueError):
        sup_displacement_probe(covering_of(parse_domain("cstar")), 1e-4)
    with pytest.raises(ValueError):
        sup_displacement_probe(covering_of(parse_domain("disc")), 1e-4)
    with pytest.raises(ValueError):
        sup_displacement_probe(covering_of(parse_domain("pdisc")), 0.5)


def test_lift_of_a_disc_into_the_punctured_disc():
    cov = covering_of(parse_domain("pdisc"))
    f = parse("0.5 + 0.3*z")
    base = complex(cov.fiber(0.5))
    lift = lift_disc(f, cov, base)
    assert lift.residual < 1e-10
    assert lift.at_center() == base
    assert np.all(np.abs(lift.w) < 1)
    with pytest.raises(ValueError):
        lift_disc(f, cov, 0.0)
