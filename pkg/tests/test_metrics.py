import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kobhahn.coverings import PlanarDomain, parse_domain
from kobhahn.metrics import (CSTAR_FACTOR, NOT_EQUAL, SIMPLY_CONNECTED_FACTOR, HahnBounds,
                             classify_product, hahn_bounds, kappa, kappa_disc, kappa_product,
                             schwarz_pick_polydisc)

disc_pt = st.builds(lambda r, t: 0.95 * r * complex(math.cos(t), math.sin(t)),
                    st.floats(0, 1), st.floats(0, 2 * math.pi))
vec = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)


def test_kappa_disc():
    assert kappa_disc(0, 1) == 1
    assert kappa_disc(0.5, 2j) == pytest.approx(2 / 0.75)
    with pytest.raises(ValueError):
        kappa_disc(1, 1)


@pytest.mark.parametrize("mod", [0.05, 0.3, 0.7, 0.95])
def test_punctured_disc_closed_form(mod):
    w = mod * np.exp(0.4j)
    expect = 1 / (2 * mod * math.log(1 / mod))
    for k in (-1, 0, 3):
        assert kappa(parse_domain("pdisc"), w, 1, k) == pytest.approx(expect, rel=1e-12)


@pytest.mark.parametrize("r,mod", [(0.3, 0.5), (0.3, 0.95), (0.5, 0.52), (0.5, 0.8)])
def test_annulus_closed_form(r, mod):
    big_l = math.log(1 / r)
    expect = math.pi / (2 * mod * big_l * math.sin(math.pi * math.log(1 / mod) / big_l))
    w = mod * np.exp(-1.3j)
    assert kappa(parse_domain(f"annulus:{r}"), w, 1, 0) == pytest.approx(expect, rel=1e-10)
    assert kappa(parse_domain(f"annulus:{r}"), w, 1, 2) == pytest.approx(expect, rel=1e-10)


def test_plane_covered_domains_have_zero_metric():
    assert kappa(parse_domain("plane"), 3 + 4j, 1) == 0
    assert kappa(parse_domain("cstar"), 2, 5j) == 0


def test_kappa_rejects_outside_points():
    with pytest.raises(ValueError):
        kappa(parse_domain("pdisc"), 0, 1)


def test_kappa_scales_under_affine_change():
    d = PlanarDomain("pdisc", scale=3, shift=1)
    assert kappa(d, 1 + 3 * 0.4, 1) == pytest.approx(kappa(parse_domain("pdisc"), 0.4, 1) / 3)


@settings(max_examples=100)
@given(disc_pt, disc_pt, vec, vec)
def test_product_matches_schwarz_pick(z1, z2, x1, x2):
    disc = parse_domain("disc")
    a = kappa_product(disc, disc, (z1, z2), (x1, x2))
    b = schwarz_pick_polydisc((z1, z2), (x1, x2))
    assert a == pytest.approx(b, rel=1e-12, abs=1e-300)


def test_hahn_bounds():
    b = hahn_bounds(parse_domain("disc"), 0.3, 1)
    assert b.exact and b.lower == b.upper
    b = hahn_bounds(parse_domain("pdisc"), 0.5, 1)
    assert not b.exact
    assert b.lower <= b.upper == pytest.approx(2.0)
    b = hahn_bounds(parse_domain("cstar"), 1, 1)
    assert b.lower == 0 and b.upper == pytest.approx(1.0)
    with pytest.raises(ValueError):
        HahnBounds(2.0, 1.0, False, "")


TRUTH = ["disc", "plane", "cstar", "pdisc", "annulus:0.3"]


@pytest.mark.parametrize("a", TRUTH)
@pytest.mark.parametrize("b", TRUTH)
def test_truth_table(a, b):
    v = classify_product(parse_domain(a), parse_domain(b))
    if a in ("disc", "plane") or b in ("disc", "plane"):
        assert v.case == SIMPLY_CONNECTED_FACTOR
    elif "cstar" in (a, b):
        assert v.case == CSTAR_FACTOR
    else:
        assert v.case == NOT_EQUAL
    assert v.equal == (v.case != NOT_EQUAL)
