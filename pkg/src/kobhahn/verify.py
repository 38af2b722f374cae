"""Invariant suites run by ``kobhahn verify``.

Every check is a named number with a bound: ``max`` checks pass when the value
is below the bound, ``min`` checks when it is above. All sampling is driven by
one seed, so a report is a pure function of (suite, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import auts as A
from .counterexample import (DifferenceSurface, certify, d_from_eps, dichotomy_factors,
                             intersection_persistence, transversality_check)
from .coverings import PlanarDomain, covering_of, parse_domain, sup_displacement_probe
from .injectivize import BRANCHES, JET_TOL, injectivize, random_disc, verify_injectivity
from .metrics import NOT_EQUAL, classify_product, kappa, kappa_disc, kappa_product, schwarz_pick_polydisc

__all__ = ["Check", "SUITES", "run_suite", "NOT_EQUAL_PAIRS", "CATALOG", "TRUTH_DOMAINS"]

CATALOG = ("disc", "plane", "cstar", "pdisc", "annulus:0.3", "annulus:0.5")
TRUTH_DOMAINS = ("disc", "plane", "cstar", "pdisc", "annulus:0.3")
NOT_EQUAL_PAIRS = (("pdisc", "pdisc"), ("annulus:0.3", "pdisc"), ("annulus:0.3", "annulus:0.5"))


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    bound: float
    kind: str = "max"  # "max": value < bound; "min": value > bound

    @property
    def passed(self):
        v = float(self.value)
        if math.isnan(v):
            return False
        return v < self.bound if self.kind == "max" else v > self.bound


def _disc_points(rng, n, radius=0.95):
    return radius * np.sqrt(rng.random(n)) * np.exp(2j * np.pi * rng.random(n))


def _random_aut(rng):
    return A.DiscAut(np.exp(2j * np.pi * rng.random()), complex(_disc_points(rng, 1, 0.9)[0]))


def suite_auts(seed):
    rng = np.random.default_rng(seed)
    z = _disc_points(rng, 200)
    assoc = inv = comp = inv_dist = interp = 0.0
    for _ in range(50):
        f, g, h = (_random_aut(rng) for _ in range(3))
        l, r = (f @ g) @ h, f @ (g @ h)
        assoc = max(assoc, float(np.max(np.abs(l(z) - r(z)))))
        e = f @ A.invert(f)
        inv = max(inv, abs(e.phase - 1), abs(e.center))
        comp = max(comp, float(np.max(np.abs((f @ g)(z) - f(g(z))))))
        w = _disc_points(rng, 200)
        inv_dist = max(inv_dist, float(np.max(np.abs(A.moebius_distance(f(z), f(w)) - A.moebius_distance(z, w)))))
        x1, x2 = _disc_points(rng, 2, 0.8)
        phi = A.two_point_interpolant(x1, f(x1), x2, f(x2))
        interp = max(interp, abs(phi(x1) - f(x1)), abs(phi(x2) - f(x2)))
    invol = 0.0
    for a in _disc_points(rng, 20, 0.8):
        psi = _random_aut(rng)
        if abs(psi(a) - a) < 1e-3:
            continue
        phi = A.phi_involution(a, psi)
        sq = phi @ phi
        invol = max(invol, abs(sq.phase - 1), abs(sq.center), abs(phi(a) - psi(a)),
                    abs(phi.deriv(a) * phi.deriv(psi(a)) - 1))
    return [
        Check("associativity", assoc, 1e-12),
        Check("inverse", inv, 1e-12),
        Check("composition_matches_pointwise", comp, 1e-12),
        Check("distance_invariance", inv_dist, 1e-12),
        Check("two_point_interpolant", interp, 1e-10),
        Check("involution_identities", invol, 1e-10),
    ]


def suite_coverings(seed):
    rng = np.random.default_rng(seed)
    out = []
    for desc in CATALOG:
        cov = covering_of(parse_domain(desc))
        if cov.cover == "E":
            z = cov.balanced_samples(_disc_points(rng, 1000, 0.9))
        else:
            z = (rng.random(1000) - 0.5) * 8 + 1j * (rng.random(1000) - 0.5) * 8
        deck = 0.0
        if not cov.deck.is_identity:
            deck = float(np.max(np.abs(cov.p(cov.deck(z)) - cov.p(z))))
        out.append(Check(f"deck_invariance[{desc}]", deck, 1e-9))
        w = cov.p(z[:200])
        fib = float(np.max(np.abs(cov.p(cov.fiber(w)) - w)))
        if cov.cover == "E":
            # other sheets sit near the circle; read them in the half-plane chart
            for k in (1, -2):
                fib = max(fib, float(np.max(np.abs(cov.hp_p(cov.fiber_hp(w, k)) - w))))
        elif cov.domain.kind == "cstar":
            fib = max(fib, *(float(np.max(np.abs(cov.p(cov.fiber(w, k)) - w))) for k in (1, -2)))
        out.append(Check(f"fiber_roundtrip[{desc}]", fib, 1e-9))
        if cov.cover == "E" and not cov.deck.is_identity:
            out.append(Check(f"sup_displacement_probe[{desc}]", 1 - sup_displacement_probe(cov, 1e-4), 1e-6))
    return out


def suite_metrics(seed):
    rng = np.random.default_rng(seed)
    out = []
    z = _disc_points(rng, 100)
    out.append(Check("kappa_disc_normalization",
                     max(abs(kappa_disc(p, 1) * (1 - abs(p) ** 2) - 1) for p in z), 1e-10))
    for desc in ("pdisc", "annulus:0.3", "annulus:0.5"):
        d = parse_domain(desc)
        cov = covering_of(d)
        w = cov.p(_disc_points(rng, 30, 0.8))
        spread = 0.0
        for p in w:
            vals = [kappa(d, p, 1.0, k) for k in (-2, -1, 0, 1, 3)]
            spread = max(spread, (max(vals) - min(vals)) / max(vals))
        out.append(Check(f"kappa_fiber_independence[{desc}]", spread, 1e-9))
    disc = PlanarDomain("disc")
    gap = 0.0
    for _ in range(100):
        p = _disc_points(rng, 2)
        X = rng.normal(size=2) + 1j * rng.normal(size=2)
        gap = max(gap, abs(kappa_product(disc, disc, p, X) - schwarz_pick_polydisc(p, X)))
    out.append(Check("product_vs_schwarz_pick", gap, 1e-12))
    wrong = 0
    for a in TRUTH_DOMAINS:
        for b in TRUTH_DOMAINS:
            expect = a in ("pdisc", "annulus:0.3") and b in ("pdisc", "annulus:0.3")
            got = classify_product(parse_domain(a), parse_domain(b)).case == NOT_EQUAL
            wrong += expect != got
    out.append(Check("truth_table_mismatches", wrong, 0.5))
    return out


def suite_injectivize(seed, per_branch=10, thetas=(0.3, 0.6, 0.9)):
    rng = np.random.default_rng(seed)
    out = []
    for branch in BRANCHES:
        jet = 0.0
        fails = 0
        sep = math.inf
        zero_gap = math.inf
        for theta in thetas:
            for _ in range(per_branch):
                f = random_disc(branch, rng, theta)
                r = injectivize(f, theta)
                fails += r.case_tag != branch
                jet = max(jet, *r.residuals.values())
                rep = verify_injectivity(r.g, 10_000, seed, r.injective_components)
                fails += not rep.passed
                sep = min(sep, rep.min_separation_ratio)
                if branch.startswith("cstar"):
                    zero_gap = min(zero_gap, r.params["min_abs_g1"])
        out.append(Check(f"jet_residual[{branch}]", jet, JET_TOL))
        out.append(Check(f"verifier_failures[{branch}]", fails, 0.5))
        out.append(Check(f"min_separation_ratio[{branch}]", sep, 0.0, "min"))
        if branch.startswith("cstar"):
            out.append(Check(f"min_abs_g1[{branch}]", zero_gap, 0.0, "min"))
    return out


def suite_counterexample(seed):
    rng = np.random.default_rng(seed)
    out = []
    for d1, d2 in NOT_EQUAL_PAIRS:
        tag = f"{d1}x{d2}"
        cert = certify(parse_domain(d1), parse_domain(d2))
        rt = cert.residual_table
        out.append(Check(f"covering_equality[{tag}]",
                         max(rt["covering_equality_1"], rt["covering_equality_2"]), 1e-9))
        if rt.get("involution") is not None:
            out.append(Check(f"involution[{tag}]", rt["involution"], 1e-10))
        out.append(Check(f"abs_det[{tag}]", abs(cert.det_value), 1e-6, "min"))
        out.append(Check(f"det_direct_vs_simplified[{tag}]", cert.det_relative_gap, 1e-9))
        s1, s2 = DifferenceSurface.of(cert)
        jac = transversality_check(s1, s2, cert.q)
        out.append(Check(f"transversality_sign[{tag}]",
                         abs(jac + cert.det_value) / abs(cert.det_value), 1e-9))
        runs = [intersection_persistence(s1, s2, cert.q, dl, cert.det_value) for dl in (1e-3, 1e-2)]
        out.append(Check(f"persistence_residual[{tag}]", max(r.residual for r in runs), 1e-10))
        out.append(Check(f"persistence_failures[{tag}]",
                         sum(not (r.converged and r.off_diagonal and r.in_neighbourhood) for r in runs), 0.5))
        ratio = runs[1].displacement / runs[0].displacement
        out.append(Check(f"persistence_scaling_log2_error[{tag}]", abs(math.log2(ratio / 10)), 1.0))
    psi = A.moebius_h(-2 * d_from_eps(0.2) / (1 + d_from_eps(0.2) ** 2))
    real = np.linspace(-0.9, 0.9, 20)
    out.append(Check("dichotomy_real", max(dichotomy_factors(a, psi)[0] for a in real), 1e-10))
    nonreal = _disc_points(rng, 200, 0.9)
    nonreal = nonreal[np.abs(nonreal.imag) > 0.1][:20]
    out.append(Check("dichotomy_nonreal", min(dichotomy_factors(a, psi)[0] for a in nonreal), 1e-3, "min"))
    out.append(Check("dichotomy_minus_excluded",
                     min(dichotomy_factors(a, psi)[1] for a in np.concatenate([real, nonreal])), 1e-3, "min"))
    return out


SUITES = {
    "auts": suite_auts,
    "coverings": suite_coverings,
    "metrics": suite_metrics,
    "injectivize": suite_injectivize,
    "counterexample": suite_counterexample,
}


def run_suite(name: str, seed: int = 0):
    """Checks of one suite, or of all of them for ``name == "all"``."""
    if name == "all":
        return [c for n in SUITES for c in _prefixed(n, SUITES[n](seed))]
    if name not in SUITES:
        raise KeyError(name)
    return _prefixed(name, SUITES[name](seed))


def _prefixed(suite, checks):
    return [Check(f"{suite}.{c.name}", c.value, c.bound, c.kind) for c in checks]
