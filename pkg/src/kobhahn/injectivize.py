"""Injective replacements for analytic discs into products of planar domains.

Given f = (f1, f2): E -> D1 x D2 and theta in (0, 1), build an injective g with
g(0) = f(0) and g'(0) = theta f'(0). Two constructions:

* ``prop2_injectivize`` when D1 is simply connected (disc or plane model);
* ``prop3_injectivize`` when D1 is C minus a point.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import qmc

from .coverings import PlanarDomain, parse_domain
from .holo import (Add, Affine, Compose, Const, Exp, HoloExpr, Moebius, Mul, Pow, RegionError,
                   Sub, Var, boundary_max_modulus, derivative, eval_jet, evaluate, parse, render)

__all__ = [
    "DiscPair",
    "DegenerateJet",
    "InjectivizationResult",
    "InjectivityReport",
    "prop2_injectivize",
    "prop3_injectivize",
    "injectivize",
    "verify_injectivity",
    "winding_number",
    "theta_family_report",
    "random_disc",
    "BRANCHES",
]

JET_TOL = 1e-10
BRANCHES = ("sc-injective-factor", "sc-flat-factor", "cstar-general", "cstar-unit", "cstar-swapped")


class DegenerateJet(ValueError):
    """f'(0) = 0: no injective competitor is required or possible."""


@lru_cache(maxsize=32)
def _halton(d, n, seed):
    u = qmc.Halton(d=d, seed=seed).random(n)
    u.flags.writeable = False
    return u


def _disc_samples(n, radius=0.999, seed=0):
    u = _halton(2, n, seed)
    return radius * np.sqrt(u[:, 0]) * np.exp(2j * np.pi * u[:, 1])


@dataclass(frozen=True)
class DiscPair:
    comp1: HoloExpr
    comp2: HoloExpr
    target1: PlanarDomain
    target2: PlanarDomain
    check: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        if not self.check:
            return
        z = _disc_samples(1000)
        for k, (c, t) in enumerate(((self.comp1, self.target1), (self.comp2, self.target2)), 1):
            try:
                vals = evaluate(c, z)
                eval_jet(c, 0j)
            except RegionError as exc:
                raise ValueError(f"component {k} is not analytic on the disc: {exc}") from None
            bad = ~t.contains(vals)
            if np.any(bad):
                i = int(np.argmax(bad))
                raise ValueError(f"component {k} leaves {t.descriptor}: "
                                 f"f{k}({z[i]:.4g}) = {vals[i]:.4g}")

    @classmethod
    def from_json(cls, spec: dict) -> "DiscPair":
        try:
            return cls(parse(spec["comp1"]), parse(spec["comp2"]),
                       parse_domain(spec["target1"]), parse_domain(spec["target2"]))
        except KeyError as exc:
            raise ValueError(f"disc spec is missing {exc}") from None

    def to_json(self) -> dict:
        return {"comp1": render(self.comp1), "comp2": render(self.comp2),
                "target1": self.target1.descriptor, "target2": self.target2.descriptor}

    def jet0(self):
        j1, j2 = eval_jet(self.comp1, 0j), eval_jet(self.comp2, 0j)
        return (j1.value, j2.value), (j1.d1, j2.d1)

    def values(self, z):
        return evaluate(self.comp1, z), evaluate(self.comp2, z)


@dataclass
class InjectivizationResult:
    g: DiscPair
    case_tag: str
    theta: float
    residuals: dict
    params: dict
    injective_components: tuple = ()

    def to_json(self):
        return {"g": self.g.to_json(), "case": self.case_tag, "theta": self.theta,
                "residuals": self.residuals, "params": _jsonable(self.params),
                "injective_components": list(self.injective_components)}


def _jsonable(d):
    out = {}
    for k, v in d.items():
        if isinstance(v, complex):
            out[k] = [v.real, v.imag]
        elif isinstance(v, dict):
            out[k] = _jsonable(v)
        else:
            out[k] = v
    return out


def _dilate(f: HoloExpr, theta) -> HoloExpr:
    return Compose(f, Affine(theta, 0j, Var()))


def _check_theta(theta):
    if not 0 < theta < 1:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")


def _finish(f, g, theta, tag, params, inj=()):
    (a1, a2), (b1, b2) = f.jet0()
    (c1, c2), (e1, e2) = g.jet0()
    res = {
        "value": max(abs(c1 - a1), abs(c2 - a2)),
        "derivative": max(abs(e1 - theta * b1), abs(e2 - theta * b2)),
    }
    return InjectivizationResult(g, tag, theta, res, params, inj)


def _is_zero(x, scale=1.0):
    return abs(x) <= 1e-14 * max(1.0, scale)


def prop2_injectivize(f: DiscPair, theta: float) -> InjectivizationResult:
    """Injective g when the first target is simply connected.

    Case 1 (f1'(0) != 0): an injective g1 in D1 with the right 1-jet, paired
    with f2(theta z). Case 2 (f1'(0) = 0): g1 = f1(0) + d/(M+1) (h - theta z)
    with h = (f2(theta z) - f2(0)) / f2'(0), which is injective together with
    g2 because equal g2 values force equal h values.
    """
    _check_theta(theta)
    t1 = f.target1
    if not t1.simply_connected:
        raise ValueError(f"first target {t1.descriptor} is not simply connected")
    (a1, a2), (b1, b2) = f.jet0()
    if _is_zero(b1) and _is_zero(b2):
        raise DegenerateJet("f'(0) = 0")
    g2 = _dilate(f.comp2, theta)
    z = Var()
    if not _is_zero(b1):
        if t1.kind == "plane":
            g1 = Affine(theta * b1, a1, z)
            params = {"kind": "affine"}
        else:
            # model disc: g1 = h_{-a}(lam z), |lam| < 1 by Schwarz-Pick
            a = (a1 - t1.shift) / t1.scale
            lam = theta * (b1 / t1.scale) / (1 - abs(a) ** 2)
            if not abs(lam) < 1:
                raise ValueError("first component violates Schwarz-Pick; is it really into the disc?")
            g1 = Moebius(-a, Affine(lam, 0j, z))
            if t1.scale != 1 or t1.shift != 0:
                g1 = Affine(t1.scale, t1.shift, g1)
            params = {"kind": "moebius", "a": a, "lambda": lam}
        g = DiscPair(g1, g2, f.target1, f.target2)
        return _finish(f, g, theta, "sc-injective-factor", params, (1,))

    h = Affine(1 / b2, -a2 / b2, g2)
    M = boundary_max_modulus(h, 1.0)
    dist = float(t1.boundary_distance(a1))
    d = dist / 2 if math.isfinite(dist) else 1.0
    g1 = Affine(d / (M + 1), a1, Sub(h, Affine(theta, 0j, z)))
    g = DiscPair(g1, g2, f.target1, f.target2)
    offset = float(np.max(np.abs(evaluate(g1, _disc_samples(1000)) - a1)))
    return _finish(f, g, theta, "sc-flat-factor", {"M": M, "d": d, "dist": dist, "max_offset": offset})


def _puncture_gap(g: DiscPair) -> float:
    """min |g1 - puncture| over 10^4 samples of the disc."""
    zs = _disc_samples(10_000, 0.9999, seed=1)
    return float(np.min(np.abs(evaluate(g.comp1, zs) - g.target1.shift)))


def prop3_injectivize(f: DiscPair, theta: float) -> InjectivizationResult:
    """Injective g when the first target is C minus a point (and D2 != C)."""
    r = _cstar_branches(f, theta)
    r.params["min_abs_g1"] = _puncture_gap(r.g)
    return r


def _cstar_branches(f: DiscPair, theta: float) -> InjectivizationResult:
    _check_theta(theta)
    t1, t2 = f.target1, f.target2
    if not t1.is_cstar:
        raise ValueError(f"first target {t1.descriptor} is not C minus a point")
    if t2.kind == "plane":
        raise ValueError("second target is the plane: use prop2_injectivize with the factors swapped")
    (a1, a2), (b1, b2) = f.jet0()
    if _is_zero(b1) and _is_zero(b2):
        raise DegenerateJet("f'(0) = 0")
    # normalize the first factor to the model C* with f1(0) = 1
    s = (a1 - t1.shift) / t1.scale
    F1p = b1 / t1.scale / s
    back = t1.scale * s

    if _is_zero(b2):
        dist = float(t2.boundary_distance(a2))
        tD1 = PlanarDomain("disc", scale=dist, shift=a2)
        F1 = Affine(1 / (t1.scale * s), -t1.shift / (t1.scale * s), f.comp1)
        sub = prop2_injectivize(DiscPair(Const(a2), F1, tD1, PlanarDomain("cstar")), theta)
        g = DiscPair(Affine(back, t1.shift, sub.g.comp2), sub.g.comp1, t1, t2)
        params = {"normalizer": s, "swapped_radius": dist, "inner": sub.params}
        return _finish(f, g, theta, "cstar-swapped", params)

    g2 = _dilate(f.comp2, theta)
    if abs(theta * F1p - 1) <= 1e-12:
        g1 = Affine(back, back + t1.shift, Var())
        g = DiscPair(g1, g2, t1, t2)
        return _finish(f, g, theta, "cstar-unit", {"normalizer": s}, (1,))

    M = boundary_max_modulus(f.comp2, theta)
    A = theta * b2 / (theta * F1p - 1)
    k = 1
    while abs(a2 - k * A) <= M:
        k += 1
        if k > 10 ** 7:
            raise RuntimeError("no admissible exponent found")
    ck = a2 - k * A
    # h = (f2(theta z) - c_k) / (f2(0) - c_k); f2(0) - c_k = k A
    h = Affine(1 / (k * A), -ck / (k * A), g2)
    g1m = Mul(Add(Const(1.0), Var()), Pow(h, k))
    g = DiscPair(Affine(back, t1.shift, g1m), g2, t1, t2)
    params = {"normalizer": s, "M": M, "k": k, "c_k": complex(ck)}
    return _finish(f, g, theta, "cstar-general", params)


def injectivize(f: DiscPair, theta: float) -> InjectivizationResult:
    """Route to the construction that applies to the targets."""
    if f.target1.simply_connected:
        return prop2_injectivize(f, theta)
    if f.target1.is_cstar and f.target2.kind != "plane":
        return prop3_injectivize(f, theta)
    swapped = DiscPair(f.comp2, f.comp1, f.target2, f.target1, check=False)
    if f.target2.simply_connected or f.target2.is_cstar:
        r = injectivize(swapped, theta)
        g = DiscPair(r.g.comp2, r.g.comp1, f.target1, f.target2, check=False)
        inj = tuple(3 - c for c in r.injective_components)
        return InjectivizationResult(g, r.case_tag + "-swapped-factors", theta, r.residuals, r.params, inj)
    raise ValueError("neither factor is simply connected or C minus a point; "
                     "no injective replacement exists in general")


# --------------------------------------------------------------------------
# verification


def winding_number(f: HoloExpr, w, radius=0.999, samples=4096):
    """Number of solutions of f(z) = w in |z| < radius, by the argument
    principle on the sampled circle."""
    th = 2 * np.pi * np.arange(samples + 1) / samples
    vals = evaluate(f, radius * np.exp(1j * th))
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    d = vals[None, :] - w[:, None]
    turn = np.angle(d[:, 1:] / d[:, :-1]).sum(axis=1) / (2 * np.pi)
    return np.rint(turn).astype(int)


@dataclass
class InjectivityReport:
    passed: bool
    n_pairs: int
    min_separation_ratio: float
    collisions: list
    windings: dict

    def to_json(self):
        return {"passed": self.passed, "n_pairs": self.n_pairs,
                "min_separation_ratio": self.min_separation_ratio,
                "collisions": [[[a.real, a.imag], [b.real, b.imag]] for a, b in self.collisions],
                "windings": {str(k): v for k, v in self.windings.items()}}


def _pair_newton(g: DiscPair, z1, z2, iters=20):
    m = len(z1)
    for _ in range(iters):
        v1, d1 = derivative(g.comp1, np.concatenate([z1, z2]))
        v2, d2 = derivative(g.comp2, np.concatenate([z1, z2]))
        F1, F2 = v1[:m] - v1[m:], v2[:m] - v2[m:]
        d11, d12, d21, d22 = d1[:m], d1[m:], d2[:m], d2[m:]
        det = -d11 * d22 + d12 * d21
        ok = np.abs(det) > 1e-300
        det = np.where(ok, det, 1.0)
        dz1 = np.where(ok, (-d22 * F1 + d12 * F2) / det, 0)
        dz2 = np.where(ok, (-d21 * F1 + d11 * F2) / det, 0)
        z1, z2 = z1 - dz1, z2 - dz2
        out = (np.abs(z1) >= 1) | (np.abs(z2) >= 1)
        z1 = np.where(out, 0, z1)
        z2 = np.where(out, 0, z2)
        if np.max(np.abs(dz1) + np.abs(dz2), initial=0) < 1e-15:
            break
    v1, v2 = g.values(z1)
    w1, w2 = g.values(z2)
    return z1, z2, np.maximum(np.abs(v1 - w1), np.abs(v2 - w2))


def verify_injectivity(g: DiscPair, n: int = 10_000, seed: int = 0,
                       injective_components=(), radius: float = 0.999) -> InjectivityReport:
    """Sampled injectivity check for a disc into C^2.

    1. ``n`` quasi-random pairs: no collision, minimal separation ratio.
    2. Collision search: near neighbours in image space of distant grid
       points, refined by Newton on g(z1) = g(z2).
    3. For components that must be injective on their own, the argument
       principle counts exactly one preimage of 8 image targets.
    """
    if n < 1000:
        raise ValueError("need at least 1000 pairs")
    u = _halton(4, n, seed)
    z1 = radius * np.sqrt(u[:, 0]) * np.exp(2j * np.pi * u[:, 1])
    z2 = radius * np.sqrt(u[:, 2]) * np.exp(2j * np.pi * u[:, 3])
    a1, a2 = g.values(z1)
    b1, b2 = g.values(z2)
    sep = np.maximum(np.abs(a1 - b1), np.abs(a2 - b2))
    dz = np.abs(z1 - z2)
    keep = dz > 1e-9
    ratio = float(np.min(sep[keep] / dz[keep]))
    collisions = [(complex(p), complex(q)) for p, q in zip(z1[keep & (sep < 1e-12)], z2[keep & (sep < 1e-12)])]

    rs = radius * np.linspace(0, 1, 33)[1:]
    th = 2 * np.pi * np.arange(80) / 80
    grid = np.concatenate([[0j], (rs[:, None] * np.exp(1j * th[None, :])).ravel()])
    v1, v2 = g.values(grid)
    pts = np.column_stack([v1.real, v1.imag, v2.real, v2.imag])
    scale = np.maximum(pts.std(axis=0), 1e-300)
    tree = cKDTree(pts / scale)
    dist, idx = tree.query(pts / scale, k=7)
    i = np.repeat(np.arange(len(grid)), 6)
    j = idx[:, 1:].ravel()
    dd = dist[:, 1:].ravel()
    far = np.abs(grid[i] - grid[j]) > 0.05
    if np.any(far):
        i, j, dd = i[far], j[far], dd[far]
        score = dd / np.abs(grid[i] - grid[j])
        best = np.argsort(score)[:32]
        c1, c2 = grid[i[best]], grid[j[best]]
        exact = dd[best] == 0
        for p, q in zip(c1[exact], c2[exact]):
            collisions.append((complex(p), complex(q)))
        r1, r2, res = _pair_newton(g, c1.copy(), c2.copy())
        hit = (res < 1e-12) & (np.abs(r1 - r2) > 1e-6) & (np.abs(r1) < radius) & (np.abs(r2) < radius)
        for p, q in zip(r1[hit], r2[hit]):
            collisions.append((complex(p), complex(q)))

    windings = {}
    if injective_components:
        targets = _disc_samples(8, 0.9, seed=seed + 7)
        for c in injective_components:
            comp = g.comp1 if c == 1 else g.comp2
            windings[c] = [int(x) for x in winding_number(comp, evaluate(comp, targets), radius)]
    ok = not collisions and ratio > 0 and all(all(x == 1 for x in w) for w in windings.values())
    return InjectivityReport(ok, n, ratio, collisions, windings)


def theta_family_report(f: DiscPair, thetas, n: int = 10_000, seed: int = 0):
    """One row per theta: construction case, jet residuals, verifier result."""
    rows = []
    for theta in thetas:
        r = injectivize(f, theta)
        rep = verify_injectivity(r.g, n, seed, r.injective_components)
        rows.append({"theta": theta, "case": r.case_tag,
                     "value_residual": r.residuals["value"],
                     "derivative_residual": r.residuals["derivative"],
                     "separation_ratio": rep.min_separation_ratio,
                     "passed": bool(rep.passed and max(r.residuals.values()) < JET_TOL)})
    return rows


# --------------------------------------------------------------------------
# random test discs


def _unit(rng):
    return cmath.exp(2j * math.pi * rng.random())


def _small_poly(rng, total, lead_min=0.0, with_linear=True):
    """c0 + c1 z + c2 z^2 with |c0| + |c1| + |c2| < total."""
    w = rng.dirichlet([1, 1, 1]) * total * 0.98
    if with_linear:
        w[1] = max(w[1], lead_min)
        w *= min(1.0, total * 0.98 / w.sum())
    else:
        w[1] = 0.0
    c = [w[0] * _unit(rng), w[1] * _unit(rng), w[2] * _unit(rng)]
    z = Var()
    return Add(Add(Const(c[0]), Mul(Const(c[1]), z)), Mul(Const(c[2]), Pow(z, 2)))


def random_disc(branch: str, rng: np.random.Generator, theta: float = 0.5) -> DiscPair:
    """A random analytic disc whose injectivization takes ``branch``."""
    z = Var()
    disc, pdisc, cstar = PlanarDomain("disc"), PlanarDomain("pdisc"), PlanarDomain("cstar")
    if branch == "sc-injective-factor":
        a = 0.8 * math.sqrt(rng.random()) * _unit(rng)
        inner = _small_poly(rng, 1.0, lead_min=0.1)
        f1 = Moebius(-a, Sub(inner, Const(evaluate(inner, 0j))))
        if rng.random() < 0.5:
            return DiscPair(f1, _small_poly(rng, 1.0), disc, disc)
        return DiscPair(f1, Compose(parse("cover_pdisc(z)"), _small_poly(rng, 1.0)), disc, pdisc)
    if branch == "sc-flat-factor":
        f1 = _small_poly(rng, 1.0, with_linear=False)
        f2 = _small_poly(rng, 1.0, lead_min=0.1)
        return DiscPair(f1, f2, disc, disc)
    scale = (0.5 + 2 * rng.random()) * _unit(rng)
    if branch == "cstar-general":
        e = Add(Mul(Const((0.2 + 1.5 * rng.random()) * _unit(rng)), z),
                Mul(Const(0.5 * rng.random() * _unit(rng)), Pow(z, 2)))
        return DiscPair(Affine(scale, 0j, Exp(e)), _small_poly(rng, 1.0, lead_min=0.1), cstar, disc)
    if branch == "cstar-unit":
        e = Add(Mul(Const(1 / theta), z), Mul(Const(0.5 * rng.random() * _unit(rng)), Pow(z, 2)))
        return DiscPair(Affine(scale, 0j, Exp(e)), _small_poly(rng, 1.0, lead_min=0.1), cstar, disc)
    if branch == "cstar-swapped":
        e = Add(Mul(Const((0.2 + 1.5 * rng.random()) * _unit(rng)), z),
                Mul(Const(0.5 * rng.random() * _unit(rng)), Pow(z, 2)))
        return DiscPair(Affine(scale, 0j, Exp(e)), _small_poly(rng, 1.0, with_linear=False), cstar, disc)
    raise ValueError(f"unknown branch {branch!r}")
