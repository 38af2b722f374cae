"""Model planar domains, their universal coverings and deck generators."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .auts import DiscAut
from .holo import Affine, CoverAnnulus, CoverPdisc, Exp, HoloExpr, Var, derivative, evaluate

__all__ = [
    "PlanarDomain",
    "DeckMap",
    "Covering",
    "Lift",
    "parse_domain",
    "covering_of",
    "lift_disc",
    "sup_displacement_probe",
    "cayley",
    "cayley_inv",
    "half_plane_distance",
    "KINDS",
]

KINDS = ("disc", "plane", "cstar", "pdisc", "annulus")

# beyond this the balanced deck pairs sit closer than ~1e-13 to the circle
MAX_TRANSLATION_LENGTH = 60.0

# Cayley matrices: c(z) = i(1+z)/(1-z) maps E onto the upper half-plane
_C = np.array([[1j, 1j], [-1, 1]], dtype=complex)
_CINV = np.array([[1, -1j], [1, 1j]], dtype=complex)


def cayley(z):
    return 1j * (1 + z) / (1 - z)


def cayley_inv(tau):
    return (tau - 1j) / (tau + 1j)


def half_plane_distance(t1, t2):
    """Hyperbolic distance (curvature -1) between points of the upper half-plane."""
    t1, t2 = np.asarray(t1), np.asarray(t2)
    x = 1 + np.abs(t1 - t2) ** 2 / (2 * t1.imag * t2.imag)
    return np.arccosh(x)


@dataclass(frozen=True)
class PlanarDomain:
    """A model domain, optionally moved by w -> scale * w + shift."""

    kind: str
    r: Optional[float] = None
    scale: complex = 1 + 0j
    shift: complex = 0j

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unsupported domain kind {self.kind!r}")
        if self.kind == "annulus":
            if self.r is None or not 0 < self.r < 1:
                raise ValueError(f"annulus needs 0 < r < 1, got {self.r}")
        elif self.r is not None:
            raise ValueError(f"{self.kind} takes no radius")
        if self.scale == 0:
            raise ValueError("scale must be nonzero")

    @property
    def descriptor(self):
        base = f"annulus:{self.r!r}" if self.kind == "annulus" else self.kind
        if self.scale == 1 and self.shift == 0:
            return base
        return f"{complex(self.shift)}+{complex(self.scale)}*{base}"

    def to_model(self, w):
        return (w - self.shift) / self.scale

    def contains(self, w):
        u = np.abs(self.to_model(w))
        if self.kind == "disc":
            return u < 1
        if self.kind == "plane":
            return np.isfinite(u)
        if self.kind == "cstar":
            return u > 0
        if self.kind == "pdisc":
            return (u > 0) & (u < 1)
        return (u > self.r) & (u < 1)

    def boundary_distance(self, w):
        u = np.abs(self.to_model(w))
        s = abs(self.scale)
        if self.kind == "disc":
            d = 1 - u
        elif self.kind == "plane":
            d = np.inf * np.ones_like(u)
        elif self.kind == "cstar":
            d = u
        elif self.kind == "pdisc":
            d = np.minimum(u, 1 - u)
        else:
            d = np.minimum(u - self.r, 1 - u)
        return d * s

    @property
    def simply_connected(self):
        return self.kind in ("disc", "plane")

    @property
    def is_cstar(self):
        return self.kind == "cstar"


def parse_domain(text: str) -> PlanarDomain:
    """Descriptor forms: disc, plane, cstar, pdisc, annulus:<r>."""
    t = text.strip().lower()
    if t.startswith("annulus:"):
        try:
            r = float(t.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad annulus radius in {text!r}") from None
        return PlanarDomain("annulus", r)
    if t in ("disc", "plane", "cstar", "pdisc"):
        return PlanarDomain(t)
    raise ValueError(f"unknown domain descriptor {text!r}")


@dataclass(frozen=True)
class DeckMap:
    """Deck generator: a disc automorphism (cover E) or a translation (cover C).

    For E covers the map is also kept as a real affine map tau -> a tau + b of
    the upper half-plane (conjugated by the Cayley map), which is how it is
    evaluated: that route keeps full relative precision near the boundary.
    """

    shift: Optional[complex] = None
    hp: Optional[tuple] = None
    _aut: Optional[DiscAut] = None

    @classmethod
    def half_plane(cls, a, b):
        return cls(hp=(float(a), float(b)))

    @classmethod
    def from_aut(cls, aut: DiscAut):
        return cls(_aut=aut)

    @property
    def aut(self) -> DiscAut:
        """Normal form on the disc. Decks with very long translation length
        have a center that rounds onto the circle; those raise."""
        if self._aut is not None:
            return self._aut
        if self.hp is None:
            raise ValueError("translation deck has no disc normal form")
        a, b = self.hp
        m = _CINV @ np.array([[a, b], [0, 1]], dtype=complex) @ _C
        return DiscAut.from_matrix(m)

    @property
    def is_identity(self):
        if self.shift is not None:
            return self.shift == 0
        if self.hp is not None:
            return self.hp == (1.0, 0.0)
        return self._aut.is_identity()

    def boundary_fixed_points(self):
        """Fixed points on the unit circle."""
        if self.hp is None:
            fps = self.aut.fixed_points()
            return fps / np.abs(fps)
        a, b = self.hp
        if a == 1.0:
            return np.array([1 + 0j])
        return np.array([1 + 0j, cayley_inv(b / (1 - a))])

    @property
    def parabolic(self):
        return self.hp is not None and self.hp[0] == 1.0

    def hp_apply(self, tau):
        a, b = self.hp
        return a * tau + b

    def hp_half(self):
        """Square root of the half-plane deck in its one-parameter group."""
        a, b = self.hp
        ra = math.sqrt(a)
        return ra, b / (1 + ra)

    def displacement(self, z):
        """m(z, psi(z)), computed as tanh(rho/2) from the half-plane distance."""
        tau = cayley(z)
        return np.tanh(half_plane_distance(tau, self.hp_apply(tau)) / 2)

    def __call__(self, z):
        if self.shift is not None:
            return z + self.shift
        if self.hp is not None:
            return cayley_inv(self.hp_apply(cayley(z)))
        return self._aut(z)

    def deriv(self, z):
        if self.shift is not None:
            return np.ones_like(z) if np.ndim(z) else 1 + 0j
        if self.hp is not None:
            tau = self.hp_apply(cayley(z))
            return (2j / (tau + 1j) ** 2) * self.hp[0] * (2j / (1 - z) ** 2)
        return self._aut.deriv(z)


@dataclass(frozen=True)
class Covering:
    domain: PlanarDomain
    cover: str  # "E" or "plane"
    map_p: HoloExpr
    deck: DeckMap = field(repr=False)

    def p(self, z):
        return evaluate(self.map_p, z)

    def dp(self, z):
        return derivative(self.map_p, z)[1]

    def cover_contains(self, z):
        if self.cover == "plane":
            return np.isfinite(np.abs(z))
        return np.abs(z) < 1

    def hp_p(self, tau):
        """The covering read in the half-plane chart: p(cayley_inv(tau))."""
        d = self.domain
        if d.kind == "pdisc":
            u = np.exp(1j * tau)
        elif d.kind == "annulus":
            u = np.exp(_annulus_exponent(d.r) * np.log(tau))
        else:
            u = cayley_inv(tau)
        return d.scale * u + d.shift

    def hp_dp(self, tau):
        d = self.domain
        if d.kind == "pdisc":
            du = 1j * np.exp(1j * tau)
        elif d.kind == "annulus":
            s = _annulus_exponent(d.r)
            du = s * np.exp(s * np.log(tau)) / tau
        else:
            du = 2j / (tau + 1j) ** 2
        return d.scale * du

    def fiber_hp(self, w, k=0):
        """Fiber point in the half-plane chart (E covers only)."""
        d = self.domain
        if self.cover != "E":
            raise ValueError("half-plane chart only exists for disc covers")
        if not np.all(d.contains(w)):
            raise ValueError(f"{w} is not in {d.descriptor}")
        u = d.to_model(w)
        if d.kind == "disc":
            return cayley(u)
        logu = np.log(u) + 2j * np.pi * k
        if d.kind == "pdisc":
            return -1j * logu
        return np.exp(logu / _annulus_exponent(d.r))

    def balanced_samples(self, u):
        """Points z = R^{-1}(u) where R is the half-deck (psi = R o R).

        z and psi(z) = R(u) lie at the same depth, so deck identities can be
        checked without pushing one side of the pair onto the circle.
        """
        if self.cover != "E":
            return u
        a, b = self.deck.hp_half()
        return cayley_inv((cayley(u) - b) / a)

    def fiber(self, w, k=0):
        """A point of p^{-1}(w), indexed by the sheet number ``k``."""
        d = self.domain
        if not np.all(d.contains(w)):
            raise ValueError(f"{w} is not in {d.descriptor}")
        u = d.to_model(w)
        if d.kind in ("disc", "plane"):
            return u
        if d.kind == "cstar":
            return np.log(u) + 2j * np.pi * k
        logu = np.log(u) + 2j * np.pi * k
        if d.kind == "pdisc":
            # exp(i tau) = u  ->  tau = -i log u
            return cayley_inv(-1j * logu)
        return cayley_inv(np.exp(logu / _annulus_exponent(d.r)))


def _annulus_exponent(r):
    return 1j * math.log(1 / r) / math.pi


def _post(d: PlanarDomain, expr: HoloExpr) -> HoloExpr:
    if d.scale == 1 and d.shift == 0:
        return expr
    return Affine(d.scale, d.shift, expr)


def covering_of(d: PlanarDomain) -> Covering:
    """Closed-form universal covering with a deck generator."""
    z = Var()
    if d.kind == "disc":
        return Covering(d, "E", _post(d, z), DeckMap(hp=(1.0, 0.0)))
    if d.kind == "plane":
        return Covering(d, "plane", _post(d, z), DeckMap(shift=0j))
    if d.kind == "cstar":
        return Covering(d, "plane", _post(d, Exp(z)), DeckMap(shift=2j * math.pi))
    if d.kind == "pdisc":
        return Covering(d, "E", _post(d, CoverPdisc(z)), DeckMap.half_plane(1.0, 2 * math.pi))
    length = 2 * math.pi ** 2 / math.log(1 / d.r)
    if length > MAX_TRANSLATION_LENGTH:
        raise ValueError(
            f"annulus:{d.r} is too thin: deck translation length {length:.1f} puts "
            f"deck images within 1e-{length / 2 / math.log(10):.0f} of the circle")
    lam = math.exp(-length)
    return Covering(d, "E", _post(d, CoverAnnulus(d.r, z)), DeckMap.half_plane(lam, 0.0))


@dataclass(frozen=True)
class Lift:
    """Lifted disc sampled on a polar grid: ``w[i, k]`` lifts ``z[i, k]``."""

    z: np.ndarray
    w: np.ndarray
    residual: float

    def at_center(self):
        return complex(self.w[0, 0])


def lift_disc(f: HoloExpr, cov: Covering, base, radius=0.9, n_rays=16, n_nodes=8,
              steps=512, newton_iters=3) -> Lift:
    """Lift f through the covering by integrating w' = f'/p'(w) along rays
    (RK4, ``steps`` per ray) with a Newton correction at each output node."""
    base = complex(base)
    f0 = evaluate(f, 0j)
    if abs(cov.p(base) - f0) > 1e-9:
        raise ValueError("base point does not lie over f(0)")
    ang = np.exp(2j * np.pi * np.arange(n_rays) / n_rays)
    h = radius / steps
    every = steps // n_nodes
    w = np.full(n_rays, base, dtype=complex)
    zs = [np.zeros(n_rays, dtype=complex)]
    ws = [w.copy()]

    def rhs(t, w):
        _, df = derivative(f, t * ang)
        dp = cov.dp(w)
        if np.any(np.abs(dp) < 1e-300):
            raise ValueError("covering derivative vanishes during continuation")
        return df * ang / dp

    for s in range(steps):
        t = s * h
        k1 = rhs(t, w)
        k2 = rhs(t + h / 2, w + h / 2 * k1)
        k3 = rhs(t + h / 2, w + h / 2 * k2)
        k4 = rhs(t + h, w + h * k3)
        w = w + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if (s + 1) % every == 0:
            z = (s + 1) * h * ang
            target = evaluate(f, z)
            for _ in range(newton_iters):
                w = w - (cov.p(w) - target) / cov.dp(w)
            zs.append(z)
            ws.append(w.copy())
    Z = np.stack(zs, axis=1)
    W = np.stack(ws, axis=1)
    res = float(np.max(np.abs(cov.p(W) - evaluate(f, Z))))
    return Lift(Z, W, res)


def boundary_target(deck: DeckMap) -> complex:
    """Boundary point far from the deck's fixed points.

    Parabolic: the antipode of the fixed point. Hyperbolic: the midpoint of an
    arc between the two fixed points. Displacement tends to 1 there.
    """
    fps = deck.boundary_fixed_points()
    if deck.parabolic or len(fps) == 1 or abs(fps[0] - fps[1]) < 1e-6:
        return complex(-fps[0])
    xi1, xi2 = complex(fps[0]), complex(fps[1])
    return xi1 * cmath.exp(0.5j * cmath.phase(xi2 / xi1))


def sup_displacement_probe(cov: Covering, delta: float, n=4000) -> float:
    """max of m(z, psi(z)) along the ray from 0 to radius 1 - delta toward a
    boundary point away from the deck's fixed points."""
    if cov.cover != "E":
        raise ValueError("displacement probe needs a covering by the unit disc")
    if cov.deck.is_identity:
        raise ValueError("identity deck has zero displacement")
    if not 0 < delta < 1e-2:
        raise ValueError("delta must lie in (0, 1e-2)")
    zeta = boundary_target(cov.deck)
    t = 1 - np.geomspace(1, delta, n)
    return float(np.max(cov.deck.displacement(t * zeta)))
