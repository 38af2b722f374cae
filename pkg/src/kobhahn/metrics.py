"""Kobayashi-Royden pseudometric on model domains, Hahn bounds, and the
product equality classifier."""

from __future__ import annotations

import math
from dataclasses import dataclass


from .auts import moebius_h
from .coverings import PlanarDomain, covering_of

__all__ = [
    "HahnBounds",
    "EqualityVerdict",
    "kappa",
    "kappa_disc",
    "kappa_product",
    "hahn_bounds",
    "classify_product",
    "schwarz_pick_polydisc",
    "SIMPLY_CONNECTED_FACTOR",
    "CSTAR_FACTOR",
    "NOT_EQUAL",
]

SIMPLY_CONNECTED_FACTOR = "SimplyConnectedFactor"
CSTAR_FACTOR = "CstarFactor"
NOT_EQUAL = "NotEqual"


def _require_member(d: PlanarDomain, z):
    if not bool(d.contains(complex(z))):
        raise ValueError(f"{z} is not a point of {d.descriptor}")


def kappa_disc(z, X) -> float:
    """kappa_E(z; X) = |X| / (1 - |z|^2)."""
    z = complex(z)
    if not abs(z) < 1:
        raise ValueError(f"{z} is not in the unit disc")
    return abs(X) / (1 - abs(z) ** 2)


def kappa(d: PlanarDomain, z, X, sheet: int = 0) -> float:
    """kappa_D(z; X), computed on the universal cover.

    Plane covers give 0. Disc covers give kappa_E at a fiber point of z,
    evaluated in the half-plane chart, |X| / (2 Im tau |P'(tau)|), which is
    the same number as |X / p'(w)| / (1 - |w|^2) at w = cayley_inv(tau) but
    does not lose digits on sheets near the circle.
    """
    _require_member(d, z)
    cov = covering_of(d)
    if cov.cover == "plane":
        return 0.0
    if X == 0:
        return 0.0
    tau = complex(cov.fiber_hp(complex(z), sheet))
    return abs(X) / (2 * tau.imag * abs(complex(cov.hp_dp(tau))))


def kappa_product(d1: PlanarDomain, d2: PlanarDomain, a, X) -> float:
    """max of the factor metrics."""
    return max(kappa(d1, a[0], X[0]), kappa(d2, a[1], X[1]))


@dataclass(frozen=True)
class HahnBounds:
    lower: float
    upper: float  # math.inf when no injective competitor was constructed
    exact: bool
    provenance: str

    def __post_init__(self):
        if self.lower > self.upper * (1 + 1e-12):
            raise ValueError("lower bound exceeds upper bound")


def hahn_bounds(d: PlanarDomain, z, X) -> HahnBounds:
    """kappa <= h <= |X| / r with r the largest round disc about z inside d."""
    lower = kappa(d, z, X)
    if d.simply_connected:
        return HahnBounds(lower, lower, True, "simply connected: h equals kappa")
    r = float(d.boundary_distance(complex(z)))
    if not r > 0 or not math.isfinite(r):
        return HahnBounds(lower, math.inf, False, "no injective competitor constructed")
    return HahnBounds(lower, abs(X) / r, False,
                      f"injective affine disc zeta -> z + {r!r} zeta")


@dataclass(frozen=True)
class EqualityVerdict:
    case: str
    witness: str

    @property
    def equal(self):
        return self.case != NOT_EQUAL


def classify_product(d1: PlanarDomain, d2: PlanarDomain) -> EqualityVerdict:
    """Does h equal kappa on d1 x d2?"""
    for k, d in ((1, d1), (2, d2)):
        if d.simply_connected:
            return EqualityVerdict(SIMPLY_CONNECTED_FACTOR,
                                   f"factor {k} ({d.descriptor}) is simply connected")
    for k, d in ((1, d1), (2, d2)):
        if d.is_cstar:
            return EqualityVerdict(CSTAR_FACTOR,
                                   f"factor {k} ({d.descriptor}) is biholomorphic to C minus a point")
    return EqualityVerdict(NOT_EQUAL,
                           f"both factors are covered by the disc with non-injective covering "
                           f"({d1.descriptor}, {d2.descriptor})")


def schwarz_pick_polydisc(z, X) -> float:
    """Independent route for E x E: move each factor point to 0 by h_{z_j};
    at the origin the metric of the polydisc is max |Y_j|."""
    return max(abs(moebius_h(zj).deriv(zj) * Xj) for zj, Xj in zip(z, X))

