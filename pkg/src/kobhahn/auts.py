"""Automorphisms of the unit disc in (phase, center) normal form."""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .holo import Affine, HoloExpr, Moebius, Var

__all__ = [
    "DiscAut",
    "IDENTITY",
    "NEG_ID",
    "moebius_h",
    "rotation",
    "compose_auts",
    "invert",
    "moebius_distance",
    "one_minus_m2",
    "two_point_interpolant",
    "phi_involution",
    "aut_expr",
]


@dataclass(frozen=True)
class DiscAut:
    """z -> phase * (z - center) / (1 - conj(center) z)."""

    phase: complex = 1 + 0j
    center: complex = 0j

    def __post_init__(self):
        phase = complex(self.phase)
        center = complex(self.center)
        if not abs(center) < 1:
            raise ValueError(f"center must lie in the unit disc, got {center}")
        if abs(abs(phase) - 1) > 1e-9:
            raise ValueError(f"phase must be unimodular, got {phase}")
        object.__setattr__(self, "phase", phase / abs(phase))
        object.__setattr__(self, "center", center)

    def __call__(self, z):
        a = self.center
        return self.phase * (z - a) / (1 - a.conjugate() * z)

    def deriv(self, z):
        a = self.center
        return self.phase * (1 - abs(a) ** 2) / (1 - a.conjugate() * z) ** 2

    def matrix(self):
        a = self.center
        return np.array([[self.phase, -self.phase * a], [-a.conjugate(), 1]], dtype=complex)

    @classmethod
    def from_matrix(cls, m):
        """Normal form of a 2x2 matrix acting by linear fractional maps; the
        map must preserve the unit disc."""
        (al, be), (ga, de) = np.asarray(m, dtype=complex)
        center = -be / al
        phase = al / de
        return cls(phase / abs(phase), center)

    def __matmul__(self, other):
        return compose_auts(self, other)

    def is_identity(self, tol=1e-12):
        return abs(self.phase - 1) < tol and abs(self.center) < tol

    def fixed_points(self):
        """Roots of conj(a) z^2 + (phase - 1) z - phase a."""
        a, ph = self.center, self.phase
        if abs(a) == 0:
            return np.array([0j]) if abs(ph - 1) > 0 else np.array([], dtype=complex)
        return np.roots([a.conjugate(), ph - 1, -ph * a])


IDENTITY = DiscAut()
NEG_ID = DiscAut(-1 + 0j, 0j)


def moebius_h(a) -> DiscAut:
    """h_a(z) = (z - a) / (1 - conj(a) z)."""
    return DiscAut(1 + 0j, complex(a))


def rotation(theta) -> DiscAut:
    return DiscAut(cmath.exp(1j * theta), 0j)


def compose_auts(phi: DiscAut, psi: DiscAut) -> DiscAut:
    """phi o psi."""
    return DiscAut.from_matrix(phi.matrix() @ psi.matrix())


def invert(phi: DiscAut) -> DiscAut:
    # inverse of phase*h_a is h_{-a} o rot(-arg phase) = conj(phase)*h_{-a*phase}
    return DiscAut(phi.phase.conjugate(), -phi.phase * phi.center)


def _check_disc(*zs):
    for z in zs:
        if np.any(np.abs(z) >= 1):
            raise ValueError("points must lie in the open unit disc")


def moebius_distance(z, w):
    """m(z, w) = |z - w| / |1 - z conj(w)|."""
    _check_disc(z, w)
    return np.abs(z - w) / np.abs(1 - z * np.conj(w))


def one_minus_m2(z, w):
    """1 - m(z, w)^2 in the cancellation-free product form."""
    _check_disc(z, w)
    return (1 - np.abs(z) ** 2) * (1 - np.abs(w) ** 2) / np.abs(1 - z * np.conj(w)) ** 2


def two_point_interpolant(x1, y1, x2, y2, tol=1e-10) -> DiscAut:
    """The automorphism sending x1 -> y1 and x2 -> y2."""
    mx, my = moebius_distance(x1, x2), moebius_distance(y1, y2)
    if abs(mx - my) > tol:
        raise ValueError(f"no automorphism: Moebius distances differ ({mx!r} vs {my!r})")
    u = moebius_h(y1)(y2)
    v = moebius_h(x1)(x2)
    theta = cmath.phase(u) - cmath.phase(v) if abs(u) > 0 and abs(v) > 0 else 0.0
    return compose_auts(invert(moebius_h(y1)), compose_auts(rotation(theta), moebius_h(x1)))


def phi_involution(a, psi: DiscAut) -> DiscAut:
    """phi_a = h_{-a} o (-id) o h_{h_a(psi(a))} o h_a.

    Swaps a and psi(a) and squares to the identity.
    """
    a = complex(a)
    b = psi(a)
    if abs(b - a) < 1e-14:
        raise ValueError(f"{a} is a fixed point of the deck map")
    ha = moebius_h(a)
    out = compose_auts(moebius_h(ha(b)), ha)
    out = compose_auts(NEG_ID, out)
    return compose_auts(moebius_h(-a), out)


def aut_expr(phi: DiscAut, arg: HoloExpr | None = None) -> HoloExpr:
    """The automorphism as a holomorphic expression."""
    arg = Var() if arg is None else arg
    inner = arg if phi.center == 0 else Moebius(phi.center, arg)
    if phi.phase == 1:
        return inner
    return Affine(phi.phase, 0j, inner)
