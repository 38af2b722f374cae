"""Certificates that h and kappa differ on a product of two non-simply
connected domains covered by the disc.

Pipeline: ``find_equal_displacement`` -> ``normalize`` -> ``build_certificate``,
then ``transversality_check`` and ``intersection_persistence`` on the
certificate's difference surfaces.

Points whose deck images lie exponentially close to the circle are handled in
the upper half-plane chart tau = cayley(z), where the decks are real affine
maps and the hyperbolic distance is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .auts import IDENTITY, NEG_ID, DiscAut, aut_expr, compose_auts, phi_involution
from .coverings import Covering, cayley, cayley_inv, covering_of, half_plane_distance, PlanarDomain
from .holo import Compose, HoloExpr, eval_jet

__all__ = [
    "SCHEMA_VERSION",
    "DEFAULT_A",
    "FALLBACK_A",
    "DET_THRESHOLD",
    "EqualDisplacement",
    "Normalized",
    "Certificate",
    "DifferenceSurface",
    "PersistenceResult",
    "find_equal_displacement",
    "normalize",
    "build_certificate",
    "certify",
    "transversality_check",
    "intersection_persistence",
    "d_from_eps",
    "dichotomy_factors",
]

SCHEMA_VERSION = 1
DEFAULT_A = 0.5j
FALLBACK_A = (0.3j, 0.7j, 0.2 + 0.4j, -0.4 + 0.3j)
DET_THRESHOLD = 1e-6
LEVEL_FLOOR = 0.9
BRANCH_TOL = 1e-8

_C = np.array([[1j, 1j], [-1, 1]], dtype=complex)
_CINV = np.array([[1, -1j], [1, 1j]], dtype=complex)


def _cz(z):
    return [float(np.real(z)), float(np.imag(z))]


def _require_disc_cover(cov: Covering):
    if cov.cover != "E" or cov.deck.hp is None or cov.deck.is_identity:
        raise ValueError(f"{cov.domain.descriptor}: need a covering by the disc with a non-identity deck")


# --------------------------------------------------------------------------
# equal displacement


@dataclass(frozen=True)
class EqualDisplacement:
    rho: float  # shared hyperbolic distance between z_j and psi_j(z_j)
    tau1: complex
    tau2: complex

    @property
    def eps(self):
        return 2 / (math.exp(self.rho) + 1)

    @property
    def level(self):
        """m(z_j, psi_j(z_j)) = 1 - eps."""
        return math.tanh(self.rho / 2)

    @property
    def z1(self):
        return complex(cayley_inv(self.tau1))

    @property
    def z2(self):
        return complex(cayley_inv(self.tau2))


def _path(deck, t):
    """A curve in the half-plane from the least displaced point (t = 1)
    toward a boundary point away from the fixed points (t -> 0)."""
    a, b = deck.hp
    if a == 1.0:
        return -b / 2 + 1j * t
    xf = b / (1 - a)
    s = 0.5 * np.pi * (1 - t)  # exactly 0 at t = 1, so tau(1) is purely imaginary
    return xf + (np.sin(s) + 1j * np.cos(s)) / math.sqrt(a)


def _rho_along(deck, t):
    tau = _path(deck, t)
    return half_plane_distance(tau, deck.hp_apply(tau))


def _rho_floor(deck):
    return float(half_plane_distance(1j, deck.hp_apply(1j)))


def _solve_level(deck, rho_star):
    if _rho_along(deck, 1.0) >= rho_star * (1 - 1e-14):
        return 1.0
    ts = np.geomspace(1.0, 1e-14, 400)
    rs = _rho_along(deck, ts)
    above = np.nonzero(rs >= rho_star)[0]
    if len(above) == 0:
        raise RuntimeError("displacement never reaches the target level along the probe path")
    k = above[0]
    return brentq(lambda t: _rho_along(deck, t) - rho_star, ts[k], ts[k - 1], xtol=1e-300, rtol=1e-15)


def find_equal_displacement(cov1: Covering, cov2: Covering) -> EqualDisplacement:
    """Points z1, z2 with m(z1, psi1(z1)) = m(z2, psi2(z2)) = 1 - eps.

    The level is the largest of the two values at the origin and 0.9.
    """
    _require_disc_cover(cov1)
    _require_disc_cover(cov2)
    rho_star = max(_rho_floor(cov1.deck), _rho_floor(cov2.deck), 2 * math.atanh(LEVEL_FLOOR))
    taus = [complex(_path(c.deck, _solve_level(c.deck, rho_star))) for c in (cov1, cov2)]
    return EqualDisplacement(rho_star, taus[0], taus[1])


def d_from_eps(eps):
    """Root d in (0, 1) of 2d / (1 + d^2) = 1 - eps."""
    m = 1 - eps
    return (1 - math.sqrt(1 - m * m)) / m


# --------------------------------------------------------------------------
# normalization


def _geodesic_frame(t1, t2, kappa):
    """Real Moebius matrix A with A(i/kappa) = t1 and A(i kappa) = t2."""
    x1, x2 = t1.real, t2.real
    scale = max(abs(t1), abs(t2))
    if abs(x1 - x2) <= 1e-15 * scale:
        M = np.array([[1, -(x1 + x2) / 2], [0, 1]], dtype=float)
    else:
        x0 = (abs(t2) ** 2 - abs(t1) ** 2) / (2 * (x2 - x1))
        R = abs(t1 - x0)
        # far endpoint without cancellation; the near one from e1 e2 = x0^2 - R^2,
        # evaluated at the point of smaller modulus
        far = x0 + math.copysign(R, x0)
        tn = t1 if abs(t1) < abs(t2) else t2
        near = (2 * tn.real * x0 - abs(tn) ** 2) / far
        e1, e2 = sorted((near, far))
        M = np.array([[1, -e1], [-1, e2]], dtype=float)

    def s(m, t):
        return ((m[0, 0] * t + m[0, 1]) / (m[1, 0] * t + m[1, 1])).imag

    if s(M, t2) < s(M, t1):
        M = np.array([[0, -1], [1, 0]], dtype=float) @ M
    Binv = np.diag([1 / (s(M, t1) * kappa), 1.0]) @ M
    (p, q), (r, u) = Binv
    return np.array([[u, -q], [-r, p]]) / (p * u - q * r)


def _mob(m, w):
    return (m[0, 0] * w + m[0, 1]) / (m[1, 0] * w + m[1, 1])


def _mob_deriv(m, w):
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    return det / (m[1, 0] * w + m[1, 1]) ** 2


@dataclass
class Normalized:
    covs: tuple
    eq: EqualDisplacement
    d: float
    one_minus_d: float
    kappa: float
    frames: tuple  # real 2x2 matrices A_j in the half-plane chart
    h: tuple  # DiscAut h_j, h_j(-d) = z_j, h_j(d) = psi_j(z_j)
    psi_tilde_prime: tuple  # psi~_j'(-d)
    p_tilde_prime_d: tuple  # p~_j'(d)
    branch: str
    c: Optional[float] = None
    residuals: dict = field(default_factory=dict)


def normalize(cov1: Covering, cov2: Covering, eq: Optional[EqualDisplacement] = None) -> Normalized:
    """Conjugate both decks so that they send -d to d, and pick the branch."""
    eq = eq or find_equal_displacement(cov1, cov2)
    rho = eq.rho
    kappa = math.exp(rho / 2)
    d = math.tanh(rho / 4)
    omd = 2 / (kappa + 1)
    frames, hs, pt, ptp = [], [], [], []
    res = {}
    for j, (cov, tau) in enumerate(((cov1, eq.tau1), (cov2, eq.tau2)), 1):
        a_hp = cov.deck.hp[0]
        A = _geodesic_frame(tau, complex(cov.deck.hp_apply(tau)), kappa)
        frames.append(A)
        hs.append(DiscAut.from_matrix(_CINV @ A @ _C))
        lo, hi = 1j / kappa, 1j * kappa
        res[f"frame{j}_lower"] = abs(_mob(A, lo) - tau) / abs(tau)
        res[f"frame{j}_upper"] = abs(_mob(A, hi) - cov.deck.hp_apply(tau)) / abs(cov.deck.hp_apply(tau))
        # psi~ = h^-1 psi h read in the chart: c'(-d)/c'(d) = kappa^-2
        pt.append(a_hp * _mob_deriv(A, lo) / _mob_deriv(A, hi) / kappa ** 2)
        ptp.append(complex(cov.hp_dp(_mob(A, hi))) * _mob_deriv(A, hi) * 2j / omd ** 2)
    pt = tuple(complex(x) for x in pt)
    both_pm1 = all(abs(abs(x) - 1) <= BRANCH_TOL and
                   min(abs(x - 1), abs(x + 1)) <= BRANCH_TOL for x in pt)
    for j, x in enumerate(pt, 1):
        res[f"psi_tilde{j}_square"] = abs(x * x - 1)
    c = None
    if cov1.deck.hp == cov2.deck.hp and cov1.deck.parabolic:
        branch = "reduced-common-deck"
    elif both_pm1:
        branch = "reduced-to-h_c"
        c = -2 * d / (1 + d * d)
    else:
        branch = "direct"
    return Normalized((cov1, cov2), eq, d, omd, kappa, tuple(frames), tuple(hs), pt, tuple(ptp),
                      branch, c, res)


# --------------------------------------------------------------------------
# certificates


@dataclass
class Certificate:
    domains: tuple
    branch: str
    q: tuple
    phi1: DiscAut
    phi2: DiscAut
    det_value: complex
    det_simplified: complex
    eps: float
    d: float
    c: Optional[float]
    a: Optional[complex]
    maps: tuple = field(repr=False)  # p_j o phi_j as expressions
    residual_table: dict = field(default_factory=dict)
    a_seed: Optional[complex] = None  # the a that was tried; differs from a when balanced

    @property
    def det_relative_gap(self):
        return abs(self.det_value - self.det_simplified) / abs(self.det_value)

    def to_json(self) -> dict:
        rt = {k: (None if v is None else float(v)) for k, v in self.residual_table.items()}
        return {
            "schema_version": SCHEMA_VERSION,
            "domains": [d.descriptor for d in self.domains],
            "branch": self.branch,
            "q": [_cz(self.q[0]), _cz(self.q[1])],
            "phi1": {"phase": _cz(self.phi1.phase), "center": _cz(self.phi1.center)},
            "phi2": {"phase": _cz(self.phi2.phase), "center": _cz(self.phi2.center)},
            "det_value": _cz(self.det_value),
            "det_abs": abs(self.det_value),
            "det_simplified": _cz(self.det_simplified),
            "eps": self.eps,
            "level": 1 - self.eps,
            "d": self.d,
            "c": self.c,
            "a": None if self.a is None else _cz(self.a),
            "a_seed": None if self.a_seed is None else _cz(self.a_seed),
            "residual_table": rt,
        }


def _det_direct(maps, q):
    j = [[eval_jet(m, complex(qk), order=1).d1 for qk in q] for m in maps]
    return j[0][0] * j[1][1] - j[0][1] * j[1][0]


def _covering_residuals(maps, q):
    out = {}
    for j, m in enumerate(maps, 1):
        v1 = eval_jet(m, complex(q[0]), order=1).value
        v2 = eval_jet(m, complex(q[1]), order=1).value
        out[f"covering_equality_{j}"] = abs(v1 - v2)
    return out


def _involution_residuals(phi: DiscAut, a, psi_a):
    sq = compose_auts(phi, phi)
    return {
        "involution": max(abs(sq.phase - 1), abs(sq.center)),
        "involution_derivative": abs(phi.deriv(a) * phi.deriv(psi_a) - 1),
        "involution_swap": max(abs(phi(a) - psi_a), abs(phi(psi_a) - a)),
    }


def dichotomy_factors(a, psi: DiscAut):
    """|phi_a'(a) + psi'(a)| and |phi_a'(a) - psi'(a)|; the first vanishes
    exactly on real a when psi preserves the real line."""
    a = complex(a)
    phi = phi_involution(a, psi)
    return abs(phi.deriv(a) + psi.deriv(a)), abs(phi.deriv(a) - psi.deriv(a))


def _reduced(norm: Normalized, a, psi: DiscAut, pre: tuple):
    """phi_1 = pre_1, phi_2 = pre_2 o phi_a, q = (a, psi(a))."""
    if abs(complex(a).imag) <= 1e-12:
        raise ValueError(f"a = {a} is real: phi_a'(a) = -psi'(a) and the determinant vanishes")
    a = complex(a)
    b = complex(psi(a))
    phi = phi_involution(a, psi)
    phis = (pre[0], compose_auts(pre[1], phi))
    maps = tuple(Compose(cov.map_p, aut_expr(f)) for cov, f in zip(norm.covs, phis))
    q = (a, b)
    det = _det_direct(maps, q)
    # p~_j'(psi(a)) for p~_j = p_j o pre_j
    ptil = [eval_jet(Compose(cov.map_p, aut_expr(f)), b, order=1).d1 for cov, f in zip(norm.covs, pre)]
    f1 = phi.deriv(a)
    s1 = psi.deriv(a)
    simp = ptil[0] * ptil[1] * (s1 * s1 / f1 - f1)
    res = _involution_residuals(phi, a, b)
    plus, minus = dichotomy_factors(a, psi)
    res["dichotomy_plus_margin"] = plus
    res["dichotomy_minus_margin"] = minus
    return phis, q, maps, det, simp, res


def _dc(w):
    """cayley'(z) at z = cayley_inv(w), without forming 1 - z."""
    return -0.5j * (w + 1j) ** 2


def _reduced_hc(norm: Normalized, a0):
    """The reduced branch read in the half-plane chart.

    There psi~ = h_c is w -> kappa^2 w. The base point is balanced,
    w_a = cayley(a0) / kappa, so that a and psi(a) sit at the same depth, and
    phi_a is the half-turn about the midpoint of w_a and kappa^2 w_a.
    """
    if abs(complex(a0).imag) <= 1e-12:
        raise ValueError(f"a = {a0} is real: phi_a'(a) = -psi'(a) and the determinant vanishes")
    k = norm.kappa
    w0 = complex(cayley(complex(a0)))
    wa, wb = w0 / k, w0 * k
    s = math.exp(float(half_plane_distance(wa, wb)) / 2)
    G = _geodesic_frame(wa, wb, s)
    Ginv = np.linalg.inv(G)
    Phi = G @ np.array([[0.0, -1.0], [1.0, 0.0]]) @ Ginv
    A1, A2 = norm.frames
    to_disc = lambda m: DiscAut.from_matrix(_CINV @ m @ _C)
    phi = to_disc(Phi)
    phis = (to_disc(A1), to_disc(A2 @ Phi))
    a, b = complex(cayley_inv(wa)), complex(cayley_inv(wb))
    maps = tuple(Compose(cov.map_p, aut_expr(f)) for cov, f in zip(norm.covs, phis))
    q = (a, b)
    det = _det_direct(maps, q)
    ratio = _dc(wa) / _dc(wb)
    dpsi = k * k * ratio
    dphi_a = _mob_deriv(Phi, wa) * ratio
    ptil = [complex(cov.hp_dp(_mob(A, wb))) * _mob_deriv(A, wb) * _dc(wb)
            for cov, A in zip(norm.covs, norm.frames)]
    simp = ptil[0] * ptil[1] * (dpsi * dpsi / dphi_a - dphi_a)
    sq = compose_auts(phi, phi)
    res = {
        "involution": max(abs(sq.phase - 1), abs(sq.center)),
        "involution_derivative": abs(_mob_deriv(Phi, wa) * _mob_deriv(Phi, wb) - 1),
        "involution_swap": max(abs(_mob(Phi, wa) - wb) / abs(wb), abs(_mob(Phi, wb) - wa) / abs(wa)),
        "dichotomy_plus_margin": abs(dphi_a + dpsi),
        "dichotomy_minus_margin": abs(dphi_a - dpsi),
    }
    return phis, q, maps, det, simp, res


def build_certificate(norm: Normalized, a: Optional[complex] = None) -> Certificate:
    """Certificate for the normalized pair.

    Reduced branches try ``a`` and then the fallback list until |det| clears
    the threshold. The direct branch uses q = (-d, d) and the better of the
    two determinant variants.
    """
    eq = norm.eq
    covs = norm.covs
    base = {k: v for k, v in norm.residuals.items()}
    base["displacement_level_1"] = abs(float(half_plane_distance(eq.tau1, covs[0].deck.hp_apply(eq.tau1))) - eq.rho)
    base["displacement_level_2"] = abs(float(half_plane_distance(eq.tau2, covs[1].deck.hp_apply(eq.tau2))) - eq.rho)

    if norm.branch == "direct":
        p1, p2 = norm.p_tilde_prime_d
        s1, s2 = norm.psi_tilde_prime
        plain = p1 * p2 * (s1 - s2)
        flipped = p1 * p2 * (s1 * s2 - 1)
        flip = abs(flipped) > abs(plain)
        h1, h2 = norm.h
        phis = (compose_auts(h1, NEG_ID) if flip else h1, h2)
        maps = tuple(Compose(cov.map_p, aut_expr(f)) for cov, f in zip(covs, phis))
        q = (complex(-norm.d), complex(norm.d))
        det = _det_direct(maps, q)
        res = dict(base, **_covering_residuals(maps, q))
        res["involution"] = None
        res["flipped"] = float(flip)
        cert = Certificate(tuple(c.domain for c in covs), "direct", q, phis[0], phis[1], det,
                           flipped if flip else plain, eq.eps, norm.d, None, None, maps, res)
        _finalize(cert)
        return cert

    candidates = [DEFAULT_A if a is None else complex(a)] + [x for x in FALLBACK_A if x != a]
    last = None
    for k, cand in enumerate(candidates):
        if norm.branch == "reduced-common-deck":
            phis, q, maps, det, simp, extra = _reduced(norm, cand, covs[0].deck.aut, (IDENTITY, IDENTITY))
        else:
            phis, q, maps, det, simp, extra = _reduced_hc(norm, cand)
        res = dict(base, **_covering_residuals(maps, q), **extra)
        res["fallback_index"] = float(k)
        cert = Certificate(tuple(c.domain for c in covs), norm.branch, q, phis[0], phis[1], det, simp,
                           eq.eps, norm.d, norm.c, q[0], maps, res, a_seed=cand)
        last = cert
        if abs(det) > DET_THRESHOLD:
            break
    _finalize(last)
    return last


def _finalize(cert: Certificate):
    r = cert.residual_table
    r["det_relative_gap"] = cert.det_relative_gap
    r["q_separation"] = abs(cert.q[0] - cert.q[1])


def certify(d1: PlanarDomain, d2: PlanarDomain, a: Optional[complex] = None) -> Certificate:
    """The whole pipeline for a pair of domains."""
    c1, c2 = covering_of(d1), covering_of(d2)
    return build_certificate(normalize(c1, c2), a)


# --------------------------------------------------------------------------
# transversality and persistence


@dataclass(frozen=True)
class DifferenceSurface:
    """h0(z1, z2) = P(z1) - P(z2), where P = p_j o phi_j."""

    map_p: HoloExpr
    extended: bool = False

    def _jet(self, z):
        return eval_jet(self.map_p, z, 1, self.extended)

    def __call__(self, z1, z2):
        return self._jet(z1).value - self._jet(z2).value

    def gradient(self, z1, z2):
        return self._jet(z1).d1, -self._jet(z2).d1

    @classmethod
    def of(cls, cert: Certificate, extended: bool = False):
        return cls(cert.maps[0], extended), cls(cert.maps[1], extended)


def transversality_check(s1: DifferenceSurface, s2: DifferenceSurface, q) -> complex:
    """Jacobian determinant of (h0_1, h0_2) at q."""
    (a, b), (c, d) = s1.gradient(*q), s2.gradient(*q)
    return a * d - b * c


@dataclass
class PersistenceResult:
    delta: float
    zero: tuple
    residual: float
    displacement: float
    constant: Optional[float]
    steps: int
    converged: bool
    in_neighbourhood: bool
    off_diagonal: bool
    trace: list

    def to_json(self):
        return {"delta": self.delta, "zero": [_cz(self.zero[0]), _cz(self.zero[1])],
                "residual": self.residual, "displacement": self.displacement,
                "constant": self.constant, "steps": self.steps, "converged": self.converged,
                "in_neighbourhood": self.in_neighbourhood, "off_diagonal": self.off_diagonal}


def _newton(s1, s2, z, delta, tol, max_iter, trace):
    """Damped Newton for the perturbed system in long double; iterates stay
    in the bidisc."""
    def F(z):
        return np.array([s(z[0], z[1]) + delta * (z[0] - z[1]) for s in (s1, s2)])

    f = F(z)
    n = 0
    while np.max(np.abs(f)) >= tol and n < max_iter:
        (a, b), (c, d) = s1.gradient(*z), s2.gradient(*z)
        a, b, c, d = a + delta, b - delta, c + delta, d - delta
        det = a * d - b * c
        step = np.array([(-d * f[0] + b * f[1]) / det, (c * f[0] - a * f[1]) / det])
        lam = 1.0
        while np.any(np.abs(z + lam * step) >= 1) and lam > 1e-12:
            lam /= 2
        z = z + lam * step
        f = F(z)
        n += 1
        trace.append(float(np.max(np.abs(f))))
        if lam * np.max(np.abs(step)) < 1e-19:
            break
    return z, f, n


def intersection_persistence(s1: DifferenceSurface, s2: DifferenceSurface, q, delta: float,
                             det_value: Optional[complex] = None, tol: float = 1e-10,
                             max_iter: int = 40) -> PersistenceResult:
    """Common zero near q of the perturbed differences

        P_j(z1) + delta e(z1) - P_j(z2) - delta e(z2),   e(z) = 1 + z.

    Newton starts at q. If it fails at the full delta, the perturbation is
    switched on gradually (halving the increment on failure), which follows
    the zero branch through q for as long as it stays inside the bidisc.
    """
    if not 0 <= delta <= 1e-2:
        raise ValueError("delta must lie in [0, 1e-2]")
    q = (complex(q[0]), complex(q[1]))
    qa = np.array(q, dtype=np.clongdouble)
    s1, s2 = DifferenceSurface(s1.map_p, True), DifferenceSurface(s2.map_p, True)
    radius = min(0.1, abs(q[0] - q[1]) / (2 * math.sqrt(2)))
    trace: list = []
    z, done, inc, steps = qa.copy(), 0.0, delta, 0
    f = np.zeros(2, dtype=np.clongdouble)
    converged = delta == 0
    if delta == 0:
        z, f, steps = _newton(s1, s2, z, 0.0, tol, max_iter, trace)
        converged = np.max(np.abs(f)) < tol
    while done < delta:
        inc = min(inc, delta - done)
        zn, fn, n = _newton(s1, s2, z, done + inc, tol * 1e-3, max_iter, trace)
        steps += n
        if np.max(np.abs(fn)) < tol:
            z, f, done = zn, fn, done + inc
            inc *= 2
            converged = True
        else:
            inc /= 2
            converged = False
            if inc < delta * 1e-6:
                z, f = zn, fn
                break
    res = float(np.max(np.abs(f)))
    disp = float(np.max(np.abs(z - qa)))
    const = disp * abs(det_value) / delta if det_value is not None and delta > 0 else None
    return PersistenceResult(delta, (complex(z[0]), complex(z[1])), res, disp, const, steps,
                             bool(converged and res < tol), disp < radius, abs(z[0] - z[1]) > 0, trace)
