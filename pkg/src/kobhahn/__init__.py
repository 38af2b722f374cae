"""Hahn function versus Kobayashi-Royden metric on products of planar domains.

Submodules: ``holo`` (holomorphic expressions and jets), ``auts`` (disc
automorphisms), ``coverings`` (universal coverings of the model domains),
``metrics``, ``injectivize``, ``counterexample``, ``verify`` and ``cli``.
"""

from .auts import DiscAut, moebius_h, phi_involution, two_point_interpolant
from .counterexample import Certificate, certify
from .coverings import PlanarDomain, covering_of, parse_domain
from .holo import evaluate, eval_jet, parse, render
from .injectivize import DiscPair, injectivize, verify_injectivity
from .metrics import classify_product, hahn_bounds, kappa

__version__ = "0.1.0"

__all__ = [
    "Certificate",
    "DiscAut",
    "DiscPair",
    "PlanarDomain",
    "certify",
    "classify_product",
    "covering_of",
    "eval_jet",
    "evaluate",
    "hahn_bounds",
    "injectivize",
    "kappa",
    "moebius_h",
    "parse",
    "parse_domain",
    "phi_involution",
    "render",
    "two_point_interpolant",
    "verify_injectivity",
]
