"""Holomorphic expression trees with forward-mode jet evaluation.

Every node evaluates on a :class:`Jet` of its argument, so composition is the
chain rule for free. Jets carry numpy arrays or scalars, which lets the same
tree be evaluated on a single point or on a whole sample grid.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "Jet",
    "Jet2",
    "HoloExpr",
    "RegionError",
    "ExprSyntaxError",
    "UnknownIdentifier",
    "Var",
    "Const",
    "Add",
    "Sub",
    "Mul",
    "Div",
    "Pow",
    "Exp",
    "Moebius",
    "Affine",
    "Compose",
    "CoverPdisc",
    "CoverAnnulus",
    "parse",
    "render",
    "eval_jet",
    "evaluate",
    "derivative",
    "compose",
    "quotient",
    "boundary_max_modulus",
    "is_constant",
    "constant_value",
    "format_complex",
]


class RegionError(ValueError):
    """Evaluation or construction outside the analyticity region."""


class ExprSyntaxError(ValueError):
    def __init__(self, message, pos):
        super().__init__(f"{message} at position {pos}")
        self.pos = pos


class UnknownIdentifier(ExprSyntaxError):
    pass


# --------------------------------------------------------------------------
# jets


class Jet:
    """Truncated Taylor data (value, first, second derivative).

    ``d1``/``d2`` may be ``None`` when that order was not requested; every
    operation then skips the corresponding propagation.
    """

    __slots__ = ("value", "d1", "d2")

    def __init__(self, value, d1=None, d2=None):
        self.value = value
        self.d1 = d1
        self.d2 = d2

    @classmethod
    def variable(cls, z, order=2):
        if np.ndim(z):
            z = np.asarray(z, dtype=complex)
        elif not isinstance(z, np.clongdouble):
            z = complex(z)
        one = np.ones_like(z) if np.ndim(z) else 1.0 + 0j
        zero = np.zeros_like(z) if np.ndim(z) else 0j
        return cls(z, one if order >= 1 else None, zero if order >= 2 else None)

    def constant_like(self, c):
        zero = 0 * self.value
        return Jet(c + zero,
                   None if self.d1 is None else zero,
                   None if self.d2 is None else zero)

    def apply(self, f0, f1=None, f2=None):
        """Chain rule for a scalar function with known value/derivatives at
        ``self.value``."""
        d1 = d2 = None
        if self.d1 is not None:
            d1 = f1 * self.d1
            if self.d2 is not None:
                d2 = f2 * self.d1 * self.d1 + f1 * self.d2
        return Jet(f0, d1, d2)

    def _coerce(self, other):
        return other if isinstance(other, Jet) else self.constant_like(other)

    def __add__(self, other):
        other = self._coerce(other)
        return Jet(self.value + other.value,
                   _opt(lambda a, b: a + b, self.d1, other.d1),
                   _opt(lambda a, b: a + b, self.d2, other.d2))

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.value,
                   None if self.d1 is None else -self.d1,
                   None if self.d2 is None else -self.d2)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        a, b = self, other
        d1 = d2 = None
        if a.d1 is not None and b.d1 is not None:
            d1 = a.d1 * b.value + a.value * b.d1
            if a.d2 is not None and b.d2 is not None:
                d2 = a.d2 * b.value + 2 * a.d1 * b.d1 + a.value * b.d2
        return Jet(a.value * b.value, d1, d2)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        a, b = self, other
        if np.any(b.value == 0):
            raise RegionError("division by zero in jet evaluation")
        q = a.value / b.value
        d1 = d2 = None
        if a.d1 is not None and b.d1 is not None:
            d1 = (a.d1 - q * b.d1) / b.value
            if a.d2 is not None and b.d2 is not None:
                d2 = (a.d2 - 2 * d1 * b.d1 - q * b.d2) / b.value
        return Jet(q, d1, d2)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __pow__(self, k):
        k = int(k)
        if k == 0:
            return self.constant_like(1.0 + 0j)
        v = self.value
        f0 = v ** k
        f1 = k * v ** (k - 1)
        f2 = k * (k - 1) * v ** (k - 2) if k >= 2 else 0 * v
        return self.apply(f0, f1, f2)


def _opt(op, a, b):
    if a is None or b is None:
        return None
    return op(a, b)


def jexp(j):
    e = np.exp(j.value)
    return j.apply(e, e, e)


def jlog(j):
    """Principal logarithm; the cut is the closed negative real axis."""
    v = j.value
    if np.any((np.imag(v) == 0) & (np.real(v) <= 0)):
        raise RegionError("logarithm evaluated on its branch cut")
    return j.apply(np.log(v), 1 / v, -1 / (v * v))


@dataclass(frozen=True)
class Jet2:
    """Public jet result: value, first derivative, optional second."""

    value: complex
    d1: complex
    d2: Optional[complex] = None


# --------------------------------------------------------------------------
# expression nodes


def format_complex(c):
    c = complex(c)
    re_, im = repr(float(c.real)), float(c.imag)
    if im == 0:
        return f"({re_})" if c.real < 0 else re_
    sign = "-" if im < 0 else "+"
    return f"({re_}{sign}{repr(abs(im))}i)"


class HoloExpr:
    """Base class. Subclasses implement ``jet`` and ``render``."""

    def jet(self, j: Jet) -> Jet:
        raise NotImplementedError

    def render(self, arg: str = "z") -> str:
        raise NotImplementedError

    def __str__(self):
        return self.render("z")

    def __call__(self, z):
        return evaluate(self, z)


@dataclass(frozen=True, repr=False)
class Var(HoloExpr):
    def jet(self, j):
        return j

    def render(self, arg="z"):
        return arg

    def __repr__(self):
        return "Var()"


@dataclass(frozen=True)
class Const(HoloExpr):
    c: complex

    def jet(self, j):
        return j.constant_like(complex(self.c))

    def render(self, arg="z"):
        return format_complex(self.c)


@dataclass(frozen=True)
class Add(HoloExpr):
    left: HoloExpr
    right: HoloExpr

    def jet(self, j):
        return self.left.jet(j) + self.right.jet(j)

    def render(self, arg="z"):
        return f"({self.left.render(arg)} + {self.right.render(arg)})"


@dataclass(frozen=True)
class Sub(HoloExpr):
    left: HoloExpr
    right: HoloExpr

    def jet(self, j):
        return self.left.jet(j) - self.right.jet(j)

    def render(self, arg="z"):
        return f"({self.left.render(arg)} - {self.right.render(arg)})"


@dataclass(frozen=True)
class Mul(HoloExpr):
    left: HoloExpr
    right: HoloExpr

    def jet(self, j):
        return self.left.jet(j) * self.right.jet(j)

    def render(self, arg="z"):
        return f"({self.left.render(arg)} * {self.right.render(arg)})"


@dataclass(frozen=True)
class Div(HoloExpr):
    """Quotient. Build through :func:`quotient` so the denominator gets its
    zero-free check on the certificate region."""

    left: HoloExpr
    right: HoloExpr
    cert_radius: float = 0.999

    def jet(self, j):
        return self.left.jet(j) / self.right.jet(j)

    def render(self, arg="z"):
        return f"({self.left.render(arg)} / {self.right.render(arg)})"


@dataclass(frozen=True)
class Pow(HoloExpr):
    base: HoloExpr
    k: int

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 0:
            raise ValueError("exponent must be a non-negative integer")

    def jet(self, j):
        return self.base.jet(j) ** self.k

    def render(self, arg="z"):
        return f"({self.base.render(arg)})^{self.k}"


@dataclass(frozen=True)
class Exp(HoloExpr):
    arg: HoloExpr

    def jet(self, j):
        return jexp(self.arg.jet(j))

    def render(self, arg="z"):
        return f"exp({self.arg.render(arg)})"


@dataclass(frozen=True)
class Moebius(HoloExpr):
    """h_a(w) = (w - a) / (1 - conj(a) w) applied to ``arg``."""

    a: complex
    arg: HoloExpr

    def __post_init__(self):
        if not abs(self.a) < 1:
            raise ValueError(f"moebius center must lie in the unit disc, got {self.a}")

    def jet(self, j):
        w = self.arg.jet(j)
        a = complex(self.a)
        ac = a.conjugate()
        den = 1 - ac * w.value
        if np.any(den == 0):
            raise RegionError("moebius map evaluated at its pole")
        s = 1 - abs(a) ** 2
        return w.apply((w.value - a) / den, s / den ** 2, 2 * ac * s / den ** 3)

    def render(self, arg="z"):
        return f"moebius({format_complex(self.a)}; {self.arg.render(arg)})"


@dataclass(frozen=True)
class Affine(HoloExpr):
    """alpha * arg + beta."""

    alpha: complex
    beta: complex
    arg: HoloExpr

    def jet(self, j):
        w = self.arg.jet(j)
        return w * complex(self.alpha) + complex(self.beta)

    def render(self, arg="z"):
        return (f"({format_complex(self.alpha)} * {self.arg.render(arg)}"
                f" + {format_complex(self.beta)})")


@dataclass(frozen=True)
class Compose(HoloExpr):
    outer: HoloExpr
    inner: HoloExpr

    def jet(self, j):
        return self.outer.jet(self.inner.jet(j))

    def render(self, arg="z"):
        return self.outer.render(f"({self.inner.render(arg)})")


def _cayley(w):
    # c(w) = i (1 + w) / (1 - w): unit disc -> upper half-plane
    return 1j * (1 + w) / (1 - w)


def _require_disc(w, what):
    if np.any(np.abs(w.value) >= 1):
        raise RegionError(f"{what} is only defined on the open unit disc")


@dataclass(frozen=True)
class CoverPdisc(HoloExpr):
    """Universal covering of the punctured unit disc by the unit disc,
    exp(-(1 + w) / (1 - w))."""

    arg: HoloExpr

    def jet(self, j):
        w = self.arg.jet(j)
        _require_disc(w, "cover_pdisc")
        return jexp(-(1 + w) / (1 - w))

    def render(self, arg="z"):
        return f"cover_pdisc({self.arg.render(arg)})"


@dataclass(frozen=True)
class CoverAnnulus(HoloExpr):
    """Universal covering of {r < |w| < 1} by the unit disc.

    Cayley map to the upper half-plane, then tau -> tau^(i ln(1/r) / pi) with
    the principal logarithm; |result| = r^(arg(tau)/pi) lies in (r, 1).
    """

    r: float
    arg: HoloExpr

    def __post_init__(self):
        if not 0 < self.r < 1:
            raise ValueError(f"annulus radius must lie in (0, 1), got {self.r}")

    @property
    def exponent(self):
        return 1j * math.log(1 / self.r) / math.pi

    def jet(self, j):
        w = self.arg.jet(j)
        _require_disc(w, "cover_annulus")
        return jexp(jlog(1j * (1 + w) / (1 - w)) * self.exponent)

    def render(self, arg="z"):
        return f"cover_annulus({self.r!r}; {self.arg.render(arg)})"


# --------------------------------------------------------------------------
# evaluation


def _check_finite(j):
    for part in (j.value, j.d1, j.d2):
        if part is not None and not np.all(np.isfinite(part)):
            raise RegionError("non-finite value: point outside the analyticity region")


def eval_jet(f: HoloExpr, z, order: int = 1, extended: bool = False) -> Jet2:
    """Exact forward-propagated jet of ``f`` at a single point.

    ``extended`` carries the point in long double (where the platform has
    one); the parts of the result are then ``np.clongdouble``.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    z = np.clongdouble(z) if extended else complex(z)
    if not (np.isfinite(z.real) and np.isfinite(z.imag)):
        raise ValueError("point must be finite")
    with np.errstate(all="ignore"):
        j = f.jet(Jet.variable(z, order))
    _check_finite(j)
    cast = np.clongdouble if extended else complex
    return Jet2(cast(j.value), cast(j.d1), cast(j.d2) if order == 2 else None)


def evaluate(f: HoloExpr, z):
    """Values of ``f`` on a scalar or array of points (no derivatives)."""
    scalar = np.ndim(z) == 0
    with np.errstate(all="ignore"):
        j = f.jet(Jet.variable(z, order=0))
    _check_finite(j)
    if scalar:
        return complex(j.value)
    return np.broadcast_to(j.value, np.shape(z)).astype(complex)


def derivative(f: HoloExpr, z):
    """(values, first derivatives) on an array of points."""
    with np.errstate(all="ignore"):
        j = f.jet(Jet.variable(z, order=1))
    _check_finite(j)
    shape = np.shape(z)
    return (np.broadcast_to(j.value, shape).astype(complex),
            np.broadcast_to(j.d1, shape).astype(complex))


def _cert_samples(radius, n=1024):
    rings = 16
    per = n // rings
    rs = np.linspace(0, radius, rings + 1)[1:]
    th = 2 * np.pi * (np.arange(per) + 0.5) / per
    pts = (rs[:, None] * np.exp(1j * th[None, :])).ravel()
    return np.concatenate([[0j], pts[: n - 1]])


def quotient(num: HoloExpr, den: HoloExpr, cert_radius: float = 0.999) -> Div:
    """Quotient node whose denominator is checked zero-free on 1024 samples of
    the disc of radius ``cert_radius``. A tripwire, not a proof."""
    pts = _cert_samples(cert_radius)
    try:
        vals = evaluate(den, pts)
    except RegionError as exc:
        raise RegionError(f"denominator not analytic on certificate region: {exc}") from None
    k = int(np.argmin(np.abs(vals)))
    if abs(vals[k]) < 1e-12:
        raise RegionError(f"denominator vanishes near z = {pts[k]:.6g}")
    return Div(num, den, cert_radius)


def compose(f: HoloExpr, g: HoloExpr, check_radius: Optional[float] = 0.999) -> HoloExpr:
    """f o g. The image of g on a sample of the disc of radius ``check_radius``
    must be inside the region where f evaluates."""
    if isinstance(g, Var):
        return f
    if check_radius is not None:
        pts = _cert_samples(check_radius, 256)
        try:
            evaluate(f, evaluate(g, pts))
        except RegionError as exc:
            raise RegionError(f"composition leaves the analyticity region of the outer map: {exc}") from None
    return Compose(f, g)


def boundary_max_modulus(f: HoloExpr, radius: float, samples: int = 4096) -> float:
    """Upper estimate of max |f| on the closed disc of the given radius.

    Maximum over equispaced points of the circle, inflated by 1e-6 relative.
    Doubling ``samples`` refines the same grid, so the estimate is monotone.
    """
    if samples < 64:
        raise ValueError("need at least 64 boundary samples")
    if radius <= 0:
        raise ValueError("radius must be positive")
    th = 2 * np.pi * np.arange(samples) / samples
    try:
        vals = evaluate(f, radius * np.exp(1j * th))
    except RegionError as exc:
        raise RegionError(f"radius {radius} outside the analyticity region: {exc}") from None
    return float(np.max(np.abs(vals))) * (1 + 1e-6)


def is_constant(f: HoloExpr) -> bool:
    if isinstance(f, Var):
        return False
    if isinstance(f, Const):
        return True
    if isinstance(f, Compose):
        return is_constant(f.outer) or is_constant(f.inner)
    children = [v for v in vars(f).values() if isinstance(v, HoloExpr)]
    return all(is_constant(c) for c in children)


def constant_value(f: HoloExpr) -> complex:
    if not is_constant(f):
        raise ValueError(f"expression {render(f)!r} depends on z")
    return evaluate(f, 0j)


def render(f: HoloExpr) -> str:
    return f.render("z")


# --------------------------------------------------------------------------
# parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)(?P<imag>i(?![A-Za-z0-9_]))?"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^();]))"
)

_FUNCS = {"exp": 1, "moebius": 2, "cover_pdisc": 1, "cover_annulus": 2}


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks = []
        pos = 0
        n = len(text)
        while pos < n:
            if text[pos:].strip() == "":
                break
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                start = pos + len(text[pos:]) - len(text[pos:].lstrip())
                raise ExprSyntaxError(f"unexpected character {text[start]!r}", start)
            start = m.start(m.lastgroup if m.lastgroup != "imag" else "num")
            if m.group("num") is not None:
                val = float(m.group("num"))
                self.toks.append(("num", 1j * val if m.group("imag") else complex(val), m.start("num")))
            elif m.group("ident") is not None:
                self.toks.append(("ident", m.group("ident"), m.start("ident")))
            else:
                self.toks.append(("op", m.group("op"), m.start("op")))
            pos = m.end()
        self.toks.append(("end", None, len(text)))
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, op):
        kind, val, pos = self.take()
        if kind != "op" or val != op:
            raise ExprSyntaxError(f"expected {op!r}", pos)

    def parse(self):
        if self.peek()[0] == "end":
            raise ExprSyntaxError("empty expression", 0)
        e = self.expr()
        kind, _, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError("unexpected trailing input", pos)
        return e

    def expr(self):
        e = self.term()
        while self.peek()[:2] in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            r = self.term()
            e = Add(e, r) if op == "+" else Sub(e, r)
        return e

    def term(self):
        e = self.unary()
        while self.peek()[:2] in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            r = self.unary()
            e = Mul(e, r) if op == "*" else quotient(e, r)
        return e

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Mul(Const(-1.0), self.unary())
        if self.peek()[:2] == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            kind, val, pos = self.take()
            if kind != "num" or val.imag != 0 or val.real != int(val.real):
                raise ExprSyntaxError("exponent must be a non-negative integer literal", pos)
            return Pow(base, int(val.real))
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Const(val)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "ident":
            if val == "z":
                return Var()
            if val == "i":
                return Const(1j)
            if val in _FUNCS:
                return self.call(val, pos)
            raise UnknownIdentifier(f"unknown identifier {val!r}", pos)
        if kind == "end":
            raise ExprSyntaxError("unexpected end of input", pos)
        raise ExprSyntaxError(f"unexpected token {val!r}", pos)

    def call(self, name, pos):
        self.expect("(")
        args = [self.expr()]
        while self.peek()[:2] == ("op", ";"):
            self.take()
            args.append(self.expr())
        self.expect(")")
        if len(args) != _FUNCS[name]:
            raise ExprSyntaxError(f"{name} takes {_FUNCS[name]} argument(s)", pos)
        if name == "exp":
            return Exp(args[0])
        if name == "cover_pdisc":
            return CoverPdisc(args[0])
        param = args[0]
        if not is_constant(param):
            raise ExprSyntaxError(f"first argument of {name} must be constant", pos)
        p = constant_value(param)
        try:
            if name == "moebius":
                return Moebius(p, args[1])
            if p.imag != 0:
                raise ValueError("annulus radius must be real")
            return CoverAnnulus(p.real, args[1])
        except ValueError as exc:
            raise ExprSyntaxError(str(exc), pos) from None


def parse(text: str) -> HoloExpr:
    """Parse the expression grammar (see README) into a tree."""
    return _Parser(text).parse()
