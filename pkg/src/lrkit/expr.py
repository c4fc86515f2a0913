"""Symbolic scalar expressions over chart coordinates.

Expressions are immutable trees. Polynomial parts are normalized exactly with
rational coefficients; transcendental calls and quotients are kept as atoms
whose arguments are themselves normalized. Zero testing is symbolic when the
normal form is the constant 0 and falls back to seeded random sampling
otherwise.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

FUNCTIONS = ("sin", "cos", "exp", "sqrt", "neg")
NAMED_CONSTANTS = {"pi": math.pi, "e": math.e}
RESERVED = set(FUNCTIONS) | set(NAMED_CONSTANTS)


class ExprError(Exception):
    """Base class for expression errors."""


class ParseError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset


class UnknownSymbolError(ExprError):
    def __init__(self, name: str):
        super().__init__(f"unknown symbol '{name}'")
        self.name = name


class DomainError(ExprError):
    """Division by zero, square root of a negative number, or overflow."""


class UnboundParameterError(ExprError):
    pass


class UnsampleableError(ExprError):
    pass


# ---------------------------------------------------------------------------
# Charts


@dataclass(frozen=True)
class Chart:
    """A coordinate chart: named coordinates plus a box used for sampling."""

    name: str
    coords: tuple[str, ...]
    sample_box: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        coords = tuple(self.coords)
        object.__setattr__(self, "coords", coords)
        if len(set(coords)) != len(coords):
            raise ValueError(f"duplicate coordinate names in chart {self.name}")
        for c in coords:
            if c in RESERVED:
                raise ValueError(f"coordinate name '{c}' is reserved")
        if self.sample_box is None:
            box = tuple((-1.0, 1.0) for _ in coords)
        else:
            box = tuple((float(lo), float(hi)) for lo, hi in self.sample_box)
        if len(box) != len(coords):
            raise ValueError("sample_box must have one interval per coordinate")
        for lo, hi in box:
            if not lo <= hi:
                raise ValueError("empty sample_box interval")
        object.__setattr__(self, "sample_box", box)

    @property
    def dim(self) -> int:
        return len(self.coords)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        lo = np.array([b[0] for b in self.sample_box], dtype=float)
        hi = np.array([b[1] for b in self.sample_box], dtype=float)
        return lo + (hi - lo) * rng.random(self.dim)

    def lattice(self) -> list[np.ndarray]:
        """Corners, edge midpoints and centre of the sample box (3^n points).

        Rank drops of relation matrices live on measure-zero sets that
        uniform draws never hit; these points catch the usual ones.
        """
        if self.dim == 0:
            return [np.zeros(0)]
        axes = [(lo, 0.5 * (lo + hi), hi) for lo, hi in self.sample_box]
        grids = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        # centre first: it is the most common degeneracy
        order = np.argsort(np.abs(pts - pts.mean(axis=0)).sum(axis=1), kind="stable")
        return [pts[i] for i in order]


def point_chart(name: str = "pt") -> Chart:
    return Chart(name, ())


# ---------------------------------------------------------------------------
# Expression tree


class Expr:
    __slots__ = ("_hash",)
    prec = 5

    def __hash__(self):
        return self._hash

    # arithmetic builds trees through the smart constructors below
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, n: int):
        return power(self, n)

    def __str__(self):
        return to_string(self)

    def __repr__(self):
        return f"Expr({to_string(self)!r})"


class Num(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = Fraction(value)
        self._hash = hash(("num", self.value))

    @property
    def prec(self):
        if self.value.denominator != 1:
            return 2
        return 3 if self.value < 0 else 5

    def __eq__(self, other):
        return isinstance(other, Num) and other.value == self.value


class Const(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        if name not in NAMED_CONSTANTS:
            raise UnknownSymbolError(name)
        self.name = name
        self._hash = hash(("const", name))

    def __eq__(self, other):
        return isinstance(other, Const) and other.name == self.name


class Sym(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        self._hash = hash(("sym", name))

    def __eq__(self, other):
        return isinstance(other, Sym) and other.name == self.name


class BinOp(Expr):
    __slots__ = ("left", "right")
    op = "?"

    def __init__(self, left: Expr, right: Expr):
        self.left = left
        self.right = right
        self._hash = hash((self.op, left._hash, right._hash))

    def __eq__(self, other):
        return (
            type(other) is type(self)
            and other._hash == self._hash
            and other.left == self.left
            and other.right == self.right
        )


class Add(BinOp):
    __slots__ = ()
    op = "+"
    prec = 1


class Sub(BinOp):
    __slots__ = ()
    op = "-"
    prec = 1


class Mul(BinOp):
    __slots__ = ()
    op = "*"
    prec = 2


class Div(BinOp):
    __slots__ = ()
    op = "/"
    prec = 2


class Pow(Expr):
    __slots__ = ("base", "exp")
    prec = 4

    def __init__(self, base: Expr, exp: int):
        self.base = base
        self.exp = int(exp)
        self._hash = hash(("^", base._hash, self.exp))

    def __eq__(self, other):
        return isinstance(other, Pow) and other.exp == self.exp and other.base == self.base


class Call(Expr):
    __slots__ = ("fn", "arg")

    def __init__(self, fn: str, arg: Expr):
        if fn not in FUNCTIONS:
            raise UnknownSymbolError(fn)
        self.fn = fn
        self.arg = arg
        self._hash = hash(("call", fn, arg._hash))

    @property
    def prec(self):
        return 3 if self.fn == "neg" else 5

    def __eq__(self, other):
        return isinstance(other, Call) and other.fn == self.fn and other.arg == self.arg


# defining __eq__ clears the inherited __hash__
for _cls in (Num, Const, Sym, BinOp, Add, Sub, Mul, Div, Pow, Call):
    _cls.__hash__ = Expr.__hash__

ZERO = Num(0)
ONE = Num(1)


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, Fraction)):
        return Num(value)
    if isinstance(value, float):
        return Num(Fraction(repr(value)))
    if isinstance(value, str):
        return parse_expr(value, None)
    raise TypeError(f"cannot convert {type(value).__name__} to Expr")


def is_zero(e: Expr) -> bool:
    return isinstance(e, Num) and e.value == 0


def is_one(e: Expr) -> bool:
    return isinstance(e, Num) and e.value == 1


# Smart constructors: fold constants and drop neutral elements, nothing more.


def add(a: Expr, b: Expr) -> Expr:
    if is_zero(a):
        return b
    if is_zero(b):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    return Add(a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if is_zero(b):
        return a
    if is_zero(a):
        return neg(b)
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    return Sub(a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if is_zero(a) or is_zero(b):
        return ZERO
    if is_one(a):
        return b
    if is_one(b):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    return Mul(a, b)


def div(a: Expr, b: Expr) -> Expr:
    if is_one(b):
        return a
    if isinstance(a, Num) and isinstance(b, Num) and b.value != 0:
        return Num(a.value / b.value)
    return Div(a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Call) and a.fn == "neg":
        return a.arg
    return Call("neg", a)


def power(a: Expr, n: int) -> Expr:
    if n == 0:
        return ONE
    if n == 1:
        return a
    if isinstance(a, Num) and (a.value != 0 or n > 0):
        return Num(a.value**n)
    return Pow(a, n)


def call(fn: str, a: Expr) -> Expr:
    if fn == "neg":
        return neg(a)
    return Call(fn, a)


def sin(a) -> Expr:
    return Call("sin", as_expr(a))


def cos(a) -> Expr:
    return Call("cos", as_expr(a))


def exp(a) -> Expr:
    return Call("exp", as_expr(a))


def sqrt(a) -> Expr:
    return Call("sqrt", as_expr(a))


def symbols(names: str | Iterable[str]) -> tuple[Sym, ...]:
    if isinstance(names, str):
        names = names.replace(",", " ").split()
    return tuple(Sym(n) for n in names)


# ---------------------------------------------------------------------------
# Printing


def _fmt_num(v: Fraction) -> str:
    if v.denominator == 1:
        return str(v.numerator)
    return f"{v.numerator}/{v.denominator}"


@lru_cache(maxsize=200_000)
def to_string(e: Expr) -> str:
    if isinstance(e, Num):
        return _fmt_num(e.value)
    if isinstance(e, Const):
        return e.name
    if isinstance(e, Sym):
        return e.name
    if isinstance(e, Call):
        if e.fn == "neg":
            inner = to_string(e.arg)
            if e.arg.prec < 3 or (isinstance(e.arg, Num) and e.arg.value < 0):
                inner = f"({inner})"
            return f"-{inner}"
        return f"{e.fn}({to_string(e.arg)})"
    if isinstance(e, Pow):
        base = to_string(e.base)
        if e.base.prec <= 4:
            base = f"({base})"
        exp_s = str(e.exp) if e.exp >= 0 else f"({e.exp})"
        return f"{base}^{exp_s}"
    if isinstance(e, BinOp):
        left = to_string(e.left)
        right = to_string(e.right)
        if e.left.prec < e.prec:
            left = f"({left})"
        if e.right.prec <= e.prec or (isinstance(e, (Mul, Div)) and e.right.prec == 3):
            right = f"({right})"
        return f"{left} {e.op} {right}"
    raise TypeError(type(e))


# ---------------------------------------------------------------------------
# Parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    raw = text.encode()
    # offsets reported in bytes; map char index -> byte index lazily
    def byte_offset(i):
        return len(text[:i].encode())

    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            j = pos
            while j < len(text) and text[j].isspace():
                j += 1
            raise ParseError(f"unexpected character {text[j]!r}", byte_offset(j))
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), byte_offset(start)))
        pos = m.end()
    tokens.append(("end", "", len(raw)))
    return tokens


class _Parser:
    def __init__(self, text: str, known: set[str] | None):
        self.tokens = _tokenize(text)
        self.i = 0
        self.known = known

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, off = self.take()
        if val != value:
            raise ParseError(f"expected {value!r}, got {val or 'end of input'!r}", off)

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {val!r}", off)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            e = Mul(e, rhs) if op == "*" else Div(e, rhs)
        return e

    def unary(self) -> Expr:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Call("neg", self.unary())
        if self.peek()[0] == "op" and self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            off = self.take()[2]
            exponent = normalize(self.unary())
            if not (isinstance(exponent, Num) and exponent.value.denominator == 1):
                raise ParseError("exponent must be an integer constant", off)
            return Pow(base, int(exponent.value))
        return base

    def primary(self) -> Expr:
        kind, val, off = self.take()
        if kind == "num":
            return Num(Fraction(val))
        if kind == "ident":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if val not in FUNCTIONS:
                    raise UnknownSymbolError(val)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            if val in NAMED_CONSTANTS:
                return Const(val)
            if val in FUNCTIONS:
                raise ParseError(f"function {val!r} needs an argument", off)
            if self.known is not None and val not in self.known:
                raise UnknownSymbolError(val)
            return Sym(val)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise ParseError(f"unexpected {val or 'end of input'!r}", off)


def parse_expr(text: str, chart: Chart | None = None, params: Sequence[str] = ()) -> Expr:
    """Parse ``text`` into an expression over ``chart`` coordinates and ``params``.

    With ``chart=None`` any identifier is accepted as a symbol.
    """
    known = None if chart is None else set(chart.coords) | set(params)
    return _Parser(text, known).parse()


# ---------------------------------------------------------------------------
# Traversal helpers


def free_symbols(e: Expr) -> frozenset[str]:
    return _free(e)


@lru_cache(maxsize=100_000)
def _free(e: Expr) -> frozenset[str]:
    if isinstance(e, Sym):
        return frozenset((e.name,))
    if isinstance(e, BinOp):
        return _free(e.left) | _free(e.right)
    if isinstance(e, Pow):
        return _free(e.base)
    if isinstance(e, Call):
        return _free(e.arg)
    return frozenset()


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace symbols by expressions (simultaneously)."""
    if not mapping:
        return e
    mapping = {k: as_expr(v) for k, v in mapping.items()}
    cache: dict[Expr, Expr] = {}

    def go(x: Expr) -> Expr:
        if x in cache:
            return cache[x]
        if isinstance(x, Sym):
            r = mapping.get(x.name, x)
        elif isinstance(x, (Num, Const)):
            r = x
        elif isinstance(x, Pow):
            r = power(go(x.base), x.exp)
        elif isinstance(x, Call):
            r = call(x.fn, go(x.arg))
        elif isinstance(x, Add):
            r = add(go(x.left), go(x.right))
        elif isinstance(x, Sub):
            r = sub(go(x.left), go(x.right))
        elif isinstance(x, Mul):
            r = mul(go(x.left), go(x.right))
        elif isinstance(x, Div):
            r = div(go(x.left), go(x.right))
        else:
            raise TypeError(type(x))
        cache[x] = r
        return r

    return go(e)


# ---------------------------------------------------------------------------
# Differentiation


def differentiate(e: Expr, sym: str, known: Iterable[str] | None = None) -> Expr:
    """Partial derivative of ``e`` with respect to the symbol ``sym``."""
    if known is not None and sym not in set(known):
        raise UnknownSymbolError(sym)
    return _diff(e, sym)


@lru_cache(maxsize=200_000)
def _diff(e: Expr, s: str) -> Expr:
    if s not in _free(e):
        return ZERO
    if isinstance(e, Sym):
        return ONE
    if isinstance(e, Add):
        return add(_diff(e.left, s), _diff(e.right, s))
    if isinstance(e, Sub):
        return sub(_diff(e.left, s), _diff(e.right, s))
    if isinstance(e, Mul):
        return add(mul(_diff(e.left, s), e.right), mul(e.left, _diff(e.right, s)))
    if isinstance(e, Div):
        num = sub(mul(_diff(e.left, s), e.right), mul(e.left, _diff(e.right, s)))
        return div(num, power(e.right, 2))
    if isinstance(e, Pow):
        return mul(mul(Num(e.exp), power(e.base, e.exp - 1)), _diff(e.base, s))
    if isinstance(e, Call):
        da = _diff(e.arg, s)
        if e.fn == "neg":
            return neg(da)
        if e.fn == "sin":
            return mul(Call("cos", e.arg), da)
        if e.fn == "cos":
            return mul(neg(Call("sin", e.arg)), da)
        if e.fn == "exp":
            return mul(e, da)
        if e.fn == "sqrt":
            return div(da, mul(Num(2), e))
    raise TypeError(type(e))


def gradient(e: Expr, names: Sequence[str]) -> list[Expr]:
    return [_diff(e, n) for n in names]


# ---------------------------------------------------------------------------
# Normalization
#
# A polynomial is a dict mapping a monomial to a Fraction coefficient.  A
# monomial is a sorted tuple of (atom key, exponent) pairs.  Atoms are
# symbols, named constants, function calls with normalized arguments and
# reciprocals of normalized non-constant denominators.


class _Poly(dict):
    pass


_ATOMS: dict[str, Expr] = {}


def _atom(e: Expr) -> _Poly:
    key = to_string(e)
    _ATOMS.setdefault(key, e)
    return _Poly({((key, 1),): Fraction(1)})


def _const(c) -> _Poly:
    c = Fraction(c)
    return _Poly({(): c}) if c != 0 else _Poly()


def _padd(a: _Poly, b: _Poly, sign: int = 1) -> _Poly:
    out = _Poly(a)
    for m, c in b.items():
        v = out.get(m, 0) + sign * c
        if v == 0:
            out.pop(m, None)
        else:
            out[m] = v
    return out


def _mono_mul(m1, m2):
    d = dict(m1)
    for k, p in m2:
        d[k] = d.get(k, 0) + p
    return tuple(sorted((k, p) for k, p in d.items() if p != 0))


def _pmul(a: _Poly, b: _Poly) -> _Poly:
    out = _Poly()
    for m1, c1 in a.items():
        for m2, c2 in b.items():
            m = _mono_mul(m1, m2)
            v = out.get(m, 0) + c1 * c2
            if v == 0:
                out.pop(m, None)
            else:
                out[m] = v
    return out


def _ppow(a: _Poly, n: int) -> _Poly:
    result = _const(1)
    base = a
    while n:
        if n & 1:
            result = _pmul(result, base)
        n >>= 1
        if n:
            base = _pmul(base, base)
    return result


def _pscale(a: _Poly, c: Fraction) -> _Poly:
    if c == 0:
        return _Poly()
    return _Poly({m: v * c for m, v in a.items()})


def _const_value(p: _Poly):
    if not p:
        return Fraction(0)
    if len(p) == 1 and () in p:
        return p[()]
    return None


def _leading(p: _Poly):
    return min(p, key=_mono_sort_key)


def _mono_sort_key(m):
    return (sum(e for _, e in m), m)


def _reciprocal(den: _Poly) -> _Poly:
    # pull a single-term coefficient out so that 1/(2x) == (1/2)*(1/x)
    if len(den) == 1:
        (m, c), = den.items()
        inner = _from_poly(_Poly({m: Fraction(1)}))
        return _pscale(_atom(Div(ONE, inner)), 1 / c)
    return _atom(Div(ONE, _from_poly(den)))


@lru_cache(maxsize=200_000)
def _to_poly(e: Expr) -> _Poly:
    if isinstance(e, Num):
        return _const(e.value)
    if isinstance(e, (Sym, Const)):
        return _atom(e)
    if isinstance(e, Add):
        return _padd(_to_poly(e.left), _to_poly(e.right))
    if isinstance(e, Sub):
        return _padd(_to_poly(e.left), _to_poly(e.right), -1)
    if isinstance(e, Mul):
        return _pmul(_to_poly(e.left), _to_poly(e.right))
    if isinstance(e, Pow):
        base = _to_poly(e.base)
        if e.exp >= 0:
            return _ppow(base, e.exp)
        c = _const_value(base)
        if c is not None and c != 0:
            return _const(c**e.exp)
        return _ppow(_reciprocal(base) if base else _atom(Div(ONE, ZERO)), -e.exp)
    if isinstance(e, Div):
        num = _to_poly(e.left)
        den = _to_poly(e.right)
        c = _const_value(den)
        if c is not None and c != 0:
            return _pscale(num, 1 / c)
        if not num:
            return _Poly()
        if not den:
            return _pmul(num, _atom(Div(ONE, ZERO)))
        return _pmul(num, _reciprocal(den))
    if isinstance(e, Call):
        arg = _to_poly(e.arg)
        if e.fn == "neg":
            return _pscale(arg, Fraction(-1))
        c = _const_value(arg)
        if c == 0:
            return _const({"sin": 0, "cos": 1, "exp": 1, "sqrt": 0}[e.fn])
        if e.fn == "sqrt" and c is not None and c > 0:
            rn, rd = math.isqrt(c.numerator), math.isqrt(c.denominator)
            if rn * rn == c.numerator and rd * rd == c.denominator:
                return _const(Fraction(rn, rd))
        sign = 1
        if e.fn in ("sin", "cos") and arg[_leading(arg)] < 0:
            arg = _pscale(arg, Fraction(-1))
            sign = -1 if e.fn == "sin" else 1
        atom = _atom(Call(e.fn, _from_poly(arg)))
        return _pscale(atom, Fraction(sign))
    raise TypeError(type(e))


def _mono_expr(m) -> Expr:
    out = None
    for key, p in m:
        factor = power(_ATOMS[key], p)
        out = factor if out is None else Mul(out, factor)
    return out if out is not None else ONE


def _from_poly(p: _Poly) -> Expr:
    if not p:
        return ZERO
    out = None
    for m in sorted(p, key=_mono_sort_key):
        c = p[m]
        if m == ():
            term = Num(abs(c))
        elif abs(c) == 1:
            term = _mono_expr(m)
        else:
            term = Mul(Num(abs(c)), _mono_expr(m))
        if out is None:
            out = term if c > 0 else neg(term)
        elif c > 0:
            out = Add(out, term)
        else:
            out = Sub(out, term)
    return out


@lru_cache(maxsize=200_000)
def normalize(e: Expr) -> Expr:
    """Canonical form: expanded polynomial over normalized atoms."""
    return _from_poly(_to_poly(e))


def expand_equal(a: Expr, b: Expr) -> bool:
    return normalize(sub(a, b)) == ZERO


# ---------------------------------------------------------------------------
# Numeric evaluation


_MATH_ENV = {"_sin": math.sin, "_cos": math.cos, "_exp": math.exp, "_sqrt": math.sqrt}


@lru_cache(maxsize=20_000)
def _compile(exprs: tuple[Expr, ...], argnames: tuple[str, ...]):
    """Straight-line Python with one local per shared subexpression.

    Composed paths and substituted reparameterizations are deep DAGs; a flat
    function body avoids both exponential inlining and parser depth limits.
    """
    names = {n: f"a{i}" for i, n in enumerate(argnames)}
    lines: list[str] = []
    memo: dict[Expr, str] = {}

    def emit(e: Expr) -> str:
        if e in memo:
            return memo[e]
        if isinstance(e, Num):
            v = float(e.value)
            return f"({v!r})" if v < 0 else repr(v)
        if isinstance(e, Const):
            return repr(NAMED_CONSTANTS[e.name])
        if isinstance(e, Sym):
            try:
                return names[e.name]
            except KeyError:
                raise UnboundParameterError(f"symbol '{e.name}' is not bound") from None
        if isinstance(e, Call):
            inner = emit(e.arg)
            code = f"-{inner}" if e.fn == "neg" else f"_{e.fn}({inner})"
        elif isinstance(e, Pow):
            code = f"{emit(e.base)} ** {e.exp}"
        elif isinstance(e, BinOp):
            code = f"{emit(e.left)} {e.op} {emit(e.right)}"
        else:
            raise TypeError(type(e))
        var = f"_v{len(lines)}"
        lines.append(f"    {var} = {code}")
        memo[e] = var
        return var

    outs = [emit(e) for e in exprs]
    src = f"def _f({', '.join(names.values())}):\n" + "\n".join(lines)
    src += f"\n    return ({', '.join(outs)}{',' if len(outs) == 1 else ''})\n"
    env = dict(_MATH_ENV)
    exec(src, env)  # noqa: S102 - generated from our own tree
    return env["_f"]


def compile_exprs(exprs: Sequence[Expr], argnames: Sequence[str]) -> Callable[..., tuple]:
    """Compile expressions into ``f(*args) -> tuple[float, ...]``.

    Domain failures surface as :class:`DomainError`.
    """
    fn = _compile(tuple(exprs), tuple(argnames))

    def evaluate_all(*args):
        try:
            return fn(*args)
        except (ZeroDivisionError, ValueError, OverflowError) as exc:
            raise DomainError(str(exc)) from None

    return evaluate_all


def evaluate(
    e: Expr,
    chart: Chart,
    point: Sequence[float] = (),
    params: Mapping[str, float] | None = None,
) -> float:
    """Evaluate ``e`` at a chart point with parameter values bound."""
    params = dict(params or {})
    if len(point) != chart.dim:
        raise ValueError(f"point has {len(point)} entries, chart {chart.name} has dim {chart.dim}")
    argnames = tuple(chart.coords) + tuple(sorted(params))
    args = [float(v) for v in point] + [float(params[k]) for k in sorted(params)]
    value = compile_exprs((e,), argnames)(*args)[0]
    if not math.isfinite(value):
        raise DomainError("non-finite value")
    return value


# ---------------------------------------------------------------------------
# Zero testing


class ZeroKind(str, enum.Enum):
    SYMBOLIC = "ZeroSymbolic"
    SAMPLED = "ZeroSampled"
    WITNESS = "NonzeroWitness"


@dataclass(frozen=True)
class ZeroVerdict:
    kind: ZeroKind
    point: tuple[float, ...] | None = None
    value: float | None = None

    @property
    def is_zero(self) -> bool:
        return self.kind is not ZeroKind.WITNESS

    def __bool__(self):
        return self.is_zero


@dataclass(frozen=True)
class ZeroTestConfig:
    tol: float = 1e-9
    samples: int = 64
    seed: int = 0
    rank_tol: float = 1e-9
    param_box: tuple[tuple[str, float, float], ...] = field(default=(("s", 0.0, 1.0), ("t", 0.0, 1.0)))

    def param_ranges(self, names: Iterable[str]) -> dict[str, tuple[float, float]]:
        box = {n: (lo, hi) for n, lo, hi in self.param_box}
        return {n: box.get(n, (0.0, 1.0)) for n in names}


DEFAULT_ZERO = ZeroTestConfig()


def sample_points(chart: Chart, params: Sequence[str], cfg: ZeroTestConfig, rng=None):
    """Yield (point, param dict) pairs drawn from the sample box forever."""
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    ranges = cfg.param_ranges(params)
    while True:
        x = chart.sample(rng)
        pv = {n: lo + (hi - lo) * rng.random() for n, (lo, hi) in ranges.items()}
        yield x, pv


def is_identically_zero(
    e: Expr,
    chart: Chart,
    tol: float = 1e-9,
    samples: int = 64,
    seed: int = 0,
    cfg: ZeroTestConfig | None = None,
) -> ZeroVerdict:
    """Decide whether ``e`` vanishes on the chart's sample box."""
    if cfg is not None:
        tol, samples, seed = cfg.tol, cfg.samples, cfg.seed
    if samples < 1:
        raise ValueError("samples must be >= 1")
    e = normalize(e)
    if is_zero(e):
        return ZeroVerdict(ZeroKind.SYMBOLIC)
    extra = sorted(_free(e) - set(chart.coords))
    zcfg = cfg or ZeroTestConfig(tol=tol, samples=samples, seed=seed)
    fn = compile_exprs((e,), tuple(chart.coords) + tuple(extra))
    draws = sample_points(chart, extra, zcfg)
    redraws = 0
    taken = 0
    while taken < samples:
        x, pv = next(draws)
        try:
            value = fn(*x, *(pv[n] for n in extra))[0]
        except DomainError:
            value = math.nan
        if not math.isfinite(value):
            redraws += 1
            if redraws > 10 * samples:
                raise UnsampleableError(f"could not evaluate {to_string(e)} at {10 * samples} draws")
            continue
        taken += 1
        if abs(value) > tol:
            point = tuple(float(v) for v in x) + tuple(float(pv[n]) for n in extra)
            return ZeroVerdict(ZeroKind.WITNESS, point, float(value))
    return ZeroVerdict(ZeroKind.SAMPLED)
