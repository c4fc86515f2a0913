"""Fibers of presented modules, fiber-determinedness witnesses and calculus of
time-dependent families of sections."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .expr import (
    ZERO,
    Add,
    Call,
    ExprError,
    Expr,
    Mul,
    Num,
    Pow,
    Sub,
    Sym,
    ZeroKind,
    ZeroTestConfig,
    ZeroVerdict,
    add,
    compile_exprs,
    differentiate,
    free_symbols,
    is_identically_zero,
    is_zero,
    mul,
    neg,
    normalize,
    power,
    sub,
    substitute,
)
from .report import Report, Residual, zero_residual


class FiberError(ValueError):
    pass


class NonIntegrableError(ExprError):
    pass


# ---------------------------------------------------------------------------
# Fibers at a point


@dataclass(frozen=True)
class FiberBasis:
    """Fiber of a presented module at a point.

    ``projection`` has orthonormal rows spanning the orthogonal complement of
    the relation span, so ``projection @ u(x)`` is the fiber class of ``u``.
    """

    point: tuple[float, ...]
    relation_matrix: np.ndarray
    rank: int
    quotient_dim: int
    projection: np.ndarray


def _numeric_rank(s: np.ndarray, rank_tol: float) -> int:
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rank_tol * s[0]))


def _fiber_from_matrix(point, R: np.ndarray, k: int, rank_tol: float) -> FiberBasis:
    if R.shape[0] == 0 or k == 0:
        rank = 0
        Q = np.eye(k)
    else:
        _, s, vt = np.linalg.svd(R)
        rank = _numeric_rank(s, rank_tol)
        Q = vt[rank:]
    return FiberBasis(tuple(float(v) for v in point), R, rank, k - rank, Q)


class _Evaluator:
    """Compiled evaluation of coefficient vectors and relations of a module."""

    def __init__(self, module, coeffs: Sequence[Expr] = ()):
        self.module = module
        self.k = module.rank
        self.coeffs = tuple(coeffs)
        flat = [c for rel in module.relations for c in rel]
        names = set()
        for e in (*flat, *self.coeffs):
            names |= free_symbols(e)
        self.params = tuple(sorted(names - set(module.chart.coords)))
        argnames = tuple(module.chart.coords) + self.params
        self._rel = compile_exprs(flat, argnames) if flat else None
        self._u = compile_exprs(self.coeffs, argnames) if self.coeffs else None

    def args(self, point, params):
        params = params or {}
        return [float(v) for v in point] + [float(params.get(p, 0.0)) for p in self.params]

    def relation_matrix(self, point, params=None) -> np.ndarray:
        nrel = len(self.module.relations)
        if self._rel is None:
            return np.zeros((nrel, self.k))
        vals = self._rel(*self.args(point, params))
        return np.array(vals, dtype=float).reshape(nrel, self.k)

    def section(self, point, params=None) -> np.ndarray:
        if self._u is None:
            return np.zeros(self.k)
        return np.array(self._u(*self.args(point, params)), dtype=float)


def fiber_basis(module, point: Sequence[float], rank_tol: float = 1e-9, params=None) -> FiberBasis:
    """Quotient of R^k by the relation vectors evaluated at ``point``."""
    ev = _Evaluator(module)
    return _fiber_from_matrix(point, ev.relation_matrix(point, params), module.rank, rank_tol)


def fiber_class(u, point: Sequence[float], rank_tol: float = 1e-9, params=None) -> np.ndarray:
    """Class of the section ``u`` in the fiber at ``point``."""
    ev = _Evaluator(u.presentation, u.coeffs)
    fb = _fiber_from_matrix(point, ev.relation_matrix(point, params), ev.k, rank_tol)
    return fb.projection @ ev.section(point, params)


def _fiber_samples(module, params: Sequence[str], cfg: ZeroTestConfig):
    """Lattice points of the sample box followed by ``cfg.samples`` uniform draws."""
    rng = np.random.default_rng(cfg.seed)
    ranges = cfg.param_ranges(params)
    out = []
    for x in module.chart.lattice():
        out.append((x, {n: lo + (hi - lo) * rng.random() for n, (lo, hi) in ranges.items()}))
    for _ in range(cfg.samples):
        x = module.chart.sample(rng)
        out.append((x, {n: lo + (hi - lo) * rng.random() for n, (lo, hi) in ranges.items()}))
    return out


def fiberwise_zero_coeffs(module, coeffs: Sequence[Expr], cfg: ZeroTestConfig | None = None) -> ZeroVerdict:
    """Zero test of a coefficient vector modulo the relations, fiber by fiber.

    Without relations this is the componentwise symbolic/sampled zero test.
    """
    cfg = cfg or ZeroTestConfig()
    coeffs = tuple(normalize(c) for c in coeffs)
    if all(is_zero(c) for c in coeffs):
        return ZeroVerdict(ZeroKind.SYMBOLIC)
    if not module.relations:
        kinds = []
        for c in coeffs:
            v = is_identically_zero(c, module.chart, cfg=cfg)
            if not v.is_zero:
                return v
            kinds.append(v.kind)
        return ZeroVerdict(ZeroKind.SYMBOLIC if all(k is ZeroKind.SYMBOLIC for k in kinds) else ZeroKind.SAMPLED)
    ev = _Evaluator(module, coeffs)
    for x, pv in _fiber_samples(module, ev.params, cfg):
        try:
            R = ev.relation_matrix(x, pv)
            u = ev.section(x, pv)
        except ExprError:
            continue
        cls = _fiber_from_matrix(x, R, ev.k, cfg.rank_tol).projection @ u
        norm = float(np.linalg.norm(cls))
        if norm > cfg.tol:
            point = tuple(float(v) for v in x) + tuple(float(pv[p]) for p in ev.params)
            return ZeroVerdict(ZeroKind.WITNESS, point, norm)
    return ZeroVerdict(ZeroKind.SAMPLED)


class FiberwiseVerdict(str, enum.Enum):
    YES = "Yes"
    NO = "No"


@dataclass(frozen=True)
class FiberwiseResult:
    verdict: FiberwiseVerdict
    samples: int
    point: tuple[float, ...] | None = None
    norm: float | None = None

    def __bool__(self):
        return self.verdict is FiberwiseVerdict.YES


def fiberwise_zero(u, cfg: ZeroTestConfig | None = None) -> FiberwiseResult:
    """Does ``u`` have zero class in every sampled fiber?"""
    cfg = cfg or ZeroTestConfig()
    module = u.presentation
    ev = _Evaluator(module, u.coeffs)
    samples = _fiber_samples(module, ev.params, cfg)
    for x, pv in samples:
        R = ev.relation_matrix(x, pv)
        cls = _fiber_from_matrix(x, R, ev.k, cfg.rank_tol).projection @ ev.section(x, pv)
        norm = float(np.linalg.norm(cls))
        if norm >= cfg.tol:
            return FiberwiseResult(FiberwiseVerdict.NO, len(samples), tuple(float(v) for v in x), norm)
    return FiberwiseResult(FiberwiseVerdict.YES, len(samples))


class FDClass(str, enum.Enum):
    IN_RELATION_SPAN = "InRelationSpan"
    FD_VIOLATION = "FDViolationWitness"
    FIBERWISE_NONZERO = "FiberwiseNonzero"


@dataclass(frozen=True)
class FDCheck:
    classification: FDClass
    point: tuple[float, ...] | None = None
    detail: str = ""


_PROBE_STEPS = (1e-1, 1e-2, 1e-3)
_GROWTH_LIMIT = 10.0


def _span_coefficients(R: np.ndarray, u: np.ndarray, rank_tol: float):
    """Minimum-norm c with R^T c ~= u, and the residual norm."""
    if R.shape[0] == 0:
        return np.zeros(0), float(np.linalg.norm(u))
    c, *_ = np.linalg.lstsq(R.T, u, rcond=rank_tol)
    return c, float(np.linalg.norm(R.T @ c - u))


def fd_witness_check(u, cfg: ZeroTestConfig | None = None) -> FDCheck:
    """Classify a section against the relation submodule.

    A fiberwise-zero section is in the relation span only if the pointwise
    least-squares coefficients stay bounded as sample points approach places
    where the relation matrix drops rank; coefficients that blow up (like
    ``1/x^2`` for ``x*g`` against the relation ``x^3*g``) cannot extend to
    smooth ones, so the section witnesses that the presentation is not fiber
    determined.
    """
    cfg = cfg or ZeroTestConfig()
    fz = fiberwise_zero(u, cfg)
    if not fz:
        return FDCheck(FDClass.FIBERWISE_NONZERO, fz.point, f"fiber class norm {fz.norm:.3g}")
    module = u.presentation
    ev = _Evaluator(module, u.coeffs)
    samples = _fiber_samples(module, ev.params, cfg)
    ranks = []
    for x, pv in samples:
        R = ev.relation_matrix(x, pv)
        _, resid = _span_coefficients(R, ev.section(x, pv), cfg.rank_tol)
        if resid > cfg.tol:
            return FDCheck(FDClass.FD_VIOLATION, tuple(float(v) for v in x), f"least-squares residual {resid:.3g}")
        s = np.linalg.svd(R, compute_uv=False) if R.size else np.zeros(0)
        ranks.append(_numeric_rank(s, cfg.rank_tol))
    generic = max(ranks) if ranks else 0
    rng = np.random.default_rng(cfg.seed + 1)
    box = module.chart.sample_box
    centre = np.array([0.5 * (lo + hi) for lo, hi in box]) if box else np.zeros(0)
    for (x0, pv), r in zip(samples, ranks):
        if r >= generic or module.chart.dim == 0:
            continue
        directions = []
        towards = centre - x0
        if np.linalg.norm(towards) > 0:
            directions.append(towards / np.linalg.norm(towards))
        d = rng.normal(size=module.chart.dim)
        directions.append(d / np.linalg.norm(d))
        for d in directions:
            norms = []
            for step in _PROBE_STEPS:
                x = x0 + step * d
                c, resid = _span_coefficients(ev.relation_matrix(x, pv), ev.section(x, pv), cfg.rank_tol)
                if resid > cfg.tol * max(1.0, float(np.linalg.norm(ev.section(x, pv)))):
                    return FDCheck(FDClass.FD_VIOLATION, tuple(float(v) for v in x), "not in span near rank drop")
                norms.append(float(np.linalg.norm(c)))
            if norms[-1] > _GROWTH_LIMIT * max(1.0, norms[0]):
                return FDCheck(
                    FDClass.FD_VIOLATION,
                    tuple(float(v) for v in x0),
                    f"span coefficients grow from {norms[0]:.3g} to {norms[-1]:.3g} approaching the rank drop",
                )
    return FDCheck(FDClass.IN_RELATION_SPAN)


def fiber_determinize(P, witnesses: Sequence, cfg: ZeroTestConfig | None = None):
    """Append fiberwise-zero witnesses to the relations of ``P``.

    Returns the new presentation and a descent report checking that the
    bracket still descends: ``[e_i, w]`` lies fiberwise in the enlarged
    relation span and the anchor kills each witness.
    """
    from .presentation import Section, anchor_of, bracket_sections

    cfg = cfg or ZeroTestConfig()
    for w in witnesses:
        check = fd_witness_check(w, cfg)
        if check.classification is FDClass.FIBERWISE_NONZERO:
            raise FiberError(f"witness {w} is fiberwise nonzero at {check.point}")
    Q = P.with_relations(list(P.relations) + [w.coeffs for w in witnesses])
    report = Report(seed=cfg.seed)
    for idx, w in enumerate(witnesses):
        wq = Section(Q, w.coeffs)
        for c, comp in zip(Q.chart.coords, anchor_of(Q, wq).components):
            v = is_identically_zero(comp, Q.chart, cfg=cfg)
            report.add(zero_residual(f"descent_anchor[w{idx}].{c}", "descent_anchor", v, cfg.tol))
        for i in range(Q.rank):
            br = bracket_sections(Q, Q.gen(i), wq)
            v = fiberwise_zero_coeffs(Q, br.coeffs, cfg)
            report.add(zero_residual(f"descent_bracket[{Q.gens[i]},w{idx}]", "descent_bracket", v, cfg.tol))
    return Q, report


# ---------------------------------------------------------------------------
# Time-dependent families


@dataclass(frozen=True)
class SectionFamily:
    """A family of sections whose coefficients depend on a time parameter."""

    presentation: object
    coeffs: tuple[Expr, ...]
    param: str = "t"

    def at(self, value) -> tuple[Expr, ...]:
        return tuple(normalize(substitute(c, {self.param: Num(Fraction(value))})) for c in self.coeffs)


def family(P, coeffs: Sequence, param: str = "t") -> SectionFamily:
    from .presentation import _vec

    return SectionFamily(P, _vec(coeffs, P.rank, "family"), param)


def family_derivative(F: SectionFamily) -> SectionFamily:
    return SectionFamily(F.presentation, tuple(normalize(differentiate(c, F.param)) for c in F.coeffs), F.param)


def _terms(e: Expr, sign: int = 1):
    if isinstance(e, Add):
        yield from _terms(e.left, sign)
        yield from _terms(e.right, sign)
    elif isinstance(e, Sub):
        yield from _terms(e.left, sign)
        yield from _terms(e.right, -sign)
    elif isinstance(e, Call) and e.fn == "neg":
        yield from _terms(e.arg, -sign)
    elif not is_zero(e):
        yield sign, e


def _factors(e: Expr):
    if isinstance(e, Mul):
        return _factors(e.left) + _factors(e.right)
    if isinstance(e, Pow) and e.exp > 0:
        return [(e.base, e.exp)]
    return [(e, 1)]


def _antiderivative_term(term: Expr, t: str) -> Expr:
    const = []
    t_power = 0
    trans = None
    for base, p in _factors(term):
        if t not in free_symbols(base):
            const.append(power(base, p))
        elif isinstance(base, Sym) and base.name == t:
            t_power += p
        elif isinstance(base, Call) and base.fn in ("sin", "cos", "exp") and p == 1 and trans is None:
            trans = base
        else:
            raise NonIntegrableError(f"factor {base}^{p} is outside the integrable class")
    multiplier = Num(1)
    for c in const:
        multiplier = mul(multiplier, c)
    tt = Sym(t)
    if trans is None:
        n = t_power + 1
        return mul(mul(multiplier, Num(Fraction(1, n))), power(tt, n))
    slope = normalize(differentiate(trans.arg, t))
    if not isinstance(slope, Num) or slope.value == 0:
        raise NonIntegrableError(f"argument of {trans} is not linear in {t} with constant slope")
    a = slope.value
    fn = trans.fn
    arg = trans.arg

    def integral(kind: str, n: int) -> Expr:
        # antiderivative of t^n * kind(a t + b)
        if kind == "exp":
            first = mul(Num(1 / a), mul(power(tt, n), Call("exp", arg)))
            return first if n == 0 else sub(first, mul(Num(Fraction(n) / a), integral("exp", n - 1)))
        if kind == "sin":
            first = neg(mul(Num(1 / a), mul(power(tt, n), Call("cos", arg))))
            return first if n == 0 else add(first, mul(Num(Fraction(n) / a), integral("cos", n - 1)))
        first = mul(Num(1 / a), mul(power(tt, n), Call("sin", arg)))
        return first if n == 0 else sub(first, mul(Num(Fraction(n) / a), integral("sin", n - 1)))

    return mul(multiplier, integral(fn, t_power))


def antiderivative(e: Expr, t: str = "t") -> Expr:
    """Antiderivative in ``t`` for polynomial times sin/cos/exp of a linear argument."""
    out = ZERO
    for sign, term in _terms(normalize(e)):
        piece = _antiderivative_term(term, t)
        out = add(out, piece) if sign > 0 else sub(out, piece)
    return normalize(out)


def family_integral(F: SectionFamily, start=0) -> SectionFamily:
    """Coefficientwise integral from ``start`` to the family parameter."""
    start = Num(Fraction(start))
    out = []
    for c in F.coeffs:
        G = antiderivative(c, F.param)
        out.append(normalize(sub(G, substitute(G, {F.param: start}))))
    return SectionFamily(F.presentation, tuple(out), F.param)


def ftc_report(F: SectionFamily, cfg: ZeroTestConfig | None = None) -> Report:
    """Residual F(t) - F(0) - int_0^t F' for every coefficient."""
    cfg = cfg or ZeroTestConfig()
    report = Report(seed=cfg.seed)
    integral = family_integral(family_derivative(F), 0)
    start = F.at(0)
    for name, c, c0, ic in zip(F.presentation.gens, F.coeffs, start, integral.coeffs):
        resid = normalize(sub(sub(c, c0), ic))
        v = is_identically_zero(resid, F.presentation.chart, cfg=cfg)
        report.add(zero_residual(f"ftc[{name}]", "ftc", v, cfg.tol))
    return report


def section_norm_residual(name: str, family_name: str, value: float, tol: float) -> Residual:
    verdict = "Pass" if math.isfinite(value) and value < tol else "Fail"
    return Residual(name, family_name, verdict, tol, None, value)
