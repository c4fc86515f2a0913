"""LR paths and squares, the homotopy operations on them, and a holonomy oracle.

Paths are piecewise: a list of pieces ``(t0, t1, gamma, a)`` covering [0, 1],
each with expressions in the parameter ``t``. Concatenation and the lazy
cutoff produce genuinely piecewise data, so every operation works piece by
piece and holonomies are integrated piece by piece (steps never straddle a
breakpoint).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .expr import (
    ZERO,
    Expr,
    Num,
    Sym,
    as_expr,
    compile_exprs,
    differentiate,
    is_zero,
    mul,
    neg,
    normalize,
    parse_expr,
    substitute,
)
from .flows import IntegratorConfig
from .presentation import LRPresentation, _vec
from .report import Report, Residual, numeric_residual

T_PARAM = "t"
S_PARAM = "s"
_t = Sym(T_PARAM)


class PathError(ValueError):
    pass


def _num(v: float | Fraction) -> Num:
    return Num(Fraction(v))


def _subst_t(e: Expr, repl: Expr) -> Expr:
    # kept unexpanded: expanding nested compositions into monomials is exact
    # but evaluates with catastrophic cancellation
    return substitute(e, {T_PARAM: repl})


@dataclass(frozen=True)
class PathPiece:
    t0: float
    t1: float
    gamma: tuple[Expr, ...]
    a: tuple[Expr, ...]


@dataclass(frozen=True)
class LRPath:
    """A piecewise A-path: on ``[t0, t1]`` the curve is ``gamma(t)`` with coefficients ``a(t)``."""

    presentation: LRPresentation
    pieces: tuple[PathPiece, ...]
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not self.pieces:
            raise PathError("a path needs at least one piece")
        if abs(self.pieces[0].t0) > 1e-12 or abs(self.pieces[-1].t1 - 1) > 1e-12:
            raise PathError("pieces must cover [0, 1]")
        for p, q in zip(self.pieces, self.pieces[1:]):
            if abs(p.t1 - q.t0) > 1e-12:
                raise PathError("pieces must be contiguous")

    @property
    def breakpoints(self) -> list[float]:
        return [p.t0 for p in self.pieces] + [self.pieces[-1].t1]

    def _compiled(self, i: int):
        if i not in self._cache:
            piece = self.pieces[i]
            d = [differentiate(g, T_PARAM) for g in piece.gamma]
            fn = compile_exprs(tuple(piece.gamma) + tuple(d) + tuple(piece.a), (T_PARAM,))
            self._cache[i] = fn
        return self._cache[i]

    def _locate(self, t: float) -> int:
        for i, p in enumerate(self.pieces):
            if t <= p.t1 or i == len(self.pieces) - 1:
                return i
        return len(self.pieces) - 1

    def evaluate(self, t: float, piece: int | None = None):
        """``(gamma(t), gamma'(t), a(t))`` as numpy arrays."""
        i = self._locate(t) if piece is None else piece
        vals = self._compiled(i)(float(t))
        n = len(self.pieces[i].gamma)
        return np.array(vals[:n]), np.array(vals[n : 2 * n]), np.array(vals[2 * n :])

    def gamma_at(self, t: float) -> np.ndarray:
        return self.evaluate(t)[0]

    def a_at(self, t: float) -> np.ndarray:
        return self.evaluate(t)[2]

    def start(self) -> np.ndarray:
        return self.evaluate(0.0, 0)[0]

    def end(self) -> np.ndarray:
        return self.evaluate(1.0, len(self.pieces) - 1)[0]

    def __str__(self):
        from .expr import to_string

        parts = []
        for p in self.pieces:
            g = ", ".join(to_string(e) for e in p.gamma)
            a = ", ".join(to_string(e) for e in p.a)
            parts.append(f"[{p.t0:g}, {p.t1:g}]: gamma=[{g}] a=[{a}]")
        return "\n".join(parts)


def lr_path(P: LRPresentation, gamma: Sequence, a: Sequence) -> LRPath:
    """Single-piece path on [0, 1]; strings are parsed with ``t`` as parameter."""
    g = _vec([_parse(e) for e in gamma], P.chart.dim, "gamma")
    av = _vec([_parse(e) for e in a], P.rank, "a")
    return LRPath(P, (PathPiece(0.0, 1.0, g, av),))


def _parse(e, params=(T_PARAM,)):
    return parse_expr(e, None, params) if isinstance(e, str) else as_expr(e)


def constant_path(P: LRPresentation, point: Sequence) -> LRPath:
    return lr_path(P, list(point), [0] * P.rank)


# ---------------------------------------------------------------------------
# Residuals


def _rho_fn(P: LRPresentation):
    n, k = P.chart.dim, P.rank
    fn = compile_exprs(tuple(e for col in P.anchor_cols for e in col), tuple(P.chart.coords))
    return lambda x: np.array(fn(*x), dtype=float).reshape(k, n)


def _sample_times(path: LRPath, samples: int):
    """Uniform grid plus both ends of every piece (one-sided values)."""
    out = []
    for i, p in enumerate(path.pieces):
        m = max(2, int(round(samples * (p.t1 - p.t0))) + 1)
        out.extend((float(t), i) for t in np.linspace(p.t0, p.t1, m))
    return out


def apath_residual(path: LRPath, samples: int = 101) -> tuple[float, float]:
    """Max of ``|gamma'(t) - sum_i a^i(t) rho(e_i)(gamma(t))|`` and the time it occurs."""
    P = path.presentation
    rho = _rho_fn(P)
    worst, where = 0.0, 0.0
    for t, i in _sample_times(path, samples):
        g, dg, a = path.evaluate(t, i)
        r = float(np.linalg.norm(dg - a @ rho(g))) if P.chart.dim else 0.0
        if r > worst:
            worst, where = r, t
    return worst, where


def apath_report(path: LRPath, samples: int = 101, tol: float = 1e-9) -> Report:
    value, t = apath_residual(path, samples)
    report = Report()
    report.add(numeric_residual("apath", "apath", value, tol, (t,)))
    return report


# ---------------------------------------------------------------------------
# Operations


def reverse_path(path: LRPath) -> LRPath:
    """``gamma(1 - t)`` with coefficients ``-a(1 - t)``."""
    r = normalize(Num(1) - _t)
    pieces = []
    for p in reversed(path.pieces):
        pieces.append(
            PathPiece(
                1.0 - p.t1,
                1.0 - p.t0,
                tuple(_subst_t(g, r) for g in p.gamma),
                tuple(neg(_subst_t(a, r)) for a in p.a),
            )
        )
    return LRPath(path.presentation, tuple(pieces))


@dataclass(frozen=True)
class Reparameterization:
    """A monotone piecewise map [0, 1] -> [0, 1]; pieces ``(u0, u1, tau(t))``."""

    pieces: tuple[tuple[float, float, Expr], ...]

    def __post_init__(self):
        fns = [compile_exprs((e,), (T_PARAM,)) for _, _, e in self.pieces]
        object.__setattr__(self, "_fns", fns)
        if abs(self(0.0)) > 1e-12 or abs(self(1.0) - 1.0) > 1e-12:
            raise PathError("reparameterization must fix 0 and 1")
        grid = np.linspace(0, 1, 201)
        vals = [self(u) for u in grid]
        if any(b < a - 1e-12 for a, b in zip(vals, vals[1:])):
            raise PathError("reparameterization must be nondecreasing")

    def piece_value(self, i: int, u: float) -> float:
        return self._fns[i](float(u))[0]

    def __call__(self, u: float) -> float:
        for i, (u0, u1, _) in enumerate(self.pieces):
            if u <= u1 or i == len(self.pieces) - 1:
                return self.piece_value(i, u)
        raise AssertionError

    def inverse_on(self, i: int, v: float) -> float:
        """Solve ``tau_i(u) = v`` on piece ``i`` by bisection."""
        u0, u1, _ = self.pieces[i]
        lo, hi = u0, u1
        if v <= self.piece_value(i, lo):
            return lo
        if v >= self.piece_value(i, hi):
            return hi
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.piece_value(i, mid) < v:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-15:
                break
        return 0.5 * (lo + hi)


def reparameterization(tau) -> Reparameterization:
    if isinstance(tau, Reparameterization):
        return tau
    if isinstance(tau, str):
        tau = parse_expr(tau, None, (T_PARAM,))
    return Reparameterization(((0.0, 1.0, normalize(as_expr(tau))),))


PINNED_TAUS = ("t^2", "3*t^2 - 2*t^3", "(t + t^3)/2")


def lazy_cutoff() -> Reparameterization:
    """Constant on [0, 0.1] and [0.9, 1]; quintic smoothstep of ``(t - 0.1)/0.8`` between."""
    s = Sym("s")
    smooth = normalize(6 * s**5 - 15 * s**4 + 10 * s**3)
    step = substitute(smooth, {"s": parse_expr("(t - 1/10) * 5/4", None, (T_PARAM,))})
    return Reparameterization(((0.0, 0.1, ZERO), (0.1, 0.9, step), (0.9, 1.0, Num(1))))


def reparameterize_path(path: LRPath, tau) -> LRPath:
    """``gamma o tau`` with coefficients ``tau' * (a o tau)``, piece by piece."""
    tau = reparameterization(tau)
    P = path.presentation
    pieces: list[PathPiece] = []
    for ti, (u0, u1, expr) in enumerate(tau.pieces):
        v0, v1 = tau.piece_value(ti, u0), tau.piece_value(ti, u1)
        if abs(v1 - v0) < 1e-15:
            pi = path._locate(v0)
            gamma = tuple(normalize(_subst_t(e, _num(v0))) for e in path.pieces[pi].gamma)
            pieces.append(PathPiece(u0, u1, gamma, tuple(ZERO for _ in range(P.rank))))
            continue
        dtau = differentiate(expr, T_PARAM)
        for p in path.pieces:
            w0, w1 = max(p.t0, v0), min(p.t1, v1)
            if w1 - w0 <= 1e-15:
                continue
            s0 = u0 if abs(w0 - v0) < 1e-12 else tau.inverse_on(ti, w0)
            s1 = u1 if abs(w1 - v1) < 1e-12 else tau.inverse_on(ti, w1)
            if s1 - s0 <= 0:
                continue
            pieces.append(
                PathPiece(
                    s0,
                    s1,
                    tuple(_subst_t(g, expr) for g in p.gamma),
                    tuple(mul(dtau, _subst_t(a, expr)) for a in p.a),
                )
            )
    # snap the seams so rounding in the inverses cannot open gaps
    fixed = []
    for i, pc in enumerate(pieces):
        t0 = 0.0 if i == 0 else fixed[-1].t1
        t1 = 1.0 if i == len(pieces) - 1 else pc.t1
        fixed.append(PathPiece(t0, t1, pc.gamma, pc.a))
    return LRPath(P, tuple(fixed))


def lazify_path(path: LRPath) -> LRPath:
    return reparameterize_path(path, lazy_cutoff())


def is_lazy(path: LRPath, tol: float = 1e-9, fraction: float = 0.05) -> bool:
    """Coefficients vanish on the outer ``fraction`` of the domain.

    The inner ends of the two windows are not sampled: they may sit on a
    seam where rounding leaves a tiny nonzero value.
    """
    for t in np.concatenate([np.linspace(0, fraction, 11)[:-1], np.linspace(1 - fraction, 1, 11)[1:]]):
        if np.linalg.norm(path.a_at(float(t))) > tol:
            return False
    return True


def concatenate_paths(p1: LRPath, p2: LRPath, tol: float = 1e-9) -> LRPath:
    """``p1`` on [0, 1/2] at double speed, then ``p2`` on [1/2, 1]."""
    if p1.presentation is not p2.presentation:
        raise PathError("paths belong to different presentations")
    if not (is_lazy(p1) and is_lazy(p2)):
        raise PathError("concatenation needs lazy paths")
    gap = float(np.linalg.norm(p1.end() - p2.start())) if p1.presentation.chart.dim else 0.0
    if gap > tol:
        raise PathError(f"endpoint mismatch {gap:.3g}")
    pieces = []
    for src, shift in ((p1, 0), (p2, 1)):
        sub_t = normalize(2 * _t - shift)
        for p in src.pieces:
            pieces.append(
                PathPiece(
                    (p.t0 + shift) / 2,
                    (p.t1 + shift) / 2,
                    tuple(_subst_t(g, sub_t) for g in p.gamma),
                    tuple(mul(Num(2), _subst_t(a, sub_t)) for a in p.a),
                )
            )
    return LRPath(p1.presentation, tuple(pieces))


def random_lazy_path(P: LRPresentation, rng: np.random.Generator, pieces: int = 2, degree: int = 3) -> LRPath:
    """Lazy piecewise-polynomial coefficient path on a point chart."""
    if P.chart.dim:
        raise PathError("random coefficient paths need a point chart")
    out = []
    edges = np.linspace(0, 1, pieces + 1)
    for t0, t1 in zip(edges, edges[1:]):
        a = []
        for _ in range(P.rank):
            coeffs = [Fraction(int(c), 4) for c in rng.integers(-4, 5, size=degree + 1)]
            e = ZERO
            for d, c in enumerate(coeffs):
                e = e + Num(c) * _t**d if d else e + Num(c)
            a.append(normalize(e))
        out.append(PathPiece(float(t0), float(t1), (), tuple(a)))
    return lazify_path(LRPath(P, tuple(out)))


# ---------------------------------------------------------------------------
# Squares


@dataclass(frozen=True)
class LRSquare:
    """``gamma(s, t)`` with coefficients ``a_s``, ``a_t`` in the two directions."""

    presentation: LRPresentation
    gamma: tuple[Expr, ...]
    a_s: tuple[Expr, ...]
    a_t: tuple[Expr, ...]

    def face(self, s: float) -> LRPath:
        """The path ``t -> (gamma(s, t), a_t(s, t))`` at fixed ``s``."""
        v = _num(s)
        g = tuple(normalize(substitute(e, {S_PARAM: v})) for e in self.gamma)
        a = tuple(normalize(substitute(e, {S_PARAM: v})) for e in self.a_t)
        return LRPath(self.presentation, (PathPiece(0.0, 1.0, g, a),))


def lr_square(P: LRPresentation, gamma: Sequence, a_s: Sequence, a_t: Sequence) -> LRSquare:
    params = (S_PARAM, T_PARAM)
    return LRSquare(
        P,
        _vec([_parse(e, params) for e in gamma], P.chart.dim, "gamma"),
        _vec([_parse(e, params) for e in a_s], P.rank, "a_s"),
        _vec([_parse(e, params) for e in a_t], P.rank, "a_t"),
    )


def _fiber_projector(P: LRPresentation, rank_tol: float = 1e-9):
    if not P.relations:
        return lambda x, v: v
    from .fibers import _Evaluator, _fiber_from_matrix

    ev = _Evaluator(P)
    return lambda x, v: _fiber_from_matrix(x, ev.relation_matrix(x), P.rank, rank_tol).projection @ v


def square_residual(sq: LRSquare, grid: int = 33, tol: float = 1e-9) -> Report:
    """Max residuals of both A-path conditions and of flatness
    ``d_s a_t - d_t a_s - sum_ij a_t^i a_s^j f_ij(gamma)`` on a grid."""
    P = sq.presentation
    n, k = P.chart.dim, P.rank
    args = (S_PARAM, T_PARAM)
    gs = [normalize(differentiate(g, S_PARAM)) for g in sq.gamma]
    gt = [normalize(differentiate(g, T_PARAM)) for g in sq.gamma]
    ds_at = [normalize(differentiate(a, S_PARAM)) for a in sq.a_t]
    dt_as = [normalize(differentiate(a, T_PARAM)) for a in sq.a_s]
    fn = compile_exprs(tuple(sq.gamma) + tuple(gs) + tuple(gt) + sq.a_s + sq.a_t + tuple(ds_at) + tuple(dt_as), args)
    rho = _rho_fn(P)
    struct = compile_exprs(
        tuple(P.struct[i][j][m] for i in range(k) for j in range(k) for m in range(k)), tuple(P.chart.coords)
    )
    project = _fiber_projector(P)
    worst = {"apath_s": (0.0, None), "apath_t": (0.0, None), "flatness": (0.0, None)}
    for s in np.linspace(0, 1, grid):
        for t in np.linspace(0, 1, grid):
            v = np.array(fn(float(s), float(t)))
            g, vs, vt = v[:n], v[n : 2 * n], v[2 * n : 3 * n]
            a_s, a_t = v[3 * n : 3 * n + k], v[3 * n + k : 3 * n + 2 * k]
            d1, d2 = v[3 * n + 2 * k : 3 * n + 3 * k], v[3 * n + 3 * k :]
            R = rho(g) if n else np.zeros((k, 0))
            f = np.array(struct(*g)).reshape(k, k, k) if k else np.zeros((0, 0, 0))
            vals = {
                "apath_s": np.linalg.norm(vs - a_s @ R) if n else 0.0,
                "apath_t": np.linalg.norm(vt - a_t @ R) if n else 0.0,
                "flatness": np.linalg.norm(project(g, d1 - d2 - np.einsum("i,j,ijm->m", a_t, a_s, f))),
            }
            for key, val in vals.items():
                if val > worst[key][0]:
                    worst[key] = (float(val), (float(s), float(t)))
    report = Report()
    for key, (val, where) in worst.items():
        report.add(numeric_residual(key, key, val, tol, where))
    return report


def boundary_report(obj, samples: int = 33, tol: float = 1e-9) -> Report:
    """Face residuals ``|Fib(a)|`` of a path or square.

    Paths: ``a`` at ``t = 0, 1`` and closure ``gamma(0) = gamma(1)``; the
    report is a sphere verdict. Squares: ``a_t`` on the faces ``t = 0, 1``
    and ``a_s`` on ``s = 0, 1`` (family ``sphere``), plus ``a_s`` on the
    faces ``t = 0, 1`` (family ``fixed_ends``, the condition for a homotopy
    of paths with fixed endpoints); face paths are stored in ``data``.
    """
    P = obj.presentation
    project = _fiber_projector(P)
    report = Report()
    if isinstance(obj, LRPath):
        for label, t, piece in (("t=0", 0.0, 0), ("t=1", 1.0, len(obj.pieces) - 1)):
            g, _, a = obj.evaluate(t, piece)
            report.add(numeric_residual(f"face[{label}]", "sphere", float(np.linalg.norm(project(g, a))), tol, g))
        gap = float(np.linalg.norm(obj.end() - obj.start())) if P.chart.dim else 0.0
        report.add(numeric_residual("closed", "sphere", gap, tol))
        report.data["sphere"] = report.ok
        return report
    args = (S_PARAM, T_PARAM)
    n, k = P.chart.dim, P.rank
    fn = compile_exprs(tuple(obj.gamma) + obj.a_s + obj.a_t, args)

    def face_max(which: str, fixed: str, value: float, family: str):
        worst, where = 0.0, None
        for u in np.linspace(0, 1, samples):
            s, t = (value, u) if fixed == S_PARAM else (u, value)
            v = np.array(fn(float(s), float(t)))
            g = v[:n]
            a = v[n : n + k] if which == "a_s" else v[n + k :]
            r = float(np.linalg.norm(project(g, a)))
            if r > worst:
                worst, where = r, (float(s), float(t))
        report.add(numeric_residual(f"face[{which},{fixed}={value:g}]", family, worst, tol, where))

    for value in (0.0, 1.0):
        face_max("a_t", T_PARAM, value, "sphere")
        face_max("a_s", S_PARAM, value, "sphere")
    for value in (0.0, 1.0):
        face_max("a_s", T_PARAM, value, "fixed_ends")
    report.data["sphere"] = report.family_ok("sphere")
    report.data["fixed_ends"] = report.family_ok("fixed_ends")
    return report


# ---------------------------------------------------------------------------
# Holonomy


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class HolonomyElement:
    matrix: np.ndarray

    def check_invertible(self, bound: float = 1e-9) -> bool:
        return abs(float(np.linalg.det(self.matrix))) > bound


class MatrixAlgebraModel:
    """Matrices ``M_i`` with ``[M_i, M_j] = sum_m f_ij^m M_m`` for a constant-structure presentation."""

    def __init__(self, presentation: LRPresentation, matrices, bound: float = 1e-12):
        P = presentation
        if P.chart.dim and not P.has_constant_structure():
            raise ModelError("matrix models need a point chart or constant structure functions")
        if isinstance(matrices, dict):
            missing = set(P.gens) - set(matrices)
            if missing:
                raise ModelError(f"no matrix for generators {sorted(missing)}")
            matrices = [matrices[g] for g in P.gens]
        M = np.array(matrices, dtype=float)
        if M.ndim != 3 or M.shape[0] != P.rank or M.shape[1] != M.shape[2]:
            raise ModelError("need one square matrix per generator, all the same size")
        self.presentation = P
        self.M = M
        self.N = M.shape[1]
        k = P.rank
        fn = compile_exprs(
            tuple(P.struct[i][j][m] for i in range(k) for j in range(k) for m in range(k)), tuple(P.chart.coords)
        )
        f = np.array(fn(*([0.0] * P.chart.dim)), dtype=float).reshape(k, k, k) if k else np.zeros((0, 0, 0))
        self.structure = f
        worst = 0.0
        for i in range(k):
            for j in range(k):
                comm = M[i] @ M[j] - M[j] @ M[i]
                worst = max(worst, float(np.linalg.norm(comm - np.tensordot(f[i, j], M, axes=1))))
        self.commutator_residual = worst
        if worst >= bound:
            raise ModelError(f"commutator residual {worst:.3g} exceeds {bound:g}")

    def algebra_element(self, a: np.ndarray) -> np.ndarray:
        return np.tensordot(a, self.M, axes=1)


def holonomy(model: MatrixAlgebraModel, path: LRPath, cfg: IntegratorConfig | None = None, side: str = "right") -> HolonomyElement:
    """Endpoint of ``g' = g A(t)`` (``side="right"``) or ``g' = A(t) g``, ``g(0) = I``.

    With the right-handed convention ``hol(p (.) q) = hol(p) hol(q)``.
    """
    cfg = cfg or IntegratorConfig()
    if side not in ("right", "left"):
        raise ValueError("side must be 'right' or 'left'")
    g = np.eye(model.N)
    Mflat = model.M.reshape(model.M.shape[0], -1)
    N = model.N
    for i, piece in enumerate(path.pieces):
        if all(is_zero(a) for a in piece.a):
            continue
        afn = compile_exprs(piece.a, (T_PARAM,))

        def A(t):
            return (np.asarray(afn(t)) @ Mflat).reshape(N, N)

        length = piece.t1 - piece.t0
        steps = max(1, math.ceil(length / cfg.step - 1e-12))
        h = length / steps
        t = piece.t0
        for j in range(steps):
            A1, A2, A3 = A(t), A(t + h / 2), A(t + h)
            if side == "right":
                k1 = g @ A1
                k2 = (g + h / 2 * k1) @ A2
                k3 = (g + h / 2 * k2) @ A2
                k4 = (g + h * k3) @ A3
            else:
                k1 = A1 @ g
                k2 = A2 @ (g + h / 2 * k1)
                k3 = A2 @ (g + h / 2 * k2)
                k4 = A3 @ (g + h * k3)
            g = g + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t = piece.t0 + (j + 1) * h
        if not np.all(np.isfinite(g)):
            raise PathError("non-finite holonomy")
    return HolonomyElement(g)


def _dist(a: HolonomyElement | np.ndarray, b: HolonomyElement | np.ndarray) -> float:
    a = a.matrix if isinstance(a, HolonomyElement) else a
    b = b.matrix if isinstance(b, HolonomyElement) else b
    return float(np.max(np.abs(a - b)))


def groupoid_law_report(
    model: MatrixAlgebraModel,
    paths: Sequence[LRPath],
    cfg: IntegratorConfig | None = None,
    tol: float = 1e-6,
    square: LRSquare | None = None,
    control: LRSquare | None = None,
    side: str = "right",
    taus: Sequence[str] = PINNED_TAUS,
) -> Report:
    """Groupoid laws checked through the holonomy functional.

    Families: ``reparameterization`` (each pinned tau on each path),
    ``unit``, ``inverse``, ``associativity``, ``product`` (``hol(p (.) q)``
    against the product in the order fixed by ``side``) and
    ``homotopy_invariance`` (face holonomies of a flat square). A
    ``control`` square is expected to be non-flat: its face gap is stored
    in ``data`` and reported as ``control_gap`` passing when above 1e-3.
    """
    cfg = cfg or IntegratorConfig()
    if len(paths) < 3:
        raise PathError("the law suite needs three paths")
    for p in paths:
        if not is_lazy(p):
            raise PathError("the law suite needs lazy paths")
    p, q, r = paths[:3]
    report = Report(data={"side": side})

    def hol(path):
        return holonomy(model, path, cfg, side)

    base = [hol(x) for x in paths]
    for pi, (path, h) in enumerate(zip(paths, base)):
        for tau in taus:
            d = _dist(hol(reparameterize_path(path, tau)), h)
            report.add(numeric_residual(f"reparameterization[p{pi},{tau}]", "reparameterization", d, tol))
    unit = constant_path(model.presentation, p.end()) if model.presentation.chart.dim else constant_path(model.presentation, [])
    report.add(numeric_residual("unit[p0]", "unit", _dist(hol(concatenate_paths(p, unit)), base[0]), tol))
    report.add(
        numeric_residual("inverse[p0]", "inverse", _dist(hol(concatenate_paths(reverse_path(p), p)), np.eye(model.N)), tol)
    )
    left = hol(concatenate_paths(concatenate_paths(p, q), r))
    right = hol(concatenate_paths(p, concatenate_paths(q, r)))
    report.add(numeric_residual("associativity[p0,p1,p2]", "associativity", _dist(left, right), tol))
    pq = hol(concatenate_paths(p, q))
    expected = base[0].matrix @ base[1].matrix if side == "right" else base[1].matrix @ base[0].matrix
    report.add(numeric_residual("product[p0,p1]", "product", _dist(pq, expected), tol))
    if square is not None:
        flat = square_residual(square)
        ends = boundary_report(square)
        gap = _dist(hol(square.face(0.0)), hol(square.face(1.0)))
        report.data["square_flat"] = flat.ok
        report.data["square_fixed_ends"] = ends.data["fixed_ends"]
        if not (flat.ok and ends.data["fixed_ends"]):
            report.add(numeric_residual("homotopy_invariance", "homotopy_invariance", math.inf, tol))
        else:
            report.add(numeric_residual("homotopy_invariance", "homotopy_invariance", gap, tol))
    if control is not None:
        gap = _dist(hol(control.face(0.0)), hol(control.face(1.0)))
        report.data["control_gap"] = gap
        report.data["control_flatness"] = square_residual(control).residuals[2].value
        report.add(Residual("control_gap", "control", "Pass" if gap > 1e-3 else "Fail", 1e-3, None, gap))
    return report
