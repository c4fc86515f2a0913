"""Anchor flows, adjoint flows along characteristics, and leaf sampling.

All integration is fixed-step RK4 on plain tuples; a run is a pure function
of its inputs, the seed and the :class:`IntegratorConfig`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import least_squares, minimize_scalar

from .expr import Chart, Expr, UnboundParameterError, as_expr, compile_exprs, free_symbols
from .presentation import LRPresentation, Section, VectorField, _vec, anchor_of, bracket_sections
from .report import Report, numeric_residual


class FlowError(RuntimeError):
    pass


class EscapeError(FlowError):
    """The trajectory left the inflated sample box."""


@dataclass(frozen=True)
class IntegratorConfig:
    step: float = 1e-3
    tol: float = 1e-6
    margin: float = 0.5
    rank_tol: float = 1e-9

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be positive")


# ---------------------------------------------------------------------------
# RK4 core


def _bounds(chart: Chart, margin: float):
    out = []
    for lo, hi in chart.sample_box:
        pad = margin * max(hi - lo, 1e-12)
        out.append((lo - pad, hi + pad))
    return out


def _rk4(
    rhs: Callable[[float, tuple], tuple],
    y0: tuple,
    T: float,
    step: float,
    check: Callable[[tuple], None] | None = None,
    t0: float = 0.0,
) -> tuple:
    """Integrate ``y' = rhs(t, y)`` from ``t0`` to ``t0 + T``; the last step lands on T exactly."""
    if T == 0:
        return tuple(y0)
    n = max(1, math.ceil(abs(T) / step - 1e-12))
    h = T / n
    y = tuple(y0)
    t = t0
    for i in range(n):
        k1 = rhs(t, y)
        k2 = rhs(t + h / 2, tuple(a + h / 2 * b for a, b in zip(y, k1)))
        k3 = rhs(t + h / 2, tuple(a + h / 2 * b for a, b in zip(y, k2)))
        k4 = rhs(t + h, tuple(a + h * b for a, b in zip(y, k3)))
        y = tuple(a + h / 6 * (b1 + 2 * b2 + 2 * b3 + b4) for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4))
        t = t0 + (i + 1) * h
        if not all(math.isfinite(v) for v in y):
            raise FlowError(f"non-finite state at t={t:.6g}")
        if check is not None:
            check(y)
    return y


def _escape_check(chart: Chart, cfg: IntegratorConfig, dims: int):
    bounds = _bounds(chart, cfg.margin)

    def check(y):
        for v, (lo, hi) in zip(y[:dims], bounds):
            if v < lo or v > hi:
                raise EscapeError(f"trajectory left the domain at {tuple(round(c, 6) for c in y[:dims])}")

    return check


def _compile_field(chart: Chart, components: Sequence[Expr], param: str = "t"):
    if param in chart.coords:
        # a coordinate shadows the time parameter, so the field is autonomous
        param = "_time"
        while param in chart.coords:
            param += "_"
    extra = set()
    for c in components:
        extra |= free_symbols(c)
    extra -= set(chart.coords) | {param}
    if extra:
        raise UnboundParameterError(f"field mentions unbound symbols {sorted(extra)}")
    fn = compile_exprs(tuple(components), (param,) + tuple(chart.coords))
    return lambda t, x: fn(t, *x)


def flow_point(V: VectorField, p: Sequence[float], T: float, cfg: IntegratorConfig | None = None, param: str = "t"):
    """Endpoint of the flow of ``V`` (possibly depending on ``t``) from ``p`` for time ``T``."""
    cfg = cfg or IntegratorConfig()
    chart = V.chart
    if len(p) != chart.dim:
        raise ValueError(f"point has {len(p)} coordinates, chart has {chart.dim}")
    if T == 0:
        return np.array(p, dtype=float)
    f = _compile_field(chart, V.components, param)
    y = _rk4(f, tuple(float(v) for v in p), float(T), cfg.step, _escape_check(chart, cfg, chart.dim))
    return np.array(y)


# ---------------------------------------------------------------------------
# Adjoint flow


@dataclass(frozen=True)
class TimeDependentSection:
    presentation: LRPresentation
    coeffs: tuple[Expr, ...]
    param: str = "t"

    def section(self) -> Section:
        return Section(self.presentation, self.coeffs)

    def reversed(self, T: float) -> "TimeDependentSection":
        """``-alpha(T - t)``, the generator of the reverse flow."""
        from .expr import Num, Sym, neg, normalize, sub, substitute
        from fractions import Fraction

        shift = sub(Num(Fraction(T)), Sym(self.param))
        return TimeDependentSection(
            self.presentation,
            tuple(normalize(neg(substitute(c, {self.param: shift}))) for c in self.coeffs),
            self.param,
        )


def time_section(P: LRPresentation, coeffs: Sequence, param: str = "t") -> TimeDependentSection:
    return TimeDependentSection(P, _vec(coeffs, P.rank, "time-dependent section"), param)


class _AdjointSystem:
    """Joint ODE ``x' = rho(alpha)(t, x)``, ``v' = -C(t, x) v`` with ``C[m][i]`` the
    ``e_m`` coefficient of ``[alpha, e_i]``."""

    def __init__(self, alpha: TimeDependentSection):
        P = alpha.presentation
        self.P = P
        self.n, self.k = P.chart.dim, P.rank
        a = alpha.section()
        rho = anchor_of(P, a).components
        cols = [bracket_sections(P, a, P.gen(i)).coeffs for i in range(self.k)]
        C = [cols[i][m] for m in range(self.k) for i in range(self.k)]
        self._f = _compile_field(P.chart, list(rho) + C, alpha.param)

    def rhs(self, t, y):
        n, k = self.n, self.k
        vals = self._f(t, y[:n])
        dx = vals[:n]
        v = y[n:]
        dv = tuple(-sum(vals[n + m * k + i] * v[i] for i in range(k)) for m in range(k))
        return tuple(dx) + dv


def _section_values(u: Section, p: Sequence[float]) -> tuple[float, ...]:
    P = u.presentation
    fn = compile_exprs(u.coeffs, tuple(P.chart.coords))
    return tuple(float(v) for v in fn(*p))


def adjoint_flow_at_point(
    alpha: TimeDependentSection,
    b0: Section | Sequence[float],
    p: Sequence[float],
    T: float,
    cfg: IntegratorConfig | None = None,
    system: _AdjointSystem | None = None,
):
    """Transport the fiber of ``b0`` at ``p`` along the adjoint flow of ``alpha``.

    Returns ``(endpoint, coefficients)``; ``b0`` may be a section or a vector
    of fiber coefficients at ``p``.
    """
    cfg = cfg or IntegratorConfig()
    sys_ = system or _AdjointSystem(alpha)
    P = alpha.presentation
    v0 = _section_values(b0, p) if isinstance(b0, Section) else tuple(float(v) for v in b0)
    y0 = tuple(float(v) for v in p) + v0
    y = _rk4(sys_.rhs, y0, float(T), cfg.step, _escape_check(P.chart, cfg, P.chart.dim))
    n = P.chart.dim
    return np.array(y[:n]), np.array(y[n:])


def _coords_fn(P: LRPresentation, exprs: Sequence[Expr]):
    fn = compile_exprs(tuple(exprs), tuple(P.chart.coords))
    return lambda x: np.array(fn(*x), dtype=float)


def adjoint_property_report(
    alpha: TimeDependentSection,
    b: Section,
    c: Section,
    g,
    p: Sequence[float],
    T: float,
    cfg: IntegratorConfig | None = None,
) -> Report:
    """Numeric residuals of the three automorphism properties of the adjoint flow.

    ``anchor``: ``rho(Phi b)`` at the endpoint against the pushforward of
    ``rho(b)`` by a finite-difference Jacobian (step 1e-5).
    ``bracket``: ``Phi [b, c]`` against ``[Phi b, Phi c]``, the latter rebuilt
    from transported coefficients on a central stencil (spacing 1e-4).
    ``module``: the reverse flow ``Psi`` (along ``-alpha(T - t)``) applied to
    ``g b`` against ``(g o phi) * Psi(b)``.
    """
    cfg = cfg or IntegratorConfig()
    P = alpha.presentation
    n, k = P.chart.dim, P.rank
    sys_ = _AdjointSystem(alpha)
    p = np.array(p, dtype=float)
    report = Report(data={"T": float(T), "point": [float(v) for v in p]})

    def transport(section_or_vec, x):
        return adjoint_flow_at_point(alpha, section_or_vec, x, T, cfg, sys_)

    q, vb = transport(b, p)
    rho = _coords_fn(P, [e for col in P.anchor_cols for e in col])

    def anchor_at(x, coeffs):
        cols = rho(x).reshape(k, n) if n else np.zeros((k, 0))
        return coeffs @ cols

    # (a) anchor
    h = 1e-5
    J = np.eye(n)
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        fp, _ = transport(np.zeros(k), p + e)
        fm, _ = transport(np.zeros(k), p - e)
        J[:, j] = (fp - fm) / (2 * h)
    rho_b = anchor_at(p, np.array(_section_values(b, p)))
    resid_a = float(np.linalg.norm(anchor_at(q, vb) - J @ rho_b)) if n else 0.0
    report.add(numeric_residual("anchor", "anchor", resid_a, cfg.tol, q))

    # (b) bracket
    h = 1e-4
    _, vc = transport(c, p)
    _, vbc = transport(bracket_sections(P, b, c), p)
    Jb = np.eye(n)
    Db = np.zeros((k, n))
    Dc = np.zeros((k, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        qp, bp = transport(b, p + e)
        qm, bm = transport(b, p - e)
        _, cp = transport(c, p + e)
        _, cm = transport(c, p - e)
        Jb[:, j] = (qp - qm) / (2 * h)
        Db[:, j] = (bp - bm) / (2 * h)
        Dc[:, j] = (cp - cm) / (2 * h)
    if n:
        Jinv = np.linalg.inv(Jb)
        grad_b, grad_c = Db @ Jinv, Dc @ Jinv
    else:
        grad_b = grad_c = np.zeros((k, 0))
    struct = _coords_fn(P, [P.struct[i][j][m] for i in range(k) for j in range(k) for m in range(k)])(q).reshape(k, k, k)
    rebuilt = np.einsum("i,j,ijm->m", vb, vc, struct) + grad_c @ anchor_at(q, vb) - grad_b @ anchor_at(q, vc)
    diff = rebuilt - vbc
    if P.relations:
        from .fibers import fiber_basis

        diff = fiber_basis(P, q, cfg.rank_tol).projection @ diff
    report.add(numeric_residual("bracket", "bracket", float(np.linalg.norm(diff)), cfg.tol, q))

    # (c) module
    g = as_expr(g)
    g_fn = _coords_fn(P, [g])
    rev = alpha.reversed(T)
    rev_sys = _AdjointSystem(rev)
    p_back, psi_b = adjoint_flow_at_point(rev, b, q, T, cfg, rev_sys)
    _, psi_gb = adjoint_flow_at_point(rev, b.scale(g), q, T, cfg, rev_sys)
    fwd, _ = transport(np.zeros(k), p_back)
    resid_c = float(np.linalg.norm(psi_gb - g_fn(fwd)[0] * psi_b))
    report.add(numeric_residual("module", "module", resid_c, cfg.tol, p_back))
    return report


# ---------------------------------------------------------------------------
# Leaves


@dataclass
class LeafSampleCloud:
    """Points reached from ``base`` by generator flows.

    ``steps[i] = (parent, generator, time)``; ``parent`` is -1 for the base
    point, so every point's word is recovered by following parents.
    """

    base: tuple[float, ...]
    points: list[tuple[float, ...]]
    steps: list[tuple[int, str, float]]
    seed: int
    budget: int
    coords: tuple[str, ...]
    escaped: int = 0

    def word(self, i: int) -> list[tuple[str, float]]:
        out = []
        while i >= 0:
            parent, gen, t = self.steps[i]
            out.append((gen, t))
            i = parent
        return out[::-1]

    def to_csv(self) -> str:
        lines = [",".join(self.coords)]
        lines.extend(",".join(repr(float(v)) for v in pt) for pt in self.points)
        for i, (parent, gen, t) in enumerate(self.steps):
            lines.append(f"# word={i}:@{parent},{gen}:{t!r}")
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        return {
            "base": list(self.base),
            "budget": self.budget,
            "escaped": self.escaped,
            "points": len(self.points),
            "seed": self.seed,
        }


def _generator_fields(P: LRPresentation):
    return [_compile_field(P.chart, col) for col in P.anchor_cols]


def leaf_sample(
    P: LRPresentation, p: Sequence[float], budget: int, seed: int = 0, cfg: IntegratorConfig | None = None
) -> LeafSampleCloud:
    """Seeded random walk by generator flows for times in [-1, 1].

    An attempt that leaves the domain is dropped and the walk restarts from
    the base point.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    cfg = cfg or IntegratorConfig()
    rng = np.random.default_rng(seed)
    fields = _generator_fields(P)
    check = _escape_check(P.chart, cfg, P.chart.dim)
    base = tuple(float(v) for v in p)
    cloud = LeafSampleCloud(base, [], [], seed, budget, P.chart.coords)
    current, parent = base, -1
    for _ in range(budget):
        if not fields:
            break
        i = int(rng.integers(len(fields)))
        t = float(rng.uniform(-1.0, 1.0))
        try:
            nxt = _rk4(fields[i], current, t, cfg.step, check)
        except EscapeError:
            cloud.escaped += 1
            current, parent = base, -1
            continue
        cloud.points.append(nxt)
        cloud.steps.append((parent, P.gens[i], t))
        current, parent = nxt, len(cloud.points) - 1
    return cloud


def leaf_dimension(P: LRPresentation, p: Sequence[float], rank_tol: float = 1e-9) -> int:
    """Numeric rank of the anchor columns at ``p``."""
    n, k = P.chart.dim, P.rank
    if n == 0 or k == 0:
        return 0
    M = _coords_fn(P, [e for col in P.anchor_cols for e in col])(np.asarray(p, dtype=float)).reshape(k, n)
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > rank_tol * s[0]))


@dataclass(frozen=True)
class SameLeafResult:
    verdict: str
    word: tuple[tuple[str, float], ...] = ()
    distance: float = math.inf
    endpoint: tuple[float, ...] = field(default=())

    @property
    def connected(self) -> bool:
        return self.verdict == "Connected"


def same_leaf(
    P: LRPresentation,
    p: Sequence[float],
    q: Sequence[float],
    tol: float = 1e-4,
    budget: int = 8,
    seed: int = 0,
    cfg: IntegratorConfig | None = None,
    horizon: float = 2.0,
) -> SameLeafResult:
    """Greedy shooting search for a word of generator flows from ``p`` to ``q``.

    Each round scans every generator over a coarse time grid, polishes the
    best candidates with a bounded scalar minimization and keeps the word
    only if the distance to ``q`` shrinks. Never claims the points lie on
    different leaves: failure is ``Unknown``.
    """
    cfg = cfg or IntegratorConfig()
    q = np.asarray(q, dtype=float)
    current = tuple(float(v) for v in p)
    dist = float(np.linalg.norm(np.asarray(current) - q))
    if dist < tol:
        return SameLeafResult("Connected", (), dist, current)
    fields = _generator_fields(P)
    check = _escape_check(P.chart, cfg, P.chart.dim)
    coarse = max(cfg.step, 1e-2)
    rng = np.random.default_rng(seed)
    word: list[tuple[int, float]] = []

    def reach(i, start, t, step):
        try:
            return _rk4(fields[i], start, t, step, check)
        except EscapeError:
            return None

    def distance(i, start, t, step=coarse):
        y = reach(i, start, t, step)
        return math.inf if y is None else float(np.linalg.norm(np.asarray(y) - q))

    grid = np.linspace(-horizon, horizon, 41)
    for _ in range(budget):
        if not fields:
            break
        candidates = []
        for i in rng.permutation(len(fields)):
            for t in grid:
                if t != 0:
                    candidates.append((distance(i, current, float(t)), int(i), float(t)))
        candidates.sort()
        best = None
        for d0, i, t0 in candidates[:3]:
            if not math.isfinite(d0):
                continue
            width = grid[1] - grid[0]
            res = minimize_scalar(
                lambda t: distance(i, current, t),
                bounds=(t0 - width, t0 + width),
                method="bounded",
                options={"xatol": 1e-10},
            )
            t = float(res.x)
            if best is None or res.fun < best[0]:
                best = (float(res.fun), i, t)
        if best is None:
            break
        _, i, t = best
        nxt = reach(i, current, t, cfg.step)
        if nxt is None:
            break
        new_dist = float(np.linalg.norm(np.asarray(nxt) - q))
        if new_dist >= dist * (1 - 1e-3):
            break
        word.append((i, t))
        current, dist = nxt, new_dist
        if dist >= tol and len(word) > 1:
            current, dist, word = _polish_word(fields, check, p, q, word, coarse, cfg.step, current, dist)
        if dist < tol:
            return SameLeafResult("Connected", tuple((P.gens[j], s) for j, s in word), dist, current)
    return SameLeafResult("Unknown", tuple((P.gens[j], s) for j, s in word), dist, current)


def _run_word(fields, check, p, word, step):
    y = tuple(float(v) for v in p)
    for i, t in word:
        y = _rk4(fields[i], y, t, step, check)
    return y


def _polish_word(fields, check, p, q, word, coarse, fine, current, dist):
    """Least-squares adjustment of all flow times of a word at once."""
    gens = [i for i, _ in word]

    def resid(times):
        try:
            return np.asarray(_run_word(fields, check, p, list(zip(gens, times)), coarse)) - q
        except (EscapeError, FlowError):
            return np.full(len(q), 1e3)

    sol = least_squares(resid, [t for _, t in word], xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=200)
    cand = list(zip(gens, (float(t) for t in sol.x)))
    try:
        y = _run_word(fields, check, p, cand, fine)
    except (EscapeError, FlowError):
        return current, dist, word
    d = float(np.linalg.norm(np.asarray(y) - q))
    if d < dist:
        return y, d, cand
    return current, dist, word
