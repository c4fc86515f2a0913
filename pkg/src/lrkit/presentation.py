"""Finitely presented Lie-Rinehart structures on a single chart."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .expr import (
    ZERO,
    Chart,
    Expr,
    ZeroTestConfig,
    add,
    as_expr,
    differentiate,
    free_symbols,
    is_identically_zero,
    is_zero,
    mul,
    normalize,
    sub,
    to_string,
)
from .report import Report, zero_residual

Vector = tuple[Expr, ...]


def _vec(values, length: int | None = None, what: str = "vector") -> Vector:
    out = tuple(normalize(as_expr(v)) for v in values)
    if length is not None and len(out) != length:
        raise ValueError(f"{what} has length {len(out)}, expected {length}")
    return out


class PresentedModule:
    """Generators and relations over a chart (no bracket)."""

    def __init__(self, chart: Chart, gens: Sequence[str], relations: Sequence[Sequence] = ()):
        gens = tuple(gens)
        if len(set(gens)) != len(gens):
            raise ValueError("generator names must be distinct")
        self.chart = chart
        self.gens = gens
        self.relations = tuple(_vec(r, len(gens), "relation") for r in relations)

    @property
    def rank(self) -> int:
        return len(self.gens)

    def index(self, gen: str | int) -> int:
        if isinstance(gen, int):
            return gen
        try:
            return self.gens.index(gen)
        except ValueError:
            raise KeyError(f"unknown generator '{gen}'") from None


class LRPresentation(PresentedModule):
    """Generators ``e_i`` with anchor columns ``rho(e_i)`` and structure functions.

    ``struct[i][j]`` is the coefficient vector of ``[e_i, e_j]``; antisymmetry
    is checked at construction. Every entry is stored normalized.
    """

    def __init__(
        self,
        chart: Chart,
        gens: Sequence[str],
        anchor: Sequence[Sequence] | None,
        struct: Sequence[Sequence[Sequence]] | None,
        relations: Sequence[Sequence] = (),
        name: str | None = None,
    ):
        super().__init__(chart, gens, relations)
        k, n = len(self.gens), chart.dim
        self.name = name or chart.name
        if anchor is None:
            anchor = [[0] * n for _ in range(k)]
        if len(anchor) != k:
            raise ValueError(f"anchor has {len(anchor)} columns, expected {k}")
        self.anchor_cols: tuple[Vector, ...] = tuple(_vec(col, n, "anchor column") for col in anchor)
        if struct is None:
            struct = [[[0] * k for _ in range(k)] for _ in range(k)]
        rows = []
        for i in range(k):
            if len(struct[i]) != k:
                raise ValueError("structure tensor must be k x k x k")
            rows.append(tuple(_vec(struct[i][j], k, "structure vector") for j in range(k)))
        self.struct: tuple[tuple[Vector, ...], ...] = tuple(rows)
        for i in range(k):
            for j in range(i, k):
                for m in range(k):
                    if not is_zero(normalize(add(self.struct[i][j][m], self.struct[j][i][m]))):
                        raise ValueError(
                            f"structure functions not antisymmetric at [{self.gens[i]},{self.gens[j]}]"
                        )

    @classmethod
    def from_brackets(
        cls,
        chart: Chart,
        gens: Sequence[str],
        anchor: Mapping[str, Sequence] | Sequence[Sequence] | None,
        brackets: Mapping[tuple[str, str], Sequence],
        relations: Sequence[Sequence] = (),
        name: str | None = None,
    ) -> "LRPresentation":
        """Build from the listed brackets; unlisted ones are zero."""
        gens = tuple(gens)
        k, n = len(gens), chart.dim
        index = {g: i for i, g in enumerate(gens)}
        if isinstance(anchor, Mapping):
            for g in anchor:
                if g not in index:
                    raise KeyError(f"unknown generator '{g}'")
            anchor = [anchor.get(g, [0] * n) for g in gens]
        struct = [[[ZERO] * k for _ in range(k)] for _ in range(k)]
        given: dict[tuple[int, int], Vector] = {}
        for (a, b), vec in brackets.items():
            if a not in index or b not in index:
                raise KeyError(f"unknown generator in bracket [{a},{b}]")
            i, j = index[a], index[b]
            vec = _vec(vec, k, "bracket")
            if i == j:
                if any(not is_zero(v) for v in vec):
                    raise ValueError(f"diagonal bracket [{a},{a}] must be zero")
                continue
            if (i, j) in given and given[(i, j)] != vec:
                raise ValueError(f"bracket [{a},{b}] given twice")
            if (j, i) in given and any(
                not is_zero(normalize(add(x, y))) for x, y in zip(given[(j, i)], vec)
            ):
                raise ValueError(f"brackets [{a},{b}] and [{b},{a}] contradict")
            given[(i, j)] = vec
            struct[i][j] = list(vec)
            struct[j][i] = [normalize(-v) for v in vec]
        return cls(chart, gens, anchor, struct, relations, name)

    # -- convenience ---------------------------------------------------------

    @property
    def anchor_matrix(self) -> tuple[Vector, ...]:
        """n x k matrix: row j holds the d/dx_j components of every generator."""
        n = self.chart.dim
        return tuple(tuple(col[j] for col in self.anchor_cols) for j in range(n))

    def section(self, coeffs: Sequence) -> "Section":
        return Section(self, _vec(coeffs, self.rank, "section"))

    def gen(self, g: str | int) -> "Section":
        i = self.index(g)
        return self.section([1 if m == i else 0 for m in range(self.rank)])

    def zero(self) -> "Section":
        return self.section([0] * self.rank)

    def with_relations(self, relations: Sequence[Sequence]) -> "LRPresentation":
        return LRPresentation(self.chart, self.gens, self.anchor_cols, self.struct, relations, self.name)

    def has_constant_structure(self) -> bool:
        """True when no structure function depends on the coordinates."""
        coords = set(self.chart.coords)
        return all(not (free_symbols(v) & coords) for row in self.struct for vec in row for v in vec)

    def structurally_equal(self, other: "LRPresentation") -> bool:
        return (
            self.chart.coords == other.chart.coords
            and self.gens == other.gens
            and self.anchor_cols == other.anchor_cols
            and self.struct == other.struct
            and self.relations == other.relations
        )

    def __repr__(self):
        return f"LRPresentation({self.name!r}, gens={list(self.gens)}, coords={list(self.chart.coords)})"


@dataclass(frozen=True)
class Section:
    """A coefficient vector over a presentation's generators."""

    presentation: PresentedModule
    coeffs: Vector

    def _check(self, other: "Section"):
        if other.presentation is not self.presentation:
            raise ValueError("sections belong to different presentations")

    def __add__(self, other: "Section") -> "Section":
        self._check(other)
        return Section(self.presentation, tuple(normalize(add(a, b)) for a, b in zip(self.coeffs, other.coeffs)))

    def __sub__(self, other: "Section") -> "Section":
        self._check(other)
        return Section(self.presentation, tuple(normalize(sub(a, b)) for a, b in zip(self.coeffs, other.coeffs)))

    def __neg__(self) -> "Section":
        return Section(self.presentation, tuple(normalize(-a) for a in self.coeffs))

    def scale(self, g) -> "Section":
        g = as_expr(g)
        return Section(self.presentation, tuple(normalize(mul(g, a)) for a in self.coeffs))

    def __rmul__(self, g) -> "Section":
        return self.scale(g)

    def is_zero(self) -> bool:
        return all(is_zero(c) for c in self.coeffs)

    def __str__(self):
        terms = []
        for c, g in zip(self.coeffs, self.presentation.gens):
            if is_zero(c):
                continue
            s = to_string(c)
            terms.append(g if s == "1" else f"({s})*{g}")
        return " + ".join(terms) or "0"


@dataclass(frozen=True)
class VectorField:
    chart: Chart
    components: Vector

    def __post_init__(self):
        if len(self.components) != self.chart.dim:
            raise ValueError("vector field has wrong number of components")

    def apply(self, g: Expr) -> Expr:
        """Directional derivative X(g)."""
        out = ZERO
        for comp, c in zip(self.components, self.chart.coords):
            if not is_zero(comp):
                out = add(out, mul(comp, differentiate(g, c)))
        return normalize(out)

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.chart, tuple(normalize(sub(a, b)) for a, b in zip(self.components, other.components)))

    def is_zero(self) -> bool:
        return all(is_zero(c) for c in self.components)


def vector_field(chart: Chart, components: Sequence) -> VectorField:
    return VectorField(chart, _vec(components, chart.dim, "vector field"))


def vector_field_bracket(X: VectorField, Y: VectorField) -> VectorField:
    """Commutator of derivations: [X, Y](g) = X(Y(g)) - Y(X(g))."""
    comps = tuple(normalize(sub(X.apply(yk), Y.apply(xk))) for xk, yk in zip(X.components, Y.components))
    return VectorField(X.chart, comps)


def _require(P: PresentedModule, *sections: Section):
    for u in sections:
        if u.presentation is not P:
            raise ValueError("section does not belong to this presentation")


def anchor_of(P: LRPresentation, u: Section) -> VectorField:
    _require(P, u)
    comps = []
    for j in range(P.chart.dim):
        acc = ZERO
        for ui, col in zip(u.coeffs, P.anchor_cols):
            if not is_zero(ui) and not is_zero(col[j]):
                acc = add(acc, mul(ui, col[j]))
        comps.append(normalize(acc))
    return VectorField(P.chart, tuple(comps))


def lie_derivative_scalar(P: LRPresentation, u: Section, g) -> Expr:
    return anchor_of(P, u).apply(as_expr(g))


def bracket_sections(P: LRPresentation, u: Section, v: Section) -> Section:
    """[sum u^i e_i, sum v^j e_j] expanded with the Leibniz rule."""
    _require(P, u, v)
    k = P.rank
    X, Y = anchor_of(P, u), anchor_of(P, v)
    out = []
    for m in range(k):
        acc = ZERO
        for i, ui in enumerate(u.coeffs):
            if is_zero(ui):
                continue
            for j, vj in enumerate(v.coeffs):
                f = P.struct[i][j][m]
                if is_zero(vj) or is_zero(f):
                    continue
                acc = add(acc, mul(mul(ui, vj), f))
        acc = add(acc, X.apply(v.coeffs[m]))
        acc = sub(acc, Y.apply(u.coeffs[m]))
        out.append(normalize(acc))
    return Section(P, tuple(out))


def jacobiator(P: LRPresentation, u: Section, v: Section, w: Section) -> Section:
    br = lambda a, b: bracket_sections(P, a, b)  # noqa: E731
    return br(br(u, v), w) + br(br(v, w), u) + br(br(w, u), v)


def verify_presentation(P: LRPresentation, cfg: ZeroTestConfig | None = None) -> Report:
    """Check Jacobi, anchor homomorphism and compatibility of the relations.

    Families: ``jacobi`` (generator triples, fiberwise modulo relations),
    ``anchor_homomorphism`` (componentwise), ``relation_invariance``
    (brackets of generators with relations stay in the relation span) and
    ``relation_anchor`` (the anchor kills relations).
    """
    from .fibers import fiberwise_zero_coeffs

    cfg = cfg or ZeroTestConfig()
    report = Report(seed=cfg.seed)
    k, g = P.rank, P.gens
    gens = [P.gen(i) for i in range(k)]
    for i in range(k):
        for j in range(i + 1, k):
            for l in range(j + 1, k):
                jac = jacobiator(P, gens[i], gens[j], gens[l])
                verdict = fiberwise_zero_coeffs(P, jac.coeffs, cfg)
                report.add(zero_residual(f"jacobi[{g[i]},{g[j]},{g[l]}]", "jacobi", verdict, cfg.tol))
    rho = [anchor_of(P, e) for e in gens]
    for i in range(k):
        for j in range(i + 1, k):
            lhs = anchor_of(P, bracket_sections(P, gens[i], gens[j]))
            diff = lhs - vector_field_bracket(rho[i], rho[j])
            for c, comp in zip(P.chart.coords, diff.components):
                verdict = is_identically_zero(comp, P.chart, cfg=cfg)
                report.add(
                    zero_residual(f"anchor_homomorphism[{g[i]},{g[j]}].{c}", "anchor_homomorphism", verdict, cfg.tol)
                )
    for r_idx, rel in enumerate(P.relations):
        r = Section(P, rel)
        for c, comp in zip(P.chart.coords, anchor_of(P, r).components):
            verdict = is_identically_zero(comp, P.chart, cfg=cfg)
            report.add(zero_residual(f"relation_anchor[r{r_idx}].{c}", "relation_anchor", verdict, cfg.tol))
        for i in range(k):
            br = bracket_sections(P, gens[i], r)
            verdict = fiberwise_zero_coeffs(P, br.coeffs, cfg)
            report.add(zero_residual(f"relation_invariance[{g[i]},r{r_idx}]", "relation_invariance", verdict, cfg.tol))
    report.data["presentation"] = P.name
    # residual counts per family; a zero count means the family holds vacuously
    families = ("jacobi", "anchor_homomorphism", "relation_invariance", "relation_anchor")
    report.data["families"] = {f: len(report.family(f)) for f in families}
    return report
