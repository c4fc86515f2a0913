"""Morphisms, comorphisms, actions and base change between presentations.

A morphism ``A -> B`` over ``f: X -> Y`` sends each generator ``e_i`` of ``A``
to a section of the pullback ``f*B``; a comorphism sends each generator of
``B`` to a section of ``A`` over ``X``. Both are stored as lists of image
vectors, one per domain generator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .expr import (
    ZERO,
    Chart,
    Expr,
    ZeroKind,
    ZeroTestConfig,
    ZeroVerdict,
    add,
    differentiate,
    is_identically_zero,
    is_zero,
    mul,
    normalize,
    sub,
    substitute,
    to_string,
)
from .fibers import fiberwise_zero_coeffs
from .presentation import (
    LRPresentation,
    PresentedModule,
    Section,
    VectorField,
    _vec,
    anchor_of,
    vector_field_bracket,
    verify_presentation,
)
from .report import Report, zero_residual

Vector = tuple[Expr, ...]


class MorphismError(ValueError):
    """Raised when a map fails a precondition; carries the offending report."""

    def __init__(self, message: str, report: Report | None = None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class BaseMap:
    """A smooth map between charts given by expressions in the source coordinates."""

    source: Chart
    target: Chart
    components: Vector

    def __post_init__(self):
        comps = _vec(self.components, self.target.dim, "base map")
        object.__setattr__(self, "components", comps)

    @property
    def mapping(self) -> dict[str, Expr]:
        return dict(zip(self.target.coords, self.components))

    def pull(self, e: Expr) -> Expr:
        """Precompose a target expression with the map."""
        return normalize(substitute(e, self.mapping))

    def pull_vec(self, v: Sequence[Expr]) -> Vector:
        return tuple(self.pull(c) for c in v)

    def jacobian(self) -> tuple[Vector, ...]:
        return tuple(
            tuple(normalize(differentiate(fq, x)) for x in self.source.coords) for fq in self.components
        )

    def then(self, g: "BaseMap") -> "BaseMap":
        """The composite ``g o self``."""
        _same_chart(self.target, g.source)
        return BaseMap(self.source, g.target, tuple(self.pull(c) for c in g.components))


def base_map(source: Chart, target: Chart, components: Sequence) -> BaseMap:
    return BaseMap(source, target, tuple(components))


def identity_map(chart: Chart) -> BaseMap:
    from .expr import Sym

    return BaseMap(chart, chart, tuple(Sym(c) for c in chart.coords))


def _same_chart(a: Chart, b: Chart):
    if a.coords != b.coords:
        raise MorphismError(f"chart mismatch: {list(a.coords)} vs {list(b.coords)}")


def pullback_module(B: PresentedModule, f: BaseMap) -> PresentedModule:
    """``f*B``: generators ``1 (x) e_j``, relations precomposed with ``f``."""
    _same_chart(B.chart, f.target)
    return PresentedModule(f.source, B.gens, [f.pull_vec(r) for r in B.relations])


def _pulled_lie(f: BaseMap, B: LRPresentation, coeffs: Sequence[Expr], q: int) -> Expr:
    """sum_j coeffs^j * (rho_B(e_j)_q o f)."""
    acc = ZERO
    for c, col in zip(coeffs, B.anchor_cols):
        if not is_zero(c) and not is_zero(col[q]):
            acc = add(acc, mul(c, f.pull(col[q])))
    return acc


def _pulled_bracket(f: BaseMap, B: LRPresentation, c: Sequence[Expr], d: Sequence[Expr]) -> list[Expr]:
    """sum_{p,q} c^p d^q (f_pq^m o f) for every m."""
    out = []
    for m in range(B.rank):
        acc = ZERO
        for p, cp in enumerate(c):
            if is_zero(cp):
                continue
            for q, dq in enumerate(d):
                s = B.struct[p][q][m]
                if is_zero(dq) or is_zero(s):
                    continue
                acc = add(acc, mul(mul(cp, dq), f.pull(s)))
        out.append(acc)
    return out


# ---------------------------------------------------------------------------
# Morphisms


@dataclass(frozen=True)
class LRMorphism:
    """``images[i]`` holds the coefficients of ``F(e_i)`` in the generators ``1 (x) e~_j``."""

    base: BaseMap
    images: tuple[Vector, ...]

    @property
    def matrix(self) -> tuple[Vector, ...]:
        """l x k matrix with ``matrix[j][i] = F^j_i``."""
        if not self.images:
            return ()
        return tuple(tuple(col[j] for col in self.images) for j in range(len(self.images[0])))

    def equals(self, other: "LRMorphism") -> bool:
        return (
            self.base.source.coords == other.base.source.coords
            and self.base.target.coords == other.base.target.coords
            and all(is_zero(normalize(sub(a, b))) for a, b in zip(self.base.components, other.base.components))
            and len(self.images) == len(other.images)
            and all(
                is_zero(normalize(sub(a, b))) for u, v in zip(self.images, other.images) for a, b in zip(u, v)
            )
        )


def lr_morphism(A: LRPresentation, B: LRPresentation, f: BaseMap, images: Sequence[Sequence]) -> LRMorphism:
    _same_chart(A.chart, f.source)
    _same_chart(B.chart, f.target)
    if len(images) != A.rank:
        raise MorphismError(f"morphism needs {A.rank} images, got {len(images)}")
    return LRMorphism(f, tuple(_vec(v, B.rank, "morphism image") for v in images))


def identity_morphism(A: LRPresentation) -> LRMorphism:
    k = A.rank
    return LRMorphism(identity_map(A.chart), tuple(_vec([1 if j == i else 0 for j in range(k)]) for i in range(k)))


def _lie(A: LRPresentation, i: int, g: Expr) -> Expr:
    return anchor_of(A, A.gen(i)).apply(g)


def check_lr_morphism(F: LRMorphism, A: LRPresentation, B: LRPresentation, cfg: ZeroTestConfig | None = None) -> Report:
    """Anchor and bracket compatibility of a morphism.

    ``anchor``: ``Jf rho_A(e_i) - sum_j F^j_i (rho_B(e~_j) o f)``, componentwise.
    ``bracket``: ``F([e_i, e_i'])`` against the Leibniz expansion of
    ``[F e_i, F e_i']`` in ``f*B``, fiberwise modulo the pulled-back relations.
    """
    cfg = cfg or ZeroTestConfig()
    f = F.base
    X = A.chart
    report = Report(seed=cfg.seed)
    J = f.jacobian()
    for i in range(A.rank):
        rho = A.anchor_cols[i]
        for q, yq in enumerate(f.target.coords):
            push = ZERO
            for p in range(X.dim):
                push = add(push, mul(J[q][p], rho[p]))
            resid = sub(push, _pulled_lie(f, B, F.images[i], q))
            v = is_identically_zero(resid, X, cfg=cfg)
            report.add(zero_residual(f"anchor[{A.gens[i]}].{yq}", "anchor", v, cfg.tol))
    pulled = pullback_module(B, f)
    for i in range(A.rank):
        for i2 in range(i + 1, A.rank):
            c, d = F.images[i], F.images[i2]
            expansion = _pulled_bracket(f, B, c, d)
            resid = []
            for j in range(B.rank):
                lhs = ZERO
                for m in range(A.rank):
                    s = A.struct[i][i2][m]
                    if not is_zero(s):
                        lhs = add(lhs, mul(s, F.images[m][j]))
                rhs = add(expansion[j], sub(_lie(A, i, d[j]), _lie(A, i2, c[j])))
                resid.append(sub(lhs, rhs))
            v = fiberwise_zero_coeffs(pulled, resid, cfg)
            report.add(zero_residual(f"bracket[{A.gens[i]},{A.gens[i2]}]", "bracket", v, cfg.tol))
    return report


def compose_morphisms(F1: LRMorphism, F2: LRMorphism) -> LRMorphism:
    """``F2 o F1`` over ``g o f``: matrix ``(F2 o f) . F1``."""
    f = F1.base
    base = f.then(F2.base)
    images = []
    for col in F1.images:
        if len(col) != len(F2.images):
            raise MorphismError("morphisms are not composable: generator counts differ")
        out = []
        for m in range(len(F2.images[0]) if F2.images else 0):
            acc = ZERO
            for j, cj in enumerate(col):
                if not is_zero(cj):
                    acc = add(acc, mul(cj, f.pull(F2.images[j][m])))
            out.append(normalize(acc))
        images.append(tuple(out))
    return LRMorphism(base, tuple(images))


# ---------------------------------------------------------------------------
# Comorphisms


@dataclass(frozen=True)
class LRComorphism:
    """``images[j]`` holds the ``A``-coefficients of ``G(e~_j)``, a section over ``X``."""

    base: BaseMap
    images: tuple[Vector, ...]

    @property
    def matrix(self) -> tuple[Vector, ...]:
        """k x l matrix with ``matrix[i][j]`` the ``e_i`` coefficient of ``G(e~_j)``."""
        if not self.images:
            return ()
        return tuple(tuple(col[i] for col in self.images) for i in range(len(self.images[0])))


def lr_comorphism(A: LRPresentation, B: LRPresentation, f: BaseMap, images: Sequence[Sequence]) -> LRComorphism:
    _same_chart(A.chart, f.source)
    _same_chart(B.chart, f.target)
    if len(images) != B.rank:
        raise MorphismError(f"comorphism needs {B.rank} images, got {len(images)}")
    return LRComorphism(f, tuple(_vec(v, A.rank, "comorphism image") for v in images))


def check_lr_comorphism(
    G: LRComorphism, A: LRPresentation, B: LRPresentation, cfg: ZeroTestConfig | None = None
) -> Report:
    """Anchor, bracket and relation compatibility of a comorphism.

    ``anchor``: ``(rho_B(e~_j)_p) o f - L_{G e~_j}(f_p)``.
    ``bracket``: ``G([e~_j, e~_j']) - [G e~_j, G e~_j']`` fiberwise in ``A``.
    ``relations``: images of the relations of ``B`` lie fiberwise in those of ``A``.
    """
    from .presentation import bracket_sections

    cfg = cfg or ZeroTestConfig()
    f = G.base
    report = Report(seed=cfg.seed)
    secs = [Section(A, col) for col in G.images]
    fields = [anchor_of(A, s) for s in secs]
    for j in range(B.rank):
        for p, yp in enumerate(f.target.coords):
            resid = sub(f.pull(B.anchor_cols[j][p]), fields[j].apply(f.components[p]))
            v = is_identically_zero(resid, A.chart, cfg=cfg)
            report.add(zero_residual(f"anchor[{B.gens[j]}].{yp}", "anchor", v, cfg.tol))

    def image(coeffs: Sequence[Expr]) -> list[Expr]:
        out = []
        for i in range(A.rank):
            acc = ZERO
            for m, c in enumerate(coeffs):
                if not is_zero(c) and not is_zero(G.images[m][i]):
                    acc = add(acc, mul(c, G.images[m][i]))
            out.append(acc)
        return out

    for j in range(B.rank):
        for j2 in range(j + 1, B.rank):
            lhs = image([f.pull(s) for s in B.struct[j][j2]])
            rhs = bracket_sections(A, secs[j], secs[j2]).coeffs
            v = fiberwise_zero_coeffs(A, [sub(a, b) for a, b in zip(lhs, rhs)], cfg)
            report.add(zero_residual(f"bracket[{B.gens[j]},{B.gens[j2]}]", "bracket", v, cfg.tol))
    for r_idx, rel in enumerate(B.relations):
        v = fiberwise_zero_coeffs(A, image(f.pull_vec(rel)), cfg)
        report.add(zero_residual(f"relations[r{r_idx}]", "relations", v, cfg.tol))
    return report


# ---------------------------------------------------------------------------
# Actions


@dataclass(frozen=True)
class ActionData:
    """Vector fields on ``Y`` assigned to the generators of ``A`` over ``X``; ``base: Y -> X``."""

    base: BaseMap
    fields: tuple[VectorField, ...]


def action_data(A: LRPresentation, f: BaseMap, fields: Sequence[Sequence]) -> ActionData:
    _same_chart(A.chart, f.target)
    if len(fields) != A.rank:
        raise MorphismError(f"action needs {A.rank} vector fields, got {len(fields)}")
    return ActionData(f, tuple(VectorField(f.source, _vec(v, f.source.dim, "action field")) for v in fields))


def action_report(A: LRPresentation, act: ActionData, cfg: ZeroTestConfig | None = None) -> Report:
    """Residuals that make ``act`` a well-defined action.

    ``action_bracket``: ``act([e_i,e_j]) - [act e_i, act e_j]``;
    ``action_anchor``: ``df(act e_i) - rho_A(e_i) o f`` (only when ``X`` has coordinates);
    ``action_relations``: relations act by zero.
    """
    cfg = cfg or ZeroTestConfig()
    f = act.base
    Y = f.source
    report = Report(seed=cfg.seed)

    def combo(coeffs: Sequence[Expr]) -> list[Expr]:
        out = []
        for q in range(Y.dim):
            acc = ZERO
            for c, X in zip(coeffs, act.fields):
                if not is_zero(c) and not is_zero(X.components[q]):
                    acc = add(acc, mul(c, X.components[q]))
            out.append(acc)
        return out

    for i in range(A.rank):
        for j in range(i + 1, A.rank):
            lhs = combo([f.pull(s) for s in A.struct[i][j]])
            rhs = vector_field_bracket(act.fields[i], act.fields[j]).components
            for q, yq in enumerate(Y.coords):
                v = is_identically_zero(sub(lhs[q], rhs[q]), Y, cfg=cfg)
                report.add(zero_residual(f"action_bracket[{A.gens[i]},{A.gens[j]}].{yq}", "action_bracket", v, cfg.tol))
    for i in range(A.rank):
        for p, xp in enumerate(f.target.coords):
            resid = sub(act.fields[i].apply(f.components[p]), f.pull(A.anchor_cols[i][p]))
            v = is_identically_zero(resid, Y, cfg=cfg)
            report.add(zero_residual(f"action_anchor[{A.gens[i]}].{xp}", "action_anchor", v, cfg.tol))
    for r_idx, rel in enumerate(A.relations):
        for q, yq in enumerate(Y.coords):
            v = is_identically_zero(combo(f.pull_vec(rel))[q], Y, cfg=cfg)
            report.add(zero_residual(f"action_relations[r{r_idx}].{yq}", "action_relations", v, cfg.tol))
    return report


def induced_action_structure(
    A: LRPresentation, act: ActionData, cfg: ZeroTestConfig | None = None, name: str | None = None
) -> LRPresentation:
    """The structure on ``Y`` with generators ``1 (x) e_i``, anchors ``act(e_i)``
    and structure functions ``f_ij^m o f``; raises if the action is inconsistent."""
    report = action_report(A, act, cfg)
    if not report.ok:
        bad = report.failures()[0]
        raise MorphismError(f"action residual {bad.name} fails at {bad.point}", report)
    f = act.base
    k = A.rank
    struct = [[[f.pull(A.struct[i][j][m]) for m in range(k)] for j in range(k)] for i in range(k)]
    return LRPresentation(
        f.source,
        A.gens,
        [X.components for X in act.fields],
        struct,
        [f.pull_vec(r) for r in A.relations],
        name or f"{A.name}_action",
    )


# ---------------------------------------------------------------------------
# Base change


@dataclass(frozen=True)
class BaseChangeElement:
    """A vector field on ``X`` paired with coefficients in ``f*B``."""

    vf: VectorField
    coeffs: Vector

    def __str__(self):
        return f"([{', '.join(to_string(c) for c in self.vf.components)}], [{', '.join(to_string(c) for c in self.coeffs)}])"

    def is_zero(self) -> bool:
        return self.vf.is_zero() and all(is_zero(c) for c in self.coeffs)


def base_change_element(f: BaseMap, B: LRPresentation, vf: Sequence, coeffs: Sequence) -> BaseChangeElement:
    return BaseChangeElement(VectorField(f.source, _vec(vf, f.source.dim, "vector field")), _vec(coeffs, B.rank, "coefficients"))


def base_change_membership_report(
    p: BaseChangeElement, f: BaseMap, B: LRPresentation, cfg: ZeroTestConfig | None = None, label: str = "p"
) -> Report:
    """``vf(f_q) - sum_j coeffs^j (rho_B(e~_j)_q o f)`` for every target coordinate."""
    cfg = cfg or ZeroTestConfig()
    report = Report(seed=cfg.seed)
    for q, yq in enumerate(f.target.coords):
        resid = sub(p.vf.apply(f.components[q]), _pulled_lie(f, B, p.coeffs, q))
        v = is_identically_zero(resid, f.source, cfg=cfg)
        report.add(zero_residual(f"membership[{label}].{yq}", "membership", v, cfg.tol))
    return report


def base_change_membership(p: BaseChangeElement, f: BaseMap, B: LRPresentation, cfg: ZeroTestConfig | None = None) -> ZeroVerdict:
    """Single verdict: the first witness, or the weakest passing kind."""
    kinds = []
    for r in base_change_membership_report(p, f, B, cfg).residuals:
        if not r.passed:
            return ZeroVerdict(ZeroKind.WITNESS, r.point, r.value)
        kinds.append(r.verdict)
    return ZeroVerdict(ZeroKind.SAMPLED if ZeroKind.SAMPLED.value in kinds else ZeroKind.SYMBOLIC)


def base_change_bracket(
    p: BaseChangeElement,
    q: BaseChangeElement,
    f: BaseMap,
    B: LRPresentation,
    cfg: ZeroTestConfig | None = None,
    check: bool = True,
) -> BaseChangeElement:
    """``([D, D'], sum c^i d^j [e_i, e_j] o f + D(d) - D'(c))``."""
    if check:
        for label, el in (("p", p), ("q", q)):
            v = base_change_membership(el, f, B, cfg)
            if not v.is_zero:
                raise MorphismError(f"{label} is not a base-change member (witness at {v.point})")
    vf = vector_field_bracket(p.vf, q.vf)
    expansion = _pulled_bracket(f, B, p.coeffs, q.coeffs)
    coeffs = tuple(
        normalize(add(expansion[m], sub(p.vf.apply(q.coeffs[m]), q.vf.apply(p.coeffs[m])))) for m in range(B.rank)
    )
    return BaseChangeElement(vf, coeffs)


def base_change_jacobi_report(
    elements: Sequence[BaseChangeElement], f: BaseMap, B: LRPresentation, cfg: ZeroTestConfig | None = None
) -> Report:
    """Membership of all pairwise brackets and Jacobi on every triple."""
    cfg = cfg or ZeroTestConfig()
    report = Report(seed=cfg.seed)
    pulled = pullback_module(B, f)
    n = len(elements)

    def br(a, b):
        return base_change_bracket(a, b, f, B, cfg, check=False)

    for i in range(n):
        for j in range(i + 1, n):
            report.extend(base_change_membership_report(br(elements[i], elements[j]), f, B, cfg, f"p{i},p{j}").residuals)
    for i in range(n):
        for j in range(i + 1, n):
            for l in range(j + 1, n):
                a, b, c = elements[i], elements[j], elements[l]
                terms = [br(br(a, b), c), br(br(b, c), a), br(br(c, a), b)]
                vf = [add(add(t0, t1), t2) for t0, t1, t2 in zip(*(t.vf.components for t in terms))]
                for comp, x in zip(vf, f.source.coords):
                    v = is_identically_zero(comp, f.source, cfg=cfg)
                    report.add(zero_residual(f"jacobi_vf[p{i},p{j},p{l}].{x}", "jacobi", v, cfg.tol))
                coeffs = [add(add(t0, t1), t2) for t0, t1, t2 in zip(*(t.coeffs for t in terms))]
                v = fiberwise_zero_coeffs(pulled, coeffs, cfg)
                report.add(zero_residual(f"jacobi_coeffs[p{i},p{j},p{l}]", "jacobi", v, cfg.tol))
    return report


# ---------------------------------------------------------------------------
# Factorizations


@dataclass
class MorphismFactorization:
    """``elements[i] = (rho_A(e_i), F(e_i))`` in the base change; projection drops the field."""

    elements: list[BaseChangeElement]
    report: Report

    def project(self) -> list[Vector]:
        return [el.coeffs for el in self.elements]


def factor_morphism(F: LRMorphism, A: LRPresentation, B: LRPresentation, cfg: ZeroTestConfig | None = None) -> MorphismFactorization:
    """Factor a morphism through the base change of ``B`` along its base map."""
    cfg = cfg or ZeroTestConfig()
    check = check_lr_morphism(F, A, B, cfg)
    if not check.ok:
        raise MorphismError("morphism report is not clean", check)
    report = Report(seed=cfg.seed)
    elements = []
    for i in range(A.rank):
        el = BaseChangeElement(anchor_of(A, A.gen(i)), F.images[i])
        elements.append(el)
        report.extend(base_change_membership_report(el, F.base, B, cfg, A.gens[i]).residuals)
    for i, el in enumerate(elements):
        for j, (a, b) in enumerate(zip(el.coeffs, F.images[i])):
            v = is_identically_zero(sub(a, b), A.chart, cfg=cfg)
            report.add(zero_residual(f"projection[{A.gens[i]}].{B.gens[j]}", "projection", v, cfg.tol))
    return MorphismFactorization(elements, report)


@dataclass
class ComorphismFactorization:
    """``unit`` maps ``e~_j`` to ``1 (x) e~_j``; ``G_bar(s (x) e~_j) = s G(e~_j)``."""

    unit: tuple[Vector, ...]
    G_bar: tuple[Vector, ...]
    induced: LRPresentation
    report: Report

    def compose(self) -> list[Vector]:
        """``G_bar o unit`` as image vectors, one per generator of ``B``."""
        out = []
        for u in self.unit:
            col = []
            for i in range(len(self.G_bar[0]) if self.G_bar else 0):
                acc = ZERO
                for j, c in enumerate(u):
                    if not is_zero(c):
                        acc = add(acc, mul(c, self.G_bar[j][i]))
                col.append(normalize(acc))
            out.append(tuple(col))
        return out


def factor_comorphism(
    G: LRComorphism, A: LRPresentation, B: LRPresentation, cfg: ZeroTestConfig | None = None
) -> ComorphismFactorization:
    """Factor a comorphism through the induced structure on ``f*B``.

    The induced structure is the action structure of ``B`` on ``X`` by the
    fields ``rho_A(G e~_j)``; ``G_bar`` is then a morphism over the identity.
    """
    cfg = cfg or ZeroTestConfig()
    check = check_lr_comorphism(G, A, B, cfg)
    if not check.ok:
        raise MorphismError("comorphism report is not clean", check)
    l = B.rank
    unit = tuple(_vec([1 if m == j else 0 for m in range(l)]) for j in range(l))
    G_bar = G.images
    act = ActionData(G.base, tuple(anchor_of(A, Section(A, col)) for col in G.images))
    induced = induced_action_structure(B, act, cfg, name=f"{B.name}_pullback")
    report = Report(seed=cfg.seed)
    fac = ComorphismFactorization(unit, G_bar, induced, report)
    for j, (got, want) in enumerate(zip(fac.compose(), G.images)):
        for i, (a, b) in enumerate(zip(got, want)):
            v = is_identically_zero(sub(a, b), A.chart, cfg=cfg)
            report.add(zero_residual(f"composition[{B.gens[j]}].{A.gens[i]}", "composition", v, cfg.tol))
    report.extend(verify_presentation(induced, cfg).residuals)
    G_bar_morphism = LRMorphism(identity_map(A.chart), G_bar)
    for r in check_lr_morphism(G_bar_morphism, induced, A, cfg).residuals:
        r.family = f"gbar_{r.family}"
        report.add(r)
    return fac
