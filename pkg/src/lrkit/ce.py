"""Chevalley-Eilenberg differential of a presentation and its inverse.

With dual generators eps^1..eps^k the differential is determined by

    d x_j   = sum_i rho(e_i)_j eps^i
    d eps^m = sum_{i<j} D[m][i][j] eps^i ^ eps^j,   D[m][i][j] = -f_ij^m

and squares to zero exactly when the anchor is a bracket homomorphism and
the Jacobi identity holds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .expr import ZERO, Chart, Expr, ZeroTestConfig, add, differentiate, is_identically_zero, is_zero, mul, neg, normalize
from .presentation import LRPresentation, _vec
from .report import Report, zero_residual

Form = dict[tuple[int, ...], Expr]


@dataclass(frozen=True)
class CEDifferential:
    """``rho[j][i]`` is the eps^i coefficient of d x_j; ``D[m][i][j]`` is antisymmetric in i, j."""

    rho: tuple[tuple[Expr, ...], ...]
    D: tuple[tuple[tuple[Expr, ...], ...], ...]

    def __post_init__(self):
        k = len(self.D)
        for m in range(k):
            if len(self.D[m]) != k or any(len(row) != k for row in self.D[m]):
                raise ValueError("CE tensor must be k x k x k")
            for i in range(k):
                for j in range(i, k):
                    if not is_zero(normalize(add(self.D[m][i][j], self.D[m][j][i]))):
                        raise ValueError(f"CE tensor not antisymmetric at d eps^{m + 1} ({i + 1},{j + 1})")
        for row in self.rho:
            if len(row) != k:
                raise ValueError("anchor transpose has wrong width")

    @property
    def rank(self) -> int:
        return len(self.D)

    def d_coordinate(self, j: int) -> Form:
        return {(i,): c for i, c in enumerate(self.rho[j]) if not is_zero(c)}

    def d_dual(self, m: int) -> Form:
        k = self.rank
        return {(i, j): self.D[m][i][j] for i in range(k) for j in range(i + 1, k) if not is_zero(self.D[m][i][j])}

    def structurally_equal(self, other: "CEDifferential") -> bool:
        return self.rho == other.rho and self.D == other.D


def ce_differential(P: LRPresentation) -> CEDifferential:
    k = P.rank
    rho = tuple(tuple(P.anchor_cols[i][j] for i in range(k)) for j in range(P.chart.dim))
    D = tuple(
        tuple(tuple(normalize(neg(P.struct[i][j][m])) for j in range(k)) for i in range(k)) for m in range(k)
    )
    return CEDifferential(rho, D)


def differential_from_tensors(rho: Sequence[Sequence], D: Sequence[Sequence[Sequence]]) -> CEDifferential:
    k = len(D)
    return CEDifferential(
        tuple(_vec(row, k, "anchor transpose row") for row in rho),
        tuple(tuple(_vec(D[m][i], k, "CE tensor row") for i in range(k)) for m in range(k)),
    )


# -- a small exterior algebra over the dual generators ---------------------


def _wedge_basis(a: tuple[int, ...], b: tuple[int, ...]):
    """Sorted index tuple and sign of eps^a ^ eps^b, or None if it vanishes."""
    idx = list(a + b)
    if len(set(idx)) != len(idx):
        return None
    sign = 1
    for i in range(len(idx)):
        for j in range(len(idx) - 1 - i):
            if idx[j] > idx[j + 1]:
                idx[j], idx[j + 1] = idx[j + 1], idx[j]
                sign = -sign
    return tuple(idx), sign


def _accumulate(out: Form, key, coeff: Expr, sign: int = 1):
    term = coeff if sign > 0 else neg(coeff)
    out[key] = add(out.get(key, ZERO), term)


def _d_function(g: Expr, dce: CEDifferential, chart: Chart) -> Form:
    out: Form = {}
    for i in range(dce.rank):
        acc = ZERO
        for j, c in enumerate(chart.coords):
            if not is_zero(dce.rho[j][i]):
                acc = add(acc, mul(dce.rho[j][i], differentiate(g, c)))
        acc = normalize(acc)
        if not is_zero(acc):
            out[(i,)] = acc
    return out


def _d_form(omega: Form, dce: CEDifferential, chart: Chart) -> Form:
    """Graded Leibniz: d(c eps^I) = dc ^ eps^I + c sum_r (-1)^r eps^.. d eps^{i_r} ..."""
    out: Form = {}
    for I, c in omega.items():
        for J, dc in _d_function(c, dce, chart).items():
            w = _wedge_basis(J, I)
            if w:
                _accumulate(out, w[0], dc, w[1])
        for r, m in enumerate(I):
            sign = -1 if r % 2 else 1
            for K, coeff in dce.d_dual(m).items():
                w = _wedge_basis(I[:r] + K, I[r + 1 :])
                if w:
                    _accumulate(out, w[0], mul(c, coeff), sign * w[1])
    return {key: normalize(v) for key, v in out.items()}


def d_squared_report(dce: CEDifferential, chart: Chart, gens: Sequence[str], cfg: ZeroTestConfig | None = None) -> Report:
    """Zero-test every component of d(d x_j) and d(d eps^m)."""
    cfg = cfg or ZeroTestConfig()
    report = Report(seed=cfg.seed)

    def slot(key):
        return "^".join(gens[i] for i in key)

    for j, c in enumerate(chart.coords):
        dd = _d_form(dce.d_coordinate(j), dce, chart)
        for key in sorted(dd):
            v = is_identically_zero(dd[key], chart, cfg=cfg)
            report.add(zero_residual(f"d2[{c}].{slot(key)}", "d2_coordinates", v, cfg.tol))
    for m in range(dce.rank):
        dd = _d_form(dce.d_dual(m), dce, chart)
        for key in sorted(dd):
            v = is_identically_zero(dd[key], chart, cfg=cfg)
            report.add(zero_residual(f"d2[eps_{gens[m]}].{slot(key)}", "d2_generators", v, cfg.tol))
    return report


def presentation_from_differential(
    dce: CEDifferential,
    chart: Chart,
    gens: Sequence[str],
    cfg: ZeroTestConfig | None = None,
    name: str | None = None,
) -> tuple[LRPresentation, Report]:
    """Read off anchor and brackets from a differential, plus its d^2 report."""
    k = dce.rank
    if len(gens) != k:
        raise ValueError(f"{len(gens)} generator names for a rank {k} differential")
    if len(dce.rho) != chart.dim:
        raise ValueError(f"anchor transpose has {len(dce.rho)} rows, chart has dimension {chart.dim}")
    anchor = [[dce.rho[j][i] for j in range(chart.dim)] for i in range(k)]
    struct = [[[neg(dce.D[m][i][j]) for m in range(k)] for j in range(k)] for i in range(k)]
    P = LRPresentation(chart, gens, anchor, struct, name=name)
    return P, d_squared_report(dce, chart, gens, cfg)


def ce_roundtrip_report(P: LRPresentation, cfg: ZeroTestConfig | None = None) -> Report:
    """d^2 report plus the structural round-trip through the differential."""
    cfg = cfg or ZeroTestConfig()
    dce = ce_differential(P)
    Q, report = presentation_from_differential(dce, P.chart, P.gens, cfg, P.name)
    same = Q.anchor_cols == P.anchor_cols and Q.struct == P.struct and ce_differential(Q).structurally_equal(dce)
    report.add(
        zero_residual(
            "roundtrip",
            "roundtrip",
            _verdict(same),
            cfg.tol,
        )
    )
    return report


def _verdict(flag: bool):
    from .expr import ZeroKind, ZeroVerdict

    return ZeroVerdict(ZeroKind.SYMBOLIC) if flag else ZeroVerdict(ZeroKind.WITNESS, None, 1.0)


def differential_to_dict(dce: CEDifferential, chart: Chart, gens: Sequence[str]) -> dict:
    from .expr import to_string

    return {
        "d_coordinates": {
            c: {gens[i]: to_string(v) for (i,), v in sorted(dce.d_coordinate(j).items())}
            for j, c in enumerate(chart.coords)
        },
        "d_generators": {
            gens[m]: {f"{gens[i]}^{gens[j]}": to_string(v) for (i, j), v in sorted(dce.d_dual(m).items())}
            for m in range(dce.rank)
        },
    }
