"""Line-oriented text formats for structures, paths, squares, models,
morphisms, comorphisms and base-change data.

Every format uses ``#`` comments and one declaration per line. Paths inside
morphism files are resolved relative to the file that names them.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .expr import Chart, Expr, ExprError, ParseError, differentiate, evaluate, free_symbols, is_zero, normalize, parse_expr, point_chart, substitute, to_string
from .presentation import LRPresentation

IDENT = r"[A-Za-z_][A-Za-z0-9_]*"


class FormatError(ExprError):
    """Malformed file content; the message names the line."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        where = ""
        if source:
            where += f"{source}:"
        if line is not None:
            where += f"line {line}: "
        elif where:
            where += " "
        super().__init__(where + message)
        self.line = line


def _lines(text: str):
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield no, line


def split_top(text: str, sep: str = ",") -> list[str]:
    """Split on ``sep`` outside parentheses and brackets."""
    out, depth, cur = [], 0, []
    for ch in text:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
            if depth < 0:
                raise ValueError("unbalanced brackets")
        if ch == sep and depth == 0:
            out.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    if depth != 0:
        raise ValueError("unbalanced brackets")
    tail = "".join(cur).strip()
    if tail or out:
        out.append(tail)
    return out


def _bracketed(text: str) -> str:
    text = text.strip()
    if not (text.startswith("[") and text.endswith("]")):
        raise ValueError(f"expected [...], got '{text}'")
    return text[1:-1]


def parse_list(text: str) -> list[str]:
    inner = _bracketed(text).strip()
    if not inner:
        return []
    items = split_top(inner)
    if any(not it for it in items):
        raise ValueError("empty list entry")
    return items


def parse_vector(text: str, chart: Chart, params: Sequence[str] = ()) -> list[Expr]:
    return [parse_expr(item, chart, params) for item in parse_list(text)]


def parse_section(text: str, P: LRPresentation, params: Sequence[str] = ()) -> list[Expr]:
    """A section as ``[c1, ..., ck]`` or as a combination such as ``x*e1 - e2``."""
    if text.strip().startswith("["):
        vec = parse_vector(text, P.chart, params)
        if len(vec) != P.rank:
            raise ValueError(f"section has {len(vec)} entries, expected {P.rank}")
        return vec
    return parse_linear_combination(text, P.chart, P.gens, params)


def parse_point(text: str) -> list[float]:
    """``1,0,0`` or ``[1, 0, 0]``; entries may be constant expressions such as ``pi/2``."""
    text = text.strip()
    if text.startswith("["):
        items = parse_list(text)
    else:
        items = [s for s in split_top(text)] if text else []
    return [constant_value(s) for s in items]


def constant_value(text: str) -> float:
    e = parse_expr(text.strip(), point_chart())
    return evaluate(e, point_chart(), [])


def _with_line(fn, no: int, source: str | None):
    try:
        return fn()
    except ParseError as exc:
        raise FormatError(str(exc), no, source) from None
    except (ExprError, ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
        raise FormatError(str(msg), no, source) from None


# ---------------------------------------------------------------------------
# Structures


def parse_linear_combination(text: str, chart: Chart, gens: Sequence[str], params: Sequence[str] = ()) -> list[Expr]:
    """Coefficients of ``sum expr*gen``; the right side must be linear in the generators."""
    e = normalize(parse_expr(text, chart, tuple(gens) + tuple(params)))
    coeffs = [normalize(differentiate(e, g)) for g in gens]
    zero_gens = {g: 0 for g in gens}
    rest = normalize(substitute(e, zero_gens))
    if not is_zero(rest):
        raise ValueError(f"term '{to_string(rest)}' does not multiply a generator")
    for c in coeffs:
        if free_symbols(c) & set(gens):
            raise ValueError("bracket right-hand side must be linear in the generators")
    return coeffs


_SPACE = re.compile(rf"^space\s+({IDENT})\s+coords\s+(\[.*\])$")
_BOX = re.compile(r"^box\s+(\[.*\])$")
_GENS = re.compile(r"^generators\s+(\[.*\])$")
_ANCHOR = re.compile(rf"^anchor\s+({IDENT})\s*=\s*(\[.*\])$")
_BRACKET = re.compile(rf"^bracket\s*\[\s*({IDENT})\s*,\s*({IDENT})\s*\]\s*=\s*(.+)$")
_RELATION = re.compile(r"^relation\s+(\[.*\])$")


def _parse_box(text: str):
    return [tuple(parse_point(iv)) for iv in parse_list(text)]


def parse_structure_file(text: str, source: str | None = None) -> LRPresentation:
    """Parse the ``.lrs`` grammar (``space``, optional ``box``, ``generators``,
    ``anchor``, ``bracket``, ``relation`` lines)."""
    name = coords = box = gens = None
    anchors: dict[str, list[Expr]] = {}
    brackets: dict[tuple[str, str], list[Expr]] = {}
    relations: list[list[Expr]] = []
    chart = None
    for no, line in _lines(text):
        if m := _SPACE.match(line):
            if name is not None:
                raise FormatError("duplicate space line", no, source)
            name = m.group(1)
            coords = _with_line(lambda: [c.strip() for c in parse_list(m.group(2))], no, source)
            for c in coords:
                if not re.fullmatch(IDENT, c):
                    raise FormatError(f"bad coordinate name '{c}'", no, source)
            continue
        if m := _BOX.match(line):
            if name is None:
                raise FormatError("box before space", no, source)
            box = _with_line(lambda: _parse_box(m.group(1)), no, source)
            continue
        if chart is None and name is not None:
            chart = _with_line(lambda: Chart(name, tuple(coords), box), no, source)
        if m := _GENS.match(line):
            if chart is None:
                raise FormatError("generators before space", no, source)
            if gens is not None:
                raise FormatError("duplicate generators line", no, source)
            gens = _with_line(lambda: [g.strip() for g in parse_list(m.group(1))], no, source)
            for g in gens:
                if not re.fullmatch(IDENT, g):
                    raise FormatError(f"bad generator name '{g}'", no, source)
                if g in chart.coords:
                    raise FormatError(f"generator '{g}' clashes with a coordinate", no, source)
            if len(set(gens)) != len(gens):
                raise FormatError("duplicate generator names", no, source)
            continue
        if gens is None:
            raise FormatError(f"expected space/generators before '{line}'", no, source)
        if m := _ANCHOR.match(line):
            g = m.group(1)
            if g not in gens:
                raise FormatError(f"unknown generator '{g}'", no, source)
            if g in anchors:
                raise FormatError(f"duplicate anchor for '{g}'", no, source)
            vec = _with_line(lambda: parse_vector(m.group(2), chart), no, source)
            if len(vec) != chart.dim:
                raise FormatError(f"anchor of '{g}' has {len(vec)} entries, expected {chart.dim}", no, source)
            anchors[g] = vec
        elif m := _BRACKET.match(line):
            a, b = m.group(1), m.group(2)
            for g in (a, b):
                if g not in gens:
                    raise FormatError(f"unknown generator '{g}'", no, source)
            vec = _with_line(lambda: parse_linear_combination(m.group(3), chart, gens), no, source)
            if a == b:
                if any(not is_zero(v) for v in vec):
                    raise FormatError(f"diagonal bracket [{a},{a}] must be omitted or zero", no, source)
                continue
            if (a, b) in brackets:
                raise FormatError(f"duplicate bracket [{a},{b}]", no, source)
            if (b, a) in brackets:
                other = brackets[(b, a)]
                if any(not is_zero(normalize(x + y)) for x, y in zip(other, vec)):
                    raise FormatError(f"bracket [{a},{b}] contradicts [{b},{a}]", no, source)
                continue
            brackets[(a, b)] = vec
        elif m := _RELATION.match(line):
            vec = _with_line(lambda: parse_vector(m.group(1), chart), no, source)
            if len(vec) != len(gens):
                raise FormatError(f"relation has {len(vec)} entries, expected {len(gens)}", no, source)
            relations.append(vec)
        else:
            raise FormatError(f"unrecognized line '{line}'", no, source)
    if name is None:
        raise FormatError("missing space line", None, source)
    if chart is None:
        chart = Chart(name, tuple(coords), box)
    if gens is None:
        raise FormatError("missing generators line", None, source)
    try:
        return LRPresentation.from_brackets(chart, gens, anchors, brackets, relations, name)
    except (ValueError, KeyError) as exc:
        raise FormatError(str(exc), None, source) from None


def _fmt_vec(v: Sequence[Expr]) -> str:
    return "[" + ", ".join(to_string(e) for e in v) + "]"


def _fmt_num(x: float) -> str:
    return repr(float(x))


def _fmt_combination(vec: Sequence[Expr], gens: Sequence[str]) -> str:
    out = ""
    for c, g in zip(vec, gens):
        if is_zero(c):
            continue
        text = to_string(c)
        if text in ("1", "-1"):
            sign, term = ("-" if text == "-1" else "+"), g
        else:
            sign, term = "+", f"({text})*{g}"
        out += (f" {sign} " if out else ("-" if sign == "-" else "")) + term
    return out or "0"


def print_structure(P: LRPresentation) -> str:
    chart = P.chart
    lines = [f"space {P.name} coords [{', '.join(chart.coords)}]"]
    if chart.dim:
        lines.append("box [" + ", ".join(f"[{_fmt_num(lo)}, {_fmt_num(hi)}]" for lo, hi in chart.sample_box) + "]")
    lines.append(f"generators [{', '.join(P.gens)}]")
    for g, col in zip(P.gens, P.anchor_cols):
        if chart.dim:
            lines.append(f"anchor {g} = {_fmt_vec(col)}")
    k = P.rank
    for i in range(k):
        for j in range(i + 1, k):
            vec = P.struct[i][j]
            if any(not is_zero(v) for v in vec):
                lines.append(f"bracket [{P.gens[i]}, {P.gens[j]}] = {_fmt_combination(vec, P.gens)}")
    for rel in P.relations:
        lines.append(f"relation {_fmt_vec(rel)}")
    return "\n".join(lines) + "\n"


def read_text(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def load_structure(path: str) -> LRPresentation:
    return parse_structure_file(read_text(path), path)


# ---------------------------------------------------------------------------
# Paths and squares


_ASSIGN = re.compile(rf"^({IDENT})\s*=\s*(\[.*\])$")
_PIECE = re.compile(r"^piece\s+(\[.*\])$")


def parse_path_file(text: str, P: LRPresentation, source: str | None = None):
    """``gamma = [...]`` and ``a = [...]`` in ``t``; ``piece [t0, t1]`` lines
    start further pieces of a piecewise path."""
    from .homotopy import LRPath, PathPiece

    pieces: list[dict] = []
    current: dict = {"span": (0.0, 1.0)}
    explicit = False
    for no, line in _lines(text):
        if m := _PIECE.match(line):
            span = _with_line(lambda: parse_point(m.group(1)), no, source)
            if len(span) != 2:
                raise FormatError("piece needs [t0, t1]", no, source)
            if explicit or len(current) > 1:
                pieces.append(current)
            current = {"span": tuple(span)}
            explicit = True
            continue
        m = _ASSIGN.match(line)
        if not m or m.group(1) not in ("gamma", "a"):
            raise FormatError(f"unrecognized line '{line}'", no, source)
        key = m.group(1)
        if key in current:
            raise FormatError(f"duplicate '{key}'", no, source)
        vec = _with_line(lambda: parse_vector(m.group(2), P.chart, ("t",)), no, source)
        want = P.chart.dim if key == "gamma" else P.rank
        if len(vec) != want:
            raise FormatError(f"'{key}' has {len(vec)} entries, expected {want}", no, source)
        current[key] = tuple(normalize(e) for e in vec)
    pieces.append(current)
    out = []
    for pc in pieces:
        if "a" not in pc or ("gamma" not in pc and P.chart.dim):
            raise FormatError("path needs both gamma and a", None, source)
        out.append(PathPiece(float(pc["span"][0]), float(pc["span"][1]), pc.get("gamma", ()), pc["a"]))
    try:
        return LRPath(P, tuple(out))
    except ValueError as exc:
        raise FormatError(str(exc), None, source) from None


def print_path(path) -> str:
    lines = []
    single = len(path.pieces) == 1
    for pc in path.pieces:
        if not single:
            lines.append(f"piece [{_fmt_num(pc.t0)}, {_fmt_num(pc.t1)}]")
        lines.append(f"gamma = {_fmt_vec(pc.gamma)}")
        lines.append(f"a = {_fmt_vec(pc.a)}")
    return "\n".join(lines) + "\n"


def parse_square_file(text: str, P: LRPresentation, source: str | None = None):
    from .homotopy import LRSquare

    found: dict[str, tuple[Expr, ...]] = {}
    for no, line in _lines(text):
        m = _ASSIGN.match(line)
        if not m or m.group(1) not in ("gamma", "a_s", "a_t"):
            raise FormatError(f"unrecognized line '{line}'", no, source)
        key = m.group(1)
        if key in found:
            raise FormatError(f"duplicate '{key}'", no, source)
        vec = _with_line(lambda: parse_vector(m.group(2), P.chart, ("s", "t")), no, source)
        want = P.chart.dim if key == "gamma" else P.rank
        if len(vec) != want:
            raise FormatError(f"'{key}' has {len(vec)} entries, expected {want}", no, source)
        found[key] = tuple(normalize(e) for e in vec)
    if P.chart.dim == 0:
        found.setdefault("gamma", ())
    missing = {"gamma", "a_s", "a_t"} - set(found)
    if missing:
        raise FormatError(f"square file lacks {sorted(missing)}", None, source)
    return LRSquare(P, found["gamma"], found["a_s"], found["a_t"])


# ---------------------------------------------------------------------------
# Matrix models


_MATRIX = re.compile(rf"^matrix\s+({IDENT})\s*=\s*(\[.*\])$")


def parse_model_file(text: str, P: LRPresentation, source: str | None = None):
    from .homotopy import MatrixAlgebraModel, ModelError

    mats: dict[str, np.ndarray] = {}
    for no, line in _lines(text):
        m = _MATRIX.match(line)
        if not m:
            raise FormatError(f"unrecognized line '{line}'", no, source)
        g = m.group(1)
        if g not in P.gens:
            raise FormatError(f"unknown generator '{g}'", no, source)
        if g in mats:
            raise FormatError(f"duplicate matrix for '{g}'", no, source)
        rows = _with_line(lambda: [parse_point(r) for r in parse_list(m.group(2))], no, source)
        if not rows or any(len(r) != len(rows) for r in rows):
            raise FormatError(f"matrix for '{g}' must be square", no, source)
        mats[g] = np.array(rows, dtype=float)
    try:
        return MatrixAlgebraModel(P, mats)
    except ModelError as exc:
        raise FormatError(str(exc), None, source) from None


# ---------------------------------------------------------------------------
# Morphisms, comorphisms, base change


@dataclass
class MapFile:
    kind: str
    source: LRPresentation
    target: LRPresentation
    base: tuple[Expr, ...]
    images: dict[str, list[Expr]] = field(default_factory=dict)
    elements: dict[str, tuple[list[Expr], list[Expr]]] = field(default_factory=dict)
    chart: Chart | None = None


_REF = re.compile(r"^(source|target)\s+(\S+)$")
_BASE = re.compile(r"^base\s+(\[.*\])$")
_IMAGE = re.compile(rf"^image\s+({IDENT})\s*=\s*(\[.*\])$")
_ELEMENT = re.compile(rf"^element\s+({IDENT})\s*=\s*vf\s+(\[.*\])\s+coeffs\s+(\[.*\])$")


def _resolve(ref: str, source: str | None) -> str:
    if os.path.isabs(ref) or not source:
        return ref
    return os.path.join(os.path.dirname(source), ref)


def parse_map_file(text: str, kind: str, source: str | None = None) -> MapFile:
    """Morphism (``.lrm``), comorphism (``.lrc``) or base-change (``.lrb``) file.

    ``.lrm``/``.lrc``: ``source FILE``, ``target FILE``, ``base [...]`` (target
    coordinates as expressions in the source coordinates) and one
    ``image GEN = [...]`` per domain generator. ``.lrb``: ``space`` line for
    the source chart, ``target FILE``, ``base [...]`` and
    ``element NAME = vf [...] coeffs [...]`` lines.
    """
    refs: dict[str, LRPresentation] = {}
    base_text = None
    base_line = 0
    images: dict[str, tuple[int, str]] = {}
    elements: dict[str, tuple[int, str, str]] = {}
    chart = None
    for no, line in _lines(text):
        if m := _REF.match(line):
            if m.group(1) in refs:
                raise FormatError(f"duplicate {m.group(1)} line", no, source)
            if kind == "basechange" and m.group(1) == "source":
                raise FormatError("base-change files name their source chart with a space line", no, source)
            refs[m.group(1)] = load_structure(_resolve(m.group(2), source))
        elif kind == "basechange" and (m := _SPACE.match(line)):
            coords = _with_line(lambda: [c.strip() for c in parse_list(m.group(2))], no, source)
            chart = _with_line(lambda: Chart(m.group(1), tuple(coords)), no, source)
        elif m := _BASE.match(line):
            base_text, base_line = m.group(1), no
        elif kind != "basechange" and (m := _IMAGE.match(line)):
            if m.group(1) in images:
                raise FormatError(f"duplicate image for '{m.group(1)}'", no, source)
            images[m.group(1)] = (no, m.group(2))
        elif kind == "basechange" and (m := _ELEMENT.match(line)):
            if m.group(1) in elements:
                raise FormatError(f"duplicate element '{m.group(1)}'", no, source)
            elements[m.group(1)] = (no, m.group(2), m.group(3))
        else:
            raise FormatError(f"unrecognized line '{line}'", no, source)
    if "target" not in refs:
        raise FormatError("missing target line", None, source)
    if kind == "basechange":
        if chart is None:
            raise FormatError("missing space line", None, source)
        src_chart = chart
    else:
        if "source" not in refs:
            raise FormatError("missing source line", None, source)
        src_chart = refs["source"].chart
    target = refs["target"]
    if base_text is None:
        raise FormatError("missing base line", None, source)
    base = _with_line(lambda: parse_vector(base_text, src_chart), base_line, source)
    if len(base) != target.chart.dim:
        raise FormatError(f"base has {len(base)} entries, target chart has dimension {target.chart.dim}", base_line, source)
    out = MapFile(kind, refs.get("source"), target, tuple(base), chart=src_chart)
    if kind == "morphism":
        domain, width = out.source.gens, target.rank
    elif kind == "comorphism":
        domain, width = target.gens, out.source.rank
    else:
        domain, width = (), target.rank
    for g, (no, vec_text) in images.items():
        if g not in domain:
            raise FormatError(f"unknown generator '{g}'", no, source)
        vec = _with_line(lambda: parse_vector(vec_text, src_chart), no, source)
        if len(vec) != width:
            raise FormatError(f"image of '{g}' has {len(vec)} entries, expected {width}", no, source)
        out.images[g] = vec
    missing = [g for g in domain if g not in out.images]
    if missing:
        raise FormatError(f"missing images for {missing}", None, source)
    for name, (no, vf_text, co_text) in elements.items():
        vf = _with_line(lambda: parse_vector(vf_text, src_chart), no, source)
        co = _with_line(lambda: parse_vector(co_text, src_chart), no, source)
        if len(vf) != src_chart.dim or len(co) != width:
            raise FormatError(f"element '{name}' has the wrong shape", no, source)
        out.elements[name] = (vf, co)
    return out


def load_map_file(path: str, kind: str) -> MapFile:
    return parse_map_file(read_text(path), kind, path)
