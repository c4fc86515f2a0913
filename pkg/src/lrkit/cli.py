"""Command line interface: ``lrkit SUBCOMMAND FILE [options]``.

Every subcommand prints a JSON report on standard output. Exit status is 0
when every residual passes, 1 on a residual failure or a library error and 2
on usage, parse or file errors (with ``usage:``, ``parse:`` or ``io:`` on
standard error).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from typing import Callable, Sequence

from .expr import ExprError, ParseError, ZeroTestConfig, parse_expr, to_string
from .fileformat import (
    FormatError,
    load_map_file,
    load_structure,
    parse_model_file,
    parse_path_file,
    parse_point,
    parse_section,
    parse_square_file,
    print_path,
    print_structure,
    read_text,
)
from .report import Report

DEFAULT_ZERO_TOL = 1e-9


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common() -> argparse.ArgumentParser:
    # SUPPRESS keeps a flag given before the subcommand from being reset by
    # the subparser's defaults, so global flags work in any position.
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--tol", type=float, default=argparse.SUPPRESS, help="tolerance (command-specific default)")
    g.add_argument("--samples", type=int, default=argparse.SUPPRESS, help="sample points for zero tests (64)")
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed (0)")
    g.add_argument("--json", action="store_true", default=argparse.SUPPRESS, help="compact single-line JSON")
    g.add_argument("--timing", action="store_true", default=argparse.SUPPRESS, help="include wall time in the report")
    return p


GLOBAL_DEFAULTS = {"tol": None, "samples": 64, "seed": 0, "json": False, "timing": False}


# ---------------------------------------------------------------------------
# Argument helpers


def _point(text: str, dim: int, what: str) -> list[float]:
    try:
        pt = parse_point(text)
    except ParseError:
        raise
    except (ExprError, ValueError) as exc:
        raise UsageError(f"{what}: {exc}") from None
    if len(pt) != dim:
        raise UsageError(f"{what} has {len(pt)} coordinates, chart has dimension {dim}")
    return pt


def _scalar(text: str, what: str) -> float:
    pt = _point(text, 1, what)
    return pt[0]


def _cfg(args) -> ZeroTestConfig:
    tol = args.tol if args.tol is not None else DEFAULT_ZERO_TOL
    if args.samples < 1:
        raise UsageError("--samples must be >= 1")
    return ZeroTestConfig(tol=tol, samples=args.samples, seed=args.seed)


def _icfg(args, tol_default: float = 1e-6):
    from .flows import IntegratorConfig

    step = getattr(args, "step", None) or 1e-3
    if step <= 0:
        raise UsageError("--step must be positive")
    return IntegratorConfig(step=step, tol=args.tol if args.tol is not None else tol_default)


def _section(P, text: str, params: Sequence[str] = ()):
    from .presentation import Section

    try:
        return Section(P, tuple(parse_section(text, P, params)))
    except ParseError:
        raise
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _floats(v) -> list[float]:
    return [float(x) for x in v]


# ---------------------------------------------------------------------------
# Subcommands


def cmd_check(args) -> Report:
    from .presentation import verify_presentation

    P = load_structure(args.file)
    return verify_presentation(P, _cfg(args))


def cmd_fiber(args) -> Report:
    from .fibers import fd_witness_check, fiber_basis, fiber_class, fiber_determinize, fiberwise_zero

    P = load_structure(args.file)
    cfg = _cfg(args)
    if args.determinize:
        witnesses = [_section(P, w) for w in args.determinize]
        Q, report = fiber_determinize(P, witnesses, cfg)
        report.data["structure"] = print_structure(Q)
        return report
    if args.at is None:
        raise UsageError("fiber needs --at or --determinize")
    x = _point(args.at, P.chart.dim, "--at")
    fb = fiber_basis(P, x, cfg.rank_tol)
    report = Report(seed=cfg.seed)
    report.data.update(
        {"point": _floats(x), "quotient_dim": fb.quotient_dim, "relation_rank": fb.rank, "rank": P.rank}
    )
    if args.section is not None:
        u = _section(P, args.section)
        report.data["class"] = _floats(fiber_class(u, x, cfg.rank_tol))
        fz = fiberwise_zero(u, cfg)
        report.data["fiberwise_zero"] = fz.verdict.value
        fd = fd_witness_check(u, cfg)
        report.data["fd"] = {
            "classification": fd.classification.value,
            "detail": fd.detail,
            "point": None if fd.point is None else _floats(fd.point),
        }
    return report


def cmd_flow(args) -> Report:
    from .flows import flow_point
    from .presentation import Section, anchor_of

    P = load_structure(args.file)
    icfg = _icfg(args)
    if (args.generator is None) == (args.alpha is None):
        raise UsageError("flow needs exactly one of --generator or --alpha")
    if args.generator is not None:
        if args.generator not in P.gens:
            raise UsageError(f"unknown generator '{args.generator}'")
        sec = P.gen(P.index(args.generator))
    else:
        sec = Section(P, tuple(parse_section(args.alpha, P, ("t",))))
    p = _point(args.start, P.chart.dim, "--from")
    T = _scalar(args.time, "--time")
    end = flow_point(anchor_of(P, sec), p, T, icfg)
    report = Report(seed=args.seed)
    report.data.update({"from": _floats(p), "time": T, "step": icfg.step, "endpoint": _floats(end)})
    return report


def cmd_adjoint(args) -> Report:
    from .flows import adjoint_flow_at_point, adjoint_property_report, time_section

    P = load_structure(args.file)
    icfg = _icfg(args, 1e-5)
    alpha = time_section(P, parse_section(args.alpha, P, ("t",)))
    b0 = _section(P, args.b0)
    p = _point(args.start, P.chart.dim, "--from")
    T = _scalar(args.time, "--time")
    end, coeffs = adjoint_flow_at_point(alpha, b0, p, T, icfg)
    if args.properties:
        c = _section(P, args.c) if args.c else _section(P, " + ".join(P.gens))
        g = parse_expr(args.g, P.chart) if args.g else parse_expr(" + ".join(["1"] + [f"{x}^2" for x in P.chart.coords]), P.chart)
        report = adjoint_property_report(alpha, b0, c, g, p, T, icfg)
        report.data["c"] = str(c)
        report.data["g"] = to_string(g)
    else:
        report = Report()
    report.seed = args.seed
    report.data.update({"from": _floats(p), "time": T, "step": icfg.step, "endpoint": _floats(end), "coefficients": _floats(coeffs)})
    return report


def cmd_leaf(args) -> Report:
    from .flows import leaf_sample

    P = load_structure(args.file)
    p = _point(args.start, P.chart.dim, "--from")
    cloud = leaf_sample(P, p, args.budget, args.seed, _icfg(args))
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(cloud.to_csv())
        except OSError as exc:
            raise OSError(f"cannot write {args.out}: {exc.strerror}") from None
    report = Report(seed=args.seed)
    report.data.update(cloud.summary())
    if args.out:
        report.data["out"] = args.out
    return report


def cmd_leafdim(args) -> Report:
    from .flows import leaf_dimension

    P = load_structure(args.file)
    x = _point(args.at, P.chart.dim, "--at")
    report = Report(seed=args.seed)
    report.data.update({"point": _floats(x), "dimension": leaf_dimension(P, x)})
    return report


def cmd_sameleaf(args) -> Report:
    from .flows import same_leaf

    P = load_structure(args.file)
    p = _point(args.start, P.chart.dim, "--from")
    q = _point(args.to, P.chart.dim, "--to")
    res = same_leaf(P, p, q, tol=args.reach, budget=args.budget, seed=args.seed, cfg=_icfg(args))
    report = Report(seed=args.seed)
    report.data.update(
        {
            "verdict": res.verdict,
            "word": [[g, t] for g, t in res.word],
            "distance": res.distance,
            "endpoint": _floats(res.endpoint),
        }
    )
    return report


def _load_path(P, path: str):
    return parse_path_file(read_text(path), P, path)


def cmd_path(args) -> Report:
    from .homotopy import apath_report, concatenate_paths, lazify_path, reparameterize_path, reverse_path

    P = load_structure(args.structure)
    tol = args.tol if args.tol is not None else DEFAULT_ZERO_TOL
    path = _load_path(P, args.path)
    op = args.op
    if op == "verify":
        result = path
    elif op == "reverse":
        result = reverse_path(path)
    elif op == "lazify":
        result = lazify_path(path)
    elif op == "reparam":
        if not args.tau:
            raise UsageError("path reparam needs --tau")
        result = reparameterize_path(path, args.tau)
    else:
        if not args.other:
            raise UsageError("path concat needs a second path file")
        result = concatenate_paths(path, _load_path(P, args.other))
    report = apath_report(result, tol=tol)
    report.seed = args.seed
    report.data.update(
        {"start": _floats(result.start()), "end": _floats(result.end()), "breakpoints": result.breakpoints}
    )
    if op != "verify":
        text = print_path(result)
        report.data["path"] = text
        if args.out:
            try:
                with open(args.out, "w", encoding="utf-8") as fh:
                    fh.write(text)
            except OSError as exc:
                raise OSError(f"cannot write {args.out}: {exc.strerror}") from None
    return report


def cmd_square(args) -> Report:
    from .homotopy import boundary_report, square_residual

    P = load_structure(args.structure)
    tol = args.tol if args.tol is not None else DEFAULT_ZERO_TOL
    sq = parse_square_file(read_text(args.square), P, args.square)
    report = square_residual(sq, tol=tol)
    report.seed = args.seed
    bnd = boundary_report(sq, tol=tol)
    report.data["sphere"] = bnd.data.get("sphere")
    report.data["fixed_ends"] = bnd.data.get("fixed_ends")
    return report


def _model(P, path: str):
    return parse_model_file(read_text(path), P, path)


def cmd_holonomy(args) -> Report:
    from .homotopy import holonomy

    P = load_structure(args.structure)
    model = _model(P, args.model)
    path = _load_path(P, args.path)
    h = holonomy(model, path, _icfg(args), args.side)
    report = Report(seed=args.seed)
    report.data.update({"side": args.side, "holonomy": [_floats(row) for row in h.matrix]})
    return report


def cmd_laws(args) -> Report:
    from .homotopy import groupoid_law_report

    P = load_structure(args.structure)
    model = _model(P, args.model)
    files = [f for f in args.paths.split(",") if f]
    if len(files) != 3:
        raise UsageError("--paths needs three comma-separated files")
    paths = [_load_path(P, f) for f in files]
    square = parse_square_file(read_text(args.square), P, args.square) if args.square else None
    control = parse_square_file(read_text(args.control), P, args.control) if args.control else None
    report = groupoid_law_report(
        model, paths, _icfg(args), args.tol if args.tol is not None else 1e-6, square, control, args.side
    )
    report.seed = args.seed
    return report


def cmd_morphism(args) -> Report:
    from .morphisms import base_map, check_lr_morphism, factor_morphism, lr_morphism

    mf = load_map_file(args.file, "morphism")
    A, B = mf.source, mf.target
    f = base_map(A.chart, B.chart, mf.base)
    F = lr_morphism(A, B, f, [mf.images[g] for g in A.gens])
    cfg = _cfg(args)
    if args.op == "check":
        return check_lr_morphism(F, A, B, cfg)
    fac = factor_morphism(F, A, B, cfg)
    fac.report.data["elements"] = {g: str(el) for g, el in zip(A.gens, fac.elements)}
    return fac.report


def cmd_comorphism(args) -> Report:
    from .morphisms import base_map, check_lr_comorphism, factor_comorphism, lr_comorphism

    mf = load_map_file(args.file, "comorphism")
    A, B = mf.source, mf.target
    f = base_map(A.chart, B.chart, mf.base)
    G = lr_comorphism(A, B, f, [mf.images[g] for g in B.gens])
    cfg = _cfg(args)
    if args.op == "check":
        return check_lr_comorphism(G, A, B, cfg)
    fac = factor_comorphism(G, A, B, cfg)
    fac.report.data["induced"] = print_structure(fac.induced)
    return fac.report


def cmd_basechange(args) -> Report:
    from .morphisms import (
        base_change_bracket,
        base_change_element,
        base_change_jacobi_report,
        base_change_membership_report,
        base_map,
    )

    mf = load_map_file(args.file, "basechange")
    B = mf.target
    f = base_map(mf.chart, B.chart, mf.base)
    elements = {name: base_change_element(f, B, vf, co) for name, (vf, co) in mf.elements.items()}
    cfg = _cfg(args)
    report = Report(seed=cfg.seed)
    if args.op == "member":
        for name, el in elements.items():
            report.extend(base_change_membership_report(el, f, B, cfg, name).residuals)
        return report
    if args.pair:
        names = [n.strip() for n in args.pair.split(",")]
        if len(names) != 2 or any(n not in elements for n in names):
            raise UsageError(f"--pair needs two element names from {sorted(elements)}")
        pairs = [tuple(names)]
    else:
        keys = list(elements)
        pairs = [(a, b) for i, a in enumerate(keys) for b in keys[i + 1 :]]
    brackets = {}
    for a, b in pairs:
        br = base_change_bracket(elements[a], elements[b], f, B, cfg)
        brackets[f"[{a},{b}]"] = str(br)
        report.extend(base_change_membership_report(br, f, B, cfg, f"[{a},{b}]").residuals)
    report.extend(base_change_jacobi_report(list(elements.values()), f, B, cfg).residuals)
    report.data["brackets"] = brackets
    return report


def cmd_ce(args) -> Report:
    from .ce import ce_differential, ce_roundtrip_report, d_squared_report, differential_to_dict

    P = load_structure(args.file)
    cfg = _cfg(args)
    dce = ce_differential(P)
    report = ce_roundtrip_report(P, cfg) if args.roundtrip else d_squared_report(dce, P.chart, P.gens, cfg)
    report.data["differential"] = differential_to_dict(dce, P.chart, P.gens)
    return report


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="lrkit", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def add(name, fn: Callable, help_text):
        p = sub.add_parser(name, help=help_text, parents=[common])
        p.set_defaults(func=fn)
        return p

    def structure(p):
        p.add_argument("file", help="structure file (.lrs)")

    p = add("check", cmd_check, "verify the structure axioms")
    structure(p)

    p = add("fiber", cmd_fiber, "fiber dimension and section classes")
    structure(p)
    p.add_argument("--at", help="chart point, e.g. 1,0,0")
    p.add_argument("--section", help="section as [c1,...] or a combination like x*g1 - g2")
    p.add_argument("--determinize", action="append", metavar="SECTION", help="append a witness to the relations")

    p = add("flow", cmd_flow, "flow of a generator or section anchor")
    structure(p)
    p.add_argument("--generator")
    p.add_argument("--alpha", help="time-dependent section in t")
    p.add_argument("--from", dest="start", required=True)
    p.add_argument("--time", required=True)
    p.add_argument("--step", type=float)

    p = add("adjoint", cmd_adjoint, "adjoint flow of a section along alpha")
    structure(p)
    p.add_argument("--alpha", required=True)
    p.add_argument("--b0", required=True)
    p.add_argument("--from", dest="start", required=True)
    p.add_argument("--time", required=True)
    p.add_argument("--step", type=float)
    p.add_argument("--properties", action="store_true", help="also check the anchor, bracket and module properties")
    p.add_argument("--c", help="second section for the bracket property (default: sum of generators)")
    p.add_argument("--g", help="function for the module property (default: 1 + sum of squared coordinates)")

    p = add("leaf", cmd_leaf, "sample a leaf by generator flows")
    structure(p)
    p.add_argument("--from", dest="start", required=True)
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--out", help="CSV output file")
    p.add_argument("--step", type=float)

    p = add("leafdim", cmd_leafdim, "leaf dimension at a point")
    structure(p)
    p.add_argument("--at", required=True)

    p = add("sameleaf", cmd_sameleaf, "search for a flow word joining two points")
    structure(p)
    p.add_argument("--from", dest="start", required=True)
    p.add_argument("--to", required=True)
    p.add_argument("--budget", type=int, default=8)
    p.add_argument("--reach", type=float, default=1e-4, help="distance counted as reaching the target")
    p.add_argument("--step", type=float)

    p = add("path", cmd_path, "verify or transform an A-path")
    p.add_argument("op", choices=["verify", "reverse", "reparam", "lazify", "concat"])
    p.add_argument("structure")
    p.add_argument("path")
    p.add_argument("other", nargs="?", help="second path (concat)")
    p.add_argument("--tau", help="reparameterization tau(t)")
    p.add_argument("--out", help="write the resulting path file")

    p = add("square", cmd_square, "A-path and flatness residuals of a square")
    p.add_argument("structure")
    p.add_argument("square")

    p = add("holonomy", cmd_holonomy, "holonomy of a path in a matrix model")
    p.add_argument("structure")
    p.add_argument("path")
    p.add_argument("--model", required=True)
    p.add_argument("--side", choices=["right", "left"], default="right")
    p.add_argument("--step", type=float)

    p = add("laws", cmd_laws, "groupoid laws through holonomy")
    p.add_argument("structure")
    p.add_argument("--model", required=True)
    p.add_argument("--paths", required=True, help="three comma-separated path files")
    p.add_argument("--square", help="flat square for homotopy invariance")
    p.add_argument("--control", help="non-flat control square")
    p.add_argument("--side", choices=["right", "left"], default="right")
    p.add_argument("--step", type=float)

    for name, fn in (("morphism", cmd_morphism), ("comorphism", cmd_comorphism)):
        p = add(name, fn, f"check or factor a {name}")
        p.add_argument("op", choices=["check", "factor"])
        p.add_argument("file")

    p = add("basechange", cmd_basechange, "membership and brackets in a base change")
    p.add_argument("op", choices=["member", "bracket"])
    p.add_argument("file")
    p.add_argument("--pair", help="bracket only these two elements, e.g. p,q")

    p = add("ce", cmd_ce, "Chevalley-Eilenberg differential and d^2")
    structure(p)
    p.add_argument("--roundtrip", action="store_true")
    return parser


def _emit(obj: dict, compact: bool, out) -> None:
    if compact:
        out.write(json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n")
    else:
        out.write(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _sanitize(obj):
    """Replace non-finite floats, which strict JSON cannot carry, by strings."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else "-inf" if obj < 0 else "nan"
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    return obj


def run(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        stderr.write(f"usage: {exc}\n")
        return 2
    for key, value in GLOBAL_DEFAULTS.items():
        if not hasattr(args, key):
            setattr(args, key, value)
    start = time.perf_counter()
    try:
        report = args.func(args)
    except UsageError as exc:
        stderr.write(f"usage: {exc}\n")
        return 2
    except (FormatError, ParseError) as exc:
        stderr.write(f"parse: {exc}\n")
        return 2
    except OSError as exc:
        name = f" {exc.filename}" if getattr(exc, "filename", None) else ""
        stderr.write(f"io:{name} {exc.strerror or exc}\n")
        return 2
    except (ExprError, ValueError, ArithmeticError, RuntimeError) as exc:
        _emit({"ok": False, "error": f"{type(exc).__name__}: {exc}", "seed": args.seed}, args.json, stdout)
        return 1
    report.timing = time.perf_counter() - start
    _emit(_sanitize(report.to_dict(timing=args.timing)), args.json, stdout)
    return 0 if report.ok else 1


def main() -> None:
    sys.exit(run())

