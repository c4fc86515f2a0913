from pathlib import Path

import pytest
from hypothesis import settings

import lrkit
from lrkit.fileformat import load_structure

FIXTURES = Path(lrkit.__file__).parent / "fixtures"

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

# acceptance criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def fixture_path(name: str) -> str:
    return str(FIXTURES / name)


def _f(name: str) -> str:
    return fixture_path(name)


# one invocation per subcommand and mode; shared by the CLI and determinism tests
CLI_COMMANDS: list[list[str]] = [
    ["check", _f("so3.lrs")],
    ["check", _f("so3_broken.lrs")],
    ["fiber", _f("rel1.lrs"), "--at", "0", "--section", "x*g1 - x*g2"],
    ["fiber", _f("quot.lrs"), "--determinize", "[x]"],
    ["flow", _f("so3.lrs"), "--generator", "e3", "--from", "1,0,0", "--time", "pi/2"],
    ["flow", _f("so3.lrs"), "--alpha", "t*e1 + e3", "--from", "1,0,0", "--time", "0.5"],
    ["adjoint", _f("so3.lrs"), "--alpha", "e3", "--b0", "e1", "--from", "1,0,0", "--time", "pi/2", "--properties"],
    ["leaf", _f("so3.lrs"), "--from", "1,0,0", "--budget", "40", "--seed", "7"],
    ["leafdim", _f("so3.lrs"), "--at", "1,0,0"],
    ["sameleaf", _f("so3.lrs"), "--from", "1,0,0", "--to", "0,0,1", "--budget", "4"],
    ["path", "verify", _f("so3.lrs"), _f("circle.lrp")],
    ["path", "reverse", _f("so3.lrs"), _f("circle.lrp")],
    ["path", "reparam", _f("so3.lrs"), _f("circle.lrp"), "--tau", "t^2"],
    ["path", "lazify", _f("so3.lrs"), _f("circle.lrp")],
    ["path", "concat", _f("so3_algebra.lrs"), _f("lazy1.lrp"), _f("lazy2.lrp")],
    ["square", _f("so3_algebra.lrs"), _f("flat.lrq")],
    ["holonomy", _f("so3_algebra.lrs"), _f("lazy1.lrp"), "--model", _f("so3_model.txt")],
    [
        "laws", _f("so3_algebra.lrs"), "--model", _f("so3_model.txt"),
        "--paths", ",".join(_f(f"lazy{i}.lrp") for i in (1, 2, 3)),
        "--square", _f("flat.lrq"), "--control", _f("control.lrq"),
    ],
    ["morphism", "check", _f("tangent_chain.lrm")],
    ["morphism", "factor", _f("tangent_chain.lrm")],
    ["comorphism", "check", _f("so3_action.lrc")],
    ["comorphism", "factor", _f("so3_fields.lrc")],
    ["basechange", "member", _f("line_in_plane.lrb")],
    ["basechange", "bracket", _f("line_in_plane.lrb")],
    ["ce", _f("so3_algebra.lrs")],
    ["ce", _f("nonabelian2.lrs"), "--roundtrip"],
]


@pytest.fixture(scope="session")
def load():
    cache = {}

    def _load(name: str):
        if name not in cache:
            cache[name] = load_structure(fixture_path(name if "." in name else name + ".lrs"))
        return cache[name]

    return _load


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, 10):
        if n in ACCEPTANCE:
            ok, detail = ACCEPTANCE[n]
            terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
        else:
            terminalreporter.write_line(f"criterion {n}: NOT RUN")
