import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import FIXTURES, fixture_path
from lrkit.expr import Chart, Num, Sym, normalize, parse_expr
from lrkit.fileformat import (
    FormatError,
    load_map_file,
    parse_linear_combination,
    parse_model_file,
    parse_path_file,
    parse_point,
    parse_section,
    parse_square_file,
    parse_structure_file,
    print_path,
    print_structure,
    read_text,
)
from lrkit.homotopy import lr_path
from lrkit.presentation import LRPresentation

SO3 = """\
space so3 coords [x, y, z]
generators [e1, e2, e3]
anchor e1 = [0, z, -y]
anchor e2 = [-z, 0, x]
anchor e3 = [y, -x, 0]
bracket [e1, e2] = e3
bracket [e2, e3] = e1
bracket [e3, e1] = e2
"""


def _error_line(text):
    with pytest.raises(FormatError) as err:
        parse_structure_file(text)
    return err.value.line, str(err.value)


# ---------------------------------------------------------------------------
# structure files


def test_so3_file_parses():
    P = parse_structure_file(SO3)
    assert P.rank == 3 and P.chart.coords == ("x", "y", "z")
    # antisymmetry is completed from the given lines
    assert P.struct[1][0] == (Num(0), Num(0), Num(-1))
    assert P.relations == ()


def test_relation_line():
    P = parse_structure_file("space r coords [x]\ngenerators [a, b]\nanchor a = [x]\nanchor b = [x]\nrelation [x, -x]\n")
    assert len(P.relations) == 1
    assert P.relations[0] == (Sym("x"), normalize(parse_expr("-x", P.chart)))


def test_missing_brackets_default_to_zero():
    P = parse_structure_file("space pt coords []\ngenerators [a, b]\n")
    assert all(c == Num(0) for row in P.struct for v in row for c in v)


def test_reverse_bracket_line_is_accepted_when_consistent():
    P = parse_structure_file(SO3 + "bracket [e2, e1] = -e3\n")
    assert P.struct[0][1] == (Num(0), Num(0), Num(1))


def test_bracket_with_function_coefficients():
    text = "space p coords [x, y]\ngenerators [dx, dy]\nanchor dx = [0, x]\nanchor dy = [-x, 0]\nbracket [dx, dy] = x*dx - 2*dy\n"
    P = parse_structure_file(text)
    assert P.struct[0][1] == (Sym("x"), Num(-2))


@pytest.mark.parametrize(
    "text,line,fragment",
    [
        (SO3 + "bracket [e1, e1] = e2\n", 9, "diagonal"),
        (SO3 + "bracket [e1, e2] = e1\n", 9, "duplicate"),
        (SO3 + "bracket [e2, e1] = e3\n", 9, "contradicts"),
        (SO3 + "anchor e4 = [0, 0, 0]\n", 9, "unknown generator"),
        (SO3 + "bracket [e1, e9] = e2\n", 9, "unknown generator"),
        (SO3.replace("anchor e1 = [0, z, -y]", "anchor e1 = [0, z]"), 3, "expected 3"),
        (SO3.replace("anchor e2 = [-z, 0, x]", "anchor e2 = [-z, 0, q]"), 4, "q"),
        (SO3.replace("anchor e3 = [y, -x, 0]", "anchor e3 = [y, -x, *]"), 5, "unexpected"),
        (SO3 + "frobnicate\n", 9, "unrecognized"),
        (SO3 + "bracket [e1, e3] = e1*e2\n", 9, "linear"),
        (SO3 + "bracket [e1, e3] = x + e2\n", 9, "does not multiply"),
        (SO3 + "relation [1, 2]\n", 9, "expected 3"),
        ("generators [a]\n", 1, "before space"),
        ("space s coords [x]\ngenerators [x]\n", 2, "clashes"),
        ("space s coords [x]\ngenerators [a, a]\n", 2, "duplicate generator"),
    ],
)
def test_structure_errors_name_the_line(text, line, fragment):
    got_line, msg = _error_line(text)
    assert got_line == line
    assert fragment in msg
    assert f"line {line}:" in msg


def test_missing_lines():
    assert "missing space" in _error_line("# nothing\n")[1]
    assert "missing generators" in _error_line("space s coords [x]\n")[1]


def test_comments_and_blank_lines_are_ignored():
    text = "\n# header\n" + SO3.replace("\n", "   # trailing\n\n")
    assert parse_structure_file(text).structurally_equal(parse_structure_file(SO3))


def test_source_name_in_message():
    with pytest.raises(FormatError) as err:
        parse_structure_file("space s coords [x]\nbogus\n", "demo.lrs")
    assert str(err.value).startswith("demo.lrs:line 2:")


@pytest.mark.parametrize("path", sorted(p.name for p in FIXTURES.glob("*.lrs")))
def test_fixture_round_trip(load, path):
    P = load(path)
    again = parse_structure_file(print_structure(P))
    assert again.structurally_equal(P)
    assert again.chart.sample_box == P.chart.sample_box
    assert print_structure(again) == print_structure(P)


def _poly(coords):
    leaf = st.one_of(st.integers(-3, 3).map(Num), st.sampled_from([Sym(c) for c in coords])) if coords else st.integers(-3, 3).map(Num)
    return st.recursive(
        leaf,
        lambda ch: st.one_of(
            st.tuples(ch, ch).map(lambda p: p[0] + p[1]),
            st.tuples(ch, ch).map(lambda p: p[0] * p[1]),
            ch.map(lambda c: c ** 2),
        ),
        max_leaves=4,
    ).map(normalize)


@st.composite
def presentations(draw):
    coords = draw(st.sampled_from([(), ("x",), ("x", "y")]))
    chart = Chart("rand", coords)
    k = draw(st.integers(1, 3))
    gens = [f"g{i}" for i in range(k)]
    anchors = {g: [draw(_poly(coords)) for _ in coords] for g in gens} if coords else None
    brackets = {}
    for i in range(k):
        for j in range(i + 1, k):
            if draw(st.booleans()):
                brackets[(gens[i], gens[j])] = [draw(_poly(coords)) for _ in range(k)]
    relations = [[draw(_poly(coords)) for _ in range(k)] for _ in range(draw(st.integers(0, 2)))]
    return LRPresentation.from_brackets(chart, gens, anchors, brackets, relations, "rand")


@given(presentations())
def test_random_round_trip(P):
    assert parse_structure_file(print_structure(P)).structurally_equal(P)


# ---------------------------------------------------------------------------
# small parsers


@pytest.mark.parametrize("text,want", [("1,0,0", [1, 0, 0]), ("[1, -2, 0.5]", [1, -2, 0.5]), ("pi/2", [np.pi / 2]), ("", [])])
def test_parse_point(text, want):
    assert parse_point(text) == pytest.approx(want)


def test_parse_point_rejects_symbols():
    with pytest.raises(Exception):
        parse_point("x,0")


def test_linear_combination():
    chart = Chart("R", ("x",))
    assert parse_linear_combination("x*e1 - 2*e2", chart, ["e1", "e2"]) == [Sym("x"), Num(-2)]
    assert parse_linear_combination("0", chart, ["e1"]) == [Num(0)]


def test_section_forms(load):
    P = load("so3")
    assert parse_section("[x, 0, 1]", P) == parse_section("x*e1 + e3", P)
    with pytest.raises(ValueError):
        parse_section("[1, 2]", P)


# ---------------------------------------------------------------------------
# paths, squares, models, maps


def test_path_round_trip(load):
    P = load("so3")
    path = parse_path_file(read_text(fixture_path("circle.lrp")), P)
    again = parse_path_file(print_path(path), P)
    assert str(again) == str(path)


def test_piecewise_path_round_trip(load):
    g = load("so3_algebra")
    path = parse_path_file(read_text(fixture_path("lazy1.lrp")), g)
    assert len(path.pieces) > 1
    again = parse_path_file(print_path(path), g)
    assert [p.t0 for p in again.pieces] == [p.t0 for p in path.pieces]
    for t in np.linspace(0, 1, 13):
        assert np.allclose(again.a_at(t), path.a_at(t), atol=1e-15)


def test_single_piece_prints_without_header(load):
    P = load("tangent_r1")
    assert not print_path(lr_path(P, ["t"], ["1"])).startswith("piece")


@pytest.mark.parametrize(
    "text,fragment",
    [
        ("gamma = [t]\n", "both gamma and a"),
        ("gamma = [t]\na = [1]\na = [2]\n", "duplicate"),
        ("gamma = [t, t]\na = [1]\n", "expected 1"),
        ("gamma = [s]\na = [1]\n", "s"),
        ("piece [0, 0.5]\ngamma = [t]\na = [1]\npiece [0.6, 1]\ngamma = [t]\na = [1]\n", "contiguous"),
        ("b = [1]\n", "unrecognized"),
    ],
)
def test_path_errors(load, text, fragment):
    with pytest.raises(FormatError) as err:
        parse_path_file(text, load("tangent_r1"))
    assert fragment in str(err.value)


def test_square_file(load):
    g = load("so3_algebra")
    sq = parse_square_file(read_text(fixture_path("control.lrq")), g)
    assert sq.a_t[1] == Sym("s")
    with pytest.raises(FormatError):
        parse_square_file("gamma = []\na_s = [0, 0, 0]\n", g)


def test_model_file_errors(load):
    g = load("so3_algebra")
    with pytest.raises(FormatError) as err:
        parse_model_file("matrix e1 = [[1, 0], [0]]\n", g)
    assert "line 1" in str(err.value)
    with pytest.raises(FormatError):
        parse_model_file("matrix e7 = [[1]]\n", g)
    with pytest.raises(FormatError) as err:
        parse_model_file("matrix e1 = [[1]]\nmatrix e2 = [[1]]\nmatrix e3 = [[1]]\n", g)
    assert "commutator" in str(err.value)


def test_map_files_resolve_relative_paths():
    mf = load_map_file(fixture_path("tangent_chain.lrm"), "morphism")
    assert mf.source.name == "tangent_r1" and mf.target.name == "tangent_r2"
    assert list(mf.images) == ["dt"]
    bc = load_map_file(fixture_path("line_in_plane.lrb"), "basechange")
    assert bc.chart.coords == ("t",) and set(bc.elements) == {"p", "q"}


def test_map_file_errors(tmp_path):
    bad = tmp_path / "bad.lrm"
    bad.write_text(f"source {fixture_path('tangent_r1.lrs')}\ntarget {fixture_path('tangent_r2.lrs')}\nbase [t]\n")
    with pytest.raises(FormatError) as err:
        load_map_file(str(bad), "morphism")
    assert "line 3" in str(err.value)
    missing = tmp_path / "missing.lrm"
    missing.write_text(f"source {fixture_path('tangent_r1.lrs')}\ntarget {fixture_path('tangent_r2.lrs')}\nbase [t, t]\n")
    with pytest.raises(FormatError) as err:
        load_map_file(str(missing), "morphism")
    assert "dt" in str(err.value)
