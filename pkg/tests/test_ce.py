import pytest

from lrkit.ce import (
    ce_differential,
    ce_roundtrip_report,
    d_squared_report,
    differential_from_tensors,
    presentation_from_differential,
)
from lrkit.expr import Chart, Num, parse_expr, point_chart
from lrkit.presentation import LRPresentation, verify_presentation


def test_so3_dual_of_e3(load):
    dce = ce_differential(load("so3_algebra"))
    # d eps^3 = -eps^1 ^ eps^2
    assert dce.d_dual(2) == {(0, 1): Num(-1)}


def test_abelian_table_gives_zero_tensors():
    P = LRPresentation(point_chart(), ["a", "b", "c"], None, None)
    dce = ce_differential(P)
    assert all(not dce.d_dual(m) for m in range(3))
    assert dce.rho == ()


def test_tangent_line(load):
    P = load("tangent_r1")
    dce = ce_differential(P)
    assert dce.d_coordinate(0) == {(0,): Num(1)}
    assert dce.d_dual(0) == {}


@pytest.mark.parametrize("name", ["so3", "so3_algebra", "nonabelian2", "poisson_cotangent", "heisenberg", "tangent_r3"])
def test_round_trip(load, name):
    P = load(name)
    report = ce_roundtrip_report(P)
    assert report.ok
    Q, _ = presentation_from_differential(ce_differential(P), P.chart, P.gens)
    assert Q.anchor_cols == P.anchor_cols and Q.struct == P.struct


def test_nonabelian_from_differential():
    # d eps^1 = eps^1 ^ eps^2, d eps^2 = 0, zero anchor
    D = [[[0, 1], [-1, 0]], [[0, 0], [0, 0]]]
    dce = differential_from_tensors([], D)
    P, report = presentation_from_differential(dce, point_chart(), ["e1", "e2"])
    assert report.ok
    assert P.struct[0][1] == (Num(-1), Num(0))


@pytest.mark.parametrize("name", ["so3_broken", "jacobi_broken"])
def test_d_squared_detects_broken_tables(load, name):
    P = load(name)
    assert not d_squared_report(ce_differential(P), P.chart, P.gens).ok


@pytest.mark.parametrize("name", ["so3", "so3_algebra", "nonabelian2", "poisson_cotangent", "rel1", "tangent_r2"])
def test_d_squared_vanishes_on_clean(load, name):
    P = load(name)
    assert d_squared_report(ce_differential(P), P.chart, P.gens).ok


def test_d_squared_agrees_with_axiom_check(load):
    for name in ["so3", "so3_broken", "jacobi_broken", "poisson_cotangent", "heisenberg"]:
        P = load(name)
        assert d_squared_report(ce_differential(P), P.chart, P.gens).ok == verify_presentation(P).ok


def test_nonantisymmetric_tensor_rejected():
    with pytest.raises(ValueError):
        differential_from_tensors([], [[[0, 1], [1, 0]], [[0, 0], [0, 0]]])


def test_shape_mismatch_rejected():
    chart = Chart("R", ("x",))
    dce = differential_from_tensors([[parse_expr("1", chart)]], [[[0]]])
    with pytest.raises(ValueError):
        presentation_from_differential(dce, chart, ["a", "b"])
    with pytest.raises(ValueError):
        presentation_from_differential(dce, Chart("R2", ("x", "y")), ["a"])
