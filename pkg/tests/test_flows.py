import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from lrkit.expr import Chart, parse_expr, point_chart
from lrkit.flows import (
    EscapeError,
    IntegratorConfig,
    adjoint_flow_at_point,
    adjoint_property_report,
    flow_point,
    leaf_dimension,
    leaf_sample,
    same_leaf,
    time_section,
)
from lrkit.presentation import LRPresentation, VectorField, anchor_of

# Levi-Civita structure constants: [e_i, e_j] = sum_m eps_ijm e_m
EPS = np.zeros((3, 3, 3))
for i, j, m in [(0, 1, 2), (1, 2, 0), (2, 0, 1)]:
    EPS[i, j, m], EPS[j, i, m] = 1, -1


def _ad(a):
    """C[m][i] = e_m coefficient of [a, e_i] for a constant so(3) element."""
    return np.einsum("j,jim->mi", a, EPS)


def _rotation_z(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


# ---------------------------------------------------------------------------
# flows of vector fields


def test_unit_field_translates():
    R2 = Chart("R2", ("x", "y"))
    V = VectorField(R2, (parse_expr("1", R2), parse_expr("0", R2)))
    assert np.allclose(flow_point(V, [0, 0], 1.0), [1, 0], atol=1e-9)


def test_rotation_flow_matches_closed_form(load):
    P = load("so3")
    V = anchor_of(P, P.gen("e3"))  # (y, -x, 0)
    got = flow_point(V, [1, 0, 0], math.pi / 2)
    assert np.allclose(got, [0, -1, 0], atol=1e-6)
    # Rodrigues oracle: rotation about the z axis by -T
    for T in (0.3, 1.1, 2.5):
        want = _rotation_z(-T) @ np.array([0.4, -0.7, 0.2])
        assert np.allclose(flow_point(V, [0.4, -0.7, 0.2], T), want, atol=1e-9)


def test_zero_time_returns_start(load):
    P = load("so3")
    p = [0.123, -0.456, 0.789]
    assert list(flow_point(anchor_of(P, P.gen(0)), p, 0.0)) == p


def test_time_dependent_field():
    # x' = t gives x(T) = T^2 / 2
    R = Chart("R", ("x",))
    V = VectorField(R, (parse_expr("t", R, ("t",)),))
    assert flow_point(V, [0.0], 1.5)[0] == pytest.approx(1.125, abs=1e-10)


def test_escape_is_an_error():
    R = Chart("R", ("x",), ((-1.0, 1.0),))
    V = VectorField(R, (parse_expr("1", R),))
    with pytest.raises(EscapeError):
        flow_point(V, [0.0], 10.0)


def test_nonpositive_step_rejected():
    with pytest.raises(ValueError):
        IntegratorConfig(step=0)


@settings(max_examples=20)
@given(st.floats(-1, 1), st.floats(-1, 1))
def test_group_law(s, t):
    R2 = Chart("R2", ("x", "y"))
    V = VectorField(R2, (parse_expr("-y + x/5", R2), parse_expr("x - x^2/4", R2)))
    cfg = IntegratorConfig()
    p = [0.3, -0.2]
    two_step = flow_point(V, flow_point(V, p, s, cfg), t, cfg)
    one_step = flow_point(V, p, s + t, cfg)
    assert np.allclose(two_step, one_step, atol=10 * cfg.step * cfg.tol)


# ---------------------------------------------------------------------------
# adjoint flow


def test_adjoint_rotation_example(load):
    P = load("so3")
    alpha = time_section(P, ["0", "0", "1"])
    for p in ([1, 0, 0], [0.2, 0.5, -0.3]):
        q, v = adjoint_flow_at_point(alpha, P.gen("e1"), p, math.pi / 2)
        assert np.allclose(v, [0, -1, 0], atol=1e-9)
        assert np.allclose(q, _rotation_z(-math.pi / 2) @ np.array(p, float), atol=1e-9)


def test_adjoint_matches_matrix_exponential(load):
    P = load("so3_algebra")
    a = np.array([0.3, -1.2, 0.7])
    b0 = np.array([1.0, 2.0, -0.5])
    for T in (0.4, 1.0, 2.2):
        _, v = adjoint_flow_at_point(time_section(P, a.tolist()), b0, [], T)
        assert np.allclose(v, expm(-T * _ad(a)) @ b0, atol=1e-8)


def test_adjoint_on_nonabelian_plane_algebra(load):
    # [e1, e2] = -e1: [a, e1] = a2 e1 and [a, e2] = -a1 e1
    P = load("nonabelian2")
    a1, a2 = 0.8, -0.6
    C = np.array([[a2, -a1], [0.0, 0.0]])
    b0 = np.array([0.5, 1.5])
    _, v = adjoint_flow_at_point(time_section(P, [repr(a1), repr(a2)]), b0, [], 1.3)
    assert np.allclose(v, expm(-1.3 * C) @ b0, atol=1e-8)


def test_time_dependent_alpha(load):
    # alpha = t e3 rotates the fiber by the accumulated angle T^2 / 2
    P = load("so3_algebra")
    T = 1.7
    _, v = adjoint_flow_at_point(time_section(P, ["0", "0", "t"]), [1.0, 0, 0], [], T)
    assert np.allclose(v, [math.cos(T * T / 2), -math.sin(T * T / 2), 0], atol=1e-9)


def test_zero_alpha_is_identity(load):
    P = load("so3")
    p = [0.1, 0.2, 0.3]
    b0 = P.section(["x", "y*z", "1"])
    q, v = adjoint_flow_at_point(time_section(P, ["0", "0", "0"]), b0, p, 2.0)
    assert np.allclose(q, p, atol=0) and np.allclose(v, [0.1, 0.06, 1.0], atol=1e-15)


def test_abelian_zero_anchor_keeps_coefficients():
    R = Chart("R", ("x",))
    P = LRPresentation(R, ["a", "b"], None, None)
    alpha = time_section(P, ["x + t", "sin(t)"])
    for T in (0.5, 3.0):
        q, v = adjoint_flow_at_point(alpha, [2.0, -1.0], [0.3], T)
        assert np.allclose(v, [2.0, -1.0]) and np.allclose(q, [0.3])


@settings(max_examples=15)
@given(
    st.lists(st.floats(-2, 2), min_size=3, max_size=3),
    st.lists(st.floats(-2, 2), min_size=3, max_size=3),
)
def test_adjoint_is_linear(load, b, c):
    P = load("so3")
    alpha = time_section(P, ["1", "x", "t"])
    p = [0.2, -0.1, 0.4]
    _, vb = adjoint_flow_at_point(alpha, b, p, 0.8)
    _, vc = adjoint_flow_at_point(alpha, c, p, 0.8)
    _, vbc = adjoint_flow_at_point(alpha, np.add(b, c), p, 0.8)
    assert np.allclose(vbc, vb + vc, atol=1e-9)


def test_reverse_consistency(load):
    P = load("so3")
    alpha = time_section(P, ["1", "x*t", "y"])
    T = 0.9
    p, b0 = [0.3, 0.1, -0.2], [1.0, -0.5, 0.25]
    q, v = adjoint_flow_at_point(alpha, b0, p, T)
    back, w = adjoint_flow_at_point(alpha.reversed(T), v, q, T)
    assert np.allclose(back, p, atol=1e-5) and np.allclose(w, b0, atol=1e-5)


def test_properties_rotation_example(load):
    P = load("so3")
    alpha = time_section(P, ["0", "0", "1"])
    report = adjoint_property_report(alpha, P.gen("e1"), P.gen("e2"), parse_expr("x", P.chart), [0.5, 0.2, -0.3], 1.0)
    assert report.ok
    assert all(r.value < 1e-5 for r in report.residuals)
    assert {r.family for r in report.residuals} == {"anchor", "bracket", "module"}


def test_properties_zero_alpha(load):
    P = load("so3")
    alpha = time_section(P, ["0", "0", "0"])
    report = adjoint_property_report(alpha, P.gen("e1"), P.gen("e2"), parse_expr("x", P.chart), [0.5, 0.2, -0.3], 1.0)
    assert all(r.value < 1e-12 for r in report.residuals)


def test_properties_zero_time(load):
    P = load("so3")
    alpha = time_section(P, ["1", "x", "0"])
    report = adjoint_property_report(alpha, P.gen("e1"), P.gen("e3"), parse_expr("y^2", P.chart), [0.1, 0.4, 0.2], 0.0)
    assert all(r.value < 1e-9 for r in report.residuals)


def test_properties_general_alpha(load):
    P = load("so3")
    alpha = time_section(P, ["1", "x*t", "y - z"])
    b, c = P.section(["x", "1", "0"]), P.section(["0", "y", "z^2"])
    report = adjoint_property_report(alpha, b, c, parse_expr("1 + x^2", P.chart), [0.2, -0.3, 0.4], 0.7)
    assert report.ok, [(r.name, r.value) for r in report.residuals]


# ---------------------------------------------------------------------------
# leaves


def test_leaf_preserves_radius(load):
    P = load("so3")
    cloud = leaf_sample(P, [1, 0, 0], 500, seed=7)
    assert len(cloud.points) == 500
    radii = np.linalg.norm(np.array(cloud.points), axis=1)
    assert np.all(np.abs(radii - 1) < 1e-6)
    dims = {leaf_dimension(P, q) for q in cloud.points[:50]}
    assert dims == {2}


def test_leaf_words_replay(load):
    P = load("so3")
    cloud = leaf_sample(P, [0, 0.5, 0], 20, seed=3)
    for i in (0, 7, 19):
        x = np.array(cloud.base)
        for gen, t in cloud.word(i):
            x = flow_point(anchor_of(P, P.gen(gen)), x, t)
        assert np.allclose(x, cloud.points[i], atol=1e-12)


def test_leaf_is_seeded(load):
    P = load("so3")
    assert leaf_sample(P, [1, 0, 0], 30, seed=1).points == leaf_sample(P, [1, 0, 0], 30, seed=1).points
    assert leaf_sample(P, [1, 0, 0], 30, seed=1).points != leaf_sample(P, [1, 0, 0], 30, seed=2).points


def test_zero_structure_cloud_is_base_point():
    R2 = Chart("R2", ("x", "y"))
    P = LRPresentation(R2, ["a"], [[0, 0]], None)
    cloud = leaf_sample(P, [0.5, 0.5], 25, seed=0)
    assert {tuple(q) for q in cloud.points} == {(0.5, 0.5)}


def test_tangent_cloud_is_two_dimensional(load):
    P = load("tangent_r2")
    pts = np.array(leaf_sample(P, [0, 0], 300, seed=5).points)
    assert np.ptp(pts[:, 0]) > 0.5 and np.ptp(pts[:, 1]) > 0.5
    assert np.linalg.matrix_rank(pts - pts.mean(axis=0)) == 2


def test_leaf_escapes_are_counted():
    R = Chart("R", ("x",), ((-0.1, 0.1),))
    P = LRPresentation(R, ["a"], [[1]], None)
    cloud = leaf_sample(P, [0.0], 50, seed=0, cfg=IntegratorConfig(margin=0.0))
    assert cloud.escaped > 0
    assert all(abs(q[0]) <= 0.1 for q in cloud.points)


def test_leaf_budget_must_be_positive(load):
    with pytest.raises(ValueError):
        leaf_sample(load("so3"), [1, 0, 0], 0)


def test_leaf_csv_layout(load):
    cloud = leaf_sample(load("so3"), [1, 0, 0], 4, seed=2)
    lines = cloud.to_csv().splitlines()
    assert lines[0] == "x,y,z"
    assert len(lines) == 1 + 4 + 4
    assert all(line.startswith("# word=") for line in lines[5:])


@pytest.mark.parametrize(
    "name,p,dim",
    [("so3", [1, 0, 0], 2), ("so3", [0, 0, 0], 0), ("tangent_r3", [0.3, -2, 5], 3), ("so3", [0.2, 0.3, -0.1], 2)],
)
def test_leaf_dimension(load, name, p, dim):
    assert leaf_dimension(load(name), p) == dim


def test_leaf_dimension_point_chart():
    assert leaf_dimension(LRPresentation(point_chart(), ["a"], None, None), []) == 0


def test_same_leaf_on_sphere(load):
    res = same_leaf(load("so3"), [1, 0, 0], [0, 0, 1], tol=1e-4, budget=6)
    assert res.connected and res.distance < 1e-4
    # replay the word to confirm it lands at the target
    P = load("so3")
    x = np.array([1.0, 0, 0])
    for gen, t in res.word:
        x = flow_point(anchor_of(P, P.gen(gen)), x, t)
    assert np.linalg.norm(x - [0, 0, 1]) < 1e-4


def test_same_leaf_identical_points(load):
    res = same_leaf(load("so3"), [0.3, 0.4, 0], [0.3, 0.4, 0])
    assert res.connected and res.word == ()


@pytest.mark.parametrize("budget", [2, 8])
def test_same_leaf_different_radii_unknown(load, budget):
    res = same_leaf(load("so3"), [1, 0, 0], [2, 0, 0], budget=budget)
    assert res.verdict == "Unknown" and res.distance > 0.5
