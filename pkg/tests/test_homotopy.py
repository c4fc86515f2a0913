import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from conftest import fixture_path
from lrkit.expr import Chart, point_chart
from lrkit.flows import IntegratorConfig
from lrkit.fileformat import parse_model_file, parse_path_file, parse_square_file, read_text
from lrkit.homotopy import (
    PINNED_TAUS,
    MatrixAlgebraModel,
    ModelError,
    PathError,
    apath_report,
    apath_residual,
    boundary_report,
    concatenate_paths,
    constant_path,
    groupoid_law_report,
    holonomy,
    is_lazy,
    lazify_path,
    lr_path,
    lr_square,
    random_lazy_path,
    reparameterize_path,
    reverse_path,
    square_residual,
)
from lrkit.presentation import LRPresentation


def _rot(axis, theta):
    """Rodrigues formula for a rotation by ``theta`` about a unit axis."""
    k = np.asarray(axis, float)
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + math.sin(theta) * K + (1 - math.cos(theta)) * K @ K


@pytest.fixture(scope="module")
def g():
    from lrkit.fileformat import load_structure

    return load_structure(fixture_path("so3_algebra.lrs"))


@pytest.fixture(scope="module")
def model(g):
    return parse_model_file(read_text(fixture_path("so3_model.txt")), g)


@pytest.fixture(scope="module")
def lazy(g):
    return [parse_path_file(read_text(fixture_path(f"lazy{i}.lrp")), g) for i in (1, 2, 3)]


def _ordered_exponential(model, path):
    """Independent oracle: scipy's adaptive integrator on g' = g A(t), piece by piece."""
    N = model.N
    g = np.eye(N)
    for piece in path.pieces:
        def rhs(t, y):
            a = path.evaluate(t, path.pieces.index(piece))[2]
            return (y.reshape(N, N) @ model.algebra_element(a)).ravel()

        sol = solve_ivp(rhs, (piece.t0, piece.t1), g.ravel(), rtol=1e-12, atol=1e-13)
        g = sol.y[:, -1].reshape(N, N)
    return g


# ---------------------------------------------------------------------------
# A-path residuals


def test_tangent_square_path_is_exact(load):
    P = load("tangent_r1")
    assert apath_residual(lr_path(P, ["t^2"], ["2*t"]))[0] == 0


def test_circle_path(load):
    # rho(e3) = (y, -x, 0), so the counterclockwise circle needs a = -e3
    P = load("so3")
    assert apath_residual(lr_path(P, ["cos(t)", "sin(t)", "0"], ["0", "0", "-1"]))[0] < 1e-12
    assert apath_residual(lr_path(P, ["cos(t)", "-sin(t)", "0"], ["0", "0", "1"]))[0] < 1e-12


def test_non_apath_witness(load):
    P = load("so3")
    value, t = apath_residual(lr_path(P, ["t", "0", "0"], ["0", "0", "0"]))
    assert value == pytest.approx(1.0)
    assert not apath_report(lr_path(P, ["t", "0", "0"], ["0", "0", "0"])).ok


def test_circle_fixture_is_valid(load):
    P = load("so3")
    path = parse_path_file(read_text(fixture_path("circle.lrp")), P)
    assert apath_report(path).ok
    assert np.allclose(path.end(), [0, -1, 0], atol=1e-15)


# ---------------------------------------------------------------------------
# squares


def test_square_with_static_t_direction_is_flat(g):
    sq = lr_square(g, [], ["s^2", "sin(s)", "1"], ["0", "0", "0"])
    assert square_residual(sq).family_ok("flatness")


def test_abelian_constant_square_is_flat():
    A = LRPresentation(point_chart(), ["a", "b"], None, None)
    sq = lr_square(A, [], ["2", "-1"], ["1/2", "3"])
    assert square_residual(sq).ok


def test_mismatched_square_has_flatness_witness(g):
    sq = lr_square(g, [], ["1", "0", "0"], ["0", "t", "0"])
    flat = square_residual(sq).family("flatness")[0]
    assert not flat.passed
    # the bracket term is a_t^2 a_s^1 [e2, e1] = -t e3, largest at t = 1
    assert flat.value == pytest.approx(1.0) and flat.point[1] == pytest.approx(1.0)


def test_flat_fixture_square(g):
    sq = parse_square_file(read_text(fixture_path("flat.lrq")), g)
    assert square_residual(sq).ok
    assert boundary_report(sq).data["fixed_ends"]


def test_control_square_is_not_flat(g):
    sq = parse_square_file(read_text(fixture_path("control.lrq")), g)
    assert not square_residual(sq).family_ok("flatness")
    assert boundary_report(sq).data["fixed_ends"]


def test_square_apath_directions(load):
    # gamma(s, t) = (cos(s + t), -sin(s + t), 0) moves along rho(e3) in both directions
    P = load("so3")
    sq = lr_square(P, ["cos(s + t)", "-sin(s + t)", "0"], ["0", "0", "1"], ["0", "0", "1"])
    assert square_residual(sq).ok
    bad = lr_square(P, ["cos(s + t)", "-sin(s + t)", "0"], ["0", "0", "1"], ["0", "0", "2"])
    assert not square_residual(bad).family_ok("apath_t")


# ---------------------------------------------------------------------------
# path operations


def test_reverse_twice_is_identity(load):
    P = load("so3")
    path = lr_path(P, ["cos(t)", "-sin(t)", "t^2"], ["t", "0", "1"])
    twice = reverse_path(reverse_path(path))
    for t in np.linspace(0, 1, 9):
        a, b = path.evaluate(t), twice.evaluate(t)
        assert all(np.allclose(x, y, atol=1e-14) for x, y in zip(a, b))


def test_reverse_constant_path(load):
    P = load("so3")
    c = constant_path(P, [0.2, 0.1, 0.0])
    r = reverse_path(c)
    assert np.allclose(r.gamma_at(0.3), [0.2, 0.1, 0.0]) and np.allclose(r.a_at(0.3), 0)


def test_reverse_tangent_line(load):
    P = load("tangent_r1")
    r = reverse_path(lr_path(P, ["t"], ["1"]))
    assert r.gamma_at(0.25)[0] == pytest.approx(0.75)
    assert r.a_at(0.25)[0] == -1
    assert apath_residual(r)[0] == 0


def test_reparameterize_identity(load):
    P = load("so3")
    path = parse_path_file(read_text(fixture_path("circle.lrp")), P)
    same = reparameterize_path(path, "t")
    for t in np.linspace(0, 1, 7):
        assert np.allclose(same.gamma_at(t), path.gamma_at(t), atol=1e-15)
        assert np.allclose(same.a_at(t), path.a_at(t), atol=1e-15)


def test_reparameterize_square(load):
    P = load("tangent_r1")
    path = reparameterize_path(lr_path(P, ["t"], ["1"]), "t^2")
    assert path.gamma_at(0.5)[0] == pytest.approx(0.25)
    assert path.a_at(0.5)[0] == pytest.approx(1.0)
    assert apath_residual(path)[0] < 1e-15


@pytest.mark.parametrize("tau", ["t + 1", "1 - t", "sin(t)"])
def test_reparameterize_rejects_bad_tau(load, tau):
    P = load("tangent_r1")
    with pytest.raises(PathError):
        reparameterize_path(lr_path(P, ["t"], ["1"]), tau)


def test_lazify_zeroes_the_ends(load):
    P = load("so3")
    path = lazify_path(parse_path_file(read_text(fixture_path("circle.lrp")), P))
    assert is_lazy(path)
    for t in (0.0, 0.05, 0.95, 1.0):
        assert np.linalg.norm(path.a_at(t)) < 1e-12
    assert np.allclose(path.end(), [0, -1, 0], atol=1e-12)


def test_lazify_keeps_apath_residual(load):
    P = load("so3")
    path = parse_path_file(read_text(fixture_path("circle.lrp")), P)
    assert abs(apath_residual(lazify_path(path))[0] - apath_residual(path)[0]) < 1e-9


def test_lazify_constant_path(load):
    P = load("so3")
    c = lazify_path(constant_path(P, [1, 2, 3]))
    for t in np.linspace(0, 1, 11):
        assert np.allclose(c.gamma_at(t), [1, 2, 3]) and np.allclose(c.a_at(t), 0)


def test_concatenation_endpoint_and_laziness(load):
    P = load("so3")
    circle = parse_path_file(read_text(fixture_path("circle.lrp")), P)
    with pytest.raises(PathError):
        concatenate_paths(circle, circle)
    lz = lazify_path(circle)
    with pytest.raises(PathError):
        concatenate_paths(lz, lz)
    back = reverse_path(lz)
    loop = concatenate_paths(lz, back)
    assert np.allclose(loop.end(), [1, 0, 0], atol=1e-12)
    assert apath_residual(loop)[0] <= apath_residual(lz)[0] + 1e-9


# ---------------------------------------------------------------------------
# boundaries


def test_lazy_loop_is_a_sphere(load):
    P = load("so3")
    loop = lazify_path(lr_path(P, ["cos(2*pi*t)", "-sin(2*pi*t)", "0"], ["0", "0", "2*pi"]))
    assert boundary_report(loop).data["sphere"]


def test_open_path_is_not_a_sphere(load):
    P = load("so3")
    report = boundary_report(parse_path_file(read_text(fixture_path("circle.lrp")), P))
    assert not report.data["sphere"]
    assert any(r.name.startswith("face") for r in report.failures())


def test_relation_vector_has_zero_fiber_on_faces(load):
    # at x = 1 the relation (x, -x) spans (1, -1), so this a is fiberwise zero
    P = load("rel1")
    path = lr_path(P, ["1"], ["1", "-1"])
    assert apath_residual(path)[0] == 0
    report = boundary_report(path)
    assert report.data["sphere"]
    assert all(r.value < 1e-12 for r in report.residuals)


# ---------------------------------------------------------------------------
# holonomy


def test_model_commutators(model):
    assert model.commutator_residual < 1e-12


def test_model_rejects_wrong_matrices(g):
    with pytest.raises(ModelError):
        MatrixAlgebraModel(g, [np.eye(3), np.zeros((3, 3)), np.zeros((3, 3))])
    with pytest.raises(ModelError):
        MatrixAlgebraModel(g, [np.eye(3)])


def test_constant_holonomy_is_exponential(g, model):
    xi = np.array([0.4, -0.9, 1.3])
    h = holonomy(model, lr_path(g, [], xi.tolist()))
    assert np.allclose(h.matrix, expm(model.algebra_element(xi)), atol=1e-8)


def test_zero_path_holonomy(g, model):
    assert np.array_equal(holonomy(model, constant_path(g, [])).matrix, np.eye(3))


def test_rotation_holonomy_rodrigues(g, model):
    h = holonomy(model, lr_path(g, [], ["0", "0", "1"]))
    assert np.allclose(h.matrix, _rot([0, 0, 1], 1.0), atol=1e-8)


def test_holonomy_matches_ordered_exponential(model, lazy):
    for path in lazy:
        assert np.allclose(holonomy(model, path).matrix, _ordered_exponential(model, path), atol=1e-8)


@pytest.mark.parametrize("tau", PINNED_TAUS)
def test_holonomy_reparameterization_invariance(model, lazy, tau):
    for path in lazy:
        got = holonomy(model, reparameterize_path(path, tau)).matrix
        assert np.allclose(got, holonomy(model, path).matrix, atol=1e-8)


def test_holonomy_lazify_invariance(g, model):
    path = lr_path(g, [], ["t", "1 - t^2", "sin(3*t)"])
    assert np.allclose(holonomy(model, lazify_path(path)).matrix, holonomy(model, path).matrix, atol=1e-8)


def test_reverse_inverts_holonomy(model, lazy):
    for p in lazy:
        assert np.allclose(holonomy(model, reverse_path(p)).matrix @ holonomy(model, p).matrix, np.eye(3), atol=1e-6)
        loop = concatenate_paths(reverse_path(p), p)
        assert np.allclose(holonomy(model, loop).matrix, np.eye(3), atol=1e-6)


def test_unit_law(g, model, lazy):
    p = lazy[0]
    h = holonomy(model, concatenate_paths(p, constant_path(g, []))).matrix
    assert np.allclose(h, holonomy(model, p).matrix, atol=1e-8)


def test_product_convention(model, lazy):
    p, q = lazy[:2]
    hp, hq = holonomy(model, p).matrix, holonomy(model, q).matrix
    assert np.allclose(holonomy(model, concatenate_paths(p, q)).matrix, hp @ hq, atol=1e-6)
    left = holonomy(model, concatenate_paths(p, q), side="left").matrix
    assert np.allclose(left, holonomy(model, q, side="left").matrix @ holonomy(model, p, side="left").matrix, atol=1e-6)
    with pytest.raises(ValueError):
        holonomy(model, p, side="up")


def test_abelian_concatenation_exponential():
    A = LRPresentation(point_chart(), ["a", "b"], None, None)
    M = MatrixAlgebraModel(A, [np.diag([1.0, 0.0]), np.diag([0.0, 2.0])])
    xi, eta = [0.3, -0.2], [0.5, 0.7]
    p = lazify_path(lr_path(A, [], xi))
    q = lazify_path(lr_path(A, [], eta))
    want = expm(M.algebra_element(np.add(xi, eta)))
    assert np.allclose(holonomy(M, concatenate_paths(p, q)).matrix, want, atol=1e-8)


def test_random_lazy_paths_are_lazy_and_seeded(g):
    a = random_lazy_path(g, np.random.default_rng(5))
    b = random_lazy_path(g, np.random.default_rng(5))
    assert is_lazy(a) and str(a) == str(b)
    with pytest.raises(PathError):
        random_lazy_path(LRPresentation(Chart("R", ("x",)), ["a"], [[1]], None), np.random.default_rng(0))


# ---------------------------------------------------------------------------
# the law suite


def test_law_suite_on_fixtures(g, model, lazy):
    flat = parse_square_file(read_text(fixture_path("flat.lrq")), g)
    control = parse_square_file(read_text(fixture_path("control.lrq")), g)
    report = groupoid_law_report(model, lazy, square=flat, control=control)
    assert report.ok, [(r.name, r.value) for r in report.failures()]
    fams = {r.family for r in report.residuals}
    assert {"reparameterization", "unit", "inverse", "associativity", "product", "homotopy_invariance", "control"} <= fams
    assert all(r.value < 1e-6 for r in report.residuals if r.family != "control")
    assert report.data["control_gap"] > 1e-3


def test_law_suite_random_paths(g, model):
    rng = np.random.default_rng(99)
    paths = [random_lazy_path(g, rng) for _ in range(3)]
    assert groupoid_law_report(model, paths).ok


def test_law_suite_abelian_associativity_is_exact():
    A = LRPresentation(point_chart(), ["a", "b"], None, None)
    M = MatrixAlgebraModel(A, [np.diag([1.0, -1.0]), np.diag([0.5, 2.0])])
    rng = np.random.default_rng(3)
    paths = [random_lazy_path(A, rng) for _ in range(3)]
    # commuting holonomies: the only error left is RK4 truncation, which
    # shrinks at fourth order when the step is halved
    coarse = groupoid_law_report(M, paths, IntegratorConfig(step=1e-3)).family("associativity")[0].value
    fine = groupoid_law_report(M, paths, IntegratorConfig(step=5e-4)).family("associativity")[0].value
    assert coarse < 1e-9
    assert 8 < coarse / fine < 32


def test_law_suite_needs_lazy_paths(g, model):
    with pytest.raises(PathError):
        groupoid_law_report(model, [lr_path(g, [], ["1", "0", "0"])] * 3)
