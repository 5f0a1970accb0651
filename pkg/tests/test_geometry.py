import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from glmavg.errors import ManifoldMismatchError, SolvabilityError, TangencyError, UnsupportedManifoldError
from glmavg.geometry import ScalarField, VectorField, circle, make_manifold, sphere, torus
from glmavg.geometry import calculus as calc
from glmavg.geometry.calculus import LaplacianKind
from glmavg.geometry.sphere import killing
from glmavg.geometry.testfields import random_trig_field, random_trig_scalar

TWO_PI = 2 * np.pi


@pytest.fixture(scope="module")
def s2():
    return sphere(32, 64)


@pytest.fixture(scope="module")
def t2():
    return torus(32)


# --------------------------------------------------------------------------- grids and quadrature

@pytest.mark.parametrize("m, vol", [(circle(16), TWO_PI), (torus(8, 12), TWO_PI**2), (sphere(8), 4 * np.pi)])
def test_quadrature_volume(m, vol):
    assert calc.integrate(ScalarField.constant(m, 1.0)) == pytest.approx(vol, rel=1e-14)


def test_sphere_quadrature_polynomial(s2):
    z2 = ScalarField.from_function(s2, lambda p: p[2] ** 2)
    assert calc.integrate(z2) == pytest.approx(4 * np.pi / 3, rel=1e-13)


def test_sphere_grid_avoids_poles():
    m = sphere(16)
    assert np.abs(m.nodes[2]).max() < 1.0 - 1e-4


@pytest.mark.parametrize("bad", [lambda: circle(7), lambda: torus(2), lambda: sphere(3)])
def test_bad_resolution(bad):
    with pytest.raises(ValueError):
        bad()


def test_make_manifold_round_trip():
    m = make_manifold("T2", [8, 10])
    assert m.shape == (8, 10) and m.describe() == {"kind": "T2", "resolution": [8, 10]}


# --------------------------------------------------------------------------- fields

def test_tangency_enforced(s2):
    with pytest.raises(TangencyError):
        VectorField(s2, np.array(s2.nodes))


def test_projection_makes_tangent(s2):
    v = VectorField.from_function(s2, lambda p: np.broadcast_to(np.array([0.0, 0.0, 1.0]).reshape(3, 1, 1), p.shape))
    assert np.abs(np.sum(v.values * s2.nodes, axis=0)).max() < 1e-14


def test_manifold_mismatch():
    a, b = VectorField.zeros(torus(8)), VectorField.zeros(torus(16))
    with pytest.raises(ManifoldMismatchError):
        calc.l2_inner(a, b)


def test_values_are_read_only(t2):
    u = random_trig_field(t2, 0)
    with pytest.raises(ValueError):
        u.values[0, 0, 0] = 1.0


# --------------------------------------------------------------------------- flat calculus

def test_torus_gradient_exact(t2):
    x, y = t2.nodes
    f = ScalarField(t2, np.sin(x) * np.cos(2 * y))
    g = calc.gradient(f)
    assert np.abs(g.values[0] - np.cos(x) * np.cos(2 * y)).max() < 1e-13
    assert np.abs(g.values[1] + 2 * np.sin(x) * np.sin(2 * y)).max() < 1e-13


def test_torus_bracket_exact(t2):
    x, y = t2.nodes
    u = VectorField(t2, np.stack([np.sin(y), np.zeros(t2.shape)]))
    w = VectorField(t2, np.stack([np.zeros(t2.shape), np.ones(t2.shape)]))
    # [u, e_y] = ∇_u e_y - ∇_{e_y} u = -(cos y, 0)
    br = calc.lie_bracket(u, w)
    assert np.abs(br.values[0] + np.cos(y)).max() < 1e-13
    assert np.abs(br.values[1]).max() < 1e-13


def test_green_shear_torus():
    m = torus(64)
    u = VectorField(m, np.stack([np.sin(m.nodes[1]), np.zeros(m.shape)]))
    lhs, rhs = calc.green_deformation(u, u)
    assert abs(lhs - 2 * np.pi**2) < 1e-10 and abs(rhs - 2 * np.pi**2) < 1e-10


def test_helmholtz_inverse(t2):
    u = random_trig_field(t2, 3)
    back = calc.helmholtz_solve(calc.helmholtz_apply(u, 0.3), 0.3)
    assert np.abs(back.values - u.values).max() < 1e-13


def test_leray_projection(t2):
    u = random_trig_field(t2, 4)
    p = calc.leray_project(u)
    assert calc.divergence(p).sup() < 1e-12
    assert np.abs(calc.leray_project(p).values - p.values).max() < 1e-13
    grad = calc.gradient(random_trig_scalar(t2, 5))
    assert calc.leray_project(grad).sup() < 1e-12


def test_poisson_requires_mean_zero(t2):
    with pytest.raises(SolvabilityError):
        calc.poisson_solve(ScalarField.constant(t2, 1.0))


def test_poisson_solves(t2):
    f = random_trig_scalar(t2, 6)
    f = ScalarField(t2, f.values - f.values.mean())
    phi = calc.poisson_solve(f)
    assert np.abs(calc.scalar_laplacian(phi).values - f.values).max() < 1e-12


def test_poisson_unsupported_on_sphere(s2):
    with pytest.raises(UnsupportedManifoldError):
        calc.poisson_solve(ScalarField.constant(s2, 0.0))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 10_000))
def test_flat_identities_random(seed_u, seed_v):
    m = torus(16)
    u, v = random_trig_field(m, seed_u), random_trig_field(m, seed_v)
    # antisymmetry of the bracket, symmetry of the metric, dissipativity of the Laplacian
    assert np.abs((calc.lie_bracket(u, v) + calc.lie_bracket(v, u)).values).max() < 1e-12
    assert calc.l2_inner(u, v) == pytest.approx(calc.l2_inner(v, u), abs=1e-12)
    assert calc.l2_inner(u, calc.laplacian(u)) <= 1e-12
    lhs, rhs = calc.green_deformation(u, v)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))
    lhs, rhs = calc.green_gradient(u, v)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_deformation_symmetric(t2):
    D = calc.deformation(random_trig_field(t2, 7))
    assert np.abs(D.values - D.T.values).max() < 1e-14


def test_flat_curvature_vanishes(t2):
    u, v, w = (random_trig_field(t2, s) for s in (1, 2, 3))
    assert calc.riemann(u, v, w).sup() == 0.0
    assert calc.riemann_nested(u, v, w).sup() < 1e-11
    assert calc.ricci(u, v).sup() == 0.0


# --------------------------------------------------------------------------- sphere calculus

def test_sphere_gradient_of_height(s2):
    z = ScalarField.from_function(s2, lambda p: p[2])
    g = calc.gradient(z)
    p = s2.nodes
    expected = np.array([0.0, 0.0, 1.0]).reshape(3, 1, 1) - p[2] * p
    assert np.abs(g.values - expected).max() < 1e-6


def test_sphere_scalar_laplacian_degree_one(s2):
    z = ScalarField.from_function(s2, lambda p: p[2])
    assert np.abs(calc.scalar_laplacian(z).values + 2 * z.values).max() < 1e-5


def test_killing_divergence_free(s2):
    Lz = VectorField.from_function(s2, killing([0, 0, 1]))
    assert calc.divergence(Lz).sup() < 1e-6


def test_killing_bracket(s2):
    Lx, Ly, Lz = (VectorField.from_function(s2, killing(e)) for e in np.eye(3))
    assert (calc.lie_bracket(Lx, Ly) + Lz).sup() < 1e-5


def test_killing_laplacians(s2):
    Lz = VectorField.from_function(s2, killing([0, 0, 1]))
    assert (calc.laplacian(Lz, LaplacianKind.ROUGH) + Lz).sup() < 1e-5
    assert (calc.laplacian(Lz, LaplacianKind.HODGE) + 2 * Lz).sup() < 1e-5
    assert calc.laplacian(Lz, LaplacianKind.RICCI).sup() < 1e-5


def test_sphere_curvature_closed_form_matches_definition(s2):
    u, v, w = (random_trig_field(s2, s) for s in (11, 12, 13))
    diff = calc.riemann(u, v, w) - calc.riemann_nested(u, v, w)
    assert diff.sup() < 1e-4 * max(1.0, calc.riemann(u, v, w).sup())


def test_sphere_ricci_is_metric(s2):
    u = random_trig_field(s2, 14)
    assert np.abs(calc.ricci(u, u).values - calc.metric_inner(u, u).values).max() < 1e-14


def test_sphere_weitzenbock(s2):
    for seed in range(3):
        assert calc.weitzenbock_residual(random_trig_field(s2, seed)) < 1e-6


def test_sphere_green_random(s2):
    u, v = random_trig_field(s2, 21), random_trig_field(s2, 22)
    lhs, rhs = calc.green_deformation(u, v)
    assert abs(lhs - rhs) < 1e-6 * abs(lhs)
    lhs, rhs = calc.green_gradient(u, v)
    assert abs(lhs - rhs) < 1e-6 * abs(lhs)
