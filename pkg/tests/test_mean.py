import numpy as np
import pytest

from glmavg import diffeo as dg
from glmavg import mean as mn
from glmavg.errors import ConvergenceError, InvariantViolation, UnsupportedManifoldError
from glmavg.experiments import random_members, shear_members
from glmavg.geometry import calculus as calc
from glmavg.geometry import circle, torus


def test_three_shifts_circle():
    m = circle(64)
    res = mn.karcher_mean([dg.Diffeo.shift(m, a) for a in (0.3, -0.2, 0.5)])
    assert res.converged
    assert np.abs(res.mean.disp - 0.2).max() < 1e-8


def test_three_shifts_torus():
    m = torus(16)
    shifts = [np.array([0.3, 0.1]), np.array([-0.2, 0.4]), np.array([0.5, -0.2])]
    res = mn.karcher_mean([dg.Diffeo.shift(m, a) for a in shifts])
    assert np.abs(res.mean.disp - np.mean(shifts, axis=0).reshape(2, 1, 1)).max() < 1e-8


def test_weighted_shifts():
    m = circle(32)
    res = mn.karcher_mean([dg.Diffeo.shift(m, a) for a in (0.0, 0.6)], weights=[0.75, 0.25])
    assert np.abs(res.mean.disp - 0.15).max() < 1e-12


def test_single_member_is_its_own_mean():
    m = circle(32)
    phi = dg.Diffeo.from_displacement(m, lambda x: 0.2 * np.sin(x))
    res = mn.karcher_mean([phi])
    assert res.iterations == 0 and np.abs(res.mean.disp - phi.disp).max() == 0.0


@pytest.mark.parametrize("m", [circle(64), torus(32)])
def test_random_ensemble_converges(m):
    members = random_members(m, 8, 0.05, 0)
    res = mn.karcher_mean(members, tol=1e-12)
    assert res.residual <= 1e-10
    assert all(b <= a + 1e-12 for a, b in zip(res.objective_history, res.objective_history[1:]))
    # at the mean the averaged logarithm vanishes
    p = np.full(len(members), 1.0 / len(members))
    assert res.mean_log(p).l2() < 1e-9


def test_mean_is_order_independent():
    m = circle(64)
    members = random_members(m, 5, 0.05, 3)
    a = mn.karcher_mean(members, tol=1e-12).mean.disp
    b = mn.karcher_mean(members[::-1], tol=1e-12).mean.disp
    assert np.abs(a - b).max() < 1e-13


def test_convergence_error_carries_result():
    m = circle(64)
    members = random_members(m, 4, 0.05, 1)
    with pytest.raises(ConvergenceError) as info:
        mn.karcher_mean(members, maxiter=0, tol=1e-30)
    assert info.value.result is not None and not info.value.result.converged


def test_bad_weights():
    m = circle(16)
    with pytest.raises(ValueError):
        mn.karcher_mean([dg.Diffeo.identity(m)] * 2, weights=[0.7, 0.7])


def test_constrained_requires_torus():
    with pytest.raises(UnsupportedManifoldError):
        mn.karcher_mean_volume_constrained([dg.Diffeo.identity(circle(16))])


def test_constrained_rejects_compressible_members():
    m = torus(16)
    bad = dg.Diffeo.from_displacement(m, lambda X: np.stack([0.2 * np.sin(X[0]), 0 * X[1]]))
    with pytest.raises(InvariantViolation):
        mn.karcher_mean_volume_constrained([bad, dg.Diffeo.identity(m)])


def test_constrained_mean_is_volume_preserving_with_gradient_log():
    m = torus(32)
    members = shear_members(m, 6, 0.05, 0)
    res = mn.karcher_mean_volume_constrained(members, tol=1e-12, method="spectral")
    assert res.mean.volume_defect() < 1e-6
    avg_log = mn.weighted_sum(res.fluctuation_logs, np.full(6, 1 / 6))
    assert calc.leray_project(avg_log).l2() <= 1e-6 * avg_log.l2()
    # the gradient part is ∇ψ
    assert (calc.gradient(res.psi) - avg_log).l2() <= 1e-6 * avg_log.l2()


def test_result_serialises():
    m = circle(32)
    d = mn.karcher_mean([dg.Diffeo.shift(m, a) for a in (0.1, 0.2)]).to_dict()
    assert set(d) >= {"iterations", "converged", "residual", "residual_history", "objective_history"}
