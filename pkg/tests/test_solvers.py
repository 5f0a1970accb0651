import numpy as np
import pytest

from glmavg import solvers as sv
from glmavg.errors import CFLError, InvariantViolation, UnsupportedManifoldError
from glmavg.geometry import VectorField, circle, torus
from glmavg.geometry import calculus as calc


def sine(m):
    return VectorField(m, np.sin(m.nodes[0])[None])


# --------------------------------------------------------------------------- Camassa-Holm

def test_ch_zero_stays_zero():
    m = circle(32)
    traj, diag = sv.solve_ch(VectorField.zeros(m), 0.5, 0.5, 1e-2, save_every=10)
    assert max(np.abs(s.u.values).max() for s in traj) == 0.0
    assert max(diag.energy) == 0.0


def test_ch_conservation_smooth():
    m = circle(64)
    traj, diag = sv.solve_ch(sine(m), 0.5, 2.0, 1e-3, save_every=200)
    assert diag.energy_drift() <= 1e-8
    mom = np.array(diag.momentum)
    assert np.abs(mom - mom[0]).max() <= 1e-10 * np.sum(m.weights * np.abs(traj[0].m.values))


def test_ch_helmholtz_consistency():
    m = circle(64)
    traj, _ = sv.solve_ch(sine(m) * 0.5, 0.3, 0.5, 1e-3, save_every=100)
    for s in traj:
        assert np.abs(calc.helmholtz_apply(s.u, 0.3).values - s.m.values).max() <= 1e-10


def test_ch_diagnostics_lengths():
    m = circle(32)
    traj, diag = sv.solve_ch(sine(m), 0.5, 1.0, 1e-2, save_every=10)
    assert len(traj) == len(diag.t) == len(diag.energy) == len(diag.momentum) == 11
    assert diag.t[-1] == pytest.approx(1.0)


def test_ch_rk4_order():
    m = circle(64)
    u0 = sine(m)
    ref = sv.solve_ch(u0, 0.5, 1.0, 1e-3, save_every=1000)[0][-1].u.values
    errs = [np.abs(sv.solve_ch(u0, 0.5, 1.0, dt, save_every=int(round(1 / dt)))[0][-1].u.values - ref).max()
            for dt in (0.025, 0.0125)]
    assert np.log2(errs[0] / errs[1]) == pytest.approx(4.0, abs=0.2)


def test_ch_spectral_convergence():
    finals = {}
    for n in (64, 128, 256):
        m = circle(n)
        finals[n] = sv.solve_ch(sine(m), 0.5, 0.5, 1e-3, save_every=500)[0][-1].u.values[0]
    # coarse nodes are every other fine node
    gaps = [np.abs(finals[n] - finals[2 * n][::2]).max() for n in (64, 128)]
    assert gaps[1] < 1e-6 and gaps[1] < gaps[0] / 100


def test_peakon_travels_at_its_amplitude():
    m = circle(512)
    u0 = sv.peakon(m, 0.2, c=1.0)
    traj, _ = sv.solve_ch(u0, 0.2, 1.0, 1e-3, save_every=1000)
    crest = m.nodes[0][np.argmax(traj[-1].u.values[0])]
    assert abs(crest - 1.0) <= 2 * 2 * np.pi / 512
    assert traj[-1].u.values.max() == pytest.approx(1.0, abs=0.02)


def test_peakon_preset_shape():
    m = circle(256)
    u = sv.peakon(m, 0.2, 2.0)
    assert u.values[0, 0] == pytest.approx(2.0)
    assert np.isfinite(sv.peakon(m, 0.001).values).all()


def test_ch_errors():
    with pytest.raises(UnsupportedManifoldError):
        sv.solve_ch(VectorField.zeros(torus(8)), 0.5, 1.0, 1e-2)
    with pytest.raises(ValueError):
        sv.solve_ch(sine(circle(16)), 0.0, 1.0, 1e-2)
    with pytest.raises(CFLError):
        sv.solve_ch(sine(circle(256)) * 10.0, 0.5, 1.0, 0.5)


# --------------------------------------------------------------------------- EPDiff / Euler-alpha

def test_epdiff_zero():
    m = torus(16)
    traj, diag = sv.solve_epdiff_2d(VectorField.zeros(m), 0.5, 0.2, 1e-2, save_every=5)
    assert max(np.abs(s.u.values).max() for s in traj) == 0.0


def test_epdiff_reduces_to_ch():
    m = torus(32, 8)
    u0 = VectorField(m, np.stack([np.sin(m.nodes[0]) + 0.3 * np.cos(2 * m.nodes[0]), np.zeros(m.shape)]))
    traj, _ = sv.solve_epdiff_2d(u0, 0.5, 0.5, 1e-3, save_every=500)
    c = circle(32)
    ref = sv.solve_ch(VectorField(c, u0.values[0][:, 0][None]), 0.5, 0.5, 1e-3, save_every=500)[0][-1].u.values[0]
    assert np.abs(traj[-1].u.values[0] - ref[:, None]).max() <= 1e-8
    assert np.abs(traj[-1].u.values[1]).max() <= 1e-8


def test_epdiff_energy():
    m = torus(32)
    _, diag = sv.solve_epdiff_2d(sv.random_smooth(m, 1), 0.3, 1.0, 1e-3, save_every=250)
    assert diag.energy_drift() <= 1e-8


@pytest.mark.slow
def test_epdiff_energy_full_grid():
    m = torus(128)
    _, diag = sv.solve_epdiff_2d(sv.random_smooth(m, 0), 0.3, 5.0, 1e-3, save_every=1000)
    assert diag.energy_drift() <= 1e-8


@pytest.mark.parametrize("eps", [0.0, 0.5])
def test_euler_alpha_shear_steady(eps):
    m = torus(32)
    u0 = sv.preset("shear", m)
    traj, diag = sv.solve_euler_alpha_2d(u0, eps, 1.0, 1e-3, save_every=250)
    assert np.abs(traj[-1].u.values - u0.values).max() <= 1e-10
    assert max(diag.div_sup) <= 1e-10


def test_euler_taylor_green_steady():
    m = torus(32)
    u0 = sv.preset("taylor-green", m)
    traj, _ = sv.solve_euler_alpha_2d(u0, 0.0, 1.0, 1e-3, save_every=1000)
    assert np.abs(traj[-1].u.values - u0.values).max() <= 1e-8


def test_euler_alpha_energy_and_divergence():
    m = torus(32)
    u0 = sv.random_smooth(m, 4, divergence_free=True)
    traj, diag = sv.solve_euler_alpha_2d(u0, 0.3, 2.0, 1e-3, save_every=500)
    assert diag.energy_drift() <= 1e-8
    assert max(diag.div_sup) <= 1e-10
    for s in traj:
        assert np.abs(calc.helmholtz_apply(s.u, 0.3).values - s.m.values).max() <= 1e-10


def test_euler_alpha_rejects_compressible():
    m = torus(16)
    with pytest.raises(InvariantViolation):
        sv.solve_euler_alpha_2d(sv.preset("sine", m), 0.3, 1.0, 1e-2)


def test_presets():
    assert set(sv.PRESETS) == {"zero", "shear", "taylor-green", "peakon", "random", "sine"}
    with pytest.raises(ValueError):
        sv.preset("vortex", torus(8))
    with pytest.raises(UnsupportedManifoldError):
        sv.preset("peakon", torus(8), 0.2)
    u = sv.random_smooth(torus(16), 0, divergence_free=True)
    assert calc.divergence(u).sup() < 1e-12


# --------------------------------------------------------------------------- action

def _action_setup(T=1.0):
    m = circle(64)
    u0 = sine(m)
    traj, _ = sv.solve_ch(u0, 0.5, T, 1e-3, save_every=5)
    # the coadjoint term of sin x lives on mode 2, so G needs a mode-2 part
    G = np.cos(m.nodes[0]) + 0.3 * np.sin(2 * m.nodes[0])
    w = lambda t: VectorField(m, (np.sin(np.pi * t / T) ** 2 * G)[None])  # noqa: E731
    wd = lambda t: VectorField(m, (np.pi / T * np.sin(2 * np.pi * t / T) * G)[None])  # noqa: E731
    return m, u0, traj, w, wd


def test_action_zero_variation():
    m, u0, traj, w, wd = _action_setup()
    zero = lambda t: VectorField.zeros(m)  # noqa: E731
    rep = sv.action_stationarity_check(traj, zero, w_dot=zero)
    assert all(d == 0.0 for d in rep.differences)


def test_action_solution_and_control():
    m, u0, traj, w, wd = _action_setup()
    sol = sv.action_stationarity_check(traj, w, w_dot=wd)
    ctl = sv.action_stationarity_check(sv.frozen_trajectory(u0, 0.5, 1.0, len(traj)), w, w_dot=wd)
    assert sol.slope == pytest.approx(2.0, abs=0.1)
    assert ctl.slope == pytest.approx(1.0, abs=0.1)


def test_action_requires_vanishing_endpoints():
    m, u0, traj, w, wd = _action_setup()
    with pytest.raises(ValueError):
        sv.action_stationarity_check(traj, lambda t: sine(m))
