"""Pseudo-spectral Euler-Poincaré solvers on S¹ and T².

The state is the momentum ``m = (1 - ε²Δ) u`` held in Fourier space and kept
inside the 2/3 dealiasing band; ``u`` is recovered by Helmholtz inversion at
every RK4 stage. Quadratic products of band-limited fields are then exact, so
the semi-discrete systems conserve ``E = ½∫ g(m, u)`` exactly and the only
energy drift comes from the time stepper.

Tendencies (flat charts, summation over repeated indices):

    CH       m_t = -(1 - ε²∂²)(u u_x) - ∂_x(u² + ½ε² u_x²)   (= -(u m_x + 2 u_x m))
    EPDiff   m_t = -(u_j ∂_j m_i + m_j ∂_i u_j + m_i ∂_j u_j)
    Euler-α  m_t = -P(u_j ∂_j m_i + m_j ∂_i u_j),  P the Leray projector
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.fft as sfft

from .errors import BlowUpError, CFLError, InvariantViolation, UnsupportedManifoldError
from .geometry import calculus as calc
from .geometry.fields import VectorField
from .geometry.manifold import Manifold, ManifoldKind, circle, torus

log = logging.getLogger(__name__)

CFL_LIMIT = 2.5
BLOWUP_FACTOR = 10.0
DIV_TOL = 1e-10


def _workers():
    try:
        return max(1, int(os.environ.get("GLMAVG_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class SolverState:
    t: float
    u: VectorField
    m: VectorField
    eps: float
    step: int = 0
    dt: float = 0.0


@dataclass
class Diagnostics:
    t: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    momentum: list = field(default_factory=list)
    div_sup: list = field(default_factory=list)
    tail: list = field(default_factory=list)

    def rows(self):
        for i in range(len(self.t)):
            yield [self.t[i], self.energy[i], *self.momentum[i], self.div_sup[i], self.tail[i]]

    def header(self, ncomp):
        mom = ["int_m"] if ncomp == 1 else [f"int_m{i}" for i in range(ncomp)]
        return ["t", "E", *mom, "div_sup", "tail"]

    def energy_drift(self) -> float:
        e0 = self.energy[0]
        if e0 == 0:
            return float(max(abs(e) for e in self.energy))
        return float(max(abs(e - e0) for e in self.energy) / abs(e0))


class _Grid:
    """Real-FFT layout for a flat manifold."""

    def __init__(self, m: Manifold, eps: float, filter_order: Optional[int] = None):
        if not m.is_flat:
            raise UnsupportedManifoldError("solvers run on S1 and T2 only")
        self.m = m
        self.eps = eps
        self.axes = tuple(range(-len(m.shape), 0))
        ks = []
        for a, n in enumerate(m.shape):
            if a == len(m.shape) - 1:
                k = sfft.rfftfreq(n, 1.0 / n)
            else:
                k = sfft.fftfreq(n, 1.0 / n)
            shape = [1] * len(m.shape)
            shape[a] = -1
            ks.append(k.reshape(shape))
        self.k = ks
        self.k2 = sum(k**2 for k in ks)
        mask = np.ones(np.broadcast_shapes(*[k.shape for k in ks]), dtype=bool)
        for k, n in zip(ks, m.shape):
            mask = mask & (np.abs(k) <= (2.0 / 3.0) * (n // 2))
        self.mask = mask
        self.kmax = max(float(np.abs(k[np.broadcast_to(np.abs(k) <= (2.0 / 3.0) * (n // 2), k.shape)]).max())
                        for k, n in zip(ks, m.shape))
        self.helm = 1.0 + eps**2 * self.k2
        self.filt = None
        if filter_order:
            frac = np.sqrt(sum((k / (n // 2)) ** 2 for k, n in zip(ks, m.shape)))
            self.filt = np.exp(-36.0 * frac ** filter_order)
        self.workers = _workers()

    def fwd(self, a):
        return sfft.rfftn(a, axes=self.axes, workers=self.workers)

    def inv(self, a):
        return sfft.irfftn(a, s=self.m.shape, axes=self.axes, workers=self.workers)

    def d(self, ahat, axis):
        return self.inv(1j * self.k[axis] * ahat)

    def project_band(self, ahat):
        return np.where(self.mask, ahat, 0.0)

    def leray(self, vhat):
        k2 = np.where(self.k2 == 0, 1.0, self.k2)
        div = sum(self.k[j] * vhat[j] for j in range(len(self.k)))
        return np.stack([vhat[i] - self.k[i] * div / k2 for i in range(len(self.k))])


def _ch_tendency(g: _Grid, mhat):
    uhat = mhat / g.helm
    u = g.inv(uhat[0])
    ux = g.d(uhat[0], 0)
    uux = g.fwd(u * ux)
    flux = g.fwd(u * u + 0.5 * g.eps**2 * ux * ux)
    out = -(g.helm * uux + 1j * g.k[0] * flux)
    return g.project_band(out)[None]


def _epdiff_tendency(g: _Grid, mhat, incompressible=False):
    uhat = mhat / g.helm
    dim = len(g.k)
    ik = [1j * k for k in g.k]
    spec = [uhat[i] for i in range(dim)] + [mhat[i] for i in range(dim)]
    spec += [ik[j] * uhat[i] for i in range(dim) for j in range(dim)]
    spec += [ik[j] * mhat[i] for i in range(dim) for j in range(dim)]
    phys = g.inv(np.stack(spec))  # one batched transform
    u, mm = phys[:dim], phys[dim:2 * dim]
    du = phys[2 * dim:2 * dim + dim * dim].reshape((dim, dim) + phys.shape[1:])  # du[i, j] = ∂_j u_i
    dm = phys[2 * dim + dim * dim:].reshape((dim, dim) + phys.shape[1:])
    terms = []
    for i in range(dim):
        term = sum(u[j] * dm[i, j] + mm[j] * du[j, i] for j in range(dim))
        if not incompressible:
            term = term + mm[i] * sum(du[j, j] for j in range(dim))
        terms.append(term)
    out = -g.fwd(np.stack(terms))
    if incompressible:
        out = g.leray(out)
    return g.project_band(out)


def _fields(g: _Grid, mhat):
    m = g.m
    uhat = mhat / g.helm
    u = np.stack([g.inv(c) for c in uhat])
    mv = np.stack([g.inv(c) for c in mhat])
    return VectorField(m, u), VectorField(m, mv)


def _tail(g: _Grid, mhat):
    power = np.sum(np.abs(mhat) ** 2, axis=0)
    frac = np.sqrt(sum((k / max(g.kmax, 1.0)) ** 2 for k in g.k))
    total = power[g.mask].sum()
    if total == 0:
        return 0.0
    return float(power[g.mask & (frac > 0.5)].sum() / total)


def _record(diag: Diagnostics, g: _Grid, t, u, mv, mhat):
    m = g.m
    diag.t.append(float(t))
    diag.energy.append(0.5 * calc.l2_inner(mv, u))
    diag.momentum.append([float(np.sum(m.weights * c)) for c in mv.values])
    diag.div_sup.append(calc.divergence(u).sup() if m.dim > 1 else 0.0)
    diag.tail.append(_tail(g, mhat))


def _integrate(g: _Grid, u0: VectorField, T: float, dt: float, tendency: Callable,
               save_every: int, blowup_factor: float, cfl_limit: float,
               check: Optional[Callable] = None):
    if dt <= 0 or T < 0:
        raise ValueError("dt must be positive and T non-negative")
    m = g.m
    mhat = np.stack([g.fwd(c) for c in u0.values]) * g.helm
    mhat = g.project_band(mhat)
    # fixed steps; dt is shrunk slightly when T is not a multiple of it
    n = int(np.ceil(T / dt - 1e-9))
    dt = T / n if n else dt
    u, mv = _fields(g, mhat)
    u_sup0 = float(np.abs(u.values).max())
    if dt * u_sup0 * g.kmax > cfl_limit:
        raise CFLError(f"dt * max|u| * kmax = {dt * u_sup0 * g.kmax:.3f} exceeds {cfl_limit}")
    traj = [SolverState(0.0, u, mv, g.eps, 0, dt)]
    diag = Diagnostics()
    _record(diag, g, 0.0, u, mv, mhat)
    bound = blowup_factor * max(u_sup0, 1e-300)
    for step in range(1, n + 1):
        k1 = tendency(g, mhat)
        k2 = tendency(g, mhat + 0.5 * dt * k1)
        k3 = tendency(g, mhat + 0.5 * dt * k2)
        k4 = tendency(g, mhat + dt * k3)
        mhat = mhat + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if g.filt is not None:
            mhat = mhat * g.filt
        last = step == n
        if check is not None:
            check(g, mhat, step * dt)
        if step % save_every == 0 or last:
            u, mv = _fields(g, mhat)
            sup = float(np.abs(u.values).max())
            if not np.isfinite(sup) or (u_sup0 > 0 and sup > bound):
                raise BlowUpError(f"sup|u| = {sup:.3e} at t = {step * dt:.4f}")
            if u_sup0 > 0 and dt * sup * g.kmax > cfl_limit:
                raise CFLError(f"CFL number {dt * sup * g.kmax:.3f} exceeded at t = {step * dt:.4f}")
            traj.append(SolverState(step * dt, u, mv, g.eps, step, dt))
            _record(diag, g, step * dt, u, mv, mhat)
    return traj, diag


def solve_ch(u0: VectorField, eps: float, T: float, dt: float, save_every: int = 100,
             blowup_factor: float = BLOWUP_FACTOR, cfl_limit: float = CFL_LIMIT,
             filter_order: Optional[int] = None):
    """Camassa-Holm on S¹ in momentum form, RK4 in time."""
    if u0.manifold.kind is not ManifoldKind.CIRCLE:
        raise UnsupportedManifoldError("solve_ch runs on S1")
    if eps <= 0:
        raise ValueError("eps must be positive")
    g = _Grid(u0.manifold, eps, filter_order)
    return _integrate(g, u0, T, dt, _ch_tendency, save_every, blowup_factor, cfl_limit)


def solve_epdiff_2d(u0: VectorField, eps: float, T: float, dt: float, save_every: int = 100,
                    blowup_factor: float = BLOWUP_FACTOR, cfl_limit: float = CFL_LIMIT):
    """EPDiff on T² in momentum form, RK4 in time."""
    if u0.manifold.kind is not ManifoldKind.TORUS:
        raise UnsupportedManifoldError("solve_epdiff_2d runs on T2")
    if eps <= 0:
        raise ValueError("eps must be positive")
    g = _Grid(u0.manifold, eps)
    return _integrate(g, u0, T, dt, _epdiff_tendency, save_every, blowup_factor, cfl_limit)


def solve_euler_alpha_2d(u0: VectorField, eps: float, T: float, dt: float, save_every: int = 100,
                         blowup_factor: float = BLOWUP_FACTOR, cfl_limit: float = CFL_LIMIT,
                         div_tol: float = DIV_TOL):
    """Euler-α on T² (incompressible Euler at ``ε = 0``); the tendency is Leray-projected."""
    m = u0.manifold
    if m.kind is not ManifoldKind.TORUS:
        raise UnsupportedManifoldError("solve_euler_alpha_2d runs on T2")
    if eps < 0:
        raise ValueError("eps must be non-negative")
    d0 = calc.divergence(u0).sup()
    if d0 > div_tol:
        raise InvariantViolation(f"initial velocity has divergence {d0:.2e}")

    def check(g, mhat, t):
        uhat = mhat / g.helm
        d = float(np.abs(g.inv(sum(1j * g.k[j] * uhat[j] for j in range(2)))).max())
        if d > div_tol:
            raise InvariantViolation(f"divergence {d:.2e} at t = {t:.4f}")

    g = _Grid(m, eps)
    return _integrate(g, u0, T, dt, lambda g, mh: _epdiff_tendency(g, mh, True), save_every,
                      blowup_factor, cfl_limit, check)


# --------------------------------------------------------------------------- presets

def peakon(m: Manifold, eps: float, c: float = 1.0, shift: float = 0.0) -> VectorField:
    """Periodic peakon ``c cosh((x - s - π)/ε) / cosh(π/ε)`` with its crest at ``x = s``."""
    x = np.mod(m.nodes[0] - shift, 2 * np.pi)
    # ratio of cosh written with exponentials to avoid overflow for small ε
    a = (x - np.pi) / eps
    b = np.pi / eps
    vals = c * (np.exp(np.abs(a) - b) + np.exp(-np.abs(a) - b)) / (1.0 + np.exp(-2 * b))
    return VectorField(m, vals[None])


PRESETS = ("zero", "shear", "taylor-green", "peakon", "random", "sine")


def preset(name: str, m: Manifold, eps: float = 0.0, c: float = 1.0, seed: int = 0) -> VectorField:
    """Named initial conditions for the solvers."""
    x = m.nodes
    if name == "zero":
        return VectorField.zeros(m)
    if name == "sine":
        if m.kind is ManifoldKind.CIRCLE:
            return VectorField(m, np.sin(x[0])[None])
        return VectorField(m, np.stack([np.sin(x[0]), np.zeros(m.shape)]))
    if name == "shear":
        if m.kind is not ManifoldKind.TORUS:
            raise UnsupportedManifoldError("shear preset is defined on T2")
        return VectorField(m, np.stack([np.sin(x[1]), np.zeros(m.shape)]))
    if name == "taylor-green":
        if m.kind is not ManifoldKind.TORUS:
            raise UnsupportedManifoldError("taylor-green preset is defined on T2")
        return VectorField(m, np.stack([np.sin(x[0]) * np.cos(x[1]), -np.cos(x[0]) * np.sin(x[1])]))
    if name == "peakon":
        if m.kind is not ManifoldKind.CIRCLE:
            raise UnsupportedManifoldError("peakon preset is defined on S1")
        return peakon(m, eps, c)
    if name == "random":
        return random_smooth(m, seed)
    raise ValueError(f"unknown preset {name!r}; choose from {PRESETS}")


def random_smooth(m: Manifold, seed: int, kmax: int = 3, divergence_free: bool = False) -> VectorField:
    """Random band-limited field with unit-order amplitude (stream function when divergence-free)."""
    rng = np.random.default_rng(seed)
    x = m.nodes
    if m.kind is ManifoldKind.CIRCLE:
        vals = sum(rng.normal() / k * np.cos(k * x[0] + rng.uniform(0, 2 * np.pi)) for k in range(1, kmax + 1))
        return VectorField(m, vals[None])
    out = np.zeros((2,) + m.shape)
    for kx in range(-kmax, kmax + 1):
        for ky in range(0, kmax + 1):
            if (kx, ky) == (0, 0) or (ky == 0 and kx < 0):
                continue
            kk = np.hypot(kx, ky)
            arg = kx * x[0] + ky * x[1] + rng.uniform(0, 2 * np.pi)
            if divergence_free:
                a = rng.normal() / kk**2
                out += a * np.stack([-ky * np.sin(arg), kx * np.sin(arg)])  # ∇⊥ of a cos(arg)
            else:
                a = rng.normal(size=2) / kk**2
                out += a[:, None, None] * np.cos(arg)
    return VectorField(m, out / max(1.0, float(np.abs(out).max())))


# --------------------------------------------------------------------------- action stationarity

@dataclass
class ActionReport:
    eps: list
    differences: list
    slope: float
    linear: float
    quadratic: float


def _simpson(y, h):
    y = np.asarray(y, dtype=float)
    n = len(y) - 1
    if n < 2:
        return float(np.trapz(y, dx=h))
    if n % 2 == 1:
        # Simpson on the first n-1 intervals, 3/8 rule on the last three
        head = _simpson(y[: n - 2], h) if n - 3 >= 2 else float(np.trapz(y[: n - 2], dx=h))
        tail = 3 * h / 8 * (y[n - 3] + 3 * y[n - 2] + 3 * y[n - 1] + y[n])
        return head + tail
    return float(h / 3 * (y[0] + 4 * y[1:-1:2].sum() + 2 * y[2:-1:2].sum() + y[-1]))


def _apply_A(v: VectorField, eps: float) -> VectorField:
    return calc.helmholtz_apply(v, eps)


def action_stationarity_check(trajectory, w_test: Callable, eps_ladder=(1e-3, 1e-4, 1e-5),
                              w_dot: Optional[Callable] = None, eps: Optional[float] = None,
                              h: float = 1e-5, endpoint_tol: float = 1e-12) -> ActionReport:
    """Second-order behaviour of the reduced action around a trajectory.

    The perturbation is ``δu = ẇ + L_u w`` (``L_u w = [u, w]``). The action
    ``S̄ = ∫ ½∫g(u, A u) dt`` is quadratic, so the difference at amplitude ``ε``
    is ``ε·a + ½ε²·b`` with ``a = ∫∫g(Au, δu)``, ``b = ∫∫g(δu, Aδu)``, both by
    Simpson's rule over the trajectory samples (uniform in time). The slope
    is the least-squares log-log slope of ``|S̄(u + εδu) - S̄(u)|``.
    """
    states = list(trajectory)
    if len(states) < 3:
        raise ValueError("need at least three trajectory samples")
    times = np.array([s.t for s in states])
    steps = np.diff(times)
    if np.ptp(steps) > 1e-9 * max(1.0, steps.mean()):
        raise ValueError("trajectory samples must be uniform in time")
    dt = steps.mean()
    eps_h = states[0].eps if eps is None else eps
    for t in (times[0], times[-1]):
        if w_test(t).sup() > endpoint_tol:
            raise ValueError("w_test must vanish at the end points")
    lin, quad = [], []
    for s in states:
        w = w_test(s.t)
        wd = w_dot(s.t) if w_dot is not None else (w_test(s.t + h) - w_test(s.t - h)) / (2 * h)
        du = wd + calc.lie_bracket(s.u, w)
        lin.append(calc.l2_inner(_apply_A(s.u, eps_h), du))
        quad.append(calc.l2_inner(du, _apply_A(du, eps_h)))
    a = _simpson(lin, dt)
    b = _simpson(quad, dt)
    eps_ladder = [float(e) for e in eps_ladder]
    diffs = [e * a + 0.5 * e**2 * b for e in eps_ladder]
    mags = np.abs(diffs)
    if np.all(mags == 0):
        slope = float("nan")
    else:
        slope = float(np.polyfit(np.log(eps_ladder), np.log(np.maximum(mags, 1e-300)), 1)[0])
    return ActionReport(eps_ladder, diffs, slope, a, b)


def frozen_trajectory(u0: VectorField, eps: float, T: float, samples: int) -> list:
    """Constant-in-time 'trajectory' used as a non-solution control."""
    mv = calc.helmholtz_apply(u0, eps)
    return [SolverState(float(t), u0, mv, eps) for t in np.linspace(0.0, T, samples)]
