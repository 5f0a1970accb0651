"""Discrete diffeomorphisms of S¹ and T² and the flat L² geometry of map space.

A map is stored by its displacement ``d`` at the grid nodes, ``η(x) = x + d(x)``,
with ``d`` periodic. On S¹ ``x + d(x)`` is the lift, so ``η(x + 2π) = η(x) + 2π``.

With the material L² metric ``∫ |γ'(s)(x)|² dx`` on flat charts, geodesics
are straight lines in map space: ``exp(φ, w, ε) = φ + ε w∘φ``. ``log`` returns
the Eulerian field ``w`` whose composition with ``φ`` reproduces the shortest
periodic displacement, solved by defect correction so that
``exp(φ, log(φ, ψ), 1) = ψ`` holds to round-off for the chosen interpolation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConvergenceError, InjectivityError, InvariantViolation, ManifoldMismatchError, \
    UnsupportedManifoldError
from .geometry import spectral
from .geometry.fields import VectorField
from .geometry.manifold import TWO_PI, Manifold, ManifoldKind
from .interp import evaluate

DEFAULT_METHOD = "spline"


def _require_flat(m: Manifold):
    if not m.is_flat:
        raise UnsupportedManifoldError("diffeomorphisms are only implemented on S1 and T2")


@dataclass(frozen=True, eq=False)
class Diffeo:
    manifold: Manifold
    disp: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = self.manifold
        _require_flat(m)
        d = np.array(self.disp, dtype=float).reshape((m.ncomp,) + m.shape)
        if not np.all(np.isfinite(d)):
            raise InvariantViolation("displacement has non-finite values")
        d.setflags(write=False)
        object.__setattr__(self, "disp", d)
        self._check()

    def _check(self):
        m = self.manifold
        if m.kind is ManifoldKind.CIRCLE:
            img = self.image[0]
            gaps = np.diff(np.append(img, img[0] + TWO_PI))
            if np.any(gaps <= 0):
                raise InvariantViolation("lift is not strictly increasing")
        else:
            det = self.jacobian_det()
            if np.any(det <= 0):
                raise InvariantViolation(f"Jacobian determinant {det.min():.3e} is not positive")

    @property
    def image(self) -> np.ndarray:
        return self.manifold.nodes + self.disp

    def jacobian(self) -> np.ndarray:
        """``Dη[i, j] = δ_ij + ∂_j d_i`` at the nodes (spectral)."""
        m = self.manifold
        grads = spectral.gradient_stack(self.disp, m)  # [j, i]
        J = np.moveaxis(grads, 0, 1).copy()
        for i in range(m.ncomp):
            J[i, i] += 1.0
        return J

    def jacobian_det(self) -> np.ndarray:
        J = self.jacobian()
        if J.shape[0] == 1:
            return J[0, 0]
        return J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]

    def volume_defect(self) -> float:
        """``max |det Dη - 1|``."""
        return float(np.abs(self.jacobian_det() - 1.0).max())

    @classmethod
    def identity(cls, m: Manifold) -> "Diffeo":
        return cls(m, np.zeros((m.ncomp,) + m.shape))

    @classmethod
    def shift(cls, m: Manifold, a) -> "Diffeo":
        a = np.broadcast_to(np.asarray(a, dtype=float).reshape(-1), (m.ncomp,))
        return cls(m, np.broadcast_to(a.reshape((m.ncomp,) + (1,) * len(m.shape)), (m.ncomp,) + m.shape))

    @classmethod
    def from_displacement(cls, m: Manifold, f: Callable) -> "Diffeo":
        """Build from a callable ``f(x) -> d(x)`` on node coordinates."""
        return cls(m, np.asarray(f(m.nodes), dtype=float))

    @classmethod
    def from_image(cls, m: Manifold, image) -> "Diffeo":
        return cls(m, np.asarray(image, dtype=float) - m.nodes)


def _same(a, b):
    if a.manifold != b.manifold:
        raise ManifoldMismatchError("maps live on different grids")
    return a.manifold


def compose(phi: Diffeo, psi: Diffeo, method: str = DEFAULT_METHOD) -> Diffeo:
    """``(φ∘ψ)(x) = φ(ψ(x))``."""
    _same(phi, psi)
    return Diffeo(phi.manifold, psi.disp + evaluate(phi.disp, psi.image, method))


def preimage(phi: Diffeo, targets, method: str = DEFAULT_METHOD, tol: float = 1e-13,
             maxiter: int = 60) -> np.ndarray:
    """Points ``y`` with ``φ(y) = targets`` by safeguarded Newton iteration.

    On S¹ each target keeps a bracket from the monotone lift and falls back
    to bisection; on T² the offset ``e = y - target`` solves
    ``e + d(target + e) = 0`` by damped Newton.
    """
    m = phi.manifold
    y = np.asarray(targets, dtype=float)
    dgrad = np.moveaxis(spectral.gradient_stack(phi.disp, m), 0, 1)  # [i, j] = ∂_j d_i
    ncomp = m.ncomp

    def residual(e):
        return e + evaluate(phi.disp, y + e, method)

    e = -evaluate(phi.disp, y, method)
    if m.kind is ManifoldKind.CIRCLE:
        img = phi.image[0]
        x = m.nodes[0]
        wind = np.floor((y[0] - img[0]) / TWO_PI)
        p0 = y[0] - TWO_PI * wind
        lifted = np.append(img, img[0] + TWO_PI)
        grid = np.append(x, TWO_PI)
        idx = np.clip(np.searchsorted(lifted, p0, side="right") - 1, 0, len(x) - 1)
        lo = grid[idx] + TWO_PI * wind - y[0]
        hi = grid[idx + 1] + TWO_PI * wind - y[0]
        e[0] = np.clip(e[0], lo, hi)
    err = np.inf
    for _ in range(maxiter):
        r = residual(e)
        err = np.abs(r).max() if r.size else 0.0
        if err <= tol:
            return y + e
        Jd = evaluate(dgrad.reshape((ncomp * ncomp,) + m.shape), y + e, method)
        Jd = Jd.reshape((ncomp, ncomp) + y.shape[1:])
        for i in range(ncomp):
            Jd[i, i] += 1.0
        if ncomp == 1:
            cand = e[0] - r[0] / Jd[0, 0]
            if m.kind is ManifoldKind.CIRCLE:
                # residual increases with e, so the sign of r moves one end of the bracket
                neg = r[0] < 0
                lo = np.where(neg, e[0], lo)
                hi = np.where(neg, hi, e[0])
                outside = (cand <= lo) | (cand >= hi) | ~np.isfinite(cand)
                cand = np.where(outside, 0.5 * (lo + hi), cand)
            e = cand[None]
        else:
            det = Jd[0, 0] * Jd[1, 1] - Jd[0, 1] * Jd[1, 0]
            step = np.stack([(Jd[1, 1] * r[0] - Jd[0, 1] * r[1]) / det,
                             (-Jd[1, 0] * r[0] + Jd[0, 0] * r[1]) / det])
            base = np.sqrt(np.sum(r**2, axis=0))
            lam = 1.0
            trial = e - step
            for _ in range(8):
                rn = np.sqrt(np.sum(residual(trial) ** 2, axis=0))
                if np.all(rn <= base + 1e-15) or lam < 1e-2:
                    break
                lam *= 0.5
                trial = e - lam * step
            e = trial
    raise ConvergenceError(f"inverse did not converge (residual {err:.3e})")


def invert(phi: Diffeo, method: str = DEFAULT_METHOD, tol: float = 1e-13, maxiter: int = 60) -> Diffeo:
    """Inverse map, solved node by node with :func:`preimage`."""
    m = phi.manifold
    return Diffeo(m, preimage(phi, m.nodes, method, tol, maxiter) - m.nodes)


def identity_residual(phi: Diffeo, method: str = DEFAULT_METHOD) -> float:
    """``‖φ∘φ⁻¹ - id‖_∞`` at the nodes."""
    return float(np.abs(compose(phi, invert(phi, method), method).disp).max())


# --------------------------------------------------------------------------- velocities and flows

class VelocityPath:
    """Time-dependent velocity evaluated at arbitrary points.

    Wraps either a callable ``u(t, points) -> velocities`` or samples
    ``fields[i]`` at ``times[i]`` (linear in time, interpolated in space).
    """

    def __init__(self, manifold: Manifold, func: Callable, grid_func: Callable | None = None):
        self.manifold = manifold
        self._func = func
        self._grid = grid_func

    def __call__(self, t: float, points: np.ndarray) -> np.ndarray:
        return self._func(t, points)

    def field(self, t: float) -> VectorField:
        """Eulerian velocity at the grid nodes."""
        if self._grid is not None:
            return self._grid(t)
        return VectorField(self.manifold, self._func(t, self.manifold.nodes))

    @classmethod
    def from_callable(cls, m: Manifold, f: Callable) -> "VelocityPath":
        return cls(m, f)

    @classmethod
    def steady(cls, u: VectorField, method: str = DEFAULT_METHOD) -> "VelocityPath":
        vals = u.values
        return cls(u.manifold, lambda t, pts: evaluate(vals, pts, method), lambda t: u)

    @classmethod
    def from_samples(cls, times: Sequence[float], fields: Sequence[VectorField],
                     method: str = DEFAULT_METHOD) -> "VelocityPath":
        times = np.asarray(times, dtype=float)
        if np.any(np.diff(times) <= 0):
            raise ValueError("sample times must increase")
        vals = [f.values for f in fields]
        m = fields[0].manifold

        def weights(t):
            i = int(np.clip(np.searchsorted(times, t) - 1, 0, len(times) - 2))
            th = (t - times[i]) / (times[i + 1] - times[i])
            return i, th

        def f(t, pts):
            i, th = weights(t)
            return (1 - th) * evaluate(vals[i], pts, method) + th * evaluate(vals[i + 1], pts, method)

        def g(t):
            i, th = weights(t)
            return VectorField(m, (1 - th) * vals[i] + th * vals[i + 1])

        return cls(m, f, g)


def _rk4_points(u: VelocityPath, x0: np.ndarray, t0: float, t1: float, dt: float) -> np.ndarray:
    if dt <= 0:
        raise ValueError("dt must be positive")
    span = t1 - t0
    n = max(1, int(np.ceil(abs(span) / dt - 1e-12)))
    h = span / n
    x = np.array(x0, dtype=float)
    t = t0
    for _ in range(n):
        k1 = u(t, x)
        k2 = u(t + 0.5 * h, x + 0.5 * h * k1)
        k3 = u(t + 0.5 * h, x + 0.5 * h * k2)
        k4 = u(t + h, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t0 + (t - t0) + h
    return x


def flow(u, T: float, dt: float, start: Diffeo | None = None, t0: float = 0.0) -> Diffeo:
    """Flow map of ``∂_t η = u(t, η)`` from ``t0`` to ``t0 + T`` by classical RK4.

    ``u`` is a :class:`VelocityPath` or a callable ``u(t, points)``. With
    ``start`` the particles start from ``start``'s images (the result is
    ``Φ_{t0→t0+T} ∘ start``).
    """
    if not isinstance(u, VelocityPath):
        raise TypeError("flow expects a VelocityPath (wrap callables with VelocityPath.from_callable)")
    m = u.manifold
    _require_flat(m)
    x0 = m.nodes if start is None else start.image
    x = _rk4_points(u, x0, t0, t0 + T, dt)
    return Diffeo(m, x - m.nodes)


class FlowPath:
    """Mean flow ``η(t)`` with its Eulerian velocity ``u(t)``.

    Maps are produced by RK4 from ``η(0) = id`` (times may be negative), or by
    an exact callable ``image(t, x)`` when one is known.
    """

    def __init__(self, velocity: VelocityPath, dt: float = 1e-2, image: Callable | None = None):
        self.velocity = velocity
        self.manifold = velocity.manifold
        self.dt = dt
        self._image = image
        self._cache: dict = {}

    def map(self, t: float) -> Diffeo:
        t = float(t)
        if t not in self._cache:
            m = self.manifold
            if self._image is not None:
                self._cache[t] = Diffeo.from_image(m, self._image(t, m.nodes))
            elif t == 0.0:
                self._cache[t] = Diffeo.identity(m)
            else:
                self._cache[t] = Diffeo(m, _rk4_points(self.velocity, m.nodes, 0.0, t, self.dt) - m.nodes)
        return self._cache[t]

    def maps(self, times) -> list:
        return [self.map(t) for t in times]

    def u(self, t: float) -> VectorField:
        return self.velocity.field(t)


# --------------------------------------------------------------------------- L² geometry

def shortest_displacement(phi: Diffeo, psi: Diffeo) -> np.ndarray:
    """Shortest periodic representative of ``ψ - φ`` at each node.

    Raises :class:`InjectivityError` when the representative is not one
    continuous branch (the maps differ by more than half a period somewhere).
    """
    _same(phi, psi)
    raw = psi.disp - phi.disp
    wind = np.round(raw / TWO_PI)
    for c in range(raw.shape[0]):
        if np.ptp(wind[c]) != 0:
            raise InjectivityError("displacement leaves the injectivity range (|ψ - φ| reaches π)")
    return raw - TWO_PI * wind


def eulerian_from_material(phi: Diffeo, material: np.ndarray, method: str = DEFAULT_METHOD) -> VectorField:
    """Eulerian field ``w = V∘φ⁻¹`` of a material field ``V`` given at the labels.

    Grid values are ``V(φ⁻¹(x_i))`` by interpolation. The field also carries
    the callable ``p -> V(φ⁻¹(p))`` (preimage by Newton, then interpolation),
    which reproduces ``V`` exactly at the images ``φ(x_i)``; :func:`exp` uses
    it, so ``exp(φ, log(φ, ψ), 1) = ψ`` holds to round-off.
    """
    m = phi.manifold
    V = np.array(material, dtype=float).reshape((m.ncomp,) + m.shape)
    V.setflags(write=False)

    def func(points):
        return evaluate(V, preimage(phi, points, method), method)

    return VectorField(m, func(m.nodes), func)


def pushed_values(w: VectorField, phi: Diffeo, method: str = DEFAULT_METHOD) -> np.ndarray:
    """``w∘φ`` at the nodes, through ``w.func`` when the field carries one."""
    if w.func is not None:
        return np.asarray(w.func(phi.image), dtype=float)
    return evaluate(w.values, phi.image, method)


def exp(phi: Diffeo, w: VectorField, eps: float, method: str = DEFAULT_METHOD) -> Diffeo:
    """Endpoint of the flat L² geodesic from ``φ`` with initial velocity ``w∘φ``."""
    if w.manifold != phi.manifold:
        raise ManifoldMismatchError("field and map live on different grids")
    if eps == 0:
        return phi
    return Diffeo(phi.manifold, phi.disp + eps * pushed_values(w, phi, method))


def log(phi: Diffeo, psi: Diffeo, method: str = DEFAULT_METHOD) -> VectorField:
    """Initial velocity of the minimising path from ``φ`` to ``ψ``."""
    return eulerian_from_material(phi, shortest_displacement(phi, psi), method)


def distance(phi: Diffeo, psi: Diffeo) -> float:
    """``(∫ |shortest(ψ(x) - φ(x))|² dx)^{1/2}``."""
    s = shortest_displacement(phi, psi)
    return float(np.sqrt(np.sum(phi.manifold.weights * np.sum(s**2, axis=0))))


def transport_geodesic(phi: Diffeo, w: VectorField, eps: float, steps: int = 200) -> Diffeo:
    """Integrate ``w_s' + ∇_{w_s} w_s = 0``, ``η_s' = w_s∘η_s`` from ``η_0 = φ`` to ``s = ε``.

    The Eulerian field is advanced spectrally and the particles with
    trigonometric interpolation, both by RK4 in ``s``. Independent of the
    closed form used by :func:`exp`; kept as its check.
    """
    m = phi.manifold
    h = eps / steps

    def rhs(state):
        W, x = state
        grads = spectral.gradient_stack(W, m)  # [j, i] = ∂_j W_i
        dW = -np.einsum("j...,ji...->i...", W, grads)
        return dW, evaluate(W, x, "spectral")

    state = (np.array(w.values), phi.image.copy())
    for _ in range(steps):
        k1 = rhs(state)
        k2 = rhs(tuple(a + 0.5 * h * b for a, b in zip(state, k1)))
        k3 = rhs(tuple(a + 0.5 * h * b for a, b in zip(state, k2)))
        k4 = rhs(tuple(a + h * b for a, b in zip(state, k3)))
        state = tuple(a + (h / 6.0) * (b1 + 2 * b2 + 2 * b3 + b4) for a, b1, b2, b3, b4 in zip(state, k1, k2, k3, k4))
    return Diffeo.from_image(m, state[1])
