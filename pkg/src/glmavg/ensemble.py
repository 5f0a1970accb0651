"""Isotropic fluctuation ensembles and their transport by a mean flow.

An ensemble is a finite weighted family ``{w_β}`` with ``Σ p_β = 1``. It is
isotropic when ``⟨w⊗w⟩ = g⁻¹`` at every point (``I - ppᵀ`` in ambient form on
the sphere).

Random constructions draw per-member parameters from ``default_rng(seed + β)``.
With ``sampling="lattice"`` the mode phases form a randomly shifted rank-1
lattice over the members instead, which makes every one- and two-point second
moment exact at finite ``N``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import diffeo as dg
from .errors import UnsupportedManifoldError
from .geometry.sphere import killing
from .geometry.fields import TensorField11, VectorField, identity_tensor
from .geometry.manifold import Manifold, ManifoldKind

# wavenumbers for the random torus constructions; the transverse directions
# k⊥/|k| of this set sum (as outer products) to 2I
TORUS_MODES = np.array([[1, 0], [0, 1], [1, 1], [1, -1]], dtype=float)
# generators of the lattice phases, pairwise sums and differences avoid 0 mod N
LATTICE_GENERATORS = (1, 3, 9, 27, 81, 243, 729, 2187)
SAMPLINGS = ("iid", "lattice")


@dataclass(frozen=True, eq=False)
class FluctuationEnsemble:
    manifold: Manifold
    members: tuple
    weights: np.ndarray = field(repr=False)
    amplitude: float = 1.0
    tag: str = ""
    seed: Optional[int] = None

    def __post_init__(self):
        if not self.members:
            raise ValueError("ensemble needs at least one member")
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (len(self.members),) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be non-negative, one per member, and sum to 1")
        for mb in self.members:
            if mb.manifold != self.manifold:
                raise ValueError("member on a different manifold")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "members", tuple(self.members))
        object.__setattr__(self, "weights", w)
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")

    def __len__(self):
        return len(self.members)

    @property
    def order(self) -> np.ndarray:
        """Summation order used by every reducer (increasing weight, then index)."""
        return np.argsort(self.weights, kind="stable")

    def average(self, values: Sequence) -> np.ndarray:
        """``Σ p_β values[β]`` in the fixed reduction order."""
        total = None
        for i in self.order:
            term = self.weights[i] * np.asarray(values[i], dtype=float)
            total = term if total is None else total + term
        return total

    def mean_field(self) -> VectorField:
        return VectorField(self.manifold, self.average([mb.values for mb in self.members]))

    def with_amplitude(self, eps: float) -> "FluctuationEnsemble":
        return FluctuationEnsemble(self.manifold, self.members, self.weights, eps, self.tag, self.seed)

    def manifest(self) -> dict:
        return {
            "manifold": self.manifold.describe(),
            "size": len(self),
            "weights": [float(w) for w in self.weights],
            "amplitude": float(self.amplitude),
            "tag": self.tag,
            "seed": self.seed,
        }


def _uniform(n, manifold, values):
    return FluctuationEnsemble(manifold, tuple(values), np.full(n, 1.0 / n))


def deterministic_isotropic(m: Manifold) -> FluctuationEnsemble:
    """Exactly isotropic finite ensembles.

    S¹: ``{±1}``; T²: ``{±√2 e_a}``; S²: ``{±√3 L_a}`` with ``L_a(p) = a × p``.
    """
    if m.kind is ManifoldKind.CIRCLE:
        members = [VectorField.constant(m, s) for s in (1.0, -1.0)]
    elif m.kind is ManifoldKind.TORUS:
        r = np.sqrt(2.0)
        members = [VectorField.constant(m, s * r * e) for e in np.eye(2) for s in (1.0, -1.0)]
    else:
        r = np.sqrt(3.0)
        members = [VectorField.from_function(m, (lambda p, a=s * r * e: killing(a)(p)))
                   for e in np.eye(3) for s in (1.0, -1.0)]
    ens = _uniform(len(members), m, members)
    return FluctuationEnsemble(m, ens.members, ens.weights, 1.0, "deterministic", None)


def _check_lattice(n, count):
    q = LATTICE_GENERATORS[:count]
    for i, a in enumerate(q):
        for b in q[i:]:
            if (a + b) % n == 0 or (a != b and (a - b) % n == 0):
                raise ValueError(f"lattice sampling is not exact for N={n}; use a power of two >= 32")


def _phases(sampling, seed, index, n, count):
    if sampling == "iid":
        return np.random.default_rng(seed + index).uniform(0.0, 2 * np.pi, size=count)
    shift = np.random.default_rng(seed).uniform(0.0, 2 * np.pi, size=count)
    q = np.asarray(LATTICE_GENERATORS[:count], dtype=float)
    return 2 * np.pi * index * q / n + shift


def _torus_member(m, theta, divergence_free):
    x = m.nodes
    out = np.zeros((2,) + m.shape)
    if divergence_free:
        c = np.sqrt(0.5)
        for k, th in zip(TORUS_MODES, theta):
            a = np.array([-k[1], k[0]]) / np.linalg.norm(k)
            wave = np.cos(k[0] * x[0] + k[1] * x[1] + th)
            out += np.sqrt(2.0) * c * a[:, None, None] * wave
    else:
        c = 0.5
        for j, (k, a) in enumerate((k, a) for k in TORUS_MODES for a in np.eye(2)):
            wave = np.cos(k[0] * x[0] + k[1] * x[1] + theta[j])
            out += np.sqrt(2.0) * c * a[:, None, None] * wave
    return out


def random_isotropic(m: Manifold, n: int, seed: int, divergence_free: bool = False,
                     sampling: str = "iid", modes: int = 4) -> FluctuationEnsemble:
    """Random ensemble whose generating distribution has ``⟨w⊗w⟩ = g⁻¹`` exactly.

    S¹: ``√(2/K) Σ_k cos(kx + θ_k)`` over ``k = 1..K`` (``K = modes``), or
    random signs ``±1`` when divergence-free. T²: unit-variance cosine modes
    over a fixed symmetric wavenumber set, transverse ``k⊥/|k|`` when
    divergence-free. S²: ``√(3/2)(ξ × p + P ζ)`` with ``ξ, ζ`` uniform on the
    unit sphere. Members are recentred to weighted mean zero.
    """
    if n < 2:
        raise ValueError("need at least two members")
    if sampling not in SAMPLINGS:
        raise ValueError(f"sampling must be one of {SAMPLINGS}")
    if divergence_free and m.kind is ManifoldKind.SPHERE:
        raise UnsupportedManifoldError("divergence-free random ensembles are built on S1 and T2 only")
    if sampling == "lattice" and m.kind is ManifoldKind.SPHERE:
        raise UnsupportedManifoldError("lattice sampling needs Fourier modes (S1 or T2)")
    if sampling == "lattice":
        count = modes if m.kind is ManifoldKind.CIRCLE else len(TORUS_MODES) * (1 if divergence_free else 2)
        if not (m.kind is ManifoldKind.CIRCLE and divergence_free):
            _check_lattice(n, count)
    vals = []
    if m.kind is ManifoldKind.CIRCLE:
        x = m.nodes[0]
        for b in range(n):
            if divergence_free:
                if sampling == "lattice":
                    s = 1.0 if b % 2 == 0 else -1.0
                else:
                    s = np.random.default_rng(seed + b).choice([-1.0, 1.0])
                vals.append(np.full((1,) + m.shape, s))
            else:
                th = _phases(sampling, seed, b, n, modes)
                w = sum(np.cos(k * x + th[k - 1]) for k in range(1, modes + 1))
                vals.append(np.sqrt(2.0 / modes) * w[None])
    elif m.kind is ManifoldKind.TORUS:
        count = len(TORUS_MODES) * (1 if divergence_free else 2)
        for b in range(n):
            vals.append(_torus_member(m, _phases(sampling, seed, b, n, count), divergence_free))
    else:
        params = []
        for b in range(n):
            g = np.random.default_rng(seed + b).normal(size=(2, 3))
            params.append(g / np.linalg.norm(g, axis=1, keepdims=True))
        params = np.array(params)
        params = params - params.mean(axis=0)  # recentring is linear in (ξ, ζ)
        c = np.sqrt(1.5)
        members = [VectorField.from_function(
            m, lambda p, xi=xi, zeta=zeta: c * (np.cross(xi.reshape(3, *([1] * (p.ndim - 1))), p, axis=0)
                                                + zeta.reshape(3, *([1] * (p.ndim - 1)))))
            for xi, zeta in params]
        return FluctuationEnsemble(m, tuple(members), np.full(n, 1.0 / n), 1.0,
                                   f"random-{sampling}", seed)
    vals = np.array(vals)
    vals = vals - vals.mean(axis=0)
    members = tuple(VectorField(m, v) for v in vals)
    tag = f"random-{sampling}" + ("-divfree" if divergence_free else "")
    return FluctuationEnsemble(m, members, np.full(n, 1.0 / n), 1.0, tag, seed)


def covariance(ens: FluctuationEnsemble) -> TensorField11:
    """Pointwise ``⟨w⊗w⟩``."""
    outer = [np.einsum("i...,j...->ij...", w.values, w.values) for w in ens.members]
    return TensorField11(ens.manifold, ens.average(outer))


def isotropy_defect(ens: FluctuationEnsemble) -> float:
    """``‖⟨w⊗w⟩ - g⁻¹‖_∞`` (largest entry)."""
    return float(np.abs(covariance(ens).values - identity_tensor(ens.manifold).values).max())


def pushforward(w0: VectorField, eta: dg.Diffeo, method: str = "spectral") -> VectorField:
    """``(Dη · w₀) ∘ η⁻¹`` with ``Dη`` by spectral differentiation."""
    J = eta.jacobian()
    material = np.einsum("ij...,j...->i...", J, w0.values)
    return dg.eulerian_from_material(eta, material, method)


def taylor_transport(w0: VectorField, path: dg.FlowPath, times, method: str = "spectral") -> list:
    """Lie transport ``ẇ + L_u w = 0`` along the mean flow, as the exact pushforward."""
    return [pushforward(w0, path.map(t), method) for t in times]


def lie_transport_rk4(w0: VectorField, u, T: float, dt: float) -> VectorField:
    """Integrate ``ẇ = -[u, w]`` on the grid with RK4 (cross-check for :func:`taylor_transport`).

    ``u`` is a callable ``t -> VectorField``.
    """
    from .geometry import calculus as calc

    m = w0.manifold
    n = max(1, int(np.ceil(abs(T) / dt - 1e-12)))
    h = T / n

    def rhs(t, w):
        return -calc.lie_bracket(u(t), VectorField(m, w)).values

    w = np.array(w0.values)
    t = 0.0
    for _ in range(n):
        k1 = rhs(t, w)
        k2 = rhs(t + h / 2, w + h / 2 * k1)
        k3 = rhs(t + h / 2, w + h / 2 * k2)
        k4 = rhs(t + h, w + h * k3)
        w = w + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return VectorField(m, w)
