"""Random smooth fields used by the verification suites."""
from __future__ import annotations

import numpy as np

from .fields import ScalarField, VectorField
from .manifold import Manifold, ManifoldKind


def _modes(rng, dim, kmax, count):
    ks = []
    while len(ks) < count:
        k = rng.integers(-kmax, kmax + 1, size=dim)
        if np.any(k):
            ks.append(k)
    return np.array(ks, dtype=float)


def random_trig_field(m: Manifold, seed: int, modes: int = 6, kmax: int = 2) -> VectorField:
    """Sum of ``modes`` random plane waves ``a cos(k·x + θ)``.

    On the sphere ``x`` is the ambient point and the sum is projected onto the
    tangent plane, giving a smooth trigonometric field with an analytic
    extension.
    """
    rng = np.random.default_rng(seed)
    dim = 3 if m.kind is ManifoldKind.SPHERE else m.dim
    ks = _modes(rng, dim, kmax, modes)
    amps = rng.normal(size=(modes, m.ncomp)) / np.sqrt(modes)
    phases = rng.uniform(0.0, 2 * np.pi, size=(modes, m.ncomp))

    def f(x):
        out = np.zeros((m.ncomp,) + x.shape[1:])
        for k, a, th in zip(ks, amps, phases):
            arg = np.tensordot(k, x, axes=1)
            for c in range(m.ncomp):
                out[c] += a[c] * np.cos(arg + th[c])
        return out

    return VectorField.from_function(m, f)


def random_trig_scalar(m: Manifold, seed: int, modes: int = 6, kmax: int = 2) -> ScalarField:
    rng = np.random.default_rng(seed)
    dim = 3 if m.kind is ManifoldKind.SPHERE else m.dim
    ks = _modes(rng, dim, kmax, modes)
    amps = rng.normal(size=modes) / np.sqrt(modes)
    phases = rng.uniform(0.0, 2 * np.pi, size=modes)

    def f(x):
        return sum(a * np.cos(np.tensordot(k, x, axes=1) + th) for k, a, th in zip(ks, amps, phases))

    return ScalarField.from_function(m, f)
