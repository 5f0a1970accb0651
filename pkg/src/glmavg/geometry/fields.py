"""Sampled scalar, vector and (1,1)-tensor fields.

Values are immutable numpy arrays laid out component-first. On the sphere a
field may also carry ``func``: a callable on ambient points ``q`` of shape
``(3, ...)`` that evaluates the field's degree-0 (radially constant),
tangentially projected extension. Differential operators on the sphere work
through these callables; see :mod:`glmavg.geometry.sphere`.

Flat and ambient metrics are the identity, so the musical isomorphisms are
the identity on the stored components and are not represented separately.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..errors import ManifoldMismatchError, TangencyError
from .manifold import Manifold, ManifoldKind

TANGENCY_TOL = 1e-10


def _freeze(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def check_same(*fields):
    m = fields[0].manifold
    for f in fields[1:]:
        if f.manifold != m:
            raise ManifoldMismatchError(f"{f.manifold} is not {m}")
    return m


def _combine(f, g, op):
    if f is None or g is None:
        return None
    return lambda q: op(f(q), g(q))


@dataclass(frozen=True, eq=False)
class ScalarField:
    manifold: Manifold
    values: np.ndarray = field(repr=False)
    func: Optional[Callable] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size != self.manifold.size:
            raise ValueError(f"expected {self.manifold.size} values, got {v.size}")
        v = v.reshape(self.manifold.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("scalar field has non-finite values")
        object.__setattr__(self, "values", _freeze(v))

    @classmethod
    def from_function(cls, manifold: Manifold, f: Callable) -> "ScalarField":
        """Sample ``f(x)`` at the nodes; ``x`` has shape ``(d, *grid)``."""
        func = None
        if manifold.kind is ManifoldKind.SPHERE:
            from .sphere import extend_scalar

            func = extend_scalar(f)
            values = func(manifold.nodes)
        else:
            values = np.asarray(f(manifold.nodes), dtype=float)
        values = np.asarray(values, dtype=float)
        if values.size != manifold.size:
            values = np.broadcast_to(values.reshape(values.shape[-len(manifold.shape):] if values.ndim else ()),
                                     manifold.shape)
        return cls(manifold, values.reshape(manifold.shape), func)

    @classmethod
    def constant(cls, manifold: Manifold, c: float) -> "ScalarField":
        func = (lambda q: np.full(q.shape[1:], float(c))) if not manifold.is_flat else None
        return cls(manifold, np.full(manifold.shape, float(c)), func)

    def __add__(self, other):
        if isinstance(other, ScalarField):
            check_same(self, other)
            return ScalarField(self.manifold, self.values + other.values, _combine(self.func, other.func, np.add))
        c = float(other)
        return ScalarField(self.manifold, self.values + c, None if self.func is None else (lambda q: self.func(q) + c))

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            check_same(self, other)
            return ScalarField(self.manifold, self.values * other.values, _combine(self.func, other.func, np.multiply))
        if isinstance(other, (VectorField, TensorField11)):
            return other * self
        c = float(other)
        return ScalarField(self.manifold, self.values * c, None if self.func is None else (lambda q: c * self.func(q)))

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / float(c))

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True, eq=False)
class VectorField:
    manifold: Manifold
    values: np.ndarray = field(repr=False)
    func: Optional[Callable] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        m = self.manifold
        v = np.asarray(self.values, dtype=float).reshape((m.ncomp,) + m.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("vector field has non-finite values")
        if m.kind is ManifoldKind.SPHERE:
            normal = np.abs(np.sum(v * m.nodes, axis=0)).max()
            if normal > TANGENCY_TOL * max(1.0, np.abs(v).max()):
                raise TangencyError(f"normal component {normal:.3e} exceeds tolerance")
        object.__setattr__(self, "values", _freeze(v))

    @classmethod
    def from_function(cls, manifold: Manifold, f: Callable) -> "VectorField":
        """Sample ``f(x) -> (ncomp, *grid)`` at the nodes.

        On the sphere ``f`` receives unit ambient points; the result is
        projected onto the tangent plane and the extension is kept for
        differentiation.
        """
        if manifold.kind is ManifoldKind.SPHERE:
            from .sphere import extend_vector

            func = extend_vector(f)
            return cls(manifold, func(manifold.nodes), func)
        values = np.asarray(f(manifold.nodes), dtype=float)
        values = np.broadcast_to(values, (manifold.ncomp,) + manifold.shape) if values.ndim else \
            np.full((manifold.ncomp,) + manifold.shape, float(values))
        return cls(manifold, values)

    @classmethod
    def constant(cls, manifold: Manifold, c) -> "VectorField":
        if not manifold.is_flat:
            raise ValueError("constant vector fields only exist on flat charts")
        c = np.asarray(c, dtype=float).reshape(manifold.ncomp, *([1] * len(manifold.shape)))
        return cls(manifold, np.broadcast_to(c, (manifold.ncomp,) + manifold.shape))

    @classmethod
    def zeros(cls, manifold: Manifold) -> "VectorField":
        func = (lambda q: np.zeros_like(q)) if not manifold.is_flat else None
        return cls(manifold, np.zeros((manifold.ncomp,) + manifold.shape), func)

    def __add__(self, other):
        if not isinstance(other, VectorField):
            return NotImplemented
        check_same(self, other)
        return VectorField(self.manifold, self.values + other.values, _combine(self.func, other.func, np.add))

    def __sub__(self, other):
        if not isinstance(other, VectorField):
            return NotImplemented
        check_same(self, other)
        return VectorField(self.manifold, self.values - other.values, _combine(self.func, other.func, np.subtract))

    def __neg__(self):
        return self * -1.0

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            check_same(self, other)
            return VectorField(self.manifold, self.values * other.values,
                               _combine(self.func, other.func, lambda a, b: a * b))
        c = float(other)
        return VectorField(self.manifold, c * self.values, None if self.func is None else (lambda q: c * self.func(q)))

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / float(c))

    def sup(self) -> float:
        """Largest pointwise Euclidean length."""
        return float(np.sqrt(np.sum(self.values**2, axis=0)).max())

    def l2(self) -> float:
        w = self.manifold.weights
        return float(np.sqrt(np.sum(w * np.sum(self.values**2, axis=0))))


@dataclass(frozen=True, eq=False)
class TensorField11:
    """Per-node matrix ``T[i, j]`` acting on vectors as ``(T v)_i = T[i, j] v_j``."""

    manifold: Manifold
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = self.manifold
        v = np.asarray(self.values, dtype=float).reshape((m.ncomp, m.ncomp) + m.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("tensor field has non-finite values")
        if m.kind is ManifoldKind.SPHERE:
            scale = max(1.0, np.abs(v).max())
            right = np.abs(np.einsum("ij...,j...->i...", v, m.nodes)).max()
            left = np.abs(np.einsum("i...,ij...->j...", m.nodes, v)).max()
            if max(right, left) > 1e-8 * scale:
                raise TangencyError("tensor does not annihilate the normal direction")
        object.__setattr__(self, "values", _freeze(v))

    @property
    def T(self) -> "TensorField11":
        return TensorField11(self.manifold, np.swapaxes(self.values, 0, 1))

    def apply(self, v: VectorField) -> VectorField:
        check_same(self, v)
        return VectorField(self.manifold, np.einsum("ij...,j...->i...", self.values, v.values))

    def __add__(self, other):
        check_same(self, other)
        return TensorField11(self.manifold, self.values + other.values)

    def __sub__(self, other):
        check_same(self, other)
        return TensorField11(self.manifold, self.values - other.values)

    def __mul__(self, c):
        return TensorField11(self.manifold, float(c) * self.values)

    __rmul__ = __mul__

    def sup(self) -> float:
        return float(np.abs(self.values).max())


def identity_tensor(manifold: Manifold) -> TensorField11:
    """Inverse metric as a (1,1) tensor: identity, or ``I - p p^T`` on the sphere."""
    d = manifold.ncomp
    eye = np.eye(d).reshape((d, d) + (1,) * len(manifold.shape))
    vals = np.broadcast_to(eye, (d, d) + manifold.shape).copy()
    if manifold.kind is ManifoldKind.SPHERE:
        p = manifold.nodes
        vals -= p[:, None] * p[None, :]
    return TensorField11(manifold, vals)
