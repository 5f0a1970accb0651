"""Discrete descriptors of the three supported manifolds.

Nodes are stored component-first: ``nodes[c, ...]`` is coordinate ``c`` of
every grid node. The circle and torus use uniform grids on ``[0, 2π)``; the
sphere uses Gauss--Legendre latitudes (in ``cos θ``) times uniform
longitudes, which never places a node on a pole.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

TWO_PI = 2.0 * np.pi


class ManifoldKind(str, enum.Enum):
    CIRCLE = "S1"
    TORUS = "T2"
    SPHERE = "S2"


@dataclass(frozen=True, eq=False)
class Manifold:
    kind: ManifoldKind
    shape: tuple
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    def __eq__(self, other):
        if not isinstance(other, Manifold):
            return NotImplemented
        return self.kind == other.kind and self.shape == other.shape

    def __hash__(self):
        return hash((self.kind, self.shape))

    @property
    def ncomp(self) -> int:
        """Number of stored vector components (ambient for the sphere)."""
        return {ManifoldKind.CIRCLE: 1, ManifoldKind.TORUS: 2, ManifoldKind.SPHERE: 3}[self.kind]

    @property
    def dim(self) -> int:
        return 1 if self.kind is ManifoldKind.CIRCLE else 2

    @property
    def is_flat(self) -> bool:
        return self.kind is not ManifoldKind.SPHERE

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def volume(self) -> float:
        return {
            ManifoldKind.CIRCLE: TWO_PI,
            ManifoldKind.TORUS: TWO_PI**2,
            ManifoldKind.SPHERE: 4.0 * np.pi,
        }[self.kind]

    @property
    def axes(self) -> tuple:
        """Trailing array axes that index grid nodes."""
        return tuple(range(-len(self.shape), 0))

    @property
    def spacing(self) -> tuple:
        if not self.is_flat:
            raise AttributeError("spacing is only defined on flat grids")
        return tuple(TWO_PI / n for n in self.shape)

    @cached_property
    def wavenumbers(self) -> tuple:
        """Integer wavenumbers per axis, broadcastable against ``shape``."""
        if not self.is_flat:
            raise AttributeError("wavenumbers are only defined on flat grids")
        ks = []
        for a, n in enumerate(self.shape):
            k = np.fft.fftfreq(n, d=1.0 / n)
            view = [1] * len(self.shape)
            view[a] = n
            ks.append(k.reshape(view))
        return tuple(ks)

    @cached_property
    def k2(self) -> np.ndarray:
        return sum(k**2 for k in self.wavenumbers)

    def describe(self) -> dict:
        return {"kind": self.kind.value, "resolution": list(self.shape)}


def circle(n: int = 64) -> Manifold:
    if n < 4 or n % 2:
        raise ValueError("circle resolution must be an even integer >= 4")
    x = TWO_PI * np.arange(n) / n
    return Manifold(ManifoldKind.CIRCLE, (n,), x[None, :], np.full(n, TWO_PI / n))


def torus(nx: int = 64, ny: int | None = None) -> Manifold:
    ny = nx if ny is None else ny
    if min(nx, ny) < 4 or nx % 2 or ny % 2:
        raise ValueError("torus resolution must be even integers >= 4")
    x = TWO_PI * np.arange(nx) / nx
    y = TWO_PI * np.arange(ny) / ny
    X, Y = np.meshgrid(x, y, indexing="ij")
    w = np.full((nx, ny), TWO_PI**2 / (nx * ny))
    return Manifold(ManifoldKind.TORUS, (nx, ny), np.stack([X, Y]), w)


def sphere(nlat: int = 32, nlon: int | None = None) -> Manifold:
    """Unit sphere on a Gauss--Legendre x uniform longitude grid.

    Latitude rows are ordered by increasing colatitude.
    """
    nlon = 2 * nlat if nlon is None else nlon
    if nlat < 4 or nlon < 4 or nlon % 2:
        raise ValueError("sphere needs nlat >= 4 and even nlon >= 4")
    t, wt = np.polynomial.legendre.leggauss(nlat)
    t, wt = t[::-1], wt[::-1]  # cos(theta) descending -> theta ascending
    theta = np.arccos(t)
    phi = TWO_PI * np.arange(nlon) / nlon
    TH, PH = np.meshgrid(theta, phi, indexing="ij")
    st = np.sin(TH)
    nodes = np.stack([st * np.cos(PH), st * np.sin(PH), np.cos(TH)])
    weights = np.outer(wt, np.full(nlon, TWO_PI / nlon))
    m = Manifold(ManifoldKind.SPHERE, (nlat, nlon), nodes, weights)
    object.__setattr__(m, "colatitudes", theta)
    object.__setattr__(m, "longitudes", phi)
    return m


def make_manifold(kind, resolution=None) -> Manifold:
    """Build a manifold from a kind tag and a resolution (int or sequence)."""
    kind = ManifoldKind(kind)
    if resolution is None:
        resolution = []
    elif np.isscalar(resolution):
        resolution = [int(resolution)]
    resolution = [int(r) for r in resolution]
    if kind is ManifoldKind.CIRCLE:
        return circle(*resolution[:1])
    if kind is ManifoldKind.TORUS:
        return torus(*resolution[:2])
    return sphere(*resolution[:2])
