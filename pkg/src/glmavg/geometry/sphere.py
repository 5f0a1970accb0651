"""Ambient-space calculus on the unit sphere.

Tangent fields are extended off the sphere as ``F(q) = P(q/|q|) f(q/|q|)``
with ``P(p) = I - p p^T``. Because the extension is constant along rays, an
ambient directional derivative along a tangent vector equals the intrinsic
derivative along the sphere, and the Gauss formula ``∇_v u = P D_v U``
gives the Levi-Civita connection. Directional derivatives use the
fourth-order central stencil with step ``FD_STEP``.
"""
from __future__ import annotations

import numpy as np
from scipy.interpolate import RectSphereBivariateSpline

FD_STEP = 1e-3
_STENCIL = ((2.0, -1.0), (1.0, 8.0), (-1.0, -8.0), (-2.0, 1.0))


def unit(q):
    return q / np.sqrt(np.sum(q * q, axis=0))


def project(p, v):
    """Remove the component of ``v`` along the unit normal ``p``."""
    return v - p * np.sum(p * v, axis=0)


def _as_vector(v, like):
    v = np.asarray(v, dtype=float)
    return np.broadcast_to(v.reshape(v.shape + (1,) * (like.ndim - v.ndim)) if v.ndim < like.ndim else v,
                           like.shape)


def extend_vector(f):
    def F(q):
        p = unit(q)
        return project(p, _as_vector(f(p), p))

    return F


def extend_scalar(f):
    def F(q):
        p = unit(q)
        return np.broadcast_to(np.asarray(f(p), dtype=float), p.shape[1:])

    return F


def directional(F, p, v, h=FD_STEP):
    """Fourth-order central difference of ``F`` at ``p`` along ``v``."""
    acc = 0.0
    for s, c in _STENCIL:
        acc = acc + c * F(p + (s * h) * v)
    return acc / (12.0 * h)


def ambient_gradient(F, p, h=FD_STEP):
    """Stack of ``D_{e_i} F`` for the three ambient basis vectors.

    For a degree-0 extension the radial derivative vanishes, so this is the
    tangential gradient (scalars) or the ambient Jacobian column set
    (vectors, returned as ``J[:, i]`` stacked on axis 1).
    """
    cols = []
    for i in range(3):
        e = np.zeros_like(p)
        e[i] = 1.0
        cols.append(directional(F, p, e, h))
    return np.stack(cols, axis=1 if np.ndim(cols[0]) == p.ndim else 0)


def killing(axis):
    """Rotation field ``p -> a x p`` about the ambient vector ``axis``."""
    a = np.asarray(axis, dtype=float)

    def f(p):
        return np.cross(a.reshape(3, *([1] * (p.ndim - 1))), p, axis=0)

    return f


def e_phi(p):
    """Unit longitude direction; undefined on the poles (never sampled)."""
    ez = np.zeros_like(p)
    ez[2] = 1.0
    v = np.cross(ez, p, axis=0)
    return v / np.sqrt(np.sum(v * v, axis=0))


def e_theta(p):
    return np.cross(e_phi(p), p, axis=0)


def spline_extension(manifold, values):
    """Degree-0 extension of grid data via bicubic splines on the sphere.

    Used only for fields that carry no analytic callable. Accuracy is that of
    the spline (fourth order in the grid spacing), well below the analytic
    path.
    """
    theta, phi = manifold.colatitudes, manifold.longitudes
    vals = np.asarray(values)
    scalar = vals.ndim == 2
    comps = [vals] if scalar else list(vals)
    splines = [RectSphereBivariateSpline(theta, phi, c, s=0) for c in comps]

    def F(q):
        p = unit(q)
        th = np.arccos(np.clip(p[2], -1.0, 1.0))
        ph = np.mod(np.arctan2(p[1], p[0]), 2 * np.pi)
        out = np.stack([s.ev(th.ravel(), ph.ravel()).reshape(th.shape) for s in splines])
        return out[0] if scalar else project(p, out)

    return F
