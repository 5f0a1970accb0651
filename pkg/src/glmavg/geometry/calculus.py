"""Riemannian vector calculus on the circle, flat torus and unit sphere.

Curvature convention: ``R(u, v) w = ∇_u ∇_v w - ∇_v ∇_u w - ∇_[u,v] w`` and
``Ric(v, w) = tr(u -> R(u, v) w)``. With it the unit sphere has
``R(u, v) w = g(v, w) u - g(u, w) v`` and ``Ric = g``.
"""
from __future__ import annotations

import enum

import numpy as np

from ..errors import SolvabilityError, UnsupportedManifoldError
from . import sphere as sph
from . import spectral
from .fields import ScalarField, TensorField11, VectorField, check_same
from .manifold import Manifold, ManifoldKind

POISSON_MEAN_TOL = 1e-8


class LaplacianKind(str, enum.Enum):
    ROUGH = "rough"
    HODGE = "hodge"
    RICCI = "ricci"


def _func(field):
    """Ambient callable of a sphere field, building a spline one if needed."""
    if field.func is not None:
        return field.func
    f = sph.spline_extension(field.manifold, field.values)
    object.__setattr__(field, "func", f)
    return f


def _sphere_vector(m, F):
    return VectorField(m, F(m.nodes), F)


def _sphere_scalar(m, F):
    return ScalarField(m, F(m.nodes), F)


def _require_flat(m: Manifold, what: str):
    if not m.is_flat:
        raise UnsupportedManifoldError(f"{what} is only available on S1 and T2")


# --------------------------------------------------------------------------- pointwise algebra

def metric_inner(u: VectorField, v: VectorField) -> ScalarField:
    m = check_same(u, v)
    func = None
    if u.func is not None and v.func is not None:
        fu, fv = u.func, v.func
        func = lambda q: np.sum(fu(q) * fv(q), axis=0)
    return ScalarField(m, np.sum(u.values * v.values, axis=0), func)


def integrate(f: ScalarField) -> float:
    return float(np.sum(f.manifold.weights * f.values))


def l2_inner(u: VectorField, v: VectorField) -> float:
    """``∫ g(u, v) μ``."""
    check_same(u, v)
    return float(np.sum(u.manifold.weights * np.sum(u.values * v.values, axis=0)))


def tensor_inner(S: TensorField11, T: TensorField11) -> ScalarField:
    """``g(S, T) = g_ij g^kl S^i_k T^j_l``; identity metric in every chart."""
    m = check_same(S, T)
    return ScalarField(m, np.einsum("ij...,ij...->...", S.values, T.values))


# --------------------------------------------------------------------------- first derivatives

def jacobian(u: VectorField) -> TensorField11:
    """``∇u`` as a (1,1) tensor: ``(∇u)[i, j] = ∂_j u^i`` so that ``(∇u) v = ∇_v u``."""
    m = u.manifold
    if m.is_flat:
        return TensorField11(m, np.moveaxis(spectral.gradient_stack(u.values, m), 0, 1))
    F = _func(u)
    p = m.nodes
    J = sph.ambient_gradient(F, p)
    J = J - p[:, None] * np.einsum("k...,kj...->j...", p, J)[None]  # P J
    J = J - np.einsum("ij...,j...->i...", J, p)[:, None] * p[None]  # (P J) P
    return TensorField11(m, J)


def covariant_derivative(w: VectorField, u: VectorField) -> VectorField:
    """``∇_w u``."""
    m = check_same(w, u)
    if m.is_flat:
        grads = spectral.gradient_stack(u.values, m)  # grads[j, i] = ∂_j u_i
        return VectorField(m, np.einsum("j...,ji...->i...", w.values, grads))
    W, U = _func(w), _func(u)

    def F(q):
        p = sph.unit(q)
        return sph.project(p, sph.directional(U, p, W(p)))

    return _sphere_vector(m, F)


def lie_bracket(u: VectorField, w: VectorField) -> VectorField:
    """``[u, w] = ∇_u w - ∇_w u``; equals the Lie derivative ``L_u w``."""
    return covariant_derivative(u, w) - covariant_derivative(w, u)


lie_derivative = lie_bracket


def divergence(u: VectorField) -> ScalarField:
    m = u.manifold
    if m.is_flat:
        grads = spectral.gradient_stack(u.values, m)
        return ScalarField(m, sum(grads[j, j] for j in range(m.dim)))
    U = _func(u)

    def F(q):
        p = sph.unit(q)
        J = sph.ambient_gradient(U, p)
        return J[0, 0] + J[1, 1] + J[2, 2]

    return _sphere_scalar(m, F)


def gradient(f: ScalarField) -> VectorField:
    m = f.manifold
    if m.is_flat:
        return VectorField(m, spectral.gradient_stack(f.values, m))
    Fs = _func(f)

    def F(q):
        p = sph.unit(q)
        return sph.project(p, sph.ambient_gradient(Fs, p))

    return _sphere_vector(m, F)


def normal_cross(u: VectorField) -> VectorField:
    """Quarter turn ``n × u`` of a sphere field (``ẑ × u`` on the torus)."""
    m = u.manifold
    if m.kind is ManifoldKind.CIRCLE:
        raise UnsupportedManifoldError("no quarter turn on S1")
    if m.kind is ManifoldKind.TORUS:
        return VectorField(m, np.stack([-u.values[1], u.values[0]]))
    U = _func(u)

    def F(q):
        p = sph.unit(q)
        return np.cross(p, U(p), axis=0)

    return _sphere_vector(m, F)


def vorticity(u: VectorField) -> ScalarField:
    """Scalar curl ``ω = -div(n × u)``."""
    return -divergence(normal_cross(u))


# --------------------------------------------------------------------------- inverses

def _check_mean_zero(f: ScalarField):
    total = integrate(f)
    scale = max(1.0, float(np.sum(f.manifold.weights * np.abs(f.values))))
    if abs(total) > POISSON_MEAN_TOL * scale:
        raise SolvabilityError(f"right-hand side has non-zero integral {total:.3e}")


def poisson_solve(f: ScalarField) -> ScalarField:
    """Mean-zero ``φ`` with ``Δφ = f``."""
    m = f.manifold
    _require_flat(m, "poisson_solve")
    _check_mean_zero(f)
    return ScalarField(m, spectral.inverse_symbol(f.values, m, -m.k2))


def helmholtz_apply(u: VectorField, eps: float) -> VectorField:
    """``A u = u - ε² Δ_R u``."""
    m = u.manifold
    if m.is_flat:
        return VectorField(m, spectral.ifft((1.0 + eps**2 * m.k2) * spectral.fft(u.values, m), m))
    return u - eps**2 * laplacian(u, LaplacianKind.RICCI)


def helmholtz_solve(mom: VectorField, eps: float) -> VectorField:
    """Unique ``u`` with ``(1 - ε² Δ_R) u = mom`` (flat charts, spectral)."""
    m = mom.manifold
    _require_flat(m, "helmholtz_solve")
    if eps < 0:
        raise ValueError("eps must be non-negative")
    if eps == 0:
        return mom
    return VectorField(m, spectral.ifft(spectral.fft(mom.values, m) / (1.0 + eps**2 * m.k2), m))


def leray_project(u: VectorField) -> VectorField:
    """L²-orthogonal projection onto divergence-free fields."""
    m = u.manifold
    _require_flat(m, "leray_project")
    div = divergence(u)
    phi = ScalarField(m, spectral.inverse_symbol(div.values, m, -m.k2))
    return u - gradient(phi)


# --------------------------------------------------------------------------- curvature

def riemann(u: VectorField, v: VectorField, w: VectorField) -> VectorField:
    """Closed-form curvature: zero on flat charts, ``g(v,w)u - g(u,w)v`` on S²."""
    m = check_same(u, v, w)
    if m.is_flat:
        return VectorField.zeros(m)
    return metric_inner(v, w) * u - metric_inner(u, w) * v


def riemann_nested(u: VectorField, v: VectorField, w: VectorField) -> VectorField:
    """Curvature from its definition with nested covariant derivatives."""
    return (covariant_derivative(u, covariant_derivative(v, w))
            - covariant_derivative(v, covariant_derivative(u, w))
            - covariant_derivative(lie_bracket(u, v), w))


def ricci(u: VectorField, v: VectorField) -> ScalarField:
    m = check_same(u, v)
    if m.is_flat:
        return ScalarField(m, np.zeros(m.shape))
    return metric_inner(u, v)


def ricci_sharp(u: VectorField) -> VectorField:
    """Vector field dual to ``Ric(u, ·)``."""
    return VectorField.zeros(u.manifold) if u.manifold.is_flat else u


# --------------------------------------------------------------------------- Laplacians

def _frame_fields(m):
    """Projected ambient basis ``P e_i``; ``Σ_i (P e_i) ⊗ (P e_i) = g⁻¹`` with no polar singularity."""
    return tuple(VectorField.from_function(m, lambda p, i=i: np.eye(3)[i]) for i in range(3))


def rough_laplacian(u: VectorField) -> VectorField:
    """Trace of the second covariant derivative.

    On S² this is the frame formula ``Σ_a (∇_{e_a}∇_{e_a} - ∇_{∇_{e_a} e_a}) u``
    evaluated on the tight frame ``e_a = P E_a`` (the trace only needs
    ``Σ_a e_a ⊗ e_a = g⁻¹``).
    """
    m = u.manifold
    if m.is_flat:
        return VectorField(m, spectral.laplacian(u.values, m))
    out = VectorField.zeros(m)
    for e in _frame_fields(m):
        out = out + covariant_derivative(e, covariant_derivative(e, u))
        out = out - covariant_derivative(covariant_derivative(e, e), u)
    return out


def hodge_laplacian(u: VectorField) -> VectorField:
    """``-(dδ + δd)`` on the dual 1-form, as ``grad div u + n × grad ω``."""
    m = u.manifold
    if m.is_flat:
        return VectorField(m, spectral.laplacian(u.values, m))
    return gradient(divergence(u)) + normal_cross(gradient(vorticity(u)))


def laplacian(u: VectorField, kind=LaplacianKind.ROUGH) -> VectorField:
    """Rough, Hodge (exterior-calculus form) or Ricci Laplacian of ``u``.

    Flat charts: all three coincide with the componentwise spectral Laplacian.
    """
    kind = LaplacianKind(kind)
    m = u.manifold
    if m.is_flat:
        return VectorField(m, spectral.laplacian(u.values, m))
    if kind is LaplacianKind.ROUGH:
        return rough_laplacian(u)
    if kind is LaplacianKind.HODGE:
        return hodge_laplacian(u)
    return rough_laplacian(u) + ricci_sharp(u)


def scalar_laplacian(f: ScalarField) -> ScalarField:
    if f.manifold.is_flat:
        return ScalarField(f.manifold, spectral.laplacian(f.values, f.manifold))
    return divergence(gradient(f))


# --------------------------------------------------------------------------- deformation

def deformation(u: VectorField) -> TensorField11:
    """``Def u = ½(∇u + ∇uᵀ)``."""
    J = jacobian(u)
    return 0.5 * (J + J.T)


def deformation_norm_sq(u: VectorField) -> ScalarField:
    D = deformation(u)
    return tensor_inner(D, D)


def transpose_gradient_apply(u: VectorField, v: VectorField) -> VectorField:
    """``(∇u)ᵀ · v``, defined by ``g((∇u)ᵀ v, w) = g(∇_w u, v)``."""
    return jacobian(u).T.apply(v)


# --------------------------------------------------------------------------- integral identities

def green_deformation(u: VectorField, v: VectorField):
    """Both sides of ``2∫g(Def u, Def v) = -∫g(Δ_R u + ∇ div u, v)``."""
    lhs = 2.0 * integrate(tensor_inner(deformation(u), deformation(v)))
    rhs = -l2_inner(laplacian(u, LaplacianKind.RICCI) + gradient(divergence(u)), v)
    return lhs, rhs


def green_gradient(u: VectorField, v: VectorField):
    """Both sides of ``∫g(∇u, ∇v) = -∫g(Δ_rough u, v)``."""
    lhs = integrate(tensor_inner(jacobian(u), jacobian(v)))
    rhs = -l2_inner(laplacian(u, LaplacianKind.ROUGH), v)
    return lhs, rhs


def weitzenbock_residual(u: VectorField) -> float:
    """``‖Δ_H u - (Δ_rough u - Ric♯ u)‖ / ‖Δ_H u‖`` in L²."""
    hodge = laplacian(u, LaplacianKind.HODGE)
    diff = hodge - (laplacian(u, LaplacianKind.ROUGH) - ricci_sharp(u))
    return diff.l2() / max(hodge.l2(), 1e-300)
