"""Lagrangian averaging: realizations, ε-expansion and the averaged Lagrangian.

A realization of member ``β`` at amplitude ``ε`` is the map
``η_ε(t) = exp(η(t), w_β(t), ε)`` with Eulerian velocity
``u_ε = η̇_ε ∘ η_ε⁻¹``. Expanding ``u_ε = u + ε u' + ½ε² u'' + ...`` gives

    L̄ = L0 + ε L1 + ½ ε² L2,
    L0 = ½∫|u|²,  L1 = ∫g(u, ⟨u'⟩),  L2 = ∫⟨|u'|²⟩ + g(u, ⟨u''⟩).

Under Lie transport of the fluctuations ``u' = 0`` and
``u'' = -R(u,w)w + ∇_{∇_w w}u - ∇_w∇_w u``; isotropy then closes
``L2 = -∫g(Δ_R u, u)``.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from . import diffeo as dg
from . import ensemble as ens_mod
from .errors import InvariantViolation, UnsupportedManifoldError
from .geometry import calculus as calc
from .geometry.fields import ScalarField, VectorField
from .geometry.manifold import ManifoldKind

log = logging.getLogger(__name__)

TIME_STEP = 1e-3
METHOD = "spectral"
DIV_TOL = 1e-8


class Mode(str, enum.Enum):
    FINITE_EPS = "FiniteEps"
    ANALYTIC_SECOND = "AnalyticSecond"


@dataclass
class LagrangianReport:
    L0: float
    L1: float
    L2_empirical: float
    L2_closed: float
    Lbar_empirical: float
    Lbar_closed: float
    eps: float
    N: int
    mode: str
    Lbar_direct: Optional[float] = None
    identity_residuals: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


# --------------------------------------------------------------------------- realizations

def transported(w0: VectorField, path: dg.FlowPath, method: str = METHOD) -> Callable:
    """``t -> w(t)``, the Lie transport of ``w0`` along ``path`` (cached per time)."""
    cache = {}

    def w(t):
        t = float(t)
        if t not in cache:
            cache[t] = ens_mod.pushforward(w0, path.map(t), method)
        return cache[t]

    return w


def frozen(w0: VectorField) -> Callable:
    """``t -> w0`` (no transport; negative control)."""
    return lambda t: w0


def realization_flow(path: dg.FlowPath, w_path: Callable, eps: float, t: float = 0.0,
                     dt: float = TIME_STEP, method: str = METHOD):
    """Realization map ``η_ε(t)`` and velocity ``u_ε(t)`` by centred differences in time."""
    if eps == 0:
        return path.map(t), path.u(t)
    try:
        maps = [dg.exp(path.map(s), w_path(s), eps, method) for s in (t - dt, t, t + dt)]
    except InvariantViolation as exc:
        raise InvariantViolation(f"realization at eps={eps} is not invertible: {exc}") from exc
    rate = (maps[2].disp - maps[0].disp) / (2 * dt)
    u_eps = dg.eulerian_from_material(maps[1], rate, method)
    return maps[1], VectorField(path.manifold, u_eps.values)


def expansion_coefficients(u_of_eps, eps: float, richardson: bool = True):
    """First and second ε-derivatives at ``ε = 0`` from central differences.

    ``u_of_eps`` is a callable ``ε -> VectorField`` or a mapping with samples
    at ``0, ±ε`` (and ``±ε/2`` when ``richardson``). With Richardson the
    ``{ε, ε/2}`` pair is combined to fourth order; without it the plain
    three-point differences at spacing ``ε`` are returned.
    """
    needed = [0.0, eps, -eps] + ([eps / 2, -eps / 2] if richardson else [])
    if callable(u_of_eps):
        samples = {e: u_of_eps(e) for e in needed}
    else:
        samples = dict(u_of_eps)
        missing = [e for e in needed if e not in samples]
        if missing:
            raise ValueError(f"missing samples at eps = {missing}")
    m = samples[0.0].manifold
    v = {e: np.asarray(samples[e].values) for e in needed}

    def d1(h):
        return (v[h] - v[-h]) / (2 * h)

    def d2(h):
        return (v[h] - 2 * v[0.0] + v[-h]) / h**2

    if richardson:
        first = (4 * d1(eps / 2) - d1(eps)) / 3
        second = (4 * d2(eps / 2) - d2(eps)) / 3
    else:
        first, second = d1(eps), d2(eps)
    return VectorField(m, first), VectorField(m, second)


def u_second_analytic(u: VectorField, w: VectorField) -> VectorField:
    """``-R(u,w)w + ∇_{∇_w w}u - ∇_w∇_w u``."""
    grad_ww = calc.covariant_derivative(w, w)
    out = calc.covariant_derivative(grad_ww, u) - calc.covariant_derivative(w, calc.covariant_derivative(w, u))
    if not u.manifold.is_flat:
        out = out - calc.riemann(u, w, w)
    return out


# --------------------------------------------------------------------------- Lagrangians

def kinetic(u: VectorField) -> float:
    return 0.5 * calc.l2_inner(u, u)


def averaged_lagrangian_closed(u: VectorField, eps: float) -> float:
    """``½∫|u|² - ε² g(Δ_R u, u)``."""
    return kinetic(u) + 0.5 * eps**2 * closed_l2(u)


def closed_l2(u: VectorField) -> float:
    return -calc.l2_inner(calc.laplacian(u, calc.LaplacianKind.RICCI), u)


def h1_alpha_lagrangian(u: VectorField, eps: float) -> float:
    """``½∫|u|² + 2ε²|Def u|²``."""
    return 0.5 * (calc.l2_inner(u, u) + 2 * eps**2 * calc.integrate(calc.deformation_norm_sq(u)))


def _assemble(u, ens, eps, first, second, mode, direct=None):
    m = u.manifold
    L0 = kinetic(u)
    mean_first = VectorField(m, ens.average([f.values for f in first]))
    mean_second = VectorField(m, ens.average([s.values for s in second]))
    L1 = calc.l2_inner(u, mean_first)
    sq = ens.average([np.sum(f.values**2, axis=0) for f in first])
    L2 = float(np.sum(m.weights * sq)) + calc.l2_inner(u, mean_second)
    L2c = closed_l2(u)
    return LagrangianReport(
        L0=L0, L1=L1, L2_empirical=L2, L2_closed=L2c,
        Lbar_empirical=L0 + eps * L1 + 0.5 * eps**2 * L2,
        Lbar_closed=L0 + 0.5 * eps**2 * L2c,
        eps=eps, N=len(ens), mode=mode.value, Lbar_direct=direct)


def averaged_lagrangian_empirical(u: VectorField, ens, eps: float, mode=Mode.ANALYTIC_SECOND,
                                  path: Optional[dg.FlowPath] = None, t: float = 0.0,
                                  dt: float = TIME_STEP, richardson: bool = False,
                                  method: str = METHOD, identities: bool = True) -> LagrangianReport:
    """Ensemble-averaged second-order Lagrangian.

    ``AnalyticSecond`` takes ``u' = 0`` and the analytic ``u''`` per member.
    ``FiniteEps`` builds the realizations of every Lie-transported member along
    ``path`` at ``0, ±ε`` (and ``±ε/2`` with ``richardson``), extracts the
    coefficients by differences and also reports the direct average
    ``⟨½∫|u_ε|²⟩`` as ``Lbar_direct``. Members are the fluctuations at ``t = 0``.
    """
    mode = Mode(mode)
    if ens.manifold != u.manifold:
        raise ValueError("ensemble and velocity live on different grids")
    if mode is Mode.ANALYTIC_SECOND:
        second = [u_second_analytic(u, w) for w in ens.members]
        first = [VectorField.zeros(u.manifold) for _ in ens.members]
        rep = _assemble(u, ens, eps, first, second, mode)
    else:
        if path is None:
            raise ValueError("FiniteEps mode needs the mean flow path")
        if not u.manifold.is_flat:
            raise UnsupportedManifoldError("realization flows exist on S1 and T2 only")
        first, second, direct = [], [], []
        for i, w0 in enumerate(ens.members):
            w_path = transported(w0, path, method)
            cache = {}

            def sample(e, w_path=w_path, cache=cache):
                if e not in cache:
                    cache[e] = realization_flow(path, w_path, e, t, dt, method)[1]
                return cache[e]

            a, b = expansion_coefficients(sample, eps, richardson)
            first.append(a)
            second.append(b)
            direct.append(kinetic(sample(eps)))
            log.debug("member %d: |u'| %.3e", i, a.sup())
        rep = _assemble(u, ens, eps, first, second, mode, float(ens.average(direct)))
    if identities:
        rep.identity_residuals["curvature"] = identity_curvature_term(u, ens)[1]
        rep.identity_residuals["laplacian"] = identity_laplacian_term(u, ens)[1]
    return rep


# --------------------------------------------------------------------------- isotropy identities

def identity_curvature_term(u: VectorField, ens):
    """``⟨g(R(u,w)w, u)⟩`` and its sup-distance to ``Ric(u, u)``."""
    m = u.manifold
    if m.is_flat:
        zero = ScalarField(m, np.zeros(m.shape))
        return zero, 0.0
    vals = [calc.metric_inner(calc.riemann(u, w, w), u).values for w in ens.members]
    f = ScalarField(m, ens.average(vals))
    return f, float(np.abs(f.values - calc.ricci(u, u).values).max())


def identity_laplacian_term(u: VectorField, ens):
    """``⟨∇_w∇_w u - ∇_{∇_w w}u⟩`` and its sup-distance to the rough Laplacian."""
    m = u.manifold
    vals = []
    for w in ens.members:
        term = calc.covariant_derivative(w, calc.covariant_derivative(w, u)) \
            - calc.covariant_derivative(calc.covariant_derivative(w, w), u)
        vals.append(term.values)
    f = VectorField(m, ens.average(vals))
    ref = calc.laplacian(u, calc.LaplacianKind.ROUGH)
    return f, float(np.abs(f.values - ref.values).max())


# --------------------------------------------------------------------------- pressure term

@dataclass
class PressureReport:
    per_member: list
    mean: float
    dual: list
    dual_discrepancy: float
    median_abs: float

    @property
    def ratio(self) -> float:
        """``|⟨I⟩| / median |I_β|``."""
        return abs(self.mean) / self.median_abs if self.median_abs > 0 else 0.0


def _require_divfree(v: VectorField, what: str):
    d = calc.divergence(v).sup()
    if d > DIV_TOL:
        raise InvariantViolation(f"{what} is not divergence-free (|div| = {d:.2e})")


def pressure_integrand(u: VectorField, w: VectorField) -> float:
    """``∫ g(L_u ∇φ, u)`` with ``φ = -Δ⁻¹ div(∇_w w)``."""
    phi = -calc.poisson_solve(calc.divergence(calc.covariant_derivative(w, w)))
    return calc.l2_inner(calc.lie_bracket(u, calc.gradient(phi)), u)


def pressure_integrand_dual(u: VectorField, w: VectorField, v: Optional[VectorField] = None) -> float:
    """The same integral as ``-∫ g(w, ∇_w ∇Δ⁻¹ div(∇_u u + ½∇|u|²))``."""
    if v is None:
        v = _pressure_potential_gradient(u)
    return -calc.l2_inner(w, calc.covariant_derivative(w, v))


def _pressure_potential_gradient(u):
    src = calc.covariant_derivative(u, u) + 0.5 * calc.gradient(calc.metric_inner(u, u))
    return calc.gradient(calc.poisson_solve(calc.divergence(src)))


def pressure_term_contribution(u: VectorField, ens) -> PressureReport:
    """Per-member pressure contributions ``I_β`` on T², their mean and the dual check."""
    m = u.manifold
    if m.kind is not ManifoldKind.TORUS:
        raise UnsupportedManifoldError("the pressure term is evaluated on T2")
    _require_divfree(u, "velocity")
    for w in ens.members:
        _require_divfree(w, "ensemble member")
    v = _pressure_potential_gradient(u)
    direct = [pressure_integrand(u, w) for w in ens.members]
    dual = [pressure_integrand_dual(u, w, v) for w in ens.members]
    mean = float(ens.average(direct))
    disc = float(max(abs(a - b) for a, b in zip(direct, dual)))
    return PressureReport(direct, mean, dual, disc, float(np.median(np.abs(direct))))
