"""Riemannian centre of mass of an ensemble of maps.

The unconstrained mean uses the flat material L² geometry of :mod:`diffeo`.
The volume-constrained variant on T² moves the iterate only along
divergence-free directions, so it stays a volumorphism; at its fixed point
the averaged fluctuation is a gradient ``∇ψ``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import diffeo as dg
from .errors import ConvergenceError, InvariantViolation, UnsupportedManifoldError
from .geometry import calculus as calc
from .geometry.fields import ScalarField, VectorField
from .geometry.manifold import ManifoldKind
from .interp import evaluate

log = logging.getLogger(__name__)

VOLUME_TOL = 1e-6
MONOTONE_SLACK = 1e-12


@dataclass
class MeanResult:
    mean: dg.Diffeo
    fluctuation_logs: list
    residual: float
    iterations: int
    converged: bool
    residual_history: list = field(default_factory=list)
    objective_history: list = field(default_factory=list)
    psi: Optional[ScalarField] = None

    def mean_log(self, weights) -> VectorField:
        return weighted_sum(self.fluctuation_logs, weights)

    def to_dict(self) -> dict:
        out = {
            "iterations": self.iterations,
            "converged": self.converged,
            "residual": self.residual,
            "residual_history": list(self.residual_history),
            "objective_history": list(self.objective_history),
        }
        if self.psi is not None:
            out["psi_l2"] = float(np.sqrt(np.sum(self.psi.manifold.weights * self.psi.values**2)))
        return out


def _weights(n, weights):
    if weights is None:
        return np.full(n, 1.0 / n)
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,) or np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be positive, one per member, and sum to 1")
    return w


def weighted_sum(fields: Sequence[VectorField], weights) -> VectorField:
    """``Σ p_β w_β`` summed in order of increasing weight (fixed reduction order)."""
    order = np.argsort(np.asarray(weights), kind="stable")
    out = VectorField.zeros(fields[0].manifold)
    for i in order:
        out = out + weights[i] * fields[i]
    return out


def _weighted_material(eta, members, weights):
    order = np.argsort(weights, kind="stable")
    total = np.zeros_like(eta.disp)
    for i in order:
        total = total + weights[i] * dg.shortest_displacement(eta, members[i])
    return total


def objective(eta: dg.Diffeo, members, weights) -> float:
    """``⟨dist²(η, η_β)⟩``."""
    return float(sum(w * dg.distance(eta, m) ** 2 for w, m in zip(weights, members)))


def medoid(members, weights) -> int:
    costs = [objective(m, members, weights) for m in members]
    return int(np.argmin(costs))


def _l2(values, m) -> float:
    return float(np.sqrt(np.sum(m.weights * np.sum(values**2, axis=0))))


def karcher_mean(members: Sequence[dg.Diffeo], weights=None, tau: float = 1.0, tol: float = 1e-10,
                 maxiter: int = 100, method: str = dg.DEFAULT_METHOD) -> MeanResult:
    """Fixed-point iteration ``η ← exp(η, τ⟨log(η, η_β)⟩, 1)`` from the medoid.

    ``τ`` is halved whenever the objective would increase. The residual is
    ``‖⟨log⟩‖_{L²}``. Raises :class:`ConvergenceError` (with ``.result``) when
    ``maxiter`` is exhausted.
    """
    members = list(members)
    if not members:
        raise ValueError("empty ensemble")
    p = _weights(len(members), weights)
    eta = members[medoid(members, p)]
    obj = objective(eta, members, p)
    res_hist, obj_hist = [], [obj]
    for it in range(maxiter + 1):
        step_material = _weighted_material(eta, members, p)
        avg = dg.eulerian_from_material(eta, step_material, method)
        res = _l2(avg.values, eta.manifold)
        res_hist.append(res)
        log.debug("karcher iteration %d residual %.3e objective %.6e", it, res, obj)
        if res <= tol:
            logs = [dg.log(eta, mb, method) for mb in members]
            return MeanResult(eta, logs, res, it, True, res_hist, obj_hist)
        if it == maxiter:
            break
        t = tau
        while True:
            cand = dg.Diffeo(eta.manifold, eta.disp + t * step_material)
            new = objective(cand, members, p)
            if new <= obj + MONOTONE_SLACK or t < 1e-8:
                break
            t *= 0.5
        eta, obj = cand, new
        obj_hist.append(obj)
    logs = [dg.log(eta, mb, method) for mb in members]
    result = MeanResult(eta, logs, res_hist[-1], maxiter, False, res_hist, obj_hist)
    raise ConvergenceError(f"Karcher iteration stopped at residual {res_hist[-1]:.3e}", result)


def _flow_steady(v: VectorField, start: dg.Diffeo, tau: float, steps: int) -> dg.Diffeo:
    vals = v.values
    path = dg.VelocityPath(v.manifold, lambda t, pts: evaluate(vals, pts, "spectral"))
    return dg.flow(path, tau, tau / steps, start=start)


def karcher_mean_volume_constrained(members: Sequence[dg.Diffeo], weights=None, tau: float = 1.0,
                                    tol: float = 1e-8, maxiter: int = 100, flow_steps: int = 32,
                                    method: str = dg.DEFAULT_METHOD) -> MeanResult:
    """Karcher iteration restricted to volume-preserving maps of T².

    Each update velocity is the Leray projection of ``⟨log⟩``; the iterate
    moves by the time-``τ`` flow of that divergence-free field (RK4 with
    trigonometric interpolation), which keeps ``det Dη = 1``. The residual is
    the divergence-free part of ``⟨log⟩``; ``psi`` solves ``Δψ = div⟨log⟩``.
    """
    members = list(members)
    if not members:
        raise ValueError("empty ensemble")
    m = members[0].manifold
    if m.kind is not ManifoldKind.TORUS:
        raise UnsupportedManifoldError("the volume-constrained mean is implemented on T2")
    for i, mb in enumerate(members):
        defect = mb.volume_defect()
        if defect > VOLUME_TOL:
            raise InvariantViolation(f"member {i} is not volume-preserving (|det - 1| = {defect:.2e})")
    p = _weights(len(members), weights)
    eta = members[medoid(members, p)]
    obj = objective(eta, members, p)
    res_hist, obj_hist = [], [obj]

    def finish(eta, converged, it):
        logs = [dg.log(eta, mb, method) for mb in members]
        avg = weighted_sum(logs, p)
        div = calc.divergence(avg)
        div = ScalarField(m, div.values - calc.integrate(div) / m.volume)
        psi = calc.poisson_solve(div)
        res = _l2(calc.leray_project(avg).values, m)
        return MeanResult(eta, logs, res, it, converged, res_hist, obj_hist, psi)

    for it in range(maxiter + 1):
        avg = dg.eulerian_from_material(eta, _weighted_material(eta, members, p), method)
        v = calc.leray_project(avg)
        res = _l2(v.values, m)
        res_hist.append(res)
        log.debug("constrained karcher iteration %d residual %.3e", it, res)
        if res <= tol:
            return finish(eta, True, it)
        if it == maxiter:
            break
        t = tau
        while True:
            cand = _flow_steady(v, eta, t, flow_steps)
            new = objective(cand, members, p)
            if new <= obj + MONOTONE_SLACK or t < 1e-8:
                break
            t *= 0.5
        eta, obj = cand, new
        obj_hist.append(obj)
        if eta.volume_defect() > VOLUME_TOL:
            raise InvariantViolation("iterate lost volume preservation")
    raise ConvergenceError(f"constrained Karcher iteration stopped at residual {res_hist[-1]:.3e}",
                           finish(eta, False, maxiter))
