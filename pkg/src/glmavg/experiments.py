"""Config-driven experiments: each kind composes the library operations and
returns named checks (measured value, bound, pass flag) plus CSV tables.

A config is a flat JSON object. ``cases`` optionally lists partial configs
that override the top level; every case runs separately and its checks are
prefixed with the case name.
"""
from __future__ import annotations

import copy
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import average as avg
from . import diffeo as dg
from . import ensemble as ens_mod
from . import mean as mean_mod
from . import solvers as sv
from .errors import ConvergenceError
from .geometry import calculus as calc
from .geometry.fields import VectorField
from .geometry.manifold import ManifoldKind, circle, make_manifold
from .geometry.sphere import killing
from .geometry.testfields import random_trig_field

REPLICATE_STRIDE = 10007  # replicate seeds further apart than any ensemble size


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------- schema

_NUM = (int, float)
SCHEMA = {
    "kind": (str, "experiment kind (required)"),
    "name": (str, "run name, used for the default output directory"),
    "description": (str, "free text"),
    "manifold": (str, "S1 | T2 | S2"),
    "resolution": ((int, list), "grid size: n, [nx, ny] or [nlat, nlon]"),
    "eps": (_NUM, "fluctuation amplitude or alpha length scale"),
    "N": (int, "ensemble size"),
    "seed": (int, "base random seed"),
    "horizon": (_NUM, "final time T"),
    "dt": (_NUM, "time step"),
    "preset": (str, "initial condition / mean velocity preset"),
    "c": (_NUM, "peakon speed"),
    "mode": (str, "FiniteEps | AnalyticSecond"),
    "sampling": (str, "iid | lattice"),
    "divergence_free": (bool, "divergence-free ensemble members"),
    "eps_ladder": (list, "amplitudes for slope fits"),
    "N_ladder": (list, "ensemble sizes for Monte Carlo slope fits"),
    "replicates": (int, "independent ensembles per ensemble size"),
    "solver": (str, "ch | epdiff | euler-alpha"),
    "samples": (int, "trajectory samples for the action check"),
    "save_every": (int, "solver steps between saved states"),
    "filter_order": (int, "exponential spectral filter order (CH only, off when absent)"),
    "fields": (int, "number of random test fields"),
    "checks": (list, "subset of check names to run (default: all applicable)"),
    "tolerances": (dict, "per-check bound overrides"),
    "output": (str, "output directory"),
    "cases": (list, "partial configs run one after another"),
}
POSITIVE = ("eps", "N", "horizon", "dt", "c", "replicates", "samples", "save_every", "fields", "filter_order")
NON_NEGATIVE = ("eps", "seed")
SOLVERS = ("ch", "epdiff", "euler-alpha")


def _check_type(key, value):
    typ = SCHEMA[key][0]
    if typ is _NUM:
        ok = isinstance(value, _NUM) and not isinstance(value, bool)
    elif typ is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(typ, tuple):
        ok = isinstance(value, typ) and not isinstance(value, bool)
    else:
        ok = isinstance(value, typ)
    if not ok:
        raise ConfigError(f"{key!r} has the wrong type ({type(value).__name__})")


def _validate_values(cfg):
    for k in POSITIVE:
        if k in cfg and k not in NON_NEGATIVE and cfg[k] <= 0:
            raise ConfigError(f"{k!r} must be positive")
    for k in NON_NEGATIVE:
        if k in cfg and cfg[k] < 0:
            raise ConfigError(f"{k!r} must be non-negative")
    if "manifold" in cfg:
        try:
            ManifoldKind(cfg["manifold"])
        except ValueError:
            raise ConfigError(f"unknown manifold {cfg['manifold']!r}") from None
    if "resolution" in cfg:
        r = cfg["resolution"]
        vals = r if isinstance(r, list) else [r]
        if not vals or any(not isinstance(v, int) or isinstance(v, bool) or v < 4 for v in vals):
            raise ConfigError("resolution entries must be integers >= 4")
    for k in ("eps_ladder", "N_ladder"):
        if k in cfg:
            vals = cfg[k]
            if len(vals) < 2 or any(not isinstance(v, _NUM) or isinstance(v, bool) or v <= 0 for v in vals):
                raise ConfigError(f"{k!r} needs at least two positive numbers")
    if "mode" in cfg and cfg["mode"] not in [m.value for m in avg.Mode]:
        raise ConfigError(f"unknown mode {cfg['mode']!r}")
    if "sampling" in cfg and cfg["sampling"] not in ens_mod.SAMPLINGS:
        raise ConfigError(f"unknown sampling {cfg['sampling']!r}")
    if "solver" in cfg and cfg["solver"] not in SOLVERS:
        raise ConfigError(f"unknown solver {cfg['solver']!r}")
    if "preset" in cfg and cfg["preset"] not in sv.PRESETS:
        raise ConfigError(f"unknown preset {cfg['preset']!r}")
    for k, v in cfg.get("tolerances", {}).items():
        if not isinstance(v, _NUM) or isinstance(v, bool) or v < 0:
            raise ConfigError(f"tolerance for {k!r} must be a non-negative number")


def parse_config(raw, _nested=False) -> dict:
    """Validate a config object; returns a deep copy with defaults filled in."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - set(SCHEMA))
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(unknown)}")
    for k, v in raw.items():
        _check_type(k, v)
    cfg = copy.deepcopy(raw)
    if _nested:
        if "cases" in cfg or "output" in cfg:
            raise ConfigError("cases cannot set 'cases' or 'output'")
        return cfg
    if "kind" not in cfg:
        raise ConfigError("missing 'kind'")
    if cfg["kind"] not in KINDS:
        raise ConfigError(f"unknown kind {cfg['kind']!r}; choose from {', '.join(KINDS)}")
    cases = cfg.pop("cases", None)
    base = {**KINDS[cfg["kind"]].defaults, **cfg}
    if cases is None:
        resolved = [base]
    else:
        if not cases:
            raise ConfigError("'cases' must not be empty")
        resolved, names = [], set()
        for i, c in enumerate(cases):
            c = parse_config(c, _nested=True)
            kind = c.get("kind", base["kind"])
            if kind not in KINDS:
                raise ConfigError(f"unknown kind {kind!r} in case {i}")
            merged = {**KINDS[kind].defaults, **{k: v for k, v in cfg.items() if k != "name"}, **c}
            merged["kind"] = kind
            merged.setdefault("name", f"case{i}")
            if merged["name"] in names:
                raise ConfigError(f"duplicate case name {merged['name']!r}")
            names.add(merged["name"])
            resolved.append(merged)
    for c in resolved:
        _fill_manifold(c)
        _case_bounds(c)
        _validate_values(c)
        _select_checks(c)
    cfg["_cases"] = resolved
    if cases is not None:
        cfg["cases"] = cases
    return cfg


# --------------------------------------------------------------------------- reports

@dataclass
class Check:
    name: str
    measured: float
    bound: float
    passed: bool
    anchor: str
    expected: Optional[float] = None
    seconds: float = 0.0
    detail: dict = field(default_factory=dict)

    def to_dict(self, timing=False) -> dict:
        out = {"name": self.name, "measured": self.measured, "bound": self.bound, "pass": self.passed,
               "anchor": self.anchor}
        if self.expected is not None:
            out["expected"] = self.expected
        if self.detail:
            out["detail"] = self.detail
        if timing:
            out["seconds"] = self.seconds
        return out


@dataclass
class RunReport:
    kind: str
    name: str
    checks: list
    tables: dict
    seconds: float = 0.0
    error: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.error is None and bool(self.checks) and all(c.passed for c in self.checks)

    def to_dict(self, timing=False) -> dict:
        out = {"kind": self.kind, "name": self.name, "pass": self.passed,
               "checks": [c.to_dict(timing) for c in self.checks]}
        if self.error is not None:
            out["error"] = self.error
        if timing:
            out["seconds"] = self.seconds
        return out


@dataclass
class CheckSpec:
    bound: float
    anchor: str
    expected: Optional[float] = None  # slope checks pass when |measured - expected| <= bound
    where: Callable = lambda cfg: True


class _Recorder:
    def __init__(self, cfg, specs):
        self.cfg = cfg
        self.specs = specs
        self.selected = cfg["_checks"]
        self.checks = []
        self.tables = {}

    def wants(self, name):
        return name in self.selected

    def run(self, name, fn):
        """Time ``fn`` (returning the measured value, optionally with a detail dict) and record it."""
        if not self.wants(name):
            return None
        spec = self.specs[name]
        bound = float(self.cfg.get("tolerances", {}).get(name, spec.bound))
        t0 = time.perf_counter()
        out = fn()
        secs = time.perf_counter() - t0
        detail = {}
        if isinstance(out, tuple):
            out, detail = out
        val = float(out)
        if spec.expected is None:
            ok = bool(np.isfinite(val) and val <= bound)
        else:
            ok = bool(np.isfinite(val) and abs(val - spec.expected) <= bound)
        c = Check(name, val, bound, ok, spec.anchor, spec.expected, secs, detail)
        self.checks.append(c)
        return c

    def table(self, filename, header, rows):
        self.tables[filename] = (list(header), [list(r) for r in rows])


def _select_checks(cfg):
    kind = KINDS[cfg["kind"]]
    available = [n for n, s in kind.checks.items() if s.where(cfg)]
    wanted = cfg.get("checks")
    if wanted is None:
        chosen = available
    else:
        bad = [n for n in wanted if n not in kind.checks]
        if bad:
            raise ConfigError(f"unknown checks for {cfg['kind']}: {', '.join(map(str, bad))}")
        na = [n for n in wanted if n not in available]
        if na:
            raise ConfigError(f"checks not applicable to this configuration: {', '.join(na)}")
        chosen = list(wanted)
    if not chosen:
        raise ConfigError("no applicable checks")
    for k in cfg.get("tolerances", {}):
        if k not in kind.checks:
            raise ConfigError(f"tolerance given for unknown check {k!r}")
    cfg["_checks"] = chosen


def _manifold(cfg):
    return make_manifold(cfg["manifold"], cfg.get("resolution"))


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def _slope(xs, ys):
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


# --------------------------------------------------------------------------- verify-geometry

def _shear(m):
    x = m.nodes
    if m.kind is ManifoldKind.CIRCLE:
        return VectorField(m, np.sin(x[0])[None])
    return VectorField(m, np.stack([np.sin(x[1]), np.zeros(m.shape)]))


def _verify_geometry(cfg, rec):
    m = _manifold(cfg)
    seed, nf = cfg["seed"], cfg["fields"]

    def green_shear():
        u = _shear(m)
        lhs, rhs = calc.green_deformation(u, u)
        ref = 2 * np.pi**2 if m.kind is ManifoldKind.TORUS else 2 * np.pi
        return max(abs(lhs - ref), abs(rhs - ref)), {"lhs": lhs, "rhs": rhs, "reference": ref}

    def green_random(fn):
        def run():
            worst = 0.0
            for i in range(nf):
                u = random_trig_field(m, seed + 2 * i)
                v = random_trig_field(m, seed + 2 * i + 1)
                lhs, rhs = fn(u, v)
                worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300))
            return worst
        return run

    def weitzenbock():
        res = [calc.weitzenbock_residual(random_trig_field(m, seed + i)) for i in range(nf)]
        rec.table("weitzenbock.csv", ["field", "residual"], enumerate(res))
        return max(res)

    def killing_laplacians():
        Lz = VectorField.from_function(m, killing([0.0, 0.0, 1.0]))
        errs = {
            "rough": (calc.laplacian(Lz, calc.LaplacianKind.ROUGH) + Lz).sup(),
            "hodge": (calc.laplacian(Lz, calc.LaplacianKind.HODGE) + 2.0 * Lz).sup(),
            "ricci": calc.laplacian(Lz, calc.LaplacianKind.RICCI).sup(),
        }
        return max(errs.values()), errs

    rec.run("green-shear", green_shear)
    rec.run("green-deformation", green_random(calc.green_deformation))
    rec.run("green-gradient", green_random(calc.green_gradient))
    rec.run("weitzenbock", weitzenbock)
    rec.run("killing-laplacians", killing_laplacians)
    rec.table("checks.csv", ["check", "measured", "bound"],
              [[c.name, c.measured, c.bound] for c in rec.checks])


# --------------------------------------------------------------------------- ensemble-stats

def _test_velocity(m, seed):
    if m.kind is ManifoldKind.SPHERE:
        return random_trig_field(m, seed)
    return _shear(m)


def _identity_residual(u, ens):
    return max(avg.identity_curvature_term(u, ens)[1], avg.identity_laplacian_term(u, ens)[1])


def _sweep_residual(u, ens):
    # the curvature identity is the non-trivial one on S2, the Laplacian one on flat manifolds
    if u.manifold.is_flat:
        return avg.identity_laplacian_term(u, ens)[1]
    return avg.identity_curvature_term(u, ens)[1]


def _ensemble_stats(cfg, rec):
    m = _manifold(cfg)
    u = _test_velocity(m, cfg["seed"])
    det = ens_mod.deterministic_isotropic(m)
    rec.run("isotropy-deterministic", lambda: ens_mod.isotropy_defect(det))
    rec.run("identity-deterministic", lambda: _identity_residual(u, det))

    cache = {}

    def sweep():
        if cache:
            return cache
        Ns = [int(n) for n in cfg["N_ladder"]]
        rows = []
        for n in Ns:
            iso, ident = [], []
            for r in range(cfg["replicates"]):
                e = ens_mod.random_isotropic(m, n, cfg["seed"] + REPLICATE_STRIDE * r,
                                             cfg["divergence_free"], cfg["sampling"])
                iso.append(ens_mod.isotropy_defect(e))
                ident.append(_sweep_residual(u, e))
            rows.append([n, float(np.mean(iso)), float(np.mean(ident)), cfg["replicates"]])
        cache["Ns"] = Ns
        cache["rows"] = rows
        rec.table("nsweep.csv", ["N", "isotropy_defect", "identity_residual", "replicates"], rows)
        return cache

    def slope(col):
        def run():
            s = sweep()
            return _slope(s["Ns"], [r[col] for r in s["rows"]])
        return run

    rec.run("isotropy-mc-slope", slope(1))
    rec.run("identity-mc-slope", slope(2))


# --------------------------------------------------------------------------- expansion and averaging

def _shear_path(u):
    return dg.FlowPath(dg.VelocityPath.steady(u),
                       image=lambda t, X: np.stack([X[0] + t * np.sin(X[1]), X[1]]))


def _mean_flow(cfg, m):
    """Mean velocity and its flow. Shear has a closed-form flow; other presets are integrated."""
    name = cfg["preset"]
    if name == "shear":
        u = sv.preset("shear", m)
        return u, _shear_path(u)
    if name == "random":
        u = sv.random_smooth(m, cfg["seed"], divergence_free=True)
    else:
        u = sv.preset(name, m)
    return u, dg.FlowPath(dg.VelocityPath.steady(u, "spectral"))


def _expansion(cfg, rec):
    m = _manifold(cfg)
    u, path = _mean_flow(cfg, m)
    ens = ens_mod.deterministic_isotropic(m)
    t = 0.5
    ladder = [float(e) for e in cfg["eps_ladder"]]
    rows = {}

    def coefficients(w_path, e):
        return avg.expansion_coefficients(lambda s: avg.realization_flow(path, w_path, s, t)[1], e,
                                          richardson=False)

    def second_slope():
        paths = [avg.transported(w0, path) for w0 in ens.members]
        # the analytic coefficient uses the fluctuation transported to time t
        analytic = [avg.u_second_analytic(path.u(t), wp(t)) for wp in paths]
        errs = []
        for e in ladder:
            err = max(float(np.abs(coefficients(wp, e)[1].values - a.values).max())
                      for wp, a in zip(paths, analytic))
            errs.append(err)
            rows.setdefault(e, {})["second_error"] = err
        return _slope(ladder, errs), {"errors": errs}

    def first_transported():
        e = ladder[-1]
        worst = 0.0
        for w0 in ens.members:
            a, _ = coefficients(avg.transported(w0, path), e)
            worst = max(worst, a.sup())
        rows.setdefault(e, {})["first_transported"] = worst
        return worst

    def first_frozen():
        # frozen w: u' = [u, w] since the fluctuation has no time derivative
        e = ladder[-1]
        worst, scale = 0.0, 0.0
        for w0 in ens.members:
            a, _ = coefficients(avg.frozen(w0), e)
            ref = calc.lie_bracket(path.u(t), w0)
            worst = max(worst, (a - ref).sup())
            scale = max(scale, ref.sup())
        worst /= max(scale, 1e-300)
        rows.setdefault(e, {})["first_frozen_mismatch"] = worst
        return worst

    rec.run("second-order-slope", second_slope)
    rec.run("first-order-transported", first_transported)
    rec.run("first-order-frozen", first_frozen)
    cols = ["second_error", "first_transported", "first_frozen_mismatch"]
    rec.table("eps_sweep.csv", ["eps", *cols],
              [[e, *(rows[e].get(c, float("nan")) for c in cols)] for e in sorted(rows, reverse=True)])


def _lagrangian_row(rep):
    return [rep.eps, rep.mode, rep.L0, rep.L1, rep.L2_empirical, rep.L2_closed, rep.Lbar_empirical,
            rep.Lbar_closed, rep.Lbar_direct if rep.Lbar_direct is not None else float("nan"),
            rep.identity_residuals.get("curvature", float("nan")),
            rep.identity_residuals.get("laplacian", float("nan"))]


LAGRANGIAN_HEADER = ["eps", "mode", "L0", "L1", "L2_emp", "L2_closed", "Lbar_emp", "Lbar_closed", "Lbar_direct",
                     "curvature_residual", "laplacian_residual"]


def _average_lagrangian(cfg, rec):
    m = _manifold(cfg)
    eps = float(cfg["eps"])
    u, path = _mean_flow(cfg, m)
    ens = ens_mod.deterministic_isotropic(m)
    reps = {}

    def report(mode):
        if mode not in reps:
            if mode is avg.Mode.FINITE_EPS:
                reps[mode] = avg.averaged_lagrangian_empirical(u, ens, eps, mode, path=path)
            else:
                reps[mode] = avg.averaged_lagrangian_empirical(u, ens, eps, mode)
        return reps[mode]

    def closed_value():
        val = avg.averaged_lagrangian_closed(u, eps)
        ref = np.pi**2 * (1 + eps**2)
        return _rel(val, ref), {"Lbar_closed": val, "reference": ref}

    def empirical():
        r = report(avg.Mode.FINITE_EPS)
        errs = {"Lbar_empirical": _rel(r.Lbar_empirical, r.Lbar_closed),
                "Lbar_direct": _rel(r.Lbar_direct, r.Lbar_closed)}
        return max(errs.values()), {**errs, "Lbar_closed": r.Lbar_closed}

    def analytic():
        r = report(avg.Mode.ANALYTIC_SECOND)
        return _rel(r.Lbar_empirical, r.Lbar_closed)

    def first_order():
        modes = [avg.Mode(cfg["mode"])] if "mode" in cfg else list(avg.Mode)
        vals = {mo.value: abs(report(mo).L1) for mo in modes}
        return max(vals.values()), vals

    def h1_alpha():
        fields = {"preset": u, "random": sv.random_smooth(m, cfg["seed"] + 1, divergence_free=True)}
        errs = {k: _rel(avg.averaged_lagrangian_closed(v, eps), avg.h1_alpha_lagrangian(v, eps))
                for k, v in fields.items()}
        return max(errs.values()), errs

    rec.run("closed-form-value", closed_value)
    rec.run("empirical-finite-eps", empirical)
    rec.run("analytic-second", analytic)
    rec.run("first-order-term", first_order)
    rec.run("h1-alpha", h1_alpha)
    if reps:
        rec.table("lagrangian.csv", LAGRANGIAN_HEADER, [_lagrangian_row(reps[k]) for k in avg.Mode if k in reps])


# --------------------------------------------------------------------------- karcher-mean

def random_members(m, n, amp, seed):
    return [dg.Diffeo(m, amp * sv.random_smooth(m, seed + i).values) for i in range(n)]


def shear_members(m, n, amp, seed):
    """Volume-preserving members: a shear in x followed by a shear in y."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        a, b = amp * rng.uniform(0.5, 1.0, size=2)
        p, q = rng.uniform(0, 2 * np.pi, size=2)

        def image(X, a=a, b=b, p=p, q=q):
            x1 = X[0] + a * np.sin(X[1] + p)
            return np.stack([x1, X[1] + b * np.sin(x1 + q)])

        out.append(dg.Diffeo.from_image(m, image(m.nodes)))
    return out


def _karcher(cfg, rec):
    m = _manifold(cfg)
    amp = float(cfg["eps"])

    def three_shifts():
        if m.kind is ManifoldKind.CIRCLE:
            shifts = [0.3, -0.2, 0.5]
        else:
            shifts = [np.array([0.3, 0.1]), np.array([-0.2, 0.4]), np.array([0.5, -0.2])]
        members = [dg.Diffeo.shift(m, a) for a in shifts]
        target = np.mean(shifts, axis=0).reshape(-1, *([1] * m.dim))
        res = mean_mod.karcher_mean(members)
        return float(np.abs(res.mean.disp - target).max())

    def residual():
        members = random_members(m, cfg["N"], amp, cfg["seed"])
        res = mean_mod.karcher_mean(members, tol=min(1e-12, rec.specs["residual"].bound))
        rec.table("karcher_history.csv", ["iteration", "residual", "objective"],
                  [[i, r, o] for i, (r, o) in enumerate(zip(res.residual_history, res.objective_history))])
        return res.residual, {"iterations": res.iterations}

    cons = {}

    def constrained():
        if not cons:
            members = shear_members(m, cfg["N"], amp, cfg["seed"])
            try:
                res = mean_mod.karcher_mean_volume_constrained(members, tol=1e-12, method="spectral")
            except ConvergenceError as exc:
                res = exc.result
            avg_log = mean_mod.weighted_sum(res.fluctuation_logs, np.full(len(members), 1.0 / len(members)))
            curl_part = calc.leray_project(avg_log)
            cons["curl"] = curl_part.l2() / max(avg_log.l2(), 1e-300)
            cons["volume"] = res.mean.volume_defect()
            cons["iterations"] = res.iterations
            cons["absolute"] = res.residual
            rec.table("constrained_history.csv", ["iteration", "residual"], enumerate(res.residual_history))
        return cons

    rec.run("three-shifts", three_shifts)
    rec.run("residual", residual)
    rec.run("constrained-curl-free", lambda: (constrained()["curl"], {"iterations": constrained()["iterations"],
                                                                    "absolute": constrained()["absolute"]}))
    rec.run("constrained-volume", lambda: constrained()["volume"])


# --------------------------------------------------------------------------- pressure-term

def _pressure(cfg, rec):
    m = _manifold(cfg)
    u, _ = _mean_flow(cfg, m)
    ens = ens_mod.random_isotropic(m, cfg["N"], cfg["seed"], divergence_free=True, sampling=cfg["sampling"])
    out = {}

    def report():
        if not out:
            out["r"] = avg.pressure_term_contribution(u, ens)
            r = out["r"]
            rec.table("members.csv", ["member", "I", "I_dual"],
                      [[i, a, b] for i, (a, b) in enumerate(zip(r.per_member, r.dual))])
        return out["r"]

    def dual():
        r = report()
        return r.dual_discrepancy

    def vanishing():
        r = report()
        return r.ratio, {"mean": r.mean, "median_abs": r.median_abs}

    rec.run("dual-formula", dual)
    rec.run("mean-vanishes", vanishing)


# --------------------------------------------------------------------------- solve

def _solver_manifold(cfg):
    if cfg["solver"] == "ch":
        return make_manifold("S1", cfg.get("resolution", 256))
    return make_manifold("T2", cfg.get("resolution", 64))


def _initial(cfg, m):
    name = cfg["preset"]
    if name == "random":
        return sv.random_smooth(m, cfg["seed"], divergence_free=cfg["solver"] == "euler-alpha")
    return sv.preset(name, m, cfg["eps"], cfg["c"], cfg["seed"])


def _run_solver(cfg, m, u0):
    T, dt, eps, every = float(cfg["horizon"]), float(cfg["dt"]), float(cfg["eps"]), cfg["save_every"]
    if cfg["solver"] == "ch":
        return sv.solve_ch(u0, eps, T, dt, every, filter_order=cfg.get("filter_order"))
    if cfg["solver"] == "epdiff":
        return sv.solve_epdiff_2d(u0, eps, T, dt, every)
    return sv.solve_euler_alpha_2d(u0, eps, T, dt, every)


def _l2_error(m, a, b):
    return float(np.sqrt(np.sum(m.weights * np.sum((a - b) ** 2, axis=0))))


def _solve(cfg, rec):
    m = _solver_manifold(cfg)
    u0 = _initial(cfg, m)
    traj, diag = _run_solver(cfg, m, u0)
    final = traj[-1]
    rec.table("diagnostics.csv", diag.header(m.ncomp), diag.rows())
    coords = ["x"] if m.ncomp == 1 else ["x", "y"]
    comps = ["u"] if m.ncomp == 1 else ["u0", "u1"]
    nodes = m.nodes.reshape(m.nodes.shape[0], -1)
    vals = final.u.values.reshape(m.ncomp, -1)
    rec.table("final_state.csv", ["node", *coords, *comps],
              [[i, *nodes[:, i], *vals[:, i]] for i in range(m.size)])

    def zero():
        top = max(float(np.abs(s.u.values).max()) for s in traj)
        diag_max = max(max(abs(e) for e in diag.energy), max(float(np.abs(mm).max()) for mm in diag.momentum))
        return max(top, diag_max)

    def casimir():
        mom = np.array(diag.momentum, dtype=float)
        scale = max(float(np.sum(m.weights * np.abs(traj[0].m.values))), 1e-300)
        return float(np.abs(mom - mom[0]).max()) / scale

    def peakon_shape():
        c, T = float(cfg["c"]), float(final.t)
        ref = sv.peakon(m, cfg["eps"], c, shift=c * T)  # crest starts at x = 0
        err = _l2_error(m, final.u.values, ref.values)
        return err, {"relative": err / _l2_error(m, ref.values, 0.0), "rms": err / np.sqrt(m.volume), "time": T}

    def steady():
        return float(np.abs(final.u.values - u0.values).max())

    def divergence():
        return float(max(diag.div_sup))

    def reduction():
        # y-invariant data: the first component solves CH on the x-circle, the second stays zero
        c1 = circle(m.shape[0])
        v0 = VectorField(c1, u0.values[0][:, 0][None])
        ch_traj, _ = sv.solve_ch(v0, float(cfg["eps"]), float(cfg["horizon"]), float(cfg["dt"]), cfg["save_every"])
        ref = ch_traj[-1].u.values[0][:, None]
        return max(float(np.abs(final.u.values[0] - ref).max()), float(np.abs(final.u.values[1]).max()))

    rec.run("zero-solution", zero)
    rec.run("energy-drift", diag.energy_drift)
    rec.run("casimir", casimir)
    rec.run("peakon-shape", peakon_shape)
    rec.run("steady", steady)
    rec.run("divergence", divergence)
    rec.run("ch-reduction", reduction)


# --------------------------------------------------------------------------- action-check

def _action(cfg, rec):
    m = _solver_manifold(cfg)
    if cfg["solver"] == "euler-alpha":
        raise ConfigError("the action check uses the ch or epdiff solver")
    u0 = _initial(cfg, m)
    T, eps = float(cfg["horizon"]), float(cfg["eps"])
    steps = int(round(T / float(cfg["dt"])))
    every = max(1, steps // (cfg["samples"] - 1))
    run_cfg = {**cfg, "save_every": every}
    traj, _ = _run_solver(run_cfg, m, u0)
    G = sv.random_smooth(m, cfg["seed"] + 1).values

    def w_test(t):
        return VectorField(m, np.sin(np.pi * t / T) ** 2 * G)

    def w_dot(t):
        return VectorField(m, np.pi / T * np.sin(2 * np.pi * t / T) * G)

    ladder = [float(e) for e in cfg["eps_ladder"]]
    reps = {}

    def solution():
        reps["solution"] = sv.action_stationarity_check(traj, w_test, ladder, w_dot=w_dot)
        return reps["solution"].slope, {"linear": reps["solution"].linear}

    def control():
        fr = sv.frozen_trajectory(u0, eps, float(traj[-1].t), len(traj))
        reps["frozen"] = sv.action_stationarity_check(fr, w_test, ladder, w_dot=w_dot)
        return reps["frozen"].slope, {"linear": reps["frozen"].linear}

    def zero_test():
        zero = lambda t: VectorField.zeros(m)  # noqa: E731
        r = sv.action_stationarity_check(traj, zero, ladder, w_dot=zero)
        return float(np.abs(r.differences).max())

    rec.run("solution-slope", solution)
    rec.run("frozen-control-slope", control)
    rec.run("zero-variation", zero_test)
    rec.table("action.csv", ["eps", *[f"difference_{k}" for k in reps]],
              [[e, *(reps[k].differences[i] for k in reps)] for i, e in enumerate(ladder)])


# --------------------------------------------------------------------------- registry

@dataclass
class Kind:
    summary: str
    anchor: str
    runner: Callable
    defaults: dict
    checks: dict


def _on(*kinds):
    return lambda cfg: cfg["manifold"] in kinds


def _solver_is(*names):
    return lambda cfg: cfg["solver"] in names


KINDS = {
    "verify-geometry": Kind(
        "integral identities and Laplacian relations of the geometry layer",
        "2∫g(Def u, Def v) = -∫g(Δ_R u + ∇div u, v);  Δ_H = Δ_rough - Ric♯",
        _verify_geometry,
        {"manifold": "T2", "resolution": 64, "seed": 0, "fields": 10},
        {
            "green-shear": CheckSpec(1e-10, "shear (sin y, 0) on T2: 2∫|Def u|² = -∫g(Δ_R u + ∇div u, u) = 2π²",
                                     where=_on("T2", "S1")),
            "green-deformation": CheckSpec(1e-8, "2∫g(Def u, Def v) = -∫g(Δ_R u + ∇div u, v), random fields"),
            "green-gradient": CheckSpec(1e-8, "∫g(∇u, ∇v) = -∫g(Δ_rough u, v), random fields"),
            "weitzenbock": CheckSpec(1e-6, "Δ_H u = Δ_rough u - Ric♯ u, relative L² residual"),
            "killing-laplacians": CheckSpec(1e-5, "Killing L_z on S2: Δ_rough = -L_z, Δ_H = -2 L_z, Δ_R = 0",
                                            where=_on("S2")),
        }),
    "ensemble-stats": Kind(
        "isotropy of fluctuation ensembles and the averaged second-order identities",
        "⟨w⊗w⟩ = g⁻¹ ⇒ ⟨g(R(u,w)w,u)⟩ = Ric(u,u) and ⟨∇_w∇_w u - ∇_{∇_w w}u⟩ = Δ_rough u",
        _ensemble_stats,
        {"manifold": "T2", "resolution": 16, "seed": 0, "N_ladder": [16, 32, 64, 128, 256, 512, 1024],
         "replicates": 16, "sampling": "iid", "divergence_free": False},
        {
            "isotropy-deterministic": CheckSpec(1e-12, "deterministic ensemble: sup|⟨w⊗w⟩ - g⁻¹|"),
            "identity-deterministic": CheckSpec(1e-10, "deterministic ensemble: curvature and Laplacian identity residuals"),
            "isotropy-mc-slope": CheckSpec(0.15, "random ensembles: isotropy defect ~ N^(-1/2)", expected=-0.5),
            "identity-mc-slope": CheckSpec(0.15, "random ensembles: curvature (S2) or Laplacian (flat) identity residual ~ N^(-1/2)", expected=-0.5),
        }),
    "expansion": Kind(
        "finite-amplitude realization flows against the analytic expansion coefficients",
        "u'' = -R(u,w)w + ∇_{∇_w w}u - ∇_w∇_w u;  u' = ẇ + L_u w",
        _expansion,
        {"manifold": "T2", "resolution": 32, "preset": "shear", "eps_ladder": [1e-1, 3e-2, 1e-2], "seed": 0},
        {
            "second-order-slope": CheckSpec(0.1, "finite-difference u'' minus analytic u'' = O(ε²)", expected=2.0),
            "first-order-transported": CheckSpec(1e-4, "Lie-transported fluctuations: u' = 0"),
            "first-order-frozen": CheckSpec(1e-3, "frozen fluctuations: u' = L_u w = [u, w], relative"),
        }),
    "average-lagrangian": Kind(
        "ensemble-averaged Lagrangian against its closed second-order form",
        "Lbar = ½∫|u|² - ε² g(Δ_R u, u) dμ;  = ½∫|u|² + 2ε²|Def u|² for div u = 0",
        _average_lagrangian,
        {"manifold": "T2", "resolution": 32, "preset": "shear", "eps": 1e-2, "seed": 0},
        {
            "closed-form-value": CheckSpec(1e-12, "shear: Lbar_closed = π²(1 + ε²)",
                                           where=lambda cfg: cfg["preset"] == "shear"),
            "empirical-finite-eps": CheckSpec(1e-3, "FiniteEps Lbar (coefficients and direct average) vs closed form"),
            "analytic-second": CheckSpec(1e-8, "AnalyticSecond Lbar vs closed form"),
            "first-order-term": CheckSpec(1e-10, "|L1| = |∫g(u, ⟨u'⟩)|"),
            "h1-alpha": CheckSpec(1e-8, "closed Lbar = ½∫|u|² + 2ε²|Def u|² for divergence-free u"),
        }),
    "karcher-mean": Kind(
        "Karcher mean of maps and the volume-constrained variant",
        "η̄ = argmin ⟨dist²(η, η_β)⟩ ⇔ ⟨log(η̄, η_β)⟩ = 0;  constrained: ⟨log⟩ = ∇ψ",
        _karcher,
        {"manifold": "S1", "resolution": 64, "N": 8, "eps": 0.05, "seed": 0},
        {
            "three-shifts": CheckSpec(1e-8, "mean of three shifts is the shift by (a+b+c)/3", where=_on("S1", "T2")),
            "residual": CheckSpec(1e-10, "‖⟨log(η̄, η_β)⟩‖_L² at convergence", where=_on("S1", "T2")),
            "constrained-curl-free": CheckSpec(1e-6, "volume-constrained mean: ‖P⟨log⟩‖ / ‖⟨log⟩‖, P the Leray projector",
                                               where=_on("T2")),
            "constrained-volume": CheckSpec(1e-6, "volume-constrained mean: sup|det Dη̄ - 1|", where=_on("T2")),
        }),
    "pressure-term": Kind(
        "pressure correction of the volume-preserving closure",
        "I_β = ∫g(L_u ∇φ_β, u), φ_β = -Δ⁻¹ div(∇_w w);  ⟨I_β⟩ = 0 under isotropy",
        _pressure,
        {"manifold": "T2", "resolution": 32, "N": 256, "seed": 0, "sampling": "lattice", "preset": "random"},
        {
            "dual-formula": CheckSpec(1e-8, "I_β = -∫g(w, ∇_w ∇Δ⁻¹ div(∇_u u + ½∇|u|²)), max discrepancy"),
            "mean-vanishes": CheckSpec(1e-2, "|⟨I_β⟩| / median|I_β|"),
        }),
    "solve": Kind(
        "Camassa-Holm, EPDiff and Euler-alpha integrations with conservation diagnostics",
        "ṁ + ∇_u m + (∇u)ᵀm + m div u = 0 (EPDiff);  + ∇p, div u = 0 (Euler-α);  m = (1 - ε²Δ)u",
        _solve,
        {"solver": "ch", "preset": "sine", "eps": 0.5, "horizon": 1.0, "dt": 1e-3, "save_every": 100,
         "c": 1.0, "seed": 0},
        {
            "zero-solution": CheckSpec(0.0, "u0 = 0 stays 0", where=lambda cfg: cfg["preset"] == "zero"),
            "energy-drift": CheckSpec(1e-8, "|E(t) - E(0)| / E(0), E = ½∫g(m, u)",
                                      where=lambda cfg: cfg["preset"] != "zero"),
            "casimir": CheckSpec(1e-10, "∫m dx conserved (relative to ∫|m|)", where=_solver_is("ch")),
            "peakon-shape": CheckSpec(1e-2, "peakon c cosh((x - ct - π)/ε)/cosh(π/ε) (crest at ct), L² error",
                                      where=lambda cfg: cfg["solver"] == "ch" and cfg["preset"] == "peakon"),
            "steady": CheckSpec(1e-10, "steady solutions: sup|u(T) - u0|",
                                where=lambda cfg: cfg["solver"] == "euler-alpha"
                                and cfg["preset"] in ("shear", "taylor-green", "zero")),
            "divergence": CheckSpec(1e-10, "sup|div u| over saved states", where=_solver_is("euler-alpha")),
            "ch-reduction": CheckSpec(1e-8, "y-invariant EPDiff equals CH in x",
                                      where=lambda cfg: cfg["solver"] == "epdiff" and cfg["preset"] == "sine"),
        }),
    "action-check": Kind(
        "second-order stationarity of the reduced action under Lin-constrained variations",
        "δu = ẇ + L_u w,  S̄(u + εδu) - S̄(u) = O(ε²) on solutions",
        _action,
        {"solver": "ch", "preset": "sine", "eps": 0.5, "horizon": 1.0, "dt": 1e-3, "samples": 201,
         "eps_ladder": [1e-3, 1e-4, 1e-5], "c": 1.0, "seed": 2},
        {
            "solution-slope": CheckSpec(0.1, "solver trajectory: log-log slope of the action difference", expected=2.0),
            "frozen-control-slope": CheckSpec(0.1, "frozen u0 (not a solution): slope", expected=1.0),
            "zero-variation": CheckSpec(0.0, "w = 0 gives zero difference"),
        }),
}


def _fill_manifold(cfg):
    if cfg["kind"] in ("solve", "action-check"):
        want = "S1" if cfg["solver"] == "ch" else "T2"
        if cfg.setdefault("manifold", want) != want:
            raise ConfigError(f"solver {cfg['solver']!r} runs on {want}, not {cfg['manifold']!r}")


# manifold-dependent default bounds
_S2_BOUNDS = {"identity-deterministic": 1e-5, "green-deformation": 1e-6, "green-gradient": 1e-6}


def _case_bounds(cfg):
    if cfg.get("manifold") == "S2":
        tol = dict(cfg.get("tolerances", {}))
        for k, v in _S2_BOUNDS.items():
            if k in KINDS[cfg["kind"]].checks:
                tol.setdefault(k, v)
        cfg["tolerances"] = tol


def sample_config(kind: str) -> dict:
    k = KINDS[kind]
    return {"kind": kind, **k.defaults}


def run_case(cfg) -> RunReport:
    kind = KINDS[cfg["kind"]]
    rec = _Recorder(cfg, kind.checks)
    t0 = time.perf_counter()
    error = None
    try:
        kind.runner(cfg, rec)
    except ConfigError:
        raise
    except Exception as exc:  # reported as a runtime failure
        error = f"{type(exc).__name__}: {exc}"
    return RunReport(cfg["kind"], cfg.get("name", cfg["kind"]), rec.checks, rec.tables,
                     time.perf_counter() - t0, error)
