"""Acceptance suite: one test per criterion, each driven by its config file.

Every criterion config under ``configs/acceptance`` is parsed and run through
the experiment runner. The bounds below are the stated acceptance tolerances
and are applied here, independently of whatever the config file says, so a
loosened config cannot turn a criterion green. Checks a config runs beyond the
stated ones must pass at their own bounds.

Run ``python tests/test_acceptance.py`` for the pass/fail table without
pytest, or ``pytest tests/test_acceptance.py`` (the table is repeated in the
terminal summary).
"""
from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import pytest

from glmavg import experiments as ex

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs" / "acceptance"
ONLY = None  # key for a config without cases


@dataclass
class Criterion:
    title: str
    config: str
    # (case, check) -> (bound, expected); expected=None means measured <= bound
    stated: dict
    # case -> parameters the config must use
    params: dict = field(default_factory=dict)


CRITERIA = {
    1: Criterion("Weitzenbock identity, S2", "01-weitzenbock.json",
                 {(ONLY, "weitzenbock"): (1e-6, None)},
                 {ONLY: {"manifold": "S2", "resolution": [64, 128], "fields": 10}}),
    2: Criterion("Green formula on the T2 shear", "02-green-shear.json",
                 {(ONLY, "green-shear"): (1e-10, None)},
                 {ONLY: {"manifold": "T2"}}),
    3: Criterion("Killing Laplacians, S2", "03-killing-laplacians.json",
                 {(ONLY, "killing-laplacians"): (1e-5, None)},
                 {ONLY: {"manifold": "S2"}}),
    4: Criterion("isotropy identities", "04-isotropy-identities.json",
                 {("T2", "identity-deterministic"): (1e-10, None),
                  ("S2", "identity-deterministic"): (1e-5, None),
                  ("T2", "isotropy-mc-slope"): (0.15, -0.5),
                  ("T2", "identity-mc-slope"): (0.15, -0.5),
                  ("S2", "isotropy-mc-slope"): (0.15, -0.5),
                  ("S2", "identity-mc-slope"): (0.15, -0.5)},
                 {"T2": {"manifold": "T2", "N_ladder": [16, 32, 64, 128, 256, 512, 1024]},
                  "S2": {"manifold": "S2", "N_ladder": [16, 32, 64, 128, 256, 512, 1024]}}),
    5: Criterion("second-order expansion", "05-second-order-expansion.json",
                 {(ONLY, "second-order-slope"): (0.1, 2.0)},
                 {ONLY: {"manifold": "T2", "preset": "shear"}}),
    6: Criterion("averaged Lagrangian closure", "06-averaged-lagrangian.json",
                 {(ONLY, "empirical-finite-eps"): (1e-3, None),
                  (ONLY, "analytic-second"): (1e-8, None),
                  (ONLY, "first-order-term"): (1e-10, None)},
                 {ONLY: {"manifold": "T2", "preset": "shear", "eps": 0.01}}),
    7: Criterion("H1-alpha equivalence", "07-h1-alpha.json",
                 {(ONLY, "h1-alpha"): (1e-8, None)},
                 {ONLY: {"manifold": "T2"}}),
    8: Criterion("pressure-term vanishing", "08-pressure-term.json",
                 {(ONLY, "mean-vanishes"): (1e-2, None),
                  (ONLY, "dual-formula"): (1e-8, None)},
                 {ONLY: {"manifold": "T2", "N": 256}}),
    9: Criterion("Karcher mean", "09-karcher-mean.json",
                 {("S1", "three-shifts"): (1e-8, None),
                  ("S1", "residual"): (1e-10, None),
                  ("T2", "constrained-curl-free"): (1e-6, None)},
                 {"S1": {"manifold": "S1"}, "T2": {"manifold": "T2"}}),
    10: Criterion("Camassa-Holm", "10-camassa-holm.json",
                  {("peakon", "peakon-shape"): (1e-2, None),
                   ("smooth", "energy-drift"): (1e-8, None)},
                  {"peakon": {"solver": "ch", "preset": "peakon", "c": 1.0, "eps": 0.2, "resolution": 1024,
                              "horizon": math.pi},
                   "smooth": {"solver": "ch", "horizon": 10}}),
    11: Criterion("EPDiff and Euler-alpha", "11-epdiff-euler-alpha.json",
                  {("reduction", "ch-reduction"): (1e-8, None),
                   ("shear", "steady"): (1e-10, None),
                   ("taylor-green", "steady"): (1e-8, None),
                   ("epdiff-energy", "energy-drift"): (1e-8, None),
                   ("euler-alpha-energy", "energy-drift"): (1e-8, None)},
                  {"reduction": {"solver": "epdiff"}, "shear": {"solver": "euler-alpha", "preset": "shear"},
                   "taylor-green": {"solver": "euler-alpha", "preset": "taylor-green", "eps": 0},
                   "epdiff-energy": {"solver": "epdiff"}, "euler-alpha-energy": {"solver": "euler-alpha"}}),
    12: Criterion("action stationarity", "12-action-stationarity.json",
                  {("ch", "solution-slope"): (0.1, 2.0),
                   ("ch", "frozen-control-slope"): (0.1, 1.0),
                   ("epdiff", "solution-slope"): (0.1, 2.0),
                   ("epdiff", "frozen-control-slope"): (0.1, 1.0)},
                  {"ch": {"solver": "ch"}, "epdiff": {"solver": "epdiff"}}),
}


@dataclass
class Outcome:
    number: int
    passed: bool
    seconds: float
    problems: list
    values: list

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        crit = CRITERIA[self.number]
        body = "; ".join(self.problems) if self.problems else ", ".join(self.values)
        return f"criterion {self.number:2d}: {flag} {crit.title} ({self.seconds:.1f}s) {body}"


def _case_key(cfg, case):
    return case["name"] if "cases" in cfg else ONLY


def _param_problems(want, case):
    out = []
    for k, v in want.items():
        got = case.get(k)
        if isinstance(v, float) and isinstance(got, (int, float)):
            ok = math.isclose(got, v, rel_tol=1e-12, abs_tol=1e-15)
        else:
            ok = got == v
        if not ok:
            out.append(f"config {k}={got!r}, criterion needs {v!r}")
    return out


def evaluate(number: int) -> Outcome:
    crit = CRITERIA[number]
    cfg = ex.parse_config(json.loads((CONFIG_DIR / crit.config).read_text()))
    problems, values, seconds, seen = [], [], 0.0, set()
    cases = {_case_key(cfg, c): c for c in cfg["_cases"]}
    for key, want in crit.params.items():
        if key not in cases:
            problems.append(f"missing case {key}")
            continue
        problems += _param_problems(want, cases[key])
    for key, case in cases.items():
        rep = ex.run_case(case)
        seconds += rep.seconds
        label = f"{key}/" if key is not ONLY else ""
        if rep.error:
            problems.append(f"{label}error: {rep.error}")
        for c in rep.checks:
            seen.add((key, c.name))
            if (key, c.name) in crit.stated:
                bound, expected = crit.stated[(key, c.name)]
                ok = abs(c.measured - expected) <= bound if expected is not None else c.measured <= bound
                rel = f"{expected:g}+-{bound:g}" if expected is not None else f"<={bound:g}"
            else:
                ok, rel = c.passed, f"<={c.bound:g} (supplementary)"
            text = f"{label}{c.name}={c.measured:.3g}"
            values.append(text)
            if not ok:
                problems.append(f"{text} not {rel}")
    for key in crit.stated:
        if key not in seen:
            problems.append(f"check {key[1]} not run for {key[0] or 'config'}")
    return Outcome(number, not problems, seconds, problems, values)


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, record_property):
    out = evaluate(number)
    record_property("acceptance", out.line())
    assert out.passed, out.line()


if __name__ == "__main__":
    outcomes = [evaluate(n) for n in sorted(CRITERIA)]
    for o in outcomes:
        print(o.line(), flush=True)
    sys.exit(0 if all(o.passed for o in outcomes) else 1)
