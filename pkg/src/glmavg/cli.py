"""Command line entry point.

    glmavg run CONFIG.json [--out DIR]
    glmavg list [--sample KIND]

Exit status: 0 all checks pass, 1 a check failed, 2 the config is invalid,
3 the run raised. Thread count for transforms comes from ``GLMAVG_THREADS``.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import experiments as ex
from . import io
from .solvers import PRESETS

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def load_config(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ex.ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ex.ConfigError(f"{path} is not valid JSON: {exc}") from exc
    return ex.parse_config(raw)


def _output_dir(cfg, override, config_path):
    if override:
        return Path(override)
    if "output" in cfg:
        return Path(cfg["output"])
    return Path("runs") / cfg.get("name", Path(config_path).stem)


def _write(out: Path, reports, multi):
    checks, timings = [], {}
    for rep in reports:
        sub = out / rep.name if multi else out
        for fname, (header, rows) in rep.tables.items():
            io.write_table(sub / fname, header, rows)
        prefix = f"{rep.name}/" if multi else ""
        for c in rep.checks:
            d = c.to_dict()
            d["name"] = prefix + c.name
            checks.append(d)
            timings[prefix + c.name] = c.seconds
        timings[f"{prefix}total" if multi else "total"] = rep.seconds
    return checks, timings


def run(config_path, out=None, stream=sys.stdout) -> int:
    try:
        cfg = load_config(config_path)
    except ex.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    cases = cfg["_cases"]
    multi = "cases" in cfg
    reports = []
    for case in cases:
        rep = ex.run_case(case)
        reports.append(rep)
        prefix = f"{rep.name}/" if multi else ""
        for c in rep.checks:
            flag = "PASS" if c.passed else "FAIL"
            extra = f" (expected {c.expected:g} ± {c.bound:g})" if c.expected is not None else f" (bound {c.bound:g})"
            print(f"{flag} {prefix}{c.name}: {c.measured:.6g}{extra}  [{c.seconds:.2f}s]", file=stream)
        if rep.error:
            print(f"ERROR {prefix or rep.name + ': '}{rep.error}", file=stream)
    outdir = _output_dir(cfg, out, config_path)
    checks, timings = _write(outdir, reports, multi)
    errors = {r.name: r.error for r in reports if r.error}
    passed = all(r.passed for r in reports)
    public = {k: v for k, v in cfg.items() if not k.startswith("_")}
    report = {"kind": cfg["kind"], "name": cfg.get("name", Path(config_path).stem), "config": public,
              "checks": checks, "pass": passed}
    if errors:
        report["errors"] = errors
    io.write_json(outdir / "report.json", report)
    io.write_json(outdir / "timings.json", timings)
    print(f"{'PASS' if passed else 'FAIL'} {report['name']} -> {outdir}", file=stream)
    if errors:
        return EXIT_RUNTIME
    return EXIT_PASS if passed else EXIT_FAIL


def describe() -> str:
    lines = ["experiment kinds:"]
    for name, k in ex.KINDS.items():
        lines.append(f"  {name:20s} {k.summary}")
        lines.append(f"  {'':20s} anchor: {k.anchor}")
        for cname, spec in k.checks.items():
            rel = f"{spec.expected:g} ± {spec.bound:g}" if spec.expected is not None else f"<= {spec.bound:g}"
            lines.append(f"  {'':22s}- {cname} ({rel}): {spec.anchor}")
    lines.append("")
    lines.append("presets: " + ", ".join(PRESETS))
    lines.append("")
    lines.append("config keys:")
    for key, (typ, doc) in ex.SCHEMA.items():
        tname = "/".join(t.__name__ for t in typ) if isinstance(typ, tuple) else typ.__name__
        lines.append(f"  {key:16s} {tname:10s} {doc}")
    lines.append("")
    lines.append("sample config:")
    lines.append(json.dumps(ex.sample_config("verify-geometry"), indent=2, sort_keys=True))
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="glmavg", description="Lagrangian-averaging experiments")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--out", help="output directory (overrides the config)")
    p_list = sub.add_parser("list", help="list experiment kinds, presets and the config schema")
    p_list.add_argument("--sample", choices=list(ex.KINDS), help="print a sample config for KIND")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "list":
        if args.sample:
            print(json.dumps(ex.sample_config(args.sample), indent=2, sort_keys=True))
        else:
            print(describe())
        return EXIT_PASS
    return run(args.config, args.out)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
