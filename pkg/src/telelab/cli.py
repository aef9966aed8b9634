"""Command-line front end: ``telelab run``, ``telelab sweep``, ``telelab verify-report``.

Exit status: 0 on success, 1 for configuration errors, 2 when a numerical
invariant fails during a run or a report does not verify.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, plotting
from .experiments import PROTOCOLS, ConfigError, InvariantViolation, aggregate, resolve_params, run_trials
from .quantum_core import InvalidInput

SCHEMA_VERSION = 1
OUT_ENV = "TELELAB_OUT_DIR"
SWEEP_METRIC = {"nogo": "best_value", "innsbruck": "success_rate"}
DEFAULT_METRIC = "mean_fidelity"


def _pairs(items, source: str) -> dict:
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"{source}: expected key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def read_config_file(path) -> dict:
    """key=value lines; blank lines and ``#`` comments ignored."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    return _pairs([ln for ln in lines if ln], str(path))


def build_config(args) -> dict:
    file_cfg = read_config_file(args.config) if args.config else {}
    top = {k: file_cfg.pop(k) for k in ("protocol", "trials", "seed") if k in file_cfg}
    for key in ("protocol", "trials", "seed"):
        if getattr(args, key) is not None:
            top[key] = getattr(args, key)
    if "protocol" not in top:
        raise ConfigError("--protocol is required")
    params = {**file_cfg, **_pairs(args.param or [], "--param")}
    try:
        trials = int(top.get("trials", 1))
        seed = int(top.get("seed", 0))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    protocol = str(top["protocol"])
    return {
        "protocol": protocol,
        "trials": trials,
        "seed": seed,
        "params": resolve_params(protocol, params),
    }


def parse_axis(spec: str) -> tuple[str, list]:
    """``name=start:stop:step`` (stop inclusive) or ``name=v1,v2,...``."""
    if "=" not in spec:
        raise ConfigError(f"--axis: expected name=values, got {spec!r}")
    name, body = (s.strip() for s in spec.split("=", 1))
    if not body:
        raise ConfigError("--axis: empty axis")
    if ":" in body:
        try:
            start, stop, step = (float(x) for x in body.split(":"))
        except ValueError:
            raise ConfigError(f"--axis: bad range {body!r}") from None
        if step <= 0 or stop < start:
            raise ConfigError("--axis: range must have step > 0 and stop >= start")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        values = [round(start + i * step, 12) for i in range(n)]
    else:
        values = [v.strip() for v in body.split(",") if v.strip()]
    if not values:
        raise ConfigError("--axis: empty axis")
    return name, values


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or "telelab_out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _meta(t0: float) -> dict:
    return {
        "wall_time": time.perf_counter() - t0,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _csv_value(v):
    return json.dumps(v, sort_keys=True) if isinstance(v, (dict, list)) else v


def _write_csv(rows: list[dict], path: Path) -> None:
    cols: list = []
    for row in rows:
        cols += [k for k in row if k not in cols]
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for row in rows:
            w.writerow({k: _csv_value(v) for k, v in row.items()})


def execute(config: dict) -> dict:
    records = run_trials(config["protocol"], config["params"], config["trials"], config["seed"])
    return {
        "schema_version": SCHEMA_VERSION,
        "artifact_version": __version__,
        "config": config,
        "trials": records,
        "aggregates": aggregate(config["protocol"], config["params"], records),
    }


def cmd_run(args) -> int:
    config = build_config(args)
    out = _out_dir(args)
    t0 = time.perf_counter()
    report = execute(config)
    report["meta"] = _meta(t0)
    stem = f"{config['protocol']}_seed{config['seed']}"
    _dump(report, out / f"{stem}.json")
    _write_csv(report["trials"], out / f"{stem}_trials.csv")
    agg = report["aggregates"]
    if "outcome_histogram" in agg:
        plotting.outcome_histogram(agg["outcome_histogram"], config["protocol"], out / f"{stem}.png")
    else:
        key = "best_value" if config["protocol"] == "nogo" else "fidelity"
        values = [r.get(key) for r in report["trials"]]
        plotting.trial_series(values, key, config["protocol"], out / f"{stem}.png")
    print(json.dumps(agg, sort_keys=True))
    print(f"wrote {out / (stem + '.json')}")
    return 0


def cmd_sweep(args) -> int:
    config = build_config(args)
    name, values = parse_axis(args.axis)
    if name not in PROTOCOLS[config["protocol"]].params:
        raise ConfigError(f"--axis: {name!r} is not a parameter of {config['protocol']}")
    out = _out_dir(args)
    t0 = time.perf_counter()
    raw = {k: str(v) for k, v in config["params"].items()}
    rows, points = [], []
    for v in values:
        params = resolve_params(config["protocol"], {**raw, name: str(v)})
        point = execute({**config, "params": params})
        points.append(point)
        rows.append({name: params[name], **point["aggregates"]})
    metric = SWEEP_METRIC.get(config["protocol"], DEFAULT_METRIC)
    report = {
        "schema_version": SCHEMA_VERSION,
        "artifact_version": __version__,
        "config": config,
        "axis": {"name": name, "values": [r[name] for r in rows]},
        "metric": metric,
        "points": points,
        "rows": rows,
        "meta": _meta(t0),
    }
    stem = f"{config['protocol']}_sweep_{name}_seed{config['seed']}"
    _dump(report, out / f"{stem}.json")
    _write_csv(rows, out / f"{stem}.csv")
    plotting.sweep_curve(
        [r[name] for r in rows], [r.get(metric) for r in rows], name, metric,
        f"{config['protocol']} sweep", out / f"{stem}.png",
    )
    for row in rows:
        print(f"{name}={row[name]}  {metric}={row.get(metric)}")
    print(f"wrote {out / (stem + '.json')}")
    return 0


def _check_run(report: dict) -> list[str]:
    cfg = report["config"]
    params = resolve_params(cfg["protocol"], {k: str(v) for k, v in cfg["params"].items()})
    fresh = aggregate(cfg["protocol"], params, report["trials"])
    problems = [f"aggregate {k}: stored {report['aggregates'].get(k)!r} != recomputed {v!r}"
                for k, v in fresh.items() if report["aggregates"].get(k) != v]
    problems += [f"aggregate {k}: not recomputable" for k in report["aggregates"] if k not in fresh]
    if len(report["trials"]) != cfg["trials"]:
        problems.append("trial count does not match config")
    return problems


def verify_report(path) -> list[str]:
    """Mismatches between stored and recomputed aggregates; empty when the report verifies."""
    report = json.loads(Path(path).read_text())
    if report.get("schema_version") != SCHEMA_VERSION:
        return [f"unsupported schema_version {report.get('schema_version')!r}"]
    if "points" not in report:
        return _check_run(report)
    problems = []
    for i, (point, row) in enumerate(zip(report["points"], report["rows"])):
        problems += [f"point {i}: {p}" for p in _check_run(point)]
        stored = {k: v for k, v in row.items() if k != report["axis"]["name"]}
        if stored != point["aggregates"]:
            problems.append(f"point {i}: table row differs from point aggregates")
    if len(report["points"]) != len(report["rows"]):
        problems.append("row count does not match point count")
    return problems


def cmd_verify(args) -> int:
    bad = 0
    for path in args.reports:
        try:
            problems = verify_report(path)
        except (OSError, json.JSONDecodeError, KeyError) as exc:
            raise ConfigError(f"{path}: unreadable report ({exc})") from None
        for p in problems:
            print(f"{path}: {p}", file=sys.stderr)
        print(f"{path}: {'FAIL' if problems else 'ok'}")
        bad += bool(problems)
    return 2 if bad else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="telelab", description="Seeded teleportation protocol experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn in (("run", cmd_run), ("sweep", cmd_sweep)):
        p = sub.add_parser(name)
        p.add_argument("--protocol", choices=sorted(PROTOCOLS))
        p.add_argument("--trials", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--param", action="append", metavar="KEY=VALUE")
        p.add_argument("--config", metavar="FILE", help="key=value file; flags take precedence")
        p.add_argument("--out", metavar="DIR", help=f"output directory (default ${OUT_ENV} or ./telelab_out)")
        if name == "sweep":
            p.add_argument("--axis", required=True, metavar="NAME=START:STOP:STEP|V1,V2,...")
        p.set_defaults(func=fn)
    v = sub.add_parser("verify-report")
    v.add_argument("reports", nargs="+")
    v.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except (ConfigError, InvalidInput) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
