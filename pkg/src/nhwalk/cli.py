"""Command line runner: `nhwalk run` computes one scenario and writes CSV plus a JSON sidecar."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import (ConfigError, RunConfig, apply_overrides, parse_config, preset, presets)
from .errors import NumericalError
from .estimation import CoarseTable, TransientModel, crb_bound, estimate_angle, sample_counts
from .fisher import (ProbeSpec, fisher_point, fisher_sweep, fisher_time_trace, peak_scaling,
                     scaling_fit)
from .gbz import solve_gbz
from .noise import cfi_noisy
from .spectral import (LineSpec, bloch_loop, full_spectrum, line_gap_metric, point_gap_metric)
from .walk import Coin, build_step_operator

SCHEMA_VERSION = 1
THREADS_ENV = "NHWALK_THREADS"
PI = math.pi


class ScenarioFailure(Exception):
    """Numerical failure inside a scenario; the message names the failing point."""


@dataclass
class Table:
    columns: list
    units: dict
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _clean(value):
    """JSON-safe copy with non-finite floats as strings."""
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else repr(v)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def _failure_message(failures, labels):
    i, _, msg = failures[0]
    return f"grid point {i} (theta_over_pi={labels[i]!r}): {msg}"


# ------------------------------------------------------------------ scenarios

def _spectrum(cfg: RunConfig, workers: int) -> Table:
    walk = cfg.walk.build()
    spec = full_spectrum(build_step_operator(walk))
    s = cfg.spectrum
    table = Table(["index", "lambda_re", "lambda_im", "abs_lambda", "E_re", "E_im"],
                  {"lambda_re": "1", "lambda_im": "1", "abs_lambda": "1", "E_re": "rad", "E_im": "rad"})
    for k, (lam, e) in enumerate(zip(spec.eigenvalues, spec.quasi_energies)):
        table.rows.append([k, lam.real, lam.imag, abs(lam), e.real, e.imag])
    reference = complex(s.reference_re, s.reference_im)
    try:
        source = bloch_loop(walk, s.k_points) if walk.is_homogeneous else spec
        point = point_gap_metric(source, reference)
        table.summary["point_gap"] = {"is_closed": point.is_closed, "winding": point.winding,
                                      "loop_area": point.loop_area, "authoritative": point.authoritative}
    except ValueError as exc:
        table.summary["point_gap"] = {"error": str(exc)}
    line = LineSpec(complex(s.line_point_re, s.line_point_im),
                    complex(s.line_direction_re, s.line_direction_im))
    gap = line_gap_metric(spec, line)
    table.summary["line_gap"] = {"is_closed": gap.is_closed, "min_line_distance": gap.min_line_distance,
                                 "both_sides": gap.both_sides}
    return table


def _gbz(cfg: RunConfig, workers: int) -> Table:
    res = solve_gbz(cfg.walk.build(), tol=cfg.gbz.tol, window=cfg.gbz.window)
    table = Table(["lambda_re", "lambda_im", "abs_beta1_L", "abs_beta2_L", "abs_beta1_R", "abs_beta2_R",
                   "zeta_case", "ambiguous"], {c: "1" for c in ("lambda_re", "lambda_im")})
    for sol in res.solutions:
        table.rows.append([sol.lam.real, sol.lam.imag, *sol.moduli, sol.zeta_case, sol.ambiguous])
    table.summary = {"solutions": len(res.solutions), "failed_seeds": len(res.failed),
                     "max_modulus_step": res.max_modulus_step}
    if res.solutions:
        table.summary["max_unit_deviation"] = res.max_unit_deviation()
        table.summary["min_unit_deviation"] = res.min_unit_deviation()
    return table


def _probe(cfg: RunConfig) -> ProbeSpec:
    return cfg.probe.build()


def _grid(cfg: RunConfig) -> np.ndarray:
    return np.array(cfg.grid.values()) * PI


def _fisher_sweep(cfg: RunConfig, workers: int) -> Table:
    sw = fisher_sweep(cfg.walk.build(), _grid(cfg), _probe(cfg), cfg.probe.scheme, cfg.probe.h, workers)
    if sw.failures and not cfg.probe.allow_failures:
        raise ScenarioFailure(_failure_message(sw.failures, cfg.grid.values()))
    labels = cfg.grid.values()
    tq, vq = sw.peak("qfi")
    tc, vc = sw.peak("cfi")
    table = Table(["theta_over_pi", "qfi", "cfi", "peak"],
                  {"theta_over_pi": "pi rad", "qfi": "rad^-2", "cfi": "rad^-2", "peak": "label"})
    peak_label = {}
    for label, theta, q, c in zip(labels, sw.theta_grid, sw.qfi, sw.cfi):
        marks = [name for name, t in (("qfi", tq), ("cfi", tc)) if t == theta]
        for name in marks:
            peak_label[name] = label
        table.rows.append([label, q, c, "+".join(marks)])
    table.summary = {"peak_theta_qfi_over_pi": peak_label.get("qfi", math.nan), "peak_qfi": vq,
                     "peak_theta_cfi_over_pi": peak_label.get("cfi", math.nan), "peak_cfi": vc,
                     "failed_points": [[i, labels[i], m] for i, _, m in sw.failures]}
    return table


def _time_trace(cfg: RunConfig, workers: int) -> Table:
    walk = cfg.walk.build()
    p = cfg.probe
    theta = walk.parameter(p.parameter) if cfg.time_trace.theta is None else cfg.time_trace.theta * PI
    tr = fisher_time_trace(walk, theta, cfg.time_trace.t_max, Coin(p.coin), p.parameter, p.h)
    table = Table(["step", "t_over_N", "qfi", "cfi"], {"step": "1", "t_over_N": "1",
                                                       "qfi": "rad^-2", "cfi": "rad^-2"})
    for t, q, c in zip(tr.steps, tr.qfi, tr.cfi):
        table.rows.append([int(t), t / walk.size, q, c])
    table.summary = {"theta_over_pi": theta / PI, "N": walk.size}
    return table


def _scaling(cfg: RunConfig, workers: int) -> Table:
    walk = cfg.walk.build()
    s = cfg.scaling
    probe = _probe(cfg)
    table = Table(["N", "peak_theta_over_pi", "peak_value"],
                  {"N": "sites", "peak_theta_over_pi": "pi rad", "peak_value": "rad^-2"})
    if s.fixed_theta is not None:
        pick = 0 if s.which == "qfi" else 1
        thetas, values = [], []
        for size in s.sizes:
            try:
                v = fisher_point(walk.with_size((size - 1) // 2), s.fixed_theta * PI, probe, cfg.probe.h)[pick]
            except NumericalError as exc:
                raise ScenarioFailure(f"N={size} (theta_over_pi={s.fixed_theta!r}): {exc}") from exc
            thetas.append(s.fixed_theta * PI)
            values.append(v)
        fit = scaling_fit(s.sizes, values)
    else:
        try:
            res = peak_scaling(walk, s.sizes, _grid(cfg), probe, s.which, s.refine, cfg.probe.h, workers)
        except NumericalError as exc:
            raise ScenarioFailure(f"peak search: {exc}") from exc
        thetas, values, fit = res.peak_theta, res.peak_value, res.fit
    for size, t, v in zip(s.sizes, thetas, values):
        table.rows.append([size, t / PI, v])
    table.summary = {"which": s.which, "b": fit.exponent, "intercept": fit.intercept,
                     "r_squared": fit.r_squared}
    return table


def _bayes(cfg: RunConfig, workers: int) -> Table:
    walk = cfg.walk.build()
    e = cfg.estimation
    p = cfg.probe
    model = TransientModel(walk, p.steps, Coin(p.coin), p.parameter)
    coarse = CoarseTable.build(model, (e.prior_min * PI, e.prior_max * PI), e.coarse_points, workers)
    truths = cfg.grid.values() if e.theta_true is None else list(e.theta_true)
    probe = _probe(cfg)
    table = Table(["trial", "theta_true_over_pi", "theta_est_over_pi", "std_over_pi", "crb_over_pi", "seed"],
                  {"theta_true_over_pi": "pi rad", "theta_est_over_pi": "pi rad",
                   "std_over_pi": "pi rad", "crb_over_pi": "pi rad"})
    qfi_cache = {}
    trial = 0
    for truth in truths:
        theta = truth * PI
        try:
            if truth not in qfi_cache:
                qfi_cache[truth] = fisher_point(walk, theta, probe, p.h)[0]
            dist = model(theta)
        except NumericalError as exc:
            raise ScenarioFailure(f"theta_true_over_pi={truth!r}: {exc}") from exc
        for _ in range(e.trials):
            seed = cfg.seed + trial
            record = sample_counts(dist, e.M, seed, theta)
            post = estimate_angle(record, model, coarse, e.fine_points)
            table.rows.append([trial, truth, post.mean / PI, post.std / PI,
                               crb_bound(qfi_cache[truth], e.M) / PI, seed])
            trial += 1
    errors = [abs(r[2] - r[1]) <= 2 * r[3] for r in table.rows]
    table.summary = {"trials": trial, "coverage_2sigma": sum(errors) / len(errors), "M": e.M}
    return table


def _noise(cfg: RunConfig, workers: int) -> Table:
    walk = cfg.walk.build()
    p = cfg.probe
    steps = p.steps if p.steps is not None else walk.n
    spec = cfg.noise.build(cfg.seed)
    table = Table(["theta_over_pi", "cfi_mean", "cfi_std", "failed_runs"],
                  {"theta_over_pi": "pi rad", "cfi_mean": "rad^-2", "cfi_std": "rad^-2", "failed_runs": "1"})
    for i, label in enumerate(cfg.grid.values()):
        try:
            res = cfi_noisy(walk, label * PI, steps, Coin(p.coin), spec, parameter=p.parameter, h=p.h)
        except NumericalError as exc:
            raise ScenarioFailure(f"grid point {i} (theta_over_pi={label!r}): {exc}") from exc
        table.rows.append([label, res.mean, res.std, len(res.failures)])
    best = max(table.rows, key=lambda r: r[1])
    table.summary = {"peak_theta_over_pi": best[0], "peak_cfi_mean": best[1]}
    return table


SCENARIO_RUNNERS = {
    "spectrum": _spectrum,
    "gbz": _gbz,
    "fisher-sweep": _fisher_sweep,
    "time-trace": _time_trace,
    "scaling": _scaling,
    "bayes": _bayes,
    "noise": _noise,
}


# ------------------------------------------------------------------ output

def render_csv(table: Table) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sidecar(cfg: RunConfig, table: Table) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "seed": cfg.seed,
        "config": _clean(cfg.to_dict()),
        "columns": {c: table.units.get(c, "") for c in table.columns},
        "summary": _clean(table.summary),
    }


def run_config(cfg: RunConfig, out_dir: Path, workers: int = 1) -> tuple[Path, Path]:
    """Compute the scenario and write `<scenario>.csv` and `<scenario>.json` into out_dir."""
    try:
        table = SCENARIO_RUNNERS[cfg.scenario](cfg, workers)
    except NumericalError as exc:
        raise ScenarioFailure(str(exc)) from exc
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{cfg.scenario}.csv"
    json_path = out_dir / f"{cfg.scenario}.json"
    _atomic_write(csv_path, render_csv(table))
    _atomic_write(json_path, json.dumps(sidecar(cfg, table), indent=2, sort_keys=True) + "\n")
    return csv_path, json_path


def load_config_file(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: {path} is not valid JSON: {exc}") from exc
    if isinstance(data, dict) and "schema_version" in data:
        # an emitted sidecar: rerun its resolved config
        if data["schema_version"] != SCHEMA_VERSION:
            raise ConfigError(f"schema_version: unsupported value {data['schema_version']!r}")
        data = data.get("config")
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be an object")
    return data


def resolve(args) -> RunConfig:
    data: dict = {}
    if args.preset:
        data = preset(args.preset)
    if args.config:
        file_data = load_config_file(args.config)
        data = _merge(data, file_data)
    data = apply_overrides(data, args.set or [])
    if args.seed is not None:
        data["seed"] = args.seed
    cfg = parse_config(data)
    for section, build in (("walk", cfg.walk.build), ("probe", cfg.probe.build),
                           ("noise", lambda: cfg.noise.build(cfg.seed))):
        try:
            build()
        except ValueError as exc:
            raise ConfigError(f"{section}: {exc}") from exc
    return cfg


def _merge(base: dict, top: dict) -> dict:
    out = dict(base)
    for key, value in top.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get(THREADS_ENV)
    if env is None:
        return 1
    try:
        value = int(env)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV}: expected an integer, got {env!r}") from exc
    if value < 1:
        raise ConfigError(f"{THREADS_ENV}: must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nhwalk", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one scenario")
    run.add_argument("--config", help="JSON config file or an emitted sidecar")
    run.add_argument("--preset", help="start from a built-in preset")
    run.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="override a field by dotted path; repeatable")
    run.add_argument("--out", default="out", help="output directory (default: out)")
    run.add_argument("--seed", type=int, help="unsigned 64-bit seed")
    run.add_argument("--threads", type=int, help=f"worker threads (default: ${THREADS_ENV} or 1)")
    pre = sub.add_parser("presets", help="list presets or print one as JSON")
    pre.add_argument("name", nargs="?")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "presets":
        if args.name is None:
            print("\n".join(presets()))
            return 0
        try:
            print(json.dumps(parse_config(preset(args.name)).to_dict(), indent=2, sort_keys=True))
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        return 0
    try:
        cfg = resolve(args)
        workers = _threads(args)
        if workers < 1:
            raise ConfigError("threads: must be >= 1")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        csv_path, json_path = run_config(cfg, Path(args.out), workers)
    except ScenarioFailure as exc:
        print(f"numerical failure in {cfg.scenario}: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {csv_path} and {json_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
