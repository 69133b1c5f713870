"""Experiment runner writing plot-ready CSV files.

Usage::

    semidiscrete {simulate|figure1|figure2|converge|moments} \\
        [--config PATH] [--key=value ...] [--out DIR]

The config file is a flat YAML mapping; ``levels`` and ``schemes`` may be
lists. Overrides given as ``--key=value`` are applied after the file.
Every CSV starts with ``#`` comment lines holding the resolved experiment.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
import yaml

from . import __version__
from .analysis import (
    diff_trajectory,
    moment_study,
    order_fit,
    positivity_study,
    simulate_paths,
    strong_error_study,
)
from .calibration import DEFAULT_SEED
from .core import SCHEME_LABELS, InvalidArgumentError, power_linear_problem

log = logging.getLogger(__name__)

COMMANDS = ("simulate", "figure1", "figure2", "converge", "moments")

BASE_DEFAULTS = {
    "theta": 0.0, "c": 1.0, "q": 3, "sigma": 1.0, "x0": 1.0, "T": 1.0,
    "M": 1000, "seed": DEFAULT_SEED, "workers": 1, "out": "results",
}
COMMAND_DEFAULTS = {
    "simulate": {"n": 1000, "M": 10, "schemes": ("euler", "tamed", "semidiscrete")},
    "figure1": {"n": 10_000, "base_n": None, "path_index": 0},
    "figure2": {"n": 1000, "sigma": 20.0, "schemes": ("tamed", "semidiscrete")},
    "converge": {"levels": (16, 32, 64, 128, 256, 512, 1024), "fine_n": 16384,
                 "schemes": ("semidiscrete",), "reference": "semidiscrete"},
    "moments": {"n": 1000, "p": 2.0, "schemes": ("semidiscrete",)},
}

FLOAT_KEYS = {"theta", "c", "sigma", "x0", "T", "p"}
INT_KEYS = {"q", "M", "seed", "workers", "n", "fine_n", "path_index", "base_n"}
# execution details that must not change output bytes
NOT_IN_HEADER = {"workers", "out"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    command: str
    theta: float
    c: float
    q: int
    sigma: float
    x0: float
    T: float
    M: int
    seed: int
    workers: int = 1
    out: str = "results"
    schemes: Tuple[str, ...] = ()
    n: Optional[int] = None
    levels: Tuple[int, ...] = ()
    fine_n: Optional[int] = None
    reference: Optional[str] = None
    p: Optional[float] = None
    path_index: Optional[int] = None
    base_n: Optional[int] = None

    def keys(self):
        return ["command"] + sorted(set(BASE_DEFAULTS) | set(COMMAND_DEFAULTS[self.command]))

    def header(self) -> str:
        lines = [f"# semidiscrete {__version__}"]
        for key in self.keys():
            if key in NOT_IN_HEADER:
                continue
            value = getattr(self, key)
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            elif isinstance(value, float):
                value = _fmt(value)
            lines.append(f"# {key}: {value}")
        return "\n".join(lines) + "\n"

    def problem(self):
        return power_linear_problem(self.theta, self.c, self.q, self.sigma, self.x0, self.T)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def _as_int(key, value) -> int:
    if isinstance(value, bool):
        raise ConfigError(f"{key} must be an integer")
    try:
        f = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be an integer, got {value!r}") from None
    if not math.isfinite(f) or f != int(f):
        raise ConfigError(f"{key} must be an integer, got {value!r}")
    return int(f)


def _as_float(key, value) -> float:
    if isinstance(value, bool):
        raise ConfigError(f"{key} must be a number")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be a number, got {value!r}") from None


def _as_list(value):
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    if isinstance(value, (list, tuple)):
        return list(value)
    return [value]


def _coerce(key, value):
    if key in FLOAT_KEYS:
        return _as_float(key, value)
    if key in INT_KEYS:
        return None if value is None else _as_int(key, value)
    if key == "levels":
        return tuple(_as_int("levels", v) for v in _as_list(value))
    if key == "schemes":
        return tuple(str(v) for v in _as_list(value))
    if key in ("reference", "out"):
        return str(value)
    raise ConfigError(f"unknown key: {key}")


def parse_config(text: str, command: str, overrides: Optional[Dict[str, object]] = None) -> ExperimentSpec:
    """Validate a YAML key-value document plus overrides for `command`."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    try:
        raw = yaml.safe_load(text) if text else None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from None
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ConfigError("config must be a flat key-value mapping")
    raw = dict(raw)
    raw.update(overrides or {})

    allowed = set(BASE_DEFAULTS) | set(COMMAND_DEFAULTS[command])
    for key in raw:
        if key not in allowed:
            raise ConfigError(f"unknown key for {command}: {key}")

    values = {**BASE_DEFAULTS, **COMMAND_DEFAULTS[command]}
    for key, value in raw.items():
        values[key] = _coerce(key, value)
    for key in ("levels", "schemes"):
        if key in values:
            values[key] = tuple(values[key])
    spec = ExperimentSpec(command=command, **values)
    _validate(spec)
    return spec


def _validate(s: ExperimentSpec) -> None:
    if s.q < 3 or s.q % 2 == 0:
        raise ConfigError("q must be odd ≥ 3")
    if s.c < 0:
        raise ConfigError("c must be ≥ 0")
    if not (math.isfinite(s.T) and s.T > 0):
        raise ConfigError("T must be > 0")
    if s.M < 1:
        raise ConfigError("M must be ≥ 1")
    if s.workers < 1:
        raise ConfigError("workers must be ≥ 1")
    if s.n is not None and s.n < 1:
        raise ConfigError("n must be ≥ 1")
    for name in s.schemes:
        if name not in SCHEME_LABELS:
            raise ConfigError(f"schemes must be drawn from {', '.join(SCHEME_LABELS)}; got {name!r}")
    if s.command in ("figure1", "figure2") and not s.x0 > 0:
        raise ConfigError("x0 must be > 0 for positivity-related runs")
    if s.command == "figure1":
        if s.path_index < 0:
            raise ConfigError("path_index must be ≥ 0")
        if s.base_n is not None and (s.base_n < 1 or s.base_n % s.n):
            raise ConfigError("n must divide base_n")
    if s.command == "converge":
        if not s.levels:
            raise ConfigError("levels must be non-empty")
        if s.fine_n < 1:
            raise ConfigError("fine_n must be ≥ 1")
        for n in s.levels:
            if n < 1 or s.fine_n % n:
                raise ConfigError(f"every level must divide fine_n; {n} does not divide {s.fine_n}")
        if s.reference not in ("semidiscrete", "exact"):
            raise ConfigError("reference must be semidiscrete or exact")
        if s.reference == "exact" and s.c != 0:
            raise ConfigError("reference=exact needs c = 0")
    if s.command == "moments" and not s.p >= 2:
        raise ConfigError("p must be ≥ 2")


def _write(path: str, header: str, columns, rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(header)
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else _fmt(v) for v in row) + "\n")
    log.info("wrote %s", path)


def _simulate(spec: ExperimentSpec, problem, out: str) -> None:
    def rows():
        for scheme in spec.schemes:
            paths = simulate_paths(problem, scheme, spec.n, spec.M, spec.seed, workers=spec.workers)
            t = paths.grid.nodes
            for i, values in zip(paths.path_index, paths.values):
                for tk, v in zip(t, values):
                    yield (tk, int(i), scheme, v, "1" if math.isfinite(v) else "0")

    _write(os.path.join(out, "trajectories.csv"), spec.header(),
           ("t", "path_id", "scheme", "value", "finite_flag"), rows())


def _figure1(spec: ExperimentSpec, problem, out: str) -> None:
    t, z = diff_trajectory(problem, spec.n, spec.seed, spec.path_index, base_n=spec.base_n)
    _write(os.path.join(out, "figure1_diff.csv"), spec.header(), ("t", "z"), zip(t, z))


def _figure2(spec: ExperimentSpec, problem, out: str) -> None:
    rows = []
    for scheme in spec.schemes:
        rep = positivity_study(simulate_paths(problem, scheme, spec.n, spec.M, spec.seed, workers=spec.workers))
        rows.append((scheme, rep.M, rep.count_nonpositive, rep.fraction,
                     rep.first_crossing_min, rep.first_crossing_median, rep.first_crossing_max))
    _write(os.path.join(out, "figure2_positivity.csv"), spec.header(),
           ("scheme", "M", "count_nonpositive", "fraction",
            "first_crossing_min", "first_crossing_median", "first_crossing_max"), rows)


def _converge(spec: ExperimentSpec, problem, out: str) -> None:
    for scheme in spec.schemes:
        reports = strong_error_study(problem, None, spec.levels, spec.fine_n, spec.M, spec.seed,
                                     scheme=scheme, reference=spec.reference, workers=spec.workers)
        _write(os.path.join(out, f"convergence_{scheme}.csv"), spec.header(),
               ("delta", "estimate", "std", "M", "ci_halfwidth"),
               [(r.delta, r.estimate, r.sample_std, r.M, r.ci_halfwidth) for r in reports])
        try:
            slope, r2 = order_fit(reports)
        except InvalidArgumentError as exc:
            log.info("no order fit for %s: %s", scheme, exc)
            continue
        _write(os.path.join(out, f"convergence_{scheme}_fit.csv"), spec.header(),
               ("slope", "r_squared"), [(slope, r2)])


def _moments(spec: ExperimentSpec, problem, out: str) -> None:
    for scheme in spec.schemes:
        paths = simulate_paths(problem, scheme, spec.n, spec.M, spec.seed, workers=spec.workers)
        rep = moment_study(paths, spec.p, problem)
        _write(os.path.join(out, f"moments_{scheme}.csv"), spec.header(),
               ("p", "estimate", "std", "M", "gronwall_bound", "terminal_estimate", "terminal_std"),
               [(rep.p, rep.estimate, rep.sample_std, rep.M, rep.gronwall_bound,
                 rep.terminal_estimate, rep.terminal_std)])


RUNNERS = {
    "simulate": _simulate,
    "figure1": _figure1,
    "figure2": _figure2,
    "converge": _converge,
    "moments": _moments,
}


def run(spec: ExperimentSpec) -> int:
    """Execute `spec`, writing CSV files under `spec.out`. Returns the exit status."""
    out = spec.out
    try:
        os.makedirs(out, exist_ok=True)
        RUNNERS[spec.command](spec, spec.problem(), out)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def _parse_overrides(extra) -> Dict[str, str]:
    overrides = {}
    it = iter(extra)
    for tok in it:
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key, sep, value = tok[2:].partition("=")
        if not sep:
            try:
                value = next(it)
            except StopIteration:
                raise ConfigError(f"missing value for --{key}") from None
        overrides[key] = value
    return overrides


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="semidiscrete", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="flat YAML key-value file")
    parser.add_argument("--out", help="output directory (default: results)")
    parser.add_argument("-v", "--verbose", action="store_true")
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")

    try:
        text = ""
        if args.config:
            with open(args.config) as fh:
                text = fh.read()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        overrides = _parse_overrides(extra)
        if args.out is not None:
            overrides["out"] = args.out
        spec = parse_config(text, args.command, overrides)
    except (ConfigError, InvalidArgumentError) as exc:
        print(f"invalid experiment: {exc}", file=sys.stderr)
        return 2
    return run(spec)


if __name__ == "__main__":
    sys.exit(main())
