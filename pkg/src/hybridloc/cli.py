"""
Command-line front end: JSON configuration, sweeps and CSV export.

Configuration files are JSON objects whose sections mirror the config
dataclasses; every key is optional and missing ones take the reference
defaults::

    {
      "ris": {"rows": 10, "cols": 10, "frequency": 5e9},
      "scenario": {"n_users": 2, "n_scatters": 3, "snr_db": 0.0},
      "protocol": {"cycles": 20, "trials": 1000, "seed": 0},
      "dictionary": {"model": "hybrid", "n_polar": 10, "n_azimuth": 10},
      "localizer": {"max_scatters": 3, "energy_fraction": 0.05},
      "ccm": {"max_iterations": 200},
      "weights": {"w1": 1.0},
      "sweep": {"axis": "snr", "values": [-10, -5, 0, 5, 10]},
      "power_scaling": {"rho_a": 1.0, "rho_t": 1.0, "trials": 10000},
      "output": {"path": "results.csv", "failure_budget": 0}
    }

See the README for the full key list.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, fields, replace

import numpy as np

from .ccm import CcmConfig
from .crb import CrbWeights
from .geometry import RisConfig
from .localizer import LocalizerConfig
from .protocol import (
    DictionaryConfig,
    ProtocolConfig,
    compute_rmse,
    power_scaling_experiment,
    predicted_power,
    run_trials,
)

__all__ = [
    "AXES",
    "CSV_HEADER",
    "POWER_CSV_HEADER",
    "ConfigError",
    "ExperimentError",
    "PowerScalingSpec",
    "ExperimentSpec",
    "ResultRow",
    "PowerRow",
    "load_config",
    "parse_config",
    "dump_config",
    "run_experiment",
    "run_power_scaling",
    "write_csv",
    "main",
]

logger = logging.getLogger(__name__)

AXES = ("snr", "cycles", "spacing", "ris-size", "power-scaling")
CSV_HEADER = (
    "axis", "angle_rmse_nf_rad", "angle_rmse_ff_rad", "range_rmse_nf_m",
    "position_rmse_m", "cpu_s", "trials", "seed",
)
POWER_CSV_HEADER = ("axis", "mode", "mean_power", "predicted_power", "relative_error", "trials", "seed")
PHASE_MODES = ("all-ones", "max-snr")
WORKERS_ENV = "HYBRIDLOC_WORKERS"


class ConfigError(ValueError):
    """Invalid configuration; the message names the line and/or field."""


class ExperimentError(RuntimeError):
    """More trials failed than the failure budget allows."""


@dataclass(frozen=True)
class PowerScalingSpec:
    rho_a: float = 1.0
    rho_t: float = 1.0
    trials: int = 10_000
    modes: tuple = PHASE_MODES

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("power-scaling trial count must be positive")
        for m in self.modes:
            if m not in PHASE_MODES:
                raise ValueError(f"unknown phase mode {m!r}; expected one of {PHASE_MODES}")


@dataclass(frozen=True)
class ExperimentSpec:
    protocol: ProtocolConfig = ProtocolConfig()
    axis: str | None = None
    values: tuple = ()
    power: PowerScalingSpec = PowerScalingSpec()
    out: str | None = None
    failure_budget: int = 0

    def __post_init__(self):
        if self.axis is not None:
            if self.axis not in AXES:
                raise ValueError(f"unknown sweep axis {self.axis!r}; expected one of {AXES}")
            if not self.values:
                raise ValueError("sweep axis needs at least one value")
            d = np.diff(np.asarray(self.values, dtype=float))
            if not (np.all(d > 0) or np.all(d < 0)):
                raise ValueError("sweep values must be strictly ordered")
            if self.axis in ("cycles", "spacing", "ris-size", "power-scaling"):
                if any(int(v) != v or v < 1 for v in self.values):
                    raise ValueError(f"{self.axis} values must be positive integers")
        if self.failure_budget < 0:
            raise ValueError("failure budget must be non-negative")


# --- configuration --------------------------------------------------------

_SCENARIO_KEYS = ("n_users", "n_scatters", "snr_db", "radius", "scatter_gain_ratio", "ris_bs_variance")
_PROTOCOL_KEYS = ("cycles", "trials", "seed", "optimize")
_SECTIONS = (
    "ris", "scenario", "protocol", "dictionary", "localizer", "ccm",
    "weights", "sweep", "power_scaling", "output",
)


def _line_of(text: str | None, key: str) -> str:
    if not text:
        return ""
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return f"line {i}: "
    return ""


def _section(data, name, allowed, text):
    sec = data.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"{_line_of(text, name)}section {name!r} must be an object")
    for key in sec:
        if key not in allowed:
            raise ConfigError(f"{_line_of(text, key)}unknown field {name}.{key}")
    return sec


def _build(cls, name, kwargs, text, /, **extra):
    try:
        return cls(**kwargs, **extra)
    except (TypeError, ValueError) as exc:
        key = next(iter(kwargs), name)
        raise ConfigError(f"{_line_of(text, key)}invalid {name}: {exc}") from exc


def _names(cls):
    return tuple(f.name for f in fields(cls))


def parse_config(data: dict, text: str | None = None) -> ExperimentSpec:
    """Build an :class:`ExperimentSpec` from already-parsed JSON."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    for key in data:
        if key not in _SECTIONS:
            raise ConfigError(f"{_line_of(text, key)}unknown section {key!r}")

    ris_sec = dict(_section(data, "ris", ("rows", "cols", "frequency", "wavelength", "spacing"), text))
    if "frequency" in ris_sec and "wavelength" in ris_sec:
        raise ConfigError(f"{_line_of(text, 'frequency')}give either ris.frequency or ris.wavelength, not both")
    freq = ris_sec.pop("frequency", None)
    if "wavelength" in ris_sec:
        ris_sec.setdefault("spacing", ris_sec["wavelength"] / 2)
        ris = _build(RisConfig, "ris", ris_sec, text)
    else:
        try:
            ris = RisConfig.from_frequency(
                ris_sec.get("rows", 10), ris_sec.get("cols", 10), freq or 5e9, ris_sec.get("spacing")
            )
        except (TypeError, ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"{_line_of(text, 'ris')}invalid ris: {exc}") from exc

    scenario = _section(data, "scenario", _SCENARIO_KEYS, text)
    proto = _section(data, "protocol", _PROTOCOL_KEYS, text)
    dictionary = _build(DictionaryConfig, "dictionary", _section(data, "dictionary", _names(DictionaryConfig), text), text)
    localizer = _build(LocalizerConfig, "localizer", _section(data, "localizer", _names(LocalizerConfig), text), text)
    ccm = _build(CcmConfig, "ccm", _section(data, "ccm", _names(CcmConfig), text), text)
    weights = _build(CrbWeights, "weights", _section(data, "weights", _names(CrbWeights), text), text)
    protocol = _build(
        ProtocolConfig, "protocol", {**scenario, **proto}, text,
        ris=ris, dictionary=dictionary, localizer=localizer, ccm=ccm, weights=weights,
    )

    sweep = _section(data, "sweep", ("axis", "values"), text)
    power = dict(_section(data, "power_scaling", _names(PowerScalingSpec), text))
    if "modes" in power:
        power["modes"] = tuple(power["modes"])
    power_spec = _build(PowerScalingSpec, "power_scaling", power, text)
    output = _section(data, "output", ("path", "failure_budget"), text)
    values = sweep.get("values", ())
    if not isinstance(values, (list, tuple)):
        raise ConfigError(f"{_line_of(text, 'values')}sweep.values must be a list")
    return _build(
        ExperimentSpec, "sweep", {}, text,
        protocol=protocol,
        axis=sweep.get("axis"),
        values=tuple(values),
        power=power_spec,
        out=output.get("path"),
        failure_budget=output.get("failure_budget", 0),
    )


def load_config(path) -> ExperimentSpec:
    """Read a JSON configuration file; missing keys take the defaults."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if not text.strip():
        return ExperimentSpec()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_config(data, text)


def _plain(obj):
    d = dataclasses.asdict(obj)
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def dump_config(spec: ExperimentSpec) -> str:
    """Serialize the effective configuration; :func:`parse_config` inverts it exactly."""
    p = spec.protocol
    data = {
        "ris": _plain(p.ris),
        "scenario": {k: getattr(p, k) for k in _SCENARIO_KEYS},
        "protocol": {k: getattr(p, k) for k in _PROTOCOL_KEYS},
        "dictionary": _plain(p.dictionary),
        "localizer": _plain(p.localizer),
        "ccm": _plain(p.ccm),
        "weights": _plain(p.weights),
        "power_scaling": _plain(spec.power),
        "output": {"path": spec.out, "failure_budget": spec.failure_budget},
    }
    if spec.axis is not None:
        data["sweep"] = {"axis": spec.axis, "values": list(spec.values)}
    return json.dumps(data, indent=2) + "\n"


# --- experiments ----------------------------------------------------------


@dataclass(frozen=True)
class ResultRow:
    axis: object
    angle_rmse_nf: float
    angle_rmse_ff: float
    range_rmse_nf: float
    position_rmse: float
    cpu_seconds: float
    trials: int
    seed: int

    def as_tuple(self, timing: bool = True):
        return (
            self.axis, self.angle_rmse_nf, self.angle_rmse_ff, self.range_rmse_nf,
            self.position_rmse, self.cpu_seconds if timing else "", self.trials, self.seed,
        )


@dataclass(frozen=True)
class PowerRow:
    axis: int
    mode: str
    mean_power: float
    predicted_power: float
    trials: int
    seed: int

    @property
    def relative_error(self) -> float:
        return abs(self.mean_power - self.predicted_power) / self.predicted_power

    def as_tuple(self, timing: bool = True):
        return (self.axis, self.mode, self.mean_power, self.predicted_power, self.relative_error, self.trials, self.seed)


def _point_config(p: ProtocolConfig, axis: str, value) -> ProtocolConfig:
    if axis == "snr":
        return replace(p, snr_db=float(value))
    if axis == "spacing":
        n = int(value)
        return replace(p, dictionary=replace(p.dictionary, n_polar=n, n_azimuth=n))
    if axis == "ris-size":
        n = int(value)
        return replace(p, ris=replace(p.ris, rows=n, cols=n))
    raise ValueError(axis)


def _check_budget(result, budget, label):
    for trial, msg in result.failures:
        logger.error("%s trial %d failed: %s", label, trial, msg)
    if len(result.failures) > budget:
        first = result.failures[0]
        raise ExperimentError(
            f"{label}: {len(result.failures)} failed trials exceed the budget of {budget} "
            f"(first: trial {first[0]}: {first[1]})"
        )
    if not result.records:
        raise ExperimentError(f"{label}: no trial succeeded")


def _row(axis_value, records, cycle, seed):
    rep = compute_rmse(records, cycle)
    upto = slice(None) if cycle is None else slice(0, cycle)
    cpu = float(np.mean([np.sum(r.cpu_seconds[upto]) for r in records]))
    return ResultRow(
        axis_value, rep.angle_rmse_nf, rep.angle_rmse_ff, rep.range_rmse_nf,
        rep.position_rmse, cpu, len(records), seed,
    )


def _counter(label, total, stream):
    if stream is None:
        return None

    def report(done):
        stream.write(f"\r{label}: {done}/{total}")
        if done == total:
            stream.write("\n")
        stream.flush()

    return report


def run_power_scaling(spec: ExperimentSpec, sizes) -> list:
    rng = np.random.default_rng(spec.protocol.seed)
    rows = []
    for mode in spec.power.modes:
        powers = power_scaling_experiment(sizes, spec.power.rho_a, spec.power.rho_t, spec.power.trials, mode, rng)
        for n in sizes:
            rows.append(
                PowerRow(int(n), mode, powers[int(n)],
                         predicted_power(int(n), spec.power.rho_a, spec.power.rho_t, mode),
                         spec.power.trials, spec.protocol.seed)
            )
    rows.sort(key=lambda r: (r.axis, PHASE_MODES.index(r.mode)))
    return rows


def run_experiment(spec: ExperimentSpec, workers: int = 1, progress=None, sweep: bool = True) -> list:
    """Run the experiment described by ``spec`` and return one row per axis value.

    With ``sweep=False`` (or no axis) a single row is produced for the base
    configuration, labelled ``"-"``. A cycles sweep runs the protocol once
    for the largest cycle count and reads the smaller counts off the same
    runs: the estimates after ``c`` cycles do not depend on later cycles.
    """
    p = spec.protocol
    if not sweep or spec.axis is None:
        res = run_trials(p, workers=workers, progress=_counter("trials", p.trials, progress))
        _check_budget(res, spec.failure_budget, "run")
        return [_row("-", res.records, None, p.seed)]
    if spec.axis == "power-scaling":
        return run_power_scaling(spec, [int(v) for v in spec.values])
    if spec.axis == "cycles":
        cycles = [int(v) for v in spec.values]
        cfg = replace(p, cycles=max(cycles))
        res = run_trials(cfg, workers=workers, progress=_counter("trials", p.trials, progress))
        _check_budget(res, spec.failure_budget, "cycles")
        return [_row(c, res.records, c, p.seed) for c in cycles]
    rows = []
    for v in spec.values:
        cfg = _point_config(p, spec.axis, v)
        res = run_trials(cfg, workers=workers, progress=_counter(f"{spec.axis}={v}", p.trials, progress))
        _check_budget(res, spec.failure_budget, f"{spec.axis}={v}")
        rows.append(_row(v, res.records, None, p.seed))
    return rows


def write_csv(rows, stream, timing: bool = True) -> None:
    """Write result rows with the fixed header for their row type."""
    header = POWER_CSV_HEADER if rows and isinstance(rows[0], PowerRow) else CSV_HEADER
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in r.as_tuple(timing)])


# --- self test ------------------------------------------------------------


def _selftest(seed: int, out) -> bool:
    from .ccm import CrbObjective, optimize_phase_shifts, random_phases
    from .crb import UserEstimate, crb_from_fim, fim
    from .dictionary import build_dictionary
    from .geometry import Region
    from .localizer import localize

    rng = np.random.default_rng(seed)
    ris = RisConfig.from_frequency(4, 4, 5e9)
    checks = []

    users = [
        UserEstimate(Region.NEAR_FIELD, 1.2, 0.3, 0.8, np.exp(1j), rng.standard_normal(16) + 1j * rng.standard_normal(16)),
        UserEstimate(Region.FAR_FIELD, 2.0, -0.4, None, 1.0, rng.standard_normal(16) + 1j * rng.standard_normal(16)),
    ]
    hist = np.exp(1j * rng.uniform(0, 2 * np.pi, (5, 16)))
    obj = CrbObjective(users, hist, CrbWeights(), 0.1, ris)
    beta = random_phases(16, rng)
    g = obj.gradient(beta)
    fd = np.empty(16, dtype=complex)
    h = 1e-6
    for n in range(16):
        e = np.zeros(16)
        e[n] = h
        dre = (obj.value(beta + e) - obj.value(beta - e)) / (2 * h)
        dim = (obj.value(beta + 1j * e) - obj.value(beta - 1j * e)) / (2 * h)
        fd[n] = dre + 1j * dim
    err = np.linalg.norm(g - fd) / np.linalg.norm(fd)
    checks.append(("gradient matches finite differences", err < 1e-4, f"rel err {err:.1e}"))

    worst = [0.0, 0.0, True]

    def cb(j, b_old, d, b_new, f_new):
        worst[0] = max(worst[0], float(np.max(np.abs(np.abs(b_new) - 1))))
        worst[1] = max(worst[1], float(np.max(np.abs((d * b_old.conj()).real))))

    res = optimize_phase_shifts(obj, beta, CcmConfig(max_iterations=50), cb)
    mono = bool(np.all(np.diff(res.history) <= 0))
    checks.append(("iterates stay unit modulus", worst[0] < 1e-12, f"max dev {worst[0]:.1e}"))
    checks.append(("search directions are tangent", worst[1] < 1e-10, f"max {worst[1]:.1e}"))
    checks.append(("objective is non-increasing", mono, f"{res.history[0]:.3g} -> {res.objective:.3g}"))

    B = np.exp(1j * rng.uniform(0, 2 * np.pi, (8, 16)))
    prev, ok = np.inf, True
    for c in range(3, 9):
        v = float(np.sum(crb_from_fim(fim(B[:c], users[0].channel_derivatives(ris), 1.0, 0.1))))
        ok &= v <= prev
        prev = v
    checks.append(("CRB non-increasing in cycles", ok, ""))

    d = build_dictionary(ris, "hybrid", 0.25, 0.25, 6, 6, 3.0)
    B = np.exp(1j * rng.uniform(0, 2 * np.pi, (16, 16)))
    h_a = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    hits = 0
    for i in rng.choice(d.near_count, 20, replace=False):
        G = (B * h_a) @ d.atoms[:, i]
        cfg = LocalizerConfig(max_scatters=0, normalize=True)
        hits += localize(G[None, :], B, d, h_a[None, :], 1.0, cfg).user_indices[0] == i
    checks.append(("on-grid noiseless recovery (normalized correlation)", hits == 20, f"{hits}/20"))

    p = power_scaling_experiment([64], 1, 1, 4000, "max-snr", rng)[64]
    rel = abs(p - predicted_power(64, 1, 1, "max-snr")) / predicted_power(64, 1, 1, "max-snr")
    checks.append(("max-SNR power scaling", rel < 0.1, f"rel err {rel:.3f}"))

    for name, passed, detail in checks:
        print(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}".rstrip(), file=out)
    return all(c[1] for c in checks)


# --- entry point ----------------------------------------------------------


def _default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--trials", type=int, help="Monte Carlo trials (overrides the config)")
    common.add_argument("--out", help="CSV output path; '-' or absent writes to stdout")
    common.add_argument("--workers", type=int, help=f"worker processes (default ${WORKERS_ENV} or 1)")
    common.add_argument("--no-timing", action="store_true", help="leave cpu_s empty so output is byte-stable")
    common.add_argument("-q", "--quiet", action="store_true", help="no progress counter")
    common.add_argument("--dump-config", action="store_true", help="print the effective configuration as JSON and exit")

    ap = argparse.ArgumentParser(prog="hybridloc", description="RIS-aided hybrid near/far-field localization simulator")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="single experiment at the configured point")
    sw = sub.add_parser("sweep", parents=[common], help="sweep one axis")
    sw.add_argument("--axis", choices=AXES)
    sw.add_argument("--values", type=float, nargs="+")
    ps = sub.add_parser("power-scaling", parents=[common], help="received power versus RIS size")
    ps.add_argument("--sizes", type=int, nargs="+", default=[64, 256, 1024])
    ps.add_argument("--modes", nargs="+", choices=PHASE_MODES)
    sub.add_parser("selftest", parents=[common], help="quick invariant checks")
    return ap


def _effective_spec(args) -> ExperimentSpec:
    spec = load_config(args.config) if args.config else ExperimentSpec()
    p = spec.protocol
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("seed must be non-negative")
        p = replace(p, seed=args.seed)
    changes = {}
    if args.trials is not None:
        if args.trials < 1:
            raise ConfigError("trial count must be positive")
        if args.command == "power-scaling":
            changes["power"] = replace(spec.power, trials=args.trials)
        else:
            p = replace(p, trials=args.trials)
    changes["protocol"] = p
    if args.out is not None:
        changes["out"] = args.out
    if getattr(args, "axis", None) is not None:
        changes["axis"] = args.axis
    if getattr(args, "values", None) is not None:
        vals = tuple(int(v) if float(v).is_integer() and (changes.get("axis") or spec.axis) != "snr" else v for v in args.values)
        changes["values"] = vals
    if getattr(args, "modes", None):
        changes["power"] = replace(changes.get("power", spec.power), modes=tuple(args.modes))
    try:
        return replace(spec, **changes)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        spec = _effective_spec(args)
        workers = args.workers if args.workers is not None else _default_workers()
        if workers < 1:
            raise ConfigError("worker count must be positive")
    except ConfigError as exc:
        print(f"hybridloc: configuration error: {exc}", file=sys.stderr)
        return 2

    if args.dump_config:
        sys.stdout.write(dump_config(spec))
        return 0
    if args.command == "selftest":
        return 0 if _selftest(spec.protocol.seed, sys.stdout) else 1

    progress = None if args.quiet else sys.stderr
    t0 = time.perf_counter()
    try:
        if args.command == "power-scaling":
            rows = run_power_scaling(spec, args.sizes)
        elif args.command == "sweep":
            if spec.axis is None:
                print("hybridloc: sweep needs an axis (--axis or sweep.axis in the config)", file=sys.stderr)
                return 2
            rows = run_experiment(spec, workers, progress)
        else:
            rows = run_experiment(spec, workers, progress, sweep=False)
    except ExperimentError as exc:
        print(f"hybridloc: {exc}", file=sys.stderr)
        return 1

    buf = io.StringIO()
    write_csv(rows, buf, timing=not args.no_timing)
    if spec.out in (None, "-"):
        sys.stdout.write(buf.getvalue())
    else:
        with open(spec.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
    if not args.quiet:
        print(f"{len(rows)} rows in {time.perf_counter() - t0:.1f} s", file=sys.stderr)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
