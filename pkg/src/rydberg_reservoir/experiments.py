"""Experiment drivers behind the command-line interface.

Each ``cmd_*`` function takes a resolved :class:`ExperimentConfig`, writes
its CSV outputs plus a ``manifest.txt`` into ``config.out`` and returns the
in-memory result for programmatic use.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Iterable, Optional

import numpy as np

from . import __version__
from ._io import PathOrFile, format_float, open_text
from .dynamics import DriveSchedule, TrajectoryConfig, integrate_ode, integrate_sde, relax_to_steady
from .exceptions import ParameterError, ReservoirError
from .fitting import FitResult, fit_exponential
from .model import (
    ModelParams,
    bistable_interval,
    hysteresis_sweep,
    phase_diagram,
    relaxation_time,
    stationary_states,
)
from .pipeline import FilterSpec, PredictionReport, aggregate, multiplexed_mse
from .signals import EncodingSpec, LorenzParams, encode, ingest_csv, lorenz_generate, normalize

logger = logging.getLogger(__name__)


@dataclass
class ExperimentConfig:
    # model, in units of gamma
    gamma: float = 1.0
    gamma_d: float = 10.0
    v: float = 100.0
    noise: float = 1e-4
    omega: float = 1.1
    rel_amplitude: float = 0.1
    hold_time: float = 20.0
    # integration
    dt: float = 0.1
    samples_per_symbol: int = 20
    warmup_symbols: int = 10
    # prediction sweep
    delta_min: float = 5.0
    delta_max: float = 15.0
    delta_points: int = 21
    task: str = "lorenz"
    csv_path: str = ""
    csv_column: str = "value"
    csv_delimiter: str = ","
    lorenz_sigma: float = 10.0
    lorenz_rho: float = 28.0
    lorenz_beta: float = 8.0 / 3.0
    lorenz_dt: float = 0.04
    lorenz_steps: int = 16000
    lorenz_transient: float = 10.0
    # readout pipeline
    m: int = 200
    stride: int = 20
    filter_window: int = 10
    filter_order: int = 3
    train_fraction: float = 0.7
    ridge_lambda: float = 0.0
    # phase diagram grid
    pd_delta_min: float = 0.0
    pd_delta_max: float = 30.0
    pd_delta_points: int = 200
    pd_omega_min: float = 0.5
    pd_omega_max: float = 3.0
    pd_omega_points: int = 200
    # detuning cuts (hysteresis, relaxation times)
    cut_omega: float = 1.21
    cut_delta_min: float = 0.0
    cut_delta_max: float = 30.0
    cut_delta_points: int = 400
    hysteresis_threshold: float = 1e-6
    # square-wave relaxation fit
    relax_delta: float = 11.0
    relax_depth: float = 0.15
    relax_periods: int = 3
    relax_dt: float = 0.01
    # run control
    seed: int = 0
    n_seeds: int = 3
    workers: int = 1
    out: str = "results"

    def __post_init__(self):
        for name in ("delta_points", "pd_delta_points", "pd_omega_points", "cut_delta_points",
                     "n_seeds", "workers", "relax_periods"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be >= 1")
        if self.task not in ("lorenz", "csv"):
            raise ParameterError(f"task must be 'lorenz' or 'csv', got {self.task!r}")

    def model_params(self, omega: Optional[float] = None, delta: float = 0.0) -> ModelParams:
        return ModelParams(
            omega=self.omega if omega is None else omega, delta=delta, gamma=self.gamma,
            gamma_d=self.gamma_d, v=self.v, d=self.noise,
        )

    def filter_spec(self) -> Optional[FilterSpec]:
        if self.filter_window <= 1:
            return None
        return FilterSpec(self.filter_window, self.filter_order)

    def lorenz_params(self) -> LorenzParams:
        return LorenzParams(
            sigma=self.lorenz_sigma, rho=self.lorenz_rho, beta=self.lorenz_beta,
            dt=self.lorenz_dt, steps=self.lorenz_steps, transient=self.lorenz_transient,
        )

    def sweep_deltas(self) -> np.ndarray:
        return np.linspace(self.delta_min, self.delta_max, self.delta_points)

    def cut_deltas(self) -> np.ndarray:
        return np.linspace(self.cut_delta_min, self.cut_delta_max, self.cut_delta_points)

    # text form: one "key = value" per line, '#' starts a comment

    def dumps(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            lines.append(f"{f.name} = {repr(value) if isinstance(value, float) else value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str, base: Optional["ExperimentConfig"] = None) -> "ExperimentConfig":
        pairs = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParameterError(f"config line {lineno}: expected 'key = value', got {raw!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            pairs[key] = value
        return (base or cls()).override(pairs)

    @classmethod
    def load(cls, path: PathOrFile) -> "ExperimentConfig":
        with open_text(path, "r") as handle:
            return cls.loads(handle.read())

    def override(self, pairs: dict[str, Any]) -> "ExperimentConfig":
        """Copy with ``pairs`` applied; string values are coerced to field types."""
        types = {f.name: f.type for f in fields(self)}
        changes = {}
        for key, value in pairs.items():
            if key not in types:
                raise ParameterError(f"unknown config key {key!r}")
            changes[key] = _coerce(types[key], value, key)
        return dataclasses.replace(self, **changes)


def _coerce(type_name: Any, value: Any, key: str) -> Any:
    kind = {"float": float, "int": int, "str": str}[type_name if isinstance(type_name, str) else type_name.__name__]
    if not isinstance(value, str):
        return kind(value)
    try:
        return kind(value)
    except ValueError as exc:
        raise ParameterError(f"config key {key!r}: cannot parse {value!r} as {kind.__name__}") from exc


# output helpers

def _outdir(config: ExperimentConfig) -> Path:
    path = Path(config.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_csv(path: Path, header: list[str], rows: Iterable[Iterable[Any]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return format_float(value) if math.isfinite(value) else str(float(value))
    return str(value)


def write_manifest(config: ExperimentConfig, command: str, summary: Iterable[str] = ()) -> Path:
    path = _outdir(config) / "manifest.txt"
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(f"# rydberg_reservoir {__version__}\n# command: {command}\n")
        for line in summary:
            handle.write(f"# {line}\n")
        handle.write(config.dumps())
    return path


# phase diagram

def cmd_phase_diagram(config: ExperimentConfig):
    deltas = np.linspace(config.pd_delta_min, config.pd_delta_max, config.pd_delta_points)
    omegas = np.linspace(config.pd_omega_min, config.pd_omega_max, config.pd_omega_points)
    pd = phase_diagram(deltas, omegas, config.model_params())
    rows = (
        (deltas[j], omegas[i], pd.root_counts[i, j], pd.failed[i, j])
        for i in range(omegas.size) for j in range(deltas.size)
    )
    _write_csv(_outdir(config) / "phase_diagram.csv", ["delta", "omega", "root_count", "failed"], rows)
    box = pd.bounding_box()
    summary = (
        "bistable region: none" if box is None else
        "bistable region: delta in [{}, {}], omega in [{}, {}]".format(*map(format_float, box))
    )
    write_manifest(config, "phase-diagram", [summary])
    logger.info(summary)
    return pd, summary


# hysteresis

def hysteresis_interval(up, down, threshold: float) -> Optional[tuple[float, float]]:
    """Detuning range where the two sweep directions disagree by more than ``threshold``."""
    up_d, down_d = up.deltas, down.deltas[::-1]
    if up_d.shape != down_d.shape or not np.allclose(up_d, down_d, rtol=0, atol=1e-12):
        raise ParameterError("up and down sweeps must share a detuning grid")
    differ = np.abs(up.densities - down.densities[::-1]) > threshold
    if not differ.any():
        return None
    return float(up_d[differ].min()), float(up_d[differ].max())


def cmd_hysteresis(config: ExperimentConfig, omega: Optional[float] = None):
    omega = config.cut_omega if omega is None else omega
    p = config.model_params(omega=omega)
    lo, hi, steps = config.cut_delta_min, config.cut_delta_max, config.cut_delta_points
    first = hysteresis_sweep(p, lo, hi, steps)
    second = hysteresis_sweep(p, hi, lo, steps)
    up, down = (first, second) if lo <= hi else (second, first)
    rows = [
        (branch.direction, pt.delta, pt.n_ss, pt.jumped, pt.converged)
        for branch in (first, second) for pt in branch.points
    ]
    _write_csv(_outdir(config) / "hysteresis.csv", ["direction", "delta", "n_ss", "jumped", "converged"], rows)
    interval = hysteresis_interval(up, down, config.hysteresis_threshold)
    summary = (
        f"omega = {format_float(omega)}; hysteresis interval: "
        + ("none" if interval is None else f"[{format_float(interval[0])}, {format_float(interval[1])}]")
    )
    write_manifest(config, "hysteresis", [summary])
    return up, down, interval


# relaxation times

@dataclass(frozen=True)
class RelaxRow:
    delta: float
    branch: str
    n_ss: float
    tau_relax: Optional[float]
    marginal: bool
    spinodal_distance: Optional[float]


def relaxation_curve(p_base: ModelParams, deltas) -> tuple[list[RelaxRow], Optional[tuple[float, float]]]:
    """Stable-branch relaxation times along a detuning cut.

    Branches are labelled ``lower``/``upper`` by density (``single`` if the
    cut never becomes bistable). For repulsive ``v > 0`` the high-density
    branch continues from small detuning and ends at the right spinodal,
    while the low-density branch continues to large detuning and ends at the
    left one; ``spinodal_distance`` is the detuning gap to that end point.
    """
    deltas = np.asarray(deltas, dtype=float)
    window = bistable_interval(p_base, float(deltas.min()), float(deltas.max()), max(deltas.size, 3001))
    rows = []
    for de in deltas:
        p = dataclasses.replace(p_base, delta=float(de))
        states = stationary_states(p).states
        if len(states) == 3:
            labelled = [("lower", states[0]), ("upper", states[2])]
        elif window is None:
            labelled = [("single", s) for s in states if s.stable]
        else:
            labelled = [("upper" if de < window[0] else "lower", s) for s in states if s.stable]
        for branch, s in labelled:
            if window is None or branch == "single":
                dist = None
            else:
                dist = abs(de - (window[0] if branch == "lower" else window[1]))
            rows.append(RelaxRow(float(de), branch, s.n_ss, s.tau_relax, s.tau_relax is None, dist))
    return rows, window


def cmd_relax_times(config: ExperimentConfig, omega: Optional[float] = None):
    omega = config.cut_omega if omega is None else omega
    rows, window = relaxation_curve(config.model_params(omega=omega), config.cut_deltas())
    _write_csv(
        _outdir(config) / "relax_times.csv",
        ["delta", "branch", "n_ss", "tau_relax", "marginal", "spinodal_distance"],
        ((r.delta, r.branch, r.n_ss, r.tau_relax, r.marginal, r.spinodal_distance) for r in rows),
    )
    summary = f"omega = {format_float(omega)}; spinodals: " + (
        "none" if window is None else f"{format_float(window[0])}, {format_float(window[1])}"
    )
    write_manifest(config, "relax-times", [summary])
    return rows, window


# prediction sweep

def load_series(config: ExperimentConfig) -> np.ndarray:
    if config.task == "csv":
        if not config.csv_path:
            raise ParameterError("task 'csv' needs csv_path")
        return ingest_csv(config.csv_path, config.csv_column, config.csv_delimiter).values
    return lorenz_generate(config.lorenz_params()).values


def prediction_point(
    config: ExperimentConfig, series: np.ndarray, delta: float, seed: int, stream: int
) -> list[float]:
    """Per-sub-series test MSE at one detuning for one noise realization.

    The reservoir is first relaxed to the steady state of the first symbol,
    then driven for ``warmup_symbols`` extra copies of that symbol whose
    samples are discarded, so the kept trace lines up with ``series``.
    """
    spec = EncodingSpec.from_modulation(config.omega, config.rel_amplitude)
    schedule = encode(series, spec, config.hold_time, delta)
    first = float(schedule.omega_values[0])
    n0 = relax_to_steady(config.model_params(omega=first, delta=delta), 0.0)
    omegas = np.concatenate([np.full(config.warmup_symbols, first), schedule.omega_values])
    cfg = TrajectoryConfig(
        dt=config.dt, seed=seed, n0=n0, samples_per_symbol=config.samples_per_symbol, stream=stream,
    )
    traj = integrate_sde(
        DriveSchedule(omegas, config.hold_time, delta), config.model_params(delta=delta), cfg
    )
    trace = traj.n_samples[config.warmup_symbols * config.samples_per_symbol:]
    return multiplexed_mse(
        trace, normalize(series), config.samples_per_symbol, config.filter_spec(),
        config.stride, config.m, config.train_fraction, config.ridge_lambda,
    )


def _prediction_task(args):
    config, series, index, delta, seed = args
    try:
        return index, seed, prediction_point(config, series, delta, seed, index), ""
    except ReservoirError as exc:
        return index, seed, [], f"{type(exc).__name__}: {exc}"


@dataclass(frozen=True)
class SweepResult:
    deltas: np.ndarray
    reports: list[Optional[PredictionReport]]
    per_seed: dict[tuple[int, int], list[float]]
    errors: dict[tuple[int, int], str]

    def mean_mse(self) -> np.ndarray:
        return np.array([np.nan if r is None else r.mean_mse for r in self.reports])

    def std_mse(self) -> np.ndarray:
        return np.array([np.nan if r is None else r.std_mse for r in self.reports])


def run_prediction_sweep(config: ExperimentConfig, series: Optional[np.ndarray] = None) -> SweepResult:
    """All (detuning, seed) points; stream index = detuning index."""
    series = load_series(config) if series is None else np.asarray(series, dtype=float)
    deltas = config.sweep_deltas()
    seeds = [config.seed + r for r in range(config.n_seeds)]
    tasks = [(config, series, i, float(de), s) for i, de in enumerate(deltas) for s in seeds]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_prediction_task, tasks))
    else:
        results = [_prediction_task(t) for t in tasks]

    per_seed, errors = {}, {}
    for index, seed, mses, err in results:
        if err:
            errors[(index, seed)] = err
        else:
            per_seed[(index, seed)] = mses
    reports = []
    for i, de in enumerate(deltas):
        if any((i, s) in errors for s in seeds):
            reports.append(None)
            continue
        pooled = [v for s in seeds for v in per_seed[(i, s)]]
        reports.append(aggregate(pooled, config.model_params(delta=float(de))))
    return SweepResult(deltas, reports, per_seed, errors)


def cmd_predict_sweep(config: ExperimentConfig, series: Optional[np.ndarray] = None) -> SweepResult:
    result = run_prediction_sweep(config, series)
    seeds = [config.seed + r for r in range(config.n_seeds)]
    out = _outdir(config)
    rows = []
    for i, de in enumerate(result.deltas):
        rep = result.reports[i]
        status = "; ".join(result.errors[(i, s)] for s in seeds if (i, s) in result.errors) or "ok"
        rows.append((de, None if rep is None else rep.mean_mse, None if rep is None else rep.std_mse,
                     0 if rep is None else rep.per_series_mse.size, status))
    _write_csv(out / "predict_sweep.csv", ["delta", "mean_mse", "std_mse", "n_series", "status"], rows)
    detail = (
        (result.deltas[i], s, k, mse)
        for i in range(result.deltas.size) for s in seeds
        for k, mse in enumerate(result.per_seed.get((i, s), []), start=1)
    )
    _write_csv(out / "predict_detail.csv", ["delta", "seed", "series", "mse"], detail)
    means = result.mean_mse()
    summary = []
    if np.isfinite(means).any():
        best = int(np.nanargmin(means))
        summary.append(f"minimum mean MSE {format_float(means[best])} at delta = {format_float(result.deltas[best])}")
    write_manifest(config, "predict-sweep", summary)
    return result


# square-wave relaxation fit

@dataclass(frozen=True)
class PeriodFit:
    period: int
    level: str
    omega: float
    fit: FitResult
    tau_linear: Optional[float]


def fit_series_periods(times, values, period: float, half: bool = True) -> list[FitResult]:
    """Fit ``A exp(-t/tau) + B`` to every (half-)period of a sampled signal."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    seg = period / 2 if half else period
    fits = []
    k = 0
    while t[0] + (k + 1) * seg <= t[-1] + 1e-12:
        lo, hi = t[0] + k * seg, t[0] + (k + 1) * seg
        keep = (t >= lo - 1e-12) & (t <= hi + 1e-12)
        if keep.sum() >= 4:
            fits.append(fit_exponential(t[keep], y[keep]))
        k += 1
    return fits


def cmd_relax_fit(config: ExperimentConfig, input_path: Optional[PathOrFile] = None,
                  time_column: str = "time", value_column: str = "value"):
    """Fit relaxation times to a square-wave response.

    Without ``input_path`` the deterministic model is driven by a square wave
    alternating between ``omega`` and ``omega * (1 - relax_depth)`` every
    ``hold_time``, and each hold interval is fitted and compared with the
    linearized relaxation time at the corresponding level.
    """
    out = _outdir(config)
    results: list[PeriodFit] = []
    if input_path is not None:
        times = ingest_csv(input_path, time_column).values
        values = ingest_csv(input_path, value_column).values
        span = times[-1] - times[0]
        period = span / max(config.relax_periods, 1)
        for k, fit in enumerate(fit_series_periods(times, values, period, half=False)):
            results.append(PeriodFit(k, "data", float("nan"), fit, None))
    else:
        high = config.omega
        low = config.omega * (1.0 - config.relax_depth)
        omegas = np.tile([high, low], config.relax_periods)
        p = config.model_params(delta=config.relax_delta)
        n0 = relax_to_steady(config.model_params(omega=low, delta=config.relax_delta), 0.0)
        cfg = TrajectoryConfig(dt=config.relax_dt, n0=n0, samples_per_symbol=int(round(config.hold_time / config.relax_dt)))
        traj = integrate_ode(DriveSchedule(omegas, config.hold_time, config.relax_delta), p, cfg)
        times = np.concatenate([[0.0], traj.times])
        values = np.concatenate([[n0], traj.n_samples])
        fits = fit_series_periods(times, values, 2 * config.hold_time, half=True)
        for k, fit in enumerate(fits):
            omega_k = float(omegas[k])
            level = "high" if k % 2 == 0 else "low"
            states = stationary_states(config.model_params(omega=omega_k, delta=config.relax_delta))
            target = min(states.stable_states, key=lambda s: abs(s.n_ss - fit.b))
            tau_lin = None
            try:
                tau_lin = relaxation_time(target.n_ss, states.params)
            except ReservoirError:
                pass
            results.append(PeriodFit(k, level, omega_k, fit, tau_lin))
    _write_csv(
        out / "relax_fit.csv",
        ["segment", "level", "omega", "a", "b", "tau", "residual", "degenerate", "tau_linear"],
        ((r.period, r.level, r.omega, r.fit.a, r.fit.b, r.fit.tau, r.fit.residual, r.fit.degenerate, r.tau_linear)
         for r in results),
    )
    write_manifest(config, "relax-fit")
    return results


def default_workers() -> int:
    return max(1, min(8, os.cpu_count() or 1))
