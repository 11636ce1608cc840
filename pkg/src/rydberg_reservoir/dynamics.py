"""Time-domain integration of the mean-field equation under a piecewise drive.

The deterministic flow uses classic RK4; the stochastic extension
``dn = F(n) dt + sqrt(n D) dW`` uses Euler-Maruyama in the Ito reading with
reflection at ``n = 0`` and ``n = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .exceptions import ConvergenceError, ParameterError, SolverError
from .model import ModelParams, drift

#: Normals drawn per RNG call in the SDE loop.
_NOISE_BLOCK_SYMBOLS = 2000


@dataclass(frozen=True)
class DriveSchedule:
    """Rabi frequencies held for ``hold_time`` each, at a fixed detuning."""

    omega_values: np.ndarray
    hold_time: float = 20.0
    delta: float = 11.0

    def __post_init__(self):
        omegas = np.ascontiguousarray(self.omega_values, dtype=float).ravel()
        object.__setattr__(self, "omega_values", omegas)
        if omegas.size == 0:
            raise ParameterError("drive schedule is empty")
        if not np.isfinite(omegas).all() or (omegas < 0).any():
            raise ParameterError("omega_values must be finite and >= 0")
        if not self.hold_time > 0:
            raise ParameterError(f"hold_time must be > 0, got {self.hold_time}")

    def __len__(self) -> int:
        return self.omega_values.size


@dataclass(frozen=True)
class TrajectoryConfig:
    """Integrator settings.

    ``seed`` and ``stream`` together select an independent Philox stream, so a
    sweep can hand task ``i`` the pair ``(master_seed, i)``.
    """

    dt: float = 0.1
    seed: int = 0
    n0: float = 0.0
    samples_per_symbol: int = 20
    stream: int = 0

    def steps_per_symbol(self, hold_time: float) -> int:
        if not 0 < self.dt <= hold_time / 10 * (1 + 1e-12):
            raise ParameterError(
                f"dt={self.dt} must satisfy 0 < dt <= hold_time/10 = {hold_time / 10}"
            )
        if not 0.0 <= self.n0 <= 1.0:
            raise ParameterError(f"n0 must lie in [0, 1], got {self.n0}")
        if self.samples_per_symbol < 1:
            raise ParameterError("samples_per_symbol must be >= 1")
        steps = round(hold_time / self.dt)
        if abs(steps * self.dt - hold_time) > 1e-9 * hold_time:
            raise ParameterError(f"hold_time {hold_time} is not a multiple of dt {self.dt}")
        if steps % self.samples_per_symbol:
            raise ParameterError(
                f"{steps} steps per symbol not divisible by "
                f"samples_per_symbol={self.samples_per_symbol}"
            )
        return steps

    def rng(self) -> np.random.Generator:
        return np.random.Generator(
            np.random.Philox(np.random.SeedSequence([self.seed, self.stream]))
        )


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    n_samples: np.ndarray

    def __post_init__(self):
        if self.times.shape != self.n_samples.shape:
            raise SolverError(f"{self.times.size} times but {self.n_samples.size} samples")
        if not ((self.n_samples >= 0.0) & (self.n_samples <= 1.0)).all():
            raise SolverError("trajectory left [0, 1]")

    def __len__(self) -> int:
        return self.n_samples.size


def _sample_times(n_symbols: int, hold_time: float, per_symbol: int) -> np.ndarray:
    offsets = (np.arange(per_symbol) + 1) / per_symbol
    return ((np.arange(n_symbols)[:, None] + offsets[None, :]) * hold_time).ravel()


def integrate_ode(schedule: DriveSchedule, p: ModelParams, cfg: TrajectoryConfig) -> Trajectory:
    """RK4 integration of ``dn/dt = F(n)`` with the drive switched per symbol.

    Only ``gamma``, ``gamma_d`` and ``v`` are taken from ``p``; the Rabi
    frequency comes from the schedule and the detuning from ``schedule.delta``.
    Samples are taken ``samples_per_symbol`` times per hold interval, the last
    one at the end of the symbol.
    """
    steps = cfg.steps_per_symbol(schedule.hold_time)
    stride = steps // cfg.samples_per_symbol
    samples, _ = _kernels.rk4_schedule(
        schedule.omega_values, float(schedule.delta), p.gamma, p.big_gamma, p.v,
        float(cfg.dt), steps, stride, float(cfg.n0),
    )
    return Trajectory(
        _sample_times(len(schedule), schedule.hold_time, cfg.samples_per_symbol), samples
    )


def integrate_sde(schedule: DriveSchedule, p: ModelParams, cfg: TrajectoryConfig) -> Trajectory:
    """Euler-Maruyama for ``dn = F(n) dt + sqrt(max(n, 0) D) dW``.

    After each step the density is reflected into ``[0, 1]``. Noise comes
    from the Philox stream selected by ``cfg``; equal configs give identical
    trajectories.
    """
    steps = cfg.steps_per_symbol(schedule.hold_time)
    stride = steps // cfg.samples_per_symbol
    rng = cfg.rng()
    n = float(cfg.n0)
    chunks = []
    omegas = schedule.omega_values
    for start in range(0, omegas.size, _NOISE_BLOCK_SYMBOLS):
        block = omegas[start:start + _NOISE_BLOCK_SYMBOLS]
        z = rng.standard_normal(block.size * steps)
        samples, n = _kernels.em_schedule(
            block, float(schedule.delta), p.gamma, p.big_gamma, p.v, float(p.d),
            float(cfg.dt), steps, stride, n, z,
        )
        chunks.append(samples)
    return Trajectory(
        _sample_times(len(schedule), schedule.hold_time, cfg.samples_per_symbol),
        np.concatenate(chunks),
    )


def relax_to_steady(
    p: ModelParams,
    n0: float,
    tol: float = 1e-12,
    dt: float = 0.05,
    max_time: float = 1e4,
) -> float:
    """Integrate the deterministic flow at fixed ``p`` until ``|F(n)| < tol``.

    Raises:
        ConvergenceError: if ``max_time`` elapses first.
    """
    if not tol > 0:
        raise ParameterError(f"tol must be > 0, got {tol}")
    max_steps = int(math.ceil(max_time / dt))
    n, steps, ok = _kernels.rk4_until(
        p.omega**2, p.delta, p.gamma, p.big_gamma, p.v, float(n0), dt, tol, max_steps
    )
    if not ok:
        raise ConvergenceError(
            f"no steady state within t={max_time}: n={n!r}, |F|={abs(drift(n, p)):.3e}"
        )
    return float(n)


def constant_schedule(omega: float, n_symbols: int, hold_time: float, delta: float) -> DriveSchedule:
    return DriveSchedule(np.full(n_symbols, float(omega)), hold_time, delta)


def square_wave_schedule(
    omega: float, depth: float, periods: int, hold_time: float, delta: float
) -> DriveSchedule:
    """Alternate ``omega`` and ``omega * (1 - depth)`` every ``hold_time``."""
    values = np.tile([float(omega), float(omega) * (1.0 - depth)], periods)
    return DriveSchedule(values, hold_time, delta)
