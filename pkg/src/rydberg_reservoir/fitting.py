"""Exponential relaxation fits ``A exp(-t / tau) + B``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .exceptions import ParameterError

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class FitResult:
    """Best fit of ``a * exp(-(t - t0) / tau) + b``; ``t0`` is the first fitted time.

    ``degenerate`` marks fits that carry no usable time constant: a flat
    signal, or a best ``tau`` pinned to the edge of the search range.
    """

    a: float
    b: float
    tau: float
    residual: float
    degenerate: bool = False


def _linear_part(t: np.ndarray, y: np.ndarray, tau: float) -> tuple[float, float, float]:
    basis = np.exp(-t / tau)
    design = np.column_stack([basis, np.ones_like(t)])
    (a, b), *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - (a * basis + b)
    return float(a), float(b), float(np.sqrt(np.mean(resid * resid)))


def golden_section(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12) -> float:
    """Minimizer of a unimodal ``f`` on ``[lo, hi]``."""
    c = hi - _GOLDEN * (hi - lo)
    d = lo + _GOLDEN * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol * max(1.0, abs(lo) + abs(hi)):
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - _GOLDEN * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _GOLDEN * (hi - lo)
            fd = f(d)
    return 0.5 * (lo + hi)


def fit_exponential(
    times,
    values,
    window: Optional[tuple[float, float]] = None,
    n_grid: int = 50,
) -> FitResult:
    """Fit ``A exp(-t/tau) + B`` by a scalar search over ``tau``.

    For every candidate ``tau`` the amplitude and offset follow from linear
    least squares, so only ``tau`` is searched: a log-spaced grid of
    ``n_grid`` points on ``[dt, span]`` picks a bracket, then golden-section
    search in ``log tau`` refines it.

    Args:
        times: sample times, increasing.
        values: samples.
        window: optional ``(t_start, t_end)`` restricting the fit.
    """
    t = np.asarray(times, dtype=float).ravel()
    y = np.asarray(values, dtype=float).ravel()
    if t.size != y.size:
        raise ParameterError(f"{t.size} times but {y.size} values")
    if window is not None:
        keep = (t >= window[0]) & (t <= window[1])
        t, y = t[keep], y[keep]
    if t.size < 4:
        raise ParameterError(f"need at least 4 samples, got {t.size}")
    t = t - t[0]
    span = float(t[-1])
    dt = float(np.min(np.diff(t)))
    if not dt > 0:
        raise ParameterError("times must be strictly increasing")

    if np.ptp(y) == 0.0:
        return FitResult(0.0, float(y[0]), span, 0.0, degenerate=True)

    log_grid = np.linspace(math.log(dt), math.log(span), n_grid)
    scores = [_linear_part(t, y, math.exp(g))[2] for g in log_grid]
    j = int(np.argmin(scores))
    lo, hi = log_grid[max(j - 1, 0)], log_grid[min(j + 1, n_grid - 1)]
    best = golden_section(lambda g: _linear_part(t, y, math.exp(g))[2], lo, hi)
    if _linear_part(t, y, math.exp(best))[2] > scores[j]:
        best = log_grid[j]
    tau = math.exp(best)
    a, b, rms = _linear_part(t, y, tau)
    at_edge = abs(best - log_grid[0]) < 1e-6 or abs(best - log_grid[-1]) < 1e-6
    return FitResult(a, b, tau, rms, degenerate=bool(at_edge))
