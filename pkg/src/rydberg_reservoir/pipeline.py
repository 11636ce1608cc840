"""Readout side of the reservoir: smoothing, multiplexing, windows, regression.

A reservoir trace is smoothed with a Savitzky-Golay filter, split into
``stride`` interleaved sub-series, cut into sliding windows of length ``m``
and regressed linearly onto the input series value that follows each
window.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from ._io import PathOrFile, format_float, open_text
from .exceptions import DataError, ParameterError
from .model import ModelParams


@dataclass(frozen=True)
class FilterSpec:
    window: int = 10
    order: int = 3

    def __post_init__(self):
        if self.window < 1:
            raise ParameterError(f"window must be >= 1, got {self.window}")
        if not 0 <= self.order < self.window:
            raise ParameterError(
                f"need 0 <= order < window, got order={self.order}, window={self.window}"
            )


def savgol_coefficients(offsets: Sequence[float], order: int) -> np.ndarray:
    """Weights that evaluate the least-squares polynomial fit at offset 0.

    ``offsets`` are sample positions relative to the evaluation point.
    """
    t = np.asarray(offsets, dtype=float)
    vander = np.vander(t, order + 1, increasing=True)
    return np.linalg.pinv(vander)[0]


def savitzky_golay(series, spec: FilterSpec = FilterSpec()) -> np.ndarray:
    """Smooth ``series`` with a local polynomial fit.

    The window covers ``window // 2`` samples before the output sample and
    the remainder after it, so an even window sits one sample left of
    center. Near the ends the window is truncated to the available samples
    (one-sided fit, at least ``order + 1`` points) instead of padding.

    Raises:
        ParameterError: if the series has fewer than ``order + 1`` samples.
    """
    x = np.asarray(series, dtype=float).ravel()
    n = x.size
    if n < spec.order + 1:
        raise ParameterError(
            f"series of length {n} is shorter than order + 1 = {spec.order + 1}"
        )
    left = spec.window // 2
    right = spec.window - left - 1
    out = np.empty(n)

    lo_interior, hi_interior = left, n - 1 - right
    if hi_interior >= lo_interior:
        coeffs = savgol_coefficients(np.arange(-left, right + 1), spec.order)
        windows = np.lib.stride_tricks.sliding_window_view(x, spec.window)
        out[lo_interior:hi_interior + 1] = windows @ coeffs

    edge = [j for j in range(n) if not lo_interior <= j <= hi_interior]
    for j in edge:
        lo, hi = max(0, j - left), min(n, j + right + 1)
        if hi - lo < spec.order + 1:
            if lo == 0:
                hi = min(n, spec.order + 1)
            else:
                lo = max(0, n - spec.order - 1)
        coeffs = savgol_coefficients(np.arange(lo, hi) - j, spec.order)
        out[j] = coeffs @ x[lo:hi]
    return out


def multiplex_downsample(series, stride: int = 20) -> list[np.ndarray]:
    """Sub-series ``i`` (1-based) holds samples ``i, i + stride, ...``."""
    x = np.asarray(series, dtype=float).ravel()
    if stride < 1:
        raise ParameterError(f"stride must be >= 1, got {stride}")
    if x.size < stride:
        raise ParameterError(f"series of length {x.size} is shorter than stride {stride}")
    return [x[i::stride].copy() for i in range(stride)]


@dataclass(frozen=True)
class WindowedDataset:
    """Input windows and their targets for one sub-series.

    ``target_indices`` are 0-based positions in the full-rate input series,
    ``(i - 1) + stride * (k + m)`` for window ``k`` of sub-series ``i``.
    """

    windows: np.ndarray
    targets: np.ndarray
    m: int
    subseries_index: int
    target_indices: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return self.targets.size

    def slice(self, start: int, stop: int) -> "WindowedDataset":
        return WindowedDataset(
            self.windows[start:stop], self.targets[start:stop], self.m,
            self.subseries_index, self.target_indices[start:stop],
        )


def build_dataset(
    sub_series,
    input_series,
    m: int = 200,
    subseries_index: int = 1,
    stride: int = 20,
) -> WindowedDataset:
    """Sliding windows over ``sub_series`` paired with the next input value.

    Window ``k`` is ``sub_series[k:k + m]``; its target is the input series at
    1-based index ``subseries_index + stride * (k + m)``. Pairs whose target
    would fall past the end of ``input_series`` are dropped.
    """
    sub = np.asarray(sub_series, dtype=float).ravel()
    x = np.asarray(input_series, dtype=float).ravel()
    if m < 1 or m >= sub.size:
        raise ParameterError(f"window length m={m} must satisfy 1 <= m < {sub.size}")
    if not 1 <= subseries_index <= stride:
        raise ParameterError(f"subseries_index must lie in [1, {stride}]")
    k = np.arange(sub.size - m)
    idx = (subseries_index - 1) + stride * (k + m)
    keep = idx < x.size
    k, idx = k[keep], idx[keep]
    windows = np.lib.stride_tricks.sliding_window_view(sub, m)[k]
    return WindowedDataset(windows, x[idx], m, subseries_index, idx)


def split_dataset(ds: WindowedDataset, train_fraction: float = 0.7):
    """Chronological split: the first ``floor(fraction * K)`` pairs train."""
    if not 0 < train_fraction < 1:
        raise ParameterError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    n_train = int(math.floor(train_fraction * len(ds) + 1e-9))
    return ds.slice(0, n_train), ds.slice(n_train, len(ds))


@dataclass(frozen=True)
class ReadoutModel:
    weights: np.ndarray
    bias: float
    ridge_lambda: float = 0.0
    rank: Optional[int] = None
    rank_deficient: bool = False

    def predict(self, windows) -> np.ndarray:
        w = np.asarray(windows, dtype=float)
        if w.ndim != 2 or w.shape[1] != self.weights.size:
            raise ParameterError(
                f"windows of shape {w.shape} do not match {self.weights.size} weights"
            )
        return w @ self.weights + self.bias


def solve_readout(windows, targets, ridge_lambda: float = 0.0) -> ReadoutModel:
    """Least squares ``y ~ X w + b`` with an unpenalized bias.

    Columns are centered so the bias drops out; the weights come from a
    Householder QR of the centered design (stacked with ``sqrt(lambda) I``
    for ridge). A rank-deficient unregularized design falls back to the
    SVD minimum-norm solution and is flagged.
    """
    X = np.asarray(windows, dtype=float)
    y = np.asarray(targets, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("training set is empty")
    if X.shape[0] != y.size:
        raise DataError(f"{X.shape[0]} windows but {y.size} targets")
    if ridge_lambda < 0:
        raise ParameterError(f"ridge_lambda must be >= 0, got {ridge_lambda}")

    x_mean, y_mean = X.mean(axis=0), y.mean()
    Xc, yc = X - x_mean, y - y_mean
    n_rows, n_cols = Xc.shape
    if ridge_lambda > 0:
        Xc = np.vstack([Xc, math.sqrt(ridge_lambda) * np.eye(n_cols)])
        yc = np.concatenate([yc, np.zeros(n_cols)])

    rank, deficient = n_cols, False
    if Xc.shape[0] >= n_cols:
        q, r = np.linalg.qr(Xc)
        diag = np.abs(np.diag(r))
        tol = diag.max(initial=0.0) * max(Xc.shape) * np.finfo(float).eps
        if diag.size and diag.min() > tol:
            w = solve_triangular(r, q.T @ yc)
        else:
            deficient = True
    else:
        deficient = True
    if deficient:
        w, _, rank, _ = np.linalg.lstsq(Xc, yc, rcond=None)
        deficient = rank < n_cols
    return ReadoutModel(w, float(y_mean - x_mean @ w), float(ridge_lambda), int(rank), deficient)


def fit_readout(train: WindowedDataset, ridge_lambda: float = 0.0) -> ReadoutModel:
    return solve_readout(train.windows, train.targets, ridge_lambda)


def objective_gradient(model: ReadoutModel, ds: WindowedDataset) -> np.ndarray:
    """Gradient of ``mean((Xw + b - y)^2) + lambda/N |w|^2`` in ``(w, b)``."""
    resid = model.predict(ds.windows) - ds.targets
    n = len(ds)
    grad_w = 2.0 / n * (ds.windows.T @ resid) + 2.0 * model.ridge_lambda / n * model.weights
    return np.append(grad_w, 2.0 / n * resid.sum())


def evaluate(model: ReadoutModel, test: WindowedDataset) -> float:
    """Mean squared prediction error on ``test``."""
    if len(test) == 0:
        raise DataError("test set is empty")
    resid = test.targets - model.predict(test.windows)
    return float(np.mean(resid * resid))


@dataclass(frozen=True)
class PredictionReport:
    per_series_mse: np.ndarray
    mean_mse: float
    std_mse: float
    params: Optional[ModelParams] = None


def aggregate(per_series_mse: Sequence[float], params: Optional[ModelParams] = None) -> PredictionReport:
    """Mean and (population) standard deviation over the sub-series errors."""
    mses = np.asarray(per_series_mse, dtype=float).ravel()
    if mses.size == 0:
        raise DataError("no per-series errors to aggregate")
    return PredictionReport(mses, float(mses.mean()), float(mses.std()), params)


def multiplexed_mse(
    trace,
    input_series,
    samples_per_symbol: int = 1,
    filter_spec: Optional[FilterSpec] = FilterSpec(),
    stride: int = 20,
    m: int = 200,
    train_fraction: float = 0.7,
    ridge_lambda: float = 0.0,
) -> list[float]:
    """Per-sub-series test MSE for one reservoir trace.

    ``input_series`` holds one value per drive symbol; it is held constant
    across the ``samples_per_symbol`` trace samples of each symbol so that
    target indices live on the trace's own time grid.
    """
    n = np.asarray(trace, dtype=float).ravel()
    x = np.asarray(input_series, dtype=float).ravel()
    if n.size != x.size * samples_per_symbol:
        raise DataError(
            f"trace length {n.size} != {x.size} symbols x {samples_per_symbol} samples"
        )
    if filter_spec is not None:
        n = savitzky_golay(n, filter_spec)
    x_full = np.repeat(x, samples_per_symbol) if samples_per_symbol > 1 else x
    errors = []
    for i, sub in enumerate(multiplex_downsample(n, stride), start=1):
        train, test = split_dataset(build_dataset(sub, x_full, m, i, stride), train_fraction)
        errors.append(evaluate(fit_readout(train, ridge_lambda), test))
    return errors


def write_dataset_csv(ds: WindowedDataset, dest: PathOrFile) -> None:
    """Columns: ``k, target, x0 .. x{m-1}``."""
    with open_text(dest, "w") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["k", "target", *(f"x{j}" for j in range(ds.m))])
        for k, (target, window) in enumerate(zip(ds.targets, ds.windows)):
            writer.writerow([k, format_float(target), *(format_float(v) for v in window)])


def read_dataset_csv(source: PathOrFile, subseries_index: int = 1, stride: int = 20) -> WindowedDataset:
    with open_text(source, "r") as handle:
        rows = list(csv.reader(handle))
    if len(rows) < 2:
        raise DataError("dataset file has no rows")
    m = len(rows[0]) - 2
    body = np.array([[float(c) for c in row[1:]] for row in rows[1:]])
    k = np.array([int(row[0]) for row in rows[1:]])
    return WindowedDataset(
        body[:, 1:], body[:, 0], m, subseries_index, (subseries_index - 1) + stride * (k + m)
    )


def write_readout_csv(model: ReadoutModel, dest: PathOrFile) -> None:
    """Columns ``term, value``: ``bias``, ``ridge_lambda``, then ``w0 ..``."""
    with open_text(dest, "w") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["term", "value"])
        writer.writerow(["bias", format_float(model.bias)])
        writer.writerow(["ridge_lambda", format_float(model.ridge_lambda)])
        for j, w in enumerate(model.weights):
            writer.writerow([f"w{j}", format_float(w)])


def read_readout_csv(source: PathOrFile) -> ReadoutModel:
    with open_text(source, "r") as handle:
        rows = {row[0]: float(row[1]) for row in list(csv.reader(handle))[1:]}
    weights = np.array([rows[f"w{j}"] for j in range(len(rows) - 2)])
    return ReadoutModel(weights, rows["bias"], rows["ridge_lambda"])
