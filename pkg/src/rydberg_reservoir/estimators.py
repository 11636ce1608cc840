"""scikit-learn compatible wrappers around the reservoir and its readout.

``ReservoirTransformer`` maps an input series (one value per row) to the
reservoir response, one row per drive symbol with ``samples_per_symbol``
columns. ``SavitzkyGolayFilter`` smooths such a matrix along the flattened
time axis, and ``LinearReadout`` is the trained linear layer.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .dynamics import DriveSchedule, TrajectoryConfig, integrate_ode, integrate_sde, relax_to_steady
from .model import ModelParams
from .pipeline import FilterSpec, savitzky_golay, solve_readout


def _as_series(X) -> np.ndarray:
    X = check_array(X, ensure_2d=False, dtype=np.float64)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"expected a single input column, got shape {X.shape}")
        X = X[:, 0]
    return X


class ReservoirTransformer(TransformerMixin, BaseEstimator):
    """Drive the mean-field reservoir with a series and return its density trace.

    ``fit`` records the series range used for the linear encoding onto
    ``[omega, omega * (1 + rel_amplitude)]``; ``transform`` encodes, relaxes
    the reservoir to the first symbol's steady state, runs
    ``warmup_symbols`` discarded symbols and then integrates the SDE
    (plain RK4 when ``noise == 0``).

    Returns an array of shape ``(n_symbols, samples_per_symbol)``.
    """

    def __init__(self, omega=1.1, rel_amplitude=0.1, delta=11.0, gamma=1.0, gamma_d=10.0,
                 v=100.0, noise=1e-4, hold_time=20.0, dt=0.1, samples_per_symbol=20,
                 warmup_symbols=10, seed=0, stream=0):
        self.omega = omega
        self.rel_amplitude = rel_amplitude
        self.delta = delta
        self.gamma = gamma
        self.gamma_d = gamma_d
        self.v = v
        self.noise = noise
        self.hold_time = hold_time
        self.dt = dt
        self.samples_per_symbol = samples_per_symbol
        self.warmup_symbols = warmup_symbols
        self.seed = seed
        self.stream = stream

    def _params(self, omega=None) -> ModelParams:
        return ModelParams(
            omega=self.omega if omega is None else omega, delta=self.delta, gamma=self.gamma,
            gamma_d=self.gamma_d, v=self.v, d=self.noise,
        )

    def fit(self, X, y=None):
        x = _as_series(X)
        self._params()
        self.data_min_ = float(x.min())
        self.data_max_ = float(x.max())
        self.n_features_in_ = 1
        return self

    def _encode(self, x: np.ndarray) -> np.ndarray:
        span = self.data_max_ - self.data_min_
        u = np.full(x.shape, 0.5) if span == 0 else (x - self.data_min_) / span
        lo, hi = self.omega, self.omega * (1.0 + self.rel_amplitude)
        return lo * (1.0 - u) + hi * u

    def transform(self, X):
        check_is_fitted(self)
        omegas = self._encode(_as_series(X))
        first = float(omegas[0])
        n0 = relax_to_steady(self._params(omega=first), 0.0)
        schedule = DriveSchedule(
            np.concatenate([np.full(self.warmup_symbols, first), omegas]), self.hold_time, self.delta
        )
        cfg = TrajectoryConfig(self.dt, self.seed, n0, self.samples_per_symbol, self.stream)
        run = integrate_sde if self.noise > 0 else integrate_ode
        trace = run(schedule, self._params(), cfg).n_samples
        return trace[self.warmup_symbols * self.samples_per_symbol:].reshape(-1, self.samples_per_symbol)


class SavitzkyGolayFilter(TransformerMixin, BaseEstimator):
    """Local-polynomial smoothing of a row-major time trace (shape preserved)."""

    def __init__(self, window=10, order=3):
        self.window = window
        self.order = order

    def fit(self, X, y=None):
        X = check_array(X, ensure_2d=False)
        FilterSpec(self.window, self.order)
        self.n_features_in_ = 1 if X.ndim == 1 else X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = check_array(X, ensure_2d=False, dtype=np.float64)
        return savitzky_golay(X.ravel(), FilterSpec(self.window, self.order)).reshape(X.shape)


class LinearReadout(RegressorMixin, BaseEstimator):
    """Linear map ``X @ coef_ + intercept_`` with optional ridge on ``coef_`` only."""

    def __init__(self, ridge_lambda=0.0):
        self.ridge_lambda = ridge_lambda

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        model = solve_readout(X, y, self.ridge_lambda)
        self.coef_ = model.weights
        self.intercept_ = model.bias
        self.rank_ = model.rank
        self.rank_deficient_ = model.rank_deficient
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self)
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X @ self.coef_ + self.intercept_
