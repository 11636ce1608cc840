"""Input time series: Lorenz generation, CSV ingestion and drive encoding."""

from __future__ import annotations

import csv
import io
import logging
import re
from dataclasses import dataclass, field
from typing import Iterable, Union

import numpy as np

from ._io import PathOrFile, format_float, open_text
from .dynamics import DriveSchedule
from .exceptions import DataError, DivergenceError, ParameterError

logger = logging.getLogger(__name__)

_DECIMAL = re.compile(r"^[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?$")
_DIVERGENCE_BOUND = 1e6


@dataclass(frozen=True)
class TimeSeriesData:
    values: np.ndarray
    dt: float = 1.0
    label: str = ""
    notes: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        object.__setattr__(self, "values", values)
        if values.size == 0:
            raise DataError("time series is empty")
        if not np.isfinite(values).all():
            raise DataError("time series contains non-finite values")

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class LorenzParams:
    """Lorenz-63 settings.

    The defaults are the chaotic assignment ``rho=28, beta=8/3``.
    :meth:`as_printed` swaps the two labels (``beta=28, rho=8/3``), which
    settles onto a fixed point instead.
    """

    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0
    dt: float = 0.04
    steps: int = 16000
    initial: tuple[float, float, float] = (1.0, 1.0, 1.0)
    transient: float = 10.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ParameterError(f"dt must be > 0, got {self.dt}")
        if self.steps < 1:
            raise ParameterError(f"steps must be >= 1, got {self.steps}")
        if self.transient < 0:
            raise ParameterError(f"transient must be >= 0, got {self.transient}")

    @classmethod
    def as_printed(cls, **overrides) -> "LorenzParams":
        return cls(**{"beta": 28.0, "rho": 8.0 / 3.0, **overrides})


def lorenz_states(lp: LorenzParams) -> np.ndarray:
    """RK4 states after each of ``lp.steps`` steps, shape ``(steps, 3)``.

    The first ``round(transient / dt)`` steps are integrated and dropped.

    Raises:
        DivergenceError: if any coordinate exceeds ``1e6`` in magnitude.
    """
    sigma, rho, beta, h = lp.sigma, lp.rho, lp.beta, lp.dt
    x, y, z = (float(c) for c in lp.initial)
    skip = int(round(lp.transient / h))
    out = np.empty((lp.steps, 3))

    def f(x, y, z):
        return sigma * (y - x), rho * x - y - x * z, x * y - beta * z

    for i in range(skip + lp.steps):
        a1, b1, c1 = f(x, y, z)
        a2, b2, c2 = f(x + 0.5 * h * a1, y + 0.5 * h * b1, z + 0.5 * h * c1)
        a3, b3, c3 = f(x + 0.5 * h * a2, y + 0.5 * h * b2, z + 0.5 * h * c2)
        a4, b4, c4 = f(x + h * a3, y + h * b3, z + h * c3)
        x += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        y += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        z += h / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
        if not max(abs(x), abs(y), abs(z)) <= _DIVERGENCE_BOUND:
            raise DivergenceError(
                f"Lorenz state diverged at step {i} (t={(i + 1) * h:g}): ({x}, {y}, {z})"
            )
        if i >= skip:
            out[i - skip] = (x, y, z)
    return out


def lorenz_generate(lp: LorenzParams = LorenzParams()) -> TimeSeriesData:
    """x-component of the Lorenz system, one sample per step."""
    states = lorenz_states(lp)
    return TimeSeriesData(states[:, 0].copy(), dt=lp.dt, label="lorenz-x")


def ingest_csv(
    source: PathOrFile,
    value_column: str,
    delimiter: str = ",",
    dt: float = 1.0,
    label: str | None = None,
) -> TimeSeriesData:
    """Read one numeric column from a headed UTF-8 CSV file.

    Blank lines are skipped and noted. Cells must be plain decimal numbers
    (``1.5``, ``-2e3``); anything else raises with its 1-based line number.

    Raises:
        DataError: empty file, missing column or unparsable cell.
    """
    with open_text(source, "r") as handle:
        rows = list(csv.reader(handle, delimiter=delimiter))
    header_at = next((i for i, row in enumerate(rows) if any(c.strip() for c in row)), None)
    if header_at is None:
        raise DataError("CSV source is empty")
    header = [c.strip() for c in rows[header_at]]
    if value_column not in header:
        raise DataError(f"column {value_column!r} not found in header {header}")
    col = header.index(value_column)

    values: list[float] = []
    notes: list[str] = []
    for lineno, row in enumerate(rows[header_at + 1:], start=header_at + 2):
        if not any(c.strip() for c in row):
            notes.append(f"line {lineno}: blank line skipped")
            continue
        if col >= len(row):
            raise DataError(f"line {lineno}: missing value for column {value_column!r}")
        cell = row[col].strip()
        if not _DECIMAL.match(cell):
            raise DataError(f"line {lineno}: non-numeric value {cell!r} in column {value_column!r}")
        values.append(float(cell))
    if not values:
        raise DataError("CSV source has a header but no data rows")
    for note in notes:
        logger.info(note)
    name = label if label is not None else value_column
    return TimeSeriesData(np.array(values), dt=dt, label=name, notes=tuple(notes))


def export_csv(
    series: Union[TimeSeriesData, Iterable[float]],
    dest: PathOrFile,
    value_column: str = "value",
    delimiter: str = ",",
) -> None:
    values = series.values if isinstance(series, TimeSeriesData) else np.asarray(list(series), float)
    with open_text(dest, "w") as handle:
        writer = csv.writer(handle, delimiter=delimiter, lineterminator="\n")
        writer.writerow(["index", value_column])
        for i, v in enumerate(values):
            writer.writerow([i, format_float(float(v))])


def export_csv_text(series: TimeSeriesData, value_column: str = "value") -> str:
    buf = io.StringIO()
    export_csv(series, buf, value_column)
    return buf.getvalue()


@dataclass(frozen=True)
class EncodingSpec:
    omega_min: float
    omega_max: float

    def __post_init__(self):
        if not 0 <= self.omega_min <= self.omega_max:
            raise ParameterError(
                f"need 0 <= omega_min <= omega_max, got [{self.omega_min}, {self.omega_max}]"
            )

    @classmethod
    def from_modulation(cls, omega: float, rel_amplitude: float) -> "EncodingSpec":
        """``[omega, omega * (1 + rel_amplitude)]``."""
        return cls(float(omega), float(omega) * (1.0 + rel_amplitude))


def normalize(values) -> np.ndarray:
    """Min/max scaling onto ``[0, 1]``; a constant series maps to 0.5."""
    x = np.asarray(values, dtype=float)
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.full(x.shape, 0.5)
    return (x - lo) / (hi - lo)


def encode(
    series: Union[TimeSeriesData, np.ndarray],
    spec: EncodingSpec,
    hold_time: float,
    delta: float,
) -> DriveSchedule:
    """Affine map of the series onto ``[omega_min, omega_max]``, one symbol per sample."""
    values = series.values if isinstance(series, TimeSeriesData) else series
    u = normalize(values)
    # endpoint-exact form: u=0, 1/2, 1 land on omega_min, the midpoint, omega_max
    omegas = spec.omega_min * (1.0 - u) + spec.omega_max * u
    return DriveSchedule(omegas, hold_time, delta)
