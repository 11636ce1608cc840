"""Mean-field Rydberg density equation and its stationary-state analysis.

All rates and frequencies are measured in units of the spontaneous-emission
rate ``gamma`` (callers normally keep ``gamma = 1``), times in units of
``1 / gamma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal, Optional, Sequence

import numpy as np

from .exceptions import ParameterError, SolverError, SpinodalError

#: Roots closer than this are merged into a single (marginal) root.
ROOT_MERGE_TOL = 1e-9
#: Polish target for ``|F(n)|``.
ROOT_RESIDUAL_TOL = 1e-13
#: Below this ``|F'(n)|`` a stationary state is treated as marginal.
SPINODAL_SLOPE_TOL = 1e-10
MAX_NEWTON_STEPS = 100


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the mean-field model.

    Attributes:
        omega: Rabi frequency.
        delta: detuning.
        gamma: spontaneous-emission rate (sets the unit).
        gamma_d: dephasing rate.
        v: interaction shift ``V``.
        d: noise strength ``D`` of the stochastic extension.
    """

    omega: float = 1.1
    delta: float = 11.0
    gamma: float = 1.0
    gamma_d: float = 10.0
    v: float = 100.0
    d: float = 1e-4

    def __post_init__(self):
        for name in ("omega", "delta", "gamma", "gamma_d", "v", "d"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value!r}")
        if self.gamma <= 0:
            raise ParameterError(f"gamma must be > 0, got {self.gamma}")
        if self.gamma_d < 0:
            raise ParameterError(f"gamma_d must be >= 0, got {self.gamma_d}")
        if self.omega < 0:
            raise ParameterError(f"omega must be >= 0, got {self.omega}")
        if self.d < 0:
            raise ParameterError(f"d must be >= 0, got {self.d}")

    @property
    def big_gamma(self) -> float:
        """Combined dissipation rate ``(gamma + gamma_d) / 2``."""
        return 0.5 * (self.gamma + self.gamma_d)

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class StationaryState:
    n_ss: float
    stable: bool
    tau_relax: Optional[float]


@dataclass(frozen=True)
class StationarySet:
    params: ModelParams
    states: tuple[StationaryState, ...]

    @property
    def count(self) -> int:
        return len(self.states)

    @property
    def stable_states(self) -> tuple[StationaryState, ...]:
        return tuple(s for s in self.states if s.stable)

    @property
    def is_bistable(self) -> bool:
        return self.count == 3


@dataclass(frozen=True)
class PhaseDiagram:
    """Root-count map over a (detuning, Rabi frequency) grid.

    Matrices are indexed ``[i_omega, i_delta]``. Cells where the solver failed
    carry ``root_counts == -1`` and ``failed == True``.
    """

    delta_grid: np.ndarray
    omega_grid: np.ndarray
    root_counts: np.ndarray
    bistable_mask: np.ndarray
    failed: np.ndarray

    def bounding_box(self) -> Optional[tuple[float, float, float, float]]:
        """``(delta_min, delta_max, omega_min, omega_max)`` of the bistable cells."""
        if not self.bistable_mask.any():
            return None
        io, jd = np.nonzero(self.bistable_mask)
        return (
            float(self.delta_grid[jd.min()]),
            float(self.delta_grid[jd.max()]),
            float(self.omega_grid[io.min()]),
            float(self.omega_grid[io.max()]),
        )


@dataclass(frozen=True)
class HysteresisPoint:
    delta: float
    n_ss: float
    jumped: bool = False
    converged: bool = True


@dataclass(frozen=True)
class HysteresisBranch:
    direction: Literal["up", "down"]
    points: tuple[HysteresisPoint, ...] = field(default_factory=tuple)

    @property
    def deltas(self) -> np.ndarray:
        return np.array([pt.delta for pt in self.points])

    @property
    def densities(self) -> np.ndarray:
        return np.array([pt.n_ss for pt in self.points])


def drift(n, p: ModelParams):
    """Right-hand side ``F(n)`` of the mean-field equation (scalar or array)."""
    g = p.big_gamma
    detuning = p.delta - n * p.v
    return -(p.omega**2) * g * (n - 0.5) / (g * g + detuning * detuning) - p.gamma * n


def drift_derivative(n, p: ModelParams):
    """Closed-form ``dF/dn``."""
    g = p.big_gamma
    detuning = p.delta - n * p.v
    q = g * g + detuning * detuning
    return (
        -(p.omega**2) * g * (1.0 / q + 2.0 * p.v * detuning * (n - 0.5) / (q * q))
        - p.gamma
    )


def coherence_adiabatic(n, p: ModelParams):
    """Optical coherence slaved to the density, ``-i Ω (n - 1/2) / (i(Δ - nV) + Γ)``."""
    return -1j * p.omega * (n - 0.5) / (1j * (p.delta - n * p.v) + p.big_gamma)


def cubic_coefficients(p: ModelParams) -> tuple[float, float, float, float]:
    """Coefficients ``(a3, a2, a1, a0)`` of the stationary cubic, highest first.

    ``F(n) = -P(n) / (Γ² + (Δ - nV)²)`` so the roots of ``P`` are the
    stationary densities.
    """
    g = p.big_gamma
    drive = p.omega**2 * g
    return (
        p.gamma * p.v**2,
        -2.0 * p.gamma * p.delta * p.v,
        p.gamma * (g * g + p.delta**2) + drive,
        -0.5 * drive,
    )


def _critical_points(p: ModelParams) -> list[float]:
    a3, a2, a1, _ = cubic_coefficients(p)
    if a3 == 0.0:
        return []
    disc = a2 * a2 - 3.0 * a3 * a1
    if disc <= 0.0:
        return []
    # stable quadratic formula for 3 a3 c^2 + 2 a2 c + a1 = 0
    s = math.sqrt(disc)
    q = -(a2 + math.copysign(s, a2))
    roots = [q / (3.0 * a3)]
    if q != 0.0:
        roots.append(a1 / q)
    return sorted(c for c in roots if 0.0 < c < 0.5)


def _bisect(p: ModelParams, lo: float, hi: float, f_lo: float) -> float:
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = drift(mid, p)
        if f_mid == 0.0:
            return mid
        if (f_mid > 0.0) == (f_lo > 0.0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def polish_root(n: float, p: ModelParams, lo: float = 0.0, hi: float = 0.5) -> float:
    """Newton iteration on ``F`` until ``|F(n)| < ROOT_RESIDUAL_TOL``.

    Steps leaving ``[lo, hi]`` are replaced by the bracket midpoint side.

    Raises:
        SolverError: if the residual target is not met in ``MAX_NEWTON_STEPS``.
    """
    for _ in range(MAX_NEWTON_STEPS + 1):
        f = drift(n, p)
        if abs(f) < ROOT_RESIDUAL_TOL:
            return n
        slope = drift_derivative(n, p)
        if slope == 0.0:
            break
        step = n - f / slope
        if not lo <= step <= hi:
            step = 0.5 * (n + (lo if step < lo else hi))
        if step == n:
            break
        n = step
    if abs(drift(n, p)) < ROOT_RESIDUAL_TOL:
        return n
    raise SolverError(
        f"Newton polish stalled at n={n!r} with |F|={abs(drift(n, p)):.3e} for {p}"
    )


def _classify(n: float, p: ModelParams) -> StationaryState:
    slope = float(drift_derivative(n, p))
    tau = 1.0 / abs(slope) if abs(slope) >= SPINODAL_SLOPE_TOL else None
    return StationaryState(n_ss=float(n), stable=slope < 0.0, tau_relax=tau)


def stationary_states(p: ModelParams) -> StationarySet:
    """All stationary densities in ``(0, 1/2)`` with stability and relaxation time.

    The cubic is never solved in closed form. Its critical points split
    ``[0, 1/2]`` into monotone pieces, each piece holding at most one root;
    sign changes of ``F`` bracket them, bisection narrows them and a Newton
    polish on ``F`` finishes.

    Raises:
        SolverError: if a root cannot be polished to ``|F| < 1e-13``.
    """
    if p.omega == 0.0:
        # F(n) = -gamma n: the empty state is the only fixed point
        return StationarySet(p, (_classify(0.0, p),))
    if p.v == 0.0:
        _, _, a1, a0 = cubic_coefficients(p)
        n = polish_root(-a0 / a1, p)
        return StationarySet(p, (_classify(n, p),))

    edges = [0.0, *_critical_points(p), 0.5]
    roots: list[float] = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        f_lo, f_hi = drift(lo, p), drift(hi, p)
        if f_lo == 0.0 and lo > 0.0:
            roots.append(lo)
            continue
        if f_hi == 0.0 and hi < 0.5:
            roots.append(hi)
            continue
        if (f_lo > 0.0) == (f_hi > 0.0):
            continue
        guess = _bisect(p, lo, hi, f_lo)
        roots.append(polish_root(guess, p, lo, hi))

    roots.sort()
    merged: list[float] = []
    for r in roots:
        if merged and r - merged[-1] < ROOT_MERGE_TOL:
            merged[-1] = 0.5 * (merged[-1] + r)
        else:
            merged.append(r)
    return StationarySet(p, tuple(_classify(r, p) for r in merged))


def relaxation_time(n_ss: float, p: ModelParams) -> float:
    """``1 / |F'(n_ss)|`` from the analytic derivative.

    Raises:
        SpinodalError: when ``|F'(n_ss)| < 1e-10``.
    """
    slope = float(drift_derivative(n_ss, p))
    if abs(slope) < SPINODAL_SLOPE_TOL:
        raise SpinodalError(
            f"|F'({n_ss!r})| = {abs(slope):.3e}: relaxation time diverges"
        )
    return 1.0 / abs(slope)


def phase_diagram(
    delta_grid: Sequence[float], omega_grid: Sequence[float], p_base: ModelParams
) -> PhaseDiagram:
    """Stationary-state counts on a (detuning, Rabi frequency) grid."""
    deltas = np.asarray(delta_grid, dtype=float).ravel()
    omegas = np.asarray(omega_grid, dtype=float).ravel()
    if deltas.size == 0 or omegas.size == 0:
        raise ParameterError("phase_diagram grids must be nonempty")
    if not (np.isfinite(deltas).all() and np.isfinite(omegas).all()):
        raise ParameterError("phase_diagram grids must be finite")

    counts = np.empty((omegas.size, deltas.size), dtype=int)
    failed = np.zeros(counts.shape, dtype=bool)
    for io, om in enumerate(omegas):
        for jd, de in enumerate(deltas):
            try:
                counts[io, jd] = stationary_states(
                    replace(p_base, omega=float(om), delta=float(de))
                ).count
            except SolverError:
                counts[io, jd] = -1
                failed[io, jd] = True
    return PhaseDiagram(deltas, omegas, counts, counts == 3, failed)


def bistable_interval(
    p_base: ModelParams,
    delta_lo: float = 0.0,
    delta_hi: float = 30.0,
    steps: int = 3001,
    tol: float = 1e-12,
) -> Optional[tuple[float, float]]:
    """Locate the spinodal detunings bounding the three-root window.

    Scans the root count on a uniform grid and refines each 1 -> 3 and
    3 -> 1 transition by bisection. Returns the outermost window found, or
    ``None`` if the scan never sees three roots.
    """
    deltas = np.linspace(delta_lo, delta_hi, steps)

    def count(de: float) -> int:
        return stationary_states(replace(p_base, delta=float(de))).count

    counts = [count(de) for de in deltas]
    inside = [c == 3 for c in counts]
    if not any(inside):
        return None

    def refine(a: float, b: float, a_inside: bool) -> float:
        while b - a > tol:
            mid = 0.5 * (a + b)
            if (count(mid) == 3) == a_inside:
                a = mid
            else:
                b = mid
        return 0.5 * (a + b)

    first = inside.index(True)
    last = len(inside) - 1 - inside[::-1].index(True)
    left = deltas[0] if first == 0 else refine(deltas[first - 1], deltas[first], False)
    right = deltas[-1] if last == len(deltas) - 1 else refine(deltas[last], deltas[last + 1], True)
    return float(left), float(right)


def _track(prev: float, p: ModelParams) -> HysteresisPoint:
    sset = stationary_states(p)
    stable = sset.stable_states
    if not stable:
        # only possible at an exact tangency; keep the nearest root
        n = min(sset.states, key=lambda s: abs(s.n_ss - prev)).n_ss
        return HysteresisPoint(p.delta, n, jumped=True, converged=False)
    try:
        n = polish_root(prev, p)
        converged = True
    except SolverError:
        n, converged = prev, False
    nearest = min(sset.states, key=lambda s: abs(s.n_ss - n))
    if converged and nearest.stable and abs(nearest.n_ss - n) < 1e-8:
        # reject Newton runs that crossed the unstable root into the other basin
        unstable = [s.n_ss for s in sset.states if not s.stable]
        if not any(min(prev, n) < u < max(prev, n) for u in unstable):
            return HysteresisPoint(p.delta, nearest.n_ss)
    # the followed branch vanished: drop onto the closest surviving stable state
    target = min(stable, key=lambda s: abs(s.n_ss - prev))
    return HysteresisPoint(p.delta, target.n_ss, jumped=True, converged=converged)


def hysteresis_sweep(
    p_base: ModelParams,
    delta_from: float,
    delta_to: float,
    steps: int,
    n_start: Optional[float] = None,
) -> HysteresisBranch:
    """Quasi-static detuning scan following one stable branch.

    At each detuning the previous density seeds a Newton polish. If that
    branch no longer exists the scan jumps to the nearest surviving stable
    state. The first point starts from ``n_start`` (default: the lowest
    stable state, i.e. the state reached from an empty ensemble).
    """
    if delta_from == delta_to:
        steps = 1
    elif steps < 2:
        raise ParameterError(f"steps must be >= 2, got {steps}")
    direction: Literal["up", "down"] = "up" if delta_to >= delta_from else "down"
    deltas = np.linspace(delta_from, delta_to, steps)

    first = replace(p_base, delta=float(deltas[0]))
    stable = stationary_states(first).stable_states
    if n_start is None:
        prev = stable[0].n_ss
    else:
        prev = min(stable, key=lambda s: abs(s.n_ss - n_start)).n_ss
    points = [HysteresisPoint(float(deltas[0]), prev)]
    for de in deltas[1:]:
        pt = _track(prev, replace(p_base, delta=float(de)))
        points.append(pt)
        prev = pt.n_ss
    return HysteresisBranch(direction, tuple(points))
