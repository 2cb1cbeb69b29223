"""Response curves, dynamic-range extraction and current-uncertainty estimates."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import fileio
from .ansatz import AnsatzConfig, CompiledAnsatz
from .errors import DegenerateRangeError, DivergenceError
from .qcore import variance
from .sensing import SensingModel, delta_I_theory, input_states

DERIVATIVE_STEP = 1e-4
MIN_SLOPE = 1e-12


def make_grid(start: float, stop: float, step: float) -> np.ndarray:
    """Inclusive, evenly spaced grid; points are rounded to 12 decimals so ``0`` is exact."""
    if not step > 0:
        raise ValueError(f"grid step must be positive, got {step!r}")
    if not start < stop:
        raise ValueError(f"grid start {start!r} must be below stop {stop!r}")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(n), 12) + 0.0


def default_tie_tol(L: int) -> float:
    return 1e-6 * L


@dataclass(frozen=True, eq=False)
class ResponseCurve:
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape:
            raise ValueError("grid and values must be 1-D arrays of equal length")
        if grid.size > 1 and np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly ascending")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def save(self, path) -> None:
        fileio.write_csv(path, ["I", "expectation"], zip(self.grid, self.values))

    @classmethod
    def load(cls, path) -> "ResponseCurve":
        _, rows = fileio.read_csv(path)
        arr = np.array(rows, dtype=float).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1])


@dataclass(frozen=True)
class DynamicRange:
    I_lo: float
    I_hi: float

    @property
    def width(self) -> float:
        return self.I_hi - self.I_lo


@dataclass
class DeltaIResult:
    grid: np.ndarray
    delta_model: np.ndarray
    delta_theory: np.ndarray
    M: int

    @property
    def flags(self) -> list:
        finite = np.isfinite(self.delta_model) & np.isfinite(self.delta_theory)
        return ["ok" if ok else "divergent" for ok in finite]

    def save(self, path) -> None:
        rows = zip(self.grid, self.delta_model, self.delta_theory, self.flags)
        fileio.write_csv(path, ["I", "delta_model", "delta_theory", "flag"], rows)


def _chunks(arr, n):
    return [c for c in np.array_split(arr, n) if c.size]


def response_curve(params, model: SensingModel, config: AnsatzConfig, grid,
                   compiled: CompiledAnsatz | None = None, workers: int = 1) -> ResponseCurve:
    """``<M_z>`` of the circuit output at every current in ``grid``."""
    grid = np.asarray(grid, dtype=float)
    if grid.size < 1:
        raise ValueError("grid must not be empty")
    compiled = compiled or CompiledAnsatz(model, config)
    if workers > 1 and grid.size > 1:
        # only the per-current input states are spread over threads; the circuit
        # is applied to the whole batch so values do not depend on ``workers``
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda g: input_states(model, g), _chunks(grid, workers)))
        phi = np.concatenate(parts, axis=1)
    else:
        phi = input_states(model, grid)
    return ResponseCurve(grid, compiled.magnetization(compiled.apply(phi, params)))


def _slope_signs(values, slope_tie_tol):
    slopes = np.diff(np.asarray(values, dtype=float))
    return np.where(np.abs(slopes) < slope_tie_tol, 0, np.sign(slopes)).astype(int)


def monotonicity_violations(curve, slope_tie_tol: float = 0.0) -> int:
    """Number of sign changes between consecutive non-tied discrete slopes."""
    values = curve.values if isinstance(curve, ResponseCurve) else curve
    signs = _slope_signs(values, slope_tie_tol)
    signs = signs[signs != 0]
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def dynamic_range(curve: ResponseCurve, slope_tie_tol: float = 0.0) -> DynamicRange:
    """Widest grid interval around ``I = 0`` on which the response is monotone.

    Tied slopes (magnitude below ``slope_tie_tol``) are compatible with either
    direction. Raises :class:`DegenerateRangeError` for a flat curve.
    """
    grid = curve.grid
    if grid.size < 2:
        raise ValueError("a dynamic range needs at least two grid points")
    if not grid[0] <= 0 <= grid[-1]:
        raise ValueError("I = 0 must lie within the grid span")
    signs = _slope_signs(curve.values, slope_tie_tol)
    if not np.any(signs):
        raise DegenerateRangeError("response is flat over the whole grid")
    left = int(np.searchsorted(grid, 0.0, side="right")) - 1
    right = int(np.searchsorted(grid, 0.0, side="left"))
    best = None
    for direction in (1, -1):
        ok = np.isin(signs, (0, direction))
        lo, hi = left, right
        if hi > lo and not ok[lo]:
            continue
        while lo > 0 and ok[lo - 1]:
            lo -= 1
        while hi < signs.size and ok[hi]:
            hi += 1
        if best is None or grid[hi] - grid[lo] > best.width:
            best = DynamicRange(float(grid[lo]), float(grid[hi]))
    return best


def range_summary(curve: ResponseCurve, slope_tie_tol: float) -> dict:
    """Content of the dynamic-range JSON file."""
    dr = dynamic_range(curve, slope_tie_tol)
    steps = np.diff(curve.grid)
    return {
        "I_lo": dr.I_lo,
        "I_hi": dr.I_hi,
        "violations": monotonicity_violations(curve, slope_tie_tol),
        "grid_step": float(np.median(steps)) if steps.size else 0.0,
        "slope_tie_tol": float(slope_tie_tol),
    }


def _delta_from_states(compiled, psi_mid, psi_plus, psi_minus, dI, M):
    slope = (compiled.magnetization(psi_plus) - compiled.magnetization(psi_minus)) / (2 * dI)
    if abs(slope) < MIN_SLOPE:
        raise DivergenceError(f"response slope {slope!r} vanishes")
    sigma = math.sqrt(variance(psi_mid, compiled.mz_matrix))
    return sigma / (abs(slope) * math.sqrt(M))


def delta_I_model(params, model: SensingModel, config: AnsatzConfig, I: float,
                  dI: float = DERIVATIVE_STEP, M: int = 1,
                  compiled: CompiledAnsatz | None = None) -> float:
    """Current uncertainty of the trained sensor at ``I``.

    ``sqrt(Var M_z) / (|d<M_z>/dI| sqrt(M))`` with a central-difference slope
    of step ``dI``.
    """
    if not dI > 0:
        raise ValueError(f"derivative step must be positive, got {dI!r}")
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M!r}")
    compiled = compiled or CompiledAnsatz(model, config)
    psi = compiled.apply(input_states(model, [I, I + dI, I - dI]), params)
    return _delta_from_states(compiled, psi[:, 0], psi[:, 1], psi[:, 2], dI, M)


def delta_I_sweep(params, model: SensingModel, config: AnsatzConfig, start: float = -0.8,
                  stop: float = 0.8, step: float = 0.05, M: int = 1, dI: float = DERIVATIVE_STEP,
                  compiled: CompiledAnsatz | None = None) -> DeltaIResult:
    """Model and closed-form uncertainty on an inclusive grid.

    Points where either estimate diverges are recorded as ``inf``.
    """
    compiled = compiled or CompiledAnsatz(model, config)
    grid = make_grid(start, stop, step)
    currents = np.concatenate([grid, grid + dI, grid - dI])
    psi = compiled.apply(input_states(model, currents), params)
    n = grid.size
    delta_model = np.empty(n)
    delta_theory = np.empty(n)
    for k, I in enumerate(grid):
        try:
            delta_model[k] = _delta_from_states(compiled, psi[:, k], psi[:, n + k], psi[:, 2 * n + k], dI, M)
        except DivergenceError:
            delta_model[k] = math.inf
        try:
            delta_theory[k] = delta_I_theory(model.h, float(I), model.t_sense, M)
        except DivergenceError:
            delta_theory[k] = math.inf
    return DeltaIResult(grid, delta_model, delta_theory, M)

