"""Figure-level experiments, independent of any file layout."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .analysis import (
    ResponseCurve,
    default_tie_tol,
    make_grid,
    range_summary,
    response_curve,
)
from .ansatz import AnsatzConfig, CompiledAnsatz, zero_params
from .errors import DegenerateRangeError
from .sensing import SensingModel, sample_model
from .training import TargetSpec, target_f

logger = logging.getLogger(__name__)

FIG2_QUBITS = (2, 4, 6, 8, 10)
TRAIN_QUBITS = (2, 3, 4)


def default_depth(L: int) -> int:
    """Depth used for training: 20 layers up to three qubits, 40 beyond."""
    return 20 if L <= 3 else 40


def default_grid() -> np.ndarray:
    return make_grid(-1.0, 1.0, 0.01)


@dataclass
class UntrainedResponse:
    L: int
    seed: int
    model: SensingModel
    curve: ResponseCurve
    summary: dict

    @property
    def width(self) -> float:
        return self.summary["I_hi"] - self.summary["I_lo"]


def untrained_response(L: int, seed: int, D: int = 20, grid=None, workers: int = 1,
                       config: AnsatzConfig | None = None) -> UntrainedResponse:
    """Response of a freshly sampled sensor with every angle fixed to zero."""
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    config = config or AnsatzConfig(D=D)
    model = sample_model(L, seed)
    compiled = CompiledAnsatz(model, config)
    curve = response_curve(zero_params(model, config), model, config, grid, compiled=compiled,
                           workers=workers)
    try:
        summary = range_summary(curve, default_tie_tol(L))
    except DegenerateRangeError:
        summary = {"I_lo": 0.0, "I_hi": 0.0, "violations": 0,
                   "grid_step": float(np.median(np.diff(grid))), "slope_tie_tol": default_tie_tol(L)}
    return UntrainedResponse(L, seed, model, curve, summary)


def median_widths(results) -> dict:
    """Median dynamic-range width per qubit count."""
    by_L = {}
    for r in results:
        by_L.setdefault(r.L, []).append(r.width)
    return {L: float(np.median(w)) for L, w in sorted(by_L.items())}


def overlay_table(model: SensingModel, config: AnsatzConfig, trained, untrained, grid,
                  spec: TargetSpec = TargetSpec(), compiled: CompiledAnsatz | None = None):
    """Columns ``I, target, untrained, trained`` on ``grid``."""
    compiled = compiled or CompiledAnsatz(model, config)
    grid = np.asarray(grid, dtype=float)
    target = target_f(model, spec, grid)
    before = compiled.expectations(untrained, grid)
    after = compiled.expectations(trained, grid)
    return np.column_stack([grid, target, before, after])
