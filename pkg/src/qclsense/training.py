"""Least-squares training of the circuit toward a monotonic target response."""

from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import dataclass, field, asdict

import numpy as np
import scipy.optimize

from . import fileio
from .ansatz import AnsatzConfig, CompiledAnsatz, check_params, global_rotation
from .errors import TrainingError
from .qcore import AXES
from .sensing import SensingModel, input_states

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TargetSpec:
    """Amplitude ``A`` and range ``B`` of the target response."""

    A: float = 1.0
    B: float = 1.0

    def __post_init__(self):
        if self.A == 0 or self.B == 0 or not (math.isfinite(self.A) and math.isfinite(self.B)):
            raise ValueError(f"A and B must be finite and nonzero, got A={self.A!r}, B={self.B!r}")


def target_f(model: SensingModel, spec: TargetSpec, I):
    """``A L sin(sum(h) I t / (B L))``; accepts a scalar or an array of currents."""
    L = model.L
    arg = np.sum(model.h) * np.asarray(I, dtype=float) * model.t_sense / (spec.B * L)
    out = spec.A * L * np.sin(arg)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class TrainingSet:
    currents: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        I = np.array(self.currents, dtype=float).ravel()
        y = np.array(self.targets, dtype=float).ravel()
        if I.size < 1:
            raise ValueError("training set must contain at least one sample")
        if I.shape != y.shape:
            raise ValueError(f"{I.size} currents but {y.size} targets")
        if not (np.all(np.isfinite(I)) and np.all(np.isfinite(y))):
            raise ValueError("training currents and targets must be finite")
        object.__setattr__(self, "currents", I)
        object.__setattr__(self, "targets", y)

    @property
    def N(self) -> int:
        return self.currents.size

    def save(self, path) -> None:
        fileio.write_csv(path, ["I", "target"], zip(self.currents, self.targets))

    @classmethod
    def load(cls, path) -> "TrainingSet":
        header, rows = fileio.read_csv(path)
        if header != ["I", "target"]:
            raise fileio.CSVParseError(path, 1, f"expected header I,target, got {','.join(header)}")
        arr = np.array(rows, dtype=float).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1])


def make_dataset(model: SensingModel, spec: TargetSpec, N: int = 200, seed: int = 0) -> TrainingSet:
    """``N`` currents drawn uniformly from ``[-1, 1]`` with their target values."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    rng = np.random.default_rng(seed)
    I = rng.uniform(-1.0, 1.0, N)
    return TrainingSet(I, target_f(model, spec, I))


@dataclass(frozen=True)
class TrainConfig:
    restarts: int = 5
    max_iterations: int = 500
    cost_tolerance: float = 1e-10
    fd_step: float = 1e-6
    init_seed: int = 0
    angle_bounds: tuple = (-2 * math.pi, 2 * math.pi)
    target_cost: float = 1e-5
    stop_at_target: bool = False

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.fd_step > 0:
            raise ValueError("fd_step must be positive")
        lo, hi = self.angle_bounds
        if not lo < hi:
            raise ValueError(f"angle_bounds must satisfy lo < hi, got {self.angle_bounds}")
        object.__setattr__(self, "angle_bounds", (float(lo), float(hi)))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["angle_bounds"] = list(self.angle_bounds)
        return d

    @classmethod
    def from_dict(cls, d) -> "TrainConfig":
        d = dict(d)
        if "angle_bounds" in d:
            d["angle_bounds"] = tuple(d["angle_bounds"])
        return cls(**d)


@dataclass
class TrainResult:
    best_params: np.ndarray
    final_cost: float
    cost_history: list
    restart_index: int
    wall_time: float
    initial_params: np.ndarray
    restart_costs: list = field(default_factory=list)
    iterations: int = 0
    message: str = ""

    def best_so_far(self) -> np.ndarray:
        return np.minimum.accumulate([c for _, c in self.cost_history])

    def save_log(self, path) -> None:
        fileio.write_csv(path, ["iteration", "cost"], [(int(i), float(c)) for i, c in self.cost_history])


class LeastSquaresObjective:
    """Sum of squared residuals of the circuit response over a training set.

    Input states are current-dependent but parameter-independent, so they are
    prepared once. :meth:`gradient_fd` evaluates central differences while
    reusing the circuit products before and after the perturbed rotation.
    """

    def __init__(self, compiled: CompiledAnsatz, ts: TrainingSet):
        self.compiled = compiled
        self.ts = ts
        self.phi = input_states(compiled.model, ts.currents)
        self.mz = compiled.mz_diag
        self.n_evals = 0

    @property
    def n_params(self) -> int:
        return self.compiled.n_params

    def response(self, params) -> np.ndarray:
        return self.compiled.magnetization(self.compiled.apply(self.phi, params))

    def residuals(self, params) -> np.ndarray:
        return self.response(params) - self.ts.targets

    def _cost_from_states(self, psi) -> float:
        self.n_evals += 1
        r = self.mz @ (np.abs(psi) ** 2) - self.ts.targets
        return float(math.fsum(r * r))

    def __call__(self, params) -> float:
        return self._cost_from_states(self.compiled.apply(self.phi, params))

    def gradient_fd(self, params, step: float = 1e-6) -> np.ndarray:
        theta = check_params(params, self.compiled.config, self.compiled.L)
        if not step > 0:
            raise ValueError("fd_step must be positive")
        factors = list(self.compiled.factors(theta))
        # prefix[k]: states after the first k factors
        prefix = [self.phi]
        for F, _, _ in factors[:-1]:
            prefix.append(F @ prefix[-1])
        suffix = np.eye(self.compiled.dim, dtype=complex)
        config, L = self.compiled.config, self.compiled.L
        grad = np.zeros_like(theta)
        for k in range(len(factors) - 1, -1, -1):
            F, d, a = factors[k]
            if d is not None:
                idx = config.rotation_param_indices(L, d, a)
                for pos, p in enumerate(idx):
                    vals = []
                    for sign in (1.0, -1.0):
                        angles = config.rotation_angles(theta, L, d, a).copy()
                        angles[pos] += sign * step
                        R = global_rotation(AXES[a], angles, L)
                        vals.append(self._cost_from_states(suffix @ (R @ prefix[k])))
                    grad[p] = (vals[0] - vals[1]) / (2 * step)
            suffix = suffix @ F
        return grad


def central_difference(fun, x, step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar function, one coordinate at a time."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for k in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[k] += step
        xm[k] -= step
        grad[k] = (fun(xp) - fun(xm)) / (2 * step)
    return grad


def cost(params, ts: TrainingSet, model: SensingModel, config: AnsatzConfig,
         compiled: CompiledAnsatz | None = None) -> float:
    """Sum over samples of the squared deviation from the target."""
    compiled = compiled or CompiledAnsatz(model, config)
    return LeastSquaresObjective(compiled, ts)(params)


def cost_gradient_fd(params, ts: TrainingSet, model: SensingModel, config: AnsatzConfig,
                     fd_step: float = 1e-6, compiled: CompiledAnsatz | None = None) -> np.ndarray:
    compiled = compiled or CompiledAnsatz(model, config)
    return LeastSquaresObjective(compiled, ts).gradient_fd(params, fd_step)


class _ReachedTolerance(Exception):
    pass


def _run_once(objective: LeastSquaresObjective, theta0, tc: TrainConfig):
    """One SLSQP descent. Returns ``(theta, cost, history, message)``."""
    last = {}

    def fun(theta):
        key = theta.tobytes()
        if key not in last:
            value = objective(theta)
            if not math.isfinite(value):
                raise FloatingPointError(f"non-finite cost {value!r}")
            last.clear()
            last[key] = value
        return last[key]

    def jac(theta):
        g = objective.gradient_fd(theta, tc.fd_step)
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient")
        return g

    history = [(0, fun(theta0))]
    best = {"theta": np.array(theta0, dtype=float), "cost": history[0][1]}

    def callback(theta):
        value = fun(theta)
        history.append((len(history), value))
        if value <= best["cost"]:
            best["theta"], best["cost"] = np.array(theta, dtype=float), value
        if value <= tc.cost_tolerance:
            raise _ReachedTolerance

    if history[0][1] <= tc.cost_tolerance:
        return best["theta"], best["cost"], history, "initial point within tolerance"
    bounds = [tc.angle_bounds] * theta0.size
    try:
        with warnings.catch_warnings():
            # SLSQP clips its own line-search steps back into the box and warns each time
            warnings.filterwarnings("ignore", "Values in x were outside bounds", RuntimeWarning)
            res = scipy.optimize.minimize(
                fun, theta0, jac=jac, method="SLSQP", bounds=bounds, callback=callback,
                options={"maxiter": tc.max_iterations, "ftol": tc.cost_tolerance},
            )
        message = str(res.message)
        final = np.clip(res.x, *tc.angle_bounds)
        value = fun(final)
        if value < best["cost"]:
            # keep final_cost equal to the history minimum
            history.append((len(history), value))
            best["theta"], best["cost"] = final, value
    except _ReachedTolerance:
        message = "cost tolerance reached"
    return best["theta"], best["cost"], history, message


def train(model: SensingModel, config: AnsatzConfig, ts: TrainingSet, tc: TrainConfig = TrainConfig(),
          compiled: CompiledAnsatz | None = None, initial_params=None) -> TrainResult:
    """Fit the circuit angles to the training targets.

    Each restart starts from angles drawn uniformly within ``tc.angle_bounds``
    (or from ``initial_params`` for the first restart, if given) and runs
    bounded SLSQP driven by central finite differences. The run with the
    lowest final cost wins; ties go to the earlier restart.
    """
    start = time.perf_counter()
    compiled = compiled or CompiledAnsatz(model, config)
    objective = LeastSquaresObjective(compiled, ts)
    seeds = np.random.SeedSequence(tc.init_seed).spawn(tc.restarts)
    best = None
    restart_costs = []
    for r, ss in enumerate(seeds):
        rng = np.random.default_rng(ss)
        theta0 = rng.uniform(*tc.angle_bounds, objective.n_params)
        if r == 0 and initial_params is not None:
            theta0 = check_params(initial_params, config, model.L).copy()
        try:
            theta, value, history, message = _run_once(objective, theta0, tc)
        except FloatingPointError as exc:
            logger.warning("restart %d aborted: %s", r, exc)
            restart_costs.append(math.inf)
            continue
        logger.info("restart %d: cost %.3e after %d iterations (%s)", r, value, len(history) - 1, message)
        restart_costs.append(value)
        if best is None or value < best[1]:
            best = (theta, value, history, r, theta0, message)
        if tc.stop_at_target and value <= tc.target_cost:
            break
    if best is None:
        raise TrainingError(f"all {tc.restarts} restarts failed")
    theta, value, history, r, theta0, message = best
    return TrainResult(
        best_params=theta,
        final_cost=value,
        cost_history=history,
        restart_index=r,
        wall_time=time.perf_counter() - start,
        initial_params=theta0,
        restart_costs=restart_costs,
        iterations=len(history) - 1,
        message=message,
    )
