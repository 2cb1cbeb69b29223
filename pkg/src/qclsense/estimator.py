"""scikit-learn compatible wrapper around the trainable sensor circuit.

``X`` holds applied currents (one feature); ``y`` holds the desired readout.
After ``fit`` the estimator predicts the trained sensor's total ``z``
magnetization, so it composes with pipelines, ``clone`` and model selection.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .analysis import delta_I_model
from .ansatz import AnsatzConfig, CompiledAnsatz
from .sensing import GradientFieldSpec, SensingModel
from .training import TargetSpec, TrainConfig, TrainingSet, target_f, train


class SensorCircuitRegressor(RegressorMixin, BaseEstimator):
    """Trainable global-gate readout for an interacting qubit sensor.

    Parameters
    ----------
    model : SensingModel
        The sensor whose response is being reshaped.
    depth : int, default=20
        Number of circuit layers.
    sharing : {"shared", "per_qubit"}, default="shared"
        Whether each rotation uses one angle for all qubits or one per qubit.
    t_gate : float, default=1.0
        Evolution time of the fixed interaction and gradient-field blocks.
    B0 : float, default=1.0
        Gradient-field scale.
    restarts : int, default=5
        Independent random initializations; the best run is kept.
    max_iter : int, default=500
        SLSQP iteration cap per restart.
    tol : float, default=1e-10
        Cost at which a restart stops early.
    fd_step : float, default=1e-6
        Central-difference step for the gradient.
    angle_bounds : tuple of float, default=(-2*pi, 2*pi)
        Box constraint on every angle, also the initialization range.
    random_state : int, default=0
        Seed for the restart initializations.
    """

    def __init__(self, model=None, depth=20, sharing="shared", t_gate=1.0, B0=1.0, restarts=5,
                 max_iter=500, tol=1e-10, fd_step=1e-6, angle_bounds=(-2 * math.pi, 2 * math.pi),
                 random_state=0):
        self.model = model
        self.depth = depth
        self.sharing = sharing
        self.t_gate = t_gate
        self.B0 = B0
        self.restarts = restarts
        self.max_iter = max_iter
        self.tol = tol
        self.fd_step = fd_step
        self.angle_bounds = angle_bounds
        self.random_state = random_state

    def _config(self) -> AnsatzConfig:
        return AnsatzConfig(D=self.depth, t_gate=self.t_gate, grad=GradientFieldSpec(self.B0),
                            sharing=self.sharing)

    def _check_model(self) -> SensingModel:
        if not isinstance(self.model, SensingModel):
            raise ValueError("model must be a SensingModel")
        return self.model

    def fit(self, X, y, initial_params=None):
        X, y = check_X_y(X, y, y_numeric=True, ensure_min_samples=1)
        if X.shape[1] != 1:
            raise ValueError(f"X must have exactly one feature (the current), got {X.shape[1]}")
        model = self._check_model()
        config = self._config()
        tc = TrainConfig(restarts=self.restarts, max_iterations=self.max_iter,
                         cost_tolerance=self.tol, fd_step=self.fd_step,
                         init_seed=self.random_state, angle_bounds=tuple(self.angle_bounds))
        self._compiled = CompiledAnsatz(model, config)
        result = train(model, config, TrainingSet(X[:, 0], y), tc, compiled=self._compiled,
                       initial_params=initial_params)
        self.params_ = result.best_params
        self.cost_ = result.final_cost
        self.train_result_ = result
        self.n_features_in_ = 1
        return self

    def _compiled_for_predict(self):
        compiled = getattr(self, "_compiled", None)
        if compiled is None:
            compiled = self._compiled = CompiledAnsatz(self._check_model(), self._config())
        return compiled

    def _currents(self, X):
        X = check_array(X)
        if X.shape[1] != 1:
            raise ValueError(f"X must have exactly one feature (the current), got {X.shape[1]}")
        return X[:, 0]

    def predict(self, X):
        check_is_fitted(self, "params_")
        return self._compiled_for_predict().expectations(self.params_, self._currents(X))

    def delta_I(self, X, M=1, dI=1e-4):
        """Current uncertainty of the fitted sensor at each row of ``X``."""
        check_is_fitted(self, "params_")
        compiled = self._compiled_for_predict()
        return np.array([
            delta_I_model(self.params_, self.model, compiled.config, float(I), dI=dI, M=M,
                          compiled=compiled)
            for I in self._currents(X)
        ])


def target_readout(model: SensingModel, X, A: float = 1.0, B: float = 1.0) -> np.ndarray:
    """Monotone target for ``fit``: ``A L sin(sum(h) I t / (B L))`` at each current in ``X``."""
    X = check_array(X)
    return target_f(model, TargetSpec(A, B), X[:, 0])
