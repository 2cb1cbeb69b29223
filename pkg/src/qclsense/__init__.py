"""Simulation and training of interacting qubit current sensors with a trainable readout circuit."""

__version__ = "0.1.0"

from .errors import DegenerateRangeError, DivergenceError, TrainingError
from .sensing import GradientFieldSpec, SensingModel, load_model, sample_model, save_model
from .ansatz import AnsatzConfig, CompiledAnsatz, load_params, model_expectation, save_params
from .training import TargetSpec, TrainConfig, TrainingSet, TrainResult, make_dataset, train
from .analysis import DeltaIResult, DynamicRange, ResponseCurve, delta_I_sweep, dynamic_range, response_curve
from .estimator import SensorCircuitRegressor, target_readout

__all__ = [
    "AnsatzConfig", "CompiledAnsatz", "DegenerateRangeError", "DeltaIResult", "DivergenceError",
    "DynamicRange", "GradientFieldSpec", "ResponseCurve", "SensingModel", "SensorCircuitRegressor",
    "TargetSpec", "TrainConfig", "TrainResult", "TrainingError", "TrainingSet", "delta_I_sweep",
    "dynamic_range", "load_model", "load_params", "make_dataset", "model_expectation",
    "response_curve", "sample_model", "save_model", "save_params", "target_readout", "train",
]
