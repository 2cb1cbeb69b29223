"""Trainable global-gate circuit applied after the sensing step.

One layer acts, in order, as

    U_x(theta_1) -> exp(-i H_grax t) -> U_y(theta_2) -> exp(-i H_gray t)
                 -> U_z(theta_3) -> exp(-i H_graz t)

with ``U_a(theta) = (R_a(theta) tensor ... tensor R_a(theta)) exp(-i H_I t)``.
Layer 1 acts first on the input state.

Parameters are stored layer-major. In ``"shared"`` mode each layer holds
``(theta_x, theta_y, theta_z)``; in ``"per_qubit"`` mode each layer holds
``3 L`` angles in qubit-major order, ``(x_1, y_1, z_1, x_2, y_2, z_2, ...)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import fileio
from .qcore import AXES, NORM_TOL, eigendecompose, is_unitary, kron_all, total_magnetization
from .sensing import (
    GradientFieldSpec,
    SensingModel,
    gradient_hamiltonian,
    input_state,
    input_states,
    interaction_hamiltonian,
)

SHARING_MODES = ("shared", "per_qubit")


@dataclass(frozen=True)
class AnsatzConfig:
    D: int = 20
    t_gate: float = 1.0
    grad: GradientFieldSpec = field(default_factory=GradientFieldSpec)
    sharing: str = "shared"

    def __post_init__(self):
        if not isinstance(self.D, (int, np.integer)) or self.D < 1:
            raise ValueError(f"depth D must be a positive integer, got {self.D!r}")
        if not math.isfinite(self.t_gate):
            raise ValueError(f"t_gate must be finite, got {self.t_gate!r}")
        if self.sharing not in SHARING_MODES:
            raise ValueError(f"sharing must be one of {SHARING_MODES}, got {self.sharing!r}")

    def angles_per_rotation(self, L: int) -> int:
        return 1 if self.sharing == "shared" else L

    def n_params(self, L: int) -> int:
        return 3 * self.D * self.angles_per_rotation(L)

    def rotation_angles(self, params, L: int, d: int, axis_index: int) -> np.ndarray:
        """Angles of the ``axis_index`` rotation in layer ``d`` (0-based)."""
        k = self.angles_per_rotation(L)
        layer = np.asarray(params)[3 * k * d : 3 * k * (d + 1)]
        return layer.reshape(k, 3)[:, axis_index] if k > 1 else layer[axis_index : axis_index + 1]

    def rotation_param_indices(self, L: int, d: int, axis_index: int) -> np.ndarray:
        k = self.angles_per_rotation(L)
        return 3 * k * d + 3 * np.arange(k) + axis_index


def check_params(params, config: AnsatzConfig, L: int) -> np.ndarray:
    theta = np.asarray(params, dtype=float)
    expected = config.n_params(L)
    if theta.shape != (expected,):
        raise ValueError(
            f"expected {expected} parameters for D={config.D}, sharing={config.sharing!r}, "
            f"L={L}; got shape {theta.shape}"
        )
    if not np.all(np.isfinite(theta)):
        raise ValueError("parameters must be finite")
    return theta


def rotation_gate(axis: str, theta: float) -> np.ndarray:
    """Single-qubit rotation ``R_axis(theta)`` as a 2x2 matrix."""
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    if axis == "x":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if axis == "y":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if axis == "z":
        e = complex(math.cos(theta / 2), -math.sin(theta / 2))
        return np.array([[e, 0], [0, e.conjugate()]], dtype=complex)
    raise ValueError(f"axis must be one of {AXES}, got {axis!r}")


def global_rotation(axis: str, thetas, L: int) -> np.ndarray:
    """Tensor product of ``R_axis`` over all qubits.

    ``thetas`` is a single angle (applied to every qubit) or ``L`` angles.
    """
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    if thetas.size == 1:
        thetas = np.repeat(thetas, L)
    elif thetas.size != L:
        raise ValueError(f"expected 1 or {L} angles, got {thetas.size}")
    return kron_all([rotation_gate(axis, th) for th in thetas])


def _apply_local(states: np.ndarray, gates, L: int) -> np.ndarray:
    """Apply one 2x2 gate per qubit to a ``(2**L, n)`` batch without forming the kron."""
    n = states.shape[1]
    psi = states.reshape((2,) * L + (n,))
    for q, g in enumerate(gates):
        psi = np.moveaxis(np.tensordot(g, psi, axes=([1], [q])), 0, q)
    return psi.reshape(2**L, n)


class CompiledAnsatz:
    """Current-independent unitaries of the circuit, bound to one model and config.

    The interaction propagator ``exp(-i H_I t)`` and the three gradient-field
    propagators are diagonalized once; every circuit evaluation afterwards is
    matrix multiplication only.
    """

    def __init__(self, model: SensingModel, config: AnsatzConfig):
        self.model = model
        self.config = config
        self.L = model.L
        self.dim = 2**model.L
        t = config.t_gate
        self.U_int = eigendecompose(interaction_hamiltonian(model)).propagator(t)
        self.U_grad = {
            axis: eigendecompose(gradient_hamiltonian(model, config.grad, axis)).propagator(t)
            for axis in AXES
        }
        for U in (self.U_int, *self.U_grad.values()):
            if not is_unitary(U, NORM_TOL):
                raise ArithmeticError("cached propagator lost unitarity")
            U.setflags(write=False)
        self.mz_matrix = total_magnetization("z", self.L)
        self.mz_diag = np.real(np.diag(self.mz_matrix)).copy()

    @property
    def n_params(self) -> int:
        return self.config.n_params(self.L)

    def rotation(self, params, d: int, axis_index: int) -> np.ndarray:
        angles = self.config.rotation_angles(params, self.L, d, axis_index)
        return global_rotation(AXES[axis_index], angles, self.L)

    def factors(self, params):
        """Circuit factors in application order.

        Yields ``(matrix, d, axis_index)``; ``d`` and ``axis_index`` are ``None``
        for the fixed propagators.
        """
        theta = check_params(params, self.config, self.L)
        for d in range(self.config.D):
            for a, axis in enumerate(AXES):
                yield self.U_int, None, None
                yield self.rotation(theta, d, a), d, a
                yield self.U_grad[axis], None, None

    def layer_unitary(self, theta_d) -> np.ndarray:
        """Unitary of one layer for the angle slice ``theta_d``."""
        theta_d = np.asarray(theta_d, dtype=float)
        k = self.config.angles_per_rotation(self.L)
        if theta_d.shape != (3 * k,):
            raise ValueError(f"layer slice must have {3 * k} angles, got shape {theta_d.shape}")
        single = AnsatzConfig(D=1, t_gate=self.config.t_gate, grad=self.config.grad,
                              sharing=self.config.sharing)
        U = np.eye(self.dim, dtype=complex)
        for a, axis in enumerate(AXES):
            R = global_rotation(axis, single.rotation_angles(theta_d, self.L, 0, a), self.L)
            U = self.U_grad[axis] @ (R @ (self.U_int @ U))
        return U

    def unitary(self, params) -> np.ndarray:
        """Dense ``U(theta)`` of the full circuit."""
        U = np.eye(self.dim, dtype=complex)
        for F, _, _ in self.factors(params):
            U = F @ U
        return U

    def apply(self, states, params) -> np.ndarray:
        """Apply ``U(theta)`` to one state or to a ``(2**L, n)`` batch of column states."""
        theta = check_params(params, self.config, self.L)
        states = np.asarray(states, dtype=complex)
        single = states.ndim == 1
        psi = states.reshape(self.dim, -1)
        if psi.shape[0] != self.dim:
            raise ValueError(f"state dimension {psi.shape[0]} does not match {self.dim}")
        if psi.shape[1] >= self.dim:
            out = self.unitary(theta) @ psi
        else:
            out = psi
            for d in range(self.config.D):
                for a, axis in enumerate(AXES):
                    angles = self.config.rotation_angles(theta, self.L, d, a)
                    if angles.size == 1:
                        angles = np.repeat(angles, self.L)
                    out = self.U_int @ out
                    out = _apply_local(out, [rotation_gate(axis, th) for th in angles], self.L)
                    out = self.U_grad[axis] @ out
        return out[:, 0] if single else out

    def magnetization(self, states) -> np.ndarray:
        """``<M_z>`` of each column state."""
        states = np.asarray(states)
        probs = np.abs(states) ** 2
        return self.mz_diag @ probs

    def expectations(self, params, currents) -> np.ndarray:
        """``<M_z>`` of the trained sensor at each current."""
        phi = input_states(self.model, currents)
        return self.magnetization(self.apply(phi, params))


def compile_ansatz(model: SensingModel, config: AnsatzConfig) -> CompiledAnsatz:
    return CompiledAnsatz(model, config)


def layer_unitary(compiled: CompiledAnsatz, theta_d) -> np.ndarray:
    return compiled.layer_unitary(theta_d)


def apply_ansatz(state, params, compiled: CompiledAnsatz) -> np.ndarray:
    return compiled.apply(state, params)


def output_state(params, model: SensingModel, config: AnsatzConfig, I: float,
                 compiled: CompiledAnsatz | None = None) -> np.ndarray:
    """``U(theta) exp(-i H_data t) |0...0>``."""
    compiled = compiled or CompiledAnsatz(model, config)
    return compiled.apply(input_state(model, I), params)


def model_expectation(params, model: SensingModel, config: AnsatzConfig, I: float,
                      compiled: CompiledAnsatz | None = None) -> float:
    """Total ``z`` magnetization of the circuit output at current ``I``."""
    compiled = compiled or CompiledAnsatz(model, config)
    psi = output_state(params, model, config, I, compiled)
    return float(compiled.magnetization(psi))


def zero_params(model: SensingModel, config: AnsatzConfig) -> np.ndarray:
    return np.zeros(config.n_params(model.L))


def random_params(model: SensingModel, config: AnsatzConfig, seed, bounds=(-2 * np.pi, 2 * np.pi)):
    rng = np.random.default_rng(seed)
    return rng.uniform(bounds[0], bounds[1], config.n_params(model.L))


def params_to_dict(params, config: AnsatzConfig) -> dict:
    return {
        "D": config.D,
        "sharing": config.sharing,
        "t_gate": config.t_gate,
        "B0": config.grad.B0,
        "theta": np.asarray(params, dtype=float).tolist(),
    }


def params_from_dict(d) -> tuple[np.ndarray, AnsatzConfig]:
    config = AnsatzConfig(
        D=int(d["D"]),
        t_gate=float(d.get("t_gate", 1.0)),
        grad=GradientFieldSpec(float(d.get("B0", 1.0))),
        sharing=d.get("sharing", "shared"),
    )
    return np.asarray(d["theta"], dtype=float), config


def save_params(path, params, config: AnsatzConfig) -> None:
    fileio.write_json(path, params_to_dict(params, config))


def load_params(path) -> tuple[np.ndarray, AnsatzConfig]:
    return params_from_dict(fileio.read_json(path))
