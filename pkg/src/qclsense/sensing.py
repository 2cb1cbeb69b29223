"""Physics of the interacting qubit sensor and the closed-form baselines.

The sensor is an ensemble of ``L`` qubits, each coupled to a current ``I``
with relative strength ``h_j`` and to every other qubit through an isotropic
Heisenberg exchange ``J_ij``. Pairs are counted once (``i < j``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sparse
from scipy.sparse.linalg import expm_multiply

from . import fileio
from .errors import DivergenceError
from .qcore import (
    PAULI,
    SIGMA_Z,
    IDENTITY_2,
    eigendecompose,
    evolve,
    expectation,
    pauli_embed,
    plus_state,
    total_magnetization,
    zero_state,
    _check_axis,
    _check_num_qubits,
)

H_OFFSET, H_SCALE = 0.5, 2.0
J_OFFSET, J_SCALE = -1.0, 2.0
# From this many qubits on, input states apply the exponential to the vector
# instead of diagonalizing H_data at every current value.
KRYLOV_MIN_QUBITS = 7


@dataclass(frozen=True)
class GradientFieldSpec:
    """Linear field gradient ``B_j = B0 * j`` along the chosen axis."""

    B0: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.B0):
            raise ValueError(f"B0 must be finite, got {self.B0!r}")

    def strengths(self, L: int) -> np.ndarray:
        return self.B0 * np.arange(1, L + 1, dtype=float)


@dataclass(frozen=True, eq=False)
class SensingModel:
    """Couplings of one sensor instance.

    Parameters
    ----------
    L : int
        Number of qubits.
    h : array_like, shape (L,)
        Relative coupling of each qubit to the current.
    J : array_like, shape (L, L)
        Symmetric exchange matrix with zero diagonal.
    t_sense : float
        Sensing (exposure) time.
    seed : int or None
        Seed the couplings were drawn from, kept for provenance.
    """

    L: int
    h: np.ndarray
    J: np.ndarray
    t_sense: float = 1.0
    seed: int | None = None
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        _check_num_qubits(self.L)
        h = np.array(self.h, dtype=float)
        J = np.array(self.J, dtype=float)
        if h.shape != (self.L,):
            raise ValueError(f"h must have shape ({self.L},), got {h.shape}")
        if J.shape != (self.L, self.L):
            raise ValueError(f"J must have shape ({self.L}, {self.L}), got {J.shape}")
        if not (np.all(np.isfinite(h)) and np.all(np.isfinite(J))):
            raise ValueError("couplings must be finite")
        if not np.array_equal(J, J.T):
            raise ValueError("J must be symmetric")
        if np.any(np.diag(J) != 0):
            raise ValueError("J must have a zero diagonal")
        if not math.isfinite(self.t_sense):
            raise ValueError("t_sense must be finite")
        h.setflags(write=False)
        J.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "t_sense", float(self.t_sense))

    def __eq__(self, other):
        if not isinstance(other, SensingModel):
            return NotImplemented
        return (
            self.L == other.L
            and self.t_sense == other.t_sense
            and self.seed == other.seed
            and np.array_equal(self.h, other.h)
            and np.array_equal(self.J, other.J)
        )

    __hash__ = None

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "t_sense": self.t_sense,
            "seed": self.seed,
            "h": self.h.tolist(),
            "J": self.J.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> "SensingModel":
        return cls(
            L=int(d["L"]),
            h=d["h"],
            J=d["J"],
            t_sense=float(d.get("t_sense", 1.0)),
            seed=None if d.get("seed") is None else int(d["seed"]),
        )


def sample_model(L: int, seed: int, t_sense: float = 1.0) -> SensingModel:
    """Draw random couplings.

    ``h_j = 0.5 + 2 r_j`` and ``J_ij = -1 + 2 s_ij`` with ``r, s ~ U[0, 1)``.
    Draw order: ``r_1 .. r_L`` first, then ``s_ij`` row-major over ``i < j``.
    """
    _check_num_qubits(L)
    rng = np.random.default_rng(seed)
    h = H_OFFSET + H_SCALE * rng.random(L)
    J = np.zeros((L, L))
    iu = np.triu_indices(L, k=1)
    J[iu] = J_OFFSET + J_SCALE * rng.random(len(iu[0]))
    J = J + J.T
    return SensingModel(L=L, h=h, J=J, t_sense=t_sense, seed=seed)


def save_model(model: SensingModel, path) -> None:
    fileio.write_json(path, model.to_dict())


def load_model(path) -> SensingModel:
    return SensingModel.from_dict(fileio.read_json(path))


def _sparse_string(ops, L):
    """Sparse Kronecker product with ``ops[q]`` on qubit ``q`` (0-based), identity elsewhere."""
    out = sparse.identity(1, dtype=complex, format="csr")
    for q in range(L):
        out = sparse.kron(out, sparse.csr_matrix(ops.get(q, IDENTITY_2)), format="csr")
    return out


def _interaction_sparse(model: SensingModel):
    cached = model._cache.get("H_I_sparse")
    if cached is None:
        L = model.L
        cached = sparse.csr_matrix((2**L, 2**L), dtype=complex)
        for i in range(L):
            for j in range(i + 1, L):
                if model.J[i, j] == 0:
                    continue
                for axis in ("x", "y", "z"):
                    P = PAULI[axis]
                    cached = cached + model.J[i, j] * _sparse_string({i: P, j: P}, L)
        model._cache["H_I_sparse"] = cached
    return cached


def _coupling_sparse(model: SensingModel):
    cached = model._cache.get("V_sparse")
    if cached is None:
        L = model.L
        cached = sparse.csr_matrix((2**L, 2**L), dtype=complex)
        for j in range(L):
            cached = cached + (model.h[j] / 2) * _sparse_string({j: PAULI["y"]}, L)
        model._cache["V_sparse"] = cached
    return cached


def interaction_hamiltonian(model: SensingModel) -> np.ndarray:
    """``sum_{i<j} J_ij (X_i X_j + Y_i Y_j + Z_i Z_j)``."""
    cached = model._cache.get("H_I")
    if cached is None:
        cached = _interaction_sparse(model).toarray()
        cached.setflags(write=False)
        model._cache["H_I"] = cached
    return cached


def current_coupling(model: SensingModel) -> np.ndarray:
    """The operator multiplying ``I`` in the data Hamiltonian, ``sum_j h_j/2 Y_j``."""
    cached = model._cache.get("V")
    if cached is None:
        cached = _coupling_sparse(model).toarray()
        cached.setflags(write=False)
        model._cache["V"] = cached
    return cached


def data_hamiltonian(model: SensingModel, I: float) -> np.ndarray:
    """``H_I + sum_j (h_j I / 2) Y_j``."""
    if not math.isfinite(I):
        raise ValueError(f"current must be finite, got {I!r}")
    return interaction_hamiltonian(model) + I * current_coupling(model)


def gradient_hamiltonian(model: SensingModel, grad: GradientFieldSpec, axis: str) -> np.ndarray:
    """``sum_j B0 j sigma_axis^(j) + H_I``."""
    _check_axis(axis)
    B = grad.strengths(model.L)
    field_term = sparse.csr_matrix((2**model.L, 2**model.L), dtype=complex)
    for j in range(model.L):
        field_term = field_term + B[j] * _sparse_string({j: PAULI[axis]}, model.L)
    return field_term.toarray() + interaction_hamiltonian(model)


def input_state(model: SensingModel, I: float) -> np.ndarray:
    """``exp(-i H_data t_sense) |0...0>``.

    Small registers diagonalize ``H_data`` exactly. From ``KRYLOV_MIN_QUBITS``
    on, the exponential is applied to the vector directly on the sparse
    Hamiltonian, which agrees with the eigensystem to ~1e-15.
    """
    if not math.isfinite(I):
        raise ValueError(f"current must be finite, got {I!r}")
    psi0 = zero_state(model.L)
    if model.L >= KRYLOV_MIN_QUBITS:
        H = _interaction_sparse(model) + I * _coupling_sparse(model)
        return expm_multiply((-1j * model.t_sense) * H, psi0)
    spec = eigendecompose(data_hamiltonian(model, I))
    return spec.evolve(psi0, model.t_sense)


def input_states(model: SensingModel, currents) -> np.ndarray:
    """Input states for several currents, stacked as columns ``(2**L, n)``."""
    currents = np.asarray(currents, dtype=float).ravel()
    out = np.empty((2**model.L, currents.size), dtype=complex)
    for k, I in enumerate(currents):
        out[:, k] = input_state(model, float(I))
    return out


# Closed-form metrology baselines.


def ramsey_expectation(omega: float, t: float) -> float:
    """Single-qubit Ramsey signal ``sin(omega t)``."""
    return math.sin(omega * t)


def simulate_ramsey_expectation(omega: float, t: float) -> float:
    """Ramsey signal from the state-vector pipeline: ``|+>``, ``omega/2 Z``, measure ``Y``."""
    H = (omega / 2) * SIGMA_Z
    psi = evolve(plus_state(1), H, t)
    return expectation(psi, PAULI["y"])


def ramsey_estimate(expval: float, t: float) -> float:
    """Invert the Ramsey signal: ``arcsin(expval) / t``.

    Valid only inside the dynamic range ``|omega t| <= pi/2``.
    """
    if t <= 0:
        raise ValueError(f"t must be positive, got {t!r}")
    if abs(expval) > 1:
        raise ValueError(f"expectation {expval!r} outside [-1, 1]")
    return math.asin(expval) / t


def ramsey_uncertainty(t: float, M: int) -> float:
    """Shot-noise-limited Ramsey uncertainty ``1 / (t sqrt(M))``."""
    if t <= 0:
        raise ValueError(f"t must be positive, got {t!r}")
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M!r}")
    return 1.0 / (t * math.sqrt(M))


def ensemble_expectation(h, I: float, t: float) -> float:
    """Non-interacting ensemble signal ``sum_j sin(h_j I t)``."""
    h = np.asarray(h, dtype=float)
    return float(np.sum(np.sin(h * I * t)))


def simulate_ensemble_expectation(h, I: float, t: float) -> float:
    """Ensemble signal from the state-vector pipeline.

    Prepares ``|+>^L``, evolves under ``sum_j h_j I / 2 Z_j`` and measures the
    total ``y`` magnetization, with no exchange coupling.
    """
    h = np.asarray(h, dtype=float)
    L = h.size
    H = sum((h[j] * I / 2) * pauli_embed("z", j + 1, L) for j in range(L))
    psi = evolve(plus_state(L), H, t)
    return expectation(psi, total_magnetization("y", L))


def ensemble_estimate_linear(expval: float, h, t: float) -> float:
    """Small-signal current estimate ``expval / (t sum_j h_j)``."""
    denom = t * float(np.sum(h))
    if denom == 0:
        raise ValueError("t * sum(h) must be nonzero")
    return expval / denom


def delta_I_theory(h, I: float, t: float, M: int = 1) -> float:
    """Closed-form current uncertainty of the non-interacting ensemble.

    ``sqrt(sum_j cos^2(h_j I t)) / (|sum_j h_j t cos(h_j I t)| sqrt(M))``.
    Raises :class:`DivergenceError` where the response slope vanishes.
    """
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M!r}")
    h = np.asarray(h, dtype=float)
    phase = h * I * t
    numerator = math.sqrt(float(np.sum(1.0 - np.sin(phase) ** 2)))
    slope = abs(float(np.sum(h * t * np.cos(phase))))
    if slope < 1e-12:
        raise DivergenceError(f"response slope vanishes at I={I!r}")
    return numerator / (slope * math.sqrt(M))
