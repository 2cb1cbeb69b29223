"""Dense state-vector algebra for small qubit registers.

States are 1-D complex ``numpy`` arrays of length ``2**L`` and operators are
dense ``(2**L, 2**L)`` complex arrays. Qubit 1 is the most significant bit of
the computational-basis index, so ``|q1 q2 ... qL>`` maps to the integer with
binary digits ``q1 q2 ... qL``.

Single-qubit conventions follow ``sigma_z = |1><1| - |0><0|``. The remaining
Pauli matrices are fixed by the algebra ``sigma_x sigma_y = i sigma_z``, which
makes ``sigma_y = [[0, i], [-i, 0]]`` in the ``(|0>, |1>)`` basis.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

MAX_QUBITS = 12

NORM_TOL = 1e-10
HERMITIAN_TOL = 1e-12
IMAG_TOL = 1e-10

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, 1j], [-1j, 0]], dtype=complex)
SIGMA_Z = np.array([[-1, 0], [0, 1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)

PAULI = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}
AXES = ("x", "y", "z")


def _check_axis(axis):
    if axis not in PAULI:
        raise ValueError(f"axis must be one of {AXES}, got {axis!r}")


def _check_num_qubits(L):
    if not isinstance(L, (int, np.integer)) or isinstance(L, bool):
        raise TypeError(f"qubit count must be an integer, got {type(L).__name__}")
    if L < 1 or L > MAX_QUBITS:
        raise ValueError(f"qubit count must lie in [1, {MAX_QUBITS}], got {L}")


def num_qubits_of(dim: int) -> int:
    """Return ``L`` such that ``2**L == dim``."""
    L = int(dim).bit_length() - 1
    if dim < 2 or 2**L != dim:
        raise ValueError(f"dimension {dim} is not a power of two >= 2")
    return L


def kron_all(factors) -> np.ndarray:
    """Kronecker product of ``factors`` with the first factor most significant."""
    return reduce(np.kron, factors)


def pauli_embed(axis: str, qubit_index: int, L: int) -> np.ndarray:
    """Embed ``sigma_axis`` on qubit ``qubit_index`` (1-based) of an ``L``-qubit register."""
    _check_axis(axis)
    _check_num_qubits(L)
    if not 1 <= qubit_index <= L:
        raise ValueError(f"qubit_index must lie in [1, {L}], got {qubit_index}")
    factors = [IDENTITY_2] * L
    factors[qubit_index - 1] = PAULI[axis]
    return kron_all(factors)


def total_magnetization(axis: str, L: int) -> np.ndarray:
    """Sum of ``sigma_axis`` over all ``L`` qubits."""
    _check_axis(axis)
    _check_num_qubits(L)
    return sum(pauli_embed(axis, j, L) for j in range(1, L + 1))


def zero_state(L: int) -> np.ndarray:
    """The all-zeros computational basis state ``|0...0>``."""
    _check_num_qubits(L)
    psi = np.zeros(2**L, dtype=complex)
    psi[0] = 1.0
    return psi


def plus_state(L: int) -> np.ndarray:
    """The product state ``|+>^L`` with ``|+> = (|0> + |1>)/sqrt(2)``."""
    _check_num_qubits(L)
    return np.full(2**L, 2.0 ** (-L / 2), dtype=complex)


def as_state(amplitudes, normalize: bool = False) -> np.ndarray:
    """Validate ``amplitudes`` as a normalized state vector.

    Raises ``ValueError`` if the length is not a power of two or, unless
    ``normalize`` is set, if the squared norm differs from 1 by more than
    ``NORM_TOL``.
    """
    psi = np.asarray(amplitudes, dtype=complex)
    if psi.ndim != 1:
        raise ValueError(f"state must be one-dimensional, got shape {psi.shape}")
    num_qubits_of(psi.shape[0])
    norm2 = float(np.vdot(psi, psi).real)
    if normalize:
        if norm2 == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return psi / np.sqrt(norm2)
    if abs(norm2 - 1.0) > NORM_TOL:
        raise ValueError(f"state is not normalized: |psi|^2 = {norm2!r}")
    return psi


def is_hermitian(H, tol: float = HERMITIAN_TOL) -> bool:
    H = np.asarray(H)
    return H.ndim == 2 and H.shape[0] == H.shape[1] and bool(
        np.max(np.abs(H - H.conj().T), initial=0.0) <= tol
    )


def as_hermitian(H, tol: float = HERMITIAN_TOL) -> np.ndarray:
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"operator must be square, got shape {H.shape}")
    scale = max(1.0, float(np.max(np.abs(H), initial=0.0)))
    if not is_hermitian(H, tol * scale):
        raise ValueError("operator is not Hermitian")
    return H


def is_unitary(U, tol: float = NORM_TOL) -> bool:
    U = np.asarray(U)
    eye = np.eye(U.shape[0])
    return bool(np.max(np.abs(U.conj().T @ U - eye)) <= tol)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigensystem ``H = V diag(w) V^dagger`` of a Hermitian operator."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def reconstruct(self) -> np.ndarray:
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.conj().T

    def propagator(self, t: float) -> np.ndarray:
        """Dense ``exp(-i H t)``."""
        V = self.eigenvectors
        return (V * np.exp(-1j * self.eigenvalues * t)) @ V.conj().T

    def evolve(self, psi: np.ndarray, t: float) -> np.ndarray:
        V = self.eigenvectors
        return V @ (np.exp(-1j * self.eigenvalues * t) * (V.conj().T @ psi))


def eigendecompose(H) -> SpectralDecomposition:
    """Eigensystem of a Hermitian operator, eigenvalues ascending."""
    H = as_hermitian(H)
    w, V = np.linalg.eigh(H)
    return SpectralDecomposition(w, V)


def propagator(H, t: float) -> np.ndarray:
    """Dense unitary ``exp(-i H t)`` computed through the eigensystem."""
    spec = H if isinstance(H, SpectralDecomposition) else eigendecompose(H)
    return spec.propagator(t)


def evolve(state, H, t: float) -> np.ndarray:
    """Return ``exp(-i H t) |state>``.

    ``H`` may be a dense Hermitian operator or a precomputed
    :class:`SpectralDecomposition`.
    """
    if not np.isfinite(t):
        raise ValueError(f"evolution time must be finite, got {t!r}")
    psi = as_state(state)
    spec = H if isinstance(H, SpectralDecomposition) else eigendecompose(H)
    if spec.dim != psi.shape[0]:
        raise ValueError(f"dimension mismatch: state {psi.shape[0]} vs operator {spec.dim}")
    return spec.evolve(psi, t)


def _check_pair(state, O):
    psi = np.asarray(state, dtype=complex)
    O = np.asarray(O)
    if O.ndim != 2 or O.shape != (psi.shape[0], psi.shape[0]):
        raise ValueError(f"dimension mismatch: state {psi.shape} vs operator {O.shape}")
    return psi, O


def expectation(state, O) -> float:
    """``<state|O|state>`` for a Hermitian observable ``O``."""
    psi, O = _check_pair(state, O)
    value = np.vdot(psi, O @ psi)
    if abs(value.imag) > IMAG_TOL * max(1.0, abs(value.real)):
        raise ValueError(f"expectation has imaginary part {value.imag!r}; is O Hermitian?")
    return float(value.real)


def variance(state, O) -> float:
    """``<O^2> - <O>^2``, clamped at zero."""
    psi, O = _check_pair(state, O)
    Opsi = O @ psi
    mean = expectation(psi, O)
    second = float(np.vdot(Opsi, Opsi).real)
    var = second - mean**2
    if var < -IMAG_TOL * max(1.0, second):
        raise ValueError(f"negative variance {var!r}")
    return max(var, 0.0)
