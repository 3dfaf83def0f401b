"""Dense state-vector simulator.

Amplitude layout: basis index ``i`` has qubit 0 as its most significant bit,
so ``amps.reshape((2,) * q)`` puts qubit ``k`` on axis ``k``.  Register
integers are read MSB-first in the order the qubit indices are listed.

Gate functions mutate the state in place and return it, so calls chain.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

MAX_QUBITS = 26
UNITARY_TOL = 1e-10


class CapacityError(ValueError):
    """Requested register exceeds the simulator's qubit cap."""


class ValidationError(ValueError):
    """Malformed gate, control pattern, or register."""


# ---------------------------------------------------------------------------
# gates
# ---------------------------------------------------------------------------

def ry(beta: float) -> np.ndarray:
    c, s = np.cos(beta / 2), np.sin(beta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(gamma: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * gamma), 0], [0, np.exp(0.5j * gamma)]], dtype=complex)


def phase(delta: float) -> np.ndarray:
    """Global phase ``e^{i delta} I``; only meaningful when controlled."""
    return np.exp(1j * delta) * np.eye(2, dtype=complex)


H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)
NEG_X = -X
NEG_Z = -Z
SDG = np.array([[1, 0], [0, -1j]], dtype=complex)


def check_unitary(g: np.ndarray, tol: float = UNITARY_TOL) -> np.ndarray:
    g = np.asarray(g, dtype=complex)
    if g.shape != (2, 2):
        raise ValidationError(f"single-qubit gate must be 2x2, got {g.shape}")
    if np.max(np.abs(g.conj().T @ g - I2)) > tol:
        raise ValidationError("gate is not unitary")
    return g


# ---------------------------------------------------------------------------
# state
# ---------------------------------------------------------------------------

@dataclass
class StateVector:
    num_qubits: int
    amps: np.ndarray

    def copy(self) -> "StateVector":
        return StateVector(self.num_qubits, self.amps.copy())

    def tensor(self) -> np.ndarray:
        """Writable view with one axis per qubit."""
        return self.amps.reshape((2,) * self.num_qubits)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2


def _check_count(q: int) -> None:
    if not 1 <= q <= MAX_QUBITS:
        raise CapacityError(f"qubit count {q} outside [1, {MAX_QUBITS}]")


def new_state(q: int) -> StateVector:
    _check_count(q)
    amps = np.zeros(1 << q, dtype=complex)
    amps[0] = 1.0
    return StateVector(q, amps)


def from_amplitudes(amps: Sequence[complex] | np.ndarray) -> StateVector:
    amps = np.array(amps, dtype=complex).ravel()
    q = int(np.log2(amps.size))
    if 1 << q != amps.size:
        raise ValidationError("amplitude count is not a power of two")
    _check_count(q)
    return StateVector(q, amps)


def kron(*states: StateVector) -> StateVector:
    """Tensor product; the first factor holds the lowest qubit indices."""
    q = sum(s.num_qubits for s in states)
    _check_count(q)
    amps = states[0].amps
    for s in states[1:]:
        amps = np.multiply.outer(amps, s.amps).ravel()
    return StateVector(q, amps)


def _check_qubits(state: StateVector, qubits: Iterable[int]) -> list[int]:
    qubits = [int(k) for k in qubits]
    if len(set(qubits)) != len(qubits):
        raise ValidationError(f"repeated qubit index in {qubits}")
    for k in qubits:
        if not 0 <= k < state.num_qubits:
            raise ValidationError(f"qubit {k} out of range for {state.num_qubits} qubits")
    return qubits


# controls are (qubit, polarity) pairs, polarity 1 = filled dot, 0 = open dot
Controls = Sequence[tuple[int, int]]


def _index(q: int, controls: Controls, target: int, bit: int) -> tuple:
    idx: list = [slice(None)] * q
    for c, pol in controls:
        idx[c] = slice(pol, pol + 1)
    idx[target] = slice(bit, bit + 1)  # slices keep views even on one-qubit states
    return tuple(idx)


def apply_controlled(state: StateVector, g: np.ndarray, controls: Controls, target: int,
                     validate: bool = True) -> StateVector:
    """Apply ``g`` on ``target`` for basis states matching every control polarity."""
    q = state.num_qubits
    if validate:
        g = check_unitary(g)
        ctrl_q = [c for c, _ in controls]
        _check_qubits(state, ctrl_q + [target])
        for _, pol in controls:
            if pol not in (0, 1):
                raise ValidationError(f"control polarity must be 0 or 1, got {pol}")
    view = state.tensor()
    i0 = _index(q, controls, target, 0)
    i1 = _index(q, controls, target, 1)
    a = view[i0]
    b = view[i1]
    if g[0, 1] == 0 and g[1, 0] == 0:
        if g[0, 0] != 1:
            a *= g[0, 0]
        if g[1, 1] != 1:
            b *= g[1, 1]
    elif g[0, 0] == 0 and g[1, 1] == 0:
        tmp = a.copy()
        view[i0] = g[0, 1] * b
        view[i1] = g[1, 0] * tmp
    else:
        tmp = a.copy()
        a *= g[0, 0]
        a += g[0, 1] * b
        b *= g[1, 1]
        tmp *= g[1, 0]
        b += tmp
    return state


def apply_1q(state: StateVector, g: np.ndarray, target: int) -> StateVector:
    return apply_controlled(state, g, (), target)


def reflection_about_zero(state: StateVector, qubits: Sequence[int]) -> StateVector:
    """``I - 2|0..0><0..0|`` on ``qubits`` as open-controlled ``-Z`` on the last one."""
    if len(qubits) == 0:
        raise ValidationError("reflection needs at least one qubit")
    qubits = _check_qubits(state, qubits)
    controls = [(k, 0) for k in qubits[:-1]]
    return apply_controlled(state, NEG_Z, controls, qubits[-1])


def _register_first(state: StateVector, qubits: list[int]) -> np.ndarray:
    """Copy of amplitudes shaped (2^len(qubits), rest), register axes first."""
    view = state.tensor()
    moved = np.moveaxis(view, qubits, list(range(len(qubits))))
    return moved.reshape(1 << len(qubits), -1).copy()


def _write_register_first(state: StateVector, qubits: list[int], block: np.ndarray) -> None:
    k = len(qubits)
    shaped = block.reshape((2,) * state.num_qubits)
    state.amps[:] = np.moveaxis(shaped, list(range(k)), qubits).ravel()


def inverse_qft(state: StateVector, qubits: Sequence[int]) -> StateVector:
    """Exact inverse DFT, ``|y> -> 2^{-t/2} sum_k e^{-2 pi i y k / 2^t} |k>``, MSB-first."""
    qubits = _check_qubits(state, qubits)
    block = _register_first(state, qubits)
    block = np.fft.fft(block, axis=0) / np.sqrt(block.shape[0])
    _write_register_first(state, qubits, block)
    return state


def register_distribution(state: StateVector, qubits: Sequence[int]) -> np.ndarray:
    """Marginal outcome probabilities of ``qubits`` (exhaustive mode)."""
    qubits = _check_qubits(state, qubits)
    probs = np.abs(state.tensor()) ** 2
    others = tuple(k for k in range(state.num_qubits) if k not in qubits)
    marg = probs.sum(axis=others) if others else probs
    # remaining axes are in ascending qubit order; reorder to the listed order
    order = np.argsort(np.argsort(qubits))
    marg = np.transpose(marg, axes=list(order)) if len(qubits) > 1 else marg
    return marg.ravel()


def measure_register(state: StateVector, qubits: Sequence[int],
                     rng: np.random.Generator) -> tuple[int, float, StateVector]:
    """Born-rule measurement; collapses ``state`` in place.

    Returns the MSB-first outcome integer, its pre-measurement probability,
    and the renormalised post-measurement state.
    """
    qubits = _check_qubits(state, qubits)
    probs = register_distribution(state, qubits)
    cdf = np.cumsum(probs)
    u = rng.random() * cdf[-1]
    outcome = int(np.searchsorted(cdf, u, side="right"))
    if outcome >= len(probs):  # u rounded up onto the total
        outcome = int(np.flatnonzero(probs > 0)[-1])
    p = float(probs[outcome])
    block = _register_first(state, qubits)
    keep = block[outcome].copy() / np.sqrt(p)
    block[:] = 0
    block[outcome] = keep
    _write_register_first(state, qubits, block)
    return outcome, p, state


def reduced_density(state: StateVector, qubit: int) -> np.ndarray:
    (qubit,) = _check_qubits(state, [qubit])
    v = _register_first(state, [qubit])
    return v @ v.conj().T


def reduced_ket1(state: StateVector, qubit: int) -> tuple[np.ndarray, float]:
    """Dominant eigenvector of the qubit's reduced density matrix and its purity.

    The returned ket has its largest-magnitude component real and positive.
    """
    rho = reduced_density(state, qubit)
    purity = float(np.real(np.trace(rho @ rho)))
    vals, vecs = np.linalg.eigh(rho)
    ket = vecs[:, int(np.argmax(vals))]
    k = int(np.argmax(np.abs(ket) > np.abs(ket).max() - 1e-12))
    ket = ket * np.exp(-1j * np.angle(ket[k]))
    return ket / np.linalg.norm(ket), purity


def norm_dist(a: np.ndarray, b: np.ndarray) -> float:
    """Euclidean distance of raw amplitude vectors; global phase is not quotiented."""
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)))


# ---------------------------------------------------------------------------
# gate lists
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Op:
    """One (possibly controlled) single-qubit gate."""

    matrix: np.ndarray
    target: int
    controls: tuple[tuple[int, int], ...] = ()

    def dagger(self) -> "Op":
        return Op(self.matrix.conj().T, self.target, self.controls)

    def remap(self, mapping: Sequence[int]) -> "Op":
        return Op(self.matrix, mapping[self.target],
                  tuple((mapping[c], p) for c, p in self.controls))

    def with_controls(self, extra: Controls) -> "Op":
        return Op(self.matrix, self.target, tuple(extra) + self.controls)


def adjoint(ops: Sequence[Op]) -> list[Op]:
    return [op.dagger() for op in reversed(ops)]


def controlled(ops: Sequence[Op], extra: Controls) -> list[Op]:
    return [op.with_controls(extra) for op in ops]


def remap(ops: Sequence[Op], mapping: Sequence[int]) -> list[Op]:
    return [op.remap(mapping) for op in ops]


def apply_ops(state: StateVector, ops: Iterable[Op], validate: bool = True) -> StateVector:
    for op in ops:
        apply_controlled(state, op.matrix, op.controls, op.target, validate=validate)
    return state
