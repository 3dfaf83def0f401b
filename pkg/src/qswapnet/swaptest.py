"""Swap-test inner-product estimation via phase estimation of ``G``.

``G = (I - 2|phi><phi|)(Z (x) I)`` has eigenphases ``+-2 theta`` where
``Re<x|w> = -cos(2 theta)``.  Phase estimation on a ``t``-qubit register
returns ``y`` with ``pi y / 2^(t-1) ~ 2 theta`` or its mirror ``2^t - y``.

The imaginary variant swaps ``|w>`` for ``-i|w>`` so the same readout
gives ``Im<x|w>``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import statesim as ss
from .statesim import Op, StateVector

REAL, IMAG = "real", "imag"


# ---------------------------------------------------------------------------
# state preparation
# ---------------------------------------------------------------------------

def product_ket(beta: float, gamma: float, delta: float) -> np.ndarray:
    """``e^{i delta} R_Z(gamma) R_Y(beta) |0>``."""
    return np.exp(1j * delta) * np.array(
        [np.exp(-0.5j * gamma) * np.cos(beta / 2), np.exp(0.5j * gamma) * np.sin(beta / 2)])


def ket_angles(ket: np.ndarray) -> tuple[float, float, float]:
    """Inverse of :func:`product_ket`, angles wrapped into ``[0, 2 pi)``."""
    ket = np.asarray(ket, dtype=complex)
    ket = ket / np.linalg.norm(ket)
    r0, r1 = abs(ket[0]), abs(ket[1])
    beta = 2 * np.arctan2(r1, r0)
    p0 = np.angle(ket[0]) if r0 > 1e-15 else 0.0
    p1 = np.angle(ket[1]) if r1 > 1e-15 else p0
    if r0 <= 1e-15:
        p0 = p1
    two_pi = 2 * np.pi
    gamma = (p1 - p0) % two_pi
    delta = (p0 + gamma / 2) % two_pi  # after wrapping gamma, or the sign flips
    return float(beta), float(gamma), float(delta)


@dataclass
class StatePrep:
    """Gate list mapping ``|0>^n`` to a target state; qubit indices are local."""

    num_qubits: int
    ops: list[Op] = field(default_factory=list)

    @classmethod
    def from_angles(cls, angles: Sequence[Sequence[float]]) -> "StatePrep":
        """Product preparation from ``(beta, gamma, delta)`` triples, one per qubit."""
        ops = []
        for k, (beta, gamma, delta) in enumerate(angles):
            ops += [Op(ss.ry(beta), k), Op(ss.rz(gamma), k), Op(ss.phase(delta), k)]
        return cls(len(angles), ops)

    @classmethod
    def from_kets(cls, kets: Sequence[np.ndarray]) -> "StatePrep":
        return cls.from_angles([ket_angles(k) for k in kets])

    def state(self) -> np.ndarray:
        psi = ss.new_state(self.num_qubits)
        ss.apply_ops(psi, self.ops)
        return psi.amps

    def on(self, qubits: Sequence[int]) -> list[Op]:
        return ss.remap(self.ops, qubits)


def _check_pair(x: StatePrep, w: StatePrep) -> int:
    if x.num_qubits != w.num_qubits:
        raise ss.ValidationError(
            f"input has {x.num_qubits} qubits but weight has {w.num_qubits}")
    return x.num_qubits


def phi_ops(x: StatePrep, w: StatePrep, variant: str, regs: Sequence[int]) -> list[Op]:
    """``U_phi``: H, open-controlled ``U_x``, closed-controlled ``U_w``, H.

    The imaginary variant puts ``-i`` on the ``w`` branch before the final H.
    """
    n = _check_pair(x, w)
    if len(regs) != n + 1:
        raise ss.ValidationError(f"need {n + 1} register qubits, got {len(regs)}")
    anc, data = regs[0], list(regs[1:])
    ops = [Op(ss.H, anc)]
    ops += ss.controlled(x.on(data), [(anc, 0)])
    ops += ss.controlled(w.on(data), [(anc, 1)])
    if variant == IMAG:
        ops.append(Op(ss.SDG, anc))
    elif variant != REAL:
        raise ss.ValidationError(f"unknown variant {variant!r}")
    ops.append(Op(ss.H, anc))
    return ops


def prepare_phi(x: StatePrep, w: StatePrep, variant: str = REAL,
                regs: Optional[Sequence[int]] = None,
                state: Optional[StateVector] = None) -> StateVector:
    n = _check_pair(x, w)
    if state is None:
        state = ss.new_state(n + 1)
    regs = list(range(n + 1)) if regs is None else list(regs)
    return ss.apply_ops(state, phi_ops(x, w, variant, regs))


def reflection_ops(regs: Sequence[int]) -> list[Op]:
    return [Op(ss.NEG_Z, regs[-1], tuple((k, 0) for k in regs[:-1]))]


def g_ops(x: StatePrep, w: StatePrep, variant: str, regs: Sequence[int]) -> list[Op]:
    """``G = U_phi (I - 2|0><0|) U_phi^dag (Z (x) I)`` as a gate list (first op first)."""
    u = phi_ops(x, w, variant, regs)
    return [Op(ss.Z, regs[0])] + ss.adjoint(u) + reflection_ops(regs) + u


def apply_G(state: StateVector, x: StatePrep, w: StatePrep, variant: str = REAL,
            regs: Optional[Sequence[int]] = None) -> StateVector:
    regs = list(range(x.num_qubits + 1)) if regs is None else list(regs)
    return ss.apply_ops(state, g_ops(x, w, variant, regs))


# ---------------------------------------------------------------------------
# eigenstructure
# ---------------------------------------------------------------------------

def exact_inner(x: np.ndarray, w: np.ndarray) -> complex:
    """``<x|w>`` by direct summation."""
    return complex(np.vdot(np.asarray(x), np.asarray(w)))


@dataclass
class EigenPair:
    w_plus: np.ndarray
    w_minus: np.ndarray
    theta: float


def _unit_or_default(v: np.ndarray) -> np.ndarray:
    nrm = np.linalg.norm(v)
    if nrm < 1e-12:  # degenerate x = +-w: any unit vector completes the basis
        out = np.zeros_like(v)
        out[0] = 1.0
        return out
    return v / nrm


def eigenpair(x: np.ndarray, w: np.ndarray, variant: str = REAL) -> EigenPair:
    """``|w_pm> = (|0>|u> +- i|1>|v>)/sqrt 2`` with ``cos theta = sqrt(1 - Re<x|w>)/sqrt 2``."""
    x = np.asarray(x, dtype=complex)
    w = np.asarray(w, dtype=complex) * (-1j if variant == IMAG else 1)
    u = _unit_or_default(x + w)
    v = _unit_or_default(x - w)
    re = float(np.clip(np.real(np.vdot(x, w)), -1.0, 1.0))
    theta = float(np.arccos(np.clip(np.sqrt((1 - re) / 2), -1.0, 1.0)))
    zero, one = np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)
    a, b = np.kron(zero, u), np.kron(one, v)
    return EigenPair((a + 1j * b) / np.sqrt(2), (a - 1j * b) / np.sqrt(2), theta)


# ---------------------------------------------------------------------------
# phase estimation
# ---------------------------------------------------------------------------

@dataclass
class PhaseDistribution:
    t: int
    probs: np.ndarray

    @property
    def modal_y(self) -> int:
        top = self.probs.max()
        return int(np.flatnonzero(self.probs >= top - 1e-12)[0])

    def estimate(self, y: int) -> float:
        return readout(y, self.t)

    def expected_estimate(self) -> float:
        ys = np.arange(len(self.probs))
        return float(np.dot(self.probs, readout(ys, self.t)))


def readout(y, t: int):
    """``-cos(pi y / 2^(t-1))``; identical for ``y`` and ``2^t - y``."""
    return -np.cos(np.pi * np.asarray(y) / 2 ** (t - 1))


def fold(y: int, t: int) -> int:
    """Representative of ``{y, 2^t - y}`` in ``[0, 2^(t-1)]``."""
    return min(y, (1 << t) - y)


def run_phase_estimation(state: StateVector, pe: Sequence[int], unitary: Sequence[Op]) -> StateVector:
    """H on ``pe``, controlled ``U^(2^(t-1-k))`` from qubit ``pe[k]``, inverse QFT.

    Powers are realised by repeated application, ``2^t - 1`` in total.
    """
    t = len(pe)
    for k in pe:
        ss.apply_1q(state, ss.H, k)
    for k, ctrl in enumerate(pe):
        cops = ss.controlled(unitary, [(ctrl, 1)])
        for _ in range(1 << (t - 1 - k)):
            ss.apply_ops(state, cops, validate=False)
    return ss.inverse_qft(state, pe)


def phase_estimate(x: StatePrep, w: StatePrep, variant: str = REAL, t: int = 5,
                   initial: Optional[np.ndarray] = None) -> tuple[StateVector, PhaseDistribution]:
    """Phase estimation of ``G`` with layout ``[pe (t) | ancilla | data (n)]``.

    ``initial`` replaces ``|phi>`` as the register state (used to probe
    eigenvectors); by default ``U_phi`` prepares it from ``|0>``.
    """
    n = _check_pair(x, w)
    if t < 1:
        raise ss.ValidationError("t must be >= 1")
    q = t + n + 1
    if q > ss.MAX_QUBITS:
        raise ss.CapacityError(f"phase estimation needs {q} qubits")
    pe = list(range(t))
    regs = list(range(t, q))
    if initial is None:
        state = ss.new_state(q)
        prepare_phi(x, w, variant, regs, state)
    else:
        state = ss.kron(ss.new_state(t), ss.from_amplitudes(initial))
    run_phase_estimation(state, pe, g_ops(x, w, variant, regs))
    return state, PhaseDistribution(t, ss.register_distribution(state, pe))


@dataclass
class InnerEstimate:
    re: float
    im: float
    dist_r: PhaseDistribution
    dist_i: PhaseDistribution
    shots: Optional[int]
    multi_shot: bool  # averaging several readouts goes beyond single-outcome readout


def estimate_inner(x: StatePrep, w: StatePrep, t: int, shots: Optional[int] = 1,
                   rng: Optional[np.random.Generator] = None) -> InnerEstimate:
    """Estimate ``<x|w>`` from sampled readouts.

    Each shot maps a sampled ``y`` to ``-cos(pi y / 2^(t-1))`` and shots are
    averaged.  ``shots=None`` is exhaustive mode: the modal ``y`` of each
    exact distribution is read out, with no sampling.
    """
    _, dr = phase_estimate(x, w, REAL, t)
    _, di = phase_estimate(x, w, IMAG, t)
    if shots is None:
        return InnerEstimate(float(dr.estimate(dr.modal_y)), float(di.estimate(di.modal_y)),
                             dr, di, None, False)
    if shots < 1:
        raise ss.ValidationError("shots must be >= 1")
    if rng is None:
        raise ss.ValidationError("sampling mode needs an rng")
    ys_r = rng.choice(len(dr.probs), size=shots, p=dr.probs / dr.probs.sum())
    ys_i = rng.choice(len(di.probs), size=shots, p=di.probs / di.probs.sum())
    return InnerEstimate(float(np.mean(readout(ys_r, t))), float(np.mean(readout(ys_i, t))),
                         dr, di, shots, shots > 1)
