"""Single quantum neuron ``|x> -> f(<x|w>)``.

``f(a) = R_Z(-pi/2) R_Z(arccos(-Im a)) R_Y(arccos(-Re a)) |0>``.  The
circuit path estimates both arccos angles by phase estimation, writes them
onto an output qubit with controlled-rotation cascades, measures the two
phase registers and reads the (now pure) output qubit.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import statesim as ss
from . import swaptest as st
from .statesim import Op, StateVector
from .swaptest import StatePrep

PURITY_TOL = 1e-9


class PurityError(RuntimeError):
    """Output qubit still entangled after measurement; indicates a wiring bug."""


def activation(a: complex) -> np.ndarray:
    """Single-qubit output state for an overlap ``a``; ``Re``/``Im`` are clamped to [-1, 1]."""
    gr = np.arccos(-np.clip(np.real(a), -1.0, 1.0))
    gi = np.arccos(-np.clip(np.imag(a), -1.0, 1.0))
    ph = np.pi / 4 - gi / 2
    return np.array([np.cos(gr / 2) * np.exp(1j * ph), np.sin(gr / 2) * np.exp(-1j * ph)])


def activation_batch(a: np.ndarray) -> np.ndarray:
    """Vectorised :func:`activation`; appends a trailing axis of length 2.

    Half-angle identities replace the trig calls:
    ``cos(arccos(-r)/2) = sqrt((1-r)/2)``, ``sin(arccos(-r)/2) = sqrt((1+r)/2)``.
    """
    a = np.asarray(a, dtype=complex)

    def half(v, sign):  # sqrt((1 + sign v) / 2) with v clamped to [-1, 1]
        return np.sqrt(np.clip(0.5 + sign * 0.5 * v, 0.0, 1.0))

    c, d = half(a.imag, -1), half(a.imag, 1)
    # e^{i(pi/4 - gi/2)} = e^{i pi/4} (c - i d)
    ph_re = (c + d) * _SQRT_HALF
    ph_im = (c - d) * _SQRT_HALF
    s0, s1 = half(a.real, -1), half(a.real, 1)
    out = np.empty(a.shape + (2,), dtype=complex)
    flat = out.view(float)
    flat[..., 0] = s0 * ph_re
    flat[..., 1] = s0 * ph_im
    flat[..., 2] = s1 * ph_re
    flat[..., 3] = -s1 * ph_im
    return out


_SQRT_HALF = np.sqrt(0.5)


def activation_from_angles(angle_r: float, angle_i: float) -> np.ndarray:
    """``R_Z(-pi/2) R_Z(angle_i) R_Y(angle_r) |0>``."""
    return ss.rz(-np.pi / 2) @ ss.rz(angle_i) @ ss.ry(angle_r) @ np.array([1, 0], dtype=complex)


def align_phase(ket: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """``ket`` times the global phase that brings it closest to ``ref``.

    A reduced density matrix drops the output qubit's global phase; the
    phase the rotations carry is restored from the gates actually applied.
    """
    ket = np.asarray(ket, dtype=complex)
    ov = np.vdot(ket, ref)
    if abs(ov) < 1e-15:
        return ket
    return ket * (ov / abs(ov))


def label_probability(d: np.ndarray) -> float:
    return float(abs(d[1]) ** 2)


@dataclass
class NeuronSpec:
    n: int
    t: int
    weight_angles: list[tuple[float, float, float]]

    def __post_init__(self):
        if self.n < 1 or self.t < 1:
            raise ss.ValidationError("n and t must be >= 1")
        if len(self.weight_angles) != self.n:
            raise ss.ValidationError(f"need {self.n} weight triples, got {len(self.weight_angles)}")
        two_pi = 2 * np.pi
        self.weight_angles = [tuple(float(v) % two_pi for v in tri) for tri in self.weight_angles]

    @property
    def prep(self) -> StatePrep:
        return StatePrep.from_angles(self.weight_angles)

    def weight_state(self) -> np.ndarray:
        out = np.array([1.0 + 0j])
        for tri in self.weight_angles:
            out = np.kron(out, st.product_ket(*tri))
        return out

    @property
    def num_qubits(self) -> int:
        return 2 * self.t + 2 * self.n + 3


def neuron_forward_exact(x: np.ndarray, spec: NeuronSpec) -> np.ndarray:
    return activation(st.exact_inner(x, spec.weight_state()))


# ---------------------------------------------------------------------------
# cascades
# ---------------------------------------------------------------------------

def _cascade_ops(rot, pe: Sequence[int], out: int) -> list[Op]:
    """X, ``rot(pi / 2^j)`` controlled by ``pe[j]``, then ``-X``; X and ``-X`` hang off the MSB."""
    msb = (pe[0], 1)
    ops = [Op(ss.X, out, (msb,))]
    ops += [Op(rot(np.pi / 2 ** j), out, ((c, 1),)) for j, c in enumerate(pe)]
    ops.append(Op(ss.NEG_X, out, (msb,)))
    return ops


def ry_cascade_ops(pe: Sequence[int], out: int) -> list[Op]:
    return _cascade_ops(ss.ry, pe, out)


def rz_cascade_ops(pe: Sequence[int], out: int) -> list[Op]:
    return _cascade_ops(ss.rz, pe, out)


def ry_cascade(state: StateVector, pe: Sequence[int], out: int) -> StateVector:
    return ss.apply_ops(state, ry_cascade_ops(pe, out))


def rz_cascade(state: StateVector, pe: Sequence[int], out: int) -> StateVector:
    return ss.apply_ops(state, rz_cascade_ops(pe, out))


def activation_ops(pe_r: Sequence[int], pe_i: Sequence[int], out: int) -> list[Op]:
    """Both cascades followed by ``R_Z(-pi/2)`` on ``out``."""
    return ry_cascade_ops(pe_r, out) + rz_cascade_ops(pe_i, out) + [Op(ss.rz(-np.pi / 2), out)]


# ---------------------------------------------------------------------------
# circuit
# ---------------------------------------------------------------------------

@dataclass
class NeuronTranscript:
    y_r: int
    y_i: int
    p_r: float
    p_i: float
    output: np.ndarray
    purity: float


@dataclass
class NeuronLayout:
    """Register map ``[pe_r (t) | phi_r (n+1) | out | pe_i (t) | phi_i (n+1)]``."""

    n: int
    t: int

    @property
    def pe_r(self) -> list[int]:
        return list(range(self.t))

    @property
    def phi_r(self) -> list[int]:
        return list(range(self.t, self.t + self.n + 1))

    @property
    def out(self) -> int:
        return self.t + self.n + 1

    @property
    def pe_i(self) -> list[int]:
        return list(range(self.out + 1, self.out + 1 + self.t))

    @property
    def phi_i(self) -> list[int]:
        start = self.out + 1 + self.t
        return list(range(start, start + self.n + 1))

    @property
    def num_qubits(self) -> int:
        return 2 * self.t + 2 * self.n + 3


def _psi_block(x: StatePrep, w: StatePrep, variant: str, t: int) -> StateVector:
    state, _ = st.phase_estimate(x, w, variant, t)
    return state


def neuron_state(x: StatePrep, spec: NeuronSpec, blockwise: bool = True) -> StateVector:
    """Full pre-measurement state of the general-case neuron circuit.

    With ``blockwise`` the real and imaginary swap-test blocks, which act on
    disjoint registers and start in a product state, are simulated on their
    own and joined by a tensor product before the cascades; otherwise every
    gate runs on the full register.  Both give the same state.
    """
    if x.num_qubits != spec.n:
        raise ss.ValidationError(f"input has {x.num_qubits} qubits, neuron expects {spec.n}")
    lay = NeuronLayout(spec.n, spec.t)
    if lay.num_qubits > ss.MAX_QUBITS:
        raise ss.CapacityError(
            f"neuron circuit needs {lay.num_qubits} qubits (2t+2n+3), cap is {ss.MAX_QUBITS}")
    w = spec.prep
    if blockwise:
        state = ss.kron(_psi_block(x, w, st.REAL, spec.t), ss.new_state(1),
                        _psi_block(x, w, st.IMAG, spec.t))
    else:
        state = ss.new_state(lay.num_qubits)
        for variant, pe, phi in ((st.REAL, lay.pe_r, lay.phi_r), (st.IMAG, lay.pe_i, lay.phi_i)):
            ss.apply_ops(state, st.phi_ops(x, w, variant, phi))
            st.run_phase_estimation(state, pe, st.g_ops(x, w, variant, phi))
    return ss.apply_ops(state, activation_ops(lay.pe_r, lay.pe_i, lay.out))


def neuron_forward_circuit(x: StatePrep, spec: NeuronSpec, rng: np.random.Generator,
                           blockwise: bool = True) -> NeuronTranscript:
    lay = NeuronLayout(spec.n, spec.t)
    state = neuron_state(x, spec, blockwise)
    y_r, p_r, _ = ss.measure_register(state, lay.pe_r, rng)
    y_i, p_i, _ = ss.measure_register(state, lay.pe_i, rng)
    ket, purity = ss.reduced_ket1(state, lay.out)
    if purity < 1 - PURITY_TOL:
        raise PurityError(f"output purity {purity:.12f} after measurement")
    out = align_phase(ket, ideal_output(y_r, y_i, spec.t))
    return NeuronTranscript(y_r, y_i, p_r, p_i, out, purity)


def ideal_output(y_r: int, y_i: int, t: int) -> np.ndarray:
    """Output ket the circuit writes for readouts ``(y_r, y_i)``."""
    scale = np.pi / 2 ** (t - 1)
    return activation_from_angles(st.fold(y_r, t) * scale, st.fold(y_i, t) * scale)
