"""Feed-forward network of quantum neurons.

Every weight edge ``(k, j, i)`` is a single-qubit state
``e^{i delta} R_Z(gamma) R_Y(beta) |0>``.  The flat parameter vector runs
layer-major, then target neuron, then source neuron, then
``(beta, gamma, delta)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import neuron as nr
from . import statesim as ss
from . import swaptest as st
from .statesim import Op, StateVector
from .swaptest import StatePrep

FLATTEN_ORDER = "layer-target-source-angle/v1"


@dataclass(frozen=True)
class NetworkSpec:
    widths: tuple[int, ...]
    t: int = 2

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(p) for p in self.widths))
        if len(self.widths) < 2 or min(self.widths) < 1:
            raise ss.ValidationError(f"bad layer widths {self.widths}")

    @property
    def num_layers(self) -> int:
        return len(self.widths) - 1

    @property
    def num_params(self) -> int:
        return 3 * sum(a * b for a, b in zip(self.widths[:-1], self.widths[1:]))

    def layer_slices(self) -> list[tuple[slice, tuple[int, int, int]]]:
        out, start = [], 0
        for src, dst in zip(self.widths[:-1], self.widths[1:]):
            size = 3 * src * dst
            out.append((slice(start, start + size), (dst, src, 3)))
            start += size
        return out


@dataclass
class WeightParams:
    net: NetworkSpec
    theta: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        if self.theta.shape != (self.net.num_params,):
            raise ss.ValidationError(
                f"expected {self.net.num_params} parameters, got {self.theta.shape}")

    def layer(self, k: int) -> np.ndarray:
        """Angles of layer ``k`` (1-based), shape ``(p_k, p_{k-1}, 3)``."""
        sl, shape = self.net.layer_slices()[k - 1]
        return self.theta[sl].reshape(shape)

    def weight_prep(self, k: int, j: int) -> StatePrep:
        return StatePrep.from_angles(self.layer(k)[j])

    @classmethod
    def random(cls, net: NetworkSpec, rng: np.random.Generator) -> "WeightParams":
        return cls(net, rng.uniform(0.0, 2 * np.pi, net.num_params))


def weight_kets(angles: np.ndarray) -> np.ndarray:
    """``(..., 3)`` angle triples to ``(..., 2)`` kets."""
    beta, gamma, delta = angles[..., 0], angles[..., 1], angles[..., 2]
    e = np.exp(1j * delta)
    return np.stack([e * np.exp(-0.5j * gamma) * np.cos(beta / 2),
                     e * np.exp(0.5j * gamma) * np.sin(beta / 2)], axis=-1)


def product_overlaps(z: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``<z|w_j>`` for product states as the product of per-qubit overlaps.

    ``z``: ``(..., B, p, 2)``; ``w``: ``(..., q, p, 2)``; result ``(..., B, q)``.
    """
    per_qubit = np.einsum("...bic,...jic->...bji", z.conj(), w)
    return per_qubit.prod(axis=-1)


def forward_batch(net: NetworkSpec, theta: np.ndarray, inputs: np.ndarray,
                  keep_layers: bool = False):
    """Exact forward pass, vectorised over samples and parameter vectors.

    ``theta``: ``(..., L)``; ``inputs``: ``(B, p_0, 2)``.  Returns the output
    layer ``(..., B, p_K, 2)``, or every layer if ``keep_layers``.
    """
    theta = np.asarray(theta, dtype=float)
    lead = theta.shape[:-1]
    z = np.broadcast_to(inputs, lead + inputs.shape)
    layers = [z]
    for sl, shape in net.layer_slices():
        w = weight_kets(theta[..., sl].reshape(lead + shape))
        z = nr.activation_batch(product_overlaps(z, w))
        layers.append(z)
    return layers if keep_layers else z


def forward_exact(net: NetworkSpec, weights: WeightParams,
                  inputs: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Layer states ``[z^(0), ..., z^(K)]``, each of shape ``(p_k, 2)``."""
    inputs = np.asarray(inputs, dtype=complex)
    if inputs.shape != (net.widths[0], 2):
        raise ss.ValidationError(
            f"expected {net.widths[0]} input kets, got array of shape {inputs.shape}")
    layers = forward_batch(net, weights.theta, inputs[None], keep_layers=True)
    return [z[0] for z in layers]


def forward_dense_input(net: NetworkSpec, weights: WeightParams, x: np.ndarray) -> list[np.ndarray]:
    """Like :func:`forward_exact` but the input is a (possibly entangled) ``2^p_0`` vector.

    Only the first layer sees the dense vector; hidden outputs are single-qubit
    states, so deeper layers run the product path.
    """
    x = np.asarray(x, dtype=complex)
    if x.shape != (1 << net.widths[0],):
        raise ss.ValidationError(f"dense input must have {1 << net.widths[0]} amplitudes")
    w1 = weights.layer(1)
    z = np.array([nr.activation(st.exact_inner(x, dense_product(weight_kets(w1[j]))))
                  for j in range(net.widths[1])])
    layers = [x, z]
    for k in range(2, net.num_layers + 1):
        w = weight_kets(weights.layer(k))
        z = nr.activation_batch(product_overlaps(z[None], w))[0]
        layers.append(z)
    return layers


def dense_product(kets: np.ndarray) -> np.ndarray:
    out = np.array([1.0 + 0j])
    for k in kets:
        out = np.kron(out, k)
    return out


def predict_label(out: np.ndarray) -> int:
    """1 iff ``|a1|^2 >= 1/2``."""
    return int(abs(out[-1]) ** 2 >= 0.5)


def predict_labels(outs: np.ndarray) -> np.ndarray:
    return (np.abs(outs[..., 1]) ** 2 >= 0.5).astype(int)


# ---------------------------------------------------------------------------
# model files
# ---------------------------------------------------------------------------

def save_model(path, weights: WeightParams) -> None:
    lines = ["# qswapnet model", f"order {FLATTEN_ORDER}",
             "widths " + " ".join(str(p) for p in weights.net.widths),
             f"t {weights.net.t}", f"params {weights.net.num_params}"]
    lines += [format(float(v), ".17g") for v in weights.theta]
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path) -> WeightParams:
    header, values = {}, []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, rest = line.partition(" ")
        if key in ("order", "widths", "t", "params"):
            header[key] = rest
        else:
            values.append(float(line))
    if header.get("order") != FLATTEN_ORDER:
        raise ss.ValidationError(f"unsupported flattening order {header.get('order')!r}")
    net = NetworkSpec(tuple(int(p) for p in header["widths"].split()), int(header.get("t", 2)))
    if int(header["params"]) != len(values):
        raise ss.ValidationError("parameter count does not match header")
    return WeightParams(net, np.array(values))


# ---------------------------------------------------------------------------
# circuit-faithful 2-2-1
# ---------------------------------------------------------------------------

@dataclass
class Layout221:
    """Registers of the 2-2-1 circuit, top to bottom.

    Each first-layer swap-test register is held as a one-qubit purifier: it
    is idle after its phase estimation and only ever spans ``|w_+>, |w_->``.
    """

    t: int

    def __post_init__(self):
        t, k = self.t, 0

        def take(size):
            nonlocal k
            out = list(range(k, k + size))
            k += size
            return out

        self.pe2r, (self.anc2r,), self.reg2r = take(t), take(1), take(2)
        self.pe1, self.pur1 = {}, {}
        for key in ("r0", "i0", "r1", "i1"):
            self.pe1[key], (self.pur1[key],) = take(t), take(1)
        self.reg2i, (self.anc2i,), self.pe2i = take(2), take(1), take(t)
        (self.out,) = take(1)
        self.num_qubits = k


def circuit_221_qubits(t: int) -> int:
    return 6 * t + 11


def compress_purifier(state: StateVector, keep: int, tol: float = 1e-10) -> StateVector:
    """Replace all qubits after the first ``keep`` with a one-qubit purifier.

    Valid when the Schmidt rank across the cut is at most two; the isometry
    acts only on the discarded register, so reduced states are unchanged.
    """
    block = state.amps.reshape(1 << keep, -1)
    u, s, _ = np.linalg.svd(block, full_matrices=False)
    if s.size > 2 and s[2] > tol:
        raise ss.ValidationError(f"Schmidt rank exceeds 2 (s[2]={s[2]:.3g})")
    cols = np.zeros((block.shape[0], 2), dtype=complex)
    r = min(2, s.size)
    cols[:, :r] = u[:, :r] * s[:r]
    return StateVector(keep + 1, cols.ravel())


def _first_layer_synthesis(lay: Layout221, reg: Sequence[int]) -> list[Op]:
    ops = []
    for j in range(2):
        ops += nr.activation_ops(lay.pe1[f"r{j}"], lay.pe1[f"i{j}"], reg[j])
    return ops


def _phi2_ops(lay: Layout221, w2: StatePrep, variant: str, anc: int, reg: Sequence[int]) -> list[Op]:
    """Layer-2 ``U_phi``: the open-controlled branch re-synthesises the layer-1 outputs."""
    ops = [Op(ss.H, anc)]
    ops += ss.controlled(w2.on(reg), [(anc, 1)])
    ops += ss.controlled(_first_layer_synthesis(lay, reg), [(anc, 0)])
    if variant == st.IMAG:
        ops.append(Op(ss.SDG, anc))
    ops.append(Op(ss.H, anc))
    return ops


def _g2_ops(lay, w2, variant, anc, reg) -> list[Op]:
    u = _phi2_ops(lay, w2, variant, anc, reg)
    regs = [anc] + list(reg)
    return [Op(ss.Z, anc)] + ss.adjoint(u) + st.reflection_ops(regs) + u


@dataclass
class Circuit221Result:
    output: np.ndarray
    purity: float
    transcript: list[tuple[str, int, float]]


def circuit_221_state(weights: WeightParams, inputs: Sequence[StatePrep], t: int) -> tuple[StateVector, Layout221]:
    if weights.net.widths != (2, 2, 1):
        raise ss.ValidationError("circuit mode is only defined for a 2-2-1 network")
    q = circuit_221_qubits(t)
    if q > ss.MAX_QUBITS:
        raise ss.CapacityError(f"2-2-1 circuit needs {q} qubits (6t+11), cap is {ss.MAX_QUBITS}")
    if len(inputs) != 2 or any(p.num_qubits != 1 for p in inputs):
        raise ss.ValidationError("need two single-qubit input preparations")
    lay = Layout221(t)
    x = StatePrep(2, inputs[0].ops + ss.remap(inputs[1].ops, [1]))

    blocks = [ss.new_state(t + 3)]  # pe2r, anc2r, reg2r
    for key in ("r0", "i0", "r1", "i1"):
        variant = st.REAL if key[0] == "r" else st.IMAG
        psi, _ = st.phase_estimate(x, weights.weight_prep(1, int(key[1])), variant, t)
        blocks.append(compress_purifier(psi, t))
    blocks += [ss.new_state(t + 3), ss.new_state(1)]  # reg2i, anc2i, pe2i; out
    state = ss.kron(*blocks)

    w2 = weights.weight_prep(2, 0)
    for variant, pe, anc, reg in ((st.REAL, lay.pe2r, lay.anc2r, lay.reg2r),
                                  (st.IMAG, lay.pe2i, lay.anc2i, lay.reg2i)):
        ss.apply_ops(state, _phi2_ops(lay, w2, variant, anc, reg))
        st.run_phase_estimation(state, pe, _g2_ops(lay, w2, variant, anc, reg))
    ss.apply_ops(state, nr.activation_ops(lay.pe2r, lay.pe2i, lay.out))
    return state, lay


def forward_circuit_221(weights: WeightParams, inputs: Sequence[StatePrep], t: int,
                        rng: np.random.Generator) -> Circuit221Result:
    """Deferred-measurement 2-2-1 circuit; every meter fires after the last gate."""
    state, lay = circuit_221_state(weights, inputs, t)
    transcript = []
    regs = [(f"layer1_{k}", lay.pe1[k]) for k in ("r0", "i0", "r1", "i1")]
    regs += [("layer2_r0", lay.pe2r), ("layer2_i0", lay.pe2i)]
    for name, reg in regs:
        y, p, _ = ss.measure_register(state, reg, rng)
        transcript.append((name, y, p))
    ket, purity = ss.reduced_ket1(state, lay.out)
    if purity < 1 - nr.PURITY_TOL:
        raise nr.PurityError(f"output purity {purity:.12f} after measurement")
    y_r, y_i = transcript[-2][1], transcript[-1][1]
    return Circuit221Result(nr.align_phase(ket, nr.ideal_output(y_r, y_i, t)), purity, transcript)
