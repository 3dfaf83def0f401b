"""Mean-square loss, finite-difference gradients and minibatch gradient descent.

Loss over ``q`` samples: ``(1/q) sum (2 - 2 Re<z^i|d^i>)``.  Training runs on
the exact forward pass; the hybrid estimator at the bottom shows how a
single neuron's weight derivative is obtained from swap-test readouts.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import neuron as nr
from . import statesim as ss
from . import swaptest as st
from .qnn import NetworkSpec, WeightParams, forward_batch, product_overlaps, weight_kets

log = logging.getLogger(__name__)

FD_STEP_RANGE = (1e-7, 1e-3)


@dataclass
class TrainConfig:
    lr: float = 0.5
    epochs: int = 30
    batch_size: int = 32
    decay: float = 0.5
    decay_every: int = 10
    init_trials: int = 16
    fd_step: float = 1e-5

    def __post_init__(self):
        if self.lr < 0:
            raise ss.ValidationError("learning rate must be non-negative")
        if not FD_STEP_RANGE[0] <= self.fd_step <= FD_STEP_RANGE[1]:
            raise ss.ValidationError(f"fd_step must lie in {FD_STEP_RANGE}")
        if self.batch_size < 1 or self.epochs < 0 or self.init_trials < 1:
            raise ss.ValidationError("batch_size and init_trials must be >= 1, epochs >= 0")


@dataclass
class Dataset:
    """Product-state inputs ``(q, p_0, 2)`` and product targets ``(q, s, 2)``."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=complex)
        self.targets = np.asarray(self.targets, dtype=complex)
        if len(self.inputs) != len(self.targets) or len(self.inputs) == 0:
            raise ss.ValidationError("dataset must be non-empty with one target per input")

    def __len__(self) -> int:
        return len(self.inputs)

    def subset(self, idx) -> "Dataset":
        return Dataset(self.inputs[idx], self.targets[idx])


@dataclass
class LossReport:
    loss: float
    overlaps: np.ndarray  # Re<z^i|d^i> per sample
    grad: Optional[np.ndarray] = None


def _check(net: NetworkSpec, batch: Dataset) -> None:
    if batch.inputs.shape[1:] != (net.widths[0], 2) or batch.targets.shape[1:] != (net.widths[-1], 2):
        raise ss.ValidationError(
            f"dataset shapes {batch.inputs.shape}/{batch.targets.shape} do not fit widths {net.widths}")


def re_overlaps(net: NetworkSpec, theta: np.ndarray, batch: Dataset) -> np.ndarray:
    """``Re<z^i|d^i>`` with ``shape theta.shape[:-1] + (q,)``; multi-qubit overlaps multiply."""
    z = forward_batch(net, theta, batch.inputs)
    return np.real(np.einsum("...bjc,bjc->...bj", z.conj(), batch.targets).prod(axis=-1))


def loss_values(net: NetworkSpec, theta: np.ndarray, batch: Dataset) -> np.ndarray:
    return np.mean(2.0 - 2.0 * re_overlaps(net, theta, batch), axis=-1)


def loss(net: NetworkSpec, weights: WeightParams, batch: Dataset,
         with_grad: bool = False, h: float = 1e-5) -> LossReport:
    _check(net, batch)
    ov = re_overlaps(net, weights.theta, batch)
    rep = LossReport(float(np.mean(2.0 - 2.0 * ov)), ov)
    if with_grad:
        rep.grad = grad_fd(net, weights, batch, h)
    return rep


def grad_fd(net: NetworkSpec, weights: WeightParams, batch: Dataset, h: float = 1e-5) -> np.ndarray:
    """Central differences ``(L(theta + h e_l) - L(theta - h e_l)) / 2h`` for every ``l``.

    A probe on layer ``k`` leaves layers ``< k`` and every other neuron of
    layer ``k`` untouched, so those are computed once and the changed
    neuron's overlap is rebuilt from exclusive products of the rest.
    """
    _check_step(h)
    _check(net, batch)
    theta = weights.theta
    layers = forward_batch(net, theta, batch.inputs, keep_layers=True)
    kets = [weight_kets(theta[sl].reshape(shape)) for sl, shape in net.layer_slices()]
    grad = np.empty(theta.size)
    for k, (sl, shape) in enumerate(net.layer_slices()):
        p_out, p_in, _ = shape
        j, i, a = (g.ravel() for g in np.indices(shape))
        angles = np.repeat(theta[sl].reshape(shape)[j, i][:, None, :], 2, axis=1)
        n = len(j)
        angles[np.arange(n), 0, a] += h
        angles[np.arange(n), 1, a] -= h
        w_new = weight_kets(angles.reshape(2 * n, 3))          # (P, 2)
        jj, ii = np.repeat(j, 2), np.repeat(i, 2)
        z_prev = layers[k]                                      # (B, p_in, 2)
        o = np.einsum("bic,jic->bji", z_prev.conj(), kets[k])   # (B, p_out, p_in)
        excl = _exclusive_prod(o)
        o_new = np.einsum("bpc,pc->pb", z_prev[:, ii].conj(), w_new)
        z_new = nr.activation_batch(excl[:, jj, ii].T * o_new)  # (P, B, 2)
        vals = _loss_after_change(net, theta, kets, layers, batch, k, jj, z_new)
        grad[sl] = (vals[0::2] - vals[1::2]) / (2 * h)
    return grad


def grad_fd_full(net: NetworkSpec, weights: WeightParams, batch: Dataset, h: float = 1e-5,
                 chunk: int = 128) -> np.ndarray:
    """Same central differences, each probe re-running the whole forward pass."""
    _check_step(h)
    _check(net, batch)
    theta = weights.theta
    n = theta.size
    grad = np.empty(n)
    for start in range(0, n, chunk):
        idx = np.arange(start, min(n, start + chunk))
        probes = np.repeat(theta[None], 2 * len(idx), axis=0)
        probes[2 * np.arange(len(idx)), idx] += h
        probes[2 * np.arange(len(idx)) + 1, idx] -= h
        vals = loss_values(net, probes, batch)
        grad[idx] = (vals[0::2] - vals[1::2]) / (2 * h)
    return grad


def _check_step(h: float) -> None:
    if not FD_STEP_RANGE[0] <= h <= FD_STEP_RANGE[1]:
        raise ss.ValidationError(f"h must lie in {FD_STEP_RANGE}")


def _exclusive_prod(o: np.ndarray) -> np.ndarray:
    """``out[..., i] = prod_{i' != i} o[..., i']`` without division."""
    ones = np.ones(o.shape[:-1] + (1,), dtype=o.dtype)
    pre = np.concatenate([ones, np.cumprod(o, axis=-1)[..., :-1]], axis=-1)
    suf = np.cumprod(o[..., ::-1], axis=-1)[..., ::-1]
    suf = np.concatenate([suf[..., 1:], ones], axis=-1)
    return pre * suf


def _loss_after_change(net, theta, kets, layers, batch, k, jj, z_new) -> np.ndarray:
    """Per-probe loss when neuron ``jj[p]`` of layer ``k + 1`` outputs ``z_new[p]``."""
    last = len(kets) - 1
    z_k = layers[k + 1]
    if k == last:
        ov = np.einsum("bjc,bjc->bj", z_k.conj(), batch.targets)
        excl = _exclusive_prod(ov)[:, jj].T                          # (P, B)
        mine = np.einsum("pbc,pbc->pb", z_new.conj(), batch.targets[:, jj].transpose(1, 0, 2))
        return np.mean(2.0 - 2.0 * np.real(excl * mine), axis=-1)
    w_next = kets[k + 1]                                             # (q, p_k, 2)
    o = np.einsum("bic,jic->bji", z_k.conj(), w_next)
    excl = _exclusive_prod(o)[:, :, jj].transpose(2, 0, 1)           # (P, B, q)
    o_new = np.einsum("pbc,jpc->pbj", z_new.conj(), w_next[:, jj])
    z = nr.activation_batch(excl * o_new)
    for sl, shape in net.layer_slices()[k + 2:]:
        w = weight_kets(theta[sl].reshape(shape))
        z = nr.activation_batch(product_overlaps(z, w))
    ov = np.real(np.einsum("...bjc,bjc->...bj", z.conj(), batch.targets).prod(axis=-1))
    return np.mean(2.0 - 2.0 * ov, axis=-1)


def init_search(net: NetworkSpec, batch: Dataset, trials: int,
                rng: np.random.Generator) -> WeightParams:
    """Best of ``trials`` uniform draws on ``[0, 2 pi)^L`` (first wins ties)."""
    if trials < 1:
        raise ss.ValidationError("trials must be >= 1")
    cands = rng.uniform(0.0, 2 * np.pi, size=(trials, net.num_params))
    vals = loss_values(net, cands, batch)
    return WeightParams(net, cands[int(np.argmin(vals))])


@dataclass
class CurvePoint:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float


@dataclass
class TrainResult:
    weights: WeightParams
    curve: list[CurvePoint] = field(default_factory=list)


def accuracy(net: NetworkSpec, theta: np.ndarray, data: Dataset) -> float:
    z = forward_batch(net, theta, data.inputs)
    pred = (np.abs(z[..., 1]) ** 2 >= 0.5).astype(int)
    want = (np.abs(data.targets[..., 1]) ** 2 >= 0.5).astype(int)
    return float(np.mean(np.all(pred == want, axis=-1)))


def sgd_train(net: NetworkSpec, config: TrainConfig, train: Dataset, rng: np.random.Generator,
              val: Optional[Dataset] = None, init: Optional[WeightParams] = None) -> TrainResult:
    """Initial-value search, then shuffled minibatch descent with step decay.

    The curve has one point per epoch (epoch 0 is the initial weights).
    """
    _check(net, train)
    val = train if val is None else val
    weights = init if init is not None else init_search(net, train, config.init_trials, rng)
    theta = weights.theta.copy()

    def point(epoch):
        return CurvePoint(epoch, float(loss_values(net, theta, train)),
                          float(loss_values(net, theta, val)), accuracy(net, theta, val))

    res = TrainResult(WeightParams(net, theta), [point(0)])
    lr = config.lr
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(train))
        for start in range(0, len(order), config.batch_size):
            batch = train.subset(order[start:start + config.batch_size])
            g = grad_fd(net, WeightParams(net, theta), batch, config.fd_step)
            theta = theta - lr * g
        res.curve.append(point(epoch))
        log.info("epoch %d lr %.4g train %.5f val %.5f acc %.4f", epoch, lr,
                 res.curve[-1].train_loss, res.curve[-1].val_loss, res.curve[-1].val_accuracy)
        if config.decay_every and epoch % config.decay_every == 0:
            lr *= config.decay
    res.weights = WeightParams(net, theta)
    return res


# ---------------------------------------------------------------------------
# hybrid gradient for one neuron
# ---------------------------------------------------------------------------

_GENERATORS = {0: ss.Y, 1: ss.Z, 2: ss.I2}  # beta, gamma, delta


def derivative_prep(spec: nr.NeuronSpec, param: int) -> tuple[st.StatePrep, complex]:
    """Weight preparation with the rotation generator inserted after the differentiated gate.

    Returns ``(prep, c)`` with ``d|w>/d theta_param = c * prep|0>``: ``-i/2`` with
    ``Y`` or ``Z`` for ``beta``/``gamma``, and ``i`` with the identity for ``delta``.
    """
    qubit, kind = divmod(param, 3)
    if not 0 <= qubit < spec.n:
        raise ss.ValidationError(f"parameter index {param} out of range")
    ops = list(spec.prep.ops)
    pos = 3 * qubit + kind + 1
    ops.insert(pos, ss.Op(_GENERATORS[kind], qubit))
    coef = 1j if kind == 2 else -0.5j
    return st.StatePrep(spec.n, ops), coef


def activation_partials(a: complex) -> tuple[np.ndarray, np.ndarray]:
    """``d f / d Re a`` and ``d f / d Im a`` from the rotation form of ``f``."""
    re = float(np.clip(np.real(a), -1 + 1e-12, 1 - 1e-12))
    im = float(np.clip(np.imag(a), -1 + 1e-12, 1 - 1e-12))
    gr, gi = np.arccos(-re), np.arccos(-im)
    zero = np.array([1, 0], dtype=complex)
    rz_pre = ss.rz(-np.pi / 2)
    d_re = rz_pre @ ss.rz(gi) @ (-0.5j * ss.Y) @ ss.ry(gr) @ zero / np.sqrt(1 - re * re)
    d_im = rz_pre @ (-0.5j * ss.Z) @ ss.rz(gi) @ ss.ry(gr) @ zero / np.sqrt(1 - im * im)
    return d_re, d_im


def hybrid_grad_neuron(spec: nr.NeuronSpec, x: st.StatePrep, target: np.ndarray, param: int,
                       t: Optional[int] = None, shots: Optional[int] = None,
                       rng: Optional[np.random.Generator] = None) -> float:
    """Estimate ``d Re<d|z> / d theta_param`` for one neuron from swap-test readouts.

    Two swap tests run: one on ``<x|w>`` and one on ``<x|w_p>`` where ``w_p``
    carries the inserted generator.  The chain rule through ``f`` is
    classical.  ``shots=None`` uses the modal readout (no sampling).
    """
    t = spec.t if t is None else t
    if t > 7 or t + spec.n + 1 > ss.MAX_QUBITS:
        raise ss.CapacityError("hybrid gradient supports t <= 7")
    a_est = st.estimate_inner(x, spec.prep, t, shots, rng)
    dprep, coef = derivative_prep(spec, param)
    p_est = st.estimate_inner(x, dprep, t, shots, rng)
    a = complex(a_est.re, a_est.im)
    da = coef * complex(p_est.re, p_est.im)
    d_re, d_im = activation_partials(a)
    dz = d_re * da.real + d_im * da.imag
    return float(np.real(np.vdot(np.asarray(target, dtype=complex), dz)))


def exact_neuron_overlap(spec_angles: np.ndarray, x: np.ndarray, target: np.ndarray) -> float:
    """``Re<d|f(<x|w>)>`` for a single neuron given flat weight angles."""
    spec = nr.NeuronSpec(len(spec_angles) // 3, 1, [tuple(v) for v in np.reshape(spec_angles, (-1, 3))])
    z = nr.neuron_forward_exact(x, spec)
    return float(np.real(np.vdot(target, z)))
