"""Checkerboard benchmark and numerical checks of the error bounds.

Every randomised check draws one child ``SeedSequence`` per trial, so the
outcome of trial ``k`` does not depend on how trials are spread over
worker processes.

The end-to-end precision formula for deep networks asks for phase
registers far past the simulator cap, so :func:`verify_error_recursion`
checks the layer-by-layer recursion that formula is built from instead.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import binomtest

from . import neuron as nr
from . import qnn
from . import statesim as ss
from . import swaptest as st
from . import train as tr

SLACK = 0.05


# ---------------------------------------------------------------------------
# parallel trials
# ---------------------------------------------------------------------------

def trial_seeds(rng: np.random.Generator, trials: int) -> list[np.random.SeedSequence]:
    """Independent child streams derived from one draw of ``rng``."""
    root = np.random.SeedSequence(int(rng.integers(0, 2 ** 63)))
    return root.spawn(trials)


def map_trials(fn: Callable, seeds: Sequence, workers: int = 1) -> list:
    """``[fn(s) for s in seeds]``, optionally across processes; order is preserved."""
    if workers <= 1 or len(seeds) <= 1:
        return [fn(s) for s in seeds]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, seeds, chunksize=max(1, len(seeds) // (4 * workers))))


def haar_ket(rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    return v / np.linalg.norm(v)


def random_product(n: int, rng: np.random.Generator) -> st.StatePrep:
    return st.StatePrep.from_kets([haar_ket(rng) for _ in range(n)])


# ---------------------------------------------------------------------------
# checkerboard
# ---------------------------------------------------------------------------

@dataclass
class CheckerSample:
    theta1: float
    theta2: float
    label: int


def checker_label(theta1, theta2):
    """0 on ``[0,pi)^2`` and ``[pi,2pi)^2``, 1 on the off-diagonal cells."""
    return ((np.asarray(theta1) >= np.pi) != (np.asarray(theta2) >= np.pi)).astype(int)


@dataclass
class CheckerSet:
    thetas: np.ndarray  # (count, 2)
    labels: np.ndarray  # (count,)

    def __len__(self) -> int:
        return len(self.labels)

    def samples(self) -> list[CheckerSample]:
        return [CheckerSample(float(a), float(b), int(c))
                for (a, b), c in zip(self.thetas, self.labels)]

    def dataset(self) -> tr.Dataset:
        """Inputs ``R_Y(t1)|0> (x) R_Y(t2)|0>``, targets ``|label>``."""
        half = self.thetas / 2
        inputs = np.stack([np.cos(half), np.sin(half)], axis=-1).astype(complex)
        targets = np.zeros((len(self), 1, 2), dtype=complex)
        targets[np.arange(len(self)), 0, self.labels] = 1.0
        return tr.Dataset(inputs, targets)


def gen_checkerboard(count: int, rng: np.random.Generator) -> CheckerSet:
    if count < 1:
        raise ss.ValidationError("count must be >= 1")
    thetas = rng.uniform(0.0, 2 * np.pi, size=(count, 2))
    return CheckerSet(thetas, checker_label(thetas[:, 0], thetas[:, 1]))


CHECKER_WIDTHS = (2, 8, 8, 1)


@dataclass
class CheckerConfig:
    train_size: int = 20_000
    test_size: int = 2_000
    train: tr.TrainConfig = field(default_factory=tr.TrainConfig)

    @classmethod
    def full_scale(cls, **kw) -> "CheckerConfig":
        return cls(train_size=100_000, test_size=10_000, **kw)


@dataclass
class CheckerResult:
    weights: qnn.WeightParams
    curve: list[tr.CurvePoint]
    test: CheckerSet
    predicted: np.ndarray
    accuracy: float
    interval: tuple[float, float]
    final_loss: float


def wilson_interval(successes: int, total: int, level: float = 0.95) -> tuple[float, float]:
    ci = binomtest(int(successes), int(total)).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


def evaluate_checkerboard(weights: qnn.WeightParams, test: CheckerSet) -> tuple[np.ndarray, float, tuple]:
    out = qnn.forward_batch(weights.net, weights.theta, test.dataset().inputs)
    pred = qnn.predict_labels(out[:, 0])
    hits = int(np.sum(pred == test.labels))
    return pred, hits / len(test), wilson_interval(hits, len(test))


def run_checkerboard(config: CheckerConfig, rng: np.random.Generator) -> CheckerResult:
    """Train a 2-8-8-1 network and score it on a held-out set.

    The curve's validation columns are measured on the test set; nothing
    is selected on them.
    """
    net = qnn.NetworkSpec(CHECKER_WIDTHS)
    train_set = gen_checkerboard(config.train_size, rng)
    test_set = gen_checkerboard(config.test_size, rng)
    res = tr.sgd_train(net, config.train, train_set.dataset(), rng, val=test_set.dataset())
    pred, acc, ci = evaluate_checkerboard(res.weights, test_set)
    return CheckerResult(res.weights, res.curve, test_set, pred, acc, ci, res.curve[-1].train_loss)


# ---------------------------------------------------------------------------
# single-neuron precision
# ---------------------------------------------------------------------------

def precision_qubits(m: int, sigma: float) -> int:
    """Phase register size for precision ``pi/2^(m-1)`` with failure rate ``sigma``."""
    if m < 1 or not 0 < sigma < 1:
        raise ss.ValidationError("need m >= 1 and 0 < sigma < 1")
    return m + math.ceil(math.log2(2 + 1 / sigma))


@dataclass
class BoundReport:
    n: int
    m: int
    sigma: float
    t: int
    trials: int
    frequency: float
    max_distance: float
    bound: float
    threshold: float
    passed: bool
    distances: list[float] = field(default_factory=list)


def _theorem1_trial(seed, n: int, t: int) -> float:
    rng = np.random.default_rng(seed)
    x = random_product(n, rng)
    w_angles = [st.ket_angles(haar_ket(rng)) for _ in range(n)]
    spec = nr.NeuronSpec(n, t, w_angles)
    got = nr.neuron_forward_circuit(x, spec, rng).output
    want = nr.neuron_forward_exact(x.state(), spec)
    return ss.norm_dist(got, want)


def verify_theorem1(n: int, m: int, sigma: float, trials: int, rng: np.random.Generator,
                    workers: int = 1) -> BoundReport:
    """Frequency of circuit-vs-exact distance within ``pi/2^(m-1)`` over random pairs."""
    if trials < 100:
        raise ss.ValidationError("trials must be >= 100")
    t = precision_qubits(m, sigma)
    if 2 * t + 2 * n + 3 > ss.MAX_QUBITS:
        raise ss.CapacityError(f"neuron circuit needs {2 * t + 2 * n + 3} qubits")
    dists = map_trials(partial(_theorem1_trial, n=n, t=t), trial_seeds(rng, trials), workers)
    bound = np.pi / 2 ** (m - 1)
    freq = float(np.mean(np.asarray(dists) <= bound))
    threshold = 1 - sigma - SLACK
    return BoundReport(n, m, sigma, t, trials, freq, float(max(dists)), bound, threshold,
                       freq >= threshold, [float(d) for d in dists])


# ---------------------------------------------------------------------------
# perturbation bounds
# ---------------------------------------------------------------------------

def perturb_ket(x: np.ndarray, dist: float, rng: np.random.Generator) -> np.ndarray:
    """A unit ket exactly ``dist`` (<= 2) away from ``x``, in a random direction."""
    perp = np.array([-np.conj(x[1]), np.conj(x[0])])
    s = 2 * np.arcsin(min(dist, 2.0) / 2)
    chi = rng.uniform(0, 2 * np.pi)
    return np.cos(s) * x + np.sin(s) * np.exp(1j * chi) * perp


def arccos_neg(y):
    return np.arccos(-np.clip(y, -1.0, 1.0))


@dataclass
class Lemma3Report:
    trials: int
    violations: dict[str, int]
    worst_ratio: dict[str, float]  # largest observed / bound per part
    passed: bool


def _lemma3_trial(seed) -> tuple[tuple[bool, float], ...]:
    rng = np.random.default_rng(seed)
    tol = 1e-12
    # part 1: per-qubit perturbation <= eps gives product perturbation <= n eps
    n = int(rng.integers(1, 6))
    eps = float(rng.uniform(0, 0.5))
    xs = [haar_ket(rng) for _ in range(n)]
    xt = [perturb_ket(x, eps * rng.uniform(), rng) for x in xs]
    d1 = ss.norm_dist(qnn.dense_product(np.array(xs)), qnn.dense_product(np.array(xt)))
    p1 = (d1 <= n * eps + tol, d1 / (n * eps) if eps > 0 else 0.0)
    # part 2: |g(y1) - g(y2)| <= pi sqrt(delta) / sqrt 2
    y1, y2 = rng.uniform(-1, 1, size=2)
    if rng.random() < 0.1:  # endpoints, where the bound is tight
        y2 = float(np.sign(y1)) if y1 else 1.0
    delta = abs(y1 - y2)
    g = abs(arccos_neg(y1) - arccos_neg(y2))
    b2 = np.pi * np.sqrt(delta) / np.sqrt(2)
    p2 = (g <= b2 + tol, g / b2 if b2 > 0 else 0.0)
    # part 3: activation of a perturbed input with angle errors <= pi/2^m
    m = int(rng.integers(1, 11))
    w = np.array([haar_ket(rng) for _ in range(n)])
    a = complex(np.vdot(qnn.dense_product(np.array(xs)), qnn.dense_product(w)))
    at = complex(np.vdot(qnn.dense_product(np.array(xt)), qnn.dense_product(w)))
    err = np.pi / 2 ** m
    gr = np.clip(arccos_neg(at.real) + rng.uniform(-err, err), 0, np.pi)
    gi = np.clip(arccos_neg(at.imag) + rng.uniform(-err, err), 0, np.pi)
    d3 = ss.norm_dist(nr.activation_from_angles(gr, gi), nr.activation(a))
    b3 = np.pi / 2 ** (m - 1) + np.pi * np.sqrt(n * eps) / np.sqrt(2)
    p3 = (d3 <= b3 + tol, d3 / b3)
    return p1, p2, p3


def verify_lemma3(trials: int, rng: np.random.Generator, workers: int = 1) -> Lemma3Report:
    """Random checks of the three perturbation bounds; passes with zero violations."""
    if trials < 1000:
        raise ss.ValidationError("trials must be >= 1000")
    results = map_trials(_lemma3_trial, trial_seeds(rng, trials), workers)
    names = ("product", "arccos", "activation")
    viol = {k: int(sum(not r[i][0] for r in results)) for i, k in enumerate(names)}
    worst = {k: float(max(r[i][1] for r in results)) for i, k in enumerate(names)}
    return Lemma3Report(trials, viol, worst, all(v == 0 for v in viol.values()))


# ---------------------------------------------------------------------------
# layered error recursion
# ---------------------------------------------------------------------------

@dataclass
class ErrorRecursionReport:
    widths: tuple[int, ...]
    m: int
    step: float                        # pi / 2^(m-1), the modelled per-neuron error
    trials: int
    injected: list[float]              # per layer
    predicted: list[list[float]]       # [trial][layer]
    observed: list[list[float]]        # layer product-state distance
    observed_qubit: list[list[float]]  # largest single-neuron distance
    violations: int
    passed: bool


def perturbed_forward(net: qnn.NetworkSpec, weights: qnn.WeightParams, x: np.ndarray,
                      err: float, rng: Optional[np.random.Generator]) -> list[np.ndarray]:
    """Exact forward where each neuron's two rotation angles are off by up to ``err``."""
    z = np.asarray(x, dtype=complex)
    layers = [z]
    for k in range(1, net.num_layers + 1):
        w = qnn.weight_kets(weights.layer(k))
        a = qnn.product_overlaps(z[None], w)[0]
        gr, gi = arccos_neg(a.real), arccos_neg(a.imag)
        if rng is not None and err > 0:
            gr = np.clip(gr + rng.uniform(-err, err, size=gr.shape), 0, np.pi)
            gi = np.clip(gi + rng.uniform(-err, err, size=gi.shape), 0, np.pi)
        z = np.array([nr.activation_from_angles(r, i) for r, i in zip(gr, gi)])
        layers.append(z)
    return layers


def _recursion_trial(seed, widths, m) -> tuple[list, list, list]:
    rng = np.random.default_rng(seed)
    net = qnn.NetworkSpec(widths)
    weights = qnn.WeightParams.random(net, rng)
    x = np.array([haar_ket(rng) for _ in range(widths[0])])
    exact = qnn.forward_exact(net, weights, x)
    step = np.pi / 2 ** (m - 1)
    noisy = perturbed_forward(net, weights, x, step, rng)
    pred, obs, obs_q = [], [], []
    prev = 0.0
    for k in range(1, net.num_layers + 1):
        pred.append(widths[k] * (step + np.pi * np.sqrt(widths[k - 1] * prev) / np.sqrt(2)))
        obs.append(ss.norm_dist(qnn.dense_product(noisy[k]), qnn.dense_product(exact[k])))
        prev = float(max(ss.norm_dist(a, b) for a, b in zip(noisy[k], exact[k])))
        obs_q.append(prev)
    return pred, obs, obs_q


def verify_error_recursion(widths: Sequence[int], m: int, trials: int, rng: np.random.Generator,
                           workers: int = 1) -> ErrorRecursionReport:
    """Propagate bounded angle errors through random networks and check each layer's bound.

    Layer ``k`` is allowed ``p_k (e + pi sqrt(p_{k-1} q_{k-1}) / sqrt 2)`` where
    ``e = pi/2^(m-1)`` and ``q_{k-1}`` is the largest single-neuron error
    observed one layer down (zero at the input).
    """
    widths = tuple(int(p) for p in widths)
    if m < 1 or trials < 1:
        raise ss.ValidationError("need m >= 1 and trials >= 1")
    out = map_trials(partial(_recursion_trial, widths=widths, m=m), trial_seeds(rng, trials), workers)
    pred = [r[0] for r in out]
    obs = [r[1] for r in out]
    viol = int(sum(o > p + 1e-12 for po, oo in zip(pred, obs) for p, o in zip(po, oo)))
    step = np.pi / 2 ** (m - 1)
    return ErrorRecursionReport(widths, m, step, trials, [step] * (len(widths) - 1),
                                pred, obs, [r[2] for r in out], viol, viol == 0)


# ---------------------------------------------------------------------------
# phase concentration
# ---------------------------------------------------------------------------

@dataclass
class ConcentrationCase:
    """Product input and weight given as per-qubit kets, shape ``(n, 2)``."""

    x: np.ndarray
    w: np.ndarray
    m: int
    sigma: float


@dataclass
class ConcentrationResult:
    t: int
    window: int
    centres: tuple[int, int]
    branch_mass: tuple[float, float]
    floor: float
    passed: bool


@dataclass
class ConcentrationReport:
    cases: list[ConcentrationResult]
    passed: bool


def concentration_qubits(m: int, sigma: float) -> int:
    return m + math.ceil(math.log2(2 + 1 / (2 * sigma)))


def window_mass(probs: np.ndarray, centre: int, radius: int) -> float:
    """Mass within circular distance ``radius`` of ``centre``."""
    size = len(probs)
    y = np.arange(size)
    d = np.abs(y - centre) % size
    d = np.minimum(d, size - d)
    return float(probs[d <= radius].sum())


def branch_masses(x: np.ndarray, w: np.ndarray, t: int, m: int) -> tuple[tuple[int, int], tuple[float, float]]:
    """Per-eigenvector concentration of the real-part phase estimation.

    ``x``/``w`` are per-qubit kets.  ``|phi>`` splits evenly over the two
    eigenvectors of ``G``, so each branch carries half of the mass its
    eigenvector's own run puts in the window around
    ``floor(2^t * phase / 2pi)``.
    """
    xs, ws = st.StatePrep.from_kets(list(x)), st.StatePrep.from_kets(list(w))
    pair = st.eigenpair(qnn.dense_product(x), qnn.dense_product(w), st.REAL)
    radius = 2 ** (t - m) - 1
    size = 1 << t
    centres, masses = [], []
    for vec, ph in ((pair.w_plus, 2 * pair.theta), (pair.w_minus, -2 * pair.theta)):
        _, dist = st.phase_estimate(xs, ws, st.REAL, t, initial=vec)
        c = int(np.floor((size * ph / (2 * np.pi)) % size + 1e-12)) % size
        centres.append(c)
        masses.append(0.5 * window_mass(dist.probs, c, radius))
    return tuple(centres), tuple(masses)


def verify_phase_concentration(cases: Sequence[ConcentrationCase]) -> ConcentrationReport:
    out = []
    for case in cases:
        t = concentration_qubits(case.m, case.sigma)
        n = len(case.x)
        if t + n + 1 > ss.MAX_QUBITS:
            raise ss.CapacityError(f"phase estimation needs {t + n + 1} qubits")
        centres, masses = branch_masses(case.x, case.w, t, case.m)
        floor = (1 - case.sigma) / 2
        out.append(ConcentrationResult(t, 2 ** (t - case.m) - 1, centres, masses, floor,
                                       min(masses) >= floor - 1e-12))
    return ConcentrationReport(out, all(r.passed for r in out))


def random_concentration_cases(count: int, rng: np.random.Generator, m: int = 3,
                               sigma: float = 0.25, n: int = 1) -> list[ConcentrationCase]:
    cases = []
    for _ in range(count):
        x = np.array([haar_ket(rng) for _ in range(n)])
        w = np.array([haar_ket(rng) for _ in range(n)])
        cases.append(ConcentrationCase(x, w, m, sigma))
    return cases
