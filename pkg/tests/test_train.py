import numpy as np
import pytest
from hypothesis import given, strategies as hs

from qswapnet import neuron as nr
from qswapnet import qnn
from qswapnet import statesim as ss
from qswapnet import swaptest as st
from qswapnet import train as tr

from conftest import random_ket

ZERO, ONE = np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)


def one_one(beta):
    """1-1 net on x=|0>, w=R_Y(beta)|0>, target |1>; loss 2-2cos(beta/4) on [0, 2pi]."""
    net = qnn.NetworkSpec((1, 1))
    return net, qnn.WeightParams(net, [beta, 0, 0]), tr.Dataset([[ZERO]], [[ONE]])


def random_problem(widths, batch, rng):
    net = qnn.NetworkSpec(widths)
    inputs = np.array([[random_ket(rng) for _ in range(widths[0])] for _ in range(batch)])
    targets = np.array([[random_ket(rng) for _ in range(widths[-1])] for _ in range(batch)])
    return net, qnn.WeightParams.random(net, rng), tr.Dataset(inputs, targets)


# --- loss --------------------------------------------------------------------------------

@pytest.mark.parametrize("beta", [0.3, 1.0, 2.5, 4.0, 6.0])
def test_loss_closed_form(beta):
    net, w, data = one_one(beta)
    assert tr.loss(net, w, data).loss == pytest.approx(2 - 2 * np.cos(beta / 4), abs=1e-12)


def test_loss_zero_and_four():
    net = qnn.NetworkSpec((1, 1))
    w = qnn.WeightParams(net, [0, 0, 0])  # a = 1 -> output |1>
    assert tr.loss(net, w, tr.Dataset([[ZERO]], [[ONE]])).loss == pytest.approx(0, abs=1e-12)
    assert tr.loss(net, w, tr.Dataset([[ZERO]], [[-ONE]])).loss == pytest.approx(4, abs=1e-12)


def test_loss_multi_output_multiplies_overlaps(rng):
    net, w, data = random_problem((2, 2), 3, rng)
    z = qnn.forward_batch(net, w.theta, data.inputs)
    ov = [np.vdot(z[b, 0], data.targets[b, 0]) * np.vdot(z[b, 1], data.targets[b, 1]) for b in range(3)]
    want = np.mean([2 - 2 * np.real(o) for o in ov])
    assert tr.loss(net, w, data).loss == pytest.approx(want)


@given(hs.integers(0, 2 ** 32 - 1))
def test_loss_range(seed):
    net, w, data = random_problem((2, 2, 1), 4, np.random.default_rng(seed))
    assert 0 <= tr.loss(net, w, data).loss <= 4


def test_dataset_shape_checked(rng):
    net, w, data = random_problem((2, 1), 2, rng)
    with pytest.raises(ss.ValidationError):
        tr.loss(qnn.NetworkSpec((3, 1)), qnn.WeightParams.random(qnn.NetworkSpec((3, 1)), rng), data)
    with pytest.raises(ss.ValidationError):
        tr.Dataset(np.zeros((0, 1, 2)), np.zeros((0, 1, 2)))


# --- gradients ------------------------------------------------------------------------------

@pytest.mark.parametrize("beta", [0.3, 1.0, 2.5, 4.0, 6.0])
def test_fd_gradient_closed_form(beta):
    net, w, data = one_one(beta)
    g = tr.grad_fd(net, w, data, 1e-5)
    assert g[0] == pytest.approx(0.5 * np.sin(beta / 4), abs=1e-5)
    assert g[1] == pytest.approx(0, abs=1e-5) and g[2] == pytest.approx(0, abs=1e-5)


@given(hs.sampled_from([(1, 1), (2, 1), (2, 2, 1), (2, 3, 2), (3, 2, 2, 1), (2, 8, 8, 1)]),
       hs.integers(0, 2 ** 32 - 1))
def test_cached_fd_equals_full_fd(widths, seed):
    net, w, data = random_problem(widths, 5, np.random.default_rng(seed))
    a = tr.grad_fd(net, w, data, 1e-5)
    b = tr.grad_fd_full(net, w, data, 1e-5)
    assert np.max(np.abs(a - b)) <= 1e-8


def test_fd_matches_analytic_directional_derivative(rng):
    net, w, data = random_problem((2, 2, 1), 4, rng)
    g = tr.grad_fd(net, w, data, 1e-5)
    v = rng.normal(size=net.num_params)
    v /= np.linalg.norm(v)
    eps = 1e-4
    lp = tr.loss(net, qnn.WeightParams(net, w.theta + eps * v), data).loss
    lm = tr.loss(net, qnn.WeightParams(net, w.theta - eps * v), data).loss
    assert np.dot(g, v) == pytest.approx((lp - lm) / (2 * eps), abs=1e-6)


@pytest.mark.parametrize("h", [1e-8, 1e-2])
def test_fd_step_range(h):
    net, w, data = one_one(1.0)
    with pytest.raises(ss.ValidationError):
        tr.grad_fd(net, w, data, h)


def test_exclusive_prod():
    o = np.array([[2.0, 3.0, 5.0], [0.0, 7.0, 1.0]])
    assert np.allclose(tr._exclusive_prod(o), [[15, 10, 6], [7, 0, 0]])


# --- init and SGD -----------------------------------------------------------------------------

def test_init_search_picks_minimum(rng):
    net, _, data = random_problem((2, 1), 8, rng)
    seed_rng = np.random.default_rng(3)
    best = tr.init_search(net, data, 10, seed_rng)
    cands = np.random.default_rng(3).uniform(0, 2 * np.pi, size=(10, net.num_params))
    vals = tr.loss_values(net, cands, data)
    assert np.array_equal(best.theta, cands[np.argmin(vals)])


def test_train_config_validation():
    with pytest.raises(ss.ValidationError):
        tr.TrainConfig(lr=-1)
    with pytest.raises(ss.ValidationError):
        tr.TrainConfig(fd_step=1e-2)
    with pytest.raises(ss.ValidationError):
        tr.TrainConfig(batch_size=0)


def test_sgd_reduces_loss_and_is_deterministic():
    # single neuron on a separable two-point problem
    net = qnn.NetworkSpec((1, 1))
    data = tr.Dataset([[ZERO], [ONE]], [[ONE], [ZERO]])
    cfg = tr.TrainConfig(lr=0.5, epochs=20, batch_size=2, init_trials=1)
    a = tr.sgd_train(net, cfg, data, np.random.default_rng(1))
    b = tr.sgd_train(net, cfg, data, np.random.default_rng(1))
    assert np.array_equal(a.weights.theta, b.weights.theta)
    assert [p.epoch for p in a.curve] == list(range(21))
    assert a.curve[-1].train_loss < a.curve[0].train_loss


def test_sgd_zero_epochs_keeps_init(rng):
    net, _, data = random_problem((2, 1), 6, rng)
    init = qnn.WeightParams.random(net, rng)
    res = tr.sgd_train(net, tr.TrainConfig(epochs=0), data, rng, init=init)
    assert np.array_equal(res.weights.theta, init.theta) and len(res.curve) == 1


def test_step_decay():
    net, w, data = one_one(1.0)
    cfg = tr.TrainConfig(lr=0.1, epochs=4, batch_size=1, decay=0.5, decay_every=2)
    res = tr.sgd_train(net, cfg, data, np.random.default_rng(0), init=w)
    # replay with the schedule by hand
    theta = w.theta.copy()
    for lr in (0.1, 0.1, 0.05, 0.05):
        theta = theta - lr * tr.grad_fd(net, qnn.WeightParams(net, theta), data, cfg.fd_step)
    assert np.allclose(res.weights.theta, theta)


def test_accuracy():
    net = qnn.NetworkSpec((1, 1))
    w = qnn.WeightParams(net, [0, 0, 0])  # |0> -> |1>; |1> has a = 0, on the threshold -> 1
    data = tr.Dataset([[ZERO], [ONE]], [[ONE], [ZERO]])
    assert tr.accuracy(net, w.theta, data) == 0.5


# --- hybrid single-neuron gradient -----------------------------------------------------------------

@pytest.mark.parametrize("param", range(6))
def test_derivative_prep_matches_fd(param, rng):
    angles = [st.ket_angles(random_ket(rng)) for _ in range(2)]
    spec = nr.NeuronSpec(2, 3, angles)
    prep, coef = tr.derivative_prep(spec, param)
    flat = np.ravel(spec.weight_angles)
    h = 1e-6

    def state(v):
        return nr.NeuronSpec(2, 3, [tuple(r) for r in v.reshape(2, 3)]).weight_state()

    e = np.eye(flat.size)[param] * h
    fd = (state(flat + e) - state(flat - e)) / (2 * h)
    assert np.allclose(coef * prep.state(), fd, atol=1e-8)


def test_activation_partials_match_fd(rng):
    for _ in range(10):
        a = complex(np.vdot(random_ket(rng), random_ket(rng)))
        d_re, d_im = tr.activation_partials(a)
        h = 1e-6
        assert np.allclose(d_re, (nr.activation(a + h) - nr.activation(a - h)) / (2 * h), atol=1e-6)
        assert np.allclose(d_im, (nr.activation(a + 1j * h) - nr.activation(a - 1j * h)) / (2 * h),
                           atol=1e-6)


def test_hybrid_gradient_sign_agreement():
    rng = np.random.default_rng(77)
    agree = 0
    for _ in range(20):
        x = random_ket(rng)
        target = random_ket(rng)
        angles = np.array(st.ket_angles(random_ket(rng)))
        spec = nr.NeuronSpec(1, 7, [tuple(angles)])
        param = int(rng.integers(3))
        est = tr.hybrid_grad_neuron(spec, st.StatePrep.from_kets([x]), target, param)
        h = 1e-6
        e = np.eye(3)[param] * h
        exact = (tr.exact_neuron_overlap(angles + e, x, target)
                 - tr.exact_neuron_overlap(angles - e, x, target)) / (2 * h)
        agree += np.sign(est) == np.sign(exact)
    assert agree >= 18


def test_hybrid_capacity():
    spec = nr.NeuronSpec(1, 8, [(0, 0, 0)])
    with pytest.raises(ss.CapacityError):
        tr.hybrid_grad_neuron(spec, st.StatePrep.from_angles([(0, 0, 0)]), ONE, 0)


# --- worked cases and properties ---------------------------------------------------------------

def test_loss_orthogonal_outputs_is_two():
    net = qnn.NetworkSpec((1, 1))
    w = qnn.WeightParams(net, [0, 0, 0])  # |0> -> |1>
    assert tr.loss(net, w, tr.Dataset([[ZERO]], [[ZERO]])).loss == pytest.approx(2, abs=1e-12)


def test_loss_half_overlap_output():
    net = qnn.NetworkSpec((1, 1))
    w = qnn.WeightParams(net, [np.pi, 0, 0])  # <0|1> = 0 -> f(0)
    got = tr.loss(net, w, tr.Dataset([[ZERO]], [[ONE]])).loss
    assert got == pytest.approx(2 - np.sqrt(2), abs=1e-12)
    assert got == pytest.approx(0.58579, abs=1e-5)


def test_constant_directions_have_zero_gradient():
    # <0|w> = 0 for every phase once beta = pi, so gamma and delta do not move the loss
    net = qnn.NetworkSpec((1, 1))
    w = qnn.WeightParams(net, [np.pi, 0.4, 1.3])
    g = tr.grad_fd(net, w, tr.Dataset([[ZERO]], [[ONE]]))
    assert abs(g[1]) <= 1e-6 and abs(g[2]) <= 1e-6


@pytest.mark.parametrize("param", [1, 2])
def test_hybrid_zero_derivative(param):
    spec = nr.NeuronSpec(1, 4, [(np.pi, 0.4, 1.3)])
    est = tr.hybrid_grad_neuron(spec, st.StatePrep.from_angles([(0, 0, 0)]), ONE, param)
    assert abs(est) <= 0.05


def test_fd_step_refinement_agrees(rng):
    net, w, data = random_problem((2, 2, 1), 4, rng)
    assert np.max(np.abs(tr.grad_fd(net, w, data, 1e-4) - tr.grad_fd(net, w, data, 1e-5))) <= 1e-4


def test_gradient_vanishes_when_targets_equal_outputs(rng):
    net, w, data = random_problem((2, 2, 1), 6, rng)
    outs = qnn.forward_batch(net, w.theta, data.inputs)
    g = tr.grad_fd(net, w, tr.Dataset(data.inputs, outs))
    assert np.linalg.norm(g) <= 1e-5


@pytest.mark.parametrize("lr", [1e-3, 1e-2])
def test_small_step_does_not_increase_loss(lr, rng):
    for _ in range(5):
        net, w, data = random_problem((2, 2, 1), 1, rng)
        before = tr.loss(net, w, data).loss
        step = qnn.WeightParams(net, w.theta - lr * tr.grad_fd(net, w, data))
        assert tr.loss(net, step, data).loss <= before + 1e-12


def test_init_search_single_trial_returns_sample(rng):
    net, _, data = random_problem((2, 1), 4, rng)
    best = tr.init_search(net, data, 1, np.random.default_rng(8))
    want = np.random.default_rng(8).uniform(0, 2 * np.pi, size=(1, net.num_params))[0]
    assert np.array_equal(best.theta, want)


def test_init_search_winner_beats_median(rng):
    net, _, data = random_problem((2, 2, 1), 8, rng)
    best = tr.init_search(net, data, 16, np.random.default_rng(9))
    again = tr.init_search(net, data, 16, np.random.default_rng(9))
    cands = np.random.default_rng(9).uniform(0, 2 * np.pi, size=(16, net.num_params))
    assert np.array_equal(best.theta, again.theta)
    assert tr.loss(net, best, data).loss <= np.median(tr.loss_values(net, cands, data))


def test_toy_task_converges():
    net = qnn.NetworkSpec((1, 1))
    data = tr.Dataset([[ZERO]], [[ONE]])
    cfg = tr.TrainConfig(lr=0.5, epochs=200, batch_size=1, init_trials=1, decay=1.0)
    res = tr.sgd_train(net, cfg, data, np.random.default_rng(2))
    below = [p.epoch for p in res.curve if p.train_loss < 1e-3]
    assert below and below[0] <= 200


def test_zero_learning_rate_keeps_weights(rng):
    net, _, data = random_problem((2, 1), 8, rng)
    init = qnn.WeightParams.random(net, rng)
    res = tr.sgd_train(net, tr.TrainConfig(lr=0, epochs=3, batch_size=4), data, rng, init=init)
    assert np.array_equal(res.weights.theta, init.theta)
    assert len({p.train_loss for p in res.curve}) == 1


def test_hybrid_matches_fd_at_t7():
    rng = np.random.default_rng(5)
    for _ in range(10):
        x, target = random_ket(rng), random_ket(rng)
        angles = np.array(st.ket_angles(random_ket(rng)))
        spec = nr.NeuronSpec(1, 7, [tuple(angles)])
        for param in range(3):
            est = tr.hybrid_grad_neuron(spec, st.StatePrep.from_kets([x]), target, param)
            e = np.eye(3)[param] * 1e-6
            fd = (tr.exact_neuron_overlap(angles + e, x, target)
                  - tr.exact_neuron_overlap(angles - e, x, target)) / 2e-6
            assert abs(est - fd) <= 0.05
