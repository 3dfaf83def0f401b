import numpy as np
import pytest
from hypothesis import given, strategies as hs

from qswapnet import experiments as ex
from qswapnet import neuron as nr
from qswapnet import statesim as ss
from qswapnet import swaptest as st
from qswapnet.swaptest import StatePrep

from conftest import random_ket, random_state


def rotation_oracle(a):
    """Rotation form built from explicit matrices."""
    gr = np.arccos(-np.clip(a.real, -1, 1))
    gi = np.arccos(-np.clip(a.imag, -1, 1))
    rz = lambda g: np.diag([np.exp(-0.5j * g), np.exp(0.5j * g)])
    ry = lambda b: np.array([[np.cos(b / 2), -np.sin(b / 2)], [np.sin(b / 2), np.cos(b / 2)]])
    return rz(-np.pi / 2) @ rz(gi) @ ry(gr) @ np.array([1, 0])


def random_overlap(rng):
    return complex(np.vdot(random_state(2, rng), random_state(2, rng)))


# --- activation --------------------------------------------------------------------

@pytest.mark.parametrize("a,want", [
    (-1, [1, 0]),
    (1, [0, 1]),
    (0, [np.sqrt(0.5), np.sqrt(0.5)]),
    (1j, [np.sqrt(0.5) * np.exp(-1j * np.pi / 4), np.sqrt(0.5) * np.exp(1j * np.pi / 4)]),
])
def test_activation_special_values(a, want):
    assert np.allclose(nr.activation(a), want, atol=1e-12)


@given(hs.integers(0, 2 ** 32 - 1))
def test_activation_matches_rotations(seed):
    a = random_overlap(np.random.default_rng(seed))
    assert np.allclose(nr.activation(a), rotation_oracle(a), atol=1e-12)


def test_activation_batch_matches_scalar(rng):
    a = np.array([random_overlap(rng) for _ in range(300)] + [1, -1, 1j, -1j, 0, 1 + 1e-12])
    batch = nr.activation_batch(a.reshape(3, -1))
    scalar = np.array([nr.activation(v) for v in a]).reshape(3, -1, 2)
    assert np.max(np.abs(batch - scalar)) <= 1e-14


def test_activation_clamps_roundoff():
    assert np.all(np.isfinite(nr.activation(1 + 1e-13 - 1e-13j)))
    assert np.all(np.isfinite(nr.activation_batch(np.array([-1 - 1e-13]))))


@given(hs.integers(0, 2 ** 32 - 1))
def test_activation_unit_norm_and_gauge(seed):
    z = nr.activation(random_overlap(np.random.default_rng(seed)))
    assert np.isclose(np.linalg.norm(z), 1)
    prod = z[0] * z[1]
    assert abs(prod.imag) <= 1e-12 and prod.real >= -1e-12


@given(hs.integers(0, 2 ** 32 - 1), hs.floats(0, 2 * np.pi))
def test_align_phase_recovers_reference(seed, phase):
    z = nr.activation(random_overlap(np.random.default_rng(seed)))
    assert np.allclose(nr.align_phase(np.exp(1j * phase) * z, z), z, atol=1e-12)


def test_align_phase_on_basis_state():
    ref = nr.activation(-1 - 1j)  # e^{i pi/4}|0>
    assert np.allclose(nr.align_phase(np.array([1, 0]), ref), ref)


def test_label_probability():
    assert nr.label_probability(np.array([0.6, 0.8])) == pytest.approx(0.64)


# --- cascades --------------------------------------------------------------------------

@pytest.mark.parametrize("t", [1, 2, 3, 4])
@pytest.mark.parametrize("kind", ["ry", "rz"])
def test_cascade_writes_folded_angle(t, kind):
    cascade = nr.ry_cascade if kind == "ry" else nr.rz_cascade
    rot = ss.ry if kind == "ry" else ss.rz
    out_in = np.array([0.6, 0.8j])
    for y in range(1 << t):
        s = ss.kron(ss.from_amplitudes(np.eye(1 << t)[y]), ss.from_amplitudes(out_in))
        cascade(s, list(range(t)), t)
        angle = np.pi * st.fold(y, t) / 2 ** (t - 1)
        want = np.kron(np.eye(1 << t)[y], rot(angle) @ out_in)
        assert np.allclose(s.amps, want, atol=1e-12), y


def test_ideal_output_matches_activation_on_grid():
    t = 3
    for yr in range(8):
        for yi in range(8):
            a = complex(st.readout(yr, t), st.readout(yi, t))
            assert np.allclose(nr.ideal_output(yr, yi, t), nr.activation(a), atol=1e-12)


# --- neuron config and layout ---------------------------------------------------------------------

def test_spec_validation():
    with pytest.raises(ss.ValidationError):
        nr.NeuronSpec(2, 2, [(0, 0, 0)])
    with pytest.raises(ss.ValidationError):
        nr.NeuronSpec(0, 2, [])


def test_spec_wraps_angles():
    spec = nr.NeuronSpec(1, 2, [(2 * np.pi + 0.5, -0.5, 0)])
    assert np.allclose(spec.weight_angles[0], (0.5, 2 * np.pi - 0.5, 0))


def test_layout_sizes():
    lay = nr.NeuronLayout(2, 3)
    regs = lay.pe_r + lay.phi_r + [lay.out] + lay.pe_i + lay.phi_i
    assert sorted(regs) == list(range(lay.num_qubits)) and lay.num_qubits == 13


def test_capacity_error():
    spec = nr.NeuronSpec(4, 12, [(0, 0, 0)] * 4)
    with pytest.raises(ss.CapacityError):
        nr.neuron_state(StatePrep.from_angles([(0, 0, 0)] * 4), spec)


def test_input_size_mismatch():
    spec = nr.NeuronSpec(2, 2, [(0, 0, 0)] * 2)
    with pytest.raises(ss.ValidationError):
        nr.neuron_state(StatePrep.from_angles([(0, 0, 0)]), spec)


# --- circuit -------------------------------------------------------------------------------

def test_blockwise_equals_full_register(rng):
    x = StatePrep.from_kets([random_ket(rng)])
    spec = nr.NeuronSpec(1, 2, [st.ket_angles(random_ket(rng))])
    a = nr.neuron_state(x, spec, blockwise=True).amps
    b = nr.neuron_state(x, spec, blockwise=False).amps
    assert np.allclose(a, b, atol=1e-12)


@pytest.mark.parametrize("beta,gamma,delta", [
    (np.pi, 0, 0),                # a = 0
    (0, 0, 0),                    # a = 1
    (0, 0, np.pi / 2),            # a = i
    (0, 0, np.pi),                # a = -1
    (np.pi, np.pi, np.pi / 2),    # a = 0, nontrivial phases
])
def test_representable_overlap_reproduced_exactly(beta, gamma, delta):
    x = StatePrep.from_angles([(0, 0, 0)])
    spec = nr.NeuronSpec(1, 2, [(beta, gamma, delta)])
    want = nr.neuron_forward_exact(x.state(), spec)
    a = st.exact_inner(x.state(), spec.weight_state())
    for seed in range(3):
        tr = nr.neuron_forward_circuit(x, spec, np.random.default_rng(seed))
        assert np.linalg.norm(tr.output - want) <= 1e-9
        assert st.readout(tr.y_r, 2) == pytest.approx(a.real, abs=1e-12)
        assert st.readout(tr.y_i, 2) == pytest.approx(a.imag, abs=1e-12)


@given(hs.integers(0, 2 ** 32 - 1))
def test_circuit_output_pure_and_matches_readouts(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 3))
    x = StatePrep.from_kets([random_ket(rng) for _ in range(n)])
    spec = nr.NeuronSpec(n, 2, [st.ket_angles(random_ket(rng)) for _ in range(n)])
    tr = nr.neuron_forward_circuit(x, spec, rng)
    assert tr.purity >= 1 - 1e-9
    assert np.allclose(tr.output, nr.ideal_output(tr.y_r, tr.y_i, spec.t), atol=1e-9)


def test_circuit_readout_distribution_matches_swap_test(rng):
    x = StatePrep.from_kets([random_ket(rng)])
    spec = nr.NeuronSpec(1, 3, [st.ket_angles(random_ket(rng))])
    lay = nr.NeuronLayout(1, 3)
    s = nr.neuron_state(x, spec)
    _, dr = st.phase_estimate(x, spec.prep, st.REAL, 3)
    _, di = st.phase_estimate(x, spec.prep, st.IMAG, 3)
    assert np.allclose(ss.register_distribution(s, lay.pe_r), dr.probs, atol=1e-12)
    assert np.allclose(ss.register_distribution(s, lay.pe_i), di.probs, atol=1e-12)


def test_circuit_deterministic_per_seed(rng):
    x = StatePrep.from_kets([random_ket(rng)])
    spec = nr.NeuronSpec(1, 3, [st.ket_angles(random_ket(rng))])
    a = nr.neuron_forward_circuit(x, spec, np.random.default_rng(4))
    b = nr.neuron_forward_circuit(x, spec, np.random.default_rng(4))
    assert (a.y_r, a.y_i) == (b.y_r, b.y_i) and np.array_equal(a.output, b.output)


# --- worked cases and properties ----------------------------------------------------------------

@pytest.mark.parametrize("d,p", [([0, 1], 1.0), ([1, 0], 0.0), (None, 0.5)])
def test_label_probability_cases(d, p):
    ket = nr.activation(0) if d is None else np.array(d, dtype=complex)
    assert nr.label_probability(ket) == pytest.approx(p, abs=1e-12)


@given(hs.floats(-1, 1))
def test_real_overlap_gives_real_nonnegative_output(a):
    z = nr.activation(a)
    assert np.all(np.abs(z.imag) <= 1e-12) and np.all(z.real >= -1e-12)


@given(hs.integers(0, 2 ** 32 - 1))
def test_activation_continuity_bound(seed):
    rng = np.random.default_rng(seed)
    a, b = random_overlap(rng), random_overlap(rng)
    if rng.random() < 0.5:  # nearby pairs probe the square-root regime
        b = a + 1e-3 * complex(*rng.normal(size=2))
        b = b / max(1.0, abs(b))
    # each rotation angle is 1/2-Lipschitz in the ket; arccos(-y) has modulus pi sqrt(d / 2)
    bound = np.pi / (2 * np.sqrt(2)) * (np.sqrt(abs(a.real - b.real)) + np.sqrt(abs(a.imag - b.imag)))
    assert np.linalg.norm(nr.activation(a) - nr.activation(b)) <= bound + 1e-12


def test_orthogonal_two_qubit_weights_give_f0():
    x = np.kron([1, 0], [0, 1])  # |01>
    spec = nr.NeuronSpec(2, 2, [(np.pi, 0, 0), (0, 0, 0)])  # |10>
    assert np.allclose(nr.neuron_forward_exact(x, spec), nr.activation(0), atol=1e-12)


def test_two_qubit_exact_forward_independent_overlap():
    x = np.kron(ss.ry(1.0) @ [1, 0], ss.ry(0.5) @ [1, 0])
    spec = nr.NeuronSpec(2, 3, [(0.3, 0.7, 0.1), (1.2, 0.4, 0.9)])
    # per-qubit product of overlaps, independent of the dense weight vector
    per = [np.vdot(ss.ry(b) @ [1, 0], st.product_ket(*ang))
           for b, ang in zip((1.0, 0.5), spec.weight_angles)]
    a_fact = per[0] * per[1]
    a_dense = st.exact_inner(x, spec.weight_state())
    assert abs(a_fact - a_dense) <= 1e-12
    assert np.allclose(nr.neuron_forward_exact(x, spec), nr.activation(a_fact), atol=1e-12)


@pytest.mark.parametrize("t", [1, 2, 3])
def test_circuit_equal_states_give_one(t, rng):
    ket = random_ket(rng)
    spec = nr.NeuronSpec(1, t, [st.ket_angles(ket)])
    out = nr.neuron_forward_circuit(spec.prep, spec, rng).output
    if t == 1:  # Im = 0 is not on the t = 1 grid; the imaginary readout only sets a global phase
        assert abs(out[1]) == pytest.approx(1, abs=1e-9)
    else:
        assert np.allclose(out, [0, 1], atol=1e-9)


@pytest.mark.parametrize("t", [2, 3])
def test_circuit_orthogonal_gives_f0(t, rng):
    x = StatePrep.from_angles([(0, 0, 0), (np.pi, 0, 0)])
    spec = nr.NeuronSpec(2, t, [(np.pi, 0, 0), (0, 0, 0)])
    out = nr.neuron_forward_circuit(x, spec, rng).output
    assert np.allclose(out, [np.sqrt(0.5), np.sqrt(0.5)], atol=1e-9)


@pytest.mark.parametrize("kind", ["ry", "rz"])
def test_cascade_on_superposed_register(kind, rng):
    t = 3
    cascade = nr.ry_cascade if kind == "ry" else nr.rz_cascade
    rot = ss.ry if kind == "ry" else ss.rz
    beta = random_state(t, rng)
    s = ss.kron(ss.from_amplitudes(beta), ss.new_state(1))
    cascade(s, list(range(t)), t)
    want = sum(beta[y] * np.kron(np.eye(8)[y], rot(np.pi * st.fold(y, t) / 4) @ [1, 0]) for y in range(8))
    assert np.allclose(s.amps, want, atol=1e-12)


def test_circuit_frequency_bound_at_t6():
    # t = 6 with sigma = 0.5 gives m = 4 and the distance bound pi/8
    rep = ex.verify_theorem1(2, 4, 0.5, 300, np.random.default_rng(6))
    assert rep.t == 6 and rep.bound == pytest.approx(np.pi / 8)
    assert rep.frequency >= 0.5
