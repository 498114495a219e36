import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_qsl.algebra import RobustnessOrder, assemble_generator
from robust_qsl.objective import (
    GATE_NAMES,
    CostFunction,
    GateTarget,
    cost,
    cost_gradient,
    gate_error,
    gate_target,
)
from robust_qsl.propagator import ControlPulse, propagate

X = GateTarget.named("X")
Z = GateTarget.named("Z")


def square_pi(order=(0, 0), n=100):
    gen = assemble_generator(RobustnessOrder(*order), np.pi)
    return gen, ControlPulse.uniform(np.zeros(n), 1.0, np.pi)


class TestGateTarget:
    @pytest.mark.parametrize("name", GATE_NAMES)
    def test_named_unitary(self, name):
        m = GateTarget.named(name.lower()).matrix
        np.testing.assert_allclose(m.conj().T @ m, np.eye(2), atol=1e-15)

    def test_unknown(self):
        with pytest.raises(ValueError, match="unknown gate"):
            GateTarget.named("T")

    def test_non_unitary(self):
        with pytest.raises(ValueError):
            gate_target([[1, 0], [0, 2]])

    def test_custom(self):
        t = gate_target(np.diag([1, np.exp(0.3j)]))
        assert t.name == "custom"


class TestGateError:
    @pytest.mark.parametrize("name", GATE_NAMES)
    def test_identity_case(self, name):
        t = GateTarget.named(name)
        assert gate_error(t.matrix, t) == pytest.approx(0.0, abs=1e-15)

    def test_global_phase(self):
        assert gate_error(np.exp(0.7j) * Z.matrix, Z) == pytest.approx(0.0, abs=1e-15)

    def test_orthogonal_paulis(self):
        assert gate_error(X.matrix, Z) == pytest.approx(1.0, abs=1e-15)

    def test_hadamard_vs_x(self):
        # |tr(X H)|^2 / 4 = 1/2
        assert gate_error(GateTarget.named("H").matrix, X) == pytest.approx(0.5)

    def test_shape(self):
        with pytest.raises(ValueError):
            gate_error(np.eye(4), X)


class TestCost:
    def test_square_pi_realizes_x(self):
        gen, pulse = square_pi()
        assert cost(gen, pulse, X).total <= 1e-12

    def test_empty_pulse(self):
        gen = assemble_generator(RobustnessOrder(1, 1), np.pi)
        rep = cost(gen, None, "X")
        assert rep.total == 1.0 and rep.gate_error == 1.0
        assert rep.block_norms == {(0, 1): 0.0, (1, 0): 0.0, (1, 1): 0.0}
        assert cost(gen, ControlPulse([], 0.1, np.pi), "Z").total == 1.0
        assert cost(gen, None, np.eye(2)).total == 0.0

    def test_square_pi_not_frequency_robust(self):
        # closed form: U_10 = -(i/pi) Z, so tr(U10^dag U10) = 2 / pi^2
        gen, pulse = square_pi((1, 0))
        rep = cost(gen, pulse, X)
        assert rep.block_norms[(1, 0)] == pytest.approx(2 / np.pi**2, rel=1e-12)
        assert rep.gate_error <= 1e-12
        assert rep.total == pytest.approx(2 / np.pi**2, rel=1e-10)

    def test_square_pi_amplitude_block(self):
        # U(eps2) = exp(-i pi (1+eps2) X/2), U_01 = -(i pi / 2) X U_00
        gen, pulse = square_pi((0, 1))
        rep = cost(gen, pulse, X)
        assert rep.block_norms[(0, 1)] == pytest.approx(np.pi**2 / 2, rel=1e-12)

    def test_matches_dense_propagation(self, rng):
        order = RobustnessOrder(2, 1)
        gen = assemble_generator(order, np.pi)
        pulse = ControlPulse(rng.uniform(-np.pi, np.pi, 37), 0.04, np.pi)
        u = propagate(gen, pulse)
        rep = cost(gen, pulse, "H")
        expected_err = gate_error(u[:2, :2], GateTarget.named("H"))
        assert rep.gate_error == pytest.approx(expected_err, abs=1e-13)
        total = expected_err
        for kk in order.blocks():
            if kk == (0, 0):
                continue
            blk = u[order.block_slice(*kk), :2]
            norm = np.trace(blk.conj().T @ blk).real
            assert rep.block_norms[kk] == pytest.approx(norm, rel=1e-11)
            total += norm
        assert rep.total == pytest.approx(total, rel=1e-11)

    def test_weights(self):
        gen, pulse = square_pi((1, 0))
        rep = cost(gen, pulse, X, weights={(1, 0): 3.0})
        assert rep.total == pytest.approx(3 * 2 / np.pi**2, rel=1e-10)
        with pytest.raises(ValueError):
            cost(gen, pulse, X, weights={(1, 0): -1.0})

    def test_omega_mismatch(self):
        gen, _ = square_pi()
        with pytest.raises(ValueError):
            cost(gen, ControlPulse([0.0], 0.5, 2.0), X)


def _fd_gradient(fn, x, h=1e-6):
    g = np.empty_like(x)
    for j in range(len(x)):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (fn.value(x + e) - fn.value(x - e)) / (2 * h)
    return g


class TestGradient:
    @pytest.mark.parametrize("order", [(0, 0), (1, 0), (1, 1), (2, 2), (3, 3)], ids=str)
    def test_finite_differences(self, order, rng):
        gen = assemble_generator(RobustnessOrder(*order), np.pi)
        for gate in GATE_NAMES:
            phases = rng.uniform(-np.pi, np.pi, 12)
            fn = CostFunction(gen, gate, 0.07)
            _, g = fn(phases)
            fd = _fd_gradient(fn, phases)
            assert np.abs(g - fd).max() <= 1e-5 * np.abs(fd).max()

    def test_stationary_at_square_pi(self):
        gen, pulse = square_pi()
        assert np.linalg.norm(cost_gradient(gen, pulse, X)) <= 1e-8

    def test_periodicity(self, rng):
        gen = assemble_generator(RobustnessOrder(1, 1), np.pi)
        pulse = ControlPulse(rng.uniform(-np.pi, np.pi, 20), 0.05, np.pi)
        shifted = pulse.with_phases(pulse.phases + 2 * np.pi)
        np.testing.assert_allclose(cost_gradient(gen, pulse, Z), cost_gradient(gen, shifted, Z), atol=1e-12)

    def test_value_agrees_with_call(self, rng):
        gen = assemble_generator(RobustnessOrder(2, 0), np.pi)
        fn = CostFunction(gen, "S", 0.05)
        x = rng.uniform(-3, 3, 30)
        assert fn(x)[0] == pytest.approx(fn.value(x), rel=1e-13)


@settings(max_examples=100, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    n1=st.integers(0, 2),
    n2=st.integers(0, 2),
    n_seg=st.integers(1, 15),
    dt=st.floats(0.01, 0.3),
    gate=st.sampled_from(GATE_NAMES),
)
def test_gradient_property(seed, n1, n2, n_seg, dt, gate):
    rng = np.random.default_rng(seed)
    gen = assemble_generator(RobustnessOrder(n1, n2), np.pi)
    fn = CostFunction(gen, gate, dt)
    x = rng.uniform(-np.pi, np.pi, n_seg)
    _, g = fn(x)
    fd = _fd_gradient(fn, x)
    scale = max(np.abs(fd).max(), 1e-3)
    assert np.abs(g - fd).max() <= 1e-5 * scale
