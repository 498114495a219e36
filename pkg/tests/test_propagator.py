import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_qsl.algebra import RobustnessOrder, assemble_generator
from robust_qsl.propagator import (
    ControlPulse,
    build_step_kernel,
    propagate,
    reference_expm,
    step,
    step_gradient,
)

from .conftest import ORDERS_UP_TO_33

MINUS_I_X = -1j * np.array([[0, 1], [1, 0]])
FULL_Y = np.array([[0, 1j], [-1j, 0]])


def bare(omega=np.pi):
    return assemble_generator(RobustnessOrder(0, 0), omega)


class TestStepKernel:
    def test_scalar_series_closed_form(self):
        k = build_step_kernel(bare(), 1.0)
        # M = pi^2, C = cos(pi/2), S = sin(pi/2) / (pi/2)
        np.testing.assert_allclose(k.c_mat, [[0.0]], atol=1e-15)
        np.testing.assert_allclose(k.s_mat, [[2 / np.pi]], rtol=1e-15)

    @pytest.mark.parametrize("order", [RobustnessOrder(0, 0), RobustnessOrder(2, 3)], ids=str)
    def test_small_dt_limit(self, order):
        k = build_step_kernel(assemble_generator(order, np.pi), 1e-9)
        eye = np.eye(order.n_blocks)
        np.testing.assert_allclose(k.c_mat, eye, atol=1e-15)
        np.testing.assert_allclose(k.s_mat, eye, atol=1e-15)

    def test_matches_reference_order11(self):
        g = assemble_generator(RobustnessOrder(1, 1), np.pi)
        k = build_step_kernel(g, 0.005)
        expected = scipy.linalg.expm(-1j * g.matrix(0.3) * 0.005)
        assert np.linalg.norm(step(k, 0.3) - expected) <= 1e-12

    def test_rejects_bad_dt(self):
        with pytest.raises(ValueError):
            build_step_kernel(bare(), 0.0)

    def test_one_kernel_serves_all_phases(self):
        g = assemble_generator(RobustnessOrder(1, 1), 2.0)
        k = build_step_kernel(g, 0.01)
        for phi in (0.0, 1.0, -2.5):
            np.testing.assert_allclose(step(k, phi), k.p + np.cos(phi) * k.q + np.sin(phi) * k.r, atol=0)


class TestStep:
    def test_square_pi_pulse(self):
        v = step(build_step_kernel(bare(), 1.0), 0.0)
        np.testing.assert_allclose(v, MINUS_I_X, atol=1e-15)

    def test_periodic(self):
        k = build_step_kernel(assemble_generator(RobustnessOrder(1, 1), np.pi), 0.02)
        np.testing.assert_allclose(step(k, 0.4), step(k, 0.4 + 2 * np.pi), atol=1e-14)

    def test_order20_structure(self, rng):
        order = RobustnessOrder(2, 0)
        g = assemble_generator(order, np.pi)
        k = build_step_kernel(g, 0.05)
        phi = rng.uniform(-np.pi, np.pi)
        v = step(k, phi)
        ref = scipy.linalg.expm(-1j * g.matrix(phi) * 0.05)
        np.testing.assert_allclose(v, ref, atol=1e-13)
        diag = [v[2 * i:2 * i + 2, 2 * i:2 * i + 2] for i in range(3)]
        for d in diag:
            np.testing.assert_allclose(d, diag[0], atol=1e-15)
            np.testing.assert_allclose(d.conj().T @ d, np.eye(2), atol=1e-13)
        for i in range(3):
            for j in range(i + 1, 3):
                assert np.all(v[2 * i:2 * i + 2, 2 * j:2 * j + 2] == 0)

    @pytest.mark.parametrize("order", ORDERS_UP_TO_33, ids=str)
    def test_matches_reference_random(self, order, rng):
        g = assemble_generator(order, np.pi)
        for _ in range(50):
            phi = rng.uniform(-np.pi, np.pi)
            dt = rng.uniform(1e-3, 1.0)
            v = step(build_step_kernel(g, dt), phi)
            ref = scipy.linalg.expm(-1j * g.matrix(phi) * dt)
            assert np.linalg.norm(v - ref) <= 1e-12


class TestStepGradient:
    def test_closed_form(self):
        dv = step_gradient(build_step_kernel(bare(), 1.0), 0.0)
        # -i (2/pi) pi sy = -2i sy with sy = Y'/2
        np.testing.assert_allclose(dv, -1j * FULL_Y, atol=1e-15)

    def test_sign_flip(self):
        k = build_step_kernel(bare(), 1.0)
        np.testing.assert_allclose(step_gradient(k, np.pi), -step_gradient(k, 0.0), atol=1e-15)

    @pytest.mark.parametrize("order", [RobustnessOrder(0, 0), RobustnessOrder(1, 2), RobustnessOrder(3, 3)], ids=str)
    def test_finite_differences(self, order, rng):
        g = assemble_generator(order, np.pi)
        h = 1e-6
        for _ in range(100 // 3 + 1):
            k = build_step_kernel(g, rng.uniform(1e-3, 0.5))
            phi = rng.uniform(-np.pi, np.pi)
            fd = (step(k, phi + h) - step(k, phi - h)) / (2 * h)
            exact = step_gradient(k, phi)
            assert np.linalg.norm(fd - exact) <= 1e-6 * np.linalg.norm(exact)

    def test_exact_unlike_first_order_grape(self):
        g = assemble_generator(RobustnessOrder(1, 0), np.pi)
        k = build_step_kernel(g, 0.2)
        phi = 0.7
        h = 1e-6
        fd = (step(k, phi + h) - step(k, phi - h)) / (2 * h)
        approx = -1j * (-np.sin(phi) * g.h1 + np.cos(phi) * g.h2) * np.pi @ step(k, phi) * 0.2
        exact_err = np.linalg.norm(step_gradient(k, phi) - fd)
        approx_err = np.linalg.norm(approx - fd)
        assert exact_err < 1e-8 < approx_err


class TestPropagate:
    def test_empty_pulse(self):
        g = assemble_generator(RobustnessOrder(1, 1), np.pi)
        np.testing.assert_array_equal(propagate(g, None), np.eye(8))

    @pytest.mark.parametrize("n", [1, 3, 10, 64])
    def test_square_pi_any_segmentation(self, n):
        pulse = ControlPulse.uniform(np.zeros(n), 1.0, np.pi)
        np.testing.assert_allclose(propagate(bare(), pulse), MINUS_I_X, atol=1e-13)

    def test_semigroup_split(self, rng):
        g = assemble_generator(RobustnessOrder(2, 1), np.pi)
        phases = rng.uniform(-np.pi, np.pi, 7)
        whole = propagate(g, ControlPulse(phases, 0.02, np.pi))
        halves = propagate(g, ControlPulse(np.repeat(phases, 2), 0.01, np.pi))
        assert np.linalg.norm(whole - halves) <= 1e-13

    def test_partials(self, rng):
        g = assemble_generator(RobustnessOrder(1, 0), np.pi)
        pulse = ControlPulse(rng.uniform(-3, 3, 5), 0.1, np.pi)
        final, partials = propagate(g, pulse, return_partials=True)
        assert partials.shape == (6, 4, 4)
        np.testing.assert_array_equal(partials[0], np.eye(4))
        np.testing.assert_allclose(partials[-1], final)

    def test_omega_mismatch(self):
        with pytest.raises(ValueError):
            propagate(bare(), ControlPulse([0.0], 0.1, 2.0))

    def test_reference_product_matches(self, rng):
        order = RobustnessOrder(2, 2)
        g = assemble_generator(order, np.pi)
        pulse = ControlPulse(rng.uniform(-np.pi, np.pi, 40), 0.03, np.pi)
        ref = np.eye(order.dim)
        for phi in pulse.phases:
            ref = scipy.linalg.expm(-1j * g.matrix(phi) * 0.03) @ ref
        assert np.linalg.norm(propagate(g, pulse) - ref) <= 1e-11

    @pytest.mark.parametrize("order", [RobustnessOrder(1, 1), RobustnessOrder(3, 2)], ids=str)
    def test_u00_unitary_and_triangular(self, order, rng):
        g = assemble_generator(order, np.pi)
        pulse = ControlPulse(rng.uniform(-np.pi, np.pi, 300), 0.02, np.pi)
        u = propagate(g, pulse)
        u00 = u[:2, :2]
        assert np.linalg.norm(u00.conj().T @ u00 - np.eye(2)) <= 1e-10
        for a1, a2 in order.blocks():
            for b1, b2 in order.blocks():
                if not (a1 >= b1 and a2 >= b2):
                    assert np.all(u[order.block_slice(a1, a2), order.block_slice(b1, b2)] == 0)


@settings(max_examples=30, deadline=None)
@given(
    phases=st.lists(st.floats(-20, 20), min_size=1, max_size=60),
    dt=st.floats(1e-3, 0.2),
)
def test_u00_unitarity_property(phases, dt):
    g = assemble_generator(RobustnessOrder(2, 1), np.pi)
    u00 = propagate(g, ControlPulse(phases, dt, np.pi))[:2, :2]
    assert np.linalg.norm(u00.conj().T @ u00 - np.eye(2)) <= 1e-10


class TestReferenceExpm:
    def test_zero(self):
        np.testing.assert_array_equal(reference_expm(np.zeros((3, 3))), np.eye(3))

    def test_pauli(self):
        sx = 0.5 * np.array([[0, 1], [1, 0]])
        assert np.abs(reference_expm(-1j * np.pi * sx) - MINUS_I_X).max() <= 1e-13

    def test_diagonal(self):
        np.testing.assert_allclose(reference_expm(np.diag([1.0, -2.0 + 1j])),
                                   np.diag(np.exp([1.0, -2.0 + 1j])), rtol=1e-14)

    def test_non_square(self):
        with pytest.raises(ValueError):
            reference_expm(np.zeros((2, 3)))


class TestControlPulse:
    def test_power_constraint(self, rng):
        p = ControlPulse(rng.uniform(-9, 9, 50), 0.01, 2.5)
        np.testing.assert_allclose(p.ux**2 + p.uy**2, 2.5**2, rtol=1e-15)
        assert p.total_duration == pytest.approx(0.5)

    @pytest.mark.parametrize("kw", [dict(segment_duration=0.0), dict(omega=-1.0), dict(phases=[np.nan])])
    def test_rejects(self, kw):
        args = dict(phases=[0.0], segment_duration=0.1, omega=1.0)
        args.update(kw)
        with pytest.raises(ValueError):
            ControlPulse(**args)
