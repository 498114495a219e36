"""Compiled forward/backward sweeps over the first block column.

Only the first block column of the augmented propagator is ever needed
(the initial state is ``U_00 = I``, all other blocks zero), so the state is
``N x 2``. Steps are block-lower-triangular in the ``(k1, k2)`` grading; the
loops below visit only the structurally nonzero 2x2 blocks listed in
``pairs``.
"""

import numba
import numpy as np


def block_pairs(order) -> np.ndarray:
    """Structurally nonzero ``(row_block, col_block)`` pairs of a step matrix."""
    out = []
    for a1, a2 in order.blocks():
        for b1, b2 in order.blocks():
            if a1 >= b1 and a2 >= b2:
                out.append((order.block_index(a1, a2), order.block_index(b1, b2)))
    return np.array(out, dtype=np.int64).reshape(-1, 2)


def split_blocks(mat: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    """Gather the 2x2 blocks of ``mat`` listed in ``pairs``."""
    out = np.empty((len(pairs), 2, 2), dtype=np.complex128)
    for i, (a, b) in enumerate(pairs):
        out[i] = mat[2 * a : 2 * a + 2, 2 * b : 2 * b + 2]
    return out


@numba.njit(cache=True)
def forward_states(pb, qb, rb, pairs, n_blocks, phases):
    """States ``X_j = V_j ... V_1 X_0`` for ``j = 0..n``; shape ``(n+1, n_blocks, 2, 2)``."""
    n = phases.shape[0]
    xs = np.zeros((n + 1, n_blocks, 2, 2), dtype=np.complex128)
    xs[0, 0, 0, 0] = 1.0
    xs[0, 0, 1, 1] = 1.0
    for j in range(n):
        c = np.cos(phases[j])
        s = np.sin(phases[j])
        for k in range(pairs.shape[0]):
            a = pairs[k, 0]
            b = pairs[k, 1]
            for i in range(2):
                for m in range(2):
                    v = pb[k, i, m] + c * qb[k, i, m] + s * rb[k, i, m]
                    xs[j + 1, a, i, 0] += v * xs[j, b, m, 0]
                    xs[j + 1, a, i, 1] += v * xs[j, b, m, 1]
    return xs


@numba.njit(cache=True)
def final_state(pb, qb, rb, pairs, n_blocks, phases):
    x = np.zeros((n_blocks, 2, 2), dtype=np.complex128)
    y = np.zeros((n_blocks, 2, 2), dtype=np.complex128)
    x[0, 0, 0] = 1.0
    x[0, 1, 1] = 1.0
    for j in range(phases.shape[0]):
        c = np.cos(phases[j])
        s = np.sin(phases[j])
        y[:] = 0.0
        for k in range(pairs.shape[0]):
            a = pairs[k, 0]
            b = pairs[k, 1]
            for i in range(2):
                for m in range(2):
                    v = pb[k, i, m] + c * qb[k, i, m] + s * rb[k, i, m]
                    y[a, i, 0] += v * x[b, m, 0]
                    y[a, i, 1] += v * x[b, m, 1]
        x[:] = y
    return x


@numba.njit(cache=True)
def terminal_cost(x, target, weights):
    """Gate error plus weighted block norms, and the conjugate cost gradient
    ``G`` such that ``dJ = 2 Re tr(G^dagger dX)``.

    The gate error uses ``|W00 - W11|^2 / 4 + (|W01|^2 + |W10|^2) / 2`` with
    ``W = U_f^dagger U_00``, which equals ``1 - |tr W|^2 / 4`` for unitary
    ``W`` but keeps full relative precision as the error goes to zero.
    """
    n_blocks = x.shape[0]
    w = np.zeros((2, 2), dtype=np.complex128)
    for i in range(2):
        for m in range(2):
            for k in range(2):
                w[i, m] += np.conj(target[k, i]) * x[0, k, m]
    d = w[0, 0] - w[1, 1]
    gate_err = (
        (d.real * d.real + d.imag * d.imag) / 4.0
        + (abs(w[0, 1]) ** 2 + abs(w[1, 0]) ** 2) / 2.0
    )
    gw = np.empty((2, 2), dtype=np.complex128)
    gw[0, 0] = d / 4.0
    gw[1, 1] = -d / 4.0
    gw[0, 1] = w[0, 1] / 2.0
    gw[1, 0] = w[1, 0] / 2.0
    total = gate_err
    grad = np.zeros_like(x)
    for i in range(2):
        for m in range(2):
            for k in range(2):
                grad[0, i, m] += target[i, k] * gw[k, m]
    norms = np.zeros(n_blocks)
    for b in range(1, n_blocks):
        acc = 0.0
        for i in range(2):
            for m in range(2):
                z = x[b, i, m]
                acc += z.real * z.real + z.imag * z.imag
                grad[b, i, m] = weights[b] * z
        norms[b] = acc
        total += weights[b] * acc
    return total, gate_err, norms, grad


@numba.njit(cache=True)
def cost_and_gradient(pb, qb, rb, pairs, n_blocks, phases, target, weights):
    n = phases.shape[0]
    xs = forward_states(pb, qb, rb, pairs, n_blocks, phases)
    total, _, _, lam = terminal_cost(xs[n], target, weights)
    grad = np.empty(n)
    prev = np.zeros_like(lam)
    for j in range(n - 1, -1, -1):
        c = np.cos(phases[j])
        s = np.sin(phases[j])
        acc = 0.0
        prev[:] = 0.0
        for k in range(pairs.shape[0]):
            a = pairs[k, 0]
            b = pairs[k, 1]
            for i in range(2):
                for m in range(2):
                    dv = -s * qb[k, i, m] + c * rb[k, i, m]
                    v = pb[k, i, m] + c * qb[k, i, m] + s * rb[k, i, m]
                    # Re tr(lam_a^dagger dV_ab X_b)
                    for col in range(2):
                        acc += (np.conj(lam[a, i, col]) * dv * xs[j, b, m, col]).real
                        prev[b, m, col] += np.conj(v) * lam[a, i, col]
        grad[j] = 2.0 * acc
        lam[:] = prev
    return total, grad
