"""Independent oracles and generators shared across the test suite."""

import numpy as np


def random_spd(rng, dim, jitter=1.0):
    """Random SPD matrix B.T @ B + jitter * I."""
    b = rng.standard_normal((dim, dim))
    return b.T @ b + jitter * np.eye(dim)


def random_layer(rng, d_out, d_in, n_samples):
    """Random weights plus calibration rows with mild column correlation."""
    mixing = np.eye(d_in) + 0.3 * rng.standard_normal((d_in, d_in)) / np.sqrt(d_in)
    weight = rng.standard_normal((d_out, d_in))
    rows = rng.standard_normal((n_samples, d_in)) @ mixing
    return weight, rows


def matmul_triple_loop(a, b):
    """Naive fixed-order matmul oracle; independent of any BLAS path."""
    n, k = a.shape
    k2, m = b.shape
    assert k == k2
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for t in range(k):
                acc += a[i, t] * b[t, j]
            out[i, j] = acc
    return out


def inverse_2x2_adjugate(a):
    """Closed-form 2x2 inverse oracle."""
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    return np.array([[a[1, 1], -a[0, 1]], [-a[1, 0], a[0, 0]]]) / det


def lstsq_reconstruct(weight, keep, calib_rows):
    """Least-squares reconstruction oracle, straight from activations.

    For each row, fits the kept columns of X to reproduce the dense row's
    outputs.  Never touches the Hessian code path.
    """
    out = np.zeros_like(weight)
    for r in range(weight.shape[0]):
        kept = np.nonzero(keep[r])[0]
        if kept.size == 0:
            continue
        target = calib_rows @ weight[r]
        coef, *_ = np.linalg.lstsq(calib_rows[:, kept], target, rcond=None)
        out[r, kept] = coef
    return out


def output_error(weight_a, weight_b, calib_rows):
    """Direct ||W_a X - W_b X||_F^2 oracle from activations."""
    diff = (weight_a - weight_b) @ calib_rows.T
    return float(np.sum(diff * diff))
