"""Shared test helpers: finite-difference oracle and a spanning oracle."""

import math

import numpy as np


def numeric_grad(f, x, h=1e-5):
    """Central finite differences of a scalar function at x, elementwise."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.ravel()
    gf = g.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gf[i] = (fp - fm) / (2.0 * h)
    return g


def max_rel_err(analytic, numeric):
    """Largest absolute difference, relative to the gradient scale."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(np.abs(analytic).max(initial=0.0),
                np.abs(numeric).max(initial=0.0), 1e-12)
    return float(np.abs(analytic - numeric).max() / scale)


def grad_check_params(forward_scalar, params, h=1e-5):
    """FD-check every Param in ``params`` against its .grad buffer.

    ``forward_scalar()`` must run a fresh forward pass and return the scalar
    the gradients in .grad refer to. Returns the worst relative error.
    """
    worst = 0.0
    for p in params:
        num = numeric_grad(lambda _x: forward_scalar(), p.value, h=h)
        worst = max(worst, max_rel_err(p.grad, num))
    return worst


class SpanningOracle:
    """Independent union-find over a finished frame; detects an 8-connected
    damaged path from the first to the last column."""

    def __init__(self, frame):
        frame = np.asarray(frame, dtype=bool)
        rows, cols = frame.shape
        parent = list(range(rows * cols))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        def union(a, b):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[rb] = ra

        for r in range(rows):
            for c in range(cols):
                if not frame[r, c]:
                    continue
                for dr in (-1, 0, 1):
                    for dc in (-1, 0, 1):
                        rr, cc = r + dr, c + dc
                        if (dr or dc) and 0 <= rr < rows and 0 <= cc < cols \
                                and frame[rr, cc]:
                            union(r * cols + c, rr * cols + cc)
        left = {find(r * cols + 0) for r in range(rows) if frame[r, 0]}
        right = {find(r * cols + cols - 1) for r in range(rows) if frame[r, cols - 1]}
        self.spanning = bool(left & right)


def local_maxima(series):
    s = np.asarray(series)
    return int(np.sum((s[1:-1] > s[:-2]) & (s[1:-1] > s[2:])))
