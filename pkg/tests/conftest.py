"""Shared test setup: single-threaded BLAS for reproducible timings, and
the finite-difference gradient oracle used across modules."""

import os

for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import numpy as np  # noqa: E402

try:
    from threadpoolctl import threadpool_limits
    threadpool_limits(1)
except Exception:  # pragma: no cover - best effort
    pass


def finite_difference(build_loss, arrays: list[np.ndarray],
                      h: float = 1e-5) -> list[np.ndarray]:
    """Central finite differences of a scalar through arbitrary code.

    ``build_loss`` must recompute the scalar from the current contents of
    ``arrays``; entries are perturbed in place one element at a time.
    """
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        flat = arr.ravel()
        gflat = g.ravel()
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            up = build_loss()
            flat[k] = orig - h
            down = build_loss()
            flat[k] = orig
            gflat[k] = (up - down) / (2.0 * h)
        grads.append(g)
    return grads


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray,
                       floor: float = 1e-6) -> float:
    """Elementwise |a - n| / max(|a|, |n|, floor), maximized.  The floor
    turns near-zero entries into an absolute comparison at the same
    tolerance scale."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float((np.abs(analytic - numeric) / denom).max())
