"""JIT-compiled hot kernels with a pure numpy/scipy fallback path.

Set NORMINT_PURE_NUMPY=1 to force the fallback (also used automatically when
numba is not importable). The flag is read at call time, so benchmarks can
compare both paths inside one process.
"""

from __future__ import annotations

import os

import numpy as np

PURE_NUMPY_ENV = "NORMINT_PURE_NUMPY"

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


def numba_enabled() -> bool:
    return HAVE_NUMBA and os.environ.get(PURE_NUMPY_ENV, "") not in ("1", "true", "yes")


@njit(cache=True)
def csr_matvec(indptr, indices, data, x, out):
    for i in range(indptr.shape[0] - 1):
        s = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            s += data[k] * x[indices[k]]
        out[i] = s
    return out


@njit(cache=True)
def ic0_factor(indptr, indices, data, shift):
    """In-place IC(0) on a lower-triangular CSR whose rows end at the diagonal.

    Keeps the sparsity pattern of the lower triangle; returns the first row
    where the pivot became non-positive (factorization failed), or -1.
    """
    n = indptr.shape[0] - 1
    for i in range(n):
        row_start = indptr[i]
        row_end = indptr[i + 1] - 1  # last entry is the diagonal
        for idx in range(row_start, row_end):
            j = indices[idx]
            s = data[idx]
            # dot of rows i and j over shared columns < j
            a = row_start
            b = indptr[j]
            b_end = indptr[j + 1] - 1
            while a < idx and b < b_end:
                ca = indices[a]
                cb = indices[b]
                if ca == cb:
                    s -= data[a] * data[b]
                    a += 1
                    b += 1
                elif ca < cb:
                    a += 1
                else:
                    b += 1
            data[idx] = s / data[indptr[j + 1] - 1]
        d = data[row_end] + shift
        for idx in range(row_start, row_end):
            d -= data[idx] * data[idx]
        if d <= 0.0:
            return i
        data[row_end] = np.sqrt(d)
    return -1


@njit(cache=True)
def ic0_solve(indptr, indices, data, rhs, out):
    """Solve L Lᵀ x = rhs for the IC(0) factor stored as lower CSR."""
    n = indptr.shape[0] - 1
    # forward: L y = rhs
    for i in range(n):
        s = rhs[i]
        for idx in range(indptr[i], indptr[i + 1] - 1):
            s -= data[idx] * out[indices[idx]]
        out[i] = s / data[indptr[i + 1] - 1]
    # backward: Lᵀ x = y, column sweep over the same storage
    for i in range(n - 1, -1, -1):
        xi = out[i] / data[indptr[i + 1] - 1]
        out[i] = xi
        for idx in range(indptr[i], indptr[i + 1] - 1):
            out[indices[idx]] -= data[idx] * xi
    return out


def warmup():
    """Trigger JIT compilation on a tiny system (used before timing runs)."""
    if not numba_enabled():
        return
    indptr = np.array([0, 1, 3], dtype=np.int32)
    indices = np.array([0, 0, 1], dtype=np.int32)
    data = np.array([4.0, -1.0, 4.0])
    out = np.zeros(2)
    csr_matvec(indptr, indices, data, np.ones(2), out)
    ic0_factor(indptr, indices, data.copy(), 0.0)
    ic0_solve(indptr, indices, data, np.ones(2), out)
