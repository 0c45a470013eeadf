"""Sparse symmetric solvers: preconditioned conjugate gradient and a direct
banded Cholesky for the positive definite inner systems."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels

PRECONDITIONERS = ("none", "jacobi", "ichol")


@dataclass
class SolverConfig:
    rel_tolerance: float = 1e-4
    max_iterations: int = 5000
    preconditioner: str = "ichol"

    def __post_init__(self):
        if self.rel_tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.preconditioner == "incomplete-factorization":
            self.preconditioner = "ichol"
        if self.preconditioner not in PRECONDITIONERS:
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")


class PcgResult(NamedTuple):
    x: np.ndarray
    iterations: int
    residual: float


class NonConvergenceError(RuntimeError):
    """Raised when PCG exhausts its budget; carries the best iterate seen."""

    def __init__(self, message, best_x, iterations, residual):
        super().__init__(message)
        self.best_x = best_x
        self.iterations = iterations
        self.residual = residual


class NotPositiveDefiniteError(RuntimeError):
    pass


def _as_csr(a) -> sp.csr_matrix:
    a = sp.csr_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    a.sort_indices()
    if a.dtype != np.float64:
        a = a.astype(np.float64)
    return a


class IncompleteCholesky:
    """IC(0) preconditioner over the lower-triangular pattern of A.

    The factorization exists for the M-matrices produced by this package; a
    diagonal shift retry covers near-breakdown cases. Requires the numba
    kernels; callers fall back to SuperLU ILU on the pure-numpy path.
    """

    def __init__(self, a: sp.csr_matrix):
        lower = sp.tril(a, format="csr")
        lower.sort_indices()
        self._indptr = lower.indptr
        self._indices = lower.indices
        base = lower.data
        scale = float(a.diagonal().max())
        shift = 0.0
        for _ in range(30):
            data = base.copy()
            bad_row = _kernels.ic0_factor(self._indptr, self._indices, data, shift)
            if bad_row < 0:
                self._data = data
                return
            shift = max(2.0 * shift, 1e-8 * scale)
        raise NotPositiveDefiniteError("incomplete factorization failed")

    def __call__(self, r: np.ndarray) -> np.ndarray:
        out = np.zeros_like(r)
        return _kernels.ic0_solve(self._indptr, self._indices, self._data, r, out)


def make_preconditioner(a: sp.csr_matrix, kind: str):
    """Application callable r -> M⁻¹ r, or None for the identity."""
    if kind == "none":
        return None
    if kind == "jacobi":
        diag = a.diagonal().copy()
        if (diag <= 0).any():
            raise NotPositiveDefiniteError("non-positive diagonal entry")
        inv = 1.0 / diag
        return lambda r: inv * r
    if kind == "ichol":
        if _kernels.numba_enabled():
            return IncompleteCholesky(a)
        ilu = spla.spilu(a.tocsc(), drop_tol=1e-4, fill_factor=10)
        return ilu.solve
    raise ValueError(f"unknown preconditioner {kind!r}")


def pcg_solve(a, b, x0=None, cfg: SolverConfig | None = None, precond=None) -> PcgResult:
    """Preconditioned conjugate gradient for symmetric (semi-)definite systems.

    Stops when ||A x - b|| / ||b|| falls below the configured tolerance
    (absolute residual when ||b|| = 0). Raises NonConvergenceError with the
    best iterate when the budget runs out. Pass ``precond`` to reuse a
    factorization across repeated solves with the same matrix.
    """
    cfg = cfg or SolverConfig()
    a = _as_csr(a)
    b = np.asarray(b, dtype=np.float64)
    n = b.shape[0]
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)

    use_kernel = _kernels.numba_enabled()
    buf = np.empty(n)

    def matvec(v):
        if use_kernel:
            return _kernels.csr_matvec(a.indptr, a.indices, a.data, v, buf).copy()
        return a @ v

    bnorm = float(np.linalg.norm(b))
    threshold = cfg.rel_tolerance * (bnorm if bnorm > 0 else 1.0)
    if precond is None:
        precond = make_preconditioner(a, cfg.preconditioner)

    r = b - matvec(x)
    rnorm = float(np.linalg.norm(r))
    best_x, best_rnorm = x.copy(), rnorm
    if rnorm <= threshold:
        return PcgResult(x, 0, rnorm / (bnorm if bnorm > 0 else 1.0))

    z = precond(r) if precond is not None else r
    p = z.copy()
    rz = float(r @ z)
    for k in range(1, cfg.max_iterations + 1):
        ap = matvec(p)
        denom = float(p @ ap)
        if denom <= 0:
            # direction of non-positive curvature: semi-definite system with an
            # inconsistent component; stop with the best iterate
            raise NonConvergenceError(
                "matrix is not positive definite along a search direction",
                best_x, k, best_rnorm / (bnorm if bnorm > 0 else 1.0),
            )
        alpha = rz / denom
        x = x + alpha * p
        r = r - alpha * ap
        rnorm = float(np.linalg.norm(r))
        if rnorm < best_rnorm:
            best_x, best_rnorm = x.copy(), rnorm
        if rnorm <= threshold:
            return PcgResult(x, k, rnorm / (bnorm if bnorm > 0 else 1.0))
        z = precond(r) if precond is not None else r
        rz_next = float(r @ z)
        p = z + (rz_next / rz) * p
        rz = rz_next
    raise NonConvergenceError(
        f"PCG did not reach {cfg.rel_tolerance:g} in {cfg.max_iterations} iterations",
        best_x, cfg.max_iterations, best_rnorm / (bnorm if bnorm > 0 else 1.0),
    )


def _check_symmetric(a: sp.csr_matrix) -> None:
    gap = abs(a - a.T)
    scale = max(abs(a.data).max() if a.nnz else 0.0, 1.0)
    if gap.nnz and gap.data.max() > 1e-10 * scale:
        raise ValueError("matrix is not symmetric")


def direct_solve_spd(a, b) -> np.ndarray:
    """Exact solve of a symmetric positive definite system by banded Cholesky.

    Column-major grid numbering keeps the bandwidth near the image height, so
    the banded factorization is a true Cholesky with contained fill.
    """
    a = _as_csr(a)
    b = np.asarray(b, dtype=np.float64)
    _check_symmetric(a)
    coo = a.tocoo()
    if coo.nnz == 0:
        raise NotPositiveDefiniteError("matrix not positive definite")
    bw = int(np.abs(coo.row - coo.col).max())
    n = a.shape[0]
    band = np.zeros((bw + 1, n))
    upper = coo.col >= coo.row
    rows = coo.row[upper]
    cols = coo.col[upper]
    band[bw - (cols - rows), cols] = coo.data[upper]
    try:
        return scipy.linalg.solveh_banded(band, b, lower=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("matrix not positive definite") from exc
