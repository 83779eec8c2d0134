"""Sparse SPD solves and the non-negativity constrained convex QP.

``solve_nonneg_qp`` minimises ``1/2 <c, K c> - <c, f>`` subject to ``c >= 0``
with a primal active-set method. The working set holds the indices pinned
at zero; each change of the working set refactorises the free block.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "SolverError",
    "NotSPDError",
    "QPDivergenceError",
    "SymSparseMatrix",
    "QPResult",
    "solve_spd",
    "solve_nonneg_qp",
]

log = logging.getLogger(__name__)

# systems above this size use preconditioned CG instead of a sparse factorisation
CG_THRESHOLD = 200_000
RESIDUAL_RTOL = 1e-10
# refinement stagnates near eps * cond(K); only residuals above this are reported
RESIDUAL_WARN = 1e-6


class SolverError(RuntimeError):
    pass


class NotSPDError(SolverError):
    pass


class QPDivergenceError(SolverError):
    pass


class SymSparseMatrix:
    """Symmetric sparse matrix stored as its upper triangle (diagonal included)."""

    def __init__(self, upper: sp.spmatrix):
        upper = sp.csr_matrix(sp.triu(upper))
        upper.sort_indices()
        self.upper = upper
        self._full = None

    @classmethod
    def from_full(cls, K, check: bool = True) -> "SymSparseMatrix":
        K = sp.csr_matrix(K)
        if check:
            diff = K - K.T
            if diff.nnz and np.any(diff.data != 0):
                raise ValueError("matrix is not exactly symmetric")
        out = cls(K)
        out._full = K
        return out

    @property
    def n(self) -> int:
        return self.upper.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.upper.shape

    def full(self) -> sp.csr_matrix:
        if self._full is None:
            U = self.upper
            strict = sp.triu(U, k=1)
            self._full = sp.csr_matrix(U + strict.T)
        return self._full

    def diagonal(self) -> np.ndarray:
        return self.upper.diagonal()

    def __matmul__(self, x):
        return self.full() @ x

    def toarray(self) -> np.ndarray:
        return self.full().toarray()


def _as_operator(K):
    if isinstance(K, SymSparseMatrix):
        return K.full()
    if sp.issparse(K):
        return sp.csr_matrix(K)
    return np.asarray(K, dtype=float)


class _Factor:
    """Cholesky-type factorisation of an SPD matrix (dense or sparse)."""

    def __init__(self, A):
        self.n = A.shape[0]
        if sp.issparse(A):
            self._init_sparse(sp.csc_matrix(A))
        else:
            self._init_dense(np.asarray(A, dtype=float))

    def _init_dense(self, A):
        self.sparse = False
        try:
            self.cho = sla.cho_factor(A, lower=False, check_finite=True)
        except sla.LinAlgError as exc:
            raise NotSPDError(f"matrix is not positive definite ({exc})") from None

    def _init_sparse(self, A):
        # Symmetric-mode LU without off-diagonal pivoting is an LDL^T
        # factorisation; all pivots positive <=> SPD.
        self.sparse = True
        try:
            lu = spla.splu(
                A,
                permc_spec="MMD_AT_PLUS_A",
                diag_pivot_thresh=0.0,
                options={"SymmetricMode": True},
            )
        except RuntimeError as exc:
            raise NotSPDError(f"factorisation failed, matrix is singular ({exc})") from None
        if not np.array_equal(lu.perm_r, lu.perm_c):
            raise NotSPDError("factorisation needed off-diagonal pivoting; matrix is not SPD")
        piv = lu.U.diagonal()
        bad = np.flatnonzero(~(piv > 0))
        if bad.size:
            row = int(lu.perm_c[bad[0]]) if bad[0] < len(lu.perm_c) else int(bad[0])
            raise NotSPDError(
                f"non-positive pivot {piv[bad[0]]!r} at elimination step {int(bad[0])} (row {row})"
            )
        self.lu = lu

    def solve(self, b):
        if self.sparse:
            return self.lu.solve(b)
        return sla.cho_solve(self.cho, b)


def solve_spd(K, f, rtol: float = RESIDUAL_RTOL) -> np.ndarray:
    """Solve ``K x = f`` for symmetric positive definite ``K``.

    Uses a sparse (or dense) Cholesky-type factorisation with a few steps of
    iterative refinement; systems larger than ``CG_THRESHOLD`` go through
    Jacobi-preconditioned CG. The relative residual target is ``rtol``.
    """
    A = _as_operator(K)
    f = np.asarray(f, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or f.shape != (n,):
        raise ValueError(f"shape mismatch: K {A.shape}, f {f.shape}")
    if n == 0:
        return np.zeros(0)
    fn = np.linalg.norm(f)
    if fn == 0:
        return np.zeros(n)
    if n > CG_THRESHOLD and sp.issparse(A):
        return _solve_cg(A, f, rtol)
    fac = _Factor(A)
    x = fac.solve(f)
    res = np.linalg.norm(f - A @ x)
    for _ in range(3):
        if res <= rtol * fn:
            break
        x_new = x + fac.solve(f - A @ x)
        res_new = np.linalg.norm(f - A @ x_new)
        if res_new >= res:
            break
        x, res = x_new, res_new
    if res > RESIDUAL_WARN * fn:
        log.warning("solve_spd: relative residual %.3e above %.1e", res / fn, RESIDUAL_WARN)
    return x


def _solve_cg(A, f, rtol):
    d = A.diagonal()
    if np.any(d <= 0):
        i = int(np.flatnonzero(d <= 0)[0])
        raise NotSPDError(f"non-positive diagonal entry {d[i]!r} at row {i}")
    M = sp.diags(1.0 / d)
    x, info = spla.cg(A, f, rtol=rtol, atol=0.0, M=M, maxiter=10 * A.shape[0])
    if info != 0:
        raise SolverError(f"conjugate gradients did not reach rtol={rtol} (info={info})")
    return x


@dataclass
class QPResult:
    """Minimiser of the bound-constrained QP and its optimality data."""

    x: np.ndarray
    active: np.ndarray
    multipliers: np.ndarray
    iterations: int
    kkt_residual: float
    objective_history: list = field(default_factory=list)

    @property
    def c(self) -> np.ndarray:
        return self.x


def _objective(A, f, x):
    return 0.5 * float(x @ (A @ x)) - float(x @ f)


def solve_nonneg_qp(K, f, max_changes: int | None = None, track_cycles: bool = True) -> QPResult:
    """Primal active-set solution of ``min 1/2 c.Kc - c.f  s.t.  c >= 0``.

    Starts from the clamped unconstrained solution. Each iteration solves the
    equality-constrained subproblem on the free indices; a feasible step is
    taken in full and followed by a multiplier test that releases the most
    negative multiplier, otherwise the maximal feasible step is taken and the
    first blocking bound joins the working set. Ties go to the lowest index.
    Optimal once all multipliers are >= ``-1e-12 * |f|_inf``.

    ``iterations`` counts working-set changes plus the final optimality check.
    """
    A = _as_operator(K)
    f = np.asarray(f, dtype=float)
    n = len(f)
    if n == 0:
        return QPResult(np.zeros(0), np.zeros(0, dtype=np.int64), np.zeros(0), 0, 0.0)
    if max_changes is None:
        max_changes = 10 * n
    fscale = max(np.abs(f).max(), np.finfo(float).tiny)
    mult_tol = 1e-12 * fscale
    dense = not sp.issparse(A)

    x = np.maximum(solve_spd(A, f), 0.0)
    working = x == 0.0
    history = [_objective(A, f, x)]
    seen = {working.tobytes()} if track_cycles else None
    changes = 0
    need_solve = True

    def change():
        nonlocal changes
        changes += 1
        if changes > max_changes:
            raise QPDivergenceError(f"active set did not settle within {max_changes} working-set changes")
        if seen is not None:
            key = working.tobytes()
            if key in seen:
                raise QPDivergenceError("working set repeated; active-set iteration is cycling")
            seen.add(key)

    while True:
        if need_solve:
            free = np.flatnonzero(~working)
            y = np.zeros(n)
            if free.size:
                sub = A[np.ix_(free, free)] if dense else A[free][:, free]
                y[free] = solve_spd(sub, f[free])
            p = y - x
            blocking = free[p[free] < 0]
            if blocking.size:
                ratios = x[blocking] / -p[blocking]
                k = int(np.argmin(ratios))
                alpha = ratios[k]
            if blocking.size and alpha < 1.0:
                j = int(blocking[k])
                x = x + alpha * p
                x[working] = 0.0
                x[j] = 0.0
                np.maximum(x, 0.0, out=x)
                working[j] = True
                history.append(_objective(A, f, x))
                change()
                continue
            x = y
            history.append(_objective(A, f, x))
            need_solve = False
        grad = A @ x - f
        act = np.flatnonzero(working)
        if act.size:
            lam = grad[act]
            k = int(np.argmin(lam))
            if lam[k] < -mult_tol:
                working[act[k]] = False
                need_solve = True
                change()
                continue
        break

    grad = A @ x - f
    act = np.flatnonzero(working)
    lam = grad[act]
    free = np.flatnonzero(~working)
    kkt = max(
        float(np.abs(grad[free]).max()) if free.size else 0.0,
        float(np.maximum(-lam, 0.0).max()) if act.size else 0.0,
    ) / fscale
    return QPResult(x, act, lam, changes + 1, kkt, history)
