"""Independent reference computations shared by the test modules."""

import numpy as np


def enumerate_nonneg_qp(K, f, tol=1e-10):
    """Minimiser of ``1/2 c.Kc - c.f`` over ``c >= 0`` by trying every active set.

    Each of the ``2**n`` candidate free sets gets a dense solve of its
    subproblem; a candidate is accepted when it is primal feasible and its
    multipliers on the pinned indices are non-negative. Among accepted
    candidates (several can coincide at degenerate points) the lowest
    objective wins.
    """
    K = np.asarray(K, dtype=float)
    f = np.asarray(f, dtype=float)
    n = len(f)
    scale = max(np.abs(f).max(), 1e-300)
    masks = ((np.arange(2**n)[:, None] >> np.arange(n)) & 1).astype(bool)
    counts = masks.sum(axis=1)
    best, best_obj = None, np.inf
    for k in range(n + 1):
        sel = masks[counts == k]
        X = np.zeros((len(sel), n))
        if k:
            idx = np.nonzero(sel)[1].reshape(len(sel), k)
            sub = K[idx[:, :, None], idx[:, None, :]]
            X[np.arange(len(sel))[:, None], idx] = np.linalg.solve(sub, f[idx][..., None])[..., 0]
        grad = X @ K - f
        ok = np.all(X >= -tol * scale, axis=1) & np.all(np.where(sel, True, grad >= -tol * scale), axis=1)
        if not np.any(ok):
            continue
        cand = np.maximum(X[ok], 0.0)
        obj = 0.5 * np.einsum("mi,ij,mj->m", cand, K, cand) - cand @ f
        j = int(np.argmin(obj))
        if obj[j] < best_obj:
            best, best_obj = cand[j], obj[j]
    return best


def random_spd(rng, n):
    """Random SPD matrix with condition number at most about 1e3."""
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eig = 10.0 ** rng.uniform(-1.5, 1.5, n)
    K = (Q * eig) @ Q.T
    return 0.5 * (K + K.T)
