import numpy as np


def spectral_norm_power(M, seed=0, iters=20000, tol=1e-14):
    """Largest singular value by power iteration on M^T M.

    Independent of any SVD routine; used as the oracle for truncation-error
    checks.
    """
    M = np.asarray(M, dtype=float)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(M.shape[1])
    v /= np.linalg.norm(v)
    last = 0.0
    for _ in range(iters):
        w = M.T @ (M @ v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        est = np.sqrt(norm)
        if abs(est - last) <= tol * max(est, 1.0):
            return float(np.linalg.norm(M @ v))
        last = est
    return float(np.linalg.norm(M @ v))
