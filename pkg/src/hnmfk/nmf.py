"""Non-negative factorization primitives.

Frobenius-norm multiplicative updates, the perturbation used to build
resampling ensembles, column-wise non-negative least squares and the two
reconstruction error measures.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "FactorPair",
    "NnlsResult",
    "as_feature_matrix",
    "nmf_mu",
    "perturb",
    "nnls",
    "nnls_vector",
    "relative_error",
    "column_errors",
]

# added to every MU denominator
DENOM_GUARD = 1e-16


@dataclass
class FactorPair:
    """Result of a single NMF minimization, ``X ~ W @ H``."""

    W: np.ndarray
    H: np.ndarray
    n_iter: int = 0
    history: list[float] | None = field(default=None, repr=False)

    @property
    def k(self) -> int:
        return self.W.shape[1]

    def __iter__(self):
        # allows ``W, H = nmf_mu(...)``
        return iter((self.W, self.H))


def as_feature_matrix(X, name: str = "X") -> np.ndarray:
    """Validate and convert ``X`` to a 2-d float64 non-negative array."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {X.shape}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and one column")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite entries")
    if np.any(X < 0):
        raise ValueError(f"{name} contains negative entries")
    return X


def _objective(XX: float, WtX, WtW, H, HHt) -> float:
    # ||X - WH||_F from k-sized products: ||X||^2 - 2<W'X, H> + <W'W, HH'>
    val = XX - 2.0 * np.sum(WtX * H) + np.sum(WtW * HHt)
    return float(np.sqrt(max(val, 0.0)))


def nmf_mu(X, k: int, seed=0, max_iter: int = 500, tol: float = 1e-8,
           track: bool = False) -> FactorPair:
    """Factorize ``X ~ W H`` with Lee-Seung multiplicative updates.

    Parameters
    ----------
    X : array_like, shape (n, m)
        Non-negative data matrix.
    k : int
        Latent dimension, ``1 <= k <= min(n, m)``.
    seed : int or numpy.random.SeedSequence
        Seed for the uniform (0, 1] initialization of ``W`` and ``H``.
    max_iter : int
        Maximum number of update sweeps.
    tol : float
        Stop once the relative change of the Frobenius objective between
        two sweeps falls below ``tol``.
    track : bool
        If true, record the exact objective ``||X - W H||_F`` at the
        initial point and after every sweep in ``FactorPair.history``.

    Returns
    -------
    FactorPair
    """
    X = as_feature_matrix(X)
    n, m = X.shape
    if not isinstance(k, (int, np.integer)) or k < 1 or k > min(n, m):
        raise ValueError(f"k must satisfy 1 <= k <= min(n, m) = {min(n, m)}, got {k}")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if tol < 0:
        raise ValueError("tol must be >= 0")

    rng = np.random.default_rng(seed)
    # uniform on (0, 1]
    W = 1.0 - rng.random((n, k))
    H = 1.0 - rng.random((k, m))

    XX = float(np.sum(X * X))
    history = [float(np.linalg.norm(X - W @ H))] if track else None
    HHt = H @ H.T
    prev = None
    done = 0
    for it in range(1, max_iter + 1):
        WtX = W.T @ X
        WtW = W.T @ W
        if tol > 0:
            # objective of the state left by the previous sweep
            obj = _objective(XX, WtX, WtW, H, HHt)
            if prev is not None and abs(prev - obj) <= tol * max(prev, np.finfo(float).tiny):
                break
            prev = obj
        H *= WtX / (WtW @ H + DENOM_GUARD)
        XHt = X @ H.T
        HHt = H @ H.T
        W *= XHt / (W @ HHt + DENOM_GUARD)
        done = it
        if track:
            history.append(float(np.linalg.norm(X - W @ H)))
    return FactorPair(W, H, done, history)


def perturb(X, epsilon: float = 0.015, seed=0) -> np.ndarray:
    """Multiplicative uniform noise: ``X_ij * u`` with ``u ~ U[1-eps, 1+eps]``.

    Zeros stay zero and the output is non-negative for ``0 <= eps < 1``.
    """
    if not 0 <= epsilon < 1:
        raise ValueError(f"epsilon must satisfy 0 <= epsilon < 1, got {epsilon}")
    X = np.asarray(X, dtype=np.float64)
    if epsilon == 0:
        return X.copy()
    rng = np.random.default_rng(seed)
    return X * rng.uniform(1.0 - epsilon, 1.0 + epsilon, size=X.shape)


@dataclass
class NnlsResult:
    H: np.ndarray
    zero_columns: np.ndarray  # indices of all-zero columns of W, coefficients fixed to 0

    @property
    def flagged(self) -> bool:
        return self.zero_columns.size > 0


def _solve_passive(G, c, P):
    Gp = G[np.ix_(P, P)]
    try:
        return np.linalg.solve(Gp, c[P])
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(Gp, c[P], rcond=None)[0]


def nnls_vector(G, c, usable=None, max_iter: int | None = None) -> np.ndarray:
    """Lawson-Hanson active set on the normal equations.

    Minimizes ``0.5 h'Gh - c'h`` subject to ``h >= 0`` where ``G = W'W`` and
    ``c = W'x``. Only indices in ``usable`` may become positive.
    """
    k = G.shape[0]
    usable = np.ones(k, dtype=bool) if usable is None else usable
    if max_iter is None:
        max_iter = 3 * k + 30
    h = np.zeros(k)
    passive = np.zeros(k, dtype=bool)
    tol = 10 * np.finfo(float).eps * max(1.0, np.abs(G).max(initial=0.0)) * k

    for _ in range(max_iter):
        grad = c - G @ h  # negative gradient
        cand = usable & ~passive & (grad > tol)
        if not cand.any():
            break
        j = np.flatnonzero(cand)[np.argmax(grad[cand])]
        passive[j] = True
        while True:
            P = np.flatnonzero(passive)
            s = np.zeros(k)
            s[P] = _solve_passive(G, c, P)
            if np.all(s[P] > 0):
                h = s
                break
            neg = P[s[P] <= 0]
            alpha = np.min(h[neg] / (h[neg] - s[neg]))
            h = h + alpha * (s - h)
            passive &= h > tol
            h[~passive] = 0.0
            if not passive.any():
                break
    return h


def nnls(X, W, return_info: bool = False):
    """Column-wise non-negative regression of ``X`` on ``W``.

    For every column ``j`` solves ``min ||X[:, j] - W h||_2`` over ``h >= 0``.
    All-zero columns of ``W`` get coefficient 0 and are reported in
    ``NnlsResult.zero_columns``.

    Returns the ``(k, m)`` coefficient matrix, or an :class:`NnlsResult`
    when ``return_info`` is true.
    """
    X = np.asarray(X, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if W.ndim != 2 or X.shape[0] != W.shape[0]:
        raise ValueError(f"shape mismatch: X {X.shape}, W {W.shape}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(W))):
        raise ValueError("non-finite entries in nnls operands")

    usable = np.any(W != 0, axis=0)
    G = W.T @ W
    C = W.T @ X
    H = np.zeros((W.shape[1], X.shape[1]))
    for j in range(X.shape[1]):
        H[:, j] = nnls_vector(G, C[:, j], usable)
    if return_info:
        return NnlsResult(H, np.flatnonzero(~usable))
    return H


def relative_error(X, W, H) -> float:
    """``||X - W H||_F / ||X||_F``; undefined (ValueError) for a zero ``X``."""
    X = np.asarray(X, dtype=np.float64)
    norm_x = np.linalg.norm(X)
    if norm_x == 0:
        raise ValueError("relative error is undefined for an all-zero X")
    return float(np.linalg.norm(X - np.asarray(W) @ np.asarray(H)) / norm_x)


def column_errors(X, W, H) -> np.ndarray:
    """Per-column relative reconstruction error; zero columns of ``X`` give 0."""
    X = np.asarray(X, dtype=np.float64)
    R = np.asarray(W) @ np.asarray(H)
    if R.shape != X.shape:
        raise ValueError(f"shape mismatch: X {X.shape}, WH {R.shape}")
    num = np.linalg.norm(X - R, axis=0)
    den = np.linalg.norm(X, axis=0)
    out = np.zeros(X.shape[1])
    nz = den > 0
    out[nz] = num[nz] / den[nz]
    return out
