"""NMF with automatic model selection (NMFk).

For every candidate ``k`` an ensemble of perturbed copies of ``X`` is
factorized, the ``M * k`` basis columns are clustered under the constraint
that each cluster holds exactly one column per ensemble member, and the
cluster medians give a robust ``W``. ``H`` is regressed with NNLS. Cluster
silhouettes measure stability; rank-sum tests on the per-column errors of
consecutive ``k`` measure whether adding a component still changes the fit.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .nmf import as_feature_matrix, column_errors, nmf_mu, nnls, perturb, relative_error
from .stats import wilcoxon_ranksum

__all__ = [
    "ColumnClusters",
    "KDiagnostics",
    "NmfkResult",
    "member_seed",
    "custom_cluster",
    "cluster_silhouettes",
    "select_k",
    "nmfk",
    "diagnostics_csv",
]

DIAGNOSTIC_COLUMNS = ("k", "min_silhouette", "mean_silhouette", "rel_error", "p_value")


def member_seed(base_seed, k: int, q: int, stream: int = 0) -> np.random.SeedSequence:
    """Seed for ensemble member ``q`` at rank ``k``; independent of run order."""
    if isinstance(base_seed, np.random.SeedSequence):
        entropy = base_seed.entropy
        key = tuple(base_seed.spawn_key) + (k, q, stream)
        return np.random.SeedSequence(entropy, spawn_key=key)
    return np.random.SeedSequence([int(base_seed), k, q, stream])


def _unit_columns(A):
    norms = np.linalg.norm(A, axis=0)
    safe = np.where(norms > 0, norms, 1.0)
    return A / safe, norms == 0


@dataclass
class ColumnClusters:
    """Output of :func:`custom_cluster`.

    ``assignment[q, j]`` is the cluster of column ``j`` of member ``q``;
    ``aligned[q][:, c]`` is the column of member ``q`` placed in cluster ``c``.
    """

    assignment: np.ndarray
    aligned: np.ndarray
    medians: np.ndarray
    n_rounds: int
    zero_columns: bool = False

    @property
    def n_members(self) -> int:
        return self.aligned.shape[0]

    @property
    def k(self) -> int:
        return self.aligned.shape[2]


def custom_cluster(ensemble_W, max_rounds: int = 100) -> ColumnClusters:
    """Cluster ensemble columns with one column per member in every cluster.

    Medians start from member 0. Each round matches every member's columns
    one-to-one to the current medians, maximizing total cosine similarity
    (Hungarian assignment), then recomputes entrywise medians. Stops when the
    assignment no longer changes.
    """
    Ws = np.stack([np.asarray(W, dtype=np.float64) for W in ensemble_W])
    if Ws.ndim != 3:
        raise ValueError("ensemble members must be 2-d matrices of equal shape")
    M, n, k = Ws.shape
    if M < 1:
        raise ValueError("empty ensemble")

    units = np.empty_like(Ws)
    zero_cols = False
    for q in range(M):
        units[q], z = _unit_columns(Ws[q])
        zero_cols |= bool(z.any())

    medians = Ws[0].copy()
    assignment = np.tile(np.arange(k), (M, 1))
    aligned = Ws.copy()
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        med_unit, _ = _unit_columns(medians)
        new = np.empty_like(assignment)
        for q in range(M):
            sim = units[q].T @ med_unit  # zero columns give similarity 0
            rows, cols = linear_sum_assignment(sim, maximize=True)
            new[q, rows] = cols
        for q in range(M):
            aligned[q][:, new[q]] = Ws[q]
        medians = np.median(aligned, axis=0)
        if rounds > 1 and np.array_equal(new, assignment):
            break
        assignment = new
    return ColumnClusters(assignment, aligned, medians, rounds, zero_cols)


def cluster_silhouettes(clusters: ColumnClusters) -> tuple[np.ndarray, float, float]:
    """Cosine-distance silhouettes of the clustered columns.

    Returns ``(per_cluster, min_silhouette, mean_silhouette)`` where
    ``per_cluster[c]`` averages the point silhouettes of cluster ``c``. A
    single cluster (``k = 1``) or single-member clusters (``M = 1``) score 1
    by convention.
    """
    M, n, k = clusters.aligned.shape
    if k == 1 or M == 1:
        per = np.ones(k)
        return per, 1.0, 1.0
    # points ordered cluster-major: point c*M + q
    pts = clusters.aligned.transpose(2, 0, 1).reshape(k * M, n)
    norms = np.linalg.norm(pts, axis=1)
    unit = pts / np.where(norms > 0, norms, 1.0)[:, None]
    D = np.clip(1.0 - unit @ unit.T, 0.0, 2.0)
    np.fill_diagonal(D, 0.0)
    # mean distance from each point to each cluster
    block = D.reshape(k * M, k, M).sum(axis=2)
    labels = np.repeat(np.arange(k), M)
    own = block[np.arange(k * M), labels] / (M - 1)
    other = block / M
    other[np.arange(k * M), labels] = np.inf
    nearest = other.min(axis=1)
    denom = np.maximum(own, nearest)
    s = np.where(denom > 0, (nearest - own) / np.where(denom > 0, denom, 1.0), 0.0)
    per = s.reshape(k, M).mean(axis=1)
    return per, float(per.min()), float(s.mean())


@dataclass
class KDiagnostics:
    k: int
    min_silhouette: float
    mean_silhouette: float
    rel_error: float
    column_errors: np.ndarray = field(repr=False)
    p_value_vs_next: float | None = None
    cluster_silhouettes: np.ndarray | None = field(default=None, repr=False)


@dataclass
class NmfkResult:
    k_opt: int
    W: np.ndarray
    H: np.ndarray
    per_k: list[KDiagnostics]
    sil_threshold: float = 0.8
    alpha: float = 0.05
    flags: tuple[str, ...] = ()

    def diagnostics(self, k: int) -> KDiagnostics:
        for d in self.per_k:
            if d.k == k:
                return d
        raise KeyError(k)

    @property
    def unstable_selection(self) -> bool:
        return "unstable-selection" in self.flags


def select_k(per_k, sil_threshold: float = 0.8, alpha: float = 0.05) -> tuple[int, bool]:
    """Pick the number of latent features from per-k diagnostics.

    Among candidates whose minimum silhouette reaches ``sil_threshold``, the
    largest ``k`` whose column errors are indistinguishable from those at
    ``k + 1`` (rank-sum ``p >= alpha``) wins; the last candidate of the range
    has no successor and always passes this test. If no stable candidate
    passes, the largest stable ``k`` is used; if nothing is stable,
    the ``k`` with the highest minimum silhouette is returned and the second
    return value (the fallback flag) is true.
    """
    per_k = list(per_k)
    if not per_k:
        raise ValueError("no candidate k")
    ks = [d.k for d in per_k]
    if ks != list(range(ks[0], ks[0] + len(ks))):
        raise ValueError("candidate k values must be contiguous and increasing")
    stable = [d for d in per_k if d.min_silhouette >= sil_threshold]
    if not stable:
        best = max(per_k, key=lambda d: (d.min_silhouette, -d.k))
        return best.k, True
    last = ks[-1]
    passing = [d for d in stable
               if d.k == last or (d.p_value_vs_next is not None and d.p_value_vs_next >= alpha)]
    if passing:
        return passing[-1].k, False
    return stable[-1].k, False


def _factorize_member(X, k, q, seed, epsilon, max_iter, tol):
    Xq = perturb(X, epsilon, member_seed(seed, k, q, 0))
    return nmf_mu(Xq, k, member_seed(seed, k, q, 1), max_iter=max_iter, tol=tol).W


def nmfk(X, k_min: int = 1, k_max: int = 10, n_perturbs: int = 20, sil_threshold: float = 0.8,
         alpha: float = 0.05, epsilon: float = 0.015, max_iter: int = 500, tol: float = 1e-8,
         seed=0, n_jobs: int = 1, keep_factors: bool = False) -> NmfkResult:
    """Run NMFk over ``k_min..k_max`` and return the robust factors at ``k_opt``.

    ``n_jobs`` threads share the (k, member) factorization grid; every task
    has its own derived seed so the result does not depend on ``n_jobs``.
    With ``keep_factors`` the robust ``(W, H)`` for every candidate are kept
    in ``result.factors``.
    """
    X = as_feature_matrix(X)
    n, m = X.shape
    if not 1 <= k_min <= k_max:
        raise ValueError(f"need 1 <= k_min <= k_max, got [{k_min}, {k_max}]")
    if k_max > min(n, m):
        raise ValueError(f"k_max={k_max} exceeds min(n, m)={min(n, m)}")
    if n_perturbs < 1:
        raise ValueError("n_perturbs must be >= 1")

    ks = list(range(k_min, k_max + 1))
    tasks = [(k, q) for k in ks for q in range(n_perturbs)]
    run = lambda kq: _factorize_member(X, kq[0], kq[1], seed, epsilon, max_iter, tol)  # noqa: E731
    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]

    per_k: list[KDiagnostics] = []
    factors = {}
    flags = []
    for i, k in enumerate(ks):
        Ws = results[i * n_perturbs:(i + 1) * n_perturbs]
        Ws = [_unit_columns(W)[0] for W in Ws]
        clusters = custom_cluster(Ws)
        if clusters.zero_columns:
            flags.append(f"zero-column-k{k}")
        W_med = clusters.medians
        info = nnls(X, W_med, return_info=True)
        if info.flagged:
            flags.append(f"nnls-zero-column-k{k}")
        per, smin, smean = cluster_silhouettes(clusters)
        per_k.append(KDiagnostics(
            k=k,
            min_silhouette=smin,
            mean_silhouette=smean,
            rel_error=relative_error(X, W_med, info.H) if np.any(X) else 0.0,
            column_errors=column_errors(X, W_med, info.H),
            cluster_silhouettes=per,
        ))
        factors[k] = (W_med, info.H)

    for a, b in zip(per_k, per_k[1:]):
        a.p_value_vs_next = wilcoxon_ranksum(a.column_errors, b.column_errors)

    k_opt, fallback = select_k(per_k, sil_threshold, alpha)
    if fallback:
        flags.append("unstable-selection")
    W, H = factors[k_opt]
    result = NmfkResult(k_opt, W, H, per_k, sil_threshold, alpha, tuple(flags))
    if keep_factors:
        result.factors = factors
    return result


def diagnostics_csv(per_k) -> str:
    """Per-k table as CSV text: ``k,min_silhouette,mean_silhouette,rel_error,p_value``.

    ``p_value`` is empty for the last candidate.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(DIAGNOSTIC_COLUMNS)
    for d in per_k:
        p = "" if d.p_value_vs_next is None else repr(float(d.p_value_vs_next))
        writer.writerow([d.k, repr(float(d.min_silhouette)), repr(float(d.mean_silhouette)),
                         repr(float(d.rel_error)), p])
    return buf.getvalue()
