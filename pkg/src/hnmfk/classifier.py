"""Hierarchical semi-supervised bulk classification over NMFk clusters.

Known (``y >= 1``) and unknown (``y == -1``) samples are factorized
together. Samples are clustered by the largest entry of their row of ``W``.
Each cluster is then

* left unpredicted when it holds no known sample (abstaining prediction),
* closed when it holds no unknown sample,
* labeled with its dominant known class when the fraction of known samples
  in that class reaches the uniformity threshold ``t``,
* otherwise factorized again on its own rows.

Two ablations share the machinery: a rank-two variant without model
selection (:func:`classify_hnmf2`) and a "classical" variant that builds the
tree from known samples only and routes each unknown sample down the tree by
cosine similarity to the rows of ``H`` (:func:`classical_predict`).
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .nmf import as_feature_matrix
from .nmfk import NmfkResult, nmfk

__all__ = [
    "EXIT_REASONS",
    "ClassifierParams",
    "HierarchyNode",
    "w_cluster_assign",
    "cluster_uniformity",
    "classify",
    "classify_hnmf2",
    "build_hierarchy",
    "classical_classify",
    "classical_route",
    "classical_predict",
    "hierarchy_records",
    "hierarchy_stats",
]

EXIT_REASONS = (
    "expanded",
    "pure-cluster-classified",
    "abstained-no-known",
    "no-unknowns",
    "depth-guard",
    "no-progress-guard",
)
GUARD_REASONS = ("depth-guard", "no-progress-guard")


@dataclass
class ClassifierParams:
    t: float = 1.0
    k_min_root: int = 1
    k_max_root: int = 100
    n_perturbs: int = 20
    epsilon: float = 0.015
    max_iter: int = 500
    tol: float = 1e-8
    sil_threshold: float = 0.8
    alpha: float = 0.05
    max_depth: int = 50
    min_node_size: int = 2
    # "algorithm": child k range [1, min(k_opt + 1, dims)]; "prose": [1, min(k_opt, dims)]
    child_k_rule: str = "algorithm"
    seed: int = 0
    n_jobs: int = 1

    def validate(self):
        if not 0 < self.t <= 1:
            raise ValueError(f"t must lie in (0, 1], got {self.t}")
        if not 1 <= self.k_min_root <= self.k_max_root:
            raise ValueError("need 1 <= k_min_root <= k_max_root")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.child_k_rule not in ("algorithm", "prose"):
            raise ValueError(f"unknown child_k_rule {self.child_k_rule!r}")
        if self.n_perturbs < 1:
            raise ValueError("n_perturbs must be >= 1")


@dataclass
class HierarchyNode:
    node_id: str
    indices: np.ndarray
    depth: int
    parent_id: str | None = None
    known_count: int = 0
    unknown_count: int = 0
    nmfk: NmfkResult | None = None
    children: list[tuple[int, "HierarchyNode"]] = field(default_factory=list)
    exit_reason: str = "expanded"
    dominant_class: int | None = None
    uniformity: float | None = None
    predicted_class: int | None = None
    flags: list[str] = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def child(self, cluster: int) -> "HierarchyNode | None":
        for c, node in self.children:
            if c == cluster:
                return node
        return None

    def walk(self):
        """Pre-order traversal, children in cluster order."""
        yield self
        for _, ch in self.children:
            yield from ch.walk()


def w_cluster_assign(W) -> np.ndarray:
    """Cluster of each sample: column of its largest ``W`` entry (ties -> lowest)."""
    W = np.asarray(W)
    if W.ndim != 2 or W.shape[1] < 1:
        raise ValueError("W must be 2-d with at least one column")
    return np.argmax(W, axis=1)


def cluster_uniformity(labels, return_dominant: bool = False):
    """Fraction of known samples that belong to the dominant class.

    Ties between equally frequent classes go to the lowest class id.
    """
    labels = [int(v) for v in np.asarray(labels).ravel()]
    if not labels:
        raise ValueError("uniformity is undefined for a cluster without known samples")
    counts = Counter(labels)
    top = max(counts.values())
    dominant = min(c for c, v in counts.items() if v == top)
    u = top / len(labels)
    return (u, dominant) if return_dominant else u


def _check_inputs(X, y):
    X = as_feature_matrix(X)
    y = np.asarray(y)
    if y.ndim != 1 or y.size != X.shape[0]:
        raise ValueError(f"labels ({y.size}) do not align with X rows ({X.shape[0]})")
    if not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.equal(np.mod(y, 1), 0)):
            raise ValueError("labels must be integers")
    y = y.astype(np.int64)
    if np.any((y != -1) & (y < 1)):
        raise ValueError("labels must be -1 (unknown) or class ids >= 1")
    return X, y


def _node_seed(base, node_id: str) -> np.random.SeedSequence:
    path = tuple(int(p) for p in node_id.split("."))
    return np.random.SeedSequence(int(base), spawn_key=path)


class _Builder:
    def __init__(self, X, y, params: ClassifierParams, fixed_k: int | None = None,
                 require_unknowns: bool = True, cache: dict | None = None):
        self.cache = cache
        self.X = X
        self.y = y
        self.p = params
        self.fixed_k = fixed_k
        self.require_unknowns = require_unknowns
        self.pred = y.copy()

    def factorize(self, node, k_lo, k_hi) -> NmfkResult:
        p = self.p
        Xs = self.X[node.indices]
        key = None
        if self.cache is not None:
            digest = hashlib.sha256(np.ascontiguousarray(Xs).tobytes()).hexdigest()
            key = (digest, Xs.shape, node.node_id, k_lo, k_hi, p.n_perturbs, p.sil_threshold,
                   p.alpha, p.epsilon, p.max_iter, p.tol, p.seed)
            if key in self.cache:
                return self.cache[key]
        res = nmfk(Xs, k_lo, k_hi, n_perturbs=p.n_perturbs, sil_threshold=p.sil_threshold,
                   alpha=p.alpha, epsilon=p.epsilon, max_iter=p.max_iter, tol=p.tol,
                   seed=_node_seed(p.seed, node.node_id), n_jobs=p.n_jobs)
        if key is not None:
            self.cache[key] = res
        return res

    def child_range(self, n_rows, k_opt):
        dims = min(n_rows, self.X.shape[1])
        if self.fixed_k is not None:
            return self.fixed_k, self.fixed_k, dims >= self.fixed_k
        top = k_opt + 1 if self.p.child_k_rule == "algorithm" else k_opt
        return 1, min(top, dims), True

    def expand(self, node: HierarchyNode, k_lo: int, k_hi: int):
        p, y = self.p, self.y
        res = self.factorize(node, k_lo, k_hi)
        node.nmfk = res
        node.exit_reason = "expanded"
        if res.unstable_selection:
            node.flags.append("unstable-selection")
        W = res.W
        if np.any(~np.any(W > 0, axis=1)):
            node.flags.append("zero-row-in-W")
        assign = w_cluster_assign(W)

        for c in range(res.k_opt):
            members = node.indices[assign == c]
            if members.size == 0:
                continue
            lab = y[members]
            child = HierarchyNode(f"{node.node_id}.{c}", members, node.depth + 1, node.node_id,
                                  known_count=int(np.sum(lab != -1)),
                                  unknown_count=int(np.sum(lab == -1)))
            node.children.append((c, child))
            unknown = members[lab == -1]

            if child.known_count == 0:
                child.exit_reason = "abstained-no-known"
                child.predicted_class = -1
                continue
            u, dom = cluster_uniformity(lab[lab != -1], return_dominant=True)
            child.uniformity, child.dominant_class = u, dom
            if child.unknown_count == 0 and self.require_unknowns:
                child.exit_reason = "no-unknowns"
                continue
            if u >= p.t:
                child.exit_reason = "pure-cluster-classified"
                child.predicted_class = dom
                self.pred[unknown] = dom
                continue

            lo, hi, feasible = self.child_range(members.size, res.k_opt)
            guard = None
            if members.size == node.indices.size:
                guard = "no-progress-guard"
            elif child.depth >= p.max_depth:
                guard = "depth-guard"
            elif members.size < p.min_node_size or not feasible:
                guard = "no-progress-guard"
            if guard is not None:
                # mixed cluster that cannot be split further: dominant known class
                child.exit_reason = guard
                child.predicted_class = dom
                self.pred[unknown] = dom
                continue
            self.expand(child, lo, hi)

    def run(self, indices) -> HierarchyNode:
        p, y = self.p, self.y
        lab = y[indices]
        root = HierarchyNode("0", indices, 0, None, known_count=int(np.sum(lab != -1)),
                             unknown_count=int(np.sum(lab == -1)))
        dims = min(indices.size, self.X.shape[1])
        if self.fixed_k is not None:
            if dims < self.fixed_k:
                raise ValueError(f"need at least {self.fixed_k} samples and features")
            k_lo = k_hi = self.fixed_k
        else:
            k_lo, k_hi = p.k_min_root, min(p.k_max_root, dims)
            if k_lo > k_hi:
                raise ValueError(f"k_min_root={k_lo} exceeds min(n, m)={dims}")
        self.expand(root, k_lo, k_hi)
        return root


def _run(X, y, params, fixed_k, cache):
    params = params or ClassifierParams()
    params.validate()
    X, y = _check_inputs(X, y)
    if not np.any(y == -1):
        raise ValueError("no unknown samples: nothing to classify")
    b = _Builder(X, y, params, fixed_k=fixed_k, cache=cache)
    root = b.run(np.arange(X.shape[0]))
    return b.pred, root


def classify(X, y, params: ClassifierParams | None = None, cache: dict | None = None):
    """Label unknown samples (``y == -1``) of ``X`` using the known ones.

    Returns ``(predictions, root)``: the label vector with known labels
    untouched and unknowns either assigned a known class or left at -1
    (abstaining), and the root :class:`HierarchyNode` of the cluster tree.

    Factorizations do not depend on labels, so sweeps over ``t`` or over the
    labeled subset can pass the same ``cache`` dict to reuse node results.
    """
    return _run(X, y, params, None, cache)


def classify_hnmf2(X, y, params: ClassifierParams | None = None, cache: dict | None = None):
    """Same as :func:`classify` but every node is split with ``k = 2``."""
    return _run(X, y, params, 2, cache)


def build_hierarchy(X, y, params: ClassifierParams | None = None) -> HierarchyNode:
    """Cluster tree built from the known rows of ``X`` only.

    Nodes are split while their uniformity is below ``t``; node indices refer
    to rows of ``X``.
    """
    params = params or ClassifierParams()
    params.validate()
    X, y = _check_inputs(X, y)
    known = np.flatnonzero(y != -1)
    if known.size == 0:
        raise ValueError("no known samples to build a hierarchy from")
    b = _Builder(X, y, params, require_unknowns=False)
    return b.run(known)


def _cosine_to_rows(H, x):
    hn = np.linalg.norm(H, axis=1)
    xn = np.linalg.norm(x)
    if xn == 0:
        return np.zeros(H.shape[0])
    return (H @ x) / (np.where(hn > 0, hn, 1.0) * xn)


def classical_route(root: HierarchyNode, x) -> tuple[int, list[str], bool]:
    """Route one feature row down a known-only tree.

    Returns ``(class_id, visited node ids, zero_vector_flag)``. The class is
    the dominant known class of the reached leaf, or -1 when the chosen
    cluster holds no known sample.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    zero = not np.any(x)
    node = root
    path = [node.node_id]
    while not node.is_leaf:
        if node.nmfk is None:
            break
        H = node.nmfk.H
        if H.shape[1] != x.size:
            raise ValueError(f"feature row has {x.size} entries, tree expects {H.shape[1]}")
        j = int(np.argmax(_cosine_to_rows(H, x)))
        nxt = node.child(j)
        if nxt is None:
            return -1, path, zero
        node = nxt
        path.append(node.node_id)
    if node.dominant_class is None:
        return -1, path, zero
    return int(node.dominant_class), path, zero


def classical_classify(root: HierarchyNode, x) -> int:
    return classical_route(root, x)[0]


def classical_predict(X, y, params: ClassifierParams | None = None):
    """Classical ablation: tree from known samples, unknowns routed one by one."""
    X, y = _check_inputs(X, y)
    if not np.any(y == -1):
        raise ValueError("no unknown samples: nothing to classify")
    root = build_hierarchy(X, y, params)
    pred = y.copy()
    for i in np.flatnonzero(y == -1):
        pred[i] = classical_classify(root, X[i])
    return pred, root


def hierarchy_records(root: HierarchyNode) -> list[dict]:
    """Flat per-node records in pre-order, for export."""
    out = []
    for node in root.walk():
        out.append({
            "nodeId": node.node_id,
            "parentId": node.parent_id,
            "depth": node.depth,
            "kOpt": None if node.nmfk is None else int(node.nmfk.k_opt),
            "minSilhouette": None if node.nmfk is None
            else float(node.nmfk.diagnostics(node.nmfk.k_opt).min_silhouette),
            "sampleCount": int(node.indices.size),
            "knownCount": node.known_count,
            "unknownCount": node.unknown_count,
            "exitReason": node.exit_reason,
            "predictedClass": node.predicted_class,
        })
    return out


def hierarchy_stats(root: HierarchyNode) -> dict:
    nodes = list(root.walk())
    reasons = Counter(n.exit_reason for n in nodes)
    return {
        "node_count": len(nodes),
        "max_depth": max(n.depth for n in nodes),
        "factorizations": sum(n.nmfk is not None for n in nodes),
        "exit_reasons": {r: reasons.get(r, 0) for r in EXIT_REASONS},
        "guards_fired": sum(reasons.get(r, 0) for r in GUARD_REASONS),
    }


