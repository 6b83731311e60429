"""Five unsupervised algorithms producing hard cluster assignments.

k-means (k-means++ seeding, best of n_init restarts), bottom-up
agglomerative merging under four linkages, full-covariance Gaussian mixture
EM, normalised-cut spectral embedding + k-means, and BIRCH clustering-
feature trees with a ward global step.  Defaults for the screening pipeline
live in `CLUSTER_DEFAULTS` and are recorded in experiment manifests.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .numerics import Matrix, SeededRng, sym_eig, cholesky

__all__ = [
    "ClusterAssignment",
    "kmeans",
    "agglomerative",
    "gmm_em",
    "spectral",
    "spectral_embedding",
    "birch",
    "CLUSTER_DEFAULTS",
    "ClusteringWarning",
]

CLUSTER_DEFAULTS = {
    "k": 2,
    "kmeans_n_init": 10,
    "kmeans_max_iter": 300,
    "agglomerative_linkage": "ward",
    "gmm_reg": 1e-6,
    "gmm_max_iter": 100,
    "spectral_affinity": "rbf",  # gamma defaults to 1/n_features
    "spectral_gamma": None,
    "spectral_knn_neighbors": 10,
    "spectral_n_init": 10,
    "birch_threshold": 0.5,
    "birch_branching_factor": 50,
}


class ClusteringWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ClusterAssignment:
    labels: np.ndarray
    k: int
    objective: float = float("nan")
    history: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.int64)
        if lab.size and (lab.min() < 0 or lab.max() >= self.k):
            raise ValueError("cluster indices must lie in 0..k-1")
        used = np.unique(lab)
        if len(used) < self.k:
            warnings.warn(
                f"assignment uses {len(used)} of {self.k} clusters",
                ClusteringWarning,
                stacklevel=3,
            )
        lab.flags.writeable = False
        object.__setattr__(self, "labels", lab)

    def to_csv(self) -> str:
        lines = ["row_id,cluster"]
        lines += [f"{i},{c}" for i, c in enumerate(self.labels)]
        return "\n".join(lines) + "\n"


def _as_array(m) -> np.ndarray:
    return m.a if isinstance(m, Matrix) else np.asarray(m, dtype=np.float64)


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    sx = np.sum(X * X, axis=1)[:, None]
    sc = np.sum(C * C, axis=1)[None, :]
    return np.maximum(sx + sc - 2.0 * (X @ C.T), 0.0)


def _kmeans_pp(X: np.ndarray, k: int, rng: SeededRng) -> np.ndarray:
    n = X.shape[0]
    centers = [X[rng.randint(n)]]
    d2 = _sq_dists(X, np.array(centers))[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers.append(X[rng.randint(n)])
            continue
        u = rng.uniform() * total
        idx = int(np.searchsorted(np.cumsum(d2), u))
        idx = min(idx, n - 1)
        centers.append(X[idx])
        d2 = np.minimum(d2, _sq_dists(X, X[idx][None, :])[:, 0])
    return np.array(centers)


def _lloyd(X: np.ndarray, centers: np.ndarray, max_iter: int):
    history = []
    labels = None
    for _ in range(max_iter):
        d2 = _sq_dists(X, centers)
        new_labels = np.argmin(d2, axis=1)
        obj = float(d2[np.arange(len(X)), new_labels].sum())
        history.append(obj)
        for c in range(centers.shape[0]):
            mask = new_labels == c
            if not mask.any():
                # empty cluster: reseed to the point farthest from its center
                far = int(np.argmax(d2[np.arange(len(X)), new_labels]))
                centers[c] = X[far]
                new_labels[far] = c
                mask = new_labels == c
            centers[c] = X[mask].mean(axis=0)
        if labels is not None and np.array_equal(labels, new_labels):
            break
        labels = new_labels
    d2 = _sq_dists(X, centers)
    labels = np.argmin(d2, axis=1)
    obj = float(d2[np.arange(len(X)), labels].sum())
    history.append(obj)
    return labels, centers, obj, history


def kmeans(
    m,
    k: int,
    n_init: int = 10,
    max_iter: int = 300,
    rng: SeededRng | None = None,
) -> ClusterAssignment:
    """Lloyd iterations from k-means++ seeds; returns the best restart.

    The recorded history is the per-iteration objective of the winning
    restart (non-increasing by construction of the update).
    """
    X = _as_array(m)
    if not 1 <= k <= X.shape[0]:
        raise ValueError("need 1 <= k <= n")
    if n_init < 1:
        raise ValueError("n_init must be >= 1")
    rng = rng or SeededRng(0)
    best = None
    for trial in range(n_init):
        trial_rng = rng.split(trial)
        centers = _kmeans_pp(X, k, trial_rng)
        labels, centers, obj, history = _lloyd(X, centers.copy(), max_iter)
        if best is None or obj < best[2] - 1e-12:
            best = (labels, centers, obj, history)
    labels, _, obj, history = best
    return ClusterAssignment(labels, k, obj, tuple(history))


def _linkage_update(d_ab, d_a, d_b, size_a, size_b, sizes, linkage):
    """Lance-Williams distance update for merging clusters a and b."""
    if linkage == "single":
        return np.minimum(d_a, d_b)
    if linkage == "complete":
        return np.maximum(d_a, d_b)
    if linkage == "average":
        return (size_a * d_a + size_b * d_b) / (size_a + size_b)
    if linkage == "ward":
        total = sizes + size_a + size_b
        return np.sqrt(
            ((size_a + sizes) * d_a**2 + (size_b + sizes) * d_b**2 - sizes * d_ab**2)
            / total
        )
    raise ValueError(f"unknown linkage {linkage!r}")


def agglomerative(m, k: int, linkage: str = "ward") -> ClusterAssignment:
    """Bottom-up merging from singletons, cut at k clusters.

    Deterministic: among equal-distance pairs the lexicographically smallest
    (i, j) merges first.
    """
    X = _as_array(m)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    D = np.sqrt(_sq_dists(X, X))
    np.fill_diagonal(D, np.inf)
    active = np.ones(n, dtype=bool)
    sizes = np.ones(n)
    members: list[list[int]] = [[i] for i in range(n)]
    for _ in range(n - k):
        flat = np.argmin(D)
        a, b = divmod(int(flat), n)
        if a > b:
            a, b = b, a
        d_ab = D[a, b]
        idx = active.copy()
        idx[a] = idx[b] = False
        new_d = _linkage_update(
            d_ab, D[a, idx], D[b, idx], sizes[a], sizes[b], sizes[idx], linkage
        )
        D[a, idx] = new_d
        D[idx, a] = new_d
        D[b, :] = np.inf
        D[:, b] = np.inf
        D[a, a] = np.inf
        sizes[a] += sizes[b]
        members[a].extend(members[b])
        members[b] = []
        active[b] = False
    labels = np.empty(n, dtype=np.int64)
    cluster_id = 0
    for i in range(n):
        if active[i]:
            labels[members[i]] = cluster_id
            cluster_id += 1
    return ClusterAssignment(labels, k)


def _log_gaussian(X: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    d = X.shape[1]
    L = cholesky(Matrix(cov)).a
    diff = X - mean
    # solve L z = diff^T by forward substitution (vectorised per column)
    z = np.linalg.solve(L, diff.T)
    maha = np.sum(z * z, axis=0)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return -0.5 * (d * np.log(2.0 * np.pi) + logdet + maha)


def gmm_em(
    m,
    k: int,
    max_iter: int = 100,
    reg: float = 1e-6,
    rng: SeededRng | None = None,
) -> ClusterAssignment:
    """Full-covariance EM initialised from k-means responsibilities.

    The log-likelihood history is recorded per iteration and is
    non-decreasing within 1e-9.  Hard labels are argmax responsibilities.
    """
    X = _as_array(m)
    n, d = X.shape
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    if reg <= 0:
        raise ValueError("covariance regulariser must be positive")
    rng = rng or SeededRng(0)
    init = kmeans(X, k, n_init=1, rng=rng)
    resp = np.full((n, k), 1e-6)
    resp[np.arange(n), init.labels] = 1.0
    resp /= resp.sum(axis=1, keepdims=True)
    weights = np.full(k, 1.0 / k)
    means = np.zeros((k, d))
    covs = np.stack([np.eye(d)] * k)
    history = []
    ll = -np.inf
    for _ in range(max_iter):
        # M step
        nk = resp.sum(axis=0) + 1e-12
        weights = nk / n
        means = (resp.T @ X) / nk[:, None]
        for c in range(k):
            diff = X - means[c]
            covs[c] = (resp[:, c][:, None] * diff).T @ diff / nk[c]
            covs[c] += reg * np.eye(d)
        # E step
        log_prob = np.empty((n, k))
        for c in range(k):
            try:
                log_prob[:, c] = np.log(weights[c] + 1e-300) + _log_gaussian(
                    X, means[c], covs[c]
                )
            except ValueError as e:
                raise RuntimeError(
                    f"gmm covariance became singular despite reg={reg}: {e}"
                ) from None
        mmax = log_prob.max(axis=1, keepdims=True)
        lse = mmax[:, 0] + np.log(np.exp(log_prob - mmax).sum(axis=1))
        new_ll = float(lse.mean())
        resp = np.exp(log_prob - lse[:, None])
        history.append(new_ll)
        if np.isfinite(ll) and abs(new_ll - ll) < 1e-10:
            ll = new_ll
            break
        ll = new_ll
    labels = np.argmax(resp, axis=1)
    # compress label ids in case a component emptied out
    used = np.unique(labels)
    if len(used) < k:
        remap = {c: i for i, c in enumerate(used)}
        labels = np.array([remap[c] for c in labels])
        return ClusterAssignment(labels, len(used), -ll, tuple(history))
    return ClusterAssignment(labels, k, -ll, tuple(history))


def _connected_components(adj: np.ndarray) -> np.ndarray:
    n = adj.shape[0]
    comp = np.full(n, -1, dtype=np.int64)
    cur = 0
    for start in range(n):
        if comp[start] >= 0:
            continue
        stack = [start]
        comp[start] = cur
        while stack:
            u = stack.pop()
            for v in np.flatnonzero(adj[u]):
                if comp[v] < 0:
                    comp[v] = cur
                    stack.append(v)
        cur += 1
    return comp


def spectral_embedding(m, k: int, affinity: str = "rbf", gamma: float | None = None, n_neighbors: int = 10) -> np.ndarray:
    """Rows embedded into the k smallest eigenvectors of the symmetric
    normalised Laplacian, row-normalised to unit length."""
    X = _as_array(m)
    n = X.shape[0]
    if affinity == "rbf":
        g = gamma if gamma is not None else 1.0 / X.shape[1]
        W = np.exp(-g * _sq_dists(X, X))
    elif affinity == "knn_graph":
        d2 = _sq_dists(X, X)
        np.fill_diagonal(d2, np.inf)
        W = np.zeros((n, n))
        nn = np.argsort(d2, axis=1, kind="stable")[:, :n_neighbors]
        rows = np.repeat(np.arange(n), n_neighbors)
        W[rows, nn.ravel()] = 1.0
        W = np.maximum(W, W.T)
    else:
        raise ValueError(f"unknown affinity {affinity!r}")
    deg = W.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(np.maximum(deg, 1e-300))
    L = np.eye(n) - inv_sqrt[:, None] * W * inv_sqrt[None, :]
    evals, evecs = sym_eig(Matrix(0.5 * (L + L.T)))
    emb = evecs.a[:, :k]
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    emb = emb / np.maximum(norms, 1e-300)
    return emb


def spectral(
    m,
    k: int,
    affinity: str = "rbf",
    gamma: float | None = None,
    n_neighbors: int = 10,
    rng: SeededRng | None = None,
    n_init: int = 10,
    embedding: np.ndarray | None = None,
) -> ClusterAssignment:
    """Normalised-cut spectral clustering: embed, then k-means.

    A precomputed `embedding` (from :func:`spectral_embedding`) can be
    passed to amortise the eigendecomposition across seed sweeps.  A graph
    with more connected components than k is reported and the components
    become the clusters.
    """
    X = _as_array(m)
    if not 1 <= k <= X.shape[0]:
        raise ValueError("need 1 <= k <= n")
    rng = rng or SeededRng(0)
    if affinity == "knn_graph":
        d2 = _sq_dists(X, X)
        np.fill_diagonal(d2, np.inf)
        W = np.zeros_like(d2)
        nn = np.argsort(d2, axis=1, kind="stable")[:, :n_neighbors]
        rows = np.repeat(np.arange(X.shape[0]), n_neighbors)
        W[rows, nn.ravel()] = 1.0
        W = np.maximum(W, W.T)
        comp = _connected_components(W > 0)
        n_comp = comp.max() + 1
        if n_comp > k:
            warnings.warn(
                f"affinity graph has {n_comp} components for k={k}; "
                "components become clusters",
                ClusteringWarning,
                stacklevel=2,
            )
            return ClusterAssignment(comp, int(n_comp))
    if embedding is None:
        embedding = spectral_embedding(m, k, affinity, gamma, n_neighbors)
    inner = kmeans(embedding, k, n_init=n_init, rng=rng)
    return ClusterAssignment(inner.labels, k, inner.objective, inner.history)


class _CFEntry:
    __slots__ = ("n", "ls", "ss")

    def __init__(self, x: np.ndarray):
        self.n = 1
        self.ls = x.copy()
        self.ss = float(x @ x)

    def centroid(self) -> np.ndarray:
        return self.ls / self.n

    def radius_with(self, x: np.ndarray) -> float:
        n = self.n + 1
        ls = self.ls + x
        ss = self.ss + float(x @ x)
        # mean squared distance to the centroid, guarded against roundoff
        val = ss / n - float(ls @ ls) / (n * n)
        return float(np.sqrt(max(val, 0.0)))

    def absorb(self, x: np.ndarray) -> None:
        self.n += 1
        self.ls += x
        self.ss += float(x @ x)

    def merge(self, other: "_CFEntry") -> None:
        self.n += other.n
        self.ls += other.ls
        self.ss += other.ss


class _CFNode:
    __slots__ = ("leaf", "entries", "children")

    def __init__(self, leaf: bool):
        self.leaf = leaf
        self.entries: list[_CFEntry] = []
        self.children: list[_CFNode] = []

    def summary(self) -> _CFEntry:
        agg = None
        for e in self.entries:
            if agg is None:
                agg = _CFEntry(np.zeros_like(e.ls))
                agg.n = e.n
                agg.ls = e.ls.copy()
                agg.ss = e.ss
            else:
                agg.merge(e)
        return agg


def _nearest_entry(node: _CFNode, x: np.ndarray) -> int:
    cents = np.array([e.centroid() for e in node.entries])
    d2 = np.sum((cents - x) ** 2, axis=1)
    return int(np.argmin(d2))


def _split_entries(entries, children, branching_factor):
    """Split an overfull node by its farthest centroid pair."""
    cents = np.array([e.centroid() for e in entries])
    d2 = _sq_dists(cents, cents)
    a, b = np.unravel_index(int(np.argmax(d2)), d2.shape)
    left_idx, right_idx = [], []
    for i in range(len(entries)):
        if d2[i, a] <= d2[i, b]:
            left_idx.append(i)
        else:
            right_idx.append(i)
    if not right_idx:
        right_idx = [left_idx.pop()]
    return left_idx, right_idx


class _CFTree:
    def __init__(self, threshold: float, branching_factor: int):
        self.threshold = threshold
        self.bf = branching_factor
        self.root = _CFNode(leaf=True)

    def insert(self, x: np.ndarray) -> None:
        split = self._insert(self.root, x)
        if split is not None:
            new_root = _CFNode(leaf=False)
            for node in split:
                new_root.entries.append(node.summary())
                new_root.children.append(node)
            self.root = new_root

    def _insert(self, node: _CFNode, x: np.ndarray):
        if not node.entries:
            node.entries.append(_CFEntry(x))
            return None
        i = _nearest_entry(node, x)
        if node.leaf:
            if node.entries[i].radius_with(x) <= self.threshold:
                node.entries[i].absorb(x)
                return None
            node.entries.append(_CFEntry(x))
        else:
            split = self._insert(node.children[i], x)
            node.entries[i] = node.children[i].summary()
            if split is None:
                return None
            node.children.pop(i)
            node.entries.pop(i)
            for child in split:
                node.children.append(child)
                node.entries.append(child.summary())
        if len(node.entries) <= self.bf:
            return None
        left_idx, right_idx = _split_entries(node.entries, node.children, self.bf)
        left = _CFNode(node.leaf)
        right = _CFNode(node.leaf)
        for idx_list, part in ((left_idx, left), (right_idx, right)):
            for i2 in idx_list:
                part.entries.append(node.entries[i2])
                if not node.leaf:
                    part.children.append(node.children[i2])
        return (left, right)

    def leaf_entries(self) -> list[_CFEntry]:
        out = []

        def visit(node):
            if node.leaf:
                out.extend(node.entries)
            else:
                for ch in node.children:
                    visit(ch)

        visit(self.root)
        return out


def birch(m, k: int, threshold: float = 0.5, branching_factor: int = 50) -> ClusterAssignment:
    """CF-tree summarisation followed by a ward global step.

    Leaf-entry centroids are clustered with ward agglomerative into k
    groups; rows map to the nearest resulting centroid.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    if branching_factor < 2:
        raise ValueError("branching_factor must be >= 2")
    X = _as_array(m)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    tree = _CFTree(threshold, branching_factor)
    for x in X:
        tree.insert(x)
    entries = tree.leaf_entries()
    cents = np.array([e.centroid() for e in entries])
    counts = np.array([e.n for e in entries], dtype=np.float64)
    if len(entries) <= k:
        if len(entries) < k:
            warnings.warn(
                f"CF tree produced {len(entries)} summaries for k={k}",
                ClusteringWarning,
                stacklevel=2,
            )
        group = np.arange(len(entries))
        k_eff = len(entries)
    else:
        group = agglomerative(cents, k, linkage="ward").labels
        k_eff = k
    final_centroids = np.vstack(
        [
            (counts[group == c][:, None] * cents[group == c]).sum(axis=0)
            / counts[group == c].sum()
            for c in range(k_eff)
        ]
    )
    labels = np.argmin(_sq_dists(X, final_centroids), axis=1)
    used = np.unique(labels)
    if len(used) < k_eff:
        remap = {c: i for i, c in enumerate(used)}
        labels = np.array([remap[c] for c in labels])
        k_eff = len(used)
    return ClusterAssignment(labels, k_eff)
