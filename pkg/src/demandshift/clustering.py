"""Agglomerative cosine clustering of anomalous hours, Davies-Bouldin model
selection and per-cluster deviance profiles."""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DegenerateClusteringError
from .ingest import format_hour, parse_hour
from .modes import MODES

DEFAULT_K_RANGE = (2, 20)


def cosine_distance(u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu = math.sqrt(float(np.dot(u, u)))
    nv = math.sqrt(float(np.dot(v, v)))
    if nu == 0 or nv == 0:
        raise ValueError("cosine distance undefined for a zero vector")
    return min(2.0, max(0.0, 1.0 - float(np.dot(u, v)) / (nu * nv)))


@dataclass
class Dendrogram:
    """Merge list: row ``s`` joins nodes ``merges[s, 0]`` and ``merges[s, 1]``
    at distance ``merges[s, 2]`` into node ``n + s`` of size ``merges[s, 3]``."""

    merges: np.ndarray
    n: int

    def cut(self, k):
        """Canonical labels for the partition into ``k`` clusters."""
        n = self.n
        if not 1 <= k <= n:
            raise ValueError(f"k={k} outside 1..{n}")
        parent = np.arange(2 * n - 1)
        for s in range(n - k):
            a, b = int(self.merges[s, 0]), int(self.merges[s, 1])
            parent[a] = parent[b] = n + s
        roots = np.empty(n, dtype=np.int64)
        for i in range(n):
            r = i
            while parent[r] != r:
                r = parent[r]
            roots[i] = r
        _, raw = np.unique(roots, return_inverse=True)
        return canonical_labels(raw)


def canonical_labels(raw, order_key=None):
    """Renumber clusters by descending size, ties by earliest member.

    ``order_key`` gives each row's position in time; defaults to row order.
    """
    raw = np.asarray(raw)
    if len(raw) == 0:
        return raw.astype(np.int64)
    pos = np.arange(len(raw)) if order_key is None else np.asarray(order_key)
    ids = np.unique(raw)
    size = {c: int((raw == c).sum()) for c in ids}
    first = {c: pos[raw == c].min() for c in ids}
    ranked = sorted(ids, key=lambda c: (-size[c], first[c]))
    remap = {c: i for i, c in enumerate(ranked)}
    return np.array([remap[c] for c in raw], dtype=np.int64)


def _check_rows(rows):
    X = np.asarray(rows, dtype=float)
    if X.ndim != 2:
        raise ValueError("rows must be a 2-D array")
    if (np.sqrt((X * X).sum(axis=1)) == 0).any():
        raise ValueError("zero-norm row: cosine distance undefined")
    return X


def build_dendrogram(rows, threads=1, backend=None) -> Dendrogram:
    X = _check_rows(rows)
    impl = kernels.get_backend(backend)
    D = impl.cosine_distance_matrix(X, threads)
    return Dendrogram(impl.average_linkage(D), len(X))


def agglomerative(rows, k, threads=1, backend=None):
    n = len(rows)
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must satisfy 1 <= k <= n={n}")
    return build_dendrogram(rows, threads, backend).cut(k)


def davies_bouldin(rows, labels, normalize=True):
    """Davies-Bouldin index; rows are L2-normalised first unless ``normalize=False``."""
    X = np.asarray(rows, dtype=float)
    if normalize:
        X = X / np.linalg.norm(X, axis=1, keepdims=True)
    labels = np.asarray(labels)
    ids = np.unique(labels)
    k = len(ids)
    if k < 2:
        raise ValueError("Davies-Bouldin needs at least two clusters")
    centroids = np.array([X[labels == c].mean(axis=0) for c in ids])
    scatter = np.array([np.linalg.norm(X[labels == c] - centroids[i], axis=1).mean()
                        for i, c in enumerate(ids)])
    worst = np.zeros(k)
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            gap = float(np.linalg.norm(centroids[i] - centroids[j]))
            if gap == 0.0:
                raise DegenerateClusteringError(f"clusters {ids[i]} and {ids[j]} share a centroid")
            worst[i] = max(worst[i], (scatter[i] + scatter[j]) / gap)
    return float(worst.mean())


def select_k(rows, k_min=DEFAULT_K_RANGE[0], k_max=DEFAULT_K_RANGE[1], threads=1, backend=None, tree=None):
    """Sweep k over one dendrogram and return ``(k_best, {k: db})``.

    Degenerate cuts score ``inf``. Ties go to the smaller k. Pass ``tree``
    to reuse a dendrogram already built from ``rows``.
    """
    n = len(rows)
    if not 2 <= k_min <= k_max <= n - 1:
        raise ValueError(f"need 2 <= k_min <= k_max <= n-1, got {k_min}, {k_max}, n={n}")
    X = _check_rows(rows)
    if tree is None:
        tree = build_dendrogram(X, threads, backend)

    def score(k):
        try:
            return davies_bouldin(X, tree.cut(k))
        except DegenerateClusteringError:
            return math.inf

    ks = list(range(k_min, k_max + 1))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            scores = list(pool.map(score, ks))
    else:
        scores = [score(k) for k in ks]
    curve = dict(zip(ks, scores))
    best = min(ks, key=lambda k: (curve[k], k))
    return best, curve


@dataclass
class ClusterResult:
    labels: np.ndarray
    k: int
    profiles: np.ndarray
    sizes: np.ndarray
    shares: np.ndarray
    members: list
    hours: np.ndarray

    def profile(self, cluster_id):
        return dict(zip(MODES, self.profiles[cluster_id].tolist()))


def profile_clusters(rows, labels, hours) -> ClusterResult:
    X = np.asarray(rows, dtype=float)
    hours = np.asarray(hours, dtype="datetime64[h]")
    if len(X) != len(labels) or len(X) != len(hours):
        raise ValueError("rows, labels and hours must have equal length")
    labels = canonical_labels(labels, hours.astype(np.int64))
    k = int(labels.max()) + 1 if len(labels) else 0
    profiles = np.zeros((k, len(MODES)))
    for c in range(k):
        profiles[c] = X[labels == c].mean(axis=0)
    sizes = np.bincount(labels, minlength=k)
    shares = sizes / len(labels) if len(labels) else sizes.astype(float)
    members = [np.sort(hours[labels == c]) for c in range(k)]
    return ClusterResult(labels, k, profiles, sizes, shares, members, hours)


def write_clusters_csv(result: ClusterResult, path):
    order = np.argsort(result.hours, kind="stable")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "cluster_id"])
        for i in order:
            w.writerow([format_hour(result.hours[i]), int(result.labels[i])])


def read_clusters_csv(path):
    """Return ``(hours, labels)`` arrays from a cluster export."""
    hours, labels = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for r in csv.DictReader(fh):
            hours.append(parse_hour(r["timestamp"]))
            labels.append(int(r["cluster_id"]))
    return np.array(hours, dtype="datetime64[h]"), np.array(labels, dtype=np.int64)


def profiles_payload(result: ClusterResult):
    return [
        {
            "cluster_id": c,
            "size": int(result.sizes[c]),
            "share": float(result.shares[c]),
            "profile": result.profile(c),
        }
        for c in range(result.k)
    ]


def write_profiles_json(result: ClusterResult, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(profiles_payload(result), fh, indent=2)
        fh.write("\n")


def read_profiles_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_db_curve_csv(curve, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "db_index"])
        for k in sorted(curve):
            w.writerow([k, repr(float(curve[k]))])
