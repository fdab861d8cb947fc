"""Pure numpy implementation of the clustering kernels.

Mirrors ``_clinkage.pyx`` operation for operation so both backends return
bit-identical matrices and merge lists.
"""
import numpy as np

BACKEND = "python"


def cosine_distance_matrix(X, threads=1):
    """Pairwise ``1 - cos`` distances, clipped to [0, 2], zero diagonal.

    ``threads`` is accepted for signature parity with the compiled core.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    n, p = X.shape
    dot = np.zeros((n, n))
    sq = np.zeros(n)
    # fixed left-to-right accumulation over features
    for q in range(p):
        col = X[:, q]
        dot += col[:, None] * col[None, :]
        sq += col * col
    norm = np.sqrt(sq)
    D = 1.0 - dot / (norm[:, None] * norm[None, :])
    np.clip(D, 0.0, 2.0, out=D)
    np.fill_diagonal(D, 0.0)
    return D


def _row_nn(D, i, active, cid):
    row = np.where(active, D[i], np.inf)
    row[i] = np.inf
    m = row.min()
    if not np.isfinite(m):
        return -1, np.inf
    cands = np.flatnonzero(row == m)
    if len(cands) > 1:
        lo = np.minimum(cid[i], cid[cands])
        hi = np.maximum(cid[i], cid[cands])
        cands = cands[np.lexsort((hi, lo))]
    return int(cands[0]), float(m)


def average_linkage(D):
    """Average-linkage merges over a precomputed distance matrix.

    Returns an ``(n-1, 4)`` array of ``(older id, younger id, distance,
    size)`` rows; leaves are ids ``0..n-1`` and merge ``s`` creates id
    ``n + s``. Among equal-distance pairs the one with the lexicographically
    smallest ``(older, younger)`` id pair merges first.
    """
    D = np.array(D, dtype=np.float64)
    n = D.shape[0]
    Z = np.zeros((max(n - 1, 0), 4))
    if n < 2:
        return Z
    np.fill_diagonal(D, np.inf)
    active = np.ones(n, dtype=bool)
    cid = np.arange(n, dtype=np.int64)
    size = np.ones(n)
    nn = np.empty(n, dtype=np.int64)
    nnd = np.empty(n)
    for i in range(n):
        nn[i], nnd[i] = _row_nn(D, i, active, cid)

    for step in range(n - 1):
        idx = np.flatnonzero(active)
        dmin = nnd[idx].min()
        cands = idx[nnd[idx] == dmin]
        lo = np.minimum(cid[cands], cid[nn[cands]])
        hi = np.maximum(cid[cands], cid[nn[cands]])
        best = np.lexsort((hi, lo))[0]
        i, j = int(cands[best]), int(nn[cands[best]])
        a, b = min(i, j), max(i, j)
        Z[step] = (lo[best], hi[best], dmin, size[a] + size[b])

        active[b] = False
        others = np.flatnonzero(active)
        others = others[others != a]
        sa, sb = size[a], size[b]
        merged = (sa * D[a, others] + sb * D[b, others]) / (sa + sb)
        D[a, others] = merged
        D[others, a] = merged
        D[b, :] = np.inf
        D[:, b] = np.inf
        cid[a] = n + step
        size[a] = sa + sb

        stale = (nn[others] == a) | (nn[others] == b)
        for k in others[stale]:
            nn[k], nnd[k] = _row_nn(D, k, active, cid)
        fresh = others[~stale]
        better = D[fresh, a] < nnd[fresh]
        nn[fresh[better]] = a
        nnd[fresh[better]] = D[fresh[better], a]
        nn[a], nnd[a] = _row_nn(D, a, active, cid)
    return Z
