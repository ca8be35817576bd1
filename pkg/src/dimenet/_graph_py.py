"""Pure-Python (numpy) twins of the kernels in ``_graph_ext.pyx``."""

import numpy as np


def radius_edges(pos, cutoff, min_dist):
    pos = np.ascontiguousarray(pos, dtype=np.float64)
    n = pos.shape[0]
    diff = pos[:, None, :] - pos[None, :, :]
    # same reduction order as the compiled kernel so distances match bitwise
    dist = np.sqrt(diff[..., 0] * diff[..., 0] + diff[..., 1] * diff[..., 1]
                   + diff[..., 2] * diff[..., 2])
    offdiag = ~np.eye(n, dtype=bool)
    close = (dist <= min_dist) & offdiag
    if close.any():
        i, j = np.argwhere(close)[0]
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, np.zeros(0), (int(min(i, j)), int(max(i, j)))
    # argwhere on [i, j] is row-major, i.e. sorted by (dst, src)
    dst, src = np.nonzero((dist <= cutoff) & offdiag)
    return src.astype(np.int64), dst.astype(np.int64), dist[dst, src], (-1, -1)


def triplets(src, dst, n_atoms):
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    counts = np.bincount(dst, minlength=n_atoms)
    ptr = np.concatenate([[0], np.cumsum(counts)])
    # every edge ji pulls in all edges kj ending at its source j
    n_in = counts[src]
    ji = np.repeat(np.arange(len(src), dtype=np.int64), n_in)
    starts = np.repeat(ptr[src], n_in)
    offsets = np.arange(len(ji), dtype=np.int64) - np.repeat(np.cumsum(n_in) - n_in, n_in)
    kj = starts + offsets
    keep = src[kj] != dst[ji]
    return kj[keep], ji[keep]
