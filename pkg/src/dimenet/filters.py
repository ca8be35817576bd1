"""Separable spatial filters of an interaction block and their grid export.

The per-triplet interaction factorises as

    f_int[f] = sum_n mt_n * filter1_n(d_ji) * filter2_n(d_kj, alpha)[f]

with ``mt = swish(W_src m + b_src)``, ``filter1 = e_RBF W_rbf`` and
``filter2_n = (a_SBF W_sbf) W_bilinear[:, n, :]``.
"""

import csv
from dataclasses import dataclass

import numpy as np
import torch

from .basis import _check_distance
from .exceptions import ContractError
from .model import DTYPE, edge_rbf, sub_params, triplet_sbf

FLOAT_FMT = ".17g"


@dataclass(frozen=True)
class FilterGrid:
    d_axis: np.ndarray
    alpha_axis: np.ndarray
    values: np.ndarray  # (len(d_axis), len(alpha_axis), n_elements)
    slice_index: int

    def __post_init__(self):
        for name, ax in (("d_axis", self.d_axis), ("alpha_axis", self.alpha_axis)):
            if np.any(np.diff(ax) <= 0):
                raise ContractError(f"{name} must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ContractError("filter values must be finite")
        if self.values.shape[:2] != (len(self.d_axis), len(self.alpha_axis)):
            raise ContractError("values do not match the axes")


def _block(params, config, block):
    if config.node_mode:
        raise ContractError("node-mode models have no directional filters")
    if not 0 <= block < config.L:
        raise ContractError(f"block {block} out of range [0, {config.L})")
    return sub_params(params, f"int{block}.")


def _distances(d, config):
    d = np.atleast_1d(np.asarray(d, dtype=np.float64))
    _check_distance(d, config.cutoff)
    return torch.from_numpy(d)


def filter1(d, params, config, block=0):
    """Radial gate e_RBF(d) W_rbf, shape (len(d), F); squeezed for scalar ``d``."""
    bp = _block(params, config, block)
    dt = _distances(d, config)
    with torch.no_grad():
        out = (edge_rbf(dt, params, config) @ bp["W_rbf"]).numpy()
    return out[0] if np.ndim(d) == 0 else out


def filter2(d, alpha, n, params, config, block=0):
    """Slice ``n`` (0-based input feature) of the angular filter, shape (..., F)."""
    bp = _block(params, config, block)
    W = bp["W_bilinear"]
    if not 0 <= int(n) < W.shape[1]:
        raise ContractError(f"slice {n} out of range [0, {W.shape[1]})")
    dt = _distances(d, config)
    a = np.broadcast_to(np.asarray(alpha, dtype=np.float64), dt.shape)
    cos = torch.from_numpy(np.cos(a).copy())
    with torch.no_grad():
        s = triplet_sbf(dt, cos, config) @ bp["W_sbf"]
        out = (s @ W[:, int(n), :]).numpy()
    return out[0] if np.ndim(d) == 0 and np.ndim(alpha) == 0 else out


def decomposed_interaction(m_kj, d_ji, d_kj, alpha, params, config, block=0):
    """f_int for one triplet assembled from the separable filters."""
    bp = _block(params, config, block)
    with torch.no_grad():
        m = torch.as_tensor(np.asarray(m_kj, dtype=np.float64), dtype=DTYPE)
        mt = torch.nn.functional.silu(m @ bp["src.W"] + bp["src.b"]).numpy()
    f1 = filter1(d_ji, params, config, block)
    out = np.zeros(config.F)
    for n in range(config.F):
        out += mt[n] * f1[n] * filter2(d_kj, alpha, n, params, config, block)
    return out


def export_filter_grid(params, config, n, resolution=64, n_elements=15, block=0):
    """Evaluate filter2 slice ``n`` on a (d, alpha) grid over (0, c] x [0, pi]."""
    if resolution < 2:
        raise ContractError("resolution must be at least 2")
    c = config.cutoff
    d_axis = np.linspace(c / resolution, c, resolution)
    alpha_axis = np.linspace(0.0, np.pi, resolution)
    D, A = np.meshgrid(d_axis, alpha_axis, indexing="ij")
    vals = filter2(D.ravel(), A.ravel(), n, params, config, block)
    k = min(n_elements, vals.shape[-1])
    return FilterGrid(d_axis, alpha_axis, vals[:, :k].reshape(resolution, resolution, k), int(n))


def write_filter_csv(path, grid):
    """Header ``d, alpha, element_0..element_k``; one row per grid point, d-major."""
    k = grid.values.shape[-1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["d", "alpha"] + [f"element_{i}" for i in range(k)])
        for i, d in enumerate(grid.d_axis):
            for j, a in enumerate(grid.alpha_axis):
                w.writerow([format(d, FLOAT_FMT), format(a, FLOAT_FMT)]
                           + [format(v, FLOAT_FMT) for v in grid.values[i, j]])
