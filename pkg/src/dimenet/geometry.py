"""Molecules and their directed cutoff graphs with angle triplets."""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .exceptions import ContractError, DegenerateGeometryError

MIN_DISTANCE = 1e-8


@dataclass(frozen=True)
class Molecule:
    """Atomic numbers ``z`` (N,) and Cartesian positions ``X`` (N, 3) in Å."""

    z: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=np.int64).reshape(-1)
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != 3:
            raise ContractError(f"positions must have shape (N, 3), got {X.shape}")
        if len(z) != len(X):
            raise ContractError(f"{len(z)} atomic numbers but {len(X)} positions")
        if len(z) < 1:
            raise ContractError("a molecule needs at least one atom")
        if np.any(z < 1):
            raise ContractError("atomic numbers must be positive")
        if not np.all(np.isfinite(X)):
            raise ContractError("positions must be finite")
        z.setflags(write=False)
        X.setflags(write=False)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "X", X)

    def __len__(self):
        return len(self.z)

    def with_positions(self, X):
        return Molecule(self.z, X)


@dataclass(frozen=True)
class DirectedGraph:
    """Directed cutoff graph.

    Edge ``e`` points from ``src[e]`` (atom j) to ``dst[e]`` (atom i).
    Triplet ``t`` combines edge ``kj[t]`` (k -> j) with edge ``ji[t]`` (j -> i);
    ``alpha[t]`` is the angle at j between x_k and x_i.
    """

    n_atoms: int
    src: np.ndarray
    dst: np.ndarray
    d: np.ndarray
    kj: np.ndarray
    ji: np.ndarray
    alpha: np.ndarray
    cutoff: float = field(default=np.inf)

    @property
    def n_edges(self):
        return len(self.src)

    @property
    def n_triplets(self):
        return len(self.kj)

    @property
    def edges(self):
        return list(zip(self.src.tolist(), self.dst.tolist()))

    @property
    def triplets(self):
        return list(zip(self.kj.tolist(), self.ji.tolist()))

    def neighbors(self, i):
        """Sources of edges ending at atom ``i``."""
        return self.src[self.dst == i]


def compute_angle(x_k, x_j, x_i):
    """Angle at ``x_j`` spanned by ``x_k`` and ``x_i``, in radians."""
    a = np.asarray(x_k, dtype=np.float64) - np.asarray(x_j, dtype=np.float64)
    b = np.asarray(x_i, dtype=np.float64) - np.asarray(x_j, dtype=np.float64)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise DegenerateGeometryError("zero-length bond vector in angle")
    cos = np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0)
    return float(np.arccos(cos))


def triplet_angles(X, src, dst, kj, ji):
    """Vectorised :func:`compute_angle` over all triplets of a graph."""
    X = np.asarray(X, dtype=np.float64)
    if len(kj) == 0:
        return np.zeros(0)
    j = src[ji]
    a = X[src[kj]] - X[j]
    b = X[dst[ji]] - X[j]
    cos = np.einsum("ij,ij->i", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
    return np.arccos(np.clip(cos, -1.0, 1.0))


def build_graph(mol, cutoff):
    """All directed edges with ``d <= cutoff`` plus their angle triplets.

    Edges are sorted by (target i, source j); triplets by (ji edge, kj edge).
    """
    if not cutoff > 0:
        raise ContractError(f"cutoff must be positive, got {cutoff}")
    src, dst, d, bad = _kernels.radius_edges(mol.X, float(cutoff), MIN_DISTANCE)
    if bad[0] >= 0:
        raise DegenerateGeometryError(
            f"atoms {bad[0]} and {bad[1]} are closer than {MIN_DISTANCE} Å")
    kj, ji = _kernels.triplets(src, dst, len(mol))
    alpha = triplet_angles(mol.X, src, dst, kj, ji)
    return DirectedGraph(len(mol), src, dst, d, kj, ji, alpha, float(cutoff))


def regular_polygon(n_sides, side, z=6, center=(0.0, 0.0, 0.0), phase=0.0):
    """Planar regular polygon with the given side length."""
    radius = side / (2.0 * np.sin(np.pi / n_sides))
    theta = phase + 2.0 * np.pi * np.arange(n_sides) / n_sides
    X = np.stack([radius * np.cos(theta), radius * np.sin(theta), np.zeros(n_sides)], axis=1)
    return Molecule(np.full(n_sides, z), X + np.asarray(center, dtype=np.float64))


def concat_molecules(*mols):
    return Molecule(np.concatenate([m.z for m in mols]), np.concatenate([m.X for m in mols]))
