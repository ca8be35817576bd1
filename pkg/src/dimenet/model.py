"""DimeNet: embedding block, directional interaction blocks, output blocks.

Parameters are a flat ``dict[str, torch.Tensor]`` (see :func:`init_params`
for the naming scheme); all functions here are pure in the parameters.
"""

from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from typing import Dict, Sequence

import numpy as np
import torch

from .basis import (BasisConfig, _gaussian, _radial, _spherical_2d, default_gaussian_gamma,
                    default_wave_numbers, find_bessel_roots, sbf_normalizers)
from .diffeng import evaluate_with_trace, gradient, ops
from .exceptions import ContractError, UnknownElementError
from .geometry import DirectedGraph, Molecule, build_graph

ModelParams = Dict[str, torch.Tensor]

DTYPE = torch.float64


@dataclass(frozen=True)
class ModelConfig:
    F: int = 128
    L: int = 6
    n_bilinear: int = 8
    basis: BasisConfig = field(default_factory=BasisConfig)
    num_targets: int = 1
    shared_output_blocks: bool = True
    num_residual_blocks: int = 2
    num_output_dense: int = 3
    rbf_mode: str = "bessel"
    use_angles: bool = True
    node_mode: bool = False
    max_z: int = 94
    n_gaussians: int = 64
    gaussian_gamma: float = 0.0  # 0 selects the half-height-crossing default

    def __post_init__(self):
        if self.F < 1 or self.L < 1 or self.num_targets < 1:
            raise ContractError("F, L and num_targets must be >= 1")
        if self.n_bilinear < 1:
            raise ContractError("n_bilinear must be >= 1")
        if self.rbf_mode not in ("bessel", "gaussian"):
            raise ContractError(f"rbf_mode must be 'bessel' or 'gaussian', got {self.rbf_mode!r}")
        if self.num_residual_blocks < 0 or self.num_output_dense < 0:
            raise ContractError("block counts must be non-negative")

    @property
    def cutoff(self):
        return self.basis.c

    @property
    def angular_basis(self):
        """Basis config actually used for triplets (single harmonic when angles are off)."""
        return self.basis if self.use_angles else replace(self.basis, n_shbf=1)

    @property
    def n_radial(self):
        return self.basis.n_rbf if self.rbf_mode == "bessel" else self.n_gaussians

    @property
    def gamma(self):
        return self.gaussian_gamma or default_gaussian_gamma(self.cutoff, self.n_gaussians)

    @property
    def separate_heads(self):
        return self.num_targets > 1 and not self.shared_output_blocks

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["basis"] = BasisConfig(**d["basis"])
        return cls(**d)


# ---------------------------------------------------------------- parameters

def param_shapes(config):
    """Ordered mapping of parameter name to shape."""
    F, R = config.F, config.n_radial
    S = config.angular_basis.n_sbf
    shapes = {"atom_embeddings": (config.max_z + 1, F)}
    if config.rbf_mode == "bessel":
        shapes["rbf_k"] = (config.basis.n_rbf,)
    if not config.node_mode:
        shapes["emb.W"] = (2 * F + R, F)
        shapes["emb.b"] = (F,)
    for b in range(config.L):
        p = f"int{b}."
        shapes[p + "W_rbf"] = (R, F)
        if not config.node_mode:
            shapes[p + "W_sbf"] = (S, config.n_bilinear)
            shapes[p + "W_bilinear"] = (config.n_bilinear, F, F)
        shapes[p + "src.W"] = (F, F)
        shapes[p + "src.b"] = (F,)
        shapes[p + "self.W"] = (F, F)
        shapes[p + "self.b"] = (F,)
        for r in range(config.num_residual_blocks):
            for k in (1, 2):
                shapes[p + f"res{r}.{k}.W"] = (F, F)
                shapes[p + f"res{r}.{k}.b"] = (F,)
    heads = [f".t{t}" for t in range(config.num_targets)] if config.separate_heads else [""]
    width = 1 if config.separate_heads else config.num_targets
    for o in range(config.L + 1):
        for h in heads:
            p = f"out{o}{h}."
            shapes[p + "W_rbf"] = (R, F)
            for k in range(config.num_output_dense):
                shapes[p + f"dense{k}.W"] = (F, F)
                shapes[p + f"dense{k}.b"] = (F,)
            shapes[p + "final"] = (F, width)
    return shapes


def _fan_in(name, shape):
    if name.endswith("W_bilinear"):
        return shape[0] * shape[1]
    return shape[0]


def init_params(config, seed=0):
    """Deterministic random parameters.

    Weights ~ N(0, 1/fan_in), biases 0, atom embeddings ~ U(-sqrt3, sqrt3)
    (unit variance), radial wave numbers n*pi/c.
    """
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(config).items():
        if name == "atom_embeddings":
            a = rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), size=shape)
        elif name == "rbf_k":
            a = default_wave_numbers(config.basis)
        elif name.endswith(".b"):
            a = np.zeros(shape)
        else:
            a = rng.normal(0.0, 1.0 / np.sqrt(_fan_in(name, shape)), size=shape)
        params[name] = torch.tensor(a, dtype=DTYPE)
    return params


def check_params(params, config):
    shapes = param_shapes(config)
    if set(shapes) != set(params):
        missing = sorted(set(shapes) - set(params))
        extra = sorted(set(params) - set(shapes))
        raise ContractError(f"parameter names mismatch: missing={missing} extra={extra}")
    for name, shape in shapes.items():
        if tuple(params[name].shape) != tuple(shape):
            raise ContractError(f"{name}: expected shape {shape}, got {tuple(params[name].shape)}")


def sub_params(params, prefix):
    n = len(prefix)
    return {k[n:]: v for k, v in params.items() if k.startswith(prefix)}


# ------------------------------------------------------------------- batches

@dataclass
class GraphBatch:
    """Several molecules' graphs concatenated with offset indices."""

    z: torch.Tensor
    src: torch.Tensor
    dst: torch.Tensor
    kj: torch.Tensor
    ji: torch.Tensor
    atom_mol: torch.Tensor
    n_mols: int
    n_atoms: np.ndarray

    @property
    def n_atoms_total(self):
        return int(self.z.shape[0])


def make_batch(mols: Sequence[Molecule], graphs: Sequence[DirectedGraph]):
    zs, srcs, dsts, kjs, jis, owner = [], [], [], [], [], []
    atom_off = edge_off = 0
    for m, (mol, g) in enumerate(zip(mols, graphs)):
        zs.append(mol.z)
        srcs.append(g.src + atom_off)
        dsts.append(g.dst + atom_off)
        kjs.append(g.kj + edge_off)
        jis.append(g.ji + edge_off)
        owner.append(np.full(len(mol), m))
        atom_off += len(mol)
        edge_off += g.n_edges
    cat = lambda xs: torch.from_numpy(np.concatenate(xs).astype(np.int64))
    return GraphBatch(cat(zs), cat(srcs), cat(dsts), cat(kjs), cat(jis), cat(owner),
                      len(mols), np.array([len(m) for m in mols]))


def batch_from_molecules(mols, cutoff):
    return make_batch(mols, [build_graph(m, cutoff) for m in mols])


# ------------------------------------------------------------------- basis

@lru_cache(maxsize=None)
def _roots_for(n_shbf, n_srbf):
    return find_bessel_roots(n_shbf - 1, n_srbf)


@lru_cache(maxsize=None)
def _sbf_norms(basis):
    return sbf_normalizers(basis, _roots_for(basis.n_shbf, basis.n_srbf))


def edge_vectors(pos, batch):
    """Per-edge displacement x_i - x_j and its length."""
    vec = ops.gather(pos, batch.dst) - ops.gather(pos, batch.src)
    return vec, ops.norm(vec)


def triplet_cosines(vec, d, batch):
    """cos of the angle at j between x_k and x_i for every triplet."""
    v_kj = ops.gather(vec, batch.kj)
    v_ji = ops.gather(vec, batch.ji)
    dot = -(v_kj * v_ji).sum(dim=-1)
    return dot / (ops.gather(d, batch.kj) * ops.gather(d, batch.ji))


def edge_rbf(d, params, config):
    c = config.cutoff
    if config.rbf_mode == "gaussian":
        return _gaussian(d, c, config.n_gaussians, config.gamma, config.basis.p)
    return _radial(d, params["rbf_k"], c, config.basis.p)


def triplet_sbf(d_kj, cos_alpha, config):
    basis = config.angular_basis
    return _spherical_2d(d_kj, cos_alpha, basis, _roots_for(basis.n_shbf, basis.n_srbf),
                         norms=_sbf_norms(basis))


# ------------------------------------------------------------------- blocks

def swish(x):
    return ops.swish(x)


def _dense(x, bp, name, act=True):
    y = ops.matmul(x, bp[name + ".W"]) + bp[name + ".b"]
    return swish(y) if act else y


def embedding_block(batch, e_rbf, params):
    """Initial messages m_ji from [h_j || h_i || e_RBF(d_ji)]."""
    z = batch.z
    n_rows = params["atom_embeddings"].shape[0]
    if bool((z >= n_rows).any()) or bool((z < 1).any()):
        bad = sorted(set(int(v) for v in z[(z >= n_rows) | (z < 1)]))
        raise UnknownElementError(f"atomic numbers {bad} not in embedding table (max {n_rows - 1})")
    h0 = ops.gather(params["atom_embeddings"], z)
    x = ops.concat([ops.gather(h0, batch.src), ops.gather(h0, batch.dst), e_rbf])
    return swish(ops.matmul(x, params["emb.W"]) + params["emb.b"])


def interaction_terms(m, batch, e_rbf, a_sbf, bp):
    """Per-triplet interaction f_int(kj -> ji), shape (n_triplets, F)."""
    m_src = _dense(m, bp, "src")
    gate = ops.matmul(e_rbf, bp["W_rbf"])
    g = ops.gather(gate, batch.ji) * ops.gather(m_src, batch.kj)
    s = ops.matmul(a_sbf, bp["W_sbf"])
    return ops.bilinear(s, g, bp["W_bilinear"])


def residual_update(x, skip, bp, num_residual):
    for r in range(num_residual):
        x = x + _dense(_dense(x, bp, f"res{r}.1"), bp, f"res{r}.2")
    return x + skip


def interaction_block(m, batch, e_rbf, a_sbf, bp, num_residual=2):
    """Directional message update: aggregate f_int over k in N_j \\ {i}, then f_update."""
    f_int = interaction_terms(m, batch, e_rbf, a_sbf, bp)
    agg = ops.scatter_sum(f_int, batch.ji, m.shape[0])
    x = _dense(m, bp, "self") + agg
    return residual_update(x, m, bp, num_residual)


def _output_head(x_edge, batch, e_rbf, bp, num_dense):
    weighted = ops.matmul(e_rbf, bp["W_rbf"]) * x_edge
    h = ops.scatter_sum(weighted, batch.dst, batch.n_atoms_total)
    for k in range(num_dense):
        h = _dense(h, bp, f"dense{k}")
    return ops.matmul(h, bp["final"])


def output_block(m, batch, e_rbf, bp, config):
    """Per-atom outputs (N, T) from per-edge messages."""
    if config.separate_heads:
        cols = [_output_head(m, batch, e_rbf, sub_params(bp, f"t{t}."), config.num_output_dense)
                for t in range(config.num_targets)]
        return ops.concat(cols)
    return _output_head(m, batch, e_rbf, bp, config.num_output_dense)


def _node_output(h, batch, e_rbf, bp, config):
    return output_block(ops.gather(h, batch.src), batch, e_rbf, bp, config)


# ------------------------------------------------------------------ forward

def atom_outputs(pos, batch, params, config):
    """Per-atom outputs summed over all output blocks, shape (N, T)."""
    vec, d = edge_vectors(pos, batch)
    e_rbf = edge_rbf(d, params, config)
    if config.node_mode:
        return _node_atom_outputs(batch, e_rbf, params, config)

    cos_alpha = triplet_cosines(vec, d, batch)
    a_sbf = triplet_sbf(ops.gather(d, batch.kj), cos_alpha, config)
    m = embedding_block(batch, e_rbf, params)
    t = output_block(m, batch, e_rbf, sub_params(params, "out0."), config)
    for b in range(config.L):
        m = interaction_block(m, batch, e_rbf, a_sbf, sub_params(params, f"int{b}."),
                              config.num_residual_blocks)
        t = t + output_block(m, batch, e_rbf, sub_params(params, f"out{b + 1}."), config)
    return t


def _node_atom_outputs(batch, e_rbf, params, config):
    z = batch.z
    if bool((z >= params["atom_embeddings"].shape[0]).any()):
        raise UnknownElementError("atomic number not in embedding table")
    h = ops.gather(params["atom_embeddings"], z)
    t = _node_output(h, batch, e_rbf, sub_params(params, "out0."), config)
    for b in range(config.L):
        bp = sub_params(params, f"int{b}.")
        msg = ops.matmul(e_rbf, bp["W_rbf"]) * ops.gather(_dense(h, bp, "src"), batch.src)
        agg = ops.scatter_sum(msg, batch.dst, batch.n_atoms_total)
        h = residual_update(_dense(h, bp, "self") + agg, h, bp, config.num_residual_blocks)
        t = t + _node_output(h, batch, e_rbf, sub_params(params, f"out{b + 1}."), config)
    return t


def forward_batch(pos, batch, params, config):
    """Predictions per molecule, shape (n_mols, T)."""
    t_atom = atom_outputs(pos, batch, params, config)
    return ops.scatter_sum(t_atom, batch.atom_mol, batch.n_mols)


def _single(mol, config):
    return make_batch([mol], [build_graph(mol, config.cutoff)])


def _positions(mol):
    return torch.tensor(mol.X, dtype=DTYPE)


def forward(mol, params, config):
    """Prediction vector (length T) for one molecule."""
    batch = _single(mol, config)
    with torch.no_grad():
        return forward_batch(_positions(mol), batch, params, config)[0].numpy()


def node_mode_forward(mol, params, config):
    """Node-embedding ablation; ``config.node_mode`` must be set."""
    if not config.node_mode:
        raise ContractError("node_mode_forward requires config.node_mode = True")
    return forward(mol, params, config)


def energy_function(z, params, config):
    """Scalar energy as a differentiable function of a position tensor.

    The graph is rebuilt from the (detached) positions on every call.
    """
    if config.num_targets != 1:
        raise ContractError("forces need a scalar energy head (num_targets == 1)")
    z = np.asarray(z)

    def energy(positions):
        mol = Molecule(z, positions.detach().numpy())
        return forward_batch(positions, _single(mol, config), params, config)[0, 0]

    return energy


def energy_and_forces(mol, params, config):
    energy = energy_function(mol.z, params, config)
    value, trace = evaluate_with_trace(lambda positions: energy(positions), {"positions": mol.X})
    return float(value), -gradient(trace, "positions").numpy()


def predict_forces(mol, params, config):
    """Forces -dE/dX, shape (N, 3)."""
    return energy_and_forces(mol, params, config)[1]
