import dataclasses

import numpy as np
import pytest
import torch

from dimenet.basis import BasisConfig
from dimenet.exceptions import ContractError, UnknownElementError
from dimenet.geometry import Molecule, build_graph, concat_molecules, regular_polygon
from dimenet.model import (
    ModelConfig, batch_from_molecules, check_params, edge_rbf, edge_vectors, embedding_block,
    energy_and_forces, forward, forward_batch, init_params, interaction_block, node_mode_forward,
    output_block, param_shapes, predict_forces, sub_params, swish, triplet_cosines, triplet_sbf,
)
from dimenet.checks import random_molecule, random_rotation


def _zero_biases(params):
    return {k: (torch.zeros_like(v) if k.endswith(".b") else v) for k, v in params.items()}


def _tables(mol, params, config):
    batch = batch_from_molecules([mol], config.cutoff)
    pos = torch.tensor(mol.X)
    vec, d = edge_vectors(pos, batch)
    e = edge_rbf(d, params, config)
    cos = triplet_cosines(vec, d, batch)
    a = triplet_sbf(d[batch.kj], cos, config)
    return batch, e, a


def test_swish_values():
    x = torch.tensor([0.0, 20.0, -1.0], dtype=torch.float64)
    y = swish(x).numpy()
    assert y[0] == 0.0
    assert abs(y[1] - 20.0) <= 1e-7
    assert y[2] == pytest.approx(-0.2689414213699951, rel=1e-14)


def test_default_config():
    cfg = ModelConfig()
    assert (cfg.F, cfg.L, cfg.n_bilinear) == (128, 6, 8)
    assert (cfg.basis.c, cfg.basis.n_rbf, cfg.basis.n_srbf, cfg.basis.n_shbf, cfg.basis.p) == (5.0, 6, 6, 7, 6)
    assert ModelConfig.from_dict(cfg.to_dict()) == cfg


@pytest.mark.parametrize("kw", [dict(F=0), dict(L=0), dict(n_bilinear=0), dict(rbf_mode="x")])
def test_config_validation(kw):
    with pytest.raises(ContractError):
        ModelConfig(**kw)


def test_param_shapes(small_config):
    shapes = param_shapes(small_config)
    F, R = small_config.F, small_config.basis.n_rbf
    assert shapes["emb.W"] == (2 * F + R, F)
    assert shapes["int0.W_sbf"] == (small_config.basis.n_sbf, small_config.n_bilinear)
    assert shapes["int1.W_bilinear"] == (small_config.n_bilinear, F, F)
    assert shapes["out2.final"] == (F, 1)
    assert "out3.final" not in shapes


def test_init_params_deterministic(small_config):
    a, b, c = (init_params(small_config, s) for s in (5, 5, 6))
    assert all(torch.equal(a[k], b[k]) for k in a)
    assert any(not torch.equal(a[k], c[k]) for k in a if not k.endswith(".b"))
    np.testing.assert_allclose(a["rbf_k"].numpy(), np.pi * np.arange(1, 7) / 3.0, rtol=1e-15)
    assert all(float(v.abs().max()) == 0 for k, v in a.items() if k.endswith(".b"))
    emb = a["atom_embeddings"].numpy()
    assert np.all(np.abs(emb) <= np.sqrt(3))


def test_default_k():
    p = init_params(ModelConfig(F=4, L=1), 0)
    np.testing.assert_allclose(p["rbf_k"].numpy(), np.pi * np.arange(1, 7) / 5, rtol=1e-15)


def test_check_params_rejects_bad_shape(small_config, small_params):
    bad = dict(small_params)
    bad["emb.W"] = bad["emb.W"][:-1]
    with pytest.raises(ValueError):
        check_params(bad, small_config)


def test_embedding_symmetric_dimer(small_config, small_params):
    mol = Molecule([6, 6], [[0, 0, 0], [1.3, 0, 0]])
    batch, e, _ = _tables(mol, small_params, small_config)
    m = embedding_block(batch, e, small_params).detach().numpy()
    np.testing.assert_array_equal(m[0], m[1])


def test_embedding_zero_weights(small_config, small_params):
    p = dict(small_params)
    p["emb.W"] = torch.zeros_like(p["emb.W"])
    mol = regular_polygon(3, 1.5)
    batch, e, _ = _tables(mol, p, small_config)
    assert float(embedding_block(batch, e, p).abs().max()) == 0.0


def test_unknown_element(small_config, small_params):
    mol = Molecule([6, 150], [[0, 0, 0], [1.3, 0, 0]])
    with pytest.raises(UnknownElementError):
        forward(mol, small_params, small_config)


def test_triangle_messages_identical(small_config, small_params):
    mol = regular_polygon(3, 1.5, z=7)
    batch, e, a = _tables(mol, small_params, small_config)
    m = embedding_block(batch, e, small_params)
    out = interaction_block(m, batch, e, a, sub_params(small_params, "int0."), 2).detach().numpy()
    np.testing.assert_allclose(out, np.broadcast_to(out[0], out.shape), atol=1e-13)


def test_interaction_without_triplets(small_config, small_params):
    mol = Molecule([6, 8], [[0, 0, 0], [1.3, 0, 0]])
    batch, e, a = _tables(mol, small_params, small_config)
    bp = sub_params(small_params, "int0.")
    m = embedding_block(batch, e, small_params)
    out = interaction_block(m, batch, e, a, bp, 2)
    x = swish(m @ bp["self.W"] + bp["self.b"])
    for r in range(2):
        h = swish(x @ bp[f"res{r}.1.W"] + bp[f"res{r}.1.b"])
        x = x + swish(h @ bp[f"res{r}.2.W"] + bp[f"res{r}.2.b"])
    np.testing.assert_allclose(out.detach().numpy(), (x + m).detach().numpy(), atol=1e-14)


def test_zero_bilinear_removes_angle_dependence():
    # c = 1.5 keeps the 1-3 pair out of range, so only the angle changes
    cfg = ModelConfig(F=16, L=2, n_bilinear=4, basis=BasisConfig(c=1.5))
    p = init_params(cfg, 3)
    for b in range(cfg.L):
        p[f"int{b}.W_bilinear"] = torch.zeros_like(p[f"int{b}.W_bilinear"])
    f = lambda ang: forward(Molecule([6] * 3, [[0, 0, 0], [1.4, 0, 0],
                                               [1.4 + 1.4 * np.cos(ang), 1.4 * np.sin(ang), 0]]), p, cfg)
    assert f(1.0)[0] == pytest.approx(f(1.6)[0], abs=1e-13)


def test_isolated_atoms_zero_with_zero_biases(small_config, small_params):
    p = _zero_biases(small_params)
    mol = Molecule([1, 6, 8], [[0, 0, 0], [10, 0, 0], [0, 10, 0]])
    assert forward(mol, p, small_config)[0] == 0.0


def test_final_weight_zero(small_config, small_params):
    p = dict(small_params)
    for k in p:
        if k.endswith(".final"):
            p[k] = torch.zeros_like(p[k])
    assert forward(regular_polygon(5, 1.4), p, small_config)[0] == 0.0


def test_symmetric_dimer_outputs(small_config, small_params):
    mol = Molecule([7, 7], [[0, 0, 0], [1.1, 0, 0]])
    batch, e, _ = _tables(mol, small_params, small_config)
    m = embedding_block(batch, e, small_params)
    t = output_block(m, batch, e, sub_params(small_params, "out0."), small_config).detach().numpy()
    assert t[0, 0] == t[1, 0]
    F = predict_forces(mol, small_params, small_config)
    np.testing.assert_allclose(F[0], -F[1], atol=1e-14)
    np.testing.assert_allclose(F[:, 1:], 0.0, atol=1e-14)


def test_batch_equals_single(small_config, small_params, rng):
    mols = [random_molecule(rng, 3, 7) for _ in range(4)]
    batch = batch_from_molecules(mols, small_config.cutoff)
    pos = torch.from_numpy(np.concatenate([m.X for m in mols]))
    with torch.no_grad():
        out = forward_batch(pos, batch, small_params, small_config).numpy()
    single = np.array([forward(m, small_params, small_config) for m in mols])
    np.testing.assert_allclose(out, single, atol=1e-12)


def test_forces_equivariant_and_torque_free(small_config, small_params, rng):
    mol = random_molecule(rng, 5, 9)
    R = random_rotation(rng)
    _, F = energy_and_forces(mol, small_params, small_config)
    _, F_rot = energy_and_forces(Molecule(mol.z, mol.X @ R.T), small_params, small_config)
    np.testing.assert_allclose(F_rot, F @ R.T, atol=1e-6)
    torque = np.cross(mol.X, F).sum(axis=0)
    assert np.abs(torque).max() <= 1e-8
    assert np.abs(F.sum(axis=0)).max() <= 1e-8


def test_multi_target_forces_rejected(small_config, small_params):
    cfg = dataclasses.replace(small_config, num_targets=2)
    with pytest.raises(ContractError):
        predict_forces(regular_polygon(3, 1.5), init_params(cfg, 0), cfg)


def test_multi_target_heads(small_config):
    cfg = dataclasses.replace(small_config, num_targets=3, shared_output_blocks=False)
    out = forward(regular_polygon(4, 1.4), init_params(cfg, 0), cfg)
    assert out.shape == (3,)


def test_hexagon_vs_triangles():
    cfg = ModelConfig(F=16, L=2, n_bilinear=4, basis=BasisConfig(c=2.5))
    hexagon = regular_polygon(6, 1.5)
    pair = concat_molecules(regular_polygon(3, 1.5), regular_polygon(3, 1.5, center=(20, 0, 0)))
    p = init_params(cfg, 0)
    assert abs(forward(hexagon, p, cfg)[0] - forward(pair, p, cfg)[0]) > 1e-4
    node = dataclasses.replace(cfg, node_mode=True)
    pn = init_params(node, 0)
    diff = node_mode_forward(hexagon, pn, node)[0] - node_mode_forward(pair, pn, node)[0]
    assert abs(diff) <= 1e-10


def test_node_mode_requires_flag(small_config, small_params):
    with pytest.raises(ContractError):
        node_mode_forward(regular_polygon(3, 1.5), small_params, small_config)


@pytest.mark.parametrize("kw", [dict(rbf_mode="gaussian"), dict(use_angles=False), dict(node_mode=True)])
def test_ablation_invariance(small_config, rng, kw):
    cfg = dataclasses.replace(small_config, **kw)
    p = init_params(cfg, 1)
    mol = random_molecule(rng, 4, 8)
    R = random_rotation(rng)
    e0 = forward(mol, p, cfg)[0]
    assert forward(Molecule(mol.z, mol.X @ R.T + 1.7), p, cfg)[0] == pytest.approx(e0, abs=1e-8)
