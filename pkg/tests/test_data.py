import numpy as np
import pytest

from dimenet.data import (
    Dataset, Frame, apply_atomref, fit_atomref, morse_energy_forces, parse_xyz, toy_dataset,
    write_xyz, TOY_X,
)
from dimenet.diffeng import central_differences
from dimenet.elements import KCAL_PER_MOL_IN_EV
from dimenet.exceptions import ContractError, ParseError, UnknownElementError
from dimenet.geometry import Molecule

H2 = """2
Properties=species:S:1:pos:R:3 energy=-1.0
H 0.0 0.0 0.0
H 0.0 0.0 0.74
"""


def _write(tmp_path, text, name="f.xyz"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_parse_h2(tmp_path):
    ds = parse_xyz(_write(tmp_path, H2))
    assert len(ds) == 1 and ds.num_targets == 1 and not ds.has_forces
    fr = ds[0]
    assert fr.targets[0] == -1.0
    np.testing.assert_array_equal(fr.molecule.z, [1, 1])
    assert fr.molecule.X[1, 2] == 0.74


def test_parse_forces_and_lattice(tmp_path):
    text = ('2\nLattice="10 0 0 0 10 0 0 0 10" Properties=species:S:1:pos:R:3:forces:R:3 Energy=2.5\n'
            "O 0 0 0 0.1 0.2 0.3\nH 0 0 1 -0.1 -0.2 -0.3\n")
    ds = parse_xyz(_write(tmp_path, text))
    assert ds.has_forces
    np.testing.assert_array_equal(ds[0].forces[1], [-0.1, -0.2, -0.3])
    assert ds[0].targets[0] == 2.5


def test_parse_unit_scale(tmp_path):
    ds = parse_xyz(_write(tmp_path, H2), unit_scale=KCAL_PER_MOL_IN_EV)
    assert ds[0].targets[0] == pytest.approx(-0.0433641, rel=1e-15)


@pytest.mark.parametrize("text, lineno", [
    ("x\nenergy=1\nH 0 0 0\n", 1),
    ("2\nenergy=1\nH 0 0 0\n", 1),
    ("1\nenergy=1\nQq 0 0 0\n", 3),
    ("1\nfoo=1\nH 0 0 0\n", 2),
    ("1\nenergy=1\nH 0 0\n", 3),
    ("1\nenergy=abc\nH 0 0 0\n", 2),
    ("1\nenergy=1\nH 0 0 0 1 1 1\n1\nenergy=1\nH 0 0 0\n", 6),
])
def test_parse_errors(tmp_path, text, lineno):
    with pytest.raises(ParseError) as exc:
        parse_xyz(_write(tmp_path, text))
    assert exc.value.lineno == lineno
    assert f":{lineno}:" in str(exc.value)


def test_roundtrip(tmp_path):
    ds = toy_dataset(5, seed=1)
    p = tmp_path / "toy.xyz"
    write_xyz(p, ds)
    back = parse_xyz(p)
    for a, b in zip(ds.frames, back.frames):
        np.testing.assert_array_equal(a.molecule.X, b.molecule.X)
        np.testing.assert_array_equal(a.forces, b.forces)
        np.testing.assert_array_equal(a.targets, b.targets)


def test_atomref():
    ds = Dataset([Frame(Molecule([1, 1], [[0, 0, 0], [0, 0, 0.7]]), np.array([-1.5]))])
    assert apply_atomref(ds, {1: 0.0})[0].targets[0] == -1.5
    assert apply_atomref(ds, {1: -0.5})[0].targets[0] == -0.5
    assert ds[0].targets[0] == -1.5
    with pytest.raises(UnknownElementError):
        apply_atomref(ds, {6: 1.0})


def test_fit_atomref_reduces_variance(rng):
    frames = []
    ref = {1: -0.5, 6: -37.8, 8: -75.0}
    for _ in range(30):
        z = rng.choice([1, 6, 8], size=rng.integers(2, 8))
        X = np.cumsum(rng.uniform(0.9, 1.2, (len(z), 3)), axis=0)
        e = sum(ref[int(v)] for v in z) + rng.normal(scale=0.01)
        frames.append(Frame(Molecule(z, X), np.array([e])))
    ds = Dataset(frames)
    table = fit_atomref(ds)
    reduced = apply_atomref(ds, table)
    assert np.var(reduced.targets()) < 1e-3 * np.var(ds.targets())
    assert abs(np.mean(reduced.targets())) < 0.05


def test_dataset_consistency():
    mol = Molecule([1], [[0, 0, 0]])
    with pytest.raises(ContractError):
        Dataset([Frame(mol, np.array([1.0])), Frame(mol, np.array([1.0, 2.0]))])
    with pytest.raises(ContractError):
        Dataset([Frame(mol, np.array([1.0]), np.zeros((1, 3))), Frame(mol, np.array([1.0]))])


def test_morse_forces_are_gradients(rng):
    X = TOY_X + rng.normal(scale=0.05, size=TOY_X.shape)
    r0 = np.linalg.norm(TOY_X[:, None] - TOY_X[None], axis=-1)
    depth, width = np.full_like(r0, 2.0), np.full_like(r0, 1.5)
    _, F = morse_energy_forces(X, r0, depth, width)
    fd = central_differences(lambda x: morse_energy_forces(x, r0, depth, width)[0], X, h=1e-5)
    np.testing.assert_allclose(F, -fd, atol=1e-8)


def test_toy_dataset_shape():
    ds = toy_dataset(7, seed=0)
    assert len(ds) == 7 and ds.has_forces
    assert all(len(f.molecule) == 6 for f in ds.frames)
