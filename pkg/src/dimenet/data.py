"""Datasets: extended XYZ ingestion, atomic reference energies, toy data."""

from dataclasses import dataclass, field, replace
import shlex
from typing import List, Optional

import numpy as np

from .elements import ATOMIC_NUMBERS, SYMBOLS
from .exceptions import ContractError, ParseError, UnknownElementError
from .geometry import Molecule


@dataclass(frozen=True)
class Frame:
    molecule: Molecule
    targets: np.ndarray
    forces: Optional[np.ndarray] = None


@dataclass
class Dataset:
    frames: List[Frame]
    target_names: tuple = ("energy",)
    units: dict = field(default_factory=lambda: {"energy": "eV", "length": "Å", "forces": "eV/Å"})
    atomref: Optional[dict] = None

    def __post_init__(self):
        T = {len(f.targets) for f in self.frames}
        if len(T) > 1:
            raise ContractError(f"inconsistent target counts {sorted(T)}")
        has_forces = {f.forces is not None for f in self.frames}
        if len(has_forces) > 1:
            raise ContractError("forces must be present in every frame or in none")

    def __len__(self):
        return len(self.frames)

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return replace(self, frames=self.frames[idx])
        return self.frames[idx]

    @property
    def num_targets(self):
        return len(self.frames[0].targets) if self.frames else len(self.target_names)

    @property
    def has_forces(self):
        return bool(self.frames) and self.frames[0].forces is not None

    def subset(self, indices):
        return replace(self, frames=[self.frames[i] for i in indices])

    def targets(self):
        return np.stack([f.targets for f in self.frames])


def _parse_float(tok, path, lineno):
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"expected a number, got {tok!r}", path, lineno) from None


def _parse_properties(line, path, lineno):
    try:
        tokens = shlex.split(line, posix=True)
    except ValueError as exc:
        raise ParseError(f"bad property line: {exc}", path, lineno) from None
    props = {}
    for tok in tokens:
        if "=" in tok:
            k, v = tok.split("=", 1)
            props[k.strip().lower()] = v.strip()
    return props


def parse_xyz(path, target_keys=("energy",), unit_scale=1.0):
    """Read an extended XYZ file (energies in eV, Å, forces in eV/Å).

    ``unit_scale`` multiplies energies and forces at ingestion, e.g.
    ``KCAL_PER_MOL_IN_EV`` for MD17 data stored in kcal/mol.
    """
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    frames = []
    pos = 0
    forces_mode = None
    keys = tuple(k.lower() for k in target_keys)
    while pos < len(lines):
        if not lines[pos].strip():
            pos += 1
            continue
        lineno = pos + 1
        try:
            n = int(lines[pos].strip())
        except ValueError:
            raise ParseError(f"expected atom count, got {lines[pos]!r}", path, lineno) from None
        if n < 1:
            raise ParseError(f"atom count must be positive, got {n}", path, lineno)
        if pos + 1 + n >= len(lines):
            raise ParseError(f"frame declares {n} atoms but file ends early", path, lineno)
        props = _parse_properties(lines[pos + 1], path, lineno + 1)
        targets = []
        for k in keys:
            if k not in props:
                raise ParseError(f"missing {k}=<value> on property line", path, lineno + 1)
            targets.append(_parse_float(props[k], path, lineno + 1) * unit_scale)
        z, X, F = [], [], []
        for a in range(n):
            ln = pos + 2 + a
            fields = lines[ln].split()
            if len(fields) not in (4, 7):
                raise ParseError(f"expected 4 or 7 columns, got {len(fields)}", path, ln + 1)
            sym = fields[0]
            if sym not in ATOMIC_NUMBERS:
                raise ParseError(f"unknown element {sym!r}", path, ln + 1)
            z.append(ATOMIC_NUMBERS[sym])
            X.append([_parse_float(t, path, ln + 1) for t in fields[1:4]])
            if len(fields) == 7:
                F.append([_parse_float(t, path, ln + 1) * unit_scale for t in fields[4:7]])
            if forces_mode is None:
                forces_mode = len(fields) == 7
            elif forces_mode != (len(fields) == 7):
                raise ParseError("force columns present in some atoms/frames but not others",
                                 path, ln + 1)
        try:
            mol = Molecule(np.array(z), np.array(X))
        except ContractError as exc:
            raise ParseError(str(exc), path, lineno) from None
        frames.append(Frame(mol, np.array(targets), np.array(F) if F else None))
        pos += 2 + n
    units = {"energy": "eV", "length": "Å", "forces": "eV/Å"}
    return Dataset(frames, tuple(target_keys), units)


def _fmt(x):
    return format(float(x), ".17g")


def write_xyz(path, dataset):
    """Inverse of :func:`parse_xyz`; floats written with 17 significant digits."""
    with open(path, "w", encoding="utf-8") as fh:
        for fr in dataset.frames:
            mol = fr.molecule
            fh.write(f"{len(mol)}\n")
            props = " ".join(f"{k}={_fmt(v)}" for k, v in zip(dataset.target_names, fr.targets))
            cols = "species:S:1:pos:R:3" + (":forces:R:3" if fr.forces is not None else "")
            fh.write(f"Properties={cols} {props}\n")
            for a in range(len(mol)):
                row = [SYMBOLS[mol.z[a]]] + [_fmt(v) for v in mol.X[a]]
                if fr.forces is not None:
                    row += [_fmt(v) for v in fr.forces[a]]
                fh.write(" ".join(row) + "\n")


def apply_atomref(dataset, table, target=0):
    """Subtract per-element reference energies from target ``target`` of every frame."""
    frames = []
    for fr in dataset.frames:
        try:
            ref = sum(table[int(zi)] for zi in fr.molecule.z)
        except KeyError as exc:
            raise UnknownElementError(f"no reference energy for element {exc.args[0]}") from None
        t = fr.targets.copy()
        t[target] -= ref
        frames.append(replace(fr, targets=t))
    return replace(dataset, frames=frames, atomref=dict(table))


def fit_atomref(dataset, target=0):
    """Least-squares per-element references (useful when none are published)."""
    elements = sorted({int(z) for fr in dataset.frames for z in fr.molecule.z})
    A = np.array([[np.sum(fr.molecule.z == e) for e in elements] for fr in dataset.frames], float)
    y = np.array([fr.targets[target] for fr in dataset.frames])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return dict(zip(elements, coef.tolist()))


# ----------------------------------------------------------------- toy data

# methanol-like reference geometry (Å)
TOY_Z = np.array([6, 8, 1, 1, 1, 1])
TOY_X = np.array([
    [0.000, 0.000, 0.000],
    [1.420, 0.000, 0.000],
    [-0.360, 1.030, 0.000],
    [-0.360, -0.515, 0.892],
    [-0.360, -0.515, -0.892],
    [1.740, 0.910, 0.000],
])


def morse_energy_forces(X, r0, depth, width):
    """Pairwise Morse energy and analytic forces."""
    diff = X[:, None, :] - X[None, :, :]
    r = np.linalg.norm(diff, axis=-1)
    iu = np.triu_indices(len(X), 1)
    ex = np.exp(-width[iu] * (r[iu] - r0[iu]))
    energy = float(np.sum(depth[iu] * (1.0 - ex) ** 2))
    dEdr = np.zeros_like(r)
    dEdr[iu] = 2.0 * depth[iu] * width[iu] * (1.0 - ex) * ex
    dEdr = dEdr + dEdr.T
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(r[..., None] > 0, diff / r[..., None], 0.0)
    forces = -np.einsum("ij,ijk->ik", dEdr, unit)
    return energy, forces


def toy_dataset(n_frames=100, seed=0, noise=0.08, z=TOY_Z, X0=TOY_X):
    """Thermally perturbed conformers of a small molecule with Morse-model labels.

    Bonded pairs (closer than 1.6 Å in the reference) are stiff; all other
    pairs are weak, so the labels depend on angles through 1-3 distances.
    """
    rng = np.random.default_rng(seed)
    r0 = np.linalg.norm(X0[:, None] - X0[None], axis=-1)
    bonded = (r0 < 1.6) & (r0 > 0)
    depth = np.where(bonded, 4.0, 0.3)
    width = np.where(bonded, 1.8, 1.0)
    frames = []
    for _ in range(n_frames):
        X = X0 + rng.normal(0.0, noise, X0.shape)
        e, f = morse_energy_forces(X, r0, depth, width)
        frames.append(Frame(Molecule(z, X), np.array([e]), f))
    return Dataset(frames)
