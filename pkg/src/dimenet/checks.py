"""Property checks on a model: invariances, force correctness, smooth cutoff."""

from dataclasses import dataclass, field
from typing import List

import numpy as np
import torch

from .diffeng import finite_difference_check, grad
from .geometry import Molecule
from .model import DTYPE, energy_function, forward, init_params

ELEMENTS = (1, 6, 7, 8, 9)

INVARIANCE_TOL = {"rotation_translation": 1e-8, "permutation": 1e-10, "inversion": 1e-8}
FORCE_REL_TOL = 1e-4
NET_FORCE_TOL = 1e-8
NET_TORQUE_TOL = 1e-7
SMOOTH_TOL = 1e-5


def random_molecule(rng, n_min=3, n_max=20, min_sep=0.9, elements=ELEMENTS):
    """Random compact molecule: atoms added next to existing ones, no close contacts."""
    n = int(rng.integers(n_min, n_max + 1))
    X = [np.zeros(3)]
    while len(X) < n:
        anchor = X[int(rng.integers(len(X)))]
        v = rng.normal(size=3)
        cand = anchor + v / np.linalg.norm(v) * rng.uniform(1.0, 1.8)
        if min(np.linalg.norm(cand - x) for x in X) >= min_sep:
            X.append(cand)
    z = rng.choice(elements, size=n)
    return Molecule(z, np.array(X))


def random_rotation(rng):
    """Uniformly random proper rotation matrix."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def invariance_errors(mol, params, config, rng):
    """|E(g X) - E(X)| for a rigid motion, an atom permutation and inversion."""
    e0 = forward(mol, params, config)
    R = random_rotation(rng)
    t = rng.normal(size=3) * 3.0
    perm = rng.permutation(len(mol))
    moved = Molecule(mol.z, mol.X @ R.T + t)
    permuted = Molecule(mol.z[perm], mol.X[perm])
    inverted = Molecule(mol.z, -mol.X)
    return {
        "rotation_translation": float(np.abs(forward(moved, params, config) - e0).max()),
        "permutation": float(np.abs(forward(permuted, params, config) - e0).max()),
        "inversion": float(np.abs(forward(inverted, params, config) - e0).max()),
    }


def force_errors(mol, params, config, h=1e-4, floor=1e-8):
    """Relative error against central differences, net force and net torque."""
    energy = energy_function(mol.z, params, config)
    X = torch.tensor(mol.X, dtype=DTYPE, requires_grad=True)
    with torch.enable_grad():
        g = grad(energy(X), X).detach().numpy()
    rel = finite_difference_check(energy, mol.X, h=h, grad=g, floor=floor)
    F = -g
    torque = np.cross(mol.X - mol.X.mean(axis=0), F).sum(axis=0)
    return {"relative_error": rel,
            "net_force": float(np.abs(F.sum(axis=0)).max()),
            "net_torque": float(np.abs(torque).max())}


# ------------------------------------------------------------------ smoothness

def dimer_sweep(params, config, z=(6, 6), half_width=0.05, step=1e-3):
    """E, dE/dd and d2E/dd2 for a dimer swept through the cutoff.

    Derivatives come from reverse mode applied twice, sampled on the grid.
    """
    c = config.cutoff
    n = int(round(2 * half_width / step))
    d_axis = c + step * (np.arange(n + 1) - n // 2)
    energy = energy_function(np.asarray(z), params, config)
    E, dE, d2E = (np.empty(len(d_axis)) for _ in range(3))
    for i, d in enumerate(d_axis):
        dt = torch.tensor(float(d), dtype=DTYPE, requires_grad=True)
        with torch.enable_grad():
            zero = torch.zeros((), dtype=DTYPE)
            pos = torch.stack([torch.zeros(3, dtype=DTYPE), torch.stack([dt, zero, zero])])
            e = energy(pos)
            g = torch.autograd.grad(e, dt, create_graph=True, allow_unused=True)[0]
            if g is None or not g.requires_grad:
                g2 = torch.zeros(())
            else:
                g2 = torch.autograd.grad(g, dt, allow_unused=True)[0]
                g2 = torch.zeros(()) if g2 is None else g2
            g = torch.zeros(()) if g is None else g
        E[i], dE[i], d2E[i] = float(e.detach()), float(g.detach()), float(g2.detach())
    return d_axis, E, dE, d2E


def _min_abs_on_unit(poly):
    """min |poly(t)| for t in [0, 1] (numpy coefficient order, highest first)."""
    poly = np.trim_zeros(poly, "f")
    if len(poly) == 0:
        return 0.0
    roots = np.roots(poly) if len(poly) > 1 else np.array([])
    real = roots[np.abs(roots.imag) < 1e-9].real
    if np.any((real >= 0.0) & (real <= 1.0)):
        return 0.0
    crit = np.roots(np.polyder(poly)) if len(poly) > 2 else np.array([])
    crit = crit[np.abs(crit.imag) < 1e-9].real
    ts = np.concatenate([[0.0, 1.0], crit[(crit > 0.0) & (crit < 1.0)]])
    return float(np.abs(np.polyval(poly, ts)).min())


def jump_measure(y, order=3):
    """Largest step discontinuity in a sampled series, relative to max |y|.

    For every gap between neighbouring samples, polynomials of ``order``
    are fitted to the ``order + 1`` samples on each side and compared across
    the gap. Where a kink or a break in a higher derivative sits in the gap
    the two one-sided fits cross, giving zero; a step of size J keeps them
    about J apart. Smooth stretches leave an O(h^(order+1)) residue.
    Returns 0 for an identically zero series.
    """
    y = np.asarray(y, dtype=np.float64)
    k = order + 1
    if len(y) < 2 * k:
        raise ValueError(f"need at least {2 * k} samples")
    scale = np.abs(y).max()
    if scale == 0:
        return 0.0
    worst = 0.0
    left_x = np.arange(-order, 1, dtype=np.float64)
    right_x = np.arange(1, k + 1, dtype=np.float64)
    for i in range(order, len(y) - k):
        left = np.polyfit(left_x, y[i - order:i + 1], order)
        right = np.polyfit(right_x, y[i + 1:i + 1 + k], order)
        worst = max(worst, _min_abs_on_unit(left - right))
    return float(worst / scale)


@dataclass
class SmoothnessReport:
    jumps: dict
    beyond_cutoff_spread: float
    ok: bool


def smoothness_report(params, config, tol=SMOOTH_TOL, **sweep_kw):
    d, E, dE, d2E = dimer_sweep(params, config, **sweep_kw)
    jumps = {"energy": jump_measure(E), "first": jump_measure(dE), "second": jump_measure(d2E)}
    outside = E[d >= config.cutoff]
    spread = float(outside.max() - outside.min()) if len(outside) else 0.0
    ok = all(v <= tol for v in jumps.values()) and spread == 0.0
    return SmoothnessReport(jumps, spread, ok)


# -------------------------------------------------------------------- driver

@dataclass
class CheckReport:
    n_molecules: int
    invariance: dict = field(default_factory=dict)
    forces: dict = field(default_factory=dict)
    smoothness: SmoothnessReport = None
    failures: List[str] = field(default_factory=list)

    @property
    def ok(self):
        return not self.failures


def run_checks(config, seed=0, n_molecules=10, params=None, molecules=None, n_force=None):
    """Invariance, force and smoothness checks; maxima are reported per quantity."""
    rng = np.random.default_rng(seed)
    if params is None:
        params = init_params(config, seed)
    if molecules is None:
        molecules = [random_molecule(rng) for _ in range(n_molecules)]
    report = CheckReport(len(molecules))

    inv = {k: 0.0 for k in INVARIANCE_TOL}
    for mol in molecules:
        for k, v in invariance_errors(mol, params, config, rng).items():
            inv[k] = max(inv[k], v)
    report.invariance = inv
    for k, v in inv.items():
        if not v <= INVARIANCE_TOL[k]:
            report.failures.append(f"{k} invariance error {v:.3g} > {INVARIANCE_TOL[k]:g}")

    if config.num_targets == 1:
        forces = {"relative_error": 0.0, "net_force": 0.0, "net_torque": 0.0}
        for mol in molecules[: n_force if n_force is not None else len(molecules)]:
            for k, v in force_errors(mol, params, config).items():
                forces[k] = max(forces[k], v)
        report.forces = forces
        limits = {"relative_error": FORCE_REL_TOL, "net_force": NET_FORCE_TOL,
                  "net_torque": NET_TORQUE_TOL}
        for k, v in forces.items():
            if not v <= limits[k]:
                report.failures.append(f"force {k} {v:.3g} > {limits[k]:g}")

        report.smoothness = smoothness_report(params, config)
        if not report.smoothness.ok:
            report.failures.append(f"cutoff smoothness violated: {report.smoothness}")
    return report
