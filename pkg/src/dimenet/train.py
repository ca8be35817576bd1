"""Losses, AMSGrad, learning-rate schedule, EMA, and the training loop."""

from dataclasses import asdict, dataclass, field
import logging
import math
from typing import Dict, List, Optional

import numpy as np
import torch

from .checkpoint import Checkpoint, save_checkpoint
from .diffeng import grad
from .exceptions import ContractError, TrainingDivergedError
from .geometry import build_graph
from .model import DTYPE, forward_batch, init_params, make_batch

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    rho: float = 100.0
    lr: float = 1e-3
    batch_size: int = 32
    warmup_steps: int = 3000
    decay_rate: float = 0.1
    decay_steps: int = 2_000_000
    ema_decay: float = 0.999
    max_steps: int = 3_000_000
    patience: int = 50
    eval_every: int = 1000
    seed: int = 0
    loss: str = "auto"  # "energy", "md", or "auto" (md when forces are available)
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.rho < 0:
            raise ContractError("rho must be >= 0")
        if not self.lr > 0:
            raise ContractError("lr must be > 0")
        if not 0 < self.ema_decay < 1:
            raise ContractError("ema_decay must lie in (0, 1)")
        if self.batch_size < 1 or self.max_steps < 0 or self.eval_every < 1:
            raise ContractError("batch_size and eval_every must be >= 1, max_steps >= 0")
        if self.loss not in ("auto", "energy", "md"):
            raise ContractError(f"loss must be auto, energy or md, got {self.loss!r}")

    def to_dict(self):
        return asdict(self)


# --------------------------------------------------------------------- losses

def loss_energy(pred, target):
    """Mean absolute error; a plain absolute error for scalars."""
    if isinstance(pred, torch.Tensor) or isinstance(target, torch.Tensor):
        return (torch.as_tensor(pred) - torch.as_tensor(target)).abs().mean()
    return float(np.mean(np.abs(np.asarray(pred, float) - np.asarray(target, float))))


def loss_md(pred_E, target_E, pred_F, target_F, rho):
    """|dE| + rho/(3N) sum |dF| for one molecule; ``pred_F`` are already -dE/dX."""
    torch_mode = any(isinstance(x, torch.Tensor) for x in (pred_E, target_E, pred_F, target_F))
    lib = torch if torch_mode else np
    if torch_mode:
        pred_E, target_E, pred_F, target_F = (torch.as_tensor(x, dtype=DTYPE) for x in
                                              (pred_E, target_E, pred_F, target_F))
    else:
        pred_F = np.asarray(pred_F, float)
        target_F = np.asarray(target_F, float)
    if tuple(pred_F.shape) != tuple(target_F.shape) or pred_F.shape[-1] != 3:
        raise ContractError(f"force shapes differ: {tuple(pred_F.shape)} vs {tuple(target_F.shape)}")
    n = pred_F.shape[0]
    out = lib.abs(pred_E - target_E).sum() + rho / (3 * n) * lib.abs(pred_F - target_F).sum()
    return out if torch_mode else float(out)


def batch_md_loss(pred_E, target_E, pred_F, target_F, atom_mol, n_atoms, rho):
    """Mean over molecules of :func:`loss_md`, vectorised over a batch."""
    e_term = (pred_E - target_E).abs().sum(dim=-1)
    per_atom = (pred_F - target_F).abs().sum(dim=-1)
    f_sum = torch.zeros(len(n_atoms), dtype=DTYPE).index_add(0, atom_mol, per_atom)
    n = torch.as_tensor(n_atoms, dtype=DTYPE)
    return (e_term + rho / (3.0 * n) * f_sum).mean()


# ------------------------------------------------------------------ optimizer

@dataclass
class AMSGradState:
    m: Dict[str, torch.Tensor]
    v: Dict[str, torch.Tensor]
    vhat: Dict[str, torch.Tensor]
    step: int = 0

    @classmethod
    def zeros_like(cls, params):
        z = lambda: {k: torch.zeros_like(p) for k, p in params.items()}
        return cls(z(), z(), z(), 0)


def amsgrad_step(params, grads, state, lr_t, beta1=0.9, beta2=0.999, eps=1e-8):
    """One AMSGrad update (no bias correction). Returns ``(new_params, new_state)``."""
    new_p, m, v, vhat = {}, {}, {}, {}
    with torch.no_grad():
        for k, p in params.items():
            g = grads[k]
            m[k] = beta1 * state.m[k] + (1.0 - beta1) * g
            v[k] = beta2 * state.v[k] + (1.0 - beta2) * g * g
            vhat[k] = torch.maximum(state.vhat[k], v[k])
            new_p[k] = p - lr_t * m[k] / (torch.sqrt(vhat[k]) + eps)
    return new_p, AMSGradState(m, v, vhat, state.step + 1)


def lr_schedule(step, cfg):
    """Linear warm-up times continuous exponential decay."""
    warm = 1.0 if cfg.warmup_steps <= 0 else min(1.0, step / cfg.warmup_steps)
    return cfg.lr * warm * cfg.decay_rate ** (step / cfg.decay_steps)


def ema_update(shadow, params, decay):
    with torch.no_grad():
        return {k: decay * shadow[k] + (1.0 - decay) * params[k] for k in shadow}


# ---------------------------------------------------------------- evaluation

class _Prepared:
    """A dataset with graphs and tensors built once; positions never change."""

    def __init__(self, dataset, cutoff):
        self.frames = dataset.frames
        self.graphs = [build_graph(f.molecule, cutoff) for f in self.frames]
        self.has_forces = dataset.has_forces

    def __len__(self):
        return len(self.frames)

    def batch(self, idx):
        frames = [self.frames[i] for i in idx]
        b = make_batch([f.molecule for f in frames], [self.graphs[i] for i in idx])
        pos = torch.from_numpy(np.concatenate([f.molecule.X for f in frames]))
        target_E = torch.from_numpy(np.stack([f.targets for f in frames]).astype(np.float64))
        target_F = None
        if self.has_forces:
            target_F = torch.from_numpy(np.concatenate([f.forces for f in frames]))
        return b, pos, target_E, target_F


def _predict(params, config, batch, pos, need_forces, create_graph=False):
    """Energies and (optionally) forces; ``create_graph`` keeps both differentiable."""
    pos = pos.clone().requires_grad_(need_forces)
    with torch.enable_grad() if need_forces or create_graph else torch.no_grad():
        E = forward_batch(pos, batch, params, config)
        F = None
        if need_forces:
            F = -grad(E.sum(), pos, create_graph=create_graph)
    return E, F


def evaluate_dataset(params, config, prepared, rho, use_forces, chunk=64):
    """Loss and MAEs of ``params`` over a prepared dataset."""
    n = len(prepared)
    sums = {"loss": 0.0, "energy_mae": 0.0, "force_mae": 0.0}
    n_force_comp = 0
    for start in range(0, n, chunk):
        idx = list(range(start, min(n, start + chunk)))
        b, pos, tE, tF = prepared.batch(idx)
        E, F = _predict(params, config, b, pos, use_forces)
        with torch.no_grad():
            if use_forces:
                loss = batch_md_loss(E, tE, F, tF, b.atom_mol, b.n_atoms, rho)
                sums["force_mae"] += float((F - tF).abs().sum())
                n_force_comp += tF.numel()
            else:
                loss = (E - tE).abs().sum(dim=-1).mean()
            sums["loss"] += float(loss) * len(idx)
            sums["energy_mae"] += float((E - tE).abs().mean(dim=-1).sum())
    out = {"loss": sums["loss"] / n, "energy_mae": sums["energy_mae"] / n}
    if use_forces:
        out["force_mae"] = sums["force_mae"] / n_force_comp
    return out


# ---------------------------------------------------------------------- loop

@dataclass
class TrainResult:
    checkpoint: Checkpoint
    history: List[dict] = field(default_factory=list)
    probes: Dict[int, dict] = field(default_factory=dict)
    final_params: Optional[dict] = None
    stopped_early: bool = False


def _clone(params):
    return {k: v.detach().clone() for k, v in params.items()}


def train_loop(train_set, val_set, config, cfg, params=None, log_path=None,
               checkpoint_path=None, probe_steps=(), metrics_log=None):
    """Mini-batch AMSGrad training with warm-up/decay, EMA, and early stopping.

    Validation uses EMA weights and runs every ``cfg.eval_every`` steps and at
    the end; training stops after ``cfg.patience`` evaluations without
    improvement. ``probe_steps`` additionally record full training-set metrics
    of the raw weights at those steps (and always at the end).
    Returns the checkpoint holding the best EMA weights.
    """
    if len(train_set) == 0:
        raise ContractError("empty training set")
    if len(val_set) == 0:
        raise ContractError("empty validation set")
    use_forces = cfg.loss == "md" or (cfg.loss == "auto" and train_set.has_forces)
    if use_forces and not (train_set.has_forces and val_set.has_forces):
        raise ContractError("md loss needs forces in both training and validation sets")
    if train_set.num_targets != config.num_targets:
        raise ContractError(f"dataset has {train_set.num_targets} targets, model {config.num_targets}")

    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    params = _clone(params if params is not None else init_params(config, cfg.seed))
    state = AMSGradState.zeros_like(params)
    shadow = _clone(params)
    train_p = _Prepared(train_set, config.cutoff)
    val_p = _Prepared(val_set, config.cutoff)
    names = list(params)

    history, probes = [], {}
    best = (math.inf, _clone(shadow), 0)
    bad_evals = 0
    running, running_n = 0.0, 0
    order, cursor = rng.permutation(len(train_p)), 0
    stopped_early = False
    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
    if log_fh:
        log_fh.write("# step lr train_loss val_loss val_loss_raw\n")

    def record(step, lr_t):
        nonlocal best, bad_evals, running, running_n
        val_ema = evaluate_dataset(shadow, config, val_p, cfg.rho, use_forces)
        val_raw = evaluate_dataset(params, config, val_p, cfg.rho, use_forces)
        row = {"step": step, "lr": lr_t,
               "train_loss": running / running_n if running_n else float("nan"),
               "val_loss": val_ema["loss"], "val_loss_raw": val_raw["loss"],
               "val_energy_mae": val_ema["energy_mae"],
               "val_force_mae": val_ema.get("force_mae")}
        history.append(row)
        running, running_n = 0.0, 0
        if log_fh:
            log_fh.write(f"{step} {lr_t:.17g} {row['train_loss']:.17g} "
                         f"{row['val_loss']:.17g} {row['val_loss_raw']:.17g}\n")
            log_fh.flush()
        if metrics_log is not None:
            metrics_log(row)
        if val_ema["loss"] < best[0]:
            best = (val_ema["loss"], _clone(shadow), step)
            bad_evals = 0
        else:
            bad_evals += 1

    probe_set = set(int(s) for s in probe_steps)
    step = 0
    lr_t = lr_schedule(0, cfg)
    try:
        while step < cfg.max_steps:
            if step in probe_set:
                probes[step] = evaluate_dataset(params, config, train_p, cfg.rho, use_forces)
            if cursor + cfg.batch_size > len(order):
                order, cursor = rng.permutation(len(train_p)), 0
            idx = order[cursor:cursor + min(cfg.batch_size, len(order))]
            cursor += len(idx)
            b, pos, tE, tF = train_p.batch(idx)

            leaves = {k: p.detach().requires_grad_(True) for k, p in params.items()}
            E, F = _predict(leaves, config, b, pos, use_forces, create_graph=True)
            if use_forces:
                loss = batch_md_loss(E, tE, F, tF, b.atom_mol, b.n_atoms, cfg.rho)
            else:
                loss = (E - tE).abs().sum(dim=-1).mean()
            loss_value = float(loss.detach())
            if not math.isfinite(loss_value):
                raise TrainingDivergedError(f"loss became {loss_value} at step {step}")
            grads = grad(loss, leaves)

            lr_t = lr_schedule(step + 1, cfg)
            params, state = amsgrad_step(params, grads, state, lr_t, cfg.beta1, cfg.beta2, cfg.eps)
            shadow = ema_update(shadow, params, cfg.ema_decay)
            step += 1
            running += loss_value
            running_n += 1

            if step % cfg.eval_every == 0:
                record(step, lr_t)
                if checkpoint_path:
                    save_checkpoint(checkpoint_path, _checkpoint(
                        config, best[1], shadow, state, cfg, step))
                if bad_evals >= cfg.patience:
                    stopped_early = True
                    break
        if not history or history[-1]["step"] != step:
            record(step, lr_t)
    finally:
        if log_fh:
            log_fh.close()

    probes[step] = evaluate_dataset(params, config, train_p, cfg.rho, use_forces)
    ckpt = _checkpoint(config, best[1], shadow, state, cfg, step)
    ckpt.meta.update({"best_step": best[2], "best_val_loss": best[0], "use_forces": use_forces})
    if checkpoint_path:
        save_checkpoint(checkpoint_path, ckpt)
    return TrainResult(ckpt, history, probes, final_params=params, stopped_early=stopped_early)


def _checkpoint(config, best_params, shadow, state, cfg, step):
    return Checkpoint(
        config=config,
        params=_clone(best_params),
        ema=_clone(shadow),
        optimizer={"m": _clone(state.m), "v": _clone(state.v), "vhat": _clone(state.vhat)},
        seed=cfg.seed,
        step=step,
        train_config=cfg.to_dict(),
    )
