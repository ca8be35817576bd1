"""Differentiable evaluation on top of torch autograd.

Model code draws its non-trivial primitives from :data:`ops`; every entry
there has a derivative rule (torch's, twice differentiable). Asking ``ops``
for anything else raises :class:`UnregisteredPrimitiveError`.
"""

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
import torch

from .basis import _envelope
from .exceptions import ContractError, UnregisteredPrimitiveError

DiffValue = torch.Tensor

COS_CLAMP = 1.0 - 1e-10

_PRIMITIVES: dict[str, Callable] = {}


def register_primitive(name):
    def deco(fn):
        _PRIMITIVES[name] = fn
        return fn

    return deco


class _Ops:
    def __getattr__(self, name):
        try:
            return _PRIMITIVES[name]
        except KeyError:
            raise UnregisteredPrimitiveError(f"no derivative rule registered for {name!r}") from None

    def __dir__(self):
        return sorted(_PRIMITIVES)


ops = _Ops()

register_primitive("add")(torch.add)
register_primitive("mul")(torch.mul)
register_primitive("matmul")(torch.matmul)
register_primitive("sin")(torch.sin)
register_primitive("cos")(torch.cos)
register_primitive("sqrt")(torch.sqrt)
register_primitive("exp")(torch.exp)
register_primitive("sigmoid")(torch.sigmoid)


@register_primitive("concat")
def concat(xs, axis=-1):
    return torch.cat(list(xs), dim=axis)


@register_primitive("sum")
def sum_(x, axis=None):
    return x.sum() if axis is None else x.sum(dim=axis)


@register_primitive("gather")
def gather(x, index):
    return x.index_select(0, index)


@register_primitive("scatter_sum")
def scatter_sum(x, index, size):
    out = x.new_zeros((size,) + tuple(x.shape[1:]))
    return out.index_add(0, index, x)


@register_primitive("swish")
def swish(x):
    return x * torch.sigmoid(x)


@register_primitive("bilinear")
def bilinear(s, g, W):
    """out[t, f] = sum_b sum_p s[t, b] W[b, p, f] g[t, p]."""
    outer = (s[:, :, None] * g[:, None, :]).reshape(s.shape[0], s.shape[1] * g.shape[1])
    return outer @ W.reshape(-1, W.shape[-1])


@register_primitive("envelope")
def envelope(t, p):
    return _envelope(t, p)


@register_primitive("norm")
def norm(v):
    return torch.sqrt((v * v).sum(dim=-1))


@register_primitive("arccos_clamped")
def arccos_clamped(cos):
    return torch.arccos(torch.clamp(cos, -COS_CLAMP, COS_CLAMP))


def primitive_names():
    return sorted(_PRIMITIVES)


@dataclass
class Trace:
    """Output of a traced evaluation plus the leaf inputs it depends on."""

    output: torch.Tensor
    inputs: dict


def _to_leaf(value):
    if isinstance(value, Mapping):
        return {k: _to_leaf(v) for k, v in value.items()}
    t = value if isinstance(value, torch.Tensor) else torch.tensor(np.asarray(value))
    if t.is_floating_point():
        return t.detach().to(torch.float64).requires_grad_(True)
    return t


def evaluate(program, inputs):
    """Run ``program(**inputs)`` without recording anything."""
    with torch.no_grad():
        return program(**{k: _as_tensor(v) for k, v in inputs.items()})


def _as_tensor(value):
    if isinstance(value, Mapping):
        return {k: _as_tensor(v) for k, v in value.items()}
    if isinstance(value, torch.Tensor):
        return value.detach()
    t = torch.tensor(np.asarray(value))
    return t.to(torch.float64) if t.is_floating_point() else t


def evaluate_with_trace(program, inputs):
    """Run ``program(**inputs)`` recording the trace needed for reverse mode.

    Floating inputs (and floating values of nested mappings) become leaves.
    Returns ``(output, trace)`` with ``output`` detached.
    """
    leaves = {k: _to_leaf(v) for k, v in inputs.items()}
    with torch.enable_grad():
        out = program(**leaves)
    if not isinstance(out, torch.Tensor):
        raise ContractError("program must return a tensor")
    return out.detach(), Trace(out, leaves)


def _flatten(target):
    if isinstance(target, Mapping):
        keys = list(target)
        return keys, [target[k] for k in keys]
    return None, [target]


def gradient(trace, wrt, create_graph=False):
    """Reverse-mode gradient of the scalar trace output w.r.t. input ``wrt``.

    ``wrt`` names one entry of the traced inputs; mappings (e.g. a parameter
    dict) yield a mapping of gradients. With ``create_graph`` the result is
    itself differentiable (used for force-matching losses).
    """
    out = trace.output
    if out.numel() != 1:
        raise ContractError(f"gradient needs a scalar output, got shape {tuple(out.shape)}")
    if wrt not in trace.inputs:
        raise ContractError(f"{wrt!r} is not an input of this trace")
    keys, targets = _flatten(trace.inputs[wrt])
    grads = torch.autograd.grad(
        out.reshape(()), targets, create_graph=create_graph, retain_graph=True, allow_unused=True)
    grads = [torch.zeros_like(t) if g is None else g for t, g in zip(targets, grads)]
    if not create_graph:
        grads = [g.detach() for g in grads]
    return dict(zip(keys, grads)) if keys is not None else grads[0]


def forces_from_trace(trace, wrt="positions", create_graph=False):
    return -gradient(trace, wrt, create_graph=create_graph)


def central_differences(f, X, h=1e-4):
    """Numerical gradient of scalar ``f`` (taking a float64 array) by central differences."""
    X = np.array(X, dtype=np.float64)
    g = np.zeros_like(X)
    flat = X.reshape(-1)
    gflat = g.reshape(-1)
    for idx in range(flat.size):
        orig = flat[idx]
        flat[idx] = orig + h
        fp = float(f(X))
        flat[idx] = orig - h
        fm = float(f(X))
        flat[idx] = orig
        gflat[idx] = (fp - fm) / (2.0 * h)
    return g


def relative_gradient_error(grad, fd, floor=1e-8):
    """max |grad - fd| relative to the largest gradient component (at least ``floor``)."""
    grad = np.asarray(grad, dtype=np.float64)
    fd = np.asarray(fd, dtype=np.float64)
    scale = max(float(np.abs(grad).max(initial=0.0)), floor)
    return float(np.abs(grad - fd).max(initial=0.0)) / scale


def finite_difference_check(f, X, h=1e-4, grad=None, floor=1e-8):
    """Compare the reverse-mode gradient of ``f`` with central differences.

    ``f`` maps a float64 tensor of positions to a scalar tensor. The
    difference quotients are taken from untraced evaluations only.
    """
    X = np.asarray(X, dtype=np.float64)
    if grad is None:
        _, trace = evaluate_with_trace(lambda positions: f(positions), {"positions": X})
        grad = gradient(trace, "positions").numpy()

    def plain(x):
        with torch.no_grad():
            return f(torch.from_numpy(x))

    fd = central_differences(plain, X, h)
    return relative_gradient_error(grad, fd, floor)


def grad(output, targets, create_graph=False):
    """Gradient of scalar ``output`` w.r.t. a tensor or a mapping of tensors.

    Unused targets get zero gradients. With ``create_graph`` the result stays
    differentiable, which the force-matching loss needs.
    """
    if output.numel() != 1:
        raise ContractError(f"grad needs a scalar output, got shape {tuple(output.shape)}")
    keys, flat = _flatten(targets)
    gs = torch.autograd.grad(output.reshape(()), flat, create_graph=create_graph,
                             retain_graph=create_graph, allow_unused=True)
    gs = [torch.zeros_like(t) if g is None else g for t, g in zip(flat, gs)]
    return dict(zip(keys, gs)) if keys is not None else gs[0]
