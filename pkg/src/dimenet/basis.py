"""Spherical Bessel functions, their roots, and the distance/angle bases.

Array helpers accept numpy arrays or torch tensors and return the same kind,
so the model differentiates through exactly the code tested here.
"""

from dataclasses import dataclass
import math

import numpy as np
import torch

from .exceptions import ContractError, DomainError


@dataclass(frozen=True)
class BasisConfig:
    c: float = 5.0
    n_rbf: int = 6
    n_srbf: int = 6
    n_shbf: int = 7
    p: int = 6

    def __post_init__(self):
        if not self.c > 0:
            raise ContractError(f"cutoff must be positive, got {self.c}")
        for name in ("n_rbf", "n_srbf", "n_shbf", "p"):
            if int(getattr(self, name)) < 1:
                raise ContractError(f"{name} must be >= 1")

    @property
    def n_sbf(self):
        return self.n_shbf * self.n_srbf


def _xp(x):
    return torch if isinstance(x, torch.Tensor) else np


def _series_terms(l):
    return 24 + 2 * l


def _jl_series(l, x):
    """Power series of j_l around 0; accurate for x < max(0.5, l)."""
    dfact = 1.0
    for k in range(1, 2 * l + 2, 2):
        dfact *= k
    term = x**l / dfact
    total = term
    y = -0.5 * x * x
    for k in range(1, _series_terms(l)):
        term = term * y / (k * (2 * l + 2 * k + 1))
        total = total + term
    return total


def _jl_upward(l, x):
    xp = _xp(x)
    s, c = xp.sin(x), xp.cos(x)
    j_prev = s / x
    if l == 0:
        return j_prev
    j_cur = s / (x * x) - c / x
    for k in range(1, l):
        j_prev, j_cur = j_cur, (2 * k + 1) / x * j_cur - j_prev
    return j_cur


def _jl(l, x):
    """j_l for positive array input, no domain check."""
    xp = _xp(x)
    threshold = max(0.5, float(l))
    small = x < threshold
    # both branches are evaluated; feed each a safe argument so neither
    # produces inf/nan that would poison gradients through ``where``
    x_small = xp.where(small, x, xp.zeros_like(x))
    x_large = xp.where(small, xp.full_like(x, threshold), x)
    return xp.where(small, _jl_series(l, x_small), _jl_upward(l, x_large))


def spherical_bessel_j(l, x):
    """Spherical Bessel function of the first kind, order ``l`` >= 0, for ``x`` > 0."""
    if l < 0:
        raise DomainError(f"order must be >= 0, got {l}")
    scalar = np.isscalar(x)
    x = x if isinstance(x, torch.Tensor) else np.asarray(x, dtype=np.float64)
    if bool((x <= 0).any()):
        raise DomainError("spherical_bessel_j requires x > 0")
    out = _jl(int(l), x)
    return float(out) if scalar else out


@dataclass(frozen=True)
class RootTable:
    """``z[l, n-1]`` is the n-th positive root of j_l."""

    z: np.ndarray

    @property
    def l_max(self):
        return self.z.shape[0] - 1

    @property
    def n_max(self):
        return self.z.shape[1]


def _bisect(f, lo, hi, max_iter=200):
    f_lo = f(lo)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = f(mid)
        if f_mid == 0.0:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return lo if abs(f(lo)) <= abs(f(hi)) else hi


def find_bessel_roots(l_max, n_max):
    """First ``n_max`` positive roots of j_0 ... j_{l_max}.

    Roots of j_{l} interlace those of j_{l-1}, so each bracket is a pair of
    consecutive lower-order roots.
    """
    if l_max < 0 or n_max < 1:
        raise ContractError("need l_max >= 0 and n_max >= 1")
    needed = n_max + l_max
    prev = math.pi * np.arange(1, needed + 1, dtype=np.float64)
    rows = [prev[:n_max].copy()]
    for l in range(1, l_max + 1):
        f = lambda x, l=l: float(_jl(l, np.float64(x)))
        cur = np.array([_bisect(f, prev[n], prev[n + 1]) for n in range(len(prev) - 1)])
        rows.append(cur[:n_max].copy())
        prev = cur
    z = np.stack(rows)
    z.setflags(write=False)
    return RootTable(z)


def legendre_all(l_max, x):
    """P_0(x) ... P_{l_max}(x) by the three-term recurrence, stacked on a new last axis."""
    xp = _xp(x)
    out = [xp.ones_like(x)]
    if l_max >= 1:
        out.append(x)
    for l in range(1, l_max):
        out.append(((2 * l + 1) * x * out[l] - l * out[l - 1]) / (l + 1))
    return xp.stack(out, -1)


def sph_harm_m0_from_cos(l_max, cos_alpha):
    """Y_l^0 for l = 0..l_max as a function of cos(alpha)."""
    xp = _xp(cos_alpha)
    norm = np.sqrt((2 * np.arange(l_max + 1) + 1) / (4 * np.pi))
    if xp is torch:
        norm = torch.as_tensor(norm, dtype=cos_alpha.dtype)
    return legendre_all(l_max, cos_alpha) * norm


def sph_harm_m0(l, alpha):
    """Real spherical harmonic Y_l^0 at polar angle ``alpha``."""
    if l < 0:
        raise DomainError(f"degree must be >= 0, got {l}")
    scalar = np.isscalar(alpha)
    alpha = alpha if isinstance(alpha, torch.Tensor) else np.asarray(alpha, dtype=np.float64)
    out = sph_harm_m0_from_cos(int(l), _xp(alpha).cos(alpha))[..., int(l)]
    return float(out) if scalar else out


def _envelope(t, p):
    a = -(p + 1) * (p + 2) / 2.0
    b = p * (p + 2.0)
    c = -p * (p + 1) / 2.0
    tp = t**p
    return 1.0 + tp * (a + t * (b + c * t))


def envelope(t, p=6):
    """Polynomial cutoff u(t) on t = d/c with a triple root at t = 1."""
    scalar = np.isscalar(t)
    t = t if isinstance(t, torch.Tensor) else np.asarray(t, dtype=np.float64)
    if bool(((t < 0) | (t > 1)).any()):
        raise DomainError("envelope argument must lie in [0, 1]")
    out = _envelope(t, p)
    return float(out) if scalar else out


def _check_distance(d, c):
    d = d if isinstance(d, torch.Tensor) else np.asarray(d, dtype=np.float64)
    if bool((d <= 0).any()):
        raise DomainError("distance must be positive")
    if bool((d > c).any()):
        raise DomainError(f"distance exceeds cutoff {c}")
    return d


def default_wave_numbers(cfg):
    return np.pi * np.arange(1, cfg.n_rbf + 1) / cfg.c


def _radial(d, k, c, p, enveloped=True):
    d = d[..., None]
    out = math.sqrt(2.0 / c) * _xp(d).sin(k * d) / d
    if enveloped:
        out = out * _envelope(d / c, p)
    return out


def radial_basis(d, cfg, k=None, enveloped=True):
    """Enveloped radial Bessel basis, shape ``d.shape + (n_rbf,)``.

    ``k`` are the (possibly trained) wave numbers; defaults to n*pi/c.
    """
    d = _check_distance(d, cfg.c)
    if k is None:
        k = default_wave_numbers(cfg)
        if isinstance(d, torch.Tensor):
            k = torch.as_tensor(k, dtype=d.dtype)
    return _radial(d, k, cfg.c, cfg.p, enveloped)


def sbf_normalizers(cfg, roots):
    """sqrt(2 / (c^3 j_{l+1}(z_ln)^2)) for the roots used by ``cfg``."""
    z = roots.z[: cfg.n_shbf, : cfg.n_srbf]
    out = np.empty_like(z)
    for l in range(cfg.n_shbf):
        out[l] = np.sqrt(2.0 / (cfg.c**3 * _jl(l + 1, z[l]) ** 2))
    return out


def _spherical_2d(d, cos_alpha, cfg, roots, norms=None, enveloped=True):
    xp = _xp(d)
    z = roots.z[: cfg.n_shbf, : cfg.n_srbf]
    if norms is None:
        norms = sbf_normalizers(cfg, roots)
    ylm = sph_harm_m0_from_cos(cfg.n_shbf - 1, cos_alpha)
    scaled = d[..., None] / cfg.c
    cols = []
    for l in range(cfg.n_shbf):
        zl = z[l]
        nl = norms[l]
        if xp is torch:
            zl = torch.tensor(zl, dtype=d.dtype)
            nl = torch.tensor(nl, dtype=d.dtype)
        cols.append(nl * _jl(l, zl * scaled) * ylm[..., l : l + 1])
    out = xp.concatenate(cols, -1) if xp is np else torch.cat(cols, dim=-1)
    if enveloped:
        out = out * _envelope(scaled, cfg.p)
    return out


def spherical_basis_2d(d, alpha, cfg, roots, enveloped=True):
    """2D spherical Fourier-Bessel basis, flattened as ``l * n_srbf + (n - 1)``."""
    d = _check_distance(d, cfg.c)
    if roots.l_max + 1 < cfg.n_shbf or roots.n_max < cfg.n_srbf:
        raise ContractError("root table too small for basis config")
    alpha = alpha if isinstance(alpha, torch.Tensor) else np.asarray(alpha, dtype=np.float64)
    return _spherical_2d(d, _xp(alpha).cos(alpha), cfg, roots, enveloped=enveloped)


def gaussian_centers(c, n):
    return c * np.arange(n) / n


def default_gaussian_gamma(c, n):
    # neighbouring Gaussians cross at half their peak height
    spacing = c / n
    return 4.0 * math.log(2.0) / spacing**2


def _gaussian(d, c, n, gamma, p):
    mu = gaussian_centers(c, n)
    if isinstance(d, torch.Tensor):
        mu = torch.as_tensor(mu, dtype=d.dtype)
    d = d[..., None]
    return _xp(d).exp(-gamma * (d - mu) ** 2) * _envelope(d / c, p)


def gaussian_radial_basis(d, c, n, gamma=None, p=6):
    """Enveloped Gaussian RBFs with centres spaced uniformly from 0 towards ``c``."""
    d = _check_distance(d, c)
    if gamma is None:
        gamma = default_gaussian_gamma(c, n)
    return _gaussian(d, c, n, gamma, p)
