"""Discrete Littlewood-Paley analysis on the periodic grid.

The low-pass profile ``chi`` equals 1 on ``B(0, 3/4)`` and vanishes outside
``B(0, 4/3)``; ``phi(xi) = chi(xi/2) - chi(xi)`` is supported in the annulus
``3/4 <= |xi| <= 8/3``. The sum ``chi + sum_q phi(2^-q .)`` telescopes, so the
partition of unity is exact up to rounding on every grid mode.

Blocks act on raw coefficient arrays whose last three axes are the grid;
:class:`~boussinesq_lab.spectral.SpectralField` inputs are accepted too.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .linear import smooth_step
from .spectral import FourierGrid, SpectralField, dealiased_product, ifftn

__all__ = [
    "lp_chi",
    "lp_phi",
    "q_max",
    "block_multiplier",
    "block",
    "lowpass",
    "DyadicBlockSet",
    "decompose",
    "lp_sobolev_norm",
    "bony_split",
    "paraproduct_piece",
    "anisotropic_norm",
    "bernstein_ratio",
]

_INNER, _OUTER = 0.75, 4.0 / 3.0


def lp_chi(s):
    """Radial low-pass profile: 1 for ``s <= 3/4``, 0 for ``s >= 4/3``."""
    s = np.asarray(s, dtype=float)
    return smooth_step(1.0 + (s - _INNER) / (_OUTER - _INNER))


def lp_phi(s):
    s = np.asarray(s, dtype=float)
    return lp_chi(s / 2.0) - lp_chi(s)


def q_max(grid: FourierGrid) -> int:
    """Largest block index whose annulus meets a grid wavenumber."""
    kmax = float(np.max(grid.xi_norm))
    return max(0, math.ceil(math.log2(kmax / _INNER)))


def block_multiplier(grid: FourierGrid, q: int) -> np.ndarray:
    k = grid.xi_norm
    if q <= -2:
        return np.zeros_like(k)
    if q == -1:
        return lp_chi(k)
    return lp_phi(k / 2.0**q)


def lowpass_multiplier(grid: FourierGrid, q: int) -> np.ndarray:
    """Symbol of ``S_q = sum_{q' <= q-1} Delta_q'``, i.e. ``chi(2^-q |xi|)``."""
    if q <= -1:
        return np.zeros_like(grid.xi_norm)
    return lp_chi(grid.xi_norm / 2.0**q)


def _unpack(u, grid):
    if isinstance(u, SpectralField):
        return u.grid, u.coeffs
    if grid is None:
        raise ValueError("a grid is required for raw coefficient arrays")
    return grid, np.asarray(u)


def block(u, q: int, grid: FourierGrid | None = None) -> np.ndarray:
    """Coefficients of ``Delta_q u``."""
    grid, c = _unpack(u, grid)
    return c * block_multiplier(grid, q)


def lowpass(u, q: int, grid: FourierGrid | None = None) -> np.ndarray:
    """Coefficients of ``S_q u``."""
    grid, c = _unpack(u, grid)
    return c * lowpass_multiplier(grid, q)


@dataclass(frozen=True, eq=False)
class DyadicBlockSet:
    grid: FourierGrid
    source: np.ndarray
    blocks: dict[int, np.ndarray] = field(default_factory=dict)

    def reconstruct(self) -> np.ndarray:
        return sum(self.blocks[q] for q in sorted(self.blocks))

    def l2_norms(self) -> dict[int, float]:
        V = self.grid.volume
        return {q: float(np.sqrt(V * np.sum(np.abs(b) ** 2))) for q, b in sorted(self.blocks.items())}


def decompose(u, grid: FourierGrid | None = None) -> DyadicBlockSet:
    grid, c = _unpack(u, grid)
    blocks = {q: block(c, q, grid) for q in range(-1, q_max(grid) + 1)}
    return DyadicBlockSet(grid, c, blocks)


def lp_sobolev_norm(u, s: float, grid: FourierGrid | None = None) -> float:
    """``(sum_q 2^(2qs) ||Delta_q u||^2)^(1/2)`` over ``q >= -1``."""
    bs = decompose(u, grid)
    return float(np.sqrt(sum(2.0 ** (2 * q * s) * n**2 for q, n in bs.l2_norms().items())))


# --- paraproducts -----------------------------------------------------------


def paraproduct_piece(u_hat, v_hat, grid: FourierGrid, q: int, qp: int, low_shift: int = -1) -> np.ndarray:
    """Coefficients of ``Delta_q(S_{q'+low_shift} u  Delta_{q'} v)``."""
    low = lowpass(u_hat, qp + low_shift, grid)
    high = block(v_hat, qp, grid)
    return block(dealiased_product(grid, low, high), q, grid)


def bony_split(u_hat, v_hat, grid: FourierGrid):
    """Return ``(T_u v, T_v u, R(u, v))`` as spectral coefficients.

    ``T_u v = sum_q S_{q-1} u Delta_q v`` and ``R = sum_{|q-q'|<=1} Delta_q u Delta_q' v``;
    the three parts add up to the dealiased product ``u v``.
    """
    qs = range(-1, q_max(grid) + 1)
    du = {q: block(u_hat, q, grid) for q in qs}
    dv = {q: block(v_hat, q, grid) for q in qs}
    t_uv = np.zeros_like(np.asarray(u_hat, dtype=complex))
    t_vu = np.zeros_like(t_uv)
    rem = np.zeros_like(t_uv)
    for q in qs:
        t_uv += dealiased_product(grid, lowpass(u_hat, q - 1, grid), dv[q])
        t_vu += dealiased_product(grid, lowpass(v_hat, q - 1, grid), du[q])
    for q, qp in itertools.product(qs, qs):
        if abs(q - qp) <= 1:
            rem += dealiased_product(grid, du[q], dv[qp])
    return t_uv, t_vu, rem


# --- anisotropic norms and Bernstein ----------------------------------------

_AXES = {"h": (0, 1), "v": (2,), "x1": (0,), "x2": (1,), "x3": (2,)}


def _lp(values, weights, axes, p):
    if np.isinf(p):
        return np.max(values, axis=axes)
    return np.sum(values**p, axis=axes) ** (1.0 / p) * weights ** (1.0 / p)


def anisotropic_norm(u, grid: FourierGrid, outer=("h", 2.0), inner=("v", 2.0)) -> float:
    """Mixed Lebesgue norm ``|| || u ||_{L^q(inner axes)} ||_{L^p(outer axes)}``.

    ``u`` holds real collocation values with shape ``grid.shape``. Integrals use
    the periodic trapezoidal rule; infinite exponents use collocation maxima.
    """
    u = np.abs(np.asarray(u, dtype=float))
    (oname, p), (iname, q) = outer, inner
    iax, oax = _AXES[iname], _AXES[oname]
    if set(iax) & set(oax) or len(iax) + len(oax) != 3:
        raise ValueError("inner and outer axis sets must partition (x1, x2, x3)")
    dx = grid.spacing
    w_in = float(np.prod([dx[a] for a in iax]))
    w_out = float(np.prod([dx[a] for a in oax]))
    inner_vals = _lp(u, w_in, iax, float(q))
    # remaining axes keep their relative order after the reduction
    remaining = tuple(range(inner_vals.ndim))
    return float(_lp(inner_vals, w_out, remaining, float(p)))


def lebesgue_norm(u, grid: FourierGrid, p: float) -> float:
    u = np.abs(np.asarray(u, dtype=float))
    if np.isinf(p):
        return float(np.max(u))
    dV = float(np.prod(grid.spacing))
    return float((np.sum(u**p) * dV) ** (1.0 / p))


def support_radius(u_hat, grid: FourierGrid, which: str = "outer", rel: float = 1e-12) -> float:
    """Largest (or smallest) ``|xi|`` carrying non-negligible spectral mass."""
    mag = np.abs(np.asarray(u_hat))
    mask = mag > rel * np.max(mag)
    k = grid.xi_norm[mask]
    return float(np.max(k) if which == "outer" else np.min(k))


def bernstein_ratio(u_hat, grid: FourierGrid, k: int, a: float, b: float, which: str = "outer") -> float:
    """Ratio ``sup_{|alpha|=k} ||d^alpha u||_{L^b} / (lam^(k + 3(1/a - 1/b)) ||u||_{L^a})``.

    ``lam`` is the measured outer support radius of ``u_hat`` (``which="outer"``,
    ball case) or the inner radius (``which="inner"``, annulus case).
    """
    u_hat = np.asarray(u_hat)
    lam = support_radius(u_hat, grid, which)
    xi = grid.xi
    best = 0.0
    for alpha in itertools.product(range(3), repeat=k):
        d = u_hat.copy()
        for axis in alpha:
            d = d * (1j * xi[axis])
        best = max(best, lebesgue_norm(ifftn(d).real, grid, b))
    base = lebesgue_norm(ifftn(u_hat).real, grid, a)
    inv_a = 0.0 if np.isinf(a) else 1.0 / a
    inv_b = 0.0 if np.isinf(b) else 1.0 / b
    return best / (lam ** (k + 3 * (inv_a - inv_b)) * base)
