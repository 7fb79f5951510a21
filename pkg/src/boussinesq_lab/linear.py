"""Spectral theory of the linear operator ``L_eps = P A - eps D``.

Everything here is per wavenumber and vectorised: ``xi`` may be a single
triple of shape ``(3,)`` or a stack ``(..., 3)``; results carry the same
leading shape.

The eigenbasis is ``Q = [e_h, E0, E+, E-]`` where ``e_h = (xi_h/|xi_h|, 0, 0)``
completes the divergence-free eigenvectors to a basis of ``C^4``. With the
canonical ``e_1`` in that slot ``Q`` is singular whenever ``xi_1 = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .spectral import FourierGrid, SpectralField

__all__ = [
    "DEGENERACY_TOL",
    "smooth_step",
    "FrequencyCutoff",
    "symbol",
    "stratification_factor",
    "EigenSystem",
    "eigensystem",
    "project_0",
    "project_pm",
    "cutoff_apply",
    "propagate",
    "propagator_matrices",
    "DegenerateModeError",
]

DEGENERACY_TOL = 1e-8


class DegenerateModeError(ValueError):
    """Raised when an eigen-projector is applied where the basis collapses."""


def _bump(x):
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)


def smooth_step(s):
    """C-infinity profile: 1 for ``s <= 1``, 0 for ``s >= 2``."""
    s = np.asarray(s, dtype=float)
    a = _bump(2.0 - s)
    b = _bump(s - 1.0)
    with np.errstate(invalid="ignore"):
        mid = a / (a + b)
    return np.where(s <= 1.0, 1.0, np.where(s >= 2.0, 0.0, mid))


@dataclass(frozen=True)
class FrequencyCutoff:
    """``Psi(xi) = chi(|xi|/R) (1 - chi(2|xi_h|/r))`` with ``chi = smooth_step``.

    Equals 1 on ``{|xi_h| >= r, |xi| <= R}`` and vanishes outside
    ``{|xi_h| > r/2, |xi| < 2R}``. The factor 2 in the horizontal argument is
    what places the horizontal transition inside ``[r/2, r]``.
    """

    r: float
    R: float

    def __post_init__(self):
        if not (0 < self.r < self.R):
            raise ValueError(f"need 0 < r < R, got r={self.r}, R={self.R}")

    def __call__(self, xi_h_norm, xi_norm):
        return smooth_step(np.asarray(xi_norm) / self.R) * (1.0 - smooth_step(2.0 * np.asarray(xi_h_norm) / self.r))

    def on_grid(self, grid: FourierGrid) -> np.ndarray:
        return self(grid.xi_h_norm, grid.xi_norm)

    def in_shell(self, xi_h_norm, xi_norm, scale_in: float = 1.0, scale_out: float = 1.0):
        """Indicator of ``{|xi_h| > r*scale_in, |xi| < R*scale_out}``."""
        return (np.asarray(xi_h_norm) > self.r * scale_in) & (np.asarray(xi_norm) < self.R * scale_out)


def _split(xi):
    xi = np.asarray(xi, dtype=float)
    x1, x2, x3 = xi[..., 0], xi[..., 1], xi[..., 2]
    h2 = x1**2 + x2**2
    k2 = h2 + x3**2
    return x1, x2, x3, h2, k2


def symbol(xi, eps: float, nu: float, nu_p: float) -> np.ndarray:
    """Fourier symbol of ``L_eps`` as a ``(..., 4, 4)`` complex array."""
    x1, x2, x3, h2, k2 = _split(xi)
    if np.any(k2 == 0):
        raise ValueError("the symbol is undefined at xi = 0")
    out = np.zeros(np.shape(k2) + (4, 4), dtype=complex)
    for j in range(3):
        out[..., j, j] = eps * nu * k2
    out[..., 3, 3] = eps * nu_p * k2
    out[..., 0, 3] = -x3 * x1 / k2
    out[..., 1, 3] = -x3 * x2 / k2
    out[..., 2, 3] = h2 / k2
    out[..., 3, 2] = -1.0
    return out


def stratification_factor(xi_h_norm, xi_norm, eps: float, nu: float, nu_p: float):
    """``S_eps = sqrt(1 - eps^2 (nu - nu')^2 |xi|^6 / (4 |xi_h|^2))`` (complex)."""
    xi_h_norm = np.asarray(xi_h_norm, dtype=float)
    xi_norm = np.asarray(xi_norm, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        disc = 1.0 - eps**2 * (nu - nu_p) ** 2 * xi_norm**6 / (4.0 * xi_h_norm**2)
    return np.sqrt(disc.astype(complex))


def _freq(h2, k2, eps, nu, nu_p):
    """``(|xi_h|/|xi|) S_eps`` as one square root, finite also where ``xi_h = 0``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        disc = np.divide(h2, k2, out=np.zeros_like(np.asarray(h2, dtype=float)), where=np.asarray(k2) > 0)
    disc = disc - 0.25 * eps**2 * (nu - nu_p) ** 2 * np.asarray(k2, dtype=float) ** 2
    return np.sqrt(disc.astype(complex))


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Eigen-data of the symbol at one or many wavenumbers.

    ``S_plus``/``S_minus`` are the complex stretch factors entering ``E+``/``E-``.
    ``Q`` and ``Qinv`` are NaN where ``degenerate`` is set.
    """

    lam0: np.ndarray
    lam_plus: np.ndarray
    lam_minus: np.ndarray
    S: np.ndarray
    S_plus: np.ndarray
    S_minus: np.ndarray
    E0: np.ndarray
    E_plus: np.ndarray
    E_minus: np.ndarray
    Q: np.ndarray
    Qinv: np.ndarray
    degenerate: np.ndarray

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.stack([self.lam0, self.lam0, self.lam_plus, self.lam_minus], axis=-1)


def eigensystem(xi, eps: float, nu: float, nu_p: float, tol: float = DEGENERACY_TOL) -> EigenSystem:
    x1, x2, x3, h2, k2 = _split(xi)
    if np.any(k2 == 0):
        raise ValueError("the eigensystem is undefined at xi = 0")
    kn = np.sqrt(k2)
    hn = np.sqrt(h2)
    a = hn / kn
    S = stratification_factor(hn, kn, eps, nu, nu_p)
    lam0 = (eps * nu * k2).astype(complex)
    aS = _freq(h2, k2, eps, nu, nu_p)
    lam_plus = 0.5 * eps * (nu + nu_p) * k2 + 1j * aS
    lam_minus = 0.5 * eps * (nu + nu_p) * k2 - 1j * aS

    flat = hn < tol * kn
    degenerate = flat | (np.abs(S) < tol)
    safe = ~degenerate
    hs = np.where(flat, 1.0, hn)
    as_ = np.where(safe, a, 1.0)
    Ss = np.where(safe, S, 1.0)
    c = 0.5 * eps * (nu - nu_p) * k2 * kn / hs
    S_plus = np.where(safe, Ss - 1j * c, np.nan)
    S_minus = np.where(safe, Ss + 1j * c, np.nan)

    shape = np.shape(k2)
    E0 = np.zeros(shape + (4,), dtype=complex)
    E0[..., 0] = -x2 / hs
    E0[..., 1] = x1 / hs
    E0 = np.where(flat[..., None], np.nan, E0)
    eh = np.zeros(shape + (4,), dtype=complex)
    eh[..., 0] = x1 / hs
    eh[..., 1] = x2 / hs

    def wave_vector(sign, Ssig):
        E = np.empty(shape + (4,), dtype=complex)
        E[..., 0] = sign * 1j * x3 * x1 / (kn * hs) * Ssig
        E[..., 1] = sign * 1j * x3 * x2 / (kn * hs) * Ssig
        E[..., 2] = -sign * 1j * as_ * Ssig
        E[..., 3] = 1.0
        return E

    E_plus = wave_vector(1, S_plus)
    E_minus = wave_vector(-1, S_minus)

    Q = np.stack([eh, E0, E_plus, E_minus], axis=-1)
    Qinv = np.zeros(shape + (4, 4), dtype=complex)
    row_plus = np.zeros(shape + (4,), dtype=complex)
    row_plus[..., 2] = 1j / (2 * as_ * Ss)
    row_plus[..., 3] = S_minus / (2 * Ss)
    row_minus = np.zeros(shape + (4,), dtype=complex)
    row_minus[..., 2] = -1j / (2 * as_ * Ss)
    row_minus[..., 3] = S_plus / (2 * Ss)
    eh_plus = 1j * x3 * S_plus / kn
    eh_minus = -1j * x3 * S_minus / kn
    Qinv[..., 0, :] = eh - eh_plus[..., None] * row_plus - eh_minus[..., None] * row_minus
    Qinv[..., 1, :] = np.conj(E0)
    Qinv[..., 2, :] = row_plus
    Qinv[..., 3, :] = row_minus
    Q = np.where(safe[..., None, None], Q, np.nan)
    Qinv = np.where(safe[..., None, None], Qinv, np.nan)
    return EigenSystem(lam0, lam_plus, lam_minus, S, S_plus, S_minus, E0, E_plus, E_minus, Q, Qinv, degenerate)


# --- grid-level projectors --------------------------------------------------


@lru_cache(maxsize=16)
def _grid_eigensystem(grid: FourierGrid, eps: float, nu: float, nu_p: float):
    xi = np.moveaxis(grid.xi_full, 0, -1).copy()
    zero = grid.xi_sq == 0
    xi[zero] = (1.0, 0.0, 0.0)  # placeholder; masked out below
    es = eigensystem(xi, eps, nu, nu_p)
    return es, zero


def project_0(V: SpectralField) -> SpectralField:
    """Projection onto the non-oscillating eigendirection ``E0``.

    ``P0 V = (xi_h^perp / |xi_h|^2) (-xi2 V1 + xi1 V2)``; zero where ``xi_h = 0``.
    """
    grid = V.grid
    x1, x2, _ = grid.xi
    h2 = grid.xi_h_sq
    inv = np.divide(1.0, h2, out=np.zeros_like(h2), where=h2 > 0)
    k0 = (-x2 * V.coeffs[0] + x1 * V.coeffs[1]) * inv
    out = np.zeros_like(V.coeffs)
    out[0] = -x2 * k0
    out[1] = x1 * k0
    return V.with_coeffs(out)


def project_pm(V: SpectralField, eps: float, sign: int, nu: float = 1.0, nu_p: float = 1.0) -> SpectralField:
    """Projection ``k_pm(V) E_pm`` onto the oscillating eigendirection ``sign``.

    Intended for divergence-free fields supported away from degenerate modes
    (``xi_h = 0`` or ``S_eps = 0``); raises :class:`DegenerateModeError` if ``V``
    carries energy there. The ``xi = 0`` mode maps to zero.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    es, zero = _grid_eigensystem(V.grid, float(eps), float(nu), float(nu_p))
    bad = es.degenerate & ~zero
    if np.any(bad):
        amp = np.max(np.abs(V.coeffs[:, bad])) if np.any(bad) else 0.0
        if amp > 1e-14 * max(np.max(np.abs(V.coeffs)), 1e-300):
            raise DegenerateModeError("field has content on modes where the eigenbasis degenerates")
    row = es.Qinv[..., 2 if sign == 1 else 3, :]
    E = es.E_plus if sign == 1 else es.E_minus
    ok = ~(es.degenerate | zero)
    Vm = np.moveaxis(V.coeffs, 0, -1)
    k = np.where(ok, np.einsum("...j,...j->...", np.where(ok[..., None], row, 0), Vm), 0)
    out = np.where(ok[..., None], k[..., None] * np.where(ok[..., None], E, 0), 0)
    return V.with_coeffs(np.moveaxis(out, -1, 0))


def cutoff_apply(V: SpectralField, cut: FrequencyCutoff) -> SpectralField:
    return V.with_coeffs(V.coeffs * cut.on_grid(V.grid))


# --- exact propagator -------------------------------------------------------


@lru_cache(maxsize=16)
def propagator_matrices(grid: FourierGrid, t: float, eps: float, nu: float, nu_p: float) -> np.ndarray:
    """Per-mode ``exp(-(t/eps) L_eps_hat)`` as a ``(n1, n2, n3, 4, 4)`` array.

    Regular modes use ``Q diag(exp(-t lam/eps)) Qinv``; degenerate ones a
    scaling-and-squaring matrix exponential. ``xi = 0`` gets the identity.
    """
    if eps <= 0:
        raise ValueError("propagation needs eps > 0")
    if t < 0:
        raise ValueError("propagation needs t >= 0")
    es, zero = _grid_eigensystem(grid, float(eps), float(nu), float(nu_p))
    k2 = grid.xi_sq
    aS = _freq(grid.xi_h_sq, k2, eps, nu, nu_p)
    # rates lam/eps, formed without dividing the diffusive part by eps
    mu0 = nu * k2
    mu_plus = 0.5 * (nu + nu_p) * k2 + 1j * aS / eps
    mu_minus = 0.5 * (nu + nu_p) * k2 - 1j * aS / eps
    ok = ~(es.degenerate | zero)
    decay = np.stack([np.exp(-t * mu0), np.exp(-t * mu0), np.exp(-t * mu_plus), np.exp(-t * mu_minus)], axis=-1)
    decay = np.where(ok[..., None], decay, 0)
    Q = np.where(ok[..., None, None], es.Q, 0)
    Qinv = np.where(ok[..., None, None], es.Qinv, 0)
    G = np.einsum("...ij,...j,...jk->...ik", Q, decay, Qinv)
    G[zero] = np.eye(4)
    fallback = es.degenerate & ~zero
    if np.any(fallback):
        xi = np.moveaxis(grid.xi_full, 0, -1)[fallback]
        G[fallback] = scipy.linalg.expm(-(t / eps) * symbol(xi, eps, nu, nu_p))
    G.setflags(write=False)
    return G


def apply_modewise(G: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Apply per-mode 4x4 matrices ``G`` to ``(4, n1, n2, n3)`` coefficients."""
    return np.einsum("...ij,j...->i...", G, coeffs)


def propagate(V: SpectralField, t: float, eps: float, nu: float, nu_p: float) -> SpectralField:
    """Exact solution at time ``t`` of ``dV/dt = -(1/eps) L_eps V``."""
    if t == 0:
        return V.copy()
    G = propagator_matrices(V.grid, float(t), float(eps), float(nu), float(nu_p))
    return V.with_coeffs(apply_modewise(G, V.coeffs))
