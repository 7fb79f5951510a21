"""Fourier grid, spectral/physical fields and the per-mode operators shared by
every other module.

Conventions
-----------
* Forward transform carries ``1/(n1 n2 n3)``: ``u_hat = fftn(u) / N``, so a
  constant field ``c`` has ``u_hat[0, 0, 0] == c``.
* Parseval weight is the box volume ``V = (2 pi)^3 prod(L_j / 2 pi)``:
  ``||u||_{L^2}^2 = V * sum |u_hat|^2``.
* Wavenumbers are ``xi_j = 2 pi k_j / L_j`` with ``k_j`` in FFT storage order.
  The Nyquist entry ``k_j = -n_j/2`` is stored with ``xi_j = 0`` so that every
  symbol (odd or even) preserves conjugate symmetry.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

__all__ = [
    "FourierGrid",
    "SpectralField",
    "SpectralField4",
    "PhysicalField",
    "PhysicalField4",
    "set_threads",
    "get_threads",
    "fftn",
    "ifftn",
    "to_spectral",
    "to_physical",
    "leray_project",
    "divergence",
    "gradient",
    "gradient_h",
    "curl_h",
    "laplacian_apply",
    "dealias_23",
    "dealiased_product",
    "sobolev_norm",
    "l2_norm",
    "inner_product",
    "linf_norm",
    "conjugate_symmetry_defect",
    "zeros",
]

THREADS_ENV = "BOUSSINESQ_LAB_THREADS"
_threads = int(os.environ.get(THREADS_ENV, "1"))


def set_threads(n: int) -> None:
    """Set the number of FFT workers (reductions stay serial and ordered)."""
    global _threads
    if n < 1:
        raise ValueError("thread count must be >= 1")
    _threads = int(n)


def get_threads() -> int:
    return _threads


def fftn(a: np.ndarray) -> np.ndarray:
    """Normalised forward transform over the last three axes."""
    return sfft.fftn(a, axes=(-3, -2, -1), norm="forward", workers=_threads)


def ifftn(a: np.ndarray) -> np.ndarray:
    return sfft.ifftn(a, axes=(-3, -2, -1), norm="forward", workers=_threads)


@dataclass(frozen=True)
class FourierGrid:
    """Periodic box ``prod [0, L_j)`` sampled on ``n_j`` points per axis."""

    dims: tuple[int, int, int]
    box: tuple[float, float, float] = (2 * np.pi, 2 * np.pi, 2 * np.pi)

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        box = tuple(float(L) for L in self.box)
        if len(dims) != 3 or len(box) != 3:
            raise ValueError("dims and box must have three entries")
        for n in dims:
            if n < 8 or n % 2:
                raise ValueError(f"grid dimensions must be even and >= 8, got {dims}")
        for L in box:
            if not L > 0:
                raise ValueError(f"box lengths must be positive, got {box}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "box", box)

    @classmethod
    def cube(cls, n: int, L: float = 2 * np.pi) -> "FourierGrid":
        return cls((n, n, n), (L, L, L))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.dims

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    @property
    def volume(self) -> float:
        return float(np.prod(self.box))

    @property
    def spacing(self) -> tuple[float, float, float]:
        return tuple(L / n for L, n in zip(self.box, self.dims))

    @cached_property
    def indices(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Integer wavenumbers ``k_j`` per axis, FFT storage order."""
        return tuple(np.fft.fftfreq(n, 1.0 / n).astype(int) for n in self.dims)

    @cached_property
    def axis_wavenumbers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        out = []
        for k, n, L in zip(self.indices, self.dims, self.box):
            xi = 2 * np.pi * k / L
            xi[n // 2] = 0.0
            out.append(xi)
        return tuple(out)

    @cached_property
    def xi(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable wavenumber arrays ``(xi1, xi2, xi3)``."""
        x1, x2, x3 = self.axis_wavenumbers
        return (x1[:, None, None], x2[None, :, None], x3[None, None, :])

    @cached_property
    def xi_full(self) -> np.ndarray:
        """``(3, n1, n2, n3)`` array of wavenumber triples."""
        return np.stack(np.broadcast_arrays(*self.xi))

    @cached_property
    def xi_h_sq(self) -> np.ndarray:
        x1, x2, _ = self.xi
        return x1**2 + x2**2 + 0.0 * self.xi[2]

    @cached_property
    def xi_sq(self) -> np.ndarray:
        return self.xi_h_sq + self.xi[2] ** 2

    @cached_property
    def xi_norm(self) -> np.ndarray:
        return np.sqrt(self.xi_sq)

    @cached_property
    def xi_h_norm(self) -> np.ndarray:
        return np.sqrt(self.xi_h_sq)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """Modes kept by the 2/3 rule: ``3 |k_j| < n_j`` on every axis."""
        k1, k2, k3 = self.indices
        n1, n2, n3 = self.dims
        return (
            (3 * np.abs(k1)[:, None, None] < n1)
            & (3 * np.abs(k2)[None, :, None] < n2)
            & (3 * np.abs(k3)[None, None, :] < n3)
        )

    @cached_property
    def coordinates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable collocation coordinates ``x_j = j L / n``."""
        out = []
        for axis, (n, L) in enumerate(zip(self.dims, self.box)):
            shape = [1, 1, 1]
            shape[axis] = n
            out.append((np.arange(n) * (L / n)).reshape(shape))
        return tuple(out)

    def mode_index(self, k: tuple[int, int, int]) -> tuple[int, int, int]:
        """Array index of the integer wavenumber triple ``k``."""
        return tuple(int(kj) % n for kj, n in zip(k, self.dims))


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier coefficients of an ``ncomp``-component field.

    ``coeffs`` has shape ``(ncomp, n1, n2, n3)``. The state of the Boussinesq
    system is the 4-component case ``(u1, u2, u3, rho)``.
    """

    grid: FourierGrid
    coeffs: np.ndarray
    real: bool = True

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim == 3:
            c = c[None]
        if c.shape[1:] != self.grid.shape:
            raise ValueError(f"coefficient shape {c.shape[1:]} does not match grid {self.grid.shape}")
        object.__setattr__(self, "coeffs", c)

    @property
    def ncomp(self) -> int:
        return self.coeffs.shape[0]

    def __getitem__(self, i):
        return self.coeffs[i]

    def with_coeffs(self, coeffs: np.ndarray) -> "SpectralField":
        return SpectralField(self.grid, coeffs, self.real)

    def copy(self) -> "SpectralField":
        return self.with_coeffs(self.coeffs.copy())

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs + other.coeffs, self.real and other.real)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs - other.coeffs, self.real and other.real)

    def __mul__(self, a: float) -> "SpectralField":
        real = self.real and np.isrealobj(a)
        return SpectralField(self.grid, self.coeffs * a, real)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return self * -1.0


SpectralField4 = SpectralField


@dataclass(frozen=True, eq=False)
class PhysicalField:
    """Real collocation values, shape ``(ncomp, n1, n2, n3)``."""

    grid: FourierGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 3:
            v = v[None]
        if v.shape[1:] != self.grid.shape:
            raise ValueError(f"value shape {v.shape[1:]} does not match grid {self.grid.shape}")
        object.__setattr__(self, "values", v)

    @property
    def ncomp(self) -> int:
        return self.values.shape[0]


PhysicalField4 = PhysicalField


def _check_same_grid(a, b) -> None:
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")
    if a.coeffs.shape != b.coeffs.shape:
        raise ValueError("component count mismatch")


def zeros(grid: FourierGrid, ncomp: int = 4) -> SpectralField:
    return SpectralField(grid, np.zeros((ncomp,) + grid.shape, dtype=complex))


def to_spectral(f: PhysicalField, grid: FourierGrid | None = None) -> SpectralField:
    if grid is not None and grid != f.grid:
        raise ValueError("physical field does not live on the requested grid")
    return SpectralField(f.grid, fftn(f.values), real=True)


def to_physical(f: SpectralField) -> PhysicalField:
    """Inverse transform; the imaginary round-off of a real field is dropped."""
    values = ifftn(f.coeffs)
    if not f.real:
        raise ValueError("field is not flagged real; use ifftn on the coefficients directly")
    return PhysicalField(f.grid, values.real)


def conjugate_symmetry_defect(f: SpectralField) -> float:
    """``max |u_hat(-xi) - conj(u_hat(xi))|`` relative to ``max |u_hat|``."""
    c = f.coeffs
    flipped = np.roll(c[:, ::-1, ::-1, ::-1], shift=(1, 1, 1), axis=(1, 2, 3))
    scale = np.max(np.abs(c))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(flipped - np.conj(c))) / scale)


# --- per-mode operators -----------------------------------------------------


def divergence(V: SpectralField) -> np.ndarray:
    """Spectral coefficients of ``div (V1, V2, V3)``."""
    x1, x2, x3 = V.grid.xi
    return 1j * (x1 * V.coeffs[0] + x2 * V.coeffs[1] + x3 * V.coeffs[2])


def gradient(grid: FourierGrid, s_hat: np.ndarray) -> np.ndarray:
    """``(3, ...)`` coefficients of the gradient of a scalar."""
    return np.stack([1j * x * s_hat for x in grid.xi])


def gradient_h(grid: FourierGrid, s_hat: np.ndarray) -> np.ndarray:
    x1, x2, _ = grid.xi
    return np.stack([1j * x1 * s_hat, 1j * x2 * s_hat])


def curl_h(V: SpectralField) -> np.ndarray:
    """``curl_h V = -d2 V1 + d1 V2``."""
    x1, x2, _ = V.grid.xi
    return 1j * (-x2 * V.coeffs[0] + x1 * V.coeffs[1])


def leray_project(V: SpectralField) -> SpectralField:
    """Project components 1-3 onto divergence-free fields; others untouched.

    The ``xi = 0`` mode passes through unchanged.
    """
    grid = V.grid
    xi = grid.xi
    k2 = grid.xi_sq
    inv = np.divide(1.0, k2, out=np.zeros_like(k2), where=k2 > 0)
    proj = (xi[0] * V.coeffs[0] + xi[1] * V.coeffs[1] + xi[2] * V.coeffs[2]) * inv
    out = V.coeffs.copy()
    for j in range(3):
        out[j] = V.coeffs[j] - xi[j] * proj
    return V.with_coeffs(out)


def laplacian_apply(V: SpectralField, nu: float, nu_p: float) -> SpectralField:
    """The diffusion operator ``D = diag(nu Lap, nu Lap, nu Lap, nu' Lap)``."""
    k2 = V.grid.xi_sq
    out = V.coeffs.copy()
    out[:3] *= -nu * k2
    out[3:] *= -nu_p * k2
    return V.with_coeffs(out)


def dealias_23(V: SpectralField) -> SpectralField:
    return V.with_coeffs(V.coeffs * V.grid.dealias_mask)


def dealiased_product(grid: FourierGrid, a_hat: np.ndarray, b_hat: np.ndarray) -> np.ndarray:
    """Coefficients of ``a * b`` with 2/3-rule truncation of inputs and output.

    For inputs already inside the 2/3 box this is the exact Galerkin product.
    """
    m = grid.dealias_mask
    a = ifftn(a_hat * m).real
    b = ifftn(b_hat * m).real
    return fftn(a * b) * m


# --- norms ------------------------------------------------------------------


def l2_norm(V: SpectralField) -> float:
    return float(np.sqrt(V.grid.volume * np.sum(np.abs(V.coeffs) ** 2)))


def inner_product(U: SpectralField, V: SpectralField) -> complex:
    """``(U | V)_{L^2} = int U . conj(V) dx``."""
    _check_same_grid(U, V)
    return complex(U.grid.volume * np.sum(U.coeffs * np.conj(V.coeffs)))


def sobolev_norm(V: SpectralField, s: float, homogeneous: bool = True) -> float:
    """``(V sum_xi w(xi) |V_hat(xi)|^2)^(1/2)`` summed over all components.

    Homogeneous: ``w = |xi|^(2s)`` with ``xi = 0`` dropped. Non-homogeneous:
    ``w = (1 + |xi|^2)^s``.
    """
    grid = V.grid
    k2 = grid.xi_sq
    power = np.sum(np.abs(V.coeffs) ** 2, axis=0)
    if homogeneous:
        if s < 0 and np.any(V.coeffs[:, 0, 0, 0] != 0):
            raise ValueError("homogeneous norm with s < 0 requires a zero mean mode")
        nz = k2 > 0
        w = np.zeros_like(k2)
        w[nz] = k2[nz] ** s
    else:
        w = (1.0 + k2) ** s
    return float(np.sqrt(grid.volume * np.sum(w * power)))


def linf_norm(V: SpectralField) -> float:
    """Collocation maximum of the pointwise Euclidean norm."""
    phys = ifftn(V.coeffs).real
    return float(np.sqrt(np.max(np.sum(phys**2, axis=0))))
