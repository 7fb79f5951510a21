"""Direct quadrature of the dispersive kernel

    K(t, tau, z) = int exp(+-i tau phi(xi) - (nu + nu')|xi|^2 t / 2 + i xi.z) Psi(xi) dxi,
    phi(xi) = (|xi_h| / |xi|) S_eps(xi),

over the compact support of ``Psi``.

The integrand depends on the horizontal wavevector only through ``|xi_h|`` and
``xi_h . z_h``, so in spherical coordinates ``(rho, theta, azimuth)`` the
azimuthal integral is exact: ``int_0^{2 pi} exp(i rho sin(theta) |z_h| cos a) da
= 2 pi J0(rho sin(theta) |z_h|)``. The remaining ``(rho, theta)`` integral is done
with composite Gauss-Legendre panels sized by a points-per-period guard.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.integrate
import scipy.special

from .linear import FrequencyCutoff, stratification_factor

__all__ = [
    "KernelParams",
    "QuadratureSpec",
    "NyquistGuardError",
    "KernelSample",
    "DecayFit",
    "eval_kernel",
    "riemann_kernel",
    "cutoff_volume",
    "fit_decay",
    "phase",
    "resolve",
    "guard_points",
    "eval_kernel_sample",
]


class NyquistGuardError(ValueError):
    """The requested resolution under-samples the oscillation, or exceeds the cap."""


@dataclass(frozen=True)
class KernelParams:
    r: float
    R: float
    eps: float = 1e-3
    nu: float = 1.0
    nu_p: float = 1.0
    t: float = 0.0
    tau: float = 0.0
    z: tuple = (0.0, 0.0, 0.0)
    sign: int = 1

    def __post_init__(self):
        if not 0 < self.r < self.R:
            raise ValueError("need 0 < r < R")
        if self.t < 0 or self.tau < 0:
            raise ValueError("t and tau must be non-negative")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        object.__setattr__(self, "z", tuple(float(v) for v in self.z))

    @property
    def cutoff(self) -> FrequencyCutoff:
        return FrequencyCutoff(self.r, self.R)

    def replace(self, **kw) -> "KernelParams":
        d = asdict(self)
        d.update(kw)
        return KernelParams(**d)


@dataclass(frozen=True)
class QuadratureSpec:
    """Resolution of the ``(rho, theta)`` product rule.

    ``n_rho``/``n_theta`` of ``None`` mean automatic: the larger of the floor
    ``min_points`` and what the guard asks for. Explicit counts are checked
    against the guard and rejected if too small.
    """

    n_rho: int | None = None
    n_theta: int | None = None
    min_points: int = 96
    points_per_period: float = 8.0
    panel_order: int = 16
    max_evals: float = 1e9
    chunk: int = 4096


def phase(rho, theta, p: KernelParams):
    """``phi = sin(theta) S_eps`` in spherical coordinates (complex in general)."""
    s = np.sin(theta)
    return s * stratification_factor(rho * s, rho, p.eps, p.nu, p.nu_p)


def _support(p: KernelParams):
    rho_lo, rho_hi = p.r / 2, 2 * p.R
    theta0 = math.asin(min(1.0, p.r / (2 * rho_hi)))
    return (rho_lo, rho_hi), (theta0, math.pi - theta0)


def _max_rates(p: KernelParams, n: int = 257):
    """Largest phase derivatives along ``rho`` and ``theta`` over the support."""
    (a, b), (c, d) = _support(p)
    rho = np.linspace(a, b, n)[:, None]
    th = np.linspace(c, d, n)[None, :]
    ph = p.tau * phase(rho, th, p).real + rho * np.cos(th) * p.z[2]
    zh = math.hypot(p.z[0], p.z[1])
    d_rho = np.abs(np.diff(ph, axis=0)) / (rho[1, 0] - rho[0, 0])
    d_th = np.abs(np.diff(ph, axis=1)) / (th[0, 1] - th[0, 0])
    # J0 oscillates like cos(rho sin(theta) |z_h|)
    k_rho = float(np.max(d_rho)) + zh
    k_th = float(np.max(d_th)) + b * zh
    return k_rho, k_th


def guard_points(p: KernelParams, spec: QuadratureSpec) -> tuple[int, int]:
    """Minimum ``(n_rho, n_theta)`` giving ``points_per_period`` per oscillation."""
    (a, b), (c, d) = _support(p)
    k_rho, k_th = _max_rates(p)
    n_rho = math.ceil(spec.points_per_period * k_rho * (b - a) / (2 * math.pi))
    n_th = math.ceil(spec.points_per_period * k_th * (d - c) / (2 * math.pi))
    return n_rho, n_th


def _composite_gl(a: float, b: float, n: int, order: int):
    panels = max(1, math.ceil(n / order))
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def resolve(p: KernelParams, spec: QuadratureSpec) -> tuple[int, int]:
    g_rho, g_th = guard_points(p, spec)
    if spec.n_rho is not None and spec.n_rho < g_rho:
        raise NyquistGuardError(f"n_rho={spec.n_rho} below the guard ({g_rho}) at tau={p.tau}")
    if spec.n_theta is not None and spec.n_theta < g_th:
        raise NyquistGuardError(f"n_theta={spec.n_theta} below the guard ({g_th}) at tau={p.tau}")
    n_rho = spec.n_rho if spec.n_rho is not None else max(spec.min_points, g_rho)
    n_th = spec.n_theta if spec.n_theta is not None else max(spec.min_points, g_th)
    if float(n_rho) * float(n_th) > spec.max_evals:
        raise NyquistGuardError(f"{n_rho} x {n_th} evaluations exceed the cap {spec.max_evals:g}")
    return n_rho, n_th


@dataclass(frozen=True)
class KernelSample:
    params: KernelParams
    value: complex
    n_rho: int
    n_theta: int

    @property
    def modulus(self) -> float:
        return abs(self.value)


def eval_kernel(p: KernelParams, quad: QuadratureSpec | None = None) -> complex:
    return eval_kernel_sample(p, quad).value


def eval_kernel_sample(p: KernelParams, quad: QuadratureSpec | None = None) -> KernelSample:
    quad = quad or QuadratureSpec()
    n_rho, n_th = resolve(p, quad)
    (a, b), (c, d) = _support(p)
    rho, w_rho = _composite_gl(a, b, n_rho, quad.panel_order)
    th, w_th = _composite_gl(c, d, n_th, quad.panel_order)
    cut = p.cutoff
    zh = math.hypot(p.z[0], p.z[1])
    radial = rho**2 * np.exp(-0.5 * (p.nu + p.nu_p) * rho**2 * p.t) * w_rho
    total = 0.0 + 0.0j
    # tiles in theta, summed in a fixed order
    for lo in range(0, len(th), quad.chunk):
        tt = th[lo : lo + quad.chunk][None, :]
        s = np.sin(tt)
        R_ = rho[:, None]
        arg = p.sign * 1j * p.tau * phase(R_, tt, p) + 1j * R_ * np.cos(tt) * p.z[2]
        f = np.exp(arg) * cut(R_ * s, R_) * s
        if zh:
            f = f * scipy.special.j0(R_ * s * zh)
        total += complex(np.sum(radial @ (f * w_th[None, lo : lo + quad.chunk])))
    return KernelSample(p, 2 * math.pi * total, len(rho), len(th))


def riemann_kernel(p: KernelParams, h: float, chunk: int = 64) -> complex:
    """Cartesian midpoint sum over the box ``[-2R, 2R]^3`` with spacing ``~h``.

    The integrand is smooth and compactly supported inside the box, so the
    uniform rule converges spectrally once ``h`` resolves the oscillation.
    """
    L = 2 * p.R
    n = int(math.ceil(2 * L / h))
    hx = 2 * L / n
    x = -L + hx * (np.arange(n) + 0.5)
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    hn2 = X1**2 + X2**2
    total = 0.0 + 0.0j
    cut = p.cutoff
    for lo in range(0, n, chunk):
        x3 = x[lo : lo + chunk][None, None, :]
        k2 = hn2[..., None] + x3**2
        kn = np.sqrt(k2)
        hn = np.sqrt(hn2)[..., None]
        psi = cut(hn, kn)
        mask = psi > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            ph = np.where(mask, hn / np.where(kn > 0, kn, 1) * stratification_factor(hn, kn, p.eps, p.nu, p.nu_p), 0)
        arg = (
            p.sign * 1j * p.tau * ph
            - 0.5 * (p.nu + p.nu_p) * k2 * p.t
            + 1j * (X1[..., None] * p.z[0] + X2[..., None] * p.z[1] + x3 * p.z[2])
        )
        total += complex(np.sum(np.where(mask, np.exp(arg) * psi, 0)))
    return total * hx**3


def cutoff_volume(r: float, R: float) -> float:
    """``int Psi dxi`` by adaptive quadrature in cylindrical coordinates."""
    cut = FrequencyCutoff(r, R)

    def f(x3, s):
        return 2 * math.pi * s * float(cut(s, math.hypot(s, x3)))

    val, _ = scipy.integrate.dblquad(f, r / 2, 2 * R, lambda s: 0.0, lambda s: math.sqrt(max(4 * R * R - s * s, 0.0)), epsabs=1e-10, epsrel=1e-10)
    return 2 * val


@dataclass
class DecayFit:
    tau: np.ndarray
    modulus: np.ndarray
    slope: float
    intercept: float
    residual: float
    params: KernelParams
    sup_z: np.ndarray | None = None
    z_sample: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "slope": self.slope,
                "intercept": self.intercept,
                "residual": self.residual,
                "params": asdict(self.params),
                "tau": self.tau.tolist(),
                "modulus": self.modulus.tolist(),
            },
            indent=2,
            sort_keys=True,
        )

    def csv_rows(self, values=None):
        """``(tau, t, re, im, abs)`` rows."""
        vals = values if values is not None else [complex(m) for m in self.modulus]
        for tau, v in zip(self.tau, vals):
            yield float(tau), self.params.t, v.real, v.imag, abs(v)


def fit_decay(
    p: KernelParams,
    tau_grid=None,
    quad: QuadratureSpec | None = None,
    z_sample=None,
) -> tuple[DecayFit, list[complex]]:
    """Least-squares slope of ``log|K|`` against ``log tau`` at ``z = p.z``."""
    tau = np.logspace(1, 4, 13) if tau_grid is None else np.asarray(tau_grid, dtype=float)
    if len(tau) < 2 or np.any(tau <= 0):
        raise ValueError("tau grid must hold at least two positive values")
    values = [eval_kernel(p.replace(tau=float(s)), quad) for s in tau]
    mod = np.abs(values)
    A = np.vstack([np.log(tau), np.ones_like(tau)]).T
    coef, res, *_ = np.linalg.lstsq(A, np.log(mod), rcond=None)
    resid = float(np.sqrt(res[0] / len(tau))) if len(res) else 0.0
    sup_z = None
    if z_sample is not None:
        sup_z = np.array([max(abs(eval_kernel(p.replace(tau=float(s), z=tuple(z)), quad)) for z in z_sample) for s in tau])
    fit = DecayFit(tau, mod, float(coef[0]), float(coef[1]), resid, p, sup_z, list(z_sample or []))
    return fit, values
