"""Experiment drivers: data generation, the eps sweep, the Strichartz-rate
study, the kernel decay study, self-checks and plain simulation.

Every driver writes into ``cfg.out``: a ``manifest.json`` echoing the resolved
configuration, CSV tables, SVG plots and a ``report.json``; it returns the
report dictionary, whose ``passed`` entry drives the CLI exit code.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dyadic, kernel, linear, spectral
from .config import ExperimentConfig, RandomFieldSpec
from .io import write_csv, write_json, write_pbsf
from .plotting import line_plot
from .solvers import (
    SolverConfig,
    Trajectory,
    compute_delta,
    delta_residual,
    solve_freewave,
    solve_limit,
    solve_pbs,
)
from .spectral import FourierGrid, SpectralField, fftn, leray_project, sobolev_norm

__all__ = [
    "ExperimentError",
    "generate_initial_data",
    "fit_loglog",
    "run_converge",
    "run_strichartz",
    "run_kernel",
    "run_selfcheck",
    "run_simulate",
    "RUNNERS",
]

log = logging.getLogger(__name__)


class ExperimentError(RuntimeError):
    """A solver failure annotated with the parameter value that triggered it."""

    def __init__(self, msg: str, eps: float | None = None):
        super().__init__(msg)
        self.eps = eps


def generate_initial_data(spec: RandomFieldSpec, grid: FourierGrid) -> SpectralField:
    """Seeded, real, band-limited, divergence-free field of unit ``Hdot^{1/2}`` norm
    (times ``spec.amplitude``)."""
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    noise = rng.standard_normal((4,) + grid.shape)
    c = fftn(noise)
    k = grid.xi_norm
    band = (k >= spec.k_min) & (k <= spec.k_max) & grid.dealias_mask & (k > 0)
    if spec.exclude_flat:
        band &= grid.xi_h_sq > 0
    if not np.any(band):
        raise ValueError(f"spectral band [{spec.k_min}, {spec.k_max}] holds no grid mode")
    if spec.localized:
        c = np.abs(c)
    c = c * band
    comps = set(spec.components)
    for j in range(4):
        if j not in comps:
            c[j] = 0
    vel = comps & {0, 1, 2}
    if vel == {0, 1, 2} or not vel:
        f = leray_project(SpectralField(grid, c))
    elif vel == {0, 1}:
        x1, x2, _ = grid.xi
        h2 = grid.xi_h_sq
        inv = np.divide(1.0, h2, out=np.zeros_like(h2), where=h2 > 0)
        s = (x1 * c[0] + x2 * c[1]) * inv
        c[0] = c[0] - x1 * s
        c[1] = c[1] - x2 * s
        f = SpectralField(grid, c)
    else:
        raise ValueError(f"velocity component subset {sorted(vel)} cannot carry a divergence-free field")
    n = sobolev_norm(f, 0.5)
    if n == 0:
        raise ValueError("generated field vanishes; widen the band or change components")
    return f * (spec.amplitude / n)


def fit_loglog(x, y) -> tuple[float, float]:
    """Slope and intercept of ``log y`` against ``log x``."""
    slope, intercept = np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)
    return float(slope), float(intercept)


def _prepare(cfg: ExperimentConfig) -> Path:
    spectral.set_threads(cfg.threads)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "manifest.json", {"config": cfg.to_dict()})
    return out


def _grid(cfg: ExperimentConfig) -> FourierGrid:
    return FourierGrid(cfg.dims, cfg.box)


@dataclass
class _SweepInputs:
    grid: FourierGrid
    U0: SpectralField
    ubar: Trajectory
    cut: linear.FrequencyCutoff


def _sweep_inputs(cfg: ExperimentConfig, U0: SpectralField | None = None) -> _SweepInputs:
    grid = _grid(cfg)
    if U0 is None:
        U0 = generate_initial_data(cfg.data, grid)
    ubar0 = SpectralField(grid, linear.project_0(U0).coeffs[:2])
    try:
        ubar = solve_limit(ubar0, cfg.nu, SolverConfig(cfg.limit_dt, cfg.t_end))
    except Exception as exc:  # annotate and re-raise
        raise ExperimentError(f"limit system: {exc}") from exc
    return _SweepInputs(grid, U0, ubar, linear.FrequencyCutoff(cfg.r, cfg.R))


def _solver_cfg(cfg: ExperimentConfig, eps: float) -> SolverConfig:
    dt = cfg.step_for(eps)
    n = max(1, int(round(cfg.t_end / dt)))
    stride = max(1, int(round(cfg.snapshot_dt / (cfg.t_end / n))))
    return SolverConfig(dt, cfg.t_end, snapshot_stride=stride)


def _lp_time_linf(W: Trajectory, p: float) -> float:
    t, v = W.norm_series("Linf")
    return float(np.trapezoid(v**p, t) ** (1.0 / p))


# --- eps sweep ---------------------------------------------------------------


def run_converge(cfg: ExperimentConfig, U0: SpectralField | None = None) -> dict:
    """Defect ``delta = U - W - (u_h, 0, 0)`` across the eps list."""
    out = _prepare(cfg)
    inp = _sweep_inputs(cfg, U0)
    rows, summary, curves = [], [], {}
    for eps in cfg.eps:
        t0 = time.perf_counter()
        scfg = _solver_cfg(cfg, eps)
        try:
            U = solve_pbs(inp.U0, eps, cfg.nu, cfg.nu_p, scfg)
            W = solve_freewave(inp.U0, inp.ubar, eps, inp.cut, scfg, cfg.nu, cfg.nu_p)
        except Exception as exc:
            raise ExperimentError(f"eps={eps:g}: {exc}", eps) from exc
        rep = compute_delta(U, W, inp.ubar)
        per = [(t, "delta_Hdot1/2", v) for t, v in zip(rep.times, rep.hdot_half)]
        per += [(t, "delta_dissipation", v) for t, v in zip(rep.times, rep.dissipation)]
        per.sort(key=lambda r: (r[0], r[1]))
        write_csv(out / f"delta_eps{eps:.6g}.csv", ["t", "name", "value"], per)
        rows += [(eps,) + r for r in per]
        summary.append((eps, rep.sup, float(rep.dissipation[-1]), rep.hdot_half[0]))
        curves[f"eps={eps:g}"] = (rep.times, rep.hdot_half)
        log.info("eps=%g sup delta=%.4e (%.1fs)", eps, rep.sup, time.perf_counter() - t0)
    write_csv(out / "converge.csv", ["eps", "t", "name", "value"], rows)
    write_csv(out / "converge_summary.csv", ["eps", "sup_delta_Hdot1/2", "dissipation", "delta0_Hdot1/2"], summary)
    eps = np.array([s[0] for s in summary])
    sups = np.array([s[1] for s in summary])
    monotone = bool(np.all(np.diff(sups) < 0))
    rate = fit_loglog(eps, sups)[0] if len(eps) > 1 else float("nan")
    line_plot(
        out / "converge.svg",
        curves,
        "t",
        "||delta(t)||_{Hdot^1/2}",
        title="defect across eps",
        hline=cfg.eta,
        hline_label="eta (reporting threshold)",
    )
    line_plot(out / "converge_rate.svg", {"sup_t ||delta||": (eps, sups)}, "eps", "sup_t ||delta||", logx=True, logy=True, markers=True)
    report = {
        "kind": "converge",
        "eps": eps.tolist(),
        "sup_delta": sups.tolist(),
        "dissipation": [s[2] for s in summary],
        "delta0": [s[3] for s in summary],
        "strictly_decreasing": monotone,
        "rate_exponent": rate,
        "passed": bool(monotone and rate > 0),
    }
    write_json(out / "report.json", report)
    return report


def run_strichartz(cfg: ExperimentConfig, U0: SpectralField | None = None) -> dict:
    """``||W||_{L^p_t L^inf_x}`` across eps and its fitted eps-exponent per ``p``."""
    out = _prepare(cfg)
    inp = _sweep_inputs(cfg, U0)
    norms = {p: [] for p in cfg.strichartz_p}
    rows = []
    for eps in cfg.eps:
        try:
            W = solve_freewave(inp.U0, inp.ubar, eps, inp.cut, _solver_cfg(cfg, eps), cfg.nu, cfg.nu_p)
        except Exception as exc:
            raise ExperimentError(f"eps={eps:g}: {exc}", eps) from exc
        for p in cfg.strichartz_p:
            v = _lp_time_linf(W, p)
            norms[p].append(v)
            rows.append((eps, p, v))
    # continuity in the cutoff at the smallest eps
    eps_min = cfg.eps[-1]
    half = linear.FrequencyCutoff(cfg.r, cfg.R / 2)
    W_half = solve_freewave(inp.U0, inp.ubar, eps_min, half, _solver_cfg(cfg, eps_min), cfg.nu, cfg.nu_p)
    jumps = {p: _lp_time_linf(W_half, p) / norms[p][-1] for p in cfg.strichartz_p}
    exps = {p: fit_loglog(cfg.eps, norms[p])[0] for p in cfg.strichartz_p}
    write_csv(out / "strichartz.csv", ["eps", "p", "value"], rows)
    write_csv(out / "strichartz_fit.csv", ["p", "exponent", "target"], [(p, exps[p], 1 / (4 * p)) for p in cfg.strichartz_p])
    line_plot(
        out / "strichartz.svg",
        {f"p={p:g}": (np.array(cfg.eps), np.array(norms[p])) for p in cfg.strichartz_p},
        "eps",
        "||W||_{L^p_t L^inf}",
        logx=True,
        logy=True,
        markers=True,
    )
    ps = sorted(cfg.strichartz_p)
    ordered = exps[ps[0]] >= exps[ps[-1]] - 0.3
    positive = all(e > 0 for e in exps.values())
    continuous = all(1 / 10 < j < 10 for j in jumps.values())
    report = {
        "kind": "strichartz",
        "eps": list(cfg.eps),
        "norms": {f"{p:g}": norms[p] for p in cfg.strichartz_p},
        "exponents": {f"{p:g}": exps[p] for p in cfg.strichartz_p},
        "cutoff_halving_ratio": {f"{p:g}": jumps[p] for p in cfg.strichartz_p},
        "positive": positive,
        "ordered": bool(ordered),
        "continuous": continuous,
        "passed": bool(positive and ordered and continuous),
    }
    write_json(out / "report.json", report)
    return report


# --- kernel ----------------------------------------------------------------


def run_kernel(cfg: ExperimentConfig) -> dict:
    out = _prepare(cfg)
    ks = cfg.kernel
    p = kernel.KernelParams(ks.r, ks.R, ks.eps, ks.nu, ks.nu_p)
    taus = np.logspace(np.log10(ks.tau_min), np.log10(ks.tau_max), ks.n_tau)
    fit, values = kernel.fit_decay(p, taus)
    rows = [(float(s), 0.0, v.real, v.imag, abs(v)) for s, v in zip(taus, values)]
    k_ref = abs(kernel.eval_kernel(p.replace(tau=ks.tau_t)))
    t_rows, t_ok = [], True
    for t in ks.t_values:
        v = kernel.eval_kernel(p.replace(tau=ks.tau_t, t=t))
        env = np.exp(-0.25 * (ks.nu + ks.nu_p) * ks.r**2 * t)
        ratio = abs(v) / k_ref
        t_ok &= bool(ratio <= 10 * env)
        t_rows.append((ks.tau_t, t, v.real, v.imag, abs(v)))
    k0 = abs(kernel.eval_kernel(p))
    plateau = [abs(kernel.eval_kernel(p.replace(tau=float(s)))) for s in np.linspace(0, 1, 5)]
    plateau_ok = bool(max(plateau) <= 2 * k0)
    write_csv(out / "kernel.csv", ["tau", "t", "re", "im", "abs"], rows + t_rows)
    (out / "kernel_fit.json").write_text(fit.to_json() + "\n")
    line_plot(
        out / "kernel.svg",
        {"|K(tau)|": (taus, fit.modulus), "fit": (taus, np.exp(fit.intercept) * taus**fit.slope)},
        "tau",
        "|K|",
        logx=True,
        logy=True,
        markers=True,
    )
    lo, hi = ks.slope_bracket
    in_bracket = bool(lo <= fit.slope <= hi)
    report = {
        "kind": "kernel",
        "slope": fit.slope,
        "intercept": fit.intercept,
        "residual": fit.residual,
        "slope_in_bracket": in_bracket,
        "t_envelope_ok": t_ok,
        "plateau_ok": plateau_ok,
        "passed": bool(in_bracket and t_ok and plateau_ok),
    }
    write_json(out / "report.json", report)
    return report


# --- self checks -------------------------------------------------------------


def _check_eigen(rng) -> dict:
    n = 2000
    xi = rng.uniform(-8, 8, (n, 3))
    es = linear.eigensystem(xi, 1e-2, 1.0, 0.5)
    L = linear.symbol(xi, 1e-2, 1.0, 0.5)
    recon = np.einsum("...ij,...j,...jk->...ik", es.Q, es.eigenvalues, es.Qinv)
    err = float(np.nanmax(np.abs(recon - L)) / np.max(np.abs(L)))
    return {"value": err, "passed": err < 1e-10}


def _check_projectors(rng) -> dict:
    g = FourierGrid.cube(16)
    cut = linear.FrequencyCutoff(1.0, 4.0)
    V = leray_project(SpectralField(g, fftn(rng.standard_normal((4,) + g.shape))))
    V = V.with_coeffs(V.coeffs * cut.in_shell(g.xi_h_norm, g.xi_norm))
    parts = linear.project_0(V) + linear.project_pm(V, 0.1, 1) + linear.project_pm(V, 0.1, -1)
    err = spectral.l2_norm(parts - V) / spectral.l2_norm(V)
    return {"value": err, "passed": err < 1e-10}


def _check_energy(rng) -> dict:
    g = FourierGrid.cube(16)
    V = leray_project(SpectralField(g, fftn(rng.standard_normal((4,) + g.shape))))
    W = linear.propagate(V, 10.0, 0.01, 0.0, 0.0)
    err = abs(spectral.l2_norm(W) / spectral.l2_norm(V) - 1)
    return {"value": err, "passed": err < 1e-10}


def _check_littlewood_paley(rng) -> dict:
    g = FourierGrid.cube(16)
    u = fftn(rng.standard_normal(g.shape))
    err = float(np.max(np.abs(dyadic.decompose(u, g).reconstruct() - u)) / np.max(np.abs(u)))
    return {"value": err, "passed": err < 1e-10}


def _check_exchange(rng) -> dict:
    g = FourierGrid.cube(8)
    worst = -np.inf
    for _ in range(20):
        u = rng.standard_normal(g.shape)
        lhs = dyadic.anisotropic_norm(u, g, outer=("v", 4.0), inner=("h", 2.0))
        rhs = dyadic.anisotropic_norm(u, g, outer=("h", 2.0), inner=("v", 4.0))
        worst = max(worst, lhs - rhs)
    return {"value": float(worst), "passed": bool(worst <= 0)}


def _check_bony(rng) -> dict:
    g = FourierGrid.cube(16)
    m = g.dealias_mask
    u, v = (fftn(rng.standard_normal(g.shape)) * m for _ in range(2))
    uv = spectral.dealiased_product(g, u, v)
    err = float(np.max(np.abs(sum(dyadic.bony_split(u, v, g)) - uv)) / np.max(np.abs(uv)))
    return {"value": err, "passed": err < 1e-9}


def _check_delta_residual(rng) -> dict:
    g = FourierGrid.cube(16)
    U0 = generate_initial_data(RandomFieldSpec(seed=int(rng.integers(2**32)), k_max=4.0), g)
    nu, eps, T = 0.1, 1 / 8, 0.125
    ubar = solve_limit(SpectralField(g, linear.project_0(U0).coeffs[:2]), nu, SolverConfig(1 / 256, T))
    cut = linear.FrequencyCutoff(1.0, 2.0)
    scfg = SolverConfig(1 / 64, T)
    U = solve_pbs(U0, eps, nu, nu, scfg)
    W = solve_freewave(U0, ubar, eps, cut, scfg, nu, nu)
    res, est = delta_residual(U, W, ubar, cut)
    ratio = float(np.max(res / est))
    return {"value": ratio, "passed": ratio <= 10}


def _check_single_mode(rng) -> dict:
    g = FourierGrid.cube(8)
    c = np.zeros((4,) + g.shape, complex)
    for k, s in (((1, 0, 0), 1), ((-1, 0, 0), -1)):
        c[2][g.mode_index(k)] = 0.3
        c[3][g.mode_index(k)] = 0.2j * s
    U0 = SpectralField(g, c)
    tr = solve_pbs(U0, 0.1, 0.5, 0.5, SolverConfig(0.05, 1.0, snapshot_stride=20))
    exact = linear.propagate(U0, 1.0, 0.1, 0.5, 0.5)
    err = float(np.max(np.abs(tr.final.coeffs - exact.coeffs)))
    return {"value": err, "passed": err < 1e-8}


def _check_kernel_oracle(rng) -> dict:
    p = kernel.KernelParams(1.0, 2.0, tau=3.0)
    a = kernel.eval_kernel(p)
    b = kernel.riemann_kernel(p, 0.08)
    err = abs(a - b) / abs(b)
    return {"value": float(err), "passed": err < 1e-3}


def _check_data(cfg: ExperimentConfig) -> dict:
    g = FourierGrid.cube(16)
    spec = RandomFieldSpec(seed=cfg.seed, k_max=4.0)
    a = generate_initial_data(spec, g)
    b = generate_initial_data(spec, g)
    div = float(np.max(np.abs(spectral.divergence(a))))
    ok = np.array_equal(a.coeffs, b.coeffs) and div < 1e-12 and abs(sobolev_norm(a, 0.5) - 1) < 1e-12
    return {"value": div, "passed": bool(ok)}


SELFCHECKS = {
    "eigendecomposition": _check_eigen,
    "projector_completeness": _check_projectors,
    "skew_energy": _check_energy,
    "littlewood_paley_reconstruction": _check_littlewood_paley,
    "anisotropic_exchange": _check_exchange,
    "bony_identity": _check_bony,
    "delta_residual": _check_delta_residual,
    "single_mode_solver": _check_single_mode,
    "kernel_oracle": _check_kernel_oracle,
}


def run_selfcheck(cfg: ExperimentConfig) -> dict:
    out = _prepare(cfg)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    results = {}
    for name, fn in SELFCHECKS.items():
        results[name] = fn(rng)
    results["initial_data"] = _check_data(cfg)
    write_csv(out / "selfcheck.csv", ["check", "value", "passed"], [(k, v["value"], v["passed"]) for k, v in results.items()])
    report = {"kind": "selfcheck", "checks": results, "passed": all(v["passed"] for v in results.values())}
    write_json(out / "report.json", report)
    return report


# --- plain simulation ------------------------------------------------------


def run_simulate(cfg: ExperimentConfig, U0: SpectralField | None = None) -> dict:
    """Single Boussinesq run at ``eps[0]`` with PBSF snapshots and norm CSV."""
    out = _prepare(cfg)
    grid = _grid(cfg)
    if U0 is None:
        U0 = generate_initial_data(cfg.data, grid) if cfg.data.amplitude != 0 else spectral.zeros(grid)
    eps = cfg.eps[0]
    traj = solve_pbs(U0, eps, cfg.nu, cfg.nu_p, _solver_cfg(cfg, eps))
    snap = out / "snapshots"
    snap.mkdir(exist_ok=True)
    files = []
    for i, (t, f) in enumerate(zip(traj.times, traj.states)):
        files.append(write_pbsf(snap / f"state_{i:05d}.pbsf", f, eps, cfg.nu, cfg.nu_p, t).name)
    write_csv(out / "norms.csv", ["t", "name", "value"], traj.norm_rows())
    t, l2 = traj.norm_series("L2")
    _, h12 = traj.norm_series("Hdot1/2")
    line_plot(out / "norms.svg", {"L2": (t, l2), "Hdot1/2": (t, h12)}, "t", "norm")
    report = {
        "kind": "simulate",
        "eps": eps,
        "snapshots": files,
        "final_L2": float(l2[-1]),
        "max_divergence": traj.max_divergence(),
        "passed": bool(np.all(np.isfinite(l2))),
    }
    write_json(out / "report.json", report)
    return report


RUNNERS = {
    "converge": run_converge,
    "strichartz": run_strichartz,
    "kernel": run_kernel,
    "selfcheck": run_selfcheck,
    "simulate": run_simulate,
}
