"""Acceptance criteria 1-10, one test each.

Every test records a ``criterion N: PASS|FAIL`` line that is echoed in the
terminal summary, then asserts the same condition.
"""

import itertools
import time

import numpy as np
import pytest

from boussinesq_lab.config import ExperimentConfig
from boussinesq_lab.dyadic import anisotropic_norm, bony_split, decompose, paraproduct_piece, q_max
from boussinesq_lab.harness import run_converge, run_kernel, run_strichartz
from boussinesq_lab.linear import eigensystem, project_0, project_pm, propagate, symbol
from boussinesq_lab.solvers import SolverConfig, solve_limit, solve_pbs
from boussinesq_lab.spectral import (
    FourierGrid,
    SpectralField,
    dealiased_product,
    fftn,
    l2_norm,
    leray_project,
    to_physical,
)

from conftest import ACCEPTANCE, single_mode

PERMS = np.array(list(itertools.permutations(range(4))))


@pytest.fixture
def record(request):
    def _record(n, ok, detail):
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        request.config.stash[ACCEPTANCE].append((n, line))
        print(line)
        assert ok, line

    return _record


def shell_sample(rng, n, r, R):
    out = np.empty((0, 3))
    while len(out) < n:
        x = rng.uniform(-R, R, (4 * n, 3))
        keep = (np.hypot(x[:, 0], x[:, 1]) > r) & (np.linalg.norm(x, axis=1) < R)
        out = np.vstack([out, x[keep]])
    return out[:n]


def test_c01_eigendecomposition(record):
    rng = np.random.Generator(np.random.PCG64(101))
    t0 = time.perf_counter()
    xi = shell_sample(rng, 10_000, 0.5, 8.0)
    rec_err = eig_err = 0.0
    for (nu, nu_p), eps in itertools.product([(1.0, 1.0), (1.0, 0.5)], [1e-1, 1e-2, 1e-3]):
        es = eigensystem(xi, eps, nu, nu_p)
        L = symbol(xi, eps, nu, nu_p)
        rec = np.einsum("nij,nj,njk->nik", es.Q, es.eigenvalues, es.Qinv)
        scale = np.max(np.abs(L), axis=(1, 2))
        rec_err = max(rec_err, np.max(np.max(np.abs(rec - L), axis=(1, 2)) / scale))
        ref = np.linalg.eigvals(L)
        # best matching over all orderings of the reference eigenvalues
        dev = np.min(np.max(np.abs(es.eigenvalues[:, None, :] - ref[:, PERMS]), axis=2), axis=1)
        eig_err = max(eig_err, np.max(dev))
    elapsed = time.perf_counter() - t0
    ok = rec_err < 1e-10 and eig_err < 1e-8 and elapsed < 10
    record(1, ok, f"reconstruction {rec_err:.2e}, eigenvalues {eig_err:.2e}, {elapsed:.1f}s")


def test_c02_projector_algebra(record):
    g = FourierGrid.cube(16)
    rng = np.random.Generator(np.random.PCG64(102))
    shell = (g.xi_h_sq > 1) & (g.xi_norm < 4)
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(50):
        eps = (1e-1, 1e-2, 1e-3)[i % 3]
        nu, nu_p = (1.0, 1.0) if i % 2 else (1.0, 0.5)
        V = leray_project(SpectralField(g, fftn(rng.standard_normal((4,) + g.shape)) * shell))
        n = l2_norm(V)
        P0 = project_0(V)
        Pp = project_pm(V, eps, 1, nu, nu_p)
        Pm = project_pm(V, eps, -1, nu, nu_p)
        errs = [
            l2_norm(P0 + Pp + Pm - V),
            l2_norm(project_0(P0) - P0),
            l2_norm(project_pm(Pp, eps, 1, nu, nu_p) - Pp),
            l2_norm(project_pm(Pm, eps, -1, nu, nu_p) - Pm),
            l2_norm(project_0(Pp)),
            l2_norm(project_0(Pm)),
            l2_norm(project_pm(P0, eps, 1, nu, nu_p)),
            l2_norm(project_pm(P0, eps, -1, nu, nu_p)),
            l2_norm(project_pm(Pp, eps, -1, nu, nu_p)),
            l2_norm(project_pm(Pm, eps, 1, nu, nu_p)),
        ]
        worst = max(worst, max(errs) / n)
    elapsed = time.perf_counter() - t0
    record(2, worst < 1e-10 and elapsed < 30, f"worst relative defect {worst:.2e}, {elapsed:.1f}s")


def test_c03_skew_energy(record):
    g = FourierGrid.cube(32)
    rng = np.random.Generator(np.random.PCG64(103))
    V = leray_project(SpectralField(g, fftn(rng.standard_normal((4,) + g.shape)) * g.dealias_mask))
    n0 = l2_norm(V)
    eps = 0.01
    worst = max(abs(l2_norm(propagate(V, ratio * eps, eps, 0.0, 0.0)) / n0 - 1) for ratio in (1.0, 10.0, 100.0, 1e3))
    record(3, worst < 1e-10, f"max relative L2 drift {worst:.2e} for t/eps <= 1e3")


def test_c04_dispersive_decay(record, tmp_path):
    t0 = time.perf_counter()
    rep = run_kernel(ExperimentConfig(kind="kernel", out=str(tmp_path)))
    elapsed = time.perf_counter() - t0
    ok = rep["slope_in_bracket"] and rep["t_envelope_ok"] and elapsed < 300
    record(4, ok, f"slope {rep['slope']:.3f}, t-envelope {'ok' if rep['t_envelope_ok'] else 'violated'}, {elapsed:.0f}s")


def test_c05_limit_system(record):
    nu = 0.1
    g = FourierGrid((64, 64, 8))
    x1, x2, x3 = g.coordinates
    # each layer carries a Taylor-Green cell of its own amplitude
    a0, a1 = 1.0, 0.5
    shape = [np.sin(x1) * np.cos(x2), -np.cos(x1) * np.sin(x2)]
    u0 = np.stack([np.broadcast_to(s * (a0 + a1 * np.cos(x3)), g.shape) for s in shape])
    tr = solve_limit(SpectralField(g, fftn(u0)), nu, SolverConfig(1 / 32, 1.0))
    exact = np.stack([np.broadcast_to(s * (a0 * np.exp(-2 * nu) + a1 * np.exp(-3 * nu) * np.cos(x3)), g.shape) for s in shape])
    tg_err = float(np.max(np.abs(to_physical(tr.final).values - exact)))

    g16 = FourierGrid.cube(16)
    rng = np.random.Generator(np.random.PCG64(105))
    worst = -np.inf
    for _ in range(3):
        c = fftn(rng.standard_normal((2,) + g16.shape)) * (g16.xi_norm <= 4)
        ub0 = SpectralField(g16, c)
        ub0 = ub0 * (1 / l2_norm(ub0))
        tr = solve_limit(_horizontal_leray(ub0), nu, SolverConfig(1 / 128, 0.5))
        _, l2 = tr.norm_series("L2")
        lhs = l2**2 + 2 * nu * tr.dissipation_integral("H1", rule="simpson")
        worst = max(worst, float(np.max(lhs / l2[0] ** 2 - 1)))
    ok = tg_err < 1e-6 and worst <= 1e-6
    record(5, ok, f"Taylor-Green Linf error {tg_err:.2e}, energy violation {max(worst, 0.0):.2e}")


def _horizontal_leray(u):
    g = u.grid
    x1, x2, _ = g.xi
    h2 = np.where(g.xi_h_sq > 0, g.xi_h_sq, 1)
    s = (x1 * u.coeffs[0] + x2 * u.coeffs[1]) / h2
    return SpectralField(g, np.stack([u.coeffs[0] - x1 * s, u.coeffs[1] - x2 * s]))


def test_c06_littlewood_paley(record):
    g = FourierGrid.cube(32)
    rng = np.random.Generator(np.random.PCG64(106))
    raw = fftn(rng.standard_normal(g.shape))
    rec = np.max(np.abs(decompose(raw, g).reconstruct() - raw)) / np.max(np.abs(raw))
    u = fftn(rng.standard_normal(g.shape)) * g.dealias_mask
    v = fftn(rng.standard_normal(g.shape)) * g.dealias_mask
    uv = dealiased_product(g, u, v)
    scale = np.max(np.abs(uv))
    bony = np.max(np.abs(sum(bony_split(u, v, g)) - uv)) / scale
    qs = range(-1, q_max(g) + 1)
    orth = 0.0
    for q, qp in itertools.product(qs, qs):
        if abs(q - qp) >= 5:
            orth = max(orth, np.max(np.abs(paraproduct_piece(u, v, g, q, qp, -1))))
        if qp <= q - 4:
            orth = max(orth, np.max(np.abs(paraproduct_piece(u, v, g, q, qp, +1))))
    orth /= scale
    ok = rec < 1e-10 and orth < 1e-12 and bony < 1e-9
    record(6, ok, f"reconstruction {rec:.2e}, quasi-orthogonality {orth:.2e}, Bony {bony:.2e}")


@pytest.mark.slow
def test_c07_convergence(record, tmp_path):
    t0 = time.perf_counter()
    rep = run_converge(ExperimentConfig(out=str(tmp_path)))
    elapsed = time.perf_counter() - t0
    ok = rep["strictly_decreasing"] and rep["rate_exponent"] > 0 and elapsed < 1200
    sups = ", ".join(f"{s:.3e}" for s in rep["sup_delta"])
    record(7, ok, f"sup delta [{sups}], rate {rep['rate_exponent']:.3f}, {elapsed:.0f}s")


@pytest.mark.slow
def test_c08_strichartz(record, tmp_path):
    rep = run_strichartz(ExperimentConfig(kind="strichartz", out=str(tmp_path)))
    exps = rep["exponents"]
    ok = all(exps[k] > 0 for k in ("1", "2", "4"))
    record(8, ok, "exponents " + ", ".join(f"p={k}: {v:.3f}" for k, v in exps.items()))


def test_c09_integrator_order(record):
    g = FourierGrid.cube(16)
    eps, nu, T = 0.1, 0.1, 1.0
    V = single_mode(g, (1, 0, 0), [0, 0, 0.3, 0.2j])
    U0 = V.copy()
    U0.coeffs[0, 0, 0, 0] = 1.0  # uniform mean flow advects the mode exactly
    exact = propagate(V, T, eps, nu, nu).coeffs * np.exp(-1j * g.xi[0] * T)
    exact[0, 0, 0, 0] = 1.0
    errs = [np.max(np.abs(solve_pbs(U0, eps, nu, nu, SolverConfig(dt, T)).final.coeffs - exact)) for dt in (0.1, 0.05, 0.025)]
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    record(9, min(ratios) >= 8, f"error ratios {ratios[0]:.1f}, {ratios[1]:.1f}")


def test_c10_exchange_inequality(record):
    g = FourierGrid((16, 16, 16), (1.0, 3.0, 2.0))
    rng = np.random.Generator(np.random.PCG64(110))
    violations = checked = 0
    for p, q in [(1.0, 2.0), (2.0, 4.0), (2.0, np.inf)]:
        for i in range(100):
            u = rng.standard_normal(g.shape)
            if i % 2:
                u = u * rng.uniform(0.1, 3.0, size=(1, 1, g.shape[2]))
            if i % 3 == 0:
                u = u * rng.uniform(0.0, 2.0, size=(g.shape[0], g.shape[1], 1))
            lhs = anisotropic_norm(u, g, ("v", q), ("h", p))
            rhs = anisotropic_norm(u, g, ("h", p), ("v", q))
            violations += not lhs <= rhs
            checked += 1
    record(10, violations == 0, f"{violations} violations in {checked} fields")
