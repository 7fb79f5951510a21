import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from boussinesq_lab.linear import (
    DegenerateModeError,
    FrequencyCutoff,
    cutoff_apply,
    eigensystem,
    project_0,
    project_pm,
    propagate,
    smooth_step,
    stratification_factor,
    symbol,
)
from boussinesq_lab.spectral import FourierGrid, SpectralField, divergence, l2_norm, leray_project

from conftest import random_field, single_mode


def sample_shell(rng, n, r, R):
    """Uniform-ish samples of ``{|xi_h| > r, |xi| < R}`` by rejection."""
    out = np.empty((0, 3))
    while len(out) < n:
        x = rng.uniform(-R, R, size=(4 * n, 3))
        keep = (np.hypot(x[:, 0], x[:, 1]) > r) & (np.linalg.norm(x, axis=1) < R)
        out = np.vstack([out, x[keep]])
    return out[:n]


def eig_match(a, b):
    """Smallest max-deviation over all pairings of two 4-element sets."""
    return min(np.max(np.abs(a - b[list(p)])) for p in itertools.permutations(range(4)))


xi_strategy = st.tuples(
    st.floats(-6, 6), st.floats(-6, 6), st.floats(-6, 6)
).filter(lambda x: np.hypot(x[0], x[1]) > 0.3)


class TestSymbol:
    def test_unit_x_example(self):
        L = symbol([1.0, 0, 0], 0.1, 2.0, 3.0)
        assert L[2, 3] == 1 and L[0, 3] == 0 and L[3, 2] == -1
        np.testing.assert_allclose(np.diag(L), [0.2, 0.2, 0.2, 0.3])

    def test_sign_flip(self):
        xi = np.array([0.7, -1.2, 2.0])
        L, M = symbol(xi, 0.1, 1, 1), symbol(-xi, 0.1, 1, 1)
        assert L[2, 3] == M[2, 3] and L[3, 2] == M[3, 2]
        assert L[0, 3] == M[0, 3] and L[1, 3] == M[1, 3]  # xi3 xi1 is even
        xi2 = xi * np.array([1, 1, -1])
        N = symbol(xi2, 0.1, 1, 1)
        assert N[0, 3] == -L[0, 3] and N[1, 3] == -L[1, 3]

    def test_eps_zero_leaves_coupling(self):
        L = symbol([1.0, 2.0, 2.0], 0.0, 1, 1)
        np.testing.assert_array_equal(np.diag(L), 0)
        assert L[3, 2] == -1

    def test_zero_mode_rejected(self):
        with pytest.raises(ValueError):
            symbol([0.0, 0, 0], 0.1, 1, 1)
        with pytest.raises(ValueError):
            eigensystem([0.0, 0, 0], 0.1, 1, 1)


class TestEigensystem:
    def test_unit_x_example(self):
        es = eigensystem([1.0, 0, 0], 0.1, 1.0, 1.0)
        assert es.lam0 == pytest.approx(0.1)
        assert es.lam_plus == pytest.approx(0.1 + 1j)
        assert es.lam_minus == pytest.approx(0.1 - 1j)
        # independent oracle
        assert eig_match(es.eigenvalues, np.linalg.eigvals(symbol([1.0, 0, 0], 0.1, 1, 1))) < 1e-12

    def test_eps_zero_imaginary(self):
        es = eigensystem([1.0, 2.0, 3.0], 0.0, 1, 1)
        assert es.lam_plus.real == 0
        assert es.lam_plus.imag == pytest.approx(np.sqrt(5 / 14))

    def test_lam0_example(self):
        assert eigensystem([3.0, 4.0, 0.0], 0.01, 2.0, 1.0).lam0 == pytest.approx(0.5)

    def test_inverse_pair(self):
        es = eigensystem([1.0, 1.0, 1.0], 0.01, 1, 1)
        np.testing.assert_allclose(es.Q @ es.Qinv, np.eye(4), atol=1e-12)

    def test_conjugate_partner_when_S_real(self):
        es = eigensystem([1.0, 0.5, 2.0], 0.01, 1.0, 2.0)
        assert abs(es.S.imag) == 0
        assert es.lam_plus.real == pytest.approx(es.lam_minus.real)
        assert es.lam_plus.imag == pytest.approx(-es.lam_minus.imag)

    @given(xi=xi_strategy, eps=st.sampled_from([1e-1, 1e-2, 1e-3]), nu=st.floats(0.1, 2), nu_p=st.floats(0.1, 2))
    def test_eigen_equations(self, xi, eps, nu, nu_p):
        es = eigensystem(xi, eps, nu, nu_p)
        if es.degenerate:
            return
        L = symbol(xi, eps, nu, nu_p)
        scale = max(1.0, np.max(np.abs(L)))
        for lam, E in ((es.lam0, es.E0), (es.lam_plus, es.E_plus), (es.lam_minus, es.E_minus)):
            assert np.max(np.abs(L @ E - lam * E)) < 1e-10 * scale * np.max(np.abs(E))
            assert abs(np.dot(xi, E[:3])) < 1e-12 * np.linalg.norm(xi) * np.max(np.abs(E))
        np.testing.assert_allclose(es.Q @ es.Qinv, np.eye(4), atol=1e-12)
        D = np.diag(es.eigenvalues)
        assert np.max(np.abs(es.Q @ D @ es.Qinv - L)) < 1e-10 * np.max(np.abs(L))

    def test_printed_stretch_factor_fails_when_viscosities_differ(self):
        # Documents why the corrected sign is used: the literal form is not an eigenvector.
        xi = np.array([1.0, 0.5, 2.0])
        eps, nu, nu_p = 0.05, 1.0, 3.0
        es = eigensystem(xi, eps, nu, nu_p)
        L = symbol(xi, eps, nu, nu_p)
        kn, hn = np.linalg.norm(xi), np.hypot(xi[0], xi[1])
        printed = es.S + 0.5j * eps * (nu - nu_p) * kn**3 / hn
        E = es.E_plus.copy()
        E[:3] *= printed / es.S_plus
        assert np.max(np.abs(L @ E - es.lam_plus * E)) > 1e-3
        assert np.max(np.abs(L @ es.E_plus - es.lam_plus * es.E_plus)) < 1e-12
        # with equal viscosities both forms agree
        assert eigensystem(xi, eps, 1.0, 1.0).S_plus == eigensystem(xi, eps, 1.0, 1.0).S

    def test_discriminant_uses_squared_difference(self):
        xi = np.array([0.2, 0.0, 3.0])
        eps = 0.05
        S = stratification_factor(0.2, np.linalg.norm(xi), eps, 1.0, 3.0)
        es = eigensystem(xi, eps, 1.0, 3.0)
        assert eig_match(es.eigenvalues, np.linalg.eigvals(symbol(xi, eps, 1.0, 3.0))) < 1e-10
        # flipping the viscosities must not change S
        assert S == stratification_factor(0.2, np.linalg.norm(xi), eps, 3.0, 1.0)

    def test_degenerate_flags(self):
        assert eigensystem([0.0, 0.0, 1.0], 0.1, 1, 1).degenerate
        # S = 0 exactly: eps^2 (nu-nu')^2 |xi|^6 = 4 |xi_h|^2 at xi=(1,0,0), eps |nu-nu'| = 2
        es = eigensystem([1.0, 0.0, 0.0], 1.0, 1.0, 3.0)
        assert es.degenerate and np.all(np.isnan(es.Q))
        assert np.isfinite(es.lam_plus)

    def test_lambda_lower_bound_small_eps(self):
        rng = np.random.Generator(np.random.PCG64(3))
        r, R = 0.5, 8.0
        xi = sample_shell(rng, 2000, r, R)
        eps = 1e-3
        es = eigensystem(xi, eps, 1.0, 2.0)
        assert np.all(es.S.real >= 0.5)
        assert np.min(np.abs(es.lam_plus)) >= r / (2 * R)


class TestCutoff:
    cut = FrequencyCutoff(1.0, 4.0)

    def test_profile(self):
        assert smooth_step(1.0) == 1 and smooth_step(2.0) == 0
        s = np.linspace(0, 3, 301)
        v = smooth_step(s)
        assert np.all(np.diff(v) <= 0)
        assert smooth_step(1.5) == pytest.approx(0.5)

    def test_inside_shell_is_one(self):
        rng = np.random.Generator(np.random.PCG64(1))
        xi = sample_shell(rng, 2000, 1.0, 4.0)
        v = self.cut(np.hypot(xi[:, 0], xi[:, 1]), np.linalg.norm(xi, axis=1))
        assert np.all(v == 1.0)

    def test_vanishes_outside_wide_shell(self):
        rng = np.random.Generator(np.random.PCG64(2))
        xi = rng.uniform(-10, 10, size=(20000, 3))
        h, k = np.hypot(xi[:, 0], xi[:, 1]), np.linalg.norm(xi, axis=1)
        v = self.cut(h, k)
        assert np.all((v >= 0) & (v <= 1))
        outside = ~self.cut.in_shell(h, k, 0.5, 2.0)
        assert np.all(v[outside] == 0)

    def test_apply_examples(self, grid16):
        inside = single_mode(grid16, (2, 0, 1), [1.0, 0, 0, 1.0])
        np.testing.assert_array_equal(cutoff_apply(inside, self.cut).coeffs, inside.coeffs)
        far = single_mode(grid16, (5, 0, 5), [1.0, 0, 0, 1.0])  # |xi| > 2R
        assert np.all(cutoff_apply(far, FrequencyCutoff(1.0, 3.0)).coeffs == 0)

    def test_rejects_bad_radii(self):
        with pytest.raises(ValueError):
            FrequencyCutoff(2.0, 1.0)


def cut_field(grid, rng, r, R):
    f = random_field(grid, rng)
    return leray_project(cutoff_apply(f, FrequencyCutoff(r, R)))


class TestProjectors:
    eps = 0.05

    def test_p0_examples(self, grid16):
        v = single_mode(grid16, (1, 0, 0), [0, 1.0, 0, 0])
        np.testing.assert_allclose(project_0(v).coeffs, v.coeffs, atol=1e-15)
        w = single_mode(grid16, (1, 2, 3), [0, 0, 0, 1.0])
        assert np.all(project_0(w).coeffs == 0)

    def test_p0_properties(self, grid16, rng):
        f = random_field(grid16, rng)
        p = project_0(f)
        assert np.all(p.coeffs[2:] == 0)
        assert np.max(np.abs(divergence(p))) < 1e-12 * l2_norm(f)
        assert l2_norm(project_0(p) - p) < 1e-12 * l2_norm(f)

    def test_lambda_datum(self, grid16):
        v = single_mode(grid16, (1, 1, 2), [0, 0, 0.3, 0.7])
        assert np.all(project_0(v).coeffs == 0)
        assert l2_norm(project_pm(v, self.eps, 1)) > 0.1

    def test_algebra(self, grid16, rng):
        V = cut_field(grid16, rng, 1.0, 4.0)
        P0 = project_0(V)
        Pp = project_pm(V, self.eps, 1)
        Pm = project_pm(V, self.eps, -1)
        n = l2_norm(V)
        assert l2_norm(P0 + Pp + Pm - V) < 1e-10 * n
        assert l2_norm(project_pm(Pp, self.eps, 1) - Pp) < 1e-10 * n
        assert l2_norm(project_pm(Pp, self.eps, -1)) < 1e-10 * n
        assert l2_norm(project_0(Pp)) < 1e-10 * n
        assert l2_norm(project_pm(P0, self.eps, 1)) < 1e-10 * n

    def test_degenerate_content_rejected(self, grid16):
        v = single_mode(grid16, (0, 0, 2), [1.0, 0, 0, 0])
        with pytest.raises(DegenerateModeError):
            project_pm(v, self.eps, 1)
        with pytest.raises(ValueError):
            project_pm(v, self.eps, 0)

    def test_bounded_projector_growth(self):
        g = FourierGrid.cube(32, 2 * np.pi * 4)  # finer wavenumber lattice (spacing 1/4)
        rng = np.random.Generator(np.random.PCG64(11))
        consts = []
        for r, R in [(1.0, 2.0), (0.5, 4.0), (0.25, 8.0)]:
            worst = 0.0
            for _ in range(4):
                V = cut_field(g, rng, r, R)
                for s in (1, -1):
                    worst = max(worst, l2_norm(project_pm(V, 0.01, s)) / l2_norm(V))
            consts.append(worst)
        assert all(np.isfinite(consts))
        # growth bounded by a fixed power of R/r (which goes 2, 8, 32)
        ratios = np.array([2.0, 8.0, 32.0])
        assert np.all(np.array(consts) <= 4 * ratios)


class TestPropagate:
    def test_identity_at_zero(self, grid16, rng):
        V = random_field(grid16, rng)
        np.testing.assert_array_equal(propagate(V, 0.0, 0.1, 1, 1).coeffs, V.coeffs)

    def test_rotation_damping_closed_form(self, grid16):
        eps, nu, t = 0.1, 0.7, 0.37
        V = single_mode(grid16, (1, 0, 0), [0, 0, 0, 1.0])
        out = propagate(V, t, eps, nu, nu).coeffs[:, 1, 0, 0]
        # u3' = -rho/eps - nu u3,  rho' = u3/eps - nu rho  (k^2 = 1, |xi_h|/|xi| = 1)
        damp = np.exp(-nu * t)
        w = t / eps
        np.testing.assert_allclose(out[2], -damp * np.sin(w), atol=1e-12)
        np.testing.assert_allclose(out[3], damp * np.cos(w), atol=1e-12)
        np.testing.assert_allclose(out[:2], 0, atol=1e-14)

    def test_semigroup(self, grid16, rng):
        V = random_field(grid16, rng)
        a = propagate(propagate(V, 0.13, 0.05, 1.0, 2.0), 0.29, 0.05, 1.0, 2.0)
        b = propagate(V, 0.42, 0.05, 1.0, 2.0)
        assert l2_norm(a - b) < 1e-10 * l2_norm(V)

    def test_matches_expm_on_degenerate_modes(self, grid16):
        from scipy.linalg import expm

        V = single_mode(grid16, (0, 0, 3), [1.0, 0.5, 0, 0.2])
        V.coeffs[2] = 0
        out = propagate(V, 0.3, 0.1, 1.0, 2.0)
        i = grid16.mode_index((0, 0, 3))
        G = expm(-(0.3 / 0.1) * symbol([0, 0, 3.0], 0.1, 1.0, 2.0))
        np.testing.assert_allclose(out.coeffs[(slice(None),) + i], G @ V.coeffs[(slice(None),) + i], atol=1e-13)

    @pytest.mark.parametrize("ratio", [1.0, 10.0, 1e3])
    def test_skew_energy(self, ratio):
        g = FourierGrid.cube(16)
        rng = np.random.Generator(np.random.PCG64(5))
        V = random_field(g, rng)
        eps = 0.01
        out = propagate(V, ratio * eps, eps, 0.0, 0.0)
        assert abs(l2_norm(out) - l2_norm(V)) < 1e-10 * l2_norm(V)

    def test_rejects_negative_time(self, grid16, rng):
        with pytest.raises(ValueError):
            propagate(random_field(grid16, rng), -1.0, 0.1, 1, 1)
