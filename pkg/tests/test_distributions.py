import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from carp.distributions import (
    CholeskyCovariance,
    GumbelParam,
    LognormalMarginal,
    bvn_cdf,
    bvn_sf,
    conditional_lognormal,
    gumbel_cdf,
    gumbel_logpdf,
    gumbel_partial,
    kendall_tau_gumbel,
    kendall_tau_mln,
    mln_joint_sf,
    std_normal_cdf,
)

# high-precision references (mpmath, 30 digits)
PHI_1959964 = 0.9750000009035575957
PHI_MINUS_8 = 6.2209605742717841235e-16

# Pr(Z1 <= h, Z2 <= k) at correlation rho; adaptive quadrature oracle
BVN_ORACLE = [
    (0.0, 0.0, 0.5, 0.333333333333333333),
    (1.0, -0.5, 0.3, 0.283138420244480952),
    (-1.2, 0.6, -0.7, 0.0260770872085730779),
    (2.0, 2.0, 0.9, 0.967860992230660873),
    (0.3, -0.3, 0.99, 0.382088443656400611),
    (-2.5, 1.5, -0.95, 3.51517877581005703e-6),
    (1.0, 1.0, 0.999, 0.837027688072356256),
    (0.0, 1.0, 0.8, 0.494434844434846931),
    (3.0, -3.0, 0.5, 0.00134989796015507271),
    (0.5, 0.5, 0.001, 0.478244300850805092),
    (4.0, 4.0, 0.7, 0.999939096532222809),
    (-4.0, -4.0, 0.7, 2.43901588904930807e-6),
]


class TestStdNormal:
    def test_center(self):
        assert std_normal_cdf(0.0) == 0.5

    def test_upper_quantile(self):
        assert std_normal_cdf(1.959964) == pytest.approx(PHI_1959964, abs=1e-12)

    def test_deep_tail(self):
        assert std_normal_cdf(-8.0) == pytest.approx(PHI_MINUS_8, rel=1e-12)

    def test_symmetry_and_erf(self):
        z = np.linspace(-6, 6, 101)
        np.testing.assert_allclose(std_normal_cdf(-z), 1.0 - std_normal_cdf(z), atol=1e-12)
        from scipy.special import erf

        np.testing.assert_allclose(std_normal_cdf(z), 0.5 * (1 + erf(z / math.sqrt(2))),
                                   atol=1e-12)

    def test_infinite(self):
        assert std_normal_cdf(np.inf) == 1.0
        assert std_normal_cdf(-np.inf) == 0.0


class TestBvnCdf:
    @pytest.mark.parametrize("h,k,rho,expected", BVN_ORACLE)
    def test_oracle_values(self, h, k, rho, expected):
        assert bvn_cdf(h, k, rho) == pytest.approx(expected, abs=1e-10)

    def test_independence_exact(self):
        assert bvn_cdf(0.0, 0.0, 0.0) == 0.25
        assert bvn_cdf(0.7, -1.1, 0.0) == pytest.approx(
            std_normal_cdf(0.7) * std_normal_cdf(-1.1), abs=1e-15)

    def test_arcsin_identity(self):
        for rho in (-0.9, -0.3, 0.2, 0.5, 0.99):
            assert bvn_cdf(0.0, 0.0, rho) == pytest.approx(
                0.25 + math.asin(rho) / (2 * math.pi), abs=1e-10)

    def test_quadrature_oracle(self):
        # direct 2-D integration of the density for one interior case
        h, k, rho = 0.8, -0.4, 0.55
        det = 1 - rho**2

        def density(y, x):
            return math.exp(-(x * x - 2 * rho * x * y + y * y) / (2 * det)) / (
                2 * math.pi * math.sqrt(det))

        val, err = integrate.dblquad(density, -9, h, -9, k, epsabs=1e-12)
        assert bvn_cdf(h, k, rho) == pytest.approx(val, abs=1e-9)

    def test_marginalization(self):
        assert bvn_cdf(np.inf, 0.42, 0.6) == pytest.approx(std_normal_cdf(0.42), abs=1e-14)
        assert bvn_cdf(0.42, np.inf, -0.6) == pytest.approx(std_normal_cdf(0.42), abs=1e-14)
        assert bvn_cdf(-np.inf, 3.0, 0.6) == 0.0

    def test_degenerate_rho_rejected(self):
        with pytest.raises(ValueError):
            bvn_cdf(0.0, 0.0, 1.0)
        with pytest.raises(ValueError):
            bvn_cdf(0.0, 0.0, -1.5)

    def test_vectorized(self):
        h = np.array([0.0, 1.0, -1.2])
        k = np.array([0.0, -0.5, 0.6])
        out = bvn_cdf(h, k, 0.3)
        assert out.shape == (3,)
        assert out[1] == pytest.approx(0.283138420244480952, abs=1e-10)

    @given(st.floats(-3, 3), st.floats(-3, 3),
           st.floats(-0.99, 0.99))
    @settings(max_examples=60, deadline=None)
    def test_monotone_in_arguments(self, h, k, rho):
        eps = 0.05
        assert bvn_cdf(h + eps, k, rho) >= bvn_cdf(h, k, rho) - 1e-12
        assert bvn_cdf(h, k + eps, rho) >= bvn_cdf(h, k, rho) - 1e-12


class TestMlnJointSf:
    CHOL = CholeskyCovariance(0.25, 0.1445, 0.25)

    def test_total_mass(self):
        assert mln_joint_sf((1e-12, 1e-12), (1.0, 1.5), self.CHOL) == pytest.approx(1.0, abs=1e-12)
        assert mln_joint_sf((0.0, 0.0), (1.0, 1.5), self.CHOL) == 1.0

    def test_independent_medians(self):
        chol = CholeskyCovariance(0.25, 0.0, 0.25)
        v = (math.exp(1.0), math.exp(1.5))
        assert mln_joint_sf(v, (1.0, 1.5), chol) == pytest.approx(0.25, abs=1e-12)

    def test_monte_carlo_oracle(self, rng):
        n = 10**7
        eps = rng.standard_normal((n, 2))
        l1 = 1.0 + 0.25 * eps[:, 0]
        l2 = 1.5 + 0.1445 * eps[:, 0] + 0.25 * eps[:, 1]
        hits = np.mean((np.exp(l1) > 3.0) & (np.exp(l2) > 4.0))
        se = math.sqrt(hits * (1 - hits) / n)
        val = mln_joint_sf((3.0, 4.0), (1.0, 1.5), self.CHOL)
        assert abs(val - hits) < 3 * se

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            mln_joint_sf((-1.0, 2.0), (1.0, 1.5), self.CHOL)

    def test_nonincreasing(self, rng):
        for _ in range(200):
            chol = CholeskyCovariance(rng.uniform(0.1, 1), rng.normal(0, 0.5),
                                      rng.uniform(0.1, 1))
            mu = rng.normal(size=2)
            v = rng.uniform(0.1, 10, size=2)
            base = mln_joint_sf(v, mu, chol)
            assert mln_joint_sf(v + [0.1, 0.0], mu, chol) <= base + 1e-12
            assert mln_joint_sf(v + [0.0, 0.1], mu, chol) <= base + 1e-12


class TestConditionalLognormal:
    def test_appendix_example(self):
        mu_c, var_c = conditional_lognormal((0.0, 0.0), [[1.0, 0.5], [0.5, 1.0]], 2, math.e)
        assert mu_c == pytest.approx(0.5, abs=1e-14)
        assert var_c == pytest.approx(0.75, abs=1e-14)

    def test_independence(self):
        mu_c, var_c = conditional_lognormal((0.3, -0.2), [[0.5, 0.0], [0.0, 0.9]], 2, 7.7)
        assert mu_c == pytest.approx(0.3)
        assert var_c == pytest.approx(0.5)

    def test_conditioning_at_median(self):
        mu_c, _ = conditional_lognormal((0.3, 1.1), [[0.5, 0.2], [0.2, 0.9]], 2, math.exp(1.1))
        assert mu_c == pytest.approx(0.3, abs=1e-14)

    def test_information_never_hurts(self, rng):
        # conditioning on one component can only shrink the other's variance
        for _ in range(100):
            a, b = rng.uniform(0.1, 2, size=2)
            c = rng.uniform(-1, 1) * math.sqrt(a * b) * 0.99
            _, var_given_1 = conditional_lognormal((0, 0), [[a, c], [c, b]], 1, 2.0)
            _, var_given_2 = conditional_lognormal((0, 0), [[a, c], [c, b]], 2, 2.0)
            assert var_given_1 <= b + 1e-12
            assert var_given_2 <= a + 1e-12

    def test_singular_rejected(self):
        with pytest.raises(ValueError):
            conditional_lognormal((0, 0), [[1.0, 1.0], [1.0, 1.0]], 1, 2.0)

    def test_monte_carlo_moments(self, rng):
        # conditional moments of log y1 given y2 in a tight slice
        mu = (0.4, 1.2)
        sigma = np.array([[0.3, 0.12], [0.12, 0.5]])
        n = 10**6
        ch = np.linalg.cholesky(sigma)
        logy = mu + rng.standard_normal((n, 2)) @ ch.T
        y2_star = math.exp(1.0)
        width = 0.01
        sel = np.abs(logy[:, 1] - 1.0) < width
        mu_c, var_c = conditional_lognormal(mu, sigma, 2, y2_star)
        m = logy[sel, 0]
        se_mean = m.std(ddof=1) / math.sqrt(sel.sum())
        assert abs(m.mean() - mu_c) < 3 * se_mean + 0.01  # slice-width bias allowance
        assert m.var(ddof=1) == pytest.approx(var_c, rel=0.05)


class TestGumbelCopula:
    def test_independence(self):
        assert gumbel_cdf(0.5, 0.5, 1.0) == 0.25

    def test_boundary(self):
        assert gumbel_cdf(1.0, 0.7, 2.5) == pytest.approx(0.7, abs=1e-15)
        assert gumbel_cdf(0.0, 0.7, 2.5) == 0.0
        assert gumbel_cdf(1.0, 1.0, 3.0) == 1.0

    def test_closed_form_point(self):
        # exp(-sqrt(2) ln 2) = 2^(-sqrt 2)
        assert gumbel_cdf(0.5, 0.5, 2.0) == pytest.approx(0.375214227246481774, abs=1e-15)

    def test_alpha_below_one_rejected(self):
        with pytest.raises(ValueError):
            gumbel_cdf(0.5, 0.5, 0.99)
        with pytest.raises(ValueError):
            GumbelParam(0.5)

    def test_huge_alpha_comonotone(self):
        # alpha -> inf approaches min(u1, u2)
        assert gumbel_cdf(0.3, 0.8, 1e6) == pytest.approx(0.3, abs=1e-4)

    @given(st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.floats(1.0, 20.0))
    @settings(max_examples=80, deadline=None)
    def test_frechet_bounds(self, u1, u2, alpha):
        c = gumbel_cdf(u1, u2, alpha)
        assert max(u1 + u2 - 1.0, 0.0) - 1e-12 <= c <= min(u1, u2) + 1e-12

    @given(st.floats(0.02, 0.95), st.floats(0.02, 0.95),
           st.floats(0.01, 0.04), st.floats(0.01, 0.04), st.floats(1.0, 15.0))
    @settings(max_examples=80, deadline=None)
    def test_two_increasing(self, u1, u2, d1, d2, alpha):
        rect = (gumbel_cdf(u1 + d1, u2 + d2, alpha) - gumbel_cdf(u1, u2 + d2, alpha)
                - gumbel_cdf(u1 + d1, u2, alpha) + gumbel_cdf(u1, u2, alpha))
        assert rect >= -1e-12

    def test_uniform_margins(self):
        u = np.linspace(0.05, 0.95, 19)
        np.testing.assert_allclose(gumbel_cdf(u, np.ones_like(u), 2.7), u, atol=1e-12)


class TestGumbelPartial:
    def test_independence_reduces(self):
        assert gumbel_partial(0.3, 0.6, 1.0) == pytest.approx(0.6, abs=1e-15)

    def test_finite_difference_oracle(self, rng):
        for _ in range(50):
            u1, u2 = rng.uniform(0.05, 0.95, size=2)
            alpha = rng.uniform(1.01, 8.0)
            h = 1e-6
            fd = (gumbel_cdf(u1 + h, u2, alpha) - gumbel_cdf(u1 - h, u2, alpha)) / (2 * h)
            assert gumbel_partial(u1, u2, alpha) == pytest.approx(fd, abs=1e-6)

    def test_reference_point(self):
        h = 1e-6
        fd = (gumbel_cdf(0.5 + h, 0.5, 2.0) - gumbel_cdf(0.5 - h, 0.5, 2.0)) / (2 * h)
        assert gumbel_partial(0.5, 0.5, 2.0) == pytest.approx(fd, abs=1e-6)

    def test_range(self, rng):
        u1 = rng.uniform(0.01, 0.99, size=200)
        u2 = rng.uniform(0.01, 0.99, size=200)
        vals = gumbel_partial(u1, u2, 3.3)
        assert np.all((vals >= 0) & (vals <= 1))

    def test_boundary_rejected(self):
        with pytest.raises(ValueError):
            gumbel_partial(0.0, 0.5, 2.0)
        with pytest.raises(ValueError):
            gumbel_partial(0.5, 1.0, 2.0)

    def test_logpdf_matches_numeric_mixed_partial(self):
        u1, u2, alpha = 0.42, 0.63, 1.9
        h = 1e-5
        mixed = (gumbel_cdf(u1 + h, u2 + h, alpha) - gumbel_cdf(u1 + h, u2 - h, alpha)
                 - gumbel_cdf(u1 - h, u2 + h, alpha)
                 + gumbel_cdf(u1 - h, u2 - h, alpha)) / (4 * h * h)
        assert math.exp(gumbel_logpdf(u1, u2, alpha)) == pytest.approx(mixed, rel=1e-4)


class TestKendallTau:
    @pytest.mark.parametrize("eta,target", [(0.0, 0.0), (0.0443, 0.11),
                                            (0.1445, 0.33), (0.299, 0.55)])
    def test_mln_sweep(self, eta, target):
        assert kendall_tau_mln(CholeskyCovariance(0.25, eta, 0.25)) == pytest.approx(
            target, abs=0.01)

    @pytest.mark.parametrize("alpha,target", [(1.0, 0.0), (1.12, 0.11),
                                              (1.5, 0.33), (2.22, 0.55)])
    def test_gumbel_sweep(self, alpha, target):
        assert kendall_tau_gumbel(alpha) == pytest.approx(target, abs=0.01)

    def test_sign_follows_eta(self):
        assert kendall_tau_mln(CholeskyCovariance(0.3, -0.2, 0.25)) < 0
        assert kendall_tau_mln(CholeskyCovariance(0.3, 0.2, 0.25)) > 0

    def test_rank_correlation_monte_carlo(self, rng):
        from carp.model import make_model
        from carp.simulate import sample_gaps

        n = 10**6
        cop = make_model("copula", [1.0, 1.5, 0.25, 0.25, 1.5, 0, 0, 0, 0])
        w = sample_gaps(cop, (0, 0), n, rng)
        tau_hat = stats.kendalltau(w[:, 0], w[:, 1]).statistic
        assert abs(tau_hat - kendall_tau_gumbel(1.5)) < 0.01

        mln = make_model("mln", [1.0, 1.5, 0.25, 0.25, 0.1445, 0, 0, 0, 0])
        w = sample_gaps(mln, (0, 0), n, rng)
        tau_hat = stats.kendalltau(w[:, 0], w[:, 1]).statistic
        assert abs(tau_hat - kendall_tau_mln(CholeskyCovariance(0.25, 0.1445, 0.25))) < 0.01


class TestLognormalMarginal:
    def test_against_scipy(self):
        m = LognormalMarginal(1.2, 0.4)
        ref = stats.lognorm(s=0.4, scale=math.exp(1.2))
        v = np.array([0.5, 2.0, 5.0, 20.0])
        np.testing.assert_allclose(m.cdf(v), ref.cdf(v), atol=1e-12)
        np.testing.assert_allclose(m.pdf(v), ref.pdf(v), atol=1e-12)
        np.testing.assert_allclose(m.sf(v), ref.sf(v), atol=1e-12)
        np.testing.assert_allclose(m.ppf([0.1, 0.5, 0.9]), ref.ppf([0.1, 0.5, 0.9]),
                                   rtol=1e-10)

    def test_zero_and_negative(self):
        m = LognormalMarginal(0.0, 1.0)
        assert m.pdf(0.0) == 0.0
        assert m.cdf(0.0) == 0.0
        assert m.sf(-1.0) == 1.0

    def test_invalid_scale(self):
        with pytest.raises(ValueError):
            LognormalMarginal(0.0, 0.0)


class TestCholeskyCovariance:
    def test_positive_definite_for_any_eta(self, rng):
        for _ in range(100):
            chol = CholeskyCovariance(rng.uniform(0.05, 2), rng.normal(0, 2),
                                      rng.uniform(0.05, 2))
            eig = np.linalg.eigvalsh(chol.sigma_matrix)
            assert np.all(eig > 0)

    def test_rho_formula(self):
        chol = CholeskyCovariance(0.5, 0.3, 0.4)
        assert chol.rho == pytest.approx(0.3 / math.hypot(0.3, 0.4))
        assert chol.marginal_sds[1] == pytest.approx(math.hypot(0.3, 0.4))

    def test_invalid_scales(self):
        with pytest.raises(ValueError):
            CholeskyCovariance(0.0, 0.1, 0.5)
