import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from pointimpact.errors import InvalidSpecError, NumericalDegeneracyError
from pointimpact.gp_sim import (
    FunctionalDataset,
    Grid,
    ProcessSpec,
    covariance_eval,
    covariance_matrix,
    process_kappa_c,
    simulate_from_covariance,
    simulate_ou,
)


def ou_cov_by_quadrature(theta, sigma_u, t, s):
    # Cov(X_t, X_s) of dX = -theta X dt + sigma_u dW, X_0 = 0, as an Ito isometry integral
    f = lambda u: sigma_u**2 * math.exp(-theta * (t - u)) * math.exp(-theta * (s - u))
    return integrate.quad(f, 0.0, min(t, s), epsabs=1e-13, epsrel=1e-13)[0]


class TestGrid:
    def test_points_and_spacing(self):
        g = Grid(0.0, 1.0, 11)
        assert g.h == pytest.approx(0.1)
        np.testing.assert_allclose(g.points, np.linspace(0, 1, 11), atol=1e-15)

    @pytest.mark.parametrize("a,b,p", [(1.0, 1.0, 10), (0.0, 1.0, 2), (2.0, 1.0, 5), (0.0, 1.0, 3.5)])
    def test_invalid(self, a, b, p):
        with pytest.raises(InvalidSpecError):
            Grid(a, b, p)

    def test_from_points_rejects_uneven(self):
        with pytest.raises(InvalidSpecError):
            Grid.from_points([0.0, 0.1, 0.3, 0.4])


class TestCovariance:
    def test_fbm_half_is_min(self):
        assert covariance_eval(ProcessSpec.fbm(0.5), 0.3, 0.7) == pytest.approx(0.3, abs=1e-15)

    def test_ou_diagonal(self):
        spec = ProcessSpec.ou(5.0, 3.5)
        expected = ou_cov_by_quadrature(5.0, 3.5, 0.5, 0.5)
        assert expected == pytest.approx(1.216746, abs=1e-6)
        assert covariance_eval(spec, 0.5, 0.5) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("t,s", [(0.2, 0.7), (0.9, 0.1), (0.45, 0.5)])
    def test_ou_off_diagonal_against_quadrature(self, t, s):
        spec = ProcessSpec.ou(5.0, 3.5)
        assert covariance_eval(spec, t, s) == pytest.approx(ou_cov_by_quadrature(5.0, 3.5, t, s), rel=1e-10)

    @pytest.mark.parametrize("s", [0.0, 0.3, 1.0])
    def test_ou_starts_at_zero(self, s):
        assert covariance_eval(ProcessSpec.ou(5.0, 3.5), 0.0, s) == 0.0

    @pytest.mark.parametrize("spec", [ProcessSpec.brownian(), ProcessSpec.fbm(0.25), ProcessSpec.fbm(0.8), ProcessSpec.ou(5, 3.5)])
    def test_symmetric_on_grid(self, spec):
        g = Grid(0.0, 1.0, 51)
        t = g.points
        C = covariance_eval(spec, t[:, None], t[None, :])
        assert np.array_equal(C, C.T)
        assert np.array_equal(covariance_matrix(spec, g), covariance_matrix(spec, g).T)

    def test_fbm_half_matches_bm_on_grid(self):
        t = Grid(0.0, 1.0, 101).points
        C1 = covariance_eval(ProcessSpec.fbm(0.5), t[:, None], t[None, :])
        C2 = covariance_eval(ProcessSpec.brownian(), t[:, None], t[None, :])
        assert np.max(np.abs(C1 - C2)) <= 1e-12

    @pytest.mark.parametrize("kwargs", [dict(kind="fbm", hurst=1.0), dict(kind="fbm", hurst=0.0), dict(kind="ou", theta=0.0, sigma_u=1.0),
                                        dict(kind="ou", theta=1.0, sigma_u=-1.0), dict(kind="xyz")])
    def test_invalid_spec(self, kwargs):
        with pytest.raises(InvalidSpecError):
            ProcessSpec(**kwargs)


class TestKappa:
    def test_fbm(self):
        kappa, c = process_kappa_c(ProcessSpec.fbm(0.25))
        assert kappa == 0.5 and c(0.3) == 0.5

    def test_ou(self):
        kappa, c = process_kappa_c(ProcessSpec.ou(5.0, 3.5))
        assert kappa == 1.0 and c(0.7) == pytest.approx(6.125)

    def test_bm_special_case(self):
        assert process_kappa_c(ProcessSpec.fbm(0.5))[0] == 1.0
        assert process_kappa_c(ProcessSpec.brownian())[0] == 1.0

    @pytest.mark.parametrize("spec", [ProcessSpec.fbm(0.3), ProcessSpec.ou(2.0, 1.5), ProcessSpec.brownian()])
    def test_diagonal_expansion(self, spec):
        # sigma(t, t) - sigma(t, t + d) ~ c d^kappa + smooth terms; check the rough part dominates
        kappa, c = process_kappa_c(spec)
        t = 0.5
        d = 1e-6
        lhs = covariance_eval(spec, t, t) - 0.5 * (covariance_eval(spec, t, t + d) + covariance_eval(spec, t, t - d))
        assert lhs / d**kappa == pytest.approx(c(t), rel=1e-3)


def _empirical_cov_bound(X, C):
    n = X.shape[0]
    emp = X.T @ X / n
    maxvar = np.max(np.diag(C))
    return np.max(np.abs(emp - C)), 5 * math.sqrt(maxvar**2 / n)


class TestSimulateOU:
    def test_starts_at_zero(self):
        X = simulate_ou(10, Grid(0, 1, 101), 5.0, 3.5, 1)
        assert np.all(X.curves[:, 0] == 0.0)

    def test_degenerate_noise(self):
        X = simulate_ou(5, Grid(0, 1, 101), 5.0, 1e-12, 1)
        assert np.max(np.abs(X.curves)) < 1e-10

    def test_marginal_variance(self):
        X = simulate_ou(20000, Grid(0, 1, 101), 5.0, 3.5, 11)
        v = X.curves[:, 50]
        target = 1.216746
        se = target * math.sqrt(2 / (v.size - 1))
        assert abs(np.mean(v**2) - target) < 3 * se

    def test_empirical_covariance(self):
        g = Grid(0, 1, 51)
        X = simulate_ou(20000, g, 5.0, 3.5, 3)
        dev, bound = _empirical_cov_bound(X.curves, covariance_matrix(ProcessSpec.ou(5, 3.5), g))
        assert dev < bound

    def test_positive_start(self):
        g = Grid(0.5, 1.0, 26)
        X = simulate_ou(20000, g, 5.0, 3.5, 4)
        dev, bound = _empirical_cov_bound(X.curves, covariance_matrix(ProcessSpec.ou(5, 3.5), g))
        assert dev < bound

    def test_rows_independent_of_n(self):
        g = Grid(0, 1, 101)
        a = simulate_ou(3, g, 5.0, 3.5, 9).curves
        b = simulate_ou(8, g, 5.0, 3.5, 9).curves
        assert np.array_equal(a, b[:3])


class TestSimulateFromCovariance:
    def test_bm_covariance(self):
        g = Grid(0, 1, 51)
        X = simulate_from_covariance(20000, g, ProcessSpec.fbm(0.5), 5)
        dev, bound = _empirical_cov_bound(X.curves, covariance_matrix(ProcessSpec.brownian(), g))
        assert dev < bound

    def test_fbm_quarter_pair(self):
        g = Grid(0, 1, 101)
        X = simulate_from_covariance(20000, g, ProcessSpec.fbm(0.25), 6)
        prod = X.curves[:, 50] * X.curves[:, 25]
        target = 0.5 * (0.5**0.5 + 0.25**0.5 - 0.25**0.5)
        assert target == pytest.approx(0.353553, abs=1e-6)
        assert abs(prod.mean() - target) < 3 * prod.std(ddof=1) / math.sqrt(prod.size)

    @pytest.mark.parametrize("spec", [ProcessSpec.brownian(), ProcessSpec.fbm(0.25), ProcessSpec.fbm(0.75), ProcessSpec.ou(5, 3.5)])
    def test_empirical_covariance(self, spec):
        g = Grid(0, 1, 51)
        X = simulate_from_covariance(20000, g, spec, 8)
        dev, bound = _empirical_cov_bound(X.curves, covariance_matrix(spec, g))
        assert dev < bound

    def test_single_curve_reproducible(self):
        g = Grid(0, 1, 101)
        a = simulate_from_covariance(1, g, ProcessSpec.fbm(0.3), 123)
        b = simulate_from_covariance(1, g, ProcessSpec.fbm(0.3), 123)
        assert a.curves.shape == (1, 101) and np.all(np.isfinite(a.curves))
        assert np.array_equal(a.curves, b.curves)

    def test_same_distribution_as_ou_recursion(self):
        g = Grid(0, 1, 51)
        a = simulate_ou(5000, g, 5.0, 3.5, 21).curves[:, 25]
        b = simulate_from_covariance(5000, g, ProcessSpec.ou(5.0, 3.5), 22).curves[:, 25]
        res = stats.ks_2samp(a, b)
        # recorded for seeds (21, 22): p = 0.644
        assert res.pvalue > 0.01

    def test_negative_domain_rejected(self):
        with pytest.raises(InvalidSpecError):
            simulate_from_covariance(2, Grid(-1, 1, 11), ProcessSpec.fbm(0.3), 1)

    def test_factorization_failure_names_pivot(self, monkeypatch):
        from pointimpact import gp_sim

        g = Grid(0, 1, 5)
        indefinite = np.eye(4)
        indefinite[0, 1] = indefinite[1, 0] = 2.0
        monkeypatch.setattr(gp_sim, "covariance_matrix", lambda spec, grid: np.pad(indefinite, ((1, 0), (1, 0))))
        with pytest.warns(RuntimeWarning), pytest.raises(NumericalDegeneracyError, match="pivot 2"):
            simulate_from_covariance(2, g, ProcessSpec.brownian(), 1)


@settings(max_examples=50, deadline=None)
@given(
    t=st.floats(0, 1), s=st.floats(0, 1), h=st.floats(0.05, 0.95),
    theta=st.floats(0.1, 10), sig=st.floats(0.1, 5),
)
def test_covariance_symmetry_property(t, s, h, theta, sig):
    for spec in (ProcessSpec.brownian(), ProcessSpec.fbm(h), ProcessSpec.ou(theta, sig)):
        assert covariance_eval(spec, t, s) == covariance_eval(spec, s, t)


class TestDataset:
    def test_rejects_nonfinite(self):
        with pytest.raises(InvalidSpecError):
            FunctionalDataset(Grid(0, 1, 3), np.array([[0.0, np.nan, 1.0]]))

    def test_immutable(self):
        d = FunctionalDataset(Grid(0, 1, 3), np.zeros((2, 3)), np.zeros(2))
        with pytest.raises(ValueError):
            d.curves[0, 0] = 1.0
