import math

import numpy as np
import pytest

from conftest import OU, TWO_IMPACTS, design_data
from pointimpact.detection import (
    CandidateList,
    DetectionConfig,
    default_cutoff,
    default_delta,
    detect,
    detect_candidates,
    estimate_kappa,
    exclusion_radius,
    statistic_profile,
    threshold_select,
    window_steps,
    z_delta,
)
from pointimpact.errors import DataError, NumericalDegeneracyError, WindowError
from pointimpact.evaluation import match_impacts
from pointimpact.fpca import center
from pointimpact.gp_sim import FunctionalDataset, Grid, ProcessSpec, covariance_eval, simulate, simulate_ou
from pointimpact.model_sim import ImpactModelSpec, QuadratureRule, SlopeFunction, generate_response


def candidates_from(stats):
    stats = np.asarray(stats, dtype=float)
    m = stats.size
    return CandidateList(np.linspace(0.1, 0.9, m), np.arange(m), stats, stats, 0.01, 1, 0.05)


class TestZDelta:
    def test_affine(self):
        g = Grid(0, 1, 101)
        X = FunctionalDataset(g, np.vstack([2.0 + 3.0 * g.points, -1.0 + 0.5 * g.points, np.full(101, 7.0)]))
        Z, idx = z_delta(X, 0.05)
        assert np.max(np.abs(Z)) <= 1e-14

    def test_square(self):
        g = Grid(0, 1, 101)
        X = FunctionalDataset(g, (g.points**2)[None, :])
        Z, idx = z_delta(X, 0.05)
        delta = 5 * g.h
        np.testing.assert_allclose(Z, -(delta**2), rtol=1e-9)
        assert idx[0] == 5 and idx[-1] == 95

    def test_bm_variance(self):
        g = Grid(0, 1, 101)
        delta = 0.02
        X = simulate(20000, g, ProcessSpec.brownian(), 11)
        Z, idx = z_delta(X, delta)
        # independent oracle: quadratic form of the weights (-1/2, 1, -1/2) on min(t, s)
        c = np.array([-0.5, 1.0, -0.5])
        for j in (10, 50, 90):
            t = g.points[j]
            pts = np.array([t - delta, t, t + delta])
            S = covariance_eval(ProcessSpec.brownian(), pts[:, None], pts[None, :])
            assert c @ S @ c == pytest.approx(delta / 2, rel=1e-12)
        v = Z.var(axis=0, ddof=1)
        assert np.max(np.abs(v / (delta / 2) - 1)) <= 0.05

    def test_linearity(self):
        g = Grid(0, 1, 201)
        A = simulate_ou(7, g, 5, 3.5, 1)
        B = simulate_ou(7, g, 5, 3.5, 2)
        Za, _ = z_delta(A, 0.03)
        Zb, _ = z_delta(B, 0.03)
        Zab, _ = z_delta(FunctionalDataset(g, 2.0 * A.curves - 0.5 * B.curves), 0.03)
        np.testing.assert_allclose(Zab, 2.0 * Za - 0.5 * Zb, rtol=0, atol=1e-13)

    def test_window_errors(self):
        g = Grid(0, 1, 11)
        X = FunctionalDataset(g, np.zeros((2, 11)))
        with pytest.raises(WindowError):
            z_delta(X, 0.5)
        with pytest.raises(WindowError):
            z_delta(X, 0.0)
        assert window_steps(g, 0.01) == 1  # rounds up to the minimum

    def test_default_delta(self):
        assert default_delta(100) == pytest.approx(0.1)
        assert default_delta(400, length=2.0, C=0.5) == pytest.approx(0.05)


class TestCandidates:
    def test_y_zero(self):
        data, _, _ = design_data(n=50, p=201)
        data = data.with_responses(np.zeros(50))
        cfg = DetectionConfig(0.05)
        c = detect_candidates(data, cfg)
        assert np.all(c.raw == 0) and np.all(c.normalized == 0)
        assert c.indices[0] == window_steps(data.grid, 0.05)
        res = detect(data, cfg)
        assert res.threshold.S_hat == 0

    def test_needs_response_and_centering(self):
        X = simulate_ou(10, Grid(0, 1, 101), 5, 3.5, 1)
        with pytest.raises(DataError, match="response column required"):
            detect_candidates(X, DetectionConfig(0.05))
        with pytest.raises(DataError, match="centered"):
            detect_candidates(X.with_responses(np.ones(10)), DetectionConfig(0.05))

    @pytest.mark.parametrize("exclusion", ["sqrt", "dlogd"])
    def test_separation_and_order(self, ou_design, exclusion):
        cfg = DetectionConfig(default_delta(ou_design.n), exclusion=exclusion)
        c = detect_candidates(ou_design, cfg)
        r = exclusion_radius(c.delta, exclusion)
        assert c.radius == r
        d = np.abs(c.locations[:, None] - c.locations[None, :])
        assert np.all(d[~np.eye(len(c), dtype=bool)] >= r)
        assert np.all(np.diff(np.abs(c.raw)) <= 0)

    def test_default_cap(self, ou_design):
        c = detect_candidates(ou_design, DetectionConfig(0.04, max_candidates=None))
        assert len(c) <= math.floor(1.0 / (math.sqrt(c.delta) / 2))
        assert len(detect_candidates(ou_design, DetectionConfig(0.04, max_candidates=3))) == 3

    def test_leading_candidates_near_truth(self, ou_design):
        c = detect_candidates(ou_design, DetectionConfig(default_delta(ou_design.n)))
        assert sorted(np.round(c.locations[:2], 1)) == [0.2, 0.8] or max(
            min(abs(c.locations[:2] - 0.25)), min(abs(c.locations[:2] - 0.75))
        ) <= 0.05

    def test_scaling_invariance(self, ou_design):
        cfg = DetectionConfig(default_delta(ou_design.n))
        base = detect(ou_design, cfg)
        ys = detect(ou_design.with_responses(3.7 * ou_design.responses), cfg)
        assert np.array_equal(ys.candidates.locations, base.candidates.locations)
        assert ys.threshold.S_hat == base.threshold.S_hat
        assert ys.cutoff_lambda == pytest.approx(3.7 * base.cutoff_lambda, rel=1e-12)
        X3 = FunctionalDataset(ou_design.grid, 2.9 * ou_design.curves, ou_design.responses, centered=True)
        xs = detect(X3, cfg)
        assert np.array_equal(xs.candidates.locations, base.candidates.locations)
        np.testing.assert_allclose(xs.candidates.normalized, base.candidates.normalized, rtol=1e-10)
        assert xs.threshold.S_hat == base.threshold.S_hat
        assert xs.kappa_hat == pytest.approx(base.kappa_hat, abs=1e-12)

    def test_profile(self, ou_design):
        t, s = statistic_profile(ou_design, 0.05)
        c = detect_candidates(ou_design, DetectionConfig(0.05))
        assert s.max() == pytest.approx(abs(c.raw[0]))
        assert t[np.argmax(s)] == c.locations[0]

    def test_to_dict(self, ou_design):
        d = detect(ou_design, DetectionConfig(0.05)).to_dict()
        assert d["candidates"][0]["iteration"] == 1
        assert d["delta"] == pytest.approx(0.05)


class TestCutoff:
    def test_example(self):
        z = np.random.default_rng(0).standard_normal(100)
        y = (z - z.mean()) / z.std(ddof=1)
        assert default_cutoff(y, math.exp(-1)) == pytest.approx(0.2, rel=1e-12)

    def test_homogeneity(self):
        y = np.random.default_rng(1).standard_normal(40)
        assert default_cutoff(5 * y, 0.1) == pytest.approx(5 * default_cutoff(y, 0.1))

    def test_window_error(self):
        with pytest.raises(WindowError):
            default_cutoff(np.arange(5.0), 1.0)

    def test_threshold_examples(self):
        r = threshold_select(candidates_from([5.0, 3.2, 0.1, 0.05]), 1.0)
        assert r.S_hat == 2 and r.crossed
        r = threshold_select(candidates_from([0.5, 0.2]), 1.0)
        assert r.S_hat == 0 and r.locations.size == 0
        r = threshold_select(candidates_from([5.0, 4.0]), 1.0)
        assert r.S_hat == 2 and not r.crossed

    def test_config_validation(self):
        with pytest.raises(DataError):
            DetectionConfig(0.1, cutoff_A=1.4)
        with pytest.raises(DataError):
            DetectionConfig(0.1, exclusion="box")


class TestKappa:
    def test_ratio_four(self):
        g = Grid(0, 1, 11)
        x = np.zeros(11)
        x[5], x[1] = 1.0, -2.0
        assert estimate_kappa(FunctionalDataset(g, x[None, :]), 0.4) == pytest.approx(2.0, abs=1e-12)

    def test_bm(self):
        g = Grid(0, 1, 2001)
        X = simulate(2000, g, ProcessSpec.brownian(), 3)
        assert 0.95 <= estimate_kappa(X, 20 * g.h) <= 1.05

    def test_scale_invariance(self):
        X = simulate_ou(50, Grid(0, 1, 301), 5, 3.5, 4)
        k1 = estimate_kappa(X, 0.04)
        k2 = estimate_kappa(FunctionalDataset(X.grid, 7.0 * X.curves), 0.04)
        assert k2 == pytest.approx(k1, abs=1e-12)

    def test_degenerate(self):
        g = Grid(0, 1, 101)
        with pytest.raises(NumericalDegeneracyError):
            estimate_kappa(FunctionalDataset(g, np.outer(np.ones(3), g.points)), 0.04)


@pytest.mark.slow
def test_single_impact_rate():
    # 200 replications, n=5000, delta = n^{-1/2}; pass if |tau_hat - 0.5| <= 0.01 in 95%
    g = Grid(0, 1, 1001)
    rule = QuadratureRule.trapezoid(g)
    model = ImpactModelSpec((0.5,), (3.0,), SlopeFunction.zero(), 1.0)
    n = 5000
    cfg = DetectionConfig(default_delta(n), max_candidates=1)
    hits = 0
    for rep in range(200):
        X = simulate_ou(n, g, 5.0, 3.5, 50_000 + rep)
        y = generate_response(X, model, rule, 60_000 + rep)
        data, _, _ = center(X.with_responses(y))
        hits += abs(detect_candidates(data, cfg).locations[0] - 0.5) <= 0.01
    assert hits >= 190


@pytest.mark.slow
def test_location_gap_shrinks():
    # median over 100 replications of (1/n) sum_i (X_i(tau_r) - X_i(tau_hat_r))^2
    g = Grid(0, 1, 1001)
    rule = QuadratureRule.trapezoid(g)
    medians = []
    for n in (250, 1000, 4000):
        gaps = []
        for rep in range(100):
            X = simulate_ou(n, g, 5.0, 3.5, 70_000 + 1000 * rep + n)
            y = generate_response(X, TWO_IMPACTS, rule, 80_000 + 1000 * rep + n)
            data, _, _ = center(X.with_responses(y))
            c = detect_candidates(data, DetectionConfig(default_delta(n), max_candidates=2))
            m = match_impacts(TWO_IMPACTS.taus, c.locations)
            # unmatched impacts are left out of the median
            for t, th in zip(TWO_IMPACTS.taus, m):
                if th is not None:
                    gaps.append(np.mean((X.curves[:, g.index_of(t)] - X.curves[:, g.index_of(th)]) ** 2))
        medians.append(np.nanmedian(gaps))
    assert medians[0] > medians[1] > medians[2]
