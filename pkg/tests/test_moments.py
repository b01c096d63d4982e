import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mixed_sde_lab.errors import DomainError, ShapeError
from mixed_sde_lab.models import constant_model, get_model
from mixed_sde_lab.moments import (
    J_statistic,
    alpha_max,
    batch_report,
    estimate_exp_moment,
    fernique_check,
    log_tail_slope,
    simulate_fbm_holder_norms,
    simulate_integral_norms,
    simulate_sup_norms,
    tail_bound,
    tail_gaussianity_check,
)
from mixed_sde_lab.paths import holder_seminorm, sample_fbm, sample_wiener
from mixed_sde_lab.sde import solve_mixed
from mixed_sde_lab.young import young_integral_path


class TestAlphaMax:
    def test_values(self):
        assert alpha_max(0.75) == pytest.approx(1.2)
        assert alpha_max(0.9) == pytest.approx(36 / 28)
        assert alpha_max(0.500001) == pytest.approx(1.000001, abs=1e-9)
        with pytest.raises(DomainError):
            alpha_max(0.5)


class TestExpMoment:
    def test_trivial(self):
        assert estimate_exp_moment(np.zeros(100), 2.0, 1.0).pooled == 1.0
        r = estimate_exp_moment(np.linspace(0, 5, 100), 0.0, 1.0)
        assert r.pooled == 1.0 and r.spread == 0.0

    def test_preconditions(self):
        with pytest.raises(DomainError):
            estimate_exp_moment(np.ones(10), 1.0, 1.2, H=0.75)
        with pytest.raises(DomainError):
            estimate_exp_moment(np.ones(10), -1.0, 1.0)
        with pytest.raises(DomainError):
            estimate_exp_moment(np.ones(10), 1.0, 0.5, batches=11)

    def test_overflow_counted(self):
        r = estimate_exp_moment(np.array([1.0, 1e4, 2.0, 3.0]), 1.0, 1.0, batches=2)
        assert r.overflow == 1 and r.spread == np.inf

    @given(st.lists(st.floats(1.0, 20.0), min_size=4, max_size=50), st.floats(0, 1), st.floats(0, 1),
           st.floats(0.1, 1.1), st.floats(0.1, 1.1))
    def test_monotone(self, xs, z1, z2, a1, a2):
        s = np.array(xs)
        z_lo, z_hi = sorted([z1, z2])
        a_lo, a_hi = sorted([a1, a2])
        assert estimate_exp_moment(s, z_lo, a_lo).pooled <= estimate_exp_moment(s, z_hi, a_lo).pooled
        assert estimate_exp_moment(s, z_lo, a_lo).pooled <= estimate_exp_moment(s, z_lo, a_hi).pooled

    def test_trig1d_spread(self):
        sups = simulate_sup_norms(get_model("trig1d"), [0.0], H=0.75, T=1.0, N=256, n_paths=20_000, seed=0)
        r = estimate_exp_moment(sups, 1.0, 1.0, batches=4, H=0.75, seed=0)
        assert r.spread < 0.2 and r.overflow == 0

    def test_spread_contraction(self):
        model = get_model("trig1d")
        small = simulate_sup_norms(model, [0.0], H=0.75, T=1.0, N=128, n_paths=4000, seed=1)
        large = simulate_sup_norms(model, [0.0], H=0.75, T=1.0, N=128, n_paths=8000, seed=1)
        s1 = estimate_exp_moment(small, 1.0, 0.9, 4).spread
        s2 = estimate_exp_moment(large, 1.0, 0.9, 4).spread
        assert s2 <= 1.5 * s1

    def test_report_io(self, tmp_path):
        r = batch_report("x", np.arange(10.0), 3, seed=4, params={"k": 1})
        assert r.batch_counts == [4, 3, 3] and r.pooled == 4.5
        d = json.loads(r.to_json(tmp_path / "r.json"))
        assert d["pooled"] == 4.5 and json.loads((tmp_path / "r.json").read_text()) == d
        r.to_csv(tmp_path / "r.csv")
        assert (tmp_path / "r.csv").read_text().splitlines()[-1] == "pooled,4.5,10"

    def test_reproducible(self):
        model = get_model("tanh2d")
        a = simulate_sup_norms(model, [0.0, 0.0], H=0.7, T=1.0, N=64, n_paths=50, seed=3)
        b = simulate_sup_norms(model, [0.0, 0.0], H=0.7, T=1.0, N=64, n_paths=50, seed=3)
        assert np.array_equal(a, b)
        assert estimate_exp_moment(a, 1, 1).to_json() == estimate_exp_moment(b, 1, 1).to_json()


class TestTail:
    def test_zero_integrand(self):
        norms = simulate_integral_norms(0.0, 0.4, 1.0, 64, 100, seed=0)
        rep = tail_gaussianity_check(norms, 0.0, 0.4, 1.0, [0.5, 1.0])
        assert np.all(norms == 0) and all(r.empirical == 0 for r in rep.rows) and rep.satisfied

    def test_vacuous_point(self):
        A, k, t = 1.3, 0.3, 2.0
        x = np.sqrt(2 * A ** 2 * t ** (1 - 2 * k) * np.log(4))
        assert tail_bound(x, A, k, t) == pytest.approx(1.0)

    def test_scaling(self):
        n1 = simulate_integral_norms(1.0, 0.4, 1.0, 64, 20, seed=2)
        n2 = simulate_integral_norms(2.5, 0.4, 1.0, 64, 20, seed=2)
        assert np.allclose(n2, 2.5 * n1)
        W = sample_wiener(64, 1.0, 1, seed=0)
        assert holder_seminorm(W, 0.4) > 0

    def test_monotone_and_satisfied(self):
        norms = simulate_integral_norms(1.0, 0.4, 1.0, 256, 4000, seed=1)
        xs = np.linspace(0.1, 3.0, 15)
        rep = tail_gaussianity_check(norms, 1.0, 0.4, 1.0, xs)
        emp = [r.empirical for r in rep.rows]
        bnd = [r.bound for r in rep.rows]
        assert all(b <= a for a, b in zip(emp, emp[1:]))
        assert all(b < a for a, b in zip(bnd, bnd[1:]))
        assert rep.satisfied
        assert rep.rows[-1].status in ("ok", "no data")

    def test_kappa_range(self):
        with pytest.raises(DomainError):
            simulate_integral_norms(1.0, 0.5, 1.0, 16, 4, seed=0)
        with pytest.raises(DomainError):
            tail_gaussianity_check(np.ones(4), 1.0, 0.0, 1.0, [1.0])


class TestFernique:
    def test_y_zero(self):
        rep = fernique_check(np.random.default_rng(0).rayleigh(size=500), 1.5, 0.0)
        assert rep.moment.pooled == 1.0

    def test_near_two(self):
        norms = simulate_fbm_holder_norms(0.75, 0.6, 1.0, 128, 4000, seed=0)
        rep = fernique_check(norms, 1.9, 0.05)
        assert np.isfinite(rep.moment.pooled) and np.isfinite(rep.moment.spread)

    def test_negative_slope(self):
        norms = simulate_fbm_holder_norms(0.75, 0.6, 1.0, 256, 10_000, seed=1)
        rep = fernique_check(norms, 1.5, 0.5)
        assert rep.slope < 0 and rep.passed

    def test_slope_of_gaussian(self):
        x = np.abs(np.random.default_rng(2).standard_normal(50_000))
        slope, se, dof = log_tail_slope(x)
        assert slope == pytest.approx(-0.5, abs=0.1) and dof > 0

    def test_ranges(self):
        with pytest.raises(DomainError):
            fernique_check(np.ones(100), 2.0, 1.0)
        with pytest.raises(DomainError):
            simulate_fbm_holder_norms(0.75, 0.8, 1.0, 16, 4, seed=0)


class TestJ:
    def test_b_zero(self):
        model = constant_model([0.1], [[0.0]], [[1.0]])
        W = sample_wiener(128, 1.0, 1, seed=0)
        B = sample_fbm(128, 1.0, 0.75, seed=0)
        assert J_statistic(solve_mixed(model, [0.0], W, B), model, W, 0.4) == 0.0

    def test_b_one(self):
        model = get_model("brownian")
        W = sample_wiener(128, 1.0, 1, seed=1)
        B = sample_fbm(128, 1.0, 0.75, seed=1)
        Y = solve_mixed(model, [0.0], W, B)
        assert J_statistic(Y, model, W, 0.4) == pytest.approx(holder_seminorm(W, 0.4), rel=1e-12)
        assert J_statistic(Y, model, W, 0.4, t=0.5) == pytest.approx(holder_seminorm(W, 0.4, 0, 0.5), rel=1e-12)

    def test_trig1d_cross_module(self):
        model = get_model("trig1d")
        W = sample_wiener(512, 1.0, 1, seed=2)
        B = sample_fbm(512, 1.0, 0.75, seed=2)
        Y = solve_mixed(model, [0.3], W, B)
        I = young_integral_path(model.b(Y.values), W)
        assert J_statistic(Y, model, W, 0.45) == pytest.approx(holder_seminorm(I, 0.45), rel=1e-12)

    def test_errors(self):
        model = get_model("trig1d")
        W = sample_wiener(16, 1.0, 1, seed=0)
        Y = solve_mixed(model, [0.0], W, sample_fbm(16, 1.0, 0.75, seed=0))
        with pytest.raises(DomainError):
            J_statistic(Y, model, W, 0.5)
        with pytest.raises(ShapeError):
            J_statistic(Y, model, sample_wiener(32, 1.0, 1, seed=0), 0.4)
