import math
import warnings

import numpy as np
import pytest

from knnlab.config import ConfigError, KRule, make_config
from knnlab.knn_core import k_schedule
from knnlab.rate_bench import (
    bias_variance_probe,
    bound_terms,
    estimate_risk,
    final_bound_trace,
    fit_slope,
    sweep,
)
from knnlab.smooth_model import catalog, constant

# risk / max(bound terms) peaked at 0.39 in pilot sweeps of kink_p1.5_d1 and
# kink_p1.5_d2 over 2^8..2^14 (sigma 0.5); frozen with 2x headroom
FROZEN_BOUND_CONST = 0.8


def small(name, **kw):
    kw.setdefault("n_grid", (64, 128, 256))
    kw.setdefault("reps", 10)
    kw.setdefault("eval_points", 50)
    kw.setdefault("bootstrap", 20)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return make_config(name, **kw)


def test_noiseless_constant_risk_is_zero():
    cfg = small("constant_d2", sigma=0.0)
    est = estimate_risk(cfg, 256)
    assert est.risk == 0.0
    assert np.all(est.per_rep == 0.0)


def test_global_mean_variance():
    n, sigma = 200, 0.8
    cfg = small("constant_d1", sigma=sigma, reps=2000, eval_points=5)
    est = estimate_risk(cfg, n, k=n)
    assert abs(est.risk - sigma ** 2 / n) <= 3 * est.stderr


def test_one_nn_noiseless_lipschitz_risk_decreases():
    cfg = small("sine_p1.5_d2", sigma=0.0, k_rule=KRule("fixed", 1), reps=20, eval_points=200,
                n_grid=(256, 1024, 4096, 16384))
    risks = [estimate_risk(cfg, n).risk for n in cfg.n_grid]
    assert all(b < a for a, b in zip(risks, risks[1:]))
    assert risks[-1] < risks[0] / 8


def test_infeasible_k():
    cfg = small("constant_d1", sigma=1.0)
    with pytest.raises(ValueError):
        estimate_risk(cfg, 10, k=11)


def test_catalog_miss_is_config_error():
    with pytest.raises(ConfigError):
        make_config("wiggle_p1_d1")


def test_risk_estimate_is_nonnegative_and_reproducible():
    cfg = small("kink_p1.5_d2", sigma=0.5, master_seed=3)
    a = estimate_risk(cfg, 512)
    b = estimate_risk(cfg, 512)
    assert a.risk >= 0
    assert a.per_rep.tobytes() == b.per_rep.tobytes()


def test_workers_do_not_change_results():
    cfg = small("kink_p1.5_d1", sigma=0.5, master_seed=4)
    a = estimate_risk(cfg, 1024)
    b = estimate_risk(cfg.with_(workers=3), 1024)
    assert a.per_rep.tobytes() == b.per_rep.tobytes()
    assert a.risk == b.risk


def test_fit_slope_recovers_power_law():
    ns = np.array([256, 512, 1024, 2048])
    slope, intercept = fit_slope(ns, 3.0 * ns ** -0.75)
    assert slope == pytest.approx(-0.75, abs=1e-12)
    assert intercept == pytest.approx(math.log(3.0), abs=1e-12)
    with pytest.raises(ValueError):
        fit_slope([1, 2], [1, 2])


@pytest.mark.slow
def test_sweep_d1_kink_slope_band():
    cfg = make_config("kink_p1.5_d1", sigma=0.5, master_seed=11)
    res = sweep(cfg)
    assert -0.90 <= res.fit.slope <= -0.60
    assert res.passed
    # risk(n2) < risk(n1) whenever n2 >= 4 n1
    for i, a in enumerate(res.estimates):
        for b in res.estimates[i + 1:]:
            if b.n >= 4 * a.n:
                assert b.risk < a.risk


@pytest.mark.slow
def test_sweep_p1_d2_slope_band():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cfg = make_config("kink_p1_d2", sigma=0.5, master_seed=12)
    res = sweep(cfg)
    assert res.fit.target == -0.5
    assert -0.65 <= res.fit.slope <= -0.35


@pytest.mark.slow
def test_sweep_constant_is_pure_variance_rate():
    cfg = make_config("constant_d1", p=1.5, sigma=0.5, master_seed=13)
    res = sweep(cfg)
    assert abs(res.fit.slope - cfg.target_rate) <= max(0.05, 3 * res.fit.slope_stderr)


@pytest.mark.slow
@pytest.mark.parametrize("name", ["kink_p1.5_d1", "kink_p1.5_d2"])
def test_risk_below_frozen_multiple_of_bound(name):
    cfg = make_config(name, sigma=0.5, master_seed=14, reps=20)
    for n in cfg.n_grid:
        trace = final_bound_trace(cfg, n)
        assert trace.risk <= FROZEN_BOUND_CONST * trace.max_term


def test_sweep_small_runs_and_fits():
    res = sweep(small("kink_p1.5_d1", sigma=0.5))
    assert len(res.estimates) == 3
    assert res.fit.log_n.tolist() == pytest.approx(np.log([64, 128, 256]).tolist())
    assert res.fit.slope_stderr > 0
    assert res.fit.target == -0.75


def test_bound_trace_balance_point_exponents():
    # p = 1.5, d = 1, theorem k: variance, bias and cross terms all decay like n^-3/4;
    # the mid term (1/k)(k/n)^2 decays faster, like n^-5/4
    ns = np.array([2.0 ** 20, 2.0 ** 28])
    terms = np.array([bound_terms(1.0, 1.5, 1, int(n), k_schedule(1.5, 1, int(n))) for n in ns])
    slopes = np.log(terms[1] / terms[0]) / np.log(ns[1] / ns[0])
    np.testing.assert_allclose(slopes[[0, 1, 3]], -0.75, atol=1e-6)
    assert slopes[2] == pytest.approx(-1.25, abs=1e-6)


def test_bound_trace_dominance():
    cfg = small("kink_p1.5_d1", sigma=0.5, k_rule=KRule("exponent", 0.9))
    n = 2 ** 20
    tv, tb, tm, tc = bound_terms(0.5, 1.5, 1, n, cfg.k_for(n))
    assert tb == max(tv, tb, tm, tc)
    tv, tb, tm, tc = bound_terms(0.5, 1.5, 1, n, 1)
    assert tv == 0.25 == max(tv, tb, tm, tc)


def test_final_bound_trace_fields():
    cfg = small("kink_p1.5_d1", sigma=0.5)
    t = final_bound_trace(cfg, 256)
    assert t.k == 64
    assert t.term_variance == 0.25 / 64
    assert t.term_bias_p == pytest.approx(0.25 ** 3)
    assert t.term_mid == pytest.approx(0.25 ** 2 / 64)
    assert t.term_cross == pytest.approx(0.25 ** 3)
    assert t.dominant == "bias_p"


def test_probe_noiseless():
    xs = np.random.default_rng(0).random((100, 2))
    res = bias_variance_probe(xs, catalog("kink_p1.5_d2"), 0.0, [0.3, 0.7], 5, 50, seed=1)
    assert res.variance_term == 0.0
    assert res.total == res.bias_sq
    assert res.identity_holds


def test_probe_zero_regression():
    xs = np.random.default_rng(1).random((100, 2))
    res = bias_variance_probe(xs, constant(2), 0.7, [0.3, 0.7], 8, 4000, seed=2)
    assert res.bias_sq == 0.0
    assert res.total == pytest.approx(res.variance_term, rel=1e-12)
    assert res.variance_bounded
    assert abs(res.variance_term - 0.49 / 8) <= 3 * res.variance_se


@pytest.mark.parametrize("design", range(5))
def test_probe_identity_and_variance(design):
    rng = np.random.default_rng(100 + design)
    xs = rng.random((300, 1))
    res = bias_variance_probe(xs, catalog("kink_p1.5_d1"), 0.5, rng.random(1), 10, 4000, seed=design)
    assert res.identity_holds
    assert abs(res.variance_term - res.sigma_sq_over_k) <= 3 * res.variance_se


def test_probe_heteroscedastic_variance_bounded():
    xs = np.random.default_rng(3).random((200, 2))
    res = bias_variance_probe(xs, constant(2), 0.5, [0.5, 0.5], 10, 4000, seed=3,
                              noise_kind="heteroscedastic_capped")
    assert res.variance_bounded
