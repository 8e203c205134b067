import numpy as np
import pytest

from stickylab.errors import InvalidArgumentError
from stickylab.pathgen import (
    BrownianMotion,
    Ensemble,
    make_uniform_grid,
    sample_ensemble,
)
from stickylab.stickiness import (
    StickinessQuery,
    cross_check_characterizations,
    estimate_stickiness,
    survival_ladder,
    wilson_ci,
    zero_success_upper_bound,
)
from stickylab.stopping import Conjunction, Deterministic, ValueAtStopInRange, WholeSpace
from stickylab.transforms import Affine, NonStickyMartingale, example_process, apply_map

from oracles import corridor_stay_probability


def constant_ensemble(n=50, steps=16):
    grid = make_uniform_grid(1.0, steps)
    return Ensemble(grid, np.zeros((n, grid.n_points)), 0, "flat")


def bm_ensemble(n=2000, steps=256, seed=5):
    return sample_ensemble(BrownianMotion(1.0), make_uniform_grid(1.0, steps), seed, n)


def q(epsilon, tau=Deterministic(0.0), horizon=1.0, **kw):
    return StickinessQuery(tau=tau, horizon=horizon, epsilon=epsilon, **kw)


# ---------------------------------------------------------------- wilson


def test_wilson_zero_successes_lower_is_zero():
    lo, hi = wilson_ci(0, 50, 0.95)
    assert lo == 0.0 and hi > 0.0


def test_wilson_full_successes_upper_is_one():
    lo, hi = wilson_ci(50, 50, 0.95)
    assert hi == 1.0 and lo < 1.0


def test_wilson_against_independent_implementation():
    # frozen from statsmodels.stats.proportion.proportion_confint(method="wilson")
    cases = {
        (5, 10): (0.23659309051256394, 0.7634069094874361),
        (1, 10000): (1.7652673601122363e-05, 0.0005662688974013383),
        (3, 7): (0.15821985525146964, 0.7495416354723428),
    }
    for (s, n), (lo, hi) in cases.items():
        got_lo, got_hi = wilson_ci(s, n, 0.95)
        assert got_lo == pytest.approx(lo, rel=1e-12)
        assert got_hi == pytest.approx(hi, rel=1e-12)
    statsmodels = pytest.importorskip("statsmodels.stats.proportion")
    lo, hi = statsmodels.proportion_confint(17, 123, alpha=0.1, method="wilson")
    got = wilson_ci(17, 123, 0.9)
    assert got == pytest.approx((lo, hi), rel=1e-12)


def test_wilson_one_success_lower_positive():
    lo, _ = wilson_ci(1, 10_000, 0.95)
    assert lo > 0.0


def test_wilson_invalid_counts():
    with pytest.raises(InvalidArgumentError):
        wilson_ci(5, 4)
    with pytest.raises(InvalidArgumentError):
        wilson_ci(-1, 4)
    with pytest.raises(InvalidArgumentError):
        wilson_ci(0, 0)


def test_zero_success_upper_bound_scale():
    # one-sided Wilson bound at zero successes ~ z^2/(n + z^2) ~ 2.7e-4 at n=1e4
    assert zero_success_upper_bound(10_000, 0.95) == pytest.approx(2.705e-4, rel=1e-3)


# ---------------------------------------------------------------- estimator basics


def test_constant_ensemble_is_fully_sticky():
    est = estimate_stickiness(constant_ensemble(), q(0.01))
    assert est.p_hat == 1.0 and est.verdict == "POSITIVE"


def test_horizon_beyond_grid_rejected():
    with pytest.raises(InvalidArgumentError):
        estimate_stickiness(constant_ensemble(), q(0.5, horizon=2.0))


def test_monotone_in_epsilon_exact():
    ens = bm_ensemble()
    p_small = estimate_stickiness(ens, q(0.3)).successes
    p_big = estimate_stickiness(ens, q(0.6)).successes
    assert p_small <= p_big


def test_monotone_in_horizon_exact():
    ens = bm_ensemble()
    late = estimate_stickiness(ens, q(0.5, horizon=1.0)).successes
    early = estimate_stickiness(ens, q(0.5, horizon=0.5)).successes
    assert late <= early


def test_conjunction_bound_exact():
    ens = bm_ensemble(n=500)
    a1 = ValueAtStopInRange(-0.1, 0.1)
    a2 = WholeSpace()
    joint = estimate_stickiness(ens, q(0.5, event=Conjunction((a1, a2)))).successes
    s1 = estimate_stickiness(ens, q(0.5, event=a1)).successes
    s2 = estimate_stickiness(ens, q(0.5, event=a2)).successes
    assert joint <= min(s1, s2)


def test_affine_transfer_exact_pathwise():
    # success indicator of (f(X), |a|*eps) equals that of (X, eps) per path
    ens = bm_ensemble(n=800, steps=128, seed=21)
    a = -2.0  # power of two keeps the scaling lossless
    mapped = Ensemble(
        ens.grid,
        np.stack([apply_map(ens.path(i), Affine(a, 0.0)).values for i in range(ens.n_paths)]),
        ens.master_seed,
        "affine",
    )
    eps = 0.5
    base = [
        estimate_stickiness(
            Ensemble(ens.grid, ens.values[i : i + 1], 0, ""), q(eps)
        ).successes
        for i in range(ens.n_paths)
    ]
    image = [
        estimate_stickiness(
            Ensemble(mapped.grid, mapped.values[i : i + 1], 0, ""), q(abs(a) * eps)
        ).successes
        for i in range(ens.n_paths)
    ]
    assert base == image


def test_brownian_corridor_vs_series_oracle():
    # eps=0.5 corridor: estimate must land within 3 MC standard errors of the
    # oracle once the documented upward grid bias is small (loose desk-scale n)
    ens = sample_ensemble(BrownianMotion(1.0), make_uniform_grid(1.0, 2048), 2718, 4000)
    est = estimate_stickiness(ens, q(0.5))
    oracle = corridor_stay_probability(0.5)
    se = np.sqrt(max(est.p_hat, 1e-9) * (1 - est.p_hat) / est.n)
    assert est.p_hat >= oracle - 3 * se  # discrete monitoring biases upward
    assert est.p_hat - oracle < 5 * se


def test_deterministic_estimate_reproducible():
    ens = bm_ensemble(n=300)
    e1 = estimate_stickiness(ens, q(0.5))
    e2 = estimate_stickiness(ens, q(0.5))
    assert (e1.successes, e1.ci_low, e1.ci_high) == (e2.successes, e2.ci_low, e2.ci_high)


# ---------------------------------------------------------------- survival ladder


def test_ladder_constant_ensemble_all_one():
    fractions = survival_ladder(constant_ensemble(), Deterministic(0.0), 0.5, [0.25, 0.5, 1.0])
    assert np.array_equal(fractions, np.ones(3))


def test_ladder_nonincreasing():
    ens = bm_ensemble(n=1000)
    fractions = survival_ladder(ens, Deterministic(0.0), 1.0, [0.25, 0.5, 1.0])
    assert np.all(np.diff(fractions) <= 0.0)
    assert np.all(fractions > 0.0)


def test_ladder_nonsticky_exits_by_one():
    grid = make_uniform_grid(1.0, 512)
    ens = sample_ensemble(example_process(NonStickyMartingale()), grid, 44, 500)
    fractions = survival_ladder(ens, Deterministic(0.0), 1.5, [1.0])
    assert fractions[0] == 0.0


def test_ladder_fractions_match_corridor_oracle():
    # survival at horizon h with tau0 = 0 is the corridor-stay event; compare
    # to the series oracle (discrete monitoring biases the fraction upward,
    # well inside the tolerance at this resolution)
    grid = make_uniform_grid(4.0, 8192)
    n = 2000
    ens = sample_ensemble(BrownianMotion(1.0), grid, 606, n)
    fractions = survival_ladder(ens, Deterministic(0.0), 1.0, [1.0, 2.0, 4.0])
    for h, frac in zip((1.0, 2.0, 4.0), fractions):
        oracle = corridor_stay_probability(1.0, horizon=h)
        se = np.sqrt(max(oracle * (1 - oracle), 1e-9) / n)
        assert abs(frac - oracle) < 4 * se


def test_ladder_validation():
    ens = constant_ensemble()
    with pytest.raises(InvalidArgumentError):
        survival_ladder(ens, Deterministic(0.0), 0.5, [])
    with pytest.raises(InvalidArgumentError):
        survival_ladder(ens, Deterministic(0.0), 0.5, [0.5, 0.5])
    with pytest.raises(InvalidArgumentError):
        survival_ladder(ens, Deterministic(0.0), -1.0, [0.5])


# ---------------------------------------------------------------- cross checks


def test_cross_check_brownian_positive():
    report = cross_check_characterizations(bm_ensemble(n=3000), q(0.5))
    assert report.verdicts == {"def-a": "POSITIVE", "prop-b": "POSITIVE", "prop-c": "POSITIVE"}
    assert report.agree


def test_cross_check_constant_positive():
    report = cross_check_characterizations(constant_ensemble(), q(0.25))
    assert report.agree and report.def_a.verdict == "POSITIVE"


def test_cross_check_nonsticky_zero():
    grid = make_uniform_grid(1.0, 512)
    ens = sample_ensemble(example_process(NonStickyMartingale()), grid, 45, 1000)
    report = cross_check_characterizations(ens, q(1.0))
    assert report.verdicts == {"def-a": "ZERO", "prop-b": "ZERO", "prop-c": "ZERO"}
    assert report.agree
    assert report.def_a.zero_upper is not None and report.def_a.zero_upper < 0.005
