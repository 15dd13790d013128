import math

import numpy as np
import pytest
from scipy import special

from cfucb.checks import mutation_fixture
from cfucb.config import ExperimentConfig
from cfucb.exceptions import CheckerConfigError
from cfucb.exceptions import LambertWDomainError
from cfucb.exceptions import XTooSmallError
from cfucb.harness import run_replication
from cfucb.model import GapTable
from cfucb.theory import BRANCH_POINT
from cfucb.theory import QParams
from cfucb.theory import inflate_arrival_counts
from cfucb.theory import lambert_w0
from cfucb.theory import lambert_w_minus1
from cfucb.theory import lemma10_bound
from cfucb.theory import lemma10_interval
from cfucb.theory import lemma10_property
from cfucb.theory import lemma6_check
from cfucb.theory import q_domain_start
from cfucb.theory import q_function
from cfucb.theory import q_inverse
from cfucb.theory import theorem1_exact_probability
from cfucb.theory import theorem1_monte_carlo
from cfucb.theory import theorem1_threshold
from cfucb.theory import theorem1_union_bound


def _bisect_w_minus1(x):
    lo, hi = -800.0, -1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        # w e^w is decreasing on (-inf, -1]
        if mid * math.exp(mid) > x:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_lambert_w_minus1_values():
    assert lambert_w_minus1(BRANCH_POINT) == -1.0
    assert lambert_w_minus1(-0.1) == pytest.approx(-3.577152, abs=1e-6)
    assert lambert_w_minus1(-0.01) == pytest.approx(-6.4728, abs=1e-4)
    for x in (-0.3, -0.05, -1e-5, -1e-100):
        assert lambert_w_minus1(x) == pytest.approx(_bisect_w_minus1(x), rel=1e-9)


def test_lambert_w_minus1_residual_grid():
    exponents = np.linspace(-300, math.log10(-BRANCH_POINT), 1000)
    for x in -(10.0 ** exponents):
        x = max(float(x), BRANCH_POINT)
        w = lambert_w_minus1(x)
        assert w <= -1.0
        assert abs(w * math.exp(w) - x) <= 1e-12 * max(abs(x), 1e-300)


def test_lambert_w_minus1_near_branch_point():
    for eps in (1e-3, 1e-6, 1e-9, 1e-12):
        x = BRANCH_POINT + eps
        w = lambert_w_minus1(x)
        assert w <= -1.0
        assert abs(w * math.exp(w) - x) <= 1e-12 * abs(x)
    assert lambert_w_minus1(BRANCH_POINT + 1e-18) == pytest.approx(-1.0, abs=1e-6)


def test_lambert_w_minus1_matches_scipy():
    for x in -np.logspace(-200, -0.5, 300):
        ref = special.lambertw(x, -1).real
        assert lambert_w_minus1(float(x)) == pytest.approx(ref, rel=1e-10)


def test_lambert_w_minus1_domain():
    for x in (0.0, 0.5, -0.5, BRANCH_POINT - 1e-6):
        with pytest.raises(LambertWDomainError):
            lambert_w_minus1(x)


def test_lambert_w0():
    assert lambert_w0(0.0) == 0.0
    assert lambert_w0(BRANCH_POINT) == -1.0
    assert lambert_w0(math.e) == pytest.approx(1.0)
    for x in (-0.3, -0.01, 0.5, 10.0, 1e10):
        assert lambert_w0(x) == pytest.approx(special.lambertw(x, 0).real, rel=1e-10)
    with pytest.raises(LambertWDomainError):
        lambert_w0(-0.5)


def test_q_function_values():
    assert q_function(math.e, QParams(B=1.0, C=1.0)) == pytest.approx(1.0)
    assert q_function(10.0, QParams(B=1.0, C=2.0)) == pytest.approx(6.4728, abs=1e-4)


def test_q_function_matches_closed_form():
    p = QParams(B=20.0, C=7.0, d=3)
    x0 = q_domain_start(p)
    for x in x0 * np.logspace(0.01, 6, 50):
        z = -(1.0 / p.B) * (x / p.d) ** (-p.C / p.B)
        closed = -p.B * special.lambertw(z, -1).real
        assert q_function(float(x), p) == pytest.approx(closed, rel=1e-9)


def test_q_function_too_small():
    p = QParams(B=5.0, C=2.0, d=2)
    with pytest.raises(XTooSmallError):
        q_function(0.5 * q_domain_start(p), p)
    with pytest.raises(XTooSmallError):
        q_function(0.0, p)


def test_q_inverse():
    p = QParams(B=4.0, C=9.0, d=5)
    for q in (4.5, 10.0, 300.0):
        assert q_function(q_inverse(q, p), p) == pytest.approx(q, rel=1e-9)


def test_q_growth():
    p = QParams(B=12.0, C=3.0, d=2)
    x0 = q_inverse(p.B + p.C, p)
    xs = x0 * np.logspace(0, 6, 400)
    qs = np.array([q_function(float(x), p) for x in xs])
    assert np.all(np.diff(qs) > 0)
    ratio = qs / xs
    assert np.all(np.diff(ratio) < 0)
    assert ratio[-1] < 1e-3 * ratio[0]
    # q outgrows C ln(x/d) by B ln q, which has no upper bound
    excess = qs - p.C * np.log(xs / p.d)
    assert np.all(np.diff(excess) > 0)
    np.testing.assert_allclose(excess, p.B * np.log(qs), rtol=1e-9)


def test_qparams_from_gaps():
    p = QParams.from_gaps([0.0, 2.0, 4.0], arm=0, target_gap=2.0, c=1.5, d=3)
    assert p.B == pytest.approx(16.0 / 4 + 16.0 / 16)
    assert p.C == pytest.approx(16.0 * 2.25 / 4)
    with pytest.raises(CheckerConfigError):
        QParams.from_gaps([0.0, 0.0, 1.0], arm=0, target_gap=1.0, c=1.0, d=1)
    with pytest.raises(CheckerConfigError):
        QParams(B=0.0, C=1.0)


def test_lemma10_property_examples():
    # premise fails: 0.5 - ln 0.5 > 1
    assert lemma10_property(1.0, 1.0, 1.0, 1.0, math.e, 0.5)
    rng = np.random.default_rng(0)
    for _ in range(100000 // 10):
        A, B, C = rng.uniform(0.1, 10.0, size=3)
        d = float(rng.integers(1, 10))
        x = d * math.exp(rng.uniform(0.0, 15.0))
        y = math.exp(rng.uniform(-5.0, 8.0))
        assert lemma10_property(A, B, C, d, x, y)


def test_lemma10_bound_boundary():
    A, B, C, d, x = 2.0, 3.0, 4.0, 2.0, 500.0
    bound = lemma10_bound(A, B, C, d, x)
    lhs = A * bound - B * math.log(bound)
    assert lhs == pytest.approx(C * math.log(x / d), rel=1e-9)
    low, high = lemma10_interval(A, B, C, d, x)
    assert high == bound
    assert A * low - B * math.log(low) == pytest.approx(C * math.log(x / d), rel=1e-9)
    mid = 0.5 * (low + high)
    assert A * mid - B * math.log(mid) < C * math.log(x / d)
    assert lemma10_interval(1.0, 1.0, 0.1, 1.0, 1.5) is None


def test_theorem1_threshold():
    assert theorem1_threshold(1, 1, 1.0) == 5
    assert theorem1_threshold(1, 1, math.exp(-1)) == 9
    previous = None
    for eps in (0.01, 0.05, 0.1, 0.5, 1.0):
        value = theorem1_threshold(5, 2, eps)
        if previous is not None:
            assert value <= previous
        previous = value


def test_theorem1_monte_carlo_trivial():
    rng = np.random.default_rng(0)
    assert theorem1_monte_carlo(5, 1, 3, 100, rng) == 1.0
    assert theorem1_monte_carlo(5, 3, 2, 100, rng) == 0.0


def test_theorem1_exact_probability():
    # 3 users over 2 arms, each arm needs one: all but the two constant maps
    assert theorem1_exact_probability(3, 2, 1) == pytest.approx(6 / 8)
    assert theorem1_exact_probability(5, 3, 2) == 0.0
    assert theorem1_exact_probability(4, 1, 2) == 1.0


def test_theorem1_monte_carlo_matches_exact():
    rng = np.random.default_rng(1)
    trials = 100000
    estimate = theorem1_monte_carlo(12, 3, 2, trials, rng)
    exact = theorem1_exact_probability(12, 3, 2)
    sigma = math.sqrt(exact * (1 - exact) / trials)
    assert abs(estimate - exact) <= 4 * sigma


@pytest.mark.parametrize("n_arms,d,eps", [(2, 2, 0.1), (5, 2, 0.01), (10, 5, 0.1)])
def test_theorem1_threshold_is_sufficient(n_arms, d, eps):
    n = theorem1_threshold(n_arms, d, eps)
    trials = 20000
    failure = 1 - theorem1_monte_carlo(n, n_arms, d, trials, np.random.default_rng(2))
    sigma = math.sqrt(failure * (1 - failure) / trials)
    assert failure <= eps + 3 * sigma
    exact_failure = 1 - theorem1_exact_probability(n, n_arms, d)
    assert exact_failure <= theorem1_union_bound(n, n_arms, d) + 1e-12


def test_lemma6_empty_log():
    gaps = GapTable(mu=np.zeros((1, 1)), optimal_arm=np.zeros(1, dtype=int), gaps=np.zeros((1, 1)))
    report = lemma6_check([], gaps, d=2)
    assert report.passed
    assert report.to_dict()["checked"] == 0


def test_lemma6_fixture_and_mutation():
    records, gaps = mutation_fixture()
    report = lemma6_check(records, gaps, d=1)
    assert report.checked == 1
    assert report.passed
    mutated = lemma6_check(inflate_arrival_counts(records, 100), gaps, d=1)
    assert len(mutated.violations) >= 1
    assert mutated.violations[0]["lhs"] > mutated.violations[0]["rhs"]
    # the original log is untouched
    assert records[0].arrivals == 5


def test_lemma6_zero_gap_is_config_error():
    records, gaps = mutation_fixture()
    broken = GapTable(mu=gaps.mu, optimal_arm=gaps.optimal_arm, gaps=np.zeros((3, 2)))
    with pytest.raises(CheckerConfigError):
        lemma6_check(records, broken, d=1)


def test_lemma6_tied_member_is_vacuous():
    records, gaps = mutation_fixture()
    # user 1 is indifferent between both arms
    tied = GapTable(
        mu=np.array([[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]),
        optimal_arm=gaps.optimal_arm,
        gaps=np.array([[0.0, 1.0], [0.0, 0.0], [1.0, 0.0]]),
    )
    report = lemma6_check(inflate_arrival_counts(records, 100), tied, d=1)
    assert report.checked == 1
    assert report.passed


def test_lemma6_on_short_run():
    config = ExperimentConfig(
        n_users=10, n_arms=5, dim=2, horizon_events=150, replications=1
    )
    result = run_replication(config, seed=0)
    assert result.lemma6["checked"] > 0
    assert result.lemma6["violations"] == 0
    assert result.lemma6["width_violations"] == 0
    assert result.lemma6["passed"]
