"""Verification suites behind ``cfucb check``.

Every suite returns ``{"suite": name, "passed": bool, "details": {...}}``.
"""

from __future__ import print_function

import math
import sys

import numpy as np
import tqdm
from scipy import special

from .config import ExperimentConfig
from .exceptions import OracleUnavailableError
from .harness import replication_instance
from .harness import run_experiment
from .harness import run_replication
from .model import GapTable
from .model import RewardModel
from .model import build_gap_table
from .model import draw_reward
from .model import generate_profiles
from .oracle import solve_coefficients
from .policy import PullRecord
from .policy import UcbBundle
from .policy import UserArmStats
from .policy import cf_width
from .policy import counterfactual_estimate
from .policy import self_width
from .theory import BRANCH_POINT
from .theory import QParams
from .theory import covered_arms
from .theory import inflate_arrival_counts
from .theory import lambert_w_minus1
from .theory import lemma10_property
from .theory import lemma6_check
from .theory import q_function
from .theory import q_inverse
from .theory import theorem1_exact_probability
from .theory import theorem1_monte_carlo
from .theory import theorem1_threshold
from .theory import theorem1_union_bound

SUITES = ("lambert", "theorem1", "ci-coverage", "oracle", "lemma6", "plateau")

PLATEAU_MAX_SHARE = 0.05
PLATEAU_R_SQUARED = 0.9

THEOREM1_GRID = [
    (n_arms, d, eps) for n_arms in (2, 5, 10) for d in (2, 5) for eps in (0.1, 0.01)
]


def _report(name, passed, details):
    return {"suite": name, "passed": bool(passed), "details": details}


def lambert_grid(n_points=1000):
    """Log-spaced grid over (-1/e, -1e-300] plus the branch point."""
    exponents = np.linspace(-300.0, math.log10(-BRANCH_POINT), n_points)
    grid = -(10.0 ** exponents)
    grid = grid[grid >= BRANCH_POINT]
    return np.append(grid, BRANCH_POINT)


def check_lambert(seed=0, quiet=True):
    worst = 0.0
    on_branch = True
    scipy_worst = 0.0
    for x in tqdm.tqdm(lambert_grid(), disable=quiet, desc="lambert"):
        x = float(x)
        w = lambert_w_minus1(x)
        on_branch &= w <= -1.0
        worst = max(worst, abs(w * math.exp(w) - x) / max(abs(x), 1e-300))
        # W_-1 is ill-conditioned next to the branch point
        if 1.0 + math.e * x > 1e-6:
            ref = special.lambertw(x, -1).real
            scipy_worst = max(scipy_worst, abs(w - ref) / abs(ref))
    branch_value = lambert_w_minus1(BRANCH_POINT)

    rng = np.random.default_rng(seed)
    q_worst = 0.0
    q_monotone = True
    for _ in range(20):
        p = QParams(B=float(rng.uniform(5.0, 50.0)), C=float(rng.uniform(1.0, 50.0)),
                    d=int(rng.integers(1, 10)))
        x0 = q_inverse(p.B + p.C, p)
        xs = x0 * np.logspace(0.0, 6.0, 200)
        qs = np.array([q_function(x, p) for x in xs])
        for x, q in zip(xs, qs):
            z = -(1.0 / p.B) * (x / p.d) ** (-p.C / p.B)
            closed = -p.B * special.lambertw(z, -1).real
            q_worst = max(q_worst, abs(q - closed) / closed)
        excess = qs - p.C * np.log(xs / p.d)
        q_monotone &= bool(
            np.all(np.diff(qs) > 0)
            and np.all(np.diff(qs / xs) < 0)
            and np.all(np.diff(excess) > 0)
        )

    property_ok = True
    for _ in range(1000):
        A, B, C = rng.uniform(0.1, 10.0, size=3)
        d = int(rng.integers(1, 10))
        x = float(d * math.exp(rng.uniform(0.0, 20.0)))
        y = float(math.exp(rng.uniform(-5.0, 8.0)))
        property_ok &= lemma10_property(A, B, C, d, x, y)

    details = {
        "grid_points": len(lambert_grid()),
        "max_relative_residual": worst,
        "branch_point_value": branch_value,
        "max_relative_error_vs_scipy": scipy_worst,
        "q_max_relative_error": q_worst,
        "q_growth_ok": bool(q_monotone),
        "lemma10_property_ok": bool(property_ok),
    }
    passed = (
        worst <= 1e-12
        and on_branch
        and abs(branch_value + 1.0) <= 1e-9
        and scipy_worst <= 1e-8
        and q_worst <= 1e-9
        and q_monotone
        and property_ok
    )
    return _report("lambert", passed, details)


def check_theorem1(seed=0, trials=100000, quiet=True):
    rng = np.random.default_rng(seed)
    rows = []
    passed = True
    for n_arms, d, eps in tqdm.tqdm(THEOREM1_GRID, disable=quiet, desc="theorem1"):
        n = theorem1_threshold(n_arms, d, eps)
        failure = 1.0 - theorem1_monte_carlo(n, n_arms, d, trials, rng)
        sigma = math.sqrt(failure * (1.0 - failure) / trials)
        ok = failure <= eps + 3.0 * sigma
        passed &= ok
        rows.append({
            "n_arms": n_arms, "d": d, "eps": eps, "threshold": n,
            "failure": failure,
            "exact_failure": 1.0 - theorem1_exact_probability(n, n_arms, d),
            "union_bound": theorem1_union_bound(n, n_arms, d),
            "passed": bool(ok),
        })

    # small instance against the exact count
    success = theorem1_monte_carlo(12, 3, 2, trials, rng)
    exact = theorem1_exact_probability(12, 3, 2)
    sigma = math.sqrt(exact * (1.0 - exact) / trials)
    exact_ok = abs(success - exact) <= 3.0 * sigma
    details = {
        "grid": rows,
        "exact_comparison": {"monte_carlo": success, "exact": exact, "passed": bool(exact_ok)},
    }
    return _report("theorem1", passed and exact_ok, details)


def _coverage_limit(n_j, resamples):
    p = n_j ** -2.0
    return p + 3.0 * math.sqrt(p / resamples)


def _reward_sums(user, arm, model, rng, resamples, n_j):
    return draw_reward(user, arm, model, rng, size=(resamples, n_j)).sum(axis=1)


def check_ci_coverage(seed=0, resamples=10000, quiet=True):
    """Frozen-state coverage of the self and counterfactual intervals.

    The pulling user and every E-set member have pulled each arm N_j
    times; rewards carry unit-variance Gaussian noise. Estimates go
    through the same reward draws and estimators the policy uses.
    """
    rng = np.random.default_rng(seed)
    dim = 5
    model = RewardModel(noise_variance=1.0)
    users, arms = generate_profiles(dim + 1, 10, dim, rng)
    gaps = build_gap_table(users, arms, model)
    target = 0
    members = list(range(1, dim + 1))
    coeffs = solve_coefficients(users[target].x, [users[i].x for i in members])

    rows = []
    passed = True
    for n_j in tqdm.tqdm((10, 100), disable=quiet, desc="ci-coverage"):
        limit = _coverage_limit(n_j, resamples)
        w_self = self_width(n_j, n_j)
        w_cf = cf_width(n_j, dim, coeffs.c, n_j)
        for m in range(len(arms)):
            own = np.array([
                UserArmStats(n_j, float(s)).mean
                for s in _reward_sums(users[target], arms[m], model, rng, resamples, n_j)
            ])
            self_freq = float(np.mean(np.abs(own - gaps.mu[target, m]) > w_self))

            member_sums = np.column_stack([
                _reward_sums(users[i], arms[m], model, rng, resamples, n_j)
                for i in members
            ])
            estimate = np.array([
                counterfactual_estimate(coeffs, [UserArmStats(n_j, float(s)) for s in row])
                for row in member_sums
            ])
            cf_freq = float(np.mean(np.abs(estimate - gaps.mu[target, m]) > w_cf))

            ok = self_freq <= limit and cf_freq <= limit
            passed &= ok
            rows.append({
                "n_j": n_j, "arm": m, "self_frequency": self_freq,
                "cf_frequency": cf_freq, "limit": limit, "passed": bool(ok),
            })
    return _report("ci-coverage", passed, {"c": coeffs.c, "rows": rows})


def check_oracle(seed=0, instances=1000, dim=5, quiet=True):
    rng = np.random.default_rng(seed)
    worst = 0.0
    worst_residual = 0.0
    failures = 0
    for k in tqdm.tqdm(range(instances), disable=quiet, desc="oracle"):
        users, arms = generate_profiles(
            dim + 1, 10, dim, rng, unobserved_dim=3 if k % 2 else 0
        )
        gaps = build_gap_table(users, arms)
        members = list(range(1, dim + 1))
        try:
            coeffs = solve_coefficients(users[0].x, [users[i].x for i in members])
        except OracleUnavailableError:
            failures += 1
            continue
        rebuilt = coeffs.a.dot(gaps.mu[members])
        worst = max(worst, float(np.max(np.abs(rebuilt - gaps.mu[0]))))
        worst_residual = max(worst_residual, coeffs.residual)
    details = {
        "instances": instances,
        "failures": failures,
        "max_mean_error": worst,
        "max_residual": worst_residual,
    }
    return _report("oracle", failures == 0 and worst < 1e-6 and worst_residual < 1e-10, details)


def mutation_fixture():
    """A one-pull log whose pull-count bound holds with little room.

    User 0 prefers arm 0 and pulls arm 1 (gap 1) on its 5th arrival; the
    single E-set member, user 1, prefers arm 1 and has arrived 10 times.
    """
    mu = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
    gaps = GapTable(
        mu=mu,
        optimal_arm=np.array([0, 1, 1]),
        gaps=np.array([[0.0, 1.0], [1.0, 0.0], [1.0, 0.0]]),
    )
    inf = np.full(2, np.inf)
    bundle = UcbBundle(
        opted_in=True,
        self_pulls=np.zeros(2, dtype=np.int64),
        self_mean=np.full(2, np.nan),
        self_width=inf,
        self_ucb=inf,
        cf_estimate=np.full(2, np.nan),
        cf_width=inf,
        cf_ucb=inf,
        combined=inf,
        fallback=np.array([True, False]),
        e_sets=(None, (1,)),
        c=(None, 1.0),
        n_min=(None, 0),
        member_arrivals=(None, (10,)),
    )
    record = PullRecord(
        global_index=1, time=1.0, user=0, arm=1, reward=0.0, bundle=bundle,
        arrivals=5, suboptimal=True, gap=1.0,
    )
    return [record], gaps


def check_lemma6(seed=0, quiet=True):
    config = ExperimentConfig(
        n_users=10, n_arms=5, dim=2, horizon_events=150, replications=1, seed=seed
    )
    result = run_replication(config, seed)
    records, gaps = mutation_fixture()
    clean = lemma6_check(records, gaps, d=1)
    mutated = lemma6_check(inflate_arrival_counts(records, 100), gaps, d=1)
    details = {
        "run": result.lemma6,
        "fixture_violations": len(clean.violations),
        "mutation_violations": len(mutated.violations),
    }
    passed = result.lemma6["passed"] and clean.passed and len(mutated.violations) >= 1
    if not quiet:
        print("lemma6: {} pulls checked".format(result.lemma6["checked"]), file=sys.stderr)
    return _report("lemma6", passed, details)


def check_plateau(seed=0, quiet=True, config=None):
    """Opted-in regret plateau next to logarithmic opted-out regret.

    Runs ``config`` (the default experiment when omitted). The plateau is
    only required when, in every replication, each arm is the optimal arm
    of at least ``dim`` opted-in users; otherwise it is reported alone.
    """
    if config is None:
        config = ExperimentConfig(seed=seed)
    experiment = run_experiment(config, quiet=quiet)
    summary = experiment.summary

    covered = []
    for r in range(config.replications):
        users, _, gaps = replication_instance(config, config.seed + r)
        covered.append(covered_arms(gaps, [u.opted_in for u in users], config.dim))
    covering = all(n == config.n_arms for n in covered)

    plateau = summary["plateau"]["opted_in"]
    fit = summary["log_fit"]["opted_out"]
    log_growth = (
        fit is not None and fit["b"] > 0 and fit["r_squared"] > PLATEAU_R_SQUARED
    )
    plateau_ok = plateau < PLATEAU_MAX_SHARE
    details = {
        "plateau_opted_in": plateau,
        "plateau_opted_out": summary["plateau"]["opted_out"],
        "final_regret": summary["final_regret"],
        "log_fit_opted_out": fit,
        "oracle_fallbacks": summary["oracle_fallbacks"]["total"],
        "n_opted_in": config.n_opted_in,
        "covered_arms": covered,
        "covering_condition_met": covering,
        "opted_in_needed": theorem1_threshold(config.n_arms, config.dim, 0.1),
        "plateau_passed": bool(plateau_ok),
        "log_growth_passed": bool(log_growth),
    }
    if not quiet and not covering:
        print(
            "plateau: only {} of {} arms are preferred by {} or more opted-in "
            "users; plateau not required".format(min(covered), config.n_arms, config.dim),
            file=sys.stderr,
        )
    passed = log_growth and (plateau_ok or not covering)
    return _report("plateau", passed, details)


_RUNNERS = {
    "lambert": check_lambert,
    "theorem1": check_theorem1,
    "ci-coverage": check_ci_coverage,
    "oracle": check_oracle,
    "lemma6": check_lemma6,
    "plateau": check_plateau,
}


def run_checks(suite="all", seed=0, quiet=False):
    """Run one suite, or every suite for ``"all"``.

    Returns
    -------
    report: dict
        ``{"passed": bool, "suites": [suite reports]}``.
    """
    if suite == "all":
        names = SUITES
    elif suite in _RUNNERS:
        names = (suite,)
    else:
        raise ValueError("Unknown suite {!r}, expected one of {}".format(
            suite, SUITES + ("all",)))
    reports = []
    for name in names:
        if not quiet:
            print("Running check suite: {}".format(name), file=sys.stderr)
        reports.append(_RUNNERS[name](seed=seed, quiet=quiet))
    return {"passed": all(r["passed"] for r in reports), "suites": reports}
