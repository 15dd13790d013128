"""Numerical counterparts of the analytical objects behind CFUCB."""

import dataclasses
import math

import numpy as np

from .exceptions import CheckerConfigError
from .exceptions import LambertWDomainError
from .exceptions import XTooSmallError

BRANCH_POINT = -math.exp(-1.0)
W_RTOL = 1e-12
W_MAX_ITER = 100


def _w_tolerance(x):
    return W_RTOL * max(abs(x), 1e-300)


def _halley(x, w, lower):
    for _ in range(W_MAX_ITER):
        ew = math.exp(w)
        f = w * ew - x
        if abs(f) <= _w_tolerance(x):
            break
        fp = ew * (w + 1.0)
        if fp == 0.0:
            break
        step = f / (fp - (w + 2.0) * f / (2.0 * (w + 1.0)))
        new = w - step
        # stay on the requested branch
        if lower and new > -1.0:
            new = (w - 1.0) / 2.0
        elif not lower and new < -1.0:
            new = (w - 1.0) / 2.0
        if new == w:
            break
        w = new
    return w


def _branch_series(x, sign):
    p = sign * math.sqrt(max(0.0, 2.0 * (1.0 + math.e * x)))
    return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3


def lambert_w_minus1(x):
    """Lower real branch of the Lambert W function.

    Parameters
    ----------
    x: float
        Argument in ``[-1/e, 0)``.

    Returns
    -------
    w: float
        The solution ``w <= -1`` of ``w * exp(w) = x``.
    """
    if not BRANCH_POINT <= x < 0:
        raise LambertWDomainError(
            "W_-1 is defined on [-1/e, 0), got {!r}".format(x)
        )
    if x == BRANCH_POINT:
        return -1.0
    if 1.0 + math.e * x < 0.25:
        w = _branch_series(x, -1.0)
    else:
        log_neg = math.log(-x)
        w = log_neg - math.log(-log_neg)
    return min(_halley(x, min(w, -1.0), lower=True), -1.0)


def _w_minus1_neg_exp(log_mag):
    """``W_-1(-exp(log_mag))``, solved in log space once exp underflows."""
    if log_mag > -700.0:
        return lambert_w_minus1(-math.exp(log_mag))
    # w + ln(-w) = log_mag
    w = log_mag - math.log(-log_mag)
    for _ in range(W_MAX_ITER):
        step = (w + math.log(-w) - log_mag) / (1.0 + 1.0 / w)
        w -= step
        if abs(step) <= W_RTOL * abs(w):
            break
    return w


def lambert_w0(x):
    """Principal real branch of the Lambert W function for x >= -1/e."""
    if not x >= BRANCH_POINT:
        raise LambertWDomainError(
            "W_0 is defined on [-1/e, inf), got {!r}".format(x)
        )
    if x == BRANCH_POINT:
        return -1.0
    if x == 0.0:
        return 0.0
    if 1.0 + math.e * x < 0.25:
        w = _branch_series(x, 1.0)
    elif x < 3.0:
        w = math.log1p(x)
    else:
        w = math.log(x) - math.log(math.log(x))
    return max(_halley(x, max(w, -1.0), lower=False), -1.0)


@dataclasses.dataclass(frozen=True)
class QParams(object):
    """Parameters of the growth function q.

    ``B`` is the sum of 16 / gap^2 over the member's other arms, ``C`` is
    16 c^2 / gap^2 of the target; ``A`` is fixed at 1.
    """

    B: float
    C: float
    d: int = 1

    def __post_init__(self):
        for name in ("B", "C"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise CheckerConfigError(
                    "{} must be finite and positive: {}".format(name, value)
                )
        if self.d < 1:
            raise CheckerConfigError("d must be positive: {}".format(self.d))

    @classmethod
    def from_gaps(cls, member_gaps, arm, target_gap, c, d):
        """Build q's parameters from a member's gap row and the target gap."""
        others = [g for n, g in enumerate(member_gaps) if n != arm]
        if any(g <= 0 for g in others) or target_gap <= 0:
            raise CheckerConfigError("All relevant gaps must be positive")
        return cls(
            B=sum(16.0 / g ** 2 for g in others),
            C=16.0 * c ** 2 / target_gap ** 2,
            d=d,
        )


def q_function(x, p):
    """``q(x) = -B W_-1(-(1/B) (x/d)^(-C/B))``.

    q solves ``y - B ln y = C ln(x/d)`` on the branch ``y >= B``.
    """
    if not x > 0:
        raise XTooSmallError("q is defined for x > 0, got {}".format(x))
    log_arg = -math.log(p.B) - (p.C / p.B) * math.log(x / p.d)
    if log_arg > -1.0:
        raise XTooSmallError(
            "x = {} is below the domain start {}".format(x, q_domain_start(p))
        )
    return -p.B * _w_minus1_neg_exp(log_arg)


def q_inverse(q, p):
    """The x at which ``q_function(x, p) == q`` (requires q >= B)."""
    return p.d * math.exp((q - p.B * math.log(q)) / p.C)


def q_domain_start(p):
    return q_inverse(p.B, p)


def lemma10_bound(A, B, C, d, x):
    """Upper end ``-(B/A) W_-1(-(A/B) (x/d)^(-C/B))``, or None if empty."""
    log_mag = math.log(A / B) - (C / B) * math.log(x / d)
    if log_mag > -1.0:
        return None
    return -(B / A) * _w_minus1_neg_exp(log_mag)


def lemma10_interval(A, B, C, d, x):
    """Open interval of y with ``A y - B ln y < C ln(x/d)``, or None."""
    log_mag = math.log(A / B) - (C / B) * math.log(x / d)
    if log_mag > -1.0:
        return None
    return (
        -(B / A) * lambert_w0(-math.exp(log_mag)),
        -(B / A) * _w_minus1_neg_exp(log_mag),
    )


def lemma10_property(A, B, C, d, x, y):
    """Whether ``A y - B ln y < C ln(x/d)`` implies ``y`` below the bound.

    Values within 1e-9 relative of the bound count as below it, so the
    two sides are compared at the same floating-point resolution.
    """
    premise = A * y - B * math.log(y) < C * math.log(x / d)
    if not premise:
        return True
    bound = lemma10_bound(A, B, C, d, x)
    if bound is None:
        return False
    return y < bound or math.isclose(y, bound, rel_tol=1e-9)


def theorem1_threshold(n_arms, d, eps):
    """Smallest opted-in population meeting the counting bound."""
    value = n_arms * d + max(
        n_arms * d,
        4.0 * (n_arms * math.log(n_arms) + n_arms * math.log(1.0 / eps) + d),
    )
    return int(math.ceil(value - 1e-9))


def theorem1_monte_carlo(n_opted_in, n_arms, d, trials, rng, chunk=10000):
    """Fraction of trials where every arm is optimal for >= d users.

    Optimal arms are drawn independently and uniformly over the arms.
    """
    successes = 0
    remaining = trials
    while remaining > 0:
        size = min(chunk, remaining)
        draws = rng.integers(0, n_arms, size=(size, n_opted_in))
        ok = np.ones(size, dtype=bool)
        for m in range(n_arms):
            ok &= (draws == m).sum(axis=1) >= d
        successes += int(ok.sum())
        remaining -= size
    return successes / trials


def theorem1_exact_probability(n_opted_in, n_arms, d):
    """Exact probability that every arm gets at least d of the users.

    ways[n] counts labelled assignments of n users to the arms processed
    so far with each of those arms holding at least d users.
    """
    ways = [1] + [0] * n_opted_in
    for _ in range(n_arms):
        nxt = [0] * (n_opted_in + 1)
        for n in range(n_opted_in + 1):
            for k in range(d, n + 1):
                nxt[n] += math.comb(n, k) * ways[n - k]
        ways = nxt
    return ways[n_opted_in] / n_arms ** n_opted_in


def theorem1_union_bound(n_opted_in, n_arms, d):
    """``|M| * P(Bin(|A_+|, 1/|M|) < d)``, an upper bound on failure."""
    p = 1.0 / n_arms
    tail = sum(
        math.comb(n_opted_in, k) * p ** k * (1 - p) ** (n_opted_in - k)
        for k in range(min(d, n_opted_in + 1))
    )
    return min(1.0, n_arms * tail)


def covered_arms(gaps, opted_in, d):
    """Number of arms that are optimal for at least ``d`` opted-in users."""
    optimal = gaps.optimal_arm[np.asarray(opted_in, dtype=bool)]
    counts = np.bincount(optimal, minlength=gaps.n_arms)
    return int(np.sum(counts >= d))


@dataclasses.dataclass
class Lemma6Report(object):
    checked: int = 0
    hypothesis_failed: int = 0
    skipped_empty: int = 0
    violations: list = dataclasses.field(default_factory=list)
    width_violations: list = dataclasses.field(default_factory=list)

    @property
    def passed(self):
        return not self.violations and not self.width_violations

    def merge(self, other):
        self.checked += other.checked
        self.hypothesis_failed += other.hypothesis_failed
        self.skipped_empty += other.skipped_empty
        self.violations.extend(other.violations)
        self.width_violations.extend(other.width_violations)
        return self

    def to_dict(self):
        return {
            "checked": self.checked,
            "hypothesis_failed": self.hypothesis_failed,
            "skipped_empty": self.skipped_empty,
            "violations": len(self.violations),
            "width_violations": len(self.width_violations),
            "passed": self.passed,
        }


def _means_covered(bundle, mu_row):
    for lcb, ucb in (
        (bundle.self_lcb, bundle.self_ucb),
        (bundle.cf_lcb, bundle.cf_ucb),
    ):
        if np.any(mu_row < lcb) or np.any(mu_row > ucb):
            return False
    return True


def lemma6_check(records, gaps, d):
    """Re-evaluate the suboptimal-pull necessary condition on a log.

    For every suboptimal pull whose snapshot has all of the user's true
    means inside both intervals, checks

        min_i { N_i - (sum_{n != m} 16 / gap_{i,n}^2) ln N_i }
            <= 8 c^2 (ln d + 2 ln N_j) / gap_{j,m}^2

    over the logged E-set members whose optimal arm is m, together with
    the width condition ``min(2 w_se, 2 w_cf) >= gap_{j,m}``.
    """
    report = Lemma6Report()
    for record in records:
        if not record.suboptimal:
            continue
        gap = gaps.gaps[record.user, record.arm]
        if not gap > 0:
            raise CheckerConfigError(
                "Arm {} is suboptimal for user {} but has gap {}".format(
                    record.arm, record.user, gap
                )
            )
        bundle = record.bundle
        if not _means_covered(bundle, gaps.mu[record.user]):
            report.hypothesis_failed += 1
            continue
        report.checked += 1

        m = record.arm
        width = min(bundle.self_width[m], bundle.cf_width[m])
        if 2.0 * width < gap:
            report.width_violations.append(
                {"k": record.global_index, "user": record.user, "arm": m,
                 "width": float(width), "gap": float(gap)}
            )

        if not bundle.opted_in:
            continue
        members = bundle.e_sets[m]
        if members is None:
            report.skipped_empty += 1
            continue
        terms = []
        for i, n_i in zip(members, bundle.member_arrivals[m]):
            if gaps.optimal_arm[i] != m:
                continue
            others = np.delete(gaps.gaps[i], m)
            if np.any(others <= 0):
                # a tied arm leaves N_{i,m} unbounded below
                terms.append(-math.inf)
                continue
            b = float(np.sum(16.0 / others ** 2))
            # before its first arrival N_{i,m} >= 0 is the only bound
            terms.append(n_i - b * math.log(n_i) if n_i > 0 else 0.0)
        if not terms:
            report.skipped_empty += 1
            continue
        lhs = min(terms)
        c = bundle.c[m]
        rhs = 8.0 * c ** 2 * (math.log(d) + 2.0 * math.log(record.arrivals)) / gap ** 2
        if lhs > rhs:
            report.violations.append(
                {"k": record.global_index, "user": record.user, "arm": m,
                 "lhs": float(lhs), "rhs": float(rhs)}
            )
    return report


def inflate_arrival_counts(records, factor):
    """Copy of ``records`` with every logged arrival count scaled up."""
    out = []
    for record in records:
        bundle = dataclasses.replace(
            record.bundle,
            member_arrivals=tuple(
                tuple(int(n * factor) for n in arrivals)
                if arrivals is not None else None
                for arrivals in record.bundle.member_arrivals
            ),
        )
        out.append(
            dataclasses.replace(
                record, bundle=bundle, arrivals=int(record.arrivals * factor)
            )
        )
    return out
