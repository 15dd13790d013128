import dataclasses
import json
import math
from typing import Optional
from typing import Tuple

import numpy as np

from .arrivals import CounterTable
from .exceptions import ContractViolation
from .exceptions import EstimateUnavailableError
from .exceptions import InvalidCoefficientsError
from .exceptions import OracleUnavailableError
from .oracle import SynthSet

OPTED_IN = "opted_in"
OPTED_OUT = "opted_out"

SELF_WIDTH_CONSTANT = 4.0


@dataclasses.dataclass(frozen=True)
class UserArmStats(object):
    pulls: int = 0
    reward_sum: float = 0.0

    @property
    def mean(self):
        if self.pulls == 0:
            raise EstimateUnavailableError("No pulls recorded yet")
        return self.reward_sum / self.pulls


class StatsTable(object):
    """Pull counts, arrival counts and reward sums of every (user, arm)."""

    def __init__(self, n_users, n_arms):
        self.counters = CounterTable(n_users, n_arms)
        self.reward_sum = np.zeros((n_users, n_arms))

    @property
    def pulls(self):
        return self.counters.pulls

    @property
    def arrivals(self):
        return self.counters.arrivals

    def stats(self, user, arm):
        return UserArmStats(
            int(self.pulls[user, arm]), float(self.reward_sum[user, arm])
        )

    def arrive(self, user):
        return self.counters.record_arrival(user)

    def record_pull(self, user, arm, reward):
        self.counters.record_pull(user, arm)
        self.reward_sum[user, arm] += reward


@dataclasses.dataclass(frozen=True)
class UcbBundle(object):
    """Per-arm confidence bounds computed for one decision.

    Counterfactual fields hold ``inf`` widths/bounds and ``None`` E-sets
    for opted-out users and for arms where no E-set could be formed.
    In the JSON form, missing means and infinite widths or bounds are
    written as ``null``.
    """

    opted_in: bool
    self_pulls: np.ndarray
    self_mean: np.ndarray
    self_width: np.ndarray
    self_ucb: np.ndarray
    cf_estimate: np.ndarray
    cf_width: np.ndarray
    cf_ucb: np.ndarray
    combined: np.ndarray
    fallback: np.ndarray
    e_sets: Tuple[Optional[Tuple[int, ...]], ...]
    c: Tuple[Optional[float], ...]
    n_min: Tuple[Optional[int], ...]
    member_arrivals: Tuple[Optional[Tuple[int, ...]], ...]

    @property
    def self_lcb(self):
        return np.where(self.self_pulls > 0, self.self_mean - self.self_width, -np.inf)

    @property
    def cf_lcb(self):
        return np.where(np.isfinite(self.cf_ucb), self.cf_estimate - self.cf_width, -np.inf)

    def to_dict(self):
        out = {}
        for field in dataclasses.fields(self):
            value = getattr(self, field.name)
            if isinstance(value, np.ndarray) and value.dtype == float:
                value = [v if math.isfinite(v) else None for v in value.tolist()]
            elif isinstance(value, np.ndarray):
                value = value.tolist()
            elif isinstance(value, tuple):
                value = [list(v) if isinstance(v, tuple) else v for v in value]
            out[field.name] = value
        return out

    @classmethod
    def from_dict(cls, data):
        def tuples(values):
            return tuple(tuple(v) if v is not None else None for v in values)

        def floats(name, missing):
            return np.array(
                [missing if v is None else v for v in data[name]], dtype=float
            )

        return cls(
            opted_in=data["opted_in"],
            self_pulls=np.array(data["self_pulls"], dtype=np.int64),
            self_mean=floats("self_mean", np.nan),
            self_width=floats("self_width", np.inf),
            self_ucb=floats("self_ucb", np.inf),
            cf_estimate=floats("cf_estimate", np.nan),
            cf_width=floats("cf_width", np.inf),
            cf_ucb=floats("cf_ucb", np.inf),
            combined=floats("combined", np.inf),
            fallback=np.array(data["fallback"], dtype=bool),
            e_sets=tuples(data["e_sets"]),
            c=tuple(data["c"]),
            n_min=tuple(data["n_min"]),
            member_arrivals=tuples(data["member_arrivals"]),
        )


@dataclasses.dataclass(frozen=True)
class PullRecord(object):
    global_index: int
    time: float
    user: int
    arm: int
    reward: float
    bundle: UcbBundle
    arrivals: int
    suboptimal: bool
    gap: float

    def to_dict(self):
        out = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        out["bundle"] = self.bundle.to_dict()
        return out

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        data["bundle"] = UcbBundle.from_dict(data["bundle"])
        return cls(**data)


def self_width(n_j, n_jm, constant=SELF_WIDTH_CONSTANT):
    if n_j < 1:
        raise ContractViolation(
            "User must have arrived before deciding (N_j = {})".format(n_j)
        )
    if n_jm == 0:
        return math.inf
    return math.sqrt(constant * math.log(n_j) / n_jm)


def cf_width(n_j, d, c, n_min):
    if not c > 0:
        raise InvalidCoefficientsError(
            "Coefficient norm must be positive: {}".format(c)
        )
    if n_min == 0:
        return math.inf
    return math.sqrt((2 * math.log(d) + 4 * math.log(n_j)) * c ** 2 / n_min)


def counterfactual_estimate(coeffs, member_stats):
    if any(s.pulls == 0 for s in member_stats):
        raise EstimateUnavailableError(
            "Every E-set member must have pulled the arm"
        )
    return float(sum(a * s.mean for a, s in zip(coeffs.a, member_stats)))


def top_pullers(pulls, candidates, size):
    """Users of ``candidates`` with fewer than ``size`` others pulling more.

    This is the top-``size`` set with every tie at the bottom included.
    """
    candidates = np.asarray(candidates)
    counts = pulls[candidates]
    n_greater = (counts[None, :] > counts[:, None]).sum(axis=1)
    return candidates[n_greater < size]


def build_e_set(arm, pulls, opted_in_ids, d, target, oracle=None):
    """Pick the d donors that synthesize ``target`` for ``arm``.

    Parameters
    ----------
    arm: int
        Arm id (kept for error messages and symmetry with the oracle).
    pulls: np.ndarray
        ``N_{i, arm}`` for every user id i.
    opted_in_ids: np.ndarray
        Ids of opted-in users, ascending.
    d: int
        E-set size.
    target: int
        The arriving user.
    oracle: SynthOracle, optional
        When given, E-sets failing its rank check are unavailable.

    Returns
    -------
    e_set: SynthSet or None
        The d highest pullers of ``arm`` among the top-(d+1) opted-in
        users, ``target`` excluded, ties broken by lower id.
    """
    pool = top_pullers(pulls, opted_in_ids, d + 1)
    pool = pool[pool != target]
    if len(pool) < d:
        return None
    # pool is ascending by id, so a stable sort keeps lower ids first
    order = np.argsort(-pulls[pool], kind="stable")
    members = tuple(int(i) for i in pool[order[:d]])
    if oracle is not None and not oracle.rank_ok(members):
        return None
    return SynthSet(target=target, members=members)


def select_arm(
    user,
    table,
    oracle,
    opted_in_ids,
    mode=OPTED_IN,
    self_width_constant=SELF_WIDTH_CONSTANT,
):
    """Choose an arm for the arriving ``user``.

    ``table.arrivals[user]`` must already count the current arrival.

    Returns
    -------
    arm: int
        Argmax of the combined bounds, ties to the lowest arm id.
    bundle: UcbBundle
        Snapshot of every bound used for the decision.
    """
    n_j = int(table.arrivals[user])
    if n_j < 1:
        raise ContractViolation(
            "User {} has not arrived; N_j must include the current "
            "arrival".format(user)
        )
    pulls_j = table.pulls[user].copy()
    n_arms = len(pulls_j)
    pulled = pulls_j > 0

    self_mean = np.full(n_arms, np.nan)
    for m in np.flatnonzero(pulled):
        self_mean[m] = table.stats(user, m).mean
    s_width = np.array(
        [self_width(n_j, int(n), self_width_constant) for n in pulls_j]
    )
    self_ucb = np.where(pulled, self_mean + s_width, np.inf)

    cf_est = np.full(n_arms, np.nan)
    c_width = np.full(n_arms, np.inf)
    cf_ucb = np.full(n_arms, np.inf)
    fallback = np.zeros(n_arms, dtype=bool)
    e_sets = [None] * n_arms
    c_norms = [None] * n_arms
    n_mins = [None] * n_arms
    member_arrivals = [None] * n_arms

    if mode == OPTED_IN:
        d = oracle.dim
        for m in range(n_arms):
            column = table.pulls[:, m]
            e_set = build_e_set(m, column, opted_in_ids, d, user, oracle)
            if e_set is None:
                fallback[m] = True
                continue
            try:
                coeffs = oracle.coefficients(user, e_set.members)
            except OracleUnavailableError:
                fallback[m] = True
                continue
            members = list(e_set.members)
            n_min = int(column[members].min())
            e_sets[m] = e_set.members
            c_norms[m] = coeffs.c
            n_mins[m] = n_min
            member_arrivals[m] = tuple(int(n) for n in table.arrivals[members])
            c_width[m] = cf_width(n_j, d, coeffs.c, n_min)
            if n_min > 0:
                cf_est[m] = counterfactual_estimate(
                    coeffs, [table.stats(i, m) for i in members]
                )
                cf_ucb[m] = cf_est[m] + c_width[m]
    elif mode != OPTED_OUT:
        raise ValueError("Unknown policy mode: {!r}".format(mode))

    combined = np.minimum(self_ucb, cf_ucb)
    arm = int(np.argmax(combined))
    bundle = UcbBundle(
        opted_in=mode == OPTED_IN,
        self_pulls=pulls_j,
        self_mean=self_mean,
        self_width=s_width,
        self_ucb=self_ucb,
        cf_estimate=cf_est,
        cf_width=c_width,
        cf_ucb=cf_ucb,
        combined=combined,
        fallback=fallback,
        e_sets=tuple(e_sets),
        c=tuple(c_norms),
        n_min=tuple(n_mins),
        member_arrivals=tuple(member_arrivals),
    )
    return arm, bundle


class CFUCBPolicy(object):
    """One replication's decision state.

    Opted-in users combine self-experience and counterfactual bounds;
    opted-out users run self-experience UCB and never reach the oracle.
    """

    def __init__(self, users, n_arms, oracle, self_width_constant=SELF_WIDTH_CONSTANT):
        self.users = users
        self.oracle = oracle
        self.self_width_constant = self_width_constant
        self.table = StatsTable(len(users), n_arms)
        self.opted_in_ids = np.array([u.id for u in users if u.opted_in], dtype=np.int64)
        self.log = []
        self.fallbacks = 0

    def mode(self, user):
        return OPTED_IN if self.users[user].opted_in else OPTED_OUT

    def decide(self, event):
        if self.table.arrive(event.user) != event.index:
            raise ContractViolation(
                "Arrival {} of user {} processed out of order".format(
                    event.index, event.user
                )
            )
        arm, bundle = select_arm(
            event.user,
            self.table,
            self.oracle,
            self.opted_in_ids,
            mode=self.mode(event.user),
            self_width_constant=self.self_width_constant,
        )
        self.fallbacks += int(bundle.fallback.sum())
        return arm, bundle

    def update(self, event, arm, reward, bundle, gaps):
        self.table.record_pull(event.user, arm, reward)
        gap = float(gaps.gaps[event.user, arm])
        record = PullRecord(
            global_index=event.global_index,
            time=float(event.time),
            user=event.user,
            arm=arm,
            reward=float(reward),
            bundle=bundle,
            arrivals=int(self.table.arrivals[event.user]),
            suboptimal=bool(gap > 0),
            gap=gap,
        )
        self.log.append(record)
        return record


def dump_records(records, path):
    with open(path, "w") as f:
        for record in records:
            f.write(json.dumps(record.to_dict(), allow_nan=False))
            f.write("\n")


def load_records(path):
    with open(path) as f:
        return [PullRecord.from_dict(json.loads(line)) for line in f if line.strip()]
