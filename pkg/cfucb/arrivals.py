import dataclasses
import heapq
import math
from typing import NamedTuple
from typing import Optional

import numpy as np

from .exceptions import ConfigError

EXPONENTIAL = "exponential"
TRUNCATED_GAUSSIAN = "truncated_gaussian"
KINDS = (EXPONENTIAL, TRUNCATED_GAUSSIAN)


@dataclasses.dataclass(frozen=True)
class RenewalSpec(object):
    """Inter-arrival law of one user.

    ``rate`` is used by the exponential kind, ``mean`` and ``stddev`` by the
    positively truncated Gaussian kind.
    """

    kind: str
    rate: Optional[float] = None
    mean: Optional[float] = None
    stddev: Optional[float] = None

    def __post_init__(self):
        if self.kind == EXPONENTIAL:
            if self.rate is None or not self.rate > 0:
                raise ConfigError(
                    "Exponential arrivals need a rate > 0: {}".format(self.rate)
                )
        elif self.kind == TRUNCATED_GAUSSIAN:
            if self.mean is None or not self.mean > 0:
                raise ConfigError(
                    "Truncated Gaussian arrivals need a mean > 0: {}".format(
                        self.mean
                    )
                )
            if self.stddev is None or not self.stddev > 0:
                raise ConfigError(
                    "Truncated Gaussian arrivals need a stddev > 0: {}".format(
                        self.stddev
                    )
                )
        else:
            raise ConfigError(
                "Unknown arrival kind {!r}, expected one of {}".format(
                    self.kind, KINDS
                )
            )


class ArrivalEvent(NamedTuple):
    time: float
    user: int
    index: int
    global_index: int


class CounterTable(object):
    """Arrival counts ``N_j`` and pull counts ``N_jm``."""

    def __init__(self, n_users, n_arms):
        self.arrivals = np.zeros(n_users, dtype=np.int64)
        self.pulls = np.zeros((n_users, n_arms), dtype=np.int64)

    def record_arrival(self, user):
        self.arrivals[user] += 1
        return int(self.arrivals[user])

    def record_pull(self, user, arm):
        self.pulls[user, arm] += 1

    def is_consistent(self):
        return bool(np.array_equal(self.arrivals, self.pulls.sum(axis=1)))


def sample_inter_arrival(spec, rng):
    if spec.kind == EXPONENTIAL:
        u = rng.random()
        while u == 0.0:
            u = rng.random()
        return -math.log(u) / spec.rate
    # resample rather than clamp to keep the truncated shape
    while True:
        sample = rng.normal(spec.mean, spec.stddev)
        if sample > 0:
            return sample


def user_generators(n_users, rng):
    """One independent generator per user, split off ``rng``."""
    seeds = rng.integers(0, 2**63 - 1, size=n_users)
    return [np.random.default_rng(int(s)) for s in seeds]


def generate_stream(specs, rng, n_events=None, until=None):
    """Merge per-user renewal processes into one time-ordered stream.

    Parameters
    ----------
    specs: list of RenewalSpec
        Inter-arrival law of each user, indexed by user id.
    rng: np.random.Generator
        Parent generator; each user draws from its own child stream so a
        user's arrival times do not depend on the other users.
    n_events: int, optional
        Stop after exactly this many events.
    until: float, optional
        Keep every arrival with time <= until.

    Returns
    -------
    events: list of ArrivalEvent
        Sorted by time, ties broken by user id.
    """
    if not specs:
        raise ConfigError("At least one user is required to generate arrivals")
    if (n_events is None) == (until is None):
        raise ConfigError("Exactly one of n_events or until must be given")
    if n_events is not None and n_events < 1:
        raise ConfigError("n_events must be positive: {}".format(n_events))
    if until is not None and not until > 0:
        raise ConfigError("until must be positive: {}".format(until))

    gens = user_generators(len(specs), rng)
    heap = [
        (sample_inter_arrival(spec, gen), user, 1)
        for user, (spec, gen) in enumerate(zip(specs, gens))
    ]
    heapq.heapify(heap)

    events = []
    while heap:
        time, user, index = heap[0]
        if n_events is not None and len(events) >= n_events:
            break
        if until is not None and time > until:
            break
        events.append(ArrivalEvent(time, user, index, len(events) + 1))
        heapq.heapreplace(
            heap,
            (time + sample_inter_arrival(specs[user], gens[user]), user, index + 1),
        )
    return events


def counters_at(records, n_users, n_arms):
    """Rebuild the counter table from processed pull records."""
    table = CounterTable(n_users, n_arms)
    for record in records:
        table.record_arrival(record.user)
        table.record_pull(record.user, record.arm)
    return table


def arrival_rate_ratios(events, n_users, span=None):
    """Empirical per-user arrival rates and their max/min ratio.

    Rates are counts over ``span``, the observation window; it defaults to
    the last arrival time. The ratio is ``None`` when some user never
    arrived. Only reported; membership in the arrival condition's sets is
    an asymptotic property that a finite run cannot certify.
    """
    if not events:
        return {"min_rate": 0.0, "max_rate": 0.0, "ratio": None}
    if span is None:
        span = events[-1].time
    counts = np.bincount([e.user for e in events], minlength=n_users)
    rates = counts / span
    low = float(rates.min())
    return {
        "min_rate": low,
        "max_rate": float(rates.max()),
        "ratio": float(rates.max() / low) if low > 0 else None,
    }


def dump_stream(events, path):
    with open(path, "w") as f:
        for e in events:
            f.write("{!r} {} {}\n".format(float(e.time), e.user, e.index))


def load_stream(path):
    events = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            time, user, index = line.split()
            events.append(
                ArrivalEvent(float(time), int(user), int(index), len(events) + 1)
            )
    return events
