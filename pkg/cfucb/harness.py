from __future__ import print_function

import concurrent.futures
import dataclasses
import json
import os
import os.path as osp
import sys
from typing import Dict
from typing import List

import numpy as np
import pandas as pd
import tqdm

from .arrivals import EXPONENTIAL
from .arrivals import RenewalSpec
from .arrivals import arrival_rate_ratios
from .arrivals import dump_stream
from .arrivals import generate_stream
from .cached_run import cached_replication
from .exceptions import ConfigError
from .exceptions import ContractViolation
from .model import RewardModel
from .model import build_gap_table
from .model import draw_reward
from .model import feature_matrix
from .model import generate_profiles
from .oracle import SynthOracle
from .policy import CFUCBPolicy
from .policy import dump_records
from .theory import lemma6_check

GROUPS = ("opted_in", "opted_out", "all")
LOG_FIT_BURN_IN = 0.2
PLATEAU_SPLIT = 0.6


@dataclasses.dataclass
class RegretSeries(object):
    """Cumulative pseudo-regret per event index, summed over each group.

    ``mean`` holds the pointwise average over replications, ``raw`` the
    per-replication curves (one row each).
    """

    mean: Dict[str, np.ndarray]
    raw: Dict[str, np.ndarray]

    def __len__(self):
        return len(self.mean["all"])

    @classmethod
    def average(cls, curves):
        """Average per-replication curves over their common prefix."""
        length = min(len(c["all"]) for c in curves)
        raw = {g: np.vstack([np.asarray(c[g])[:length] for c in curves]) for g in GROUPS}
        return cls(mean={g: raw[g].mean(axis=0) for g in GROUPS}, raw=raw)


@dataclasses.dataclass
class ReplicationResult(object):
    seed: int
    curves: Dict[str, np.ndarray]
    per_user_regret: np.ndarray
    fallbacks: int
    lemma6: dict
    arrival_rates: dict
    records: list = dataclasses.field(default_factory=list, repr=False)
    events: list = dataclasses.field(default_factory=list, repr=False)

    @property
    def series(self):
        return RegretSeries.average([self.curves])

    def to_dict(self):
        return {
            "seed": self.seed,
            "curves": {g: self.curves[g].tolist() for g in GROUPS},
            "per_user_regret": self.per_user_regret.tolist(),
            "fallbacks": self.fallbacks,
            "lemma6": self.lemma6,
            "arrival_rates": self.arrival_rates,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            seed=data["seed"],
            curves={g: np.array(data["curves"][g]) for g in GROUPS},
            per_user_regret=np.array(data["per_user_regret"]),
            fallbacks=data["fallbacks"],
            lemma6=data["lemma6"],
            arrival_rates=data["arrival_rates"],
        )


@dataclasses.dataclass
class ExperimentResult(object):
    config: object
    series: RegretSeries
    replications: List[ReplicationResult]
    summary: dict


def arrival_specs(config, rng):
    if config.arrival_means is not None:
        means = np.asarray(config.arrival_means, dtype=float)
    else:
        means = rng.uniform(
            config.arrival_mean_low, config.arrival_mean_high, size=config.n_users
        )
    if config.arrival_kind == EXPONENTIAL:
        return [RenewalSpec(kind=EXPONENTIAL, rate=1.0 / m) for m in means]
    return [
        RenewalSpec(kind=config.arrival_kind, mean=float(m), stddev=config.arrival_stddev)
        for m in means
    ]


def _seed_streams(seed):
    """Profile, arrival-parameter, arrival-time and reward-noise seeds."""
    return np.random.SeedSequence(seed).spawn(4)


def replication_instance(config, seed):
    """The users, arms and gap table replication ``seed`` runs on."""
    profile_seq = _seed_streams(seed)[0]
    users, arms = generate_profiles(
        config.n_users,
        config.n_arms,
        config.dim,
        np.random.default_rng(profile_seq),
        opt_in_fraction=config.opt_in_fraction,
        unobserved_dim=config.unobserved_dim,
    )
    model = RewardModel(noise_variance=config.noise_variance)
    return users, arms, build_gap_table(users, arms, model)


def run_replication(config, seed):
    """Simulate one replication end to end.

    Profiles, arrival parameters, arrival times and reward noise draw from
    four independent streams derived from ``seed``.
    """
    _, params_seq, stream_seq, reward_seq = _seed_streams(seed)
    users, arms, gaps = replication_instance(config, seed)
    model = RewardModel(noise_variance=config.noise_variance)
    specs = arrival_specs(config, np.random.default_rng(params_seq))
    events = generate_stream(
        specs,
        np.random.default_rng(stream_seq),
        n_events=config.n_events,
        until=config.horizon_time,
    )

    oracle = SynthOracle(feature_matrix(users))
    policy = CFUCBPolicy(users, config.n_arms, oracle, config.self_width_constant)
    reward_rng = np.random.default_rng(reward_seq)

    step = np.zeros(len(events))
    for i, event in enumerate(events):
        arm, bundle = policy.decide(event)
        reward = draw_reward(users[event.user], arms[arm], model, reward_rng)
        record = policy.update(event, arm, reward, bundle, gaps)
        step[i] = record.gap

    who = np.array([e.user for e in events], dtype=np.int64)
    opted_in = np.array([u.opted_in for u in users], dtype=bool)
    in_mask = opted_in[who] if len(who) else np.zeros(0, dtype=bool)
    curves = {
        "opted_in": np.cumsum(np.where(in_mask, step, 0.0)),
        "opted_out": np.cumsum(np.where(in_mask, 0.0, step)),
        "all": np.cumsum(step),
    }
    per_user = np.bincount(who, weights=step, minlength=config.n_users)
    if len(events):
        expected = {
            "opted_in": per_user[opted_in].sum(),
            "opted_out": per_user[~opted_in].sum(),
            "all": per_user.sum(),
        }
        for group in GROUPS:
            if not np.isclose(curves[group][-1], expected[group], rtol=1e-9, atol=1e-9):
                raise ContractViolation(
                    "Group {} regret {} differs from its members' sum {}".format(
                        group, curves[group][-1], expected[group]
                    )
                )
    if not policy.table.counters.is_consistent():
        raise ContractViolation("Arrival and pull counters disagree")

    report = lemma6_check(policy.log, gaps, config.dim)
    return ReplicationResult(
        seed=seed,
        curves=curves,
        per_user_regret=per_user,
        fallbacks=policy.fallbacks,
        lemma6=report.to_dict(),
        arrival_rates=arrival_rate_ratios(events, config.n_users, span=config.horizon_time),
        records=policy.log,
        events=events,
    )


def _without_logs(result):
    return dataclasses.replace(result, records=[], events=[])


def _replicate(config, seed, log_dir=None, cache_root=None, quiet=True):
    if log_dir is None:
        if cache_root is None:
            return _without_logs(run_replication(config, seed))
        data = cached_replication(
            config.to_dict(),
            seed,
            lambda: run_replication(config, seed).to_dict(),
            cache_root=cache_root,
            quiet=quiet,
        )
        return ReplicationResult.from_dict(data)

    # logs need the full records, which the cache does not keep
    result = run_replication(config, seed)
    dump_records(result.records, osp.join(log_dir, "records-{}.jsonl".format(seed)))
    dump_stream(result.events, osp.join(log_dir, "stream-{}.txt".format(seed)))
    if cache_root is not None:
        data = result.to_dict()
        cached_replication(config.to_dict(), seed, lambda: data, cache_root=cache_root, quiet=True)
    return _without_logs(result)


def fit_log_curve(series, burn_in_fraction=LOG_FIT_BURN_IN):
    """Least-squares fit of ``a + b ln k`` to a cumulative regret curve.

    Parameters
    ----------
    series: array-like
        Curve values at event indices k = 1, 2, ...
    burn_in_fraction: float
        Leading share of the curve left out of the fit.

    Returns
    -------
    a: float
    b: float
    r_squared: float
        0 with ``b = 0`` for a constant curve.
    """
    y = np.asarray(series, dtype=float)
    start = int(np.floor(burn_in_fraction * len(y)))
    y = y[start:]
    if len(y) < 10:
        raise ValueError(
            "Need at least 10 points after burn-in, got {}".format(len(y))
        )
    x = np.log(np.arange(start + 1, start + len(y) + 1, dtype=float))
    y_mean = y.mean()
    ss_tot = float(np.sum((y - y_mean) ** 2))
    if ss_tot == 0.0:
        return float(y_mean), 0.0, 0.0
    x_centered = x - x.mean()
    b = float(np.dot(x_centered, y - y_mean) / np.dot(x_centered, x_centered))
    a = float(y_mean - b * x.mean())
    ss_res = float(np.sum((y - a - b * x) ** 2))
    return a, b, 1.0 - ss_res / ss_tot


def plateau_metric(series, split=PLATEAU_SPLIT):
    """Share of the final regret accrued after ``split`` of the horizon."""
    if not 0 < split < 1:
        raise ValueError("split must lie in (0, 1): {}".format(split))
    y = np.asarray(series, dtype=float)
    index = max(int(round(split * len(y))) - 1, 0)
    final = float(y[-1])
    return (final - float(y[index])) / max(final, 1.0)


def summarize(config, series, replications):
    summary = {
        "schema_version": 1,
        "config": config.to_dict(),
        "n_events": len(series),
        "replications": len(replications),
        "final_regret": {},
        "log_fit": {},
        "plateau": {},
    }
    for group in GROUPS:
        curve = series.mean[group]
        summary["final_regret"][group] = float(curve[-1])
        try:
            a, b, r2 = fit_log_curve(curve)
            summary["log_fit"][group] = {"a": a, "b": b, "r_squared": r2}
        except ValueError:
            summary["log_fit"][group] = None
        summary["plateau"][group] = plateau_metric(curve)

    summary["oracle_fallbacks"] = {
        "total": int(sum(r.fallbacks for r in replications)),
        "per_replication": [int(r.fallbacks) for r in replications],
    }
    lemma6 = {"checked": 0, "hypothesis_failed": 0, "skipped_empty": 0,
              "violations": 0, "width_violations": 0}
    for r in replications:
        for key in lemma6:
            lemma6[key] += r.lemma6[key]
    lemma6["passed"] = lemma6["violations"] == 0 and lemma6["width_violations"] == 0
    summary["lemma6"] = lemma6
    ratios = [r.arrival_rates["ratio"] for r in replications]
    if any(r is None for r in ratios):
        summary["arrival_rate_ratio"] = {"max": None, "mean": None}
    else:
        summary["arrival_rate_ratio"] = {"max": max(ratios), "mean": float(np.mean(ratios))}
    return summary


def run_experiment(config, log_dir=None, cache_root=None, quiet=False):
    """Run ``config.replications`` replications and aggregate them.

    Replication r uses seed ``config.seed + r``. Results are reduced in
    replication order, so the output does not depend on ``config.jobs``.
    """
    seeds = [config.seed + r for r in range(config.replications)]
    if log_dir is not None and not osp.exists(log_dir):
        os.makedirs(log_dir)

    if not quiet:
        print(
            "Running {} replication(s) of {} users x {} arms".format(
                len(seeds), config.n_users, config.n_arms
            ),
            file=sys.stderr,
        )

    if config.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=config.jobs) as pool:
            futures = [
                pool.submit(_replicate, config, seed, log_dir, cache_root, True)
                for seed in seeds
            ]
            iterator = tqdm.tqdm(futures, disable=quiet, unit="rep")
            replications = [f.result() for f in iterator]
    else:
        replications = [
            _replicate(config, seed, log_dir, cache_root, quiet)
            for seed in tqdm.tqdm(seeds, disable=quiet, unit="rep")
        ]

    series = RegretSeries.average([r.curves for r in replications])
    if len(series) == 0:
        raise ConfigError(
            "horizon_time={} produced no arrivals".format(config.horizon_time)
        )
    summary = summarize(config, series, replications)
    if not quiet and summary["oracle_fallbacks"]["total"]:
        print(
            "Oracle unavailable for {} (user, arm) lookups; used self-experience "
            "bounds there".format(summary["oracle_fallbacks"]["total"]),
            file=sys.stderr,
        )
    return ExperimentResult(
        config=config, series=series, replications=replications, summary=summary
    )


def regret_frame(series):
    frame = pd.DataFrame(
        {
            "k": np.arange(1, len(series) + 1),
            "mean_regret_opted_in": series.mean["opted_in"],
            "mean_regret_opted_out": series.mean["opted_out"],
            "mean_regret_all": series.mean["all"],
        }
    )
    return frame


def write_outputs(result, out_dir):
    """Write ``regret.csv`` and ``summary.json`` into ``out_dir``."""
    if not osp.exists(out_dir):
        os.makedirs(out_dir)
    csv_path = osp.join(out_dir, "regret.csv")
    regret_frame(result.series).to_csv(csv_path, index=False)
    summary_path = osp.join(out_dir, "summary.json")
    with open(summary_path, "w") as f:
        json.dump(result.summary, f, indent=2, sort_keys=True, allow_nan=False)
        f.write("\n")
    return csv_path, summary_path
