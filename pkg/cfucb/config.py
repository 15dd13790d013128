import dataclasses
import json
import math
from typing import List
from typing import Optional

from .arrivals import KINDS
from .arrivals import TRUNCATED_GAUSSIAN
from .exceptions import ConfigError
from .model import opted_in_count


@dataclasses.dataclass(frozen=True)
class ExperimentConfig(object):
    """Every knob of an experiment, with the desk-scale run as defaults.

    Exactly one of ``horizon_events`` / ``horizon_time`` is used; when
    both are unset the horizon is ``10 * n_users * n_arms`` events.
    """

    n_users: int = 50
    n_arms: int = 10
    dim: int = 5
    noise_variance: float = 0.1
    opt_in_fraction: float = 0.5
    arrival_kind: str = TRUNCATED_GAUSSIAN
    arrival_mean_low: float = 0.5
    arrival_mean_high: float = 1.5
    arrival_stddev: float = 0.25
    arrival_means: Optional[List[float]] = None
    horizon_events: Optional[int] = None
    horizon_time: Optional[float] = None
    replications: int = 10
    seed: int = 0
    self_width_constant: float = 4.0
    unobserved_dim: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.arrival_means is not None:
            object.__setattr__(self, "arrival_means", [float(v) for v in self.arrival_means])
        validate(self)

    @property
    def n_events(self):
        if self.horizon_time is not None:
            return None
        if self.horizon_events is not None:
            return self.horizon_events
        return 10 * self.n_users * self.n_arms

    @property
    def n_opted_in(self):
        return opted_in_count(self.opt_in_fraction, self.n_users)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return dataclasses.asdict(self)


def _fail(msg, *args):
    raise ConfigError(msg.format(*args))


def validate(config):
    for name in ("n_users", "n_arms", "dim", "replications", "jobs"):
        value = getattr(config, name)
        if isinstance(value, bool) or not isinstance(value, int) or value < 1:
            _fail("{} must be a positive integer: {!r}", name, value)
    if isinstance(config.seed, bool) or not isinstance(config.seed, int) or config.seed < 0:
        _fail("seed must be a non-negative integer: {!r}", config.seed)
    if not isinstance(config.unobserved_dim, int) or config.unobserved_dim < 0:
        _fail("unobserved_dim must be a non-negative integer: {!r}", config.unobserved_dim)
    if not (math.isfinite(config.noise_variance) and config.noise_variance >= 0):
        _fail("noise_variance must be finite and >= 0: {!r}", config.noise_variance)
    if not 0 <= config.opt_in_fraction <= 1:
        _fail("opt_in_fraction must lie in [0, 1]: {!r}", config.opt_in_fraction)
    if config.opt_in_fraction > 0 and config.n_users < config.dim + 1:
        _fail(
            "n_users must be at least dim + 1 = {} when users opt in: {}",
            config.dim + 1,
            config.n_users,
        )
    if config.arrival_kind not in KINDS:
        _fail("arrival_kind must be one of {}: {!r}", KINDS, config.arrival_kind)
    if not 0 < config.arrival_mean_low <= config.arrival_mean_high:
        _fail(
            "need 0 < arrival_mean_low <= arrival_mean_high: {!r}, {!r}",
            config.arrival_mean_low,
            config.arrival_mean_high,
        )
    if not config.arrival_stddev > 0:
        _fail("arrival_stddev must be positive: {!r}", config.arrival_stddev)
    if config.arrival_means is not None:
        if len(config.arrival_means) != config.n_users:
            _fail(
                "arrival_means needs {} entries, got {}",
                config.n_users,
                len(config.arrival_means),
            )
        if any(not v > 0 for v in config.arrival_means):
            _fail("arrival_means must all be positive")
    if config.horizon_events is not None and config.horizon_time is not None:
        _fail("set at most one of horizon_events and horizon_time")
    if config.horizon_events is not None and (
        not isinstance(config.horizon_events, int) or config.horizon_events < 1
    ):
        _fail("horizon_events must be a positive integer: {!r}", config.horizon_events)
    if config.horizon_time is not None and not config.horizon_time > 0:
        _fail("horizon_time must be positive: {!r}", config.horizon_time)
    if not config.self_width_constant > 0:
        _fail("self_width_constant must be positive: {!r}", config.self_width_constant)


def load_config(path=None, **overrides):
    """Read a flat JSON config file; missing keys keep their defaults.

    Parameters
    ----------
    path: str, optional
        Config file. An empty file or ``{}`` gives the defaults.
    overrides: dict
        Values applied on top of the file (e.g. ``seed`` from the CLI).

    Returns
    -------
    config: ExperimentConfig
    """
    data = {}
    if path is not None:
        with open(path) as f:
            text = f.read()
        if text.strip():
            try:
                data = json.loads(text)
            except ValueError as e:
                raise ConfigError("Cannot parse {}: {}".format(path, e))
        if not isinstance(data, dict):
            raise ConfigError("{} must contain a JSON object".format(path))
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError("Unknown config keys: {}".format(", ".join(unknown)))
    data.update({k: v for k, v in overrides.items() if v is not None})
    for name, value in data.items():
        if isinstance(value, (dict, list)) and name != "arrival_means":
            raise ConfigError("{} must be a scalar".format(name))
    try:
        return ExperimentConfig(**data)
    except TypeError as e:
        raise ConfigError(str(e))
