import dataclasses
import math
from typing import Optional

import numpy as np

from .exceptions import InvalidDimensionError
from .exceptions import ModelConfigError


def _frozen_array(values):
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise ModelConfigError(
            "Feature vectors must be one-dimensional, got shape {}".format(
                arr.shape
            )
        )
    arr.flags.writeable = False
    return arr


@dataclasses.dataclass(frozen=True)
class UserProfile(object):
    id: int
    x: np.ndarray
    y: Optional[np.ndarray] = None
    opted_in: bool = True

    def __post_init__(self):
        object.__setattr__(self, "x", _frozen_array(self.x))
        if self.y is not None:
            object.__setattr__(self, "y", _frozen_array(self.y))


@dataclasses.dataclass(frozen=True)
class ArmProfile(object):
    id: int
    beta: np.ndarray
    lam: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "beta", _frozen_array(self.beta))
        if self.lam is not None:
            object.__setattr__(self, "lam", _frozen_array(self.lam))


@dataclasses.dataclass(frozen=True)
class RewardModel(object):
    noise_variance: float = 0.1

    def __post_init__(self):
        if not math.isfinite(self.noise_variance) or self.noise_variance < 0:
            raise ModelConfigError(
                "noise_variance must be finite and >= 0: {}".format(
                    self.noise_variance
                )
            )


@dataclasses.dataclass(frozen=True)
class GapTable(object):
    """Ground truth of one instance, visible to the harness only.

    Attributes
    ----------
    mu: np.ndarray
        True mean rewards, shape (n_users, n_arms).
    optimal_arm: np.ndarray
        Per-user optimal arm, ties broken toward the lowest arm id.
    gaps: np.ndarray
        ``max_n mu[j, n] - mu[j, m]``, zero at the optimal arm.
    """

    mu: np.ndarray
    optimal_arm: np.ndarray
    gaps: np.ndarray

    @property
    def n_users(self):
        return self.mu.shape[0]

    @property
    def n_arms(self):
        return self.mu.shape[1]

    def members_of(self, arm):
        """Users whose optimal arm is ``arm``."""
        return np.flatnonzero(self.optimal_arm == arm)


def sample_unit_sphere(dim, rng):
    """Draw a vector uniformly from the unit sphere in R^dim."""
    if dim < 1:
        raise InvalidDimensionError(
            "Dimension must be positive: {}".format(dim)
        )
    while True:
        v = rng.standard_normal(dim)
        norm = np.linalg.norm(v)
        if norm > 0:
            return v / norm


def mean_reward(user, arm):
    if user.x.shape != arm.beta.shape:
        raise ModelConfigError(
            "Dimension mismatch between user {} ({}) and arm {} ({})".format(
                user.id, user.x.shape[0], arm.id, arm.beta.shape[0]
            )
        )
    mu = float(np.dot(user.x, arm.beta))
    if user.y is not None:
        if arm.lam is None or arm.lam.shape != user.y.shape:
            raise ModelConfigError(
                "User {} has unobserved covariates but arm {} has no "
                "matching loading".format(user.id, arm.id)
            )
        mu += float(np.dot(user.y, arm.lam))
    return mu


def draw_reward(user, arm, model, rng, size=None):
    """One reward, or an array of ``size`` independent rewards."""
    return mean_reward(user, arm) + rng.normal(
        0.0, math.sqrt(model.noise_variance), size
    )


def opted_in_count(opt_in_fraction, n_users):
    """Number of opted-in users; ids ``0 .. count - 1`` opt in."""
    return int(round(opt_in_fraction * n_users))


def build_gap_table(users, arms, model=None):
    mu = np.array([[mean_reward(u, a) for a in arms] for u in users])
    # argmax returns the first maximum, i.e. the lowest arm id on ties
    optimal_arm = np.argmax(mu, axis=1)
    best = mu[np.arange(len(users)), optimal_arm]
    gaps = best[:, None] - mu
    gaps[np.arange(len(users)), optimal_arm] = 0.0
    return GapTable(mu=mu, optimal_arm=optimal_arm, gaps=gaps)


def generate_profiles(
    n_users,
    n_arms,
    dim,
    rng,
    opt_in_fraction=0.5,
    unobserved_dim=0,
):
    """Generate users and arms on the unit sphere.

    Parameters
    ----------
    n_users: int
        Number of users.
    n_arms: int
        Number of arms.
    dim: int
        Dimension of the observable features.
    rng: np.random.Generator
        Source of randomness.
    opt_in_fraction: float
        Share of users that opt in. Users ``0 .. n_opted_in - 1`` opt in.
    unobserved_dim: int
        Dimension of the unobserved covariates; 0 disables them. When
        enabled, ``y_j = L x_j`` for one shared matrix ``L`` so that any
        coefficients reconstructing ``x_j`` also reconstruct ``y_j``.

    Returns
    -------
    users: list of UserProfile
    arms: list of ArmProfile
    """
    n_opted_in = opted_in_count(opt_in_fraction, n_users)
    xs = [sample_unit_sphere(dim, rng) for _ in range(n_users)]
    betas = [sample_unit_sphere(dim, rng) for _ in range(n_arms)]

    if unobserved_dim > 0:
        mixing = rng.standard_normal((unobserved_dim, dim)) / math.sqrt(dim)
        ys = [mixing.dot(x) for x in xs]
        lams = [sample_unit_sphere(unobserved_dim, rng) for _ in range(n_arms)]
    else:
        ys = [None] * n_users
        lams = [None] * n_arms

    users = [
        UserProfile(id=j, x=xs[j], y=ys[j], opted_in=j < n_opted_in)
        for j in range(n_users)
    ]
    arms = [ArmProfile(id=m, beta=betas[m], lam=lams[m]) for m in range(n_arms)]
    return users, arms


def feature_matrix(users):
    return np.vstack([u.x for u in users])
