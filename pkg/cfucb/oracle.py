"""Synthetic control oracle realized exactly from observable features."""

import dataclasses
from typing import Tuple

import numpy as np

from .exceptions import OracleUnavailableError

RANK_RTOL = 1e-10
RESIDUAL_TOL = 1e-8


@dataclasses.dataclass(frozen=True)
class SynthSet(object):
    target: int
    members: Tuple[int, ...]


@dataclasses.dataclass(frozen=True)
class SynthCoefficients(object):
    a: np.ndarray
    c: float
    residual: float


def rank_ok(features):
    """Whether the stacked vectors span their ambient space.

    Parameters
    ----------
    features: sequence of np.ndarray
        Vectors of a common dimension d.

    Returns
    -------
    ok: bool
        True iff the smallest of the d leading singular values exceeds
        ``RANK_RTOL`` times the largest.
    """
    matrix = np.atleast_2d(np.asarray(features, dtype=float))
    n_vectors, dim = matrix.shape
    if n_vectors < dim:
        return False
    s = np.linalg.svd(matrix, compute_uv=False)
    if s[0] == 0:
        return False
    return bool(s[dim - 1] > RANK_RTOL * s[0])


def c_norm(a):
    """L1 norm of a coefficient vector."""
    return float(np.sum(np.abs(a)))


def solve_coefficients(target_x, member_xs):
    """Express ``target_x`` as a linear combination of ``member_xs``.

    The minimum-norm least-squares solution is returned; with d linearly
    independent members it is the unique exact solution.
    """
    member_xs = np.atleast_2d(np.asarray(member_xs, dtype=float))
    target_x = np.asarray(target_x, dtype=float)
    if member_xs.shape[1] != target_x.shape[0]:
        raise OracleUnavailableError(
            "Member dimension {} does not match target dimension {}".format(
                member_xs.shape[1], target_x.shape[0]
            )
        )
    if not rank_ok(member_xs):
        raise OracleUnavailableError("Members are rank deficient")

    a, _, _, _ = np.linalg.lstsq(member_xs.T, target_x, rcond=None)
    residual = float(np.linalg.norm(member_xs.T.dot(a) - target_x))
    if residual > RESIDUAL_TOL:
        raise OracleUnavailableError(
            "Residual {:.3e} exceeds tolerance {:.0e}".format(
                residual, RESIDUAL_TOL
            )
        )
    a.flags.writeable = False
    return SynthCoefficients(a=a, c=c_norm(a), residual=residual)


class SynthOracle(object):
    """Coefficient and rank lookups over a fixed population of users.

    Features never change during a replication, so results are cached by
    ``(target, members)`` and never invalidated. Failures are cached as
    well and re-raised on lookup.
    """

    def __init__(self, features):
        self.features = np.asarray(features, dtype=float)
        self._coefficients = {}
        self._ranks = {}
        self.solves = 0

    @property
    def dim(self):
        return self.features.shape[1]

    def rank_ok(self, members):
        members = tuple(members)
        ok = self._ranks.get(members)
        if ok is None:
            ok = rank_ok(self.features[list(members)])
            self._ranks[members] = ok
        return ok

    def coefficients(self, target, members):
        key = (target, tuple(members))
        try:
            result = self._coefficients[key]
        except KeyError:
            self.solves += 1
            try:
                result = solve_coefficients(
                    self.features[target], self.features[list(key[1])]
                )
            except OracleUnavailableError as e:
                result = e
            self._coefficients[key] = result
        if isinstance(result, OracleUnavailableError):
            raise result
        return result
