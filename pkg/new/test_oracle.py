import numpy as np
import pytest

from cfucb.exceptions import OracleUnavailableError
from cfucb.model import build_gap_table
from cfucb.model import generate_profiles
from cfucb.model import mean_reward
from cfucb.model import sample_unit_sphere
from cfucb.oracle import SynthCoefficients
from cfucb.oracle import SynthOracle
from cfucb.oracle import c_norm
from cfucb.oracle import rank_ok
from cfucb.oracle import solve_coefficients


def test_rank_ok():
    assert rank_ok(np.eye(5))
    v = np.array([0.6, 0.8, 0.0])
    assert not rank_ok([v, v, v])
    assert not rank_ok(np.eye(3)[:2])


def test_rank_ok_random_sphere():
    rng = np.random.default_rng(0)
    failures = sum(
        not rank_ok([sample_unit_sphere(5, rng) for _ in range(5)])
        for _ in range(1000)
    )
    assert failures == 0


def test_solve_basis_expansion():
    target = np.array([0.2, -0.5, 0.3, 0.0, 0.7])
    coeffs = solve_coefficients(target, np.eye(5))
    np.testing.assert_allclose(coeffs.a, target, atol=1e-15)
    assert coeffs.c == pytest.approx(1.7)
    assert c_norm(coeffs.a) == pytest.approx(1.7)


def test_solve_two_by_two():
    coeffs = solve_coefficients([1.0, 0.0], [[1.0, 1.0], [1.0, -1.0]])
    np.testing.assert_allclose(coeffs.a, [0.5, 0.5], atol=1e-15)
    assert coeffs.c == pytest.approx(1.0)
    assert coeffs.residual < 1e-10


def test_c_norm():
    coeffs = SynthCoefficients(a=np.array([1.0, -1.0, 1.0]), c=3.0, residual=0.0)
    assert c_norm(coeffs.a) == 3.0
    coeffs = SynthCoefficients(a=np.array([0.5, 0.5]), c=1.0, residual=0.0)
    assert c_norm(coeffs.a) == 1.0


def test_solve_rank_deficient():
    v = [0.6, 0.8]
    with pytest.raises(OracleUnavailableError):
        solve_coefficients([1.0, 0.0], [v, v])


def test_solve_dimension_mismatch():
    with pytest.raises(OracleUnavailableError):
        solve_coefficients([1.0, 0.0, 0.0], np.eye(2))


def test_solve_reconstructs_means():
    rng = np.random.default_rng(1)
    for k in range(200):
        users, arms = generate_profiles(
            6, 8, 5, rng, unobserved_dim=2 if k % 2 else 0
        )
        coeffs = solve_coefficients(users[0].x, [u.x for u in users[1:]])
        assert coeffs.residual < 1e-10
        for arm in arms:
            rebuilt = sum(
                a * mean_reward(u, arm) for a, u in zip(coeffs.a, users[1:])
            )
            assert abs(rebuilt - mean_reward(users[0], arm)) <= 1e-6
        if not k % 2:
            for arm in arms:
                observed = sum(
                    a * float(np.dot(u.x, arm.beta)) for a, u in zip(coeffs.a, users[1:])
                )
                assert abs(observed - float(np.dot(users[0].x, arm.beta))) <= 1e-8


def test_oracle_caches_coefficients():
    users, arms = generate_profiles(7, 3, 3, np.random.default_rng(2))
    oracle = SynthOracle(np.array([u.x for u in users]))
    assert oracle.dim == 3
    first = oracle.coefficients(0, (1, 2, 3))
    second = oracle.coefficients(0, (1, 2, 3))
    assert first is second
    assert oracle.solves == 1
    fresh = solve_coefficients(users[0].x, [users[i].x for i in (1, 2, 3)])
    assert np.array_equal(first.a, fresh.a)
    oracle.coefficients(0, (3, 2, 1))
    assert oracle.solves == 2


def test_oracle_caches_failures():
    features = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 2.0]])
    oracle = SynthOracle(features)
    assert not oracle.rank_ok((1, 2))
    for _ in range(2):
        with pytest.raises(OracleUnavailableError):
            oracle.coefficients(0, (1, 2))
    assert oracle.solves == 1


def test_oracle_on_gap_table_population():
    users, arms = generate_profiles(10, 4, 3, np.random.default_rng(3), unobserved_dim=2)
    gaps = build_gap_table(users, arms)
    oracle = SynthOracle(np.array([u.x for u in users]))
    coeffs = oracle.coefficients(9, (0, 1, 2))
    np.testing.assert_allclose(coeffs.a.dot(gaps.mu[[0, 1, 2]]), gaps.mu[9], atol=1e-6)
