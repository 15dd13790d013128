import itertools
import math

import numpy as np
import pytest

from cfucb.exceptions import InvalidDimensionError
from cfucb.exceptions import ModelConfigError
from cfucb.model import ArmProfile
from cfucb.model import RewardModel
from cfucb.model import UserProfile
from cfucb.model import build_gap_table
from cfucb.model import draw_reward
from cfucb.model import generate_profiles
from cfucb.model import mean_reward
from cfucb.model import sample_unit_sphere


def test_sample_unit_sphere_norm():
    rng = np.random.default_rng(0)
    for dim in (1, 2, 5, 20):
        for _ in range(100):
            v = sample_unit_sphere(dim, rng)
            assert v.shape == (dim,)
            assert abs(np.linalg.norm(v) - 1) < 1e-12


def test_sample_unit_sphere_one_dimension():
    rng = np.random.default_rng(1)
    values = [float(sample_unit_sphere(1, rng)[0]) for _ in range(2000)]
    assert set(values) == {-1.0, 1.0}
    assert 0.45 < values.count(1.0) / len(values) < 0.55


def test_sample_unit_sphere_mean_concentrates():
    rng = np.random.default_rng(2)
    samples = np.array([sample_unit_sphere(5, rng) for _ in range(100000)])
    assert np.linalg.norm(samples.mean(axis=0)) < 0.02


def test_sample_unit_sphere_zero_dimension():
    with pytest.raises(InvalidDimensionError):
        sample_unit_sphere(0, np.random.default_rng(0))


def test_mean_reward():
    user = UserProfile(id=0, x=[1, 0, 0])
    arm = ArmProfile(id=0, beta=[1, 0, 0])
    assert mean_reward(user, arm) == 1.0

    user = UserProfile(id=0, x=[0.6, 0.8])
    arm = ArmProfile(id=0, beta=[0.8, -0.6])
    assert abs(mean_reward(user, arm)) < 1e-15

    # 0.3 from observed features, 0.2 from unobserved ones
    user = UserProfile(id=0, x=[0.3, 0.0], y=[0.5])
    arm = ArmProfile(id=0, beta=[1.0, 0.0], lam=[0.4])
    assert mean_reward(user, arm) == pytest.approx(0.5, abs=1e-15)


def test_mean_reward_is_bilinear():
    rng = np.random.default_rng(3)
    for _ in range(50):
        x = sample_unit_sphere(4, rng)
        beta = sample_unit_sphere(4, rng)
        user = UserProfile(id=0, x=x)
        single = mean_reward(user, ArmProfile(id=0, beta=beta))
        double = mean_reward(user, ArmProfile(id=0, beta=2 * beta))
        assert double == pytest.approx(2 * single, abs=1e-14)


def test_zero_loading_matches_no_unobserved():
    x = [0.6, 0.8]
    beta = [0.1, 0.9]
    plain = mean_reward(UserProfile(id=0, x=x), ArmProfile(id=0, beta=beta))
    hidden = mean_reward(
        UserProfile(id=0, x=x, y=[0.3, -0.2]),
        ArmProfile(id=0, beta=beta, lam=[0.0, 0.0]),
    )
    assert plain == hidden


def test_mean_reward_dimension_mismatch():
    with pytest.raises(ModelConfigError):
        mean_reward(UserProfile(id=0, x=[1, 0]), ArmProfile(id=0, beta=[1, 0, 0]))
    with pytest.raises(ModelConfigError):
        mean_reward(
            UserProfile(id=0, x=[1, 0], y=[1.0]), ArmProfile(id=0, beta=[1, 0])
        )


def test_profiles_are_read_only():
    user = UserProfile(id=0, x=[1.0, 0.0])
    with pytest.raises(ValueError):
        user.x[0] = 2.0


def test_reward_model_validation():
    with pytest.raises(ModelConfigError):
        RewardModel(noise_variance=-0.1)
    with pytest.raises(ModelConfigError):
        RewardModel(noise_variance=float("inf"))
    assert RewardModel().noise_variance == 0.1


def test_draw_reward_noiseless():
    user = UserProfile(id=0, x=[0.6, 0.8])
    arm = ArmProfile(id=0, beta=[1.0, 0.0])
    model = RewardModel(noise_variance=0.0)
    rng = np.random.default_rng(0)
    assert draw_reward(user, arm, model, rng) == mean_reward(user, arm)


def test_draw_reward_moments():
    user = UserProfile(id=0, x=[1.0, 0.0])
    arm = ArmProfile(id=0, beta=[0.0, 1.0])
    model = RewardModel(noise_variance=0.1)
    rng = np.random.default_rng(4)
    draws = np.array([draw_reward(user, arm, model, rng) for _ in range(100000)])
    assert abs(draws.mean()) < 0.01
    assert abs(draws.var() - 0.1) < 0.01


def test_draw_reward_deterministic():
    user = UserProfile(id=0, x=[1.0, 0.0])
    arm = ArmProfile(id=0, beta=[0.5, 0.5])
    model = RewardModel()
    first = draw_reward(user, arm, model, np.random.default_rng(9))
    second = draw_reward(user, arm, model, np.random.default_rng(9))
    assert first == second


def test_gap_table_single_arm():
    users, arms = generate_profiles(4, 1, 3, np.random.default_rng(0))
    gaps = build_gap_table(users, arms)
    assert np.all(gaps.gaps == 0)
    assert np.all(gaps.optimal_arm == 0)


def test_gap_table_two_arms():
    user = UserProfile(id=0, x=[0.5, 0.2])
    arms = [ArmProfile(id=0, beta=[1, 0]), ArmProfile(id=1, beta=[0, 1])]
    gaps = build_gap_table([user], arms)
    assert gaps.optimal_arm[0] == 0
    np.testing.assert_allclose(gaps.gaps[0], [0.0, 0.3], atol=1e-15)


def test_gap_table_ties_to_lowest_arm():
    user = UserProfile(id=0, x=[1.0, 0.0])
    arms = [
        ArmProfile(id=0, beta=[0.0, 1.0]),
        ArmProfile(id=1, beta=[1.0, 0.0]),
        ArmProfile(id=2, beta=[1.0, 0.0]),
    ]
    gaps = build_gap_table([user], arms)
    assert gaps.optimal_arm[0] == 1
    assert list(gaps.members_of(1)) == [0]


def test_gap_table_matches_brute_force():
    rng = np.random.default_rng(5)
    users, arms = generate_profiles(3, 3, 4, rng)
    gaps = build_gap_table(users, arms)
    for j, m in itertools.product(range(3), range(3)):
        best = max(range(3), key=lambda n: (mean_reward(users[j], arms[n]), -n))
        assert gaps.optimal_arm[j] == best
        expected = mean_reward(users[j], arms[best]) - mean_reward(users[j], arms[m])
        assert gaps.gaps[j, m] == pytest.approx(expected, abs=1e-15)
    assert np.all(gaps.gaps >= 0)
    assert np.all(gaps.gaps.min(axis=1) == 0)


def test_generate_profiles():
    users, arms = generate_profiles(
        10, 4, 3, np.random.default_rng(6), opt_in_fraction=0.3
    )
    assert [u.id for u in users] == list(range(10))
    assert [a.id for a in arms] == list(range(4))
    assert [u.opted_in for u in users] == [True] * 3 + [False] * 7
    assert all(u.y is None for u in users)
    assert all(abs(np.linalg.norm(a.beta) - 1) < 1e-12 for a in arms)


def test_generate_profiles_unobserved_linear_map():
    users, arms = generate_profiles(
        6, 3, 2, np.random.default_rng(7), unobserved_dim=3
    )
    assert all(u.y.shape == (3,) for u in users)
    assert all(a.lam.shape == (3,) for a in arms)
    # y_j = L x_j, so coefficients reconstructing x also reconstruct y
    xs = np.array([users[1].x, users[2].x])
    a = np.linalg.solve(xs.T, users[0].x)
    rebuilt = a[0] * users[1].y + a[1] * users[2].y
    np.testing.assert_allclose(rebuilt, users[0].y, atol=1e-10)
    assert math.isfinite(mean_reward(users[0], arms[0]))
