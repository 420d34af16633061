import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stackrl.env import (
    FOLLOWER,
    LEADER,
    GameShape,
    LinearMDPModel,
    ModelError,
    dumps_model,
    load_model,
    loads_model,
    random_linear_mdp,
    random_tabular_mdp,
    save_model,
    tabular_to_linear,
)


def random_tables(rng, S, A, B, H):
    P = rng.dirichlet(np.ones(S), size=(H, S, A, B))
    Rl = rng.uniform(-1, 1, size=(H, S, A, B))
    Rf = rng.uniform(-1, 1, size=(H, S, A, B))
    return P, Rl, Rf


def test_shape_rejects_degenerate():
    with pytest.raises(ModelError):
        GameShape(0, 1, 1, 1, 1)
    with pytest.raises(ModelError):
        GameShape(1, 1, 1, 0, 1)


def test_one_hot_features():
    P, Rl, Rf = random_tables(np.random.default_rng(0), 2, 2, 2, 1)
    m = tabular_to_linear(P, Rl, Rf)
    np.testing.assert_array_equal(m.features(0, 0, 0), np.eye(8)[0])
    np.testing.assert_array_equal(m.features(1, 0, 1), np.eye(8)[5])
    assert m.shape.feature_dim == 8


def test_identity_chain():
    P = np.zeros((3, 2, 1, 1, 2))
    P[:, 0, 0, 0, 0] = 1.0
    P[:, 1, 0, 0, 1] = 1.0
    R = np.zeros((3, 2, 1, 1))
    m = tabular_to_linear(P, R, R)
    assert m.shape.feature_dim == 2
    for h in range(3):
        np.testing.assert_array_equal(m.mu[h], np.eye(2))
        np.testing.assert_array_equal(m.transition_distribution(h, 1, 0, 0), [0.0, 1.0])


def test_point_mass_sampling():
    P = np.zeros((1, 3, 1, 1, 3))
    P[0, :, 0, 0, 2] = 1.0
    R = np.zeros((1, 3, 1, 1))
    m = tabular_to_linear(P, R, R)
    for seed in range(10):
        assert m.transition_sample(0, 1, 0, 0, np.random.default_rng(seed)) == 2


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 5), st.integers(1, 3), st.integers(1, 3), st.integers(1, 4), st.integers(0, 10**6))
def test_tabular_round_trip(S, A, B, H, seed):
    P, Rl, Rf = random_tables(np.random.default_rng(seed), S, A, B, H)
    m = tabular_to_linear(P, Rl, Rf)
    assert np.abs(m.P - P).max() <= 1e-15
    np.testing.assert_array_equal(m.R_l, Rl)
    np.testing.assert_array_equal(m.R_f, Rf)
    h, x, a, b = H - 1, S - 1, A - 1, B - 1
    assert m.reward(LEADER, h, x, a, b) == Rl[h, x, a, b]
    assert m.reward(FOLLOWER, h, x, a, b) == Rf[h, x, a, b]


def test_tabular_rejects_invalid():
    P, Rl, Rf = random_tables(np.random.default_rng(1), 2, 2, 2, 2)
    bad = P.copy()
    bad[0, 0, 0, 0] = [0.7, 0.7]
    with pytest.raises(ModelError):
        tabular_to_linear(bad, Rl, Rf)
    with pytest.raises(ModelError):
        tabular_to_linear(P, Rl * 3, Rf)


def test_zero_theta_zero_reward():
    m = random_linear_mdp(GameShape(3, 2, 2, 2, 4), 0)
    z = LinearMDPModel(m.shape, m.phi, m.mu, np.zeros((2, 4)), np.zeros((2, 4)))
    assert np.all(z.R_l == 0) and np.all(z.R_f == 0)
    assert z.reward(LEADER, 1, 2, 1, 0) == 0.0


@settings(max_examples=30, deadline=None)
@given(
    st.integers(1, 6), st.integers(1, 3), st.integers(1, 3), st.integers(1, 4), st.integers(1, 8), st.integers(0, 10**6)
)
def test_generated_models_valid(S, A, B, H, d, seed):
    m = random_linear_mdp(GameShape(S, A, B, H, d), seed)
    assert (m.phi >= 0).all()
    np.testing.assert_allclose(m.phi.sum(-1), 1.0, atol=1e-12)
    assert np.linalg.norm(m.phi, axis=-1).max() <= 1 + 1e-12
    assert (m.P >= 0).all()
    assert np.abs(m.P.sum(-1) - 1).max() <= 1e-12
    assert np.abs(m.R_l).max() <= 1 and np.abs(m.R_f).max() <= 1


def test_generation_deterministic():
    a = random_linear_mdp(GameShape(4, 2, 3, 3, 5), 99)
    b = random_linear_mdp(GameShape(4, 2, 3, 3, 5), 99)
    for name in ("phi", "mu", "theta_l", "theta_f", "P"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))


def test_single_feature_rows_equal_measure():
    m = random_linear_mdp(GameShape(4, 2, 2, 2, 1), 3)
    for h in range(2):
        for x in range(4):
            np.testing.assert_allclose(m.transition_distribution(h, x, 1, 0), m.mu[h, 0], atol=1e-15)


def test_sampling_matches_distribution():
    m = random_linear_mdp(GameShape(5, 2, 2, 1, 3), 4)
    p = m.transition_distribution(0, 2, 1, 0)
    rng = np.random.default_rng(0)
    n = 100_000
    counts = np.bincount([m.transition_sample(0, 2, 1, 0, rng) for _ in range(n)], minlength=5)
    sigma = np.sqrt(n * p * (1 - p))
    assert (np.abs(counts - n * p) <= 3 * sigma + 1e-9).all()


def test_sampling_reproducible():
    m = random_linear_mdp(GameShape(6, 2, 2, 4, 3), 5)

    def trajectory(seed):
        rng = np.random.default_rng(seed)
        x, out = 0, []
        for h in range(4):
            x = m.transition_sample(h, x, h % 2, 1, rng)
            out.append(x)
        return out

    assert trajectory(42) == trajectory(42)


def test_index_errors():
    m = random_tabular_mdp(2, 2, 2, 2, 0)
    with pytest.raises(IndexError):
        m.features(2, 0, 0)
    with pytest.raises(IndexError):
        m.transition_distribution(2, 0, 0, 0)
    with pytest.raises(IndexError):
        m.reward(LEADER, 0, 0, 3, 0)
    with pytest.raises(ValueError):
        m.reward("referee", 0, 0, 0, 0)


def test_invalid_model_surfaces():
    phi = np.ones((1, 1, 1, 2)) / 2  # norm < 1
    mu = np.array([[[0.9, 0.9], [0.1, 0.1]]])  # rows do not sum to 1 through phi
    with pytest.raises(ModelError):
        LinearMDPModel(GameShape(2, 1, 1, 1, 2), np.ones((2, 1, 1, 2)) / 2, mu, np.zeros((1, 2)), np.zeros((1, 2)))
    with pytest.raises(ModelError):
        LinearMDPModel(GameShape(1, 1, 1, 1, 2), phi * 3, np.ones((1, 2, 1)), np.zeros((1, 2)), np.zeros((1, 2)))


def test_serialization_round_trip(tmp_path):
    m = random_linear_mdp(GameShape(3, 2, 2, 2, 4), 8)
    save_model(m, tmp_path / "m.model")
    m2 = load_model(tmp_path / "m.model")
    for name in ("phi", "mu", "theta_l", "theta_f"):
        np.testing.assert_array_equal(getattr(m, name), getattr(m2, name))
    assert dumps_model(m2) == dumps_model(m)


def test_serialization_errors():
    with pytest.raises(ModelError):
        loads_model("[shape]\nnum_states = 2\n")
    with pytest.raises(ModelError):
        loads_model("stray line\n[shape]\n")
