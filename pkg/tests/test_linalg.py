import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stackrl import linalg
from stackrl.linalg import GramState, elliptical_potential_bound


def unit_ball(rng, n, d):
    v = rng.normal(size=(n, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v * rng.random((n, 1)) ** (1.0 / d)


def test_init_identity():
    g = GramState.init(2, 1.0)
    np.testing.assert_array_equal(g.gram, np.eye(2))
    np.testing.assert_array_equal(g.gram_inv, np.eye(2))
    assert g.count == 0


def test_init_scaled_inverse():
    g = GramState.init(3, 2.0)
    np.testing.assert_array_equal(np.diag(g.gram_inv), [0.5, 0.5, 0.5])


@pytest.mark.parametrize("dim, lam", [(0, 1.0), (2, 0.0), (2, -1.0), (1.5, 1.0)])
def test_init_rejects(dim, lam):
    with pytest.raises(ValueError):
        GramState.init(dim, lam)


def test_scalar_update():
    g = GramState.init(1, 1.0).rank_one_update([1.0])
    assert g.gram[0, 0] == 2.0
    assert g.gram_inv[0, 0] == 0.5
    assert g.count == 1


def test_zero_vector_only_counts():
    g = GramState.init(2, 1.0)
    g.rank_one_update([0.0, 0.0])
    np.testing.assert_array_equal(g.gram, np.eye(2))
    np.testing.assert_array_equal(g.gram_inv, np.eye(2))
    assert g.count == 1


def test_update_dimension_mismatch():
    with pytest.raises(ValueError):
        GramState.init(2).rank_one_update([1.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        GramState.init(2).quad_form([1.0])
    with pytest.raises(ValueError):
        GramState.init(2).apply_inverse([1.0])


def test_hundred_updates_match_direct_inverse(rng):
    g = GramState.init(8, 1.0)
    for phi in unit_ball(rng, 100, 8):
        g.rank_one_update(phi)
    assert np.abs(g.gram_inv - np.linalg.inv(g.gram)).max() <= 1e-9
    assert g.count == 100


def test_quad_form_examples():
    assert GramState.init(2, 1.0).quad_form([1.0, 0.0]) == 1.0
    assert GramState.init(2, 4.0).quad_form([1.0, 0.0]) == 0.25
    g = GramState.init(2, 1.0).rank_one_update([1.0, 0.0])
    # inverse of [[2, 0], [0, 1]] by hand
    assert g.quad_form([1.0, 0.0]) == pytest.approx(0.5, abs=1e-15)


def test_quad_form_broadcasts(rng):
    g = GramState.init(3, 1.0)
    for phi in unit_ball(rng, 5, 3):
        g.rank_one_update(phi)
    batch = unit_ball(rng, 12, 3).reshape(3, 4, 3)
    q = g.quad_form(batch)
    assert q.shape == (3, 4)
    assert q[1, 2] == pytest.approx(batch[1, 2] @ np.linalg.solve(g.gram, batch[1, 2]), rel=1e-12)


def test_apply_inverse_examples(rng):
    np.testing.assert_array_equal(GramState.init(2, 1.0).apply_inverse([3.0, 4.0]), [3.0, 4.0])
    np.testing.assert_array_equal(GramState.init(2, 2.0).apply_inverse([2.0, 2.0]), [1.0, 1.0])
    g = GramState.init(4, 1.0)
    for phi in unit_ball(rng, 20, 4):
        g.rank_one_update(phi)
    v = rng.normal(size=4)
    assert np.abs(g.gram @ g.apply_inverse(v) - v).max() <= 1e-9


def test_thousand_updates_relative_frobenius(rng):
    g = GramState.init(16, 1.0)
    for phi in unit_ball(rng, 1000, 16):
        g.rank_one_update(phi)
        direct = np.linalg.inv(g.gram)
        assert np.linalg.norm(g.gram_inv - direct) / np.linalg.norm(direct) <= 1e-8


def test_long_run_identity_residual(monkeypatch, rng):
    monkeypatch.setattr(linalg, "REFRESH_EVERY", 512)
    g = GramState.init(64, 1.0)
    for phi in unit_ball(rng, 3000, 64):
        g.rank_one_update(phi)
    assert np.abs(g.gram @ g.gram_inv - np.eye(64)).max() <= 1e-8


def test_refresh_happens_on_schedule(monkeypatch):
    monkeypatch.setattr(linalg, "REFRESH_EVERY", 3)
    calls = []
    g = GramState.init(2)
    orig = GramState.refresh
    monkeypatch.setattr(GramState, "refresh", lambda self: (calls.append(self.count), orig(self)))
    for _ in range(7):
        g.rank_one_update([0.5, 0.5])
    assert calls == [3, 6]


vec = arrays(np.float64, 5, elements=st.floats(-1, 1, allow_nan=False))


@settings(max_examples=60, deadline=None)
@given(st.lists(vec, min_size=1, max_size=30), vec)
def test_information_never_decreases(updates, probe):
    g = GramState.init(5, 1.0)
    for u in updates:
        u = u / max(1.0, np.linalg.norm(u))
        before = g.quad_form(probe)
        g.rank_one_update(u)
        assert g.quad_form(probe) <= before + 1e-12
        assert np.abs(g.gram_inv - g.gram_inv.T).max() <= 1e-12
        assert np.abs(g.gram - g.gram.T).max() <= 1e-12
    assert g.quad_form(probe) <= np.dot(probe, probe) / g.lam + 1e-12
    assert np.linalg.eigvalsh(g.gram).min() >= g.lam - 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 10), st.integers(1, 400), st.integers(0, 2**32 - 1))
def test_elliptical_potential(d, K, seed):
    rng = np.random.default_rng(seed)
    g = GramState.init(d, 1.0)
    total = 0.0
    for phi in unit_ball(rng, K, d):
        total += g.quad_form(phi)
        g.rank_one_update(phi)
    assert total <= elliptical_potential_bound(d, K, 1.0)


def test_elliptical_potential_unit_vectors_along_axis():
    # all mass on one axis: sum_k 1/k-type decay, bounded by 2 log(1+K)
    g = GramState.init(3, 1.0)
    e = np.array([1.0, 0.0, 0.0])
    total = 0.0
    for _ in range(50):
        total += g.quad_form(e)
        g.rank_one_update(e)
    assert total == pytest.approx(sum(1.0 / k for k in range(1, 51)), rel=1e-12)
    assert total <= elliptical_potential_bound(3, 50)


def test_negative_round_off_clamped():
    g = GramState.init(2, 1.0)
    g.gram_inv = np.array([[-1e-13, 0.0], [0.0, 1.0]])
    assert g.quad_form([1.0, 0.0]) == 0.0
    g.gram_inv = np.array([[-1e-6, 0.0], [0.0, 1.0]])
    with pytest.raises(FloatingPointError):
        g.quad_form([1.0, 0.0])
