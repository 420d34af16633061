"""Optimistic least-squares value iteration with soft-max policies for both players.

The learner only touches states through ``feature_fn(x) -> (A, B, d)``; it never
enumerates the state space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .env import FOLLOWER, LEADER, GameShape
from .linalg import GramState, elliptical_potential_bound
from .policy import sample, soft_max


@dataclass
class HyperParams:
    beta: float
    alpha_l: float
    alpha_f: float
    lam: float = 1.0
    c1: float = 1.0
    failure_prob: float = 0.1
    horizon: int = 1
    episodes: int = 1

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        # alpha = 0 is allowed for the uniform baseline.
        for name in ("alpha_l", "alpha_f"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be in [0, inf], got {getattr(self, name)}")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if not 0 < self.failure_prob < 1:
            raise ValueError("failure_prob must be in (0, 1)")
        if self.horizon < 1 or self.episodes < 1:
            raise ValueError("horizon and episodes must be >= 1")


def log_factor(n: int) -> float:
    """``log(n)``, replaced by 1 for a singleton action set."""
    return math.log(n) if n > 1 else 1.0


def confidence_log_term(shape: GameShape, episodes: int, failure_prob: float) -> float:
    """The log term ``iota`` entering the bonus coefficient."""
    A, B = shape.num_leader_actions, shape.num_follower_actions
    inner = math.log(A * B) + 2.0 * math.log(A) * math.log(B)
    if inner <= 0.0:
        inner = 1.0  # |A| = |B| = 1
    T = episodes * shape.horizon
    return math.log(inner * 4.0 * shape.feature_dim * T / failure_prob)


def default_hyperparams(
    shape: GameShape,
    episodes: int,
    failure_prob: float = 0.1,
    c1: float = 1.0,
    lam: float = 1.0,
) -> HyperParams:
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    if not 0 < failure_prob < 1:
        raise ValueError("failure_prob must be in (0, 1)")
    if not c1 > 0:
        raise ValueError("c1 must be positive")
    H, d = shape.horizon, shape.feature_dim
    iota = confidence_log_term(shape, episodes, failure_prob)
    root_k = math.sqrt(episodes)
    return HyperParams(
        beta=c1 * d * H * math.sqrt(iota),
        alpha_l=log_factor(shape.num_leader_actions) * root_k / H,
        alpha_f=log_factor(shape.num_follower_actions) * root_k / H,
        lam=lam,
        c1=c1,
        failure_prob=failure_prob,
        horizon=H,
        episodes=episodes,
    )


@dataclass(frozen=True)
class TransitionRecord:
    h: int
    x: int
    a: int
    b: int
    r_l: float
    r_f: float
    x_next: int


class StepValues(NamedTuple):
    """Optimistic estimates at one step, broadcast over leading state axes."""

    Q_l: np.ndarray  # (..., A, B)
    Q_f: np.ndarray  # (..., A, B)
    pi_f: np.ndarray  # (..., A, B)
    q_l: np.ndarray  # (..., A)
    vbar_f: np.ndarray  # (..., A)
    pi_l: np.ndarray  # (..., A)
    V_l: np.ndarray  # (...)
    V_f: np.ndarray  # (...)


class _StepBuffer:
    """Growable arrays holding the absorbed transitions of one step."""

    def __init__(self, d: int, A: int, B: int):
        self.n = 0
        self.phi = np.zeros((16, d))
        self.r_l = np.zeros(16)
        self.r_f = np.zeros(16)
        self.x_next = np.zeros(16, dtype=int)
        self.next_feats = np.zeros((16, A, B, d))

    def append(self, phi, r_l, r_f, x_next, next_feats):
        if self.n == len(self.r_l):
            for name in ("phi", "r_l", "r_f", "x_next", "next_feats"):
                old = getattr(self, name)
                new = np.zeros((2 * len(old),) + old.shape[1:], dtype=old.dtype)
                new[: self.n] = old
                setattr(self, name, new)
        i = self.n
        self.phi[i] = phi
        self.r_l[i] = r_l
        self.r_f[i] = r_f
        self.x_next[i] = x_next
        self.next_feats[i] = next_feats
        self.n += 1


class InvariantViolation(RuntimeError):
    """A runtime invariant of the learner or the harness failed."""


class Learner:
    """Shared planner for leader and follower.

    Call :meth:`plan` at the start of every episode, query policies or act, and
    hand observed transitions to :meth:`record_transition`. Records become
    visible to the next :meth:`plan` only.
    """

    def __init__(
        self,
        feature_fn: Callable[[int], np.ndarray],
        horizon: int,
        num_leader_actions: int,
        num_follower_actions: int,
        feature_dim: int,
        params: HyperParams,
        rebuild_check: bool = False,
    ):
        self.feature_fn = feature_fn
        self.H = horizon
        self.A = num_leader_actions
        self.B = num_follower_actions
        self.d = feature_dim
        self.params = params
        self.rebuild_check = rebuild_check
        self.grams = [GramState.init(feature_dim, params.lam) for _ in range(horizon)]
        self.w_l = np.zeros((horizon, feature_dim))
        self.w_f = np.zeros((horizon, feature_dim))
        self.buffers = [_StepBuffer(feature_dim, self.A, self.B) for _ in range(horizon)]
        self.pending: list[TransitionRecord] = []
        self.potential = np.zeros(horizon)
        self.episode = 0

    @classmethod
    def for_model(cls, model, params: HyperParams, **kwargs) -> "Learner":
        s = model.shape
        return cls(
            model.features_at,
            s.horizon,
            s.num_leader_actions,
            s.num_follower_actions,
            s.feature_dim,
            params,
            **kwargs,
        )

    # --- data -----------------------------------------------------------------

    def record_transition(self, rec: TransitionRecord) -> None:
        if not 0 <= rec.h < self.H:
            raise ValueError(f"step {rec.h} out of range")
        if not (0 <= rec.a < self.A and 0 <= rec.b < self.B):
            raise ValueError(f"action pair ({rec.a}, {rec.b}) out of range")
        if abs(rec.r_l) > 1 + 1e-12 or abs(rec.r_f) > 1 + 1e-12:
            raise ValueError("rewards must lie in [-1, 1]")
        self.pending.append(rec)

    def buffer_size(self, h: int) -> int:
        return self.buffers[h].n + sum(1 for r in self.pending if r.h == h)

    def _absorb(self) -> None:
        for rec in self.pending:
            phi = np.asarray(self.feature_fn(rec.x), dtype=float)[rec.a, rec.b]
            gram = self.grams[rec.h]
            self.potential[rec.h] += min(1.0, gram.quad_form(phi))
            gram.rank_one_update(phi)
            nxt = np.asarray(self.feature_fn(rec.x_next), dtype=float)
            self.buffers[rec.h].append(phi, rec.r_l, rec.r_f, rec.x_next, nxt)
        self.pending.clear()

    # --- planning -------------------------------------------------------------

    def plan(self) -> "Learner":
        """Backward regression of both players' weights for the next episode."""
        self._absorb()
        self.episode += 1
        for h in range(self.H - 1, -1, -1):
            buf = self.buffers[h]
            n = buf.n
            if n == 0:
                self.w_l[h] = 0.0
                self.w_f[h] = 0.0
                continue
            if self.rebuild_check:
                self._check_rebuild(h)
            phi = buf.phi[:n]
            if h + 1 < self.H:
                nxt = self.evaluate(h + 1, buf.next_feats[:n])
                v_l, v_f = nxt.V_l, nxt.V_f
            else:
                v_l = v_f = 0.0
            gram = self.grams[h]
            self.w_l[h] = gram.apply_inverse(phi.T @ (buf.r_l[:n] + v_l))
            self.w_f[h] = gram.apply_inverse(phi.T @ (buf.r_f[:n] + v_f))
        return self

    def _check_rebuild(self, h: int) -> None:
        buf = self.buffers[h]
        phi = buf.phi[: buf.n]
        direct = self.params.lam * np.eye(self.d) + phi.T @ phi
        inv = np.linalg.inv(direct)
        err = np.abs(self.grams[h].gram_inv - inv).max() / max(1.0, np.abs(inv).max())
        if err > 1e-8:
            raise InvariantViolation(f"incremental inverse drifted by {err:.3g} at step {h}")

    # --- evaluation -----------------------------------------------------------

    def evaluate(self, h: int, feats: np.ndarray) -> StepValues:
        """All optimistic quantities at step ``h`` for feature tensors ``(..., A, B, d)``."""
        feats = np.asarray(feats, dtype=float)
        lead = feats.shape[:-3]
        if h == self.H:
            zAB = np.zeros(lead + (self.A, self.B))
            zA = np.zeros(lead + (self.A,))
            z = np.zeros(lead)
            return StepValues(zAB, zAB, zAB + 1.0 / self.B, zA, zA, zA + 1.0 / self.A, z, z)
        if not 0 <= h < self.H:
            raise IndexError(f"step {h} out of range")
        p = self.params
        bonus = p.beta * np.sqrt(self.grams[h].quad_form(feats))
        Q_l = np.minimum(feats @ self.w_l[h] + bonus, self.H)
        Q_f = np.minimum(feats @ self.w_f[h] + bonus, self.H)
        pi_f = soft_max(Q_f, p.alpha_f, axis=-1)
        q_l = (pi_f * Q_l).sum(axis=-1)
        vbar_f = (pi_f * Q_f).sum(axis=-1)
        pi_l = soft_max(q_l, p.alpha_l, axis=-1)
        V_l = (pi_l * q_l).sum(axis=-1)
        V_f = (pi_l * vbar_f).sum(axis=-1)
        return StepValues(Q_l, Q_f, pi_f, q_l, vbar_f, pi_l, V_l, V_f)

    def at_state(self, h: int, x: int) -> StepValues:
        return self.evaluate(h, self.feature_fn(x))

    def _check_a(self, a: int) -> None:
        if not 0 <= a < self.A:
            raise IndexError(f"leader action {a} out of range")

    def q_values(self, m: str, h: int, x: int, a: int) -> np.ndarray:
        self._check_a(a)
        sv = self.at_state(h, x)
        if m == LEADER:
            return sv.Q_l[a]
        if m == FOLLOWER:
            return sv.Q_f[a]
        raise ValueError(f"unknown player {m!r}")

    def follower_policy(self, h: int, x: int, a: int) -> np.ndarray:
        self._check_a(a)
        return self.at_state(h, x).pi_f[a]

    def marginal_q(self, h: int, x: int) -> np.ndarray:
        return self.at_state(h, x).q_l

    def leader_policy(self, h: int, x: int) -> np.ndarray:
        return self.at_state(h, x).pi_l

    def value_at(self, m: str, h: int, x: int) -> float:
        if h == self.H:
            return 0.0
        sv = self.at_state(h, x)
        if m == LEADER:
            return float(sv.V_l)
        if m == FOLLOWER:
            return float(sv.V_f)
        raise ValueError(f"unknown player {m!r}")

    def act_leader(self, h: int, x: int, rng: np.random.Generator) -> int:
        return sample(self.leader_policy(h, x), rng)

    def act_follower(self, h: int, x: int, a: int, rng: np.random.Generator) -> int:
        return sample(self.follower_policy(h, x, a), rng)

    # --- invariants -----------------------------------------------------------

    def weight_norm_bound(self) -> float:
        """Bound ``2H sqrt(d k / lam)`` on every weight norm after planning episode ``k``."""
        return 2.0 * self.H * math.sqrt(self.d * self.episode / self.params.lam)

    def weight_norm_violations(self) -> list[str]:
        bound = self.weight_norm_bound()
        out = []
        for name, W in (("leader", self.w_l), ("follower", self.w_f)):
            for h, n in enumerate(np.linalg.norm(W, axis=1)):
                if n > bound * (1 + 1e-12):
                    out.append(f"k={self.episode} h={h} {name}: |w|={n:.6g} > {bound:.6g}")
        return out

    def potential_violations(self) -> list[str]:
        out = []
        for h, g in enumerate(self.grams):
            bound = elliptical_potential_bound(self.d, g.count, self.params.lam)
            if self.params.lam >= 1 and self.potential[h] > bound + 1e-9:
                out.append(f"h={h}: potential {self.potential[h]:.6g} > {bound:.6g} after {g.count} updates")
        return out

    def softmax_gap_violations(self, h: int, x: int, tol: float = 1e-9) -> list[str]:
        """Soft-max suboptimality at ``(h, x)`` against the ``log(n) / alpha`` bound."""
        p = self.params
        sv = self.at_state(h, x)
        out = []
        if 0 < p.alpha_l and self.A > 1:
            gap = sv.q_l.max() - sv.V_l
            if gap > math.log(self.A) / p.alpha_l + tol:
                out.append(f"leader gap {gap:.6g} at h={h} x={x}")
        if 0 < p.alpha_f and self.B > 1:
            gaps = sv.Q_f.max(axis=-1) - sv.vbar_f
            bound = math.log(self.B) / p.alpha_f
            for a in np.flatnonzero(gaps > bound + tol):
                out.append(f"follower gap {gaps[a]:.6g} at h={h} x={x} a={a}")
        return out

    def checkpoint_rows(self) -> list[dict]:
        return [
            {"k": self.episode, "h": h + 1, "w_l": self.w_l[h].tolist(), "w_f": self.w_f[h].tolist()}
            for h in range(self.H)
        ]
