"""Exact dynamic programming on finite leader-follower games.

Tables are indexed ``[h, x, a, b]`` with 0-based steps; value arrays carry an
extra terminal row ``h = H`` that is identically zero.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .env import LinearMDPModel

ENUMERATION_LIMIT = 10**6


@dataclass
class PolicyTable:
    leader: np.ndarray  # (H, S, A)
    follower: np.ndarray  # (H, S, A, B)

    def validate(self, tol: float = 1e-9) -> None:
        for name, p in (("leader", self.leader), ("follower", self.follower)):
            if (p < -tol).any() or np.abs(p.sum(axis=-1) - 1.0).max() > tol:
                raise ValueError(f"{name} policy rows are not distributions")


@dataclass
class ValueTables:
    Q_l: np.ndarray  # (H, S, A, B)
    Q_f: np.ndarray  # (H, S, A, B)
    q_l: np.ndarray  # (H, S, A)
    vbar_f: np.ndarray  # (H, S, A)
    V_l: np.ndarray  # (H + 1, S)
    V_f: np.ndarray  # (H + 1, S)


def _one_hot(idx: np.ndarray, n: int) -> np.ndarray:
    return np.eye(n)[idx]


def _check_policy(model: LinearMDPModel, policy: PolicyTable) -> None:
    H, S, A, B = model.R_l.shape
    if policy.leader.shape != (H, S, A) or policy.follower.shape != (H, S, A, B):
        raise ValueError(
            f"policy shapes {policy.leader.shape}, {policy.follower.shape} do not match game {(H, S, A, B)}"
        )


def evaluate_joint(model: LinearMDPModel, policy: PolicyTable) -> ValueTables:
    """Bellman recursion for both players under a fixed joint policy."""
    _check_policy(model, policy)
    H, S, A, B = model.R_l.shape
    Q_l = np.zeros((H, S, A, B))
    Q_f = np.zeros((H, S, A, B))
    q_l = np.zeros((H, S, A))
    vbar_f = np.zeros((H, S, A))
    V_l = np.zeros((H + 1, S))
    V_f = np.zeros((H + 1, S))
    for h in range(H - 1, -1, -1):
        Q_l[h] = model.R_l[h] + model.P[h] @ V_l[h + 1]
        Q_f[h] = model.R_f[h] + model.P[h] @ V_f[h + 1]
        q_l[h] = (policy.follower[h] * Q_l[h]).sum(-1)
        vbar_f[h] = (policy.follower[h] * Q_f[h]).sum(-1)
        V_l[h] = (policy.leader[h] * q_l[h]).sum(-1)
        V_f[h] = (policy.leader[h] * vbar_f[h]).sum(-1)
    return ValueTables(Q_l, Q_f, q_l, vbar_f, V_l, V_f)


def stackelberg_solve(model: LinearMDPModel) -> tuple[PolicyTable, ValueTables]:
    """Backward induction: greedy follower per leader action, then greedy leader on marginal q."""
    H, S, A, B = model.R_l.shape
    leader = np.zeros((H, S, A))
    follower = np.zeros((H, S, A, B))
    V_l = np.zeros((H + 1, S))
    V_f = np.zeros((H + 1, S))
    for h in range(H - 1, -1, -1):
        Q_l = model.R_l[h] + model.P[h] @ V_l[h + 1]
        Q_f = model.R_f[h] + model.P[h] @ V_f[h + 1]
        follower[h] = _one_hot(Q_f.argmax(-1), B)
        q_l = (follower[h] * Q_l).sum(-1)
        vbar = (follower[h] * Q_f).sum(-1)
        leader[h] = _one_hot(q_l.argmax(-1), A)
        V_l[h] = (leader[h] * q_l).sum(-1)
        V_f[h] = (leader[h] * vbar).sum(-1)
    policy = PolicyTable(leader, follower)
    return policy, evaluate_joint(model, policy)


def best_response_leader(model: LinearMDPModel, follower_policy: np.ndarray) -> tuple[np.ndarray, float]:
    """Leader's optimal deterministic policy against a fixed follower policy, and its value at x1."""
    H, S, A, B = model.R_l.shape
    if follower_policy.shape != (H, S, A, B):
        raise ValueError("follower policy shape mismatch")
    leader = np.zeros((H, S, A))
    V = np.zeros((H + 1, S))
    for h in range(H - 1, -1, -1):
        Q = model.R_l[h] + model.P[h] @ V[h + 1]
        q = (follower_policy[h] * Q).sum(-1)
        leader[h] = _one_hot(q.argmax(-1), A)
        V[h] = q.max(-1)
    return leader, float(V[0, model.initial_state])


def best_response_follower(model: LinearMDPModel, leader_policy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Follower's optimal deterministic policy against a fixed leader policy.

    Returns the policy and the leader-action-dependent value at ``x1``, one entry
    per first leader action.
    """
    H, S, A, B = model.R_l.shape
    if leader_policy.shape != (H, S, A):
        raise ValueError("leader policy shape mismatch")
    follower = np.zeros((H, S, A, B))
    V = np.zeros((H + 1, S))
    vbar = np.zeros((H, S, A))
    for h in range(H - 1, -1, -1):
        Q = model.R_f[h] + model.P[h] @ V[h + 1]
        follower[h] = _one_hot(Q.argmax(-1), B)
        vbar[h] = Q.max(-1)
        V[h] = (leader_policy[h] * vbar[h]).sum(-1)
    return follower, vbar[0, model.initial_state].copy()


def _deterministic_pair_values(model, leader_acts, follower_acts):
    """Values of every (leader, follower) pair of deterministic policies.

    ``leader_acts`` is ``(nl, H, S)`` and ``follower_acts`` ``(nf, H, S, A)``.
    Returns ``V_l (nl, nf, H, S)`` and ``vbar_f (nl, nf, H, S, A)``.
    """
    H, S, A, B = model.R_l.shape
    nl, nf = len(leader_acts), len(follower_acts)
    V_l = np.zeros((nl, nf, H + 1, S))
    V_f = np.zeros((nl, nf, H + 1, S))
    vbar_f = np.zeros((nl, nf, H, S, A))
    for h in range(H - 1, -1, -1):
        EV_l = np.einsum("xaby,lfy->lfxab", model.P[h], V_l[:, :, h + 1])
        EV_f = np.einsum("xaby,lfy->lfxab", model.P[h], V_f[:, :, h + 1])
        # follower choice per (f, x, a)
        b = follower_acts[:, h]  # (nf, S, A)
        Ql_fb = np.take_along_axis(model.R_l[h][None, None] + EV_l, b[None, :, :, :, None], axis=-1)[..., 0]
        Qf_fb = np.take_along_axis(model.R_f[h][None, None] + EV_f, b[None, :, :, :, None], axis=-1)[..., 0]
        vbar_f[:, :, h] = Qf_fb
        a = leader_acts[:, h]  # (nl, S)
        V_l[:, :, h] = np.take_along_axis(Ql_fb, a[:, None, :, None], axis=-1)[..., 0]
        V_f[:, :, h] = np.take_along_axis(Qf_fb, a[:, None, :, None], axis=-1)[..., 0]
    return V_l[:, :, :H], vbar_f


def brute_force_enumerate(model: LinearMDPModel, tol: float = 1e-10) -> tuple[PolicyTable, ValueTables]:
    """Exhaustive search over deterministic policy pairs.

    For each leader policy the follower's best response is the enumerated policy
    whose leader-action-dependent values dominate all others everywhere. The
    returned pair is the one whose leader policy is in turn a best response, at
    every step and state, to the follower policy it induces.
    """
    H, S, A, B = model.R_l.shape
    nl = A ** (H * S)
    nf = B ** (H * S * A)
    if nl * nf > ENUMERATION_LIMIT:
        raise ValueError(f"enumeration of {nl} x {nf} policy pairs exceeds {ENUMERATION_LIMIT}")
    leader_acts = np.array(list(itertools.product(range(A), repeat=H * S)), dtype=int).reshape(nl, H, S)
    follower_acts = np.array(list(itertools.product(range(B), repeat=H * S * A)), dtype=int).reshape(nf, H, S, A)
    V_l, vbar_f = _deterministic_pair_values(model, leader_acts, follower_acts)

    best_vbar = vbar_f.max(axis=1, keepdims=True)
    dominant = (vbar_f >= best_vbar - tol).all(axis=(2, 3, 4))  # (nl, nf)
    if not dominant.any(axis=1).all():
        raise RuntimeError("no dominant follower response found")
    f_star = dominant.argmax(axis=1)  # first dominant follower policy per leader

    chosen = None
    for li in range(nl):
        against = V_l[:, f_star[li]]  # (nl, H, S): every leader policy vs this follower
        if (against[li] >= against.max(axis=0) - tol).all():
            chosen = li
            break
    if chosen is None:
        raise RuntimeError("no leader policy is a best response to its induced follower")

    policy = PolicyTable(
        _one_hot(leader_acts[chosen], A),
        _one_hot(follower_acts[f_star[chosen]], B),
    )
    return policy, evaluate_joint(model, policy)


def materialize_learner_policy(learner, model: LinearMDPModel) -> PolicyTable:
    """Tabulate the learner's current soft-max policies over every step and state."""
    H = model.shape.horizon
    S, A, B = model.shape.num_states, model.shape.num_leader_actions, model.shape.num_follower_actions
    leader = np.zeros((H, S, A))
    follower = np.zeros((H, S, A, B))
    for h in range(H):
        sv = learner.evaluate(h, model.phi)
        leader[h] = sv.pi_l
        follower[h] = sv.pi_f
    return PolicyTable(leader, follower)
