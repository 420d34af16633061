"""Ground-truth leader-follower linear MDPs.

Step indices are 0-based: ``h`` runs over ``0..H-1`` and ``h == H`` denotes the
terminal step whose values are zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

LEADER = "leader"
FOLLOWER = "follower"
PLAYERS = (LEADER, FOLLOWER)

PROB_TOL = 1e-9
NEG_TOL = 1e-12
NORM_TOL = 1e-12


class ModelError(ValueError):
    """A model violates the linear MDP validity constraints."""


@dataclass(frozen=True)
class GameShape:
    num_states: int
    num_leader_actions: int
    num_follower_actions: int
    horizon: int
    feature_dim: int

    def __post_init__(self):
        for name in ("num_states", "num_leader_actions", "num_follower_actions", "horizon", "feature_dim"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ModelError(f"{name} must be a positive integer, got {v!r}")

    @property
    def num_triples(self) -> int:
        return self.num_states * self.num_leader_actions * self.num_follower_actions


@dataclass(frozen=True, eq=False)
class LinearMDPModel:
    """Features ``phi[x, a, b]``, measures ``mu[h]`` (d x S) and reward vectors ``theta_*[h]``.

    Transition and reward tables are materialized once at construction; the
    model is immutable afterwards.
    """

    shape: GameShape
    phi: np.ndarray
    mu: np.ndarray
    theta_l: np.ndarray
    theta_f: np.ndarray
    initial_state: int = 0
    P: np.ndarray = field(init=False, repr=False)
    R_l: np.ndarray = field(init=False, repr=False)
    R_f: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        s = self.shape
        S, A, B, H, d = s.num_states, s.num_leader_actions, s.num_follower_actions, s.horizon, s.feature_dim
        expect = {
            "phi": (S, A, B, d),
            "mu": (H, d, S),
            "theta_l": (H, d),
            "theta_f": (H, d),
        }
        for name, shp in expect.items():
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != shp:
                raise ModelError(f"{name} has shape {arr.shape}, expected {shp}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not 0 <= self.initial_state < S:
            raise ModelError(f"initial_state {self.initial_state} out of range")

        norms = np.linalg.norm(self.phi, axis=-1)
        if norms.max() > 1.0 + NORM_TOL:
            raise ModelError(f"feature norm {norms.max():.6g} exceeds 1")

        P = np.einsum("xabi,hiy->hxaby", self.phi, self.mu)
        if P.min() < -NEG_TOL:
            raise ModelError(f"transition probability {P.min():.3g} is negative")
        sums = P.sum(axis=-1)
        if np.abs(sums - 1.0).max() > PROB_TOL:
            raise ModelError(f"transition rows sum to {sums.min():.12g}..{sums.max():.12g}")
        P = np.clip(P, 0.0, None)
        P /= P.sum(axis=-1, keepdims=True)

        R_l = np.einsum("xabi,hi->hxab", self.phi, self.theta_l)
        R_f = np.einsum("xabi,hi->hxab", self.phi, self.theta_f)
        for name, R in (("leader", R_l), ("follower", R_f)):
            if np.abs(R).max() > 1.0 + NORM_TOL:
                raise ModelError(f"{name} reward magnitude {np.abs(R).max():.6g} exceeds 1")
        root_d = np.sqrt(d)
        for name in ("theta_l", "theta_f"):
            if np.linalg.norm(getattr(self, name), axis=-1).max() > root_d + NORM_TOL:
                raise ModelError(f"{name} norm exceeds sqrt(d)")
        tv = np.linalg.norm(np.abs(self.mu).sum(axis=-1), axis=-1)
        if tv.max() > root_d + 1e-9:
            raise ModelError("total variation of mu exceeds sqrt(d)")

        for name, arr in (("P", P), ("R_l", R_l), ("R_f", R_f)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def _check_index(self, h=None, x=None, a=None, b=None):
        s = self.shape
        for name, v, hi in (
            ("h", h, s.horizon),
            ("x", x, s.num_states),
            ("a", a, s.num_leader_actions),
            ("b", b, s.num_follower_actions),
        ):
            if v is not None and not 0 <= v < hi:
                raise IndexError(f"{name}={v} out of range [0, {hi})")

    def features(self, x: int, a: int, b: int) -> np.ndarray:
        self._check_index(x=x, a=a, b=b)
        return self.phi[x, a, b]

    def features_at(self, x: int) -> np.ndarray:
        """All features at state ``x`` as an ``(A, B, d)`` array."""
        self._check_index(x=x)
        return self.phi[x]

    def transition_distribution(self, h: int, x: int, a: int, b: int) -> np.ndarray:
        self._check_index(h, x, a, b)
        return self.P[h, x, a, b]

    def transition_sample(self, h: int, x: int, a: int, b: int, rng: np.random.Generator) -> int:
        p = self.transition_distribution(h, x, a, b)
        u = rng.random()
        y = int(np.searchsorted(np.cumsum(p), u, side="right"))
        if y >= p.size:
            y = int(np.flatnonzero(p > 0)[-1])
        return y

    def reward(self, m: str, h: int, x: int, a: int, b: int) -> float:
        self._check_index(h, x, a, b)
        if m == LEADER:
            return float(self.R_l[h, x, a, b])
        if m == FOLLOWER:
            return float(self.R_f[h, x, a, b])
        raise ValueError(f"unknown player {m!r}")


def tabular_to_linear(transitions, rewards_l, rewards_f, initial_state: int = 0) -> LinearMDPModel:
    """Embed tabular tables ``(H, S, A, B, S)`` / ``(H, S, A, B)`` with one-hot features.

    Triple ``(x, a, b)`` maps to index ``(x * A + a) * B + b``.
    """
    P = np.asarray(transitions, dtype=float)
    Rl = np.asarray(rewards_l, dtype=float)
    Rf = np.asarray(rewards_f, dtype=float)
    if P.ndim != 5 or P.shape[1] != P.shape[4]:
        raise ModelError(f"transitions must have shape (H, S, A, B, S), got {P.shape}")
    H, S, A, B, _ = P.shape
    if Rl.shape != (H, S, A, B) or Rf.shape != (H, S, A, B):
        raise ModelError("reward tables must have shape (H, S, A, B)")
    if P.min() < 0 or np.abs(P.sum(axis=-1) - 1.0).max() > PROB_TOL:
        raise ModelError("transition rows must be probability vectors")
    if max(np.abs(Rl).max(), np.abs(Rf).max()) > 1.0:
        raise ModelError("rewards must lie in [-1, 1]")
    d = S * A * B
    phi = np.eye(d).reshape(S, A, B, d)
    mu = P.reshape(H, d, S)
    shape = GameShape(S, A, B, H, d)
    return LinearMDPModel(shape, phi, mu, Rl.reshape(H, d), Rf.reshape(H, d), initial_state)


def random_linear_mdp(shape: GameShape, seed: int) -> LinearMDPModel:
    """Simplex features, Dirichlet measure rows and uniform reward vectors."""
    rng = np.random.default_rng(seed)
    S, A, B, H, d = (
        shape.num_states,
        shape.num_leader_actions,
        shape.num_follower_actions,
        shape.horizon,
        shape.feature_dim,
    )
    phi = rng.dirichlet(np.ones(d), size=(S, A, B))
    mu = rng.dirichlet(np.ones(S), size=(H, d))
    theta_l = rng.uniform(-1.0, 1.0, size=(H, d))
    theta_f = rng.uniform(-1.0, 1.0, size=(H, d))
    return LinearMDPModel(shape, phi, mu, theta_l, theta_f, 0)


def random_tabular_mdp(
    num_states: int,
    num_leader_actions: int,
    num_follower_actions: int,
    horizon: int,
    seed: int,
    reward_low: float = -1.0,
) -> LinearMDPModel:
    """Dirichlet transition rows and rewards uniform in ``[reward_low, 1]``."""
    if min(num_states, num_leader_actions, num_follower_actions, horizon) < 1:
        raise ModelError("degenerate shape")
    rng = np.random.default_rng(seed)
    lead = (horizon, num_states, num_leader_actions, num_follower_actions)
    P = rng.dirichlet(np.ones(num_states), size=lead)
    Rl = rng.uniform(reward_low, 1.0, size=lead)
    Rf = rng.uniform(reward_low, 1.0, size=lead)
    return tabular_to_linear(P, Rl, Rf)


# --- text serialization -------------------------------------------------------

_SHAPE_KEYS = ("num_states", "num_leader_actions", "num_follower_actions", "horizon", "feature_dim")


def _row(v) -> str:
    return " ".join(repr(float(t)) for t in v)


def dumps_model(model: LinearMDPModel) -> str:
    s = model.shape
    lines = ["[shape]"]
    lines += [f"{k} = {getattr(s, k)}" for k in _SHAPE_KEYS]
    lines.append(f"initial_state = {model.initial_state}")
    lines += ["", "[features]"]
    lines += [_row(v) for v in model.phi.reshape(-1, s.feature_dim)]
    for h in range(s.horizon):
        lines += ["", f"[mu h={h + 1}]"]
        lines += [_row(v) for v in model.mu[h]]
    for name in ("theta_l", "theta_f"):
        for h in range(s.horizon):
            lines += ["", f"[{name} h={h + 1}]", _row(getattr(model, name)[h])]
    return "\n".join(lines) + "\n"


def loads_model(text: str) -> LinearMDPModel:
    sections: dict[str, list[str]] = {}
    current = None
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = " ".join(line[1:-1].split())
            if current in sections:
                raise ModelError(f"duplicate section [{current}]")
            sections[current] = []
        elif current is None:
            raise ModelError(f"content before first section: {raw!r}")
        else:
            sections[current].append(line)

    try:
        kv = dict(tuple(t.strip() for t in ln.split("=", 1)) for ln in sections["shape"])
        shape = GameShape(**{k: int(kv[k]) for k in _SHAPE_KEYS})
        initial_state = int(kv.get("initial_state", 0))

        def block(name):
            return np.array([[float(t) for t in ln.split()] for ln in sections[name]], dtype=float)

        H, d = shape.horizon, shape.feature_dim
        phi = block("features").reshape(
            shape.num_states, shape.num_leader_actions, shape.num_follower_actions, d
        )
        mu = np.stack([block(f"mu h={h + 1}") for h in range(H)])
        theta_l = np.stack([block(f"theta_l h={h + 1}").reshape(d) for h in range(H)])
        theta_f = np.stack([block(f"theta_f h={h + 1}").reshape(d) for h in range(H)])
    except (KeyError, ValueError) as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(f"malformed model file: {exc}") from exc
    return LinearMDPModel(shape, phi, mu, theta_l, theta_f, initial_state)


def save_model(model: LinearMDPModel, path) -> None:
    Path(path).write_text(dumps_model(model), encoding="utf-8")


def load_model(path) -> LinearMDPModel:
    return loads_model(Path(path).read_text(encoding="utf-8"))
