"""Experiment execution: learner rollouts, exact regret accounting, sweeps, fixtures."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .env import (
    GameShape,
    LinearMDPModel,
    load_model,
    random_linear_mdp,
    random_tabular_mdp,
)
from .learner import (
    HyperParams,
    InvariantViolation,
    Learner,
    TransitionRecord,
    default_hyperparams,
)
from .oracle import (
    best_response_follower,
    best_response_leader,
    evaluate_joint,
    materialize_learner_policy,
)
from .policy import soft_max

MODES = ("softmax", "greedy", "uniform")
CSV_COLUMNS = ("k", "leader_inc", "leader_cum", "follower_inc", "follower_cum", "a1", "wall_ms")
REGRET_TOL = 1e-9


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    # model source
    model_kind: str = "tabular"  # tabular | linear | file
    model_seed: int = 0
    model_path: str | None = None
    num_states: int = 2
    num_leader_actions: int = 2
    num_follower_actions: int = 2
    horizon: int = 3
    feature_dim: int = 4  # linear models only; tabular uses S*A*B
    reward_low: float = -1.0  # tabular models only
    # run
    episodes: int = 100
    mode: str = "softmax"
    cadence: int = 1
    seed: int = 0
    check_invariants: bool = True
    wall_clock: bool = False
    checkpoint: bool = False
    # hyperparameters; None means the default schedule
    c1: float = 1.0
    failure_prob: float = 0.1
    lam: float = 1.0
    beta: float | None = None
    alpha_l: float | None = None
    alpha_f: float | None = None

    def __post_init__(self):
        if self.model_kind not in ("tabular", "linear", "file"):
            raise ConfigError(f"unknown model_kind {self.model_kind!r}")
        if self.model_kind == "file" and not self.model_path:
            raise ConfigError("model_kind = file requires model_path")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.episodes < 1:
            raise ConfigError("episodes must be >= 1")
        if self.cadence < 1:
            raise ConfigError("cadence must be >= 1")

    def build_model(self) -> LinearMDPModel:
        if self.model_kind == "file":
            return load_model(self.model_path)
        if self.model_kind == "tabular":
            return random_tabular_mdp(
                self.num_states,
                self.num_leader_actions,
                self.num_follower_actions,
                self.horizon,
                self.model_seed,
                reward_low=self.reward_low,
            )
        shape = GameShape(
            self.num_states, self.num_leader_actions, self.num_follower_actions, self.horizon, self.feature_dim
        )
        return random_linear_mdp(shape, self.model_seed)

    def hyperparams(self, shape: GameShape) -> HyperParams:
        hp = default_hyperparams(shape, self.episodes, self.failure_prob, self.c1, self.lam)
        if self.beta is not None:
            hp = replace(hp, beta=self.beta)
        if self.alpha_l is not None:
            hp = replace(hp, alpha_l=self.alpha_l)
        if self.alpha_f is not None:
            hp = replace(hp, alpha_f=self.alpha_f)
        if self.mode == "greedy":
            hp = replace(hp, alpha_l=math.inf, alpha_f=math.inf)
        elif self.mode == "uniform":
            hp = replace(hp, alpha_l=0.0, alpha_f=0.0)
        return hp


@dataclass
class RegretRecord:
    k: int
    leader_inc: float
    leader_cum: float
    follower_inc: float
    follower_cum: float
    a1: int
    wall_ms: float
    evaluated: bool = True


def run_experiment(
    config: ExperimentConfig,
    model: LinearMDPModel | None = None,
    on_episode: Callable[[int, Learner], None] | None = None,
    checkpoint_path: str | Path | None = None,
) -> list[RegretRecord]:
    """Run ``config.episodes`` episodes and return per-episode regret records.

    ``on_episode(k, learner)`` is called right after planning in every episode.
    With ``cadence > 1`` regret is evaluated every ``cadence``-th episode (and the
    first) and the last increments are carried forward in between.
    """
    if model is None:
        model = config.build_model()
    s = model.shape
    params = config.hyperparams(s)
    learner = Learner.for_model(model, params)
    rng_env, rng_leader, rng_follower = (
        np.random.default_rng(ss) for ss in np.random.SeedSequence(config.seed).spawn(3)
    )
    x1 = model.initial_state
    records: list[RegretRecord] = []
    leader_cum = follower_cum = 0.0
    last = (0.0, 0.0)
    ckpt = open(checkpoint_path, "w", encoding="utf-8", newline="\n") if checkpoint_path else None
    try:
        for k in range(1, config.episodes + 1):
            t0 = time.perf_counter()
            learner.plan()
            if config.check_invariants:
                bad = learner.potential_violations()
                if bad:
                    raise InvariantViolation("elliptical potential: " + "; ".join(bad))
            if on_episode is not None:
                on_episode(k, learner)
            if ckpt is not None:
                for row in learner.checkpoint_rows():
                    ckpt.write(json.dumps(row) + "\n")

            evaluate = (k - 1) % config.cadence == 0
            if evaluate:
                policy = materialize_learner_policy(learner, model)
                values = evaluate_joint(model, policy)
                _, best_l = best_response_leader(model, policy.follower)
                _, best_f = best_response_follower(model, policy.leader)
                if config.check_invariants:
                    bad = []
                    for h in range(s.horizon):
                        for x in range(s.num_states):
                            bad += learner.softmax_gap_violations(h, x)
                    if bad:
                        raise InvariantViolation("soft-max gap: " + "; ".join(bad[:5]))

            x = x1
            a1 = -1
            for h in range(s.horizon):
                sv = learner.at_state(h, x)
                a = _draw(sv.pi_l, rng_leader)
                b = _draw(sv.pi_f[a], rng_follower)
                if h == 0:
                    a1 = a
                x_next = model.transition_sample(h, x, a, b, rng_env)
                learner.record_transition(
                    TransitionRecord(h, x, a, b, model.R_l[h, x, a, b], model.R_f[h, x, a, b], x_next)
                )
                x = x_next

            if evaluate:
                leader_inc = float(best_l - values.V_l[0, x1])
                follower_inc = float(best_f[a1] - values.vbar_f[0, x1, a1])
                if config.check_invariants and min(leader_inc, follower_inc) < -REGRET_TOL:
                    raise InvariantViolation(
                        f"negative regret increment at k={k}: leader {leader_inc:.3g}, follower {follower_inc:.3g}"
                    )
                last = (leader_inc, follower_inc)
            else:
                leader_inc, follower_inc = last
            leader_cum += leader_inc
            follower_cum += follower_inc
            wall = (time.perf_counter() - t0) * 1e3 if config.wall_clock else 0.0
            records.append(
                RegretRecord(k, leader_inc, leader_cum, follower_inc, follower_cum, a1, wall, evaluate)
            )
    finally:
        if ckpt is not None:
            ckpt.close()
    return records


def _draw(probs: np.ndarray, rng: np.random.Generator) -> int:
    # Same inverse-CDF rule as policy.sample, without re-validating each row.
    i = int(np.searchsorted(np.cumsum(probs), rng.random(), side="right"))
    if i >= probs.size:
        i = int(np.flatnonzero(probs > 0)[-1])
    return i


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def records_to_csv(records: list[RegretRecord], extra: dict | None = None) -> str:
    extra = extra or {}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(extra) + list(CSV_COLUMNS))
    for r in records:
        w.writerow([_fmt(v) if not isinstance(v, str) else v for v in extra.values()] + [_fmt(getattr(r, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def write_csv(records: list[RegretRecord], path) -> None:
    Path(path).write_text(records_to_csv(records), encoding="utf-8", newline="\n")


def read_csv(path) -> dict[str, np.ndarray]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path} holds no records")
    missing = set(CSV_COLUMNS) - set(rows[0])
    if missing:
        raise ValueError(f"{path} lacks columns {sorted(missing)}")
    return {c: np.array([float(r[c]) for r in rows]) for c in rows[0]}


def sublinearity_ratio(cum: np.ndarray, early_fraction: float = 0.1) -> float:
    """Final average regret over the average regret of the first episodes."""
    K = len(cum)
    n0 = max(1, int(round(early_fraction * K)))
    early = cum[n0 - 1] / n0
    final = cum[-1] / K
    if early == 0:
        return 0.0 if final == 0 else math.inf
    return float(final / early)


def summarize(columns: dict[str, np.ndarray]) -> dict[str, float]:
    K = len(columns["k"])
    return {
        "episodes": K,
        "leader_cum": float(columns["leader_cum"][-1]),
        "follower_cum": float(columns["follower_cum"][-1]),
        "leader_ratio": sublinearity_ratio(columns["leader_cum"]),
        "follower_ratio": sublinearity_ratio(columns["follower_cum"]),
    }


# --- sweeps -------------------------------------------------------------------


@dataclass
class SweepCell:
    index: int
    coords: dict
    seed: int
    records: list[RegretRecord] | None = None
    error: str | None = None


def grid_cells(base: ExperimentConfig, grid: dict[str, list]) -> list[tuple[dict, ExperimentConfig]]:
    """Expand a grid into configs. Keys are iterated in sorted order.

    Unless ``seed`` is itself a grid axis, cell ``i`` runs with seed ``base.seed + i``.
    """
    names = {f.name for f in fields(ExperimentConfig)}
    keys = sorted(grid)
    for key in keys:
        if key not in names:
            raise ConfigError(f"unknown sweep axis {key!r}")
    out = []
    for i, combo in enumerate(itertools.product(*(grid[k] for k in keys))):
        coords = dict(zip(keys, combo))
        if "seed" not in coords:
            coords_seed = base.seed + i
            cfg = replace(base, **coords, seed=coords_seed)
        else:
            cfg = replace(base, **coords)
        out.append((coords, cfg))
    return out


def _run_cell(args):
    i, coords, cfg, model = args
    try:
        return SweepCell(i, coords, cfg.seed, run_experiment(cfg, model=model))
    except Exception as exc:  # recorded per cell, not fatal for the sweep
        return SweepCell(i, coords, cfg.seed, error=f"{type(exc).__name__}: {exc}")


def run_sweep(
    base: ExperimentConfig, grid: dict[str, list], workers: int = 1, model: LinearMDPModel | None = None
) -> list[SweepCell]:
    jobs = [(i, coords, cfg, model) for i, (coords, cfg) in enumerate(grid_cells(base, grid))]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_run_cell, jobs))
    else:
        cells = [_run_cell(j) for j in jobs]
    return sorted(cells, key=lambda c: c.index)


def sweep_to_csv(cells: list[SweepCell]) -> str:
    chunks = []
    header_done = False
    for c in cells:
        if c.records is None:
            continue
        text = records_to_csv(c.records, extra={**c.coords, "seed": c.seed} if "seed" not in c.coords else c.coords)
        if header_done:
            text = text.split("\n", 1)[1]
        header_done = True
        chunks.append(text)
    return "".join(chunks)


# --- greedy failure fixture ---------------------------------------------------


@dataclass
class FixtureReport:
    M: float
    eps: float
    alpha_f: float
    horizon: int
    q_dist: float  # sup-norm distance between the two Q-table pairs
    greedy_discrepancy: float  # leader marginal-q shift at a1 from the follower policy change
    softmax_discrepancy: float
    greedy_full: float  # shift when both leader and follower tables change
    softmax_full: float
    lemma_bound: float  # eps' + 2 alpha_f eps' H
    scaled_bound: float  # eps' + 2 alpha_f eps' max|Q_l|

    @property
    def within_lemma_bound(self) -> bool:
        return self.softmax_full <= self.lemma_bound + 1e-15 and self.softmax_discrepancy <= self.lemma_bound + 1e-15

    @property
    def within_scaled_bound(self) -> bool:
        return self.softmax_full <= self.scaled_bound + 1e-15


def greedy_failure_tables(M: float = 10.0, eps: float = 0.01):
    """Two eps-close leader/follower Q tables over (a, b) with opposite greedy follower choices."""
    Q_l = np.array([[M - eps, 0.0], [0.0, 0.0]])
    Q_f = np.array([[1 - eps / 2, 1 + eps / 2], [1.0, 1 - eps / 2]])
    Qt_l = np.array([[M, 0.0], [0.0, 0.0]])
    Qt_f = np.array([[1 + eps / 2, 1 - eps / 2], [1 + eps / 2, 1 - eps / 2]])
    return Q_l, Q_f, Qt_l, Qt_f


def greedy_failure_fixture(M: float = 10.0, eps: float = 0.01, alpha_f: float = 1.0, horizon: int = 1) -> FixtureReport:
    Q_l, Q_f, Qt_l, Qt_f = greedy_failure_tables(M, eps)

    def marginal(Ql, Qf, alpha):
        return (soft_max(Qf, alpha, axis=-1) * Ql).sum(-1)

    def shift(alpha, perturbed_leader):
        q = marginal(Q_l, Q_f, alpha)
        qt = marginal(Qt_l if perturbed_leader else Q_l, Qt_f, alpha)
        return float(np.abs(q - qt).max())

    q_dist = float(max(np.abs(Q_l - Qt_l).max(), np.abs(Q_f - Qt_f).max()))
    return FixtureReport(
        M=M,
        eps=eps,
        alpha_f=alpha_f,
        horizon=horizon,
        q_dist=q_dist,
        greedy_discrepancy=shift(math.inf, False),
        softmax_discrepancy=shift(alpha_f, False),
        greedy_full=shift(math.inf, True),
        softmax_full=shift(alpha_f, True),
        lemma_bound=q_dist + 2 * alpha_f * q_dist * horizon,
        scaled_bound=q_dist + 2 * alpha_f * q_dist * float(np.abs(Qt_l).max()),
    )


def config_as_dict(config: ExperimentConfig) -> dict:
    return asdict(config)
