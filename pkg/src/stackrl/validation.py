"""Self-contained invariant suite behind the ``validate`` command.

Each check is deterministic (fixed seeds) and returns ``(ok, detail)``.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .env import GameShape, random_linear_mdp, random_tabular_mdp, tabular_to_linear
from .harness import ExperimentConfig, run_experiment
from .learner import default_hyperparams
from .linalg import GramState, elliptical_potential_bound
from .oracle import (
    PolicyTable,
    best_response_follower,
    best_response_leader,
    brute_force_enumerate,
    evaluate_joint,
    stackelberg_solve,
)
from .policy import expected_value, soft_max


def _unit_ball(rng, n, d):
    v = rng.normal(size=(n, d))
    r = rng.random(n) ** (1.0 / d)
    return v / np.linalg.norm(v, axis=1, keepdims=True) * r[:, None]


def _random_policy(rng, H, S, A, B) -> PolicyTable:
    return PolicyTable(rng.dirichlet(np.ones(A), size=(H, S)), rng.dirichlet(np.ones(B), size=(H, S, A)))


def check_sherman_morrison():
    rng = np.random.default_rng(0)
    g = GramState.init(16, 1.0)
    worst = 0.0
    for phi in _unit_ball(rng, 1000, 16):
        g.rank_one_update(phi)
        direct = np.linalg.inv(g.gram)
        worst = max(worst, np.linalg.norm(g.gram_inv - direct) / np.linalg.norm(direct))
    return worst <= 1e-8, f"max relative Frobenius error {worst:.3g}"


def check_gram_symmetry_and_monotonicity():
    rng = np.random.default_rng(1)
    g = GramState.init(6, 1.0)
    probes = _unit_ball(rng, 50, 6)
    for phi in _unit_ball(rng, 300, 6):
        before = g.quad_form(probes)
        g.rank_one_update(phi)
        if np.abs(g.gram_inv - g.gram_inv.T).max() > 1e-12 or np.abs(g.gram - g.gram.T).max() > 1e-12:
            return False, "asymmetric state"
        if (g.quad_form(probes) > before + 1e-12).any():
            return False, "quadratic form increased after an update"
    return True, "300 updates"


def check_elliptical_potential():
    rng = np.random.default_rng(2)
    for d in (1, 4, 12):
        g = GramState.init(d, 1.0)
        total = 0.0
        for k, phi in enumerate(_unit_ball(rng, 2000, d), start=1):
            total += g.quad_form(phi)
            g.rank_one_update(phi)
            if total > elliptical_potential_bound(d, k):
                return False, f"d={d} k={k}: {total:.4g} > {elliptical_potential_bound(d, k):.4g}"
    return True, "d in {1, 4, 12}, K = 2000"


def check_softmax_lipschitz():
    rng = np.random.default_rng(3)
    worst = -np.inf
    for alpha in (0.1, 1.0, 10.0):
        for n in range(1, 9):
            x = rng.normal(scale=3.0, size=(1250, n))
            y = x + rng.normal(scale=rng.choice([1e-3, 0.1, 1.0]), size=(1250, n))
            lhs = np.abs(soft_max(x, alpha) - soft_max(y, alpha)).sum(-1)
            rhs = 2 * alpha * np.abs(x - y).max(-1)
            worst = max(worst, (lhs - rhs).max())
    return worst <= 1e-12, f"max(lhs - rhs) = {worst:.3g}"


def check_softmax_gap():
    rng = np.random.default_rng(4)
    worst = -np.inf
    for alpha in (0.1, 1.0, 10.0):
        for n in range(1, 9):
            x = rng.normal(scale=3.0, size=(1250, n))
            p = soft_max(x, alpha)
            gap = x.max(-1) - (p * x).sum(-1)
            worst = max(worst, (gap - math.log(n) / alpha).max())
    return worst <= 1e-12, f"max(gap - log n / alpha) = {worst:.3g}"


def check_softmax_simplex_and_monotone():
    rng = np.random.default_rng(5)
    for _ in range(200):
        n = int(rng.integers(1, 9))
        x = rng.normal(size=n)
        prev = -1.0
        for alpha in (0.0, 0.01, 0.1, 1.0, 10.0, 100.0, 1e4, math.inf):
            p = soft_max(x, alpha)
            if (p < 0).any() or abs(p.sum() - 1) > 1e-12:
                return False, f"invalid distribution at alpha={alpha}"
            top = p[np.argmax(x)]
            if top < prev - 1e-12:
                return False, f"argmax mass decreased at alpha={alpha}"
            prev = top
    return True, "200 vectors x 8 temperatures"


def check_tabular_roundtrip():
    rng = np.random.default_rng(6)
    for i in range(20):
        S, A, B, H = (int(v) for v in rng.integers(1, [6, 4, 4, 5]))
        P = rng.dirichlet(np.ones(S), size=(H, S, A, B))
        Rl = rng.uniform(-1, 1, size=(H, S, A, B))
        Rf = rng.uniform(-1, 1, size=(H, S, A, B))
        m = tabular_to_linear(P, Rl, Rf)
        if np.abs(m.P - P).max() > 1e-15 or np.abs(m.R_l - Rl).max() > 1e-15 or np.abs(m.R_f - Rf).max() > 1e-15:
            return False, f"instance {i} does not round-trip"
    return True, "20 instances"


def check_generated_models():
    for seed in range(10):
        shape = GameShape(4, 3, 2, 3, 1 + seed % 5)
        m = random_linear_mdp(shape, seed)
        if np.abs(m.R_l).max() > 1 or np.abs(m.R_f).max() > 1:
            return False, f"seed {seed}: reward out of range"
        if np.linalg.norm(m.phi, axis=-1).max() > 1 + 1e-12:
            return False, f"seed {seed}: feature norm > 1"
        if np.abs(m.P.sum(-1) - 1).max() > 1e-12 or m.P.min() < 0:
            return False, f"seed {seed}: invalid transitions"
    return True, "10 models"


def check_bellman_consistency():
    rng = np.random.default_rng(7)
    worst = 0.0
    for seed in range(10):
        m = random_linear_mdp(GameShape(3, 2, 3, 4, 5), seed)
        pol = _random_policy(rng, 4, 3, 2, 3)
        v = evaluate_joint(m, pol)
        for h in range(4):
            res_l = v.Q_l[h] - m.R_l[h] - m.P[h] @ v.V_l[h + 1]
            res_f = v.Q_f[h] - m.R_f[h] - m.P[h] @ v.V_f[h + 1]
            worst = max(worst, np.abs(res_l).max(), np.abs(res_f).max())
            bound = 4 - h
            if np.abs(v.Q_l[h]).max() > bound + 1e-12 or np.abs(v.Q_f[h]).max() > bound + 1e-12:
                return False, f"|Q| exceeds {bound} at h={h}"
    return worst <= 1e-12, f"max residual {worst:.3g}"


def check_brute_force_equivalence():
    worst = 0.0
    for seed in range(20):
        m = random_tabular_mdp(2, 2, 2, 2, seed)
        _, v = stackelberg_solve(m)
        _, vb = brute_force_enumerate(m)
        worst = max(worst, abs(v.V_l[0, 0] - vb.V_l[0, 0]))
    return worst <= 1e-9, f"max |difference| {worst:.3g}"


def check_best_response_dominance():
    rng = np.random.default_rng(8)
    H, S, A, B = 3, 3, 2, 3
    for seed in range(5):
        m = random_linear_mdp(GameShape(S, A, B, H, 4), seed)
        base = _random_policy(rng, H, S, A, B)
        _, v_l = best_response_leader(m, base.follower)
        _, v_f = best_response_follower(m, base.leader)
        for _ in range(100):
            alt = _random_policy(rng, H, S, A, B)
            jl = evaluate_joint(m, PolicyTable(alt.leader, base.follower))
            jf = evaluate_joint(m, PolicyTable(base.leader, alt.follower))
            if jl.V_l[0, 0] > v_l + 1e-12:
                return False, "leader best response dominated"
            if (jf.vbar_f[0, 0] > v_f + 1e-12).any():
                return False, "follower best response dominated"
    return True, "5 instances x 100 alternatives"


def check_learner_invariants():
    cfg = ExperimentConfig(model_kind="linear", num_states=5, horizon=3, feature_dim=4, episodes=150, c1=0.05, seed=3)
    model = cfg.build_model()
    H = model.shape.horizon
    problems: list[str] = []

    def inspect(k, learner):
        problems.extend(learner.weight_norm_violations())
        for h in range(H):
            sv = learner.evaluate(h, model.phi)
            if sv.Q_l.max() > H or sv.Q_f.max() > H:
                problems.append(f"k={k} h={h}: Q above H")
            if sv.V_l.max() > H or sv.V_f.max() > H:
                problems.append(f"k={k} h={h}: value above H")

    recs = run_experiment(cfg, model=model, on_episode=inspect)
    again = run_experiment(cfg, model=model)
    if [(r.leader_inc, r.follower_inc, r.a1) for r in recs] != [(r.leader_inc, r.follower_inc, r.a1) for r in again]:
        problems.append("rerun differs")
    return not problems, problems[0] if problems else "150 episodes, weight/value bounds, potential, gaps, determinism"


def check_default_hyperparams():
    shape = GameShape(3, 2, 2, 2, 4)
    hp = default_hyperparams(shape, 100, 0.1, 1.0)
    iota = math.log((math.log(4) + 2 * math.log(2) ** 2) * 3200 / 0.1)
    ok = abs(hp.beta - 8 * math.sqrt(iota)) < 1e-12 and hp.lam == 1.0
    return ok, f"beta = {hp.beta:.12g}"


CHECKS: dict[str, Callable[[], tuple[bool, str]]] = {
    "linalg.sherman_morrison": check_sherman_morrison,
    "linalg.symmetry_monotonicity": check_gram_symmetry_and_monotonicity,
    "linalg.elliptical_potential": check_elliptical_potential,
    "policy.lipschitz": check_softmax_lipschitz,
    "policy.log_sum_exp_gap": check_softmax_gap,
    "policy.simplex_monotone": check_softmax_simplex_and_monotone,
    "env.tabular_roundtrip": check_tabular_roundtrip,
    "env.generated_validity": check_generated_models,
    "oracle.bellman_consistency": check_bellman_consistency,
    "oracle.brute_force_equivalence": check_brute_force_equivalence,
    "oracle.best_response_dominance": check_best_response_dominance,
    "learner.invariants": check_learner_invariants,
    "learner.default_hyperparams": check_default_hyperparams,
}


def run_all(echo: Callable[[str], None] = print) -> bool:
    all_ok = True
    for name, fn in CHECKS.items():
        try:
            ok, detail = fn()
        except Exception as exc:
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        all_ok &= ok
        echo(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return all_ok
