"""Acceptance checklist for the whole package.

Each test prints one bracketed PASS/FAIL line (run with -s to watch them
stream, or read them in the failure report) and then asserts, so this file
doubles as a release checklist. The learning checks train seven real agents
on the desk-scale profile and dominate the runtime: expect roughly ten
minutes on one CPU core for the full file.

One check (09, the power-weight trade-off at weight 100) fails by
construction at the shipped scale and is left failing; its docstring and
the 09s supplement explain why.
"""

import itertools
import math
import os

import numpy as np
import pytest
from mpmath import mp, mpf

from helpers import DESK_CONFIG
from uav_aoi import physics
from uav_aoi.clustering import Device, kmeans_capacitated
from uav_aoi.config import ExperimentConfig
from uav_aoi.metrics import evaluate
from uav_aoi.network import Minibatch, Mlp, q_loss_and_grads, tabular_q_update
from uav_aoi.policies import (
    DqnAgent,
    GreedyAgePolicy,
    NearestClusterPolicy,
    RandomWalkPolicy,
)
from uav_aoi.scenario import build_env, generate_scenario
from uav_aoi.sweep import run_sweep


def report(label: str, ok: bool, detail: str) -> bool:
    print(f"[acceptance] {label}: {detail} -> {'PASS' if ok else 'FAIL'}")
    return ok


@pytest.fixture(scope="module")
def desk_world():
    config = ExperimentConfig.load(DESK_CONFIG)
    return config, generate_scenario(config)


# ---------------------------------------------------------------- 01 + 02


def _mp_propulsion(speed: float, prop) -> mpf:
    """128-bit reference evaluation of the propulsion model, textbook form."""
    mp.prec = 128
    v = mpf(speed)
    profile = mpf(prop.profile_power) * (1 + 3 * v ** 2 / mpf(prop.tip_speed) ** 2)
    r = v ** 2 / (2 * mpf(prop.hover_induced_speed) ** 2)
    induced = mpf(prop.induced_power) * mp.sqrt(mp.sqrt(1 + r * r) - r)
    parasite = (
        mpf("0.5") * mpf(prop.drag_ratio) * mpf(prop.air_density)
        * mpf(prop.rotor_solidity) * mpf(prop.disk_area) * v ** 3
    )
    return profile + induced + parasite


def test_01_physics_exactness(params, prop):
    p0 = physics.propulsion_power(0.0, prop)
    hover_err = abs(p0 - 219.82) / 219.82

    p25 = physics.propulsion_power(25.0, prop)
    oracle = float(_mp_propulsion(25.0, prop))
    cruise_err = abs(p25 - oracle) / oracle
    cruise_off_nominal = abs(p25 - 112.88)

    tx0 = float(physics.device_tx_power(0.0, params))
    tx_err = abs(tx0 - 3.1e-11) / 3.1e-11

    ok = hover_err <= 1e-9 and cruise_err <= 1e-9 and cruise_off_nominal <= 0.01 \
        and tx_err <= 1e-12
    assert report(
        "01 physics exactness",
        ok,
        f"hover {p0:.6f} W (rel err {hover_err:.1e}), cruise {p25:.6f} W "
        f"(vs oracle {cruise_err:.1e}, vs 112.88 {cruise_off_nominal:.1e}), "
        f"tx(0) {tx0:.4e} W (rel err {tx_err:.1e})",
    )


def test_02_induced_power_stability(prop):
    mp.prec = 128
    s0 = mpf(prop.hover_induced_speed)
    worst = 0.0
    for speed in (3.0, 10.0, 25.0, 60.0, 120.0, 300.0):
        r_mp = mpf(speed) ** 2 / (2 * s0 ** 2)
        assert r_mp > 1e6  # the regime where the textbook form cancels
        want = float(mp.sqrt(mp.sqrt(1 + r_mp * r_mp) - r_mp))
        got = physics.induced_velocity_factor(speed ** 2 / (2.0 * prop.hover_induced_speed ** 2))
        worst = max(worst, abs(got - want) / want)
        power_err = abs(physics.propulsion_power(speed, prop) - float(_mp_propulsion(speed, prop)))
        worst = max(worst, power_err / float(_mp_propulsion(speed, prop)))
    assert report(
        "02 induced-power stability",
        worst <= 1e-9,
        f"max rel err vs 128-bit oracle {worst:.2e} over speeds 3..300 m/s",
    )


# --------------------------------------------------------------------- 03


def _batch_loss(net: Mlp, batch: Minibatch, targets: np.ndarray) -> float:
    """Forward-only loss, independent of the backprop code path."""
    q = net.forward(batch.states)
    err = q[np.arange(q.shape[0]), batch.actions] - targets
    return float(np.mean(err * err))


def test_03_gradients_match_finite_differences():
    rng = np.random.default_rng(2024)
    h = 1e-5
    worst = 0.0
    for _ in range(10):
        net = Mlp.create([4, 8, 3], rng)
        batch = Minibatch(
            states=rng.normal(size=(16, 4)),
            actions=rng.integers(0, 3, size=16),
            rewards=np.zeros(16),
            next_states=rng.normal(size=(16, 4)),
            dones=np.zeros(16, dtype=bool),
        )
        targets = rng.normal(size=16)
        _, grad_w, grad_b = q_loss_and_grads(net, batch, targets)
        for arr, grad in [*zip(net.weights, grad_w), *zip(net.biases, grad_b)]:
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = arr[idx]
                arr[idx] = orig + h
                up = _batch_loss(net, batch, targets)
                arr[idx] = orig - h
                down = _batch_loss(net, batch, targets)
                arr[idx] = orig
                numeric = (up - down) / (2.0 * h)
                scale = max(abs(grad[idx]), abs(numeric), 1e-8)
                worst = max(worst, abs(grad[idx] - numeric) / scale)
    assert report(
        "03 gradient check",
        worst <= 1e-4,
        f"max rel err {worst:.2e} over 10 random 4-8-3 nets (h={h:g})",
    )


# --------------------------------------------------------------------- 04


def test_04_tabular_update_exact():
    rng = np.random.default_rng(13)
    mismatches = 0
    for _ in range(1000):
        q = float(rng.normal(scale=5.0))
        alpha = float(rng.uniform(0.01, 1.0))
        reward = float(rng.normal(scale=10.0))
        gamma = float(rng.uniform(0.0, 0.999))
        max_next = float(rng.normal(scale=5.0, size=4).max())
        got = tabular_q_update(q, alpha, reward, gamma, max_next)
        temporal = reward + gamma * max_next
        want = q + alpha * (temporal - q)
        if got != want:
            mismatches += 1
    assert report(
        "04 tabular update exactness",
        mismatches == 0,
        f"{mismatches} mismatches in 1000 random tuples (bitwise compare)",
    )


# --------------------------------------------------------------------- 05


def test_05_environment_properties(desk_world):
    config, scenario = desk_world
    env = build_env(config, scenario, power_weight=100.0)
    rng = np.random.default_rng(77)
    steps = 0
    violations = []
    replay = []  # (actions, rewards, final state) for the first 3 episodes

    while steps < 10_000:
        state = env.reset()
        actions, rewards = [], []
        while not env.done:
            prev = state
            index = int(rng.integers(env.n_actions))
            out = env.step(env.decode_action(index))
            state = out.state
            steps += 1
            actions.append(index)
            rewards.append(out.reward)

            if not all(1 <= a <= config.max_age for a in state.aoi):
                violations.append(f"t={state.t}: age out of [1, {config.max_age}]")
            for u, (before, after, spent) in enumerate(
                zip(prev.uavs, state.uavs, out.info["energy_quanta"])
            ):
                if before.battery - after.battery != spent:
                    violations.append(f"t={state.t}: uav {u} battery delta != bill")
            if not out.done and min(state.beta) <= 0:
                violations.append(f"t={state.t}: non-terminal state with margin <= 0")
            if out.done and min(state.beta) > 0 and state.t != config.t_max:
                violations.append(f"t={state.t}: terminated with margin and time left")
            accounted = (
                -out.info["weighted_age"]
                - env.params.power_weight / env.n_devices * out.info["device_power_sum"]
            )
            if abs(out.reward - accounted) > 1e-9 * max(1.0, abs(accounted)):
                violations.append(f"t={state.t}: reward != age+power bookkeeping")
            if violations:
                break
        if violations:
            break
        if len(replay) < 3:
            replay.append((actions, rewards, state))

    if not violations:
        fresh = build_env(config, scenario, power_weight=100.0)
        for actions, rewards, final in replay:
            fresh.reset()
            redone = [fresh.step(fresh.decode_action(i)).reward for i in actions]
            if redone != rewards or fresh.state != final:
                violations.append("replaying the action log changed the trajectory")
    assert report(
        "05 environment properties",
        not violations,
        f"{steps} random steps, replayed {len(replay)} episodes bit-identically"
        if not violations else f"first violation: {violations[0]}",
    )


# --------------------------------------------------------------------- 06


def _wcss(points: np.ndarray, members) -> float:
    cost = 0.0
    for ids in members:
        if not ids:
            continue
        sub = points[list(ids)]
        mu = sub.mean(axis=0)
        cost += float(((sub - mu) ** 2).sum())
    return cost


def _exhaustive_best_wcss(points: np.ndarray, k: int, capacity: int) -> float:
    """Optimal capacity-respecting partition cost; first point pinned to
    cluster 0 since costs are label-invariant."""
    n = len(points)
    best = math.inf
    for rest in itertools.product(range(k), repeat=n - 1):
        assign = (0,) + rest
        counts = [0] * k
        feasible = True
        for a in assign:
            counts[a] += 1
            if counts[a] > capacity:
                feasible = False
                break
        if not feasible:
            continue
        members = [[] for _ in range(k)]
        for i, a in enumerate(assign):
            members[a].append(i)
        best = min(best, _wcss(points, members))
    return best


def test_06_clustering_invariants_and_quality():
    rng = np.random.default_rng(5)

    # invariants at the working scale: 100 devices, capacity 20, 5 clusters
    for _ in range(100):
        pts = rng.uniform(-550.0, 550.0, size=(100, 2))
        devices = [Device(i, (float(x), float(y)), 0.01) for i, (x, y) in enumerate(pts)]
        out = kmeans_capacitated(devices, capacity=20, seed=rng)
        out.validate(100)  # exact partition, ids in range, sizes <= capacity
        assert out.n_clusters == 5
        for l, ids in enumerate(out.members):
            assert len(ids) <= 20
            mu = pts[list(ids)].mean(axis=0)
            assert np.allclose(out.centroids[l], mu, rtol=1e-9, atol=1e-9)

    # quality on instances small enough to brute-force
    wins = 0
    ratios = []
    for _ in range(100):
        n = int(rng.integers(6, 9))
        capacity = int(rng.integers(3, 5))
        pts = rng.uniform(-500.0, 500.0, size=(n, 2))
        devices = [Device(i, (float(x), float(y)), 1.0 / n) for i, (x, y) in enumerate(pts)]
        out = kmeans_capacitated(devices, capacity, seed=rng)
        ours = _wcss(pts, out.members)
        best = _exhaustive_best_wcss(pts, out.n_clusters, capacity)
        ratios.append(ours / best if best > 0 else 1.0)
        if ours <= 1.25 * best + 1e-12:
            wins += 1
    assert report(
        "06 clustering quality",
        wins >= 90,
        f"within 25% of exhaustive optimum in {wins}/100 instances "
        f"(median ratio {sorted(ratios)[50]:.3f})",
    )


# ---------------------------------------------------- 07 + 09 (training)

_TRAINED: dict = {}


@pytest.fixture(scope="module")
def trained(desk_world):
    """Train-once cache over (trade-off weight, seed); ~75 s per entry."""
    config, scenario = desk_world

    def get(weight: float, seed: int) -> dict:
        key = (weight, seed)
        if key not in _TRAINED:
            env = build_env(config, scenario, power_weight=weight)
            agent = DqnAgent(random_state=seed, **config.dqn.agent_kwargs())
            agent.fit(env)
            _TRAINED[key] = evaluate(
                env, agent, 50, seed=config.seed_evaluation, policy_name="dqn"
            ).summary
        return _TRAINED[key]

    return get


def test_07_learning_beats_random_walk(desk_world, trained):
    config, scenario = desk_world
    env = build_env(config, scenario, power_weight=0.0)
    rw = evaluate(env, RandomWalkPolicy(), 50, seed=config.seed_evaluation).summary
    threshold = rw["mean_reward"] + 0.2 * abs(rw["mean_reward"])

    per_seed = []
    for seed in (1, 2, 3):
        mean = trained(0.0, seed)["mean_reward"]
        per_seed.append((seed, mean, mean >= threshold))
    hits = sum(1 for _, _, hit in per_seed if hit)
    detail = ", ".join(
        f"seed {s}: {m:.2f} {'>=' if hit else '<'} {threshold:.2f}"
        for s, m, hit in per_seed
    )
    assert report(
        "07 learning sanity",
        hits >= 2,
        f"rw mean {rw['mean_reward']:.2f}; {detail}; {hits}/3 seeds clear",
    )


def test_08_baseline_ordering(desk_world):
    config, scenario = desk_world
    env = build_env(config, scenario, power_weight=config.power_weights[0])
    seed = config.seed_evaluation
    ga = evaluate(env, GreedyAgePolicy(), 100, seed=seed).summary
    nn = evaluate(env, NearestClusterPolicy(), 100, seed=seed).summary
    rw = evaluate(env, RandomWalkPolicy(), 100, seed=seed).summary

    age_gap = (ga["ergodic_age"] + ga["age_ci"]) < (nn["ergodic_age"] - nn["age_ci"])
    power_gap = (nn["ergodic_power"] + nn["power_ci"]) < (ga["ergodic_power"] - ga["power_ci"])
    rw_above = rw["ergodic_age"] >= ga["ergodic_age"]
    ok = age_gap and power_gap and rw_above
    assert report(
        "08 baseline ordering",
        ok,
        f"age ga {ga['ergodic_age']:.3f}+-{ga['age_ci']:.3f} < "
        f"nn {nn['ergodic_age']:.3f}+-{nn['age_ci']:.3f} ({age_gap}); "
        f"power nn {nn['ergodic_power']:.3e} < ga {ga['ergodic_power']:.3e} "
        f"({power_gap}); rw age {rw['ergodic_age']:.3f} >= ga ({rw_above})",
    )


def test_09_power_weight_tradeoff(trained):
    """Known to fail at this weight grid; kept failing on purpose.

    At weight 100 the power term contributes ~1e-8 of each reward against
    an age term of order 1, far below any resolvable Q-value gap, so the
    two trainings per seed are numerically indistinguishable (seed 1 ends
    argmax-identical) or drift apart as pure noise. The supplement test
    below trains where the weight genuinely registers and shows the
    trade-off machinery working.
    """
    per_seed = []
    for seed in (1, 2, 3):
        p0 = trained(0.0, seed)["ergodic_power"]
        p100 = trained(100.0, seed)["ergodic_power"]
        per_seed.append((seed, p0, p100, p100 < p0))
    hits = sum(1 for *_, hit in per_seed if hit)
    detail = "; ".join(
        f"seed {s}: w100 {p1:.3e} {'<' if hit else '>='} w0 {p0:.3e}"
        for s, p0, p1, hit in per_seed
    )
    assert report("09 power-weight trade-off", hits >= 2, f"{detail}; {hits}/3 seeds")


def test_09s_power_weight_machinery(trained):
    """Supplement to 09: at a weight where the power term is the same order
    as the age term, training visibly trades age for device power."""
    base = trained(0.0, 1)
    heavy = trained(1e11, 1)
    power_drops = heavy["ergodic_power"] < base["ergodic_power"]
    age_pays = heavy["ergodic_age"] > base["ergodic_age"]
    assert report(
        "09s power-weight machinery",
        power_drops and age_pays,
        f"power {base['ergodic_power']:.3e} -> {heavy['ergodic_power']:.3e}, "
        f"age {base['ergodic_age']:.3f} -> {heavy['ergodic_age']:.3f} at weight 1e11",
    )


# --------------------------------------------------------------------- 10


def test_10_sweep_reproducibility(tmp_path):
    config = ExperimentConfig.load(DESK_CONFIG)
    contents = []
    for name in ("first", "second"):
        run_dir = tmp_path / name
        run_sweep(config, run_dir=str(run_dir), episodes=40)
        found = {}
        for root, _, files in os.walk(run_dir):
            for f in files:
                if f.endswith((".csv", ".svg")):
                    path = os.path.join(root, f)
                    with open(path, "rb") as fh:
                        found[os.path.relpath(path, run_dir)] = fh.read()
        contents.append(found)
    first, second = contents
    same_names = sorted(first) == sorted(second)
    differing = [name for name in first if first.get(name) != second.get(name)]
    ok = same_names and not differing
    assert report(
        "10 sweep reproducibility",
        ok,
        f"{len(first)} CSV/SVG files byte-identical across two runs"
        if ok else f"differing files: {differing[:4]}",
    )
