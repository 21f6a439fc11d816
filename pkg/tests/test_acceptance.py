"""Acceptance criteria, one test each, at the stated tolerances.

Every test prints one ``criterion N PASS|FAIL`` line; the session summary
repeats them all.  Training and evaluation at the desk tier happen once per
module.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from conftest import ACCEPTANCE, CERTIFIED
from regretforge import games, harness
from regretforge.efg import StrategyProfile, cce_gap, nash_gap
from regretforge.marginal import certify_bound, nfm_efm_equivalence_check, total_correlation
from regretforge.npcfr import Architecture, GameDistribution, PredictorParams, load_checkpoint, save_checkpoint, train
from regretforge.regret import MinimizerState, SolveConfig, cfr_solve, next_strategy, observe_reward
from regretforge.regret import sum_positive_cf_regret


def verdict(n, title, ok, detail):
    line = f"criterion {n:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE[n] = line
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def desk():
    """Desk-tier training on biased_shapley(0, 1/2), then in- and out-of-distribution evaluation."""
    cfg = harness.preset("desk")
    start = time.perf_counter()
    params, log = train(cfg.distribution, cfg.train)
    trained_in = time.perf_counter() - start
    eval_cfg = replace(cfg, algorithms=("cfr", "pcfr+", "npcfr"))
    rows, _ = harness.run_eval(eval_cfg, predictor=params)
    ood_cfg = replace(cfg, distribution=GameDistribution.biased_shapley(-1.0, 0.0), algorithms=("npcfr",))
    ood_rows, _ = harness.run_eval(ood_cfg, predictor=params)
    return {"cfg": eval_cfg, "params": params, "log": log, "train_seconds": trained_in,
            "rows": rows, "ood_rows": ood_rows}


def final_gaps(rows, tag, step):
    return [r["nash_gap"] for r in rows if r["algorithm"] == tag and r["step"] == step]


def random_sequence(game, rng, steps):
    lay = game.layout
    out = []
    for _ in range(steps):
        probs = rng.gamma(0.7, size=(lay.n_infostates, lay.max_actions)) * lay.action_mask
        out.append(StrategyProfile(lay, probs / probs.sum(axis=1, keepdims=True)))
    return out


def test_criterion_01_analytic_oracle():
    start = time.perf_counter()
    nash = harness.oracle_sweep(np.linspace(0.0, 0.5, 100))
    worst_nash = max(r["nash_gap"] for r in nash)
    cycle = harness.oracle_sweep([0.1, 0.2, 0.3, 0.4, 0.5, 0.55])
    worst_cce = max(abs(r["cce_gap"] - r["cce_expected"]) for r in cycle[:5])
    at_half, beyond = cycle[4]["cce_gap"], cycle[5]["cce_gap"]
    elapsed = time.perf_counter() - start
    ok = worst_nash <= 1e-9 and worst_cce <= 1e-12 and abs(at_half) <= 1e-12 and beyond > 0 and elapsed < 1
    verdict(1, "analytic oracle", ok,
            f"max nash_gap {worst_nash:.1e}, max cce error {worst_cce:.1e}, "
            f"cce(0.5) {at_half:.1e}, cce(0.55) {beyond:.4f}, {elapsed:.2f}s")


def test_criterion_02_tree_and_normal_form_agree():
    start = time.perf_counter()
    rng = np.random.default_rng(20)
    worst = {}
    for name, game in [("shapley", games.make_biased_shapley(0.3)),
                       ("4x4 unobserved chance", games.make_blind_chance_toy(actions=4)),
                       ("4x4 dealt cards", games.make_two_card_toy())]:
        worst[name] = 0.0
        for _ in range(50):
            tree, nf = nfm_efm_equivalence_check(game, random_sequence(game, rng, 5))
            worst[name] = max(worst[name], abs(tree - nf))
    elapsed = time.perf_counter() - start
    ok = all(v <= 1e-9 for v in worst.values()) and elapsed < 10
    verdict(2, "efm equals total correlation", ok,
            ", ".join(f"{k} max |diff| {v:.1e}" for k, v in worst.items()) + f", {elapsed:.1f}s")


def test_criterion_03_certificate_everywhere(desk):
    params = desk["params"]
    worst = math.inf
    count = 0
    for eta in (0.0, 0.1, 0.3, 0.45):
        game = games.make_biased_shapley(eta)
        trace = cfr_solve(game, SolveConfig("npcfr", steps=2**10, checkpoints=(1, 8, 64, 512, 1024)),
                          predictor=params)
        for snap in list(trace.snapshots.values()) + [trace]:
            worst = min(worst, certify_bound(game, snap).slack)
            count += 1
    ok = worst >= -1e-6 and CERTIFIED["worst_slack"] >= -1e-6
    verdict(3, "nash distance certificate", ok,
            f"{count} NPCFR traces (worst slack {worst:.2e}); {CERTIFIED['traces']} traces certified "
            f"by earlier tests (worst slack {CERTIFIED['worst_slack']:.2e})")


def test_criterion_04_pure_deviation_never_raises_total_correlation():
    start = time.perf_counter()
    violations, trials = 0, 0
    for n in (2, 3, 4):
        for k in (2, 3, 4):
            rng = np.random.default_rng(100 * n + k)
            shape = (k,) * n
            for _ in range(1000):
                joint = rng.gamma(0.3, size=shape)
                joint[rng.random(shape) < 0.2] = 0.0
                joint.flat[0] += 1e-3
                joint /= joint.sum()
                i = int(rng.integers(n))
                pure = np.eye(k)[int(rng.integers(k))]
                deviated = np.moveaxis(np.multiply.outer(pure, joint.sum(axis=i)), 0, i)
                violations += total_correlation(shape, deviated) > total_correlation(shape, joint) + 1e-12
                trials += 1
    elapsed = time.perf_counter() - start
    verdict(4, "pure-deviation monotonicity", violations == 0 and elapsed < 30,
            f"{violations} violations in {trials} trials up to 4 players x 4 actions, {elapsed:.1f}s")


def test_criterion_05_gradient_fidelity():
    start = time.perf_counter()
    results = harness.gradcheck_suite(seed=0)
    elapsed = time.perf_counter() - start
    primitives = [r for r in results if not r.name.startswith("unrolled")]
    unrolled = [r for r in results if r.name.startswith("unrolled")]
    ok = all(r.max_rel_error <= 1e-4 for r in primitives) and all(r.max_rel_error <= 1e-3 for r in unrolled) \
        and elapsed < 60
    verdict(5, "gradient fidelity", ok,
            f"{len(primitives)} primitives max rel {max(r.max_rel_error for r in primitives):.1e}, "
            f"4-step unroll rel {unrolled[0].max_rel_error:.1e}, {elapsed:.1f}s")


def test_criterion_06_desk_table(desk):
    fractions = harness.build_threshold_table(desk["rows"], (1e-3,))
    npcfr, cfr, pcfr_plus = fractions["npcfr"][0], fractions["cfr"][0], fractions["pcfr+"][0]
    ok = npcfr >= 0.9 and cfr <= 0.2 and pcfr_plus <= 0.1
    verdict(6, "desk threshold table at 1e-3", ok,
            f"NPCFR {npcfr:.3f} (need >= 0.9), CFR {cfr:.3f} (need <= 0.2), PCFR+ {pcfr_plus:.3f} "
            f"(need <= 0.1); training {desk['train_seconds']:.0f}s")


def test_criterion_07_zero_sum_leduc():
    start = time.perf_counter()
    game = games.make_leduc(n=2, beta=1.0)
    cps = tuple(2 ** k for k in range(13))
    trace = cfr_solve(game, SolveConfig("cfr+", steps=2**12, checkpoints=cps))
    gaps = {t: nash_gap(game, trace.snapshots[t].avg_strategy) for t in (2**6, 2**12)}
    slack = min(sum_positive_cf_regret(trace.snapshots[t]) / t - cce_gap(game, trace.snapshots[t]) for t in cps)
    elapsed = time.perf_counter() - start
    ok = gaps[2**12] * 10 <= gaps[2**6] and slack >= -1e-9 and elapsed < 300
    verdict(7, "zero-sum Leduc CFR+", ok,
            f"nash_gap 2^6 {gaps[2**6]:.2e} -> 2^12 {gaps[2**12]:.2e} "
            f"({gaps[2**6] / gaps[2**12]:.0f}x), min regret-bound slack {slack:.2e}, {elapsed:.0f}s")


def test_criterion_08_reduction_identities():
    rng = np.random.default_rng(8)
    mismatches = 0
    for _ in range(100):
        A = int(rng.integers(2, 5))
        rewards = rng.uniform(-1, 1, (int(rng.integers(1, 40)), A))
        zero = PredictorParams.zeros(Architecture(max_actions=A, n_rows=1, hidden=4, embed=2,
                                                  activation="tanh", form="residual", alpha=1.0))
        neural, plain = MinimizerState.new("npcfr", A), MinimizerState.new("pcfr", A)
        for x in rewards:
            a, b = np.asarray(next_strategy(neural)), np.asarray(next_strategy(plain))
            mismatches += not np.array_equal(a, b)
            neural = observe_reward(neural, x, predictor=zero)
            plain = observe_reward(plain, x)
    game = games.make_biased_shapley(0.35)
    zero = PredictorParams.zeros(Architecture(max_actions=3, n_rows=2, hidden=4, embed=2,
                                              activation="tanh", form="residual", alpha=1.0))
    a = cfr_solve(game, SolveConfig("npcfr", steps=2**12), predictor=zero)
    b = cfr_solve(game, SolveConfig("pcfr", steps=2**12))
    solve_equal = np.array_equal(a.strategy_sum, b.strategy_sum) and np.array_equal(a.reach_sum, b.reach_sum)
    verdict(8, "zero predictor reproduces PCFR", mismatches == 0 and solve_equal,
            f"{mismatches} mismatching steps over 100 reward sequences, full solve identical: {solve_equal}")


def test_criterion_09_out_of_distribution(desk):
    last = desk["cfg"].schedule[-1]
    inside = float(np.median(final_gaps(desk["rows"], "npcfr", last)))
    outside = float(np.median(final_gaps(desk["ood_rows"], "npcfr", last)))
    verdict(9, "out-of-distribution degradation", outside >= 10 * inside,
            f"median final nash_gap {inside:.2e} on U(0, 1/2) vs {outside:.2e} on U(-1, 0) "
            f"({outside / inside:.0f}x)")


def test_criterion_10_smoke_leduc_training():
    dist = GameDistribution.biased_2p_leduc()
    start = time.perf_counter()
    _, log = train(dist, harness.tier_train("smoke", dist))
    losses = [loss for _, loss in log]
    late = float(np.mean(losses[4:8]))
    verdict(10, "smoke Leduc meta-training (Leduc tables need the full tier)", late < losses[0],
            f"epoch-1 loss {losses[0]:.4f}, mean of epochs 5-8 {late:.4f}, {time.perf_counter() - start:.0f}s")


def test_criterion_11_byte_identical_results(desk, tmp_path):
    ckpt = tmp_path / "desk.rfck"
    save_checkpoint(desk["params"], ckpt)
    cfg = replace(harness.preset("smoke"), algorithms=("cfr", "pcfr+", "dcfr", "npcfr"), seeds=(0, 1),
                  checkpoint=str(ckpt))
    blobs = []
    for run in ("a", "b"):
        out = tmp_path / run
        run_cfg = replace(cfg, out=str(out))
        harness.write_eval(run_cfg, *harness.run_eval(run_cfg))
        blobs.append(((out / "results.csv").read_bytes(), (out / "tables.json").read_bytes()))
    reloaded = load_checkpoint(ckpt)
    same = blobs[0] == blobs[1]
    verdict(11, "deterministic reruns", same and reloaded.arch == desk["params"].arch,
            f"results.csv {len(blobs[0][0])} bytes identical: {blobs[0][0] == blobs[1][0]}, "
            f"tables.json identical: {blobs[0][1] == blobs[1][1]}")

