"""Experiment runner: evaluation schedules, threshold tables and run artifacts."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import games as game_zoo
from . import rng as rng_streams
from .autodiff.gradcheck import GradCheckResult, check_directional, check_primitives
from .efg.metrics import cce_gap, nash_gap
from .efg.trace import RunTrace
from .efg.tree import GameError
from .marginal import efm
from .npcfr import GameDistribution, PredictorParams, TrainConfig, load_checkpoint, save_checkpoint, train
from .npcfr.trainer import unrolled_meta_loss
from .regret.minimizers import ALGORITHMS, algorithm
from .regret.solver import SolveConfig, solve_layout

TIERS = ("smoke", "desk", "full")
TABLE_MODES = ("threshold", "best")
RESULT_COLUMNS = ("algorithm", "game", "game_param", "seed", "step", "nash_gap", "cce_gap", "efm")
BASELINES = ("cfr", "cfr+", "pcfr", "pcfr+", "dcfr", "lcfr", "spcfr", "spcfr+", "hedge", "hedge+")


class ConfigError(GameError):
    """A bad experiment config; ``field`` names the offending key."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        super().__init__(message)

    def record(self):
        out = {"error": "config", "message": str(self)}
        if self.field is not None:
            out["field"] = self.field
        if self.line is not None:
            out["line"] = self.line
        return out


@dataclass(frozen=True)
class ExperimentConfig:
    distribution: GameDistribution = field(default_factory=GameDistribution.biased_shapley)
    samples: int = 8
    algorithms: tuple = ("cfr", "cfr+", "pcfr+")
    budget_exp: int = 10            # evaluate at 2^0 .. 2^budget_exp
    seeds: tuple = (0,)
    thresholds: tuple = (1e-2, 1e-3, 1e-4, 1e-5)
    out: str = "runs"
    tier: str = "smoke"
    checkpoint: str | None = None
    table: str = "threshold"
    train: TrainConfig = field(default_factory=lambda: tier_train("smoke", GameDistribution.biased_shapley()))

    def __post_init__(self):
        if self.tier not in TIERS:
            raise ConfigError(f"tier must be one of {TIERS}", field="tier")
        if self.table not in TABLE_MODES:
            raise ConfigError(f"table must be one of {TABLE_MODES}", field="table")
        if int(self.samples) < 1:
            raise ConfigError("samples must be at least 1", field="samples")
        if int(self.budget_exp) < 0:
            raise ConfigError("budget_exp must be nonnegative", field="budget_exp")
        if not self.algorithms:
            raise ConfigError("at least one algorithm is required", field="algorithms")
        for tag in self.algorithms:
            if tag not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {tag!r}", field="algorithms")
        if not self.seeds:
            raise ConfigError("at least one seed is required", field="seeds")
        try:
            th = [float(t) for t in self.thresholds]
        except (TypeError, ValueError):
            raise ConfigError("thresholds must be numbers", field="thresholds") from None
        if any(isinstance(s, bool) or not isinstance(s, (int, np.integer)) for s in self.seeds):
            raise ConfigError("seeds must be integers", field="seeds")
        if not th or th != sorted(th, reverse=True) or len(set(th)) != len(th):
            raise ConfigError("thresholds must be strictly descending", field="thresholds")
        object.__setattr__(self, "thresholds", tuple(th))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))

    @property
    def schedule(self):
        return tuple(2 ** k for k in range(int(self.budget_exp) + 1))

    def as_dict(self):
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["distribution"] = self.distribution.as_dict()
        out["train"] = self.train.as_dict()
        for key in ("algorithms", "seeds", "thresholds"):
            out[key] = list(out[key])
        return out


def tier_train(tier, dist):
    """Training defaults of a tier for one game family.

    Eight smoke epochs only show a trend with a step size well above the
    desk one; Shapley also needs a larger batch because its loss varies
    tenfold across sampled games.
    """
    shapley = dist.family == "biased_shapley"
    base = "npcfr+" if dist.family == "three_player_leduc" else "npcfr"
    alpha = 3.0 if shapley else None
    if tier == "smoke":
        return TrainConfig(epochs=8, batch=32 if shapley else 8, lr=1e-2 if shapley else 3e-2,
                           alpha=alpha, base=base)
    if tier in ("desk", "full"):
        return TrainConfig(epochs=256, batch=16, alpha=alpha, base=base)
    raise ConfigError(f"tier must be one of {TIERS}", field="tier")


def preset(tier, dist=None):
    """Default config of a tier, optionally for another game family."""
    if tier not in TIERS:
        raise ConfigError(f"tier must be one of {TIERS}", field="tier")
    if dist is None:
        dist = GameDistribution.biased_2p_leduc() if tier == "full" else GameDistribution.biased_shapley()
    train = tier_train(tier, dist)
    if tier == "smoke":
        return ExperimentConfig(distribution=dist, train=train)
    budget = 14 if tier == "desk" else 18
    return ExperimentConfig(distribution=dist, samples=64, algorithms=BASELINES + ("npcfr",),
                            budget_exp=budget, tier=tier, train=train)


def _coerce(name, value, kind):
    try:
        if kind == "int":
            if isinstance(value, bool) or int(value) != value:
                raise TypeError
            return int(value)
        if kind == "str":
            if not isinstance(value, str):
                raise TypeError
            return value
        if kind == "list":
            if not isinstance(value, list):
                raise TypeError
            return tuple(value)
    except (TypeError, ValueError):
        raise ConfigError(f"field {name!r} has the wrong type: {value!r}", field=name) from None
    return value


_FIELD_KINDS = {"samples": "int", "budget_exp": "int", "out": "str", "tier": "str",
                "table": "str", "algorithms": "list", "seeds": "list", "thresholds": "list"}


def config_from_dict(doc, tier=None):
    """Overlay ``doc`` on the preset of its tier (or ``tier``)."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    known = {f.name for f in fields(ExperimentConfig)}
    for key in doc:
        if key not in known:
            raise ConfigError(f"unknown config field {key!r}", field=key)
    dist = None
    if "distribution" in doc:
        try:
            dist = GameDistribution.from_dict(doc["distribution"])
        except (GameError, TypeError, ValueError, AttributeError) as exc:
            raise ConfigError(f"bad distribution: {exc}", field="distribution") from None
    tier_name = tier or doc.get("tier", "smoke")
    if not isinstance(tier_name, str):
        raise ConfigError(f"field 'tier' has the wrong type: {tier_name!r}", field="tier")
    base = preset(tier_name, dist)
    updates = {}
    for key, value in doc.items():
        if key == "distribution":
            continue
        if key == "train":
            if not isinstance(value, dict):
                raise ConfigError("train must be an object", field="train")
            train_fields = {f.name for f in fields(TrainConfig)}
            for k in value:
                if k not in train_fields:
                    raise ConfigError(f"unknown train field {k!r}", field=f"train.{k}")
            try:
                updates[key] = replace(base.train, **value)
            except (GameError, TypeError, ValueError) as exc:
                raise ConfigError(f"bad train config: {exc}", field="train") from None
        elif key == "checkpoint":
            updates[key] = None if value is None else _coerce(key, value, "str")
        else:
            updates[key] = _coerce(key, value, _FIELD_KINDS[key])
    if tier is not None:
        updates["tier"] = tier
    try:
        return replace(base, **updates)
    except ConfigError:
        raise
    except (GameError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def parse_config(text, tier=None):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    return config_from_dict(doc, tier=tier)


def load_config(path, tier=None):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), tier=tier)


# ---------------------------------------------------------------- evaluation

def _threads():
    raw = os.environ.get("REGRETFORGE_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError("REGRETFORGE_THREADS must be an integer", field="REGRETFORGE_THREADS") from None


def sample_games(cfg, seed):
    params = cfg.distribution.sample_params(rng_streams.stream(seed, "eval_sampling"), cfg.samples)
    return params, [cfg.distribution.make_game(float(p)) for p in params]


def _evaluate_cell(cfg, tag, seed, params, games, predictor):
    """Solve every sampled game with ``tag`` at once and score each checkpoint."""
    start = time.perf_counter()
    schedule = cfg.schedule
    utilities = np.stack([g.utilities for g in games])
    trace = solve_layout(games[0].layout, utilities,
                         SolveConfig(tag, steps=schedule[-1], checkpoints=schedule),
                         predictor=predictor)
    rows = []
    for gi, (param, game) in enumerate(zip(params, games)):
        for step in schedule:
            snap = trace.snapshots[step].game(gi)
            rows.append({
                "algorithm": tag, "game": gi, "game_param": float(param), "seed": seed, "step": step,
                "nash_gap": nash_gap(game, snap.avg_strategy),
                "cce_gap": cce_gap(game, snap),
                "efm": float(efm(snap)),
            })
    return rows, time.perf_counter() - start


def run_eval(cfg, predictor=None):
    """Evaluate every (algorithm, seed) cell; returns ``(rows, timings)``.

    Rows come out ordered by algorithm, seed, game and step whatever the
    completion order.  Neural tags need ``predictor`` or ``cfg.checkpoint``.
    """
    if predictor is None and any(ALGORITHMS[t].prediction == "neural" for t in cfg.algorithms):
        if cfg.checkpoint is None:
            raise ConfigError("neural algorithms need a checkpoint", field="checkpoint")
        if not os.path.exists(cfg.checkpoint):
            raise FileNotFoundError(f"checkpoint {cfg.checkpoint} does not exist")
        predictor = load_checkpoint(cfg.checkpoint)
    sampled = {seed: sample_games(cfg, seed) for seed in cfg.seeds}
    cells = [(tag, seed) for tag in cfg.algorithms for seed in cfg.seeds]
    with ThreadPoolExecutor(max_workers=min(_threads(), len(cells))) as pool:
        futures = [pool.submit(_evaluate_cell, cfg, tag, seed, *sampled[seed], predictor)
                   for tag, seed in cells]
        results = [f.result() for f in futures]
    rows, timings = [], []
    for (tag, seed), (cell_rows, wall) in zip(cells, results):
        rows.extend(cell_rows)
        timings.append({"algorithm": tag, "seed": seed, "games": cfg.samples, "wall_time": wall})
    return rows, timings


def trajectory_minima(rows):
    """{(algorithm, seed, game): lowest NashGap on the schedule}."""
    minima = {}
    for row in rows:
        key = (row["algorithm"], int(row["seed"]), int(row["game"]))
        minima[key] = min(minima.get(key, math.inf), float(row["nash_gap"]))
    return minima


def build_threshold_table(rows, thresholds):
    """{algorithm: [fraction of trajectories whose minimum NashGap <= threshold]}."""
    per_alg = {}
    for (tag, _, _), value in trajectory_minima(rows).items():
        per_alg.setdefault(tag, []).append(value)
    return {tag: [float(np.mean([v <= t for v in values])) for t in thresholds]
            for tag, values in per_alg.items()}


def build_best_table(rows):
    """{algorithm: lowest NashGap found over every trajectory}."""
    best = {}
    for (tag, _, _), value in trajectory_minima(rows).items():
        best[tag] = min(best.get(tag, math.inf), value)
    return best


def build_tables(rows, cfg):
    return {
        "thresholds": list(cfg.thresholds),
        "fractions": build_threshold_table(rows, cfg.thresholds),
        "best": build_best_table(rows),
        "mode": cfg.table,
    }


# ---------------------------------------------------------------- files

def _fmt(value):
    return repr(float(value)) if isinstance(value, (float, np.floating)) else str(value)


def results_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RESULT_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in RESULT_COLUMNS])
    return buf.getvalue()


def read_results(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _write(path, text):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows([[_fmt(v) for v in row] for row in rows])
    return buf.getvalue()


def write_eval(cfg, rows, timings):
    out = cfg.out
    _write(os.path.join(out, "results.csv"), results_csv(rows))
    _write(os.path.join(out, "timings.csv"), _csv_text(
        ("algorithm", "seed", "games", "wall_time"),
        [(t["algorithm"], t["seed"], t["games"], t["wall_time"]) for t in timings]))
    tables = build_tables(rows, cfg)
    _write(os.path.join(out, "tables.json"), json.dumps(tables, indent=2, sort_keys=True) + "\n")
    return tables


def run_train(cfg, checkpoint=None, callback=None):
    """Meta-train on the config's distribution; writes train_log.csv and the checkpoint."""
    params, log = train(cfg.distribution, cfg.train, callback=callback)
    path = checkpoint or cfg.checkpoint or os.path.join(cfg.out, "predictor.rfck")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    save_checkpoint(params, path)
    _write(os.path.join(cfg.out, "train_log.csv"), _csv_text(("epoch", "loss"), log))
    return params, log, path


def run_solve(cfg, param=None, algorithm=None):
    """One solve on one game of the distribution; returns the trajectory rows."""
    dist = cfg.distribution
    tag = algorithm or cfg.algorithms[0]
    if param is None:
        param = float(dist.sample_params(rng_streams.stream(cfg.seeds[0], "eval_sampling"), 1)[0])
    game = dist.make_game(float(param))
    predictor = None
    if ALGORITHMS[tag].prediction == "neural":
        if cfg.checkpoint is None or not os.path.exists(cfg.checkpoint):
            raise FileNotFoundError(f"{tag} needs an existing checkpoint (got {cfg.checkpoint})")
        predictor = load_checkpoint(cfg.checkpoint)
    rows, _ = _evaluate_cell(replace(cfg, samples=1), tag, cfg.seeds[0], [param], [game], predictor)
    return rows


# ---------------------------------------------------------------- checks

def oracle_sweep(etas):
    """Closed-form checks on biased Shapley; one record per eta.

    ``nash_gap`` is the gap of the analytic equilibrium; ``cce_gap`` is the
    deviation gain against the six-cell cycle, expected to be (1 + eta)/3 - 1/2.
    """
    records = []
    for eta in etas:
        game = game_zoo.make_biased_shapley(eta)
        cycle = [game_zoo.pure_matrix_profile(game, a) for a in game_zoo.delta_star_cycle()]
        records.append({
            "eta": float(eta),
            "nash_gap": nash_gap(game, game_zoo.analytic_nash_biased_shapley(eta, game)),
            "cce_gap": cce_gap(game, RunTrace.from_profiles(game, cycle)),
            "cce_expected": (1.0 + eta) / 3.0 - 0.5,
        })
    return records


def gradcheck_suite(seed=0, unroll_steps=4, directions=20):
    """Every tape primitive elementwise, then the unrolled meta-loss along random directions."""
    gen = rng_streams.stream(seed, "gradcheck")
    results = check_primitives(gen)
    dist = GameDistribution.biased_shapley()
    arch = TrainConfig(hidden=4, embed=2).architecture(dist)
    params = PredictorParams.init(arch, gen, head_scale=0.5)
    utilities = dist.utilities(dist.sample_params(gen, 2))
    spec = algorithm("npcfr")

    def loss(named):
        return unrolled_meta_loss(dist.layout, utilities, spec, unroll_steps,
                                  PredictorParams.from_named(arch, named))

    err = check_directional(loss, params.named(), gen, directions=directions)
    results.append(GradCheckResult(f"unrolled_meta_loss[{unroll_steps}]", err, 1e-3))
    return results
