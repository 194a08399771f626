"""Experiment pipeline: load -> synthesize -> sample -> select -> attack -> evaluate.

Configuration is a flat ``key = value`` text file; command-line overrides win.
Every random stage draws from its own seed, derived from the master seed and a
fixed stage tag (see :func:`derive_seed`), so adding a stage never shifts the
randomness of another.
"""
from __future__ import annotations

import csv
import hashlib
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import graph as G
from .attack import (AttackConfig, FlipSet, write_fnr_history, write_flips)
from .baselines import del_add_attack, random_attack
from .costs import CostModel, make_cost_model, total_cost
from .propagation import (LinLBPParams, assign_priors, fnr, fpr, label_fnr, propagate,
                          rw_classify, write_posteriors)
from .scenarios import ScenarioSpec, run_scenario
from .targets import TargetSpec, select_targets

log = logging.getLogger(__name__)

SURROGATE = "surrogate:facebook"
METHODS = ("none", "random", "del-add", "ours")
SWEEP_AXES = ("K", "AE", "target_count", "lambda", "eta", "tau", "substitute_w")

DEFAULTS: dict[str, str] = {
    "dataset": SURROGATE,
    "labels": "",
    "attack_edges": "10000",
    "train_per_class": "100",
    "target_method": "cc",
    "target_count": "100",
    "cost": "equal",
    "compromised_count": "100",
    "theta": "0.5",
    "weight": "0.01",
    "max_iters": "100",
    "tol": "1e-4",
    "lambda": "",
    "eta": "0.1",
    "K": "20",
    "inner_iters": "4",
    "outer_iters": "10",
    "stall_window": "2",
    "gradient_mode": "one-sided",
    "binarize_mode": "fill",
    "methods": "none,ours",
    "sub_theta": "",
    "sub_weight": "",
    "random_params": "false",
    "sub_train_size": "",
    "tau": "",
    "sweep_axis": "",
    "sweep_values": "",
    "rw_iters": "10",
    "seed": "0",
    "threads": "1",
    "out": "out",
}

REPORT_COLUMNS = [
    "sweep_axis", "sweep_value", "dataset", "scenario", "method", "target_method",
    "cost_kind", "K", "AE", "targets", "fnr", "fpr", "fnr_rw", "edges_modified",
    "edges_added", "edges_deleted", "total_cost", "cc_before", "cc_after", "iterations",
]


class ConfigError(ValueError):
    pass


def derive_seed(master: int, tag: str) -> int:
    """Child seed = 63-bit BLAKE2b hash of (master seed, stage tag)."""
    digest = hashlib.blake2b(f"{master}:{tag}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1


def read_config_file(path: str | Path) -> dict[str, str]:
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, value = (x.strip() for x in line.split("=", 1))
            if key not in DEFAULTS:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            out[key] = value
    return out


def _num(raw: dict[str, str], key: str, kind=float):
    value = raw[key]
    try:
        return kind(value)
    except ValueError:
        raise ConfigError(f"config field {key!r}: cannot parse {value!r} as {kind.__name__}") from None


def _opt(raw, key, kind=float):
    return None if raw[key] == "" else _num(raw, key, kind)


@dataclass
class ExperimentConfig:
    dataset: str = SURROGATE
    labels: str = ""
    attack_edges: int = 10000
    train_per_class: int = 100
    target: TargetSpec = field(default_factory=TargetSpec)
    cost: str = "equal"
    compromised_count: int = 100
    params: LinLBPParams = field(default_factory=LinLBPParams)
    attack: AttackConfig = field(default_factory=AttackConfig)
    lam_explicit: bool = False
    methods: tuple[str, ...] = ("none", "ours")
    scenario: ScenarioSpec = field(default_factory=ScenarioSpec)
    sweep_axis: str = ""
    sweep_values: tuple[float, ...] = ()
    rw_iters: int = 10
    seed: int = 0
    out: str = "out"

    @classmethod
    def from_mapping(cls, values: dict[str, str]) -> "ExperimentConfig":
        unknown = set(values) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        raw = {**DEFAULTS, **{k: str(v) for k, v in values.items()}}
        seed = _num(raw, "seed", int)
        cost = raw["cost"].lower()
        lam = _opt(raw, "lambda")
        methods = tuple(m.strip().lower() for m in raw["methods"].split(",") if m.strip())
        bad = [m for m in methods if m not in METHODS]
        if bad:
            raise ConfigError(f"config field 'methods': unknown method(s) {bad}")
        axis = raw["sweep_axis"]
        if axis and axis not in SWEEP_AXES:
            raise ConfigError(f"config field 'sweep_axis': must be one of {SWEEP_AXES}")
        sweep_values = tuple(float(v) for v in raw["sweep_values"].split(",") if v.strip())
        if axis and not sweep_values:
            raise ConfigError("config field 'sweep_values' is empty but a sweep axis is set")
        sub_theta, sub_w = _opt(raw, "sub_theta"), _opt(raw, "sub_weight")
        sub = None
        if sub_theta is not None or sub_w is not None:
            sub = (sub_theta if sub_theta is not None else _num(raw, "theta"),
                   sub_w if sub_w is not None else _num(raw, "weight"))
        try:
            params = LinLBPParams(_num(raw, "theta"), _num(raw, "weight"),
                                  _num(raw, "max_iters", int), _num(raw, "tol"))
            attack = AttackConfig(
                lam=lam if lam is not None else (10000.0 if cost == "categorical" else 1000.0),
                eta=_num(raw, "eta"), budget_k=_num(raw, "K", int),
                inner_iters=_num(raw, "inner_iters", int), outer_iters=_num(raw, "outer_iters", int),
                fnr_stall_window=_num(raw, "stall_window", int),
                gradient_mode=raw["gradient_mode"], binarize_mode=raw["binarize_mode"],
                threads=_num(raw, "threads", int))
            scenario = ScenarioSpec(sub, raw["random_params"].lower() in ("1", "true", "yes"),
                                    _opt(raw, "sub_train_size", int), _opt(raw, "tau"),
                                    derive_seed(seed, "scenario"))
            target = TargetSpec(raw["target_method"].lower(), _num(raw, "target_count", int),
                                derive_seed(seed, "targets"))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if cost not in ("equal", "uniform", "categorical"):
            raise ConfigError(f"config field 'cost': unknown cost kind {cost!r}")
        return cls(raw["dataset"], raw["labels"], _num(raw, "attack_edges", int),
                   _num(raw, "train_per_class", int), target, cost,
                   _num(raw, "compromised_count", int), params, attack, lam is not None,
                   methods, scenario, axis, sweep_values, _num(raw, "rw_iters", int), seed,
                   raw["out"])

    def at_sweep_point(self, value: float) -> "ExperimentConfig":
        axis = self.sweep_axis
        if axis == "K":
            return replace(self, attack=replace(self.attack, budget_k=int(value)))
        if axis == "AE":
            return replace(self, attack_edges=int(value))
        if axis == "target_count":
            return replace(self, target=replace(self.target, count=int(value)))
        if axis == "lambda":
            return replace(self, attack=replace(self.attack, lam=float(value)), lam_explicit=True)
        if axis == "eta":
            return replace(self, attack=replace(self.attack, eta=float(value)))
        if axis == "tau":
            return replace(self, scenario=replace(self.scenario, tau_percent=float(value)))
        if axis == "substitute_w":
            theta = (self.scenario.substitute_params or (self.params.theta, 0))[0]
            return replace(self, scenario=replace(self.scenario, substitute_params=(theta, float(value))))
        return self


@dataclass
class MethodOutcome:
    method: str
    flips: FlipSet
    posterior: np.ndarray
    fnr_history: list[float] = field(default_factory=list)
    total_cost: float = 0.0
    iterations: int = 0


@dataclass
class RunOutput:
    rows: list[dict]
    outcomes: list[tuple[str, MethodOutcome]]
    graph: G.Graph
    cost_model: CostModel
    targets: np.ndarray


def load_base_graph(dataset: str, labels: str = "") -> G.Graph:
    if dataset.startswith(SURROGATE):
        tail = dataset[len(SURROGATE):].lstrip(":")
        return G.surrogate_social_graph(seed=int(tail) if tail else 0)
    g = G.load_edge_list(dataset)
    if labels:
        return G.load_labels(g, labels)
    return g.with_labels(np.full(g.node_count, G.NEGATIVE, dtype=np.int8))


@contextmanager
def _timed(sink: list, stage: str):
    t0 = time.perf_counter()
    yield
    sink.append((stage, time.perf_counter() - t0))


def format_value(x) -> str:
    if isinstance(x, float):
        return f"{x:.6f}"
    return str(x)


def run_single(cfg: ExperimentConfig, base: G.Graph, sweep_value: str = "",
               timings: list | None = None) -> RunOutput:
    """One pipeline pass on ``base``: one report row per configured method."""
    timings = [] if timings is None else timings
    prefix = f"{cfg.sweep_axis}={sweep_value}:" if cfg.sweep_axis else ""

    def tick(stage):
        return _timed(timings, prefix + stage)
    seed = cfg.seed
    with tick("synthesize"):
        if cfg.labels or np.any(base.labels == G.POSITIVE):
            g = base
        else:
            g = G.synthesize_positives(base, G.SynthesisSpec(cfg.attack_edges,
                                                             derive_seed(seed, "synthesis")))
    with tick("sample"):
        train = G.sample_training(g, cfg.train_per_class, derive_seed(seed, "training"))
        targets = select_targets(g, cfg.target)
        cost_model = make_cost_model(cfg.cost, g.labels, derive_seed(seed, "costs"),
                                     cfg.compromised_count)
    attack_cfg = cfg.attack
    if not cfg.lam_explicit:
        attack_cfg = replace(attack_cfg, lam=10000.0 if cfg.cost == "categorical" else 1000.0)
    q = assign_priors(g, train, cfg.params)
    cc_before = G.avg_clustering_coefficient(g, targets)

    outcomes: list[tuple[str, MethodOutcome]] = []
    for method in cfg.methods:
        with tick(method):
            if method == "none":
                flips = FlipSet.empty()
                out = MethodOutcome(method, flips, propagate(g, q, cfg.params).posterior)
            elif method in ("random", "del-add"):
                fn = random_attack if method == "random" else del_add_attack
                flips = fn(g, targets, attack_cfg.budget_k, derive_seed(seed, method))
                post = propagate(g, q, cfg.params, overlay=flips).posterior
                out = MethodOutcome(method, flips, post,
                                    total_cost=_cost(cost_model, flips, g))
            else:
                res = run_scenario(g, train, cfg.params, cfg.scenario, targets, cost_model, attack_cfg)
                out = MethodOutcome(method, res.flips, res.posterior, res.attack.fnr_history,
                                    res.total_cost, res.attack.iterations)
        outcomes.append((method, out))

    rows = []
    for method, out in outcomes:
        modified = G.toggle_edges(g, out.flips.u, out.flips.v) if len(out.flips) else g
        rw = rw_classify(g, train, cfg.rw_iters, overlay=out.flips if len(out.flips) else None)
        rows.append({
            "sweep_axis": cfg.sweep_axis,
            "sweep_value": sweep_value,
            "dataset": Path(cfg.dataset).name if not cfg.dataset.startswith(SURROGATE) else cfg.dataset,
            "scenario": cfg.scenario.describe() if method == "ours" else "",
            "method": method,
            "target_method": cfg.target.method,
            "cost_kind": cfg.cost,
            "K": attack_cfg.budget_k,
            "AE": cfg.attack_edges if not cfg.labels else "",
            "targets": len(targets),
            "fnr": fnr(out.posterior, targets),
            "fpr": fpr(out.posterior, g, train),
            "fnr_rw": label_fnr(rw, targets),
            "edges_modified": len(out.flips),
            "edges_added": out.flips.added,
            "edges_deleted": out.flips.deleted,
            "total_cost": float(out.total_cost),
            "cc_before": cc_before,
            "cc_after": G.avg_clustering_coefficient(modified, targets),
            "iterations": out.iterations,
        })
    return RunOutput(rows, outcomes, g, cost_model, targets)


def _cost(model: CostModel, flips: FlipSet, g: G.Graph) -> float:
    return total_cost(model, flips.u, flips.v, g.labels)


def _flip_costs(model: CostModel, flips: FlipSet, g: G.Graph) -> np.ndarray:
    if not len(flips):
        return np.zeros(0)
    return model.pairs(flips.u, flips.v, g.labels)


def write_report(path: str | Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: format_value(row[k]) for k in REPORT_COLUMNS})


def read_report(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> list[dict]:
    """Run the configured pipeline (once per sweep value) and write CSV outputs.

    Writes ``report.csv`` (one row per run and method), ``flips.csv``,
    ``fnr_history.csv`` and ``posteriors.csv`` for the primary run, per-run
    flip files under ``runs/``, and wall-clock stage times in ``timings.csv``.
    """
    out = Path(out_dir or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    timings: list[tuple[str, float]] = []
    with _timed(timings, "load"):
        base = load_base_graph(cfg.dataset, cfg.labels)

    points = sorted(cfg.sweep_values) if cfg.sweep_axis else [None]
    rows: list[dict] = []
    primary = None

    def job(value):
        run_cfg = cfg.at_sweep_point(value) if value is not None else cfg
        label = f"{value:g}" if value is not None else ""
        stage_times: list[tuple[str, float]] = []
        return label, run_single(run_cfg, base, label, stage_times), stage_times

    # sweep points are independent; results are assembled in sweep-value order
    if cfg.attack.threads > 1 and len(points) > 1:
        with ThreadPoolExecutor(min(cfg.attack.threads, len(points))) as pool:
            done = list(pool.map(job, points))
    else:
        done = [job(v) for v in points]
    for label, result, stage_times in done:
        timings.extend(stage_times)
        rows.extend(result.rows)
        sub = out / "runs" / (f"{cfg.sweep_axis}={label}" if label else "single")
        for method, outcome in result.outcomes:
            if method != "none":
                sub.mkdir(parents=True, exist_ok=True)
                write_flips(sub / f"flips_{method}.csv", outcome.flips,
                            _flip_costs(result.cost_model, outcome.flips, result.graph))
            # primary outputs: first run, preferring our attack over baselines
            if primary is None or (primary[0] is result and method == "ours"):
                primary = (result, outcome)

    write_report(out / "report.csv", rows)
    if primary is not None:
        result, outcome = primary
        write_flips(out / "flips.csv", outcome.flips,
                    _flip_costs(result.cost_model, outcome.flips, result.graph))
        write_fnr_history(out / "fnr_history.csv", outcome.fnr_history)
        write_posteriors(out / "posteriors.csv", outcome.posterior)
    with open(out / "timings.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["stage", "seconds"])
        for stage, secs in timings:
            w.writerow([stage, f"{secs:.3f}"])
    return rows


def report_overlap(flips_a, flips_b) -> int:
    """Number of unordered pairs modified by both flip sets."""
    def norm(f):
        if isinstance(f, FlipSet):
            return f.pairs()
        return {(min(a, b), max(a, b)) for a, b in f}
    return len(norm(flips_a) & norm(flips_b))
