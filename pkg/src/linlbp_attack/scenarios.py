"""Partial-knowledge attacks: substitute parameters, substitute training set,
partial graph, evaluated against the defender's true configuration."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attack import AttackConfig, AttackResult, FlipSet, run_attack
from .costs import CostModel, total_cost
from .graph import (POSITIVE, Graph, GraphError, TrainingSet, extract_partial_graph)
from .propagation import LinLBPParams, assign_priors, fnr, propagate


@dataclass(frozen=True)
class ScenarioSpec:
    """What the attacker knows.

    ``substitute_params`` replaces (theta, weight); ``random_params`` draws them
    uniformly from their domains instead. ``substitute_training_size`` samples a
    balanced substitute training set. ``tau_percent`` restricts the attacker to a
    partial graph. ``None`` everywhere means full knowledge.
    """

    substitute_params: tuple[float, float] | None = None
    random_params: bool = False
    substitute_training_size: int | None = None
    tau_percent: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.substitute_params is not None:
            LinLBPParams(*self.substitute_params)  # validates the domains
        size = self.substitute_training_size
        if size is not None and (size < 2 or size % 2):
            raise ValueError("substitute training size must be even and >= 2")
        if self.tau_percent is not None and not 0 < self.tau_percent <= 100:
            raise ValueError("tau_percent must lie in (0, 100]")

    @property
    def is_full_knowledge(self) -> bool:
        return (self.substitute_params is None and not self.random_params
                and self.substitute_training_size is None and self.tau_percent is None)

    def describe(self) -> str:
        parts = []
        if self.substitute_params is not None:
            parts.append(f"theta'={self.substitute_params[0]:g};w'={self.substitute_params[1]:g}")
        if self.random_params:
            parts.append("params=random")
        if self.substitute_training_size is not None:
            parts.append(f"train'={self.substitute_training_size}")
        if self.tau_percent is not None:
            parts.append(f"tau={self.tau_percent:g}")
        return ";".join(parts) or "full"


@dataclass
class ScenarioResult:
    attack: AttackResult
    flips: FlipSet  # in true-graph ids
    fnr: float
    posterior: np.ndarray
    total_cost: float
    attacker_params: LinLBPParams


def substitute_training(g: Graph, size: int, seed) -> TrainingSet:
    """size/2 random positives and size/2 random non-positive nodes."""
    half = size // 2
    pos = g.nodes_with_label(POSITIVE)
    other = np.flatnonzero(g.labels != POSITIVE)
    if len(pos) < half or len(other) < half:
        raise GraphError(f"cannot sample {half} nodes per class")
    rng = np.random.default_rng(seed)
    return TrainingSet(np.sort(rng.choice(pos, size=half, replace=False)),
                       np.sort(rng.choice(other, size=half, replace=False)))


def _attacker_params(true: LinLBPParams, spec: ScenarioSpec, rng) -> LinLBPParams:
    if spec.substitute_params is not None:
        theta, w = spec.substitute_params
    elif spec.random_params:
        # domains are half-open at 0
        theta = 1.0 - rng.random()
        w = 0.5 * (1.0 - rng.random())
    else:
        return true
    return LinLBPParams(theta, w, true.max_iters, true.tol)


def _restrict_training(train: TrainingSet, ids: np.ndarray) -> TrainingSet:
    remap = {int(x): i for i, x in enumerate(ids.tolist())}
    pos = [remap[x] for x in train.labeled_positive.tolist() if x in remap]
    neg = [remap[x] for x in train.labeled_negative.tolist() if x in remap]
    return TrainingSet(np.array(pos, np.int64), np.array(neg, np.int64))


def run_scenario(g_true: Graph, train_true: TrainingSet, params_true: LinLBPParams,
                 spec: ScenarioSpec, targets, cost_model: CostModel,
                 cfg: AttackConfig) -> ScenarioResult:
    """Attack from the attacker's view, then score the flips on the true system."""
    targets = np.unique(np.asarray(targets, dtype=np.int64))
    ss = np.random.SeedSequence(spec.seed)
    param_seed, train_seed, graph_seed = ss.spawn(3)
    params = _attacker_params(params_true, spec, np.random.default_rng(param_seed))
    if spec.substitute_training_size is not None:
        train = substitute_training(g_true, spec.substitute_training_size,
                                    np.random.default_rng(train_seed))
    else:
        train = train_true

    if spec.tau_percent is not None:
        view, ids = extract_partial_graph(g_true, spec.tau_percent, np.random.default_rng(graph_seed))
        remap = np.full(g_true.node_count, -1, dtype=np.int64)
        remap[ids] = np.arange(len(ids))
        if np.any(remap[targets] < 0):
            raise GraphError("a target is missing from the partial view")
        result = run_attack(view, _restrict_training(train, ids), remap[targets],
                            cost_model.restrict(ids), params, cfg)
        flips = result.flips.remap(ids, g_true)
    else:
        result = run_attack(g_true, train, targets, cost_model, params, cfg)
        flips = result.flips

    if len(flips) and (flips.u.max() >= g_true.node_count or flips.v.max() >= g_true.node_count):
        raise GraphError("flip endpoint outside the true graph; id map is corrupt")
    q = assign_priors(g_true, train_true, params_true)
    post = propagate(g_true, q, params_true, overlay=flips).posterior
    cost = total_cost(cost_model, flips.u, flips.v, g_true.labels)
    return ScenarioResult(result, flips, fnr(post, targets), post, cost, params)
