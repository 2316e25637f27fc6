"""Per-sample analysis loop: controller + Q-learner + environment + graph builder."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import rl_core
from .bmc_exploration import make_controller
from .malware_world import INIT, MalwareSample, execute_trigger, extract_action_space, reset_environment
from .model_builder import CallGraph, Novelty, ingest_trace, new_graph

REWARDS = ("novelty",)


@dataclass(frozen=True)
class AnalyzerConfig:
    max_actions: int = 12
    learning: rl_core.LearningConfig = field(default_factory=rl_core.LearningConfig)
    controller: dict = field(default_factory=lambda: {"kind": "bmc"})
    reward: str = "novelty"
    action_cost: float = 21.0
    kappa: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.max_actions < 1:
            raise ValueError("max_actions must be >= 1")
        if not self.action_cost > 0:
            raise ValueError("action_cost must be > 0")
        if self.reward not in REWARDS:
            raise ValueError(f"unknown reward {self.reward!r}; choose from {REWARDS}")
        make_controller(self.controller)  # validate early


@dataclass(frozen=True)
class StepLog:
    step: int
    state: int
    action: int
    epsilon: float
    trace_len: int
    reward: float
    new_nodes: int
    new_edges: int
    g_q: float
    g_u: float
    g_exp: float


STEP_LOG_COLUMNS = [f for f in StepLog.__dataclass_fields__]


@dataclass
class AnalysisResult:
    sample_id: int
    graph: CallGraph
    steps: list[StepLog]
    elapsed_seconds: float


class AnalysisError(RuntimeError):
    """A step failed; ``partial`` holds the result up to the failing step."""

    def __init__(self, message: str, partial: AnalysisResult):
        super().__init__(message)
        self.partial = partial


def novelty_reward(report: Novelty) -> float:
    if report.new_nodes < 0 or report.new_edges < 0:
        raise ValueError("novelty counts must be >= 0")
    return float(report.new_nodes + report.new_edges)


def analyzer_state(g: CallGraph, last_trace: list[int] | None) -> int:
    """Q-state: the final API call of the previous trace (Init before any action)."""
    if not last_trace:
        return INIT
    return int(last_trace[-1])


def analyze_sample(m: MalwareSample, cfg: AnalyzerConfig, snapshots=None) -> AnalysisResult:
    """Spend ``cfg.max_actions`` trigger actions on one sample.

    ``snapshots``, if given, is called as ``snapshots(step, graph)`` after each
    step; a run with budget n is an exact prefix of a run with budget N > n,
    so this yields every smaller budget's final graph in one pass.
    """
    rng = np.random.default_rng(cfg.seed)
    actions = extract_action_space(m)
    q = rl_core.QTable()
    controller = make_controller(cfg.controller)
    gamma, eta = cfg.learning.gamma, cfg.learning.eta
    graph = new_graph(cfg.kappa)
    steps: list[StepLog] = []
    state = analyzer_state(graph, None)

    for t in range(1, cfg.max_actions + 1):
        try:
            eps = controller.epsilon()
            action = rl_core.epsilon_greedy_sample(q, state, actions, eps, rng)
            trace = execute_trigger(m, action, rng)
            report = ingest_trace(graph, action, trace)
            reward = novelty_reward(report)
            next_state = analyzer_state(graph, trace)
            tr = rl_core.Transition(state, action, reward, next_state, tuple(actions))
            g_q = rl_core.target_q(q, tr, gamma)
            g_u = rl_core.target_uniform(q, tr, gamma)
            g_exp = rl_core.target_expected_sarsa(q, tr, gamma, eps)
            rl_core.td_update(q, state, action, g_exp, eta)
            controller.observe(g_q, g_u, g_exp)
        except Exception as exc:
            partial = AnalysisResult(m.sample_id, graph, steps, len(steps) * cfg.action_cost)
            raise AnalysisError(f"sample {m.sample_id}: step {t} failed: {exc}", partial) from exc
        steps.append(StepLog(t, state, action.index, eps, len(trace), reward,
                             report.new_nodes, report.new_edges, g_q, g_u, g_exp))
        state = next_state
        reset_environment(m)
        if snapshots is not None:
            snapshots(t, graph)

    return AnalysisResult(m.sample_id, graph, steps, cfg.max_actions * cfg.action_cost)


def steps_to_csv(steps: list[StepLog], header: str | None = None) -> str:
    buf = io.StringIO()
    if header:
        buf.write(f"# {header}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STEP_LOG_COLUMNS)
    for s in steps:
        w.writerow([getattr(s, c) if not isinstance(getattr(s, c), float) else repr(getattr(s, c))
                    for c in STEP_LOG_COLUMNS])
    return buf.getvalue()
