"""Observed malware model: an Init-rooted API call graph with Dirichlet transition posteriors."""

from __future__ import annotations

import json
import zlib
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .malware_world import INIT

UNKNOWN = "<unknown>"
GRAPH_SCHEMA_VERSION = 1


class Novelty(NamedTuple):
    new_nodes: int
    new_edges: int


@dataclass
class CallGraph:
    """Counts gathered from ingested traces.

    ``visits[u]`` counts occurrences of ``u`` in traces, ``edges[(u, v)]``
    counts observed transitions, ``out_totals[u]`` is their row sum and
    ``node_intents[u][j]`` counts traces triggered by intent index ``j`` that
    passed through ``u``. ``kappa`` is the Dirichlet pseudo-count.
    """

    kappa: float = 1.0
    visits: dict[int, int] = field(default_factory=lambda: {INIT: 0})
    edges: dict[tuple[int, int], int] = field(default_factory=dict)
    out_totals: dict[int, int] = field(default_factory=dict)
    successors: dict[int, list[int]] = field(default_factory=dict)
    node_intents: dict[int, Counter] = field(default_factory=lambda: defaultdict(Counter))
    total_transitions: int = 0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be > 0")

    @property
    def nodes(self) -> set[int]:
        return set(self.visits)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CallGraph):
            return NotImplemented
        return graph_to_dict(self) == graph_to_dict(other)

    def copy(self) -> "CallGraph":
        return graph_from_dict(graph_to_dict(self))


@dataclass(frozen=True)
class HyperState:
    """Current node together with the transition posterior counts."""

    node: int
    graph: CallGraph

    def __post_init__(self):
        if self.node not in self.graph.visits:
            raise ValueError(f"node {self.node} is not in the graph")

    @property
    def phi(self) -> dict[int, dict]:
        return {u: dirichlet_counts(self.graph, u) for u in sorted(self.graph.visits)}


def new_graph(kappa: float = 1.0) -> CallGraph:
    return CallGraph(kappa=kappa)


def ingest_trace(g: CallGraph, triggered_by, tr: list[int]) -> Novelty:
    """Add one trace to the graph in place and report what was new.

    ``triggered_by`` is the intent that produced the trace; its ``index``
    (or the value itself for plain ints) is recorded per visited node.
    """
    if len(tr) == 0 or tr[0] != INIT:
        raise ValueError("trace must be nonempty and start at Init")
    if any(not isinstance(x, (int, np.integer)) or x < 0 for x in tr):
        raise ValueError("trace entries must be nonnegative API call ids")
    intent_key = getattr(triggered_by, "index", triggered_by)
    new_nodes = new_edges = 0
    for u in tr:
        u = int(u)
        if u not in g.visits:
            g.visits[u] = 0
            new_nodes += 1
        g.visits[u] += 1
        g.node_intents[u][intent_key] += 1
    for u, v in zip(tr, tr[1:]):
        u, v = int(u), int(v)
        key = (u, v)
        if key not in g.edges:
            g.edges[key] = 0
            g.successors.setdefault(u, []).append(v)
            new_edges += 1
        g.edges[key] += 1
        g.out_totals[u] = g.out_totals.get(u, 0) + 1
        g.total_transitions += 1
    return Novelty(new_nodes, new_edges)


def dirichlet_counts(g: CallGraph, u: int) -> dict:
    """Pseudo-counts over the observed successors of ``u`` plus one unknown slot."""
    phi = {v: g.edges[(u, v)] + g.kappa for v in g.successors.get(u, [])}
    phi[UNKNOWN] = g.kappa
    return phi


def transition_probability(g: CallGraph, u: int, v) -> float:
    """Posterior-mean probability of the transition u -> v.

    Successors never observed from ``u`` (or ``UNKNOWN``) receive the
    unknown slot's mass kappa / (n_u + kappa * (|support| + 1)).
    """
    if u not in g.visits:
        raise KeyError(f"node {u} is not in the graph")
    support = len(g.successors.get(u, ()))
    denom = g.out_totals.get(u, 0) + g.kappa * (support + 1)
    return (g.edges.get((u, v), 0) + g.kappa) / denom


def transition_row(g: CallGraph, u: int) -> dict:
    return {v: transition_probability(g, u, v) for v in dirichlet_counts(g, u)}


def _pair_slot(u: int, v: int, v_pair: int) -> int:
    return zlib.crc32(f"{u}->{v}".encode()) % v_pair


def graph_features(g: CallGraph, vocab_size: int, v_pair: int = 512) -> np.ndarray:
    """Fixed-length vector: normalized node-visit histogram then hashed edge probabilities."""
    x = np.zeros(vocab_size + v_pair)
    total = sum(g.visits.values())
    if total == 0:
        x[INIT] = 1.0
    else:
        for u in sorted(g.visits):
            if u < vocab_size:
                x[u] = g.visits[u] / total
    for (u, v) in sorted(g.edges):
        x[vocab_size + _pair_slot(u, v, v_pair)] += transition_probability(g, u, v)
    return x


def graph_to_dict(g: CallGraph) -> dict:
    return {
        "schema": "bmc_ama.callgraph",
        "version": GRAPH_SCHEMA_VERSION,
        "kappa": g.kappa,
        "total_transitions": g.total_transitions,
        "nodes": [
            {"id": u, "visits": g.visits[u],
             "intents": {str(k): c for k, c in sorted(g.node_intents.get(u, {}).items())}}
            for u in sorted(g.visits)
        ],
        # Edge order is first-observation order; it fixes the successor order on reload.
        "edges": [
            {"src": u, "dst": v, "count": g.edges[(u, v)],
             "p": transition_probability(g, u, v)}
            for u in sorted(g.successors) for v in g.successors[u]
        ],
    }


def graph_from_dict(d: dict) -> CallGraph:
    g = CallGraph(kappa=float(d["kappa"]))
    g.visits = {int(n["id"]): int(n["visits"]) for n in d["nodes"]}
    for n in d["nodes"]:
        if n["intents"]:
            g.node_intents[int(n["id"])] = Counter({int(k): c for k, c in n["intents"].items()})
    for e in d["edges"]:
        u, v, c = int(e["src"]), int(e["dst"]), int(e["count"])
        g.edges[(u, v)] = c
        g.successors.setdefault(u, []).append(v)
        g.out_totals[u] = g.out_totals.get(u, 0) + c
    g.total_transitions = int(d["total_transitions"])
    return g


def export_graph(g: CallGraph, fmt: str = "json") -> str:
    fmt = fmt.lower()
    if fmt == "json":
        return json.dumps(graph_to_dict(g), sort_keys=True, indent=1)
    if fmt == "dot":
        lines = ["digraph callgraph {", '  rankdir="LR";']
        for u in sorted(g.visits):
            label = "Init" if u == INIT else f"api{u}"
            lines.append(f'  n{u} [label="{label}", visits={g.visits[u]}];')
        for u in sorted(g.successors):
            for v in g.successors[u]:
                p = transition_probability(g, u, v)
                lines.append(f'  n{u} -> n{v} [count={g.edges[(u, v)]}, label="{p:.4f}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown export format {fmt!r}")


def load_graph(text: str) -> CallGraph:
    return graph_from_dict(json.loads(text))
