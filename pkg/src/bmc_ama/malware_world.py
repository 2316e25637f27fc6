"""Synthetic malware behaviour models standing in for an instrumented emulator.

A family is a hidden Markov chain over a subset of a global API vocabulary.
Every trace starts at ``INIT`` (index 0); the triggering intent picks the
first API call, after which the chain walks the family kernel until a
terminal draw or the length cap. Samples are jittered copies of their
family with their own manifest of intents, plus optional noise calls drawn
from a pool of vocabulary entries that no family uses.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

INIT = 0
ROW_TOL = 1e-9


class Intent(NamedTuple):
    """One trigger action: an intent local to one sample's manifest."""

    sample: int
    index: int


@dataclass(frozen=True)
class WorldConfig:
    vocab_size: int = 200
    nodes_per_family: int = 24          # includes Init
    intents_range: tuple[int, int] = (5, 15)
    terminal_range: tuple[float, float] = (0.15, 0.4)
    out_degree: int = 2
    locality: int = 3                   # successors drawn from the next `locality` ring positions; 0 = anywhere
    entry_nodes_per_intent: int = 1
    dormant_fraction: float = 0.3       # share of intent prototypes that only reach a terminal stub call
    shared_nodes: int = 30              # common framework calls any family may draw on
    shared_fraction: float = 0.9
    noise_pool: int = 20
    max_trace_len: int = 32
    jitter: float = 0.2
    noise_rate: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "intents_range", tuple(self.intents_range))
        object.__setattr__(self, "terminal_range", tuple(self.terminal_range))
        lo, hi = self.intents_range
        if not 1 <= lo <= hi:
            raise ValueError("intents_range must satisfy 1 <= lo <= hi")
        tlo, thi = self.terminal_range
        if not 0.0 <= tlo <= thi <= 1.0:
            raise ValueError("terminal_range must satisfy 0 <= lo <= hi <= 1")
        if not self.vocab_size >= self.nodes_per_family >= 2:
            raise ValueError("need vocab_size >= nodes_per_family >= 2")
        if self.out_degree < 1 or self.entry_nodes_per_intent < 1:
            raise ValueError("out_degree and entry_nodes_per_intent must be >= 1")
        if self.locality < 0:
            raise ValueError("locality must be >= 0")
        if self.max_trace_len < 2:
            raise ValueError("max_trace_len must be >= 2")
        if not 0.0 <= self.shared_fraction <= 1.0:
            raise ValueError("shared_fraction must lie in [0, 1]")
        if not 0.0 <= self.dormant_fraction < 1.0:
            raise ValueError("dormant_fraction must lie in [0, 1)")
        if self.noise_pool < 0 or self.shared_nodes < 0:
            raise ValueError("pool sizes must be >= 0")
        informative = self.vocab_size - 1 - self.noise_pool
        if informative < self.nodes_per_family - 1:
            raise ValueError("vocabulary too small for family size after reserving noise pool")
        if self.shared_nodes > informative:
            raise ValueError("shared_nodes exceeds the informative vocabulary")
        if not (0.0 <= self.jitter < 1.0 and 0.0 <= self.noise_rate < 1.0):
            raise ValueError("jitter and noise_rate must lie in [0, 1)")

    @property
    def noise_calls(self) -> np.ndarray:
        return np.arange(self.vocab_size - self.noise_pool, self.vocab_size)


@dataclass
class FamilySpec:
    """Hidden ground-truth chain for one family.

    ``nodes[i]`` is the ApiCallId of local node ``i``; ``intent_rows`` has one
    distribution over local nodes per intent prototype; ``kernel`` is the
    node-to-node row-stochastic matrix; ``terminal[i]`` is the stopping
    probability after emitting node ``i``.
    """

    family_id: int
    nodes: np.ndarray
    intent_rows: np.ndarray
    kernel: np.ndarray
    terminal: np.ndarray
    intents_range: tuple[int, int]

    def kernel_distance(self, other: "FamilySpec", vocab_size: int) -> float:
        """L1 distance between the two chains lifted onto the full vocabulary."""
        return float(np.abs(_lift(self, vocab_size) - _lift(other, vocab_size)).sum())


@dataclass
class MalwareSample:
    sample_id: int
    family_id: int
    nodes: np.ndarray
    intent_rows: np.ndarray             # one row per manifest intent
    kernel: np.ndarray
    terminal: np.ndarray
    noise_rate: float
    noise_calls: np.ndarray
    max_trace_len: int
    manifest: tuple[Intent, ...] = field(init=False)

    def __post_init__(self):
        self.manifest = tuple(Intent(self.sample_id, j) for j in range(len(self.intent_rows)))


def _lift(fam, vocab_size: int) -> np.ndarray:
    # Rows: Init then every vocab entry; columns: vocab. Init row = mean intent row.
    out = np.zeros((vocab_size, vocab_size))
    out[INIT, fam.nodes] = fam.intent_rows.mean(axis=0)
    out[np.ix_(fam.nodes, fam.nodes)] = fam.kernel
    return out


def _sparse_row(rng: np.random.Generator, width: int, k: int) -> np.ndarray:
    row = np.zeros(width)
    k = min(k, width)
    idx = rng.choice(width, size=k, replace=False)
    row[idx] = rng.dirichlet(np.ones(k))
    return row


def _local_kernel(rng: np.random.Generator, k: int, out_degree: int, locality: int) -> np.ndarray:
    # Nodes sit on a random ring; each one only reaches the next `locality` positions,
    # so distinct entry points exercise mostly distinct handler regions.
    if locality == 0 or locality >= k:
        return np.stack([_sparse_row(rng, k, out_degree) for _ in range(k)])
    ring = rng.permutation(k)
    kernel = np.zeros((k, k))
    for pos, node in enumerate(ring):
        window = ring[(pos + 1 + np.arange(locality)) % k]
        kernel[node, window] = _sparse_row(rng, locality, out_degree)
    return kernel


def generate_family(rng: np.random.Generator, config: WorldConfig, family_id: int = 0) -> FamilySpec:
    """Draw a family chain: node subset, sparse kernel, intent prototypes, stop probabilities."""
    k = config.nodes_per_family - 1
    informative = np.arange(1, config.vocab_size - config.noise_pool)
    shared = informative[:config.shared_nodes]
    private = informative[config.shared_nodes:]
    n_shared = min(len(shared), int(round(config.shared_fraction * k)))
    n_private = k - n_shared
    if n_private > len(private):
        n_shared, n_private = k - len(private), len(private)
    nodes = np.sort(np.concatenate([
        rng.choice(shared, size=n_shared, replace=False),
        rng.choice(private, size=n_private, replace=False),
    ])).astype(np.int64)
    kernel = _local_kernel(rng, k, config.out_degree, config.locality)
    n_intents = config.intents_range[1]
    intent_rows = np.stack([_sparse_row(rng, k, config.entry_nodes_per_intent)
                            for _ in range(n_intents)])
    terminal = rng.uniform(*config.terminal_range, size=k)
    n_dormant = int(round(config.dormant_fraction * n_intents))
    if n_dormant:
        stub = int(rng.integers(k))
        terminal[stub] = 1.0
        for j in rng.choice(n_intents, size=n_dormant, replace=False):
            intent_rows[j] = 0.0
            intent_rows[j, stub] = 1.0
    return FamilySpec(family_id, nodes, intent_rows, kernel, terminal, config.intents_range)


def _jitter_rows(rng: np.random.Generator, rows: np.ndarray, jitter: float) -> np.ndarray:
    # Convex mix with a random distribution on each row's own support: L1 shift <= 2 * jitter.
    if jitter == 0.0:
        return rows.copy()
    out = np.empty_like(rows)
    for i, row in enumerate(rows):
        support = row > 0
        d = np.zeros_like(row)
        d[support] = rng.dirichlet(np.ones(support.sum()))
        mixed = (1.0 - jitter) * row + jitter * d
        out[i] = mixed / mixed.sum()
    return out


def instantiate_sample(f: FamilySpec, rng: np.random.Generator, jitter: float, noise_rate: float,
                       sample_id: int = 0, config: WorldConfig | None = None) -> MalwareSample:
    """Perturbed copy of a family with its own manifest."""
    if not (0.0 <= jitter < 1.0 and 0.0 <= noise_rate < 1.0):
        raise ValueError("jitter and noise_rate must lie in [0, 1)")
    config = config or WorldConfig()
    lo, hi = f.intents_range
    n = int(rng.integers(lo, hi + 1))
    chosen = np.sort(rng.choice(len(f.intent_rows), size=n, replace=False))
    intent_rows = _jitter_rows(rng, f.intent_rows[chosen], jitter)
    kernel = _jitter_rows(rng, f.kernel, jitter)
    if jitter == 0.0:
        terminal = f.terminal.copy()
    else:
        mixed = (1.0 - jitter) * f.terminal + jitter * rng.uniform(*config.terminal_range,
                                                                    size=len(f.terminal))
        terminal = np.where(f.terminal == 1.0, 1.0, mixed)  # stub calls stay terminal
    return MalwareSample(sample_id, f.family_id, f.nodes.copy(), intent_rows, kernel, terminal,
                         float(noise_rate), config.noise_calls, config.max_trace_len)


def extract_action_space(m: MalwareSample) -> list[Intent]:
    return list(m.manifest)


def execute_trigger(m: MalwareSample, a: Intent, rng: np.random.Generator) -> list[int]:
    """Run one trigger and return the API-call trace, starting at Init."""
    if not isinstance(a, tuple) or a not in m.manifest:
        raise ValueError(f"action {a!r} is not in sample {m.sample_id}'s manifest")
    trace = [INIT]
    cap = m.max_trace_len
    row = m.intent_rows[a.index]
    noisy = m.noise_rate > 0.0 and len(m.noise_calls) > 0
    while len(trace) < cap:
        local = int(rng.choice(len(row), p=row))
        trace.append(int(m.nodes[local]))
        if noisy and len(trace) < cap and rng.random() < m.noise_rate:
            trace.append(int(m.noise_calls[rng.integers(len(m.noise_calls))]))
        if rng.random() < m.terminal[local]:
            break
        row = m.kernel[local]
    return trace


def reset_environment(m: MalwareSample) -> MalwareSample:
    # The synthetic world is memoryless; the hook keeps the analysis loop shape.
    return m


# --- corpus serialization -------------------------------------------------

SCHEMA_VERSION = 1


def family_to_dict(f: FamilySpec) -> dict:
    return {
        "family_id": f.family_id,
        "nodes": f.nodes.tolist(),
        "intent_rows": f.intent_rows.tolist(),
        "kernel": f.kernel.tolist(),
        "terminal": f.terminal.tolist(),
        "intents_range": list(f.intents_range),
    }


def family_from_dict(d: dict) -> FamilySpec:
    return FamilySpec(
        d["family_id"],
        np.asarray(d["nodes"], dtype=np.int64),
        np.asarray(d["intent_rows"], dtype=float),
        np.asarray(d["kernel"], dtype=float),
        np.asarray(d["terminal"], dtype=float),
        tuple(d["intents_range"]),
    )


def sample_to_dict(m: MalwareSample) -> dict:
    return {
        "sample_id": m.sample_id,
        "family_id": m.family_id,
        "nodes": m.nodes.tolist(),
        "intent_rows": m.intent_rows.tolist(),
        "kernel": m.kernel.tolist(),
        "terminal": m.terminal.tolist(),
        "noise_rate": m.noise_rate,
        "noise_calls": m.noise_calls.tolist(),
        "max_trace_len": m.max_trace_len,
    }


def sample_from_dict(d: dict) -> MalwareSample:
    return MalwareSample(
        d["sample_id"],
        d["family_id"],
        np.asarray(d["nodes"], dtype=np.int64),
        np.asarray(d["intent_rows"], dtype=float),
        np.asarray(d["kernel"], dtype=float),
        np.asarray(d["terminal"], dtype=float),
        float(d["noise_rate"]),
        np.asarray(d["noise_calls"], dtype=np.int64),
        int(d["max_trace_len"]),
    )


def dumps_world(families, samples, seed: int, config: WorldConfig) -> str:
    doc = {
        "schema": "bmc_ama.corpus",
        "version": SCHEMA_VERSION,
        "seed": seed,
        "world": {k: list(v) if isinstance(v, tuple) else v
                  for k, v in config.__dict__.items()},
        "families": [family_to_dict(f) for f in families],
        "samples": [sample_to_dict(m) for m in samples],
    }
    return json.dumps(doc, sort_keys=True)
