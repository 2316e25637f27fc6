"""Corpus construction, featurization, linear SVM, F1-vs-budget sweeps and agent comparison."""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .analyzer import AnalyzerConfig, analyze_sample
from .malware_world import (FamilySpec, MalwareSample, WorldConfig, dumps_world, family_from_dict,
                            generate_family, instantiate_sample, sample_from_dict)
from .model_builder import graph_features


@dataclass(frozen=True)
class CorpusConfig:
    families: int = 20
    samples_per_family: int = 30

    def __post_init__(self):
        if self.families < 2 or self.samples_per_family < 2:
            raise ValueError("corpus needs >= 2 families and >= 2 samples per family")


@dataclass
class Corpus:
    families: list[FamilySpec]
    samples: list[MalwareSample]
    labels: np.ndarray
    seed: int
    world: WorldConfig

    @property
    def n_families(self) -> int:
        return len(self.families)

    @property
    def samples_per_family(self) -> int:
        return len(self.samples) // max(1, self.n_families)

    def dumps(self) -> str:
        return dumps_world(self.families, self.samples, self.seed, self.world)

    @classmethod
    def loads(cls, text: str) -> "Corpus":
        doc = json.loads(text)
        if doc.get("schema") != "bmc_ama.corpus":
            raise ValueError("not a bmc_ama corpus document")
        world = WorldConfig(**doc["world"])
        families = [family_from_dict(d) for d in doc["families"]]
        samples = [sample_from_dict(d) for d in doc["samples"]]
        labels = np.array([m.family_id for m in samples], dtype=np.int64)
        return cls(families, samples, labels, int(doc["seed"]), world)


def build_corpus(config: CorpusConfig, world: WorldConfig, seed: int) -> Corpus:
    """Balanced corpus: ``samples_per_family`` jittered samples of each generated family."""
    if config.families < 2 or config.samples_per_family < 2:
        raise ValueError("corpus needs >= 2 families and >= 2 samples per family")
    rng = np.random.default_rng(seed)
    families = [generate_family(rng, world, family_id=f) for f in range(config.families)]
    samples, labels = [], []
    for f in families:
        for _ in range(config.samples_per_family):
            samples.append(instantiate_sample(f, rng, world.jitter, world.noise_rate,
                                              sample_id=len(samples), config=world))
            labels.append(f.family_id)
    return Corpus(families, samples, np.array(labels, dtype=np.int64), seed, world)


# --- classifier -----------------------------------------------------------

@dataclass(frozen=True)
class SvmHyper:
    reg: float = 1e-3
    epochs: int = 30
    lr: float = 0.5


@dataclass
class LinearModel:
    """One-vs-rest linear SVM on standardized features."""

    classes: np.ndarray
    weights: np.ndarray
    bias: np.ndarray
    center: np.ndarray
    scale: np.ndarray

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        Z = (X - self.center) / self.scale
        return Z @ self.weights.T + self.bias

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.classes[np.argmax(self.decision_function(X), axis=1)]


def stratified_split(labels: np.ndarray, train_fraction: float, seed: int):
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        rng.shuffle(idx)
        k = int(round(train_fraction * len(idx)))
        k = min(max(k, 1), len(idx) - 1) if len(idx) > 1 else len(idx)
        train.extend(idx[:k])
        test.extend(idx[k:])
    train, test = np.sort(np.array(train, dtype=np.int64)), np.sort(np.array(test, dtype=np.int64))
    if len(np.unique(labels[train])) < 2 or len(test) == 0:
        raise ValueError("degenerate split: need >= 2 classes in train and a nonempty test set")
    return train, test


def fit_linear_svm(X: np.ndarray, y: np.ndarray, hyper: SvmHyper = SvmHyper(), seed: int = 0,
                   return_loss: bool = False):
    """Hinge-loss SGD with L2 penalty, all one-vs-rest problems updated together.

    Step size decays as lr / (1 + lr * reg * t). With ``reg == 0`` an epoch
    with no margin violations leaves the model untouched.
    """
    classes = np.unique(y)
    if len(classes) < 2:
        raise ValueError("need at least two classes to train")
    center = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Z = (X - center) / scale
    Y = np.where(y[:, None] == classes[None, :], 1.0, -1.0)
    W = np.zeros((len(classes), X.shape[1]))
    b = np.zeros(len(classes))
    rng = np.random.default_rng(seed)
    t = 0
    for _ in range(hyper.epochs):
        for i in rng.permutation(len(Z)):
            eta = hyper.lr / (1.0 + hyper.lr * hyper.reg * t)
            t += 1
            yi = Y[i]
            viol = yi * (W @ Z[i] + b) < 1.0
            if hyper.reg:
                W *= 1.0 - eta * hyper.reg
            if viol.any():
                g = yi * viol
                W += eta * np.outer(g, Z[i])
                b += eta * g
    model = LinearModel(classes, W, b, center, scale)
    if return_loss:
        margins = Y * (Z @ W.T + b)
        return model, float(np.maximum(0.0, 1.0 - margins).sum(axis=1).mean())
    return model


def train_classifier(features: np.ndarray, labels: np.ndarray, train_fraction: float = 0.7,
                     split_seed: int = 0, hyper: SvmHyper = SvmHyper()):
    """Stratified split, fit, predict held-out. Returns (model, test_idx, predictions)."""
    train, test = stratified_split(labels, train_fraction, split_seed)
    model = fit_linear_svm(features[train], labels[train], hyper, seed=split_seed)
    return model, test, model.predict(features[test])


def macro_f1(predictions, labels, classes=None):
    """Macro-averaged F1 and the per-class F1 map.

    Classes absent from both predictions and labels are left out of the
    average; any other class with undefined precision or recall scores 0.
    """
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ValueError("predictions and labels differ in length")
    if classes is None:
        classes = np.union1d(np.unique(labels), np.unique(predictions))
    per_class = {}
    for c in classes:
        tp = int(np.sum((predictions == c) & (labels == c)))
        fp = int(np.sum((predictions == c) & (labels != c)))
        fn = int(np.sum((predictions != c) & (labels == c)))
        per_class[int(c)] = 2.0 * tp / (2 * tp + fp + fn) if tp else 0.0
    present = [int(c) for c in classes if np.any(labels == c) or np.any(predictions == c)]
    macro = float(np.mean([per_class[c] for c in present])) if present else 0.0
    return macro, per_class


# --- sweeps ---------------------------------------------------------------

@dataclass(frozen=True)
class AgentSpec:
    name: str
    controller: dict


@dataclass(frozen=True)
class SweepConfig:
    n_max: int = 12
    seeds: tuple[int, ...] = tuple(range(5))
    delta: float = 0.01
    train_fraction: float = 0.7
    svm: SvmHyper = field(default_factory=SvmHyper)
    v_pair: int = 512
    shuffle_labels: bool = False
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(self.seeds))
        if self.n_max < 1 or len(self.seeds) < 1:
            raise ValueError("need n_max >= 1 and at least one seed")
        if not self.delta > 0:
            raise ValueError("delta must be > 0")


@dataclass
class SweepResult:
    agent: str
    budgets: np.ndarray
    f1: np.ndarray                  # (n_seeds, n_budgets)
    seeds: tuple[int, ...]

    @property
    def mean(self) -> np.ndarray:
        return self.f1.mean(axis=0)

    @property
    def std(self) -> np.ndarray:
        return self.f1.std(axis=0)

    def to_csv(self, header: str | None = None) -> str:
        buf = io.StringIO()
        if header:
            buf.write(f"# {header}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["agent", "budget", "mean_f1", "std_f1"] + [f"seed_{s}" for s in self.seeds])
        for j, n in enumerate(self.budgets):
            w.writerow([self.agent, int(n), repr(float(self.mean[j])), repr(float(self.std[j]))]
                       + [repr(float(v)) for v in self.f1[:, j]])
        return buf.getvalue()


def analysis_seed(sweep_seed: int, sample_id: int) -> int:
    return int(np.random.SeedSequence([sweep_seed, sample_id]).generate_state(1)[0])


def _budget_features(args):
    sample, cfg, vocab, v_pair = args
    feats = []
    analyze_sample(sample, cfg, snapshots=lambda t, g: feats.append(graph_features(g, vocab, v_pair)))
    return np.stack(feats)


def corpus_features(corpus: Corpus, analyzer: AnalyzerConfig, n_max: int, sweep_seed: int,
                    v_pair: int = 512, workers: int = 1) -> np.ndarray:
    """Features of every sample's graph after each budget 1..n_max: shape (n_max, samples, dim)."""
    jobs = [(m, replace(analyzer, max_actions=n_max, seed=analysis_seed(sweep_seed, m.sample_id)),
             corpus.world.vocab_size, v_pair) for m in corpus.samples]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            per_sample = list(pool.map(_budget_features, jobs, chunksize=8))
    else:
        per_sample = [_budget_features(j) for j in jobs]
    return np.stack(per_sample, axis=1)


def sweep_action_budget(corpus: Corpus, agent: AgentSpec, analyzer: AnalyzerConfig,
                        sweep: SweepConfig) -> SweepResult:
    """Macro-F1 of the downstream classifier for every budget 1..n_max and every seed."""
    if len(np.unique(corpus.labels)) < 2:
        raise ValueError("sweep needs a corpus with at least two families")
    analyzer = replace(analyzer, controller=agent.controller)
    budgets = np.arange(1, sweep.n_max + 1)
    f1 = np.zeros((len(sweep.seeds), sweep.n_max))
    for i, s in enumerate(sweep.seeds):
        feats = corpus_features(corpus, analyzer, sweep.n_max, s, sweep.v_pair, sweep.workers)
        labels = corpus.labels
        if sweep.shuffle_labels:
            labels = np.random.default_rng([s, 7]).permutation(labels)
        for j in range(sweep.n_max):
            _, test, pred = train_classifier(feats[j], labels, sweep.train_fraction, s, sweep.svm)
            f1[i, j] = macro_f1(pred, labels[test], classes=np.arange(corpus.n_families))[0]
    return SweepResult(agent.name, budgets, f1, tuple(sweep.seeds))


def optimal_actions_curve(curve, delta: float = 0.01) -> int:
    """Smallest budget whose F1 is within ``delta`` of the curve's maximum."""
    if not delta > 0:
        raise ValueError("delta must be > 0")
    curve = np.asarray(curve, dtype=float)
    return int(np.flatnonzero(curve >= curve.max() - delta)[0]) + 1


def optimal_actions(sr: SweepResult, delta: float = 0.01) -> int:
    return optimal_actions_curve(sr.mean, delta)


def per_seed_optimal_actions(sr: SweepResult, delta: float = 0.01) -> np.ndarray:
    return np.array([optimal_actions_curve(row, delta) for row in sr.f1])


@dataclass(frozen=True)
class ComparisonRow:
    agent: str
    optimal_actions: int
    median_seed_optimal: float
    seconds: float


def comparison_rows(results: list[SweepResult], delta: float, action_cost: float) -> list[ComparisonRow]:
    rows = []
    for sr in results:
        n = optimal_actions(sr, delta)
        rows.append(ComparisonRow(sr.agent, n, float(np.median(per_seed_optimal_actions(sr, delta))),
                                  n * action_cost))
    return rows


def compare_agents(corpus: Corpus, agents: list[AgentSpec], analyzer: AnalyzerConfig,
                   sweep: SweepConfig):
    """Sweep every agent and summarize optimal actions and simulated time per agent. Returns (rows, sweeps)."""
    results = [sweep_action_budget(corpus, a, analyzer, sweep) for a in agents]
    return comparison_rows(results, sweep.delta, analyzer.action_cost), results


def comparison_csv(rows: list[ComparisonRow], header: str | None = None) -> str:
    buf = io.StringIO()
    if header:
        buf.write(f"# {header}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["agent", "optimal_actions", "median_seed_optimal", "seconds"])
    for r in rows:
        w.writerow([r.agent, r.optimal_actions, repr(r.median_seed_optimal), repr(r.seconds)])
    return buf.getvalue()


def format_comparison(rows: list[ComparisonRow]) -> str:
    width = max([len("Analyzer Model")] + [len(r.agent) for r in rows])
    out = [f"{'Analyzer Model':<{width}}  Analyzer Actions  Time [seconds]"]
    for r in rows:
        out.append(f"{r.agent:<{width}}  {r.optimal_actions:>16d}  {r.seconds:>14g}")
    return "\n".join(out)
