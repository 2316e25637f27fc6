"""Experiment configuration: one structured file (JSON or YAML), validated up front."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .analyzer import AnalyzerConfig
from .evaluation import AgentSpec, CorpusConfig, SvmHyper, SweepConfig
from .malware_world import WorldConfig
from .rl_core import LearningConfig

CONFIG_SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


DEFAULT_AGENTS = (
    AgentSpec("eps-BMC", {"kind": "bmc"}),
    AgentSpec("BMC-constant-eps", {"kind": "constant", "epsilon": 0.1}),
    AgentSpec("BMC-annealed-eps", {"kind": "annealed", "epsilon0": 1.0, "decay": 0.9, "epsilon_min": 0.01}),
)


@dataclass(frozen=True)
class ExperimentConfig:
    world: WorldConfig = field(default_factory=WorldConfig)
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    agents: tuple[AgentSpec, ...] = DEFAULT_AGENTS
    analyzer: AnalyzerConfig = field(default_factory=AnalyzerConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    output_dir: str = "results"
    seed: int = 0
    workers: int = 1
    corpus_path: str | None = None

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["version"] = CONFIG_SCHEMA_VERSION
        return d

    def fingerprint(self) -> str:
        """Hash of the experiment settings; where files are read from or written to is excluded."""
        d = self.to_dict()
        del d["output_dir"], d["corpus_path"]
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:12]


def _build(cls, data, where: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    raw = dict(raw)
    version = raw.pop("version", CONFIG_SCHEMA_VERSION)
    if version != CONFIG_SCHEMA_VERSION:
        raise ConfigError(f"unsupported config version {version}")
    top = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(raw) - top
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")

    world = _build(WorldConfig, raw.get("world"), "world")
    corpus = _build(CorpusConfig, raw.get("corpus"), "corpus")

    an = dict(raw.get("analyzer") or {})
    if "learning" in an:
        an["learning"] = _build(LearningConfig, an["learning"], "analyzer.learning")
    analyzer = _build(AnalyzerConfig, an, "analyzer")

    sw = dict(raw.get("sweep") or {})
    if "svm" in sw:
        sw["svm"] = _build(SvmHyper, sw["svm"], "sweep.svm")
    sweep = _build(SweepConfig, sw, "sweep")

    agents = DEFAULT_AGENTS
    if "agents" in raw:
        if not isinstance(raw["agents"], list) or not raw["agents"]:
            raise ConfigError("agents: expected a nonempty list")
        agents = tuple(_build(AgentSpec, a, f"agents[{i}]") for i, a in enumerate(raw["agents"]))
        for a in agents:
            try:
                AnalyzerConfig(controller=a.controller)
            except (TypeError, ValueError, KeyError) as exc:
                raise ConfigError(f"agent {a.name!r}: {exc}") from exc

    kw = {k: raw[k] for k in ("output_dir", "seed", "workers", "corpus_path") if k in raw}
    if not isinstance(kw.get("seed", 0), int) or not isinstance(kw.get("workers", 1), int):
        raise ConfigError("seed and workers must be integers")
    if kw.get("workers", 1) < 1:
        raise ConfigError("workers must be >= 1")
    cfg = ExperimentConfig(world=world, corpus=corpus, agents=agents, analyzer=analyzer,
                           sweep=sweep, **kw)
    if cfg.sweep.workers != cfg.workers:
        cfg = dataclasses.replace(cfg, sweep=dataclasses.replace(cfg.sweep, workers=cfg.workers))
    return cfg


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return config_from_dict({})
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix in (".yaml", ".yml"):
            import yaml
            raw = yaml.safe_load(text)
        else:
            raw = json.loads(text)
    except Exception as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return config_from_dict(raw if raw is not None else {})
