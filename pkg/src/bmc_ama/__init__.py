"""Bayesian-model-combination exploration for simulated active malware analysis."""

from .analyzer import AnalysisResult, AnalyzerConfig, analyze_sample
from .bmc_exploration import AnnealedEpsilon, ConstantEpsilon, EpsilonBmc, make_controller
from .evaluation import AgentSpec, Corpus, CorpusConfig, SweepConfig, build_corpus, sweep_action_budget
from .malware_world import WorldConfig

__all__ = [
    "AgentSpec", "AnalysisResult", "AnalyzerConfig", "AnnealedEpsilon", "ConstantEpsilon", "Corpus",
    "CorpusConfig", "EpsilonBmc", "SweepConfig", "WorldConfig", "analyze_sample", "build_corpus",
    "make_controller", "sweep_action_budget",
]
