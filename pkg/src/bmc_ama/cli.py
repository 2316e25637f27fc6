"""Command-line entry point: ``bmc-ama {gen-corpus,run,sweep,compare,export-graph}``.

Exit codes: 0 success, 2 configuration/usage error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .analyzer import AnalysisError, analyze_sample, steps_to_csv
from .config import ConfigError, ExperimentConfig, load_config
from .evaluation import (Corpus, analysis_seed, build_corpus, compare_agents, comparison_csv,
                         format_comparison, sweep_action_budget)
from .model_builder import export_graph, load_graph

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

log = logging.getLogger("bmc_ama")


class UsageError(Exception):
    pass


def _header(cfg: ExperimentConfig, what: str) -> str:
    return f"bmc_ama {what} seed={cfg.seed} config={cfg.fingerprint()}"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def _corpus_for(cfg: ExperimentConfig) -> Corpus:
    if cfg.corpus_path:
        try:
            corpus = Corpus.loads(Path(cfg.corpus_path).read_text())
        except (OSError, ValueError, KeyError) as exc:
            raise UsageError(f"cannot load corpus {cfg.corpus_path}: {exc}") from exc
    else:
        corpus = build_corpus(cfg.corpus, cfg.world, cfg.seed)
    if not corpus.samples:
        raise UsageError("corpus contains no samples")
    return corpus


def cmd_gen_corpus(cfg: ExperimentConfig, out: Path) -> int:
    corpus = build_corpus(cfg.corpus, cfg.world, cfg.seed)
    _write(out, corpus.dumps())
    print(f"wrote {len(corpus.samples)} samples ({corpus.n_families} families) to {out}")
    return EXIT_OK


def _run_one(args):
    sample, analyzer = args
    try:
        res = analyze_sample(sample, analyzer)
        return sample.sample_id, res, None
    except AnalysisError as exc:
        return sample.sample_id, exc.partial, str(exc)


def cmd_run(cfg: ExperimentConfig) -> int:
    corpus = _corpus_for(cfg)
    out = Path(cfg.output_dir) / "run"
    jobs = [(m, dataclasses.replace(cfg.analyzer, seed=analysis_seed(cfg.seed, m.sample_id)))
            for m in corpus.samples]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(_run_one, jobs, chunksize=8))
    else:
        results = [_run_one(j) for j in jobs]

    failures = []
    summary = [f"# {_header(cfg, 'run')}", "sample_id,family_id,nodes,edges,elapsed_seconds,status"]
    for (sid, res, err), m in zip(results, corpus.samples):
        header = f"{_header(cfg, 'steps')} sample={sid}"
        _write(out / f"sample_{sid:05d}.steps.csv", steps_to_csv(res.steps, header))
        doc = json.loads(export_graph(res.graph, "json"))
        doc["metadata"] = {"seed": cfg.seed, "sample_id": sid, "config": cfg.fingerprint()}
        _write(out / f"sample_{sid:05d}.graph.json", json.dumps(doc, sort_keys=True, indent=1))
        _write(out / f"sample_{sid:05d}.graph.dot", f"// {header}\n" + export_graph(res.graph, "dot"))
        status = "ok" if err is None else "failed"
        if err is not None:
            failures.append(err)
            log.error(err)
        summary.append(f"{sid},{m.family_id},{len(res.graph.visits)},{len(res.graph.edges)},"
                       f"{res.elapsed_seconds!r},{status}")
    _write(out / "summary.csv", "\n".join(summary) + "\n")
    print(f"analyzed {len(results)} samples with budget {cfg.analyzer.max_actions}; "
          f"{len(failures)} failed; outputs in {out}")
    return EXIT_RUNTIME if failures else EXIT_OK


def cmd_sweep(cfg: ExperimentConfig, agents=None) -> int:
    corpus = _corpus_for(cfg)
    out = Path(cfg.output_dir)
    for agent in agents or cfg.agents:
        sr = sweep_action_budget(corpus, agent, cfg.analyzer, cfg.sweep)
        _write(out / f"sweep_{agent.name}.csv", sr.to_csv(_header(cfg, f"sweep agent={agent.name}")))
        print(f"{agent.name}: budget -> mean macro-F1 (std)")
        for n, m, s in zip(sr.budgets, sr.mean, sr.std):
            print(f"  {int(n):>3d}  {m:.4f}  ({s:.4f})")
    return EXIT_OK


def cmd_compare(cfg: ExperimentConfig) -> int:
    corpus = _corpus_for(cfg)
    out = Path(cfg.output_dir)
    rows, sweeps = compare_agents(corpus, list(cfg.agents), cfg.analyzer, cfg.sweep)
    for sr in sweeps:
        _write(out / f"sweep_{sr.agent}.csv", sr.to_csv(_header(cfg, f"sweep agent={sr.agent}")))
    _write(out / "comparison.csv", comparison_csv(rows, _header(cfg, "compare")))
    print(format_comparison(rows))
    return EXIT_OK


def cmd_export_graph(graph_path: Path, fmt: str, out: Path | None) -> int:
    try:
        g = load_graph(graph_path.read_text())
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read graph {graph_path}: {exc}") from exc
    text = export_graph(g, fmt)
    if out is None:
        sys.stdout.write(text)
    else:
        _write(out, text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bmc-ama", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(sp):
        sp.add_argument("--config", type=Path, default=None, help="JSON or YAML experiment config")
        sp.add_argument("--seed", type=int, default=None, help="override the master seed")
        sp.add_argument("--output-dir", type=Path, default=None)
        sp.add_argument("--corpus", type=Path, default=None, help="use a saved corpus instead of generating")
        return sp

    g = with_config(sub.add_parser("gen-corpus", help="generate and save a synthetic corpus"))
    g.add_argument("--out", type=Path, required=True)
    with_config(sub.add_parser("run", help="analyze every sample and export graphs and step logs"))
    s = with_config(sub.add_parser("sweep", help="macro-F1 versus action budget per agent"))
    s.add_argument("--agent", action="append", default=None, help="restrict to named agents")
    with_config(sub.add_parser("compare", help="optimal action count and simulated time per agent"))
    e = sub.add_parser("export-graph", help="convert a saved graph JSON to DOT or JSON")
    e.add_argument("graph", type=Path)
    e.add_argument("--format", choices=["dot", "json"], default="dot")
    e.add_argument("--out", type=Path, default=None)
    return p


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    kw = {}
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.output_dir is not None:
        kw["output_dir"] = str(args.output_dir)
    if args.corpus is not None:
        kw["corpus_path"] = str(args.corpus)
    return dataclasses.replace(cfg, **kw) if kw else cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "export-graph":
            return cmd_export_graph(args.graph, args.format, args.out)
        cfg = _apply_overrides(load_config(args.config), args)
        if args.command == "gen-corpus":
            return cmd_gen_corpus(cfg, args.out)
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "sweep":
            agents = None
            if args.agent:
                agents = [a for a in cfg.agents if a.name in args.agent]
                if not agents:
                    raise UsageError(f"no agents named {args.agent} in config")
            return cmd_sweep(cfg, agents)
        if args.command == "compare":
            return cmd_compare(cfg)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - surfaced as exit code 3
        log.debug("runtime failure", exc_info=True)
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
