"""Command-line entry points wiring the pipeline end to end.

Subcommands: gen-catalog, gen-sessions, synthesize-reasoning, evaluate,
report, export-training, and pipeline (which chains the others and skips
stages whose outputs already exist). Option precedence is flags over a
JSON config file over defaults; endpoint credentials come only from the
environment.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import agents as agents_mod
from . import eval_harness, reasoning_synth, session_model, shopsim, user_oracle
from .llm_client import DEFAULT_API_KEY_ENV, HttpChatClient


class CliError(Exception):
    pass


@dataclass
class RunConfig:
    """Resolved settings for a pipeline run."""

    workdir: Path
    seed: int = 0
    n_products: int = 240
    n_sessions: int = 200
    agent: str = "replay"
    endpoint: str | None = None
    model: str | None = None
    concurrency: int = 4
    force: bool = False

    @property
    def catalog_path(self) -> Path:
        return self.workdir / "catalog.jsonl"

    @property
    def sessions_path(self) -> Path:
        return self.workdir / "sessions.jsonl"

    @property
    def reasoned_path(self) -> Path:
        return self.workdir / "reasoned.jsonl"

    @property
    def report_path(self) -> Path:
        return self.workdir / "report.json"

    @property
    def steps_path(self) -> Path:
        return self.workdir / "report.steps.jsonl"


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(obj, dict):
        raise CliError(f"config file {path} must hold a JSON object")
    return obj


def _setting(args: argparse.Namespace, config: dict, key: str, default):
    """Flags beat the config file, which beats the default."""
    value = getattr(args, key.replace("-", "_"), None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _oracle_config(args: argparse.Namespace, n_sessions: int, seed: int) -> user_oracle.OracleConfig:
    config = _load_config_file(getattr(args, "config", None))
    return user_oracle.OracleConfig(
        mean_searches_per_session=float(_setting(args, config, "mean_searches", 2.82)),
        purchase_rate=float(_setting(args, config, "purchase_rate", 0.1391)),
        search_to_filter_ratio_min=float(_setting(args, config, "ratio_min", 7.0)),
        typo_prob=float(_setting(args, config, "typo_prob", 0.25)),
        seed=seed,
        n_sessions=n_sessions,
    )


def _require_file(path: str | Path, flag: str) -> Path:
    resolved = Path(path)
    if not resolved.exists():
        raise CliError(f"{flag} points to a missing file: {resolved}")
    return resolved


def cmd_gen_catalog(args: argparse.Namespace) -> int:
    catalog = shopsim.gen_catalog(args.seed, args.n)
    shopsim.write_catalog(catalog, args.out)
    print(f"wrote {len(catalog.products)} products to {args.out}")
    return 0


def cmd_gen_sessions(args: argparse.Namespace) -> int:
    catalog = shopsim.read_catalog(_require_file(args.catalog, "--catalog"))
    config = _oracle_config(args, n_sessions=args.n, seed=args.seed)
    sessions = user_oracle.generate_dataset(catalog, config)
    session_model.write_sessions(sessions, args.out)
    stats = user_oracle.dataset_statistics(sessions)
    print(f"wrote {len(sessions)} sessions to {args.out}")
    print(
        f"mean searches/session={stats['mean_searches_per_session']:.3f} "
        f"purchase rate={stats['purchase_rate']:.4f} "
        f"search:filter ratio={stats['search_filter_ratio']:.2f}"
    )
    return 0


def _synthesizer(args: argparse.Namespace) -> reasoning_synth.Synthesizer:
    cache_dir = getattr(args, "cache_dir", None)
    if getattr(args, "stub", False) or not getattr(args, "endpoint", None):
        client: object = reasoning_synth.StubReasoningClient()
    else:
        if not getattr(args, "model", None):
            raise CliError("--model is required with --endpoint")
        client = HttpChatClient(endpoint=args.endpoint, model=args.model)
    return reasoning_synth.Synthesizer(client, cache_dir=cache_dir)


def cmd_synthesize(args: argparse.Namespace) -> int:
    sessions = session_model.read_sessions(_require_file(args.input, "--in"))
    synthesizer = _synthesizer(args)
    reasoned = synthesizer.synthesize_dataset(sessions, concurrency=args.concurrency)
    session_model.write_sessions(reasoned, args.out)
    meta = {
        "reasoning": "synthetic",
        "model": getattr(args, "model", None) or "stub",
        "prompt_version": reasoning_synth.PROMPT_VERSION,
        "n_sessions": len(reasoned),
    }
    meta_path = Path(str(args.out) + ".meta.json")
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {len(reasoned)} reasoned sessions to {args.out}")
    return 0


def _build_agent(name: str, sessions, endpoint: str | None, model: str | None):
    if name == "replay":
        return agents_mod.ReplayAgent(sessions)
    if name == "random":
        return agents_mod.RandomAgent()
    if name == "endpoint":
        if not endpoint or not model:
            raise CliError("agent 'endpoint' needs --endpoint and --model "
                           f"(credential read from ${DEFAULT_API_KEY_ENV})")
        return agents_mod.EndpointAgent(HttpChatClient(endpoint=endpoint, model=model),
                                        model_name=model)
    raise CliError(f"unknown agent {name!r} (choose replay, random, or endpoint)")


def cmd_evaluate(args: argparse.Namespace) -> int:
    dataset_path = _require_file(args.dataset, "--dataset")
    sessions = session_model.read_sessions(dataset_path)
    if args.limit:
        sessions = sessions[: args.limit]
    agent = _build_agent(args.agent, sessions, args.endpoint, args.model)
    metadata = {
        "dataset": dataset_path.name,
        "dataset_digest": eval_harness.dataset_digest(dataset_path),
        "limit": args.limit or len(sessions),
    }
    steps_out = args.steps_out or str(args.out) + ".steps.jsonl"
    concurrency = args.concurrency
    if concurrency is None:
        concurrency = 4 if args.agent == "endpoint" else (os.cpu_count() or 1)
    report, _ = eval_harness.run_evaluation(
        agent, sessions, concurrency=concurrency, metadata=metadata,
        checkpoint_path=steps_out,
    )
    eval_harness.write_report(report, args.out)
    print(eval_harness.summary_table(report))
    print(f"report: {args.out}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    report_a = eval_harness.read_report(_require_file(args.a, "--a"))
    if not args.b:
        print(eval_harness.summary_table(report_a))
        return 0
    report_b = eval_harness.read_report(_require_file(args.b, "--b"))
    print(eval_harness.summary_table(report_a))
    print()
    print(eval_harness.summary_table(report_b))
    if args.mcnemar:
        comparison = eval_harness.compare_reports(report_a, report_b)
        print()
        print(f"step-level McNemar p:    {comparison['step_mcnemar_p']:.6g}")
        print(f"outcome-level McNemar p: {comparison['outcome_mcnemar_p']:.6g}")
    return 0


def cmd_export_training(args: argparse.Namespace) -> int:
    sessions = session_model.read_sessions(_require_file(args.input, "--in"))
    missing = []
    for session in sessions:
        if any(step.reasoning is None for step in session.steps):
            missing.append(session.session_id)
    if missing:
        raise CliError(
            "these sessions have steps without reasoning (run synthesize-reasoning first): "
            + ", ".join(missing[:10]) + ("..." if len(missing) > 10 else "")
        )
    examples = agents_mod.export_training_examples(sessions)
    masked, trained = agents_mod.write_training_examples(examples, args.out)
    print(f"wrote {len(examples)} training examples to {args.out}")
    print(f"masked characters (context): {masked}")
    print(f"trained characters (reasoning+action): {trained}")
    return 0


def cmd_pipeline(args: argparse.Namespace) -> int:
    config = RunConfig(
        workdir=Path(args.workdir),
        seed=args.seed,
        n_products=args.n_products,
        n_sessions=args.n_sessions,
        agent=args.agent,
        endpoint=args.endpoint,
        model=args.model,
        concurrency=args.concurrency,
        force=args.force,
    )
    config.workdir.mkdir(parents=True, exist_ok=True)

    def stage(name: str, output: Path, run) -> None:
        if output.exists() and not config.force:
            print(f"[{name}] {output.name} exists, skipping (use --force to redo)")
            return
        try:
            run()
        except Exception as exc:
            raise CliError(
                f"stage {name} failed: {exc} "
                f"(fix the inputs and rerun; finished stages are kept)"
            ) from exc
        print(f"[{name}] wrote {output.name}")

    def gen_catalog() -> None:
        shopsim.write_catalog(shopsim.gen_catalog(config.seed, config.n_products),
                              config.catalog_path)

    def gen_sessions() -> None:
        catalog = shopsim.read_catalog(config.catalog_path)
        oracle_config = _oracle_config(args, n_sessions=config.n_sessions, seed=config.seed)
        session_model.write_sessions(user_oracle.generate_dataset(catalog, oracle_config),
                                     config.sessions_path)

    def synthesize() -> None:
        sessions = session_model.read_sessions(config.sessions_path)
        synthesizer = _synthesizer(args)
        session_model.write_sessions(
            synthesizer.synthesize_dataset(sessions, concurrency=config.concurrency),
            config.reasoned_path,
        )

    def evaluate() -> None:
        sessions = session_model.read_sessions(config.reasoned_path)
        agent = _build_agent(config.agent, sessions, config.endpoint, config.model)
        metadata = {
            "dataset": config.reasoned_path.name,
            "dataset_digest": eval_harness.dataset_digest(config.reasoned_path),
            "seed": config.seed,
        }
        report, _ = eval_harness.run_evaluation(agent, sessions, metadata=metadata,
                                                checkpoint_path=config.steps_path)
        eval_harness.write_report(report, config.report_path)

    stage("gen-catalog", config.catalog_path, gen_catalog)
    stage("gen-sessions", config.sessions_path, gen_sessions)
    stage("synthesize-reasoning", config.reasoned_path, synthesize)
    stage("evaluate", config.report_path, evaluate)
    print(eval_harness.summary_table(eval_harness.read_report(config.report_path)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shopbench",
        description="Generate, annotate, and score simulated online-shopping sessions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-catalog", help="generate a seeded product catalog")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=240)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_catalog)

    p = sub.add_parser("gen-sessions", help="generate ground-truth sessions")
    p.add_argument("--catalog", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON file with oracle settings")
    p.add_argument("--mean-searches", type=float, dest="mean_searches")
    p.add_argument("--purchase-rate", type=float, dest="purchase_rate")
    p.add_argument("--typo-prob", type=float, dest="typo_prob")
    p.add_argument("--ratio-min", type=float, dest="ratio_min")
    p.set_defaults(func=cmd_gen_sessions)

    p = sub.add_parser("synthesize-reasoning", help="fill in rationales for every step")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--endpoint", help="chat-completions URL (omit for the offline stub)")
    p.add_argument("--model")
    p.add_argument("--stub", action="store_true", help="force the offline stub synthesizer")
    p.add_argument("--cache-dir", dest="cache_dir")
    p.add_argument("--concurrency", type=int, default=4)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("evaluate", help="teacher-forced evaluation of an agent")
    p.add_argument("--agent", required=True, choices=("replay", "random", "endpoint"))
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--steps-out", dest="steps_out")
    p.add_argument("--endpoint")
    p.add_argument("--model")
    p.add_argument("--limit", type=int, default=0)
    p.add_argument("--concurrency", type=int,
                   help="worker bound (default: CPUs for simulation agents, 4 for endpoints)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="print or compare evaluation reports")
    p.add_argument("--a", required=True)
    p.add_argument("--b")
    p.add_argument("--mcnemar", action="store_true")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("export-training", help="export loss-masked training examples")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_training)

    p = sub.add_parser("pipeline", help="run catalog -> sessions -> reasoning -> evaluation")
    p.add_argument("--workdir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-products", type=int, default=240, dest="n_products")
    p.add_argument("--n-sessions", type=int, default=200, dest="n_sessions")
    p.add_argument("--agent", default="replay", choices=("replay", "random", "endpoint"))
    p.add_argument("--endpoint")
    p.add_argument("--model")
    p.add_argument("--stub", action="store_true", default=True,
                   help="use the offline stub synthesizer (default)")
    p.add_argument("--config", help="JSON file with oracle settings")
    p.add_argument("--cache-dir", dest="cache_dir")
    p.add_argument("--concurrency", type=int, default=4)
    p.add_argument("--force", action="store_true", help="redo stages even if outputs exist")
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except session_model.SessionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
