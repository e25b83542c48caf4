"""Command-line entry point: ``followback <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import pipeline
from .graph import CorpusError, load_corpus, parse_time
from .pipeline import ConfigError, DataError, StageError

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_STAGE = 0, 2, 3, 4

# subcommand -> stage it runs
STAGE_COMMANDS = ("ingest", "communities", "characterize", "coordination", "abuse", "features", "embed",
                  "train", "evaluate")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(f"{self.prog}: {message}")


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("corpus and run")
    g.add_argument("--config", help="INI config file")
    g.add_argument("--corpus", help="directory holding accounts.jsonl, edges.csv, tweets.jsonl, labels.jsonl")
    g.add_argument("--accounts")
    g.add_argument("--edges")
    g.add_argument("--tweets")
    g.add_argument("--labels")
    g.add_argument("--out", dest="output", help="output directory")
    g.add_argument("--pivot")
    g.add_argument("-v", "--verbose", action="store_true")


def _stage_options(p: argparse.ArgumentParser, command: str) -> None:
    if command in ("communities", "run"):
        p.add_argument("--min-size", dest="min_size", type=int)
        p.add_argument("--community-seed", dest="community_seed", type=int)
    if command == "communities":
        p.add_argument("--seed", dest="community_seed", type=int)
    if command in ("characterize", "run"):
        p.add_argument("--exclude-communities", dest="exclude_communities",
                       help="comma separated labels or ids")
        p.add_argument("--fb-only", dest="fb_only", action="store_const", const=True)
    if command in ("coordination", "run"):
        p.add_argument("--floor", dest="coordination_floor", type=float)
        p.add_argument("--step", dest="coordination_step", type=float)
        p.add_argument("--engagement-kinds", dest="engagement_kinds")
        p.add_argument("--denominator", dest="coordination_denominator", choices=("community", "network"))
    if command in ("abuse", "run"):
        p.add_argument("--min-handles", dest="min_handles", type=int)
    if command in ("features", "train", "evaluate", "run"):
        p.add_argument("--families")
    if command in ("features", "run"):
        p.add_argument("--embed-dim", dest="embed_dim", type=int)
    if command in ("embed", "run"):
        p.add_argument("--dim", dest="node2vec_dim", type=int)
        p.add_argument("--walk-length", dest="node2vec_walk_length", type=int)
        p.add_argument("--walks", dest="node2vec_walks", type=int)
        p.add_argument("--window", dest="node2vec_window", type=int)
        p.add_argument("--p", dest="node2vec_p", type=float)
        p.add_argument("--q", dest="node2vec_q", type=float)
        p.add_argument("--epochs-n2v", dest="node2vec_epochs", type=int)
    if command == "embed":
        p.add_argument("--seed", dest="node2vec_seed", type=int)
    if command in ("train", "evaluate", "run"):
        p.add_argument("--model", choices=("forest", "gcn"))
        p.add_argument("--split", choices=("random", "stratified", "both"))
        p.add_argument("--threshold", type=float)
    if command in ("train", "run"):
        p.add_argument("--trees", type=int)
        p.add_argument("--hidden", type=int)
        p.add_argument("--epochs", type=int)
        p.add_argument("--lr", type=float)
        p.add_argument("--split-seed", dest="split_seed", type=int)
        p.add_argument("--test-positives", dest="test_positives", type=int)
        p.add_argument("--test-negatives", dest="test_negatives", type=int)
        p.add_argument("--per-community", dest="per_community", type=int)
    if command == "train":
        p.add_argument("--seed", dest="model_seed", type=int)
    if command == "run":
        p.add_argument("--model-seed", dest="model_seed", type=int)
        p.add_argument("--stages", help="comma separated subset of " + ",".join(pipeline.STAGES))
    if command == "evaluate":
        p.add_argument("--report", help="also copy evaluation.json here")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="followback", description="Follow-back account analysis toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in (*STAGE_COMMANDS, "run"):
        p = sub.add_parser(name, help=f"run the {name} stage" if name != "run" else "run the pipeline")
        _common(p)
        _stage_options(p, name)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--spec", help="JSON community specs (default: the built-in twelve communities)")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--background", type=int, help="background sample size")
    p.add_argument("--scale", type=float, default=1.0, help="size multiplier for the built-in specs")
    p.add_argument("--pivot")
    p.add_argument("--out", required=True)
    p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("honeypot-sim", help="simulate a honeypot sampling strategy")
    p.add_argument("--strategy", required=True, help="random, snowball, ratio_filter or dnfb_pass")
    p.add_argument("--budget", type=int, help="number of follows (ignored by dnfb_pass)")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--world", help="synthetic corpus directory with planted.json "
                                   "(default: a calibrated world generated from --seed)")
    p.add_argument("--prior-budget", type=int, default=4246,
                   help="random-stage follows run first when the strategy needs discovered positives")
    p.add_argument("--out", help="write labels.jsonl, follow_log.jsonl and honeypot.json here")
    p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("report", help="render summary.json")
    p.add_argument("summary", help="path to summary.json")
    p.add_argument("--format", default="markdown")
    p.add_argument("--table", help="only this table (communities, characterization, classification)")
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


_NOT_CONFIG = {"command", "config", "corpus", "verbose", "report"}


def _config(args) -> pipeline.PipelineConfig:
    overrides = {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG and v is not None}
    if args.corpus:
        d = Path(args.corpus)
        for key, name in (("accounts", "accounts.jsonl"), ("edges", "edges.csv"),
                          ("tweets", "tweets.jsonl"), ("labels", "labels.jsonl")):
            if key not in overrides and (key in ("accounts", "edges") or (d / name).exists()):
                overrides[key] = str(d / name)
    return pipeline.load_config(args.config, overrides)


def _synth(args) -> int:
    from .synth import DEFAULT_PIVOT, default_specs, generate, load_specs

    params = None
    background = None
    if args.spec:
        if not Path(args.spec).exists():
            raise DataError(f"{args.spec}: no such spec file")
        try:
            specs, params, background = load_specs(args.spec)
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"{args.spec}: {exc}") from None
    else:
        specs = default_specs(scale=args.scale)
    if args.background is not None:
        background = args.background
    pivot = parse_time(args.pivot) if args.pivot else DEFAULT_PIVOT
    world = generate(specs, 250 if background is None else background, pivot, args.seed, params)
    paths = world.write(args.out)
    print(json.dumps({k: str(v) for k, v in sorted(paths.items())}, indent=1))
    return EXIT_OK


def _load_world(directory):
    from .synth import Planted, SyntheticCorpus

    d = Path(directory)
    planted = d / "planted.json"
    if not planted.exists():
        raise DataError(f"{planted}: no such file")
    tweets = d / "tweets.jsonl"
    corpus = load_corpus(d / "accounts.jsonl", d / "edges.csv", tweets if tweets.exists() else None,
                         d / "labels.jsonl" if (d / "labels.jsonl").exists() else None)
    return SyntheticCorpus(corpus, Planted.load(planted))


def _honeypot(args) -> int:
    from .synth import STRATEGIES, HoneypotSimulator, honeypot_world

    if args.strategy not in STRATEGIES:
        raise ConfigError(f"unknown strategy {args.strategy!r}; choose from {', '.join(STRATEGIES)}")
    if args.strategy != "dnfb_pass" and (args.budget is None or args.budget < 1):
        raise ConfigError("--budget must be at least 1")
    world = _load_world(args.world) if args.world else honeypot_world(args.seed)
    sim = HoneypotSimulator(world.corpus, world.planted, seed=args.seed)
    if args.strategy in ("snowball", "dnfb_pass"):
        sim.run("random", args.prior_budget)
    result = sim.run(args.strategy, args.budget)
    q = sim.response_quantiles()
    out = {"stages": [s.to_json() for s in sim.stages], "rate": result.rate,
           "within_5min": q[300], "within_1h": q[3600], "max_follows_per_day": sim.max_follows_in_window()}
    if args.out:
        sim.write(args.out)
    print(json.dumps(out, indent=1, sort_keys=True))
    return EXIT_OK


def _stage(args) -> int:
    cfg = _config(args)
    if args.command == "run":
        stages = cfg.stages
    else:
        stages = (args.command,)
    pipe = pipeline.Pipeline(cfg)
    done = pipe.run(stages)
    if args.command == "evaluate" and args.report:
        Path(args.report).write_text(pipe.path("evaluation.json").read_text(encoding="utf-8"), encoding="utf-8")
    for name in done:
        print(f"{name}: ok")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            return _synth(args)
        if args.command == "honeypot-sim":
            return _honeypot(args)
        if args.command == "report":
            print(pipeline.render_report(args.summary, args.format, args.table), end="")
            return EXIT_OK
        return _stage(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, CorpusError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
