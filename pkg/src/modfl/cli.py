"""Command-line entry point: generate, train, evaluate, verify.

Every subcommand accepts ``--config FILE`` with ``key = value`` lines (keys
are option names with or without leading dashes). Flags given on the command
line win over the file. Exit codes: 0 success, 1 usage error, 2 runtime
failure, 3 verification failure.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
import warnings
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .core import read_dataset, write_dataset
from .losses import COMPONENTS
from .metrics import evaluate_predictor, write_metrics_csv
from .predictor import NetworkPredictor, OraclePredictor, load_params, save_params
from .seeding import sub_seed

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_VERIFY = 0, 1, 2, 3
SEED_STREAMS = ("data", "init", "training", "ot", "teacher", "third_objective")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Raises instead of exiting so ``main`` controls the exit code."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def _seed_manifest(seed: int) -> dict:
    return {"root": seed, **{s: sub_seed(seed, s) for s in SEED_STREAMS}}


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------

def read_config_file(path, parser: argparse.ArgumentParser) -> dict:
    """Typed defaults for ``parser`` from a ``key = value`` file."""
    actions = {a.dest: a for a in parser._actions if a.dest not in ("help", "config")}
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        dest = key.lstrip("-").replace("-", "_")
        action = actions.get(dest)
        if action is None:
            raise UsageError(f"{path}:{lineno}: unknown option {key!r}")
        try:
            if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
                out[dest] = _bool(value)
                continue
            items = value.replace(",", " ").split() if action.nargs in ("+", "*") or isinstance(
                action, argparse._AppendAction) else [value]
            conv = action.type or str
            items = [conv(v) for v in items]
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
        if action.choices is not None and any(v not in action.choices for v in items):
            raise UsageError(f"{path}:{lineno}: {key} must be one of {list(action.choices)}")
        out[dest] = items if len(items) != 1 or action.nargs in ("+", "*") or isinstance(
            action, argparse._AppendAction) else items[0]
    return out


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------

def _benchmark_dataset(args):
    from .benchmarks import AdAllocConfig, BipartiteConfig, gen_ad_alloc, gen_bipartite, load_cora

    try:
        if args.benchmark == "bipartite":
            cfg = BipartiteConfig(nodes=args.nodes, rho=args.rho, instances=args.instances,
                                  perturb_mode=args.perturb_mode, third_objective=args.third_objective,
                                  seed=args.seed, denom=args.denom)
            return cfg, lambda: gen_bipartite(cfg)
        if args.benchmark == "ad_alloc":
            delta = tuple(args.delta) if args.delta else AdAllocConfig.delta
            cfg = AdAllocConfig(nd=args.nd, nc=args.nc, delta=delta, thr=args.thr, seed=args.seed, denom=args.denom)
            cfg.validate()
            return cfg, lambda: gen_ad_alloc(cfg, count=args.instances)
        if not (args.content and args.cites):
            raise UsageError("cora needs --content and --cites")
        cfg = BipartiteConfig(nodes=args.nodes, rho=args.rho, instances=args.instances,
                              perturb_mode=args.perturb_mode, third_objective=args.third_objective,
                              seed=args.seed, denom=args.denom)
        return cfg, lambda: load_cora(args.content, args.cites, args.instances, args.nodes // 2, cfg)
    except ValueError as exc:
        raise UsageError(f"invalid {args.benchmark} configuration: {exc}") from None


def cmd_generate(args) -> int:
    if args.instances < 1:
        raise UsageError("instances: must be at least 1")
    cfg, build = _benchmark_dataset(args)
    dataset = build()
    extra = {
        "benchmark": args.benchmark,
        "generator_config": {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(cfg).items()},
        "seeds": _seed_manifest(args.seed),
        "version": __version__,
    }
    write_dataset(dataset, args.out, extra)
    print(f"wrote {len(dataset)} instances to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def _train_config(args):
    from .trainer import TrainConfig

    try:
        return TrainConfig(lr=args.lr, batch_size=args.batch_size, max_epochs=args.max_epochs,
                           patience=args.patience, gamma=args.gamma, lambdas=tuple(args.lambdas),
                           p_solve=args.p_solve, seed=args.seed, ablate=tuple(args.ablate or ()),
                           trunk_sizes=tuple(args.trunk_sizes), head_sizes=tuple(args.head_sizes),
                           denom=args.denom)
    except ValueError as exc:
        raise UsageError(f"invalid training configuration: {exc}") from None


def cmd_train(args) -> int:
    from .trainer import train_modfl, train_twostage

    cfg = _train_config(args)
    if args.method == "twostage" and cfg.ablate:
        raise UsageError("ablate: only applies to --method modfl")
    dataset = read_dataset(args.dataset)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = (train_modfl if args.method == "modfl" else train_twostage)(dataset, cfg)
    save_params(result.params, out / "checkpoint.json")
    result.write_log(out / "train_log.jsonl")
    run = {
        "method": args.method,
        "setting": result.log[0]["setting"] if result.log else "",
        "dataset": str(args.dataset),
        "train_config": {k: list(v) if isinstance(v, tuple) else v for k, v in cfg.to_dict().items()},
        "seeds": _seed_manifest(cfg.seed),
        "version": __version__,
        "best_epoch": result.best_epoch,
        "solver_calls": result.solver_calls,
        "dslp_calls": result.dslp_calls,
        "failures": result.failures,
    }
    (out / "run_config.json").write_text(json.dumps(run, indent=2, sort_keys=True))
    print(f"{args.method} ({run['setting']}): best epoch {result.best_epoch}, "
          f"{result.solver_calls} solver calls, {result.dslp_calls} dslp calls -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

def _checkpoint_entry(path: str):
    p = Path(path)
    run_dir = p if p.is_dir() else p.parent
    ckpt = p / "checkpoint.json" if p.is_dir() else p
    name = run_dir.name
    run_cfg = run_dir / "run_config.json"
    if run_cfg.exists():
        doc = json.loads(run_cfg.read_text())
        setting = doc.get("setting", "")
        name = doc.get("method", name) + (f" ({setting})" if setting not in ("", "full", "accuracy") else "")
    return name, load_params(ckpt)


def cmd_evaluate(args) -> int:
    dataset = read_dataset(args.dataset)
    instances = dataset.instances if args.split == "all" else dataset.subset(args.split)
    if not instances:
        raise UsageError(f"dataset: split {args.split!r} has no instances")
    models = []
    if args.oracle:
        models.append(("oracle", OraclePredictor()))
    for path in args.checkpoint or []:
        name, params = _checkpoint_entry(path)
        inst = instances[0]
        if params.in_dim != inst.features.shape[1] or params.t_objectives != inst.t_objectives:
            raise ValueError(f"checkpoint {path} expects {params.in_dim} features and {params.t_objectives} "
                             f"objectives; dataset has {inst.features.shape[1]} and {inst.t_objectives}")
        models.append((name, NetworkPredictor(params)))
    if not models:
        raise UsageError("give at least one --checkpoint or --oracle")
    rows, per_instance = [], {}
    for name, model in models:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            row, records = evaluate_predictor(name, instances, model, args.denom)
        rows.append(row)
        per_instance[name] = {"flags": row.flags, "instances": records}
        print(f"{name}: GD {row.gd:.4g}  MPFE {row.mpfe:.4g}  HAR {row.har:.4g}  r {row.r:.4g}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(rows, out / "metrics.csv")
    (out / "per_instance.json").write_text(json.dumps(per_instance, indent=1, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def cmd_verify(args) -> int:
    from .verify import SUITES, run_all

    skip = set(args.skip or ())
    unknown = skip - set(SUITES)
    if unknown:
        raise UsageError(f"skip: unknown suite(s) {sorted(unknown)}")
    if args.quick:
        skip |= {"e2e_directional"}
    start = time.perf_counter()
    results = run_all(skip=skip, corrupt_dslp_sign=args.corrupt_dslp_sign)
    for res in results:
        print(res.line())
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} suites passed in {time.perf_counter() - start:.1f}s")
    return EXIT_VERIFY if failed else EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="modfl", description="Multi-objective decision-focused learning experiments.")
    parser.add_argument("--version", action="version", version=f"modfl {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    g = sub.add_parser("generate", help="write a benchmark dataset")
    g.add_argument("--config")
    g.add_argument("--benchmark", choices=("bipartite", "ad_alloc", "cora"), default="bipartite")
    g.add_argument("--instances", type=int, default=27)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--denom", type=_positive, default=5, help="weight grid resolution for the true fronts")
    g.add_argument("--out", required=True)
    g.add_argument("--nodes", type=int, default=100, help="bipartite/cora: nodes per instance")
    g.add_argument("--rho", type=float, default=0.05)
    g.add_argument("--perturb-mode", choices=("intent", "literal"), default="intent")
    g.add_argument("--third-objective", action="store_true")
    g.add_argument("--nd", type=int, default=100, help="ad_alloc: queries")
    g.add_argument("--nc", type=int, default=53, help="ad_alloc: candidate ads")
    g.add_argument("--delta", type=float, nargs="+", help="ad_alloc: exposure target per category")
    g.add_argument("--thr", type=float, default=0.05)
    g.add_argument("--content", help="cora: content file")
    g.add_argument("--cites", help="cora: citation file")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train a predictor on a dataset")
    t.add_argument("--config")
    t.add_argument("--dataset", required=True)
    t.add_argument("--method", choices=("modfl", "twostage"), default="modfl")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--ablate", choices=COMPONENTS, action="append", help="switch off a loss component")
    t.add_argument("--lr", type=float, default=0.1)
    t.add_argument("--batch-size", type=_positive, default=8)
    t.add_argument("--max-epochs", type=_positive, default=50)
    t.add_argument("--patience", type=int, default=5)
    t.add_argument("--gamma", type=float, default=0.35)
    t.add_argument("--lambdas", type=float, nargs=3, default=[1.0, 2.0, 5.0],
                   metavar=("LANDSCAPE", "DECISION", "PARETO_SET"))
    t.add_argument("--p-solve", type=float, default=1.0)
    t.add_argument("--trunk-sizes", type=_positive, nargs="+", default=[64, 64])
    t.add_argument("--head-sizes", type=_positive, nargs="+", default=[64])
    t.add_argument("--denom", type=_positive, default=5)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="score checkpoints on a dataset")
    e.add_argument("--config")
    e.add_argument("--dataset", required=True)
    e.add_argument("--checkpoint", action="append", help="checkpoint file or run directory (repeatable)")
    e.add_argument("--oracle", action="store_true", help="add a row for a model that predicts the true costs")
    e.add_argument("--split", choices=("train", "val", "test", "all"), default="test")
    e.add_argument("--denom", type=_positive, default=5)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_evaluate)

    v = sub.add_parser("verify", help="run the verification suites")
    v.add_argument("--config")
    v.add_argument("--skip", nargs="+", help="suite names to leave out")
    v.add_argument("--quick", action="store_true", help="leave out the end-to-end training suite")
    v.add_argument("--corrupt-dslp-sign", action="store_true", help="negative control for the gradient suite")
    v.set_defaults(func=cmd_verify)
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if not a.startswith("-")), None)
    subparsers = parser._subparsers._group_actions[0].choices
    if known.config and command in subparsers:
        subparser = subparsers[command]
        defaults = read_config_file(known.config, subparser)
        for action in subparser._actions:
            if action.dest in defaults:
                action.required = False
        subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # runtime failures map to a single exit code
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
