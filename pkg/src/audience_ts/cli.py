"""Command-line entry point.

Exit codes: 0 ok, 1 usage, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import yaml
from pydantic import ValidationError

from . import output, plots
from .config import ConfigFile, load_config
from .engine import run_test
from .errors import AudienceTestError
from .policy import Policy
from .simlab import SweepMode, overlap_sweep, resolve_environment, run_replications

log = logging.getLogger("audience_ts")

OUT_ENV = "AUDIENCE_TS_OUT"
EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME = 1, 2, 3


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load(args) -> ConfigFile:
    try:
        cfg = load_config(args.config)
        updates = {}
        if args.seed is not None:
            updates["seed"] = args.seed
        if args.reps is not None:
            updates["reps"] = args.reps
        if args.workers is not None:
            updates["workers"] = args.workers
        if updates:
            cfg = ConfigFile.model_validate({**cfg.model_dump(), **updates})
    except (OSError, yaml.YAMLError, ValidationError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.experiment is not None and args.command != "partition":
        expected = "single-run" if args.command == "run" else args.command
        if cfg.experiment != expected:
            raise ConfigError(f"config is for experiment '{cfg.experiment}', not '{args.command}'")
    return cfg


def _setup(cfg: ConfigFile):
    """Partition, test config and environment; any failure is a config error."""
    try:
        part = cfg.partition()
        test = cfg.test_config(part)
        env = cfg.environment_for(part)
    except (ValueError, AudienceTestError) as exc:
        raise ConfigError(str(exc)) from exc
    return part, test, env


def _out_dir(args, cfg: ConfigFile) -> Path:
    out = Path(args.out or cfg.out or os.environ.get(OUT_ENV) or "results")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_partition(args) -> int:
    cfg = _load(args)
    part, _, _ = _setup(cfg)
    K = part.n_tas
    header = ["DA", "members", "mass"] + [f"p(j|TA{k + 1})" for k in range(K)]
    print("\t".join(header))
    for row in output.partition_summary(part):
        members = "+".join(f"TA{k}" for k in row["members"])
        probs = [f"{p:.6f}" for p in row["condProb"]]
        print("\t".join([f"DA{row['da']}", members, f"{row['mass']:g}", *probs]))
    sums = part.cond_prob.sum(axis=0)
    print("\t".join(["sum", "", ""] + [f"{s:.6f}" for s in sums]))
    return 0


def _base_doc(cfg: ConfigFile, part) -> dict:
    return {
        "config": cfg.model_dump(mode="json"),
        "masterSeed": cfg.seed,
        "partition": output.partition_summary(part),
    }


def cmd_run(args) -> int:
    cfg = _load(args)
    part, test, env = _setup(cfg)
    out = _out_dir(args, cfg)
    env = resolve_environment(env, test.seed)
    trace = run_test(test, env)
    output.write_trace_csv(trace, out / "trace.csv")
    doc = _base_doc(cfg, part)
    doc["trueTheta"] = env.true_theta.tolist()
    doc.update(output.trace_summary(trace))
    output.write_json(doc, out / "summary.json")
    print(f"stoppedAt={doc['stoppedAt']} finalBest={doc['finalBest']} -> {out}")
    return 0


def _write_plots(out: Path, blocks, xlabel: str) -> None:
    try:
        pdir = out / "plots"
        pdir.mkdir(exist_ok=True)
        panels = [
            ("sample_size", "Sample size at stop", lambda t: t.sample_size, False),
            ("total_regret", "Total expected regret", lambda t: t.total_regret, False),
            ("correct", "Share of true best found", lambda t: float(t.correct_identification), True),
            ("post_best_prob", "Posterior prob. of true best at stop", lambda t: t.final_report.post_best_prob, False),
        ]
        for name, title, get, bars in panels:
            groups = [(label, [get(t) for t in traces]) for label, _, traces in blocks if traces]
            svg = plots.box_plot_svg(groups, title, xlabel, bars=bars)
            if svg:
                (pdir / f"{name}.svg").write_text(svg)
    except Exception as exc:  # plotting never gates the exit status
        log.warning("plot rendering failed: %s", exc)


def cmd_compare(args) -> int:
    cfg = _load(args)
    part, test, env = _setup(cfg)
    out = _out_dir(args, cfg)
    blocks, summaries = [], {}
    for policy in Policy:
        traces = run_replications(replace(test, policy=policy), env, cfg.reps, cfg.seed, cfg.workers)
        blocks.append((policy.value, None, traces))
        summaries[policy.value] = output.group_summary(traces)
    output.write_sweep_csv(blocks, out / "sweep.csv")
    doc = _base_doc(cfg, part)
    doc["policies"] = summaries
    output.write_json(doc, out / "summary.json")
    _write_plots(out, blocks, "policy")
    for name, s in summaries.items():
        print(f"{name}: correct={s['correct_fraction']:.3f} median sample={s['sample_size']['median']:g}")
    return 0


def _sweep(args, mode: SweepMode) -> int:
    cfg = _load(args)
    _, test, _ = _setup(cfg)
    out = _out_dir(args, cfg)
    result = overlap_sweep(cfg.sweep.grid, mode, test, cfg.reps, cfg.seed, cfg.workers)
    blocks = [(f"q={p.q:g}", p.q, p.traces) for p in result.points]
    output.write_sweep_csv(blocks, out / "sweep.csv")
    doc = {
        "config": cfg.model_dump(mode="json"),
        "masterSeed": cfg.seed,
        "mode": mode.value,
        "points": [
            {
                "q": p.q,
                "top2Gap": p.top2_gap,
                "error": p.error,
                "summary": p.summary.to_dict() if p.summary else None,
            }
            for p in result.points
        ],
    }
    output.write_json(doc, out / "summary.json")
    _write_plots(out, blocks, "overlap")
    for p in result.points:
        if p.error:
            print(f"q={p.q:g}: skipped ({p.error})")
        else:
            print(f"q={p.q:g}: median sample={p.summary.sample_size['median']:g} correct={p.summary.correct_fraction:.3f}")
    return 0


def cmd_sweep_varying(args) -> int:
    return _sweep(args, SweepMode.VARYING)


def cmd_sweep_fixed(args) -> int:
    return _sweep(args, SweepMode.FIXED)


def cmd_validate(args) -> int:
    """Face-validity suite: TS run for the full batch budget without stopping."""
    cfg = _load(args)
    part, test, env = _setup(cfg)
    out = _out_dir(args, cfg)
    test = replace(test, policy=Policy.TS, stopping=False)
    traces = run_replications(test, env, cfg.reps, cfg.seed, cfg.workers)
    profile = output.batch_profile(traces, every=10)
    output.write_profile_csv(profile, out / "validate.csv")
    reached = [t.first_below for t in traces if t.first_below is not None]
    doc = _base_doc(cfg, part)
    doc["reachedThreshold"] = len(reached) / len(traces)
    doc["firstBelowThreshold"] = output.quantiles(reached) if reached else None
    output.write_json(doc, out / "summary.json")
    try:
        pdir = out / "plots"
        pdir.mkdir(exist_ok=True)
        step = max(10, (test.max_batches // 10) // 10 * 10)
        for metric in ("max_pPVR", "regret", "postBestProb"):
            groups = []
            for t in range(step, test.max_batches + 1, step):
                vals = [tr.records[t - 1] for tr in traces]
                get = {"max_pPVR": lambda r: r.max_ppvr, "regret": lambda r: r.regret,
                       "postBestProb": lambda r: r.post_best_prob}[metric]
                groups.append((str(t), [get(r) for r in vals]))
            (pdir / f"{metric}.svg").write_text(plots.box_plot_svg(groups, metric, "batch"))
    except Exception as exc:
        log.warning("plot rendering failed: %s", exc)
    print(f"reached threshold in {doc['reachedThreshold']:.1%} of {len(traces)} replications -> {out}")
    return 0


COMMANDS = {
    "partition": cmd_partition,
    "run": cmd_run,
    "compare": cmd_compare,
    "sweep-varying": cmd_sweep_varying,
    "sweep-fixed": cmd_sweep_fixed,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="audience-ts", description="Adaptive creative x audience tests by Thompson Sampling.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="YAML experiment config")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--reps", type=int, help="override the replication count")
        p.add_argument("--out", help=f"output directory (default: config 'out', ${OUT_ENV}, ./results)")
        p.add_argument("--workers", type=int, help="worker processes for replications")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AudienceTestError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
