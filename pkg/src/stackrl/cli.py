"""Command-line entry point.

Exit statuses:
    0  success
    1  runtime failure (including a run aborted by an invariant check)
    2  usage error or unknown verb
    3  unreadable or malformed config / input file
    4  invariant failure under ``validate``

Failures print one line ``error: <ErrorClass>: <message>`` to stderr.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import os
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from .env import ModelError
from .harness import (
    ConfigError,
    ExperimentConfig,
    greedy_failure_fixture,
    read_csv,
    run_experiment,
    run_sweep,
    summarize,
    sweep_to_csv,
    write_csv,
)

OUTPUT_ENV = "STACKRL_OUTPUT_DIR"

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_INPUT, EXIT_INVARIANT = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="stackrl", description="Leader-follower linear MDP learners and regret experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    for verb in ("run", "sweep"):
        sp = sub.add_parser(verb)
        sp.add_argument("--config", required=True, help="experiment config file")
        sp.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override a config value")
        sp.add_argument("--seed", type=int, help="shortcut for --set experiment.seed=N")
        sp.add_argument("--out", help=f"output directory (default: [output] dir, ${OUTPUT_ENV}, ./runs)")
        if verb == "sweep":
            sp.add_argument("--workers", type=int, default=1)

    sub.add_parser("validate")

    sp = sub.add_parser("fixture")
    sp.add_argument("--M", type=float, default=10.0)
    sp.add_argument("--eps", type=float, default=0.01)
    sp.add_argument("--alpha-f", type=float, default=1.0)
    sp.add_argument("--horizon", type=int, default=1)

    sp = sub.add_parser("report")
    sp.add_argument("csv", help="results CSV written by run")
    return p


def _run_dir(args, spec) -> Path:
    base = args.out or spec.output_dir or os.environ.get(OUTPUT_ENV) or "runs"
    stamp = _dt.datetime.now().strftime("%Y%m%dT%H%M%S-%f")
    d = Path(base) / f"{args.verb}-{stamp}"
    d.mkdir(parents=True, exist_ok=False)
    return d


def _build_info() -> dict:
    return {
        "package": "stackrl",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "platform": platform.platform(),
    }


def _load_spec(args):
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"experiment.seed={args.seed}")
    spec = cfgmod.load(args.config, overrides)
    return spec, spec.experiment()


def _write_common(run_dir: Path, cfg: ExperimentConfig, spec, sweep=None) -> None:
    (run_dir / "effective_config.cfg").write_text(
        cfgmod.dumps(cfg, spec.output_dir, sweep), encoding="utf-8", newline="\n"
    )
    (run_dir / "build_info.json").write_text(json.dumps(_build_info(), indent=2) + "\n", encoding="utf-8")


def cmd_run(args) -> int:
    spec, cfg = _load_spec(args)
    run_dir = _run_dir(args, spec)
    _write_common(run_dir, cfg, spec)
    ckpt = run_dir / "checkpoint.jsonl" if cfg.checkpoint else None
    records = run_experiment(cfg, checkpoint_path=ckpt)
    csv_path = run_dir / "results.csv"
    write_csv(records, csv_path)
    info = {
        "regret_cadence": cfg.cadence,
        "carried_forward_increments": cfg.cadence > 1,
        **summarize(read_csv(csv_path)),
    }
    (run_dir / "run_info.json").write_text(json.dumps(info, indent=2) + "\n", encoding="utf-8")
    print(csv_path)
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec, cfg = _load_spec(args)
    if not spec.sweep:
        raise ConfigError("sweep requires a [sweep] section")
    run_dir = _run_dir(args, spec)
    _write_common(run_dir, cfg, spec, spec.sweep)
    cells = run_sweep(cfg, spec.sweep, workers=args.workers)
    (run_dir / "sweep.csv").write_text(sweep_to_csv(cells), encoding="utf-8", newline="\n")
    failed = [c for c in cells if c.error]
    if failed:
        lines = [f"{c.index}\t{json.dumps(c.coords)}\t{c.error}" for c in failed]
        (run_dir / "errors.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(run_dir / "sweep.csv")
    print(f"{len(cells) - len(failed)}/{len(cells)} cells completed")
    return EXIT_OK


def cmd_validate(args) -> int:
    from .validation import run_all

    return EXIT_OK if run_all() else EXIT_INVARIANT


def cmd_fixture(args) -> int:
    rep = greedy_failure_fixture(args.M, args.eps, args.alpha_f, args.horizon)
    print(f"M = {rep.M:g}, eps = {rep.eps:g}, alpha_f = {rep.alpha_f:g}, H = {rep.horizon}")
    print(f"sup-norm distance between Q tables   {rep.q_dist:.12g}")
    print(f"greedy follower: marginal-q shift     {rep.greedy_discrepancy:.12g}  (full tables {rep.greedy_full:.12g})")
    print(f"soft-max follower: marginal-q shift   {rep.softmax_discrepancy:.12g}  (full tables {rep.softmax_full:.12g})")
    print(f"bound eps'(1 + 2 alpha_f H)           {rep.lemma_bound:.12g}  {'holds' if rep.within_lemma_bound else 'VIOLATED'}")
    print(f"bound eps'(1 + 2 alpha_f max|Q_l|)    {rep.scaled_bound:.12g}  {'holds' if rep.within_scaled_bound else 'VIOLATED'}")
    return EXIT_OK


def cmd_report(args) -> int:
    path = Path(args.csv)
    try:
        cols = read_csv(path)
    except OSError as exc:
        raise FileNotFoundError(f"cannot read {path}: {exc.strerror}") from exc
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"malformed results file {path}: {exc}") from exc
    s = summarize(cols)
    print(f"episodes            {s['episodes']}")
    print(f"leader cumulative   {s['leader_cum']:.12g}")
    print(f"follower cumulative {s['follower_cum']:.12g}")
    print(f"leader ratio        {s['leader_ratio']:.6g}")
    print(f"follower ratio      {s['follower_ratio']:.6g}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "validate": cmd_validate, "fixture": cmd_fixture, "report": cmd_report}


def _fail(status: int, exc: BaseException) -> int:
    msg = " ".join(str(exc).split())
    print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
    return status


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail(EXIT_USAGE, exc)
    try:
        return COMMANDS[args.verb](args)
    except (OSError, ConfigError, ModelError) as exc:
        return _fail(EXIT_INPUT, exc)
    except Exception as exc:
        return _fail(EXIT_RUNTIME, exc)


if __name__ == "__main__":
    sys.exit(main())
