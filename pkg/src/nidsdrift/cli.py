"""Command line: synth, run, gradcheck, report.

Exit codes: 0 ok, 2 config/usage error, 3 I/O error, 4 scenario failure,
5 gradient check failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .attacks import write_adversarial_csv
from .config import ConfigError, load_config
from .dataio import SynthConfig, generate_synthetic_days, write_day_csv
from .gradcheck import GRADCHECK_TOLERANCE, max_relative_error
from .scenario import ScenarioConfig, ScenarioError, ScenarioReport, execute_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_SCENARIO = 4
EXIT_GRADCHECK = 5

log = logging.getLogger("nidsdrift")


class UsageError(ValueError):
    pass


def _parse_days(text: str) -> tuple[int, int]:
    try:
        if "-" in text:
            first, last = (int(part) for part in text.split("-", 1))
        else:
            first = last = int(text)
    except ValueError:
        raise UsageError(f"--days expects N or A-B, got {text!r}") from None
    if first < 0 or last < first:
        raise UsageError(f"--days range {text!r} is empty or negative")
    return first, last


def _resolve_config(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    replace = dataclasses.replace
    try:
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
            if isinstance(cfg.data, SynthConfig):
                cfg = replace(cfg, data=replace(cfg.data, seed=args.seed))
        if getattr(args, "attacks", None):
            cfg = replace(cfg, attacks_enabled=tuple(a.strip() for a in args.attacks.split(",") if a.strip()))
        if args.days:
            first, last = _parse_days(args.days)
            if args.command == "run":
                if last not in (first, first + 1):
                    raise UsageError("run compares exactly two consecutive days; use --days N or N-(N+1)")
                cfg = replace(cfg, start_day=first)
                if isinstance(cfg.data, SynthConfig) and cfg.data.days < first + 2:
                    cfg = replace(cfg, data=replace(cfg.data, days=first + 2))
            elif isinstance(cfg.data, SynthConfig):
                cfg = replace(cfg, data=replace(cfg.data, days=last + 1))
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    return cfg


def _prepare_out(out: str) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    probe = path / ".write-probe"
    probe.write_text("")
    probe.unlink()
    return path


def cmd_synth(args) -> int:
    cfg = _resolve_config(args)
    if not isinstance(cfg.data, SynthConfig):
        raise UsageError("synth needs a synthetic [data] section")
    first, last = _parse_days(args.days) if args.days else (0, cfg.data.days - 1)
    out = _prepare_out(args.out)
    for ds in generate_synthetic_days(cfg.data):
        if first <= ds.day_index <= last:
            write_day_csv(ds, out / f"day_{ds.day_index}.csv")
    print(f"wrote days {first}..{last} to {out}")
    return EXIT_OK


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def cmd_run(args) -> int:
    cfg = _resolve_config(args)
    out = _prepare_out(args.out)
    started = datetime.now(timezone.utc).isoformat()
    run = execute_scenario(cfg)
    report = run.report

    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    (out / "report.txt").write_text(report.render_text(), encoding="utf-8")
    (out / "model_day_n.json").write_text(run.model_day_n.to_json(), encoding="utf-8")
    (out / "model_day_n_plus_1.json").write_text(run.model_day_n_plus_1.to_json(), encoding="utf-8")
    (out / "pipeline.json").write_text(run.pipeline.to_json(), encoding="utf-8")
    adv_dir = out / "adversarial"
    adv_dir.mkdir(exist_ok=True)
    y_by_condition = run.labels
    for (name, condition), X_adv in run.adversarial.items():
        write_adversarial_csv(adv_dir / f"{name}_{condition}.csv", X_adv, y_by_condition[condition],
                              name, run.oracle.snapshot_day, run.pipeline.selected)
    _write_json(out / "manifest.json", {
        "config_path": str(args.config) if args.config else None,
        "resolved_config": report.config_echo,
        "tool_version": __version__,
        "started_at": started,
        "finished_at": datetime.now(timezone.utc).isoformat(),
        "output_dir": str(out),
    })
    print(report.render_text(), end="")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    err = max_relative_error(args.seed if args.seed is not None else 0, args.trials)
    ok = err <= GRADCHECK_TOLERANCE
    print(f"max relative error over {args.trials} trials: {err:.3e} "
          f"({'ok' if ok else 'FAIL'}, tolerance {GRADCHECK_TOLERANCE:g})")
    return EXIT_OK if ok else EXIT_GRADCHECK


def cmd_report(args) -> int:
    out = Path(args.out)
    src = Path(args.input) if args.input else out / "report.json"
    try:
        report = ScenarioReport.from_dict(json.loads(src.read_text(encoding="utf-8")))
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{src}: not a scenario report: {exc}") from None
    text = report.render_text()
    _prepare_out(args.out)
    (out / "report.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nidsdrift", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", help="INI config, or a resolved JSON config / manifest")
        p.add_argument("--out", required=out_required, help="output directory")
        p.add_argument("--seed", type=int, help="override the master seed (and synthetic data seed)")
        p.add_argument("--days", help="day N or range A-B")

    p = sub.add_parser("synth", help="write a synthetic day_<i>.csv stream")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="run the fresh-vs-stale gradient scenario")
    common(p)
    p.add_argument("--attacks", help="comma-separated subset of fgsm,pgd,lowprofool")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("gradcheck", help="finite-difference check of backpropagation")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=100)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("report", help="re-render report.txt from report.json")
    p.add_argument("--out", required=True, help="run output directory")
    p.add_argument("--input", help="report.json to read (default: OUT/report.json)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ScenarioError as exc:
        print(f"scenario failed at stage {exc.stage}: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
