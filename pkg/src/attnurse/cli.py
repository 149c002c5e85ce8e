"""Command-line entry point.

Exit codes: 0 success, 1 invalid input (config, flags, files), 2 a numeric
check failed.  Errors are reported as one JSON object on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import atnm, gradcheck, harness, svg
from .analysis import AGGREGATES, run_analysis
from .config import ExperimentConfig, load_config, validate
from .errors import AttnurseError, NonFiniteGradient, ParseError, ValidationError
from .losses import LossKind
from .metrics import CSV_HEADER, record_metrics
from .nursing import NurseConfig


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _emit(payload: dict) -> None:
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")


def _entities(text: str) -> tuple[int, ...]:
    try:
        out = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"--entities expects comma-separated integers, got {text!r}") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="attnurse", description="Attention-overlap metrics, guidance losses and a toy nursing testbed.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def batch_flags(sp):
        sp.add_argument("--config", required=True, help="experiment JSON file")
        sp.add_argument("--out", help="output directory (overrides the config)")
        sp.add_argument("--workers", type=int, default=1, help="worker threads")

    sim = sub.add_parser("simulate", help="run un-nursed trials")
    batch_flags(sim)

    nurse = sub.add_parser("nurse", help="run trials with latent nursing")
    batch_flags(nurse)
    nurse.add_argument("--loss", help='loss kind, or "none" to disable nursing')
    nurse.add_argument("--lr0", type=float)
    nurse.add_argument("--cutoff", type=int)
    nurse.add_argument("--inner-steps", type=int)

    met = sub.add_parser("metrics", help="print the metric row of a saved stack")
    met.add_argument("--stack", required=True)
    met.add_argument("--entities", default="0,1")

    gc = sub.add_parser("gradcheck", help="compare analytic gradients with finite differences")
    gc.add_argument("--kinds", default="all")
    gc.add_argument("--seeds", type=int, default=50)
    gc.add_argument("--no-latent", action="store_true", help="skip the latent-gradient checks")

    an = sub.add_parser("analyze", help="correlate trajectory metrics with success")
    an.add_argument("--out", required=True, help="experiment output directory")
    an.add_argument("--aggregate", choices=AGGREGATES, default="mean")

    rd = sub.add_parser("render", help="draw attention maps as SVG")
    src = rd.add_mutually_exclusive_group(required=True)
    src.add_argument("--stack", help="ATNM file")
    src.add_argument("--trial", help="trial directory; renders final.atnm and every snapshot")
    rd.add_argument("--entities", default="0,1")
    rd.add_argument("--dest", help="output directory (default: next to the input)")
    return p


def _run_batch(cfg: ExperimentConfig, args) -> int:
    out = args.out or cfg.output
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    recs = harness.run_experiment(cfg.toy, cfg.seeds, out, cfg.nurse, args.workers)
    rate = sum(r.success for r in recs) / len(recs)
    print(json.dumps({"trials": len(recs), "success_rate": rate, "output": str(out)}))
    return 0


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    return _run_batch(replace(cfg, nurse=None), args)


def cmd_nurse(args) -> int:
    cfg = load_config(args.config)
    if args.loss == "none":
        return _run_batch(replace(cfg, nurse=None), args)
    if cfg.nurse is None and not args.loss:
        raise ValidationError([("nurse", "config disables nursing; pass --loss")])
    nc = cfg.nurse if cfg.nurse is not None else NurseConfig()
    kw = {}
    if args.loss:
        try:
            kw["loss"] = LossKind.parse(args.loss)
        except ValueError as exc:
            raise ParseError(str(exc), "--loss") from None
    for flag, key in (("lr0", "lr0"), ("cutoff", "cutoff"), ("inner_steps", "inner_steps")):
        if getattr(args, flag) is not None:
            kw[key] = getattr(args, flag)
    cfg = replace(cfg, nurse=replace(nc, **kw))
    violations = validate(cfg)
    if violations:
        raise ValidationError(violations)
    return _run_batch(cfg, args)


def cmd_metrics(args) -> int:
    stack = atnm.load(args.stack)
    rec = record_metrics(stack, _entities(args.entities), step=0)
    print(",".join(CSV_HEADER))
    print(rec.csv_row())
    return 0


def cmd_gradcheck(args) -> int:
    if args.seeds < 1:
        raise UsageError("--seeds must be >= 1")
    try:
        kinds = gradcheck.parse_kinds(args.kinds)
    except ValueError as exc:
        raise ParseError(str(exc), "--kinds") from None
    results = gradcheck.run_suite(kinds, range(args.seeds), latent=not args.no_latent)
    failed = [r for r in results if not r.ok]
    worst = max(results, key=lambda r: r.max_rel)
    print(json.dumps({"checks": len(results), "failed": len(failed), "worst_rel": worst.max_rel, "worst_kind": worst.kind}))
    if failed:
        _emit({"error": "gradient check failed", "failures": [r.to_json() for r in failed[:20]]})
        return 2
    return 0


def cmd_analyze(args) -> int:
    recs = harness.read_experiment(args.out)
    if not recs:
        raise UsageError(f"no trial directories under {args.out}")
    corr = run_analysis(recs, Path(args.out) / "analysis", args.aggregate)
    print(json.dumps({"trials": len(recs), "r_success": dict(zip(("Int", "Var", "IoU", "D_CoM", "D_KL", "CC"), corr[:-1, -1].tolist()))}))
    return 0


def cmd_render(args) -> int:
    ents = _entities(args.entities)
    jobs = []
    if args.stack:
        path = Path(args.stack)
        jobs.append((atnm.load(path), path.stem, path.parent))
    else:
        trial = Path(args.trial)
        rec = harness.read_trial(trial)
        for step, stack in sorted(rec.snapshots.items()):
            jobs.append((stack, f"t{step}", trial))
        jobs.append((rec.final, "final", trial))
    written = []
    for stack, tag, parent in jobs:
        if max(ents) >= stack.shape[2] or min(ents) < 0:
            raise UsageError(f"entity index out of range for {stack.shape[2]} tokens")
        dest = Path(args.dest) if args.dest else parent
        dest.mkdir(parents=True, exist_ok=True)
        target = dest / f"maps_{tag}.svg"
        target.write_text(svg.attention_maps(stack, ents, title=tag))
        written.append(str(target))
    print(json.dumps({"written": written}))
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "nurse": cmd_nurse,
    "metrics": cmd_metrics,
    "gradcheck": cmd_gradcheck,
    "analyze": cmd_analyze,
    "render": cmd_render,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        _emit({"error": "usage", "message": str(exc)})
        return 1
    except ParseError as exc:
        _emit({"error": "parse", "field": exc.path, "message": str(exc)})
        return 1
    except ValidationError as exc:
        _emit({"error": "validation", "violations": [{"field": f, "message": m} for f, m in exc.violations]})
        return 1
    except (NonFiniteGradient, FloatingPointError) as exc:
        _emit({"error": "numeric", "message": str(exc)})
        return 2
    except (AttnurseError, ValueError, OSError) as exc:
        _emit({"error": type(exc).__name__, "message": str(exc)})
        return 1


if __name__ == "__main__":
    sys.exit(main())
