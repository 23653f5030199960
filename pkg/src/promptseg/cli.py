"""Command line entry points: ``run``, ``eval`` and ``ablate``.

Exit codes: 0 success, 1 partial failure (some images or files failed),
2 configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from promptseg.prompts import load_prompt_file
from promptseg.runner import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_PARTIAL,
    ConfigError,
    EvaluationError,
    ablate,
    ablation_table,
    evaluate,
    load_config,
    run,
)
from promptseg.metrics import format_table


def _load(args):
    cfg = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.debug_patches:
        changes["debug_patches"] = True
    return dataclasses.replace(cfg, **changes) if changes else cfg


def cmd_run(args) -> int:
    cfg = _load(args)
    result = run(cfg, args.images, args.out)
    ok = len(result.records) - result.failures
    print(f"{ok}/{len(result.records)} images segmented; masks and manifest in {args.out}")
    for rec in result.records:
        if rec["status"] != "ok":
            print(f"  failed: {rec['image']}: {rec['error']}", file=sys.stderr)
    return result.exit_status


def cmd_eval(args) -> int:
    try:
        ps = load_prompt_file(args.classes)
    except (OSError, ValueError) as err:
        raise ConfigError(f"class file {args.classes}: {err}") from err
    try:
        report = evaluate(args.pred, args.gt, ps)
    except EvaluationError as err:
        print(f"evaluation failed: {err}", file=sys.stderr)
        return EXIT_PARTIAL
    names = {c.class_id: c.canonical_name for c in ps.classes}
    print(format_table([("all", report)], names))
    if args.out:
        Path(args.out).write_text(report.to_json() + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = _load(args)
    try:
        rows = ablate(cfg, args.images, args.gt, args.out)
    except EvaluationError as err:
        print(f"ablation failed: {err}", file=sys.stderr)
        return EXIT_PARTIAL
    print(ablation_table(rows))
    return max(r.result.exit_status for r in rows)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="promptseg", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True)
        p.add_argument("--images", required=True)
        p.add_argument("--seed", type=int)
        p.add_argument("--debug-patches", action="store_true",
                       help="write every annotated patch as a PNG")

    p = sub.add_parser("run", help="segment every image in a directory")
    common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="score predicted label maps against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--classes", required=True, help="prompt file defining the classes")
    p.add_argument("--out", help="write the report as JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="run the four incremental configurations")
    common(p)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", default="ablation_out")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
