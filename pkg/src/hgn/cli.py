"""Command line interface.

Subcommands: train, eval, predict, gradcheck, ablate, gen-data.  Exit codes:
0 success, 1 validation failure (bad config, data, or checkpoint), 2 internal
error.  The HGN_LOG environment variable (error | info | debug) sets log
verbosity; HGN_NUMBA (0 | 1) forces the kernel backend.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import backend
from .config import load_config
from .data import gen_synthetic, read_conll
from .errors import DataError, HGNError, ValidationError
from .train import ablate_run, evaluate, load_model, train_run
from .verify import run_gradcheck

log = logging.getLogger("hgn")


def _setup_logging() -> None:
    level_name = os.environ.get("HGN_LOG", "info").strip().lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if level_name not in levels:
        raise ValidationError(f"HGN_LOG must be one of {sorted(levels)}, got {level_name!r}")
    logging.basicConfig(level=levels[level_name], format="%(levelname)s %(name)s: %(message)s")


def _frozen_for_path(model, path: str | None):
    from .hero import FrozenHero

    if model.cfg.hero_variant != "frozen":
        return None
    if not path:
        raise ValidationError("this checkpoint has a frozen encoder; pass --frozen PATH")
    return FrozenHero(path, model.cfg.hero_d_model)


def cmd_train(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    record, _ = train_run(cfg)
    final = record.final["test"] or record.final["dev"] or record.final["train"]
    print(json.dumps({"precision": final["precision"], "recall": final["recall"],
                      "f1": final["f1"], "per_type": final["per_type"]}, sort_keys=True))
    return 0


def _metrics_table(result: dict) -> str:
    lines = [f"{'type':12s} {'P':>8s} {'R':>8s} {'F1':>8s}"]
    for name, row in sorted(result["per_type"].items()):
        lines.append(f"{name:12s} {row['precision']:8.4f} {row['recall']:8.4f} {row['f1']:8.4f}")
    lines.append(f"{'ALL':12s} {result['precision']:8.4f} {result['recall']:8.4f} "
                 f"{result['f1']:8.4f}")
    return "\n".join(lines)


def cmd_eval(args: argparse.Namespace) -> int:
    model = load_model(args.checkpoint)
    sentences = read_conll(args.data, max_len=model.cfg.hero_max_len)
    frozen = _frozen_for_path(model, args.frozen)
    result = evaluate(model, sentences, frozen)
    doc = json.dumps({"precision": result["precision"], "recall": result["recall"],
                      "f1": result["f1"], "per_type": result["per_type"]},
                     indent=2, sort_keys=True) + "\n"
    out_path = args.out or os.path.join(os.path.dirname(args.checkpoint) or ".", "metrics.json")
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(doc)
    print(doc, end="")
    print(_metrics_table(result))
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    model = load_model(args.checkpoint)
    sentences = read_conll(args.input, max_len=model.cfg.hero_max_len, require_tags=False)
    frozen = _frozen_for_path(model, args.frozen)
    out = sys.stdout if args.output in (None, "-") else open(args.output, "w", encoding="utf-8")
    try:
        for sent in sentences:
            rows = frozen.encode(sent.source_index, len(sent.tokens)).data if frozen else None
            tags = model.predict_tags(sent.tokens, rows)
            for token, tag in zip(sent.tokens, tags):
                out.write(f"{token} {tag}\n")
            out.write("\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    entries = run_gradcheck(h=args.h, tol=args.tol)
    failed = 0
    for entry in entries:
        status = "ok" if entry.report.passed else "FAIL"
        extra = ""
        if entry.hero_grad_norm is not None:
            extra = f", hero grad norm {entry.hero_grad_norm:.1e}"
        print(f"{entry.label:24s} max rel err {entry.report.max_rel_err:.3e} "
              f"({entry.report.checked} coords){extra} [{status}]")
        failed += not entry.report.passed
    print(f"{len(entries) - failed}/{len(entries)} configurations within tol {args.tol:g}")
    return 0 if failed == 0 else 1


def cmd_ablate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    try:
        with open(args.sweep, "r", encoding="utf-8") as fh:
            sweep = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read sweep {args.sweep}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{args.sweep}: invalid JSON: {exc}") from exc
    report = ablate_run(cfg, sweep)
    print(f"split: {report['split']}")
    print(f"{'variant':20s} {'P':>8s} {'R':>8s} {'F1':>8s} {'dF1':>8s}")
    for row in report["rows"]:
        print(f"{row['label']:20s} {row['precision']:8.4f} {row['recall']:8.4f} "
              f"{row['f1']:8.4f} {row['delta_f1']:+8.4f}")
    return 0


def cmd_gen_data(args: argparse.Namespace) -> int:
    manifest = gen_synthetic(args.out, args.sentences, args.cue_width, args.seed)
    print(json.dumps(manifest, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hgn", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a config file")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="entity metrics of a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--frozen", help="frozen-encoder container for this dataset")
    p.add_argument("--out", help="metrics JSON path (default: metrics.json next to checkpoint)")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("predict", help="tag tokens with a trained checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", help="output path (default stdout)")
    p.add_argument("--frozen", help="frozen-encoder container for this input")
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("gradcheck", help="finite-difference check on tiny models")
    p.add_argument("--h", type=float, default=1e-4)
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("ablate", help="train sweep variants against the no-gang baseline")
    p.add_argument("--config", required=True)
    p.add_argument("--sweep", required=True, help="JSON file with window sets and/or cells")
    p.set_defaults(fn=cmd_ablate)

    p = sub.add_parser("gen-data", help="write a synthetic local-cue corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sentences", type=int, default=2000)
    p.add_argument("--cue-width", type=int, default=5)
    p.set_defaults(fn=cmd_gen_data)
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        _setup_logging()
        args = build_parser().parse_args(argv)
        log.debug("kernel backend: %s", backend.active_backend())
        return args.fn(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except HGNError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
