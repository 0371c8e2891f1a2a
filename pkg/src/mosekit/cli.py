"""Command-line entry point.

Every subcommand accepts ``--config FILE``: a ``key = value`` file whose keys
are flag names (``pred-root`` or ``pred_root``). Flags given on the command
line override file values.

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .attention import DEFAULT_SEED, attention_demo
from .errors import ConfigError, DataError
from .harness import (
    EvalConfig,
    ablation_to_csv,
    emit_ablation,
    emit_report,
    report_to_csv,
    run_ablation_grid,
    run_evaluation,
)
from .memory_bank import DEFAULT_NC, DEFAULT_NL, PUSH_POLICIES, simulate
from .scene_gate import ANCHOR_MODES, DEFAULT_THRESHOLD, GateTrace, gate_trace_from_histograms, load_frame_histograms

log = logging.getLogger("mosekit")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _bins(text: str) -> tuple[int, int, int]:
    try:
        bins = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bins must look like 8,8,8, got {text!r}") from None
    if len(bins) != 3 or min(bins) < 1:
        raise argparse.ArgumentTypeError(f"bins must be three positive integers, got {text!r}")
    return bins


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _unit(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {text}")
    return value


def _add_metric_flags(p):
    p.add_argument("--gt", dest="gt_root", type=Path, help="ground-truth root (<root>/<video>/<frame>.png)")
    p.add_argument("--pred", dest="pred_root", help="prediction root, same layout as --gt")
    p.add_argument("--frames", dest="frames_root", type=Path, help="optional RGB frame root")
    p.add_argument("--alpha", type=float, default=0.1, help="adaptive contour radius factor (default 0.1)")
    p.add_argument("--cap", type=int, default=None, help="adaptive radius cap (default: fixed F radius)")
    p.add_argument("--eval-frames", choices=("skip-first", "all"), default="skip-first")
    p.add_argument("--reappear-window", type=int, default=None, help="score only this many frames per reappearance")
    p.add_argument("--aggregate", dest="aggregation", choices=("object", "video", "frame"), default="object")
    p.add_argument("--strict", action="store_true", help="fail on missing prediction frames")
    p.add_argument("--workers", type=int, default=None, help="parallel videos (default $MOSEKIT_WORKERS or 1)")


def _add_gate_flags(p):
    p.add_argument("--threshold", type=_unit, default=DEFAULT_THRESHOLD)
    p.add_argument("--bins", type=_bins, default=(8, 8, 8))
    p.add_argument("--anchor-mode", choices=ANCHOR_MODES, default="previous")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mosekit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mosekit {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("evaluate", help="score predictions against ground truth")
    p.add_argument("--config", type=Path)
    _add_metric_flags(p)
    p.add_argument("--out-json", type=Path)
    p.add_argument("--out-csv", type=Path)

    p = sub.add_parser("ablate", help="evaluate over a grid of memory size / gate threshold")
    p.add_argument("--config", type=Path)
    _add_metric_flags(p)
    _add_gate_flags(p)
    p.add_argument("--nl", type=int, default=DEFAULT_NL)
    p.add_argument("--nc", type=int, default=DEFAULT_NC)
    p.add_argument("--push-policy", choices=PUSH_POLICIES, default="on-activation")
    p.add_argument("--grid-nl", type=_float_list, default=None, help="e.g. 7,22")
    p.add_argument("--grid-threshold", type=_float_list, default=None, help="e.g. 0,0.35,0.5,0.7,1")
    p.add_argument("--memory-traces", action="store_true", help="add gate/memory statistics (needs --frames)")
    p.add_argument("--out-json", type=Path)
    p.add_argument("--out-csv", type=Path)

    p = sub.add_parser("gate", help="scene-change gate trace for a directory of frames")
    p.add_argument("--config", type=Path)
    p.add_argument("--frames", type=Path, help="directory of frame images")
    _add_gate_flags(p)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("simulate", help="replay grounding and concept memory over a video")
    p.add_argument("--config", type=Path)
    p.add_argument("--frames", type=int, help="number of frames T")
    p.add_argument("--nl", type=int, default=DEFAULT_NL)
    p.add_argument("--nc", type=int, default=DEFAULT_NC)
    p.add_argument("--gate", type=Path, help="gate trace JSON (default: gate never active)")
    p.add_argument("--push-policy", choices=PUSH_POLICIES, default="on-activation")
    p.add_argument("--out", type=Path)

    p = sub.add_parser("attention-demo", help="run the attention reference on seeded random tensors")
    p.add_argument("--config", type=Path)
    p.add_argument("--c", type=int, default=8)
    p.add_argument("--hw", type=int, default=4)
    p.add_argument("--nl", type=int, default=DEFAULT_NL)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", type=Path)
    return parser


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _read_config(path: Path) -> dict[str, str]:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        text = Path(path).read_text(encoding="utf-8")
        cp.read_string("[mosekit]\n" + text, source=str(path))
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return dict(cp["mosekit"])


def _apply_config(subparser: argparse.ArgumentParser, values: dict[str, str]) -> None:
    """Install config-file values as defaults; argparse applies ``type`` to string defaults."""
    by_key = {}
    for action in subparser._actions:
        if action.dest in ("help", "config"):
            continue
        by_key[action.dest] = action
        for opt in action.option_strings:
            by_key[opt.lstrip("-").replace("-", "_")] = action
    defaults = {}
    for key, raw in values.items():
        action = by_key.get(key.replace("-", "_"))
        if action is None:
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(action, argparse._StoreTrueAction):
            low = raw.strip().lower()
            if low not in _TRUE | _FALSE:
                raise ConfigError(f"config key {key!r} expects a boolean, got {raw!r}")
            defaults[action.dest] = low in _TRUE
        else:
            defaults[action.dest] = raw.strip()
    subparser.set_defaults(**defaults)


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None) is not None:
        sub = parser._subparsers._group_actions[0].choices[args.command]
        _apply_config(sub, _read_config(args.config))
        args = parser.parse_args(argv)
    return args


def _require(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_root", "").replace("_", "-") for n in missing)
        raise ConfigError(f"{args.command}: missing required option(s) {flags}")


def _eval_config(args, **extra) -> EvalConfig:
    return EvalConfig(
        gt_root=args.gt_root,
        pred_root=args.pred_root,
        frames_root=args.frames_root,
        alpha=args.alpha,
        cap=args.cap,
        eval_frames=args.eval_frames,
        reappear_window=args.reappear_window,
        aggregation=args.aggregation,
        strict=args.strict,
        workers=args.workers,
        **extra,
    )


def _emit_text(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot write {out}: {exc}") from exc


def cmd_evaluate(args) -> None:
    _require(args, "gt_root", "pred_root")
    report = run_evaluation(_eval_config(args))
    if args.out_json:
        emit_report(report, args.out_json, "json")
    if args.out_csv:
        emit_report(report, args.out_csv, "csv")
    if not (args.out_json or args.out_csv):
        sys.stdout.write(report_to_csv(report))


def cmd_ablate(args) -> None:
    _require(args, "gt_root")
    grid = {}
    if args.grid_nl is not None:
        grid["nl"] = args.grid_nl
    if args.grid_threshold is not None:
        grid["threshold"] = args.grid_threshold
    cfg = _eval_config(
        args,
        bins=args.bins,
        threshold=args.threshold,
        anchor_mode=args.anchor_mode,
        nl=args.nl,
        nc=args.nc,
        push_policy=args.push_policy,
    )
    table = run_ablation_grid(cfg, grid, memory_traces=args.memory_traces)
    if args.out_json:
        emit_ablation(table, args.out_json, "json")
    if args.out_csv:
        emit_ablation(table, args.out_csv, "csv")
    if not (args.out_json or args.out_csv):
        sys.stdout.write(ablation_to_csv(table))


def cmd_gate(args) -> None:
    _require(args, "frames")
    hists = load_frame_histograms(args.frames, args.bins)
    trace = gate_trace_from_histograms(hists, args.threshold, args.anchor_mode)
    _emit_text(trace.to_json() + "\n", args.out)


def cmd_simulate(args) -> None:
    _require(args, "frames")
    gate = None
    if args.gate is not None:
        try:
            gate = GateTrace.from_json(args.gate.read_text(encoding="utf-8"))
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise DataError(f"cannot read gate trace {args.gate}: {exc}") from exc
    try:
        trace = simulate(args.frames, args.nl, args.nc, gate, args.push_policy)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    _emit_text(trace.to_jsonl(), args.out)


def cmd_attention_demo(args) -> None:
    if args.c < 1 or args.hw < 1 or args.nl < 1:
        raise ConfigError("--c, --hw and --nl must be positive")
    demo = attention_demo(args.c, args.hw, args.nl, args.seed)
    _emit_text(json.dumps(demo, indent=1) + "\n", args.out)


COMMANDS = {
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
    "gate": cmd_gate,
    "simulate": cmd_simulate,
    "attention-demo": cmd_attention_demo,
}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except ConfigError as exc:
        print(f"mosekit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"mosekit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"mosekit: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
