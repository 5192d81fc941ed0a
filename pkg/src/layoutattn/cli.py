"""Command-line front end.

One subcommand per invocation; all randomness flows from the composition's
seed field, so identical argv plus identical input files produce
byte-identical outputs. Exit codes: 0 success, 1 validation or format
failure, 2 I/O failure. Every error path prints a single diagnostic line to
stderr.

The environment variable LAYOUTATTN_CONFIG_DIR may point at a directory
holding defaults.json with default values for --sad-tokens, --cei-tokens,
--dim, and --layers.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

from . import composition, layout, masks, metrics, schedule, simulator
from .pnm import PnmError

CONFIG_DIR_ENV = "LAYOUTATTN_CONFIG_DIR"

_CONFIG_KEYS = {"sad_tokens", "cei_tokens", "dim", "layers"}


def _env_defaults() -> dict:
    config_dir = os.environ.get(CONFIG_DIR_ENV)
    if not config_dir:
        return {}
    path = Path(config_dir) / "defaults.json"
    if not path.exists():
        return {}
    obj = json.loads(path.read_text())
    unknown = set(obj) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"defaults.json: unknown key {sorted(unknown)[0]!r}")
    return obj


def _load_spec(path: str) -> composition.CompositionSpec:
    text = Path(path).read_text()
    return composition.parse_spec(text, base_dir=Path(path).parent)


def _load_layout_arg(args: argparse.Namespace) -> layout.TokenLayout:
    if args.layout:
        return layout.import_layout(Path(args.layout).read_text())
    spec = _load_spec(args.spec)
    return layout.pack(spec, sad_tokens=args.sad_tokens, cei_tokens=args.cei_tokens)


def _cmd_pack(args: argparse.Namespace) -> int:
    spec = _load_spec(args.spec)
    packed = layout.pack(spec, sad_tokens=args.sad_tokens, cei_tokens=args.cei_tokens)
    Path(args.out).write_text(layout.export_layout(packed))
    return 0


def _cmd_mask(args: argparse.Namespace) -> int:
    packed = _load_layout_arg(args)
    mode = masks.MaskMode(args.mode)
    artifact = masks.build_mask(packed, mode)
    Path(args.out).write_bytes(masks.export_mask(artifact, dense=args.dense))
    if args.blocks_out:
        Path(args.blocks_out).write_text(masks.export_blocks(artifact))
    return 0


def _cmd_schedule(args: argparse.Namespace) -> int:
    built = schedule.build_schedule(args.steps, args.ratio)
    sys.stdout.write(schedule.export_schedule(built))
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    spec = _load_spec(args.spec)
    config = simulator.SimulatorConfig(dim=args.dim, layers=args.layers)
    modes: list[masks.MaskMode] = []
    states = simulator.denoise_loop(spec, config, on_step=lambda t, m: modes.append(m))
    dump_dir = Path(args.dump_dir)
    dump_dir.mkdir(parents=True, exist_ok=True)
    lines = [
        f"step {t} {mode.name} {hashlib.sha256(state.tobytes()).hexdigest()}\n"
        for t, (mode, state) in enumerate(zip(modes, states))
    ]
    (dump_dir / "digests.txt").write_text("".join(lines))
    return 0


def _parse_perturb(value: str) -> tuple[int | layout.SpecialOwner, layout.Modality | None]:
    parts = value.split(":")
    if parts[0] == "group":
        if len(parts) not in (2, 3) or not parts[1].isdigit():
            raise ValueError(f"bad perturb target {value!r}")
        owner: int | layout.SpecialOwner = int(parts[1])
        modality = layout.Modality(parts[2]) if len(parts) == 3 else None
        return owner, modality
    if len(parts) != 1:
        raise ValueError(f"bad perturb target {value!r}")
    if parts[0] == "cei":
        return layout.CEI, None
    if parts[0] == "uncontrolled":
        return layout.UNCONTROLLED, None
    raise ValueError(f"bad perturb target {value!r}")


def _cmd_probe(args: argparse.Namespace) -> int:
    spec = _load_spec(args.spec)
    packed = layout.pack(spec, sad_tokens=args.sad_tokens, cei_tokens=args.cei_tokens)
    owner, modality = _parse_perturb(args.perturb)
    changed = simulator.perturbation_probe(
        packed, masks.MaskMode(args.mode), owner, modality, seed=spec.seed, dim=args.dim
    )
    tags = packed.per_token_tags
    print(f"changed {len(changed)} of {packed.total_len} queries")
    for index in sorted(changed):
        tag = tags[index]
        owner_name = (
            f"group:{tag.owner}" if isinstance(tag.owner, int) else tag.owner.value
        )
        print(f"{index}\t{owner_name}\t{tag.modality.value}")
    return 0


def _cmd_metrics(args: argparse.Namespace) -> int:
    report = metrics.evaluate_manifest(args.manifest)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    value = metrics.avg_report(args.dpg, args.id_s, args.ip_s, args.bg_s, args.aes)
    print(f"{value:.2f}")
    return 0


def _add_text_token_flags(parser: argparse.ArgumentParser, defaults: dict) -> None:
    parser.add_argument(
        "--sad-tokens", type=int, default=defaults.get("sad_tokens", 32)
    )
    parser.add_argument(
        "--cei-tokens", type=int, default=defaults.get("cei_tokens", 32)
    )


def build_parser(defaults: dict) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="layoutattn",
        description="Multi-reference composition: token layouts, attention masks, schedules, metrics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pack", help="compile a composition into a token layout file")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    _add_text_token_flags(p, defaults)
    p.set_defaults(func=_cmd_pack)

    p = sub.add_parser("mask", help="build a GIA or RMA mask binary")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--layout")
    src.add_argument("--spec")
    p.add_argument("--mode", choices=["gia", "rma"], required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dense", action="store_true", help="include the dense bit payload")
    p.add_argument("--blocks-out", help="also write the compressed block form as JSON")
    _add_text_token_flags(p, defaults)
    p.set_defaults(func=_cmd_mask)

    p = sub.add_parser("schedule", help="print the per-step mask mode sequence")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--ratio", type=float, required=True)
    p.set_defaults(func=_cmd_schedule)

    p = sub.add_parser("simulate", help="run the staged toy denoising loop")
    p.add_argument("--spec", required=True)
    p.add_argument("--dump-dir", required=True)
    p.add_argument("--dim", type=int, default=defaults.get("dim", 16))
    p.add_argument("--layers", type=int, default=defaults.get("layers", 2))
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("probe", help="report queries reachable from a perturbed token class")
    p.add_argument("--spec", required=True)
    p.add_argument("--mode", choices=["gia", "rma"], required=True)
    p.add_argument("--perturb", required=True, metavar="group:N[:modality]|cei|uncontrolled")
    p.add_argument("--dim", type=int, default=defaults.get("dim", 16))
    _add_text_token_flags(p, defaults)
    p.set_defaults(func=_cmd_probe)

    p = sub.add_parser("metrics", help="evaluate a batch manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("report", help="aggregate the five quality scores")
    p.add_argument("--dpg", type=float, required=True)
    p.add_argument("--id-s", type=float, required=True)
    p.add_argument("--ip-s", type=float, required=True)
    p.add_argument("--bg-s", type=float, required=True)
    p.add_argument("--aes", type=float, required=True)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        defaults = _env_defaults()
        parser = build_parser(defaults)
        args = parser.parse_args(argv)
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"layoutattn: file not found: {exc.filename}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"layoutattn: {exc}", file=sys.stderr)
        return 2
    except (
        composition.CompositionError,
        layout.LayoutFormatError,
        masks.MaskFormatError,
        PnmError,
        json.JSONDecodeError,
        ValueError,
    ) as exc:
        print(f"layoutattn: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
