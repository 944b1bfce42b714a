"""Command line: ``gradmix {augment,stats,inspect,synth}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import AugmentationConfig
from .dataset import _atomic_write, _png_bytes, build_inventory, load_manifest, load_sample, synth_dataset
from .inpaint import inpaint_trace
from .mixer import Skip, cutmix_pair, gradmix_pair
from .pipeline import augment_dataset, color_delta, stats

log = logging.getLogger("gradmix")

_DEFAULTS = AugmentationConfig()

_COLOR_ADJUST = {"all": "all", "inter": "inter_only", "off": "off"}
_ONOFF = {"on": True, "off": False}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    d = _DEFAULTS
    g = p.add_argument_group("augmentation")
    g.add_argument("--config", type=Path, help="JSON file with config fields; flags override it")
    g.add_argument("--seed", type=int, help=f"64-bit run seed (default: {d.seed})")
    g.add_argument("--mode", choices=["gradmix", "cutmix"], help=f"mixing method (default: {d.mode})")
    g.add_argument("--norm", choices=["max", "sum"], help=f"mask normalization (default: {d.norm_mode})")
    g.add_argument("--major-fraction", type=float, help=f"fraction of major nuclei replaced (default: {d.major_fraction})")
    g.add_argument("--intra-prob", type=float, help=f"probability of same-image rare sourcing (default: {d.intra_image_prob})")
    g.add_argument("--size-ratio", type=float, help=f"rare area must be < ratio * major area (default: {d.size_ratio})")
    g.add_argument("--dilate-iters", type=int, help=f"3x3 dilations of the major footprint (default: {d.dilation_iterations})")
    g.add_argument("--inpaint-radius", type=int, help=f"inpainting neighbourhood radius (default: {d.inpaint_radius})")
    g.add_argument(
        "--protect-neighbors", choices=["on", "off"],
        help=f"keep other instances untouched (default: {'on' if d.protect_neighbors else 'off'})",
    )
    g.add_argument("--color-adjust", choices=["all", "inter", "off"], help="colour matching of the rare nucleus (default: all)")
    g.add_argument(
        "--color-mean-scope", choices=["phi", "all-nuclei"],
        help=f"nuclei averaged for the target colour (default: {d.color_mean_scope})",
    )
    g.add_argument("--max-reselect", type=int, help=f"redraws after a geometric skip (default: {d.max_reselect})")


def _resolve_config(args) -> AugmentationConfig:
    fields = {}
    norm_given = args.norm is not None
    if args.config is not None:
        doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        unknown = set(doc) - set(AugmentationConfig.field_names())
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        fields.update(doc)
        norm_given = norm_given or "norm_mode" in doc
    flags = {
        "seed": args.seed,
        "mode": args.mode,
        "norm_mode": args.norm,
        "major_fraction": args.major_fraction,
        "intra_image_prob": args.intra_prob,
        "size_ratio": args.size_ratio,
        "dilation_iterations": args.dilate_iters,
        "inpaint_radius": args.inpaint_radius,
        "protect_neighbors": _ONOFF.get(args.protect_neighbors),
        "color_adjust": _COLOR_ADJUST.get(args.color_adjust),
        "color_mean_scope": args.color_mean_scope,
        "max_reselect": args.max_reselect,
    }
    fields.update({k: v for k, v in flags.items() if v is not None})
    cfg = AugmentationConfig(**fields)
    if cfg.mode == "cutmix" and norm_given:
        log.warning("norm mode is ignored in cutmix mode")
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gradmix", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("augment", help="augment a dataset")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--workers", type=int, default=1, help="parallel workers; output does not depend on it (default: 1)")
    _add_config_flags(p)

    p = sub.add_parser("stats", help="per-class instance counts of a manifest")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--json", type=Path, help="also write the table as JSON here")

    p = sub.add_parser("inspect", help="dump the artifacts of a single mixing pair")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--target", required=True, help="target sample id")
    p.add_argument("--major", type=int, required=True, help="major instance id in the target")
    p.add_argument("--source", required=True, help="source sample id")
    p.add_argument("--rare", type=int, required=True, help="rare instance id in the source")
    p.add_argument("--out", type=Path, required=True)
    _add_config_flags(p)

    p = sub.add_parser("synth", help="write a synthetic dataset", formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--n-samples", type=int, default=20)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--class-mix", default="1:24,2:24,3:2", help="per-image counts as class:count,...")
    p.add_argument("--rare-classes", default="3", help="comma-separated rare class ids")
    p.add_argument("--seed", type=int, default=0)
    return parser


def _cmd_augment(args) -> int:
    cfg = _resolve_config(args)
    manifest = load_manifest(args.manifest)
    result = augment_dataset(manifest, cfg, args.out, workers=args.workers)
    sys.stdout.write(result.table.format())
    sys.stdout.write(f"applied {result.applied} of {len(result.provenance)} attempted replacements (seed {cfg.seed})\n")
    return 0


def _cmd_stats(args) -> int:
    table = stats(load_manifest(args.manifest))
    sys.stdout.write(table.format())
    if args.json is not None:
        _atomic_write(args.json, (json.dumps(table.to_dict(), indent=2) + "\n").encode("utf-8"))
    return 0


def _find(records, instance_id, what):
    for rec in records:
        if rec.id == instance_id:
            return rec
    raise ValueError(f"{what} instance {instance_id} not found")


def _cmd_inspect(args) -> int:
    cfg = _resolve_config(args)
    manifest = load_manifest(args.manifest)
    entries = {e.id: e for e in manifest.entries}
    for sid in (args.target, args.source):
        if sid not in entries:
            raise ValueError(f"sample '{sid}' not in manifest")
    target = load_sample(entries[args.target], manifest)
    source = load_sample(entries[args.source], manifest)
    major = _find(build_inventory(target), args.major, "major")
    rare = _find(build_inventory(source), args.rare, "rare")
    delta = color_delta(target, [major], source, rare, cfg)
    pair = gradmix_pair if cfg.mode == "gradmix" else cutmix_pair
    edit = pair(target, major, source, rare, cfg, delta)

    out = Path(args.out)
    summary = {
        "target": args.target, "major": args.major, "source": args.source, "rare": args.rare,
        "mode": cfg.mode, "color_delta": list(delta),
        "outcome": f"skipped:{edit.reason}" if isinstance(edit, Skip) else "applied",
        "offset": list(edit.offset) if edit.offset is not None else None,
    }
    if not isinstance(edit, Skip):
        top, left, bottom, right = edit.patch
        ys, xs = slice(top, bottom + 1), slice(left, right + 1)
        summary["patch"] = [top, left, bottom, right]
        _atomic_write(out / "before.png", _png_bytes(np.ascontiguousarray(target.image[ys, xs])))
        _atomic_write(out / "after.png", _png_bytes(edit.pixels))
        if edit.mask is not None:
            mask16 = np.rint(edit.mask.values * 65535).astype(np.uint16)
            _atomic_write(out / "mask.png", _png_bytes(mask16))
            colors = np.array([[255, 255, 255], [0, 160, 255], [200, 0, 80]], dtype=np.uint8)
            _atomic_write(out / "partition.png", _png_bytes(colors[edit.partition.label_map()]))
            _atomic_write(out / "background.png", _png_bytes(edit.background))
            trace = inpaint_trace(target.image, major.footprint, cfg.inpaint_radius)
            t16 = np.clip(np.rint(trace.t_field[ys, xs] * 256), 0, 65535).astype(np.uint16)
            _atomic_write(out / "arrival_time.png", _png_bytes(t16))
    _atomic_write(out / "pair.json", (json.dumps(summary, indent=2) + "\n").encode("utf-8"))
    sys.stdout.write(f"{summary['outcome']}: wrote {out}\n")
    return 0


def _parse_mix(text):
    mix = {}
    for part in text.split(","):
        cls, count = part.split(":")
        mix[int(cls)] = int(count)
    return mix


def _cmd_synth(args) -> int:
    mix = _parse_mix(args.class_mix)
    rare = [int(c) for c in args.rare_classes.split(",") if c]
    _, census = synth_dataset(
        args.out, args.n_samples, mix, rare, seed=args.seed, height=args.height, width=args.width
    )
    sys.stdout.write(json.dumps(census["per_class"]) + "\n")
    return 0


_COMMANDS = {"augment": _cmd_augment, "stats": _cmd_stats, "inspect": _cmd_inspect, "synth": _cmd_synth}


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError, RuntimeError) as exc:
        sys.stderr.write(f"gradmix {args.command}: error: {exc}\n")
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
