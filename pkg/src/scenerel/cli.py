"""Command-line surface.

Subcommands: gen, relations, train, eval, bench, ablate.  Exit codes:
0 ok, 1 usage error, 2 data error, 3 numeric failure.  Errors print a
single ``error: <kind>: <reason>`` line to stderr.  Every run is driven
by one root seed, which is recorded in each output artifact.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .checkpoint import CheckpointError
from .config import RunConfig, config_help_lines, load_config
from .detection import (
    NumericError,
    infer,
    load_model,
    run_ablation,
    save_model,
    train,
    variant_config,
    ABLATION_VARIANTS,
)
from .evaluation import ap_report, bench_relations
from .pairing import PairingConfig, build_pairs
from .relations import boxes_to_arrays, relation_labels_arrays
from .scenes import (
    CLASS_NAMES,
    SceneFormatError,
    generate_scenes,
    load_scene_dir,
    save_scene,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 instead of argparse's default 2
        raise UsageError(message)


def _config_from_args(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    for name in ("seed", "k", "epochs"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "mode", None) is not None:
        overrides["pair_mode"] = args.mode
    field_types = {f.name: f for f in dataclasses.fields(RunConfig)}
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, _, raw = item.partition("=")
        key = key.strip()
        if key not in field_types:
            raise UsageError(f"unknown config key {key!r}")
        try:
            overrides[key] = json.loads(raw)
        except json.JSONDecodeError:
            overrides[key] = raw.strip()
    data = cfg.to_dict()
    data.update(overrides)
    return RunConfig.from_dict(data)


def _write_or_print(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_gen(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    cfg = _config_from_args(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    scenes = generate_scenes(cfg, n=args.n)
    for scene in scenes:
        save_scene(scene, out_dir / f"scene_{scene.id:04d}.json")
    print(f"wrote {len(scenes)} scenes to {out_dir} (seed={cfg.seed})")
    return EXIT_OK


def cmd_relations(args) -> int:
    cfg = _config_from_args(args)
    scenes = load_scene_dir(args.scenes)
    from .detection import thresholds_from_config

    t = thresholds_from_config(cfg)
    lines = []
    for scene in scenes:
        n = len(scene.objects)
        if args.pairs == "full":
            pair_list = [(i, j) for i in range(n) for j in range(i + 1, n)]
        else:
            mins, maxs = boxes_to_arrays([o.box for o in scene.objects])
            centers = (mins + maxs) / 2.0
            pcfg = PairingConfig(k=cfg.k, mode=cfg.pair_mode, seed=cfg.seed)
            pair_list = build_pairs(n, centers, pcfg).pairs
        if not pair_list:
            continue
        mins, maxs = boxes_to_arrays([o.box for o in scene.objects])
        cols = relation_labels_arrays(
            mins,
            maxs,
            scene.class_ids(),
            scene.instance_ids(),
            np.array([p[0] for p in pair_list]),
            np.array([p[1] for p in pair_list]),
            t,
        )
        for idx, (a, b) in enumerate(pair_list):
            lines.append(
                json.dumps(
                    {
                        "scene": scene.id,
                        "a": a,
                        "b": b,
                        "group": bool(cols["group"][idx]),
                        "same_as": bool(cols["same_as"][idx]),
                        "support": bool(cols["support"][idx]),
                        "hang_on": bool(cols["hang_on"][idx]),
                    },
                    sort_keys=True,
                )
            )
    _write_or_print("".join(line + "\n" for line in lines), args.out)
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    result = train(cfg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_model(result.model, out_dir / "checkpoint.bin")
    with open(out_dir / "metrics.jsonl", "w") as f:
        for record in result.metrics:
            f.write(json.dumps({"seed": cfg.seed, **record}, sort_keys=True) + "\n")
    last = result.metrics[-1]
    print(
        f"trained {cfg.epochs} epochs on {len(result.train_scenes)} scenes "
        f"(seed={cfg.seed}); final loss {last['loss_total']:.4f}; "
        f"checkpoint at {out_dir / 'checkpoint.bin'}"
    )
    return EXIT_OK


def _report_csv(report, seed: int) -> str:
    rows = [["# seed", str(seed)], ["class"] + [f"ap@{t}" for t in report.thresholds]]
    class_ids = sorted({c for aps in report.per_class.values() for c in aps})
    for c in class_ids:
        name = CLASS_NAMES[c] if c < len(CLASS_NAMES) else str(c)
        rows.append([name] + [f"{report.per_class[t].get(c, float('nan')):.4f}" for t in report.thresholds])
    rows.append(["mAP"] + [f"{report.map_by_threshold[t]:.4f}" for t in report.thresholds])
    out = []
    for row in rows:
        out.append(",".join(row))
    return "\n".join(out) + "\n"


def cmd_eval(args) -> int:
    model = load_model(args.checkpoint)
    if args.scenes:
        scenes = load_scene_dir(args.scenes)
    else:
        from .detection import split_scenes

        all_scenes = generate_scenes(model.cfg)
        _, scenes = split_scenes(all_scenes, model.cfg.holdout_fraction)
    detections = [infer(model, s) for s in scenes]
    gts = [s.objects for s in scenes]
    report = ap_report(detections, gts)
    if args.csv:
        _write_or_print(_report_csv(report, model.cfg.seed), args.out)
    else:
        payload = {"seed": model.cfg.seed, "n_scenes": len(scenes), **report.to_dict()}
        _write_or_print(json.dumps(payload, indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    reports = bench_relations(n_objects=args.n, k=args.k, reps=args.reps, seed=args.seed or 0)
    if args.csv:
        lines = [f"# seed,{args.seed or 0}", "implementation,pair_count,wall_time_s,per_pair_s"]
        for r in reports:
            lines.append(f"{r.implementation},{r.pair_count},{r.wall_time_s:.6f},{r.per_pair_s:.3e}")
        _write_or_print("\n".join(lines) + "\n", args.out)
    else:
        payload = {"seed": args.seed or 0, "reports": [r.to_dict() for r in reports]}
        _write_or_print(json.dumps(payload, indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = _config_from_args(args)
    seeds = [cfg.seed + i for i in range(args.seeds)]
    by_variant = {v: [] for v in ABLATION_VARIANTS}
    for seed in seeds:
        seed_cfg = dataclasses.replace(cfg, seed=seed)
        for row in run_ablation(seed_cfg):
            by_variant[row["variant"]].append(row)
    rows = []
    for variant, entries in by_variant.items():
        rows.append(
            {
                "variant": variant,
                "map_0.25": float(np.mean([e["map_0.25"] for e in entries])),
                "map_0.5": float(np.mean([e["map_0.5"] for e in entries])),
                "seeds": seeds,
            }
        )
    if args.csv:
        lines = [f"# seeds,{';'.join(str(s) for s in seeds)}", "variant,map@0.25,map@0.5"]
        for row in rows:
            lines.append(f"{row['variant']},{row['map_0.25']:.4f},{row['map_0.5']:.4f}")
        _write_or_print("\n".join(lines) + "\n", args.out)
    else:
        _write_or_print(json.dumps(rows, indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    epilog = "config keys (flat JSON file via --config, or --set key=value):\n" + "\n".join(
        config_help_lines()
    )
    parser = _Parser(
        prog="scenerel",
        description="Relation reasoning over 3D boxes: scenes, relation labels, training, evaluation.",
        epilog=epilog,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_flags(p, epilog_too=False):
        p.add_argument("--config", help="flat JSON config file")
        p.add_argument("--seed", type=int, help="root seed override")
        p.add_argument("--k", type=int, help="partners per object")
        p.add_argument("--mode", choices=["random", "nearest"], help="pairing mode")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key")

    p = sub.add_parser("gen", help="write seeded synthetic scene files",
                       epilog=epilog, formatter_class=argparse.RawDescriptionHelpFormatter)
    add_config_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n", type=int, required=True, help="number of scenes")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("relations", help="dump relation labels for scene files")
    add_config_flags(p)
    p.add_argument("--scenes", required=True, help="directory of scene JSON files")
    p.add_argument("--pairs", choices=["full", "sampled"], default="full",
                   help="all unordered pairs, or a sampled PairSet per object")
    p.add_argument("--out", help="output JSONL file (default stdout)")
    p.set_defaults(func=cmd_relations)

    p = sub.add_parser("train", help="train the toy detector",
                       epilog=epilog, formatter_class=argparse.RawDescriptionHelpFormatter)
    add_config_flags(p)
    p.add_argument("--epochs", type=int, help="epoch count override")
    p.add_argument("--out", required=True, help="output directory for checkpoint + metrics")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint (mAP at IoU 0.25/0.5)")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--scenes", help="scene dir; default = the run's holdout split")
    p.add_argument("--csv", action="store_true", help="spreadsheet table instead of JSON")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="time the relation kernels (scalar vs batched)")
    p.add_argument("--n", type=int, default=2048, help="object count")
    p.add_argument("--k", type=int, default=8, help="partners per object")
    p.add_argument("--reps", type=int, default=5, help="timing repetitions (median)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", action="store_true")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("ablate", help="train baseline / rm- / rm(random) / rm(nearest) and compare",
                       epilog=epilog, formatter_class=argparse.RawDescriptionHelpFormatter)
    add_config_flags(p)
    p.add_argument("--epochs", type=int, help="epoch count override")
    p.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds to run")
    p.add_argument("--csv", action="store_true")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as e:
        print(f"error: usage: {e}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as e:
        print(f"error: numeric: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (SceneFormatError, CheckpointError) as e:
        print(f"error: data: {e}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, ValueError) as e:
        print(f"error: data: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    raise SystemExit(main())
