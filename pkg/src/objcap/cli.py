"""Command-line entry points.

Commands: synth, train, eval, generate, score, ablate. Every run with an
--out directory writes a RunManifest (run_manifest.json) before any long
computation starts: command, config path, seed, output dir, and sha256
hashes of the input files, which is enough to replay the run.

Seed precedence: --seed flag > OVC_SEED env var > config file.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import metrics, synthgen, trainer
from .corpus import Caption, load_dataset, save_dataset, tokenize


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir: Path, command: str, seed, config_path,
                    inputs) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "config": str(config_path) if config_path else None,
        "seed": seed,
        "out": str(out_dir),
        "input_hashes": {str(p): _sha256(p) for p in inputs if p},
    }
    (out_dir / "run_manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def _resolve_seed(flag_seed, config_seed):
    if flag_seed is not None:
        return flag_seed
    env = os.environ.get("OVC_SEED")
    if env is not None:
        return int(env)
    return config_seed


def _load_data_dir(data_dir: Path):
    dataset = load_dataset(data_dir / "dataset.jsonl")
    frames = {}
    for obj in dataset:
        if obj.video_id not in frames:
            frames[obj.video_id] = synthgen.load_rasters(
                data_dir / f"{obj.video_id}.ovcr")
    return dataset, frames


def _emit(report: dict, pretty: bool) -> None:
    if pretty:
        for k, v in report.items():
            print(f"{k:>12}: {v:.4f}" if isinstance(v, float) else f"{k:>12}: {v}")
    else:
        print(json.dumps(report))


def cmd_synth(args) -> int:
    spec = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    seed = _resolve_seed(args.seed, spec.get("seed", 0))
    out = Path(args.out)
    _write_manifest(out, "synth", seed, args.spec, [args.spec])
    scenes = synthgen.generate_corpus(
        num_scenes=int(spec.get("num_scenes", 10)),
        seed=seed,
        frame_size=tuple(spec.get("frame_size", [64, 64])),
        num_frames=int(spec.get("num_frames", 24)),
    )
    objects = []
    for scene_spec, frames, objs in scenes:
        synthgen.save_rasters(frames, out / f"{scene_spec.video_id}.ovcr")
        objects.extend(objs)
    save_dataset(objects, out / "dataset.jsonl")
    print(f"wrote {len(objects)} objects over {len(scenes)} scenes to {out}")
    return 0


def cmd_train(args) -> int:
    config = trainer.load_config(args.config)
    seed = _resolve_seed(args.seed, config.seed)
    config = trainer.replace(config, seed=seed)
    out = Path(args.out)
    data_dir = Path(args.data)
    _write_manifest(out, "train", seed, args.config,
                    [args.config, data_dir / "dataset.jsonl"])
    dataset, frames = _load_data_dir(data_dir)
    ckpt = trainer.train(config, dataset, frames, log_path=out / "log.csv")
    trainer.save_checkpoint(ckpt, out / "checkpoint.ovck")
    print(f"trained {config.epochs} epochs; "
          f"final loss {ckpt.history[-1][3]:.4f}; wrote {out}")
    return 0


def cmd_eval(args) -> int:
    ckpt = trainer.load_checkpoint(args.ckpt)
    dataset, frames = _load_data_dir(Path(args.data))
    report = trainer.evaluate(ckpt, dataset, frames)
    if args.out:
        out = Path(args.out)
        _write_manifest(out, "eval", ckpt.config.seed, None,
                        [args.ckpt, Path(args.data) / "dataset.jsonl"])
        (out / "report.json").write_text(json.dumps(report) + "\n")
    _emit(report, args.pretty)
    return 0


def cmd_generate(args) -> int:
    ckpt = trainer.load_checkpoint(args.ckpt)
    dataset, frames = _load_data_dir(Path(args.data))
    matching = [o for o in dataset if o.object_id == args.object]
    if not matching:
        print(f"object {args.object!r} not found in dataset", file=sys.stderr)
        return 2
    samples = trainer.prepare_samples(matching, frames, ckpt.config, ckpt.vocab)
    caption, _ = trainer.generate_for_sample(
        ckpt, samples[0], mode=args.mode, beam_width=args.beam_width)
    print(" ".join(caption.tokens))
    return 0


def _read_caption_file(path) -> dict[str, tuple[str, ...]]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            out[rec["object_id"]] = tuple(tokenize(rec["caption"]))
    return out


def cmd_score(args) -> int:
    cands = _read_caption_file(args.cand)
    refs = _read_caption_file(args.ref)
    shared = sorted(set(cands) & set(refs))
    if not shared:
        print("no object_ids shared between candidate and reference files",
              file=sys.stderr)
        return 2
    pairs = [metrics.make_pair(cands[oid], [refs[oid]]) for oid in shared]
    _emit(metrics.score_pairs(pairs).to_json(), args.pretty)
    return 0


def cmd_ablate(args) -> int:
    config = trainer.load_config(args.config)
    seed = _resolve_seed(args.seed, config.seed)
    dataset, frames = _load_data_dir(Path(args.data))
    train_set, test_set = trainer.split_by_video(dataset, args.test_videos)
    if args.out:
        _write_manifest(Path(args.out), "ablate", seed, args.config,
                        [args.config, Path(args.data) / "dataset.jsonl"])
    rows = trainer.ablate(config, train_set, test_set, frames,
                          seeds=tuple(range(seed, seed + args.seeds)))
    if args.out:
        (Path(args.out) / "ablation.json").write_text(
            json.dumps(rows, indent=2) + "\n")
    if args.pretty:
        print(f"{'row':>14}  {'B@4':>7} {'M':>7} {'R':>7} {'C':>7}")
        for r in rows:
            print(f"{r['row']:>14}  {r['b4']:7.4f} {r['meteor']:7.4f} "
                  f"{r['rouge_l']:7.4f} {r['cider_d']:7.4f}")
    else:
        slim = [{k: r[k] for k in ("row", "b4", "meteor", "rouge_l",
                                   "cider_d", "seeds")} for r in rows]
        print(json.dumps(slim))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="objcap",
                                description="object-level video captioning")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic corpus")
    s.add_argument("--spec", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train", help="train a model")
    s.add_argument("--config", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="evaluate a checkpoint")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out")
    s.add_argument("--pretty", action="store_true")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("generate", help="caption one object")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--object", required=True)
    s.add_argument("--mode", choices=["greedy", "beam"], default="greedy")
    s.add_argument("--beam-width", type=int, default=3)
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("score", help="score candidate captions")
    s.add_argument("--cand", required=True)
    s.add_argument("--ref", required=True)
    s.add_argument("--pretty", action="store_true")
    s.set_defaults(func=cmd_score)

    s = sub.add_parser("ablate", help="run the feature-flag ladder")
    s.add_argument("--config", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--seeds", type=int, default=3)
    s.add_argument("--test-videos", type=int, default=10)
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.add_argument("--pretty", action="store_true")
    s.set_defaults(func=cmd_ablate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
