"""Command-line surface: every pipeline stage as a subcommand over the
shared JSONL/CSV/checkpoint formats.

Configuration is a flat key-value schema; values come from defaults, an
optional JSON config file, then explicit flags, in that order. Unknown
config keys are rejected, and the effective configuration is echoed to
the output directory so a run can be reproduced from its artifacts
alone. Exit codes: 0 success, 1 validation error, 2 I/O error.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import formats, social
from .evaluation import Protocol, ScoredPair, evaluate_frames
from .network import ModelConfig, MutualGazeNet
from .nn import gradient_check, head_pose_loss, laeo_loss, load_checkpoint
from .records import BoundingBox, ShotRecord
from .synthetic import OracleConfig, SynthConfig, SyntheticHeadDataset, \
    generate_dataset
from .tracking import link_detections
from .train import PairStore, TrainConfig, pretrain_headpose, train_laeo, \
    write_history

# key -> (type, default, help)
CONFIG_SCHEMA = {
    "seed": (int, 0, "master random seed for every stage"),
    "protocol": (str, "frame_iou",
                 "evaluation protocol: frame_iou or head_in_human"),
    "iou_threshold": (float, 0.5, "IoU needed to link a detection"),
    "max_missed": (int, 5, "frames a track survives without a match"),
    "min_track_length": (int, 10, "shorter tracks are dropped"),
    "window_length": (int, 10, "frames per head-crop stack (T)"),
    "map_frames": (int, 10, "frames per head map (M)"),
    "window_stride": (int, 1, "stride between pair windows"),
    "crop_size": (int, 64, "head crop side in pixels"),
    "map_size": (int, 64, "head map side in pixels"),
    "sigma_scale": (float, 0.5, "head-map blob sigma per head size"),
    "fusion_units": (int, 64, "width of the fusion hidden layer"),
    "dropout_rate": (float, 0.5, "dropout before the final classifier"),
    "lr": (float, 0.03, "SGD learning rate"),
    "lr_decay": (float, 0.85, "per-epoch learning-rate decay factor"),
    "momentum": (float, 0.9, "SGD momentum"),
    "batch_size": (int, 32, "training batch size"),
    "epochs": (int, 6, "training epochs"),
    "curriculum_period": (int, 2, "epochs per difficulty step"),
    "synth_only_epochs": (int, 2, "warm-up epochs before real data"),
    "augment_shift": (int, 2, "max augmentation shift in pixels"),
    "augment_brightness": (float, 0.10, "max augmentation brightness"),
    "augment_zoom": (float, 0.05, "max augmentation zoom deviation"),
    "pretrain_lr": (float, 0.1, "pose pretraining learning rate"),
    "pretrain_epochs": (int, 4, "pose pretraining epochs"),
    "tau_deg": (float, 15.0, "mutual-gaze cone half-angle in degrees"),
    "frame_width": (int, 640, "synthetic frame width"),
    "frame_height": (int, 480, "synthetic frame height"),
    "traj_sigma": (float, 25.0, "head-map trajectory wobble in pixels"),
    "bystander_prob": (float, 0.3, "chance of bystander heads per pair"),
}

SUBCOMMANDS = ("track", "synth", "pretrain", "train", "score", "eval",
               "social", "gradcheck")


def _schema_epilog():
    lines = ["configuration keys (JSON file via --config; defaults shown):"]
    for key, (typ, default, help_text) in CONFIG_SCHEMA.items():
        lines.append(f"  {key} ({typ.__name__}, default {default!r}): "
                     f"{help_text}")
    return "\n".join(lines)


def load_run_config(path=None, overrides=None):
    """Defaults, then config file, then overrides; unknown keys fail."""
    cfg = {key: default for key, (_, default, _) in CONFIG_SCHEMA.items()}
    layers = []
    if path is not None:
        with open(path, "r", encoding="utf-8") as f:
            try:
                loaded = json.load(f)
            except json.JSONDecodeError as e:
                raise ValueError(f"{path}: not valid JSON ({e})")
        if not isinstance(loaded, dict):
            raise ValueError(f"{path}: config must be a JSON object")
        layers.append((str(path), loaded))
    if overrides:
        layers.append(("command line", overrides))
    for origin, layer in layers:
        for key, value in layer.items():
            if key not in CONFIG_SCHEMA:
                raise ValueError(f"{origin}: unknown config key {key!r}")
            typ = CONFIG_SCHEMA[key][0]
            if typ is int and isinstance(value, float) \
                    and not value.is_integer():
                raise ValueError(f"{origin}: {key} must be an integer, "
                                 f"got {value}")
            try:
                cfg[key] = typ(value)
            except (TypeError, ValueError):
                raise ValueError(f"{origin}: {key} must be "
                                 f"{typ.__name__}, got {value!r}")
    return cfg


def echo_config(cfg, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "config.json", "w", encoding="utf-8") as f:
        json.dump(cfg, f, indent=2, sort_keys=True)
        f.write("\n")


def _model_config(cfg, window_length=None, map_frames=None):
    return ModelConfig(
        window_length=cfg["window_length"] if window_length is None
        else window_length,
        map_frames=cfg["map_frames"] if map_frames is None else map_frames,
        crop_size=cfg["crop_size"], map_size=cfg["map_size"],
        fusion_units=cfg["fusion_units"],
        dropout_rate=cfg["dropout_rate"],
    )


def _synth_config(cfg):
    return SynthConfig(
        oracle=OracleConfig(tau_deg=cfg["tau_deg"]),
        window_length=cfg["window_length"], map_frames=cfg["map_frames"],
        crop_size=cfg["crop_size"], map_size=cfg["map_size"],
        frame_width=cfg["frame_width"], frame_height=cfg["frame_height"],
        traj_sigma=cfg["traj_sigma"],
        bystander_prob=cfg["bystander_prob"],
        map_sigma_scale=cfg["sigma_scale"],
    )


def _train_config(cfg):
    return TrainConfig(
        lr=cfg["lr"], lr_decay=cfg["lr_decay"], momentum=cfg["momentum"],
        batch_size=cfg["batch_size"], epochs=cfg["epochs"],
        seed=cfg["seed"], curriculum_period=cfg["curriculum_period"],
        synth_only_epochs=cfg["synth_only_epochs"],
        augment_shift=cfg["augment_shift"],
        augment_brightness=cfg["augment_brightness"],
        augment_zoom=cfg["augment_zoom"],
        pretrain_lr=cfg["pretrain_lr"],
        pretrain_epochs=cfg["pretrain_epochs"],
    )


# -- subcommands --------------------------------------------------------------

def cmd_track(args, cfg):
    records = formats.read_jsonl(args.detections, formats.DETECTIONS_FORMAT)
    detections = [formats.record_to_detection(r) for r in records]
    tracks = link_detections(
        detections, iou_threshold=cfg["iou_threshold"],
        max_missed=cfg["max_missed"], min_length=cfg["min_track_length"])
    out = Path(args.out)
    echo_config(cfg, out)
    formats.write_jsonl(out / "tracks.jsonl", formats.TRACKS_FORMAT,
                        (formats.track_to_record(t) for t in tracks))
    print(f"linked {len(detections)} detections into {len(tracks)} tracks")
    return 0


def cmd_synth(args, cfg):
    out = Path(args.out)
    echo_config(cfg, out)
    generate_dataset(args.pos, args.neg, cfg["seed"], _synth_config(cfg),
                     out)
    print(f"wrote {args.pos}+{args.neg} pairs under {out}/train and "
          f"{out}/val")
    return 0


def cmd_pretrain(args, cfg):
    out = Path(args.out)
    echo_config(cfg, out)
    net = MutualGazeNet(_model_config(cfg), seed=cfg["seed"])
    dataset = SyntheticHeadDataset(args.n, cfg["seed"], _synth_config(cfg))
    history = pretrain_headpose(net, dataset, _train_config(cfg))
    net.save(out / "pretrain.ckpt")
    write_history(out / "pretrain_history.csv", history)
    print(f"pretrained on {args.n} heads; final loss "
          f"{history[-1]['loss']:.4f}")
    return 0


def cmd_train(args, cfg):
    out = Path(args.out)
    echo_config(cfg, out)
    net = MutualGazeNet(_model_config(cfg), seed=cfg["seed"])
    if args.init is not None:
        tensors, _ = load_checkpoint(args.init)
        net.load_state_dict(tensors)
    data = Path(args.data)
    real = args.real if args.real is None else Path(args.real)
    history = train_laeo(
        net, data / "train", data / "val", _train_config(cfg),
        real_pairs=real, history_path=out / "history.csv")
    net.save(out / "model.ckpt")
    val_rows = [r for r in history if r["split"] == "val"]
    print(f"final val AP={val_rows[-1]['ap']:.4f}")
    return 0


def cmd_score(args, cfg):
    net, _ = MutualGazeNet.load(args.model)
    out = Path(args.out)
    echo_config(cfg, out)
    store = PairStore(args.data)
    records = []
    batch = 64
    for lo in range(0, len(store), batch):
        positions = np.arange(lo, min(lo + batch, len(store)))
        left, right, maps, _ = store.load(positions)
        scores = net.score_pairs(left, right, maps)
        for i, s in zip(positions, scores):
            meta = store.meta(int(i))
            records.append({
                "video_id": meta["video_id"], "frame": meta["frame"],
                "box_a": list(meta["box_left"]),
                "box_b": list(meta["box_right"]),
                "score": float(s),
            })
    formats.write_jsonl(out / "scores.jsonl", formats.SCORES_FORMAT,
                        records)
    print(f"scored {len(records)} pairs")
    return 0


def cmd_eval(args, cfg):
    protocol = Protocol(cfg["protocol"])
    score_records = formats.read_jsonl(args.scores, formats.SCORES_FORMAT)
    predictions = [
        ScoredPair(r["video_id"], r["frame"], BoundingBox(*r["box_a"]),
                   BoundingBox(*r["box_b"]), r["score"])
        for r in score_records
    ]
    ann_records = formats.read_jsonl(args.annotations,
                                     formats.ANNOTATIONS_FORMAT)
    annotations = [formats.record_to_annotation(r) for r in ann_records]
    report = evaluate_frames(predictions, annotations, protocol)
    print(f"AP={report.ap:.4f}")
    if args.out is not None:
        out = Path(args.out)
        echo_config(cfg, out)
        formats.write_csv(out / "pr_curve.csv",
                          ("threshold", "precision", "recall"),
                          report.pr_rows())
        with open(out / "metrics.json", "w", encoding="utf-8") as f:
            json.dump({"ap": round(report.ap, 6),
                       "protocol": protocol.value}, f, sort_keys=True)
            f.write("\n")
    return 0


def cmd_social(args, cfg):
    track_records = formats.read_jsonl(args.tracks, formats.TRACKS_FORMAT)
    tracks = [formats.record_to_track(r) for r in track_records]
    charmap = {
        r["track_id"]: r["character"]
        for r in formats.read_jsonl(args.charmap, formats.CHARMAP_FORMAT)
    }
    shots = [
        ShotRecord(r["shot_id"], r["video_id"], r["first_frame"],
                   r["last_frame"])
        for r in formats.read_jsonl(args.shots, formats.SHOTS_FORMAT)
    ]
    table = social.PairScoreTable()
    by_video = {}
    for t in tracks:
        by_video.setdefault(t.video_id, []).append(t)
    for r in formats.read_jsonl(args.scores, formats.SCORES_FORMAT):
        ta = _track_for_box(by_video.get(r["video_id"], ()), r["frame"],
                            r["box_a"], args.scores)
        tb = _track_for_box(by_video.get(r["video_id"], ()), r["frame"],
                            r["box_b"], args.scores)
        table.add(ta.track_id, tb.track_id, r["frame"], r["score"])
    labels = {}
    for r in formats.read_jsonl(args.labels, formats.ANNOTATIONS_FORMAT):
        chars = r.get("chars")
        if not isinstance(chars, (list, tuple)) or len(chars) != 2:
            raise ValueError(f"{args.labels}: shot annotation needs a "
                             f"2-character chars list, got {chars!r}")
        labels[(r["shot_id"], chars[0], chars[1])] = r["label"]

    rows = social.episode_rows(shots, tracks, charmap, table, labels,
                               seed=cfg["seed"])
    out = Path(args.out)
    echo_config(cfg, out)
    social.write_rows_csv(out / "rows.csv", rows)
    social.write_dot(out / "graph.dot", social.friendness(rows))
    for method in social.METHODS:
        ap = social.interaction_ap(rows, method=method)
        print(f"{method} AP={ap:.4f}")
    return 0


def _track_for_box(tracks, frame, box, origin):
    target = np.asarray(box, dtype=np.float64)
    for t in tracks:
        if t.alive_at(frame) and np.allclose(
                np.asarray(t.box_at(frame).as_tuple()), target, atol=1e-3):
            return t
    raise ValueError(f"{origin}: no track owns box {box} at frame {frame}")


def cmd_gradcheck(args, cfg):
    if args.tiny:
        config = ModelConfig(
            window_length=2, map_frames=2, crop_size=32, map_size=32,
            head_channels=(2, 2, 2, 2, 2), map_channels=(2, 2, 2, 2),
            fusion_units=8)
    else:
        config = _model_config(cfg)
    net = MutualGazeNet(config, seed=cfg["seed"]).copy_as_float64()
    rng = np.random.default_rng(cfg["seed"])
    # Freshly initialized biases are exactly zero, which parks dead
    # activations right on the relu kink where a central difference is
    # undefined; nudge every parameter to a generic point first.
    for p in net.params:
        p.data = p.data + rng.uniform(-0.05, 0.05, size=p.data.shape)
    n = 2
    shape = (n, config.window_length, config.crop_size, config.crop_size, 3)
    mshape = (n, config.map_frames, config.map_size, config.map_size, 3)
    left = rng.uniform(size=shape)
    right = rng.uniform(size=shape)
    maps = rng.uniform(size=mshape)
    labels = np.array([1, 0])
    angles = rng.uniform(-60.0, 60.0, size=(n, 3))

    def build_loss():
        return laeo_loss(net.forward(left, right, maps), labels) \
            + head_pose_loss(net.pose_output(left), angles)

    errors = gradient_check(build_loss, net.params, max_entries=4, rng=rng)
    worst = max(errors.values())
    print(f"max relative error = {worst:.3e}")
    return 0 if worst <= 1e-4 else 1


# -- argument parsing ---------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    """argparse, but argument problems exit 1 like other validation."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser():
    parser = _Parser(
        prog="mutualgaze",
        description="Mutual-gaze detection pipeline: tracking, synthetic "
                    "data, training, scoring, evaluation, social analysis.",
        epilog=_schema_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", metavar="subcommand")

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text,
                           epilog=_schema_epilog(),
                           formatter_class=
                           argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", help="JSON config file (flat keys)")
        p.add_argument("--seed", type=int, help="override the config seed")
        return p

    p = add("track", "link head detections into tracks")
    p.add_argument("--detections", required=True)
    p.add_argument("--out", required=True)

    p = add("synth", "generate a labeled synthetic pair dataset")
    p.add_argument("--pos", type=int, required=True)
    p.add_argument("--neg", type=int, required=True)
    p.add_argument("--out", required=True)

    p = add("pretrain", "pretrain the head branch on pose labels")
    p.add_argument("--n", type=int, default=512,
                   help="number of pretraining heads")
    p.add_argument("--out", required=True)

    p = add("train", "train the pair classifier on a synth dataset")
    p.add_argument("--data", required=True,
                   help="dataset directory with train/ and val/")
    p.add_argument("--init", help="checkpoint to initialize from")
    p.add_argument("--real", help="optional second corpus directory")
    p.add_argument("--out", required=True)

    p = add("score", "score a sample container with a trained model")
    p.add_argument("--data", required=True, help="sample container")
    p.add_argument("--model", required=True, help="model checkpoint")
    p.add_argument("--out", required=True)

    p = add("eval", "evaluate scores against annotations")
    p.add_argument("--scores", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--protocol",
                   choices=["frame_iou", "head_in_human"])
    p.add_argument("--out")

    p = add("social", "average-LAEO, baselines, and the friend-ness graph")
    p.add_argument("--tracks", required=True)
    p.add_argument("--charmap", required=True)
    p.add_argument("--shots", required=True)
    p.add_argument("--scores", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)

    p = add("gradcheck", "finite-difference check of the network")
    p.add_argument("--tiny", action="store_true",
                   help="check a 2-frame, 2-channel model")

    return parser


HANDLERS = {
    "track": cmd_track, "synth": cmd_synth, "pretrain": cmd_pretrain,
    "train": cmd_train, "score": cmd_score, "eval": cmd_eval,
    "social": cmd_social, "gradcheck": cmd_gradcheck,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return 1
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "protocol", None) is not None:
        overrides["protocol"] = args.protocol
    try:
        cfg = load_run_config(args.config, overrides)
        return HANDLERS[args.command](args, cfg)
    except (ValueError, RuntimeError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
