"""Command-line entry point wiring the pipeline."""

import argparse
import os
import sys

import numpy as np

from . import body, metrics, motions, refine, rotmath, stream, synth, tracker
from .combos import Location, LocationMask, enumerate_location_sets
from .net import (ModelConfig, TrainConfig, TrainStream, OnlinePoseEstimator,
                  decode_sequence, evaluate_online, init_weights, load_weights,
                  save_weights, train)

SEED_ENV = "SPARSEPOSE_SEED"


def _seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    return int(os.environ.get(SEED_ENV, "0"))


def load_config(path) -> dict:
    """key=value config file; '#' starts a comment."""
    out = {}
    if path is None:
        return out
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key] = value
    return out


def model_config_from(cfg: dict) -> ModelConfig:
    def geti(key, default):
        return int(cfg.get(key, default))
    return ModelConfig(
        input_dim=geti("model.input_dim", 60),
        embed_dim=geti("model.embed_dim", 512),
        hidden_dim=geti("model.hidden_dim", 512),
        layers=geti("model.layers", 2),
        bidirectional=cfg.get("model.bidirectional", "true").lower() != "false",
        output_dim=geti("model.output_dim", 144),
    )


def train_config_from(cfg: dict) -> TrainConfig:
    ms = cfg.get("train.max_steps")
    return TrainConfig(
        batch=int(cfg.get("train.batch", 256)),
        lr=float(cfg.get("train.lr", 3e-4)),
        window=int(cfg.get("train.window", 125)),
        epochs=int(cfg.get("train.epochs", 1)),
        max_steps=int(ms) if ms is not None else None,
    )


def _parse_mask(text: str) -> LocationMask:
    mask = LocationMask(int(text, 0))
    if mask not in enumerate_location_sets():
        raise ValueError(f"mask {text} is not one of the 24 canonical combinations")
    return mask


def cmd_genmotion(args) -> int:
    seq = motions.generate(args.kind, args.seconds, args.fps, _seed(args))
    synth.save_motion(args.out, seq)
    print(f"wrote {len(seq)} frames @{seq.fps:g}fps ({args.kind}) to {args.out}")
    return 0


def cmd_synth(args) -> int:
    seq = synth.load_motion(args.motion)
    if abs(seq.fps - args.fps) > 1e-9:
        seq = synth.resample(seq, args.fps)
    masks = None if args.combos == "all" else [_parse_mask(args.combos)]
    ds = synth.build_dataset(seq, masks=masks)
    synth.save_dataset(args.out, ds)
    n_streams = len(ds.streams())
    print(f"wrote {n_streams} stream(s) x {len(seq)} frames = {len(ds)} samples "
          f"to {args.out}")
    return 0


def _dataset_to_streams(ds: synth.ImuDataset) -> list[TrainStream]:
    if ds.poses is None:
        raise ValueError("dataset has no paired poses; synthesize with poses to train")
    streams = []
    for mask, span in ds.streams():
        frames = ds.frames[span]
        inputs = synth.frames_to_inputs(frames, mask)
        gt_rot = rotmath.quat_to_matrix(ds.poses[span])
        streams.append(TrainStream(inputs, gt_rot))
    return streams


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    model_cfg = model_config_from(cfg)
    train_cfg = train_config_from(cfg)
    ds = synth.load_dataset(args.data)
    streams = _dataset_to_streams(ds)
    seed = _seed(args)

    def progress(step, loss_val):
        if step % 10 == 0 or step == 1:
            print(f"step {step}: loss {loss_val:.6f}")

    weights, history = train(streams, model_cfg, train_cfg, seed=seed,
                             progress=progress if args.verbose else None)
    save_weights(args.out, weights)
    for epoch, loss_val in enumerate(history, 1):
        print(f"epoch {epoch}: train loss {loss_val:.6f}")
    print(f"saved {weights.total_params()} parameters to {args.out}")
    return 0


def _measured_orientations(frame: synth.ImuFrame, mask: LocationMask) -> dict:
    out = {}
    for loc in mask:
        if frame.present[int(loc)]:
            out[loc] = rotmath.nearest_rotation(frame.orient[int(loc)])
    return out


def cmd_eval(args) -> int:
    weights = load_weights(args.weights)
    ds = synth.load_dataset(args.data)
    gt_seq = synth.load_motion(args.gt)
    gt_rot_full = gt_seq.local_rot_matrices()
    skel = body.default_skeleton()
    mesh = body.default_vertex_set(skel)
    pairs = []
    for mask, span in ds.streams():
        frames = ds.frames[span]
        if len(frames) > len(gt_rot_full):
            raise ValueError("dataset stream longer than ground-truth motion")
        inputs = synth.frames_to_inputs(frames, mask)
        pred6 = evaluate_online(weights, inputs)
        pred = decode_sequence(pred6)
        if args.refine:
            rcfg = refine.RefineConfig()
            for t in range(len(pred)):
                est = body.PoseEstimate(rotmath.matrix_to_rot6d(pred[t]), pred[t])
                measured = _measured_orientations(frames[t], mask)
                eff_mask = LocationMask.of(*measured.keys())
                est = refine.refine(est, measured, eff_mask, skel, rcfg)
                pred[t] = est.local_rot
        pairs.append((pred, gt_rot_full[:len(pred)]))
    report = metrics.evaluate_streams(pairs, skel, mesh, ds.fps)
    print(metrics.format_report(report))
    if args.report:
        with open(args.report, "w") as f:
            f.write(metrics.report_to_kv(report))
        print(f"\nwrote machine-readable report to {args.report}")
    return 0


def _pose_stream_writer(out_path, fps):
    collected = []

    def push(est: body.PoseEstimate):
        collected.append(rotmath.matrix_to_quat(est.local_rot))

    def close():
        T = len(collected)
        seq = synth.MotionSequence(fps, np.zeros((T, 3)), np.asarray(collected))
        synth.save_motion(out_path, seq)
        return T

    return push, close


def cmd_infer(args) -> int:
    weights = load_weights(args.weights)
    push_pose, close = _pose_stream_writer(args.out, 25.0)
    smoother = synth.StreamingSmoother()
    estimator = OnlinePoseEstimator(weights)

    if args.replay:
        ds = synth.load_dataset(args.replay)
        result = stream.replay_and_aggregate(ds)
        for frame, mask in zip(result.frames, result.masks):
            sm = smoother.push(frame)
            push_pose(estimator.push(synth.scale_and_flatten(sm, mask)))
    else:
        host, port = args.stream.rsplit(":", 1)
        cfg = stream.AggregatorConfig()
        prefs = tracker.UserPrefs()
        agg = stream.Aggregator(cfg, tracker=tracker.Tracker(prefs))
        next_tick = None
        dt = 1.0 / cfg.tick_hz
        for frame in stream.read_stream(host, int(port)):
            t = frame.timestamp
            if next_tick is None:
                next_tick = t
            while t >= next_tick:
                tick_frame, mask = agg.tick(next_tick)
                sm = smoother.push(tick_frame)
                push_pose(estimator.push(synth.scale_and_flatten(sm, mask)))
                next_tick += dt
            agg.ingest(frame)
    n = close()
    print(f"wrote {n} pose frames to {args.out}")
    return 0


def cmd_track(args) -> int:
    with open(args.scenario) as f:
        text = f.read()
    rows = tracker.run_scenario(text)
    for t, ds_state, mask in rows:
        print(f"t={t:7.3f}  phone={ds_state.phone.value:12s} "
              f"watch={ds_state.watch.value:11s} earbuds={ds_state.earbuds.value:17s} "
              f"mask={mask} (id {mask.bits:#07b})")
    print(f"{len(rows)} transitions")
    return 0


def cmd_replay(args) -> int:
    ds = synth.load_dataset(args.data)
    print(f"serving {len(ds)} frames on port {args.port} at {args.speed:g}x")
    stream.serve_replay(ds, args.port, args.speed)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sparsepose",
                                description="sparse-IMU full-body pose toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("genmotion", help="generate a procedural motion file")
    g.add_argument("--kind", choices=motions.KINDS, required=True)
    g.add_argument("--seconds", type=float, required=True)
    g.add_argument("--fps", type=float, default=25.0)
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_genmotion)

    s = sub.add_parser("synth", help="synthesize an IMU dataset from motion")
    s.add_argument("--motion", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--combos", default="all",
                   help="'all' for the 24 combinations or a single mask id (e.g. 0b10000)")
    s.add_argument("--fps", type=float, default=25.0)
    s.set_defaults(func=cmd_synth)

    t = sub.add_parser("train", help="train the pose network")
    t.add_argument("--data", required=True)
    t.add_argument("--config")
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int)
    t.add_argument("--verbose", action="store_true")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate weights against ground truth")
    e.add_argument("--weights", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--refine", action="store_true")
    e.add_argument("--report", help="also write key=value report to this path")
    e.set_defaults(func=cmd_eval)

    i = sub.add_parser("infer", help="run online inference over a stream or replay")
    i.add_argument("--weights", required=True)
    src = i.add_mutually_exclusive_group(required=True)
    src.add_argument("--replay", help="IMU dataset file to replay")
    src.add_argument("--stream", help="host:port of a live frame server")
    i.add_argument("--out", required=True)
    i.set_defaults(func=cmd_infer)

    k = sub.add_parser("track", help="replay a device-event scenario")
    k.add_argument("--scenario", required=True)
    k.set_defaults(func=cmd_track)

    r = sub.add_parser("replay", help="serve a dataset as live wire streams")
    r.add_argument("--data", required=True)
    r.add_argument("--speed", type=float, default=1.0)
    r.add_argument("--port", type=int, default=7077)
    r.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
