"""Command-line interface: train, infer, eval, spectrum, bench, synth."""

import argparse
import logging
import sys
from pathlib import Path

from . import bench, checkpoint, config, data, infer, io, metrics, spectrum
from .train import train

log = logging.getLogger("freqsal")


def _load_config(args):
    cfg = config.load(args.config) if args.config else config.Config()
    if args.seed is not None:
        cfg.train.seed = args.seed
        cfg.model.seed = args.seed
    return cfg


def cmd_train(args):
    cfg = _load_config(args)
    if args.data:
        cfg.data.root = args.data
    if not cfg.data.root:
        raise SystemExit("no dataset: set [data] root in the config or pass --data")
    out = Path(args.out or "run")
    res = train(cfg, out, max_steps=args.max_steps, log=log.info if args.verbose else None)
    config.dump(cfg, out / "config.ini")
    print(f"{res.steps} steps, final loss {res.history[-1]['total']:.6g}, checkpoint {res.checkpoint}")


def cmd_infer(args):
    _, model = checkpoint.load(args.checkpoint)
    written = infer.run(model, args.input, args.out or "predictions", strict=args.strict)
    print(f"wrote {len(written)} saliency and edge maps to {args.out or 'predictions'}")


def cmd_eval(args):
    rows, _ = infer.evaluate_dirs(args.pred, args.gt, args.out)
    s = metrics.summary(rows)
    print(f"images {s['images']}  MAE {s['mae']:.4f}  maxF {s['maxF']:.4f}")
    skipped = [r["id"] for r in rows if not r["valid"]]
    if skipped:
        print(f"maxF undefined (empty ground truth) for: {', '.join(skipped)}")


def cmd_spectrum(args):
    out = args.out or "spectrum"
    if args.feature:
        if not (args.checkpoint and args.rgb and args.thermal):
            raise SystemExit("--feature needs --checkpoint, --rgb and --thermal")
        _, model = checkpoint.load(args.checkpoint)
        size = model.cfg.input_size
        rgb = data.resize(io.load_rgb(args.rgb), size)[None]
        thermal = data.resize(io.load_gray(args.thermal)[None], size)[None]
        plane = spectrum.feature_plane(model, rgb, thermal, args.feature, args.channel)
        stem = f"{args.feature}_c{args.channel}"
    elif args.image:
        plane, stem = spectrum.image_plane(args.image), Path(args.image).stem
    else:
        raise SystemExit("give --image, or --feature with --checkpoint/--rgb/--thermal")
    spectrum.dump(plane, out, stem)
    print(f"wrote {stem}_amplitude.pgm, {stem}_phase.pgm and {stem}.csv to {out}")


def cmd_bench(args):
    sizes = [int(s) for s in args.sizes.split(",")]
    out = args.out or "bench.csv"
    rows = bench.run(sizes, channels=args.channels, repeats=args.repeats, out=out)
    for r in rows:
        print(f"{r['size']:>5}  spectral {r['spectral_seconds']:.4f}s {r['spectral_peak_bytes']}B  "
              f"quadratic {r['quadratic_seconds']:.4f}s [{r['quadratic_status']}]  "
              f"similarity {r['similarity_elements']}")
    print(f"wrote {out}")


def cmd_synth(args):
    idx = data.write_synthetic(args.out or "synthetic", args.count, args.size,
                               args.seed if args.seed is not None else 0)
    print(f"wrote {len(idx)} triples to {args.out or 'synthetic'}")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run configuration")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", help="output file or directory")
    common.add_argument("--strict", action="store_true", help="fail instead of resizing mismatched inputs")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="freqsal", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", parents=[common], help="train a model")
    t.add_argument("--data", help="dataset root (overrides the config)")
    t.add_argument("--max-steps", type=int, help="stop after this many optimiser steps")
    t.set_defaults(fn=cmd_train)

    i = sub.add_parser("infer", parents=[common], help="predict saliency and edge maps")
    i.add_argument("checkpoint")
    i.add_argument("input", help="directory with rgb/ and thermal/ folders")
    i.set_defaults(fn=cmd_infer)

    e = sub.add_parser("eval", parents=[common], help="score predicted maps (MAE, max F, PR curve)")
    e.add_argument("pred", help="directory of predicted <id>.pgm maps")
    e.add_argument("gt", help="directory of ground-truth <id>.pgm masks")
    e.set_defaults(fn=cmd_eval)

    s = sub.add_parser("spectrum", parents=[common], help="dump amplitude/phase spectra")
    s.add_argument("--image", help="PGM or PPM image")
    s.add_argument("--checkpoint")
    s.add_argument("--rgb")
    s.add_argument("--thermal")
    s.add_argument("--feature", help=f"one of {', '.join(spectrum.FEATURE_NAMES)}")
    s.add_argument("--channel", type=int, default=0)
    s.set_defaults(fn=cmd_spectrum)

    b = sub.add_parser("bench", parents=[common], help="spectral vs quadratic mixing cost")
    b.add_argument("--sizes", default="32,64,128")
    b.add_argument("--channels", type=int, default=16)
    b.add_argument("--repeats", type=int, default=5)
    b.set_defaults(fn=cmd_bench)

    y = sub.add_parser("synth", parents=[common], help="write a synthetic RGB-T dataset")
    y.add_argument("--count", type=int, default=8)
    y.add_argument("--size", type=int, default=64)
    y.set_defaults(fn=cmd_synth)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args.fn(args)
    except (ValueError, KeyError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
