"""Command-line front end.

Commands: gen-data, eval-equiv, train, sr, gradcheck, defaults.  Angles are
accepted in degrees and converted to radians internally.  Exit codes:
1 usage, 2 I/O, 3 data/checkpoint, 4 numeric (non-finite).
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys

import numpy as np

from . import __version__, config
from .data import dataset_count, gen_synthetic, read_image, write_image
from .errors import (
    CheckpointError,
    ConfigError,
    EquisrError,
    EvaluationError,
    ParseError,
)
from .image import Image
from .metrics import aggregate, equivariance_error, sweep, sweep_image, SWEEP_HEADER
from .training import load_checkpoint, loss_log_csv, save_checkpoint, train

EXIT_USAGE = 1
EXIT_IO = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    p = _Parser(
        prog="equisr",
        description="Rotation-equivariant arbitrary-scale super-resolution toolkit.",
        epilog="config defaults (also written by `equisr defaults`):\n"
               + config.defaults_json(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--version", action="version", version=f"equisr {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("gen-data", parents=[], help="materialize a synthetic corpus as PPM files")
    d.add_argument("--config", required=True, help="run config JSON (data section used)")
    d.add_argument("--out", required=True, help="output directory")

    e = sub.add_parser("eval-equiv", help="evaluate equivariance errors over a grid")
    e.add_argument("--config", required=True, help="run config JSON (model + eval sections)")
    e.add_argument("--ckpt", default=None, help="checkpoint manifest (random init when absent)")
    e.add_argument("--out", required=True, help="output CSV path")
    e.add_argument("--error-maps", default=None, help="directory for per-case error-map PGMs")

    t = sub.add_parser("train", help="train a model on the configured corpus")
    t.add_argument("--config", required=True)
    t.add_argument("--out", required=True, help="output directory (checkpoint + loss log)")

    s = sub.add_parser("sr", help="super-resolve one PPM image")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--scale", type=float, required=True)
    s.add_argument("--out", required=True)

    g = sub.add_parser("gradcheck", help="run the finite-difference gradient suite")
    g.add_argument("--module", default=None,
                   help="restrict to one module (diff, filters, inr, encoder)")

    f = sub.add_parser("defaults", help="write the default config as JSON")
    f.add_argument("--out", default=None, help="output path (stdout when absent)")
    return p


def _cmd_gen_data(args) -> int:
    doc = config.load_config(args.config)
    spec = config.dataset_spec(doc)
    os.makedirs(args.out, exist_ok=True)
    rows = []
    for i in range(dataset_count(spec)):
        name = f"img_{i:05d}.ppm"
        write_image(os.path.join(args.out, name), gen_synthetic(spec, i))
        rows.append((i, name))
    buf = io.StringIO()
    buf.write(f"# equisr {__version__}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["index", "file", "kind", "size", "seed"])
    for i, name in rows:
        writer.writerow([i, name, spec.kind, spec.size, spec.seed])
    with open(os.path.join(args.out, "manifest.csv"), "w") as fh:
        fh.write(buf.getvalue())
    print(f"wrote {len(rows)} images + manifest.csv to {args.out}")
    return 0


def _cmd_eval_equiv(args) -> int:
    doc = config.load_config(args.config)
    ev = doc["eval"]
    angles_deg = list(ev["angles_deg"])
    if not angles_deg:
        raise ConfigError("eval.angles_deg must be non-empty")
    angles = [np.deg2rad(a) for a in angles_deg]
    mask = "auto" if ev["mask"] == "auto" else None
    cfg = config.model_config(doc)
    data = config.dataset_spec(doc)
    model = load_checkpoint(args.ckpt) if args.ckpt else None
    if model is not None:
        cfg = model.cfg
    csv_text = sweep(
        [(cfg.variant if cfg.t > 1 else f"{cfg.variant}-plain", cfg)],
        angles, list(ev["scales"]), list(ev["resolutions"]),
        seeds=list(ev["seeds"]), data=data, mask=mask, eps=ev["eps"], model=model,
    )
    with open(args.out, "w") as fh:
        fh.write(csv_text)
    print(f"wrote {args.out}")

    if args.error_maps:
        os.makedirs(args.error_maps, exist_ok=True)
        side_rows = []
        from .inr import build_model
        for angle_deg, angle in zip(angles_deg, angles):
            for scale in ev["scales"]:
                for res in ev["resolutions"]:
                    for seed in ev["seeds"]:
                        m = model if model is not None else build_model(cfg, seed=seed)
                        img = sweep_image(data, res, seed)
                        entry = equivariance_error(m, img, angle, scale,
                                                   eps=ev["eps"], mask=mask)
                        emap = entry.err_map.data[:, :, 0]
                        peak = float(emap.max())
                        scaled = emap / peak if peak > 0 else emap
                        name = f"err_a{angle_deg:g}_s{scale:g}_r{res}_seed{seed}.pgm"
                        write_image(os.path.join(args.error_maps, name),
                                    Image(scaled[:, :, None]))
                        side_rows.append((name, angle_deg, scale, res, seed, peak))
        with open(os.path.join(args.error_maps, "scales.csv"), "w") as fh:
            fh.write(f"# equisr {__version__}\n")
            fh.write("file,angle_deg,scale,resolution,seed,max_abs_error\n")
            for row in side_rows:
                fh.write(",".join(str(v) for v in row) + "\n")
        print(f"wrote {len(side_rows)} error maps to {args.error_maps}")
    return 0


def _cmd_train(args) -> int:
    doc = config.load_config(args.config)
    cfg = config.model_config(doc)
    data = config.dataset_spec(doc)
    tr = doc["train"]
    result = train(cfg, data, steps=int(tr["steps"]), lr=float(tr["lr"]),
                   decay_steps=int(tr["decay_steps"]), batch=int(tr["batch"]),
                   patch=int(tr["patch"]), seed=int(tr["seed"]))
    os.makedirs(args.out, exist_ok=True)
    ckpt_json, _ = save_checkpoint(os.path.join(args.out, "ckpt"), result.model)
    with open(os.path.join(args.out, "loss.csv"), "w") as fh:
        fh.write(loss_log_csv(result.loss_rows))
    final = result.loss_rows[-1][1]
    print(f"trained {tr['steps']} steps, final loss {final:.6f}; checkpoint at {ckpt_json}")
    return 0


def _cmd_sr(args) -> int:
    if args.scale < 1.0:
        raise ConfigError(f"--scale must be >= 1, got {args.scale}")
    model = load_checkpoint(args.ckpt)
    img = read_image(args.infile)
    from .inr import super_resolve
    out = super_resolve(model, img, args.scale)
    write_image(args.out, Image(np.clip(out.data, 0.0, 1.0)))
    print(f"wrote {out.w}x{out.h} image to {args.out}")
    return 0


def _cmd_gradcheck(args) -> int:
    from .checks import run_all
    try:
        results = run_all(args.module)
    except KeyError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    failed = 0
    for r in results:
        status = "PASS" if r.ok else "FAIL"
        print(f"{status} {r.name:28s} max_rel_err={r.max_rel_err:.3e} tol={r.tol:.0e}")
        failed += 0 if r.ok else 1
    print(f"{len(results) - failed}/{len(results)} gradient checks passed")
    return 0 if failed == 0 else EXIT_NUMERIC


def _cmd_defaults(args) -> int:
    text = config.defaults_json()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "eval-equiv": _cmd_eval_equiv,
    "train": _cmd_train,
    "sr": _cmd_sr,
    "gradcheck": _cmd_gradcheck,
    "defaults": _cmd_defaults,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (ParseError, CheckpointError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except EvaluationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except EquisrError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
