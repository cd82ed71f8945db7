"""``vbtsim`` command-line interface."""
from __future__ import annotations

import argparse
import csv
import io
import math
import shutil
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .contact import DEFAULT_SHAPES, INDENTER_KINDS, ContactPose
from .core import Mechanism, Severity, Variant, errors_only, preset, validate_config
from .cost import batch_plan, calibrate, load_table, record_for, sweep, tray_capacity, unit_metrics
from .errors import VbtsError
from .formats import (
    atomic_write_text,
    load_config,
    load_layout,
    read_image,
    save_config,
    save_layout,
    write_correspondences_csv,
    write_features_csv,
    write_mask_png,
    write_pfm,
    write_png,
)
from .markers import RandomArrangement, build_layout, gen_dot_layout, region_for, validate_layout
from .optics import BackgroundScene, ssim
from .perception import FEATURE_NAMES, detect_markers, displacement_overlay, match_markers
from . import pipeline
from .scenes import FABRICS, fabric


class CommandError(Exception):
    """Reported on stderr with exit code 1."""


def _variant(text: str) -> Variant:
    try:
        return Variant.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _config_violations(cfg, layout=None):
    vs = validate_config(cfg)
    if layout is not None:
        vs += validate_layout(layout, cfg)
    return vs


def _require_valid(cfg, layout=None):
    errs = errors_only(_config_violations(cfg, layout))
    if errs:
        raise CommandError("validation failed:\n" + "\n".join(f"  {v}" for v in errs))


def _background(spec: str | None, cfg, seed: int) -> BackgroundScene | None:
    if not spec:
        return None
    if spec.startswith("fabric:"):
        return fabric(spec.split(":", 1)[1], cfg.shape, seed=seed)
    if spec.startswith("gray:"):
        return BackgroundScene(np.full(cfg.shape + (3,), float(spec.split(":", 1)[1])))
    raise CommandError(f"unknown background {spec!r}; use fabric:<{'|'.join(FABRICS)}> or gray:<level>")


# ---------------------------------------------------------------------------
# subcommands

def cmd_preset(args) -> int:
    cfg = preset(args.variant)
    if args.output:
        save_config(cfg, args.output)
        print(f"wrote {args.output}")
    else:
        from .formats import dumps_config
        sys.stdout.write(dumps_config(cfg))
    return 0


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    layout = load_layout(args.layout) if args.layout else None
    vs = _config_violations(cfg, layout)
    for v in vs:
        print(v)
    n_err = sum(v.severity is Severity.error for v in vs)
    print(f"{n_err} error(s), {len(vs) - n_err} warning(s)")
    return 1 if n_err else 0


def cmd_markers(args) -> int:
    cfg = load_config(args.config)
    if cfg.markers is None:
        raise CommandError(f"{cfg.name} has no markers")
    if args.random:
        ms = cfg.markers
        layout = gen_dot_layout(region_for(cfg), RandomArrangement(args.random, args.min_spacing, args.seed),
                                ms.radius_mm, ms.stiffness, color=ms.colors[0])
    else:
        layout = build_layout(cfg)
    _require_valid(cfg, layout)
    save_layout(layout, args.output)
    print(f"wrote {args.output} ({len(layout)} markers, kind {layout.kind.value}, seed {args.seed})")
    return 0


def _write_truth(path: Path, rows: np.ndarray, mask: np.ndarray, meta: dict) -> None:
    buf = io.StringIO()
    for k, v in meta.items():
        buf.write(f"# {k}: {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("marker_id", "layer", "ref_x", "ref_y", "cur_x", "cur_y", "dx", "dy"))
    for r in rows:
        w.writerow([int(r[0]), int(r[1]), *(repr(float(x)) for x in r[2:6]),
                    repr(float(r[4] - r[2])), repr(float(r[5] - r[3]))])
    atomic_write_text(path, buf.getvalue())


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    layout = load_layout(args.layout) if args.layout else None
    if layout is None and cfg.markers is not None:
        layout = build_layout(cfg)
    _require_valid(cfg, layout)
    W, H = cfg.sensing_area
    cx = W / 2 if args.x is None else args.x
    cy = H / 2 if args.y is None else args.y
    pose = ContactPose((cx, cy), args.press, math.radians(args.yaw))
    bg = _background(args.background, cfg, args.seed)
    res = pipeline.simulate(cfg, DEFAULT_SHAPES[args.shape], pose, layout, bg)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    tag = Mechanism(cfg.mechanism).value
    write_png(out / f"frame0_{tag}.png", res.reference)
    write_png(out / f"frame1_{tag}.png", res.contact)
    write_pfm(out / "depth.pfm", res.depth.grid)
    write_pfm(out / "deformation.pfm", res.deformation.u)
    write_mask_png(out / "contact_mask.png", res.contact_mask)
    meta = {"config": cfg.name, "shape": args.shape, "center_mm": f"{cx!r},{cy!r}", "press_mm": repr(args.press),
            "yaw_deg": repr(args.yaw), "seed": args.seed, "contact_pixels": int(res.contact_mask.sum())}
    _write_truth(out / "truth.csv", res.marker_displacements_px(), res.contact_mask, meta)
    print(f"wrote {out} ({len(res.marker_displacements_px())} marker rows, "
          f"{int(res.contact_mask.sum())} contact pixels)")
    return 0


def cmd_dataset(args) -> int:
    cfg = load_config(args.config)
    _require_valid(cfg)
    recipe = pipeline.Recipe(classes=tuple(args.classes), samples_per_class=args.samples_per_class,
                             textures=tuple(args.textures or ()), jitter_mm=args.jitter,
                             press_range=(args.press_min, args.press_max), seed=args.seed)
    out = Path(args.output)
    img_dir = out / "images"
    fresh = not out.exists()
    img_dir.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out / "config.cfg")
    written: list[Path] = [out / "config.cfg"]
    tag = Mechanism(cfg.mechanism).value
    try:
        variant = Variant.parse(cfg.name).value
    except ValueError:
        variant = cfg.name
    rows = []
    try:
        shared_ref = None
        for s in pipeline.iter_samples(cfg, recipe):
            p = s.plan
            if p.texture is None:
                if shared_ref is None:
                    shared_ref = img_dir / f"reference_f0_{tag}.png"
                    write_png(shared_ref, s.reference)
                    written.append(shared_ref)
                ref_path = shared_ref
            else:
                ref_path = img_dir / f"{p.sample_id}_f0_{tag}.png"
                write_png(ref_path, s.reference)
                written.append(ref_path)
            cur_path = img_dir / f"{p.sample_id}_f1_{tag}.png"
            write_png(cur_path, s.contact)
            written.append(cur_path)
            rows.append({
                "sample_id": p.sample_id, "sensor_variant": variant, "indenter_kind": p.kind,
                "texture_id": p.texture or "", "center_x": repr(p.pose.center[0]),
                "center_y": repr(p.pose.center[1]), "press_depth": repr(p.pose.press_depth),
                "yaw": repr(p.pose.yaw), "seed": p.seed, "label_object": p.kind,
                "label_texture": p.texture or "", "ref_image": str(ref_path.relative_to(out)),
                "image": str(cur_path.relative_to(out)),
            })
        # the manifest is the completion marker: written last, atomically
        atomic_write_text(out / "manifest.csv", pipeline.manifest_text(rows, args.seed))
    except BaseException:
        for f in written:
            f.unlink(missing_ok=True)
        if fresh:
            shutil.rmtree(out, ignore_errors=True)
        raise
    print(f"wrote {out / 'manifest.csv'} ({len(rows)} samples, seed {args.seed})")
    return 0


def cmd_track(args) -> int:
    cfg = load_config(args.config)
    if cfg.markers is None:
        raise CommandError(f"{cfg.name} has no markers to track")
    ref, cur = read_image(args.ref), read_image(args.cur)
    colors = pipeline.detection_colors(cfg)
    mp = pipeline.max_pointer_px(cfg)
    corr = match_markers(detect_markers(ref, cfg.markers.kind, colors, max_pointer_px=mp),
                         detect_markers(cur, cfg.markers.kind, colors, max_pointer_px=mp))
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    write_correspondences_csv(out / "correspondences.csv", corr)
    write_png(out / "overlay.png", displacement_overlay(ref, cur, corr, eps=args.eps))
    moved = sum(v.magnitude > args.eps for v in corr)
    print(f"{len(corr)} markers matched, {moved} moved more than {args.eps} px")
    return 0


def cmd_eval(args) -> int:
    manifest = Path(args.manifest)
    rows = pipeline.read_manifest(manifest)
    if not rows:
        raise CommandError("manifest has no samples")
    cfg = load_config(args.config) if args.config else load_config(manifest.parent / "config.cfg")
    feats = []
    ref_cache: dict = {}
    for r in rows:
        ref_path = manifest.parent / r["ref_image"]
        ref = read_image(ref_path)
        bg = fabric(r["texture_id"], cfg.shape, seed=int(r["seed"])) if r["texture_id"] else None
        cur = read_image(manifest.parent / r["image"])
        ref_det = ref_cache.get(ref_path)
        if ref_det is None and cfg.markers is not None:
            ref_det = detect_markers(ref, cfg.markers.kind, pipeline.detection_colors(cfg),
                                     max_pointer_px=pipeline.max_pointer_px(cfg))
            ref_cache[ref_path] = ref_det
        feats.append(pipeline.features_from_images(cfg, ref, cur, bg, ref_det))
    if args.features:
        write_features_csv(args.features, ((r["sample_id"], f.values) for r, f in zip(rows, feats)),
                           FEATURE_NAMES)
    heads = [("object", "label_object")]
    if args.task == "hybrid":
        if not all(r["label_texture"] for r in rows):
            raise CommandError("hybrid evaluation needs a texture label on every sample")
        heads.append(("texture", "label_texture"))
    for name, col in heads:
        rep = pipeline.evaluate(feats, [r[col] for r in rows], args.train_frac, args.seed, args.k, name)
        print(rep.line())
        print(pipeline.format_confusion(rep))
    print(f"split seed {args.seed}, train_frac {args.train_frac}, k {args.k}")
    return 0


def cmd_ssim(args) -> int:
    print(f"{ssim(read_image(args.a), read_image(args.b), args.window):.6f}")
    return 0


def cmd_cost(args) -> int:
    table = load_table(args.table)
    rec = record_for(table, args.sensor)
    um = unit_metrics(rec)
    print(f"{rec.name}: T/V {um['t_per_v']:.3f} min/cm^3, C/V {um['c_per_v']:.3f} GBP/cm^3 "
          f"(single unit {rec.time_single:g} min, £{rec.cost_single:g})")
    calib = calibrate(rec)
    plan = batch_plan(rec, args.capacity, calib)
    print(f"capacity {plan.capacity}/{tray_capacity(rec.variant)}: {plan.avg_time:.2f} min/unit, "
          f"£{plan.avg_cost:.2f}/unit")
    if args.sweep:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("capacity", "avg_time_min", "avg_cost_gbp"))
        for p in sweep(rec, calib):
            w.writerow((p.capacity, repr(p.avg_time), repr(p.avg_cost)))
        atomic_write_text(args.sweep, buf.getvalue())
        print(f"wrote {args.sweep}")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vbtsim", description="Simulate and evaluate 3D-printed tactile sensors.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("preset", help="write the default config of a sensor variant")
    p.add_argument("variant", type=_variant, help=", ".join(v.value for v in Variant))
    p.add_argument("-o", "--output", help="config path (stdout when omitted)")
    p.set_defaults(func=cmd_preset)

    p = sub.add_parser("validate", help="check a config (and optionally a layout)")
    p.add_argument("config")
    p.add_argument("--layout")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("markers", help="generate the marker layout of a config")
    p.add_argument("config")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--random", type=int, metavar="COUNT", help="random dot placement instead of the grid")
    p.add_argument("--min-spacing", type=float, default=2.0, help="random placement spacing, mm")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_markers)

    p = sub.add_parser("simulate", help="render rest and contact frames plus ground truth")
    p.add_argument("config")
    p.add_argument("--layout")
    p.add_argument("--shape", choices=INDENTER_KINDS, default="sphere")
    p.add_argument("--x", type=float, help="contact centre x, mm (default: area centre)")
    p.add_argument("--y", type=float, help="contact centre y, mm (default: area centre)")
    p.add_argument("--press", type=float, default=0.8, help="press depth, mm")
    p.add_argument("--yaw", type=float, default=0.0, help="indenter yaw, degrees")
    p.add_argument("--background", help="fabric:<cotton|fibre|hemp> or gray:<level>")
    p.add_argument("--seed", type=int, default=0, help="background texture seed")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("dataset", help="generate a seeded synthetic dataset with a manifest")
    p.add_argument("config")
    p.add_argument("--classes", nargs="+", default=list(INDENTER_KINDS), choices=INDENTER_KINDS)
    p.add_argument("--textures", nargs="*", choices=FABRICS, help="hybrid mode: fabric backgrounds")
    p.add_argument("--samples-per-class", type=int, default=200)
    p.add_argument("--jitter", type=float, default=3.0, help="centre jitter half-width, mm")
    p.add_argument("--press-min", type=float, default=0.3)
    p.add_argument("--press-max", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("track", help="match markers between two frames")
    p.add_argument("ref")
    p.add_argument("cur")
    p.add_argument("--config", required=True)
    p.add_argument("--eps", type=float, default=0.75, help="stationary threshold, px")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="train and test the k-NN classifier(s) on a dataset")
    p.add_argument("manifest")
    p.add_argument("--config", help="defaults to config.cfg next to the manifest")
    p.add_argument("--task", choices=("object", "hybrid"), default="object")
    p.add_argument("--train-frac", type=float, default=0.7)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-k", type=int, default=5)
    p.add_argument("--features", help="also write the feature table as CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ssim", help="structural similarity of two images")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--window", type=int, default=7)
    p.set_defaults(func=cmd_ssim)

    p = sub.add_parser("cost", help="unit metrics and batch plan of a sensor")
    p.add_argument("sensor", type=_variant)
    p.add_argument("--capacity", type=int, default=1)
    p.add_argument("--table", help="cost table CSV (bundled table when omitted)")
    p.add_argument("--sweep", metavar="CSV", help="write the full capacity curve")
    p.set_defaults(func=cmd_cost)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CommandError, VbtsError, OSError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"vbtsim {args.command}: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
