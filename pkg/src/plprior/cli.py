"""Command-line entry points: ``plprior segment|losses|eval|bench``.

Every command writes its outputs plus a ``manifest.json`` into ``--out``.
Exit codes: 0 success, 1 usage, 2 I/O or file format, 3 numeric/degenerate input.
"""
import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__, kernels
from .bench import DEFAULT_MC_SAMPLES, run_sweep, write_sweep_csv
from .coeffs import coeff_map_to_depth
from .imaging import (
    IntrinsicsError, PFMError, read_depth, read_image, read_intrinsics, read_pfm,
    write_pfm,
)
from .losses import (
    LossWeights, coeff_smoothness, linear_consistency, planar_consistency, total_loss,
)
from .regions import (
    PLANE_MIN_PIXELS, LineFileError, felzenszwalb_segment, filter_pseudo_planes,
    ingest_line_segments, make_rng,
)
from .regularity import (
    RELIABLE_MAX_DEV, depth_metrics, evaluate_regularity, median_scale_align, reliable_ids,
    select_reliable, write_regularity_csv,
)
from .synthesis import (
    bilinear_sample, disparity_smoothness, photometric_loss, read_pose, warp_flow,
)

EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path, doc):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True, allow_nan=True)
        f.write("\n")


def _manifest(out, command, params, inputs, seed=None):
    doc = {
        "command": command,
        "parameters": params,
        "seed": seed,
        "inputs": {k: {"path": os.path.basename(p), "sha256": _digest(p)}
                   for k, p in sorted(inputs.items()) if p},
        "version": __version__,
        "backend": kernels.BACKEND,
    }
    _write_json(os.path.join(out, "manifest.json"), doc)


# --------------------------------------------------------------------------


def cmd_segment(args):
    image = read_image(args.image)
    labels = felzenszwalb_segment(image, k=args.k, sigma=args.sigma, min_size=args.min_size)
    os.makedirs(args.out, exist_ok=True)
    write_pfm(os.path.join(args.out, "labels.pfm"), labels.astype(np.float32))
    ids, counts = np.unique(labels, return_counts=True)
    with open(os.path.join(args.out, "regions.csv"), "w", encoding="utf-8") as f:
        f.write("id,n_pixels,pseudo_plane\n")
        for i, c in zip(ids, counts):
            f.write(f"{i},{c},{int(c > PLANE_MIN_PIXELS)}\n")
    _manifest(args.out, "segment",
              {"k": args.k, "sigma": args.sigma, "min_size": args.min_size,
               "plane_min_pixels": PLANE_MIN_PIXELS},
              {"image": args.image}, seed=args.seed)
    n_planes = int(np.sum(counts > PLANE_MIN_PIXELS))
    print(f"{len(ids)} regions, {n_planes} pseudo planes")
    return 0


def cmd_losses(args):
    if (args.depth is None) == (args.coeffs is None):
        raise UsageError("give exactly one of --depth or --coeffs")
    image = read_image(args.image)
    h, w = image.shape[:2]
    K = read_intrinsics(args.intrinsics, shape=(h, w))
    weights = LossWeights(args.alpha_cos, args.alpha_pc, args.alpha_lc, args.alpha_ds,
                          args.n_planar, args.n_linear)
    flags = {}
    coeffs = None
    if args.coeffs is not None:
        coeffs = read_pfm(args.coeffs).astype(np.float64)
        if coeffs.ndim != 3:
            raise ValueError("coefficient map must have 3 channels")
        depth = coeff_map_to_depth(coeffs, K)
    else:
        depth = read_depth(args.depth)
    if depth.shape != (h, w):
        raise ValueError(f"depth is {depth.shape}, image is {(h, w)}")

    l_cos = 0.0
    if coeffs is not None:
        l_cos = coeff_smoothness(coeffs, image)
    else:
        flags["l_cos"] = "unavailable: needs --coeffs"
    disp = np.where(depth.mask, 1.0 / np.where(depth.mask, depth.depth, 1.0), 0.0)
    l_ds = disparity_smoothness(disp, image)

    l_pe = 0.0
    if args.source_image and args.pose:
        source = read_image(args.source_image)
        if source.shape != image.shape:
            raise ValueError("source and target images differ in shape")
        flow = warp_flow(depth, K, read_pose(args.pose))
        synth, valid = bilinear_sample(source, flow)
        l_pe = photometric_loss(image, synth, mask=valid)
    else:
        flags["l_pe"] = "skipped: needs --source-image and --pose"

    seed_planar, seed_linear = args.seed, args.seed + 1
    l_pc = l_lc = 0.0
    if args.labels:
        planes = filter_pseudo_planes(read_pfm(args.labels))
        if planes.shape != (h, w):
            raise ValueError("label raster does not match the image")
        res = planar_consistency(depth, K, planes, weights, rng=make_rng(seed_planar))
        l_pc = res.loss
        if res.skipped:
            flags["l_pc"] = "skipped: no eligible pseudo plane"
    else:
        flags["l_pc"] = "skipped: needs --labels"
    if args.lines:
        lines = ingest_line_segments(args.lines, w, h)
        res = linear_consistency(depth, K, lines, weights, rng=make_rng(seed_linear))
        l_lc = res.loss
        if res.skipped:
            flags["l_lc"] = "skipped: no eligible line segment"
    else:
        flags["l_lc"] = "skipped: needs --lines"

    breakdown = total_loss(l_pe, l_cos, l_pc, l_lc, l_ds, weights, args.representation, flags)
    doc = breakdown.to_dict()
    doc["seeds"] = {"planar": seed_planar, "linear": seed_linear}
    os.makedirs(args.out, exist_ok=True)
    _write_json(os.path.join(args.out, "losses.json"), doc)
    _manifest(args.out, "losses",
              {"weights": doc["weights"], "representation": args.representation},
              {"depth": args.depth, "coeffs": args.coeffs, "intrinsics": args.intrinsics,
               "image": args.image, "source_image": args.source_image, "pose": args.pose,
               "labels": args.labels, "lines": args.lines},
              seed=args.seed)
    print(json.dumps({k: doc[k] for k in ("l_pe", "l_ds", "l_cos", "l_pc", "l_lc", "total")}))
    return 0


def cmd_eval(args):
    pred, gt = read_depth(args.pred), read_depth(args.gt)
    if pred.shape != gt.shape:
        raise ValueError(f"pred is {pred.shape}, gt is {gt.shape}")
    h, w = gt.shape
    K = read_intrinsics(args.intrinsics, shape=(h, w))
    scale = 1.0
    if args.align == "median":
        pred, scale = median_scale_align(pred, gt)
    metrics = depth_metrics(pred, gt)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "depth_metrics.csv"), "w", encoding="utf-8") as f:
        f.write("rel,log10,rms,delta1,delta2,delta3,scale\n")
        f.write(",".join(repr(float(v)) for v in (*vars(metrics).values(), scale)) + "\n")

    planes = filter_pseudo_planes(read_pfm(args.labels)) if args.labels else None
    lines = ingest_line_segments(args.lines, w, h) if args.lines else None
    summary = {"scale": scale, "depth_metrics": vars(metrics)}
    if planes is not None or lines is not None:
        ref = evaluate_regularity(gt, K, planes, lines)
        keep = reliable_ids(ref, args.max_dev)
        summary["retained_fraction"] = {
            "plane": select_reliable(ref.planes, args.max_dev)[1],
            "line": select_reliable(ref.lines, args.max_dev)[1],
        }
        ref_kept = evaluate_regularity(gt, K, planes, lines, reliable=keep,
                                       per_pixel=args.per_pixel)
        res = evaluate_regularity(pred, K, planes, lines, reliable=keep, per_pixel=args.per_pixel)
        for name, reports, agg in (
            ("flatness.csv", res.planes, res.plane_summary),
            ("straightness.csv", res.lines, res.line_summary),
            ("gt_flatness.csv", ref_kept.planes, ref_kept.plane_summary),
            ("gt_straightness.csv", ref_kept.lines, ref_kept.line_summary),
        ):
            write_regularity_csv(os.path.join(args.out, name), reports, agg)
        summary["flatness"] = vars(res.plane_summary)
        summary["straightness"] = vars(res.line_summary)
    _write_json(os.path.join(args.out, "summary.json"), summary)
    _manifest(args.out, "eval",
              {"align": args.align, "max_dev": args.max_dev, "per_pixel": args.per_pixel},
              {"pred": args.pred, "gt": args.gt, "intrinsics": args.intrinsics,
               "labels": args.labels, "lines": args.lines})
    print(json.dumps(vars(metrics)))
    return 0


def cmd_bench(args):
    if args.mc_samples < 0:
        raise UsageError("--mc-samples must be >= 0")
    outliers = ["corner", "middle"] if args.outlier == "both" else [args.outlier]
    os.makedirs(args.out, exist_ok=True)
    summary = {}
    for outlier in outliers:
        res = run_sweep(outlier, mc_samples=args.mc_samples, seed=args.seed, threads=args.threads)
        write_sweep_csv(os.path.join(args.out, f"sweep_{outlier}.csv"), res,
                        exact_only=args.mc_samples == 0)
        s = dict(res.summary)
        s["delta_l_pc_below_0.001"] = s["max_delta_l_pc"] < 1e-3
        summary[outlier] = s
        print(f"{outlier}: max dL_pc={s['max_delta_l_pc']:.6g} "
              f"dL_ssp linear R^2={s['delta_l_ssp_r2']:.6f}")
    _write_json(os.path.join(args.out, "summary.json"), summary)
    _manifest(args.out, "bench",
              {"outlier": args.outlier, "mc_samples": args.mc_samples}, {}, seed=args.seed)
    return 0


def build_parser():
    p = _Parser(prog="plprior", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("segment", help="graph-based superpixels and pseudo-plane stats")
    s.add_argument("--image", required=True)
    s.add_argument("--k", type=float, default=150.0)
    s.add_argument("--sigma", type=float, default=0.8)
    s.add_argument("--min-size", type=int, default=300)
    s.add_argument("--seed", type=int, default=0, help="recorded only; segmentation is deterministic")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_segment)

    s = sub.add_parser("losses", help="evaluate the loss breakdown on one frame")
    s.add_argument("--depth")
    s.add_argument("--coeffs")
    s.add_argument("--intrinsics", required=True)
    s.add_argument("--image", required=True)
    s.add_argument("--source-image")
    s.add_argument("--pose")
    s.add_argument("--labels")
    s.add_argument("--lines")
    s.add_argument("--alpha-cos", type=float, default=0.2)
    s.add_argument("--alpha-pc", type=float, default=2.0)
    s.add_argument("--alpha-lc", type=float, default=0.5)
    s.add_argument("--alpha-ds", type=float, default=0.001)
    s.add_argument("--n-planar", type=int, default=512)
    s.add_argument("--n-linear", type=int, default=128)
    s.add_argument("--representation", choices=("planar", "disparity"), default="planar")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_losses)

    s = sub.add_parser("eval", help="depth metrics and flatness/straightness")
    s.add_argument("--pred", required=True)
    s.add_argument("--gt", required=True)
    s.add_argument("--intrinsics", required=True)
    s.add_argument("--labels")
    s.add_argument("--lines")
    s.add_argument("--align", choices=("median", "none"), default="median")
    s.add_argument("--max-dev", type=float, default=RELIABLE_MAX_DEV)
    s.add_argument("--per-pixel", action="store_true", help="pool Avg Dev over pixels")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("bench", help="outlier robustness sweep")
    s.add_argument("--outlier", choices=("corner", "middle", "both"), default="corner")
    s.add_argument("--mc-samples", type=int, default=DEFAULT_MC_SAMPLES)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--threads", type=int, default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"plprior: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, PFMError, IntrinsicsError, LineFileError) as e:
        print(f"plprior: error: {e}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, ArithmeticError) as e:
        print(f"plprior: error: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
