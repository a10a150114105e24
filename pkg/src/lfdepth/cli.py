"""Command line entry point: ``lfdepth run | synth | eval``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io as lfio
from . import metrics
from .lightfield import load_lightfield, save_lightfield
from .pipeline import PipelineConfig, StageError, run_pipeline
from .scenes import render_from_dict

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("lfdepth")

EXIT_CODES = {
    "config": 2,
    "load": 3,
    "cost": 4,
    "initial": 5,
    "superpixel": 6,
    "refine": 7,
    "final": 8,
    "output": 9,
    "metrics": 10,
    "synth": 11,
}


class CliError(Exception):
    def __init__(self, stage, message):
        super().__init__(message)
        self.stage = stage


def _read_mapping(source, stage):
    """Parse TOML (or JSON for ``.json`` files) from a path, or from the text itself."""
    path = Path(source)
    try:
        if path.is_file():
            text = path.read_text(encoding="utf-8")
            if path.suffix.lower() == ".json":
                return json.loads(text)
        else:
            text = source
        return tomllib.loads(text)
    except (OSError, ValueError) as exc:
        raise CliError(stage, f"cannot parse {source}: {exc}") from exc


def _load_config(source):
    if source is None:
        return PipelineConfig()
    try:
        return PipelineConfig.from_mapping(_read_mapping(source, "config"))
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError("config", f"invalid config: {exc}") from exc


def _gt_outputs(out, d, d_final, gt, threshold, mask):
    try:
        metrics.write_badpix_csv(
            out / "badpix.csv",
            [("initial", metrics.badpix(d, gt, mask=mask)), ("final", metrics.badpix(d_final, gt, mask=mask))],
        )
        if threshold is None:
            log.warning("no --gt-threshold given; pr_curve.csv not written")
            return
        metrics.write_pr_csv(out / "pr_curve.csv", metrics.boundary_pr(d_final, gt, threshold, mask=mask))
        metrics.write_pr_csv(out / "pr_curve_initial.csv", metrics.boundary_pr(d, gt, threshold, mask=mask))
    except ValueError as exc:
        raise CliError("metrics", str(exc)) from exc


def _dump_intermediates(out, res, central_view):
    lfio.write_cost_volume(out / "cost_volume.lfcv", res.cost.values)
    fields = {
        "initial_depth": res.d.values,
        "confidence": res.omega.values,
        "sp_depth": res.p_sp.values,
        "epsilon": res.eps.values,
        "kappa_occ": res.k_occ,
        "kappa_var": res.k_var,
        "confidence_refined": res.omega_t.values,
        "rho_occ": res.r_occ,
        "rho_conf": res.r_conf,
    }
    for name, values in fields.items():
        lfio.write_pfm(out / f"{name}.pfm", np.asarray(values, dtype=np.float32))
    lfio.write_label_png(out / "superpixels.png", res.graph.label_map)
    overlay = np.asarray(central_view, dtype=np.float64)
    if overlay.ndim == 2 or overlay.shape[2] == 1:
        overlay = np.repeat(overlay.reshape(overlay.shape[0], overlay.shape[1], 1), 3, axis=2)
    overlay = overlay.copy()
    overlay[res.graph.boundary_mask()] = (1.0, 0.0, 0.0)
    lfio.write_image(out / "sp_boundaries.png", overlay)


def cmd_run(args):
    cfg = _load_config(args.config)
    try:
        lf, gt = load_lightfield(args.manifest)
    except (OSError, ValueError) as exc:
        raise CliError("load", str(exc)) from exc
    res = run_pipeline(lf, cfg)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        lfio.write_pfm(out / "disparity.pfm", res.d_final.values.astype(np.float32))
        lfio.disparity_to_png16(out / "disparity.png", res.d_final.values)
        if args.dump_intermediates:
            _dump_intermediates(out, res, lf.central_view)
    except (OSError, ValueError) as exc:
        raise CliError("output", str(exc)) from exc
    if gt is not None:
        mask = metrics.border_mask(gt.shape, metrics.border_margin(cfg.labels, lf.max_offset))
        _gt_outputs(out, res.d, res.d_final, gt, args.gt_threshold, mask)
    print(f"wrote {out / 'disparity.pfm'}")
    return 0


def cmd_synth(args):
    data = _read_mapping(args.scene, "synth")
    try:
        lf, gt = render_from_dict(data)
        manifest = save_lightfield(args.out, lf, gt)
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError("synth", f"invalid scene: {exc}") from exc
    except OSError as exc:
        raise CliError("output", str(exc)) from exc
    print(f"wrote {manifest}")
    return 0


def cmd_eval(args):
    try:
        est = lfio.read_pfm(args.est).astype(np.float64)
        gt = lfio.read_pfm(args.gt).astype(np.float64)
    except (OSError, ValueError) as exc:
        raise CliError("load", str(exc)) from exc
    try:
        mask = metrics.border_mask(gt.shape, args.border) if args.border else None
        result = metrics.evaluate(est, gt, args.gt_threshold, mask=mask)
    except ValueError as exc:
        raise CliError("metrics", str(exc)) from exc
    print(f"badpix_0.1 {result.badpix_0_1:.6f}")
    levels = (0.2, 0.4, 0.6, 0.8)
    for r, p in zip(levels, metrics.interpolated_precision(result.pr_curve, levels)):
        print(f"precision@recall>={r:.1f} {p:.6f}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        metrics.write_badpix_csv(out / "badpix.csv", [("estimate", result.badpix_0_1)])
        metrics.write_pr_csv(out / "pr_curve.csv", result.pr_curve)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="lfdepth", description="Light-field depth estimation")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="estimate disparity for a light field")
    run.add_argument("--manifest", required=True)
    run.add_argument("--config", help="TOML file or inline TOML text; keys mirror PipelineConfig")
    run.add_argument("--out", required=True)
    run.add_argument("--dump-intermediates", action="store_true")
    run.add_argument("--gt-threshold", type=float, help="gradient threshold defining ground-truth boundaries")
    run.set_defaults(func=cmd_run)

    synth = sub.add_parser("synth", help="render a synthetic light field with ground truth")
    synth.add_argument("--scene", required=True, help="TOML/JSON scene file or inline TOML")
    synth.add_argument("--out", required=True)
    synth.set_defaults(func=cmd_synth)

    ev = sub.add_parser("eval", help="score a disparity map against ground truth")
    ev.add_argument("--est", required=True)
    ev.add_argument("--gt", required=True)
    ev.add_argument("--gt-threshold", type=float, required=True)
    ev.add_argument("--border", type=int, default=0, help="ignore a frame of this many pixels")
    ev.add_argument("--out")
    ev.set_defaults(func=cmd_eval)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except StageError as exc:
        print(f"lfdepth: {exc}", file=sys.stderr)
        return EXIT_CODES.get(exc.stage, 1)
    except CliError as exc:
        print(f"lfdepth: [{exc.stage}] {exc}", file=sys.stderr)
        return EXIT_CODES.get(exc.stage, 1)


if __name__ == "__main__":
    sys.exit(main())
