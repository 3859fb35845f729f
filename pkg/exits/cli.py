"""
Command-line interface

Every subcommand takes --config, --seed, --out and --workers and writes a
run.json record next to its outputs. Exit codes: 0 on success, 2 on invalid
input, 3 on numerical failure.
"""


import argparse
import concurrent.futures
from dataclasses import asdict, replace
import json
import math
from pathlib import Path
import sys
from typing import List, Optional, Tuple
import numpy as np
from aws_lambda_powertools.tracing import Tracer # pylint: disable=import-error
from aws_lambda_powertools.logging.logger import Logger # pylint: disable=import-error
from .ablation import ablate_scenes
from .config import RunConfig, load_config, load_scene_spec
from .crf import meanfield_refine
from .exceptions import ExitsError, InputError, NotDivisible, SizeMismatch
from .formats import (
    AnnotationRecord, read_annotations, read_mask, read_pnm, read_prob_mask, read_similarity,
    write_annotations, write_mask, write_prob_mask, write_similarity
)
from .geometry import CropWindow, extract_extreme_points, resample_to_target
from .helpers import write_json
from .losses import box_mask, stage_one_loss
from .metrics import PointPR, compare_reports, evaluate_masks, retention
from .pipeline import (
    load_scene, object_window, process_scene, propagate, read_object_masks, scene_data, seed_sets,
    sum_points, write_scene
)
from .retrieval import (
    PropagationScores, SparseTarget, assemble_targets, label_counts, point_dropout, propagation_scores,
    retrieved_empty, threshold_labels
)
from .synth import generate_scene, generate_suite
from .tpm import average_heads, transition_matrix


__all__ = ["build_parser", "main"]


logger = Logger(service="exits", stream=sys.stderr) # pylint: disable=invalid-name
tracer = Tracer() # pylint: disable=invalid-name


MAX_SEED = 2 ** 64 - 1


def _select_record(records: List[AnnotationRecord], object_id: Optional[int]) -> AnnotationRecord:
    if not records:
        raise InputError("Annotation file holds no record")
    if object_id is None:
        return records[0]
    for record in records:
        if record.object_id == object_id:
            return record
    raise InputError("No annotation for object {}".format(object_id))


def _grid_config(cfg: RunConfig, n_nodes: int) -> RunConfig:
    """
    Match patch_side to a matrix or score vector over n_nodes nodes
    """

    side = math.isqrt(n_nodes)
    if side * side != n_nodes:
        raise SizeMismatch("{} nodes do not form a square patch grid".format(n_nodes))
    if side != cfg.patch_side:
        logger.info({"message": "Patch side taken from input", "patch_side": side})
        cfg = cfg.with_overrides(patch_side=side)
    return cfg


@tracer.capture_method
def _cmd_synth(args, cfg: RunConfig, seed: int, out: Path) -> Tuple[int, RunConfig]:
    spec = load_scene_spec(args.spec)
    if args.seed is not None or seed != 0:
        spec = replace(spec, seed=seed)
    seed = spec.seed

    def _write(index: int) -> Path:
        scene = generate_scene(spec, (spec.seed, index))
        return write_scene(scene, out / "scene_{:03d}".format(index), cfg)

    with concurrent.futures.ThreadPoolExecutor(max_workers=args.workers) as executor:
        futures = [executor.submit(_write, index) for index in range(spec.count)]
        paths = [future.result() for future in futures]

    logger.info({"message": "Generated scenes", "count": len(paths), "out": str(out)})
    return seed, cfg


@tracer.capture_method
def _cmd_extract_points(args, cfg: RunConfig, seed: int, out: Path) -> Tuple[int, RunConfig]:
    masks = read_object_masks(args.masks)
    if not masks:
        paths = sorted(Path(args.masks).glob("*.pgm"))
        masks = {index: read_mask(path) for index, path in enumerate(paths, start=1)}
    if not masks:
        raise InputError("No PGM mask in {}".format(args.masks))

    records = [
        AnnotationRecord(object_id, object_id, extract_extreme_points(mask), "")
        for object_id, mask in sorted(masks.items())
    ]
    write_annotations(out / "annotations.jsonl", records)
    logger.info({"message": "Extracted extreme points", "objects": len(records)})
    return seed, cfg


@tracer.capture_method
def _cmd_build_tpm(args, cfg: RunConfig, seed: int, out: Path) -> Tuple[int, RunConfig]:
    heads = [read_similarity(path) for path in args.sim]
    transition = transition_matrix(average_heads(heads), cfg.sinkhorn())
    write_similarity(out / "tpm.extm", transition)
    logger.info({"message": "Built transition matrix", "heads": len(heads), "nodes": transition.shape[0]})
    return seed, cfg


@tracer.capture_method
def _cmd_propagate(args, cfg: RunConfig, seed: int, out: Path) -> Tuple[int, RunConfig]:
    transition = read_similarity(args.tpm).astype(np.float64)
    cfg = _grid_config(cfg, transition.shape[0])
    record = _select_record(read_annotations(args.ann), args.object_id)

    box, window = object_window(record.extreme, cfg)
    seeds = seed_sets(record.extreme, box, window, cfg)
    propagated = propagate(transition, cfg)
    scores = propagation_scores(propagated, seeds.fg, seeds.bg)

    write_similarity(out / "propagated.extm", propagated)
    write_json(out / "scores.json", {
        "object_id": record.object_id,
        "mode": "absorbing" if cfg.absorbing else "power",
        "alpha": None if cfg.absorbing else cfg.alpha,
        "beta": cfg.beta if cfg.absorbing else None,
        "n": int(transition.shape[0]),
        "pi_fg": scores.pi_fg,
        "pi_bg": scores.pi_bg,
        "fg_seeds": seeds.fg.nodes,
        "bg_seeds": seeds.bg.nodes
    })
    return seed, cfg


@tracer.capture_method
def _cmd_retrieve(args, cfg: RunConfig, seed: int, out: Path) -> Tuple[int, RunConfig]:
    try:
        with open(args.scores) as fp:
            stored = json.load(fp)
        scores = PropagationScores(stored["pi_fg"], stored["pi_bg"])
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InputError("Invalid scores file {}: {}".format(args.scores, exc)) from exc
    cfg = _grid_config(cfg, len(scores))
    record = _select_record(read_annotations(args.ann), stored.get("object_id"))

    box, window = object_window(record.extreme, cfg)
    seeds = seed_sets(record.extreme, box, window, cfg)
    labels = threshold_labels(scores, seeds.box, cfg.tau_fg, cfg.tau_bg, stored.get("alpha"))
    kept = point_dropout(labels, cfg.dropout(seed), record.object_id, cfg.epoch)
    target = assemble_targets(seeds.fg, seeds.bg, kept, window.patch_side)

    stats = {
        "object_id": record.object_id,
        "counts": label_counts(labels),
        "kept": label_counts(kept),
        "mil_fallback": retrieved_empty(labels)
    }
    write_json(out / "labels.json", {
        **stats,
        "alpha": labels.alpha,
        "tau_fg": labels.tau_fg,
        "tau_bg": labels.tau_bg,
        "labels": labels.labels,
        "kept_labels": kept.labels
    })
    write_mask(out / "target_y.pgm", target.y_hat)
    write_mask(out / "target_k.pgm", target.k_mask)

    print(json.dumps(stats, sort_keys=True))
    return seed, cfg


@tracer.capture_method
def _cmd_refine(args, cfg: RunConfig, seed: int, out: Path) -> Tuple[int, RunConfig]:
    mask = read_prob_mask(args.mask).astype(np.float64)
    refined = meanfield_refine(mask, read_pnm(args.image), cfg.crf())
    write_prob_mask(out / "refined.expm", refined)
    return seed, cfg


@tracer.capture_method
def _cmd_loss(args, cfg: RunConfig, seed: int, out: Path) -> Tuple[int, RunConfig]:
    student = read_prob_mask(args.mask).astype(np.float64)
    teacher = read_prob_mask(args.teacher).astype(np.float64) if args.teacher else None
    image = read_pnm(args.image)
    target_dir = Path(args.target)
    target = SparseTarget(read_mask(target_dir / "target_y.pgm"), read_mask(target_dir / "target_k.pgm"))
    cfg = _grid_config(cfg, target.y_hat.size)
    record = _select_record(read_annotations(args.ann), args.object_id)

    side = student.shape[0]
    if student.shape != (side, side):
        raise SizeMismatch("Predicted mask must be square, got shape {}".format(student.shape))
    if side % cfg.patch_side:
        raise NotDivisible("Mask side {} is not divisible by {}".format(side, cfg.patch_side))

    box, window = object_window(record.extreme, cfg)
    # The prediction covers the crop window resized to the mask side
    frame = CropWindow(window.rect, side, cfg.patch_side)
    guide = resample_to_target(image, frame)
    box_frame = resample_to_target(box_mask(box, image.shape[:2]), frame)

    labels_file = target_dir / "labels.json"
    if labels_file.exists():
        with open(labels_file) as fp:
            fallback = bool(json.load(fp).get("mil_fallback", False))
    else:
        seeds = seed_sets(record.extreme, box, window, cfg)
        fallback = int(target.k_mask.sum()) == len(seeds.fg) + len(seeds.bg)

    breakdown = stage_one_loss(
        student, target, fallback, box_frame, guide, teacher, cfg.weights(), cfg.crf(), cfg.dice()
    )
    write_json(out / "loss.json", {"object_id": record.object_id, **asdict(breakdown)})
    return seed, cfg


@tracer.capture_method
def _cmd_pseudo_mask(args, cfg: RunConfig, seed: int, out: Path) -> Tuple[int, RunConfig]:
    data = load_scene(args.scene)
    results = process_scene(data, cfg, baseline=args.baseline, workers=args.workers)

    objects = []
    for result in results:
        write_mask(out / "masks" / "obj_{}.pgm".format(result.object_id), result.mask)
        entry = {
            "object_id": result.object_id,
            "counts": label_counts(result.labels),
            "mil_fallback": result.mil_fallback,
            "points": result.points.as_dict() if result.points else None
        }
        if args.baseline:
            write_mask(out / "baseline" / "obj_{}.pgm".format(result.object_id), result.baseline_mask)
            entry["baseline_counts"] = label_counts(result.baseline_labels)
            entry["baseline_points"] = result.baseline_points.as_dict() if result.baseline_points else None
        objects.append(entry)

    document = {"objects": objects, "total": sum_points([r.points for r in results]).as_dict()}
    if args.baseline:
        document["baseline_total"] = sum_points([r.baseline_points for r in results]).as_dict()
    write_json(out / "points.json", document)
    return seed, cfg


@tracer.capture_method
def _cmd_ablate(args, cfg: RunConfig, seed: int, out: Path) -> Tuple[int, RunConfig]:
    spec = load_scene_spec(args.spec)
    if args.seed is not None or seed != 0:
        spec = replace(spec, seed=seed)
    seed = spec.seed
    sigma = spec.noise_sigma if args.sigma is None else args.sigma
    if sigma < 0:
        raise InputError("--sigma must be non-negative, got {}".format(sigma))

    scenes = [scene_data(scene, cfg, sigma) for scene in generate_suite(spec)]
    reports = ablate_scenes(scenes, cfg, seed=seed, workers=args.workers)

    write_json(out / "ablation.json", {
        "scenes": len(scenes),
        "sigma": sigma,
        "variants": [report.as_dict() for report in reports]
    })
    return seed, cfg


def _points_from(path: Optional[str], key: str) -> Optional[PointPR]:
    if not path:
        return None
    with open(path) as fp:
        stored = json.load(fp).get(key)
    if not stored:
        return None
    return PointPR(**{
        name: stored[name] for name in ["tp_fg", "pred_fg", "actual_fg", "tp_bg", "pred_bg", "actual_bg", "labeled"]
    })


@tracer.capture_method
def _cmd_eval(args, cfg: RunConfig, seed: int, out: Path) -> Tuple[int, RunConfig]:
    gt = read_object_masks(args.gt)
    if not gt:
        raise InputError("No obj_<id>.pgm mask in {}".format(args.gt))

    def _report(directory: str, points_key: str):
        pred = read_object_masks(directory)
        missing = sorted(set(gt) - set(pred))
        if missing:
            raise InputError("{} has no mask for objects {}".format(directory, missing))
        ids = sorted(gt)
        return evaluate_masks([pred[i] for i in ids], [gt[i] for i in ids], _points_from(args.points, points_key))

    document = {"exits": _report(args.pred, "total")}
    if args.baseline:
        document["baseline"] = _report(args.baseline, "baseline_total")
        document["delta_mean_iou"] = compare_reports(document["exits"], document["baseline"])
    if (args.ap_weak is None) != (args.ap_full is None):
        raise InputError("--ap-weak and --ap-full must be given together")
    if args.ap_weak is not None:
        document["retention"] = retention(args.ap_weak, args.ap_full)

    write_json(out / "report.json", document)
    logger.info({"message": "Evaluated pseudo masks", "mean_iou": document["exits"].mean_iou})
    return seed, cfg


def build_parser() -> argparse.ArgumentParser:
    """
    Argument parser with one subcommand per pipeline stage
    """

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML configuration or run.json of a previous run")
    common.add_argument("--seed", type=int, help="Run seed, 0 to 2^64-1")
    common.add_argument("--out", default=".", help="Output directory")
    common.add_argument("--workers", type=int, default=1, help="Objects or scenes processed in parallel")

    parser = argparse.ArgumentParser(prog="exits", description="Pseudo labels from extreme points")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", parents=[common], help="Generate synthetic scenes")
    p_synth.add_argument("--spec", required=True, help="Scene suite specification (YAML)")
    p_synth.set_defaults(func=_cmd_synth)

    p_extract = sub.add_parser("extract-points", parents=[common], help="Masks to extreme-point annotations")
    p_extract.add_argument("--masks", required=True, help="Directory of PGM masks")
    p_extract.set_defaults(func=_cmd_extract_points)

    p_tpm = sub.add_parser("build-tpm", parents=[common], help="Similarity matrices to a transition matrix")
    p_tpm.add_argument("--sim", required=True, nargs="+", help="One EXTM similarity file per attention head")
    p_tpm.set_defaults(func=_cmd_build_tpm)

    p_prop = sub.add_parser("propagate", parents=[common], help="Propagate seeds through a transition matrix")
    p_prop.add_argument("--tpm", required=True, help="EXTM transition matrix")
    mode = p_prop.add_mutually_exclusive_group()
    mode.add_argument("--alpha", type=int, help="Random-walk hop count")
    mode.add_argument("--absorbing", action="store_true", default=None, help="Absorbing-chain limit")
    p_prop.add_argument("--beta", type=float, help="Absorbing-chain blending coefficient")
    p_prop.add_argument("--ann", required=True, help="Annotation file (JSON lines)")
    p_prop.add_argument("--object-id", type=int, help="Annotated object to use, the first by default")
    p_prop.set_defaults(func=_cmd_propagate)

    p_ret = sub.add_parser("retrieve", parents=[common], help="Scores to pseudo point labels and targets")
    p_ret.add_argument("--scores", required=True, help="scores.json from propagate")
    p_ret.add_argument("--ann", required=True, help="Annotation file (JSON lines)")
    p_ret.set_defaults(func=_cmd_retrieve)

    p_refine = sub.add_parser("refine", parents=[common], help="Mean-field CRF refinement of a mask")
    p_refine.add_argument("--mask", required=True, help="EXPM probability mask")
    p_refine.add_argument("--image", required=True, help="PGM or PPM guide image of the same size")
    p_refine.set_defaults(func=_cmd_refine)

    p_loss = sub.add_parser("loss", parents=[common], help="Evaluate the stage-one loss")
    p_loss.add_argument("--mask", required=True, help="EXPM prediction over the resized crop window")
    p_loss.add_argument("--teacher", help="EXPM teacher prediction")
    p_loss.add_argument("--target", required=True, help="Output directory of retrieve")
    p_loss.add_argument("--image", required=True, help="Full PGM or PPM image")
    p_loss.add_argument("--ann", required=True, help="Annotation file (JSON lines)")
    p_loss.add_argument("--object-id", type=int, help="Annotated object to use, the first by default")
    p_loss.set_defaults(func=_cmd_loss)

    p_pseudo = sub.add_parser("pseudo-mask", parents=[common], help="Full pipeline on a scene directory")
    p_pseudo.add_argument("--scene", required=True, help="Scene directory")
    p_pseudo.add_argument("--baseline", action="store_true", help="Also run the tightness-prior baseline")
    p_pseudo.set_defaults(func=_cmd_pseudo_mask)

    p_eval = sub.add_parser("eval", parents=[common], help="Evaluate pseudo masks")
    p_eval.add_argument("--pred", required=True, help="Directory of predicted obj_<id>.pgm masks")
    p_eval.add_argument("--gt", required=True, help="Directory of ground-truth obj_<id>.pgm masks")
    p_eval.add_argument("--baseline", help="Directory of baseline obj_<id>.pgm masks")
    p_eval.add_argument("--points", help="points.json from pseudo-mask")
    p_eval.add_argument("--ap-weak", type=float, help="AP of the weakly supervised model")
    p_eval.add_argument("--ap-full", type=float, help="AP of the fully supervised model")
    p_eval.set_defaults(func=_cmd_eval)

    p_ablate = sub.add_parser("ablate", parents=[common], help="Compare retrieval variants on a synthetic suite")
    p_ablate.add_argument("--spec", required=True, help="Scene suite specification (YAML)")
    p_ablate.add_argument("--sigma", type=float, help="Similarity noise, defaults to the suite's noise_sigma")
    p_ablate.set_defaults(func=_cmd_ablate)

    return parser


def _resolve(args) -> Tuple[RunConfig, int]:
    cfg, recorded_seed = load_config(args.config)
    alpha = getattr(args, "alpha", None)
    cfg = cfg.with_overrides(
        alpha=alpha,
        absorbing=False if alpha is not None else getattr(args, "absorbing", None),
        beta=getattr(args, "beta", None)
    )
    seed = args.seed if args.seed is not None else (recorded_seed or 0)
    if not 0 <= seed <= MAX_SEED:
        raise InputError("Seed must lie in 0..2^64-1, got {}".format(seed))
    if args.workers < 1:
        raise InputError("--workers must be positive, got {}".format(args.workers))
    return cfg, seed


def main(argv: Optional[List[str]] = None) -> int:
    """
    Entry point, returns the process exit code
    """

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        cfg, seed = _resolve(args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        seed, cfg = args.func(args, cfg, seed, out)
        write_json(out / "run.json", {"command": args.command, "seed": seed, "config": cfg.as_dict()})
        return 0
    except ExitsError as exc:
        logger.error({"message": str(exc), "command": args.command, "error": type(exc).__name__})
        print("error: {}".format(exc), file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        logger.error({"message": str(exc), "command": args.command, "error": type(exc).__name__})
        print("error: {}".format(exc), file=sys.stderr)
        return InputError.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
