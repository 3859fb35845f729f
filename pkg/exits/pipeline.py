"""
Per-object pseudo-label pipeline

Extreme points -> seed sets -> transition matrix -> propagation -> pseudo
point labels -> dense pseudo mask. Also reads and writes scene directories.
"""


import concurrent.futures
from dataclasses import dataclass
from pathlib import Path
import re
from typing import Dict, List, Optional, Sequence, Tuple, Union
import numpy as np
from aws_lambda_powertools.tracing import Tracer # pylint: disable=import-error
from aws_lambda_powertools.logging.logger import Logger # pylint: disable=import-error
from .config import RunConfig
from .crf import meanfield_refine
from .exceptions import InputError, SizeMismatch
from .formats import (
    AnnotationRecord, read_annotations, read_mask, read_pnm, read_similarity, write_annotations,
    write_mask, write_pnm, write_similarity
)
from .geometry import (
    BBox, CropWindow, ExtremePoints, PointSet, bbox_from_extremes, box_interior, crop, crop_window,
    initial_background, initial_foreground, node_map, paste, scale_delta
)
from .helpers import write_json
from .metrics import PointPR, gt_node_labels, point_label_pr
from .retrieval import PropagationScores, PseudoPointLabels, label_counts, retrieve_points, retrieved_empty
from .synth import Scene, patch_classes, similarity_from_scene, tightness_baseline_labels
from .tpm import propagate_absorbing, propagate_power, transition_matrix


__all__ = [
    "ObjectResult", "SceneData", "SeedSets", "densify", "load_scene", "object_window",
    "process_object", "process_scene", "propagate", "read_object_masks", "scene_data", "seed_sets",
    "sum_points", "write_scene"
]


logger = Logger(service="exits", child=True) # pylint: disable=invalid-name
tracer = Tracer() # pylint: disable=invalid-name


OBJECT_FILE = re.compile(r"^obj_(\d+)\.(pgm|extm)$")


@dataclass(frozen=True)
class SeedSets:
    """
    Initial foreground and background seeds and the box candidates
    """

    fg: PointSet
    bg: PointSet
    box: PointSet


@dataclass(frozen=True, eq=False)
class ObjectResult: # pylint: disable=too-many-instance-attributes
    """
    Everything the pipeline derived for one object
    """

    object_id: int
    box: BBox
    window: CropWindow
    seeds: SeedSets
    scores: PropagationScores
    labels: PseudoPointLabels
    mask: np.ndarray
    points: Optional[PointPR] = None
    baseline_labels: Optional[PseudoPointLabels] = None
    baseline_mask: Optional[np.ndarray] = None
    baseline_points: Optional[PointPR] = None

    @property
    def mil_fallback(self) -> bool:
        return retrieved_empty(self.labels)


@dataclass(frozen=True, eq=False)
class SceneData:
    """
    Inputs of the pipeline for one image
    """

    image: np.ndarray
    records: List[AnnotationRecord]
    similarities: Dict[int, np.ndarray]
    semantic: Optional[np.ndarray] = None
    gt_masks: Optional[Dict[int, np.ndarray]] = None


def object_window(ep: ExtremePoints, cfg: RunConfig) -> Tuple[BBox, CropWindow]:
    """
    Box of the extreme points and the crop window around it
    """

    box = bbox_from_extremes(ep)
    return box, crop_window(box, cfg.crop_pad, cfg.target_side, cfg.patch_side)


def seed_sets(ep: ExtremePoints, box: BBox, window: CropWindow, cfg: RunConfig) -> SeedSets:
    """
    Foreground seeds, background seeds and box candidates of one object
    """

    fg = initial_foreground(ep, scale_delta(cfg.delta, window), box, window)
    return SeedSets(fg=fg, bg=initial_background(box, window), box=box_interior(box, window, fg))


def propagate(transition: np.ndarray, cfg: RunConfig) -> np.ndarray:
    """
    Alpha-hop or absorbing-chain propagation, as configured
    """

    if cfg.absorbing:
        return propagate_absorbing(transition, cfg.beta)
    return propagate_power(transition, cfg.alpha)


def densify(fg_nodes, window: CropWindow, box: BBox, image: np.ndarray, cfg: RunConfig) -> np.ndarray:
    """
    Full-image binary mask from FG nodes

    Node values are spread to the window's pixels, refined with the CRF,
    thresholded, clipped to the box and pasted into the image frame.
    """

    values = np.zeros(window.n_nodes)
    values[np.asarray(list(fg_nodes), dtype=np.int64)] = 1.0
    prob = values[node_map(window)]

    if cfg.refine:
        prob = meanfield_refine(prob, crop(image, window.rect), cfg.crf())

    binary = (prob >= cfg.mask_threshold).astype(np.uint8)
    rect = window.rect
    in_box = np.zeros_like(binary)
    in_box[box.y_min - rect.y_min:box.y_max - rect.y_min + 1, box.x_min - rect.x_min:box.x_max - rect.x_min + 1] = 1
    return paste(binary * in_box, rect, image.shape[:2])


@tracer.capture_method
def process_object(
        image: np.ndarray, record: AnnotationRecord, similarity, cfg: RunConfig,
        semantic: Optional[np.ndarray] = None, baseline: bool = False
    ) -> ObjectResult:
    """
    Run the pipeline for one object
    """

    height, width = image.shape[:2]
    record.extreme.check_bounds(width, height)
    box, window = object_window(record.extreme, cfg)
    seeds = seed_sets(record.extreme, box, window, cfg)

    similarity = np.asarray(similarity, dtype=np.float64)
    if similarity.shape != (window.n_nodes, window.n_nodes):
        raise SizeMismatch("Object {}: similarity shape {} does not match a {}x{} patch grid".format(
            record.object_id, similarity.shape, window.patch_side, window.patch_side
        ))

    transition = transition_matrix(similarity, cfg.sinkhorn())
    propagated = propagate(transition, cfg)
    scores, labels = retrieve_points(
        propagated, seeds.fg, seeds.bg, seeds.box, cfg.tau_fg, cfg.tau_bg,
        None if cfg.absorbing else cfg.alpha
    )
    mask = densify(set(seeds.fg) | set(labels.fg_nodes.tolist()), window, box, image, cfg)

    gt_nodes = None
    if semantic is not None:
        gt_nodes = gt_node_labels(patch_classes(semantic, window), record.object_id)

    result = {}
    if baseline:
        baseline_labels = tightness_baseline_labels(window, box, similarity, seeds.fg)
        result["baseline_labels"] = baseline_labels
        result["baseline_mask"] = densify(
            set(seeds.fg) | set(baseline_labels.fg_nodes.tolist()), window, box, image, cfg
        )
        if gt_nodes is not None:
            result["baseline_points"] = point_label_pr(baseline_labels, gt_nodes)

    logger.info({
        "message": "Processed object",
        "object_id": record.object_id,
        "box": box.as_tuple(),
        "seeds": {"fg": len(seeds.fg), "bg": len(seeds.bg), "box": len(seeds.box)},
        "labels": label_counts(labels),
        "mask_pixels": int(mask.sum())
    })

    return ObjectResult(
        object_id=record.object_id, box=box, window=window, seeds=seeds, scores=scores,
        labels=labels, mask=mask,
        points=point_label_pr(labels, gt_nodes) if gt_nodes is not None else None,
        **result
    )


@tracer.capture_method
def process_scene(data: SceneData, cfg: RunConfig, baseline: bool = False, workers: int = 1) -> List[ObjectResult]:
    """
    Run the pipeline for every annotated object, results in annotation order
    """

    for record in data.records:
        if record.object_id not in data.similarities:
            raise InputError("No similarity matrix for object {}".format(record.object_id))

    with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        futures = [
            executor.submit(
                process_object, data.image, record, data.similarities[record.object_id], cfg,
                data.semantic, baseline
            )
            for record in data.records
        ]
        results = [future.result() for future in futures]

    fallbacks = sum(1 for result in results if result.mil_fallback)
    if fallbacks:
        logger.warning({
            "message": "Objects without retrieved points use the MIL fallback",
            "count": fallbacks,
            "fraction": fallbacks / len(results)
        })
    return results


def scene_data(scene: Scene, cfg: RunConfig, sigma: Optional[float] = None) -> SceneData:
    """
    Pipeline inputs of a generated scene

    Similarity matrices are built over each object's crop window with the
    scene's noise level unless sigma is given.
    """

    sigma = scene.spec.noise_sigma if sigma is None else sigma
    records, similarities = [], {}
    for object_id, ep in zip(scene.object_ids, scene.annotations):
        records.append(AnnotationRecord(object_id, object_id, ep, "image.ppm"))
        _, window = object_window(ep, cfg)
        similarities[object_id] = similarity_from_scene(
            scene, object_id, window, sigma, cfg.temperature, cfg.embedding_scale
        )
    return SceneData(
        image=scene.image, records=records, similarities=similarities, semantic=scene.semantic,
        gt_masks=dict(zip(scene.object_ids, scene.gt_masks))
    )


def write_scene(scene: Scene, directory: Union[str, Path], cfg: RunConfig) -> Path:
    """
    Write a scene directory
    """

    directory = Path(directory)
    data = scene_data(scene, cfg)

    write_pnm(directory / "image.ppm", scene.image)
    write_pnm(directory / "semantic.pgm", scene.semantic.astype(np.uint8))
    for object_id, mask in data.gt_masks.items():
        write_mask(directory / "masks" / "obj_{}.pgm".format(object_id), mask)
        write_similarity(directory / "similarity" / "obj_{}.extm".format(object_id), data.similarities[object_id])
    write_annotations(directory / "annotations.jsonl", data.records)
    write_json(directory / "scene.json", {
        "seed": list(scene.seed),
        "spec": scene.spec,
        "object_ids": scene.object_ids,
        "occluder_id": scene.occluder_id,
        "occluders": [box.as_tuple() for box in scene.occluders]
    })
    return directory


def _object_files(directory: Path, suffix: str) -> Dict[int, Path]:
    files = {}
    if directory.is_dir():
        for path in sorted(directory.iterdir()):
            match = OBJECT_FILE.match(path.name)
            if match and match.group(2) == suffix:
                files[int(match.group(1))] = path
    return files


def read_object_masks(directory: Union[str, Path]) -> Dict[int, np.ndarray]:
    """
    Read every obj_<id>.pgm mask of a directory
    """

    return {object_id: read_mask(path) for object_id, path in _object_files(Path(directory), "pgm").items()}


def load_scene(directory: Union[str, Path]) -> SceneData:
    """
    Read a scene directory

    The semantic field and ground-truth masks are optional.
    """

    directory = Path(directory)
    if not directory.is_dir():
        raise InputError("Scene directory {} does not exist".format(directory))

    image_path = directory / "image.ppm"
    if not image_path.exists():
        image_path = directory / "image.pgm"
    records = read_annotations(directory / "annotations.jsonl")
    similarities = {
        object_id: read_similarity(path)
        for object_id, path in _object_files(directory / "similarity", "extm").items()
    }
    semantic_path = directory / "semantic.pgm"
    masks = read_object_masks(directory / "masks")

    return SceneData(
        image=read_pnm(image_path),
        records=records,
        similarities=similarities,
        semantic=read_pnm(semantic_path) if semantic_path.exists() else None,
        gt_masks=masks or None
    )


def sum_points(points: Sequence[Optional[PointPR]]) -> PointPR:
    """
    Micro-aggregate point counts, skipping missing entries
    """

    total = PointPR(labeled=False)
    for entry in points:
        if entry is not None:
            total = total + entry
    return total
