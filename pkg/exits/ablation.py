"""
Ablation sweep

Runs variants of the retrieval step on the same objects: alpha-hop
propagation with 1, 2 and 3 hops, the absorbing chain, the seed sets alone
and point dropout on the retrieved labels. Each variant densifies its
supervised FG nodes into a mask and is scored against the ground truth.
"""


import concurrent.futures
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple
import numpy as np
from aws_lambda_powertools.tracing import Tracer # pylint: disable=import-error
from aws_lambda_powertools.logging.logger import Logger # pylint: disable=import-error
from .config import RunConfig
from .exceptions import InputError, InvalidParameter
from .formats import AnnotationRecord
from .metrics import PointPR, gt_node_labels, iou, point_label_pr
from .pipeline import SceneData, SeedSets, densify, object_window, seed_sets, sum_points
from .retrieval import PointLabel, PseudoPointLabels, assemble_targets, point_dropout, retrieve_points
from .synth import patch_classes
from .tpm import propagate_absorbing, propagate_power, transition_matrix


__all__ = ["Variant", "VariantReport", "ablate_object", "ablate_scenes", "standard_variants", "supervision_labels"]


logger = Logger(service="exits", child=True) # pylint: disable=invalid-name
tracer = Tracer() # pylint: disable=invalid-name


@dataclass(frozen=True)
class Variant:
    """
    One way of building the supervised points

    alpha is ignored by the absorbing chain. Without retrieval only the seed
    sets are supervised.
    """

    name: str
    alpha: int = 3
    absorbing: bool = False
    retrieve: bool = True
    dropout: bool = False

    def __post_init__(self):
        if int(self.alpha) != self.alpha or self.alpha < 1:
            raise InvalidParameter("Variant {}: hop count must be a positive integer, got {}".format(
                self.name, self.alpha
            ))
        if self.dropout and not self.retrieve:
            raise InvalidParameter("Variant {}: dropout applies to retrieved labels".format(self.name))


@dataclass(frozen=True)
class VariantReport:
    """
    Mask and point label quality of one variant over a set of objects
    """

    name: str
    per_object_iou: List[float]
    points: PointPR
    supervised: int

    @property
    def mean_iou(self) -> Optional[float]:
        if not self.per_object_iou:
            return None
        return sum(self.per_object_iou) / len(self.per_object_iou)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "n_objects": len(self.per_object_iou),
            "mean_iou": self.mean_iou,
            "per_object_iou": self.per_object_iou,
            "supervised": self.supervised,
            "points": self.points.as_dict()
        }


def standard_variants(cfg: RunConfig) -> List[Variant]:
    """
    The sweep: 1 to 3 hops, the absorbing chain, seeds alone, and the
    configured propagation with and without point dropout
    """

    return [
        Variant("alpha-1", alpha=1),
        Variant("alpha-2", alpha=2),
        Variant("alpha-3", alpha=3),
        Variant("absorbing", absorbing=True),
        Variant("seeds-only", retrieve=False),
        Variant("no-dropout", alpha=cfg.alpha, absorbing=cfg.absorbing),
        Variant("dropout", alpha=cfg.alpha, absorbing=cfg.absorbing, dropout=True)
    ]


def supervision_labels(seeds: SeedSets, labels: PseudoPointLabels, patch_side: int) -> PseudoPointLabels:
    """
    Seeds and retrieved labels merged into one label vector
    """

    target = assemble_targets(seeds.fg, seeds.bg, labels, patch_side)
    merged = np.where(
        target.k_mask.reshape(-1) == 0, PointLabel.UNLABELED,
        np.where(target.y_hat.reshape(-1) == 1, PointLabel.FG, PointLabel.BG)
    )
    return PseudoPointLabels(merged, labels.tau_fg, labels.tau_bg, labels.alpha)


@tracer.capture_method
def ablate_object(
        image: np.ndarray, record: AnnotationRecord, similarity, semantic: np.ndarray, gt_mask: np.ndarray,
        cfg: RunConfig, variants: List[Variant], seed: int = 0, dropout_key: int = 0
    ) -> Dict[str, Tuple[float, PointPR, int]]:
    """
    IoU, point counts and number of supervised nodes of every variant for one object

    Dropout draws from (seed, dropout_key, epoch).
    """

    height, width = image.shape[:2]
    record.extreme.check_bounds(width, height)
    box, window = object_window(record.extreme, cfg)
    seeds = seed_sets(record.extreme, box, window, cfg)
    transition = transition_matrix(similarity, cfg.sinkhorn())
    gt_nodes = gt_node_labels(patch_classes(semantic, window), record.object_id)
    empty = PseudoPointLabels(np.full(window.n_nodes, PointLabel.UNLABELED, dtype=np.int8))

    propagated = {}
    results = {}
    for variant in variants:
        labels = empty
        if variant.retrieve:
            key = ("absorbing", None) if variant.absorbing else ("power", variant.alpha)
            if key not in propagated:
                if variant.absorbing:
                    propagated[key] = propagate_absorbing(transition, cfg.beta)
                else:
                    propagated[key] = propagate_power(transition, variant.alpha)
            _, labels = retrieve_points(
                propagated[key], seeds.fg, seeds.bg, seeds.box, cfg.tau_fg, cfg.tau_bg,
                None if variant.absorbing else variant.alpha
            )
        if variant.dropout:
            labels = point_dropout(labels, cfg.dropout(seed), dropout_key, cfg.epoch)

        supervised = supervision_labels(seeds, labels, window.patch_side)
        mask = densify(supervised.fg_nodes.tolist(), window, box, image, cfg)
        results[variant.name] = (
            iou(mask, gt_mask),
            point_label_pr(supervised, gt_nodes),
            int(np.count_nonzero(supervised.labels != PointLabel.UNLABELED))
        )

    return results


@tracer.capture_method
def ablate_scenes(
        scenes: Iterable[SceneData], cfg: RunConfig, variants: Optional[List[Variant]] = None,
        seed: int = 0, workers: int = 1
    ) -> List[VariantReport]:
    """
    Run every variant on every annotated object, reports in variant order

    Objects are numbered across scenes in order; that number keys the
    dropout draws, so results do not depend on the worker count.
    """

    variants = standard_variants(cfg) if variants is None else variants
    names = [variant.name for variant in variants]
    if len(set(names)) != len(names):
        raise InvalidParameter("Variant names must be unique, got {}".format(names))

    tasks = []
    for data in scenes:
        if data.semantic is None or not data.gt_masks:
            raise InputError("Ablation needs the semantic field and ground-truth masks")
        for record in data.records:
            if record.object_id not in data.similarities or record.object_id not in data.gt_masks:
                raise InputError("No similarity or ground-truth mask for object {}".format(record.object_id))
            tasks.append((data, record))

    with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        futures = [
            executor.submit(
                ablate_object, data.image, record, data.similarities[record.object_id], data.semantic,
                data.gt_masks[record.object_id], cfg, variants, seed, index
            )
            for index, (data, record) in enumerate(tasks)
        ]
        per_object = [future.result() for future in futures]

    reports = []
    for name in names:
        reports.append(VariantReport(
            name=name,
            per_object_iou=[result[name][0] for result in per_object],
            points=sum_points([result[name][1] for result in per_object]),
            supervised=sum(result[name][2] for result in per_object)
        ))

    logger.info({
        "message": "Ablation sweep",
        "objects": len(per_object),
        "mean_iou": {report.name: report.mean_iou for report in reports}
    })
    return reports
