"""
Evaluation metrics
"""


from dataclasses import dataclass
from typing import List, Optional, Sequence
import numpy as np
from .exceptions import DivisionByZero, InvalidParameter, SizeMismatch
from .retrieval import PointLabel, PseudoPointLabels


__all__ = [
    "EvalReport", "PointPR", "compare_reports", "evaluate_masks", "gt_node_labels",
    "iou", "point_label_pr", "retention"
]


GT_IGNORE = -1
GT_BACKGROUND = 0
GT_OBJECT = 1


def _ratio(numerator: int, denominator: int) -> Optional[float]:
    return numerator / denominator if denominator else None


def iou(pred, gt) -> float:
    """
    Intersection over union of two binary masks, 1 when both are empty
    """

    pred = np.asarray(pred) != 0
    gt = np.asarray(gt) != 0
    if pred.shape != gt.shape:
        raise SizeMismatch("Mask shapes differ: {} and {}".format(pred.shape, gt.shape))

    union = np.count_nonzero(pred | gt)
    if union == 0:
        return 1.0
    return np.count_nonzero(pred & gt) / union


@dataclass(frozen=True)
class PointPR:
    """
    Point label counts: true positives, predicted and actual nodes per class

    Ratios with an empty denominator are None.
    """

    tp_fg: int = 0
    pred_fg: int = 0
    actual_fg: int = 0
    tp_bg: int = 0
    pred_bg: int = 0
    actual_bg: int = 0
    labeled: bool = True

    def __add__(self, other: "PointPR") -> "PointPR":
        if not self.labeled:
            return other
        if not other.labeled:
            return self
        return PointPR(
            self.tp_fg + other.tp_fg, self.pred_fg + other.pred_fg, self.actual_fg + other.actual_fg,
            self.tp_bg + other.tp_bg, self.pred_bg + other.pred_bg, self.actual_bg + other.actual_bg
        )

    @property
    def precision_fg(self) -> Optional[float]:
        return _ratio(self.tp_fg, self.pred_fg) if self.labeled else None

    @property
    def recall_fg(self) -> Optional[float]:
        return _ratio(self.tp_fg, self.actual_fg) if self.labeled else None

    @property
    def precision_bg(self) -> Optional[float]:
        return _ratio(self.tp_bg, self.pred_bg) if self.labeled else None

    @property
    def recall_bg(self) -> Optional[float]:
        return _ratio(self.tp_bg, self.actual_bg) if self.labeled else None

    def as_dict(self) -> dict:
        return {
            "tp_fg": self.tp_fg, "pred_fg": self.pred_fg, "actual_fg": self.actual_fg,
            "tp_bg": self.tp_bg, "pred_bg": self.pred_bg, "actual_bg": self.actual_bg,
            "labeled": self.labeled,
            "precision_fg": self.precision_fg, "recall_fg": self.recall_fg,
            "precision_bg": self.precision_bg, "recall_bg": self.recall_bg
        }


def gt_node_labels(node_classes, object_id: int, ignore: Sequence[int] = ()) -> np.ndarray:
    """
    Ground truth per node: 1 for the object, -1 for ignored classes, 0 otherwise
    """

    node_classes = np.asarray(node_classes)
    gt = np.where(node_classes == object_id, GT_OBJECT, GT_BACKGROUND)
    gt[np.isin(node_classes, list(ignore))] = GT_IGNORE
    return gt


def point_label_pr(labels: PseudoPointLabels, gt_nodes) -> PointPR:
    """
    Precision and recall counts of FG and BG labels against per-node ground truth

    Nodes with ground truth -1 are left out. When no node carries a label
    the result is unlabeled and every ratio is undefined.
    """

    gt_nodes = np.asarray(gt_nodes)
    if gt_nodes.shape != labels.labels.shape:
        raise SizeMismatch("Ground truth {} does not match labels {}".format(gt_nodes.shape, labels.labels.shape))

    scored = gt_nodes != GT_IGNORE
    fg = (labels.labels == PointLabel.FG) & scored
    bg = (labels.labels == PointLabel.BG) & scored
    if not (fg.any() or bg.any()):
        return PointPR(labeled=False)

    is_object = gt_nodes == GT_OBJECT
    is_background = gt_nodes == GT_BACKGROUND
    return PointPR(
        tp_fg=int(np.count_nonzero(fg & is_object)),
        pred_fg=int(np.count_nonzero(fg)),
        actual_fg=int(np.count_nonzero(is_object)),
        tp_bg=int(np.count_nonzero(bg & is_background)),
        pred_bg=int(np.count_nonzero(bg)),
        actual_bg=int(np.count_nonzero(is_background))
    )


def retention(ap_weak: float, ap_full: float) -> float:
    """
    Weakly supervised performance relative to the fully supervised one
    """

    if ap_full == 0:
        raise DivisionByZero("Fully supervised AP is zero")
    if ap_full < 0 or ap_weak < 0:
        raise InvalidParameter("AP values must be non-negative, got {} and {}".format(ap_weak, ap_full))
    return ap_weak / ap_full


@dataclass(frozen=True)
class EvalReport:
    """
    Pseudo-mask and point label quality over a set of objects
    """

    per_object_iou: List[float]
    mean_iou: Optional[float]
    point_precision_fg: Optional[float]
    point_recall_fg: Optional[float]
    point_precision_bg: Optional[float]
    point_recall_bg: Optional[float]
    n_objects: int


def evaluate_masks(preds: Sequence, gts: Sequence, points: Optional[PointPR] = None) -> EvalReport:
    """
    Per-object IoU, their mean, and the aggregated point precision and recall
    """

    if len(preds) != len(gts):
        raise SizeMismatch("Got {} predictions for {} ground-truth masks".format(len(preds), len(gts)))

    ious = [iou(pred, gt) for pred, gt in zip(preds, gts)]
    points = points if points is not None else PointPR(labeled=False)
    return EvalReport(
        per_object_iou=ious,
        mean_iou=sum(ious) / len(ious) if ious else None,
        point_precision_fg=points.precision_fg,
        point_recall_fg=points.recall_fg,
        point_precision_bg=points.precision_bg,
        point_recall_bg=points.recall_bg,
        n_objects=len(ious)
    )


def compare_reports(exits: EvalReport, baseline: EvalReport) -> Optional[float]:
    """
    Mean IoU of the first report minus that of the baseline
    """

    if exits.mean_iou is None or baseline.mean_iou is None:
        return None
    return exits.mean_iou - baseline.mean_iou
