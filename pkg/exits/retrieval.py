"""
Pseudo point label retrieval

Turns propagated transition probabilities into per-node labels: seed scores,
thresholding, point dropout and the sparse target used by the point loss.
"""


from dataclasses import dataclass, replace
from enum import IntEnum
import math
from typing import Dict, Optional, Tuple
import numpy as np
from aws_lambda_powertools.logging.logger import Logger # pylint: disable=import-error
from .exceptions import (
    EmptySeedSet, InvalidParameter, InvalidThresholds, OverlapError, SizeMismatch
)
from .geometry import PointSet


__all__ = [
    "DropoutConfig", "PointLabel", "PropagationScores", "PseudoPointLabels",
    "SparseTarget", "assemble_targets", "label_counts", "point_dropout",
    "propagation_scores", "retrieve_points", "retrieved_empty", "threshold_labels"
]


logger = Logger(service="exits", child=True) # pylint: disable=invalid-name


# Scores are averages of probabilities; allow rounding just outside [0, 1]
SCORE_SLACK = 1e-9


class PointLabel(IntEnum):
    """
    Label of one patch node
    """

    UNLABELED = 0
    FG = 1
    BG = 2


@dataclass(frozen=True, eq=False)
class PropagationScores:
    """
    Mean propagation probability from the foreground and background seeds to every node
    """

    pi_fg: np.ndarray
    pi_bg: np.ndarray

    def __post_init__(self):
        pi_fg = np.asarray(self.pi_fg, dtype=np.float64)
        pi_bg = np.asarray(self.pi_bg, dtype=np.float64)
        if pi_fg.ndim != 1 or pi_fg.shape != pi_bg.shape:
            raise SizeMismatch("Score vectors must be 1D of equal length, got {} and {}".format(
                pi_fg.shape, pi_bg.shape
            ))
        for name, values in [("pi_fg", pi_fg), ("pi_bg", pi_bg)]:
            if values.size and (values.min() < -SCORE_SLACK or values.max() > 1 + SCORE_SLACK):
                raise InvalidParameter("{} must lie in [0, 1], got range [{}, {}]".format(
                    name, values.min(), values.max()
                ))
        object.__setattr__(self, "pi_fg", pi_fg)
        object.__setattr__(self, "pi_bg", pi_bg)

    @property
    def difference(self) -> np.ndarray:
        return self.pi_fg - self.pi_bg

    def __len__(self) -> int:
        return self.pi_fg.size


@dataclass(frozen=True, eq=False)
class PseudoPointLabels:
    """
    Per-node pseudo labels with the thresholds that produced them
    """

    labels: np.ndarray
    tau_fg: Optional[float] = None
    tau_bg: Optional[float] = None
    alpha: Optional[int] = None

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int8)
        if labels.ndim != 1:
            raise SizeMismatch("Labels must be a 1D vector, got shape {}".format(labels.shape))
        if labels.size and (labels.min() < 0 or labels.max() > max(PointLabel)):
            raise InvalidParameter("Unknown label value in {}".format(np.unique(labels).tolist()))
        object.__setattr__(self, "labels", labels)

    def nodes(self, label: PointLabel) -> np.ndarray:
        """
        Node indices carrying the given label
        """

        return np.flatnonzero(self.labels == label)

    @property
    def fg_nodes(self) -> np.ndarray:
        return self.nodes(PointLabel.FG)

    @property
    def bg_nodes(self) -> np.ndarray:
        return self.nodes(PointLabel.BG)

    def __len__(self) -> int:
        return self.labels.size


@dataclass(frozen=True, eq=False)
class SparseTarget:
    """
    Sparse binary target Y and the supervision mask K, both N x N
    """

    y_hat: np.ndarray
    k_mask: np.ndarray

    def __post_init__(self):
        y_hat = np.asarray(self.y_hat, dtype=np.uint8)
        k_mask = np.asarray(self.k_mask, dtype=np.uint8)
        if y_hat.shape != k_mask.shape or y_hat.ndim != 2:
            raise SizeMismatch("Target and supervision mask shapes differ: {} and {}".format(
                y_hat.shape, k_mask.shape
            ))
        if np.any(y_hat > k_mask):
            raise InvalidParameter("Target is set outside the supervision mask")
        object.__setattr__(self, "y_hat", y_hat)
        object.__setattr__(self, "k_mask", k_mask)


@dataclass(frozen=True)
class DropoutConfig:
    """
    Point dropout: rate of removed labels, generator seed and minimum survivors
    """

    rate: float = 0.9
    seed: int = 0
    keep_floor: int = 1

    def __post_init__(self):
        if not 0 <= self.rate < 1:
            raise InvalidParameter("Dropout rate must lie in [0, 1), got {}".format(self.rate))
        if self.seed < 0:
            raise InvalidParameter("Dropout seed must be non-negative, got {}".format(self.seed))
        if self.keep_floor < 0:
            raise InvalidParameter("Keep floor must be non-negative, got {}".format(self.keep_floor))


def _nodes(points) -> np.ndarray:
    if isinstance(points, PointSet):
        return points.as_array()
    return np.asarray(sorted(set(int(p) for p in points)), dtype=np.int64)


def propagation_scores(t_alpha, fg, bg) -> PropagationScores:
    """
    Average the seed rows of the propagated matrix

    pi_fg[i] is the mean over foreground seeds j of t_alpha[j, i]; likewise
    for pi_bg with the background seeds.
    """

    t_alpha = np.asarray(t_alpha, dtype=np.float64)
    fg_nodes, bg_nodes = _nodes(fg), _nodes(bg)
    if fg_nodes.size == 0:
        raise EmptySeedSet("Foreground seed set is empty")
    if bg_nodes.size == 0:
        raise EmptySeedSet("Background seed set is empty")
    if np.intersect1d(fg_nodes, bg_nodes).size > 0:
        raise OverlapError("Seed sets share nodes {}".format(np.intersect1d(fg_nodes, bg_nodes).tolist()))
    if t_alpha.ndim != 2 or t_alpha.shape[0] != t_alpha.shape[1]:
        raise SizeMismatch("Propagated matrix must be square, got shape {}".format(t_alpha.shape))
    if max(fg_nodes.max(), bg_nodes.max()) >= t_alpha.shape[0]:
        raise InvalidParameter("Seed node outside a grid of {} nodes".format(t_alpha.shape[0]))

    return PropagationScores(
        pi_fg=t_alpha[fg_nodes, :].mean(axis=0),
        pi_bg=t_alpha[bg_nodes, :].mean(axis=0)
    )


def threshold_labels(
        scores: PropagationScores, box_nodes, tau_fg: float, tau_bg: float,
        alpha: Optional[int] = None
    ) -> PseudoPointLabels:
    """
    Label box nodes FG or BG by their score difference

    Both thresholds are inclusive. Nodes outside box_nodes stay Unlabeled.
    """

    if tau_bg >= tau_fg:
        raise InvalidThresholds("Background threshold {} must be below foreground threshold {}".format(
            tau_bg, tau_fg
        ))

    box = _nodes(box_nodes)
    if box.size and box.max() >= len(scores):
        raise InvalidParameter("Box node outside a grid of {} nodes".format(len(scores)))

    difference = scores.difference
    labels = np.full(len(scores), PointLabel.UNLABELED, dtype=np.int8)
    labels[box[difference[box] >= tau_fg]] = PointLabel.FG
    labels[box[difference[box] <= tau_bg]] = PointLabel.BG
    logger.debug({
        "message": "Thresholded box nodes",
        "box_nodes": int(box.size),
        "fg": int(np.count_nonzero(labels == PointLabel.FG)),
        "bg": int(np.count_nonzero(labels == PointLabel.BG))
    })

    return PseudoPointLabels(labels, tau_fg, tau_bg, alpha)


def retrieve_points(
        t_alpha, fg, bg, box_nodes, tau_fg: float, tau_bg: float, alpha: Optional[int] = None
    ) -> Tuple[PropagationScores, PseudoPointLabels]:
    """
    Scores and thresholded labels in one call
    """

    scores = propagation_scores(t_alpha, fg, bg)
    return scores, threshold_labels(scores, box_nodes, tau_fg, tau_bg, alpha)


def point_dropout(
        labels: PseudoPointLabels, cfg: DropoutConfig, object_id: int = 0, epoch: int = 0
    ) -> PseudoPointLabels:
    """
    Keep a random subset of the FG labels and of the BG labels

    Each non-empty set keeps max(keep_floor, round((1 - rate) * size)) nodes,
    capped at its size. FG and BG draw from independent child generators of
    (seed, object_id, epoch).
    """

    if object_id < 0 or epoch < 0:
        raise InvalidParameter("Object id and epoch must be non-negative, got {} and {}".format(object_id, epoch))

    fg_seq, bg_seq = np.random.SeedSequence([cfg.seed, object_id, epoch]).spawn(2)
    result = np.full_like(labels.labels, PointLabel.UNLABELED)

    for label, seq in [(PointLabel.FG, fg_seq), (PointLabel.BG, bg_seq)]:
        nodes = labels.nodes(label)
        if nodes.size == 0:
            continue
        keep = max(cfg.keep_floor, int(math.floor((1 - cfg.rate) * nodes.size + 0.5)))
        keep = min(keep, nodes.size)
        survivors = np.random.default_rng(seq).choice(nodes, size=keep, replace=False)
        result[survivors] = label

    return replace(labels, labels=result)


def assemble_targets(fg, bg, labels: PseudoPointLabels, patch_side: int) -> SparseTarget:
    """
    Build the sparse target and supervision mask on the N x N grid
    """

    n_nodes = patch_side * patch_side
    if len(labels) != n_nodes:
        raise SizeMismatch("Got {} labels for a {}x{} grid".format(len(labels), patch_side, patch_side))

    fg_nodes = np.union1d(_nodes(fg), labels.fg_nodes)
    bg_nodes = np.union1d(_nodes(bg), labels.bg_nodes)
    overlap = np.intersect1d(fg_nodes, bg_nodes)
    if overlap.size > 0:
        raise OverlapError("Nodes {} are both foreground and background".format(overlap.tolist()))
    if (fg_nodes.size and fg_nodes.max() >= n_nodes) or (bg_nodes.size and bg_nodes.max() >= n_nodes):
        raise InvalidParameter("Seed node outside a grid of {} nodes".format(n_nodes))

    y_hat = np.zeros(n_nodes, dtype=np.uint8)
    k_mask = np.zeros(n_nodes, dtype=np.uint8)
    y_hat[fg_nodes] = 1
    k_mask[fg_nodes] = 1
    k_mask[bg_nodes] = 1

    return SparseTarget(y_hat.reshape(patch_side, patch_side), k_mask.reshape(patch_side, patch_side))


def retrieved_empty(labels: PseudoPointLabels) -> bool:
    """
    True when no node was retrieved as FG or BG, which triggers the MIL fallback
    """

    return not np.any(labels.labels != PointLabel.UNLABELED)


def label_counts(labels: PseudoPointLabels) -> Dict[str, int]:
    """
    Number of FG, BG and Unlabeled nodes
    """

    return {
        "fg": int(np.count_nonzero(labels.labels == PointLabel.FG)),
        "bg": int(np.count_nonzero(labels.labels == PointLabel.BG)),
        "unlabeled": int(np.count_nonzero(labels.labels == PointLabel.UNLABELED))
    }
