"""
Loss kernels of the first training stage

Dice, MIL projection, point and CRF losses plus their weighted sum. Only the
loss arithmetic lives here; nothing is optimized.
"""


from dataclasses import dataclass
import math
from typing import Optional
import numpy as np
from aws_lambda_powertools.logging.logger import Logger # pylint: disable=import-error
from .crf import CrfParams, meanfield_refine
from .exceptions import InvalidParameter, NonFinite, NotDivisible, SizeMismatch
from .geometry import BBox
from .retrieval import SparseTarget


__all__ = [
    "DiceConfig", "LossBreakdown", "LossWeights", "average_predictions", "box_mask",
    "crf_loss", "dice_grad", "dice_loss", "downsample_mask", "mil_loss",
    "overall_loss", "point_loss", "project_x", "project_y", "stage_one_loss"
]


logger = Logger(service="exits", child=True) # pylint: disable=invalid-name


@dataclass(frozen=True)
class DiceConfig:
    """
    Smoothing constant added to numerator and denominator
    """

    epsilon: float = 1e-6

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InvalidParameter("Dice epsilon must be positive, got {}".format(self.epsilon))


@dataclass(frozen=True)
class LossWeights:
    """
    Weights of the point, CRF and MIL terms
    """

    point: float = 0.5
    crf: float = 0.5
    mil: float = 10.0

    def __post_init__(self):
        for name in ["point", "crf", "mil"]:
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise InvalidParameter("Loss weight '{}' must be finite and non-negative, got {}".format(name, value))


@dataclass(frozen=True)
class LossBreakdown:
    """
    Every term of the stage-one objective
    """

    point_dice: float
    mil: float
    mil_active: bool
    point: float
    crf: float
    total: float


def _pair(p, q):
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise SizeMismatch("Shapes differ: {} and {}".format(p.shape, q.shape))
    return p, q


def dice_loss(p, q, cfg: DiceConfig = DiceConfig()) -> float:
    """
    1 - (2 sum(p q) + eps) / (sum(p) + sum(q) + eps)
    """

    p, q = _pair(p, q)
    numerator = 2.0 * np.sum(p * q) + cfg.epsilon
    denominator = np.sum(p) + np.sum(q) + cfg.epsilon
    return float(1.0 - numerator / denominator)


def dice_grad(p, q, cfg: DiceConfig = DiceConfig()) -> np.ndarray:
    """
    Gradient of dice_loss with respect to p
    """

    p, q = _pair(p, q)
    numerator = 2.0 * np.sum(p * q) + cfg.epsilon
    denominator = np.sum(p) + np.sum(q) + cfg.epsilon
    return -(2.0 * q * denominator - numerator) / denominator ** 2


def project_x(mask) -> np.ndarray:
    """
    Per-column maximum, length W
    """

    return np.asarray(mask, dtype=np.float64).max(axis=0)


def project_y(mask) -> np.ndarray:
    """
    Per-row maximum, length H
    """

    return np.asarray(mask, dtype=np.float64).max(axis=1)


def box_mask(box: BBox, shape) -> np.ndarray:
    """
    Filled rectangle mask of the box, clipped to shape
    """

    mask = np.zeros(tuple(shape), dtype=np.float64)
    mask[max(box.y_min, 0):box.y_max + 1, max(box.x_min, 0):box.x_max + 1] = 1.0
    return mask


def mil_loss(mask, box, cfg: DiceConfig = DiceConfig()) -> float:
    """
    Dice of the column projections plus dice of the row projections
    """

    mask, box = _pair(mask, box)
    if mask.ndim != 2:
        raise SizeMismatch("Expected 2D masks, got shape {}".format(mask.shape))
    return (dice_loss(project_x(mask), project_x(box), cfg)
            + dice_loss(project_y(mask), project_y(box), cfg))


def downsample_mask(mask, patch_side: int) -> np.ndarray:
    """
    Average-pool a mask to patch_side x patch_side
    """

    mask = np.asarray(mask, dtype=np.float64)
    if mask.ndim != 2:
        raise SizeMismatch("Expected a 2D mask, got shape {}".format(mask.shape))
    height, width = mask.shape
    if patch_side < 1 or height % patch_side or width % patch_side:
        raise NotDivisible("Mask {}x{} is not divisible into {}x{} cells".format(
            height, width, patch_side, patch_side
        ))
    return mask.reshape(patch_side, height // patch_side, patch_side, width // patch_side).mean(axis=(1, 3))


def point_loss(
        m_tilde, target: SparseTarget, retrieved_empty: bool, mask=None, box=None,
        weights: LossWeights = LossWeights(), cfg: DiceConfig = DiceConfig()
    ) -> float:
    """
    Dice between the masked downsampled prediction and the sparse target

    When no point was retrieved, the MIL loss of the full-resolution mask
    against the box is added with weight weights.mil.
    """

    m_tilde = np.asarray(m_tilde, dtype=np.float64)
    if m_tilde.shape != target.y_hat.shape:
        raise SizeMismatch("Prediction {} does not match target {}".format(m_tilde.shape, target.y_hat.shape))

    loss = dice_loss(m_tilde * target.k_mask, target.y_hat, cfg)
    if retrieved_empty:
        if mask is None or box is None:
            raise InvalidParameter("MIL fallback needs the full mask and the box mask")
        loss += weights.mil * mil_loss(mask, box, cfg)
    return loss


def average_predictions(m_student, m_teacher) -> np.ndarray:
    """
    Entrywise mean of student and teacher predictions
    """

    m_student, m_teacher = _pair(m_student, m_teacher)
    return (m_student + m_teacher) / 2


def crf_loss(m_student, m_refined, cfg: DiceConfig = DiceConfig()) -> float:
    """
    Dice between the prediction and its CRF refinement
    """

    return dice_loss(m_student, m_refined, cfg)


def overall_loss(l_point: float, l_crf: float, weights: LossWeights = LossWeights()) -> float:
    """
    Weighted sum of the point and CRF losses
    """

    if not (math.isfinite(l_point) and math.isfinite(l_crf)):
        raise NonFinite("Loss components must be finite, got point={} crf={}".format(l_point, l_crf))
    return weights.point * l_point + weights.crf * l_crf


def stage_one_loss(
        m_student, target: SparseTarget, retrieved_empty: bool, box, image,
        m_teacher: Optional[np.ndarray] = None, weights: LossWeights = LossWeights(),
        crf_params: CrfParams = CrfParams(), cfg: DiceConfig = DiceConfig()
    ) -> LossBreakdown:
    """
    Evaluate the complete stage-one objective for one object

    The student mask is downsampled to the target grid for the point loss.
    The CRF refines the student/teacher average; without a teacher the
    student stands in for it.
    """

    m_student = np.asarray(m_student, dtype=np.float64)
    patch_side = target.y_hat.shape[0]
    m_tilde = downsample_mask(m_student, patch_side)

    point_dice = dice_loss(m_tilde * target.k_mask, target.y_hat, cfg)
    mil = mil_loss(m_student, box, cfg) if retrieved_empty else 0.0
    point = point_dice + (weights.mil * mil if retrieved_empty else 0.0)

    m_avg = average_predictions(m_student, m_student if m_teacher is None else m_teacher)
    refined = meanfield_refine(m_avg, image, crf_params)
    crf = crf_loss(m_student, refined, cfg)

    total = overall_loss(point, crf, weights)
    if retrieved_empty:
        logger.warning({"message": "No point retrieved, MIL fallback active", "mil": mil})
    logger.debug({"message": "Stage-one loss", "point": point, "crf": crf, "total": total})

    return LossBreakdown(
        point_dice=point_dice, mil=mil, mil_active=bool(retrieved_empty),
        point=point, crf=crf, total=total
    )
