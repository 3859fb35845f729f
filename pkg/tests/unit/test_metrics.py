import numpy as np
import pytest
from exits import metrics
from exits.exceptions import DivisionByZero, InvalidParameter, SizeMismatch
from exits.metrics import PointPR
from exits.retrieval import PseudoPointLabels
from fixtures import rng # pylint: disable=import-error
from helpers import confusion_counts # pylint: disable=import-error


def test_iou():
    """
    Test iou()
    """

    mask = np.array([[1, 1], [0, 1]])

    assert metrics.iou(mask, mask) == 1.0
    assert metrics.iou(mask, 1 - mask) == 0.0
    assert metrics.iou([1, 1, 0], [0, 1, 1]) == pytest.approx(1 / 3)
    assert metrics.iou(np.zeros((3, 3)), np.zeros((3, 3))) == 1.0


def test_iou_shape():
    with pytest.raises(SizeMismatch):
        metrics.iou(np.zeros((2, 2)), np.zeros((2, 3)))


def test_gt_node_labels():
    gt = metrics.gt_node_labels([0, 1, 2, 1, 3], 1, ignore=[3])

    assert gt.tolist() == [0, 1, 0, 1, -1]


def test_point_label_pr_oracle(rng):
    """
    Test point_label_pr() against direct counting
    """

    for _ in range(30):
        labels = rng.integers(0, 3, 64)
        gt = rng.integers(-1, 2, 64)

        result = metrics.point_label_pr(PseudoPointLabels(labels), gt)

        expected = confusion_counts(labels, gt)
        if expected["pred_fg"] + expected["pred_bg"] == 0:
            assert not result.labeled
            continue
        for key, value in expected.items():
            assert getattr(result, key) == value
        if expected["pred_fg"]:
            assert result.precision_fg == expected["tp_fg"] / expected["pred_fg"]
        if expected["actual_bg"]:
            assert result.recall_bg == expected["tp_bg"] / expected["actual_bg"]


def test_point_label_pr_unlabeled():
    """
    Test that no labeled node leaves every ratio undefined
    """

    result = metrics.point_label_pr(PseudoPointLabels(np.zeros(4)), [1, 0, 0, 1])

    assert not result.labeled
    assert result.precision_fg is None
    assert result.recall_fg is None
    assert result.precision_bg is None
    assert result.recall_bg is None


def test_point_label_pr_empty_class():
    result = metrics.point_label_pr(PseudoPointLabels([2, 2, 0]), [0, 0, 1])

    assert result.precision_bg == 1.0
    assert result.precision_fg is None
    assert result.recall_fg == 0.0


def test_point_label_pr_shape():
    with pytest.raises(SizeMismatch):
        metrics.point_label_pr(PseudoPointLabels([1, 2]), [1, 0, 0])


def test_point_pr_add():
    """
    Test PointPR micro aggregation
    """

    first = PointPR(1, 2, 3, 4, 5, 6)
    second = PointPR(1, 1, 1, 1, 1, 1)

    total = first + second + PointPR(labeled=False)

    assert total == PointPR(2, 3, 4, 5, 6, 7)
    assert total.precision_fg == 2 / 3
    assert (PointPR(labeled=False) + PointPR(labeled=False)).precision_fg is None


def test_retention():
    """
    Test retention()
    """

    assert metrics.retention(40.0, 40.0) == 1.0
    assert metrics.retention(0.0, 40.0) == 0.0
    assert metrics.retention(38.2, 40.0) == pytest.approx(0.955)
    with pytest.raises(DivisionByZero):
        metrics.retention(10.0, 0.0)
    with pytest.raises(InvalidParameter):
        metrics.retention(-1.0, 40.0)


def test_evaluate_masks():
    """
    Test evaluate_masks() mean and point ratios
    """

    gt = np.zeros((4, 4))
    gt[:2, :2] = 1
    half = np.zeros((4, 4))
    half[:2, :1] = 1

    report = metrics.evaluate_masks([gt, half], [gt, gt], PointPR(3, 4, 6, 2, 2, 5))

    assert report.per_object_iou == [1.0, 0.5]
    assert report.mean_iou == 0.75
    assert report.point_precision_fg == 0.75
    assert report.point_recall_fg == 0.5
    assert report.point_recall_bg == 0.4
    assert report.n_objects == 2


def test_evaluate_masks_empty():
    report = metrics.evaluate_masks([], [])

    assert report.mean_iou is None
    assert report.point_precision_fg is None
    with pytest.raises(SizeMismatch):
        metrics.evaluate_masks([np.zeros(2)], [])


def test_compare_reports():
    better = metrics.evaluate_masks([np.ones(2)], [np.ones(2)])
    worse = metrics.evaluate_masks([np.array([1, 0])], [np.ones(2)])

    assert metrics.compare_reports(better, worse) == 0.5
    assert metrics.compare_reports(better, metrics.evaluate_masks([], [])) is None
