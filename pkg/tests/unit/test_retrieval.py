import numpy as np
import pytest
from exits import retrieval, tpm
from exits.exceptions import EmptySeedSet, InvalidParameter, InvalidThresholds, OverlapError, SizeMismatch
from exits.geometry import PointRole, PointSet
from exits.retrieval import DropoutConfig, PointLabel, PropagationScores, PseudoPointLabels
from fixtures import rng, two_communities # pylint: disable=import-error
from helpers import random_doubly_stochastic # pylint: disable=import-error


def _labels(fg_nodes, bg_nodes, n):
    labels = np.zeros(n, dtype=np.int8)
    labels[list(fg_nodes)] = PointLabel.FG
    labels[list(bg_nodes)] = PointLabel.BG
    return PseudoPointLabels(labels, 1e-3, -1e-4, 3)


def test_propagation_scores_identity():
    """
    Test propagation_scores() with an identity matrix
    """

    scores = retrieval.propagation_scores(np.eye(6), [3], [0])

    assert scores.pi_fg.tolist() == [0, 0, 0, 1, 0, 0]
    assert scores.pi_bg.tolist() == [1, 0, 0, 0, 0, 0]


def test_propagation_scores_communities():
    """
    Test propagation_scores() on two uniform communities
    """

    t_alpha = np.zeros((7, 7))
    t_alpha[:3, :3] = 1 / 3
    t_alpha[3:, 3:] = 1 / 4

    scores = retrieval.propagation_scores(t_alpha, PointSet(PointRole.INITIAL_FG, (1,)), [5, 6])

    assert np.allclose(scores.pi_fg, [1 / 3] * 3 + [0] * 4)
    assert np.allclose(scores.pi_bg, [0] * 3 + [1 / 4] * 4)


def test_propagation_scores_summation(rng):
    """
    Test propagation_scores() against a direct summation
    """

    t_alpha = rng.dirichlet(np.ones(8), size=8)
    fg, bg = [1, 4, 6], [0, 7]

    scores = retrieval.propagation_scores(t_alpha, fg, bg)

    for i in range(8):
        assert scores.pi_fg[i] == pytest.approx(sum(t_alpha[j, i] for j in fg) / 3, abs=1e-15)
        assert scores.pi_bg[i] == pytest.approx(sum(t_alpha[j, i] for j in bg) / 2, abs=1e-15)


def test_propagation_scores_errors():
    with pytest.raises(EmptySeedSet):
        retrieval.propagation_scores(np.eye(4), [], [1])
    with pytest.raises(EmptySeedSet):
        retrieval.propagation_scores(np.eye(4), [1], [])
    with pytest.raises(OverlapError):
        retrieval.propagation_scores(np.eye(4), [1, 2], [2, 3])
    with pytest.raises(InvalidParameter):
        retrieval.propagation_scores(np.eye(4), [1], [4])


def test_propagation_scores_out_of_range():
    """
    Test PropagationScores with values outside [0, 1]
    """

    with pytest.raises(InvalidParameter):
        PropagationScores(np.array([0.5, 1.5]), np.array([0.0, 0.0]))
    with pytest.raises(SizeMismatch):
        PropagationScores(np.array([0.5]), np.array([0.0, 0.0]))


def test_threshold_labels_ambiguous():
    """
    Test threshold_labels() with a zero difference
    """

    scores = PropagationScores(np.array([0.2, 0.3, 0.1]), np.array([0.2, 0.3, 0.1]))

    labels = retrieval.threshold_labels(scores, [0, 1, 2], 1e-3, -1e-4)

    assert labels.labels.tolist() == [0, 0, 0]
    assert retrieval.retrieved_empty(labels)


def test_threshold_labels_inclusive():
    """
    Test that both thresholds are inclusive and only box nodes are labeled
    """

    scores = PropagationScores(np.array([0.5, 0.5, 0.5, 0.5]), np.array([0.0, 0.5, 0.75, 0.0]))

    labels = retrieval.threshold_labels(scores, [0, 1, 2], 0.5, -0.25, alpha=3)

    assert labels.labels.tolist() == [PointLabel.FG, PointLabel.UNLABELED, PointLabel.BG, PointLabel.UNLABELED]
    assert labels.alpha == 3
    assert retrieval.label_counts(labels) == {"fg": 1, "bg": 1, "unlabeled": 2}


def test_threshold_labels_invalid():
    scores = PropagationScores(np.zeros(2), np.zeros(2))

    with pytest.raises(InvalidThresholds):
        retrieval.threshold_labels(scores, [0], -1e-4, 1e-3)
    with pytest.raises(InvalidThresholds):
        retrieval.threshold_labels(scores, [0], 0.1, 0.1)


def test_retrieve_points_communities(two_communities):
    """
    Test retrieve_points() on a two-community similarity
    """

    similarity = two_communities(8, 8, leak=0.01)
    transition = tpm.transition_matrix(similarity)
    t_alpha = tpm.propagate_power(transition, 3)
    box = list(range(2, 14))

    _, labels = retrieval.retrieve_points(t_alpha, [0, 1], [14, 15], box, 1e-3, -1e-4, 3)

    assert labels.fg_nodes.tolist() == list(range(2, 8))
    assert labels.bg_nodes.tolist() == list(range(8, 14))


def test_point_dropout_counts():
    """
    Test point_dropout() survivor counts and determinism
    """

    labels = _labels(range(40), range(40, 100), 128)
    cfg = DropoutConfig(rate=0.9, seed=42)

    first = retrieval.point_dropout(labels, cfg, object_id=3, epoch=1)
    second = retrieval.point_dropout(labels, cfg, object_id=3, epoch=1)

    assert len(first.fg_nodes) == 4
    assert len(first.bg_nodes) == 6
    assert set(first.fg_nodes) <= set(range(40))
    assert set(first.bg_nodes) <= set(range(40, 100))
    assert np.array_equal(first.labels, second.labels)
    assert first.tau_fg == labels.tau_fg


def test_point_dropout_streams():
    """
    Test that the epoch and the object id change the survivors
    """

    labels = _labels(range(40), range(40, 100), 128)
    cfg = DropoutConfig(rate=0.9, seed=42)

    base = retrieval.point_dropout(labels, cfg, object_id=3, epoch=1)

    assert not np.array_equal(base.labels, retrieval.point_dropout(labels, cfg, object_id=3, epoch=2).labels)
    assert not np.array_equal(base.labels, retrieval.point_dropout(labels, cfg, object_id=4, epoch=1).labels)


def test_point_dropout_no_rate():
    labels = _labels(range(5), range(5, 9), 16)

    result = retrieval.point_dropout(labels, DropoutConfig(rate=0.0))

    assert np.array_equal(result.labels, labels.labels)


def test_point_dropout_floor():
    """
    Test that a single FG label survives with keep_floor 1
    """

    labels = _labels([7], range(10, 20), 32)

    for seed in range(20):
        result = retrieval.point_dropout(labels, DropoutConfig(rate=0.9, seed=seed, keep_floor=1))

        assert result.fg_nodes.tolist() == [7]
        assert len(result.bg_nodes) == 1


def test_dropout_config_invalid():
    with pytest.raises(InvalidParameter):
        DropoutConfig(rate=1.0)
    with pytest.raises(InvalidParameter):
        DropoutConfig(keep_floor=-1)


def test_assemble_targets_seeds_only():
    """
    Test assemble_targets() without retrieved points
    """

    labels = _labels([], [], 64)

    target = retrieval.assemble_targets([9, 10], [0, 63, 7], labels, 8)

    assert target.y_hat.sum() == 2
    assert target.k_mask.sum() == 5
    assert target.y_hat[1, 1] == 1 and target.y_hat[1, 2] == 1


def test_assemble_targets_all_labeled():
    labels = _labels(range(2, 30), range(30, 62), 64)

    target = retrieval.assemble_targets([0, 1], [62, 63], labels, 8)

    assert np.all(target.k_mask == 1)
    assert target.y_hat.sum() == 30


def test_assemble_targets_mixed(rng):
    """
    Test assemble_targets() against set cardinalities
    """

    nodes = rng.permutation(64)
    fg_seeds, bg_seeds = nodes[:3], nodes[3:10]
    labels = _labels(nodes[10:20], nodes[20:35], 64)

    target = retrieval.assemble_targets(fg_seeds, bg_seeds, labels, 8)

    assert np.all(target.y_hat <= target.k_mask)
    assert target.y_hat.sum() == 13
    assert target.k_mask.sum() == 35


def test_assemble_targets_errors():
    labels = _labels([3], [], 64)

    with pytest.raises(OverlapError):
        retrieval.assemble_targets([1], [3], labels, 8)
    with pytest.raises(SizeMismatch):
        retrieval.assemble_targets([1], [2], labels, 4)


def test_sparse_target_invalid():
    """
    Test SparseTarget with a target outside the supervision mask
    """

    with pytest.raises(InvalidParameter):
        retrieval.SparseTarget(np.ones((2, 2)), np.zeros((2, 2)))


def test_threshold_labels_monotone(rng):
    """
    Test that raising tau_fg adds no FG label and lowering tau_bg adds no BG label
    """

    for _ in range(200):
        n = int(rng.integers(4, 64))
        scores = PropagationScores(rng.uniform(0, 0.01, n), rng.uniform(0, 0.01, n))
        box = np.flatnonzero(rng.uniform(size=n) < 0.7)
        tau_bg_low, tau_bg, tau_fg, tau_fg_high = np.sort(rng.uniform(-0.01, 0.01, 4))
        if tau_bg == tau_fg:
            continue

        base = retrieval.threshold_labels(scores, box, tau_fg, tau_bg)
        stricter_fg = retrieval.threshold_labels(scores, box, tau_fg_high, tau_bg)
        stricter_bg = retrieval.threshold_labels(scores, box, tau_fg, tau_bg_low)

        assert set(stricter_fg.fg_nodes) <= set(base.fg_nodes)
        assert np.array_equal(stricter_fg.bg_nodes, base.bg_nodes)
        assert set(stricter_bg.bg_nodes) <= set(base.bg_nodes)
        assert np.array_equal(stricter_bg.fg_nodes, base.fg_nodes)


def test_propagation_scores_conserved(rng):
    """
    Test that scores over a doubly-stochastic propagated matrix sum to one
    """

    for _ in range(50):
        n = int(rng.integers(4, 40))
        transition = random_doubly_stochastic(rng, n)
        nodes = rng.permutation(n)
        split = int(rng.integers(1, n))

        scores = retrieval.propagation_scores(
            tpm.propagate_power(transition, int(rng.integers(1, 6))), nodes[:split], nodes[split:]
        )

        assert abs(scores.pi_fg.sum() - 1.0) < 1e-9
        assert abs(scores.pi_bg.sum() - 1.0) < 1e-9


def test_point_dropout_subset(rng):
    """
    Test that dropout survivors keep their label on random label vectors
    """

    for index in range(200):
        labels = PseudoPointLabels(rng.integers(0, 3, int(rng.integers(1, 100))).astype(np.int8))
        cfg = DropoutConfig(rate=float(rng.uniform(0, 0.99)), seed=index, keep_floor=int(rng.integers(0, 4)))

        kept = retrieval.point_dropout(labels, cfg, object_id=int(rng.integers(0, 10)), epoch=index % 3)

        assert set(kept.fg_nodes) <= set(labels.fg_nodes)
        assert set(kept.bg_nodes) <= set(labels.bg_nodes)
        assert len(kept) == len(labels)
