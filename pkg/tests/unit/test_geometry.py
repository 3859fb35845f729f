import numpy as np
import pytest
from exits import geometry
from exits.exceptions import EmptyBackground, EmptyMask, InvalidParameter, OutOfWindow
from exits.geometry import BBox, CropWindow, ExtremePoints, PointRole, PointSet
from fixtures import rng, window8 # pylint: disable=import-error
from helpers import brute_extreme_points, random_polyomino # pylint: disable=import-error


@pytest.fixture
def extreme():
    return ExtremePoints(top=(5, 0), left=(0, 4), bottom=(6, 9), right=(9, 5))


def test_bbox_from_extremes(extreme):
    """
    Test bbox_from_extremes()
    """

    assert geometry.bbox_from_extremes(extreme) == BBox(0, 0, 9, 9)


def test_bbox_from_extremes_single_pixel():
    """
    Test bbox_from_extremes() with all four points equal
    """

    ep = ExtremePoints((3, 3), (3, 3), (3, 3), (3, 3))

    assert geometry.bbox_from_extremes(ep) == BBox(3, 3, 3, 3)


def test_bbox_from_extremes_hand_example():
    ep = ExtremePoints(top=(2, 1), left=(1, 3), bottom=(4, 8), right=(7, 2))

    assert geometry.bbox_from_extremes(ep) == BBox(1, 1, 7, 8)


def test_extreme_points_invalid():
    """
    Test ExtremePoints with the top point below the bottom one
    """

    with pytest.raises(InvalidParameter):
        ExtremePoints(top=(2, 9), left=(1, 3), bottom=(4, 1), right=(7, 2))


def test_check_bounds(extreme):
    """
    Test ExtremePoints.check_bounds()
    """

    extreme.check_bounds(10, 10)
    with pytest.raises(InvalidParameter):
        extreme.check_bounds(9, 10)


def test_foreground_points(extreme):
    """
    Test foreground_points()
    """

    box = geometry.bbox_from_extremes(extreme)

    points = geometry.foreground_points(extreme, 2, box)

    assert set(points) == {(5, 2), (2, 4), (6, 7), (7, 5)}


def test_foreground_points_zero_margin(extreme):
    box = geometry.bbox_from_extremes(extreme)

    points = geometry.foreground_points(extreme, 0, box)

    assert points == [extreme.top, extreme.left, extreme.bottom, extreme.right]


def test_foreground_points_clamped():
    """
    Test foreground_points() on a box flatter than twice the margin
    """

    ep = ExtremePoints(top=(4, 10), left=(0, 11), bottom=(5, 12), right=(9, 11))
    box = geometry.bbox_from_extremes(ep)

    points = geometry.foreground_points(ep, 5, box)

    for x, y in points:
        assert box.contains(x, y)
    assert points[0] == (4, 12)
    assert points[2] == (5, 10)


def test_pixel_to_patch(window8):
    """
    Test pixel_to_patch()
    """

    assert geometry.pixel_to_patch((0, 0), window8) == 0
    assert geometry.pixel_to_patch((511, 511), window8) == 63
    assert geometry.pixel_to_patch((300, 100), window8) == 12


def test_pixel_to_patch_outside(window8):
    with pytest.raises(OutOfWindow):
        geometry.pixel_to_patch((512, 0), window8)


def test_node_map_matches_pixel_to_patch():
    """
    Test node_map() against pixel_to_patch() on a window smaller than the target
    """

    window = CropWindow(BBox(-3, 5, 36, 27), 64, 8)

    nodes = geometry.node_map(window)

    assert nodes.shape == (23, 40)
    for y in range(window.rect.y_min, window.rect.y_max + 1):
        for x in range(window.rect.x_min, window.rect.x_max + 1):
            assert nodes[y - 5, x + 3] == geometry.pixel_to_patch((x, y), window)


def test_patch_ranges_match_node_map():
    """
    Test patch_ranges() against the columns and rows of node_map()
    """

    window = CropWindow(BBox(10, 20, 46, 48), 512, 16)
    nodes = geometry.node_map(window)

    cols, rows = geometry.patch_ranges(window)

    for c in range(16):
        xs = np.flatnonzero(nodes[0] % 16 == c) + window.rect.x_min
        assert [xs.min(), xs.max()] == cols[c].tolist()
    for r in range(16):
        ys = np.flatnonzero(nodes[:, 0] // 16 == r) + window.rect.y_min
        assert [ys.min(), ys.max()] == rows[r].tolist()


def test_crop_window():
    """
    Test crop_window() padding and widening to the patch count
    """

    window = geometry.crop_window(BBox(10, 10, 29, 19), 0.2, 512, 16)

    assert window.rect == BBox(6, 7, 33, 22)
    assert window.rect.width == 28
    assert window.rect.height == 16


def test_crop_window_negative_pad():
    with pytest.raises(InvalidParameter):
        geometry.crop_window(BBox(0, 0, 9, 9), -0.1)


def test_initial_background(window8):
    """
    Test initial_background() with a box covering patches 2..5
    """

    box = BBox(128, 128, 383, 383)

    bg = geometry.initial_background(box, window8)

    # Oracle: a patch is background when its rectangle misses the box
    expected = []
    for r in range(8):
        for c in range(8):
            patch = BBox(c * 64, r * 64, c * 64 + 63, r * 64 + 63)
            if not patch.intersects(box):
                expected.append(r * 8 + c)
    assert bg.role == PointRole.INITIAL_BG
    assert list(bg.nodes) == expected
    assert len(bg) == 48


def test_initial_background_border(window8):
    """
    Test initial_background() with a box over the central 6x6 patches
    """

    bg = geometry.initial_background(BBox(64, 64, 447, 447), window8)

    assert len(bg) == 4 * 8 - 4


def test_initial_background_whole_window(window8):
    with pytest.raises(EmptyBackground):
        geometry.initial_background(BBox(0, 0, 511, 511), window8)


def test_initial_background_straddling(window8):
    """
    Test that patches straddling the box edge are not background
    """

    bg = geometry.initial_background(BBox(100, 100, 400, 400), window8)

    assert 9 not in bg
    assert 0 in bg


def test_box_interior(window8):
    """
    Test box_interior() with four FG seeds inside the box
    """

    box = BBox(128, 128, 383, 383)
    fg = PointSet(PointRole.INITIAL_FG, (18, 21, 42, 45))

    interior = geometry.box_interior(box, window8, fg)

    assert interior.role == PointRole.BOX_INTERIOR
    assert len(interior) == 12
    assert not set(interior.nodes) & set(fg.nodes)


def test_box_interior_whole_window(window8):
    interior = geometry.box_interior(BBox(0, 0, 511, 511), window8)

    assert len(interior) == 64


def test_box_interior_small_box(window8):
    """
    Test box_interior() with a box smaller than one patch
    """

    assert len(geometry.box_interior(BBox(10, 10, 20, 20), window8)) <= 1
    assert list(geometry.box_interior(BBox(20, 20, 40, 40), window8).nodes) == [0]


def test_scale_delta():
    """
    Test scale_delta()
    """

    window = CropWindow(BBox(0, 0, 127, 63), 512, 16)

    assert geometry.scale_delta(12, window) == (3, 2)
    assert geometry.scale_delta(0, window) == (0, 0)
    with pytest.raises(InvalidParameter):
        geometry.scale_delta(-1, window)


def test_initial_foreground():
    """
    Test initial_foreground() on an object filling the window
    """

    ep = ExtremePoints(top=(256, 0), left=(0, 256), bottom=(256, 511), right=(511, 256))
    box = geometry.bbox_from_extremes(ep)
    window = CropWindow(box, 512, 8)

    fg = geometry.initial_foreground(ep, 64, box, window)

    # (256, 64) -> row 1 col 4; (64, 256) -> row 4 col 1; (256, 447) -> row 6 col 4; (447, 256) -> row 4 col 6
    assert list(fg.nodes) == [12, 33, 38, 52]


def test_point_set_build():
    """
    Test PointSet.build() sorting and deduplication
    """

    points = PointSet.build(PointRole.INITIAL_FG, [5, 3, 5, 1])

    assert points.nodes == (1, 3, 5)
    assert 3 in points
    with pytest.raises(InvalidParameter):
        PointSet.build(PointRole.INITIAL_FG, [64], n_nodes=64)
    with pytest.raises(InvalidParameter):
        PointSet(PointRole.INITIAL_FG, (3, 1))


def test_extract_extreme_points_single_pixel():
    mask = np.zeros((10, 10), dtype=np.uint8)
    mask[3, 3] = 1

    ep = geometry.extract_extreme_points(mask)

    assert ep == ExtremePoints((3, 3), (3, 3), (3, 3), (3, 3))


def test_extract_extreme_points_row():
    """
    Test extract_extreme_points() tie-breaking on a full row
    """

    mask = np.zeros((10, 10), dtype=np.uint8)
    mask[2, :] = 1

    ep = geometry.extract_extreme_points(mask)

    assert ep.top == (0, 2)
    assert ep.left == (0, 2)
    assert ep.bottom == (0, 2)
    assert ep.right == (9, 2)


def test_extract_extreme_points_l_shape():
    """
    Test extract_extreme_points() on an L-shaped polyomino against a pixel scan
    """

    mask = np.zeros((10, 10), dtype=np.uint8)
    mask[1:8, 2:4] = 1
    mask[6:8, 2:9] = 1

    ep = geometry.extract_extreme_points(mask)

    top, left, bottom, right = brute_extreme_points(mask.tolist())
    assert ep == ExtremePoints(top, left, bottom, right)


def test_extract_extreme_points_empty():
    with pytest.raises(EmptyMask):
        geometry.extract_extreme_points(np.zeros((4, 4)))


def test_extreme_point_round_trip(rng):
    """
    Test that extreme points of random polyominoes bound the tight box exactly
    """

    for _ in range(1000):
        mask = random_polyomino(rng)

        ep = geometry.extract_extreme_points(mask)

        assert geometry.bbox_from_extremes(ep) == geometry.tight_bbox(mask)
        assert ep == ExtremePoints(*brute_extreme_points(mask.tolist()))


def test_crop_and_paste():
    """
    Test crop() edge replication and paste() border clipping
    """

    image = np.arange(16).reshape(4, 4)
    rect = BBox(-1, 2, 1, 5)

    cropped = geometry.crop(image, rect)

    assert cropped.shape == (4, 3)
    assert cropped[0].tolist() == [8, 8, 9]
    assert cropped[3].tolist() == [12, 12, 13]

    pasted = geometry.paste(np.ones((4, 3), dtype=np.uint8), rect, (4, 4))
    assert pasted.sum() == 4
    assert pasted[2:4, 0:2].tolist() == [[1, 1], [1, 1]]


def test_resample_to_target():
    """
    Test resample_to_target() nearest-neighbour mapping
    """

    image = np.arange(64).reshape(8, 8)
    window = CropWindow(BBox(2, 2, 5, 5), 8, 4)

    resampled = geometry.resample_to_target(image, window)

    assert resampled.shape == (8, 8)
    assert resampled[0, 0] == image[2, 2]
    assert resampled[7, 7] == image[5, 5]
    assert resampled[1, 1] == image[2, 2]


def test_seed_sets_disjoint(rng):
    """
    Test that FG seeds, BG seeds and box candidates never share a node
    """

    checked = 0
    for _ in range(300):
        mask = random_polyomino(rng, side=40, cells=int(rng.integers(1, 200)))
        ep = geometry.extract_extreme_points(mask)
        box = geometry.bbox_from_extremes(ep)
        patch_side = int(rng.choice([4, 8, 16]))
        window = geometry.crop_window(box, float(rng.uniform(0.0, 0.5)), 64 * patch_side // 4, patch_side)

        fg = geometry.initial_foreground(ep, geometry.scale_delta(int(rng.integers(0, 80)), window), box, window)
        try:
            bg = geometry.initial_background(box, window)
        except EmptyBackground:
            continue
        interior = geometry.box_interior(box, window, fg)

        assert not set(fg.nodes) & set(bg.nodes)
        assert not set(fg.nodes) & set(interior.nodes)
        assert not set(bg.nodes) & set(interior.nodes)
        assert max(fg.nodes + bg.nodes + interior.nodes) < window.n_nodes
        checked += 1
    assert checked > 100


def test_pixel_to_patch_surjective(rng):
    """
    Test that the pixels of random windows reach every patch node
    """

    for _ in range(20):
        patch_side = int(rng.choice([2, 4, 8]))
        width, height = (int(side) for side in rng.integers(patch_side, 40, size=2))
        x_min, y_min = (int(corner) for corner in rng.integers(-20, 20, size=2))
        window = CropWindow(BBox(x_min, y_min, x_min + width - 1, y_min + height - 1), 16 * patch_side, patch_side)

        nodes = {
            geometry.pixel_to_patch((x, y), window)
            for y in range(y_min, y_min + height)
            for x in range(x_min, x_min + width)
        }

        assert nodes == set(range(window.n_nodes))
