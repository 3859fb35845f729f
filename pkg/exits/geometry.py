"""
Geometry of extreme points, boxes, crop windows and the patch grid

Coordinates are integer pixel centers with the origin at the top-left corner and
y growing downward. Masks and images are indexed as array[y, x].
"""


from dataclasses import dataclass
from enum import Enum
import math
from typing import Iterable, List, Optional, Sequence, Tuple, Union
import numpy as np
from .exceptions import (
    EmptyBackground, EmptyMask, InvalidParameter, OutOfWindow, SizeMismatch
)


__all__ = [
    "BBox", "CropWindow", "ExtremePoints", "PointRole", "PointSet",
    "bbox_from_extremes", "box_interior", "crop", "crop_window",
    "extract_extreme_points", "foreground_points", "initial_background",
    "initial_foreground", "node_map", "paste", "patch_ranges", "pixel_to_patch",
    "resample_to_target", "scale_delta", "tight_bbox"
]


Point = Tuple[int, int]
Delta = Union[int, Tuple[int, int]]


class PointRole(Enum):
    """
    Role of a point set in the retrieval process
    """

    INITIAL_FG = "InitialFG"
    INITIAL_BG = "InitialBG"
    BOX_INTERIOR = "BoxInterior"


@dataclass(frozen=True)
class BBox:
    """
    Axis-aligned box with inclusive pixel bounds
    """

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self):
        for name in ["x_min", "y_min", "x_max", "y_max"]:
            object.__setattr__(self, name, int(getattr(self, name)))
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise InvalidParameter("Invalid box {}".format(self.as_tuple()))

    @property
    def width(self) -> int:
        return self.x_max - self.x_min + 1

    @property
    def height(self) -> int:
        return self.y_max - self.y_min + 1

    def as_tuple(self) -> Tuple[int, int, int, int]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    def contains(self, x: int, y: int) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    def contains_box(self, other: "BBox") -> bool:
        return (self.x_min <= other.x_min and self.y_min <= other.y_min
                and other.x_max <= self.x_max and other.y_max <= self.y_max)

    def intersects(self, other: "BBox") -> bool:
        return not (other.x_max < self.x_min or other.x_min > self.x_max
                    or other.y_max < self.y_min or other.y_min > self.y_max)


@dataclass(frozen=True)
class ExtremePoints:
    """
    The topmost, leftmost, bottommost and rightmost pixels of one object
    """

    top: Point
    left: Point
    bottom: Point
    right: Point

    def __post_init__(self):
        for name in ["top", "left", "bottom", "right"]:
            point = getattr(self, name)
            if len(point) != 2:
                raise InvalidParameter("Extreme point '{}' must have two coordinates, got {}".format(name, point))
            object.__setattr__(self, name, (int(point[0]), int(point[1])))
        if self.top[1] > self.bottom[1]:
            raise InvalidParameter("Top point {} lies below bottom point {}".format(self.top, self.bottom))
        if self.left[0] > self.right[0]:
            raise InvalidParameter("Left point {} lies right of right point {}".format(self.left, self.right))

    def as_list(self) -> List[List[int]]:
        """
        Points in top, left, bottom, right order
        """

        return [list(self.top), list(self.left), list(self.bottom), list(self.right)]

    def check_bounds(self, width: int, height: int) -> None:
        """
        Raise if a point lies outside a width x height image
        """

        for point in [self.top, self.left, self.bottom, self.right]:
            if not (0 <= point[0] < width and 0 <= point[1] < height):
                raise InvalidParameter("Extreme point {} outside {}x{} image".format(point, width, height))


@dataclass(frozen=True)
class PointSet:
    """
    Sorted, duplicate-free set of patch-grid node indices
    """

    role: PointRole
    nodes: Tuple[int, ...]

    def __post_init__(self):
        nodes = tuple(int(n) for n in self.nodes)
        if any(b <= a for a, b in zip(nodes, nodes[1:])):
            raise InvalidParameter("Point set nodes must be strictly increasing")
        if nodes and nodes[0] < 0:
            raise InvalidParameter("Negative node index {}".format(nodes[0]))
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def build(cls, role: PointRole, nodes: Iterable[int], n_nodes: Optional[int] = None) -> "PointSet":
        """
        Sort and deduplicate nodes, checking them against the grid size
        """

        nodes = sorted(set(int(n) for n in nodes))
        if n_nodes is not None and nodes and nodes[-1] >= n_nodes:
            raise InvalidParameter("Node {} outside a grid of {} nodes".format(nodes[-1], n_nodes))
        return cls(role, tuple(nodes))

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes)

    def __contains__(self, node) -> bool:
        return int(node) in set(self.nodes)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.nodes, dtype=np.int64)


@dataclass(frozen=True)
class CropWindow:
    """
    Source-image rectangle resized to a target_side square of patch_side x patch_side patches
    """

    rect: BBox
    target_side: int
    patch_side: int

    def __post_init__(self):
        if self.patch_side < 1 or self.target_side < 1:
            raise InvalidParameter("Window sides must be positive")
        if self.target_side % self.patch_side != 0:
            raise InvalidParameter("Target side {} not divisible by patch side {}".format(
                self.target_side, self.patch_side
            ))

    @property
    def cell(self) -> int:
        """
        Target pixels per patch side
        """

        return self.target_side // self.patch_side

    @property
    def n_nodes(self) -> int:
        return self.patch_side * self.patch_side


def bbox_from_extremes(ep: ExtremePoints) -> BBox:
    """
    Box implied by the extreme points
    """

    return BBox(ep.left[0], ep.top[1], ep.right[0], ep.bottom[1])


def tight_bbox(mask: np.ndarray) -> BBox:
    """
    Tightest box around the foreground of a mask
    """

    ys, xs = np.nonzero(mask)
    if ys.size == 0:
        raise EmptyMask("Mask has no foreground pixel")
    return BBox(xs.min(), ys.min(), xs.max(), ys.max())


def extract_extreme_points(mask: np.ndarray) -> ExtremePoints:
    """
    Derive extreme points from a binary mask

    Ties are broken by the smallest secondary coordinate.
    """

    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise SizeMismatch("Expected a 2D mask, got shape {}".format(mask.shape))
    ys, xs = np.nonzero(mask)
    if ys.size == 0:
        raise EmptyMask("Mask has no foreground pixel")

    y_top, y_bottom = ys.min(), ys.max()
    x_left, x_right = xs.min(), xs.max()

    return ExtremePoints(
        top=(xs[ys == y_top].min(), y_top),
        left=(x_left, ys[xs == x_left].min()),
        bottom=(xs[ys == y_bottom].min(), y_bottom),
        right=(x_right, ys[xs == x_right].min())
    )


def crop_window(box: BBox, pad: float = 0.2, target_side: int = 512, patch_side: int = 16) -> CropWindow:
    """
    Dilate the box by pad x side on every side

    Each side of the window is at least patch_side pixels so that every patch
    receives at least one source pixel.
    """

    if pad < 0:
        raise InvalidParameter("Crop pad must be non-negative, got {}".format(pad))

    def _span(lo: int, hi: int, side: int) -> Tuple[int, int]:
        margin = math.ceil(round(pad * side, 9))
        lo, hi = lo - margin, hi + margin
        missing = patch_side - (hi - lo + 1)
        if missing > 0:
            lo -= missing // 2
            hi += missing - missing // 2
        return lo, hi

    x_min, x_max = _span(box.x_min, box.x_max, box.width)
    y_min, y_max = _span(box.y_min, box.y_max, box.height)
    return CropWindow(BBox(x_min, y_min, x_max, y_max), target_side, patch_side)


def pixel_to_patch(p: Point, window: CropWindow) -> int:
    """
    Row-major node index of the patch a source pixel falls into
    """

    x, y = int(p[0]), int(p[1])
    rect = window.rect
    if not rect.contains(x, y):
        raise OutOfWindow("Pixel {} outside window {}".format((x, y), rect.as_tuple()))

    # Crop and resize to the target grid, then divide by the cell size
    u = (x - rect.x_min) * window.target_side // rect.width
    v = (y - rect.y_min) * window.target_side // rect.height
    return (v // window.cell) * window.patch_side + (u // window.cell)


def node_map(window: CropWindow) -> np.ndarray:
    """
    Node index of every pixel of the window, shape (height, width)
    """

    rect = window.rect
    cols = (np.arange(rect.width) * window.target_side // rect.width) // window.cell
    rows = (np.arange(rect.height) * window.target_side // rect.height) // window.cell
    return rows[:, None] * window.patch_side + cols[None, :]


def patch_ranges(window: CropWindow) -> Tuple[np.ndarray, np.ndarray]:
    """
    Inclusive source-pixel extent of every patch column and row

    Returns two (patch_side, 2) arrays of absolute [lo, hi] coordinates: the
    first for columns (x), the second for rows (y).
    """

    def _ranges(origin: int, side: int) -> np.ndarray:
        idx = np.arange(window.patch_side + 1)
        starts = -((-idx * side) // window.patch_side)
        return np.stack([origin + starts[:-1], origin + starts[1:] - 1], axis=1)

    rect = window.rect
    return _ranges(rect.x_min, rect.width), _ranges(rect.y_min, rect.height)


def initial_background(box: BBox, window: CropWindow) -> PointSet:
    """
    Nodes whose patch lies entirely outside the box

    Patches straddling the box edge are left out.
    """

    if not box.intersects(window.rect):
        raise InvalidParameter("Box {} does not intersect window {}".format(box.as_tuple(), window.rect.as_tuple()))

    cols, rows = patch_ranges(window)
    col_out = (cols[:, 1] < box.x_min) | (cols[:, 0] > box.x_max)
    row_out = (rows[:, 1] < box.y_min) | (rows[:, 0] > box.y_max)
    outside = row_out[:, None] | col_out[None, :]

    nodes = np.flatnonzero(outside)
    if nodes.size == 0:
        raise EmptyBackground("Box {} covers the whole window {}".format(box.as_tuple(), window.rect.as_tuple()))
    return PointSet(PointRole.INITIAL_BG, tuple(nodes.tolist()))


def box_interior(box: BBox, window: CropWindow, fg: Optional[PointSet] = None) -> PointSet:
    """
    Nodes whose patch center lies inside the box, minus the foreground seeds
    """

    if not box.intersects(window.rect):
        raise InvalidParameter("Box {} does not intersect window {}".format(box.as_tuple(), window.rect.as_tuple()))

    cols, rows = patch_ranges(window)
    # Centers are half-integers; compare doubled coordinates to stay in integers
    cx2 = cols.sum(axis=1)
    cy2 = rows.sum(axis=1)
    col_in = (2 * box.x_min <= cx2) & (cx2 <= 2 * box.x_max)
    row_in = (2 * box.y_min <= cy2) & (cy2 <= 2 * box.y_max)
    inside = row_in[:, None] & col_in[None, :]

    nodes = set(np.flatnonzero(inside).tolist())
    if fg is not None:
        nodes -= set(fg.nodes)
    return PointSet.build(PointRole.BOX_INTERIOR, nodes)


def scale_delta(delta: int, window: CropWindow) -> Tuple[int, int]:
    """
    Convert a margin in resized-crop pixels to (dx, dy) source pixels
    """

    if delta < 0:
        raise InvalidParameter("Margin must be non-negative, got {}".format(delta))
    rect = window.rect
    return (
        int(math.floor(delta * rect.width / window.target_side + 0.5)),
        int(math.floor(delta * rect.height / window.target_side + 0.5))
    )


def foreground_points(ep: ExtremePoints, delta: Delta, box: BBox) -> List[Point]:
    """
    Extreme points pushed inward by delta and clamped into the box
    """

    dx, dy = (delta, delta) if np.isscalar(delta) else delta
    if dx < 0 or dy < 0:
        raise InvalidParameter("Margin must be non-negative, got {}".format(delta))

    def _clamp(x: int, y: int) -> Point:
        return (min(max(x, box.x_min), box.x_max), min(max(y, box.y_min), box.y_max))

    return [
        _clamp(ep.top[0], ep.top[1] + dy),
        _clamp(ep.left[0] + dx, ep.left[1]),
        _clamp(ep.bottom[0], ep.bottom[1] - dy),
        _clamp(ep.right[0] - dx, ep.right[1])
    ]


def initial_foreground(ep: ExtremePoints, delta: Delta, box: BBox, window: CropWindow) -> PointSet:
    """
    Foreground seed nodes: pushed extreme points mapped to the patch grid
    """

    points = foreground_points(ep, delta, box)
    return PointSet.build(PointRole.INITIAL_FG, [pixel_to_patch(p, window) for p in points])


def crop(array: np.ndarray, rect: BBox) -> np.ndarray:
    """
    Cut rect out of an image or mask, replicating edge pixels outside the array
    """

    height, width = array.shape[:2]
    ys = np.clip(np.arange(rect.y_min, rect.y_max + 1), 0, height - 1)
    xs = np.clip(np.arange(rect.x_min, rect.x_max + 1), 0, width - 1)
    return array[np.ix_(ys, xs)]


def paste(window_mask: np.ndarray, rect: BBox, shape: Sequence[int]) -> np.ndarray:
    """
    Place a window-sized mask into an empty full-size mask, clipping at the borders
    """

    if window_mask.shape[:2] != (rect.height, rect.width):
        raise SizeMismatch("Window mask {} does not match rect {}x{}".format(
            window_mask.shape, rect.height, rect.width
        ))
    height, width = int(shape[0]), int(shape[1])
    out = np.zeros((height, width), dtype=window_mask.dtype)

    y0, y1 = max(rect.y_min, 0), min(rect.y_max, height - 1)
    x0, x1 = max(rect.x_min, 0), min(rect.x_max, width - 1)
    if y0 > y1 or x0 > x1:
        return out
    out[y0:y1 + 1, x0:x1 + 1] = window_mask[
        y0 - rect.y_min:y1 - rect.y_min + 1,
        x0 - rect.x_min:x1 - rect.x_min + 1
    ]
    return out


def resample_to_target(array: np.ndarray, window: CropWindow) -> np.ndarray:
    """
    Nearest-neighbour crop and resize of an image or mask to the target square
    """

    rect = window.rect
    height, width = array.shape[:2]
    u = np.arange(window.target_side)
    xs = np.clip(rect.x_min + (u * rect.width) // window.target_side, 0, width - 1)
    ys = np.clip(rect.y_min + (u * rect.height) // window.target_side, 0, height - 1)
    return array[np.ix_(ys, xs)]
