"""
Synthetic scenes

Generates images of simple shapes with ground-truth masks, optional occluders
that split objects into separate parts, patch-level similarity matrices that
stand in for self-attention, and the tightness-prior baseline labeler.

Class ids in the semantic field: 0 is background, 1..n_objects are the
objects, n_objects + 1 is the occluder.
"""


from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, List, Optional, Sequence, Tuple
import numpy as np
from scipy.special import softmax
from aws_lambda_powertools.tracing import Tracer # pylint: disable=import-error
from aws_lambda_powertools.logging.logger import Logger # pylint: disable=import-error
from .exceptions import InvalidParameter, PlacementFailure
from .geometry import (
    BBox, CropWindow, ExtremePoints, PointSet, crop, extract_extreme_points, node_map, patch_ranges
)
from .retrieval import PointLabel, PseudoPointLabels


__all__ = [
    "OccluderKind", "Scene", "SceneSpec", "ShapeFamily", "class_color", "generate_scene",
    "generate_suite", "patch_classes", "patch_features", "similarity_from_scene",
    "tightness_baseline_labels"
]


logger = Logger(service="exits", child=True) # pylint: disable=invalid-name
tracer = Tracer() # pylint: disable=invalid-name


MAX_ATTEMPTS = 1000
# Gap kept between object extents and between objects and the image border
GAP = 2
# The bar starts this many pixels right of the object's center column
BAR_OFFSET = 2
POLYOMINO_CELL = 4
SIMILARITY_STREAM = 1

BACKGROUND_COLOR = (60, 90, 60)
OCCLUDER_COLOR = (150, 110, 60)
OBJECT_COLORS = [
    (200, 60, 60), (60, 60, 200), (200, 200, 60), (60, 200, 200), (200, 60, 200),
    (230, 140, 40), (120, 220, 90), (40, 120, 230)
]


class ShapeFamily(Enum):
    """
    Object shapes
    """

    RECT = "rect"
    ELLIPSE = "ellipse"
    POLYOMINO = "polyomino"


class OccluderKind(Enum):
    """
    Occluders drawn over the objects
    """

    NONE = "none"
    BAR = "bar"
    BLOB = "blob"


@dataclass(frozen=True)
class SceneSpec:
    """
    Parameters of a scene or of a suite of scenes
    """

    image_side: int = 128
    patch_side: int = 16
    n_objects: int = 1
    shape_family: ShapeFamily = ShapeFamily.ELLIPSE
    occluder: OccluderKind = OccluderKind.BAR
    occluder_width: Tuple[int, int] = (10, 11)
    noise_sigma: float = 0.05
    seed: int = 0
    size_range: Tuple[int, int] = (28, 30)
    aspect_range: Tuple[float, float] = (0.42, 0.48)
    image_noise: float = 6.0
    temperature: float = 0.2
    class_embedding_scale: float = 2.0
    count: int = 1

    def __post_init__(self):
        object.__setattr__(self, "shape_family", ShapeFamily(self.shape_family))
        object.__setattr__(self, "occluder", OccluderKind(self.occluder))
        for name in ["occluder_width", "size_range", "aspect_range"]:
            low, high = getattr(self, name)
            if low > high or low <= 0:
                raise InvalidParameter("Invalid range {} = {}".format(name, getattr(self, name)))
            object.__setattr__(self, name, (low, high))
        if self.image_side < 1 or self.patch_side < 1 or self.image_side % self.patch_side:
            raise InvalidParameter("Image side {} must be a positive multiple of patch side {}".format(
                self.image_side, self.patch_side
            ))
        if self.n_objects < 1:
            raise InvalidParameter("A scene needs at least one object, got {}".format(self.n_objects))
        if self.n_objects > len(OBJECT_COLORS):
            raise InvalidParameter("At most {} objects per scene, got {}".format(len(OBJECT_COLORS), self.n_objects))
        if self.noise_sigma < 0 or self.image_noise < 0:
            raise InvalidParameter("Noise levels must be non-negative")
        if not self.temperature > 0:
            raise InvalidParameter("Temperature must be positive, got {}".format(self.temperature))
        if self.count < 1:
            raise InvalidParameter("Suite count must be positive, got {}".format(self.count))
        if self.seed < 0:
            raise InvalidParameter("Seed must be non-negative, got {}".format(self.seed))


@dataclass(frozen=True, eq=False)
class Scene:
    """
    One generated scene with its ground truth
    """

    spec: SceneSpec
    seed: Tuple[int, ...]
    image: np.ndarray
    semantic: np.ndarray
    gt_masks: List[np.ndarray]
    annotations: List[ExtremePoints]
    occluders: List[BBox] = field(default_factory=list)

    @property
    def object_ids(self) -> List[int]:
        return list(range(1, len(self.gt_masks) + 1))

    @property
    def occluder_id(self) -> int:
        return len(self.gt_masks) + 1

    @property
    def n_classes(self) -> int:
        return len(self.gt_masks) + 2


def class_color(class_id: int, n_objects: int) -> Tuple[int, int, int]:
    """
    Palette colour of a class id
    """

    if class_id == 0:
        return BACKGROUND_COLOR
    if class_id == n_objects + 1:
        return OCCLUDER_COLOR
    return OBJECT_COLORS[(class_id - 1) % len(OBJECT_COLORS)]


def _palette(n_objects: int) -> np.ndarray:
    return np.array([class_color(c, n_objects) for c in range(n_objects + 2)], dtype=np.float64)


def _shape_mask(spec: SceneSpec, rng: np.random.Generator, half_w: int, half_h: float) -> np.ndarray:
    """
    Shape mask of size (2 ceil(half_h) + 1, 2 half_w + 1) centred on the middle pixel
    """

    rows = int(np.ceil(half_h))
    ys, xs = np.mgrid[-rows:rows + 1, -half_w:half_w + 1]

    if spec.shape_family == ShapeFamily.RECT:
        return np.abs(ys) <= int(round(half_h))
    if spec.shape_family == ShapeFamily.ELLIPSE:
        return (xs / half_w) ** 2 + (ys / half_h) ** 2 <= 1.0

    # Polyomino: grow a random connected set of cells from the centre cell
    cells_y = max(1, (2 * rows + 1) // POLYOMINO_CELL)
    cells_x = max(1, (2 * half_w + 1) // POLYOMINO_CELL)
    grid = np.zeros((cells_y, cells_x), dtype=bool)
    grid[cells_y // 2, cells_x // 2] = True
    target = max(1, int(0.6 * grid.size))
    while grid.sum() < target:
        frontier = np.zeros_like(grid)
        frontier[1:, :] |= grid[:-1, :]
        frontier[:-1, :] |= grid[1:, :]
        frontier[:, 1:] |= grid[:, :-1]
        frontier[:, :-1] |= grid[:, 1:]
        candidates = np.argwhere(frontier & ~grid)
        cy, cx = candidates[rng.integers(len(candidates))]
        grid[cy, cx] = True
    cells = np.kron(grid, np.ones((POLYOMINO_CELL, POLYOMINO_CELL), dtype=bool))
    mask = np.zeros(ys.shape, dtype=bool)
    mask[:cells.shape[0], :cells.shape[1]] = cells[:mask.shape[0], :mask.shape[1]]
    return mask


def _place(spec: SceneSpec, rng: np.random.Generator):
    """
    One placement attempt: semantic field and occluder rectangles, or None
    """

    side = spec.image_side
    semantic = np.zeros((side, side), dtype=np.uint8)
    extents, centers = [], []

    for object_id in range(1, spec.n_objects + 1):
        half_w = int(rng.integers(spec.size_range[0], spec.size_range[1] + 1))
        half_h = half_w * float(rng.uniform(*spec.aspect_range))
        shape = _shape_mask(spec, rng, half_w, half_h)
        rows, cols = shape.shape[0] // 2, shape.shape[1] // 2

        x_lo, x_hi = cols + GAP, side - 1 - cols - GAP
        y_lo, y_hi = rows + GAP, side - 1 - rows - GAP
        if x_lo > x_hi or y_lo > y_hi:
            return None
        x_c, y_c = int(rng.integers(x_lo, x_hi + 1)), int(rng.integers(y_lo, y_hi + 1))
        extent = BBox(x_c - cols - GAP, y_c - rows - GAP, x_c + cols + GAP, y_c + rows + GAP)
        if any(extent.intersects(other) for other in extents):
            return None

        region = semantic[y_c - rows:y_c + rows + 1, x_c - cols:x_c + cols + 1]
        region[shape] = object_id
        extents.append(extent)
        centers.append((x_c, y_c))

    occluders = []
    occluder_id = spec.n_objects + 1
    for x_c, y_c in centers:
        width = int(rng.integers(spec.occluder_width[0], spec.occluder_width[1] + 1))
        if spec.occluder == OccluderKind.BAR:
            rect = BBox(x_c + BAR_OFFSET, 0, min(x_c + BAR_OFFSET + width, side) - 1, side - 1)
            semantic[:, rect.x_min:rect.x_max + 1] = occluder_id
            occluders.append(rect)
        elif spec.occluder == OccluderKind.BLOB:
            radius = width / 2.0
            b_x, b_y = x_c + BAR_OFFSET + width // 2, y_c
            ys, xs = np.ogrid[:side, :side]
            disk = (xs - b_x) ** 2 + (ys - b_y) ** 2 <= radius ** 2
            semantic[disk] = occluder_id
            occluders.append(BBox(
                max(int(np.floor(b_x - radius)), 0), max(int(np.floor(b_y - radius)), 0),
                min(int(np.ceil(b_x + radius)), side - 1), min(int(np.ceil(b_y + radius)), side - 1)
            ))

    for object_id in range(1, spec.n_objects + 1):
        if not np.any(semantic == object_id):
            return None
    return semantic, occluders


@tracer.capture_method
def generate_scene(spec: SceneSpec, seed: Optional[Sequence[int]] = None) -> Scene:
    """
    Draw one scene, deterministic in (spec, seed)

    `seed` defaults to (spec.seed,). Suites pass (spec.seed, index).
    """

    seed = tuple(int(s) for s in (seed if seed is not None else (spec.seed,)))
    place_seq, noise_seq = np.random.SeedSequence(list(seed)).spawn(2)
    rng = np.random.default_rng(place_seq)

    for attempt in range(1, MAX_ATTEMPTS + 1):
        placed = _place(spec, rng)
        if placed is not None:
            break
    else:
        raise PlacementFailure("Cannot place {} objects in a {}px image after {} attempts".format(
            spec.n_objects, spec.image_side, MAX_ATTEMPTS
        ))
    semantic, occluders = placed

    noise = np.random.default_rng(noise_seq).normal(0.0, spec.image_noise, semantic.shape + (3,))
    image = np.clip(np.rint(_palette(spec.n_objects)[semantic] + noise), 0, 255).astype(np.uint8)

    gt_masks = [(semantic == object_id).astype(np.uint8) for object_id in range(1, spec.n_objects + 1)]
    annotations = [extract_extreme_points(mask) for mask in gt_masks]

    logger.debug({"message": "Generated scene", "seed": list(seed), "attempts": attempt})
    return Scene(spec, seed, image, semantic, gt_masks, annotations, occluders)


def generate_suite(spec: SceneSpec) -> Iterator[Scene]:
    """
    Yield spec.count scenes; scene i is seeded from (spec.seed, i)
    """

    for index in range(spec.count):
        yield generate_scene(spec, (spec.seed, index))


def patch_classes(semantic: np.ndarray, window: CropWindow) -> np.ndarray:
    """
    Majority class of every patch node, ties to the lowest class id
    """

    classes = crop(np.asarray(semantic), window.rect).astype(np.int64)
    nodes = node_map(window)
    counts = np.zeros((window.n_nodes, int(classes.max()) + 1), dtype=np.int64)
    np.add.at(counts, (nodes.ravel(), classes.ravel()), 1)
    return counts.argmax(axis=1)


def patch_features(
        scene: Scene, object_index: int, window: CropWindow, sigma: float, embedding_scale: float
    ) -> np.ndarray:
    """
    Unit-norm patch features: class colour and scaled class one-hot, plus noise
    """

    if sigma < 0:
        raise InvalidParameter("Noise stddev must be non-negative, got {}".format(sigma))

    classes = patch_classes(scene.semantic, window)
    colors = _palette(len(scene.gt_masks))[classes] / 255.0 - 0.5
    onehot = embedding_scale * np.eye(scene.n_classes)[classes]
    features = np.concatenate([colors, onehot], axis=1)

    if sigma > 0:
        seq = np.random.SeedSequence(list(scene.seed) + [object_index, SIMILARITY_STREAM])
        features = features + np.random.default_rng(seq).normal(0.0, sigma, features.shape)
    return features / np.linalg.norm(features, axis=1, keepdims=True)


@tracer.capture_method
def similarity_from_scene(
        scene: Scene, object_index: int, window: CropWindow, sigma: float,
        temperature: float = 0.2, embedding_scale: float = 2.0
    ) -> np.ndarray:
    """
    Row-softmax of scaled feature dot products over the window's patches
    """

    if not temperature > 0:
        raise InvalidParameter("Temperature must be positive, got {}".format(temperature))
    features = patch_features(scene, object_index, window, sigma, embedding_scale)
    return softmax(features @ features.T / temperature, axis=1)


def tightness_baseline_labels(
        window: CropWindow, box: BBox, similarity, fg: PointSet
    ) -> PseudoPointLabels:
    """
    Label by the box tightness prior

    Every patch row and column crossing the box gets one FG node: its in-box
    node with the highest mean similarity to the FG seeds. Other in-box
    nodes stay Unlabeled and nodes outside the box are BG.
    """

    similarity = np.asarray(similarity, dtype=np.float64)
    n = window.patch_side
    cols, rows = patch_ranges(window)
    col_in = (cols[:, 1] >= box.x_min) & (cols[:, 0] <= box.x_max)
    row_in = (rows[:, 1] >= box.y_min) & (rows[:, 0] <= box.y_max)
    in_box = row_in[:, None] & col_in[None, :]

    affinity = similarity[fg.as_array(), :].mean(axis=0).reshape(n, n)
    masked = np.where(in_box, affinity, -np.inf)

    labels = np.where(in_box, PointLabel.UNLABELED, PointLabel.BG).astype(np.int8)
    for row in np.flatnonzero(row_in):
        labels[row, int(np.argmax(masked[row, :]))] = PointLabel.FG
    for col in np.flatnonzero(col_in):
        labels[int(np.argmax(masked[:, col])), col] = PointLabel.FG

    return PseudoPointLabels(labels.reshape(-1))
