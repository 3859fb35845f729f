"""
Dense CRF mean-field refinement

Binary Potts model over the pixels of a probability mask. Pairwise energies
combine a spatial Gaussian kernel and a bilateral (position and colour)
kernel. Updates are synchronous: every pixel reads the previous iterate.
"""


from dataclasses import dataclass
import math
import itertools
import numpy as np
from scipy.ndimage import gaussian_filter
from scipy.special import expit
from aws_lambda_powertools.tracing import Tracer # pylint: disable=import-error
from aws_lambda_powertools.logging.logger import Logger # pylint: disable=import-error
from .exceptions import InvalidParameter, SizeMismatch


__all__ = [
    "CrfParams", "DenseKernel", "FilteredKernel", "PairwiseKernel",
    "as_guide_image", "meanfield_refine", "pairwise_kernel"
]


logger = Logger(service="exits", child=True) # pylint: disable=invalid-name
tracer = Tracer() # pylint: disable=invalid-name


UNARY_CLAMP = 1e-6
# Above DENSE_LIMIT pixels the kernel matrix is not kept in memory
DENSE_LIMIT = 4096
# Above EXACT_LIMIT pixels the kernels are applied by Gaussian filtering
EXACT_LIMIT = 128 * 128
CHUNK_ROWS = 256
TRUNCATION = 3.0


@dataclass(frozen=True)
class CrfParams:
    """
    Mean-field iterations, kernel weights and kernel widths
    """

    iterations: int = 5
    w_spatial: float = 3.0
    w_bilateral: float = 5.0
    theta_gamma: float = 3.0
    theta_alpha: float = 30.0
    theta_beta: float = 13.0
    compat: float = 1.0

    def __post_init__(self):
        if self.iterations < 0:
            raise InvalidParameter("CRF iterations must be non-negative, got {}".format(self.iterations))
        if self.w_spatial < 0 or self.w_bilateral < 0:
            raise InvalidParameter("CRF kernel weights must be non-negative, got {} and {}".format(
                self.w_spatial, self.w_bilateral
            ))
        for name in ["theta_gamma", "theta_alpha", "theta_beta"]:
            if not getattr(self, name) > 0:
                raise InvalidParameter("CRF {} must be positive, got {}".format(name, getattr(self, name)))
        if not math.isfinite(self.compat):
            raise InvalidParameter("CRF compatibility must be finite, got {}".format(self.compat))


def as_guide_image(image) -> np.ndarray:
    """
    Float (H, W, C) view of a grayscale or RGB guide image
    """

    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        image = image[:, :, None]
    if image.ndim != 3 or image.shape[2] not in (1, 3):
        raise SizeMismatch("Guide image must have 1 or 3 channels, got shape {}".format(image.shape))
    return image


class PairwiseKernel:
    """
    Applies the pairwise kernel: out[i] = sum over j != i of k(i, j) q[j]
    """

    def __init__(self, image: np.ndarray, params: CrfParams):
        self.height, self.width, _ = image.shape
        self.params = params
        self.colors = image.reshape(-1, image.shape[2])
        ys, xs = np.divmod(np.arange(self.height * self.width), self.width)
        self.ys = ys.astype(np.float64)
        self.xs = xs.astype(np.float64)

    @property
    def size(self) -> int:
        return self.height * self.width

    def rows(self, start: int, stop: int) -> np.ndarray:
        """
        Kernel rows start..stop-1, diagonal zeroed
        """

        params = self.params
        dist2 = (self.ys[start:stop, None] - self.ys[None, :]) ** 2
        dist2 += (self.xs[start:stop, None] - self.xs[None, :]) ** 2

        block = np.zeros_like(dist2)
        if params.w_spatial > 0:
            block += params.w_spatial * np.exp(-dist2 / (2 * params.theta_gamma ** 2))
        if params.w_bilateral > 0:
            color2 = np.zeros_like(dist2)
            for channel in range(self.colors.shape[1]):
                color2 += (self.colors[start:stop, channel, None] - self.colors[None, :, channel]) ** 2
            block += params.w_bilateral * np.exp(
                -dist2 / (2 * params.theta_alpha ** 2) - color2 / (2 * params.theta_beta ** 2)
            )

        idx = np.arange(start, stop)
        block[idx - start, idx] = 0.0
        return block

    def apply(self, q: np.ndarray) -> np.ndarray:
        out = np.empty(self.size)
        for start in range(0, self.size, CHUNK_ROWS):
            stop = min(start + CHUNK_ROWS, self.size)
            out[start:stop] = self.rows(start, stop) @ q
        return out


class DenseKernel(PairwiseKernel):
    """
    Pairwise kernel with the full matrix kept in memory
    """

    def __init__(self, image: np.ndarray, params: CrfParams):
        super().__init__(image, params)
        self.matrix = np.empty((self.size, self.size))
        for start in range(0, self.size, CHUNK_ROWS):
            stop = min(start + CHUNK_ROWS, self.size)
            self.matrix[start:stop] = self.rows(start, stop)

    def apply(self, q: np.ndarray) -> np.ndarray:
        return self.matrix @ q


class FilteredKernel(PairwiseKernel):
    """
    Pairwise kernel evaluated by Gaussian filtering

    The spatial kernel is a separable Gaussian filter truncated at 3 sigma,
    which equals the explicit sum over the truncated window. The bilateral
    kernel is approximated on a grid over position and colour with one cell
    per kernel width: values are splatted to the grid with multilinear
    weights, blurred and read back with the same weights.
    """

    def __init__(self, image: np.ndarray, params: CrfParams):
        super().__init__(image, params)
        self.spatial_scale = 0.0
        if params.w_spatial > 0:
            radius = int(TRUNCATION * params.theta_gamma + 0.5)
            taps = np.exp(-np.arange(-radius, radius + 1) ** 2 / (2 * params.theta_gamma ** 2))
            # gaussian_filter normalizes its taps to sum to one
            self.spatial_scale = params.w_spatial * float(taps.sum()) ** 2

        self.grid_shape = None
        if params.w_bilateral > 0:
            features = np.column_stack([
                self.ys / params.theta_alpha,
                self.xs / params.theta_alpha,
                self.colors / params.theta_beta
            ])
            features -= features.min(axis=0)
            base = np.floor(features).astype(np.intp)
            self.grid_shape = tuple(int(size) for size in base.max(axis=0) + 2)
            self.base = base
            self.frac = features - base
            # Unit-cell Gaussian, unnormalized
            radius = int(TRUNCATION + 0.5)
            taps = np.exp(-np.arange(-radius, radius + 1) ** 2 / 2.0)
            self.grid_scale = params.w_bilateral * float(taps.sum()) ** len(self.grid_shape)
            # Grid weight of every pixel on itself
            self.grid_self = params.w_bilateral * np.prod(
                self.frac ** 2 + (1 - self.frac) ** 2 + 2 * math.exp(-0.5) * self.frac * (1 - self.frac), axis=1
            )
            self.corners = list(self._corners())

    def _corners(self):
        for corner in itertools.product((0, 1), repeat=len(self.grid_shape)):
            corner = np.asarray(corner)
            index = np.ravel_multi_index(tuple((self.base + corner).T), self.grid_shape)
            weight = np.prod(np.where(corner == 1, self.frac, 1 - self.frac), axis=1)
            yield index, weight

    def _bilateral(self, q: np.ndarray) -> np.ndarray:
        size = int(np.prod(self.grid_shape))
        grid = np.zeros(size)
        for index, weight in self.corners:
            grid += np.bincount(index, weights=weight * q, minlength=size)
        grid = gaussian_filter(grid.reshape(self.grid_shape), sigma=1.0, mode="constant", truncate=TRUNCATION)
        grid = grid.reshape(-1)

        out = np.zeros(self.size)
        for index, weight in self.corners:
            out += weight * grid[index]
        return self.grid_scale * out - self.grid_self * q

    def apply(self, q: np.ndarray) -> np.ndarray:
        params = self.params
        out = np.zeros(self.size)
        if self.spatial_scale > 0:
            blurred = gaussian_filter(
                q.reshape(self.height, self.width), sigma=params.theta_gamma, mode="constant", truncate=TRUNCATION
            )
            out += self.spatial_scale * blurred.reshape(-1) - params.w_spatial * q
        if self.grid_shape is not None:
            out += self._bilateral(q)
        return out


def pairwise_kernel(image, params: CrfParams) -> PairwiseKernel:
    """
    Pick the kernel evaluation for the image size
    """

    image = as_guide_image(image)
    size = image.shape[0] * image.shape[1]
    if size <= DENSE_LIMIT:
        return DenseKernel(image, params)
    if size <= EXACT_LIMIT:
        return PairwiseKernel(image, params)
    return FilteredKernel(image, params)


@tracer.capture_method
def meanfield_refine(mask, image, params: CrfParams = CrfParams()) -> np.ndarray:
    """
    Refine a foreground probability mask with dense-CRF mean-field inference

    Returns the foreground marginal. The background marginal is one minus it.
    """

    mask = np.asarray(mask, dtype=np.float64)
    image = as_guide_image(image)
    if mask.shape != image.shape[:2]:
        raise SizeMismatch("Mask shape {} does not match image shape {}".format(mask.shape, image.shape[:2]))
    if mask.size and (mask.min() < 0 or mask.max() > 1):
        raise InvalidParameter("Mask values must lie in [0, 1]")

    if params.iterations == 0 or (params.w_spatial == 0 and params.w_bilateral == 0):
        return mask.copy()

    prob = np.clip(mask, UNARY_CLAMP, 1 - UNARY_CLAMP).reshape(-1)
    # Negative unary energies of foreground and background
    log_fg = np.log(prob)
    log_bg = np.log1p(-prob)

    kernel = pairwise_kernel(image, params)
    # The kernel is linear: k(1 - q) = k(1) - k(q)
    total = kernel.apply(np.ones(kernel.size))
    q_fg = prob.copy()
    for _ in range(params.iterations):
        from_fg = kernel.apply(q_fg)
        msg_fg = params.compat * (total - from_fg)
        msg_bg = params.compat * from_fg
        q_fg = expit((log_fg - msg_fg) - (log_bg - msg_bg))

    logger.debug({
        "message": "Mean-field refinement",
        "pixels": kernel.size,
        "kernel": type(kernel).__name__,
        "iterations": params.iterations
    })
    return q_fg.reshape(mask.shape)
