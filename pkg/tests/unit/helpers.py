import itertools
import math
import numpy as np


def path_oracle(transition: np.ndarray, alpha: int) -> np.ndarray:
    """
    Alpha-hop transition probabilities by enumerating every node path
    """

    n = transition.shape[0]
    result = np.zeros((n, n))
    for start in range(n):
        for path in itertools.product(range(n), repeat=alpha):
            prob = 1.0
            node = start
            for step in path:
                prob *= transition[node, step]
                node = step
            result[start, path[-1]] += prob
    return result


def neumann_oracle(transition: np.ndarray, beta: float, terms: int = 60) -> np.ndarray:
    """
    Truncated series sum over k of (1 - beta) beta^k T^k
    """

    n = transition.shape[0]
    total = np.zeros((n, n))
    power = np.eye(n)
    for k in range(terms + 1):
        total += (1 - beta) * beta ** k * power
        power = power @ transition
    return total


def random_doubly_stochastic(rng: np.random.Generator, n: int) -> np.ndarray:
    """
    Symmetric doubly-stochastic matrix as a mix of symmetrized permutations
    """

    weights = rng.dirichlet(np.ones(n + 1))
    matrix = np.zeros((n, n))
    for weight in weights:
        perm = np.eye(n)[rng.permutation(n)]
        matrix += weight * (perm + perm.T) / 2
    return matrix


def sinkhorn_2x2_oracle(matrix, tolerance: float = 1e-12) -> float:
    """
    Diagonal entry a of the scaling [[a, 1-a], [1-a, a]] of a positive 2x2 matrix

    Scaling keeps the cross ratio, so a^2 / (1-a)^2 = m00 m11 / (m01 m10);
    solved by bisection.
    """

    ratio = matrix[0][0] * matrix[1][1] / (matrix[0][1] * matrix[1][0])
    low, high = 0.0, 1.0
    while high - low > tolerance:
        mid = (low + high) / 2
        if mid * mid / ((1 - mid) * (1 - mid)) < ratio:
            low = mid
        else:
            high = mid
    return (low + high) / 2


def dense_meanfield(mask, image, iterations, w_spatial, w_bilateral, theta_gamma, theta_alpha, theta_beta,
                    compat=1.0, clamp=1e-6) -> np.ndarray:
    """
    Brute-force binary mean-field with explicit pairwise sums
    """

    mask = np.asarray(mask, dtype=np.float64)
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        image = image[:, :, None]
    height, width = mask.shape
    pixels = [(y, x) for y in range(height) for x in range(width)]

    kernel = np.zeros((len(pixels), len(pixels)))
    for i, (yi, xi) in enumerate(pixels):
        for j, (yj, xj) in enumerate(pixels):
            if i == j:
                continue
            dist2 = (yi - yj) ** 2 + (xi - xj) ** 2
            color2 = float(np.sum((image[yi, xi] - image[yj, xj]) ** 2))
            kernel[i, j] = (
                w_spatial * math.exp(-dist2 / (2 * theta_gamma ** 2))
                + w_bilateral * math.exp(-dist2 / (2 * theta_alpha ** 2) - color2 / (2 * theta_beta ** 2))
            )

    prob = np.clip(mask.reshape(-1), clamp, 1 - clamp)
    unary_fg, unary_bg = np.log(prob), np.log(1 - prob)
    q_fg = prob.copy()
    for _ in range(iterations):
        new = np.empty_like(q_fg)
        for i in range(len(pixels)):
            msg_fg = compat * sum(kernel[i, j] * (1 - q_fg[j]) for j in range(len(pixels)))
            msg_bg = compat * sum(kernel[i, j] * q_fg[j] for j in range(len(pixels)))
            a, b = unary_fg[i] - msg_fg, unary_bg[i] - msg_bg
            e_fg = math.exp(a - max(a, b))
            e_bg = math.exp(b - max(a, b))
            new[i] = e_fg / (e_fg + e_bg)
        q_fg = new
    return q_fg.reshape(mask.shape)


def confusion_counts(labels, gt_nodes) -> dict:
    """
    Label against ground-truth counts by direct iteration
    """

    counts = {"tp_fg": 0, "pred_fg": 0, "actual_fg": 0, "tp_bg": 0, "pred_bg": 0, "actual_bg": 0}
    for label, gt in zip(labels, gt_nodes):
        if gt == -1:
            continue
        counts["actual_fg"] += gt == 1
        counts["actual_bg"] += gt == 0
        if label == 1:
            counts["pred_fg"] += 1
            counts["tp_fg"] += gt == 1
        elif label == 2:
            counts["pred_bg"] += 1
            counts["tp_bg"] += gt == 0
    return counts


def brute_extreme_points(mask):
    """
    Extreme points by scanning every pixel
    """

    top = left = bottom = right = None
    height, width = len(mask), len(mask[0])
    for y in range(height):
        for x in range(width):
            if not mask[y][x]:
                continue
            if top is None or y < top[1] or (y == top[1] and x < top[0]):
                top = (x, y)
            if bottom is None or y > bottom[1] or (y == bottom[1] and x < bottom[0]):
                bottom = (x, y)
            if left is None or x < left[0] or (x == left[0] and y < left[1]):
                left = (x, y)
            if right is None or x > right[0] or (x == right[0] and y < right[1]):
                right = (x, y)
    return top, left, bottom, right


def random_polyomino(rng: np.random.Generator, side: int = 10, cells: int = 12) -> np.ndarray:
    """
    Random connected set of cells grown from a random start
    """

    mask = np.zeros((side, side), dtype=np.uint8)
    mask[rng.integers(side), rng.integers(side)] = 1
    target = int(rng.integers(1, cells + 1))
    while mask.sum() < target:
        ys, xs = np.nonzero(mask)
        k = rng.integers(len(ys))
        dy, dx = [(0, 1), (1, 0), (0, -1), (-1, 0)][rng.integers(4)]
        y, x = ys[k] + dy, xs[k] + dx
        if 0 <= y < side and 0 <= x < side:
            mask[y, x] = 1
    return mask
