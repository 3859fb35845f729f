"""
Transition probability matrix

Builds the symmetric doubly-stochastic transition matrix from raw patch
similarities and propagates labels through it, either for a fixed number of
random-walk hops or to the absorbing-chain limit.
"""


from dataclasses import dataclass
from typing import Optional, Sequence
import numpy as np
from scipy import linalg
from aws_lambda_powertools.tracing import Tracer # pylint: disable=import-error
from aws_lambda_powertools.logging.logger import Logger # pylint: disable=import-error
from .exceptions import EmptyList, InvalidParameter, NoConvergence, SingularSystem, SizeMismatch


__all__ = [
    "SinkhornConfig", "average_heads", "check_similarity", "propagate_absorbing",
    "propagate_power", "sinkhorn", "symmetrize", "transition_matrix"
]


logger = Logger(service="exits", child=True) # pylint: disable=invalid-name
tracer = Tracer() # pylint: disable=invalid-name


@dataclass(frozen=True)
class SinkhornConfig:
    """
    Stopping rule of the Sinkhorn-Knopp iteration
    """

    tolerance: float = 1e-8
    max_iterations: int = 200

    def __post_init__(self):
        if not self.tolerance > 0:
            raise InvalidParameter("Sinkhorn tolerance must be positive, got {}".format(self.tolerance))
        if self.max_iterations < 1:
            raise InvalidParameter("Sinkhorn needs at least one iteration, got {}".format(self.max_iterations))


def _square(matrix, name: str) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] == 0:
        raise SizeMismatch("{} must be a non-empty square matrix, got shape {}".format(name, matrix.shape))
    if not np.all(np.isfinite(matrix)):
        raise InvalidParameter("{} holds non-finite values".format(name))
    return matrix


def check_similarity(similarity) -> np.ndarray:
    """
    Validate a similarity matrix: square, non-negative, no all-zero row
    """

    similarity = _square(similarity, "Similarity matrix")
    if np.any(similarity < 0):
        row, col = np.argwhere(similarity < 0)[0]
        raise InvalidParameter("Negative similarity {} at ({}, {})".format(similarity[row, col], row, col))
    empty_rows = np.flatnonzero(~np.any(similarity > 0, axis=1))
    if empty_rows.size > 0:
        raise InvalidParameter("Similarity row {} has no positive entry".format(empty_rows[0]))
    return similarity


def _deviation(matrix: np.ndarray) -> float:
    return float(max(
        np.max(np.abs(matrix.sum(axis=1) - 1.0)),
        np.max(np.abs(matrix.sum(axis=0) - 1.0))
    ))


def average_heads(heads: Sequence) -> np.ndarray:
    """
    Entrywise mean of several attention-head similarity matrices
    """

    if len(heads) == 0:
        raise EmptyList("At least one similarity matrix is required")

    heads = [check_similarity(head) for head in heads]
    shape = heads[0].shape
    for index, head in enumerate(heads):
        if head.shape != shape:
            raise SizeMismatch("Head {} has shape {}, expected {}".format(index, head.shape, shape))

    total = np.zeros(shape, dtype=np.float64)
    for head in heads:
        total += head
    return total / len(heads)


@tracer.capture_method
def sinkhorn(similarity, cfg: SinkhornConfig = SinkhornConfig()) -> np.ndarray:
    """
    Scale a non-negative matrix to doubly-stochastic form

    Rows are normalized, then columns, until every row and column sum is
    within cfg.tolerance of 1. Zero entries stay exactly zero.
    """

    matrix = check_similarity(similarity).copy()

    deviation = _deviation(matrix)
    if deviation <= cfg.tolerance:
        return matrix

    for iteration in range(1, cfg.max_iterations + 1):
        matrix /= matrix.sum(axis=1, keepdims=True)
        col_sums = matrix.sum(axis=0, keepdims=True)
        if np.any(col_sums == 0):
            # An all-zero column can never be scaled to sum to 1
            raise NoConvergence(iteration, float("inf"), cfg.tolerance)
        matrix /= col_sums

        deviation = _deviation(matrix)
        if deviation <= cfg.tolerance:
            if iteration > cfg.max_iterations // 2:
                logger.warning({
                    "message": "Sinkhorn used more than half of its iteration budget",
                    "iterations": iteration,
                    "max_iterations": cfg.max_iterations
                })
            logger.debug({"message": "Sinkhorn converged", "iterations": iteration, "deviation": deviation})
            return matrix

    logger.warning({
        "message": "Sinkhorn did not converge",
        "iterations": cfg.max_iterations,
        "deviation": deviation,
        "tolerance": cfg.tolerance
    })
    raise NoConvergence(cfg.max_iterations, deviation, cfg.tolerance)


def symmetrize(matrix) -> np.ndarray:
    """
    Average a matrix with its transpose
    """

    matrix = _square(matrix, "Matrix")
    return (matrix + matrix.T) / 2


def transition_matrix(similarity, cfg: SinkhornConfig = SinkhornConfig()) -> np.ndarray:
    """
    Symmetric doubly-stochastic transition matrix of a similarity matrix
    """

    return symmetrize(sinkhorn(similarity, cfg))


@tracer.capture_method
def propagate_power(transition, alpha: int) -> np.ndarray:
    """
    Transition probabilities after alpha random-walk hops
    """

    transition = _square(transition, "Transition matrix")
    if int(alpha) != alpha or alpha < 1:
        raise InvalidParameter("Hop count must be a positive integer, got {}".format(alpha))

    result = transition.copy()
    for _ in range(int(alpha) - 1):
        result = result @ transition
    # Products of a symmetric matrix drift from exact symmetry by rounding
    return (result + result.T) / 2


@tracer.capture_method
def propagate_absorbing(transition, beta: float, columns: Optional[Sequence[int]] = None) -> np.ndarray:
    """
    Absorbing-chain limit (1 - beta) (I - beta T)^-1

    The system is LU-factorized once and solved column by column; no inverse is
    formed. With `columns` only those columns of the limit are returned.
    """

    transition = _square(transition, "Transition matrix")
    if not 0 <= beta < 1:
        raise InvalidParameter("Blending coefficient must lie in [0, 1), got {}".format(beta))

    n_nodes = transition.shape[0]
    if columns is None:
        columns = np.arange(n_nodes)
    columns = np.asarray(columns, dtype=np.int64)
    if columns.size and (columns.min() < 0 or columns.max() >= n_nodes):
        raise InvalidParameter("Column index outside 0..{}".format(n_nodes - 1))

    system = np.eye(n_nodes) - beta * transition
    try:
        lu, piv = linalg.lu_factor(system, check_finite=True)
    except (ValueError, linalg.LinAlgError) as exc:
        raise SingularSystem("Cannot factorize I - {} T: {}".format(beta, exc)) from exc
    if np.any(np.diag(lu) == 0):
        raise SingularSystem("I - {} T is singular".format(beta))

    rhs = (1 - beta) * np.eye(n_nodes)[:, columns]
    result = linalg.lu_solve((lu, piv), rhs)
    if not np.all(np.isfinite(result)):
        raise SingularSystem("Absorbing-chain solve produced non-finite values")

    logger.debug({"message": "Absorbing-chain solve", "beta": beta, "columns": int(columns.size)})
    return result
