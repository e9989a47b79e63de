"""Random-direction sampling and the query-based gradient estimator.

The estimator probes the loss along ``Q`` independent directions drawn
uniformly from the unit sphere and averages forward differences::

    grad ~= (d / (beta * Q)) * sum_q [loss(z + beta*u_q) - loss(z)] * u_q

It needs exactly Q+1 loss evaluations: the unperturbed value is computed
once and reused across all differences.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EstimatorError


@dataclass(frozen=True)
class EstimatorConfig:
    """Estimator knobs: query count Q, smoothing radius beta, dimension d."""

    n_queries: int
    beta: float
    dim: int

    def __post_init__(self):
        if self.n_queries < 1:
            raise ConfigError(f"n_queries must be >= 1, got {self.n_queries}")
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise ConfigError(f"beta must be positive, got {self.beta}")
        if self.dim < 1:
            raise ConfigError(f"dim must be >= 1, got {self.dim}")


def sample_directions(dim: int, n_queries: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n_queries`` i.i.d. uniform unit-sphere directions in R^dim.

    Each row is a zero-mean isotropic Gaussian draw divided by its
    Euclidean norm. Deterministic given the generator state.
    """
    if dim < 1 or n_queries < 1:
        raise ConfigError(f"need dim >= 1 and n_queries >= 1, got {dim}, {n_queries}")
    directions = rng.standard_normal((n_queries, dim))
    norms = np.linalg.norm(directions, axis=1)
    while np.any(norms == 0.0):  # probability-zero draw; redraw defensively
        zero = norms == 0.0
        directions[zero] = rng.standard_normal((int(zero.sum()), dim))
        norms = np.linalg.norm(directions, axis=1)
    return directions / norms[:, None]


def combine_differences(diffs, directions, beta: float, dim: int) -> np.ndarray:
    """Reduce forward differences into the gradient estimate.

    Accumulation runs in ascending query order so results are
    bit-reproducible for a fixed seed.
    """
    n_queries = len(directions)
    grad = np.zeros(dim, dtype=np.float64)
    for q in range(n_queries):
        grad += diffs[q] * directions[q]
    grad *= dim / (beta * n_queries)
    return grad


def estimate_gradient(loss_at, z, config: EstimatorConfig, directions,
                      base_value: float = None) -> np.ndarray:
    """Estimate the loss gradient at ``z`` from forward differences.

    ``base_value`` may carry a precomputed loss(z) so callers that already
    evaluated the base point keep the total at Q+1 evaluations.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.size != config.dim:
        raise ConfigError(f"z has dimension {z.size}, expected {config.dim}")
    if len(directions) != config.n_queries:
        raise ConfigError(
            f"direction count {len(directions)} != n_queries {config.n_queries}"
        )
    if base_value is None:
        base_value = float(loss_at(z))
    if not math.isfinite(base_value):
        raise EstimatorError(
            f"non-finite loss {base_value} at the unperturbed base point",
            query_index=-1,
        )
    diffs = np.empty(config.n_queries, dtype=np.float64)
    for q in range(config.n_queries):
        value = float(loss_at(z + config.beta * directions[q]))
        if not math.isfinite(value):
            raise EstimatorError(
                f"non-finite loss {value} at perturbation query {q}", query_index=q
            )
        diffs[q] = value - base_value
    return combine_differences(diffs, directions, config.beta, config.dim)
