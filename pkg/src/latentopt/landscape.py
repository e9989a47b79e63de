"""Two-dimensional latent-space slices for landscape and trajectory analysis.

A grid is an origin plus two scaled basis vectors; cell coordinates (x, y)
map to ``origin + x * basis_x + y * basis_y``. The principal construction
anchors (0, 0) at the start point and (1, 0) at the solution point; the
random construction spans two independent unit directions scaled by the
origin's norm. Projection back to (x, y) is the least-squares projection
onto the spanned plane expressed in the same scaled basis, the unique
choice consistent with the anchors.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .gradient import sample_directions
from .validation import as_latent

PRINCIPAL_X_RANGE = (-0.5, 1.5)
PRINCIPAL_Y_RANGE = (-2.0, 2.0)
RANDOM_RANGE = (-1.6, 1.6)
DEFAULT_RESOLUTION = (41, 41)

PROJECTION_CONVENTION = "least-squares projection onto span(basis_x, basis_y) in scaled grid coordinates"


@dataclass
class LandscapeGrid:
    origin: np.ndarray
    basis_x: np.ndarray
    basis_y: np.ndarray
    xs: np.ndarray
    ys: np.ndarray
    mode: str

    def point(self, x, y):
        """Latent point of cell (x, y); cell (0, 0) is the origin exactly."""
        offset = x * self.basis_x + y * self.basis_y
        if not offset.any():
            return self.origin.copy()
        return self.origin + offset

    def cells(self):
        """All (x, y, point) triples, x-major then y, deterministic order."""
        return [(float(x), float(y), self.point(x, y)) for x in self.xs for y in self.ys]

    def project(self, z):
        """Least-squares (x, y) coordinates of ``z`` on the grid's plane."""
        z = as_latent(z, self.origin.size, name="trajectory point")
        bx, by = self.basis_x, self.basis_y
        gram = np.array([[bx @ bx, bx @ by], [by @ bx, by @ by]])
        rhs = np.array([bx @ (z - self.origin), by @ (z - self.origin)])
        x, y = np.linalg.solve(gram, rhs)
        return float(x), float(y)


def _axis(bounds, n):
    lo, hi = float(bounds[0]), float(bounds[1])
    if not lo < hi or n < 2:
        raise ConfigError(f"bad grid axis: range {bounds}, resolution {n}")
    return np.linspace(lo, hi, int(n))


def principal_grid(z0, z_star, x_range=PRINCIPAL_X_RANGE, y_range=PRINCIPAL_Y_RANGE,
                   resolution=DEFAULT_RESOLUTION, rng=None):
    """Grid spanned by the start-to-solution vector and an orthogonal direction.

    ``basis_x = z_star - z0``; ``basis_y`` is a random unit vector
    orthogonalized against it (two Gram-Schmidt passes) and scaled by
    ``||z_star||``. By construction cell (0, 0) is z0 and cell (1, 0) is
    z_star.
    """
    z0 = as_latent(z0, name="z0")
    z_star = as_latent(z_star, z0.size, name="z_star")
    v_x = z_star - z0
    norm_x = np.linalg.norm(v_x)
    if norm_x == 0.0:
        raise ConfigError("degenerate principal direction: z_star equals z0")
    rng = rng or np.random.default_rng()
    v_y = sample_directions(z0.size, 1, rng)[0]
    for _ in range(2):  # re-orthogonalize to push the residual to round-off
        v_y = v_y - (v_y @ v_x) / (norm_x ** 2) * v_x
    norm_y = np.linalg.norm(v_y)
    if norm_y < 1e-12:
        raise ConfigError("random direction collapsed onto the principal vector")
    v_y = v_y / norm_y
    return LandscapeGrid(
        origin=z0, basis_x=v_x, basis_y=float(np.linalg.norm(z_star)) * v_y,
        xs=_axis(x_range, resolution[0]), ys=_axis(y_range, resolution[1]),
        mode="principal",
    )


def random_grid(z0, x_range=RANDOM_RANGE, y_range=RANDOM_RANGE,
                resolution=DEFAULT_RESOLUTION, rng=None):
    """Grid spanned by two independent unit directions scaled by ||z0||."""
    z0 = as_latent(z0, name="z0")
    scale = float(np.linalg.norm(z0))
    if scale == 0.0:
        raise ConfigError("degenerate scale: ||z0|| must be positive")
    rng = rng or np.random.default_rng()
    v_x, v_y = sample_directions(z0.size, 2, rng)
    return LandscapeGrid(
        origin=z0, basis_x=scale * v_x, basis_y=scale * v_y,
        xs=_axis(x_range, resolution[0]), ys=_axis(y_range, resolution[1]),
        mode="random",
    )


def project_trajectory(latents, grid: LandscapeGrid):
    """Project a list of latent iterates onto the grid plane."""
    return [grid.project(z) for z in latents]


def evaluate_grid(grid: LandscapeGrid, objective, suite):
    """Evaluate every cell, decoding each exactly once (batched).

    Returns rows ``(x, y, similarities, properties, valid)`` in the grid's
    deterministic cell order.
    """
    cells = grid.cells()
    evals = objective.evaluate_batch([p for _, _, p in cells], suite)
    rows = []
    for (x, y, _), ev in zip(cells, evals):
        rows.append({
            "x": x, "y": y,
            "similarities": dict(ev.similarities),
            "properties": dict(ev.properties),
            "valid": ev.valid,
        })
    return rows
