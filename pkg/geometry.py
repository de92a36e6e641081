# geometry.py
"""Unit torus geometry, Poisson sampling and a cell-list index for fixed-radius neighbor queries."""

import logging
from itertools import product
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from config import Config
from errors import CellSizeError, DimensionMismatchError
from utils import write_csv

logger = logging.getLogger(__name__)


def minimum_image(delta: np.ndarray) -> np.ndarray:
    """Map coordinate differences into [-1/2, 1/2)."""
    return delta - np.floor(delta + 0.5)


def torus_distance(x, y) -> np.ndarray:
    """Euclidean distance on the unit torus; broadcasts over leading axes."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1:] != y.shape[-1:]:
        raise DimensionMismatchError(f"dimension mismatch: {x.shape[-1:]} vs {y.shape[-1:]}")
    return np.sqrt(np.sum(minimum_image(x - y) ** 2, axis=-1))


def sample_poisson_points(n: float, d: int, rng: np.random.Generator) -> np.ndarray:
    """Poisson(n) many i.i.d. uniform points on [-1/2, 1/2)^d, shape (K, d)."""
    if not n > 0:
        raise ValueError(f"intensity must be positive, got {n}")
    if not 1 <= d <= Config.MAX_DIMENSION:
        raise ValueError(f"dimension must lie in [1, {Config.MAX_DIMENSION}], got {d}")
    count = rng.poisson(n)
    return rng.uniform(-0.5, 0.5, size=(count, d))


def write_points_csv(points: np.ndarray, path: Path) -> Path:
    d = points.shape[1]
    header = ["id"] + [f"x_{k + 1}" for k in range(d)]
    return write_csv(path, header, ([i] + [float(c) for c in p] for i, p in enumerate(points)))


class CellIndex:
    """Cell list over the torus; cells tile it exactly with side 1/grid_size."""

    def __init__(self, points: np.ndarray, cell_size: float):
        self.logger = logging.getLogger(__name__)
        self.points = np.asarray(points, dtype=float)
        if self.points.ndim != 2:
            raise DimensionMismatchError("points must have shape (K, d)")
        self.d = self.points.shape[1]
        if not cell_size > 0:
            raise ValueError(f"cell size must be positive, got {cell_size}")
        self.grid_size = max(1, int(np.floor(1.0 / cell_size)))
        self.cell_size = 1.0 / self.grid_size
        self.grid: Dict[Tuple[int, ...], List[int]] = {}

        cells = self._cell_of(self.points) if len(self.points) else np.empty((0, self.d), dtype=int)
        for point_id, cell in enumerate(map(tuple, cells)):
            self.grid.setdefault(cell, []).append(point_id)

        # Offsets wrap onto the same cell when the grid is narrower than 3 cells
        self._offsets = list(product((-1, 0, 1), repeat=self.d))
        self.logger.debug(f"Indexed {len(self.points)} points in {len(self.grid)} occupied cells "
                          f"(grid {self.grid_size}^{self.d})")

    def _cell_of(self, x: np.ndarray) -> np.ndarray:
        cells = np.floor((x + 0.5) * self.grid_size).astype(int)
        return cells % self.grid_size

    def candidate_ids(self, x: np.ndarray) -> List[int]:
        """Ids stored in the (at most 3^d) cells around x."""
        center = self._cell_of(np.asarray(x, dtype=float)[None, :])[0]
        cells = {tuple((center + np.array(off)) % self.grid_size) for off in self._offsets}
        ids = []
        for cell in cells:
            ids.extend(self.grid.get(cell, ()))
        return ids

    def neighbors_within(self, x, r: float, exclude: Optional[int] = None) -> List[int]:
        """Ids at torus distance <= r from x, optionally excluding one indexed id."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise DimensionMismatchError(f"query point has shape {x.shape}, index has d={self.d}")
        if r > self.cell_size:
            raise CellSizeError(f"radius {r} exceeds cell size {self.cell_size}; rebuild the index")
        ids = self.candidate_ids(x)
        if not ids:
            return []
        ids = np.array(sorted(ids))
        dist = torus_distance(self.points[ids], x)
        hits = ids[dist <= r]
        return [int(i) for i in hits if i != exclude]
