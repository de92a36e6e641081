# rcm.py
"""Connection profiles and once-and-for-all sampling of the potential edges of the random connection model."""

import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, FrozenSet, List, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.special import gamma as gamma_fn

from config import Config
from errors import DimensionMismatchError, InteractionRangeError
from geometry import CellIndex, torus_distance
from utils import pair_uniforms, write_csv

logger = logging.getLogger(__name__)


def unit_ball_volume(d: int) -> float:
    return float(np.pi ** (d / 2.0) / gamma_fn(d / 2.0 + 1.0))


@dataclass(frozen=True)
class Profile:
    """Non-increasing phi: [0, inf) -> [0, 1] with unit integral."""
    kind: str
    rate: float = 1.0
    table_t: Tuple[float, ...] = ()
    table_v: Tuple[float, ...] = ()
    eps_cut: float = Config.EPS_CUT

    def __post_init__(self):
        if self.kind not in ("indicator", "exponential", "table"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.kind == "exponential" and not 0 < self.rate <= 1:
            # rate * exp(-rate t) stays below 1 only for rate <= 1
            raise ValueError(f"exponential rate must lie in (0, 1], got {self.rate}")
        if self.kind == "table":
            ts, vs = np.asarray(self.table_t), np.asarray(self.table_v)
            if len(ts) < 2 or len(ts) != len(vs) or ts[0] != 0 or np.any(np.diff(ts) <= 0):
                raise ValueError("table needs >= 2 strictly increasing abscissae starting at 0")
            if np.any(np.diff(vs) > 0) or np.any(vs < 0) or vs.max() > 1.0 + 1e-12:
                raise ValueError("table values must be non-increasing within [0, 1]")
            if abs(trapezoid(vs, ts) - 1.0) > 1e-9:
                raise ValueError("table integral must equal 1; use Profile.from_table to normalize")

    @classmethod
    def indicator(cls) -> "Profile":
        return cls("indicator")

    @classmethod
    def exponential(cls, rate: float = 1.0) -> "Profile":
        return cls("exponential", rate=rate)

    @classmethod
    def from_table(cls, ts: Sequence[float], values: Sequence[float], normalize: bool = True) -> "Profile":
        """Piecewise-linear profile through (t_k, v_k), zero beyond the last abscissa."""
        ts = np.asarray(ts, dtype=float)
        vs = np.asarray(values, dtype=float)
        if normalize:
            vs = vs / trapezoid(vs, ts)
        return cls("table", table_t=tuple(ts.tolist()), table_v=tuple(vs.tolist()))

    @classmethod
    def from_spec(cls, spec: Dict[str, Any]) -> "Profile":
        kind = spec.get("kind")
        if kind == "indicator":
            return cls.indicator()
        if kind == "exponential":
            return cls.exponential(float(spec.get("rate", 1.0)))
        if kind == "table":
            return cls.from_table(spec["t"], spec["values"], normalize=spec.get("normalize", True))
        raise ValueError(f"unknown profile kind {kind!r}")

    def key(self) -> Tuple:
        return (self.kind, self.rate, self.table_t, self.table_v)

    def value(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "indicator":
            return (t <= 1.0).astype(float)
        if self.kind == "exponential":
            return self.rate * np.exp(-self.rate * t)
        return np.interp(t, self.table_t, self.table_v, right=0.0)

    def integral(self) -> float:
        if self.kind == "table":
            return float(trapezoid(self.table_v, self.table_t))
        return 1.0

    @cached_property
    def t_max(self) -> float:
        """Smallest t with phi(t) <= eps_cut (1 for the indicator)."""
        if self.kind == "indicator":
            return 1.0
        if self.kind == "exponential":
            return max(0.0, float(np.log(self.rate / self.eps_cut) / self.rate))
        ts, vs = np.asarray(self.table_t), np.asarray(self.table_v)
        below = np.nonzero(vs <= self.eps_cut)[0]
        if len(below) == 0:
            return float(ts[-1])
        k = below[0]
        if k == 0:
            return 0.0
        # Linear interpolation inside the crossing segment
        t0, t1, v0, v1 = ts[k - 1], ts[k], vs[k - 1], vs[k]
        return float(t0 + (v0 - self.eps_cut) / (v0 - v1) * (t1 - t0))

    def tail_mass(self) -> float:
        """Integral of phi beyond the cutoff."""
        if self.kind == "indicator":
            return 0.0
        if self.kind == "exponential":
            return float(np.exp(-self.rate * self.t_max))
        grid = np.linspace(self.t_max, self.table_t[-1], 2049)
        return float(trapezoid(self.value(grid), grid))

    def sample_u(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """Draws from the density phi itself (unit integral)."""
        if self.kind == "indicator":
            return rng.random(size)
        if self.kind == "exponential":
            return rng.exponential(1.0 / self.rate, size)
        fine = np.linspace(0.0, self.table_t[-1], 4097)
        cdf = cumulative_trapezoid(self.value(fine), fine, initial=0.0)
        return np.interp(rng.random(size) * cdf[-1], cdf, fine)

    def is_non_increasing(self, upto: float = None, points: int = 10_001) -> bool:
        grid = np.linspace(0.0, upto or 2.0 * max(self.t_max, 1.0), points)
        values = self.value(grid)
        return bool(np.all(np.diff(values) <= 1e-15) and values.min() >= 0 and values.max() <= 1.0 + 1e-12)


def sample_radial_offsets(profile: Profile, d: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Offsets y in R^d with density phi(|y|^d) / V_d: u ~ phi, |y| = u^(1/d), uniform direction."""
    radius = profile.sample_u(size, rng) ** (1.0 / d)
    direction = rng.standard_normal((size, d))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    return direction * radius[:, None]


def cutoff_radius(profile: Profile, nu: float, d: int) -> float:
    return float((nu * profile.t_max) ** (1.0 / d))


def pair_probability(x, y, profile: Profile, nu: float, d: int):
    """phi(|x - y|^d / nu) with the torus metric."""
    if not nu > 0:
        raise ValueError(f"nu must be positive, got {nu}")
    return profile.value(torus_distance(x, y) ** d / nu)


@dataclass
class PotentialGraph:
    """RCM adjacency over all points, fixed for the whole time horizon."""
    points: np.ndarray
    adjacency: List[List[int]]
    nu: float
    profile: Profile
    cutoff_radius: float
    seed: int = 0
    omitted_edge_bound: float = 0.0

    @cached_property
    def neighbor_sets(self) -> List[FrozenSet[int]]:
        return [frozenset(nbrs) for nbrs in self.adjacency]

    @property
    def size(self) -> int:
        return len(self.adjacency)

    @property
    def edge_count(self) -> int:
        return sum(len(nbrs) for nbrs in self.adjacency) // 2

    def edge_list(self) -> np.ndarray:
        edges = [(i, j) for i, nbrs in enumerate(self.adjacency) for j in nbrs if i < j]
        return np.array(edges, dtype=int).reshape(-1, 2)

    def edge_distances(self) -> np.ndarray:
        edges = self.edge_list()
        if len(edges) == 0:
            return np.empty(0)
        return torus_distance(self.points[edges[:, 0]], self.points[edges[:, 1]])


def sample_potential_edges(points: np.ndarray, profile: Profile, nu: float, d: int, seed: int) -> PotentialGraph:
    """Independent potential edges with probability phi(|x-y|^d / nu) between all point pairs.

    Pairs farther than the cutoff radius (nu * t_max)^(1/d) are never edges. The
    uniform deciding pair {i, j} is keyed by (seed, min id, max id).
    """
    points = np.asarray(points, dtype=float)
    if points.size == 0:
        points = points.reshape(0, d)
    if points.ndim != 2 or points.shape[1] != d:
        raise DimensionMismatchError(f"points have shape {points.shape}, expected (K, {d})")
    count = len(points)
    adjacency: List[List[int]] = [[] for _ in range(count)]
    radius = cutoff_radius(profile, nu, d) if nu > 0 else 0.0
    if radius >= 0.5:
        raise InteractionRangeError(f"cutoff radius {radius:.4g} >= 1/2: interaction range spans the torus")

    if count > 1 and radius > 0:
        index = CellIndex(points, cell_size=radius)
        for i in range(count):
            js = np.array([j for j in index.neighbors_within(points[i], radius, exclude=i) if j > i], dtype=int)
            if len(js) == 0:
                continue
            prob = profile.value(torus_distance(points[js], points[i]) ** d / nu)
            for j in js[pair_uniforms(seed, i, js) < prob].tolist():
                adjacency[i].append(j)
                adjacency[j].append(i)
        for nbrs in adjacency:
            nbrs.sort()

    omitted = 0.5 * count ** 2 * nu * unit_ball_volume(d) * profile.tail_mass()
    graph = PotentialGraph(points, adjacency, nu, profile, radius, seed, omitted)
    logger.info(f"Sampled potential graph: {count} points, {graph.edge_count} edges, "
                f"cutoff radius {radius:.4g}, expected omitted edges <= {omitted:.3g}")
    return graph


def write_edges_csv(graph: PotentialGraph, path: Path) -> Path:
    edges = graph.edge_list()
    distances = graph.edge_distances()
    return write_csv(path, ["i", "j", "distance"],
                     ((int(i), int(j), float(dist)) for (i, j), dist in zip(edges, distances)))
