# counts.py
"""Subgraph-count processes over the activity timeline: static oracle, incremental engine, normalization."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import networkx as nx
import numpy as np

from dynamics import build_timeline
from errors import EnumerationError, GraphError
from graphs import SmallGraph, check_motif, automorphism_count, vertex_orbits
from models import CountProcess, NormalizationRecord, NormalizedProcess, OnOffParams, Trajectory
from rcm import PotentialGraph
from theory import psi, zeta
from utils import write_csv

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class _EmbeddingPlan:
    """DFS order of motif vertices from a root; step k maps order[k] next to an earlier image."""
    order: Tuple[int, ...]
    steps: Tuple[Tuple[int, Tuple[int, ...]], ...]


def _plan(g: SmallGraph, root: int) -> _EmbeddingPlan:
    order = tuple(nx.dfs_preorder_nodes(g.to_networkx(), source=root))
    position = {u: k for k, u in enumerate(order)}
    steps = []
    for k, u in enumerate(order[1:], start=1):
        earlier = sorted(position[w] for w in g.neighbors(u) if position[w] < k)
        # The DFS parent always comes first among the earlier neighbors
        steps.append((earlier[0], tuple(earlier[1:])))
    return _EmbeddingPlan(order, tuple(steps))


class SubgraphCounter:
    """Counts embedded motif copies among active points of one potential graph."""

    def __init__(self, potential: PotentialGraph, motifs: Sequence[SmallGraph]):
        self.logger = logging.getLogger(__name__)
        self.potential = potential
        self.motifs = list(motifs)
        self._plans: Dict[Tuple[SmallGraph, int], _EmbeddingPlan] = {}
        self._roots: Dict[SmallGraph, List[Tuple[int, int]]] = {}
        self._aut: Dict[SmallGraph, int] = {}
        for g in self.motifs:
            self._prepare(g)

    def _prepare(self, g: SmallGraph) -> None:
        if g in self._aut:
            return
        check_motif(g)
        self._aut[g] = automorphism_count(g)
        # One representative per vertex orbit, weighted by orbit size
        self._roots[g] = [(orbit[0], len(orbit)) for orbit in vertex_orbits(g)]
        for u in g.labels:
            self._plans[(g, u)] = _plan(g, u)

    def _anchored(self, g: SmallGraph, root: int, v: int, active) -> int:
        """Injective edge-preserving maps with root -> v and every other vertex active."""
        steps = self._plans[(g, root)].steps
        adjacency = self.potential.adjacency
        nbrsets = self.potential.neighbor_sets
        images = [v]
        used = {v}

        def extend(k: int) -> int:
            if k == len(steps):
                return 1
            anchor, checks = steps[k]
            total = 0
            for w in adjacency[images[anchor]]:
                if w in used or w not in active:
                    continue
                if any(w not in nbrsets[images[c]] for c in checks):
                    continue
                images.append(w)
                used.add(w)
                total += extend(k + 1)
                images.pop()
                used.discard(w)
            return total

        return extend(0)

    def _divide(self, total: int, g: SmallGraph) -> int:
        count, remainder = divmod(total, self._aut[g])
        if remainder:
            raise EnumerationError(f"{total} embeddings of {g} not divisible by |Aut| = {self._aut[g]}")
        return count

    def count_static(self, active: Set[int], g: SmallGraph) -> int:
        self._prepare(g)
        root = g.labels[0]
        total = sum(self._anchored(g, root, v, active) for v in active)
        return self._divide(total, g)

    def count_delta(self, active: Set[int], v: int, g: SmallGraph) -> int:
        """Copies of g through v with all other vertices in `active` (v itself not active)."""
        if v in active:
            raise ValueError(f"point {v} is already active")
        self._prepare(g)
        total = sum(size * self._anchored(g, root, v, active) for root, size in self._roots[g])
        return self._divide(total, g)

    def run(self, trajectories: Sequence[Trajectory], horizon: float) -> CountProcess:
        """Replay all toggles in time order, updating every motif count incrementally."""
        if len(trajectories) != self.potential.size:
            raise ValueError(f"{len(trajectories)} trajectories for {self.potential.size} points")
        active = {i for i, traj in enumerate(trajectories) if traj.initial_state == 1}
        current = [self.count_static(active, g) for g in self.motifs]
        initial = np.array(current, dtype=np.int64)
        times: List[List[float]] = [[] for _ in self.motifs]
        values: List[List[int]] = [[] for _ in self.motifs]

        timeline = build_timeline(trajectories)
        for t, point_id, new_state in timeline:
            if new_state == 1:
                deltas = [self.count_delta(active, point_id, g) for g in self.motifs]
                active.add(point_id)
            else:
                active.discard(point_id)
                deltas = [-self.count_delta(active, point_id, g) for g in self.motifs]
            for k, delta in enumerate(deltas):
                if delta:
                    current[k] += delta
                    times[k].append(t)
                    values[k].append(current[k])

        self.logger.debug(f"Replayed {len(timeline)} toggles for {len(self.motifs)} motifs")
        return CountProcess(
            motif_names=[g.name or str(g) for g in self.motifs],
            initial=initial,
            step_times=[np.array(ts, dtype=float) for ts in times],
            step_values=[np.array(vs, dtype=np.int64) for vs in values],
            horizon=float(horizon),
        )


def count_static(potential: PotentialGraph, active: Iterable[int], g: SmallGraph) -> int:
    return SubgraphCounter(potential, [g]).count_static(set(active), g)


def count_delta_at_toggle(potential: PotentialGraph, active: Iterable[int], v: int, g: SmallGraph) -> int:
    return SubgraphCounter(potential, [g]).count_delta(set(active), v, g)


def run_count_process(potential: PotentialGraph, trajectories: Sequence[Trajectory],
                      motifs: Sequence[SmallGraph], T: float) -> CountProcess:
    return SubgraphCounter(potential, motifs).run(trajectories, T)


def _transform(cp: CountProcess, scale: Sequence[float], shift: Sequence[float],
               record: NormalizationRecord) -> NormalizedProcess:
    return NormalizedProcess(
        motif_names=list(cp.motif_names),
        initial=np.array([(cp.initial[k] - shift[k]) / scale[k] for k in range(len(cp.motif_names))]),
        step_times=[ts.copy() for ts in cp.step_times],
        step_values=[(vs - shift[k]) / scale[k] for k, vs in enumerate(cp.step_values)],
        horizon=cp.horizon,
        record=record,
    )


def normalize(cp: CountProcess, motifs: Sequence[SmallGraph], n: float, nu: float, params: OnOffParams,
              regime: str, engine=None, means: Optional[Sequence[float]] = None) -> NormalizedProcess:
    """Center by the exact mean and divide by psi of the regime.

    `means` defaults to engine.expected_count per motif; the engine is a theory.TheoryEngine.
    """
    if len(motifs) != len(cp.motif_names):
        raise GraphError(f"{len(motifs)} motifs for a process over {len(cp.motif_names)}")
    if means is None:
        if engine is None:
            raise ValueError("normalize needs either exact means or a theory engine")
        means = [engine.expected_count(n, nu, g, params) for g in motifs]
    scales = [psi(g.q, n, nu, params.rho, regime) for g in motifs]
    record = NormalizationRecord(regime=regime, psi=list(scales), means=[float(m) for m in means])
    return _transform(cp, scales, means, record)


def ratio_process(cp1: CountProcess, cp2: CountProcess, a1: int, a2: int, n: float, nu: float,
                  regime: str, q: int, expected_ratio: float) -> NormalizedProcess:
    """C* = (a1 G1 / (a2 G2) - expected_ratio) * zeta over the first motif of each process.

    A path whose denominator touches zero is returned with `degenerate` set and NaN values.
    """
    scale = zeta(q, n, nu, regime)
    times = np.union1d(cp1.step_times[0], cp2.step_times[0])
    numer = np.concatenate(([cp1.initial[0]], cp1.value_at(0, times))).astype(float)
    denom = np.concatenate(([cp2.initial[0]], cp2.value_at(0, times))).astype(float)
    record = NormalizationRecord(regime=regime, psi=[1.0 / scale], means=[float(expected_ratio)])

    degenerate = bool(np.any(denom == 0))
    if degenerate:
        logger.warning(f"Ratio path degenerate: denominator vanishes on [0, {cp2.horizon}]")
        path = np.full(len(numer), np.nan)
    else:
        path = (a1 * numer / (a2 * denom) - expected_ratio) * scale

    return NormalizedProcess(
        motif_names=[f"{cp1.motif_names[0]}/{cp2.motif_names[0]}"],
        initial=path[:1],
        step_times=[times],
        step_values=[path[1:]],
        horizon=cp1.horizon,
        record=record,
        degenerate=degenerate,
    )


def clustering_process(cp: CountProcess, triangle: int, wedge: int, n: float, nu: float, regime: str,
                       expected_ratio: float) -> NormalizedProcess:
    """Global clustering 6 G_triangle / (2 G_wedge), centered and scaled like any ratio process."""
    return ratio_process(cp.select(triangle), cp.select(wedge), 6, 2, n, nu, regime, 3, expected_ratio)


def write_counts_csv(path: Path, runs: Sequence[Tuple[int, CountProcess, Optional[NormalizedProcess]]]) -> Path:
    """Rows at t = 0 and at every change of each motif, ordered by (replication, t, motif)."""
    rows = []
    for replication, cp, normalized in runs:
        for k, name in enumerate(cp.motif_names):
            times = np.concatenate(([0.0], cp.step_times[k]))
            raw = np.concatenate(([cp.initial[k]], cp.step_values[k]))
            if normalized is not None:
                scaled = np.concatenate(([normalized.initial[k]], normalized.step_values[k]))
            for idx, (t, value) in enumerate(zip(times.tolist(), raw.tolist())):
                rows.append((replication, float(t), k, name, int(value),
                             float(scaled[idx]) if normalized is not None else ""))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    return write_csv(path, ["replication", "motif", "t", "raw", "normalized"],
                     ((rep, name, t, raw, norm) for rep, t, _, name, raw, norm in rows))


def write_ratio_csv(path: Path, runs: Sequence[Tuple[int, NormalizedProcess]]) -> Path:
    """Ratio paths at t = 0 and at every step, raw ratio next to C*; degenerate paths are left out."""
    rows = []
    for replication, ratio in runs:
        if ratio.degenerate:
            continue
        scale, mean = ratio.record.psi[0], ratio.record.means[0]
        times = np.concatenate(([0.0], ratio.step_times[0]))
        values = np.concatenate((ratio.initial[:1], ratio.step_values[0]))
        for t, value in zip(times.tolist(), values.tolist()):
            rows.append((replication, ratio.motif_names[0], float(t), float(value * scale + mean), float(value)))
    return write_csv(path, ["replication", "pair", "t", "ratio", "normalized"], rows)
