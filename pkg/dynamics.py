# dynamics.py
"""Stationary two-state on/off status chains and the merged toggle timeline."""

import logging
from typing import Dict, List, Sequence

import numpy as np

from models import EventTimeline, OnOffParams, Trajectory

logger = logging.getLogger(__name__)


def sample_trajectory(p: OnOffParams, T: float, rng: np.random.Generator) -> Trajectory:
    """Status path on [0, T] started from the stationary law Bernoulli(rho)."""
    if not T > 0:
        raise ValueError(f"horizon must be positive, got {T}")
    initial = int(rng.random() < p.rho)
    state, t, toggles = initial, 0.0, []
    while True:
        # Active points switch off at rate lambda, inactive ones on at rate mu
        t += rng.exponential(1.0 / (p.lam if state == 1 else p.mu))
        if t > T:
            break
        toggles.append(t)
        state = 1 - state
    return Trajectory(initial, np.array(toggles, dtype=float), float(T))


def sample_trajectories(p: OnOffParams, T: float, count: int, rng: np.random.Generator) -> List[Trajectory]:
    return [sample_trajectory(p, T, rng) for _ in range(count)]


def Z(t, p: OnOffParams):
    """Stationary pair-correlation factor 1 + (lambda/mu) exp(-(lambda+mu) t)."""
    return 1.0 + (p.lam / p.mu) * np.exp(-(p.lam + p.mu) * np.asarray(t, dtype=float))


def pair_moment(s, t, p: OnOffParams):
    """E[A(s) A(t)] = rho^2 Z(|t - s|)."""
    return p.rho ** 2 * Z(np.abs(np.asarray(t, dtype=float) - np.asarray(s, dtype=float)), p)


def transition_probability(a: int, b: int, h, p: OnOffParams):
    """P(A(t+h) = b | A(t) = a)."""
    relax = 1.0 - np.exp(-(p.lam + p.mu) * np.asarray(h, dtype=float))
    up, down = p.rho * relax, (1.0 - p.rho) * relax
    if a == 0:
        return up if b == 1 else 1.0 - up
    return down if b == 0 else 1.0 - down


def exact_switching_probabilities(r: float, s: float, t: float, p: OnOffParams) -> Dict[str, float]:
    """Exact P(A(r) != A(s)) and P(A(r) != A(s), A(s) != A(t)) under stationarity."""
    single = 2.0 * (p.rho - float(pair_moment(r, s, p)))
    double = (p.rho * transition_probability(1, 0, s - r, p) * transition_probability(0, 1, t - s, p)
              + (1.0 - p.rho) * transition_probability(0, 1, s - r, p) * transition_probability(1, 0, t - s, p))
    return {"single": single, "double": float(double)}


def build_timeline(trajectories: Sequence[Trajectory]) -> EventTimeline:
    """Merge all toggles into one timeline sorted by (time, point id)."""
    if not trajectories:
        return EventTimeline(np.empty(0), np.empty(0, dtype=int), np.empty(0, dtype=int))
    times, ids, states = [], [], []
    for point_id, traj in enumerate(trajectories):
        k = len(traj.toggle_times)
        if k == 0:
            continue
        times.append(traj.toggle_times)
        ids.append(np.full(k, point_id))
        # States after each toggle alternate starting from the flipped initial state
        states.append((traj.initial_state + 1 + np.arange(k)) % 2)
    if not times:
        return EventTimeline(np.empty(0), np.empty(0, dtype=int), np.empty(0, dtype=int))
    times = np.concatenate(times)
    ids = np.concatenate(ids)
    states = np.concatenate(states)
    order = np.lexsort((ids, times))
    return EventTimeline(times[order], ids[order].astype(int), states[order].astype(int))


def replay_states(timeline: EventTimeline, initial_states: Sequence[int], t: float) -> np.ndarray:
    """State of every point at time t obtained by replaying the timeline."""
    states = np.array(initial_states, dtype=int)
    upto = np.searchsorted(timeline.times, t, side="right")
    for point_id, new_state in zip(timeline.point_ids[:upto], timeline.new_states[:upto]):
        states[point_id] = new_state
    return states


def _grid_states(trajectories: Sequence[Trajectory], grid: np.ndarray) -> np.ndarray:
    return np.array([traj.state_at(grid) for traj in trajectories], dtype=int)


def switching_probability_bounds_check(p: OnOffParams, grid: Sequence[float], samples: int,
                                       rng: np.random.Generator, refine: bool = True) -> Dict[str, object]:
    """Monte Carlo switching probabilities on a time grid and the fitted bound constants.

    c1 = sup P(A(r) != A(s)) / (s - r) and c2 = sup P(A(r) != A(s), A(s) != A(t)) / (t - r)^2
    over grid triples; with `refine`, the grid is halved once and the constants compared.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2 or np.any(np.diff(grid) <= 0) or grid[0] < 0:
        raise ValueError("switching grid needs at least two strictly increasing non-negative times")

    def fitted(points: np.ndarray) -> Dict[str, float]:
        horizon = float(points[-1]) + 1e-9
        paths = sample_trajectories(p, horizon, samples, rng)
        states = _grid_states(paths, points)
        c1 = c2 = 0.0
        exact_c1 = exact_c2 = 0.0
        k = len(points)
        for a in range(k):
            for b in range(a + 1, k):
                gap = points[b] - points[a]
                switched = states[:, a] != states[:, b]
                c1 = max(c1, switched.mean() / gap)
                exact = exact_switching_probabilities(points[a], points[b], points[b], p)
                exact_c1 = max(exact_c1, exact["single"] / gap)
                for c in range(b + 1, k):
                    span = points[c] - points[a]
                    both = switched & (states[:, b] != states[:, c])
                    c2 = max(c2, both.mean() / span ** 2)
                    exact = exact_switching_probabilities(points[a], points[b], points[c], p)
                    exact_c2 = max(exact_c2, exact["double"] / span ** 2)
        return {"c1": c1, "c2": c2, "exact_c1": exact_c1, "exact_c2": exact_c2}

    report = {"coarse": fitted(grid)}
    if refine:
        fine = np.sort(np.concatenate((grid, (grid[:-1] + grid[1:]) / 2.0)))
        report["refined"] = fitted(fine)
        coarse, refined = report["coarse"], report["refined"]
        report["stable"] = bool(
            np.isfinite([refined["c1"], refined["c2"]]).all()
            and refined["c1"] <= 2.0 * max(coarse["c1"], coarse["exact_c1"])
            and refined["c2"] <= 2.0 * max(coarse["c2"], coarse["exact_c2"])
        )
    logger.info(f"Switching constants: {report}")
    return report
