# conftest.py
"""Shared fixtures for the test modules."""

import json
from pathlib import Path

import numpy as np
import pytest

from models import OnOffParams
from rcm import PotentialGraph, Profile
from theory import TheoryEngine


def graph_from_edges(count, edges, nu=0.01):
    """Potential graph over `count` points with a hand-picked edge list; geometry is irrelevant."""
    adjacency = [[] for _ in range(count)]
    for i, j in edges:
        adjacency[i].append(j)
        adjacency[j].append(i)
    for nbrs in adjacency:
        nbrs.sort()
    points = np.linspace(-0.5, 0.5, count, endpoint=False).reshape(-1, 1)
    return PotentialGraph(points, adjacency, nu, Profile.indicator(), nu)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def params():
    return OnOffParams(1.0, 1.0)


@pytest.fixture(scope="session")
def engine_d1():
    return TheoryEngine(Profile.indicator(), 1, seed=11)


@pytest.fixture
def k4_with_tail():
    """K4 on points 0..3 plus the pendant edge 0-4."""
    edges = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3), (0, 4)]
    return graph_from_edges(5, edges)


@pytest.fixture
def experiment_file(tmp_path):
    """Writes an experiment JSON; keyword overrides replace whole top-level sections."""
    def write(**overrides):
        data = {
            "model": {"d": 1, "mu": 1.0, "lambda": 1.0, "horizon": 1.0},
            "profile": {"kind": "indicator"},
            "motifs": ["edge", "triangle"],
            "ladder": [{"n": 60, "nu": 0.05, "regime": "dense"}],
            "grid": [0.0, 0.5, 1.0],
            "replications": 3,
            "seed": 99,
        }
        data.update(overrides)
        path = Path(tmp_path) / "experiment.json"
        path.write_text(json.dumps(data), encoding="utf-8")
        return path
    return write
