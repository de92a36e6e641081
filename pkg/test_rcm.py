# test_rcm.py
import numpy as np
import pytest
from scipy import stats

from errors import DimensionMismatchError, InteractionRangeError
from geometry import sample_poisson_points, torus_distance
from rcm import (Profile, cutoff_radius, pair_probability, sample_potential_edges, sample_radial_offsets,
                 unit_ball_volume, write_edges_csv)


def test_unit_ball_volumes():
    assert unit_ball_volume(1) == pytest.approx(2.0)
    assert unit_ball_volume(2) == pytest.approx(np.pi)
    assert unit_ball_volume(3) == pytest.approx(4 * np.pi / 3)


def test_indicator_profile():
    phi = Profile.indicator()
    assert list(phi.value([0.0, 1.0, 1.0001])) == [1.0, 1.0, 0.0]
    assert phi.t_max == 1.0
    assert phi.tail_mass() == 0.0
    assert phi.is_non_increasing()


def test_exponential_profile_cutoff():
    phi = Profile.exponential(0.5)
    assert phi.t_max == pytest.approx(np.log(0.5 / 1e-6) / 0.5)
    assert float(phi.value(phi.t_max)) == pytest.approx(1e-6)
    assert phi.tail_mass() == pytest.approx(1e-6 / 0.5)
    with pytest.raises(ValueError):
        Profile.exponential(1.5)


def test_table_profile_is_normalized():
    phi = Profile.from_table([0.0, 1.0, 2.0], [1.0, 0.5, 0.0])
    assert phi.integral() == pytest.approx(1.0)
    assert float(phi.value(0.5)) == pytest.approx(0.75 / 1.0)
    assert float(phi.value(3.0)) == 0.0
    assert phi.is_non_increasing()
    with pytest.raises(ValueError):
        Profile.from_table([0.0, 1.0], [0.5, 0.6])
    with pytest.raises(ValueError):
        Profile.from_table([0.0, 0.1], [1.0, 1.0])


def test_profile_from_spec():
    assert Profile.from_spec({"kind": "indicator"}) == Profile.indicator()
    assert Profile.from_spec({"kind": "exponential", "rate": 0.25}).rate == 0.25
    with pytest.raises(ValueError):
        Profile.from_spec({"kind": "gaussian"})


def test_cutoff_radius():
    assert cutoff_radius(Profile.indicator(), 0.02, 1) == pytest.approx(0.02)
    assert cutoff_radius(Profile.indicator(), 0.01, 2) == pytest.approx(0.1)


def test_pair_probability():
    phi = Profile.indicator()
    assert float(pair_probability([0.0], [0.015], phi, 0.02, 1)) == 1.0
    assert float(pair_probability([0.495], [-0.495], phi, 0.02, 1)) == 1.0
    assert float(pair_probability([0.0], [0.03], phi, 0.02, 1)) == 0.0
    with pytest.raises(ValueError):
        pair_probability([0.0], [0.1], phi, 0.0, 1)


def test_radial_offsets_follow_profile(rng):
    offsets = sample_radial_offsets(Profile.indicator(), 2, 20_000, rng)
    norms = np.linalg.norm(offsets, axis=1)
    assert offsets.shape == (20_000, 2)
    assert norms.max() <= 1.0
    # |y|^2 is uniform on [0, 1] for the disk
    assert np.mean(norms ** 2) == pytest.approx(0.5, abs=0.01)


def test_indicator_edges_match_brute_force(rng):
    points = rng.uniform(-0.5, 0.5, size=(250, 2))
    graph = sample_potential_edges(points, Profile.indicator(), 0.004, 2, seed=5)
    radius = np.sqrt(0.004)
    for i in range(len(points)):
        near = np.nonzero(torus_distance(points, points[i]) <= radius)[0]
        assert graph.adjacency[i] == sorted(int(j) for j in near if j != i)
    assert graph.edge_count == len(graph.edge_list())
    assert np.all(graph.edge_distances() <= radius)


def test_edge_sampling_is_reproducible(rng):
    points = rng.uniform(-0.5, 0.5, size=(300, 1))
    phi = Profile.exponential(1.0)
    first = sample_potential_edges(points, phi, 0.002, 1, seed=17)
    second = sample_potential_edges(points, phi, 0.002, 1, seed=17)
    other = sample_potential_edges(points, phi, 0.002, 1, seed=18)
    assert first.adjacency == second.adjacency
    assert first.adjacency != other.adjacency
    assert first.omitted_edge_bound > 0


def test_edge_sampling_errors(rng):
    with pytest.raises(InteractionRangeError):
        sample_potential_edges(rng.uniform(-0.5, 0.5, size=(10, 1)), Profile.indicator(), 0.6, 1, seed=0)
    with pytest.raises(DimensionMismatchError):
        sample_potential_edges(rng.uniform(-0.5, 0.5, size=(10, 2)), Profile.indicator(), 0.01, 1, seed=0)


def test_empty_point_cloud():
    graph = sample_potential_edges(np.empty((0, 1)), Profile.indicator(), 0.02, 1, seed=0)
    assert graph.size == 0 and graph.edge_count == 0


def test_write_edges_csv(rng, tmp_path):
    points = np.array([[0.0], [0.01], [0.3]])
    graph = sample_potential_edges(points, Profile.indicator(), 0.02, 1, seed=3)
    lines = write_edges_csv(graph, tmp_path / "edges.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "i,j,distance"
    assert len(lines) == 2 and lines[1].startswith("0,1,")


def _profile_cdf(phi, u):
    if phi.kind == "indicator":
        return np.minimum(u, 1.0)
    return 1.0 - np.exp(-phi.rate * u)


@pytest.mark.parametrize("phi, d, nu", [
    (Profile.indicator(), 2, 0.004),
    (Profile.exponential(1.0), 1, 0.002),
    (Profile.exponential(1.0), 2, 0.001),
])
def test_accepted_distances_follow_profile_times_shell(rng, phi, d, nu):
    # With the shell density d * omega_d * r^(d-1), u = r^d / nu has density phi(u)
    points = rng.uniform(-0.5, 0.5, size=(2000, d))
    graph = sample_potential_edges(points, phi, nu, d, seed=23)
    u = graph.edge_distances() ** d / nu
    assert len(u) > 2000
    bins = 10
    probabilities = np.full(bins, 1.0 / bins)
    if phi.kind == "indicator":
        edges = np.linspace(0.0, 1.0, bins + 1)
    else:
        edges = -np.log(1.0 - np.linspace(0.0, 1.0, bins + 1)[:-1]) / phi.rate
        edges = np.append(edges, u.max() + 1.0)
    observed, _ = np.histogram(u, bins=edges)
    assert observed.sum() == len(u)
    assert np.allclose(np.diff(_profile_cdf(phi, edges[:-1]).tolist() + [1.0]), probabilities)
    _, p_value = stats.chisquare(observed, probabilities * len(u))
    assert p_value > 1e-3


@pytest.mark.parametrize("phi", [Profile.indicator(), Profile.exponential(1.0)], ids=["indicator", "exponential"])
def test_edge_set_grows_with_nu_under_one_seed(rng, phi):
    points = rng.uniform(-0.5, 0.5, size=(400, 2))
    previous = set()
    for nu in (0.0005, 0.001, 0.002, 0.004):
        edges = {tuple(e) for e in sample_potential_edges(points, phi, nu, 2, seed=41).edge_list().tolist()}
        assert previous <= edges
        previous = edges
    assert previous


@pytest.mark.parametrize("phi, d, nu", [
    (Profile.indicator(), 1, 0.02),
    (Profile.indicator(), 2, 0.02),
    (Profile.indicator(), 3, 0.02),
    (Profile.exponential(1.0), 1, 0.02),
    (Profile.exponential(1.0), 2, 0.005),
])
def test_mean_edge_count(rng, phi, d, nu):
    # n^2 / 2 pairs in reach of a ball of volume nu * omega_d; n = 200, nu = 0.02 in d = 1 gives 800
    n = 200
    counts = np.array([sample_potential_edges(sample_poisson_points(n, d, rng), phi, nu, d, seed=r).edge_count
                       for r in range(400)])
    expected = 0.5 * n ** 2 * nu * unit_ball_volume(d) * (1.0 - phi.tail_mass())
    stderr = counts.std(ddof=1) / np.sqrt(len(counts))
    assert abs(counts.mean() - expected) <= 4 * stderr
