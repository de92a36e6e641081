# theory.py
"""Closed-form quantities of the dynamic RCM: profile integrals, exact moments, limit covariances, ratio limit."""

import hashlib
import logging
from math import factorial, prod, sqrt
from typing import Any, Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy.integrate import nquad, quad

from config import Config
from dynamics import Z
from errors import GraphError, IntegrationError, RegimeError, SupportError
from geometry import minimum_image
from graphs import (SmallGraph, automorphism_count, contains_after_relabeling, graph_diameter,
                    overlap_pairs, preset)
from models import MotifIntegral, OnOffParams, RegimeSpec
from rcm import Profile, cutoff_radius, sample_radial_offsets, unit_ball_volume
from utils import make_rng

logger = logging.getLogger(__name__)

_METHOD_RANK = {"closed-form": 0, "quadrature": 1, "monte-carlo": 2, "torus-monte-carlo": 3}


def _check_regime_name(regime: str) -> None:
    if regime not in ("dense", "sparse"):
        raise RegimeError(f"regime must be 'dense' or 'sparse', got {regime!r}")


def psi(q: int, n: float, nu: float, rho: float, regime: str) -> float:
    """Normalization of a q-vertex motif count."""
    _check_regime_name(regime)
    if regime == "dense":
        return rho ** q * n ** (q - 0.5) * nu ** (q - 1)
    return rho ** q * sqrt(n ** q * nu ** (q - 1))


def zeta(q: int, n: float, nu: float, regime: str) -> float:
    """Scaling of the centered ratio process (no rho factor)."""
    _check_regime_name(regime)
    if regime == "dense":
        return sqrt(n)
    return sqrt(n ** q * nu ** (q - 1))


def check_regime(spec: RegimeSpec, motifs: Sequence[SmallGraph]) -> RegimeSpec:
    """Validate nu_n = c n^gamma against every motif: -q/(q-1) < gamma < 0, gamma != -1."""
    _check_regime_name(spec.regime)
    if spec.gamma is None:
        return spec
    gamma = spec.gamma
    if gamma == -1:
        raise RegimeError("gamma = -1 is the boundary n nu_n -> c and belongs to neither regime")
    derived = "dense" if gamma > -1 else "sparse"
    if derived != spec.regime:
        raise RegimeError(f"gamma = {gamma} gives the {derived} regime, but {spec.regime} was requested")
    for g in motifs:
        if g.q < 2:
            continue
        low = -g.q / (g.q - 1)
        if not low < gamma < 0:
            raise RegimeError(f"gamma = {gamma} outside ({low:.4g}, 0) required by {g} (q={g.q})")
    return spec


def _stable_key(obj) -> int:
    return int.from_bytes(hashlib.sha256(repr(obj).encode("utf-8")).digest()[:4], "big")


def _block_subgraph(h: SmallGraph, vertices) -> SmallGraph:
    labels = sorted(vertices)
    mapping = {u: k + 1 for k, u in enumerate(labels)}
    edges = [(mapping[u], mapping[v]) for u, v in h.edges if u in mapping and v in mapping]
    return SmallGraph.from_edges(edges, q=len(labels))


def _worst(methods: Sequence[str]) -> str:
    return max(methods, key=_METHOD_RANK.get)


class TheoryEngine:
    """Evaluates F(H), F_n(H) and everything built from them for one profile and dimension.

    F values are cached by isomorphism class, so repeated union graphs across
    overlap families are integrated once.
    """

    def __init__(self, profile: Profile, d: int, seed: int = 0, mc_samples: int = Config.MC_SAMPLES,
                 mc_batches: int = Config.MC_BATCHES, method: str = "auto"):
        if method not in ("auto", "quadrature", "monte-carlo"):
            raise ValueError(f"unknown integration method {method!r}")
        self.logger = logging.getLogger(__name__)
        self.profile = profile
        self.d = d
        self.seed = seed
        self.mc_samples = mc_samples
        self.mc_batches = mc_batches
        self.method = method
        self._blocks: Dict[Tuple, MotifIntegral] = {}
        self._pair_sums: Dict[Tuple, float] = {}
        self._kappa: Optional[float] = None

    # ------------------------------------------------------------------
    # Continuum integrals

    @property
    def kappa(self) -> float:
        """F(K2) = V_d * integral of phi, by one-dimensional quadrature of the profile."""
        if self._kappa is None:
            profile = self.profile
            if profile.kind == "indicator":
                mass, _ = quad(profile.value, 0.0, 1.0)
            elif profile.kind == "exponential":
                mass, _ = quad(profile.value, 0.0, np.inf)
            else:
                mass, _ = quad(profile.value, 0.0, profile.table_t[-1],
                               points=profile.table_t[1:-1] or None, limit=200)
            self._kappa = unit_ball_volume(self.d) * mass
        return self._kappa

    def F_of(self, h: SmallGraph, method: Optional[str] = None) -> MotifIntegral:
        """Translation-reduced integral of prod phi(|y_u - y_v|^d) over the edges of h, y_1 = 0.

        Factorizes over biconnected blocks; bridges contribute kappa each.
        """
        method = method or self.method
        if not h.is_connected():
            raise IntegrationError(f"{h} is disconnected; its integral diverges")
        edges = tuple(sorted(h.edges))
        if h.q == 1:
            return MotifIntegral(edges, 1.0, 0.0, "closed-form")

        blocks = list(nx.biconnected_components(h.to_networkx()))
        parts = [self._block_integral(_block_subgraph(h, block), method) for block in blocks]
        value = prod(part.value for part in parts)
        rel = sqrt(sum((part.stderr / part.value) ** 2 for part in parts))
        return MotifIntegral(edges, value, value * rel, _worst([part.method for part in parts]))

    def _block_integral(self, block: SmallGraph, method: str) -> MotifIntegral:
        key = (block.canonical_form(), method)
        if key in self._blocks:
            return self._blocks[key]
        edges = tuple(sorted(block.edges))
        if block.q == 2:
            result = MotifIntegral(edges, self.kappa, 0.0, "closed-form")
        elif method != "monte-carlo" and self._quadrature_supported(block, method):
            result = self._quadrature(block)
        elif method == "quadrature":
            raise IntegrationError(f"no quadrature rule for {block} in d={self.d} with a {self.profile.kind} profile")
        else:
            result = self._monte_carlo(block)
        self.logger.info(f"F({block}) = {result.value:.10g} by {result.method}"
                         + (f" (stderr {result.stderr:.3g})" if result.stderr else ""))
        self._blocks[key] = result
        return result

    def _quadrature_supported(self, block: SmallGraph, method: str) -> bool:
        cap = Config.MAX_QUADRATURE_VERTICES if method == "quadrature" else Config.AUTO_QUADRATURE_VERTICES
        if self.d == 1:
            return block.q <= cap
        triangle = preset("triangle").canonical_form()
        return self.d == 2 and self.profile.kind == "indicator" and block.canonical_form() == triangle

    def _quadrature(self, block: SmallGraph) -> MotifIntegral:
        edges = tuple(sorted(block.edges))
        if self.d == 2:
            # Disk of radius 1 around y_2, intersected with the unit disk around the anchor
            def lens(r):
                return 2.0 * np.arccos(r / 2.0) - 0.5 * r * np.sqrt(4.0 - r * r)
            value, err = quad(lambda r: 2.0 * np.pi * r * lens(r), 0.0, 1.0,
                              epsabs=Config.QUAD_EPSABS, epsrel=Config.QUAD_EPSREL)
            self.logger.debug(f"Lens quadrature error estimate {err:.3g}")
            return MotifIntegral(edges, float(value), 0.0, "quadrature")

        graph = block.to_networkx()
        order = [1] + [v for _, v in nx.bfs_edges(graph, 1)]
        position = {u: k for k, u in enumerate(order)}
        earlier = {u: [w for w in block.neighbors(u) if position[w] < position[u]] for u in order}
        reach = self.profile.t_max
        m = len(order) - 1

        # nquad integrates args[0] innermost; args[i] is the position of order[m - i]
        def positions(args, first: int) -> Dict[int, float]:
            y = {1: 0.0}
            for j, value in enumerate(args):
                y[order[m - first - j]] = value
            return y

        def interval(u: int, y: Dict[int, float]) -> Tuple[float, float]:
            lo = max(y[w] - reach for w in earlier[u])
            hi = min(y[w] + reach for w in earlier[u])
            return lo, max(lo, hi)

        def make_range(i: int):
            u = order[m - i]

            def bounds(*outer):
                return interval(u, positions(outer, i + 1))
            return bounds

        def make_opts(i: int):
            u = order[m - i]

            def opts(*outer):
                y = positions(outer, i + 1)
                lo, hi = interval(u, y)
                # Kinks of phi(|y - y_w|) sit at the neighbor positions
                kinks = sorted({y[w] for w in earlier[u] if lo < y[w] < hi})
                options = {"limit": 100, "epsabs": Config.QUAD_EPSABS, "epsrel": Config.QUAD_EPSREL}
                if kinks:
                    options["points"] = kinks
                return options
            return opts

        def integrand(*args):
            y = positions(args, 0)
            return prod(float(self.profile.value(abs(y[a] - y[b]))) for a, b in block.edges)

        value, err = nquad(integrand, [make_range(i) for i in range(m)], opts=[make_opts(i) for i in range(m)])
        self.logger.debug(f"nquad error estimate {err:.3g} for {block}")
        return MotifIntegral(edges, float(value), 0.0, "quadrature")

    def _tree_sample(self, block: SmallGraph, size: int, rng: np.random.Generator, scale: float = 1.0):
        """Positions along a BFS spanning tree from the anchor; returns positions and non-tree edges."""
        graph = block.to_networkx()
        tree = list(nx.bfs_edges(graph, 1))
        y = np.zeros((size, block.q, self.d))
        for parent, child in tree:
            y[:, child - 1] = y[:, parent - 1] + scale * sample_radial_offsets(self.profile, self.d, size, rng)
        tree_set = {(min(a, b), max(a, b)) for a, b in tree}
        return y, tree, [e for e in sorted(block.edges) if e not in tree_set]

    @staticmethod
    def _merge_batches(batches: List[np.ndarray]) -> Tuple[float, float]:
        """Weighted mean of batch means and the pooled standard error."""
        sizes = np.array([len(b) for b in batches], dtype=float)
        means = np.array([b.mean() for b in batches])
        total = sizes.sum()
        mean = float(np.sum(sizes * means) / total)
        within = sum(((b - b.mean()) ** 2).sum() for b in batches)
        between = float(np.sum(sizes * (means - mean) ** 2))
        variance = (within + between) / (total - 1)
        return mean, float(np.sqrt(variance / total))

    def _monte_carlo(self, block: SmallGraph) -> MotifIntegral:
        """kappa^(q-1) E[prod over non-tree edges of phi], offsets drawn from the radial law."""
        size = max(2, self.mc_samples // self.mc_batches)
        key = _stable_key(block.canonical_form())
        batches = []
        for b in range(self.mc_batches):
            rng = make_rng(self.seed, key, b)
            y, _, rest = self._tree_sample(block, size, rng)
            weight = np.ones(size)
            for u, v in rest:
                weight *= self.profile.value(np.linalg.norm(y[:, u - 1] - y[:, v - 1], axis=1) ** self.d)
            batches.append(weight)
        mean, stderr = self._merge_batches(batches)
        if not np.isfinite(mean) or not np.isfinite(stderr):
            raise IntegrationError(f"Monte Carlo variance not finite for {block}")
        if mean <= 0:
            raise IntegrationError(f"no Monte Carlo sample of {block} closed its cycles; raise the sample size")
        factor = self.kappa ** (block.q - 1)
        return MotifIntegral(tuple(sorted(block.edges)), factor * mean, factor * stderr, "monte-carlo")

    # ------------------------------------------------------------------
    # Torus integrals

    def F_n_of(self, motif: SmallGraph, nu: float, method: str = "auto") -> MotifIntegral:
        """Torus integral F_n(H): nu^(q-1) F(H) when every configuration stays inside the window."""
        radius = cutoff_radius(self.profile, nu, self.d)
        if radius >= 0.5:
            raise SupportError(f"cutoff radius {radius:.4g} >= 1/2 at nu = {nu}")
        if motif.q == 1:
            return MotifIntegral((), 1.0, 0.0, "closed-form")
        if method == "auto" and graph_diameter(motif) * radius < 0.5:
            base = self.F_of(motif)
            factor = nu ** (motif.q - 1)
            return MotifIntegral(base.edges, factor * base.value, factor * base.stderr, base.method)
        if method not in ("auto", "torus-monte-carlo"):
            raise ValueError(f"unknown torus integration method {method!r}")
        return self._torus_monte_carlo(motif, nu)

    def _torus_monte_carlo(self, motif: SmallGraph, nu: float) -> MotifIntegral:
        """Tree offsets scaled by nu^(1/d), wrapped onto the torus; phi is cut at the edge-sampling radius.

        A tree offset longer than the cutoff never carries an edge. Shorter offsets stay
        below 1/2 (F_n_of guarantees it), so each has exactly one torus image and no
        periodic copy is counted twice, whatever the support of phi.
        """
        size = max(2, self.mc_samples // self.mc_batches)
        key = _stable_key((motif.canonical_form(), nu))
        scale = nu ** (1.0 / self.d)
        radius = cutoff_radius(self.profile, nu, self.d)
        batches = []
        for b in range(self.mc_batches):
            rng = make_rng(self.seed, key, b)
            y, tree, rest = self._tree_sample(motif, size, rng, scale)
            weight = np.ones(size)
            for u, v in tree:
                weight *= np.linalg.norm(y[:, v - 1] - y[:, u - 1], axis=1) <= radius
            for u, v in rest:
                distance = np.linalg.norm(minimum_image(y[:, u - 1] - y[:, v - 1]), axis=1)
                weight *= np.where(distance <= radius, self.profile.value(distance ** self.d / nu), 0.0)
            batches.append(weight)
        mean, stderr = self._merge_batches(batches)
        factor = (nu * self.kappa) ** (motif.q - 1)
        return MotifIntegral(tuple(sorted(motif.edges)), factor * mean, factor * stderr, "torus-monte-carlo")

    def F_n_ladder(self, motif: SmallGraph, nus: Sequence[float]) -> List[Dict[str, float]]:
        """Torus Monte Carlo against nu^(q-1) F(H) along a nu ladder."""
        base = self.F_of(motif).value
        rows = []
        for nu in nus:
            torus = self.F_n_of(motif, nu, method="torus-monte-carlo")
            scaled = nu ** (motif.q - 1) * base
            rows.append({"nu": nu, "torus": torus.value, "stderr": torus.stderr,
                         "scaled": scaled, "ratio": torus.value / scaled})
        return rows

    # ------------------------------------------------------------------
    # Moments of the count process

    def expected_count(self, n: float, nu: float, motif: SmallGraph, params: OnOffParams) -> float:
        """E[Gamma(t)] = F_n(G) (rho n)^q / |Aut(G)|; the same at every t."""
        return self.F_n_of(motif, nu).value * (params.rho * n) ** motif.q / automorphism_count(motif)

    def _pair_sum(self, gi: SmallGraph, gj: SmallGraph, m: int) -> float:
        key = (gi.canonical_form(), gj.canonical_form(), m)
        if key not in self._pair_sums:
            self._pair_sums[key] = sum(self.F_of(pair.union_graph()).value for pair in overlap_pairs(gi, gj, m))
        return self._pair_sums[key]

    def covariance_terms(self, n: float, nu: float, s: float, t: float, gi: SmallGraph, gj: SmallGraph,
                         params: OnOffParams) -> Dict[int, float]:
        """Contribution of each shared-vertex count m >= 1 to Cov(Gamma_i(s), Gamma_j(t))."""
        qi, qj = gi.q, gj.q
        z = float(Z(abs(t - s), params))
        terms = {}
        for m in range(1, min(qi, qj) + 1):
            weight = (n ** (qi + qj - m) * params.rho ** (qi + qj) * z ** m
                      / (factorial(m) * factorial(qi - m) * factorial(qj - m)))
            terms[m] = weight * nu ** (qi + qj - m - 1) * self._pair_sum(gi, gj, m)
        return terms

    def covariance_counts(self, n: float, nu: float, s: float, t: float, gi: SmallGraph, gj: SmallGraph,
                          params: OnOffParams) -> float:
        return float(sum(self.covariance_terms(n, nu, s, t, gi, gj, params).values()))

    # ------------------------------------------------------------------
    # Limit covariance

    def F_plus(self, gi: SmallGraph, gj: SmallGraph) -> float:
        return self._pair_sum(gi, gj, 1) / (factorial(gi.q - 1) * factorial(gj.q - 1))

    def F_minus(self, gi: SmallGraph, gj: SmallGraph) -> float:
        m = min(gi.q, gj.q)
        return self._pair_sum(gi, gj, m) / factorial(m)

    def limit_sigma(self, i: int, j: int, s: float, t: float, motifs: Sequence[SmallGraph],
                    params: OnOffParams, regime: str) -> float:
        _check_regime_name(regime)
        gi, gj = motifs[i], motifs[j]
        z = float(Z(abs(t - s), params))
        if regime == "dense":
            return z * self.F_plus(gi, gj)
        if gi.q != gj.q:
            return 0.0
        return z ** gi.q * self.F_minus(gi, gj)

    def limit_covariance_matrix(self, motifs: Sequence[SmallGraph], times: Sequence[float],
                                params: OnOffParams, regime: str) -> np.ndarray:
        """Covariance of the limit vector (motif-major, then time)."""
        k = len(times)
        size = len(motifs) * k
        sigma = np.zeros((size, size))
        for a in range(size):
            for b in range(a, size):
                value = self.limit_sigma(a // k, b // k, times[a % k], times[b % k], motifs, params, regime)
                sigma[a, b] = sigma[b, a] = value
        return sigma

    def sigma_C(self, s: float, t: float, g1: SmallGraph, g2: SmallGraph, params: OnOffParams,
                regime: str) -> float:
        """Limit covariance of the centered ratio a1 Gamma_1 / (a2 Gamma_2) by the delta method."""
        if g1.q != g2.q:
            raise GraphError(f"ratio needs equal vertex counts, got {g1.q} and {g2.q}")
        if not (contains_after_relabeling(g1, g2) or contains_after_relabeling(g2, g1)):
            raise GraphError(f"neither of {g1} and {g2} contains the other")
        _check_regime_name(regime)
        if regime == "dense":
            # perfectly correlated limit
            return 0.0
        a1, a2 = automorphism_count(g1), automorphism_count(g2)
        f1, f2 = self.F_of(g1).value, self.F_of(g2).value
        pair = [g1, g2]
        s11 = self.limit_sigma(0, 0, s, t, pair, params, regime)
        s12 = self.limit_sigma(0, 1, s, t, pair, params, regime)
        s22 = self.limit_sigma(1, 1, s, t, pair, params, regime)
        return (a1 ** 2 * s11 / f2 ** 2
                - 2.0 * a1 * a2 * f1 * s12 / f2 ** 3
                + a2 ** 2 * f1 ** 2 * s22 / f2 ** 4)

    def expected_ratio(self, n: float, nu: float, g1: SmallGraph, g2: SmallGraph, params: OnOffParams) -> float:
        """Centering of the ratio process: (a1/a2) E[Gamma_1] / E[Gamma_2]."""
        a1, a2 = automorphism_count(g1), automorphism_count(g2)
        return (a1 * self.expected_count(n, nu, g1, params)) / (a2 * self.expected_count(n, nu, g2, params))

    def ratio_covariance(self, n: float, nu: float, s: float, t: float, g1: SmallGraph, g2: SmallGraph,
                         params: OnOffParams, regime: str) -> float:
        """Delta-method Cov(C*(s), C*(t)) at finite n from the exact count covariances.

        Tends to sigma_C along a regime sequence; the gap is of order n nu (sparse).
        """
        if g1.q != g2.q:
            raise GraphError(f"ratio needs equal vertex counts, got {g1.q} and {g2.q}")
        a1, a2 = automorphism_count(g1), automorphism_count(g2)
        e1 = self.expected_count(n, nu, g1, params)
        e2 = self.expected_count(n, nu, g2, params)
        b1 = a1 / (a2 * e2)
        b2 = -a1 * e1 / (a2 * e2 ** 2)

        def cov(gi, gj):
            return self.covariance_counts(n, nu, s, t, gi, gj, params)

        value = (b1 * b1 * cov(g1, g1) + b1 * b2 * (cov(g1, g2) + cov(g2, g1)) + b2 * b2 * cov(g2, g2))
        return value * zeta(g1.q, n, nu, regime) ** 2

    # ------------------------------------------------------------------
    # Reports

    def clustering_example_report(self, params: OnOffParams = OnOffParams(1.0, 1.0)) -> Dict[str, Any]:
        """Wedge/triangle family: overlap family sizes, F+/F- tables and the ratio-limit constant.

        Index 1 is the wedge and index 2 the triangle. The ratio limit is evaluated
        under both orderings of the pair and compared with the closed form
        9 (36/tau - 90 kappa^2/tau^2 + 54 kappa^4/tau^3) per Z^3.
        """
        wedge, triangle = preset("wedge"), preset("triangle")
        kappa = self.F_of(preset("edge")).value
        tau = self.F_of(triangle).value
        family = {"11": (wedge, wedge), "12": (wedge, triangle), "22": (triangle, triangle)}

        report: Dict[str, Any] = {
            "kappa": kappa,
            "tau": tau,
            "index_convention": {"1": "wedge", "2": "triangle"},
            "family_sizes": {},
            "F_plus": {}, "F_minus": {},
            "F_plus_closed_form": {"11": 9 * kappa ** 4 / 4, "12": 3 * kappa ** 2 * tau / 4, "22": tau ** 2 / 4},
            "F_minus_closed_form": {"11": (3 * kappa ** 2 + 6 * tau) / 6, "12": 3 * tau / 6, "22": tau / 6},
        }
        for label, (gi, gj) in family.items():
            report["family_sizes"][f"G+_{label}"] = len(overlap_pairs(gi, gj, 1))
            report["family_sizes"][f"G-_{label}"] = len(overlap_pairs(gi, gj, 3))
            report["F_plus"][label] = self.F_plus(gi, gj)
            report["F_minus"][label] = self.F_minus(gi, gj)

        z3 = float(Z(0.0, params)) ** 3
        closed_form = 9 * (36 / tau - 90 * kappa ** 2 / tau ** 2 + 54 * kappa ** 4 / tau ** 3)
        per_z3 = {
            "wedge_over_triangle": self.sigma_C(0.0, 0.0, wedge, triangle, params, "sparse") / z3,
            "triangle_over_wedge": self.sigma_C(0.0, 0.0, triangle, wedge, params, "sparse") / z3,
        }
        report["sigma_C_per_Z3"] = per_z3
        report["sigma_C_closed_form_per_Z3"] = closed_form
        report["closed_form_over_computed"] = {k: (closed_form / v if v else None) for k, v in per_z3.items()}
        report["sigma_C_dense"] = {
            "wedge_over_triangle": self.sigma_C(0.0, 0.0, wedge, triangle, params, "dense"),
            "triangle_over_wedge": self.sigma_C(0.0, 0.0, triangle, wedge, params, "dense"),
        }
        for ordering, value in per_z3.items():
            self.logger.info(f"Ratio limit per Z^3 ({ordering}): {value:.10g}; closed form {closed_form:.10g}")
        return report


def theory_report(engine: TheoryEngine, motifs: Sequence[SmallGraph], params: OnOffParams,
                  ladder: Sequence[RegimeSpec], grid: Sequence[float],
                  nu_ladder: Sequence[float] = ()) -> Dict[str, Any]:
    """Every theory quantity of one experiment, each constant with its method and standard error."""
    constants = {"kappa": engine.F_of(preset("edge")).to_dict(), "tau": engine.F_of(preset("triangle")).to_dict()}
    for g in motifs:
        constants[f"F[{g.name}]"] = engine.F_of(g).to_dict()

    expected, covariances = [], []
    for idx, rung in enumerate(ladder):
        check_regime(rung, motifs)
        for i, g in enumerate(motifs):
            fn = engine.F_n_of(g, rung.nu)
            expected.append({"rung": idx, "n": rung.n, "nu": rung.nu, "regime": rung.regime, "motif": g.name,
                             "value": engine.expected_count(rung.n, rung.nu, g, params),
                             "F_n": fn.value, "F_n_method": fn.method, "F_n_stderr": fn.stderr})
            for j in range(i, len(motifs)):
                for s in grid:
                    for t in grid:
                        if t < s:
                            continue
                        covariances.append({
                            "rung": idx, "i": g.name, "j": motifs[j].name, "s": s, "t": t,
                            "value": engine.covariance_counts(rung.n, rung.nu, s, t, g, motifs[j], params),
                        })

    sigma_rows, ratio_rows = [], []
    for regime in sorted({rung.regime for rung in ladder}):
        for i in range(len(motifs)):
            for j in range(i, len(motifs)):
                for s in grid:
                    for t in grid:
                        sigma_rows.append({"regime": regime, "i": motifs[i].name, "j": motifs[j].name, "s": s,
                                           "t": t, "value": engine.limit_sigma(i, j, s, t, motifs, params, regime)})
        for g1 in motifs:
            for g2 in motifs:
                if g1 is g2 or g1.q != g2.q:
                    continue
                if not (contains_after_relabeling(g1, g2) or contains_after_relabeling(g2, g1)):
                    continue
                for s in grid:
                    for t in grid:
                        value = engine.sigma_C(s, t, g1, g2, params, regime)
                        ratio_rows.append({"regime": regime, "G1": g1.name, "G2": g2.name, "s": s, "t": t,
                                           "value": value,
                                           "value_over_Zq": value / float(Z(abs(t - s), params)) ** g1.q})

    report = {
        "constants": constants,
        "expected_counts": expected,
        "covariances": covariances,
        "limit_sigma": sigma_rows,
        "sigma_C": ratio_rows,
        "clustering_example": engine.clustering_example_report(params),
    }
    if nu_ladder:
        report["F_n_ladder"] = {g.name: engine.F_n_ladder(g, nu_ladder) for g in motifs if g.q > 1}
    return report
