# models.py
"""Data models shared across the simulation, theory and verification modules."""

from dataclasses import dataclass, field
from typing import List, Dict, Optional, Tuple, Any

import numpy as np


@dataclass(frozen=True)
class OnOffParams:
    """Rates of the two-state status chain: mu for 0 -> 1, lam for 1 -> 0."""
    mu: float
    lam: float

    def __post_init__(self):
        if not (self.mu > 0 and self.lam > 0):
            raise ValueError(f"rates must be positive, got mu={self.mu}, lambda={self.lam}")

    @property
    def rho(self) -> float:
        return self.mu / (self.mu + self.lam)


@dataclass
class Trajectory:
    """On/off path of one point on [0, horizon]."""
    initial_state: int
    toggle_times: np.ndarray
    horizon: float

    def state_at(self, t):
        """State at time t; the new state already holds at a toggle instant."""
        flips = np.searchsorted(self.toggle_times, t, side="right")
        return (self.initial_state + flips) % 2


@dataclass
class EventTimeline:
    """All toggles of all points, sorted by (time, point id)."""
    times: np.ndarray
    point_ids: np.ndarray
    new_states: np.ndarray

    def __len__(self) -> int:
        return len(self.times)

    def __iter__(self):
        return zip(self.times.tolist(), self.point_ids.tolist(), self.new_states.tolist())


@dataclass
class CountProcess:
    """Piecewise-constant subgraph-count paths, one per motif."""
    motif_names: List[str]
    initial: np.ndarray
    step_times: List[np.ndarray]
    step_values: List[np.ndarray]
    horizon: float

    def value_at(self, motif: int, t: float):
        idx = np.searchsorted(self.step_times[motif], t, side="right")
        values = np.concatenate(([self.initial[motif]], self.step_values[motif]))
        return values[idx]

    def sample_grid(self, times) -> np.ndarray:
        """Values on a time grid, shape (motifs, len(times))."""
        return np.array([self.value_at(i, np.asarray(times)) for i in range(len(self.motif_names))])

    def select(self, motif: int) -> "CountProcess":
        return CountProcess([self.motif_names[motif]], self.initial[motif:motif + 1],
                            [self.step_times[motif]], [self.step_values[motif]], self.horizon)


@dataclass
class NormalizationRecord:
    regime: str
    psi: List[float]
    means: List[float]


@dataclass
class NormalizedProcess:
    """Centered and scaled count paths; raw = psi * value + mean at every step."""
    motif_names: List[str]
    initial: np.ndarray
    step_times: List[np.ndarray]
    step_values: List[np.ndarray]
    horizon: float
    record: Optional[NormalizationRecord] = None
    degenerate: bool = False

    def value_at(self, motif: int, t: float):
        idx = np.searchsorted(self.step_times[motif], t, side="right")
        values = np.concatenate(([self.initial[motif]], self.step_values[motif]))
        return values[idx]

    def sample_grid(self, times) -> np.ndarray:
        return np.array([self.value_at(i, np.asarray(times)) for i in range(len(self.motif_names))])


@dataclass
class RegimeSpec:
    """One (n, nu) rung of a sequence; the regime is always explicit."""
    n: float
    nu: float
    regime: str
    gamma: Optional[float] = None
    c: float = 1.0

    def __post_init__(self):
        if self.regime not in ("dense", "sparse"):
            raise ValueError(f"regime must be 'dense' or 'sparse', got {self.regime!r}")


@dataclass
class MotifIntegral:
    """Value of the translation-reduced profile integral over a union graph."""
    edges: Tuple[Tuple[int, int], ...]
    value: float
    stderr: float = 0.0
    method: str = "closed-form"

    def to_dict(self) -> Dict[str, Any]:
        return {"value": self.value, "stderr": self.stderr, "method": self.method}


@dataclass(frozen=True)
class RowStructure:
    """Row lengths q_1..q_m; row l holds the elements N_{l-1}+1..N_l."""
    q: Tuple[int, ...]

    @property
    def N(self) -> int:
        return sum(self.q)

    @property
    def rows(self) -> List[range]:
        rows, start = [], 1
        for q in self.q:
            rows.append(range(start, start + q))
            start += q
        return rows

    def row_of(self, element: int) -> int:
        for idx, row in enumerate(self.rows):
            if element in row:
                return idx
        raise ValueError(f"element {element} outside [1, {self.N}]")


@dataclass(frozen=True)
class Partition:
    blocks: Tuple[Tuple[int, ...], ...]
    in_pi: bool
    sigma_star_size: int
    all_blocks_ge2: bool
    every_row_touches_ge2_block: bool

    def __len__(self) -> int:
        return len(self.blocks)


@dataclass
class FiniteSpaceModel:
    """Purely atomic intensity measure: atom i carries mass intensities[i]."""
    intensities: np.ndarray
    atoms: List[str] = field(default_factory=list)
    kernels: List[np.ndarray] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.intensities)


@dataclass
class ExperimentConfig:
    """Validated contents of a JSON experiment file."""
    d: int
    mu: float
    lam: float
    horizon: float
    profile: Dict[str, Any]
    motifs: List[Any]
    ladder: List[RegimeSpec]
    grid: List[float]
    replications: int
    seed: int
    tolerances: Dict[str, float] = field(default_factory=dict)
    verify: Dict[str, Any] = field(default_factory=dict)
    threads: int = 1
    ratio: Optional[Dict[str, str]] = None

    @property
    def params(self) -> OnOffParams:
        return OnOffParams(self.mu, self.lam)


@dataclass
class SampleTensor:
    """Counts of R replications on a time grid, shape (R, motifs, times)."""
    raw: np.ndarray
    normalized: np.ndarray
    grid: np.ndarray
    motif_names: List[str]
    rung: RegimeSpec
    seeds: List[int] = field(default_factory=list)
    ratio: Optional[np.ndarray] = None
    ratio_name: Optional[str] = None
    degenerate_paths: int = 0

    def summary(self) -> Dict[str, Any]:
        """Per-rung record written next to the count CSV."""
        record = {
            "n": self.rung.n, "nu": self.rung.nu, "regime": self.rung.regime,
            "replications": int(self.raw.shape[0]), "seeds": list(self.seeds), "grid": self.grid,
            "mean_raw": {name: self.raw[:, k, :].mean(axis=0) for k, name in enumerate(self.motif_names)},
            "ratio": self.ratio_name,
            "degenerate_paths": self.degenerate_paths,
        }
        if self.ratio is not None:
            kept = self.kept_ratio()
            record["ratio_variance"] = kept.var(axis=0, ddof=1) if len(kept) > 1 else None
        return record

    def kept_ratio(self) -> np.ndarray:
        """Ratio samples of the non-degenerate replications, shape (kept, times)."""
        if self.ratio is None:
            return np.empty((0, len(self.grid)))
        return self.ratio[~np.isnan(self.ratio).any(axis=1)]


@dataclass
class ComparisonRow:
    name: str
    theory: float
    estimate: float
    stderr: float
    z: float
    criterion: str
    threshold: float
    passed: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name, "theory": self.theory, "estimate": self.estimate,
            "stderr": self.stderr, "z": self.z, "criterion": self.criterion,
            "threshold": self.threshold, "passed": self.passed,
        }


@dataclass
class ComparisonReport:
    name: str
    rows: List[ComparisonRow] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)

    def failing_rows(self) -> List[ComparisonRow]:
        return [row for row in self.rows if not row.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "passed": self.passed, "rows": [r.to_dict() for r in self.rows]}

    def to_table(self) -> str:
        header = f"{'check':<48} {'theory':>14} {'estimate':>14} {'stderr':>12} {'z':>8}  rule         ok"
        lines = [f"== {self.name} ==", header, "-" * len(header)]
        for r in self.rows:
            rule = f"{r.criterion}<={r.threshold:g}"
            lines.append(
                f"{r.name:<48} {r.theory:>14.6g} {r.estimate:>14.6g} {r.stderr:>12.4g} "
                f"{r.z:>8.3g}  {rule:<12} {'PASS' if r.passed else 'FAIL'}"
            )
        return "\n".join(lines)


@dataclass
class RunManifest:
    version: str
    seed: int
    config_text: str
    started: str
    finished: str = ""
    outputs: List[Dict[str, str]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "version": self.version, "seed": self.seed, "config": self.config_text,
            "started": self.started, "finished": self.finished, "outputs": self.outputs,
        }
