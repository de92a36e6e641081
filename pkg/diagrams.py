# diagrams.py
"""Row-respecting set partitions and diagram formulae for Poisson U-statistics on finite spaces."""

import json
import logging
from functools import lru_cache
from itertools import permutations, product
from math import comb, factorial
from pathlib import Path
from string import ascii_letters
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from sympy.utilities.iterables import multiset_partitions

from config import Config
from errors import ConfigError, DimensionMismatchError, PartitionSizeError
from models import FiniteSpaceModel, Partition, RowStructure

logger = logging.getLogger(__name__)

CLASSES = ("Pi", "PiTilde", "PiTilde_ge2", "Pi_ge2", "PiBar")


def classify(blocks: Sequence[Sequence[int]], rs: RowStructure) -> Partition:
    """Flags of one set partition of [N] relative to the rows of rs.

    sigma* merges rows linked by a common block; its size is the number of
    connected components of that row graph.
    """
    blocks = tuple(sorted(tuple(sorted(b)) for b in blocks))
    rows_of = [[rs.row_of(x) for x in block] for block in blocks]
    in_pi = all(len(set(rows)) == len(rows) for rows in rows_of)

    row_graph = nx.Graph()
    row_graph.add_nodes_from(range(len(rs.q)))
    for rows in rows_of:
        row_graph.add_edges_from(zip(rows, rows[1:]))
    touched = {row for block, rows in zip(blocks, rows_of) if len(block) >= 2 for row in rows}

    return Partition(
        blocks=blocks,
        in_pi=in_pi,
        sigma_star_size=nx.number_connected_components(row_graph),
        all_blocks_ge2=all(len(b) >= 2 for b in blocks),
        every_row_touches_ge2_block=touched == set(range(len(rs.q))),
    )


def _member(p: Partition, cls: str) -> bool:
    if not p.in_pi:
        return False
    if cls == "Pi":
        return True
    if cls == "PiTilde":
        return p.sigma_star_size == 1
    if cls == "PiTilde_ge2":
        return p.sigma_star_size == 1 and p.all_blocks_ge2
    if cls == "Pi_ge2":
        return p.all_blocks_ge2
    if cls == "PiBar":
        return p.every_row_touches_ge2_block
    raise ValueError(f"unknown partition class {cls!r}; known: {', '.join(CLASSES)}")


@lru_cache(maxsize=64)
def _classified(rs: RowStructure) -> Tuple[Partition, ...]:
    elements = list(range(1, rs.N + 1))
    found = tuple(classify(blocks, rs) for blocks in multiset_partitions(elements))
    logger.debug(f"Enumerated {len(found)} set partitions of [{rs.N}] for rows {rs.q}")
    return found


def enumerate_partitions(rs: RowStructure, cls: str) -> List[Partition]:
    """All partitions of [N] in the requested class, filtered from every set partition of [N]."""
    if rs.N > Config.MAX_PARTITION_ELEMENTS:
        raise PartitionSizeError(f"N = {rs.N} exceeds the enumeration guard {Config.MAX_PARTITION_ELEMENTS}")
    if rs.N == 0:
        return []
    return [p for p in _classified(rs) if _member(p, cls)]


def set_partition_count(rs: RowStructure) -> int:
    """Number of set partitions of [N] seen by the enumerator, whatever their class."""
    if rs.N > Config.MAX_PARTITION_ELEMENTS:
        raise PartitionSizeError(f"N = {rs.N} exceeds the enumeration guard {Config.MAX_PARTITION_ELEMENTS}")
    return len(_classified(rs)) if rs.N else 0


def rows_from_kernels(kernels: Sequence[np.ndarray]) -> RowStructure:
    return RowStructure(tuple(int(np.ndim(f)) for f in kernels))


def tensor_collapse(kernels: Sequence[np.ndarray], sigma: Partition, model: FiniteSpaceModel) -> float:
    """Integral of the sigma-collapsed tensor product of the kernels against the atomic measure."""
    rs = rows_from_kernels(kernels)
    covered = sorted(x for block in sigma.blocks for x in block)
    if covered != list(range(1, rs.N + 1)):
        raise DimensionMismatchError(f"partition covers {covered}, kernels have total arity {rs.N}")
    if not sigma.in_pi:
        raise ValueError("partition puts two arguments of one kernel in the same block")
    for f in kernels:
        if any(size != model.k for size in np.shape(f)):
            raise DimensionMismatchError(f"kernel of shape {np.shape(f)} on a {model.k}-atom space")
    if len(sigma.blocks) > len(ascii_letters):
        raise PartitionSizeError("too many blocks for one contraction")

    letter = {}
    for idx, block in enumerate(sigma.blocks):
        for x in block:
            letter[x] = ascii_letters[idx]
    subscripts = ["".join(letter[x] for x in row) for row in rs.rows]
    subscripts += [ascii_letters[idx] for idx in range(len(sigma.blocks))]
    operands = [np.asarray(f, dtype=float) for f in kernels]
    operands += [np.asarray(model.intensities, dtype=float)] * len(sigma.blocks)
    return float(np.einsum(",".join(subscripts) + "->", *operands, optimize=True))


def _diagram_sum(model: FiniteSpaceModel, kernels: Sequence[np.ndarray], cls: str) -> float:
    return sum(tensor_collapse(kernels, p, model) for p in enumerate_partitions(rows_from_kernels(kernels), cls))


def mixed_central_moment(model: FiniteSpaceModel, kernels: Sequence[np.ndarray]) -> float:
    """E[prod (S_l - E S_l)] as a sum over partitions in which every row meets a block of size >= 2."""
    return _diagram_sum(model, kernels, "PiBar")


def joint_cumulant(model: FiniteSpaceModel, kernels: Sequence[np.ndarray]) -> float:
    """cum(S_1, ..., S_m) as a sum over row-connected partitions."""
    return _diagram_sum(model, kernels, "PiTilde")


def overlap_grouping(model: FiniteSpaceModel, kernels: Sequence[np.ndarray]) -> Dict[int, float]:
    """Central-moment diagrams grouped by their number of non-singleton blocks."""
    groups: Dict[int, float] = {}
    for p in enumerate_partitions(rows_from_kernels(kernels), "PiBar"):
        shared = sum(1 for block in p.blocks if len(block) >= 2)
        groups[shared] = groups.get(shared, 0.0) + tensor_collapse(kernels, p, model)
    return dict(sorted(groups.items()))


def linear_combination_cumulant(model: FiniteSpaceModel, kernels: Sequence[np.ndarray],
                                coefficients: Sequence[float], order: int) -> float:
    """cum_M(sum_l b_l S_l) expanded by multilinearity into joint cumulants."""
    if len(coefficients) != len(kernels):
        raise DimensionMismatchError(f"{len(coefficients)} coefficients for {len(kernels)} kernels")
    cache: Dict[Tuple[int, ...], float] = {}
    total = 0.0
    for indices in product(range(len(kernels)), repeat=order):
        weight = float(np.prod([coefficients[i] for i in indices]))
        if weight == 0.0:
            continue
        key = tuple(sorted(indices))
        if key not in cache:
            cache[key] = joint_cumulant(model, [kernels[i] for i in key])
        total += weight * cache[key]
    return total


# ----------------------------------------------------------------------
# Factorial-moment oracle


def _falling_product(orders: Tuple[int, ...]) -> Dict[int, int]:
    """Expand prod_l (N)_{a_l} in the falling-factorial basis {(N)_j}."""
    poly = {0: 1}
    for a in orders:
        if a == 0:
            continue
        nxt: Dict[int, int] = {}
        for b, coef in poly.items():
            for k in range(min(a, b) + 1):
                j = a + b - k
                nxt[j] = nxt.get(j, 0) + coef * comb(a, k) * comb(b, k) * factorial(k)
        poly = nxt
    return poly


@lru_cache(maxsize=4096)
def _factorial_expectation(orders: Tuple[int, ...], lam: float) -> float:
    """E[prod_l (N)_{a_l}] for N ~ Poisson(lam), using E[(N)_j] = lam^j."""
    return float(sum(coef * lam ** j for j, coef in _falling_product(orders).items()))


def _check_oracle_size(model: FiniteSpaceModel, kernels: Sequence[np.ndarray]) -> None:
    N = sum(int(np.ndim(f)) for f in kernels)
    if model.k > Config.MAX_ORACLE_ATOMS or N > Config.MAX_ORACLE_ELEMENTS:
        raise PartitionSizeError(f"oracle limited to {Config.MAX_ORACLE_ATOMS} atoms and "
                                 f"{Config.MAX_ORACLE_ELEMENTS} kernel arguments, got k={model.k}, N={N}")


def _raw_moment(model: FiniteSpaceModel, kernels: Sequence[np.ndarray]) -> float:
    """E[prod S_l] by summing over atom assignments of every kernel slot; no partitions involved."""
    if not kernels:
        return 1.0
    tables = [np.asarray(f, dtype=float) for f in kernels]
    slices, start = [], 0
    for f in tables:
        slices.append(slice(start, start + f.ndim))
        start += f.ndim
    lam = [float(x) for x in model.intensities]
    total = 0.0
    for assignment in product(range(model.k), repeat=start):
        value = 1.0
        for f, part in zip(tables, slices):
            value *= f[assignment[part]]
        if value == 0.0:
            continue
        weight = 1.0
        for atom in range(model.k):
            # Slots of each kernel sitting on this atom
            orders = tuple(sorted(assignment[part].count(atom) for part in slices))
            weight *= _factorial_expectation(orders, lam[atom])
        total += value * weight
    return float(total)


def oracle_moments(model: FiniteSpaceModel, kernels: Sequence[np.ndarray], order: str = "raw") -> float:
    """Exact raw, central or cumulant mixed moment of the U-statistics via Poisson factorial moments."""
    _check_oracle_size(model, kernels)
    m = len(kernels)
    moments: Dict[Tuple[int, ...], float] = {}

    def raw(subset: Tuple[int, ...]) -> float:
        if subset not in moments:
            moments[subset] = _raw_moment(model, [kernels[i] for i in subset])
        return moments[subset]

    if order == "raw":
        return raw(tuple(range(m)))
    if order == "central":
        total = 0.0
        for mask in product((0, 1), repeat=m):
            inside = tuple(i for i in range(m) if mask[i])
            outside = [i for i in range(m) if not mask[i]]
            total += (-1) ** len(outside) * raw(inside) * float(np.prod([raw((i,)) for i in outside]))
        return total
    if order == "cumulant":
        total = 0.0
        for blocks in multiset_partitions(list(range(m))):
            r = len(blocks)
            total += (-1) ** (r - 1) * factorial(r - 1) * float(np.prod([raw(tuple(b)) for b in blocks]))
        return total
    raise ValueError(f"unknown moment order {order!r}; use raw, central or cumulant")


# ----------------------------------------------------------------------
# Models


def symmetrize(kernel: np.ndarray) -> np.ndarray:
    kernel = np.asarray(kernel, dtype=float)
    axes = list(permutations(range(kernel.ndim)))
    return sum(np.transpose(kernel, perm) for perm in axes) / len(axes)


def is_symmetric(kernel: np.ndarray, tol: float = 1e-12) -> bool:
    kernel = np.asarray(kernel, dtype=float)
    return all(np.allclose(kernel, np.transpose(kernel, perm), atol=tol, rtol=0)
               for perm in permutations(range(kernel.ndim)))


def random_finite_model(k: int, arities: Sequence[int], rng: np.random.Generator) -> FiniteSpaceModel:
    """Atoms with intensities in [0.2, 2] and symmetric kernels with entries in [-1, 1]."""
    intensities = rng.uniform(0.2, 2.0, size=k)
    kernels = [symmetrize(rng.uniform(-1.0, 1.0, size=(k,) * q)) for q in arities]
    return FiniteSpaceModel(intensities, [f"x{i + 1}" for i in range(k)], kernels)


def load_model(path: Path) -> FiniteSpaceModel:
    """Model JSON: {"atoms": [...], "intensities": [...], "kernels": [nested lists, one per row]}."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"model file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e.msg}", line=e.lineno, column=e.colno)

    intensities = np.asarray(data.get("intensities", []), dtype=float)
    if intensities.ndim != 1 or len(intensities) == 0 or np.any(intensities <= 0):
        raise ConfigError("expected a non-empty list of positive numbers", field="intensities")
    atoms = data.get("atoms") or [f"x{i + 1}" for i in range(len(intensities))]
    if len(atoms) != len(intensities):
        raise ConfigError("one name per intensity", field="atoms")

    kernels = []
    for idx, raw in enumerate(data.get("kernels", [])):
        kernel = np.asarray(raw, dtype=float)
        if any(size != len(intensities) for size in kernel.shape):
            raise ConfigError(f"shape {kernel.shape} does not match {len(intensities)} atoms", field=f"kernels[{idx}]")
        if not is_symmetric(kernel):
            raise ConfigError("kernel is not symmetric under argument permutation", field=f"kernels[{idx}]")
        kernels.append(kernel)
    if not kernels:
        raise ConfigError("expected at least one kernel", field="kernels")
    return FiniteSpaceModel(intensities, list(atoms), kernels)


def diagram_summary(model: FiniteSpaceModel, kernels: Optional[Sequence[np.ndarray]] = None) -> Dict[str, float]:
    """Diagram values next to the oracle and their relative deltas."""
    kernels = list(model.kernels if kernels is None else kernels)
    moment = mixed_central_moment(model, kernels)
    cumulant = joint_cumulant(model, kernels)
    summary = {"rows": list(rows_from_kernels(kernels).q), "central_moment": moment, "cumulant": cumulant}
    try:
        oracle_moment = oracle_moments(model, kernels, "central")
        oracle_cumulant = oracle_moments(model, kernels, "cumulant")
    except PartitionSizeError as e:
        logger.warning(f"Oracle skipped: {e}")
        return summary
    summary.update({
        "oracle_central_moment": oracle_moment,
        "oracle_cumulant": oracle_cumulant,
        "central_moment_delta": relative_delta(moment, oracle_moment),
        "cumulant_delta": relative_delta(cumulant, oracle_cumulant),
    })
    return summary


def relative_delta(value: float, reference: float, floor: float = 1.0) -> float:
    """|value - reference| relative to |reference|, measured absolutely below `floor`."""
    return abs(value - reference) / max(abs(reference), floor)
