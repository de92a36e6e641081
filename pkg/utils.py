# utils.py
"""Utility functions: reproducible random streams, hashing and CSV output."""

import csv
import hashlib
import json
from pathlib import Path
from typing import Iterable, List, Sequence

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """PCG64 stream for (master seed, key path); distinct key paths give independent streams."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys)))


def derive_seed(seed: int, *keys: int) -> int:
    """64-bit child seed for (master seed, key path)."""
    state = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys)).generate_state(1, np.uint64)
    return int(state[0])


def _splitmix64(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = x + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def pair_uniforms(seed: int, i, j) -> np.ndarray:
    """Counter-based uniforms in [0, 1) keyed by (seed, min(i,j), max(i,j)).

    SplitMix64 finalizer chained over the key; the value of a pair never depends
    on the order in which pairs are visited.
    """
    i = np.atleast_1d(np.asarray(i, dtype=np.uint64))
    j = np.atleast_1d(np.asarray(j, dtype=np.uint64))
    lo, hi = np.minimum(i, j), np.maximum(i, j)
    h = _splitmix64(np.full(lo.shape, np.uint64(int(seed) % 2 ** 64)))
    h = _splitmix64(h ^ lo)
    h = _splitmix64(h ^ hi)
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / 2 ** 53)


def file_sha256(filepath: Path) -> str:
    """SHA-256 of a file's bytes."""
    digest = hashlib.sha256()
    with open(filepath, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def verify_manifest(manifest_path: Path) -> List[str]:
    """Re-hash every output listed in a manifest; returns the paths that do not match."""
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    mismatched = []
    for entry in manifest["outputs"]:
        target = manifest_path.parent / entry["path"]
        if not target.exists() or file_sha256(target) != entry["sha256"]:
            mismatched.append(entry["path"])
    return mismatched


def format_rung_label(index: int, n: float, nu: float) -> str:
    """Folder label for one ladder rung, e.g. '001_n500_nu0.02'."""
    return f"{index:03d}_n{n:g}_nu{nu:g}"


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Write rows with floats in repr form so reruns are byte-identical."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def write_json(path: Path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default), encoding="utf-8")
    return path


def _json_default(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serializable: {type(value)}")
