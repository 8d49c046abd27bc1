"""Pluggable text-to-vector providers.

Stands in for a frozen pretrained sentence encoder so the artifact runs
without any model downloads: a file-backed lookup table for curated vectors
and a seeded hash embedder for fully deterministic tests.
"""

from __future__ import annotations

import hashlib
import math
from pathlib import Path

import numpy as np

from .scenegraph import normalize_label


class EmbeddingError(ValueError):
    pass


class OutOfVocabularyError(EmbeddingError):
    def __init__(self, label: str):
        super().__init__(f"label {label!r} not in embedding table")
        self.label = label


class HashProvider:
    """Deterministic pseudo-random unit vector per normalized label.

    The vector is drawn from a generator seeded by a keyed blake2b digest of
    the label, so the same (seed, label) pair yields the same embedding in
    any process.
    """

    def __init__(self, seed: int = 0, dim: int = 16):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.seed = int(seed)
        self._dim = int(dim)

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def fingerprint(self) -> str:
        return f"hash:{self.seed}:{self._dim}"

    def embed(self, text: str) -> np.ndarray:
        label = normalize_label(text)
        if not label:
            raise EmbeddingError("cannot embed an empty label")
        digest = hashlib.blake2b(f"{self.seed}\x1f{label}".encode(), digest_size=16).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "little"))
        vec = rng.standard_normal(self._dim)
        return vec / np.linalg.norm(vec)


class TableProvider:
    """Exact lookup of label vectors loaded from an EMB1 file.

    ``oov`` picks the out-of-vocabulary policy: "error" (default) raises,
    "nearest" substitutes the vocabulary entry with the smallest edit
    distance (ties to the lexicographically first label).
    """

    def __init__(self, vectors: dict[str, np.ndarray], oov: str = "error", source: str = "<memory>"):
        if oov not in ("error", "nearest"):
            raise ValueError(f"unknown oov policy {oov!r}")
        if not vectors:
            raise EmbeddingError("embedding table is empty")
        dims = {v.shape for v in vectors.values()}
        if len(dims) != 1:
            raise EmbeddingError(f"inconsistent vector shapes in table: {sorted(dims)}")
        self._vectors = {normalize_label(k): np.asarray(v, dtype=float) for k, v in vectors.items()}
        self._dim = next(iter(self._vectors.values())).shape[0]
        self.oov = oov
        self.source = source

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def fingerprint(self) -> str:
        return f"table:{Path(self.source).name}:{self._dim}"

    def embed(self, text: str) -> np.ndarray:
        label = normalize_label(text)
        if not label:
            raise EmbeddingError("cannot embed an empty label")
        vec = self._vectors.get(label)
        if vec is not None:
            return vec
        if self.oov == "error":
            raise OutOfVocabularyError(label)
        best = min(self._vectors, key=lambda known: (edit_distance(label, known), known))
        return self._vectors[best]

    def labels(self) -> list[str]:
        return sorted(self._vectors)

    # -- file format: "EMB1 dim <d> n <count>" then "<label>\t<floats>" ----

    def save(self, path: str | Path) -> None:
        lines = [f"EMB1 dim {self._dim} n {len(self._vectors)}"]
        for label in sorted(self._vectors):
            floats = " ".join(repr(float(v)) for v in self._vectors[label])
            lines.append(f"{label}\t{floats}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: str | Path, oov: str = "error") -> "TableProvider":
        lines = Path(path).read_text().splitlines()
        if not lines:
            raise EmbeddingError(f"{path}: empty embedding file")
        header = lines[0].split()
        if len(header) != 5 or header[0] != "EMB1" or header[1] != "dim" or header[3] != "n":
            raise EmbeddingError(f"{path}: malformed header {lines[0]!r}")
        dim, count = int(header[2]), int(header[4])
        body = [line for line in lines[1:] if line]
        if len(body) != count:
            raise EmbeddingError(f"{path}: header promises {count} entries, found {len(body)}")
        vectors = {}
        for i, line in enumerate(body):
            label, _, payload = line.partition("\t")
            values = payload.split()
            if len(values) != dim:
                raise EmbeddingError(f"{path}: entry {i} has {len(values)} floats, expected {dim}")
            vectors[label] = np.array([float(v) for v in values])
        return cls(vectors, oov=oov, source=str(path))


def concat(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Dimension-wise concatenation of two equal-length embeddings."""
    if a.shape != b.shape:
        raise EmbeddingError(f"cannot concatenate embeddings of dims {a.shape[0]} and {b.shape[0]}")
    return np.concatenate([a, b])


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity, clamped to [-1, 1] against rounding.

    The norms come from the same dot-product summation as the numerator, so
    the self-similarity case lands on exactly 1.0.
    """
    aa = float(np.dot(a, a))
    bb = float(np.dot(b, b))
    if aa == 0.0 or bb == 0.0:
        raise EmbeddingError("cosine of a zero vector is undefined")
    value = float(np.dot(a, b)) / math.sqrt(aa * bb)
    return max(-1.0, min(1.0, value))


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance; used by the table provider's nearest fallback."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (ca != cb)))
        previous = current
    return previous[-1]


def provider_from_spec(spec: str):
    """Build a provider from a CLI spec: a table file path or ``hash:<seed>:<dim>``."""
    if spec.startswith("hash:"):
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"bad hash provider spec {spec!r}, expected hash:<seed>:<dim>")
        return HashProvider(seed=int(parts[1]), dim=int(parts[2]))
    return TableProvider.load(spec)


def unit(vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0 or not math.isfinite(norm):
        raise EmbeddingError("cannot normalize a zero or non-finite vector")
    return vec / norm
