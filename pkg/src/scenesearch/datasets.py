"""Offline construction of relational training data from recorded oracle responses.

Responses follow a household -> rooms -> categories -> objects hierarchy and
carry, per query, co-occurrence annotations (binary) and room containment
scores (continuous). A seeded synthetic oracle stands in for recorded
responses in tests and demos; its planted tables double as ground truth for
scorer evaluation.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .embeddings import concat
from .scenegraph import normalize_label

logger = logging.getLogger(__name__)


class DatasetError(ValueError):
    pass


@dataclass
class RelationalRow:
    text_a: str  # object or room label
    text_b: str  # query label
    label: float
    split: str  # "train" | "val"


@dataclass
class RelationalDataset:
    relation: str  # "cooccur" | "contain"
    rows: list[RelationalRow] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def split(self, tag: str) -> list[RelationalRow]:
        return [r for r in self.rows if r.split == tag]

    def vectorize(self, provider, tag: str | None = None):
        """Concatenated-embedding design matrix and target vector."""
        rows = self.rows if tag is None else self.split(tag)
        if not rows:
            dim = 2 * provider.dim
            return np.zeros((0, dim)), np.zeros(0)
        x = np.stack([concat(provider.embed(r.text_a), provider.embed(r.text_b)) for r in rows])
        y = np.array([r.label for r in rows])
        return x, y

    def save_tsv(self, path: str | Path) -> None:
        lines = [f"{r.text_a}\t{r.text_b}\t{r.label!r}\t{r.split}" for r in self.rows]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load_tsv(cls, path: str | Path, relation: str) -> "RelationalDataset":
        rows = []
        for i, line in enumerate(Path(path).read_text().splitlines()):
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise DatasetError(f"{path}:{i + 1}: expected 4 tab-separated fields")
            rows.append(RelationalRow(parts[0], parts[1], float(parts[2]), parts[3]))
        return cls(relation=relation, rows=rows)


@dataclass
class OracleResponseSet:
    """Recorded responses from the relational knowledge oracle."""

    rooms: list[str] = field(default_factory=list)
    categories: dict[str, list[str]] = field(default_factory=dict)
    objects: dict[tuple[str, str], list[str]] = field(default_factory=dict)
    cooccur: dict[str, list[tuple[str, int]]] = field(default_factory=dict)
    contain: dict[str, list[tuple[str, float]]] = field(default_factory=dict)

    def normalized(self) -> "OracleResponseSet":
        return OracleResponseSet(
            rooms=[normalize_label(r) for r in self.rooms],
            categories={normalize_label(r): [normalize_label(c) for c in cats]
                        for r, cats in self.categories.items()},
            objects={(normalize_label(r), normalize_label(c)): [normalize_label(o) for o in objs]
                     for (r, c), objs in self.objects.items()},
            cooccur={normalize_label(q): [(normalize_label(o), int(v)) for o, v in pairs]
                     for q, pairs in self.cooccur.items()},
            contain={normalize_label(q): [(normalize_label(r), float(v)) for r, v in pairs]
                     for q, pairs in self.contain.items()},
        )

    def save(self, path: str | Path) -> None:
        obj = {
            "rooms": self.rooms,
            "categories": self.categories,
            "objects": [
                {"room": r, "category": c, "objects": objs}
                for (r, c), objs in sorted(self.objects.items())
            ],
            "cooccur": {q: [[o, v] for o, v in pairs] for q, pairs in sorted(self.cooccur.items())},
            "contain": {q: [[r, v] for r, v in pairs] for q, pairs in sorted(self.contain.items())},
        }
        Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "OracleResponseSet":
        obj = json.loads(Path(path).read_text())
        return cls(
            rooms=list(obj["rooms"]),
            categories={r: list(cats) for r, cats in obj["categories"].items()},
            objects={(e["room"], e["category"]): list(e["objects"]) for e in obj["objects"]},
            cooccur={q: [(o, int(v)) for o, v in pairs] for q, pairs in obj["cooccur"].items()},
            contain={q: [(r, float(v)) for r, v in pairs] for q, pairs in obj["contain"].items()},
        )


def build_household_set(responses: OracleResponseSet) -> set[str]:
    """Union of all (room, category) object lists, normalized and deduplicated."""
    responses = responses.normalized()
    household: set[str] = set()
    for objects in responses.objects.values():
        household.update(o for o in objects if o)
    return household


def _dedupe(rows: list[tuple[str, str, float]], relation: str) -> list[tuple[str, str, float]]:
    seen: dict[tuple[str, str], float] = {}
    for a, b, label in rows:
        if (a, b) in seen and seen[(a, b)] != label:
            raise DatasetError(
                f"conflicting {relation} labels for pair ({a!r}, {b!r}): "
                f"{seen[(a, b)]} vs {label}")
        seen[(a, b)] = label
    return [(a, b, label) for (a, b), label in seen.items()]


def _assign_splits(rows: list[tuple[str, str, float]], relation: str, seed: int) -> RelationalDataset:
    # Canonical order first so the split depends only on content and seed.
    rows = sorted(rows)
    n_val = len(rows) // 10
    val_idx = set(np.random.default_rng(seed).permutation(len(rows))[:n_val].tolist())
    dataset = RelationalDataset(relation=relation)
    for i, (a, b, label) in enumerate(rows):
        dataset.rows.append(RelationalRow(a, b, label, "val" if i in val_idx else "train"))
    return dataset


def _check_membership(rows, household: set[str], relation: str,
                      check_first: bool) -> None:
    # Containment rows pair a room with a query, so only the query side is a
    # household object; co-occurrence rows are object/object pairs.
    strays = set()
    for a, b, _ in rows:
        if check_first and a not in household:
            strays.add(a)
        if b not in household:
            strays.add(b)
    if strays:
        logger.warning("%s rows mention %d labels outside the household set: %s",
                       relation, len(strays), ", ".join(sorted(strays)[:8]))


def build_cooccur_dataset(responses: OracleResponseSet, household: set[str],
                          seed: int = 0) -> RelationalDataset:
    """Binary object/query co-occurrence rows with a seeded 90/10 split."""
    responses = responses.normalized()
    rows = []
    for query, pairs in responses.cooccur.items():
        for obj, label in pairs:
            if label not in (0, 1):
                raise DatasetError(f"co-occurrence label must be 0 or 1, got {label} for ({obj}, {query})")
            rows.append((obj, query, float(label)))
    rows = _dedupe(rows, "cooccur")
    _check_membership(rows, household, "cooccur", check_first=True)
    return _assign_splits(rows, "cooccur", seed)


def build_contain_dataset(responses: OracleResponseSet, household: set[str],
                          seed: int = 0) -> RelationalDataset:
    """Continuous room/query containment rows with a seeded 90/10 split."""
    responses = responses.normalized()
    rows = []
    for query, pairs in responses.contain.items():
        for room, score in pairs:
            if not 0.0 <= score <= 1.0:
                raise DatasetError(f"containment score must lie in [0, 1], got {score} for ({room}, {query})")
            rows.append((room, query, float(score)))
    rows = _dedupe(rows, "contain")
    _check_membership(rows, household, "contain", check_first=False)
    return _assign_splits(rows, "contain", seed)


@dataclass
class SynthOracle:
    """Synthetic world with its planted relational ground truth exposed."""

    responses: OracleResponseSet
    home_room: dict[str, str]
    contain_table: dict[tuple[str, str], float]  # (room, query) -> score
    cooccur_table: dict[tuple[str, str], int]  # (object, query) -> 0/1


def synth_oracle(seed: int, n_rooms: int, n_objects: int) -> SynthOracle:
    """Deterministic response set over a planted world.

    Every object gets a home room; containment scores peak at the home room
    and objects co-occur exactly when they share one. Room and object names
    are synthetic labels, so hash embeddings carry no relational signal.
    """
    if n_rooms < 1 or n_objects < 1:
        raise ValueError("need at least one room and one object")
    rng = np.random.default_rng(seed)
    rooms = [f"room {i}" for i in range(n_rooms)]
    categories = {r: [f"category {i} {j}" for j in range(2)] for i, r in enumerate(rooms)}
    objects = [f"object {k}" for k in range(n_objects)]
    home = {o: rooms[int(rng.integers(n_rooms))] for o in objects}

    by_slot: dict[tuple[str, str], list[str]] = {}
    for obj in objects:
        room = home[obj]
        category = categories[room][int(rng.integers(2))]
        by_slot.setdefault((room, category), []).append(obj)

    contain_table = {}
    for obj in objects:
        for room in rooms:
            if room == home[obj]:
                contain_table[(room, obj)] = round(float(rng.uniform(0.75, 0.95)), 4)
            else:
                contain_table[(room, obj)] = round(float(rng.uniform(0.05, 0.35)), 4)
    cooccur_table = {
        (a, b): int(home[a] == home[b]) for a in objects for b in objects
    }

    responses = OracleResponseSet(
        rooms=rooms,
        categories=categories,
        objects=by_slot,
        cooccur={q: [(o, cooccur_table[(o, q)]) for o in objects] for q in objects},
        contain={q: [(r, contain_table[(r, q)]) for r in rooms] for q in objects},
    )
    return SynthOracle(
        responses=responses,
        home_room=home,
        contain_table=contain_table,
        cooccur_table=cooccur_table,
    )
