"""Phone inventories, confusion-based similarity, and partitions into broad classes."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from ..errors import ConfigError, CoverageError, FormatError, ShapeError

CRITERIA = ("manner", "place", "data_driven", "mono")


@dataclass(frozen=True)
class PhoneInventory:
    phones: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "phones", tuple(self.phones))
        if not self.phones:
            raise ConfigError("phone inventory is empty")
        if len(set(self.phones)) != len(self.phones):
            dupes = sorted({p for p in self.phones if self.phones.count(p) > 1})
            raise ConfigError(f"duplicate phones in inventory: {dupes}")

    def __len__(self):
        return len(self.phones)

    def __iter__(self):
        return iter(self.phones)

    def index(self, phone: str) -> int:
        try:
            return self.phones.index(phone)
        except ValueError:
            raise CoverageError(f"phone {phone!r} is not in the inventory") from None


def timit_inventory() -> PhoneInventory:
    """The 61 TIMIT symbols, in the order of the bundled data-driven clustering table."""
    data = json.loads(resources.files(__package__).joinpath("data/timit_inventory.json").read_text())
    return PhoneInventory(data["phones"])


@dataclass
class ConfusionMatrix:
    """``counts[i, j]``: frames of reference class i recognised as class j."""

    counts: np.ndarray
    inventory: PhoneInventory

    def __post_init__(self):
        self.counts = np.asarray(self.counts)
        if self.counts.ndim != 2 or self.counts.shape[0] != self.counts.shape[1]:
            raise ShapeError(f"confusion matrix must be square, got {self.counts.shape}")
        if self.counts.shape[0] != len(self.inventory):
            raise ShapeError(f"{self.counts.shape[0]} rows for {len(self.inventory)} phones")
        if np.any(self.counts < 0):
            raise ConfigError("confusion counts must be non-negative")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([""] + list(self.inventory.phones))
        for p, row in zip(self.inventory.phones, self.counts):
            w.writerow([p] + [str(int(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ConfusionMatrix":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or len(rows[0]) < 2:
            raise FormatError("confusion CSV needs a header row of phone symbols")
        header = rows[0][1:]
        body = [r for r in rows[1:] if r]
        if [r[0] for r in body] != header:
            raise FormatError("confusion CSV row labels must repeat the header order")
        try:
            counts = np.array([[int(v) for v in r[1:]] for r in body], dtype=np.int64)
        except ValueError as exc:
            raise FormatError(f"non-integer count in confusion CSV: {exc}") from exc
        return cls(counts, PhoneInventory(header))


@dataclass
class SimilarityMatrix:
    values: np.ndarray
    inventory: PhoneInventory


def similarity_values(m: np.ndarray) -> np.ndarray:
    """S[i, j] = Σ_{k ≠ i, j} min(M[i, k], M[j, k]); zero diagonal."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"confusion matrix must be square, got {m.shape}")
    s = np.minimum(m[:, None, :], m[None, :, :]).sum(axis=2)
    d = np.diag(m)
    # drop the k = i and k = j terms
    s = s - np.minimum(d[:, None], m.T) - np.minimum(m, d[None, :])
    np.fill_diagonal(s, 0)
    return s


def similarity_from_confusion(m: ConfusionMatrix) -> SimilarityMatrix:
    return SimilarityMatrix(similarity_values(m.counts), m.inventory)


@dataclass
class Partition:
    """Assignment of every inventory phone to a cluster id (contiguous from 0)."""

    assignment: dict[str, int]
    cluster_names: dict[int, str] = field(default_factory=dict)
    criterion: str = "data_driven"

    def __post_init__(self):
        if self.criterion not in CRITERIA:
            raise ConfigError(f"unknown criterion {self.criterion!r}")
        ids = set(self.assignment.values())
        if ids != set(range(len(ids))):
            raise ConfigError(f"cluster ids must be contiguous from 0, got {sorted(ids)}")
        if not self.cluster_names:
            self.cluster_names = {k: f"c{k}" for k in sorted(ids)}

    @property
    def n_clusters(self) -> int:
        return len(set(self.assignment.values()))

    @property
    def class_names(self) -> list[str]:
        return [self.cluster_names[k] for k in range(self.n_clusters)]

    def clusters(self) -> list[list[str]]:
        out: list[list[str]] = [[] for _ in range(self.n_clusters)]
        for phone, k in self.assignment.items():
            out[k].append(phone)
        return out

    def cluster_of(self, phone: str) -> int:
        try:
            return self.assignment[phone]
        except KeyError:
            raise CoverageError(f"phone {phone!r} is not covered by the {self.criterion} partition") from None

    def restrict(self, phones) -> "Partition":
        """Sub-partition over ``phones``; surviving cluster ids are renumbered in their original order."""
        phones = list(phones)
        used = sorted({self.cluster_of(p) for p in phones})
        remap = {old: new for new, old in enumerate(used)}
        return Partition({p: remap[self.assignment[p]] for p in phones},
                         {remap[o]: self.cluster_names[o] for o in used}, self.criterion)

    @classmethod
    def identity(cls, phones, criterion: str = "mono") -> "Partition":
        phones = list(phones)
        return cls({p: i for i, p in enumerate(phones)}, dict(enumerate(phones)), criterion)

    @classmethod
    def from_clusters(cls, clusters, names=None, criterion: str = "data_driven") -> "Partition":
        assignment = {}
        for k, members in enumerate(clusters):
            if not members:
                raise ConfigError(f"cluster {k} is empty")
            for p in members:
                if p in assignment:
                    raise ConfigError(f"phone {p!r} assigned to two clusters")
                assignment[p] = k
        names = names or ["+".join(c) for c in clusters]
        return cls(assignment, dict(enumerate(names)), criterion)

    def to_json(self) -> str:
        clusters = [{"name": self.cluster_names[k], "phones": members}
                    for k, members in enumerate(self.clusters())]
        return json.dumps({"criterion": self.criterion, "clusters": clusters}, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "Partition":
        data = json.loads(text)
        try:
            clusters = [c["phones"] for c in data["clusters"]]
            names = [c["name"] for c in data["clusters"]]
        except (KeyError, TypeError) as exc:
            raise FormatError(f"partition JSON missing field: {exc}") from exc
        return cls.from_clusters(clusters, names, data.get("criterion", "data_driven"))

    def table(self) -> str:
        """Two-column cluster listing (cluster name, member phones)."""
        width = max(len(n) for n in self.class_names)
        return "\n".join(f"{self.cluster_names[k].ljust(width)}  {', '.join(sorted(m))}"
                         for k, m in enumerate(self.clusters())) + "\n"


def agglomerate(m: ConfusionMatrix, target_k: int) -> Partition:
    """Greedy bottom-up clustering of phones by confusion similarity.

    Each step sums member rows and columns of the confusion matrix into a
    cluster-level matrix, scores every cluster pair with the min-overlap
    similarity, and merges the most similar pair. Ties go to the pair whose
    (smallest member index, smallest member index) is lexicographically
    smallest.
    """
    P = len(m.inventory)
    if not 1 <= target_k <= P:
        raise ConfigError(f"target_k must lie in [1, {P}], got {target_k}")
    counts = m.counts.astype(np.int64)
    clusters = [[i] for i in range(P)]  # always kept sorted by first member
    while len(clusters) > target_k:
        member = np.zeros((P, len(clusters)), dtype=np.int64)
        for c, members in enumerate(clusters):
            member[members, c] = 1
        s = similarity_values(member.T @ counts @ member)
        iu = np.triu_indices(len(clusters), k=1)
        # row-major upper triangle: first maximum = lexicographic tie-break
        best = int(np.argmax(s[iu]))
        a, b = int(iu[0][best]), int(iu[1][best])
        clusters[a] = sorted(clusters[a] + clusters[b])
        del clusters[b]
    phones = m.inventory.phones
    return Partition.from_clusters([[phones[i] for i in c] for c in clusters], criterion="data_driven")


def knowledge_partition(criterion: str, inv: PhoneInventory | None = None, table=None) -> Partition:
    """Manner (5 classes) or place (9 classes) partition from a phone table.

    ``table`` overrides the bundled mapping: either a path to partition JSON
    or a ``{class_name: [phones]}`` dict. Phones outside ``inv`` are ignored;
    phones of ``inv`` missing from the table raise :class:`CoverageError`.
    """
    if criterion not in ("manner", "place"):
        raise ConfigError(f"knowledge criterion must be 'manner' or 'place', got {criterion!r}")
    inv = inv or timit_inventory()
    if table is None:
        text = resources.files(__package__).joinpath(f"data/{criterion}.json").read_text()
        data = json.loads(text)
        table = {c["name"]: c["phones"] for c in data["clusters"]}
    elif isinstance(table, (str, Path)):
        data = json.loads(Path(table).read_text())
        table = {c["name"]: c["phones"] for c in data["clusters"]}
    lookup = {p: name for name, phones in table.items() for p in phones}
    names = list(table)
    for p in inv:
        if p not in lookup:
            raise CoverageError(f"phone {p!r} has no {criterion} class in the mapping table")
    used = [n for n in names if any(lookup[p] == n for p in inv)]
    ids = {n: k for k, n in enumerate(used)}
    return Partition({p: ids[lookup[p]] for p in inv}, dict(enumerate(used)), criterion)


def relabel(labels, p: Partition, as_ids: bool = False) -> list:
    """Map a frame phone-label sequence to cluster names (or ids)."""
    ids = [p.cluster_of(lab) for lab in labels]
    return ids if as_ids else [p.cluster_names[k] for k in ids]
