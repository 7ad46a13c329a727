"""Explanation property scores.

* recency of the linking interaction: an exponentially weighted moving
  average over a user's chronologically sorted timestamps, min-max
  normalised per user;
* popularity of the shared entity: the same recurrence over the entities of
  one type sorted by degree, min-max normalised per type;
* diversity of explanation types in a list: distinct path types over
  ``min(k, total types)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Collection, Iterable, Mapping, Sequence

from .errors import ConfigError, LookupMissError
from .io import iter_tsv
from .kg import InteractionLog, KnowledgeGraph, Path, decompose_path

DEFAULT_BETA = 0.3


def _check_beta(name: str, beta: float) -> float:
    beta = float(beta)
    if not 0.0 <= beta <= 1.0:
        raise ConfigError(f"{name} must lie in [0, 1], got {beta}")
    return beta


def ewma(values: Sequence[float], beta: float) -> list[float]:
    """``x_1 = v_1``, ``x_i = (1 - beta) * x_{i-1} + beta * v_i``.

    Evaluated as ``x + beta * (v - x)`` and clamped into ``[x_{i-1}, v_i]``
    so that, for sorted input, the output is monotone in floating point too.
    """
    out: list[float] = []
    for v in values:
        v = float(v)
        if not out:
            out.append(v)
            continue
        prev = out[-1]
        x = prev + beta * (v - prev)
        if v >= prev:
            x = min(max(x, prev), v)
        out.append(x)
    return out


def min_max(values: Sequence[float]) -> list[float]:
    """Rescale to [0, 1]; a constant sequence maps to all 1.0."""
    if not values:
        return []
    lo, hi = min(values), max(values)
    if hi == lo:
        return [1.0] * len(values)
    span = hi - lo
    return [min(1.0, max(0.0, (v - lo) / span)) for v in values]


@dataclass(frozen=True)
class LirTable:
    values: Mapping[tuple[str, str], float]
    beta: float = DEFAULT_BETA

    def __getitem__(self, key: tuple[str, str]) -> float:
        try:
            return self.values[key]
        except KeyError:
            raise LookupMissError(f"no recency value for (user, product) = {key}") from None

    def __contains__(self, key) -> bool:
        return key in self.values

    def __len__(self) -> int:
        return len(self.values)

    def user_values(self, user: str) -> dict[str, float]:
        return {p: v for (u, p), v in self.values.items() if u == user}


@dataclass(frozen=True)
class SepTable:
    values: Mapping[str, float]
    beta: float = DEFAULT_BETA
    # entity type -> [(entity, degree)] in ascending popularity order
    ranking: Mapping[str, tuple[tuple[str, int], ...]] = field(default_factory=dict)

    def __getitem__(self, entity: str) -> float:
        try:
            return self.values[entity]
        except KeyError:
            raise LookupMissError(f"no popularity value for entity {entity!r}") from None

    def __contains__(self, entity) -> bool:
        return entity in self.values

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class EtdContext:
    all_types: frozenset[str]
    k: int

    def __post_init__(self):
        if not self.all_types:
            raise ConfigError("diversity needs at least one known path type")
        if self.k < 1:
            raise ConfigError(f"k must be positive, got {self.k}")

    @property
    def denominator(self) -> int:
        return min(self.k, len(self.all_types))

    @classmethod
    def from_paths(cls, paths: Iterable[Path], k: int) -> "EtdContext":
        return cls(frozenset(p.type for p in paths), k)


def raw_lir(timestamps: Sequence[int], beta: float = DEFAULT_BETA) -> list[float]:
    return ewma(timestamps, _check_beta("beta_lir", beta))


def compute_lir_table(log: InteractionLog, beta: float = DEFAULT_BETA) -> LirTable:
    """Recency score for every (user, product) pair in ``log``.

    A product seen several times keeps the value of its latest event; all
    events feed the recurrence.
    """
    beta = _check_beta("beta_lir", beta)
    values: dict[tuple[str, str], float] = {}
    for user, events in log.items():
        norm = min_max(ewma([t for _, t in events], beta))
        for (product, _), v in zip(events, norm):
            values[(user, product)] = v
    return LirTable(values, beta)


def popularity_ranking(graph: KnowledgeGraph) -> dict[str, tuple[tuple[str, int], ...]]:
    """Per entity type, ``(entity, degree)`` sorted by (degree, entity id)."""
    by_type: dict[str, list[tuple[str, int]]] = {}
    for ent, typ in graph.entities.items():
        by_type.setdefault(typ, []).append((ent, graph.degree(ent)))
    return {t: tuple(sorted(rows, key=lambda x: (x[1], x[0]))) for t, rows in sorted(by_type.items())}


def compute_sep_table(graph: KnowledgeGraph, beta: float = DEFAULT_BETA) -> SepTable:
    beta = _check_beta("beta_sep", beta)
    ranking = popularity_ranking(graph)
    values: dict[str, float] = {}
    for rows in ranking.values():
        norm = min_max(ewma([d for _, d in rows], beta))
        for (ent, _), v in zip(rows, norm):
            values[ent] = v
    return SepTable(values, beta, ranking)


def sen(sep_value: float) -> float:
    """Novelty of a shared entity, the complement of its popularity."""
    return 1.0 - sep_value


def etd(selected_types: Collection[str], ctx: EtdContext) -> float:
    if not selected_types:
        return 0.0
    return len(set(selected_types)) / ctx.denominator


def path_property_values(
    path: Path, lir: LirTable, sep: SepTable, graph: KnowledgeGraph | None = None
) -> tuple[float, float]:
    """(recency of the linking interaction, popularity of the shared entity).

    With ``graph`` given the path shape is checked first.
    """
    if graph is not None:
        decompose_path(path, graph, check_edges=False)
    return lir[(path.user, path.nodes[1])], sep[path.nodes[-2]]


def write_lir_tsv(table: LirTable, fh) -> None:
    for (user, product), v in sorted(table.values.items()):
        fh.write(f"{user}\t{product}\t{v:.9f}\n")


def write_sep_tsv(table: SepTable, fh) -> None:
    for ent, v in sorted(table.values.items()):
        fh.write(f"{ent}\t{v:.9f}\n")


def read_lir_tsv(fh, beta: float = DEFAULT_BETA) -> LirTable:
    values = {}
    for user, product, v, _ in iter_tsv(fh, 3):
        values[(user, product)] = float(v)
    return LirTable(values, beta)


def read_sep_tsv(fh, beta: float = DEFAULT_BETA) -> SepTable:
    return SepTable({ent: float(v) for ent, v, _ in iter_tsv(fh, 2)}, beta)
