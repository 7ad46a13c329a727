"""Knowledge graph, interaction log and explanation-path data model.

Entity ids are opaque strings at every public boundary. Internally the graph
interns them to dense integers so traversal works on int adjacency lists.
"""
from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from functools import cached_property
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import IngestionError, PathError

USER = "user"
PRODUCT = "product"

_FORWARD = ">"
_BACKWARD = "<"
_SEP = "|"


@dataclass(frozen=True)
class Path:
    """Alternating walk ``e1 r1 e2 ... r_{n-1} e_n`` over the graph.

    ``forward[i]`` is True when hop i follows the stored triple
    ``(nodes[i], relations[i], nodes[i+1])`` and False when it walks the
    triple ``(nodes[i+1], relations[i], nodes[i])`` backwards.
    """

    nodes: tuple[str, ...]
    relations: tuple[str, ...]
    forward: tuple[bool, ...]

    def __post_init__(self):
        if len(self.nodes) != len(self.relations) + 1:
            raise PathError("bad_alternation", f"{len(self.nodes)} nodes for {len(self.relations)} edges")
        if len(self.forward) != len(self.relations):
            raise PathError("bad_alternation", "one direction flag per edge required")
        if not self.relations:
            raise PathError("too_short", "a path needs at least one edge")

    @property
    def pattern(self) -> tuple[str, ...]:
        return self.relations

    @property
    def type(self) -> str:
        return self.relations[-1]

    @property
    def length(self) -> int:
        return len(self.relations)

    @property
    def user(self) -> str:
        return self.nodes[0]

    @property
    def product(self) -> str:
        return self.nodes[-1]

    def hops(self) -> Iterator[tuple[str, str, str, bool]]:
        for i, rel in enumerate(self.relations):
            yield self.nodes[i], rel, self.nodes[i + 1], self.forward[i]

    @cached_property
    def text(self) -> str:
        """Cached :meth:`serialize`."""
        return self.serialize()

    def serialize(self) -> str:
        parts = [self.nodes[0]]
        for _, rel, dst, fwd in self.hops():
            parts.append(rel + (_FORWARD if fwd else _BACKWARD))
            parts.append(dst)
        return _SEP.join(parts)

    @classmethod
    def parse(cls, text: str) -> "Path":
        """Inverse of :meth:`serialize` (``e1|r1>|e2|r2<|e3``)."""
        tokens = text.strip().split(_SEP)
        if len(tokens) < 3 or len(tokens) % 2 == 0:
            raise PathError("bad_alternation", f"cannot parse path {text!r}")
        nodes = tuple(tokens[0::2])
        rels, fwd = [], []
        for tok in tokens[1::2]:
            if len(tok) < 2 or tok[-1] not in (_FORWARD, _BACKWARD):
                raise PathError("bad_direction", f"relation token {tok!r} lacks a '>' or '<' suffix")
            rels.append(tok[:-1])
            fwd.append(tok[-1] == _FORWARD)
        return cls(nodes, tuple(rels), tuple(fwd))

    def __str__(self) -> str:
        return self.serialize()


@dataclass(frozen=True)
class PathDecomposition:
    past_interaction: tuple[str, str, str]
    entity_chain: tuple[tuple[str, str, str], ...]
    recommendation: tuple[str, str, str]
    shared_entity: str

    @property
    def linking_product(self) -> str:
        return self.past_interaction[2]


class KnowledgeGraph:
    """Typed entities plus a deduplicated set of directed triples.

    Immutable after construction. ``duplicate_count`` records how many
    repeated triples were dropped during ingestion.
    """

    def __init__(self, entity_types: Mapping[str, str], triples: Iterable[Sequence] = ()):
        self._names: list[str] = []
        self._index: dict[str, int] = {}
        self._types: list[str] = []
        for ent, typ in entity_types.items():
            self._index[ent] = len(self._names)
            self._names.append(ent)
            self._types.append(typ)
        self._entity_types = MappingProxyType(dict(entity_types))

        self._rel_names: list[str] = []
        self._rel_index: dict[str, int] = {}
        self._triples: set[tuple[int, int, int]] = set()
        self._out: list[list[tuple[int, int]]] = [[] for _ in self._names]
        self._in: list[list[tuple[int, int]]] = [[] for _ in self._names]
        self.duplicate_count = 0

        for n, rec in enumerate(triples, start=1):
            head, rel, tail = rec[0], rec[1], rec[2]
            where = f"line {rec[3]}" if len(rec) > 3 else f"record {n}"
            for ent in (head, tail):
                if ent not in self._index:
                    raise IngestionError(f"{where}: unknown entity {ent!r} (no entity-type mapping)")
            r = self._rel_index.get(rel)
            if r is None:
                r = self._rel_index[rel] = len(self._rel_names)
                self._rel_names.append(rel)
            key = (self._index[head], r, self._index[tail])
            if key in self._triples:
                self.duplicate_count += 1
                continue
            self._triples.add(key)
            self._out[key[0]].append((r, key[2]))
            self._in[key[2]].append((r, key[0]))

        # sorted adjacency keeps traversal order reproducible
        self._nbrs: list[list[tuple[str, str, bool]]] = []
        for i in range(len(self._names)):
            nb = [(self._rel_names[r], self._names[t], True) for r, t in self._out[i]]
            nb += [(self._rel_names[r], self._names[h], False) for r, h in self._in[i]]
            nb.sort(key=lambda x: (x[1], x[0], not x[2]))
            self._nbrs.append(nb)

    @property
    def entities(self) -> Mapping[str, str]:
        return self._entity_types

    @property
    def relations(self) -> frozenset[str]:
        return frozenset(self._rel_names)

    @property
    def triples(self) -> frozenset[tuple[str, str, str]]:
        n, r = self._names, self._rel_names
        return frozenset((n[h], r[rel], n[t]) for h, rel, t in self._triples)

    def __len__(self) -> int:
        return len(self._triples)

    def __eq__(self, other) -> bool:
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return dict(self._entity_types) == dict(other._entity_types) and self.triples == other.triples

    def __repr__(self) -> str:
        return f"KnowledgeGraph(|E|={len(self._names)}, |R|={len(self._rel_names)}, |G|={len(self._triples)})"

    def type_of(self, entity: str) -> str:
        try:
            return self._entity_types[entity]
        except KeyError:
            raise IngestionError(f"unknown entity {entity!r}") from None

    def has_entity(self, entity: str) -> bool:
        return entity in self._index

    def entities_of_type(self, entity_type: str) -> list[str]:
        return sorted(e for e, t in self._entity_types.items() if t == entity_type)

    def entity_types(self) -> list[str]:
        return sorted(set(self._types))

    def has_triple(self, head: str, relation: str, tail: str) -> bool:
        h, t, r = self._index.get(head), self._index.get(tail), self._rel_index.get(relation)
        if h is None or t is None or r is None:
            return False
        return (h, r, t) in self._triples

    def has_edge(self, src: str, relation: str, dst: str, forward: bool) -> bool:
        return self.has_triple(src, relation, dst) if forward else self.has_triple(dst, relation, src)

    def out_edges(self, entity: str) -> list[tuple[str, str]]:
        i = self._index[entity]
        return sorted((self._rel_names[r], self._names[t]) for r, t in self._out[i])

    def in_edges(self, entity: str) -> list[tuple[str, str]]:
        i = self._index[entity]
        return sorted((self._rel_names[r], self._names[h]) for r, h in self._in[i])

    def neighbors(self, entity: str) -> list[tuple[str, str, bool]]:
        """``(relation, other_entity, forward)`` for every incident triple."""
        return self._nbrs[self._index[entity]]

    def degree(self, entity: str) -> int:
        """Number of triples the entity takes part in, as head or tail."""
        i = self._index[entity]
        return len(self._out[i]) + len(self._in[i])

    def validate_path(self, path: Path) -> None:
        for src, rel, dst, fwd in path.hops():
            if not self.has_edge(src, rel, dst, fwd):
                arrow = f"{src} -{rel}-> {dst}" if fwd else f"{dst} -{rel}-> {src}"
                raise PathError("missing_edge", f"triple {arrow} not in graph (path {path})")

    def with_triples(self, extra: Iterable[Sequence]) -> "KnowledgeGraph":
        """New graph holding this graph's triples plus ``extra``."""
        g = KnowledgeGraph(self._entity_types, list(self.iter_triples()) + list(extra))
        g.duplicate_count += self.duplicate_count
        return g

    def iter_triples(self) -> Iterator[tuple[str, str, str]]:
        n, r = self._names, self._rel_names
        for h, rel, t in sorted(self._triples):
            yield n[h], r[rel], n[t]


def load_graph(triples: Iterable[Sequence], entity_types: Iterable[Sequence]) -> KnowledgeGraph:
    """Build a :class:`KnowledgeGraph` from raw records.

    ``entity_types`` yields ``(entity_id, type)`` and ``triples`` yields
    ``(head, relation, tail)``; either may carry a trailing line number used
    in error messages. Relations are registered on first sight.
    """
    types: dict[str, str] = {}
    for n, rec in enumerate(entity_types, start=1):
        ent, typ = rec[0], rec[1]
        where = f"line {rec[2]}" if len(rec) > 2 else f"record {n}"
        if ent in types and types[ent] != typ:
            raise IngestionError(f"{where}: entity {ent!r} declared as both {types[ent]!r} and {typ!r}")
        types[ent] = typ
    present = set(types.values())
    for required in (USER, PRODUCT):
        if required not in present:
            raise IngestionError(f"entity types must include {required!r}")
    return KnowledgeGraph(types, triples)


def decompose_path(path: Path, graph: KnowledgeGraph, check_edges: bool = True) -> PathDecomposition:
    """Split a user-product path into past interaction, entity chain and recommendation."""
    for ent in path.nodes:
        if not graph.has_entity(ent):
            raise PathError("unknown_entity", f"entity {ent!r} of path {path} is not in the graph")
    if path.length < 3:
        raise PathError("too_short", f"path {path} has {path.length} edges, at least 3 required")
    types = [graph.type_of(e) for e in path.nodes]
    if types[0] != USER:
        raise PathError("first_not_user", f"path {path} starts at a {types[0]!r}")
    if types[-1] != PRODUCT:
        raise PathError("last_not_product", f"path {path} ends at a {types[-1]!r}")
    if types[1] != PRODUCT:
        raise PathError("second_not_product", f"path {path} has a {types[1]!r} as linking entity")
    for ent, typ in zip(path.nodes[2:-1], types[2:-1]):
        if typ == PRODUCT:
            raise PathError("product_in_chain", f"product {ent!r} inside the entity chain of {path}")
    if check_edges:
        graph.validate_path(path)
    hops = [(s, r, d) for s, r, d, _ in path.hops()]
    return PathDecomposition(
        past_interaction=hops[0],
        entity_chain=tuple(hops[1:-1]),
        recommendation=hops[-1],
        shared_entity=path.nodes[-2],
    )


class InteractionLog:
    """Per-user interactions sorted by (timestamp, product id)."""

    def __init__(self, events: Mapping[str, Iterable[tuple[str, int]]]):
        self._events: dict[str, tuple[tuple[str, int], ...]] = {}
        for user in sorted(events):
            seq = sorted(((p, int(t)) for p, t in events[user]), key=lambda x: (x[1], x[0]))
            if seq:
                self._events[user] = tuple(seq)

    @classmethod
    def from_records(cls, records: Iterable[Sequence], entity_types: Mapping[str, str] | None = None) -> "InteractionLog":
        """``records`` yields ``(user, product, timestamp[, line])``."""
        events: dict[str, list[tuple[str, int]]] = defaultdict(list)
        for n, rec in enumerate(records, start=1):
            user, product, ts = rec[0], rec[1], rec[2]
            where = f"line {rec[3]}" if len(rec) > 3 else f"record {n}"
            if entity_types is not None:
                if entity_types.get(user) != USER:
                    raise IngestionError(f"{where}: {user!r} is not a declared user")
                if entity_types.get(product) != PRODUCT:
                    raise IngestionError(f"{where}: {product!r} is not a declared product")
            try:
                ts = int(ts)
            except (TypeError, ValueError):
                raise IngestionError(f"{where}: bad timestamp {ts!r}") from None
            events[user].append((product, ts))
        return cls(events)

    def __getitem__(self, user: str) -> tuple[tuple[str, int], ...]:
        return self._events.get(user, ())

    def __contains__(self, user: str) -> bool:
        return user in self._events

    def __iter__(self) -> Iterator[str]:
        return iter(self._events)

    def __len__(self) -> int:
        return len(self._events)

    def __eq__(self, other) -> bool:
        if not isinstance(other, InteractionLog):
            return NotImplemented
        return self._events == other._events

    def users(self) -> list[str]:
        return list(self._events)

    def items(self):
        return self._events.items()

    def products_of(self, user: str) -> frozenset[str]:
        return frozenset(p for p, _ in self[user])

    def pairs(self) -> set[tuple[str, str]]:
        return {(u, p) for u, seq in self._events.items() for p, _ in seq}

    def records(self) -> Iterator[tuple[str, str, int]]:
        for user, seq in self._events.items():
            for p, t in seq:
                yield user, p, t

    def n_events(self) -> int:
        return sum(len(s) for s in self._events.values())

    def interaction_counts(self) -> Counter:
        return Counter({u: len(s) for u, s in self._events.items()})
