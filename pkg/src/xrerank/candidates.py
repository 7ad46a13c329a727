"""Candidate user -> product paths with path scores and product relevances.

Stands in for an upstream path-reasoning recommender: paths are enumerated
by a bounded walk from the user's training products, scored with a
non-backtracking random-walk likelihood and summed into a relevance.
Real model output can be ingested through ``paths.tsv`` instead.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

from .errors import DataError, IngestionError
from .io import iter_tsv
from .kg import PRODUCT, InteractionLog, KnowledgeGraph, Path, decompose_path
from .props import min_max

log = logging.getLogger(__name__)

DEFAULT_MAX_EDGES = 3
DEFAULT_PER_PRODUCT_CAP = 25
DEFAULT_CANDIDATE_CAP = 200


@dataclass(frozen=True)
class ScoredPath:
    path: Path
    score: float

    def sort_key(self):
        return (-self.score, self.path.text)


@dataclass(frozen=True)
class Candidate:
    product: str
    paths: tuple[ScoredPath, ...]
    relevance: float = 0.0

    @property
    def best(self) -> ScoredPath:
        return self.paths[0]


@dataclass
class CandidateSet:
    user: str
    candidates: dict[str, Candidate] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates.values())

    def __getitem__(self, product: str) -> Candidate:
        return self.candidates[product]

    def all_paths(self) -> Iterable[ScoredPath]:
        for c in self.candidates.values():
            yield from c.paths

    def original_order(self) -> list[str]:
        """Upstream ranking: relevance desc, then best path score desc, then product id."""
        return [c.product for c in sorted(self, key=lambda c: (-c.relevance, -c.best.score, c.product))]


def _fan_out(graph: KnowledgeGraph, node: str, hop: int) -> int:
    # after the first hop the edge just walked is not an option
    return graph.degree(node) - (1 if hop > 0 else 0)


def score_path(path: Path, graph: KnowledgeGraph) -> float:
    """Probability that a uniform non-backtracking walk follows ``path``."""
    score = 1.0
    for i, src in enumerate(path.nodes[:-1]):
        score /= _fan_out(graph, src, i)
    return score


def enumerate_paths(
    graph: KnowledgeGraph,
    train_log: InteractionLog,
    user: str,
    max_edges: int = DEFAULT_MAX_EDGES,
    per_product_cap: int = DEFAULT_PER_PRODUCT_CAP,
    candidate_cap: int = DEFAULT_CANDIDATE_CAP,
) -> CandidateSet:
    """All simple paths user -> training product -> non-products -> unseen product.

    Each product keeps its ``per_product_cap`` best-scored paths; the user
    keeps the ``candidate_cap`` products with the largest score mass.
    Relevances are left at 0 (see :func:`baseline_relevance`).
    """
    cs = CandidateSet(user)
    seen = train_log.products_of(user)
    if not seen:
        msg = f"user {user!r} has no training interactions; no candidates"
        log.warning(msg)
        cs.warnings.append(msg)
        return cs
    if not graph.has_entity(user):
        raise IngestionError(f"user {user!r} is not in the graph")

    types = graph.entities
    # product -> [(score, nodes, relations, directions)]
    found: dict[str, list] = {}

    def walk(nodes, rels, fwds, score):
        cur = nodes[-1]
        fan = _fan_out(graph, cur, len(rels))
        if fan <= 0:
            return
        step = score / fan
        for rel, nxt, fwd in graph.neighbors(cur):
            if nxt in nodes:
                continue
            if types[nxt] == PRODUCT:
                if len(rels) >= 2 and nxt not in seen:
                    found.setdefault(nxt, []).append((step, (*nodes, nxt), (*rels, rel), (*fwds, fwd)))
            elif len(rels) + 1 < max_edges:
                walk((*nodes, nxt), (*rels, rel), (*fwds, fwd), step)

    first_step = 1.0 / _fan_out(graph, user, 0)
    for rel, p1, fwd in graph.neighbors(user):
        if p1 in seen and types[p1] == PRODUCT and max_edges >= 3:
            walk((user, p1), (rel,), (fwd,), first_step)

    # equal scores at the cut do not change the score mass, so products can be
    # ranked before any path is materialised
    ranked = []
    for product, raw in found.items():
        scores = sorted((r[0] for r in raw), reverse=True)[:per_product_cap]
        ranked.append((sum(scores), product))
    ranked.sort(key=lambda x: (-x[0], x[1]))
    for _, product in sorted(ranked[:candidate_cap], key=lambda x: x[1]):
        raw = found[product]
        if len(raw) > per_product_cap:
            cut = sorted((r[0] for r in raw), reverse=True)[per_product_cap - 1]
            raw = [r for r in raw if r[0] >= cut]
        paths = [ScoredPath(Path(n, r, f), s) for s, n, r, f in raw]
        paths.sort(key=ScoredPath.sort_key)
        cs.candidates[product] = Candidate(product, tuple(paths[:per_product_cap]))
    return cs


class Reversed:
    """Wraps a string so comparisons run in reverse order."""

    __slots__ = ("s",)

    def __init__(self, s: str):
        self.s = s

    def __lt__(self, other):
        return self.s > other.s

    def __gt__(self, other):
        return self.s < other.s

    def __eq__(self, other):
        return self.s == other.s


def baseline_relevance(cs: CandidateSet) -> CandidateSet:
    """Relevance = summed path scores per product, min-max normalised over the user's candidates."""
    products = list(cs.candidates)
    sums = [sum(p.score for p in cs.candidates[q].paths) for q in products]
    rel = min_max(sums)
    out = CandidateSet(cs.user, warnings=list(cs.warnings))
    for q, r in zip(products, rel):
        out.candidates[q] = replace(cs.candidates[q], relevance=r)
    return out


def generate_candidates(
    graph: KnowledgeGraph,
    train_log: InteractionLog,
    users: Iterable[str] | None = None,
    max_edges: int = DEFAULT_MAX_EDGES,
    per_product_cap: int = DEFAULT_PER_PRODUCT_CAP,
    candidate_cap: int = DEFAULT_CANDIDATE_CAP,
) -> dict[str, CandidateSet]:
    users = train_log.users() if users is None else list(users)
    return {
        u: baseline_relevance(enumerate_paths(graph, train_log, u, max_edges, per_product_cap, candidate_cap))
        for u in users
    }


def write_paths_tsv(sets: Mapping[str, CandidateSet], fh) -> None:
    for user in sorted(sets):
        for cand in sorted(sets[user], key=lambda c: c.product):
            for sp in cand.paths:
                fh.write(f"{user}\t{cand.product}\t{cand.relevance!r}\t{sp.score!r}\t{sp.path.text}\n")


def read_paths_tsv(fh, graph: KnowledgeGraph | None = None) -> dict[str, CandidateSet]:
    """Parse ``paths.tsv``. With ``graph`` given, every path is validated against it."""
    rows: dict[str, dict[str, list[ScoredPath]]] = {}
    relevance: dict[tuple[str, str], float] = {}
    for user, product, rel, score, text, lineno in iter_tsv(fh, 5):
        try:
            rel_v, score_v = float(rel), float(score)
            path = Path.parse(text)
        except (ValueError, DataError) as exc:
            raise IngestionError(f"line {lineno}: {exc}") from None
        if path.user != user or path.product != product:
            raise IngestionError(f"line {lineno}: path {text} does not link {user} to {product}")
        if not 0.0 <= rel_v <= 1.0:
            raise IngestionError(f"line {lineno}: relevance {rel_v} outside [0, 1]")
        if score_v <= 0.0:
            raise IngestionError(f"line {lineno}: path score must be positive, got {score_v}")
        prev = relevance.setdefault((user, product), rel_v)
        if prev != rel_v:
            raise IngestionError(f"line {lineno}: relevance {rel_v} for ({user}, {product}) conflicts with {prev}")
        if graph is not None:
            try:
                decompose_path(path, graph)
            except DataError as exc:
                raise IngestionError(f"line {lineno}: {exc}") from None
        rows.setdefault(user, {}).setdefault(product, []).append(ScoredPath(path, score_v))

    out = {}
    for user in sorted(rows):
        cs = CandidateSet(user)
        for product in sorted(rows[user]):
            paths = tuple(sorted(rows[user][product], key=ScoredPath.sort_key))
            cs.candidates[product] = Candidate(product, paths, relevance[(user, product)])
        out[user] = cs
    return out
