"""Post-hoc re-ranking of recommended products and their explanation paths.

Two strategies over a property set drawn from {recency, popularity, diversity}:

``soft``
    keeps the upstream product order and, position by position, swaps in the
    path that maximises the summed property values;
``weighted``
    greedy maximal-marginal-relevance selection. At step ``i`` every remaining
    product scores ``(1 - alpha) * relevance + alpha * max_path objective``.

The full weighted objective also adds the relevance of the products already
placed, but that sum is the same for every candidate at a given step, so
dropping it leaves the argmax unchanged.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .candidates import Candidate, CandidateSet, Reversed, ScoredPath
from .errors import ConfigError
from .kg import Path
from .props import EtdContext, LirTable, SepTable, etd

RECENCY = "recency"
POPULARITY = "popularity"
DIVERSITY = "diversity"
PROPERTIES = (RECENCY, POPULARITY, DIVERSITY)
_ALIASES = {
    "recency": RECENCY, "lir": RECENCY, "r": RECENCY,
    "popularity": POPULARITY, "sep": POPULARITY, "p": POPULARITY,
    "diversity": DIVERSITY, "etd": DIVERSITY, "d": DIVERSITY,
}
MODES = ("soft", "weighted")

BRUTE_FORCE_MAX_CANDIDATES = 12
BRUTE_FORCE_MAX_K = 5


def parse_properties(text: str | Iterable[str]) -> frozenset[str]:
    items = text.split(",") if isinstance(text, str) else list(text)
    out = set()
    for item in items:
        item = item.strip().lower()
        if not item:
            continue
        if item not in _ALIASES:
            raise ConfigError(f"unknown property {item!r}; choose from {', '.join(PROPERTIES)}")
        out.add(_ALIASES[item])
    if not out:
        raise ConfigError("at least one property is required")
    return frozenset(out)


@dataclass(frozen=True)
class RerankConfig:
    alpha: float = 0.1
    properties: frozenset[str] = frozenset({RECENCY})
    k: int = 10
    mode: str = "weighted"

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0 or math.isnan(self.alpha):
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.k < 1:
            raise ConfigError(f"k must be a positive integer, got {self.k}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        props = parse_properties(self.properties)
        object.__setattr__(self, "properties", props)

    @property
    def label(self) -> str:
        props = "+".join(p for p in PROPERTIES if p in self.properties)
        if self.mode == "soft":
            return f"soft-{props}"
        return f"weighted-{props}-a{self.alpha:g}"


@dataclass(frozen=True)
class PropertyTables:
    lir: LirTable
    sep: SepTable

    def values(self, path: Path) -> tuple[float, float]:
        return self.lir[(path.user, path.nodes[1])], self.sep[path.nodes[-2]]


@dataclass(frozen=True)
class ExplainedItem:
    product: str
    path: ScoredPath
    relevance: float
    lir: float
    sep: float
    score: float

    @property
    def type(self) -> str:
        return self.path.path.type


@dataclass
class ExplainedList:
    user: str
    items: list[ExplainedItem] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    # per step: [(product, incremental score)] for every candidate considered
    audit: list[list[tuple[str, float]]] | None = None

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    @property
    def products(self) -> list[str]:
        return [it.product for it in self.items]

    @property
    def types(self) -> list[str]:
        return [it.type for it in self.items]


def _item_value(lir: float, sep: float, properties: frozenset[str]) -> float:
    total = 0.0
    if RECENCY in properties:
        total += lir
    if POPULARITY in properties:
        total += sep
    return total


def _diversity_term(prefix_types: Sequence[str], path_type: str, properties, ctx: EtdContext) -> float:
    if DIVERSITY not in properties:
        return 0.0
    return etd([*prefix_types, path_type], ctx)


def property_objective(
    prefix_types: Sequence[str],
    path: Path,
    properties: frozenset[str],
    tables: PropertyTables,
    ctx: EtdContext,
) -> float:
    """Summed property values of ``path`` placed after a prefix with ``prefix_types``.

    Recency and popularity ignore the prefix; diversity scores the prefix
    types plus the path's own type.
    """
    lir, sep = tables.values(path)
    return _item_value(lir, sep, properties) + _diversity_term(prefix_types, path.type, properties, ctx)


class _PathChooser:
    """Argmax over one product's paths given the types already in the list.

    Paths are pre-sorted by (item value desc, path score desc, serialization).
    Every path whose type is already present shares the same diversity term,
    and so do all paths introducing a new type, so the argmax is the better of
    the first path and the first path with an unseen type.
    """

    def __init__(self, cand: Candidate, properties: frozenset[str], tables: PropertyTables):
        self.cand = cand
        self.properties = properties
        rows = []
        for sp in cand.paths:
            lir, sep = tables.values(sp.path)
            rows.append((_item_value(lir, sep, properties), sp, lir, sep))
        rows.sort(key=lambda r: (-r[0], -r[1].score, r[1].path.text))
        self.rows = rows

    def best(self, prefix_types: Sequence[str], ctx: EtdContext):
        """Return ``(objective, item value, scored path, lir, sep)``."""
        head = self.rows[0]
        if DIVERSITY not in self.properties:
            return (head[0],) + head
        present = set(prefix_types)
        options = [head]
        if head[1].path.type in present:
            for row in self.rows[1:]:
                if row[1].path.type not in present:
                    options.append(row)
                    break
        best = None
        for row in options:
            obj = row[0] + etd([*prefix_types, row[1].path.type], ctx)
            key = (obj, row[1].score, Reversed(row[1].path.text))
            if best is None or key > best[0]:
                best = (key, (obj,) + row)
        return best[1]


def soft_rerank(
    cs: CandidateSet,
    original_order: Sequence[str],
    cfg: RerankConfig,
    tables: PropertyTables,
    ctx: EtdContext,
) -> ExplainedList:
    """Keep ``original_order[:k]``; re-select each product's path in rank order."""
    out = ExplainedList(cs.user)
    types: list[str] = []
    for product in original_order[: cfg.k]:
        cand = cs[product]
        obj, _, sp, lir, sep = _PathChooser(cand, cfg.properties, tables).best(types, ctx)
        out.items.append(ExplainedItem(product, sp, cand.relevance, lir, sep, obj))
        types.append(sp.path.type)
    return out


def weighted_rerank(
    cs: CandidateSet,
    cfg: RerankConfig,
    tables: PropertyTables,
    ctx: EtdContext,
    audit: bool = False,
) -> ExplainedList:
    """Greedy selection of ``k`` products, each with its objective-maximising path.

    Ties fall to higher relevance, then higher best-path score, then the
    smaller product id, which makes ``alpha = 0`` reproduce
    :meth:`CandidateSet.original_order`.
    """
    out = ExplainedList(cs.user, audit=[] if audit else None)
    if len(cs) < cfg.k:
        out.warnings.append(f"user {cs.user!r}: only {len(cs)} candidates for k={cfg.k}")
    choosers = {c.product: _PathChooser(c, cfg.properties, tables) for c in cs}
    remaining = sorted(choosers)
    types: list[str] = []
    a = cfg.alpha
    for _ in range(min(cfg.k, len(remaining))):
        best_key, best = None, None
        step = [] if audit else None
        for product in remaining:
            ch = choosers[product]
            obj, _, sp, lir, sep = ch.best(types, ctx)
            score = (1.0 - a) * ch.cand.relevance + a * obj
            if step is not None:
                step.append((product, score))
            key = (score, ch.cand.relevance, ch.cand.best.score, Reversed(product))
            if best_key is None or key > best_key:
                best_key = key
                best = ExplainedItem(product, sp, ch.cand.relevance, lir, sep, score)
        out.items.append(best)
        types.append(best.type)
        remaining.remove(best.product)
        if step is not None:
            out.audit.append(step)
    return out


def baseline_list(cs: CandidateSet, k: int, tables: PropertyTables) -> ExplainedList:
    """The upstream model's own list: top-k by relevance, each with its highest-scored path."""
    out = ExplainedList(cs.user)
    for product in cs.original_order()[:k]:
        cand = cs[product]
        lir, sep = tables.values(cand.best.path)
        out.items.append(ExplainedItem(product, cand.best, cand.relevance, lir, sep, cand.relevance))
    return out


def rerank(cs: CandidateSet, cfg: RerankConfig, tables: PropertyTables, ctx: EtdContext, audit: bool = False) -> ExplainedList:
    if cfg.mode == "soft":
        return soft_rerank(cs, cs.original_order(), cfg, tables, ctx)
    return weighted_rerank(cs, cfg, tables, ctx, audit=audit)


def list_objective(
    items: Iterable[tuple[float, Path]],
    cfg: RerankConfig,
    tables: PropertyTables,
    ctx: EtdContext,
) -> float:
    """Set objective of a list given as ``(relevance, path)`` pairs.

    ``(1 - alpha) * sum relevance + alpha * (sum item-level values + diversity)``.
    """
    rel_sum, item_sum, types = 0.0, 0.0, []
    for relevance, path in items:
        lir, sep = tables.values(path)
        rel_sum += relevance
        item_sum += _item_value(lir, sep, cfg.properties)
        types.append(path.type)
    div = etd(types, ctx) if DIVERSITY in cfg.properties else 0.0
    return (1.0 - cfg.alpha) * rel_sum + cfg.alpha * (item_sum + div)


def explained_objective(lst: ExplainedList, cfg: RerankConfig, tables: PropertyTables, ctx: EtdContext) -> float:
    return list_objective(((it.relevance, it.path.path) for it in lst), cfg, tables, ctx)


def brute_force_rerank(cs: CandidateSet, cfg: RerankConfig, tables: PropertyTables, ctx: EtdContext) -> ExplainedList:
    """Exact maximiser of :func:`list_objective` over every size-k subset and path choice.

    For a fixed type per product the item-level part is additive, so each
    product only needs its best path per type; that reduction is exact.
    The returned list is ordered by relevance.
    """
    if len(cs) > BRUTE_FORCE_MAX_CANDIDATES or cfg.k > BRUTE_FORCE_MAX_K:
        raise ConfigError(
            f"brute force limited to {BRUTE_FORCE_MAX_CANDIDATES} candidates and k <= {BRUTE_FORCE_MAX_K}"
            f" (got {len(cs)} candidates, k={cfg.k})"
        )
    options: dict[str, list[ScoredPath]] = {}
    for cand in cs:
        per_type: dict[str, tuple[float, ScoredPath]] = {}
        for sp in cand.paths:
            lir, sep = tables.values(sp.path)
            v = _item_value(lir, sep, cfg.properties)
            t = sp.path.type if DIVERSITY in cfg.properties else ""
            if t not in per_type or v > per_type[t][0]:
                per_type[t] = (v, sp)
        options[cand.product] = [sp for _, sp in per_type.values()]

    products = sorted(options)
    size = min(cfg.k, len(products))
    best_val, best_sel = -math.inf, None
    for subset in itertools.combinations(products, size):
        for choice in itertools.product(*(options[p] for p in subset)):
            val = list_objective(((cs[p].relevance, sp.path) for p, sp in zip(subset, choice)), cfg, tables, ctx)
            if val > best_val:
                best_val, best_sel = val, list(zip(subset, choice))

    out = ExplainedList(cs.user)
    for product, sp in sorted(best_sel or [], key=lambda x: (-cs[x[0]].relevance, x[0])):
        lir, sep = tables.values(sp.path)
        out.items.append(ExplainedItem(product, sp, cs[product].relevance, lir, sep, math.nan))
    return out
