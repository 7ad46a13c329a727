"""Chronological splitting and the synthetic fixture dataset."""
from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass
from pathlib import Path as FsPath

from .errors import ConfigError
from .io import atomic_write
from .kg import PRODUCT, USER, InteractionLog

log = logging.getLogger(__name__)

_EPS = 1e-9


@dataclass(frozen=True)
class SplitSpec:
    train: float = 0.7
    valid: float = 0.1
    test: float = 0.2

    def __post_init__(self):
        parts = (self.train, self.valid, self.test)
        if any(not (f > 0) for f in parts):
            raise ConfigError(f"split fractions must be positive, got {parts}")
        if abs(sum(parts) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions must sum to 1, got {sum(parts)}")

    def sizes(self, n: int) -> tuple[int, int, int]:
        """Ceilings in order train, validation; the remainder is test."""
        if n < 3:
            return n, 0, 0
        n_train = min(n, math.ceil(self.train * n - _EPS))
        n_valid = min(n - n_train, math.ceil(self.valid * n - _EPS))
        return n_train, n_valid, n - n_train - n_valid


def chronological_split(
    log_: InteractionLog, spec: SplitSpec = SplitSpec(), warnings: list[str] | None = None
) -> tuple[InteractionLog, InteractionLog, InteractionLog]:
    """Per user: oldest interactions to train, the next ones to validation, the newest to test."""
    train, valid, test = {}, {}, {}
    short = 0
    for user, events in log_.items():
        n_train, n_valid, _ = spec.sizes(len(events))
        if len(events) < 3:
            short += 1
        train[user] = events[:n_train]
        valid[user] = events[n_train : n_train + n_valid]
        test[user] = events[n_train + n_valid :]
    if short:
        msg = f"{short} user(s) with fewer than 3 interactions kept entirely in train"
        log.warning(msg)
        if warnings is not None:
            warnings.append(msg)
    return InteractionLog(train), InteractionLog(valid), InteractionLog(test)


@dataclass(frozen=True)
class FixtureSpec:
    n_users: int = 240
    n_products: int = 600
    seed: int = 7
    interaction_relation: str = "watched"


# attribute type, relation (product -> attribute), pool size, links per product
_ATTRIBUTES = (
    ("director", "directed_by", 70, (1, 1)),
    ("actor", "starring", 160, (2, 3)),
    ("genre", "belongs_to", 16, (1, 2)),
    ("producer", "produced_by", 45, (1, 1)),
    ("writer", "written_by", 90, (1, 1)),
)


def _zipf_weights(n: int, s: float, rng: random.Random) -> list[float]:
    w = [1.0 / (i + 1) ** s for i in range(n)]
    rng.shuffle(w)
    return w


def make_fixture(spec: FixtureSpec = FixtureSpec()):
    """Synthetic movie-style dataset.

    Returns ``(entity_types, triples, interactions, groups)`` where
    ``interactions`` is a list of ``(user, product, timestamp)``. Users favour
    a few attribute values, so held-out interactions are reachable through
    shared entities of their training history. Deterministic in ``spec.seed``.
    """
    rng = random.Random(spec.seed)
    entity_types: dict[str, str] = {}
    products = [f"m{i:04d}" for i in range(spec.n_products)]
    users = [f"u{i:04d}" for i in range(spec.n_users)]
    for p in products:
        entity_types[p] = PRODUCT
    for u in users:
        entity_types[u] = USER

    triples: list[tuple[str, str, str]] = []
    attr_members: dict[str, list[str]] = {}
    pools = {}
    for typ, rel, size, _ in _ATTRIBUTES:
        pool = [f"{typ}{i:03d}" for i in range(size)]
        for e in pool:
            entity_types[e] = typ
        pools[typ] = (pool, _zipf_weights(size, 1.0, rng))
    for p in products:
        for typ, rel, _, (lo, hi) in _ATTRIBUTES:
            pool, weights = pools[typ]
            chosen = set()
            for _ in range(rng.randint(lo, hi)):
                chosen.add(rng.choices(pool, weights)[0])
            for e in sorted(chosen):
                triples.append((p, rel, e))
                attr_members.setdefault(e, []).append(p)

    product_pop = _zipf_weights(spec.n_products, 0.8, rng)
    interactions: list[tuple[str, str, int]] = []
    groups: dict[str, str] = {}
    for u in users:
        groups[u] = "M" if rng.random() < 0.7 else "F"
        favourites = []
        for typ, _, _, _ in _ATTRIBUTES:
            pool, weights = pools[typ]
            favourites.extend(rng.choices(pool, weights, k=2 if typ in ("genre", "actor") else 1))
        n = rng.randint(12, 40)
        t = rng.randint(946_684_800, 1_040_000_000)
        seen: set[str] = set()
        for _ in range(n):
            for _attempt in range(20):
                if rng.random() < 0.75:
                    p = rng.choice(attr_members.get(rng.choice(favourites)) or products)
                else:
                    p = rng.choices(products, product_pop)[0]
                if p not in seen:
                    break
            else:
                continue
            seen.add(p)
            t += int(rng.expovariate(1 / (3 * 86_400))) + 1
            interactions.append((u, p, t))
    return entity_types, triples, interactions, groups


def write_fixture(out_dir, spec: FixtureSpec = FixtureSpec()) -> dict[str, FsPath]:
    """Write ``kg.tsv``, ``entities.tsv``, ``interactions.tsv``, ``groups.tsv`` and ``config.txt``."""
    out = FsPath(out_dir)
    entity_types, triples, interactions, groups = make_fixture(spec)
    paths = {name: out / f"{name}.tsv" for name in ("kg", "entities", "interactions", "groups")}
    with atomic_write(paths["kg"]) as fh:
        fh.write(f"# synthetic fixture, seed={spec.seed}\n")
        for h, r, t in triples:
            fh.write(f"{h}\t{r}\t{t}\n")
    with atomic_write(paths["entities"]) as fh:
        for e in sorted(entity_types):
            fh.write(f"{e}\t{entity_types[e]}\n")
    with atomic_write(paths["interactions"]) as fh:
        for u, p, t in interactions:
            fh.write(f"{u}\t{p}\t{t}\n")
    with atomic_write(paths["groups"]) as fh:
        for u in sorted(groups):
            fh.write(f"{u}\t{groups[u]}\n")
    paths["config"] = out / "config.txt"
    with atomic_write(paths["config"]) as fh:
        fh.write(
            "# pipeline configuration for the synthetic fixture\n"
            "kg = kg.tsv\n"
            "entities = entities.tsv\n"
            "interactions = interactions.tsv\n"
            "groups = groups.tsv\n"
            "group_order = M,F\n"
            f"interaction_relation = {spec.interaction_relation}\n"
            "out = run\n"
            f"seed = {spec.seed}\n"
        )
    return paths
