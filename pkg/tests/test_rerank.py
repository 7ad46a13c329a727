import itertools
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from instances import random_instance
from xrerank.candidates import Candidate, CandidateSet, ScoredPath
from xrerank.errors import ConfigError
from xrerank.kg import Path
from xrerank.props import EtdContext, LirTable, SepTable, etd
from xrerank.rerank import (
    DIVERSITY,
    POPULARITY,
    RECENCY,
    PropertyTables,
    RerankConfig,
    baseline_list,
    brute_force_rerank,
    explained_objective,
    list_objective,
    parse_properties,
    property_objective,
    rerank,
    soft_rerank,
    weighted_rerank,
)


def make_cs(spec, user="u"):
    """``spec``: product -> (relevance, [(lir, sep, type, score), ...])."""
    lir, sep, cands = {}, {}, {}
    for product, (rel, paths) in spec.items():
        sps = []
        for j, (lv, sv, typ, score) in enumerate(paths):
            linked, shared = f"h_{product}_{j}", f"s_{product}_{j}"
            lir[(user, linked)] = lv
            sep[shared] = sv
            sps.append(ScoredPath(Path((user, linked, shared, product), ("i", "c", typ), (True, True, False)), score))
        sps.sort(key=ScoredPath.sort_key)
        cands[product] = Candidate(product, tuple(sps), rel)
    types = {t for _, paths in spec.values() for _, _, t, _ in paths}
    return CandidateSet(user, cands), PropertyTables(LirTable(lir), SepTable(sep)), types


def exhaustive(cs, cfg, tables, ctx):
    """Best set objective over every subset, order and path choice (no reductions)."""
    size = min(cfg.k, len(cs))
    best = -math.inf
    for subset in itertools.permutations(sorted(cs.candidates), size):
        for choice in itertools.product(*(cs[p].paths for p in subset)):
            items = [(cs[p].relevance, sp.path) for p, sp in zip(subset, choice)]
            best = max(best, list_objective(items, cfg, tables, ctx))
    return best


def test_parse_properties_aliases():
    assert parse_properties("lir, sep,etd") == {RECENCY, POPULARITY, DIVERSITY}
    with pytest.raises(ConfigError):
        parse_properties("novelty")
    with pytest.raises(ConfigError):
        RerankConfig(alpha=1.5)
    with pytest.raises(ConfigError):
        RerankConfig(k=0)


def test_property_objective_examples():
    cs, tables, _ = make_cs({"p": (1.0, [(0.7, 0.2, "b", 1.0)])})
    path = cs["p"].best.path
    ctx = EtdContext(frozenset("abcd"), 5)
    assert property_objective([], path, {RECENCY}, tables, ctx) == pytest.approx(0.7)
    assert property_objective([], path, {RECENCY, POPULARITY}, tables, ctx) == pytest.approx(0.9)
    assert property_objective(["a"], path, {DIVERSITY}, tables, ctx) == pytest.approx(0.5)


def test_soft_picks_most_recent_path():
    cs, tables, types = make_cs({"p": (1.0, [(0.2, 0, "a", 0.5), (0.9, 0, "a", 0.3), (0.5, 0, "a", 0.1)])})
    ctx = EtdContext(frozenset(types), 10)
    out = soft_rerank(cs, ["p"], RerankConfig(properties={RECENCY}, mode="soft"), tables, ctx)
    assert out.items[0].lir == 0.9


def test_soft_diversity_prefers_new_type():
    cs, tables, _ = make_cs({
        "p1": (1.0, [(0.5, 0, "directed", 0.5)]),
        "p2": (0.9, [(0.5, 0, "directed", 0.5), (0.5, 0, "starred", 0.4)]),
    })
    ctx = EtdContext(frozenset({"directed", "starred"}), 10)
    out = soft_rerank(cs, ["p1", "p2"], RerankConfig(properties={DIVERSITY}, mode="soft"), tables, ctx)
    assert out.types == ["directed", "starred"]
    assert out.products == ["p1", "p2"]


def test_soft_ignores_alpha():
    rng = random.Random(5)
    for _ in range(30):
        cs, cfg, tables, ctx = random_instance(rng)
        a = soft_rerank(cs, cs.original_order(), RerankConfig(0.0, cfg.properties, cfg.k, "soft"), tables, ctx)
        b = soft_rerank(cs, cs.original_order(), RerankConfig(1.0, cfg.properties, cfg.k, "soft"), tables, ctx)
        assert a.items == b.items


def test_path_tie_break_prefers_score_then_serialization():
    cs, tables, types = make_cs({"p": (1.0, [(0.5, 0, "a", 0.2), (0.5, 0, "a", 0.6)])})
    ctx = EtdContext(frozenset(types), 10)
    out = soft_rerank(cs, ["p"], RerankConfig(properties={RECENCY}, mode="soft"), tables, ctx)
    assert out.items[0].path.score == 0.6


def test_weighted_hand_example():
    cs, tables, types = make_cs({"A": (0.9, [(0.1, 0, "a", 1.0)]), "B": (0.8, [(0.9, 0, "a", 1.0)])})
    ctx = EtdContext(frozenset(types), 1)
    out = weighted_rerank(cs, RerankConfig(0.5, {RECENCY}, 1), tables, ctx, audit=True)
    assert out.products == ["B"]
    assert dict(out.audit[0]) == pytest.approx({"A": 0.5, "B": 0.85})


def test_weighted_diversity_covers_all_types():
    spec = {f"p{i}": (1.0 - i / 10, [(0.0, 0.0, "a", 0.9)] + ([(0.0, 0.0, f"t{i % 4}", 0.1)] if i < 4 else []))
            for i in range(8)}
    spec["p0"] = (1.0, [(0, 0, "t0", 1.0)])
    cs, tables, _ = make_cs(spec)
    ctx = EtdContext(frozenset({"t0", "t1", "t2", "t3"}), 4)
    out = weighted_rerank(cs, RerankConfig(1.0, {DIVERSITY}, 4), tables, ctx)
    assert etd(out.types, ctx) == 1.0


def test_weighted_short_list_warns():
    cs, tables, types = make_cs({"A": (0.9, [(0.1, 0, "a", 1.0)])})
    out = weighted_rerank(cs, RerankConfig(0.5, {RECENCY}, 3), tables, EtdContext(frozenset(types), 3))
    assert len(out) == 1 and out.warnings


def test_alpha_zero_matches_original_order():
    rng = random.Random(11)
    for _ in range(200):
        cs, cfg, tables, ctx = random_instance(rng)
        out = weighted_rerank(cs, RerankConfig(0.0, cfg.properties, cfg.k), tables, ctx)
        assert out.products == cs.original_order()[: cfg.k]


def test_relevance_ties_resolved_by_product_id():
    cs, tables, types = make_cs({"B": (0.5, [(0, 0, "a", 1.0)]), "A": (0.5, [(0, 0, "a", 1.0)])})
    out = weighted_rerank(cs, RerankConfig(0.0, {RECENCY}, 2), tables, EtdContext(frozenset(types), 2))
    assert out.products == ["A", "B"]


def test_brute_force_alpha_zero_sums_top_relevances():
    cs, tables, types = make_cs({f"p{i}": (r, [(0.3, 0.3, "a", 1.0)]) for i, r in enumerate([0.1, 0.9, 0.5, 0.7])})
    cfg = RerankConfig(0.0, {RECENCY}, 2)
    ctx = EtdContext(frozenset(types), 2)
    out = brute_force_rerank(cs, cfg, tables, ctx)
    assert explained_objective(out, cfg, tables, ctx) == pytest.approx(1.6)
    assert out.products == ["p1", "p3"]


def test_brute_force_guard():
    cs, tables, types = make_cs({f"p{i}": (0.5, [(0, 0, "a", 1.0)]) for i in range(13)})
    with pytest.raises(ConfigError, match="brute force"):
        brute_force_rerank(cs, RerankConfig(0.5, {RECENCY}, 2), tables, EtdContext(frozenset(types), 2))
    with pytest.raises(ConfigError):
        brute_force_rerank(cs, RerankConfig(0.5, {RECENCY}, 6), tables, EtdContext(frozenset(types), 6))


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32))
def test_brute_force_matches_exhaustive(seed):
    cs, cfg, tables, ctx = random_instance(random.Random(seed), max_candidates=5, max_k=3)
    bf = explained_objective(brute_force_rerank(cs, cfg, tables, ctx), cfg, tables, ctx)
    assert bf == pytest.approx(exhaustive(cs, cfg, tables, ctx), rel=1e-12, abs=1e-12)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32))
def test_greedy_exact_without_diversity(seed):
    cs, cfg, tables, ctx = random_instance(random.Random(seed))
    cfg = RerankConfig(cfg.alpha, cfg.properties - {DIVERSITY} or {RECENCY}, cfg.k)
    greedy = explained_objective(weighted_rerank(cs, cfg, tables, ctx), cfg, tables, ctx)
    bf = explained_objective(brute_force_rerank(cs, cfg, tables, ctx), cfg, tables, ctx)
    assert greedy == pytest.approx(bf, rel=1e-12, abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32))
def test_greedy_within_half_of_optimum(seed):
    # per-product path choice makes this a matroid-constrained problem, where
    # greedy guarantees 1/2 of the optimum
    cs, cfg, tables, ctx = random_instance(random.Random(seed))
    greedy = explained_objective(weighted_rerank(cs, cfg, tables, ctx), cfg, tables, ctx)
    bf = explained_objective(brute_force_rerank(cs, cfg, tables, ctx), cfg, tables, ctx)
    assert greedy <= bf + 1e-12
    assert greedy >= 0.5 * bf - 1e-9


def test_greedy_can_fall_below_one_minus_inverse_e():
    # the best path of p01 repeats p00's only type; greedy takes it first
    cs, tables, _ = make_cs({
        "p00": (0.806, [(0, 0, "t0", 0.5)]),
        "p01": (0.89, [(0, 0, "t0", 0.18), (0, 0, "t1", 0.02)]),
    })
    cfg = RerankConfig(1.0, {DIVERSITY}, 2)
    ctx = EtdContext(frozenset({"t0", "t1", "t2"}), 2)
    greedy = explained_objective(weighted_rerank(cs, cfg, tables, ctx), cfg, tables, ctx)
    bf = explained_objective(brute_force_rerank(cs, cfg, tables, ctx), cfg, tables, ctx)
    assert (greedy, bf) == (0.5, 1.0)
    assert greedy < (1 - 1 / math.e) * bf


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32))
def test_audit_chosen_score_dominates(seed):
    cs, cfg, tables, ctx = random_instance(random.Random(seed))
    out = weighted_rerank(cs, cfg, tables, ctx, audit=True)
    assert len(out.audit) == len(out)
    for step, item in zip(out.audit, out):
        assert item.score == max(s for _, s in step)
        assert dict(step)[item.product] == item.score


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from(["soft", "weighted"]))
def test_rerank_is_deterministic_and_well_formed(seed, mode):
    cs, cfg, tables, ctx = random_instance(random.Random(seed))
    cfg = RerankConfig(cfg.alpha, cfg.properties, cfg.k, mode)
    a = rerank(cs, cfg, tables, ctx)
    b = rerank(cs, cfg, tables, ctx)
    assert a.items == b.items
    assert len(a) == min(cfg.k, len(cs))
    assert len(set(a.products)) == len(a)
    for it in a:
        assert it.path in cs[it.product].paths


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from([RECENCY, POPULARITY]))
def test_soft_improves_item_property_over_baseline(seed, prop):
    cs, cfg, tables, ctx = random_instance(random.Random(seed))
    cfg = RerankConfig(0.0, {prop}, cfg.k, "soft")
    soft = rerank(cs, cfg, tables, ctx)
    base = baseline_list(cs, cfg.k, tables)
    assert soft.products == base.products
    attr = "lir" if prop == RECENCY else "sep"
    assert sum(getattr(i, attr) for i in soft) >= sum(getattr(i, attr) for i in base)


def test_labels():
    assert RerankConfig(0.1, {RECENCY}).label == "weighted-recency-a0.1"
    assert RerankConfig(0.1, {POPULARITY, RECENCY}, mode="soft").label == "soft-recency+popularity"
