"""Command-line entry point: ``xrerank <subcommand> ...``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 internal
invariant violation.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path as FsPath

from .candidates import generate_candidates, read_paths_tsv, write_paths_tsv
from .config import RunConfig, load_config
from .data import FixtureSpec, SplitSpec, chronological_split, write_fixture
from .errors import InvariantError, XRerankError
from .evaluation import GroupSpec, build_report
from .io import atomic_write, read_entity_types, read_graph, read_groups, read_interactions, require_file, write_interactions
from .pipeline import read_reranked_tsv, run_pipeline, train_graph, write_reranked_tsv
from .props import EtdContext, compute_lir_table, compute_sep_table, read_lir_tsv, read_sep_tsv, write_lir_tsv, write_sep_tsv
from .rerank import PropertyTables, RerankConfig, parse_properties, rerank

log = logging.getLogger("xrerank")


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _cmd_fixtures(args) -> int:
    paths = write_fixture(args.out, FixtureSpec(n_users=args.users, n_products=args.products, seed=args.seed))
    for p in paths.values():
        print(p)
    return 0


def _cmd_split(args) -> int:
    types = None
    if args.entities:
        types = read_entity_types(args.entities)
    log_ = read_interactions(args.interactions, types)
    warnings: list[str] = []
    parts = chronological_split(log_, SplitSpec(args.train, args.valid, args.test), warnings)
    out = FsPath(args.out)
    for name, part in zip(("train", "valid", "test"), parts):
        with atomic_write(out / f"{name}.tsv") as fh:
            write_interactions(part, fh)
    for w in warnings:
        log.warning(w)
    print(json.dumps({name: part.n_events() for name, part in zip(("train", "valid", "test"), parts)}))
    return 0


def _load_train_graph(args):
    graph = read_graph(args.kg, args.entities)
    train = read_interactions(args.interactions, graph.entities)
    g, dropped = train_graph(graph, train, args.interaction_relation)
    if dropped:
        log.warning("dropped %d user-product triples from the KG file", dropped)
    return g, train


def _cmd_precompute(args) -> int:
    graph, train = _load_train_graph(args)
    out = FsPath(args.out)
    with atomic_write(out / "lir.tsv") as fh:
        write_lir_tsv(compute_lir_table(train, args.beta_lir), fh)
    with atomic_write(out / "sep.tsv") as fh:
        write_sep_tsv(compute_sep_table(graph, args.beta_sep), fh)
    return 0


def _cmd_generate(args) -> int:
    graph, train = _load_train_graph(args)
    sets = generate_candidates(graph, train, max_edges=args.max_edges,
                               per_product_cap=args.per_product_cap, candidate_cap=args.candidate_cap)
    with atomic_write(FsPath(args.out) / "paths.tsv") as fh:
        write_paths_tsv(sets, fh)
    return 0


def _read_paths(path, graph=None):
    with open(require_file(path, "paths"), encoding="utf-8") as fh:
        return read_paths_tsv(fh, graph)


def _cmd_rerank(args) -> int:
    graph = None
    if args.kg and args.entities and args.interactions:
        graph, _ = _load_train_graph(args)
    sets = _read_paths(args.paths, graph)
    with open(require_file(args.lir, "lir"), encoding="utf-8") as fh:
        lir = read_lir_tsv(fh)
    with open(require_file(args.sep, "sep"), encoding="utf-8") as fh:
        sep = read_sep_tsv(fh)
    cfg = RerankConfig(alpha=args.alpha, properties=parse_properties(args.properties), k=args.k, mode=args.mode)
    ctx = EtdContext(frozenset(sp.path.type for cs in sets.values() for sp in cs.all_paths()), args.k)
    tables = PropertyTables(lir, sep)
    lists = {u: rerank(cs, cfg, tables, ctx) for u, cs in sets.items()}
    with atomic_write(FsPath(args.out) / "reranked.tsv") as fh:
        write_reranked_tsv(lists, fh)
    return 0


def _cmd_evaluate(args) -> int:
    with open(require_file(args.reranked, "reranked"), encoding="utf-8") as fh:
        lists = read_reranked_tsv(fh)
    test = read_interactions(args.test)
    sets = _read_paths(args.paths)
    ctx = EtdContext(frozenset(sp.path.type for cs in sets.values() for sp in cs.all_paths()), args.k)
    groups = None
    if args.groups:
        order = tuple(g for g in (args.group_order or "").split(",") if g) or None
        groups = GroupSpec(args.group_attribute, read_groups(args.groups), order)
    report = build_report(lists, test, groups, ctx, FsPath(args.reranked).parent.name or "evaluation", {"k": args.k})
    out = FsPath(args.out)
    with atomic_write(out / "report.json") as fh:
        fh.write(report.to_json())
    with atomic_write(out / "report.csv") as fh:
        fh.write(report.to_csv())
    print(json.dumps(report.means, sort_keys=True))
    return 0


def _cmd_pipeline(args) -> int:
    overrides = {f.name: getattr(args, f.name, None) for f in fields(RunConfig) if f.name != "split"}
    overrides.update({k: getattr(args, k) for k in ("train", "valid", "test")})
    cfg = load_config(args.config, overrides)
    result = run_pipeline(cfg)
    for name, rep in result.reports.items():
        line = "  ".join(f"{m}={rep.means[m]:.4f}" for m in ("ndcg", "lir", "sep", "etd", "eq"))
        print(f"{name:40s} {line}")
    print(f"artifacts written to {result.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xrerank", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fixtures", help="write the synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=FixtureSpec.seed)
    p.add_argument("--users", type=int, default=FixtureSpec.n_users)
    p.add_argument("--products", type=int, default=FixtureSpec.n_products)
    p.set_defaults(func=_cmd_fixtures)

    p = sub.add_parser("split", help="chronological per-user train/valid/test split")
    p.add_argument("--interactions", required=True)
    p.add_argument("--entities")
    p.add_argument("--out", required=True)
    p.add_argument("--train", type=float, default=SplitSpec.train)
    p.add_argument("--valid", type=float, default=SplitSpec.valid)
    p.add_argument("--test", type=float, default=SplitSpec.test)
    p.set_defaults(func=_cmd_split)

    def graph_args(p, required=True):
        p.add_argument("--kg", required=required)
        p.add_argument("--entities", required=required)
        p.add_argument("--interactions", required=required, help="training interactions")
        p.add_argument("--interaction-relation", default=RunConfig.interaction_relation)

    p = sub.add_parser("precompute", help="write lir.tsv and sep.tsv")
    graph_args(p)
    p.add_argument("--beta-lir", type=float, default=RunConfig.beta_lir)
    p.add_argument("--beta-sep", type=float, default=RunConfig.beta_sep)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_precompute)

    p = sub.add_parser("generate", help="enumerate candidate paths into paths.tsv")
    graph_args(p)
    p.add_argument("--max-edges", type=int, default=RunConfig.max_edges)
    p.add_argument("--per-product-cap", type=int, default=RunConfig.per_product_cap)
    p.add_argument("--candidate-cap", type=int, default=RunConfig.candidate_cap)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("rerank", help="re-rank paths.tsv into reranked.tsv")
    graph_args(p, required=False)
    p.add_argument("--paths", required=True)
    p.add_argument("--lir", required=True)
    p.add_argument("--sep", required=True)
    p.add_argument("--mode", default="weighted", choices=("soft", "weighted"))
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--properties", default="recency")
    p.add_argument("--k", type=int, default=RunConfig.k)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_rerank)

    p = sub.add_parser("evaluate", help="score reranked.tsv against the test split")
    p.add_argument("--reranked", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--paths", required=True, help="candidate paths, used for the set of path types")
    p.add_argument("--k", type=int, default=RunConfig.k)
    p.add_argument("--groups")
    p.add_argument("--group-order")
    p.add_argument("--group-attribute", default=RunConfig.group_attribute)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("pipeline", help="run every stage from a config file")
    p.add_argument("--config")
    for f in fields(RunConfig):
        if f.name != "split":
            p.add_argument(_flag(f.name), dest=f.name, default=None)
    for name in ("train", "valid", "test"):
        p.add_argument(_flag(name), dest=name, default=None)
    p.set_defaults(func=_cmd_pipeline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except XRerankError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return InvariantError.exit_code


if __name__ == "__main__":
    sys.exit(main())
