"""End-to-end run: split, precompute, candidates, re-rank, evaluate."""
from __future__ import annotations

import contextlib
import json
import logging
import os
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Iterator, Mapping

from .candidates import CandidateSet, ScoredPath, generate_candidates, read_paths_tsv, write_paths_tsv
from .config import RunConfig
from .data import chronological_split
from .errors import DataError, InvariantError, XRerankError
from .evaluation import METRICS, EvaluationReport, GroupSpec, build_report
from .io import atomic_write, file_sha256, iter_tsv, read_graph, read_groups, read_interactions, write_interactions
from .kg import PRODUCT, USER, InteractionLog, KnowledgeGraph, Path
from .props import EtdContext, compute_lir_table, compute_sep_table, write_lir_tsv, write_sep_tsv
from .rerank import ExplainedItem, ExplainedList, PropertyTables, RerankConfig, baseline_list, rerank

log = logging.getLogger(__name__)

BASELINE = "baseline"


@contextlib.contextmanager
def stage(name: str) -> Iterator[None]:
    try:
        yield
    except XRerankError as exc:
        raise type(exc)(f"stage {name}: {exc}") from exc
    except Exception as exc:
        raise InvariantError(f"stage {name}: {type(exc).__name__}: {exc}") from exc


@dataclass
class PreparedData:
    graph: KnowledgeGraph
    train: InteractionLog
    valid: InteractionLog
    test: InteractionLog
    tables: PropertyTables
    candidates: dict[str, CandidateSet]
    ctx: EtdContext
    groups: GroupSpec | None
    warnings: list[str] = field(default_factory=list)
    stripped_triples: int = 0


@dataclass
class PipelineResult:
    reports: dict[str, EvaluationReport]
    lists: dict[str, dict[str, ExplainedList]]
    data: PreparedData
    out: FsPath

    @property
    def baseline(self) -> EvaluationReport:
        return self.reports[BASELINE]


def train_graph(graph: KnowledgeGraph, train: InteractionLog, relation: str) -> tuple[KnowledgeGraph, int]:
    """Graph with user-product triples replaced by the training interactions.

    User-product triples shipped inside the KG file are dropped so that no
    held-out interaction can reach degrees or paths. Returns the graph and the
    number of dropped triples.
    """
    types = graph.entities
    kept, dropped = [], 0
    for h, r, t in graph.iter_triples():
        if {types[h], types[t]} == {USER, PRODUCT}:
            dropped += 1
            continue
        kept.append((h, r, t))
    return KnowledgeGraph(types, kept + [(u, relation, p) for u, p, _ in train.records()]), dropped


def prepare(cfg: RunConfig) -> PreparedData:
    with stage("load"):
        cfg.validate_files()
        graph = read_graph(cfg.kg, cfg.entities)
        log_ = read_interactions(cfg.interactions, graph.entities)
        groups = None
        if cfg.groups is not None:
            groups = GroupSpec(cfg.group_attribute, read_groups(cfg.groups), cfg.group_order or None)
    warnings: list[str] = []
    with stage("split"):
        train, valid, test = chronological_split(log_, cfg.split, warnings)
    with stage("precompute"):
        g_train, dropped = train_graph(graph, train, cfg.interaction_relation)
        if dropped:
            warnings.append(f"dropped {dropped} user-product triples from the KG file")
        lir = compute_lir_table(train, cfg.beta_lir)
        sep = compute_sep_table(g_train, cfg.beta_sep)
        leaked = set(lir.values) - train.pairs()
        if leaked:
            raise InvariantError(f"recency table holds {len(leaked)} pairs outside the training split")
    with stage("candidates"):
        if cfg.paths is not None:
            with open(cfg.paths, encoding="utf-8") as fh:
                candidates = read_paths_tsv(fh, g_train)
            for user, cs in candidates.items():
                seen = train.products_of(user) & set(cs.candidates)
                if seen:
                    raise DataError(f"paths.tsv recommends training products to {user}: {sorted(seen)[:5]}")
        else:
            candidates = generate_candidates(
                g_train, train, max_edges=cfg.max_edges,
                per_product_cap=cfg.per_product_cap, candidate_cap=cfg.candidate_cap,
            )
        for cs in candidates.values():
            warnings.extend(cs.warnings)
        all_types = frozenset(sp.path.type for cs in candidates.values() for sp in cs.all_paths())
        if not all_types:
            raise DataError("no candidate paths for any user")
        ctx = EtdContext(all_types, cfg.k)
    return PreparedData(g_train, train, valid, test, PropertyTables(lir, sep), candidates, ctx, groups, warnings, dropped)


def rerank_all(data: PreparedData, rcfg: RerankConfig) -> dict[str, ExplainedList]:
    return {u: rerank(cs, rcfg, data.tables, data.ctx) for u, cs in sorted(data.candidates.items())}


def baseline_all(data: PreparedData, k: int) -> dict[str, ExplainedList]:
    return {u: baseline_list(cs, k, data.tables) for u, cs in sorted(data.candidates.items())}


def write_reranked_tsv(lists: Mapping[str, ExplainedList], fh) -> None:
    for user in sorted(lists):
        for rank, it in enumerate(lists[user], start=1):
            fh.write(
                f"{user}\t{rank}\t{it.product}\t{it.relevance!r}\t{it.lir!r}\t{it.sep!r}\t{it.type}\t{it.path.path.text}\n"
            )


def read_reranked_tsv(fh) -> dict[str, ExplainedList]:
    rows: dict[str, list] = {}
    for user, rank, product, rel, lir, sep, _, text, lineno in iter_tsv(fh, 8):
        try:
            item = ExplainedItem(product, ScoredPath(Path.parse(text), float("nan")), float(rel), float(lir), float(sep), float("nan"))
            rows.setdefault(user, []).append((int(rank), item))
        except (ValueError, XRerankError) as exc:
            raise DataError(f"line {lineno}: {exc}") from None
    return {u: ExplainedList(u, [it for _, it in sorted(r, key=lambda x: x[0])]) for u, r in sorted(rows.items())}


def _metadata(cfg: RunConfig) -> dict:
    hashes = {}
    for key in ("kg", "entities", "interactions", "groups", "paths"):
        p = getattr(cfg, key)
        if p is not None:
            hashes[key] = file_sha256(p)
    return {"dataset_sha256": hashes}


def _write_report(report: EvaluationReport, folder: FsPath) -> None:
    with atomic_write(folder / "report.json") as fh:
        fh.write(report.to_json())
    with atomic_write(folder / "report.csv") as fh:
        fh.write(report.to_csv())


def summarize(reports: Mapping[str, EvaluationReport]) -> dict:
    """Global means per setting and relative change against the baseline."""
    base = reports[BASELINE].means
    doc = {}
    for name, rep in reports.items():
        gains = {}
        for m in METRICS:
            gains[m] = None if base[m] == 0 else (rep.means[m] - base[m]) / base[m]
        doc[name] = {"global": rep.means, "relative_change": gains}
    return doc


def run_pipeline(cfg: RunConfig) -> PipelineResult:
    """Run every configured setting plus the baseline and write all artifacts to ``cfg.out``.

    Files are staged in a scratch directory beside ``cfg.out`` and moved in
    only after every stage succeeded.
    """
    out = FsPath(cfg.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    staging = FsPath(tempfile.mkdtemp(prefix=f".{out.name}.staging-", dir=out.parent))
    try:
        data = prepare(cfg)
        meta = _metadata(cfg)
        echo = cfg.echo()
        with stage("write-inputs"):
            for name, part in (("train", data.train), ("valid", data.valid), ("test", data.test)):
                with atomic_write(staging / f"{name}.tsv") as fh:
                    write_interactions(part, fh)
            with atomic_write(staging / "lir.tsv") as fh:
                write_lir_tsv(data.tables.lir, fh)
            with atomic_write(staging / "sep.tsv") as fh:
                write_sep_tsv(data.tables.sep, fh)
            with atomic_write(staging / "paths.tsv") as fh:
                write_paths_tsv(data.candidates, fh)

        reports: dict[str, EvaluationReport] = {}
        lists: dict[str, dict[str, ExplainedList]] = {}
        with stage("baseline"):
            lists[BASELINE] = baseline_all(data, cfg.k)
            reports[BASELINE] = build_report(
                lists[BASELINE], data.test, data.groups, data.ctx, BASELINE,
                {**echo, "setting": {"mode": "baseline", "k": cfg.k}}, meta,
            )
        for rcfg in cfg.settings():
            with stage(f"rerank {rcfg.label}"):
                lists[rcfg.label] = rerank_all(data, rcfg)
            with stage(f"evaluate {rcfg.label}"):
                setting = {"mode": rcfg.mode, "alpha": rcfg.alpha, "properties": sorted(rcfg.properties), "k": rcfg.k}
                reports[rcfg.label] = build_report(
                    lists[rcfg.label], data.test, data.groups, data.ctx, rcfg.label, {**echo, "setting": setting}, meta
                )

        with stage("write-reports"):
            for name, rep in reports.items():
                folder = staging / name
                folder.mkdir()
                with atomic_write(folder / "reranked.tsv") as fh:
                    write_reranked_tsv(lists[name], fh)
                _write_report(rep, folder)
            with atomic_write(staging / "summary.json") as fh:
                fh.write(json.dumps({"settings": summarize(reports), "warnings": data.warnings}, indent=2, sort_keys=True) + "\n")
            out.mkdir(parents=True, exist_ok=True)
            for item in sorted(staging.iterdir()):
                target = out / item.name
                if target.is_dir():
                    shutil.rmtree(target)
                os.replace(item, target)
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    for w in data.warnings[:20]:
        log.warning(w)
    return PipelineResult(reports, lists, data, out)
