"""TSV readers and atomic file writes."""
from __future__ import annotations

import contextlib
import hashlib
import os
import tempfile
from pathlib import Path as FsPath
from typing import Iterator

from .errors import ConfigError, IngestionError
from .kg import InteractionLog, KnowledgeGraph, load_graph


def iter_tsv(fh, width: int) -> Iterator[tuple]:
    """Yield ``(*fields, lineno)``; blank lines and ``#`` comments are skipped."""
    for lineno, line in enumerate(fh, start=1):
        line = line.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) < width:
            raise IngestionError(f"line {lineno}: expected {width} tab-separated fields, got {len(fields)}")
        yield (*[f.strip() for f in fields[:width]], lineno)


def require_file(path, what: str) -> FsPath:
    p = FsPath(path)
    if not p.is_file():
        raise ConfigError(f"{what} file not found: {p}")
    return p


def _with_source(path, fn):
    try:
        return fn()
    except IngestionError as exc:
        raise IngestionError(f"{path}: {exc}") from None


def read_graph(kg_path, entities_path) -> KnowledgeGraph:
    kg_path = require_file(kg_path, "kg")
    entities_path = require_file(entities_path, "entities")
    with open(entities_path, encoding="utf-8") as fh:
        types = _with_source(entities_path, lambda: list(iter_tsv(fh, 2)))
    with open(kg_path, encoding="utf-8") as fh:
        triples = _with_source(kg_path, lambda: list(iter_tsv(fh, 3)))
    return _with_source(kg_path, lambda: load_graph(triples, types))


def read_entity_types(entities_path) -> dict[str, str]:
    entities_path = require_file(entities_path, "entities")
    with open(entities_path, encoding="utf-8") as fh:
        return {e: t for e, t, _ in _with_source(entities_path, lambda: list(iter_tsv(fh, 2)))}


def read_interactions(path, entity_types=None) -> InteractionLog:
    path = require_file(path, "interactions")
    with open(path, encoding="utf-8") as fh:
        rows = _with_source(path, lambda: list(iter_tsv(fh, 3)))
    return _with_source(path, lambda: InteractionLog.from_records(rows, entity_types))


def write_interactions(log: InteractionLog, fh) -> None:
    for user, product, ts in log.records():
        fh.write(f"{user}\t{product}\t{ts}\n")


def read_groups(path) -> dict[str, str]:
    path = require_file(path, "groups")
    with open(path, encoding="utf-8") as fh:
        return {u: g for u, g, _ in _with_source(path, lambda: list(iter_tsv(fh, 2)))}


@contextlib.contextmanager
def atomic_write(path, mode: str = "w"):
    """Write to a temp file in the target directory, then rename over ``path``."""
    path = FsPath(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, mode, encoding=None if "b" in mode else "utf-8", newline=None if "b" in mode else "\n") as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
