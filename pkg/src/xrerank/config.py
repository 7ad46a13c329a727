"""Run configuration: flat ``key = value`` files, overridable from the command line."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path as FsPath
from typing import Any, Mapping

from .candidates import DEFAULT_CANDIDATE_CAP, DEFAULT_MAX_EDGES, DEFAULT_PER_PRODUCT_CAP
from .data import SplitSpec
from .errors import ConfigError
from .props import DEFAULT_BETA
from .rerank import MODES, RerankConfig, parse_properties

_PATH_KEYS = ("kg", "entities", "interactions", "groups", "paths", "out")


@dataclass(frozen=True)
class RunConfig:
    kg: FsPath | None = None
    entities: FsPath | None = None
    interactions: FsPath | None = None
    groups: FsPath | None = None
    paths: FsPath | None = None
    out: FsPath = FsPath("run")
    # ';' separates settings, ',' separates properties within one setting
    properties: tuple[frozenset[str], ...] = (frozenset({"recency"}),)
    alpha: tuple[float, ...] = (0.1,)
    mode: tuple[str, ...] = ("weighted",)
    k: int = 10
    beta_lir: float = DEFAULT_BETA
    beta_sep: float = DEFAULT_BETA
    seed: int = 0
    max_edges: int = DEFAULT_MAX_EDGES
    per_product_cap: int = DEFAULT_PER_PRODUCT_CAP
    candidate_cap: int = DEFAULT_CANDIDATE_CAP
    interaction_relation: str = "interacted"
    group_attribute: str = "gender"
    group_order: tuple[str, ...] = ()
    split: SplitSpec = field(default_factory=SplitSpec)

    def settings(self) -> list[RerankConfig]:
        """Every requested (mode, properties, alpha); soft mode ignores alpha so runs once per set."""
        out, seen = [], set()
        for mode in self.mode:
            for props in self.properties:
                for a in self.alpha if mode == "weighted" else (0.0,):
                    cfg = RerankConfig(alpha=a, properties=props, k=self.k, mode=mode)
                    if cfg.label not in seen:
                        seen.add(cfg.label)
                        out.append(cfg)
        return out

    def validate_files(self) -> None:
        for key in ("kg", "entities", "interactions"):
            p = getattr(self, key)
            if p is None:
                raise ConfigError(f"missing required setting {key!r}")
            if not FsPath(p).is_file():
                raise ConfigError(f"{key} file not found: {p}")
        for key in ("groups", "paths"):
            p = getattr(self, key)
            if p is not None and not FsPath(p).is_file():
                raise ConfigError(f"{key} file not found: {p}")

    def echo(self) -> dict[str, Any]:
        """JSON-friendly view used in reports (file paths reduced to names)."""
        doc = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name in _PATH_KEYS:
                v = None if v is None else FsPath(v).name
            elif f.name == "properties":
                v = [sorted(s) for s in v]
            elif isinstance(v, tuple):
                v = list(v)
            elif isinstance(v, SplitSpec):
                v = dataclasses.asdict(v)
            doc[f.name] = v
        return doc


def normalize_key(key: str) -> str:
    return key.strip().lower().replace("-", "_")


def read_config_file(path) -> dict[str, str]:
    p = FsPath(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    out = {}
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{p}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        out[normalize_key(key)] = value.strip()
    return out


def _num(kind, key: str, raw: str, lo=None, hi=None):
    try:
        v = kind(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind.__name__}") from None
    if (lo is not None and v < lo) or (hi is not None and v > hi):
        raise ConfigError(f"{key}: {v} outside [{lo}, {hi}]")
    return v


def build_config(values: Mapping[str, Any], base_dir=None) -> RunConfig:
    """Create a :class:`RunConfig` from string values; relative paths resolve against ``base_dir``."""
    known = {f.name for f in fields(RunConfig)} | {"train", "valid", "test"}
    kwargs: dict[str, Any] = {}
    split = {}
    for raw_key, raw in values.items():
        if raw is None:
            continue
        key = normalize_key(raw_key)
        if key not in known or key == "split":
            raise ConfigError(f"unknown setting {raw_key!r}")
        raw = str(raw).strip()
        if key in _PATH_KEYS:
            p = FsPath(raw)
            if base_dir is not None and not p.is_absolute():
                p = FsPath(base_dir) / p
            kwargs[key] = p
        elif key == "properties":
            kwargs[key] = tuple(parse_properties(s) for s in raw.split(";") if s.strip())
        elif key == "alpha":
            kwargs[key] = tuple(_num(float, key, a, 0.0, 1.0) for a in raw.split(",") if a.strip())
        elif key == "mode":
            modes = tuple(m.strip() for m in raw.split(",") if m.strip())
            for m in modes:
                if m not in MODES:
                    raise ConfigError(f"mode must be one of {MODES}, got {m!r}")
            kwargs[key] = modes
        elif key in ("beta_lir", "beta_sep"):
            kwargs[key] = _num(float, key, raw, 0.0, 1.0)
        elif key in ("k", "max_edges", "per_product_cap", "candidate_cap"):
            kwargs[key] = _num(int, key, raw, 3 if key == "max_edges" else 1)
        elif key == "seed":
            kwargs[key] = _num(int, key, raw)
        elif key == "group_order":
            kwargs[key] = tuple(g.strip() for g in raw.split(",") if g.strip())
        elif key in ("train", "valid", "test"):
            split[key] = _num(float, key, raw, 0.0, 1.0)
        else:
            kwargs[key] = raw
    if split:
        kwargs["split"] = SplitSpec(**{**dataclasses.asdict(SplitSpec()), **split})
    for key in ("properties", "alpha", "mode"):
        if key in kwargs and not kwargs[key]:
            raise ConfigError(f"{key} must not be empty")
    if kwargs.get("group_order") and len(kwargs["group_order"]) != 2:
        raise ConfigError("group_order needs exactly two labels")
    return RunConfig(**kwargs)


def load_config(path=None, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    """Config file values, then non-None ``overrides`` (paths there resolve against the cwd)."""
    values: dict[str, Any] = {}
    base = None
    if path is not None:
        base = FsPath(path).parent
        file_values = read_config_file(path)
        for key in _PATH_KEYS:
            if key in file_values:
                p = FsPath(file_values[key])
                file_values[key] = str(p if p.is_absolute() else base / p)
        values.update(file_values)
    for key, v in (overrides or {}).items():
        if v is not None:
            values[normalize_key(key)] = v
    return build_config(values)
