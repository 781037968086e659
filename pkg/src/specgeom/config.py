"""Experiment configuration: a YAML mapping with four sections.

    space:    {generator: cantor, n: 2, p: 2, depth: 8}
              {generator: circle, samples: 64}
              {path: matrix.txt}
    support:  {method: multiscale, D: 4, delta1: null}
              {method: qqh, q: 1.585}  |  {method: complete}  |  {path: support.txt}
    spectrum: {kind: base} | {kind: scaled, factor: 2} | {kind: perturb, h: 0.1}
              {path: spectrum.txt}
    analysis: [density, connes, dims, deform-convergence, bounds-check]
    output:   out/
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

ANALYSES = ("density", "connes", "dims", "deform-convergence", "bounds-check")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    space: dict
    support: dict
    spectrum: dict = field(default_factory=lambda: {"kind": "base"})
    analysis: list = field(default_factory=list)
    output: str | None = None
    base_dir: Path = Path(".")

    def resolve(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def echo(self) -> dict:
        return {"space": self.space, "support": self.support, "spectrum": self.spectrum,
                "analysis": list(self.analysis), "output": self.output}


def _number(section, key, value, lo=None, strict=True):
    if isinstance(value, str) and value.strip().lower() in ("inf", "infinity", ".inf"):
        value = math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number, got {value!r}")
    if lo is not None and (value <= lo if strict else value < lo):
        raise ConfigError(f"{section}.{key} must be {'>' if strict else '>='} {lo}, got {value}")
    return value


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    sp = dict(cfg.space or {})
    if "path" in sp:
        if not cfg.resolve(sp["path"]).is_file():
            raise ConfigError(f"space.path {sp['path']!r} does not exist")
    elif sp.get("generator") == "cantor":
        sp["n"] = int(_number("space", "n", sp.get("n"), 1, strict=False))
        sp["p"] = _number("space", "p", sp.get("p"), 1)
        sp["depth"] = int(_number("space", "depth", sp.get("depth"), 1, strict=False))
    elif sp.get("generator") == "circle":
        sp["samples"] = int(_number("space", "samples", sp.get("samples"), 3, strict=False))
    else:
        raise ConfigError("space needs generator: cantor|circle or a path")
    cfg.space = sp

    su = dict(cfg.support or {})
    method = su.get("method", "file" if "path" in su else None)
    if method == "multiscale":
        su["D"] = _number("support", "D", su.get("D", 4.0), 2)
        if su.get("delta1") is not None:
            su["delta1"] = _number("support", "delta1", su["delta1"], 0)
    elif method == "qqh":
        if su.get("q") is not None:
            su["q"] = _number("support", "q", su["q"], 0)
    elif method == "file":
        if not cfg.resolve(su.get("path", "")).is_file():
            raise ConfigError(f"support.path {su.get('path')!r} does not exist")
    elif method != "complete":
        raise ConfigError("support.method must be multiscale, qqh, complete or file")
    su["method"] = method
    cfg.support = su

    rs = dict(cfg.spectrum or {"kind": "base"})
    kind = rs.get("kind", "file" if "path" in rs else "base")
    if kind == "scaled":
        rs["factor"] = _number("spectrum", "factor", rs.get("factor"), 0)
    elif kind == "perturb":
        h = _number("spectrum", "h", rs.get("h"), 0)
        if not h < 1:
            raise ConfigError("spectrum.h must lie in (0, 1)")
    elif kind == "file":
        if not cfg.resolve(rs.get("path", "")).is_file():
            raise ConfigError(f"spectrum.path {rs.get('path')!r} does not exist")
    elif kind != "base":
        raise ConfigError("spectrum.kind must be base, scaled, perturb or file")
    rs["kind"] = kind
    cfg.spectrum = rs

    unknown = [a for a in cfg.analysis if a not in ANALYSES]
    if unknown:
        raise ConfigError(f"unknown analyses {unknown}; choose from {list(ANALYSES)}")
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    extra = set(raw) - {"space", "support", "spectrum", "analysis", "output"}
    if extra:
        raise ConfigError(f"{path}: unknown keys {sorted(extra)}")
    if "space" not in raw or "support" not in raw:
        raise ConfigError(f"{path}: space and support sections are required")
    analysis = raw.get("analysis") or []
    if isinstance(analysis, str):
        analysis = [analysis]
    cfg = ExperimentConfig(raw["space"], raw["support"], raw.get("spectrum") or {"kind": "base"},
                           list(analysis), raw.get("output"), path.parent)
    return validate(cfg)
