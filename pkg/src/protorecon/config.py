"""Pipeline configuration: bundled YAML defaults, user files, env and CLI overrides."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import yaml

from .evolve import EvoConfig
from .parsimony import BeamConfig
from .ranker import RankerConfig
from .rules import PathwayConfig

VARIANTS = ("ranked-prob-evo", "ranked-prob-evo-ext", "ranked-path-prob", "m-ranked", "m-unranked")
REPORT_FORMATS = ("tsv", "json", "summary")
ENV_PREFIX = "PROTOREC_"

# flag name -> dotted config key; environment variables mirror these as
# PROTOREC_<FLAG> with dashes turned into underscores.
OVERRIDES = {
    "variant": "variant",
    "dataset": "paths.dataset",
    "rules": "paths.rules",
    "cues": "paths.cues",
    "constraints": "paths.constraints",
    "features": "paths.features",
    "seed": "seed",
    "jobs": "jobs",
    "report-format": "report_format",
    "beam-width": "beam.beam_width",
    "candidate-cap": "beam.candidate_cap",
    "rerank-top": "beam.rerank_top",
    "top-k": "pathway.top_k",
    "depth": "pathway.depth",
    "cap": "pathway.cap",
    "pool-size": "evo.pool_size",
    "max-rounds": "evo.max_rounds",
    "theta-div": "evo.theta_div",
    "patience": "evo.patience",
    "psi-scheme": "evo.psi_scheme",
}


class ConfigError(ValueError):
    pass


@dataclass
class Paths:
    dataset: str | None = None
    features: str | None = None
    rules: list[str] = field(default_factory=list)
    cues: str | None = None
    constraints: str | None = None


@dataclass
class PipelineConfig:
    variant: str = "ranked-prob-evo"
    seed: int = 0
    jobs: int = 1
    languages: tuple[str, ...] = ("romanian", "french", "italian", "spanish", "portuguese")
    proto_language: str = "latin"
    gold_column: str | None = "latin"
    phylogeny: str = "((french, spanish), portuguese, italian, romanian)"
    include_absent: bool = False
    pre_aligned: bool = False
    ext_all_languages: bool = False
    report_format: str = "tsv"
    paths: Paths = field(default_factory=Paths)
    beam: BeamConfig = field(default_factory=BeamConfig)
    ranker: RankerConfig = field(default_factory=RankerConfig)
    pathway: PathwayConfig = field(default_factory=PathwayConfig)
    evo: EvoConfig = field(default_factory=EvoConfig)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {', '.join(VARIANTS)}")
        if self.report_format not in REPORT_FORMATS:
            raise ConfigError(f"unknown report format {self.report_format!r}")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["languages"] = list(self.languages)
        d["ranker"]["invalid_sequences"] = list(self.ranker.invalid_sequences)
        d["evo"]["vowel_set"] = list(self.evo.vowel_set)
        return d

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PipelineConfig":
        data = dict(data)
        nested = {"paths": Paths, "beam": BeamConfig, "ranker": RankerConfig,
                  "pathway": PathwayConfig, "evo": EvoConfig}
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        try:
            for key, kind in nested.items():
                section = dict(data.get(key) or {})
                bad = set(section) - {f.name for f in fields(kind)}
                if bad:
                    raise ConfigError(f"unknown keys in {key}: {', '.join(sorted(bad))}")
                for tup in ("invalid_sequences", "vowel_set"):
                    if tup in section:
                        section[tup] = tuple(section[tup])
                if key == "paths" and isinstance(section.get("rules"), str):
                    section["rules"] = [section["rules"]]
                if key == "evo":
                    section["seed"] = int(data.get("seed", 0))
                data[key] = kind(**section)
            if "languages" in data:
                data["languages"] = tuple(data["languages"])
            return cls(**data)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True, allow_unicode=True)


def default_dict() -> dict[str, Any]:
    text = resources.files("protorecon.data").joinpath("defaults.yaml").read_text(encoding="utf-8")
    return yaml.safe_load(text)


def _merge(base: dict, extra: Mapping) -> dict:
    out = dict(base)
    for k, v in extra.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def set_dotted(d: dict, key: str, value: Any) -> None:
    *head, last = key.split(".")
    for part in head:
        d = d.setdefault(part, {})
    d[last] = value


def env_overrides(environ: Mapping[str, str] | None = None) -> dict[str, Any]:
    """Collect ``PROTOREC_*`` variables as a nested override dict.

    Values are parsed as YAML scalars so numbers and booleans keep their type;
    ``PROTOREC_RULES`` takes a path list separated by ``os.pathsep``.
    """
    environ = os.environ if environ is None else environ
    out: dict[str, Any] = {}
    for flag, key in OVERRIDES.items():
        name = ENV_PREFIX + flag.upper().replace("-", "_")
        if name not in environ:
            continue
        raw = environ[name]
        if flag == "rules":
            value: Any = [p for p in raw.split(os.pathsep) if p]
        elif key.startswith("paths."):
            value = raw
        else:
            value = yaml.safe_load(raw)
        set_dotted(out, key, value)
    return out


def load_config(
    path: str | Path | None = None,
    overrides: Mapping[str, Any] | None = None,
    environ: Mapping[str, str] | None = None,
) -> PipelineConfig:
    """Defaults, then the YAML file at ``path``, then env, then ``overrides``."""
    data = default_dict()
    if path is not None:
        try:
            user = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(user, Mapping):
            raise ConfigError(f"config {path} is not a mapping")
        data = _merge(data, user)
    data = _merge(data, env_overrides(environ))
    if overrides:
        data = _merge(data, overrides)
    return PipelineConfig.from_dict(data)
