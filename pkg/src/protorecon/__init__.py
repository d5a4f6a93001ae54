"""Protoform reconstruction from cognate sets: parsimony, plausibility ranking,
inverse sound-change pathways and evolutionary refinement."""

from .config import ConfigError, PipelineConfig, load_config
from .ingest import CognateSet, parse_dataset
from .phono import FeatureTable, tokenize
from .pipeline import RunManifest, run_pipeline, run_rule_sweep, run_synthetic

__version__ = "0.1.0"

__all__ = [
    "CognateSet",
    "ConfigError",
    "FeatureTable",
    "PipelineConfig",
    "RunManifest",
    "load_config",
    "parse_dataset",
    "run_pipeline",
    "run_rule_sweep",
    "run_synthetic",
    "tokenize",
]
