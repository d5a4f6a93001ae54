import pytest

from protorecon.config import load_config
from protorecon.phono import FeatureTable


@pytest.fixture(scope="session")
def table():
    return FeatureTable.default()


@pytest.fixture
def anom_cfg():
    def make(variant="ranked-prob-evo", **extra):
        over = {"variant": variant, "paths": {
            "dataset": "anom.tsv", "rules": ["anom_rules.tsv"],
            "cues": "cues.tsv", "constraints": "constraints.tsv"}}
        over.update(extra)
        return load_config(overrides=over, environ={})
    return make
