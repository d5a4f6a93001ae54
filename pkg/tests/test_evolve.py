import math
import random

import pytest

from protorecon.evolve import (
    EmptySeeds,
    EvoConfig,
    EvoTrace,
    InapplicableOperator,
    diversity,
    eliminate_round,
    evolve,
    fitness,
    fitness_components,
    mutate,
    seed_population,
    set_rng,
    simplify_clusters,
)
from protorecon.ingest import CognateSet
from protorecon.parsimony import Candidate
from protorecon.phono import FeatureTable
from protorecon.pipeline import bundled
from protorecon.rules import RuleInventory


@pytest.fixture
def anom_inv(table):
    return RuleInventory.load(table, bundled("anom_rules.tsv"), bundled("cues.tsv"),
                              bundled("constraints.tsv"))


@pytest.fixture
def anom_set():
    return CognateSet(0, {"romanian": tuple("an"), "french": None, "italian": tuple("ano"),
                          "spanish": tuple("ano"), "portuguese": ("ɐ̃", "w")}, tuple("anom"))


def C(text, prov="parsimony"):
    return Candidate(FeatureTable.default().tokenize(text), 0.0, prov)


def test_anom_beats_ano_macron(anom_inv, anom_set, table):
    anō = tuple(table.tokenize("anō"))
    assert fitness(tuple("anom"), anom_set, anom_inv) > fitness(anō, anom_set, anom_inv)
    assert fitness(tuple("anom"), anom_set, anom_inv) > fitness(tuple("an"), anom_set, anom_inv)


def test_fitness_components_sum(anom_inv, anom_set):
    comps = fitness_components(tuple("anom"), anom_set, anom_inv, EvoConfig())
    assert comps["fitness"] == pytest.approx(comps["likelihood"] + comps["prior"] + comps["length"])
    # every derived reflex is exact, so each likelihood term is log(sim/ceiling) = log 1
    assert comps["likelihood"] == pytest.approx(0.0, abs=1e-12)
    assert comps["prior"] == pytest.approx(0.5)


def test_length_penalties(anom_inv, anom_set):
    cfg = EvoConfig()
    short = fitness_components(("a",), anom_set, anom_inv, cfg)["length"]
    assert short == pytest.approx(math.log(0.8))
    long = fitness_components(tuple("anomanom"), anom_set, anom_inv, cfg)["length"]
    assert long == pytest.approx(math.log(0.5))


def test_seed_union(anom_inv, anom_set):
    pool = seed_population([C("ano")], [C("anom", "pathway:italian"), C("an", "pathway:romanian")],
                           anom_set, anom_inv, EvoConfig(pad_seeds=False))
    assert {c.form for c in pool} >= {tuple("ano"), tuple("anom"), tuple("an")}


def test_seed_union_keeps_parsimony_provenance(anom_inv, anom_set):
    pool = seed_population([C("ano")], [C("ano", "pathway:italian")], anom_set, anom_inv,
                           EvoConfig(pad_seeds=False))
    assert [c.provenance for c in pool] == ["parsimony"]


def test_empty_seeds(anom_inv, anom_set):
    with pytest.raises(EmptySeeds):
        seed_population([], [], anom_set, anom_inv)
    with pytest.raises(EmptySeeds):
        evolve(anom_set, [], anom_inv)


def test_anom_evolution(anom_inv, anom_set):
    seeds = [C("ano"), C("an"), C("anom", "pathway:italian")]
    best, trace = evolve(anom_set, seeds, anom_inv)
    assert best.form == tuple("anom")
    assert trace.best == "anom"
    assert trace.reason in ("single-survivor", "max-generations", "fitness-convergence")


def test_elimination_removes_fifth():
    pool = [C(x) for x in ("a", "b", "c", "d", "e", "f", "g", "h", "i", "j")]
    out = eliminate_round(pool, [10, 9, 8, 7, 6, 5, 4, 3, 2, 1])
    assert [c.text for c in out] == list("abcdefgh")
    assert len(eliminate_round(pool[:3], [1, 2, 3])) == 2
    assert len(eliminate_round(pool[:1], [1])) == 1


def test_elimination_ties_drop_larger_form():
    pool = [C("a"), C("b")]
    assert [c.text for c in eliminate_round(pool, [1.0, 1.0])] == ["a"]


def test_diversity():
    assert diversity([C("ab"), C("ab")]) == 0.0
    assert diversity([C("ab"), C("cd")]) == 1.0
    assert diversity([C("ab")]) == 0.0


def test_mutation_operators(anom_inv):
    rng = random.Random(0)
    m = mutate(C("anom"), "vowel", anom_inv, rng)
    assert m.provenance == "mutant:vowel" and m.form != tuple("anom") and len(m.form) == 4
    m = mutate(C("anom"), "morph", anom_inv, rng)
    assert m.form[:2] == tuple("an") and m.form != tuple("anom")
    with pytest.raises(InapplicableOperator):
        mutate(C("anom"), "cluster", anom_inv, rng)
    with pytest.raises(InapplicableOperator):
        mutate(C("nn"), "vowel", anom_inv, rng)


def test_simplify_clusters_drops_least_sonorous(anom_inv):
    # run "nstr": t is the only stop, so it goes first
    assert simplify_clusters(tuple("anstra"), anom_inv) == tuple("ansra")


def test_rng_is_keyed_per_set():
    assert set_rng(0, 1).random() == set_rng(0, 1).random()
    assert set_rng(0, 1).random() != set_rng(0, 2).random()


def test_trace_round_trip(anom_inv, anom_set):
    seeds = [C("ano"), C("an"), C("anom", "pathway:italian"), C("ɐ̃w")]
    _, trace = evolve(anom_set, seeds, anom_inv, EvoConfig(max_rounds=5))
    text = trace.to_jsonl()
    again = EvoTrace.from_jsonl(text.splitlines())
    assert len(again) == 1 and again[0].to_jsonl() == text


def test_strict_mode_runs(anom_inv, anom_set):
    cfg = EvoConfig(elitism=False, theta_div=1.0)
    best, trace = evolve(anom_set, [C("ano"), C("an"), C("anom")], anom_inv, cfg)
    assert best.form
    assert len(trace.rounds) <= cfg.max_rounds


def test_config_validation():
    with pytest.raises(ValueError):
        EvoConfig(theta_div=2.0)
    with pytest.raises(ValueError):
        EvoConfig(vowel_mode="swap")
