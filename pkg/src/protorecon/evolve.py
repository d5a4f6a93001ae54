"""Phase III: fitness-driven elimination with diversity-triggered mutation."""

from __future__ import annotations

import json
import math
import random
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Sequence

from .ingest import CognateSet
from .parsimony import Candidate
from .phono import Seq, normalized_distance, sim
from .ranker import consonant_runs
from .rules import RuleInventory, forward_apply, pathway_components

OPERATORS = ("vowel", "morph", "cluster")
TERMINATION_REASONS = ("single-survivor", "max-generations", "fitness-convergence")
PROVENANCE_RANK = {"parsimony": 0, "pathway": 1, "reflex": 2, "mutant": 3}

_SONORITY = {
    "stop": 1,
    "affricate": 1,
    "fricative": 2,
    "nasal": 3,
    "lateral": 4,
    "trill": 4,
    "tap": 4,
    "approximant": 4,
    "glide": 5,
}


class EmptySeeds(ValueError):
    pass


class InapplicableOperator(ValueError):
    pass


@dataclass
class EvoConfig:
    max_rounds: int = 20
    pool_size: int = 10
    short_penalty: float = 0.8
    long_penalty: float = 0.5
    long_slack: int = 2
    theta_div: float = 0.3
    patience: int = 3
    alpha_morph: float = 1.0
    beta_phono: float = 1.0
    psi_scheme: str = "uniform"
    psi: dict[str, float] = field(default_factory=dict)
    eps_floor: float = 1e-6
    elitism: bool = True
    mutation: bool = True
    vowel_mode: str = "replace"
    vowel_set: tuple[str, ...] = ("a", "e", "i", "o", "u", "ɛ")
    morph_append_prob: float = 0.5
    pad_seeds: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be at least 1")
        if self.pool_size < 1:
            raise ValueError("pool_size must be at least 1")
        if not 0.0 <= self.theta_div <= 1.0:
            raise ValueError("theta_div must lie in [0, 1]")
        if self.vowel_mode not in ("replace", "delete"):
            raise ValueError("vowel_mode is 'replace' or 'delete'")


@dataclass
class RoundRecord:
    round: int
    forms: list[str]
    fitness: list[float]
    diversity: float
    eliminated: list[str] = field(default_factory=list)
    mutants: list[str] = field(default_factory=list)


@dataclass
class EvoTrace:
    set_id: int
    rounds: list[RoundRecord] = field(default_factory=list)
    reason: str = ""
    best: str = ""

    def to_jsonl(self) -> str:
        lines = []
        for r in self.rounds:
            rec = {"set": self.set_id, **asdict(r)}
            lines.append(json.dumps(rec, ensure_ascii=False))
        lines.append(json.dumps({"set": self.set_id, "reason": self.reason, "best": self.best},
                                ensure_ascii=False))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, lines: Iterable[str]) -> list["EvoTrace"]:
        traces: dict[int, EvoTrace] = {}
        for line in lines:
            if not line.strip():
                continue
            rec = json.loads(line)
            tr = traces.setdefault(rec["set"], cls(rec["set"]))
            if "reason" in rec:
                tr.reason, tr.best = rec["reason"], rec["best"]
            else:
                rec.pop("set")
                tr.rounds.append(RoundRecord(**rec))
        return list(traces.values())


def set_rng(seed: int, set_id: int, salt: str = "evolve") -> random.Random:
    return random.Random(f"{seed}:{set_id}:{salt}")


# -- fitness -------------------------------------------------------------------


def sim_norm(x: Seq, y: Seq, inventory: RuleInventory) -> float:
    ceiling = 1.0 + 1.5 * max(len(x), len(y))
    return sim(x, y, inventory.table) / ceiling


def fitness_components(form: Seq, cs: CognateSet, inventory: RuleInventory, cfg: EvoConfig) -> dict[str, float]:
    form = tuple(form)
    psi = inventory.psi(cfg.psi_scheme)
    psi.update(cfg.psi)
    reflexes = cs.present()
    likelihood = 0.0
    for lang, w in reflexes.items():
        derived = forward_apply(form, lang, inventory)
        likelihood += psi.get(lang, 1.0) * math.log(max(cfg.eps_floor, sim_norm(derived, w, inventory)))
    morph, phono = pathway_components(form, inventory.proto_language, inventory)
    prior = cfg.alpha_morph * morph + cfg.beta_phono * phono
    length = 0.0
    lengths = [len(w) for w in reflexes.values()]
    if len(form) < min(lengths):
        length += math.log(cfg.short_penalty)
    if len(form) > max(lengths) + cfg.long_slack:
        length += math.log(cfg.long_penalty)
    return {"likelihood": likelihood, "prior": prior, "length": length,
            "fitness": likelihood + prior + length}


def fitness(form: Seq, cs: CognateSet, inventory: RuleInventory, cfg: EvoConfig | None = None) -> float:
    return fitness_components(form, cs, inventory, cfg or EvoConfig())["fitness"]


# -- selection -----------------------------------------------------------------


def eliminate_round(pool: Sequence[Candidate], fitnesses: Sequence[float]) -> list[Candidate]:
    """Drop the max(1, floor(N/5)) worst members; never empties the pool.

    Ties drop the lexicographically larger form first, so the current best
    (highest fitness, smallest form) is always the last to go.
    """
    n = len(pool)
    if n <= 1:
        return list(pool)
    eta = max(1, n // 5)
    order = sorted(range(n), key=lambda i: pool[i].form, reverse=True)
    order.sort(key=lambda i: fitnesses[i])
    doomed = set(order[:eta])
    return [c for i, c in enumerate(pool) if i not in doomed]


def diversity(pool: Sequence[Candidate | Seq]) -> float:
    forms = [tuple(p.form if isinstance(p, Candidate) else p) for p in pool]
    if len(forms) < 2:
        return 0.0
    total = 0.0
    pairs = 0
    for i in range(len(forms)):
        for j in range(i + 1, len(forms)):
            total += normalized_distance(forms[i], forms[j])
            pairs += 1
    return total / pairs


# -- mutation ------------------------------------------------------------------


def _sonority(symbol: str, inventory: RuleInventory) -> int:
    ph = inventory.table[symbol]
    return _SONORITY.get(ph.feature_dict().get("manner", ""), 5)


def simplify_clusters(form: Seq, inventory: RuleInventory, max_cluster: int = 3) -> Seq:
    """Delete the least sonorous member of over-long consonant runs until none remain."""
    table = inventory.table
    form = list(form)
    while True:
        start = None
        run = 0
        target = None
        for i, s in enumerate(form + [None]):
            if s is not None and not table.is_vowel(s):
                if run == 0:
                    start = i
                run += 1
                continue
            if run > max_cluster:
                target = (start, run)
                break
            run = 0
        if target is None:
            return tuple(form)
        start, run = target
        span = range(start, start + run)
        drop = min(span, key=lambda i: (_sonority(form[i], inventory), i))
        del form[drop]


def _suffixes(inventory: RuleInventory) -> list[Seq]:
    seen = []
    for cue in inventory.cues_for(inventory.proto_language):
        if cue.suffix not in seen:
            seen.append(cue.suffix)
    return seen


def mutate(
    cand: Candidate,
    operator: str,
    inventory: RuleInventory,
    rng: random.Random,
    cfg: EvoConfig | None = None,
) -> Candidate:
    cfg = cfg or EvoConfig()
    form = tuple(cand.form)
    table = inventory.table

    if operator == "vowel":
        positions = [i for i, s in enumerate(form) if table.is_vowel(s)]
        if not positions:
            raise InapplicableOperator("no vowel to mutate")
        i = rng.choice(positions)
        if cfg.vowel_mode == "delete":
            new = form[:i] + form[i + 1 :]
        else:
            choices = [v for v in cfg.vowel_set if v != form[i] and v in table]
            if not choices:
                raise InapplicableOperator("no alternative vowel")
            new = form[:i] + (rng.choice(choices),) + form[i + 1 :]
    elif operator == "morph":
        suffixes = _suffixes(inventory)
        if not suffixes:
            raise InapplicableOperator("no morphological cues")
        found = [s for s in suffixes if len(form) > len(s) and form[-len(s):] == s]
        if found:
            s = max(found, key=len)
            others = [x for x in suffixes if x != s]
            if not others:
                raise InapplicableOperator("no alternative suffix")
            new = form[: -len(s)] + rng.choice(others)
        elif rng.random() < cfg.morph_append_prob:
            new = form + rng.choice(suffixes)
        else:
            raise InapplicableOperator("no recognised suffix")
    elif operator == "cluster":
        limit = inventory.constraints.max_cluster
        if not any(r > limit for r in consonant_runs(form, table)):
            raise InapplicableOperator("no over-long cluster")
        new = simplify_clusters(form, inventory, limit)
    else:
        raise ValueError(f"unknown operator {operator!r}")

    if not new:
        raise InapplicableOperator("mutation emptied the form")
    return Candidate(new, cand.cumulative_cost, f"mutant:{operator}")


# -- driver --------------------------------------------------------------------


def _provenance_rank(c: Candidate) -> int:
    return PROVENANCE_RANK.get(c.provenance.split(":")[0], 9)


def _dedupe(cands: Iterable[Candidate]) -> list[Candidate]:
    best: dict[Seq, Candidate] = {}
    for c in cands:
        key = tuple(c.form)
        if not key:
            continue
        if key not in best or _provenance_rank(c) < _provenance_rank(best[key]):
            best[key] = c
    return list(best.values())


def seed_population(
    parsimony_top: Sequence[Candidate],
    pathway_top: Sequence[Candidate],
    cs: CognateSet,
    inventory: RuleInventory,
    cfg: EvoConfig | None = None,
) -> list[Candidate]:
    cfg = cfg or EvoConfig()
    union = _dedupe(list(parsimony_top) + list(pathway_top))
    if not union:
        raise EmptySeeds("no seeds for evolution")
    scored = sorted(union, key=lambda c: (-fitness(c.form, cs, inventory, cfg), c.form))
    pool = scored[: cfg.pool_size]
    if cfg.pad_seeds and len(pool) < cfg.pool_size:
        rng = set_rng(cfg.seed, cs.id, "pad")
        have = {c.form for c in pool}
        for _ in range(4 * cfg.pool_size):
            if len(pool) >= cfg.pool_size:
                break
            try:
                m = mutate(pool[0], "vowel", inventory, rng, cfg)
            except InapplicableOperator:
                break
            if m.form not in have:
                have.add(m.form)
                pool.append(m)
    return pool


def evolve(
    cs: CognateSet,
    seeds: Sequence[Candidate],
    inventory: RuleInventory,
    cfg: EvoConfig | None = None,
) -> tuple[Candidate, EvoTrace]:
    """Run the elimination/mutation loop and return the fittest terminal member."""
    cfg = cfg or EvoConfig()
    pool = _dedupe(seeds)
    if not pool:
        raise EmptySeeds("no seeds for evolution")
    cache: dict[Seq, float] = {}

    def fit(c: Candidate) -> float:
        f = cache.get(c.form)
        if f is None:
            f = cache[c.form] = fitness(c.form, cs, inventory, cfg)
        return f

    pool.sort(key=lambda c: (-fit(c), c.form))
    pool = pool[: cfg.pool_size]
    rng = set_rng(cfg.seed, cs.id)
    trace = EvoTrace(cs.id)
    best_so_far = -math.inf
    stale = 0
    cycle = 0
    t = 0
    while True:
        fits = [fit(c) for c in pool]
        record = RoundRecord(t, ["".join(c.form) for c in pool], fits, diversity(pool))
        trace.rounds.append(record)
        top = max(fits)
        if top > best_so_far:
            best_so_far, stale = top, 0
        else:
            stale += 1
        if len(pool) == 1:
            trace.reason = "single-survivor"
            break
        if t + 1 >= cfg.max_rounds:
            trace.reason = "max-generations"
            break
        if stale >= cfg.patience:
            trace.reason = "fitness-convergence"
            break

        survivors = eliminate_round(pool, fits)
        kept = {id(c) for c in survivors}
        record.eliminated = ["".join(c.form) for c in pool if id(c) not in kept]
        pool = survivors

        if cfg.mutation and diversity(pool) < cfg.theta_div:
            pool = _inject(pool, fit, inventory, rng, cfg, record, cycle)
            cycle += len(pool)
        t += 1

    final = [fit(c) for c in pool]
    best_i = min(range(len(pool)), key=lambda i: (-final[i], pool[i].form))
    best = replace(pool[best_i], score_components=dict(pool[best_i].score_components,
                                                        fitness=final[best_i]))
    trace.best = "".join(best.form)
    return best, trace


def _inject(pool, fit, inventory, rng, cfg, record, cycle):
    forms = {c.form for c in pool}
    ordered = sorted(pool, key=lambda c: (-fit(c), c.form))
    out = list(pool)
    for k, parent in enumerate(ordered):
        if cfg.elitism and len(out) >= cfg.pool_size:
            break
        child = None
        for step in range(len(OPERATORS)):
            op = OPERATORS[(cycle + k + step) % len(OPERATORS)]
            try:
                child = mutate(parent, op, inventory, rng, cfg)
            except InapplicableOperator:
                continue
            break
        if child is None or child.form in forms:
            continue
        forms.add(child.form)
        record.mutants.append("".join(child.form))
        if cfg.elitism:
            out.append(child)
        else:
            # strict mode: the variant replaces its parent, elite included
            out[out.index(parent)] = child
    return out
