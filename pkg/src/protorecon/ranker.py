"""Phonological plausibility scoring and reranking of parsimony candidates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

from .parsimony import Candidate
from .phono import BOUNDARY, FeatureTable, Seq, align, levenshtein, normalized_distance, tokenize


@dataclass
class RankerConfig:
    h: float = 10.0
    b: float = 10000.0
    lam: float = 5.0
    mu: float = 5.0
    length_mismatch_weight: float = 0.3
    length_mismatch_slack: float = 2.0
    short_penalty: float = 2.0
    long_weight: float = 0.4
    baseline_length: int = 12
    no_vowel_penalty: float = 6.0
    invalid_sequence_penalty: float = 1.0
    cluster_penalty: float = 0.6
    max_cluster: int = 3
    similarity_threshold: float = 0.8
    invalid_sequences: tuple[str, ...] = ("#ŋ",)
    count_tokens: bool = False

    def __post_init__(self):
        if self.b <= 1:
            raise ValueError("complexity base b must exceed 1")
        if self.h <= 0:
            raise ValueError("homotopy h must be positive")
        if self.lam < 0 or self.mu < 0:
            raise ValueError("lambda and mu must be non-negative")


@dataclass
class EditClassification:
    m: int
    cond: int
    script: list[tuple[str, int, str, str, str, str]] = field(default_factory=list)


def classify_edits(candidate: Seq, reflex: Seq, count_tokens: bool = False) -> EditClassification:
    """Classify the canonical edit script from ``candidate`` to ``reflex``.

    An edit is conditioned when it has a neighbouring segment in the
    candidate on either side. ``m`` counts distinct (before, after) change
    types and ``cond`` the types with at least one conditioned occurrence;
    with ``count_tokens`` both count individual edits instead.
    """
    script = []
    pos = 0  # index into candidate of the next unconsumed segment
    for a, b in align(tuple(candidate), tuple(reflex)):
        if a is not None and b is not None:
            if a != b:
                left = candidate[pos - 1] if pos > 0 else ""
                right = candidate[pos + 1] if pos + 1 < len(candidate) else ""
                script.append(("sub", pos, a, b, left, right))
            pos += 1
        elif b is None:
            left = candidate[pos - 1] if pos > 0 else ""
            right = candidate[pos + 1] if pos + 1 < len(candidate) else ""
            script.append(("del", pos, a, "", left, right))
            pos += 1
        else:
            left = candidate[pos - 1] if pos > 0 else ""
            right = candidate[pos] if pos < len(candidate) else ""
            script.append(("ins", pos, "", b, left, right))

    if count_tokens:
        m = len(script)
        cond = sum(1 for e in script if e[4] or e[5])
        return EditClassification(m, cond, script)

    types: dict[tuple[str, str], bool] = {}
    for _, _, before, after, left, right in script:
        key = (before, after)
        types[key] = types.get(key, False) or bool(left or right)
    return EditClassification(len(types), sum(types.values()), script)


def log_base(x: float, b: float) -> float:
    return math.log(x) / math.log(b)


def pds_from_counts(n_langs: int, loss: int, m: int, cond: int, h: float = 10.0, b: float = 10000.0) -> float:
    total = m * log_base(h, b) + cond * log_base(2, b)
    for i in range(loss + 1, n_langs + 1):
        total += log_base(i, b) - log_base(i - loss, b)
    return total - n_langs


def pds_score(candidate: Seq, reflexes: Sequence[Seq], cfg: RankerConfig | None = None) -> float:
    cfg = cfg or RankerConfig()
    candidate = tuple(candidate)
    loss = sum(1 for r in reflexes if tuple(r) != candidate)
    m = cond = 0
    for r in reflexes:
        ec = classify_edits(candidate, tuple(r), cfg.count_tokens)
        m += ec.m
        cond += ec.cond
    return pds_from_counts(len(reflexes), loss, m, cond, cfg.h, cfg.b)


def brevity_penalty(candidate: Seq, reflexes: Sequence[Seq], lam: float = 5.0) -> float:
    mean_len = sum(len(r) for r in reflexes) / len(reflexes)
    return -lam * abs(len(candidate) - mean_len)


def edit_penalty(candidate: Seq, reflexes: Sequence[Seq], mu: float = 5.0) -> float:
    c = tuple(candidate)
    return -mu * sum(levenshtein(c, tuple(r)) for r in reflexes) / len(reflexes)


# -- structural checks, shared with the rule engine and PVR --------------------


def consonant_runs(form: Seq, table: FeatureTable) -> list[int]:
    runs, cur = [], 0
    for s in form:
        if table.is_vowel(s):
            if cur:
                runs.append(cur)
            cur = 0
        else:
            cur += 1
    if cur:
        runs.append(cur)
    return runs


def contains_pattern(form: Seq, pattern: Seq) -> bool:
    """Substring test where ``#`` in the pattern marks a word edge."""
    padded = (BOUNDARY,) + tuple(form) + (BOUNDARY,)
    n = len(pattern)
    return any(padded[i : i + n] == tuple(pattern) for i in range(len(padded) - n + 1))


def parse_pattern(text: str, table: FeatureTable) -> Seq:
    lead = text.startswith(BOUNDARY)
    trail = len(text) > 1 and text.endswith(BOUNDARY)
    core = text[1 if lead else 0 : len(text) - 1 if trail else len(text)]
    toks = tokenize(core, table) if core else ()
    return ((BOUNDARY,) if lead else ()) + toks + ((BOUNDARY,) if trail else ())


def structural_adjust(
    candidate: Seq,
    reflexes: Sequence[Seq],
    table: FeatureTable,
    cfg: RankerConfig | None = None,
) -> float:
    cfg = cfg or RankerConfig()
    n = len(candidate)
    delta = 0.0
    mean_len = sum(len(r) for r in reflexes) / len(reflexes) if reflexes else n
    excess = abs(n - mean_len) - cfg.length_mismatch_slack
    if excess > 0:
        delta -= cfg.length_mismatch_weight * excess
    if reflexes and n < min(len(r) for r in reflexes):
        delta -= cfg.short_penalty
    if n > cfg.baseline_length:
        delta -= cfg.long_weight * (n - cfg.baseline_length)
    if not any(table.is_vowel(s) for s in candidate):
        delta -= cfg.no_vowel_penalty
    for pat in cfg.invalid_sequences:
        if contains_pattern(candidate, parse_pattern(pat, table)):
            delta -= cfg.invalid_sequence_penalty
    delta -= cfg.cluster_penalty * sum(1 for r in consonant_runs(candidate, table) if r > cfg.max_cluster)
    return delta


def score_candidate(candidate: Seq, reflexes: Sequence[Seq], table: FeatureTable, cfg: RankerConfig) -> dict[str, float]:
    pds = pds_score(candidate, reflexes, cfg)
    brev = brevity_penalty(candidate, reflexes, cfg.lam)
    edit = edit_penalty(candidate, reflexes, cfg.mu)
    struct = structural_adjust(candidate, reflexes, table, cfg)
    # (1/|L|) * sum over languages of a per-set quantity reduces to the quantity
    return {
        "pds": pds,
        "brevity": brev,
        "edit": edit,
        "structural": struct,
        "score": pds + brev + edit + struct,
    }


def rank_candidates(
    candidates: Sequence[Candidate],
    reflexes: Sequence[Seq],
    table: FeatureTable,
    cfg: RankerConfig | None = None,
    top: int = 10,
) -> list[Candidate]:
    """Score, sort (best first) and truncate Phase I candidates.

    Candidates whose normalized similarity to their nearest reflex does not
    exceed ``similarity_threshold`` are dropped first, unless that would
    drop every candidate.
    """
    cfg = cfg or RankerConfig()
    if not candidates:
        raise ValueError("no candidates to rank")
    reflexes = [tuple(r) for r in reflexes]

    def nearest(c: Candidate) -> float:
        return max(1.0 - normalized_distance(c.form, r) for r in reflexes)

    kept = [c for c in candidates if nearest(c) > cfg.similarity_threshold]
    if not kept:
        kept = list(candidates)

    scored = []
    for c in kept:
        comps = dict(c.score_components)
        comps.update(score_candidate(c.form, reflexes, table, cfg))
        scored.append(replace(c, score_components=comps))
    scored.sort(key=lambda c: (-c.score_components["score"], c.cumulative_cost, c.form))
    return scored[:top]
