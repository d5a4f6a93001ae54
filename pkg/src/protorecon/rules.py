"""Weighted sound-change rules: forward derivation, bounded inverse search, pathway scoring.

Rule file (UTF-8 TSV, ``#`` starts a comment line)::

    language  source  target  [left]  [right]

``∅`` writes an empty side, ``_`` or an empty cell means "no context" and
``#`` inside a context marks the word edge. ``*`` as language applies the rule
to every configured language.

Cue file: ``language  suffix  [bonus]``. Constraint file: ``key  value`` lines
with keys ``max_cluster``, ``pathway_cluster_run`` and ``illicit`` (repeatable).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .ingest import DEFAULT_LANGUAGES, CognateSet, _canonical
from .parsimony import Candidate
from .phono import BOUNDARY, FeatureTable, Seq, phonetic_bonus, tokenize
from .ranker import consonant_runs, contains_pattern, parse_pattern

EMPTY = "∅"
ALL_LANGUAGES = "*"
DEFAULT_PHYLOGENY = "((french, spanish), portuguese, italian, romanian)"


class RuleFileError(ValueError):
    pass


@dataclass(frozen=True)
class SoundRule:
    language: str
    source: Seq
    target: Seq
    left: Seq = ()
    right: Seq = ()

    def __post_init__(self):
        if self.source == self.target:
            raise RuleFileError(f"rule {self} rewrites a string to itself")

    def inverse(self) -> "SoundRule":
        return SoundRule(self.language, self.target, self.source, self.left, self.right)

    def __str__(self):
        ctx = ""
        if self.left or self.right:
            ctx = f" / {''.join(self.left)}_{''.join(self.right)}"
        src = "".join(self.source) or EMPTY
        tgt = "".join(self.target) or EMPTY
        return f"{self.language}: {src} -> {tgt}{ctx}"


@dataclass(frozen=True)
class Cue:
    suffix: Seq
    bonus: float = 0.5


@dataclass
class Constraints:
    max_cluster: int = 3
    pathway_cluster_run: int = 3
    illicit: tuple[Seq, ...] = ()
    cluster_penalty: float = 0.6
    no_vowel_penalty: float = 6.0
    illicit_penalty: float = 1.0

    def violations(self, form: Seq, table: FeatureTable) -> int:
        """Number of distinct phonotactic violations (used by PVR)."""
        n = 0
        if not any(table.is_vowel(s) for s in form):
            n += 1
        n += sum(1 for r in consonant_runs(form, table) if r > self.max_cluster)
        n += sum(1 for pat in self.illicit if contains_pattern(form, pat))
        return n


@dataclass
class PathwayConfig:
    depth: int = 3
    cap: int | None = 10
    top_k: int = 3
    alpha: float = 0.5
    use_weight: bool = True

    def __post_init__(self):
        if self.depth < 0 or self.top_k <= 0 or self.alpha < 0:
            raise ValueError("invalid pathway configuration")
        if self.cap is not None and self.cap <= 0:
            raise ValueError("pathway cap must be positive")


def parse_phylogeny(text: str) -> tuple:
    """Parse a nested grouping such as ``((french, spanish), italian)``."""
    tokens = text.replace("(", " ( ").replace(")", " ) ").replace(",", " ").split()
    pos = 0

    def node():
        nonlocal pos
        tok = tokens[pos]
        pos += 1
        if tok != "(":
            return _canonical(tok)
        kids = []
        while tokens[pos] != ")":
            kids.append(node())
        pos += 1
        return tuple(kids)

    tree = node()
    if pos != len(tokens):
        raise RuleFileError(f"trailing tokens in phylogeny {text!r}")
    return tree if isinstance(tree, tuple) else (tree,)


def phylogeny_depths(tree) -> dict[str, int]:
    out: dict[str, int] = {}

    def walk(node, depth):
        if isinstance(node, tuple):
            for kid in node:
                walk(kid, depth + 1)
        else:
            if node in out:
                raise RuleFileError(f"language {node!r} appears twice in phylogeny")
            out[node] = depth

    walk(tree, 0)
    return out


@dataclass
class RuleInventory:
    table: FeatureTable
    rules: dict[str, list[SoundRule]] = field(default_factory=dict)
    cues: dict[str, list[Cue]] = field(default_factory=dict)
    constraints: Constraints = field(default_factory=Constraints)
    languages: tuple[str, ...] = DEFAULT_LANGUAGES
    proto_language: str = "latin"
    phylogeny: tuple = field(default_factory=lambda: parse_phylogeny(DEFAULT_PHYLOGENY))

    def __post_init__(self):
        for lang in self.rules:
            if lang not in self.languages:
                raise RuleFileError(f"rule language {lang!r} not configured")
        leaves = phylogeny_depths(self.phylogeny)
        if set(leaves) != set(self.languages):
            raise RuleFileError(
                f"phylogeny leaves {sorted(leaves)} differ from languages {sorted(self.languages)}"
            )
        self._cache: dict = {}

    def _remember(self, key, value):
        if len(self._cache) > 500_000:
            self._cache.clear()
        self._cache[key] = value
        return value

    def rules_for(self, language: str) -> list[SoundRule]:
        return self.rules.get(language, [])

    def cues_for(self, language: str) -> list[Cue]:
        cues = list(self.cues.get(language, []))
        if language != self.proto_language:
            cues += self.cues.get(self.proto_language, [])
        return cues

    def rule_count(self) -> int:
        return sum(len(v) for v in self.rules.values())

    def psi(self, scheme: str = "uniform") -> dict[str, float]:
        if scheme == "uniform":
            return {lang: 1.0 for lang in self.languages}
        if scheme == "depth":
            depths = phylogeny_depths(self.phylogeny)
            return {lang: 0.5 ** (depths[lang] - 1) for lang in self.languages}
        raise ValueError(f"unknown phylogenetic weighting {scheme!r}")

    # -- loading -------------------------------------------------------------

    @classmethod
    def load(
        cls,
        table: FeatureTable,
        rules: str | Path | Iterable[str | Path] | None = None,
        cues: str | Path | None = None,
        constraints: str | Path | None = None,
        languages: Sequence[str] = DEFAULT_LANGUAGES,
        proto_language: str = "latin",
        phylogeny: str = DEFAULT_PHYLOGENY,
    ) -> "RuleInventory":
        languages = tuple(_canonical(lang) for lang in languages)
        rule_map: dict[str, list[SoundRule]] = {}
        if rules is not None:
            paths = [rules] if isinstance(rules, (str, Path)) else list(rules)
            for p in paths:
                text = Path(p).read_text(encoding="utf-8")
                for r in parse_rules(text, table, languages, source=str(p)):
                    rule_map.setdefault(r.language, []).append(r)
        cue_map = parse_cues(Path(cues).read_text(encoding="utf-8"), table) if cues else {}
        cons = (
            parse_constraints(Path(constraints).read_text(encoding="utf-8"), table)
            if constraints
            else Constraints()
        )
        return cls(table, rule_map, cue_map, cons, languages, _canonical(proto_language),
                   parse_phylogeny(phylogeny))


def _side(cell: str, table: FeatureTable) -> Seq:
    cell = cell.strip()
    if cell in ("", EMPTY):
        return ()
    return tokenize(cell, table)


def _context(cell: str, table: FeatureTable) -> Seq:
    cell = cell.strip()
    if cell in ("", "_", EMPTY):
        return ()
    return parse_pattern(cell, table)


def parse_rules(text: str, table: FeatureTable, languages: Sequence[str] = DEFAULT_LANGUAGES,
                source: str = "<rules>") -> list[SoundRule]:
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        cols = raw.split("\t")
        if cols[0].strip().lower() == "language":
            continue
        if len(cols) < 3:
            raise RuleFileError(f"{source}:{lineno}: need language, source, target")
        cols += [""] * (5 - len(cols))
        lang = cols[0].strip()
        try:
            src, tgt = _side(cols[1], table), _side(cols[2], table)
            left, right = _context(cols[3], table), _context(cols[4], table)
        except ValueError as exc:
            raise RuleFileError(f"{source}:{lineno}: {exc}") from exc
        if not src and not tgt:
            raise RuleFileError(f"{source}:{lineno}: both sides empty")
        targets = languages if lang == ALL_LANGUAGES else [_canonical(lang)]
        for t in targets:
            if t not in languages:
                raise RuleFileError(f"{source}:{lineno}: unknown language {lang!r}")
            out.append(SoundRule(t, src, tgt, left, right))
    return out


def parse_cues(text: str, table: FeatureTable) -> dict[str, list[Cue]]:
    out: dict[str, list[Cue]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        cols = raw.split("\t")
        if len(cols) < 2:
            raise RuleFileError(f"cues:{lineno}: need language and suffix")
        suffix = tokenize(cols[1].strip().lstrip("-"), table)
        bonus = float(cols[2]) if len(cols) > 2 and cols[2].strip() else 0.5
        out.setdefault(_canonical(cols[0]), []).append(Cue(suffix, bonus))
    return out


def parse_constraints(text: str, table: FeatureTable) -> Constraints:
    cons = Constraints()
    illicit = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        cols = raw.split("\t")
        if len(cols) < 2:
            raise RuleFileError(f"constraints:{lineno}: need key and value")
        key, value = cols[0].strip(), cols[1].strip()
        if key == "illicit":
            illicit.append(parse_pattern(value, table))
        elif key in ("max_cluster", "pathway_cluster_run"):
            setattr(cons, key, int(value))
        elif key in ("cluster_penalty", "no_vowel_penalty", "illicit_penalty"):
            setattr(cons, key, float(value))
        else:
            raise RuleFileError(f"constraints:{lineno}: unknown key {key!r}")
    cons.illicit = tuple(illicit)
    return cons


# -- weights ---------------------------------------------------------------------


def naturalness_weight(rule: SoundRule, table: FeatureTable, alpha: float = 0.5) -> float:
    phi = phonetic_bonus(rule.source, rule.target, table)
    return phi / (1.0 + alpha * abs(len(rule.source) - len(rule.target)))


# -- application -----------------------------------------------------------------


def _matches_at(padded: Seq, i: int, rule: SoundRule) -> bool:
    """Does ``rule`` match at form position ``i``? ``padded`` carries edge markers."""
    p = i + 1
    n = len(rule.source)
    if padded[p : p + n] != rule.source:
        return False
    if rule.left:
        k = len(rule.left)
        if p - k < 0 or padded[p - k : p] != rule.left:
            return False
    if rule.right:
        k = len(rule.right)
        if padded[p + n : p + n + k] != rule.right:
            return False
    return True


def apply_rule(form: Seq, rule: SoundRule) -> tuple[Seq, int]:
    """One left-to-right pass rewriting every non-overlapping match.

    Contexts are checked against the form as it was before the pass.
    Returns the new form and the number of rewrites.
    """
    form = tuple(form)
    padded = (BOUNDARY,) + form + (BOUNDARY,)
    out: list[str] = []
    count = 0
    i = 0
    n = len(form)
    if not rule.source:
        for i in range(n + 1):
            if _matches_at(padded, i, rule):
                out.extend(rule.target)
                count += 1
            if i < n:
                out.append(form[i])
        return tuple(out), count
    while i < n:
        if _matches_at(padded, i, rule):
            out.extend(rule.target)
            i += len(rule.source)
            count += 1
        else:
            out.append(form[i])
            i += 1
    return tuple(out), count


def forward_apply_counted(protoform: Seq, rules: Sequence[SoundRule]) -> tuple[Seq, int]:
    form = tuple(protoform)
    total = 0
    for rule in rules:
        form, k = apply_rule(form, rule)
        total += k
    return form, total


def forward_apply(protoform: Seq, language: str, inventory: RuleInventory) -> Seq:
    key = ("fwd", tuple(protoform), language)
    cached = inventory._cache.get(key)
    if cached is None:
        cached = inventory._remember(
            key, forward_apply_counted(protoform, inventory.rules_for(language))[0]
        )
    return cached


def rewrite_each(form: Seq, rule: SoundRule) -> list[Seq]:
    """Every form reachable by rewriting exactly one match of ``rule``."""
    form = tuple(form)
    padded = (BOUNDARY,) + form + (BOUNDARY,)
    out = []
    limit = len(form) + 1 if not rule.source else len(form)
    for i in range(limit):
        if _matches_at(padded, i, rule):
            out.append(form[:i] + rule.target + form[i + len(rule.source):])
    return out


# -- pathway scoring ---------------------------------------------------------------


def pathway_components(form: Seq, language: str, inventory: RuleInventory) -> tuple[float, float]:
    """(morphological score, phonotactic score) for a hypothesised form."""
    key = ("path", tuple(form), language)
    cached = inventory._cache.get(key)
    if cached is not None:
        return cached
    table = inventory.table
    cons = inventory.constraints
    form = tuple(form)
    m_score = 0.0
    for cue in inventory.cues_for(language):
        n = len(cue.suffix)
        if len(form) > n and form[-n:] == cue.suffix:
            m_score += cue.bonus
    p_score = 0.0
    p_score -= cons.cluster_penalty * sum(
        1 for r in consonant_runs(form, table) if r >= cons.pathway_cluster_run
    )
    if not any(table.is_vowel(s) for s in form):
        p_score -= cons.no_vowel_penalty
    p_score -= cons.illicit_penalty * sum(1 for pat in cons.illicit if contains_pattern(form, pat))
    return inventory._remember(key, (m_score, p_score))


def pathway_score(form: Seq, language: str, inventory: RuleInventory) -> float:
    m, p = pathway_components(form, language, inventory)
    return m + p


def reverse_transform(
    candidate: Candidate,
    language: str,
    inventory: RuleInventory,
    cfg: PathwayConfig | None = None,
) -> list[Candidate]:
    """Bounded breadth-first inverse-rule search from ``candidate``.

    The pool starts with the candidate itself; each depth level expands the
    members added by the previous level with every inverse rule at every
    match position, then the whole pool is capped to the ``cap`` best forms
    by pathway score plus accumulated log naturalness weight.
    """
    cfg = cfg or PathwayConfig()
    rules = inventory.rules_for(language)
    inverse = [r.inverse() for r in rules]
    logw = [math.log(naturalness_weight(r, inventory.table, cfg.alpha)) for r in rules]

    def rank_key(item):
        form, acc = item
        s = pathway_score(form, language, inventory) + (acc if cfg.use_weight else 0.0)
        return (-s, form)

    pool: dict[Seq, float] = {tuple(candidate.form): 0.0}
    frontier = dict(pool)
    for _ in range(cfg.depth):
        fresh: dict[Seq, float] = {}
        for form, acc in frontier.items():
            for inv, lw in zip(inverse, logw):
                for new in rewrite_each(form, inv):
                    if not new:
                        continue
                    a = acc + lw
                    if new in pool and pool[new] >= a:
                        continue
                    if new not in fresh or a > fresh[new]:
                        fresh[new] = a
        if not fresh:
            break
        pool.update(fresh)
        if cfg.cap is not None and len(pool) > cfg.cap:
            pool = dict(sorted(pool.items(), key=rank_key)[: cfg.cap])
        frontier = {f: a for f, a in fresh.items() if f in pool}

    return [
        Candidate(
            form,
            candidate.cumulative_cost,
            f"pathway:{language}",
            {"pathway": pathway_score(form, language, inventory), "log_weight": acc},
        )
        for form, acc in sorted(pool.items(), key=rank_key)
    ]


def top_pathways(
    candidates: Sequence[Candidate],
    inventory: RuleInventory,
    cfg: PathwayConfig | None = None,
    languages: Sequence[str] | None = None,
) -> dict[str, list[Candidate]]:
    """Best ``top_k`` inverse-pathway forms per language.

    Ties in pathway score keep the order of the (ranked) input candidates.
    """
    cfg = cfg or PathwayConfig()
    if not candidates:
        raise ValueError("no Phase I candidates")
    out: dict[str, list[Candidate]] = {}
    for lang in languages or inventory.languages:
        # form -> (candidate, rank of the input candidate it came from)
        best: dict[Seq, tuple[Candidate, int]] = {}
        for origin, cand in enumerate(candidates):
            for p in reverse_transform(cand, lang, inventory, cfg):
                prev = best.get(p.form)
                if prev is None or _path_total(p, cfg) > _path_total(prev[0], cfg):
                    best[p.form] = (p, origin)
        ranked = sorted(best.values(), key=lambda e: (-_path_total(e[0], cfg), e[1], e[0].form))
        out[lang] = [c for c, _ in ranked[: cfg.top_k]]
    return out


def _path_total(c: Candidate, cfg: PathwayConfig) -> float:
    comps = c.score_components
    return comps["pathway"] + (comps["log_weight"] if cfg.use_weight else 0.0)


# -- synthetic corpora ---------------------------------------------------------------


def synthesize_dataset(
    protoforms: Sequence[Seq],
    inventory: RuleInventory,
    noise: float | dict[str, float] = 0.0,
    seed: int = 0,
    alphabet: Sequence[str] | None = None,
) -> list[CognateSet]:
    """Derive reflexes by forward application, optionally perturbing each one.

    With probability ``noise`` (per language) a reflex receives one random
    substitution, insertion or deletion drawn from ``alphabet`` (default: the
    symbols occurring in the protoforms).
    """
    rng = random.Random(seed)
    if alphabet is None:
        alphabet = sorted({s for p in protoforms for s in p})
    alphabet = list(alphabet)
    out = []
    for idx, proto in enumerate(protoforms):
        reflexes: dict[str, Seq | None] = {}
        for lang in inventory.languages:
            r = list(forward_apply(tuple(proto), lang, inventory))
            p = noise.get(lang, 0.0) if isinstance(noise, dict) else noise
            if rng.random() < p:
                op = rng.choice(("sub", "ins", "del"))
                if op == "del" and len(r) < 2:
                    op = "sub" if r else "ins"
                if op == "sub":
                    i = rng.randrange(len(r))
                    r[i] = rng.choice([s for s in alphabet if s != r[i]] or alphabet)
                elif op == "ins":
                    r.insert(rng.randrange(len(r) + 1), rng.choice(alphabet))
                else:
                    del r[rng.randrange(len(r))]
            reflexes[lang] = tuple(r) or None
        if not any(reflexes.values()):
            continue
        out.append(CognateSet(len(out), reflexes, tuple(proto)))
    return out


SYNTH_ONSETS = ("p", "t", "k", "b", "d", "g", "m", "n", "l", "r", "s", "f", "v")
SYNTH_CODAS = ("n", "r", "s", "l")
SYNTH_VOWELS = ("a", "e", "i", "o", "u")
SYNTH_ENDINGS = (("o", "m"), ("u", "m"), ("a", "m"), ("e", "m"))


def random_protoforms(n: int, seed: int = 0) -> list[Seq]:
    """Latin-like protoforms: (C)V syllables, a closing consonant and a ``-Vm`` ending."""
    rng = random.Random(seed)
    out = []
    for _ in range(n):
        form: list[str] = []
        for _ in range(rng.randint(1, 2)):
            form += [rng.choice(SYNTH_ONSETS), rng.choice(SYNTH_VOWELS)]
            if rng.random() < 0.3:
                form.append(rng.choice(SYNTH_CODAS))
        form.append(rng.choice(("t", "k", "p", "d", "n", "s")))
        form += list(rng.choice(SYNTH_ENDINGS))
        out.append(tuple(form))
    return out
