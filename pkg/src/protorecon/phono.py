"""Phoneme inventory, tokenization and the distance kernels shared by every phase.

Sequences are plain tuples of phoneme symbols (``("a", "n", "o")``); the
:class:`FeatureTable` is the only place that knows what a symbol means.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

GAP = "-"
BOUNDARY = "#"
CLASSES = ("vowel", "stop", "fricative", "liquid", "nasal", "other")
SAME_CLASS_BONUS = 1.5
CROSS_CLASS_BONUS = 1.0

Seq = tuple  # tuple[str, ...]


class UnknownSymbol(ValueError):
    def __init__(self, position: int, grapheme: str, text: str = ""):
        self.position = position
        self.grapheme = grapheme
        self.text = text
        super().__init__(f"unknown symbol {grapheme!r} at position {position} in {text!r}")


class FeatureTableError(ValueError):
    pass


@dataclass(frozen=True)
class Phoneme:
    symbol: str
    cls: str
    features: tuple[tuple[str, str], ...]

    @property
    def is_vowel(self) -> bool:
        return self.cls == "vowel"

    def feature_dict(self) -> dict[str, str]:
        return dict(self.features)


_VOWEL_FEATURES = {"height", "backness", "rounding"}
_CONSONANT_FEATURES = {"place", "manner", "voicing"}


@dataclass
class FeatureTable:
    """Symbol -> :class:`Phoneme` lookup plus the multigraph list used by the tokenizer."""

    phonemes: dict[str, Phoneme]
    multigraphs: tuple[str, ...] = field(default=())
    source: str = "<memory>"

    def __post_init__(self):
        if not self.multigraphs:
            self.multigraphs = tuple(s for s in self.phonemes if len(s) > 1)
        self._by_length = sorted(
            {len(s) for s in self.phonemes}, reverse=True
        )
        names: set[str] = set()
        for ph in self.phonemes.values():
            names.update(k for k, _ in ph.features)
        self.feature_names = tuple(sorted(names))
        self.vowels = tuple(s for s, ph in self.phonemes.items() if ph.is_vowel)

    # -- loading -----------------------------------------------------------

    @classmethod
    def from_text(cls, text: str, source: str = "<memory>") -> "FeatureTable":
        phonemes: dict[str, Phoneme] = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) < 2:
                raise FeatureTableError(f"{source}:{lineno}: expected symbol and class")
            symbol = unicodedata.normalize("NFC", cols[0].strip())
            kind = cols[1].strip()
            if not symbol or symbol in (GAP, BOUNDARY):
                raise FeatureTableError(f"{source}:{lineno}: reserved or empty symbol {symbol!r}")
            if kind not in CLASSES:
                raise FeatureTableError(f"{source}:{lineno}: unknown class {kind!r}")
            feats = []
            for col in cols[2:]:
                col = col.strip()
                if not col:
                    continue
                if "=" not in col:
                    raise FeatureTableError(f"{source}:{lineno}: bad feature {col!r}")
                k, v = col.split("=", 1)
                feats.append((k.strip(), v.strip()))
            names = {k for k, _ in feats}
            required = _VOWEL_FEATURES if kind == "vowel" else _CONSONANT_FEATURES
            if not required <= names:
                raise FeatureTableError(
                    f"{source}:{lineno}: {symbol!r} lacks features {sorted(required - names)}"
                )
            if symbol in phonemes:
                raise FeatureTableError(f"{source}:{lineno}: duplicate symbol {symbol!r}")
            phonemes[symbol] = Phoneme(symbol, kind, tuple(sorted(feats)))
        return cls(phonemes, source=source)

    @classmethod
    def load(cls, path: str | Path) -> "FeatureTable":
        path = Path(path)
        return cls.from_text(path.read_text(encoding="utf-8"), source=str(path))

    @classmethod
    def default(cls) -> "FeatureTable":
        return _default_table()

    # -- lookups -----------------------------------------------------------

    def __contains__(self, symbol: str) -> bool:
        return symbol in self.phonemes

    def __getitem__(self, symbol: str) -> Phoneme:
        try:
            return self.phonemes[symbol]
        except KeyError:
            raise UnknownSymbol(0, symbol, symbol) from None

    def cls_of(self, symbol: str) -> str:
        return self[symbol].cls

    def is_vowel(self, symbol: str) -> bool:
        ph = self.phonemes.get(symbol)
        return ph is not None and ph.is_vowel

    def is_consonant(self, symbol: str) -> bool:
        ph = self.phonemes.get(symbol)
        return ph is not None and not ph.is_vowel

    @property
    def feature_count(self) -> int:
        return len(self.feature_names)

    def tokenize(self, raw: str) -> Seq:
        return tokenize(raw, self)


@lru_cache(maxsize=1)
def _default_table() -> FeatureTable:
    text = resources.files("protorecon.data").joinpath("features.tsv").read_text(encoding="utf-8")
    return FeatureTable.from_text(text, source="protorecon:data/features.tsv")


# -- tokenization ------------------------------------------------------------


def tokenize(raw: str, table: FeatureTable) -> Seq:
    """Greedy longest-match segmentation of ``raw`` against the table's symbols."""
    text = unicodedata.normalize("NFC", raw)
    out = []
    i = 0
    n = len(text)
    while i < n:
        for width in table._by_length:
            if i + width <= n and text[i : i + width] in table.phonemes:
                out.append(text[i : i + width])
                i += width
                break
        else:
            raise UnknownSymbol(i, text[i], text)
    return tuple(out)


def detokenize(seq: Iterable[str]) -> str:
    return "".join(s for s in seq if s != GAP)


def strip_gaps(seq: Iterable[str]) -> Seq:
    return tuple(s for s in seq if s != GAP)


# -- edit distance -----------------------------------------------------------


@lru_cache(maxsize=200_000)
def levenshtein(x: Seq, y: Seq) -> int:
    if x == y:
        return 0
    if not x:
        return len(y)
    if not y:
        return len(x)
    prev = list(range(len(y) + 1))
    for i, a in enumerate(x, 1):
        cur = [i]
        for j, b in enumerate(y, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a != b)))
        prev = cur
    return prev[-1]


def _dp_matrix(x: Sequence[str], y: Sequence[str]) -> list[list[int]]:
    d = [[0] * (len(y) + 1) for _ in range(len(x) + 1)]
    for i in range(len(x) + 1):
        d[i][0] = i
    for j in range(len(y) + 1):
        d[0][j] = j
    for i in range(1, len(x) + 1):
        for j in range(1, len(y) + 1):
            d[i][j] = min(
                d[i - 1][j] + 1,
                d[i][j - 1] + 1,
                d[i - 1][j - 1] + (x[i - 1] != y[j - 1]),
            )
    return d


@lru_cache(maxsize=100_000)
def align(x: Seq, y: Seq) -> tuple[tuple[str | None, str | None], ...]:
    """Canonical optimal alignment of ``x`` onto ``y``.

    Backtraces the Levenshtein table from the end, preferring the diagonal
    (match/substitution) over deletion over insertion on ties. Returns pairs
    ``(a, b)`` where ``a is None`` marks an insertion and ``b is None`` a
    deletion.
    """
    d = _dp_matrix(x, y)
    i, j = len(x), len(y)
    pairs = []
    while i > 0 or j > 0:
        if i > 0 and j > 0 and d[i][j] == d[i - 1][j - 1] + (x[i - 1] != y[j - 1]):
            pairs.append((x[i - 1], y[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and d[i][j] == d[i - 1][j] + 1:
            pairs.append((x[i - 1], None))
            i -= 1
        else:
            pairs.append((None, y[j - 1]))
            j -= 1
    pairs.reverse()
    return tuple(pairs)


# -- class-based similarity ----------------------------------------------------


def string_class(symbols: Sequence[str], table: FeatureTable) -> str:
    """Class shared by every member of ``symbols``; ``"other"`` when mixed or empty."""
    classes = {table.cls_of(s) for s in symbols}
    if len(classes) == 1:
        return classes.pop()
    return "other"


def phonetic_bonus(p, q, table: FeatureTable) -> float:
    """1.5 for same phonetic class, 1.0 otherwise.

    ``p`` and ``q`` may be single symbols or symbol sequences (rule sides).
    """
    cp = table.cls_of(p) if isinstance(p, str) else string_class(p, table)
    cq = table.cls_of(q) if isinstance(q, str) else string_class(q, table)
    return SAME_CLASS_BONUS if cp == cq else CROSS_CLASS_BONUS


def sim(x: Seq, y: Seq, table: FeatureTable) -> float:
    longest = max(len(x), len(y))
    if longest == 0:
        return 1.0
    score = 1.0 - levenshtein(tuple(x), tuple(y)) / longest
    for a, b in zip(x, y):
        score += phonetic_bonus(a, b, table)
    return score


def normalized_distance(x: Seq, y: Seq) -> float:
    longest = max(len(x), len(y))
    if longest == 0:
        return 0.0
    return levenshtein(tuple(x), tuple(y)) / longest


# -- feature distance ----------------------------------------------------------


def feature_mismatch(p: str, q: str, table: FeatureTable) -> int:
    """Number of feature values that differ; a feature missing on one side differs."""
    if p == q:
        return 0
    fp = table[p].feature_dict()
    fq = table[q].feature_dict()
    return sum(1 for k in fp.keys() | fq.keys() if fp.get(k) != fq.get(k))


def feature_weight(p: str, table: FeatureTable) -> int:
    return len(table[p].features)


def feature_distance(x: Seq, y: Seq, table: FeatureTable) -> float:
    """Weighted edit distance with feature-mismatch substitution costs."""
    n, m = len(x), len(y)
    prev = [0.0] * (m + 1)
    for j in range(1, m + 1):
        prev[j] = prev[j - 1] + feature_weight(y[j - 1], table)
    for i in range(1, n + 1):
        wdel = feature_weight(x[i - 1], table)
        cur = [prev[0] + wdel]
        for j in range(1, m + 1):
            cur.append(
                min(
                    prev[j] + wdel,
                    cur[j - 1] + feature_weight(y[j - 1], table),
                    prev[j - 1] + feature_mismatch(x[i - 1], y[j - 1], table),
                )
            )
        prev = cur
    return prev[m]
