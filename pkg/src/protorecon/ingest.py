"""Cognate wordlist parsing, preprocessing and padded alignment matrices."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Iterable, TextIO

from .phono import GAP, FeatureTable, Seq, UnknownSymbol, detokenize, strip_gaps, tokenize

DEFAULT_LANGUAGES = ("romanian", "french", "italian", "spanish", "portuguese")
GOLD_COLUMN = "latin"
MISSING = "-"
LENGTH_MARKS = (":", "ː")

ALIASES = {
    "ro": "romanian",
    "fr": "french",
    "it": "italian",
    "es": "spanish",
    "pt": "portuguese",
    "la": "latin",
}


class MalformedRecord(ValueError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


@dataclass
class CognateSet:
    id: int
    reflexes: dict[str, Seq | None]
    gold: Seq | None = None
    # gap-bearing rows, only when the input was pre-aligned
    aligned: dict[str, Seq] | None = field(default=None, repr=False)

    def __post_init__(self):
        if not any(r for r in self.reflexes.values()):
            raise ValueError(f"cognate set {self.id} has no reflex")

    def present(self) -> dict[str, Seq]:
        return {lang: r for lang, r in self.reflexes.items() if r}


@dataclass(frozen=True)
class AlignmentMatrix:
    languages: tuple[str, ...]
    rows: tuple[Seq, ...]

    @property
    def width(self) -> int:
        return len(self.rows[0]) if self.rows else 0

    def column(self, i: int) -> tuple[str, ...]:
        return tuple(row[i] for row in self.rows)

    def columns(self) -> list[tuple[str, ...]]:
        return [self.column(i) for i in range(self.width)]


def preprocess(raw: str) -> str:
    """Drop vowel-length marks; everything else is left untouched."""
    for mark in LENGTH_MARKS:
        raw = raw.replace(mark, "")
    return raw


def _canonical(name: str) -> str:
    name = name.strip().lower()
    return ALIASES.get(name, name)


def _tokenize_cell(cell: str, table: FeatureTable, pre_aligned: bool) -> Seq:
    if not pre_aligned:
        return tokenize(cell, table)
    out: list[str] = []
    for chunk_i, chunk in enumerate(cell.split(GAP)):
        if chunk_i:
            out.append(GAP)
        out.extend(tokenize(chunk, table))
    return tuple(out)


def parse_dataset(
    source: TextIO | str | Iterable[str],
    table: FeatureTable,
    languages: Iterable[str] = DEFAULT_LANGUAGES,
    gold_column: str | None = GOLD_COLUMN,
    pre_aligned: bool = False,
) -> list[CognateSet]:
    """Read a UTF-8 TSV wordlist with a header row into cognate sets.

    Cells equal to ``-`` are missing data. Length marks are stripped before
    tokenization. Columns not named in ``languages`` (or the gold column) are
    ignored.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    languages = tuple(_canonical(lang) for lang in languages)
    gold_column = _canonical(gold_column) if gold_column else None

    lines = iter(source)
    header = None
    header_line = 0
    for header_line, raw in enumerate(lines, 1):
        if raw.strip() and not raw.startswith("#"):
            header = [_canonical(c) for c in raw.rstrip("\r\n").split("\t")]
            break
    if header is None:
        return []
    missing_cols = [lang for lang in languages if lang not in header]
    if len(missing_cols) == len(languages):
        raise MalformedRecord(header_line, f"header names none of the languages {languages}")
    index = {name: i for i, name in enumerate(header)}

    sets: list[CognateSet] = []
    for lineno, raw in enumerate(lines, header_line + 1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        cells = line.split("\t")
        if len(cells) != len(header):
            raise MalformedRecord(lineno, f"expected {len(header)} columns, got {len(cells)}")
        try:
            reflexes: dict[str, Seq | None] = {}
            aligned: dict[str, Seq] = {}
            for lang in languages:
                if lang not in index:
                    reflexes[lang] = None
                    continue
                cell = preprocess(cells[index[lang]].strip())
                if cell == MISSING or not cell:
                    reflexes[lang] = None
                    continue
                toks = _tokenize_cell(cell, table, pre_aligned)
                reflexes[lang] = strip_gaps(toks)
                aligned[lang] = toks
            gold = None
            if gold_column and gold_column in index:
                cell = preprocess(cells[index[gold_column]].strip())
                if cell and cell != MISSING:
                    gold = tokenize(cell, table)
        except UnknownSymbol as exc:
            raise MalformedRecord(lineno, str(exc)) from exc
        if not any(reflexes.values()):
            raise MalformedRecord(lineno, "no reflex present")
        sets.append(
            CognateSet(len(sets), reflexes, gold, aligned if pre_aligned else None)
        )
    return sets


def serialize_dataset(
    sets: Iterable[CognateSet],
    languages: Iterable[str] = DEFAULT_LANGUAGES,
    gold_column: str | None = GOLD_COLUMN,
) -> str:
    languages = tuple(languages)
    cols = ([gold_column] if gold_column else []) + list(languages)
    out = ["\t".join(cols)]
    for cs in sets:
        row = []
        if gold_column:
            row.append(detokenize(cs.gold) if cs.gold else MISSING)
        for lang in languages:
            r = cs.reflexes.get(lang)
            row.append(detokenize(r) if r else MISSING)
        out.append("\t".join(row))
    return "\n".join(out) + "\n"


def pad_align(cs: CognateSet, include_absent: bool = False) -> AlignmentMatrix:
    """Right-pad every present reflex with gaps to the longest reflex.

    Absent reflexes contribute no row unless ``include_absent`` is set, in
    which case they become all-gap rows. Pre-aligned rows keep their
    embedded gaps.
    """
    langs = []
    rows = []
    for lang, r in cs.reflexes.items():
        if r:
            langs.append(lang)
            rows.append(cs.aligned[lang] if cs.aligned and lang in cs.aligned else r)
        elif include_absent:
            langs.append(lang)
            rows.append(())
    width = max(len(r) for r in rows)
    rows = [tuple(r) + (GAP,) * (width - len(r)) for r in rows]
    return AlignmentMatrix(tuple(langs), tuple(rows))
