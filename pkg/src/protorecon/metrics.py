"""Reconstruction quality metrics and report aggregation."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from typing import Sequence

from .phono import FeatureTable, Seq, align, feature_distance, levenshtein
from .rules import Constraints


class EmptyGold(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


@dataclass
class EvalReport:
    c_acc: float
    cer: float
    ver: float
    edit_dist: float
    feat_dist: float
    mcer: float
    n_edit_dist: float
    fer: float
    pvr: float
    n: int
    skipped: int = 0

    METRICS = ("c_acc", "cer", "ver", "edit_dist", "feat_dist", "mcer", "n_edit_dist", "fer", "pvr")

    def to_tsv(self, header: bool = True) -> str:
        names = [f.name for f in fields(self)]
        row = "\t".join(_fmt(getattr(self, k)) for k in names)
        return ("\t".join(names) + "\n" if header else "") + row + "\n"

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"

    def summary(self) -> str:
        return (
            f"evaluated {self.n} pairs ({self.skipped} without gold)\n"
            f"  C_ACC       {self.c_acc:8.2f}\n"
            f"  CER         {self.cer:8.2f}\n"
            f"  VER         {self.ver:8.2f}\n"
            f"  EDIT_DIST   {self.edit_dist:8.2f}\n"
            f"  FEAT_DIST   {self.feat_dist:8.2f}\n"
            f"  MCER        {self.mcer:8.2f}\n"
            f"  N_EDIT_DIST {self.n_edit_dist:8.2f}\n"
            f"  FER         {self.fer:8.2f}\n"
            f"  PVR         {self.pvr:8.2f}\n"
        )

    def render(self, fmt: str = "tsv") -> str:
        if fmt == "tsv":
            return self.to_tsv()
        if fmt == "json":
            return self.to_json()
        if fmt == "summary":
            return self.summary()
        raise ValueError(f"unknown report format {fmt!r}")


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def _check(gold: Seq):
    if not gold:
        raise EmptyGold("gold form is empty")


def char_accuracy(pred: Seq, gold: Seq) -> float:
    _check(gold)
    matches = sum(1 for a, b in align(tuple(pred), tuple(gold)) if a is not None and a == b)
    return 100.0 * matches / len(gold)


def char_errors(pred: Seq, gold: Seq) -> int:
    """Position-by-position mismatches, a missing position counting as one error.

    Unlike the edit distance this does not realign after an insertion or
    deletion, so it is never smaller than ``levenshtein(pred, gold)``.
    """
    n = max(len(pred), len(gold))
    return sum(1 for i in range(n) if i >= len(pred) or i >= len(gold) or pred[i] != gold[i])


def vc_error_counts(pred: Seq, gold: Seq, table: FeatureTable) -> tuple[int, int]:
    """(consonant errors, vowel errors) from the canonical script.

    Substitutions and missing phonemes are charged to the gold-side phoneme,
    spurious predicted phonemes to themselves.
    """
    cons = vow = 0
    for a, b in align(tuple(pred), tuple(gold)):
        if a == b:
            continue
        charged = b if b is not None else a
        if table.is_vowel(charged):
            vow += 1
        else:
            cons += 1
    return cons, vow


def vc_error_rates(pred: Seq, gold: Seq, table: FeatureTable) -> tuple[float, float]:
    _check(gold)
    cons, vow = vc_error_counts(pred, gold, table)
    return 100.0 * cons / len(gold), 100.0 * vow / len(gold)


def edit_metrics(pairs: Sequence[tuple[Seq, Seq]], prose_normalization: bool = False) -> tuple[float, float, float]:
    """(mean edit distance, normalized edit distance, mean character error rate).

    By default both ratios are per-pair rates normalized by gold length and
    then averaged. ``prose_normalization`` divides the raw totals by the
    number of pairs instead.
    """
    if not pairs:
        raise ValueError("no pairs to evaluate")
    n = len(pairs)
    dists = [levenshtein(tuple(p), tuple(g)) for p, g in pairs]
    edit_dist = sum(dists) / n
    if prose_normalization:
        return edit_dist, sum(dists) / n, sum(char_errors(p, g) for p, g in pairs) / n
    n_edit = sum(d / len(g) for d, (_, g) in zip(dists, pairs)) / n
    mcer = sum(char_errors(p, g) / len(g) for p, g in pairs) / n
    return edit_dist, n_edit, mcer


def feat_metrics(pairs: Sequence[tuple[Seq, Seq]], table: FeatureTable) -> tuple[float, float]:
    if not pairs:
        raise ValueError("no pairs to evaluate")
    feat = sum(feature_distance(tuple(p), tuple(g), table) for p, g in pairs) / len(pairs)
    return feat, feat / table.feature_count


def pvr(preds: Sequence[Seq], constraints: Constraints, table: FeatureTable) -> float:
    if not preds:
        return 0.0
    return sum(1 for p in preds if constraints.violations(tuple(p), table) > 0) / len(preds)


def evaluate(
    predictions: Sequence[Seq | None],
    golds: Sequence[Seq | None],
    table: FeatureTable,
    constraints: Constraints | None = None,
    prose_normalization: bool = False,
) -> EvalReport:
    if len(predictions) != len(golds):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(golds)} golds")
    constraints = constraints or Constraints()
    pairs = [(tuple(p or ()), tuple(g)) for p, g in zip(predictions, golds) if g]
    skipped = len(golds) - len(pairs)
    if not pairs:
        return EvalReport(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0, skipped)
    n = len(pairs)
    c_acc = sum(char_accuracy(p, g) for p, g in pairs) / n
    counts = [vc_error_counts(p, g, table) for p, g in pairs]
    gold_total = sum(len(g) for _, g in pairs)
    cer = 100.0 * sum(c for c, _ in counts) / gold_total
    ver = 100.0 * sum(v for _, v in counts) / gold_total
    edit_dist, n_edit, mcer = edit_metrics(pairs, prose_normalization)
    feat, fer = feat_metrics(pairs, table)
    rate = pvr([p for p, _ in pairs], constraints, table)
    return EvalReport(c_acc, cer, ver, edit_dist, feat, mcer, n_edit, fer, rate, n, skipped)
