"""Column-wise beam search for the most parsimonious protoform candidates."""

from __future__ import annotations

from dataclasses import dataclass, field

from .ingest import AlignmentMatrix
from .phono import GAP, Seq, strip_gaps


class EmptyMatrix(ValueError):
    pass


@dataclass
class Candidate:
    form: Seq
    cumulative_cost: float = 0.0
    provenance: str = "parsimony"
    score_components: dict[str, float] = field(default_factory=dict)
    # per-column symbol choices (gaps included) for parsimony candidates
    choices: tuple[str, ...] = ()

    @property
    def text(self) -> str:
        return "".join(self.form)


@dataclass
class BeamConfig:
    beam_width: int = 10
    candidate_cap: int = 50
    rerank_top: int = 10
    max_iterations: int = 5

    def __post_init__(self):
        for name in ("beam_width", "candidate_cap", "rerank_top", "max_iterations"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.rerank_top > self.candidate_cap:
            raise ValueError("rerank_top must not exceed candidate_cap")


def column_extension_cost(sigma: str, column: tuple[str, ...]) -> int:
    """Mismatch count for choosing ``sigma`` in this column.

    A real symbol pays 1 for every differing cell and every gap cell; the gap
    option pays 1 for every non-gap cell.
    """
    if sigma == GAP:
        return sum(1 for c in column if c != GAP)
    return sum(1 for c in column if c == GAP or c != sigma)


def _search(W: AlignmentMatrix, width: int) -> tuple[list[tuple[tuple[str, ...], int]], bool]:
    beam: list[tuple[tuple[str, ...], int]] = [((), 0)]
    pruned = False
    for col in W.columns():
        options = sorted({c for c in col if c != GAP}) + [GAP]
        costs = {s: column_extension_cost(s, col) for s in options}
        extended = [(ch + (s,), cost + costs[s]) for ch, cost in beam for s in options]
        extended.sort(key=lambda e: (e[1], strip_gaps(e[0]), e[0]))
        if len(extended) > width:
            pruned = True
        beam = extended[:width]
    return beam, pruned


def beam_reconstruct(W: AlignmentMatrix, cfg: BeamConfig | None = None) -> list[Candidate]:
    """Return gap-stripped parsimony candidates in ascending cost order.

    The search is restarted with a doubled beam (up to ``max_iterations``
    runs) while fewer than ``rerank_top`` distinct forms survive and the
    previous run actually pruned something.
    """
    cfg = cfg or BeamConfig()
    if not W.rows or W.width == 0:
        raise EmptyMatrix("alignment matrix has no cells")

    width = cfg.beam_width
    best: dict[Seq, tuple[int, tuple[str, ...]]] = {}
    for _ in range(cfg.max_iterations):
        beam, pruned = _search(W, width)
        best = {}
        for choices, cost in beam:
            form = strip_gaps(choices)
            if not form:
                continue
            if form not in best or (cost, choices) < best[form]:
                best[form] = (cost, choices)
        if len(best) >= cfg.rerank_top or not pruned:
            break
        width *= 2

    ordered = sorted(best.items(), key=lambda kv: (kv[1][0], kv[0]))
    return [
        Candidate(form, float(cost), "parsimony", {}, choices)
        for form, (cost, choices) in ordered[: cfg.candidate_cap]
    ]


def rescore(W: AlignmentMatrix, choices: tuple[str, ...]) -> int:
    """Recompute the cumulative cost of a column-choice history."""
    return sum(column_extension_cost(s, col) for s, col in zip(choices, W.columns()))
