"""End-to-end orchestration of the reconstruction variants."""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Sequence

from .config import ConfigError, PipelineConfig
from .evolve import EvoTrace, evolve, seed_population
from .ingest import CognateSet, pad_align, parse_dataset, serialize_dataset
from .metrics import EvalReport, char_accuracy, evaluate
from .parsimony import Candidate, beam_reconstruct
from .phono import FeatureTable, Seq, detokenize, feature_distance, levenshtein
from .ranker import rank_candidates
from .rules import (RuleFileError, RuleInventory, parse_rules, reverse_transform, synthesize_dataset,
                    top_pathways)


class DataError(ValueError):
    pass


def bundled(name: str) -> Path:
    """Filesystem path of a data file shipped with the package."""
    return Path(str(resources.files("protorecon.data").joinpath(name)))


def resolve(path: str | None) -> Path | None:
    """Return ``path`` itself, or the bundled file of that name when no such file exists."""
    if path is None:
        return None
    p = Path(path)
    if p.exists():
        return p
    b = bundled(p.name)
    if p.parent == Path(".") and b.exists():
        return b
    raise ConfigError(f"file not found: {path}")


def sha256_file(path: Path | None) -> str | None:
    if path is None:
        return None
    return hashlib.sha256(path.read_bytes()).hexdigest()


# -- resources -------------------------------------------------------------------


@dataclass
class Resources:
    table: FeatureTable
    inventory: RuleInventory


def load_resources(cfg: PipelineConfig) -> Resources:
    try:
        features = resolve(cfg.paths.features)
        table = FeatureTable.load(features) if features else FeatureTable.default()
        inventory = RuleInventory.load(
            table,
            [resolve(p) for p in cfg.paths.rules],
            resolve(cfg.paths.cues),
            resolve(cfg.paths.constraints),
            cfg.languages,
            cfg.proto_language,
            cfg.phylogeny,
        )
    except (RuleFileError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    return Resources(table, inventory)


def load_sets(cfg: PipelineConfig, table: FeatureTable) -> list[CognateSet]:
    path = resolve(cfg.paths.dataset)
    if path is None:
        raise ConfigError("no dataset given")
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_dataset(fh, table, cfg.languages, cfg.gold_column, cfg.pre_aligned)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc


# -- per-set reconstruction --------------------------------------------------------


def _phase_one(cs: CognateSet, cfg: PipelineConfig, res: Resources) -> tuple[list[Candidate], list[Candidate]]:
    W = pad_align(cs, cfg.include_absent)
    raw = beam_reconstruct(W, cfg.beam)
    reflexes = list(cs.present().values())
    ranked = rank_candidates(raw, reflexes, res.table, cfg.ranker, top=cfg.beam.rerank_top)
    return raw, ranked


def _pathway_seeds(ranked: Sequence[Candidate], cs: CognateSet, cfg: PipelineConfig,
                   res: Resources) -> list[Candidate]:
    tops = top_pathways(ranked, res.inventory, cfg.pathway, languages=list(cs.present()))
    return [c for lang in tops for c in tops[lang]]


def _reflex_seeds(cs: CognateSet, cfg: PipelineConfig, res: Resources) -> list[Candidate]:
    out = []
    for lang, w in cs.present().items():
        langs = res.inventory.languages if cfg.ext_all_languages else (lang,)
        for rule_lang in langs:
            found = reverse_transform(Candidate(w, provenance=f"reflex:{lang}"), rule_lang,
                                      res.inventory, cfg.pathway)
            out.extend(found[: cfg.pathway.top_k])
    return out


def reconstruct_set(cs: CognateSet, cfg: PipelineConfig, res: Resources) -> tuple[Candidate, EvoTrace | None]:
    """Run the configured variant on one cognate set."""
    if cfg.variant == "m-unranked":
        W = pad_align(cs, cfg.include_absent)
        return beam_reconstruct(W, cfg.beam)[0], None
    raw, ranked = _phase_one(cs, cfg, res)
    if cfg.variant == "m-ranked":
        return ranked[0], None

    paths = _pathway_seeds(ranked, cs, cfg, res)
    evo_cfg = replace(cfg.evo, seed=cfg.seed)
    if cfg.variant == "ranked-path-prob":
        parsimony_seeds: list[Candidate] = []
    else:
        parsimony_seeds = list(ranked)
    if cfg.variant == "ranked-prob-evo-ext":
        paths = paths + _reflex_seeds(cs, cfg, res)
    seeds = seed_population(parsimony_seeds, paths, cs, res.inventory, evo_cfg)
    return evolve(cs, seeds, res.inventory, evo_cfg)


@dataclass
class SetResult:
    id: int
    prediction: Seq | None
    provenance: str = ""
    error: str | None = None
    trace: EvoTrace | None = None


def _run_one(cs: CognateSet, cfg: PipelineConfig, res: Resources) -> SetResult:
    try:
        best, trace = reconstruct_set(cs, cfg, res)
    except Exception as exc:  # isolate failures to their own set
        return SetResult(cs.id, None, "", f"{type(exc).__name__}: {exc}")
    return SetResult(cs.id, tuple(best.form), best.provenance, None, trace)


_WORKER: dict = {}


def _init_worker(cfg: PipelineConfig, res: Resources) -> None:
    _WORKER["cfg"] = cfg
    _WORKER["res"] = res


def _work(cs: CognateSet) -> SetResult:
    return _run_one(cs, _WORKER["cfg"], _WORKER["res"])


def run_sets(sets: Sequence[CognateSet], cfg: PipelineConfig, res: Resources | None = None) -> list[SetResult]:
    """Reconstruct every set, in parallel when ``cfg.jobs > 1``; results ordered by set id."""
    res = res or load_resources(cfg)
    if cfg.jobs == 1 or len(sets) < 2:
        results = [_run_one(cs, cfg, res) for cs in sets]
    else:
        with ProcessPoolExecutor(max_workers=cfg.jobs, initializer=_init_worker, initargs=(cfg, res)) as ex:
            results = list(ex.map(_work, sets, chunksize=max(1, len(sets) // (4 * cfg.jobs))))
    return sorted(results, key=lambda r: r.id)


# -- manifest ------------------------------------------------------------------------


@dataclass
class RunManifest:
    config: dict
    digests: dict
    results: list[SetResult]
    golds: list[Seq | None]
    report: EvalReport
    table: FeatureTable = field(repr=False, compare=False)
    timing: dict = field(default_factory=dict, compare=False)

    @property
    def failed(self) -> list[int]:
        return [r.id for r in self.results if r.error is not None]

    @property
    def traces(self) -> list[EvoTrace]:
        return [r.trace for r in self.results if r.trace is not None]

    def predictions_tsv(self) -> str:
        lines = ["id\tgold\tprediction\tprovenance\tstatus\tc_acc\tedit_dist\tfeat_dist"]
        for r, gold in zip(self.results, self.golds):
            pred = detokenize(r.prediction) if r.prediction is not None else ""
            status = "ok" if r.error is None else "failed"
            if gold:
                p = r.prediction or ()
                metrics = (f"{char_accuracy(p, gold):.6f}", str(levenshtein(p, gold)),
                           f"{feature_distance(p, gold, self.table):.6f}")
            else:
                metrics = ("", "", "")
            lines.append("\t".join((str(r.id), detokenize(gold) if gold else "", pred,
                                    r.provenance, status) + metrics))
        return "\n".join(lines) + "\n"

    def traces_jsonl(self) -> str:
        return "".join(t.to_jsonl() for t in self.traces)

    def to_json(self) -> str:
        body = {
            "config": self.config,
            "digests": self.digests,
            "predictions": [
                {"id": r.id, "prediction": detokenize(r.prediction) if r.prediction is not None else None,
                 "error": r.error}
                for r in self.results
            ],
            "report": json.loads(self.report.to_json()),
            "timing": self.timing,
        }
        return json.dumps(body, ensure_ascii=False, indent=2, sort_keys=True) + "\n"


def _digests(cfg: PipelineConfig, sets: Sequence[CognateSet]) -> dict:
    return {
        "dataset": hashlib.sha256(
            serialize_dataset(sets, cfg.languages, cfg.gold_column or "latin").encode("utf-8")
        ).hexdigest(),
        "features": sha256_file(resolve(cfg.paths.features)),
        "rules": [sha256_file(resolve(p)) for p in cfg.paths.rules],
        "cues": sha256_file(resolve(cfg.paths.cues)),
        "constraints": sha256_file(resolve(cfg.paths.constraints)),
    }


def run_pipeline(cfg: PipelineConfig, sets: Sequence[CognateSet] | None = None,
                 res: Resources | None = None) -> RunManifest:
    """Load inputs (unless ``sets`` is given), reconstruct every set and evaluate."""
    t0 = time.perf_counter()
    res = res or load_resources(cfg)
    if sets is None:
        sets = load_sets(cfg, res.table)
    t1 = time.perf_counter()
    results = run_sets(sets, cfg, res)
    t2 = time.perf_counter()
    golds = [cs.gold for cs in sets]
    report = evaluate([r.prediction for r in results], golds, res.table, res.inventory.constraints)
    t3 = time.perf_counter()
    return RunManifest(
        cfg.to_dict(), _digests(cfg, sets), results, golds, report, res.table,
        {"load": t1 - t0, "reconstruct": t2 - t1, "evaluate": t3 - t2},
    )


# -- experiments ---------------------------------------------------------------------


@dataclass
class SweepPoint:
    size: int
    rules: int
    report: EvalReport


def normalize_curves(points: Sequence[SweepPoint]) -> dict[str, list[float]]:
    """Min-max normalize each metric across sweep points (constant curves map to 0)."""
    curves = {}
    for name in EvalReport.METRICS:
        vals = [getattr(p.report, name) for p in points]
        lo, hi = min(vals), max(vals)
        curves[name] = [0.0 if hi == lo else (v - lo) / (hi - lo) for v in vals]
    return curves


def run_rule_sweep(
    cfg: PipelineConfig,
    rule_files: Sequence[str],
    sets: Sequence[CognateSet] | None = None,
    by: str = "file",
) -> tuple[list[SweepPoint], dict[str, list[float]]]:
    """Rerun the configured variant on growing prefixes of the rule list.

    ``by="file"`` adds one rule file per step; ``by="rule"`` flattens the
    files and adds one rule line per step.
    """
    if not rule_files:
        raise ConfigError("sweep needs at least one rule file")
    if by not in ("file", "rule"):
        raise ConfigError(f"unknown sweep unit {by!r}")
    base = load_resources(replace(cfg, paths=replace(cfg.paths, rules=[])))
    if sets is None:
        sets = load_sets(cfg, base.table)
    full = load_resources(replace(cfg, paths=replace(cfg.paths, rules=list(rule_files))))

    steps: list[tuple[int, dict]] = []
    if by == "file":
        acc: dict = {}
        for i, path in enumerate(rule_files, 1):
            inv = RuleInventory.load(base.table, resolve(path), languages=cfg.languages,
                                     proto_language=cfg.proto_language, phylogeny=cfg.phylogeny)
            for lang, rs in inv.rules.items():
                acc.setdefault(lang, []).extend(rs)
            steps.append((i, {k: list(v) for k, v in acc.items()}))
    else:
        flat = [r for p in rule_files
                for r in parse_rules(resolve(p).read_text(encoding="utf-8"), base.table,
                                     full.inventory.languages, source=str(p))]
        for i in range(1, len(flat) + 1):
            acc = {}
            for r in flat[:i]:
                acc.setdefault(r.language, []).append(r)
            steps.append((i, acc))

    points = []
    for size, rule_map in steps:
        inv = replace(full.inventory, rules=rule_map)
        manifest = run_pipeline(cfg, sets, Resources(base.table, inv))
        points.append(SweepPoint(size, sum(len(v) for v in rule_map.values()), manifest.report))
    return points, normalize_curves(points)


def run_synthetic(
    cfg: PipelineConfig,
    protoforms: Sequence[Seq],
    noise: float = 0.0,
    gen_seed: int = 0,
) -> tuple[list[CognateSet], RunManifest, EvalReport]:
    """Derive a corpus from ``protoforms`` with the configured rules, then reconstruct it."""
    res = load_resources(cfg)
    sets = synthesize_dataset(protoforms, res.inventory, noise, gen_seed)
    manifest = run_pipeline(cfg, sets, res)
    return sets, manifest, manifest.report
