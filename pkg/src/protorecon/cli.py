"""Command-line interface.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 some sets failed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ENV_PREFIX, OVERRIDES, VARIANTS, ConfigError, load_config, set_dotted
from .evolve import EvoTrace
from .ingest import serialize_dataset
from .metrics import EvalReport, evaluate
from .phono import FeatureTable, UnknownSymbol, tokenize
from .pipeline import DataError, load_resources, run_pipeline, run_rule_sweep, run_synthetic
from .rules import random_protoforms

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_PARTIAL = 0, 1, 2, 3
REPORT_SUFFIX = {"tsv": "tsv", "json": "json", "summary": "txt"}

# per-module flags and their value types
TUNING = {
    "beam-width": int,
    "candidate-cap": int,
    "rerank-top": int,
    "top-k": int,
    "depth": int,
    "cap": int,
    "pool-size": int,
    "max-rounds": int,
    "theta-div": float,
    "patience": int,
}


def _common(p: argparse.ArgumentParser, dataset: bool = True) -> None:
    p.add_argument("--config", help="YAML file layered over the bundled defaults")
    p.add_argument("--variant", choices=VARIANTS)
    if dataset:
        p.add_argument("--dataset", help="TSV wordlist with a header row")
    p.add_argument("--rules", nargs="+", metavar="FILE", help="rule files, applied in the given order")
    p.add_argument("--cues", help="morphological cue file")
    p.add_argument("--constraints", help="phonotactic constraint file")
    p.add_argument("--features", help="phoneme feature table (default: bundled)")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, help="worker processes")
    p.add_argument("--out", help="output directory")
    p.add_argument("--report-format", choices=("tsv", "json", "summary"))
    p.add_argument("--psi-scheme", choices=("uniform", "depth"))
    for flag, kind in TUNING.items():
        p.add_argument(f"--{flag}", type=kind)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="protorecon",
        description="Reconstruct protoforms from cognate sets.",
        epilog=f"Every flag can also be set through {ENV_PREFIX}<FLAG> environment variables "
               f"(e.g. {ENV_PREFIX}BEAM_WIDTH=20).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reconstruct", help="reconstruct every cognate set of a dataset")
    _common(p)
    p.add_argument("--trace", help="write evolution traces (JSON lines) here")

    p = sub.add_parser("evaluate", help="score a predictions file against its gold column")
    p.add_argument("predictions", help="TSV with 'gold' and 'prediction' columns")
    p.add_argument("--features")
    p.add_argument("--constraints")
    p.add_argument("--report-format", choices=("tsv", "json", "summary"), default="summary")
    p.add_argument("--prose-normalization", action="store_true",
                   help="divide MCER and N_EDIT_DIST totals by the number of pairs")

    p = sub.add_parser("sweep-rules", help="rerun the pipeline on growing prefixes of the rule list")
    _common(p)
    p.add_argument("--by", choices=("file", "rule"), default="file")

    p = sub.add_parser("synth", help="derive a synthetic corpus with the rules and reconstruct it")
    _common(p, dataset=False)
    p.add_argument("--protoforms", help="one protoform per line (default: random Latin-like forms)")
    p.add_argument("--count", type=int, default=100, help="random protoforms to draw")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--gen-seed", type=int, default=0)
    p.add_argument("--trace")

    p = sub.add_parser("inspect-trace", help="summarize a trace file")
    p.add_argument("trace")
    p.add_argument("--set", type=int, dest="set_id", help="show every round of one set")
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    out: dict = {}
    for flag, key in OVERRIDES.items():
        value = getattr(args, flag.replace("-", "_"), None)
        if value is not None:
            set_dotted(out, key, value)
    return out


def _config(args):
    return load_config(getattr(args, "config", None), _overrides(args))


def _write(out: str | None, name: str, text: str) -> None:
    if out is None:
        return
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    (d / name).write_text(text, encoding="utf-8")


def _emit_run(args, cfg, manifest) -> int:
    report = manifest.report.render(cfg.report_format)
    if args.out:
        _write(args.out, "predictions.tsv", manifest.predictions_tsv())
        _write(args.out, "manifest.json", manifest.to_json())
        _write(args.out, "report." + REPORT_SUFFIX[cfg.report_format], report)
    else:
        sys.stdout.write(manifest.predictions_tsv())
    sys.stdout.write(report)
    if getattr(args, "trace", None):
        Path(args.trace).write_text(manifest.traces_jsonl(), encoding="utf-8")
    for r in manifest.results:
        if r.error:
            print(f"set {r.id} failed: {r.error}", file=sys.stderr)
    return EXIT_PARTIAL if manifest.failed else EXIT_OK


def cmd_reconstruct(args) -> int:
    cfg = _config(args)
    return _emit_run(args, cfg, run_pipeline(cfg))


def cmd_evaluate(args) -> int:
    table = FeatureTable.load(args.features) if args.features else FeatureTable.default()
    constraints = None
    if args.constraints:
        from .rules import parse_constraints

        constraints = parse_constraints(Path(args.constraints).read_text(encoding="utf-8"), table)
    lines = Path(args.predictions).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise DataError("empty predictions file")
    header = lines[0].split("\t")
    if "gold" not in header or "prediction" not in header:
        raise DataError("predictions file needs 'gold' and 'prediction' columns")
    gi, pi = header.index("gold"), header.index("prediction")
    preds, golds = [], []
    for lineno, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        cells = line.split("\t")
        try:
            golds.append(tokenize(cells[gi], table) if cells[gi] else None)
            preds.append(tokenize(cells[pi], table) if pi < len(cells) and cells[pi] else None)
        except (IndexError, UnknownSymbol) as exc:
            raise DataError(f"line {lineno}: {exc}") from exc
    report = evaluate(preds, golds, table, constraints, args.prose_normalization)
    sys.stdout.write(report.render(args.report_format))
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    if not cfg.paths.rules:
        raise ConfigError("sweep-rules needs --rules")
    points, curves = run_rule_sweep(cfg, cfg.paths.rules, by=args.by)
    names = EvalReport.METRICS
    rows = ["\t".join(("size", "rules") + names + tuple(f"norm_{n}" for n in names))]
    for i, pt in enumerate(points):
        raw = tuple(f"{getattr(pt.report, n):.6f}" for n in names)
        norm = tuple(f"{curves[n][i]:.6f}" for n in names)
        rows.append("\t".join((str(pt.size), str(pt.rules)) + raw + norm))
    text = "\n".join(rows) + "\n"
    _write(args.out, "sweep.tsv", text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = _config(args)
    if args.protoforms:
        table = load_resources(cfg).table
        try:
            protos = [tokenize(line.strip(), table)
                      for line in Path(args.protoforms).read_text(encoding="utf-8").splitlines()
                      if line.strip() and not line.startswith("#")]
        except UnknownSymbol as exc:
            raise DataError(str(exc)) from exc
    else:
        protos = random_protoforms(args.count, args.gen_seed)
    sets, manifest, _ = run_synthetic(cfg, protos, args.noise, args.gen_seed)
    _write(args.out, "corpus.tsv", serialize_dataset(sets, cfg.languages, cfg.gold_column or "latin"))
    return _emit_run(args, cfg, manifest)


def cmd_inspect(args) -> int:
    try:
        with open(args.trace, encoding="utf-8") as fh:
            traces = EvoTrace.from_jsonl(fh)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise DataError(f"cannot read trace {args.trace}: {exc}") from exc
    if args.set_id is not None:
        traces = [t for t in traces if t.set_id == args.set_id]
        if not traces:
            raise DataError(f"no trace for set {args.set_id}")
        for r in traces[0].rounds:
            best = max(r.fitness)
            print(f"round {r.round}\tbest {best:.4f}\tdiversity {r.diversity:.3f}\t"
                  f"pool {' '.join(r.forms)}\teliminated {' '.join(r.eliminated) or '-'}\t"
                  f"mutants {' '.join(r.mutants) or '-'}")
        print(f"stop: {traces[0].reason}\tbest: {traces[0].best}")
        return EXIT_OK
    print("set\trounds\treason\tbest\tfitness")
    for t in traces:
        top = max(t.rounds[-1].fitness) if t.rounds else float("nan")
        print(f"{t.set_id}\t{len(t.rounds)}\t{t.reason}\t{t.best}\t{top:.4f}")
    return EXIT_OK


COMMANDS = {
    "reconstruct": cmd_reconstruct,
    "evaluate": cmd_evaluate,
    "sweep-rules": cmd_sweep,
    "synth": cmd_synth,
    "inspect-trace": cmd_inspect,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
