"""Command-line entry point: ``diarfuse {diarize,fuse,score,simulate,stats}``.

Exit status: 0 on success, 1 on bad input (files, formats, configuration),
2 when an internal invariant is violated.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .dover import FusionConfigError
from .embedding import EmbeddingFormatError
from .metrics import DEFAULT_OVERLAP_BINS, ScoringConfig
from .pipeline import (
    ConfigError,
    InputError,
    read_ini,
    load_pipeline_config,
    load_systems,
    parse_fusion_section,
    parse_simulate_section,
    run_fusion,
    run_score,
    run_simulate,
    run_single_system,
    run_stats,
)
from .rttm import ParseError, write_rttm
from .synthetic import SimulationError

log = logging.getLogger("diarfuse")

INPUT_ERRORS = (
    ConfigError, InputError, ParseError, EmbeddingFormatError, SimulationError,
    FusionConfigError, OSError,
)


def _scoring_from_args(args, base: ScoringConfig) -> ScoringConfig:
    collar = base.collar_ms if args.collar is None else args.collar
    overlap = base.score_overlap and not args.no_overlap_scoring
    return ScoringConfig(collar, overlap)


def _emit(text: str, out: Path | None, name: str) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text, encoding="utf-8")


def cmd_diarize(args) -> int:
    cfg = load_pipeline_config(args.config)
    cfg = dataclasses.replace(cfg, scoring=_scoring_from_args(args, cfg.scoring))
    out = args.out or cfg.out_dir
    if out is None:
        raise ConfigError("no output directory: pass --out or set [output] dir")
    run_single_system(cfg, jobs=args.jobs, out_dir=out, seed=args.seed)
    return 0


def cmd_fuse(args) -> int:
    systems = load_systems(args.rttm)
    text = Path(args.config).read_text(encoding="utf-8") if args.config else ""
    fcfg = parse_fusion_section(text, list(systems))
    if args.root:
        fcfg = dataclasses.replace(fcfg, root_id=args.root)
    fused, _ = run_fusion(systems, fcfg)
    _emit(write_rttm(fused), args.out, "fused.rttm")
    return 0


def cmd_score(args) -> int:
    cfg = _scoring_from_args(args, ScoringConfig())
    report = run_score(args.reference, args.hypothesis, cfg)
    _emit(report.to_tsv(), args.out, "report.tsv")
    return 0


def cmd_simulate(args) -> int:
    text = Path(args.config).read_text(encoding="utf-8") if args.config else ""
    base, n_rec, targets = parse_simulate_section(text)
    if args.seed is not None:
        base = dataclasses.replace(base, seed=args.seed)
    if args.out is None:
        raise ConfigError("simulate needs --out")
    run_simulate(base, args.out, n_rec, targets)
    return 0


def cmd_stats(args) -> int:
    bins = DEFAULT_OVERLAP_BINS
    if args.config:
        p = read_ini(Path(args.config).read_text(encoding="utf-8"))
        if p.has_section("stats") and "overlap_bins" in p["stats"]:
            try:
                bins = [float(x) for x in p["stats"]["overlap_bins"].split(",")]
            except ValueError:
                raise ConfigError("overlap_bins must be comma-separated numbers") from None
    _emit(run_stats(args.reference, bins).to_tsv(), args.out, "stats.tsv")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diarfuse", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def scoring_flags(p):
        p.add_argument("--collar", type=int, default=None, metavar="MS",
                       help="no-score collar around reference boundaries (default 250)")
        p.add_argument("--no-overlap-scoring", action="store_true",
                       help="exclude overlapped reference speech from scoring")

    p = sub.add_parser("diarize", help="run a single diarization system")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--jobs", type=int, default=1, metavar="N")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=Path, default=None, metavar="DIR")
    scoring_flags(p)
    p.set_defaults(func=cmd_diarize)

    p = sub.add_parser("fuse", help="fuse RTTM hypotheses with root-anchored voting")
    p.add_argument("rttm", nargs="+", type=Path, help="system RTTMs; id = file stem")
    p.add_argument("--config", type=Path, default=None, help="file with a [fusion] section")
    p.add_argument("--root", default=None, help="root system id (default: first RTTM)")
    p.add_argument("--out", type=Path, default=None, metavar="DIR")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("score", help="DER/JER report")
    p.add_argument("reference", type=Path)
    p.add_argument("hypothesis", type=Path)
    p.add_argument("--out", type=Path, default=None, metavar="DIR")
    scoring_flags(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("simulate", help="generate a synthetic corpus")
    p.add_argument("--config", type=Path, default=None, help="file with a [simulate] section")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=Path, default=None, metavar="DIR")
    p.add_argument("--jobs", type=int, default=1, metavar="N", help="accepted for symmetry")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("stats", help="overlap ratio and speaker-count statistics")
    p.add_argument("reference", type=Path)
    p.add_argument("--config", type=Path, default=None, help="file with a [stats] section")
    p.add_argument("--out", type=Path, default=None, metavar="DIR")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except INPUT_ERRORS as exc:
        print(f"diarfuse: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # invariant violations and bugs
        print(f"diarfuse: internal error: {exc!r}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
