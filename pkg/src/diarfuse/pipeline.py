"""End-to-end runs: diarize, fuse, score, simulate, stats.

Configuration files are INI-style (``[section]`` headers, ``key = value``
lines).  Only documented keys are accepted.  Relative paths resolve
against the directory holding the config file.

Example::

    [segmentation]
    merge_threshold = 0.55

    [clustering]
    ahc_stop_threshold = 0.55
    min_speaker_duration_ms = 2500
    sv_threshold = 0.0

    [leakage]
    threshold = 0.2

    [scoring]
    collar_ms = 250
    reference = reference.rttm

    [recording rec1]
    channels = rec1.ch0.embs, rec1.ch1.embs
    mixed = rec1.mix.embs
    uem = speech.uem
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from . import __version__
from .clustering import ClusteringConfig, DiarizationResult, cluster_segments, leakage_filter
from .dover import FusionConfig, fuse
from .embedding import EmbeddingStream, read_embeddings, write_embeddings
from .metrics import (
    DEFAULT_OVERLAP_BINS,
    CorpusStats,
    ScoreReport,
    ScoringConfig,
    corpus_stats,
    score_recordings,
)
from .rttm import read_rttm, read_uem, write_rttm, write_uem
from .segmentation import SegmentationConfig, segment_stream
from .synthetic import SyntheticConfig, synthesize_conversation
from .timeline import Hypothesis, Timeline

log = logging.getLogger(__name__)

MAX_CHANNELS = 2


class ConfigError(ValueError):
    pass


class InputError(ValueError):
    pass


@dataclass(frozen=True)
class LeakageConfig:
    threshold: float = 0.2
    channel1_only: bool = False
    reference_clustering: ClusteringConfig | None = None


@dataclass(frozen=True)
class RecordingInputs:
    recording_id: str
    channels: tuple[Path, ...]
    mixed: Path | None = None
    uem: Path | None = None


@dataclass(frozen=True)
class PipelineConfig:
    recordings: tuple[RecordingInputs, ...] = ()
    segmentation: SegmentationConfig = SegmentationConfig()
    clustering: ClusteringConfig = ClusteringConfig()
    leakage: LeakageConfig | None = None
    scoring: ScoringConfig = ScoringConfig()
    reference_rttm: Path | None = None
    out_dir: Path | None = None
    source_text: str = field(default="", repr=False, compare=False)
    base_dir: Path = field(default=Path("."), compare=False)


# ---------------------------------------------------------------- config I/O

_SECTIONS = {
    "segmentation": {"merge_threshold"},
    "clustering": {"ahc_stop_threshold", "min_speaker_duration_ms", "sv_threshold"},
    "leakage": {
        "threshold", "channel1_only",
        "reference_ahc_stop_threshold", "reference_min_speaker_duration_ms",
        "reference_sv_threshold",
    },
    "scoring": {"collar_ms", "score_overlap", "reference"},
    "output": {"dir"},
    "fusion": {"root", "weights", "threshold"},
    "simulate": {f.name for f in dataclasses.fields(SyntheticConfig)}
    | {"recordings", "overlap_targets"},
    "stats": {"overlap_bins"},
}
_RECORDING_KEYS = {"channels", "mixed", "uem"}


def read_ini(text: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    for name in parser.sections():
        if name.startswith("recording "):
            allowed = _RECORDING_KEYS
        elif name in _SECTIONS:
            allowed = _SECTIONS[name]
        else:
            raise ConfigError(f"unknown section [{name}]")
        unknown = set(parser[name]) - allowed
        if unknown:
            raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(sorted(unknown))}")
    return parser


def _get(section, key, conv, default):
    if section is None or key not in section:
        return default
    raw = section[key].strip()
    try:
        if conv is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return conv(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def _split_list(raw: str) -> list[str]:
    return [item.strip() for item in raw.split(",") if item.strip()]


def parse_pipeline_config(text: str, base_dir: Path | str = ".") -> PipelineConfig:
    base = Path(base_dir)
    p = read_ini(text)
    sec = lambda name: p[name] if p.has_section(name) else None  # noqa: E731

    def path(raw: str | None) -> Path | None:
        if raw is None or not raw.strip():
            return None
        q = Path(raw.strip())
        return q if q.is_absolute() else base / q

    seg = SegmentationConfig(_get(sec("segmentation"), "merge_threshold", float, 0.55))
    c = sec("clustering")
    clu = ClusteringConfig(
        _get(c, "ahc_stop_threshold", float, 0.55),
        _get(c, "min_speaker_duration_ms", int, 2500),
        _get(c, "sv_threshold", float, 0.0),
    )
    leakage = None
    if p.has_section("leakage"):
        lk = p["leakage"]
        ref_clu = None
        if any(k.startswith("reference_") for k in lk):
            ref_clu = ClusteringConfig(
                _get(lk, "reference_ahc_stop_threshold", float, clu.ahc_stop_threshold),
                _get(lk, "reference_min_speaker_duration_ms", int, clu.min_speaker_duration_ms),
                _get(lk, "reference_sv_threshold", float, clu.sv_threshold),
            )
        leakage = LeakageConfig(
            _get(lk, "threshold", float, 0.2), _get(lk, "channel1_only", bool, False), ref_clu
        )
    s = sec("scoring")
    scoring = ScoringConfig(_get(s, "collar_ms", int, 250), _get(s, "score_overlap", bool, True))
    reference = path(s.get("reference")) if s is not None else None
    out = sec("output")
    out_dir = path(out.get("dir")) if out is not None else None

    recordings = []
    for name in p.sections():
        if not name.startswith("recording "):
            continue
        rec_id = name[len("recording "):].strip()
        r = p[name]
        channels = tuple(path(x) for x in _split_list(r.get("channels", "")))
        if not channels:
            raise ConfigError(f"[{name}] lists no channels")
        if len(channels) > MAX_CHANNELS:
            raise ConfigError(f"[{name}] lists {len(channels)} channels; at most 2 allowed")
        recordings.append(RecordingInputs(rec_id, channels, path(r.get("mixed")), path(r.get("uem"))))
    return PipelineConfig(
        tuple(recordings), seg, clu, leakage, scoring, reference, out_dir, text, base
    )


def load_pipeline_config(path) -> PipelineConfig:
    path = Path(path)
    return parse_pipeline_config(path.read_text(encoding="utf-8"), path.parent)


def parse_fusion_section(text: str, hyp_ids: Sequence[str]) -> FusionConfig:
    """Read ``[fusion]``; missing keys default to root = first id, 1.0 / 0.34 / 1.0."""
    p = read_ini(text)
    f = p["fusion"] if p.has_section("fusion") else None
    root = _get(f, "root", str, hyp_ids[0] if hyp_ids else "")
    others = [h for h in hyp_ids if h != root]
    default = FusionConfig.best_plus_agreement(root, others)
    if f is not None and "weights" in f:
        weights = []
        for item in _split_list(f["weights"]):
            hyp_id, sep, w = item.rpartition(":")
            if not sep:
                raise ConfigError(f"weights entry {item!r} is not id:weight")
            try:
                weights.append((hyp_id.strip(), float(w)))
            except ValueError:
                raise ConfigError(f"bad weight in {item!r}") from None
    else:
        weights = list(default.weights)
    return FusionConfig(weights, root, _get(f, "threshold", float, default.vote_threshold))


def parse_simulate_section(text: str) -> tuple[SyntheticConfig, int, list[float] | None]:
    p = read_ini(text)
    s = p["simulate"] if p.has_section("simulate") else None
    kwargs = {}
    for f in dataclasses.fields(SyntheticConfig):
        if s is not None and f.name in s:
            conv = {"int": int, "float": float, "str": str}[f.type]
            kwargs[f.name] = _get(s, f.name, conv, None)
    n_rec = _get(s, "recordings", int, 1)
    targets = None
    if s is not None and "overlap_targets" in s:
        try:
            targets = [float(x) for x in _split_list(s["overlap_targets"])]
        except ValueError:
            raise ConfigError("overlap_targets must be comma-separated numbers") from None
    try:
        return SyntheticConfig(**kwargs), n_rec, targets
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------- diarize

def _load_stream(path: Path, rec_id: str, channel: int) -> EmbeddingStream:
    if not path.exists():
        raise InputError(f"missing embedding file {path}")
    stream = read_embeddings(path)
    return dataclasses.replace(stream, recording_id=rec_id, channel=channel)


def _regions_for(rec: RecordingInputs, streams: Sequence[EmbeddingStream]) -> Timeline:
    if rec.uem is None:
        end = max((s.end_ms for s in streams), default=0)
        start = min((s.start_offset_ms for s in streams), default=0)
        return Timeline([(start, end)]) if end > start else Timeline()
    if not rec.uem.exists():
        raise InputError(f"missing UEM file {rec.uem}")
    for item in read_uem(rec.uem):
        if item.recording_id == rec.recording_id:
            return item.regions
    return Timeline()


def diarize_recording(
    rec: RecordingInputs, cfg: PipelineConfig
) -> tuple[DiarizationResult, list[str]]:
    """Segment every channel, pool, optionally leakage-filter, then cluster."""
    warnings: list[str] = []
    if len(rec.channels) > MAX_CHANNELS:
        raise InputError(f"{rec.recording_id}: more than {MAX_CHANNELS} channels")
    streams = [_load_stream(p, rec.recording_id, ch) for ch, p in enumerate(rec.channels)]
    regions = _regions_for(rec, streams)
    per_channel = [segment_stream(s, regions, cfg.segmentation) for s in streams]

    if cfg.leakage is not None:
        if rec.mixed is None:
            raise ConfigError(f"{rec.recording_id}: leakage filtering needs a 'mixed' stream")
        mixed = _load_stream(rec.mixed, rec.recording_id, 0)
        ref_clu = cfg.leakage.reference_clustering or cfg.clustering
        ref = cluster_segments(
            segment_stream(mixed, regions, cfg.segmentation), ref_clu, rec.recording_id
        )
        if not ref.speaker_clusters:
            warnings.append(
                f"{rec.recording_id}: reference system found no speaker clusters; "
                "leakage filtering skipped"
            )
        else:
            cents = ref.centroids()
            for ch, segs in enumerate(per_channel):
                if cfg.leakage.channel1_only and ch != 1:
                    continue
                per_channel[ch] = leakage_filter(segs, cents, cfg.leakage.threshold)

    pooled = [seg for segs in per_channel for seg in segs]
    result = cluster_segments(pooled, cfg.clustering, rec.recording_id)
    result = dataclasses.replace(result, hypothesis=result.hypothesis.crop(regions))
    return result, warnings


def _diarize_job(args):
    rec, cfg = args
    result, warnings = diarize_recording(rec, cfg)
    return result.hypothesis, warnings


def _file_digest(path: Path | None) -> str | None:
    if path is None or not path.exists():
        return None
    return hashlib.sha256(path.read_bytes()).hexdigest()


@dataclass
class RunManifest:
    command: str
    config_text: str
    config_dir: str
    outputs: dict[str, str] = field(default_factory=dict)
    inputs: dict[str, dict[str, str | None]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    seed: int | None = None
    version: str = __version__

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls(**json.loads(text))


def run_single_system(
    cfg: PipelineConfig, jobs: int = 1, out_dir: Path | str | None = None, seed: int | None = None
) -> tuple[list[Hypothesis], RunManifest]:
    """Diarize every recording of ``cfg``; write RTTMs and a manifest if ``out_dir`` is set.

    Recordings are independent work units; results are collected in config
    order, so outputs do not depend on ``jobs``.
    """
    out = Path(out_dir) if out_dir is not None else cfg.out_dir
    work = [(rec, cfg) for rec in cfg.recordings]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(work))) as pool:
            results = list(pool.map(_diarize_job, work))
    else:
        results = [_diarize_job(w) for w in work]

    hyps = [h for h, _ in results]
    manifest = RunManifest(
        "diarize", cfg.source_text, str(cfg.base_dir.resolve()), seed=seed
    )
    for rec, (_, warns) in zip(cfg.recordings, results):
        manifest.warnings.extend(warns)
        manifest.inputs[rec.recording_id] = {
            str(p): _file_digest(p) for p in (*rec.channels, rec.mixed, rec.uem) if p is not None
        }
    for w in manifest.warnings:
        log.warning(w)

    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        for rec, hyp in zip(cfg.recordings, hyps):
            name = f"{rec.recording_id}.rttm"
            (out / name).write_text(write_rttm(hyp), encoding="utf-8")
            manifest.outputs[rec.recording_id] = name
        (out / "hypothesis.rttm").write_text(write_rttm(hyps), encoding="utf-8")
        if cfg.reference_rttm is not None:
            report = score_recordings(read_rttm(cfg.reference_rttm), hyps, cfg.scoring)
            (out / "report.tsv").write_text(report.to_tsv(), encoding="utf-8")
            manifest.outputs["report"] = "report.tsv"
        (out / "manifest.json").write_text(manifest.to_json(), encoding="utf-8")
    return hyps, manifest


def replay_manifest(path, out_dir, jobs: int = 1) -> tuple[list[Hypothesis], RunManifest]:
    """Re-execute a diarize run from its manifest alone."""
    manifest = RunManifest.from_json(Path(path).read_text(encoding="utf-8"))
    cfg = parse_pipeline_config(manifest.config_text, manifest.config_dir)
    return run_single_system(cfg, jobs=jobs, out_dir=out_dir, seed=manifest.seed)


# ---------------------------------------------------------------- fuse / score / stats

def run_fusion(
    hypotheses: Mapping[str, Sequence[Hypothesis]], cfg: FusionConfig
) -> tuple[list[Hypothesis], list[str]]:
    """Fuse per recording.  ``hypotheses`` maps system id -> that system's recordings.

    The root fixes which recordings are produced: a voter lacking one of them
    simply casts no vote there, and recordings the root lacks are skipped
    with a warning.
    """
    if cfg.root_id not in hypotheses:
        raise ConfigError(f"root system {cfg.root_id!r} not among inputs")
    by_system = {sid: {h.recording_id: h for h in hyps} for sid, hyps in hypotheses.items()}
    root = by_system[cfg.root_id]
    warnings = []
    for sid, recs in by_system.items():
        for rec_id in recs:
            if rec_id not in root:
                warnings.append(f"{sid}: recording {rec_id} absent from root; skipped")
    fused = []
    for rec_id in root:
        present = {sid: recs[rec_id] for sid, recs in by_system.items() if rec_id in recs}
        fused.append(fuse(present, cfg))
    for w in warnings:
        log.warning(w)
    return fused, warnings


def load_systems(paths: Sequence[Path | str]) -> dict[str, list[Hypothesis]]:
    systems: dict[str, list[Hypothesis]] = {}
    for p in map(Path, paths):
        sid = p.name[: -len(".rttm")] if p.name.endswith(".rttm") else p.name
        if sid in systems:
            raise ConfigError(f"duplicate system id {sid!r}")
        if not p.exists():
            raise InputError(f"missing RTTM file {p}")
        systems[sid] = read_rttm(p)
    return systems


def run_score(reference_path, hypothesis_path, cfg: ScoringConfig = ScoringConfig()) -> ScoreReport:
    for p in (reference_path, hypothesis_path):
        if not Path(p).exists():
            raise InputError(f"missing RTTM file {p}")
    return score_recordings(read_rttm(reference_path), read_rttm(hypothesis_path), cfg)


def run_stats(reference_path, overlap_bins=DEFAULT_OVERLAP_BINS) -> CorpusStats:
    if not Path(reference_path).exists():
        raise InputError(f"missing RTTM file {reference_path}")
    return corpus_stats(read_rttm(reference_path), overlap_bins)


# ---------------------------------------------------------------- simulate

def run_simulate(
    base: SyntheticConfig,
    out_dir,
    n_recordings: int = 1,
    overlap_targets: Sequence[float] | None = None,
) -> dict:
    """Write a synthetic corpus plus ready-to-run pipeline configs.

    Per recording ``simNNN``: ``.ch0.embs``/``.ch1.embs`` (ideal separation)
    and ``.mix.embs`` (single mixed channel).  Shared files: ``reference.rttm``,
    ``speech.uem``, ``css.cfg`` (two channels + leakage filtering),
    ``nocss.cfg`` (mixed channel only) and ``simulation.json``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    refs, regions, summary = [], [], []
    css_sections, nocss_sections = [], []
    for i in range(n_recordings):
        rec = f"sim{i:03d}"
        target = base.overlap_ratio_target
        if overlap_targets:
            target = overlap_targets[i % len(overlap_targets)]
        cfg = dataclasses.replace(
            base, seed=base.seed + i, recording_id=rec, overlap_ratio_target=target
        )
        conv = synthesize_conversation(cfg)
        names = {}
        for suffix, stream in zip(("ch0", "ch1", "mix"), (*conv.streams, conv.mixed)):
            names[suffix] = f"{rec}.{suffix}.embs"
            write_embeddings(out / names[suffix], stream)
        refs.append(conv.reference)
        regions.append(conv.regions)
        summary.append(
            {
                "recording_id": rec,
                "seed": cfg.seed,
                "num_speakers": cfg.num_speakers,
                "overlap_ratio_target": target,
                "leakage_segments_ms": [[s.start_ms, s.end_ms] for s in conv.leakage],
            }
        )
        css_sections.append(
            f"[recording {rec}]\nchannels = {names['ch0']}, {names['ch1']}\n"
            f"mixed = {names['mix']}\nuem = speech.uem\n"
        )
        nocss_sections.append(f"[recording {rec}]\nchannels = {names['mix']}\nuem = speech.uem\n")
    (out / "reference.rttm").write_text(write_rttm(refs), encoding="utf-8")
    (out / "speech.uem").write_text(write_uem(regions), encoding="utf-8")
    common = (
        "[segmentation]\nmerge_threshold = 0.55\n\n"
        "[clustering]\nahc_stop_threshold = 0.55\nmin_speaker_duration_ms = 2500\n"
        "sv_threshold = 0.0\n\n"
        "[scoring]\ncollar_ms = 250\nscore_overlap = true\nreference = reference.rttm\n\n"
    )
    (out / "css.cfg").write_text(
        common + "[leakage]\nthreshold = 0.2\n\n" + "\n".join(css_sections), encoding="utf-8"
    )
    (out / "nocss.cfg").write_text(common + "\n".join(nocss_sections), encoding="utf-8")
    meta = {
        "version": __version__,
        "config": dataclasses.asdict(base),
        "recordings": summary,
    }
    (out / "simulation.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n",
                                         encoding="utf-8")
    return meta
