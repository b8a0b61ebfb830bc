"""RTTM and UEM readers/writers.

Times are converted to integer milliseconds on the way in (round half away
from zero) and printed with exactly three decimals on the way out, so any
millisecond-valued hypothesis survives a write/parse cycle unchanged.
"""

from __future__ import annotations

from collections import defaultdict
from decimal import ROUND_HALF_UP, Decimal, InvalidOperation
from typing import Iterable

from .timeline import Hypothesis, Segment, SpeechRegions, Timeline

__all__ = [
    "ParseError",
    "parse_rttm",
    "write_rttm",
    "parse_uem",
    "write_uem",
    "read_rttm",
    "read_uem",
    "seconds_to_ms",
    "format_seconds",
]


class ParseError(ValueError):
    """Malformed RTTM/UEM input; carries the 1-based line number."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def seconds_to_ms(text: str) -> int:
    # Decimal avoids binary-float artefacts such as 0.0005 -> 0.00049999...
    value = Decimal(text) * 1000
    if not value.is_finite():
        raise InvalidOperation(text)
    return int(value.quantize(Decimal(1), rounding=ROUND_HALF_UP))


def format_seconds(ms: int) -> str:
    sign = "-" if ms < 0 else ""
    ms = abs(ms)
    return f"{sign}{ms // 1000}.{ms % 1000:03d}"


def _lines(text: str | Iterable[str]) -> Iterable[str]:
    return text.splitlines() if isinstance(text, str) else text


def parse_rttm(text: str | Iterable[str]) -> list[Hypothesis]:
    """Parse SPEAKER records into one :class:`Hypothesis` per recording.

    Recordings are returned in order of first appearance.
    """
    pieces: dict[str, dict[str, list[Segment]]] = {}
    for lineno, raw in enumerate(_lines(text), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) < 9:
            raise ParseError(lineno, f"expected at least 9 fields, got {len(fields)}")
        if fields[0] != "SPEAKER":
            raise ParseError(lineno, f"unsupported record type {fields[0]!r}")
        rec, onset, dur, label = fields[1], fields[3], fields[4], fields[7]
        try:
            start = seconds_to_ms(onset)
            length = seconds_to_ms(dur)
        except (InvalidOperation, ValueError):
            raise ParseError(lineno, f"bad time value in {onset!r} / {dur!r}") from None
        if Decimal(dur) < 0:
            raise ParseError(lineno, f"negative duration {dur}")
        if start < 0:
            raise ParseError(lineno, f"negative onset {onset}")
        tracks = pieces.setdefault(rec, defaultdict(list))
        if length > 0:
            tracks[label].append(Segment(start, start + length))
    return [
        Hypothesis(rec, {label: Timeline(segs) for label, segs in tracks.items()})
        for rec, tracks in pieces.items()
    ]


def write_rttm(h: Hypothesis | Iterable[Hypothesis]) -> str:
    """Serialize one or more hypotheses; lines sorted by (onset, label)."""
    hyps = [h] if isinstance(h, Hypothesis) else list(h)
    out = []
    for hyp in hyps:
        rows = sorted(
            (seg.start_ms, label, seg.duration)
            for label, tl in hyp.tracks.items()
            for seg in tl
        )
        for start, label, dur in rows:
            out.append(
                f"SPEAKER {hyp.recording_id} 1 {format_seconds(start)} "
                f"{format_seconds(dur)} <NA> <NA> {label} <NA> <NA>\n"
            )
    return "".join(out)


def parse_uem(text: str | Iterable[str]) -> list[SpeechRegions]:
    regions: dict[str, list[Segment]] = {}
    for lineno, raw in enumerate(_lines(text), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 4:
            raise ParseError(lineno, f"expected 4 fields, got {len(fields)}")
        rec, _channel, start_s, end_s = fields
        try:
            start, end = seconds_to_ms(start_s), seconds_to_ms(end_s)
        except (InvalidOperation, ValueError):
            raise ParseError(lineno, f"bad time value in {start_s!r} / {end_s!r}") from None
        if start < 0:
            raise ParseError(lineno, f"negative start {start_s}")
        if end <= start:
            raise ParseError(lineno, f"end {end_s} not after start {start_s}")
        regions.setdefault(rec, []).append(Segment(start, end))
    return [SpeechRegions(rec, Timeline(segs)) for rec, segs in regions.items()]


def write_uem(regions: SpeechRegions | Iterable[SpeechRegions]) -> str:
    items = [regions] if isinstance(regions, SpeechRegions) else list(regions)
    out = []
    for item in items:
        for seg in item.regions:
            out.append(
                f"{item.recording_id} 1 {format_seconds(seg.start_ms)} "
                f"{format_seconds(seg.end_ms)}\n"
            )
    return "".join(out)


def read_rttm(path) -> list[Hypothesis]:
    with open(path, encoding="utf-8") as fh:
        return parse_rttm(fh)


def read_uem(path) -> list[SpeechRegions]:
    with open(path, encoding="utf-8") as fh:
        return parse_uem(fh)
