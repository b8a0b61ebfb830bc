"""
Scoring a diarization by hand
=============================

Two speakers, a hypothesis that misses the overlap, and the numbers
that fall out of it.
"""

from diarfuse.metrics import ScoringConfig, compute_der, compute_jer, overlap_ratio
from diarfuse.rttm import parse_rttm, write_rttm
from diarfuse.timeline import Hypothesis, Timeline

# times are integer milliseconds, segments are half-open
reference = Hypothesis("meeting", {
    "alice": Timeline([(0, 5000)]),
    "bob": Timeline([(3000, 8000)]),
})
hypothesis = Hypothesis("meeting", {
    "spk0": Timeline([(0, 4000)]),
    "spk1": Timeline([(4000, 8000)]),
})

print(f"overlap ratio of the reference: {overlap_ratio(reference):.1f}%")

# no collar: every millisecond of reference speech counts
d = compute_der(reference, hypothesis, ScoringConfig(collar_ms=0))
print(f"miss {d.missed_ms} ms, false alarm {d.false_alarm_ms} ms, confusion {d.speaker_error_ms} ms")
print(f"DER {100 * d.der:.2f}%  JER {compute_jer(reference, hypothesis):.2f}%")

# the usual 250 ms collar forgives boundary jitter
print(f"DER with collar: {100 * compute_der(reference, hypothesis).der:.2f}%")

# RTTM text round-trips exactly
text = write_rttm(hypothesis)
print(text)
assert parse_rttm(text) == [hypothesis]
