"""Speaker-diarization back-end over precomputed speaker-embedding streams."""

__version__ = "0.1.0"
