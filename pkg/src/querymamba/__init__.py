"""Selective state-space encoder / query decoder for long-term action anticipation,
with dataset-aware verb-noun sampling and edit-distance evaluation."""

__version__ = "0.1.0"
