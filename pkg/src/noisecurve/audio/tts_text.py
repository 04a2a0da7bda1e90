"""Utterance text preparation for speech synthesis.

Spoken-dialogue corpora carry non-verbal markers in curly or square brackets
({laughter}, [noise]); those are stripped before synthesis.  Long utterances
are split into bounded token segments so the synthesizer sees manageable
inputs; segments concatenate back (order-preserving) to the cleaned text.
"""

from __future__ import annotations

import re

DEFAULT_MAX_TOKENS = 50

_CURLY = re.compile(r"\{[^{}]*\}")
_SQUARE = re.compile(r"\[[^\[\]]*\]")
_SENTENCE_BREAK = re.compile(r"(?<=[.!?])\s+")


def strip_markers(text: str) -> str:
    """Remove {...} and [...] spans (innermost-first, so nesting unwinds)."""
    prev = None
    while prev != text:
        prev = text
        text = _CURLY.sub(" ", text)
        text = _SQUARE.sub(" ", text)
    return " ".join(text.split())


def prepare_tts_segments(text: str, max_tokens: int = DEFAULT_MAX_TOKENS) -> list[str]:
    """Clean an utterance and split it into segments of at most max_tokens words.

    Sentences (split on terminal punctuation) are packed greedily; a sentence
    longer than max_tokens is hard-split on word boundaries.  Returns [] when
    nothing speakable remains after marker stripping.
    """
    if max_tokens < 1:
        raise ValueError("max_tokens must be >= 1")
    cleaned = strip_markers(text)
    if not cleaned:
        return []

    segments: list[str] = []
    current: list[str] = []  # words of the segment under construction

    def flush() -> None:
        if current:
            segments.append(" ".join(current))
            current.clear()

    for sentence in _SENTENCE_BREAK.split(cleaned):
        words = sentence.split()
        if not words:
            continue
        if len(words) > max_tokens:
            flush()
            for lo in range(0, len(words), max_tokens):
                segments.append(" ".join(words[lo : lo + max_tokens]))
            continue
        if len(current) + len(words) > max_tokens:
            flush()
        current.extend(words)
    flush()
    return segments
