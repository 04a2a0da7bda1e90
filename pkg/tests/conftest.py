"""Shared fixtures and independent oracles used across the test suite."""

from __future__ import annotations

import json
import sys

import numpy as np
import pytest

from noisecurve.cleaning import LexiconAnnotator
from noisecurve.corpus import Transcript, Utterance

sys.setrecursionlimit(20000)


# --- alignment oracle -------------------------------------------------------
#
# Independent of the library: plain recursion for the distance, then a
# rule-based trace applying the documented step preference (match first, then
# substitution, deletion, insertion) against the recursive distances.


class AlignmentOracle:
    def __init__(self):
        self.memo: dict[tuple, int] = {}

    def distance(self, ref: tuple, hyp: tuple) -> int:
        memo = self.memo
        key = (ref, hyp)
        found = memo.get(key)
        if found is not None:
            return found
        if not ref:
            value = len(hyp)
        elif not hyp:
            value = len(ref)
        elif ref[0] == hyp[0]:
            value = self.distance(ref[1:], hyp[1:])
        else:
            value = 1 + min(
                self.distance(ref[1:], hyp[1:]),
                self.distance(ref[1:], hyp),
                self.distance(ref, hyp[1:]),
            )
        memo[key] = value
        return value

    def counts(self, ref: tuple, hyp: tuple) -> dict[str, int]:
        """Walk from the front, preferring hit > substitution > deletion >
        insertion among the steps that stay on a shortest path."""
        d = self.distance
        counts = {"hit": 0, "sub": 0, "del": 0, "ins": 0}
        while ref or hyp:
            here = d(ref, hyp)
            if ref and hyp and ref[0] == hyp[0] and d(ref[1:], hyp[1:]) == here:
                counts["hit"] += 1
                ref, hyp = ref[1:], hyp[1:]
            elif ref and hyp and d(ref[1:], hyp[1:]) + 1 == here:
                counts["sub"] += 1
                ref, hyp = ref[1:], hyp[1:]
            elif ref and d(ref[1:], hyp) + 1 == here:
                counts["del"] += 1
                ref = ref[1:]
            else:
                counts["ins"] += 1
                hyp = hyp[1:]
        return counts


@pytest.fixture(scope="session")
def alignment_oracle() -> AlignmentOracle:
    return AlignmentOracle()


# --- audio oracles ----------------------------------------------------------


def naive_convolution(x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Direct O(n*m) convolution, full length."""
    out = np.zeros(len(x) + len(h) - 1)
    for i, xi in enumerate(x):
        out[i : i + len(h)] += xi * h
    return out


def schroeder_t60(rir: np.ndarray, sample_rate: int) -> float:
    """Time for the backward-integrated energy to fall 60 dB below its start."""
    energy = np.cumsum(rir[::-1] ** 2)[::-1]
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(energy / energy[0])
    below = np.flatnonzero(db <= -60.0)
    if len(below) == 0:
        raise AssertionError("response never decays 60 dB inside its window")
    return float(below[0]) / sample_rate


# --- worked cleaning example --------------------------------------------------
#
# One two-utterance exchange with a hand-built tag lexicon; the expected
# noun-repair output is frozen.


@pytest.fixture(scope="session")
def worked_example():
    lexicon = LexiconAnnotator(
        pos_map={
            "employers": "NOUN",
            "lawyers": "NOUN",
            "penny": "NOUN",
            "weeks": "NOUN",
            "months": "NOUN",
            "songs": "NOUN",
            "see": "VERB",
            "seen": "VERB",
            "drops": "VERB",
            "few": "ADJ",
            "new": "ADJ",
            "certainly": "ADV",
        }
    )
    reference = Transcript(
        "t0",
        [
            Utterance(0, "spk0", "We certainly see it, as employers."),
            Utterance(1, "spk0", "The penny drops after a few weeks or months."),
        ],
    )
    noisy = Transcript(
        "t0",
        [
            Utterance(0, "spk0", "We certainly seen it as lawyers."),
            Utterance(1, "spk0", "The penny drops after the new songs."),
        ],
    )
    expected_nouns = (
        "We certainly seen it as employers . "
        "The penny drops after the new weeks months ."
    )
    return lexicon, reference, noisy, expected_nouns


# --- toy corpora --------------------------------------------------------------

_SENTENCE_BANK = [
    "The committee reviewed the quarterly budget and approved three new positions.",
    "Our delivery schedule slipped because the vendor shipped the wrong parts.",
    "She presented the migration plan and everyone agreed on the timeline.",
    "The customer reported that the mobile application crashes during checkout.",
    "We decided to move the launch to the second week of March.",
    "The survey results show strong demand in the northern region.",
    "He explained that the training data was collected over two years.",
    "Maintenance on the east server room is planned for Saturday night.",
    "The marketing team wants a shorter name for the new product.",
    "They measured a ten percent improvement after enabling the cache.",
    "The audit found no critical issues but flagged two minor gaps.",
    "Please send the revised contract to the legal department by Friday.",
]


def make_summarization_corpus(path, n_transcripts=3, utterances_per_transcript=4):
    """Deterministic toy corpus: transcripts plus one summary instance each."""
    records = []
    for t in range(n_transcripts):
        tid = f"t{t:02d}"
        utterances = []
        for u in range(utterances_per_transcript):
            sentence = _SENTENCE_BANK[(t * utterances_per_transcript + u) % len(_SENTENCE_BANK)]
            utterances.append({"index": u, "speaker": f"spk{u % 2}", "text": sentence})
        records.append({"kind": "transcript", "transcript_id": tid, "utterances": utterances})
        first = utterances[0]["text"]
        records.append(
            {
                "kind": "instance",
                "transcript_id": tid,
                "summary": " ".join(first.split()[:8]),
            }
        )
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record) + "\n")
    return path


def write_jsonl_file(path, records):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record) + "\n")
    return path
