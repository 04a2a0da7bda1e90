"""Tokenization, reference/hypothesis alignment, and word error rates.

The tokenizer and aligner are deliberately deterministic: identical inputs
produce identical tokens and identical op sequences, which downstream cleaning
and scoring depend on for reproducible runs.

Alignment uses unit-cost edit distance.  When several optimal paths exist the
walk prefers, at each step from the start of the sequences, a hit, then a
substitution, then a deletion, then an insertion.  The preference is applied
in sequence order (not during a reverse backtrace); this is what keeps
substituted word pairs aligned to their natural counterparts in mixed
substitution/deletion regions.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from typing import Sequence

from .corpus import Transcript

HIT = "hit"
SUB = "sub"
DEL = "del"
INS = "ins"

# Suffixes split off as their own tokens, checked case-insensitively and
# repeatedly from the right ("i'd've" -> i, 'd, 've).  Pluggable: pass a
# different table to tokenize() to change the behaviour everywhere.
CONTRACTION_SUFFIXES: tuple[str, ...] = ("n't", "'s", "'re", "'ve", "'ll", "'d", "'m")

_PUNCT = set(string.punctuation)


@dataclass(frozen=True)
class Token:
    """A surface token plus its [start, end) character span in the source."""

    text: str
    start: int
    end: int


def _split_chunk(
    text: str, lo: int, hi: int, suffixes: tuple[str, ...]
) -> list[tuple[int, int]]:
    head: list[tuple[int, int]] = []
    tail: list[tuple[int, int]] = []
    while lo < hi:
        chunk_low = text[lo:hi].lower()
        if chunk_low in suffixes:
            head.append((lo, hi))
            break
        if hi - lo == 1:
            head.append((lo, hi))
            break
        if text[lo] in _PUNCT:
            head.append((lo, lo + 1))
            lo += 1
            continue
        if text[hi - 1] in _PUNCT:
            tail.append((hi - 1, hi))
            hi -= 1
            continue
        for s in suffixes:
            if chunk_low.endswith(s) and hi - lo > len(s):
                tail.append((hi - len(s), hi))
                hi -= len(s)
                break
        else:
            head.append((lo, hi))
            break
    head.extend(reversed(tail))
    return head


def tokenize(text: str, suffixes: tuple[str, ...] = CONTRACTION_SUFFIXES) -> list[Token]:
    """Split text into tokens, separating punctuation and contraction suffixes.

    Rules, applied per whitespace-delimited chunk:
      * a chunk equal to a contraction suffix stays whole ("n't", "'s", ...);
      * leading and trailing ASCII punctuation peel off one character at a
        time as their own tokens (word-internal punctuation is kept, so
        "3.5" and hyphenated words survive);
      * contraction suffixes then split off the right end, repeatedly.

    Tokens carry character spans into the source; joining token texts with
    single spaces is the canonical surface form, and tokenizing that form
    again yields the same token texts.
    """
    tokens: list[Token] = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        end = pos
        while end < n and not text[end].isspace():
            end += 1
        for lo, hi in _split_chunk(text, pos, end, suffixes):
            tokens.append(Token(text=text[lo:hi], start=lo, end=hi))
        pos = end
    return tokens


def token_texts(text: str) -> list[str]:
    return [t.text for t in tokenize(text)]


def canonical_text(tokens: Sequence[Token] | Sequence[str]) -> str:
    return " ".join(t.text if isinstance(t, Token) else t for t in tokens)


@dataclass(frozen=True)
class EditOp:
    """A run of same-kind alignment steps with half-open token spans.

    Substitution runs pair equal-length spans position by position; deletion
    runs have an empty hypothesis span, insertion runs an empty reference span.
    """

    kind: str
    ref_start: int
    ref_end: int
    hyp_start: int
    hyp_end: int


@dataclass(frozen=True)
class Alignment:
    ops: tuple[EditOp, ...]
    hits: int
    substitutions: int
    deletions: int
    insertions: int

    @property
    def distance(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def reference_length(self) -> int:
        return self.hits + self.substitutions + self.deletions

    @property
    def hypothesis_length(self) -> int:
        return self.hits + self.substitutions + self.insertions


def align(
    reference: Sequence[str], hypothesis: Sequence[str], case_fold: bool = False
) -> Alignment:
    """Minimum-edit alignment of two token sequences.

    Returns merged op runs plus hit/substitution/deletion/insertion counts.
    The counts satisfy hits+subs+dels == len(reference) and
    hits+subs+ins == len(hypothesis).
    """
    ref = [t.casefold() for t in reference] if case_fold else reference
    hyp = [t.casefold() for t in hypothesis] if case_fold else hypothesis
    n_ref = len(ref)
    n_hyp = len(hyp)

    # suffix[i][j] = edit distance between ref[i:] and hyp[j:]
    suffix: list[list[int]] = [[0] * (n_hyp + 1) for _ in range(n_ref + 1)]
    for j in range(n_hyp + 1):
        suffix[n_ref][j] = n_hyp - j
    for i in range(n_ref - 1, -1, -1):
        row = suffix[i]
        below = suffix[i + 1]
        row[n_hyp] = n_ref - i
        ref_tok = ref[i]
        for j in range(n_hyp - 1, -1, -1):
            if ref_tok == hyp[j]:
                row[j] = below[j + 1]
            else:
                best = below[j + 1]
                if below[j] < best:
                    best = below[j]
                if row[j + 1] < best:
                    best = row[j + 1]
                row[j] = best + 1
    return _walk(ref, hyp, suffix)


def _walk(ref: Sequence[str], hyp: Sequence[str], suffix: list[list[int]]) -> Alignment:
    n_ref = len(ref)
    n_hyp = len(hyp)
    runs: list[list] = []  # mutable [kind, ref_start, ref_end, hyp_start, hyp_end]
    hits = subs = dels = inss = 0
    i = j = 0
    while i < n_ref or j < n_hyp:
        here = suffix[i][j]
        if i < n_ref and j < n_hyp and ref[i] == hyp[j] and here == suffix[i + 1][j + 1]:
            kind, di, dj = HIT, 1, 1
            hits += 1
        elif i < n_ref and j < n_hyp and here == suffix[i + 1][j + 1] + 1:
            kind, di, dj = SUB, 1, 1
            subs += 1
        elif i < n_ref and here == suffix[i + 1][j] + 1:
            kind, di, dj = DEL, 1, 0
            dels += 1
        else:
            kind, di, dj = INS, 0, 1
            inss += 1
        if runs and runs[-1][0] == kind:
            runs[-1][2] = i + di
            runs[-1][4] = j + dj
        else:
            runs.append([kind, i, i + di, j, j + dj])
        i += di
        j += dj
    return Alignment(
        ops=tuple(EditOp(*run) for run in runs),
        hits=hits,
        substitutions=subs,
        deletions=dels,
        insertions=inss,
    )


def dump_alignment(
    alignment: Alignment, reference: Sequence[str], hypothesis: Sequence[str]
) -> str:
    """Line-oriented debug dump: one "<op> <ref-token> <hyp-token>" per token step."""
    lines = []
    for op in alignment.ops:
        if op.kind in (HIT, SUB):
            for r, h in zip(range(op.ref_start, op.ref_end), range(op.hyp_start, op.hyp_end)):
                lines.append(f"{op.kind} {reference[r]} {hypothesis[h]}")
        elif op.kind == DEL:
            for r in range(op.ref_start, op.ref_end):
                lines.append(f"{op.kind} {reference[r]} -")
        else:
            for h in range(op.hyp_start, op.hyp_end):
                lines.append(f"{op.kind} - {hypothesis[h]}")
    return "\n".join(lines)


@dataclass(frozen=True)
class WerCounts:
    hits: int = 0
    substitutions: int = 0
    deletions: int = 0
    insertions: int = 0

    def __add__(self, other: "WerCounts") -> "WerCounts":
        return WerCounts(
            self.hits + other.hits,
            self.substitutions + other.substitutions,
            self.deletions + other.deletions,
            self.insertions + other.insertions,
        )

    @property
    def reference_length(self) -> int:
        return self.hits + self.substitutions + self.deletions

    def wer(self) -> float:
        """(S + D + I) / (H + S + D), unclamped; may exceed 1.0."""
        errors = self.substitutions + self.deletions + self.insertions
        if self.reference_length == 0:
            if errors == 0:
                return 0.0
            raise ValueError("WER is undefined for an empty reference with a non-empty hypothesis")
        return errors / self.reference_length


def counts_from_alignment(alignment: Alignment) -> WerCounts:
    return WerCounts(
        hits=alignment.hits,
        substitutions=alignment.substitutions,
        deletions=alignment.deletions,
        insertions=alignment.insertions,
    )


def utterance_counts(ref_text: str, hyp_text: str, case_fold: bool = False) -> WerCounts:
    return counts_from_alignment(
        align(token_texts(ref_text), token_texts(hyp_text), case_fold=case_fold)
    )


def transcript_counts(
    reference: Transcript, hypothesis: Transcript, case_fold: bool = False
) -> WerCounts:
    """Sum of per-utterance counts; utterances are paired by position."""
    if len(reference.utterances) != len(hypothesis.utterances):
        raise ValueError(
            f"transcript {reference.transcript_id!r}: utterance count mismatch "
            f"({len(reference.utterances)} reference vs {len(hypothesis.utterances)} hypothesis)"
        )
    total = WerCounts()
    for ref_utt, hyp_utt in zip(reference.utterances, hypothesis.utterances):
        total = total + utterance_counts(ref_utt.text, hyp_utt.text, case_fold=case_fold)
    return total


def transcript_wer(
    reference: Transcript, hypothesis: Transcript, case_fold: bool = False
) -> float:
    return transcript_counts(reference, hypothesis, case_fold=case_fold).wer()


def set_wer(
    pairs: Sequence[tuple[Transcript, Transcript]], case_fold: bool = False
) -> float:
    """Unweighted mean of transcript-level WERs over the set."""
    if not pairs:
        raise ValueError("set WER needs at least one transcript pair")
    total = 0.0
    for reference, hypothesis in pairs:
        total += transcript_wer(reference, hypothesis, case_fold=case_fold)
    return total / len(pairs)
