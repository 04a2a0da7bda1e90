"""Word-class annotation and class-targeted transcript repair.

Repair compares a noisy transcript against its reference in chunks of
utterances, aligns the token streams, and fixes exactly the alignment errors
that involve a targeted word class on either side:

  * a substituted pair is replaced by the reference token when either token
    is in the target class;
  * a deleted reference token is restored when it is in the target class;
  * an inserted hypothesis token is dropped when it is in the target class.

Everything else keeps the noisy side byte for byte.  Repaired streams are
re-joined into utterances along the reference utterance boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

from .alignment import DEL, HIT, INS, align, tokenize
from .corpus import Transcript, Utterance
from .util import read_jsonl

NOUN = "NOUN"
VERB = "VERB"
ADJ = "ADJ"
ADV = "ADV"
OTHER = "OTHER"
POS_TAGS = (NOUN, VERB, ADJ, ADV, OTHER)
_CONTENT_POS = frozenset((NOUN, VERB, ADJ, ADV))

NOUNS = "nouns"
VERBS = "verbs"
ADJECTIVES = "adjectives"
ADVERBS = "adverbs"
CONTENT = "content"
NON_CONTENT = "non_content"
NAMED_ENTITIES = "named_entities"
TECHNIQUES: tuple[str, ...] = (
    NOUNS,
    VERBS,
    ADJECTIVES,
    ADVERBS,
    CONTENT,
    NON_CONTENT,
    NAMED_ENTITIES,
)

DEFAULT_CHUNK_SIZE = 20


class AnnotationError(ValueError):
    """Raised when annotations are missing or disagree with the tokenizer."""


@dataclass(frozen=True)
class AnnotatedToken:
    text: str
    pos: str
    is_entity: bool = False

    def __post_init__(self) -> None:
        if self.pos not in POS_TAGS:
            raise AnnotationError(f"unknown pos tag {self.pos!r} for token {self.text!r}")


@dataclass(frozen=True)
class AnnotationContext:
    """Where the tokens came from; sidecar lookups key on all three fields."""

    transcript_id: str
    utterance_index: int
    label: str  # variant name, e.g. "ref_0" or "3_0"


class Annotator(Protocol):
    def annotate(
        self, tokens: Sequence[str], context: AnnotationContext
    ) -> list[AnnotatedToken]: ...


class LexiconAnnotator:
    """Deterministic dictionary tagger.

    pos_map maps lowercased words to a pos tag (proper-noun tags fold into
    NOUN); entities is a set of lowercased entity words.  Unknown words tag
    as OTHER, which errs toward leaving tokens alone during repair.
    """

    _FOLD = {"PROPN": NOUN}

    def __init__(self, pos_map: dict[str, str], entities: set[str] | None = None):
        self.pos_map: dict[str, str] = {}
        for word, pos in pos_map.items():
            pos = self._FOLD.get(pos, pos)
            if pos not in POS_TAGS:
                raise AnnotationError(f"lexicon maps {word!r} to unknown pos {pos!r}")
            self.pos_map[word.lower()] = pos
        self.entities = {w.lower() for w in (entities or set())}

    @classmethod
    def from_json(cls, path: Path | str) -> "LexiconAnnotator":
        import json

        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
        if not isinstance(data, dict) or "pos" not in data:
            raise AnnotationError(f"{path}: expected an object with a 'pos' mapping")
        return cls(pos_map=data["pos"], entities=set(data.get("entities", [])))

    def annotate(
        self, tokens: Sequence[str], context: AnnotationContext
    ) -> list[AnnotatedToken]:
        out = []
        for text in tokens:
            key = text.lower()
            out.append(
                AnnotatedToken(
                    text=text,
                    pos=self.pos_map.get(key, OTHER),
                    is_entity=key in self.entities,
                )
            )
        return out


class SidecarAnnotator:
    """Pre-tagged tokens loaded from a JSONL sidecar file.

    Records look like {"transcript_id": ..., "utterance_index": ...,
    "variant": ..., "tokens": [{"text": ..., "pos": ..., "entity": false}]}.
    Token texts must match the tokenizer's output for the utterance exactly.
    """

    def __init__(self, path: Path | str):
        self.path = Path(path)
        self._records: dict[tuple[str, int, str], list[AnnotatedToken]] = {}
        for lineno, record in read_jsonl(self.path):
            try:
                key = (
                    record["transcript_id"],
                    int(record["utterance_index"]),
                    record["variant"],
                )
                tokens = [
                    AnnotatedToken(
                        text=t["text"],
                        pos=t["pos"],
                        is_entity=bool(t.get("entity", False)),
                    )
                    for t in record["tokens"]
                ]
            except (KeyError, TypeError) as exc:
                raise AnnotationError(f"{path}:{lineno}: bad sidecar record: {exc}") from exc
            self._records[key] = tokens

    def annotate(
        self, tokens: Sequence[str], context: AnnotationContext
    ) -> list[AnnotatedToken]:
        key = (context.transcript_id, context.utterance_index, context.label)
        if key not in self._records:
            raise AnnotationError(
                f"no sidecar annotations for transcript {context.transcript_id!r} "
                f"utterance {context.utterance_index} variant {context.label!r}"
            )
        tagged = self._records[key]
        if [t.text for t in tagged] != list(tokens):
            raise AnnotationError(
                f"sidecar tokens disagree with the tokenizer for transcript "
                f"{context.transcript_id!r} utterance {context.utterance_index} "
                f"variant {context.label!r}"
            )
        return tagged


def targets(technique: str, token: AnnotatedToken) -> bool:
    """Whether a token belongs to the word class a technique repairs."""
    if technique == NOUNS:
        return token.pos == NOUN
    if technique == VERBS:
        return token.pos == VERB
    if technique == ADJECTIVES:
        return token.pos == ADJ
    if technique == ADVERBS:
        return token.pos == ADV
    if technique == CONTENT:
        return token.pos in _CONTENT_POS
    if technique == NON_CONTENT:
        return token.pos not in _CONTENT_POS
    if technique == NAMED_ENTITIES:
        return token.is_entity
    raise ValueError(f"unknown cleaning technique {technique!r}")


def annotate_transcript(
    transcript: Transcript, annotator: Annotator, label: str
) -> list[list[AnnotatedToken]]:
    """Tokenize and tag every utterance; tokenization matches the aligner's."""
    out = []
    for utt in transcript.utterances:
        tokens = [t.text for t in tokenize(utt.text)]
        context = AnnotationContext(
            transcript_id=transcript.transcript_id,
            utterance_index=utt.index,
            label=label,
        )
        tagged = annotator.annotate(tokens, context)
        if len(tagged) != len(tokens):
            raise AnnotationError(
                f"annotator returned {len(tagged)} tokens for {len(tokens)} inputs "
                f"(transcript {transcript.transcript_id!r}, utterance {utt.index})"
            )
        out.append(tagged)
    return out


def clean(
    reference: Transcript,
    noisy: Transcript,
    technique: str,
    annotator: Annotator,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    case_fold: bool = False,
    reference_label: str = "ref_0",
    noisy_label: str = "noisy",
) -> Transcript:
    """Repair one noisy transcript against its reference.

    Utterances are processed in chunks of chunk_size; within a chunk the two
    token streams are aligned as wholes and repaired op by op, then split back
    into utterances at the reference utterance boundaries (tokens inserted by
    the hypothesis attach to the utterance of the preceding reference token).
    Output utterance text is the canonical space-joined token form.
    """
    if technique not in TECHNIQUES:
        raise ValueError(f"unknown cleaning technique {technique!r}")
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    if len(reference.utterances) != len(noisy.utterances):
        raise ValueError(
            f"transcript {reference.transcript_id!r}: utterance count mismatch "
            f"({len(reference.utterances)} reference vs {len(noisy.utterances)} noisy)"
        )

    ref_tagged = annotate_transcript(reference, annotator, reference_label)
    noisy_tagged = annotate_transcript(noisy, annotator, noisy_label)

    n_utts = len(reference.utterances)
    out_tokens: list[list[str]] = [[] for _ in range(n_utts)]
    for lo in range(0, n_utts, chunk_size):
        hi = min(lo + chunk_size, n_utts)
        ref_stream: list[AnnotatedToken] = []
        ref_utt_of: list[int] = []  # reference token position -> utterance index
        for u in range(lo, hi):
            ref_stream.extend(ref_tagged[u])
            ref_utt_of.extend([u] * len(ref_tagged[u]))
        hyp_stream: list[AnnotatedToken] = []
        for u in range(lo, hi):
            hyp_stream.extend(noisy_tagged[u])

        result = align(
            [t.text for t in ref_stream],
            [t.text for t in hyp_stream],
            case_fold=case_fold,
        )

        def utt_for(ref_pos: int) -> int:
            if not ref_utt_of:
                return lo
            return ref_utt_of[min(ref_pos, len(ref_utt_of) - 1)]

        for op in result.ops:
            if op.kind == HIT:
                for r, h in zip(range(op.ref_start, op.ref_end), range(op.hyp_start, op.hyp_end)):
                    out_tokens[utt_for(r)].append(hyp_stream[h].text)
            elif op.kind == DEL:
                for r in range(op.ref_start, op.ref_end):
                    if targets(technique, ref_stream[r]):
                        out_tokens[utt_for(r)].append(ref_stream[r].text)
            elif op.kind == INS:
                target_utt = utt_for(op.ref_start - 1) if op.ref_start > 0 else lo
                for h in range(op.hyp_start, op.hyp_end):
                    if not targets(technique, hyp_stream[h]):
                        out_tokens[target_utt].append(hyp_stream[h].text)
            else:  # substitution run: equal-length spans, repaired pairwise
                for r, h in zip(range(op.ref_start, op.ref_end), range(op.hyp_start, op.hyp_end)):
                    if targets(technique, ref_stream[r]) or targets(technique, hyp_stream[h]):
                        out_tokens[utt_for(r)].append(ref_stream[r].text)
                    else:
                        out_tokens[utt_for(r)].append(hyp_stream[h].text)

    utterances = [
        Utterance(index=u.index, speaker=u.speaker, text=" ".join(out_tokens[u.index]))
        for u in reference.utterances
    ]
    return Transcript(transcript_id=noisy.transcript_id, utterances=utterances)
