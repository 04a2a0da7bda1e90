"""Corpus model: transcripts, task instances, variant keys, and the variant store.

A run operates on a fixed corpus of multi-speaker transcripts plus task
instances bound to them.  Every degraded or repaired copy of the corpus is a
*variant* identified by a (noise level, cleaning technique) key; the pristine
input corpus is the reference variant.  Variants are persisted as line-
delimited JSON so stages can resume from disk.
"""

from __future__ import annotations

import re
import threading
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .util import read_jsonl, write_jsonl

SUMMARIZATION = "summarization"
QUESTION_ANSWERING = "question_answering"
CLASSIFICATION = "classification"
TASK_KINDS = (SUMMARIZATION, QUESTION_ANSWERING, CLASSIFICATION)


class DatasetError(ValueError):
    """Raised for malformed or inconsistent dataset files."""


class VariantNotFoundError(LookupError):
    def __init__(self, key: "VariantKey", path: Path):
        super().__init__(f"variant {key.name} has no stored transcripts at {path}")
        self.key = key
        self.path = path


@dataclass(frozen=True)
class Utterance:
    index: int
    speaker: str
    text: str


@dataclass
class Transcript:
    transcript_id: str
    utterances: list[Utterance]

    def __post_init__(self) -> None:
        for pos, utt in enumerate(self.utterances):
            if utt.index != pos:
                raise DatasetError(
                    f"transcript {self.transcript_id!r}: utterance indices must be "
                    f"dense from 0 (found {utt.index} at position {pos})"
                )

    def as_text(self) -> str:
        """Speaker-attributed rendering used when a whole transcript is prompted."""
        return "\n".join(f"{u.speaker}: {u.text}" for u in self.utterances)


@dataclass(frozen=True)
class TaskInstance:
    instance_id: str
    transcript_id: str
    kind: str
    query: str | None = None
    gold_summary: str | None = None
    question: str | None = None
    gold_answers: tuple[str, ...] = ()
    utterance_index: int | None = None
    gold_label: str | None = None


@dataclass
class Dataset:
    kind: str
    transcripts: list[Transcript]
    instances: list[TaskInstance]
    _by_id: dict[str, Transcript] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._by_id = {t.transcript_id: t for t in self.transcripts}

    def transcript(self, transcript_id: str) -> Transcript:
        return self._by_id[transcript_id]


_VARIANT_NAME_RE = re.compile(r"^(ref|\d+)_(\d+)$")


@dataclass(frozen=True)
class VariantKey:
    """(noise level, cleaning technique) coordinates of one corpus variant.

    level is None for the reference variant, which only exists uncleaned.
    Directory names are "ref_0" and "<level>_<cleaning>".
    """

    level: int | None
    cleaning: int

    def __post_init__(self) -> None:
        if self.level is None and self.cleaning != 0:
            raise ValueError("the reference variant cannot carry a cleaning technique")
        if self.level is not None and self.level < 0:
            raise ValueError(f"noise level must be >= 0, got {self.level}")
        if self.cleaning < 0:
            raise ValueError(f"cleaning index must be >= 0, got {self.cleaning}")

    @classmethod
    def ref(cls) -> "VariantKey":
        return cls(level=None, cleaning=0)

    @classmethod
    def parse(cls, name: str) -> "VariantKey":
        m = _VARIANT_NAME_RE.match(name)
        if not m:
            raise ValueError(f"not a variant name: {name!r}")
        level = None if m.group(1) == "ref" else int(m.group(1))
        return cls(level=level, cleaning=int(m.group(2)))

    @property
    def is_ref(self) -> bool:
        return self.level is None

    @property
    def name(self) -> str:
        prefix = "ref" if self.level is None else str(self.level)
        return f"{prefix}_{self.cleaning}"

    @property
    def sort_key(self) -> tuple[int, int]:
        # reference sorts before every noised variant
        return (-1 if self.level is None else self.level, self.cleaning)


def enumerate_variants(levels: int, techniques: int) -> list[VariantKey]:
    """All keys for a run: the reference plus (levels+1) x (techniques+1).

    `levels` counts the impairment steps beyond the clean synthesis pass
    (level 0), `techniques` the cleaning techniques beyond "none" (cleaning 0).
    """
    if levels < 0 or techniques < 0:
        raise ValueError("levels and techniques must be >= 0")
    keys = [VariantKey.ref()]
    for level in range(levels + 1):
        for cleaning in range(techniques + 1):
            keys.append(VariantKey(level=level, cleaning=cleaning))
    return keys


class VariantStore:
    """Directory of per-variant transcript files under a run directory.

    Writes are atomic and serialized per key; distinct keys can be written
    concurrently.  Saving a key twice overwrites idempotently.
    """

    def __init__(self, root: Path | str):
        self.root = Path(root)
        self._locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._locks_guard = threading.Lock()

    def path_for(self, key: VariantKey) -> Path:
        return self.root / key.name / "transcripts.jsonl"

    def _lock_for(self, key: VariantKey) -> threading.Lock:
        with self._locks_guard:
            return self._locks[key.name]

    def save(self, key: VariantKey, transcripts: Sequence[Transcript]) -> Path:
        path = self.path_for(key)
        records = [
            {
                "transcript_id": t.transcript_id,
                "utterances": [
                    {"index": u.index, "speaker": u.speaker, "text": u.text}
                    for u in t.utterances
                ],
            }
            for t in sorted(transcripts, key=lambda t: t.transcript_id)
        ]
        with self._lock_for(key):
            write_jsonl(path, records)
        return path

    def exists(self, key: VariantKey) -> bool:
        return self.path_for(key).is_file()

    def load(self, key: VariantKey) -> list[Transcript]:
        path = self.path_for(key)
        if not path.is_file():
            raise VariantNotFoundError(key, path)
        transcripts = []
        for lineno, record in read_jsonl(path):
            try:
                utterances = [
                    Utterance(index=u["index"], speaker=u["speaker"], text=u["text"])
                    for u in record["utterances"]
                ]
                transcripts.append(
                    Transcript(transcript_id=record["transcript_id"], utterances=utterances)
                )
            except (KeyError, TypeError) as exc:
                raise DatasetError(f"{path}:{lineno}: bad transcript record: {exc}") from exc
        return transcripts

    def keys(self) -> list[VariantKey]:
        if not self.root.is_dir():
            return []
        found = []
        for child in self.root.iterdir():
            if child.is_dir() and _VARIANT_NAME_RE.match(child.name):
                found.append(VariantKey.parse(child.name))
        return sorted(found, key=lambda k: k.sort_key)


def _require(record: dict, key: str, where: str) -> object:
    if key not in record:
        raise DatasetError(f"{where}: missing field {key!r}")
    return record[key]


def _parse_transcript(record: dict, where: str) -> Transcript:
    transcript_id = _require(record, "transcript_id", where)
    if not isinstance(transcript_id, str) or not transcript_id:
        raise DatasetError(f"{where}: transcript_id must be a non-empty string")
    raw_utts = _require(record, "utterances", where)
    if not isinstance(raw_utts, list) or not raw_utts:
        raise DatasetError(f"{where}: utterances must be a non-empty list")
    utterances = []
    for pos, raw in enumerate(raw_utts):
        if not isinstance(raw, dict):
            raise DatasetError(f"{where}: utterance {pos} must be an object")
        text = raw.get("text")
        if not isinstance(text, str) or not text.strip():
            raise DatasetError(
                f"{where}: utterance {pos} of {transcript_id!r} has empty text"
            )
        speaker = raw.get("speaker", "speaker")
        if not isinstance(speaker, str) or not speaker:
            raise DatasetError(f"{where}: utterance {pos} has a bad speaker id")
        utterances.append(Utterance(index=pos, speaker=speaker, text=text))
    return Transcript(transcript_id=transcript_id, utterances=utterances)


def _parse_instance(record: dict, kind: str, instance_id: str, where: str) -> TaskInstance:
    task = record.get("task", kind)
    if task != kind:
        raise DatasetError(f"{where}: instance task {task!r} does not match dataset kind {kind!r}")
    transcript_id = _require(record, "transcript_id", where)
    if kind == SUMMARIZATION:
        gold = _require(record, "summary", where)
        if not isinstance(gold, str) or not gold.strip():
            raise DatasetError(f"{where}: summary must be a non-empty string")
        query = record.get("query")
        if query is not None and not isinstance(query, str):
            raise DatasetError(f"{where}: query must be a string when present")
        return TaskInstance(
            instance_id=instance_id,
            transcript_id=transcript_id,
            kind=kind,
            query=query,
            gold_summary=gold,
        )
    if kind == QUESTION_ANSWERING:
        question = _require(record, "question", where)
        answers = _require(record, "answers", where)
        if not isinstance(question, str) or not question.strip():
            raise DatasetError(f"{where}: question must be a non-empty string")
        if (
            not isinstance(answers, list)
            or not answers
            or not all(isinstance(a, str) and a for a in answers)
        ):
            raise DatasetError(f"{where}: answers must be a non-empty list of strings")
        return TaskInstance(
            instance_id=instance_id,
            transcript_id=transcript_id,
            kind=kind,
            question=question,
            gold_answers=tuple(answers),
        )
    if kind == CLASSIFICATION:
        utt_index = _require(record, "utterance_index", where)
        label = _require(record, "label", where)
        if not isinstance(utt_index, int) or utt_index < 0:
            raise DatasetError(f"{where}: utterance_index must be a non-negative integer")
        if not isinstance(label, str) or not label:
            raise DatasetError(f"{where}: label must be a non-empty string")
        return TaskInstance(
            instance_id=instance_id,
            transcript_id=transcript_id,
            kind=kind,
            utterance_index=utt_index,
            gold_label=label,
        )
    raise DatasetError(f"{where}: unsupported task kind {kind!r}")


def ingest_dataset(
    path: Path | str,
    kind: str,
    classification_window: int | None = None,
) -> Dataset:
    """Load a line-delimited JSON dataset of transcripts and task instances.

    Records carry a "kind" discriminator ("transcript" or "instance").
    Instance ids are assigned as "<transcript_id>#<n>" in file order, and the
    returned dataset is ordered by id so downstream output is deterministic.

    classification_window, when set to W, keeps only classification instances
    whose utterance lies within the first W or last W utterances of its
    transcript (an ingestion-time subset filter; other kinds reject it).
    """
    if kind not in TASK_KINDS:
        raise DatasetError(f"unsupported task kind {kind!r} (expected one of {TASK_KINDS})")
    if classification_window is not None:
        if kind != CLASSIFICATION:
            raise DatasetError("classification_window only applies to classification datasets")
        if classification_window <= 0:
            raise DatasetError("classification_window must be a positive integer")

    transcripts: dict[str, Transcript] = {}
    raw_instances: list[tuple[str, dict]] = []
    for lineno, record in read_jsonl(path):
        where = f"{path}:{lineno}"
        record_kind = _require(record, "kind", where)
        if record_kind == "transcript":
            t = _parse_transcript(record, where)
            if t.transcript_id in transcripts:
                raise DatasetError(f"{where}: duplicate transcript id {t.transcript_id!r}")
            transcripts[t.transcript_id] = t
        elif record_kind == "instance":
            raw_instances.append((where, record))
        else:
            raise DatasetError(f"{where}: unknown record kind {record_kind!r}")

    counters: dict[str, int] = defaultdict(int)
    instances: list[tuple[str, int, TaskInstance]] = []
    for where, record in raw_instances:
        transcript_id = record.get("transcript_id")
        if transcript_id not in transcripts:
            raise DatasetError(f"{where}: instance references unknown transcript {transcript_id!r}")
        seq = counters[transcript_id]
        counters[transcript_id] += 1
        instance = _parse_instance(record, kind, f"{transcript_id}#{seq}", where)
        if kind == CLASSIFICATION:
            n_utts = len(transcripts[transcript_id].utterances)
            if instance.utterance_index >= n_utts:
                raise DatasetError(
                    f"{where}: utterance_index {instance.utterance_index} out of range "
                    f"for transcript {transcript_id!r} ({n_utts} utterances)"
                )
            if classification_window is not None:
                w = classification_window
                if not (instance.utterance_index < w or instance.utterance_index >= n_utts - w):
                    continue
        instances.append((instance.transcript_id, seq, instance))

    instances.sort(key=lambda item: (item[0], item[1]))
    return Dataset(
        kind=kind,
        transcripts=sorted(transcripts.values(), key=lambda t: t.transcript_id),
        instances=[item[2] for item in instances],
    )
