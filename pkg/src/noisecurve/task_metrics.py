"""Task scoring: ROUGE, QA answer matching, label classification, tournaments.

All text metrics tokenize with the alignment tokenizer and case-fold; there
is no stemming or stopword removal anywhere, so scores are reproducible from
the text alone.
"""

from __future__ import annotations

import random
import re
import string
from collections import Counter
from dataclasses import dataclass, field
from difflib import SequenceMatcher
from typing import Callable, Mapping, Sequence

from .alignment import tokenize
from .util import derive_seed

ROUGE_ORDERS = (1, 2, "L")

EXACT = "exact"
TOKEN_F1 = "f1"
FUZZY = "fuzzy"
QA_MODES = (EXACT, TOKEN_F1, FUZZY)

UNANSWERABLE = "unanswerable"
INVALID_LABEL = "__invalid__"

WIN_POINTS = 2
TIE_POINTS = 1

NON_CLEANED = "non_cleaned"
CLEANED = "cleaned"


def _metric_tokens(text: str) -> list[str]:
    return [t.text.casefold() for t in tokenize(text)]


def _ngram_counts(tokens: Sequence[str], order: int) -> Counter:
    return Counter(tuple(tokens[i : i + order]) for i in range(len(tokens) - order + 1))


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        row = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                row.append(prev[j - 1] + 1)
            else:
                row.append(max(prev[j], row[-1]))
        prev = row
    return prev[-1]


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def rouge_score(candidate: str, reference: str, order: int | str) -> float:
    """ROUGE F1 between a candidate and a reference text.

    Orders 1 and 2 compare clipped n-gram counts; order "L" compares the
    longest common subsequence over the whole texts.  When neither side has
    any units of the requested order the score is 1.0; when exactly one side
    has none it is 0.0.
    """
    if order not in ROUGE_ORDERS:
        raise ValueError(f"unsupported ROUGE order {order!r} (expected 1, 2 or 'L')")
    cand = _metric_tokens(candidate)
    ref = _metric_tokens(reference)
    if order == "L":
        if not cand and not ref:
            return 1.0
        if not cand or not ref:
            return 0.0
        lcs = _lcs_length(cand, ref)
        return _f1(lcs / len(cand), lcs / len(ref))
    cand_counts = _ngram_counts(cand, order)
    ref_counts = _ngram_counts(ref, order)
    total_cand = sum(cand_counts.values())
    total_ref = sum(ref_counts.values())
    if total_cand == 0 and total_ref == 0:
        return 1.0
    if total_cand == 0 or total_ref == 0:
        return 0.0
    overlap = sum((cand_counts & ref_counts).values())
    return _f1(overlap / total_cand, overlap / total_ref)


_ARTICLE_RE = re.compile(r"\b(a|an|the)\b")
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def normalize_answer(text: str) -> str:
    """Lowercase, strip punctuation, drop articles, collapse whitespace."""
    text = text.lower()
    text = text.translate(_PUNCT_TABLE)
    text = _ARTICLE_RE.sub(" ", text)
    return " ".join(text.split())


def _qa_exact(prediction: str, gold: str) -> float:
    return 1.0 if normalize_answer(prediction) == normalize_answer(gold) else 0.0


def _qa_token_f1(prediction: str, gold: str) -> float:
    pred_tokens = normalize_answer(prediction).split()
    gold_tokens = normalize_answer(gold).split()
    if not pred_tokens and not gold_tokens:
        return 1.0
    common = Counter(pred_tokens) & Counter(gold_tokens)
    overlap = sum(common.values())
    if overlap == 0:
        return 0.0
    return _f1(overlap / len(pred_tokens), overlap / len(gold_tokens))


def _qa_fuzzy(prediction: str, gold: str) -> float:
    # 100 * 2*matched_chars/(len_a + len_b), matches found greedily as the
    # longest matching blocks; autojunk off so long strings are not pruned
    a = normalize_answer(prediction)
    b = normalize_answer(gold)
    return 100.0 * SequenceMatcher(None, a, b, autojunk=False).ratio()


def qa_match(prediction: str, golds: Sequence[str], mode: str) -> float:
    """Best score of the prediction against any gold answer.

    An "unanswerable" gold is a literal string and compares like any other
    answer.  exact is 0/1, f1 is the token-multiset F1, fuzzy is a 0-100
    character similarity ratio.
    """
    if mode not in QA_MODES:
        raise ValueError(f"unsupported QA mode {mode!r} (expected one of {QA_MODES})")
    if not golds:
        raise ValueError("qa_match needs at least one gold answer")
    scorer = {EXACT: _qa_exact, TOKEN_F1: _qa_token_f1, FUZZY: _qa_fuzzy}[mode]
    return max(scorer(prediction, gold) for gold in golds)


@dataclass(frozen=True)
class ClassificationScores:
    accuracy: float
    macro_f1: float
    per_class_f1: Mapping[str, float]


def classification_scores(
    predictions: Sequence[str], golds: Sequence[str], labels: Sequence[str]
) -> ClassificationScores:
    """Accuracy and macro F1 over a fixed label set.

    Predictions outside the label set are mapped to a reserved invalid label
    (they count against accuracy and against the recall of their gold class).
    macro_f1 averages F1 over `labels` only; a class with no predictions and
    no golds contributes 0.
    """
    if len(predictions) != len(golds):
        raise ValueError(
            f"got {len(predictions)} predictions for {len(golds)} gold labels"
        )
    if not golds:
        raise ValueError("classification_scores needs at least one example")
    label_set = set(labels)
    if len(label_set) != len(labels):
        raise ValueError("labels must be unique")
    for g in golds:
        if g not in label_set:
            raise ValueError(f"gold label {g!r} is not in the label set")

    mapped = [p if p in label_set else INVALID_LABEL for p in predictions]
    correct = sum(1 for p, g in zip(mapped, golds) if p == g)

    per_class_f1 = {}
    for label in labels:
        tp = sum(1 for p, g in zip(mapped, golds) if p == label and g == label)
        fp = sum(1 for p, g in zip(mapped, golds) if p == label and g != label)
        fn = sum(1 for p, g in zip(mapped, golds) if p != label and g == label)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        per_class_f1[label] = _f1(precision, recall)

    return ClassificationScores(
        accuracy=correct / len(golds),
        macro_f1=sum(per_class_f1.values()) / len(labels),
        per_class_f1=per_class_f1,
    )


# A judge callback takes (reference, candidate_a, candidate_b, query) in
# presentation order and answers "1", "2" or "tie".
JudgeFn = Callable[[str, str, str, str | None], str]
_VERDICTS = ("1", "2", "tie")


@dataclass(frozen=True)
class Candidate:
    key: str
    output: str


@dataclass(frozen=True)
class PairResult:
    first: str
    second: str
    swapped: bool  # True when `second` was presented as candidate 1
    verdict: str  # "1" | "2" | "tie" | "unresolved"
    winner: str | None  # key of the winner; None for ties and unresolved pairs


@dataclass
class Tournament:
    mode: str
    points: dict[str, int]
    pairs: list[PairResult]
    unresolved: list[tuple[str, str]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def total_points(self) -> int:
        return sum(self.points.values())


def _judge_pair(
    a: Candidate,
    b: Candidate,
    judge: JudgeFn,
    reference: str,
    query: str | None,
    seed: int,
    instance_id: str,
    tournament: Tournament,
) -> None:
    rng = random.Random(derive_seed(seed, "judge-order", instance_id, a.key, b.key))
    swapped = rng.random() < 0.5
    first_shown, second_shown = (b, a) if swapped else (a, b)
    try:
        verdict = judge(reference, first_shown.output, second_shown.output, query)
    except Exception as exc:  # transport or adapter failure: exclude, keep going
        tournament.unresolved.append((a.key, b.key))
        tournament.warnings.append(f"pair ({a.key}, {b.key}) unresolved: {exc}")
        tournament.pairs.append(
            PairResult(first=a.key, second=b.key, swapped=swapped, verdict="unresolved", winner=None)
        )
        return
    if verdict not in _VERDICTS:
        tournament.unresolved.append((a.key, b.key))
        tournament.warnings.append(
            f"pair ({a.key}, {b.key}) unresolved: bad verdict {verdict!r}"
        )
        tournament.pairs.append(
            PairResult(first=a.key, second=b.key, swapped=swapped, verdict="unresolved", winner=None)
        )
        return
    if verdict == "tie":
        tournament.points[a.key] += TIE_POINTS
        tournament.points[b.key] += TIE_POINTS
        winner = None
    else:
        shown = (first_shown, second_shown)
        winner_candidate = shown[0] if verdict == "1" else shown[1]
        tournament.points[winner_candidate.key] += WIN_POINTS
        winner = winner_candidate.key
    tournament.pairs.append(
        PairResult(first=a.key, second=b.key, swapped=swapped, verdict=verdict, winner=winner)
    )


def run_tournament(
    mode: str,
    candidates: Sequence[Candidate],
    judge: JudgeFn,
    *,
    reference: str,
    seed: int,
    instance_id: str,
    query: str | None = None,
    cleaned: Sequence[Candidate] = (),
) -> Tournament:
    """Pairwise preference tournament over one instance's outputs.

    non_cleaned mode plays every pair among `candidates` once (round robin).
    cleaned mode plays every `cleaned` candidate against every non-cleaned
    candidate; cleaned candidates never meet each other.  A win scores 2, a
    tie 1 for each side.  Presentation order within a pair is randomized from
    the run seed and recorded; judge failures leave the pair unresolved (no
    points, a warning is recorded).
    """
    if mode not in (NON_CLEANED, CLEANED):
        raise ValueError(f"unknown tournament mode {mode!r}")
    keys = [c.key for c in candidates] + [c.key for c in cleaned]
    if len(set(keys)) != len(keys):
        raise ValueError("candidate keys must be unique")
    if mode == NON_CLEANED:
        if cleaned:
            raise ValueError("non_cleaned mode takes no cleaned candidates")
        if len(candidates) < 2:
            raise ValueError("a round robin needs at least two candidates")
        schedule = [
            (candidates[i], candidates[j])
            for i in range(len(candidates))
            for j in range(i + 1, len(candidates))
        ]
    else:
        if not cleaned or not candidates:
            raise ValueError("cleaned mode needs cleaned and non-cleaned candidates")
        schedule = [(c, nc) for c in cleaned for nc in candidates]

    tournament = Tournament(mode=mode, points={k: 0 for k in keys}, pairs=[])
    for a, b in schedule:
        _judge_pair(a, b, judge, reference, query, seed, instance_id, tournament)
    return tournament


def shift_noncleaned_baseline(
    per_variant_scores: Mapping[str, Sequence[float]],
) -> dict[str, list[float]]:
    """Add exactly 1.0 to every score so each variant's mean rises by 1.0.

    Used when a non-cleaned round-robin line is redrawn next to cleaned
    tournament scores, which are earned against one extra opponent.  Not
    idempotent: applying it twice shifts by 2.
    """
    return {key: [s + 1.0 for s in scores] for key, scores in per_variant_scores.items()}
