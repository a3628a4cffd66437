"""Text-based detection metrics and BLEU-4 answer quality."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple, Union

from .text import tokenize

Prediction = str  # "real" | "fake" | "ambiguous"


def parse_authenticity(answer_text: str) -> Prediction:
    """Classify an answer by its authenticity words.

    fake if only "fake" occurs, real if only "real" occurs, ambiguous when
    both or neither occur (token-level, case-insensitive).
    """
    tokens = {t.lower() for t in tokenize(answer_text)}
    has_fake = "fake" in tokens
    has_real = "real" in tokens
    if has_fake and not has_real:
        return "fake"
    if has_real and not has_fake:
        return "real"
    return "ambiguous"


@dataclass
class DetectionMetrics:
    acc: float
    recall: float
    precision: float
    f1: float
    tp: int
    fp: int
    tn: int
    fn: int
    total: int
    ambiguous: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def detection_metrics(
    pairs: Sequence[Tuple[Prediction, Union[bool, str]]]
) -> DetectionMetrics:
    """Confusion metrics with fake as the positive class.

    Ambiguous predictions are scored incorrect: on a fake image they count
    as a missed positive (FN); on a real image they enter only the total
    (neither FP nor TN), which still lowers accuracy.  Undefined ratios
    (0/0) are reported as 0.
    """
    if not pairs:
        raise ValueError("detection_metrics requires a nonempty list")
    tp = fp = tn = fn = ambiguous = 0
    for predicted, truth in pairs:
        truth_fake = truth if isinstance(truth, bool) else (str(truth) == "fake")
        if predicted == "ambiguous":
            ambiguous += 1
            if truth_fake:
                fn += 1
            continue
        predicted_fake = predicted == "fake"
        if predicted_fake and truth_fake:
            tp += 1
        elif predicted_fake and not truth_fake:
            fp += 1
        elif not predicted_fake and truth_fake:
            fn += 1
        else:
            tn += 1
    total = len(pairs)
    precision = tp / (tp + fp) if (tp + fp) > 0 else 0.0
    recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if (precision + recall) > 0
        else 0.0
    )
    return DetectionMetrics(
        acc=(tp + tn) / total,
        recall=recall,
        precision=precision,
        f1=f1,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        total=total,
        ambiguous=ambiguous,
    )


def bleu4(candidate: str, references: Iterable[str], max_order: int = 4) -> float:
    """Word-level BLEU with brevity penalty and uniform n-gram weights.

    Modified n-gram precisions use clipped reference counts.  Smoothing:
    for orders above 1 a zero match count is replaced by 1/(possible+1)
    (so only a unigram miss zeroes the score).
    """
    cand = tokenize(candidate)
    refs = [tokenize(r) for r in references]
    if not cand or not refs:
        return 0.0
    log_precision_sum = 0.0
    for n in range(1, max_order + 1):
        matches, possible = _modified_counts(cand, refs, n)
        if n > 1 and matches == 0:
            matches, possible = 1, possible + 1
        if matches == 0 or possible == 0:
            return 0.0
        log_precision_sum += math.log(matches / possible) / max_order
    c = len(cand)
    r = _closest_ref_length(c, [len(ref) for ref in refs])
    brevity = 1.0 if c > r else math.exp(1.0 - r / c)
    return brevity * math.exp(log_precision_sum)


def _ngrams(tokens: List[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _modified_counts(cand: List[str], refs: List[List[str]], n: int) -> Tuple[int, int]:
    cand_counts = _ngrams(cand, n)
    max_ref: Counter = Counter()
    for ref in refs:
        for gram, count in _ngrams(ref, n).items():
            max_ref[gram] = max(max_ref[gram], count)
    matches = sum(min(count, max_ref[gram]) for gram, count in cand_counts.items())
    possible = max(len(cand) - n + 1, 0)
    return matches, possible


def _closest_ref_length(c: int, ref_lengths: List[int]) -> int:
    return min(ref_lengths, key=lambda r: (abs(r - c), r))
