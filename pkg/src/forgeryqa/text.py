"""Word-level tokenization shared by the dataset builder and the LM.

Splitting on whitespace and punctuation guarantees "real" and "fake" are
single tokens, which the authenticity-word bookkeeping relies on.
"""

from __future__ import annotations

import re
from typing import List, Optional

_TOKEN_RE = re.compile(r"[A-Za-z0-9_']+|[^\sA-Za-z0-9_']")
_NO_SPACE_BEFORE = {".", ",", "!", "?", ";", ":", ")", "'"}
_NO_SPACE_AFTER = {"("}


def tokenize(text: str) -> List[str]:
    return _TOKEN_RE.findall(text)


def detokenize(tokens: List[str]) -> str:
    out: List[str] = []
    for tok in tokens:
        if out and tok not in _NO_SPACE_BEFORE and out[-1] not in _NO_SPACE_AFTER:
            out.append(" ")
        out.append(tok)
    return "".join(out)


def authenticity_index(answer: str) -> Optional[int]:
    """Token position of the single authenticity word in an answer.

    Returns None when neither "real" nor "fake" occurs; raises if the
    answer is ambiguous (both words, or repeats).
    """
    tokens = [t.lower() for t in tokenize(answer)]
    hits = [i for i, t in enumerate(tokens) if t in ("real", "fake")]
    if not hits:
        return None
    if len(hits) > 1:
        raise ValueError(f"answer has {len(hits)} authenticity words: {answer!r}")
    return hits[0]
