"""Sentence normalization and edit distance.

Both the transcript loader and the topic matcher need the exact same
normalization, so it lives here rather than in either module.
"""

from __future__ import annotations

import re

_WS = re.compile(r"\s+")
_DROP = re.compile(r"[^a-z0-9_' ]+")


def normalize_sentence(text: str) -> str:
    """Canonical lowercase form used everywhere sentences are compared.

    Keeps ASCII letters, digits, underscore, apostrophe, and single spaces;
    everything else is removed. Idempotent.
    """
    lowered = _WS.sub(" ", text.lower())
    cleaned = _DROP.sub("", lowered)
    return _WS.sub(" ", cleaned).strip()


def edit_distance(a: str, b: str, limit: int | None = None) -> int:
    """Unit-cost Levenshtein distance between two strings.

    With ``limit`` set, any true distance above it is reported as
    ``limit + 1`` (the scan stops early), which is all a thresholded
    comparison needs.
    """
    if a == b:
        return 0
    if limit is not None and abs(len(a) - len(b)) > limit:
        return limit + 1
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        append = cur.append
        for j, cb in enumerate(b, start=1):
            append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        if limit is not None and min(cur) > limit:
            return limit + 1
        prev = cur
    return prev[-1]
