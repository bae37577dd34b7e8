"""Topic dictionary construction and interview segmentation.

The interviewer opens every topic with one of a small set of trigger
sentences, so segmentation reduces to fuzzy dictionary lookup: an interviewer
utterance whose sentence sits within edit distance 3 of a trigger opens that
topic's window, and the window runs until the next matched utterance. Speech
that matches nothing (backchannels like "that's good") never truncates a
topic.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Dataset, INTERVIEWER, PARTICIPANT, require_sessions
from .errors import DictionaryError
from .text import edit_distance, normalize_sentence

DEFAULT_MAX_DIST = 3


@dataclass(frozen=True)
class TopicEntry:
    index: int
    name: str
    is_key_topic: bool
    trigger_sentences: tuple[str, ...]


@dataclass(frozen=True)
class TopicDictionary:
    entries: tuple[TopicEntry, ...]

    def __post_init__(self):
        seen = {}
        for pos, entry in enumerate(self.entries):
            if entry.index != pos + 1:
                raise DictionaryError(
                    f"topic indices must be contiguous from 1; "
                    f"entry {pos} has index {entry.index}"
                )
            if not entry.trigger_sentences:
                raise DictionaryError(f"topic {entry.index} has no trigger sentences")
            for trig in entry.trigger_sentences:
                if trig in seen:
                    raise DictionaryError(
                        f"trigger {trig!r} appears in topics {seen[trig]} and {entry.index}"
                    )
                seen[trig] = entry.index

    def __len__(self) -> int:
        return len(self.entries)

    def entry(self, index: int) -> TopicEntry:
        return self.entries[index - 1]

    @property
    def key_topics(self) -> tuple[int, ...]:
        return tuple(e.index for e in self.entries if e.is_key_topic)


@dataclass(frozen=True)
class TopicSegment:
    topic_index: int
    t_start: float
    t_end: float
    participant_text: str


@dataclass(frozen=True)
class MergedTopic:
    """All occurrences of one topic in one interview, fused for featurizing."""

    topic_index: int
    windows: tuple[tuple[float, float], ...]
    text: str


@dataclass(frozen=True)
class CoverageStats:
    rates: dict[int, float]
    histogram: tuple[int, ...]  # 10 equal bins over [0, 1]


def load_topic_dictionary(path) -> TopicDictionary:
    """Read a topic dictionary file; triggers are normalized on load."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DictionaryError(f"topic dictionary is not valid JSON: {e}") from e
    topics = payload.get("topics")
    if not isinstance(topics, list) or not topics:
        raise DictionaryError("topic dictionary must contain a non-empty 'topics' array")
    entries = []
    for item in topics:
        triggers = tuple(
            t for t in (normalize_sentence(s) for s in item.get("triggers", ())) if t
        )
        entries.append(
            TopicEntry(
                index=int(item["index"]),
                name=str(item["name"]),
                is_key_topic=bool(item.get("key", False)),
                trigger_sentences=triggers,
            )
        )
    return TopicDictionary(tuple(entries))


def build_preliminary_dictionary(dataset: Dataset) -> list[tuple[str, int]]:
    """All distinct normalized interviewer sentences with corpus frequencies.

    Ordered by descending frequency, ties by first occurrence.
    """
    require_sessions(dataset)
    counts: Counter = Counter()
    first_seen: dict[str, int] = {}
    order = 0
    for session in dataset:
        for utt in session.transcript:
            if utt.speaker != INTERVIEWER:
                continue
            sentence = normalize_sentence(utt.text)
            if not sentence:
                continue
            counts[sentence] += 1
            if sentence not in first_seen:
                first_seen[sentence] = order
                order += 1
    return sorted(counts.items(), key=lambda kv: (-kv[1], first_seen[kv[0]]))


def cluster_sentences(sentences, max_dist: int = DEFAULT_MAX_DIST) -> list[list[str]]:
    """Single-linkage clusters under the edit-distance <= max_dist relation.

    Returns a partition of the distinct sentences; clusters are sorted by
    their lexicographically smallest member, members sorted within.
    """
    if max_dist < 0:
        raise ValueError("max_dist must be >= 0")
    unique = sorted(set(sentences))
    parent = list(range(len(unique)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(unique)):
        for j in range(i + 1, len(unique)):
            if edit_distance(unique[i], unique[j], limit=max_dist) <= max_dist:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[rj] = ri
    groups: dict[int, list[str]] = {}
    for i, sentence in enumerate(unique):
        groups.setdefault(find(i), []).append(sentence)
    return sorted((sorted(g) for g in groups.values()), key=lambda g: g[0])


def match_topic(dictionary: TopicDictionary, sentence: str,
                max_dist: int = DEFAULT_MAX_DIST) -> int | None:
    """Topic index whose trigger set contains (or nearly contains) the sentence.

    Exact trigger hits win; otherwise the closest trigger within ``max_dist``
    edits does, ties resolved toward the lowest topic index. Returns None when
    nothing is close enough.
    """
    sentence = normalize_sentence(sentence)
    if not sentence:
        return None
    best_dist = max_dist + 1
    best_topic = None
    for entry in dictionary.entries:
        for trig in entry.trigger_sentences:
            if trig == sentence:
                return entry.index
            d = edit_distance(sentence, trig, limit=max_dist)
            if d < best_dist:
                best_dist = d
                best_topic = entry.index
    return best_topic


def segment_interview(dictionary: TopicDictionary, transcript) -> list[TopicSegment]:
    """Cut one transcript into topic windows.

    Interviewer utterances are scanned in time order; each dictionary match
    opens a window at that utterance's start, closed by the next match's start
    (the last window closes at the final utterance's stop). A window collects
    the normalized participant speech starting inside it. Repeated topics stay
    as separate segments here; see :func:`merge_topic_windows`.
    """
    utterances = sorted(transcript, key=lambda u: u.start)
    if not utterances:
        return []
    opens = []
    for utt in utterances:
        if utt.speaker != INTERVIEWER:
            continue
        topic = match_topic(dictionary, utt.text)
        if topic is not None:
            opens.append((utt.start, topic))
    if not opens:
        return []
    end_of_interview = utterances[-1].stop
    segments = []
    for i, (t_start, topic) in enumerate(opens):
        t_end = opens[i + 1][0] if i + 1 < len(opens) else end_of_interview
        texts = [
            normalize_sentence(u.text)
            for u in utterances
            if u.speaker == PARTICIPANT and t_start <= u.start < t_end
        ]
        segments.append(
            TopicSegment(
                topic_index=topic,
                t_start=t_start,
                t_end=t_end,
                participant_text=" ".join(t for t in texts if t),
            )
        )
    return segments


def merge_topic_windows(segments) -> dict[int, MergedTopic]:
    """Fuse repeated topics: one entry per topic, windows and text in time order."""
    merged: dict[int, MergedTopic] = {}
    for seg in segments:
        prev = merged.get(seg.topic_index)
        if prev is None:
            merged[seg.topic_index] = MergedTopic(
                topic_index=seg.topic_index,
                windows=((seg.t_start, seg.t_end),),
                text=seg.participant_text,
            )
        else:
            text = (prev.text + " " + seg.participant_text).strip()
            merged[seg.topic_index] = MergedTopic(
                topic_index=seg.topic_index,
                windows=prev.windows + ((seg.t_start, seg.t_end),),
                text=text,
            )
    return merged


def coverage_stats(dataset: Dataset, dictionary: TopicDictionary) -> CoverageStats:
    """Per-topic cover rate (fraction of interviews containing the topic)."""
    require_sessions(dataset)
    hits = Counter()
    for session in dataset:
        present = {seg.topic_index for seg in segment_interview(dictionary, session.transcript)}
        hits.update(present)
    n = len(dataset)
    rates = {entry.index: hits.get(entry.index, 0) / n for entry in dictionary.entries}
    counts, _ = np.histogram(list(rates.values()), bins=10, range=(0.0, 1.0))
    return CoverageStats(rates=rates, histogram=tuple(int(c) for c in counts))


def draft_dictionary(dataset: Dataset, max_dist: int = DEFAULT_MAX_DIST) -> dict:
    """Clustering aid for dictionary curation.

    Builds the preliminary sentence list, clusters near-duplicates, and emits
    a dictionary skeleton (placeholder names, clusters as trigger lists) that
    a human can edit into a real topic dictionary.
    """
    ranked = build_preliminary_dictionary(dataset)
    freq = dict(ranked)
    clusters = cluster_sentences([s for s, _ in ranked], max_dist=max_dist)
    clusters = sorted(clusters, key=lambda c: (-sum(freq[s] for s in c), c[0]))
    topics = []
    for i, cluster in enumerate(clusters, start=1):
        topics.append(
            {
                "index": i,
                "name": f"topic_{i:03d}",
                "key": False,
                "triggers": cluster,
                "corpus_frequency": sum(freq[s] for s in cluster),
            }
        )
    return {"topics": topics}
