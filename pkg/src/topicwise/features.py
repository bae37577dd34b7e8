"""Topic-slotted feature vectors.

Every topic owns a fixed slot group in the vector: 93 word-category
frequencies, 74x3 voice functionals, 5x3 formant functionals, and 20x3
action-unit functionals, preceded by a gender slot, one presence bit per
topic, and one ordinal slot per key topic. With the default 83-topic
dictionary that is 1 + 83 + 8 + 83*(93+222+15+60) = 32,462 slots. Slots of
topics an interview never reaches hold the missing marker -1.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Dataset, FrameSeries, PARTICIPANT, Session, slice_frames
from .errors import (
    ColumnCountMismatch,
    DictionaryError,
    EmptySegment,
    LayoutMismatch,
)
from .text import normalize_sentence
from .topic import MergedTopic, TopicDictionary, TopicSegment, merge_topic_windows, segment_interview

MISSING = -1.0
N_CATEGORIES = 93
STATS = ("mean", "max", "min")
COVAREP_CHANNELS = 74
FORMANT_CHANNELS = 5
AU_CHANNELS = 20

AUDIO_DIM = (COVAREP_CHANNELS + FORMANT_CHANNELS) * len(STATS)  # 237
VIDEO_DIM = AU_CHANNELS * len(STATS)  # 60
TOPIC_BLOCK_DIM = N_CATEGORIES + AUDIO_DIM + VIDEO_DIM  # 390


# --- word-category dictionary ----------------------------------------------


@dataclass(frozen=True)
class WordCategoryDictionary:
    category_names: tuple[str, ...]
    exact: dict
    prefixes: dict

    def __post_init__(self):
        if len(self.category_names) != N_CATEGORIES:
            raise DictionaryError(
                f"word-category dictionary must define exactly {N_CATEGORIES} "
                f"categories, got {len(self.category_names)}"
            )

    def categories_for(self, token: str) -> tuple[int, ...]:
        hit = self.exact.get(token)
        if hit is not None:
            return hit
        best = ()
        best_len = -1
        for prefix, cats in self.prefixes.items():
            if len(prefix) > best_len and token.startswith(prefix):
                best = cats
                best_len = len(prefix)
        return best


def load_word_categories(path) -> WordCategoryDictionary:
    """Parse the two-section dictionary file.

    Format: a ``[categories]`` section with one name per line, then a
    ``[words]`` section with ``token : cat,cat`` entries; a trailing ``*`` on
    a token makes it a prefix entry. ``#`` starts a comment.
    """
    names: list[str] = []
    exact: dict = {}
    prefixes: dict = {}
    section = None
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.lower() in ("[categories]", "[words]"):
            section = line.lower()
            continue
        if section == "[categories]":
            if line in names:
                raise DictionaryError(f"line {line_no}: duplicate category {line!r}")
            names.append(line)
        elif section == "[words]":
            if ":" not in line:
                raise DictionaryError(f"line {line_no}: expected 'token : categories'")
            token, cats = (part.strip() for part in line.split(":", 1))
            token = token.lower()
            try:
                indices = tuple(sorted(names.index(c.strip()) for c in cats.split(",")))
            except ValueError:
                raise DictionaryError(f"line {line_no}: unknown category in {cats!r}") from None
            target = prefixes if token.endswith("*") else exact
            key = token.rstrip("*")
            if key in target:
                raise DictionaryError(f"line {line_no}: duplicate entry {token!r}")
            target[key] = indices
        else:
            raise DictionaryError(f"line {line_no}: content before any section header")
    return WordCategoryDictionary(tuple(names), exact, prefixes)


def liwc_counts(word_dict: WordCategoryDictionary, text: str) -> np.ndarray:
    """Per-category word-presence frequencies of one stretch of speech.

    Counts are divided by the token count, so topics of different lengths
    stay comparable. Empty text yields all zeros.
    """
    tokens = normalize_sentence(text).split()
    counts = np.zeros(N_CATEGORIES)
    if not tokens:
        return counts
    for token in tokens:
        for cat in word_dict.categories_for(token):
            counts[cat] += 1.0
    return counts / len(tokens)


# --- key-topic rules --------------------------------------------------------


@dataclass(frozen=True)
class KeyTopicRule:
    topic_index: int
    categories: tuple[tuple[str, tuple[str, ...]], ...]

    def __post_init__(self):
        if not 2 <= len(self.categories) <= 3:
            raise DictionaryError(
                f"key-topic rule for topic {self.topic_index} must have 2 or 3 "
                f"categories, got {len(self.categories)}"
            )
        seen: dict[str, str] = {}
        for name, phrases in self.categories:
            if not phrases:
                raise DictionaryError(f"rule category {name!r} has no phrases")
            for phrase in phrases:
                if phrase in seen:
                    raise DictionaryError(
                        f"phrase {phrase!r} appears in categories "
                        f"{seen[phrase]!r} and {name!r} of topic {self.topic_index}"
                    )
                seen[phrase] = name


def load_key_topic_rules(path) -> dict[int, KeyTopicRule]:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DictionaryError(f"rules file is not valid JSON: {e}") from e
    rules = {}
    for item in payload.get("rules", ()):
        topic = int(item["topic_index"])
        categories = tuple(
            (
                str(cat["name"]),
                tuple(normalize_sentence(p) for p in cat["phrases"]),
            )
            for cat in item["categories"]
        )
        rules[topic] = KeyTopicRule(topic_index=topic, categories=categories)
    return rules


def classify_key_topic(rule: KeyTopicRule, text: str) -> int:
    """Ordinal category code for a key topic's speech; -1 when nothing matches.

    The first category (in rule order) with any phrase occurring as a
    substring of the normalized text wins.
    """
    normalized = normalize_sentence(text)
    if not normalized:
        return -1
    for code, (_, phrases) in enumerate(rule.categories):
        if any(phrase in normalized for phrase in phrases):
            return code
    return -1


# --- functionals ------------------------------------------------------------


def apply_functionals(frames: np.ndarray, channel_count: int | None = None) -> np.ndarray:
    """Per-channel (mean, max, min) over the finite values of each channel.

    Output is channel-major, stat-minor. Channels with no finite value at all
    yield the missing marker for all three stats. An empty frame slice is an
    error; callers decide what emptiness means (see the segment ops).
    """
    frames = np.asarray(frames, dtype=float)
    if frames.ndim != 2 or frames.shape[0] == 0:
        raise EmptySegment("functionals need at least one frame")
    if channel_count is not None and frames.shape[1] != channel_count:
        raise ColumnCountMismatch(channel_count, frames.shape[1])
    finite = np.isfinite(frames)
    counts = finite.sum(axis=0)
    safe = np.where(finite, frames, np.nan)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        means = np.nanmean(safe, axis=0)
        maxes = np.nanmax(safe, axis=0)
        mins = np.nanmin(safe, axis=0)
    out = np.stack([means, maxes, mins], axis=1)
    out[counts == 0] = MISSING
    return out.reshape(-1)


def _windows_of(segment) -> tuple[tuple[float, float], ...]:
    if isinstance(segment, MergedTopic):
        return segment.windows
    if isinstance(segment, TopicSegment):
        return ((segment.t_start, segment.t_end),)
    return tuple((float(a), float(b)) for a, b in segment)


def _stack_windows(series: FrameSeries, windows) -> np.ndarray:
    parts = [slice_frames(series, t0, t1).channels for t0, t1 in windows]
    if not parts:
        return np.empty((0, series.channels.shape[1] if series.channels.ndim == 2 else 0))
    return np.vstack(parts)


def _functionals_or_missing(series: FrameSeries, windows, n_channels: int) -> np.ndarray:
    frames = _stack_windows(series, windows)
    if frames.shape[0] == 0:
        return np.full(n_channels * len(STATS), MISSING)
    return apply_functionals(frames, n_channels)


def audio_features_for_segment(covarep: FrameSeries, formant: FrameSeries, segment) -> np.ndarray:
    """237 values: voice-descriptor functionals then formant functionals.

    ``segment`` may be a TopicSegment, a MergedTopic, or raw (t0, t1) windows.
    An empty window yields missing markers rather than an error.
    """
    windows = _windows_of(segment)
    return np.concatenate(
        [
            _functionals_or_missing(covarep, windows, COVAREP_CHANNELS),
            _functionals_or_missing(formant, windows, FORMANT_CHANNELS),
        ]
    )


def video_features_for_segment(aus: FrameSeries, segment) -> np.ndarray:
    """60 values: action-unit functionals over the segment's windows."""
    return _functionals_or_missing(aus, _windows_of(segment), AU_CHANNELS)


# --- layout -----------------------------------------------------------------


class FeatureLayout:
    """Index map for the topic-slotted vector: gender, presence bits, key
    slots, then per-topic [liwc, covarep, formant, au] blocks in topic order.
    """

    def __init__(self, topic_indices, key_topic_indices):
        self.topic_indices = tuple(topic_indices)
        self.key_topic_indices = tuple(key_topic_indices)
        width = max(2, len(str(max(self.topic_indices, default=1))))

        def t(i):
            return f"t{i:0{width}d}"

        names = ["gender"]
        self._presence = {}
        for topic in self.topic_indices:
            self._presence[topic] = len(names)
            names.append(f"{t(topic)}.presence")
        self._key = {}
        for topic in self.key_topic_indices:
            self._key[topic] = len(names)
            names.append(f"{t(topic)}.key")
        self._liwc = {}
        self._covarep = {}
        self._formant = {}
        self._au = {}
        for topic in self.topic_indices:
            self._liwc[topic] = len(names)
            names.extend(f"{t(topic)}.liwc.c{c:02d}" for c in range(N_CATEGORIES))
            self._covarep[topic] = len(names)
            names.extend(
                f"{t(topic)}.covarep.ch{ch:02d}.{stat}"
                for ch in range(COVAREP_CHANNELS)
                for stat in STATS
            )
            self._formant[topic] = len(names)
            names.extend(
                f"{t(topic)}.formant.ch{ch:02d}.{stat}"
                for ch in range(FORMANT_CHANNELS)
                for stat in STATS
            )
            self._au[topic] = len(names)
            names.extend(
                f"{t(topic)}.au.ch{ch:02d}.{stat}"
                for ch in range(AU_CHANNELS)
                for stat in STATS
            )
        self.names = tuple(names)
        self._index_of = {name: i for i, name in enumerate(self.names)}

    @property
    def total_dim(self) -> int:
        return len(self.names)

    gender_index = 0

    def name_of(self, index: int) -> str:
        return self.names[index]

    def index_of(self, name: str) -> int:
        return self._index_of[name]

    def presence_index(self, topic: int) -> int:
        return self._presence[topic]

    def key_index(self, topic: int) -> int:
        return self._key[topic]

    def liwc_slice(self, topic: int) -> slice:
        start = self._liwc[topic]
        return slice(start, start + N_CATEGORIES)

    def covarep_slice(self, topic: int) -> slice:
        start = self._covarep[topic]
        return slice(start, start + COVAREP_CHANNELS * len(STATS))

    def formant_slice(self, topic: int) -> slice:
        start = self._formant[topic]
        return slice(start, start + FORMANT_CHANNELS * len(STATS))

    def au_slice(self, topic: int) -> slice:
        start = self._au[topic]
        return slice(start, start + AU_CHANNELS * len(STATS))

    def topic_slice(self, topic: int) -> slice:
        start = self._liwc[topic]
        return slice(start, start + TOPIC_BLOCK_DIM)

    def block_counts(self) -> dict[str, int]:
        n = len(self.topic_indices)
        return {
            "gender": 1,
            "presence": n,
            "key": len(self.key_topic_indices),
            "liwc": N_CATEGORIES * n,
            "covarep": COVAREP_CHANNELS * len(STATS) * n,
            "formant": FORMANT_CHANNELS * len(STATS) * n,
            "aus": AU_CHANNELS * len(STATS) * n,
        }


def layout_for(dictionary: TopicDictionary) -> FeatureLayout:
    return FeatureLayout(
        topic_indices=[e.index for e in dictionary.entries],
        key_topic_indices=dictionary.key_topics,
    )


# --- vector assembly ----------------------------------------------------------


def assemble_vector(
    session: Session,
    segments,
    topic_dict: TopicDictionary,
    word_dict: WordCategoryDictionary,
    rules: dict[int, KeyTopicRule],
    layout: FeatureLayout | None = None,
) -> np.ndarray:
    """One fixed-layout vector for one session.

    Present topics get their word-category, audio, and video blocks filled
    from the merged windows; absent topics stay at -1 throughout (presence
    bits are always 0/1 and gender is always set).
    """
    if layout is None:
        layout = layout_for(topic_dict)
    if layout.topic_indices != tuple(e.index for e in topic_dict.entries):
        raise LayoutMismatch(
            f"layout covers topics {layout.topic_indices[:3]}..., "
            f"dictionary has {len(topic_dict)} topics"
        )
    vec = np.full(layout.total_dim, MISSING)
    vec[layout.gender_index] = float(session.meta.gender)
    for topic in layout.topic_indices:
        vec[layout.presence_index(topic)] = 0.0

    merged = merge_topic_windows(segments)
    for topic, occ in merged.items():
        vec[layout.presence_index(topic)] = 1.0
        vec[layout.liwc_slice(topic)] = liwc_counts(word_dict, occ.text)
        audio = audio_features_for_segment(session.covarep, session.formant, occ)
        vec[layout.covarep_slice(topic)] = audio[: COVAREP_CHANNELS * len(STATS)]
        vec[layout.formant_slice(topic)] = audio[COVAREP_CHANNELS * len(STATS):]
        vec[layout.au_slice(topic)] = video_features_for_segment(session.aus, occ)
        if topic in layout.key_topic_indices:
            rule = rules.get(topic)
            if rule is not None:
                vec[layout.key_index(topic)] = float(classify_key_topic(rule, occ.text))
    return vec


@dataclass
class VectorTable:
    """Feature matrix for a set of sessions, plus the names of its columns."""

    session_ids: tuple[str, ...]
    y: np.ndarray
    X: np.ndarray
    names: tuple[str, ...]
    splits: tuple[str, ...] | None = None

    def __len__(self) -> int:
        return len(self.session_ids)

    def restrict(self, splits) -> "VectorTable":
        if self.splits is None:
            raise ValueError("this table carries no split information")
        wanted = {splits} if isinstance(splits, str) else set(splits)
        keep = [i for i, s in enumerate(self.splits) if s in wanted]
        return VectorTable(
            session_ids=tuple(self.session_ids[i] for i in keep),
            y=self.y[keep],
            X=self.X[keep],
            names=self.names,
            splits=tuple(self.splits[i] for i in keep),
        )


def featurize_dataset(
    dataset: Dataset,
    topic_dict: TopicDictionary,
    word_dict: WordCategoryDictionary,
    rules: dict[int, KeyTopicRule],
) -> VectorTable:
    """Segment and vectorize every session of a dataset, in dataset order."""
    layout = layout_for(topic_dict)
    rows = []
    for session in dataset:
        segments = segment_interview(topic_dict, session.transcript)
        rows.append(assemble_vector(session, segments, topic_dict, word_dict, rules, layout))
    return VectorTable(
        session_ids=tuple(s.meta.session_id for s in dataset),
        y=np.array([s.meta.phq8 for s in dataset], dtype=float),
        X=np.vstack(rows) if rows else np.empty((0, layout.total_dim)),
        names=layout.names,
        splits=tuple(s.meta.split for s in dataset),
    )


def save_vectors(table: VectorTable, vectors_path, layout_path=None) -> None:
    """Write one row per session: session_id, phq8, gender, then all values.

    The layout sidecar (JSON) maps value positions to feature names.
    """
    import pandas as pd

    gender_col = table.X[:, 0] if table.X.size else np.empty(0)
    frame = pd.DataFrame(table.X)
    frame.insert(0, "_gender", gender_col)
    frame.insert(0, "_phq8", table.y)
    frame.insert(0, "_sid", table.session_ids)
    frame.to_csv(vectors_path, index=False, header=False)
    if layout_path is not None:
        Path(layout_path).write_text(
            json.dumps({"names": list(table.names)}, indent=2), encoding="utf-8"
        )


def load_vectors(vectors_path, layout_path=None) -> VectorTable:
    import pandas as pd

    frame = pd.read_csv(vectors_path, header=None, dtype={0: str})
    if layout_path is not None:
        names = tuple(json.loads(Path(layout_path).read_text(encoding="utf-8"))["names"])
    else:
        names = tuple(f"f{i:06d}" for i in range(frame.shape[1] - 3))
    return VectorTable(
        session_ids=tuple(frame.iloc[:, 0].astype(str)),
        y=frame.iloc[:, 1].to_numpy(dtype=float),
        X=frame.iloc[:, 3:].to_numpy(dtype=float),
        names=names,
    )


def context_unaware_names() -> tuple[str, ...]:
    names = ["gender"]
    names.extend(f"liwc.c{c:02d}" for c in range(N_CATEGORIES))
    names.extend(f"covarep.ch{ch:02d}.{stat}" for ch in range(COVAREP_CHANNELS) for stat in STATS)
    names.extend(f"formant.ch{ch:02d}.{stat}" for ch in range(FORMANT_CHANNELS) for stat in STATS)
    names.extend(f"au.ch{ch:02d}.{stat}" for ch in range(AU_CHANNELS) for stat in STATS)
    return tuple(names)


def context_unaware_table(dataset: Dataset, word_dict: WordCategoryDictionary) -> VectorTable:
    """Whole-interview variant: one 391-dim row per session, no topic slots.

    Functionals run over every frame of each stream and the word-category
    counts over all participant speech, deliberately discarding context.
    """
    names = context_unaware_names()
    rows = []
    for session in dataset:
        vec = np.full(len(names), MISSING)
        vec[0] = float(session.meta.gender)
        speech = " ".join(
            normalize_sentence(u.text) for u in session.transcript if u.speaker == PARTICIPANT
        )
        pos = 1
        vec[pos:pos + N_CATEGORIES] = liwc_counts(word_dict, speech)
        pos += N_CATEGORIES
        for series, n_ch in (
            (session.covarep, COVAREP_CHANNELS),
            (session.formant, FORMANT_CHANNELS),
            (session.aus, AU_CHANNELS),
        ):
            width = n_ch * len(STATS)
            if len(series) > 0:
                vec[pos:pos + width] = apply_functionals(series.channels, n_ch)
            pos += width
        rows.append(vec)
    return VectorTable(
        session_ids=tuple(s.meta.session_id for s in dataset),
        y=np.array([s.meta.phq8 for s in dataset], dtype=float),
        X=np.vstack(rows) if rows else np.empty((0, len(names))),
        names=names,
        splits=tuple(s.meta.split for s in dataset),
    )
