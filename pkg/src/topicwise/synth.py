"""Deterministic synthetic corpora with planted, recoverable signal.

Real interview corpora with clinical labels are access-restricted, so this
module manufactures desk-scale stand-ins: transcripts whose interviewer
turns are drawn (and optionally fuzzed) from the topic dictionary, and frame
streams synthesized backwards from target functionals. Planted channels are
held constant inside their topic window, which makes the whole pipeline's
output exactly predictable; everything else is per-session noise. Labels are
linear in the planted feature values plus noise, clipped to the score range.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .corpus import Dataset, load_dataset, serialize_transcript, Utterance, INTERVIEWER, PARTICIPANT
from .errors import InvalidSpec
from .features import (
    FeatureLayout,
    KeyTopicRule,
    STATS,
    WordCategoryDictionary,
    layout_for,
)
from .select import SelectionReport
from .topic import TopicDictionary, match_topic
from .util import derive_seed
from . import defaults

FRAME_KINDS = ("covarep", "formant", "au")
_CHANNEL_LIMIT = {"covarep": 74, "formant": 5, "au": 20}

# neutral tokens that map to nothing in the default word dictionary
FILLERS = ("um", "uh", "mm", "anyway", "basically", "actually", "stuff", "whatnot")

# mapped tokens sprinkled into unplanted topics for texture; none of these may
# touch a category used by a planted word-count feature
FLAVOR = ("happy", "family", "friend", "work", "money", "house", "today", "game")

_GREETING = "hi i'm ellie thanks for coming in today"
_BACKCHANNEL = "that's good"
_PRE_TOPIC_SPEECH = "um okay yeah"


@dataclass(frozen=True)
class PlantedFeature:
    """One informative slot: where the signal lives and how it enters the label."""

    kind: str                 # covarep | formant | au | liwc | key
    topic: int | None         # None = whole-interview channel signal (frame kinds)
    channel: int | None = None  # frame channel, or word-category index for liwc
    stat: str = "mean"
    weight: float = 1.0


def _default_planted() -> tuple[PlantedFeature, ...]:
    return (
        PlantedFeature("covarep", topic=4, channel=10, weight=3.0),
        PlantedFeature("covarep", topic=9, channel=33, weight=-3.0),
        PlantedFeature("covarep", topic=77, channel=55, weight=3.0),
        PlantedFeature("formant", topic=76, channel=2, weight=-3.0),
        PlantedFeature("au", topic=78, channel=7, weight=3.0),
        PlantedFeature("au", topic=80, channel=12, weight=-3.0),
        PlantedFeature("liwc", topic=79, channel=None, stat="sadness", weight=3.0),
        PlantedFeature("liwc", topic=21, channel=None, stat="achievement", weight=-3.0),
    )


@dataclass(frozen=True)
class SynthSpec:
    sessions: int = 150
    seed: int = 0
    common_topics: tuple = (2, 4, 9, 21, 31, 66, 76, 77, 78, 79, 80, 81, 82, 83)
    common_presence: float = 0.9
    rare_presence: float = 0.12
    planted: tuple = field(default_factory=_default_planted)
    label_noise_sd: float = 0.8
    frame_noise_sd: float = 0.5
    intercept: float = 9.0
    trigger_fuzz: float = 0.3
    tokens_per_topic: int = 24
    split_fractions: tuple = (0.7, 0.15, 0.15)


@dataclass(frozen=True)
class PlantedTruth:
    indices: tuple            # layout index per planted feature (None = global)
    names: tuple
    weights: tuple
    session_ids: tuple
    values: np.ndarray        # sessions x planted, -1 where the topic was absent
    labels: np.ndarray


def _liwc_category_index(word_dict: WordCategoryDictionary, name: str) -> int:
    try:
        return word_dict.category_names.index(name)
    except ValueError:
        raise InvalidSpec(f"unknown word category {name!r}") from None


def _single_category_token(word_dict: WordCategoryDictionary, cat: int) -> str:
    for token, cats in word_dict.exact.items():
        if cats == (cat,):
            return token
    raise InvalidSpec(
        f"no dictionary token maps solely to category {word_dict.category_names[cat]!r}; "
        "planting a word-count feature needs one"
    )


def _resolve_index(f: PlantedFeature, layout: FeatureLayout,
                   word_dict: WordCategoryDictionary) -> int | None:
    if f.topic is None:
        return None
    if f.kind == "liwc":
        cat = _liwc_category_index(word_dict, f.stat) if f.channel is None else f.channel
        return layout.liwc_slice(f.topic).start + cat
    if f.kind == "key":
        return layout.key_index(f.topic)
    block = {
        "covarep": layout.covarep_slice,
        "formant": layout.formant_slice,
        "au": layout.au_slice,
    }[f.kind](f.topic)
    return block.start + f.channel * len(STATS) + STATS.index(f.stat)


def _validate(spec: SynthSpec, topic_dict: TopicDictionary,
              rules: dict[int, KeyTopicRule]) -> None:
    if spec.sessions < 1:
        raise InvalidSpec("need at least one session")
    if not spec.planted:
        raise InvalidSpec("need at least one planted feature")
    for p in (spec.common_presence, spec.rare_presence):
        if not 0.0 <= p <= 1.0:
            raise InvalidSpec(f"presence probability {p} outside [0, 1]")
    n_topics = len(topic_dict)
    for f in spec.planted:
        if f.kind not in FRAME_KINDS + ("liwc", "key"):
            raise InvalidSpec(f"unknown planted kind {f.kind!r}")
        if f.topic is None and f.kind not in FRAME_KINDS:
            raise InvalidSpec("global planting is only defined for frame channels")
        if f.topic is not None and not 1 <= f.topic <= n_topics:
            raise InvalidSpec(f"planted topic {f.topic} not in the dictionary")
        if f.kind in FRAME_KINDS:
            if f.channel is None or not 0 <= f.channel < _CHANNEL_LIMIT[f.kind]:
                raise InvalidSpec(f"bad channel {f.channel!r} for kind {f.kind!r}")
            if f.stat not in STATS:
                raise InvalidSpec(f"bad stat {f.stat!r}")
        if f.kind == "key" and f.topic not in rules:
            raise InvalidSpec(f"planted key topic {f.topic} has no rule")


def _fuzz_trigger(rng, dictionary: TopicDictionary, topic: int, sentence: str) -> str:
    letters = "abcdefghijklmnopqrstuvwxyz"
    fuzzed = list(sentence)
    for _ in range(int(rng.integers(1, 4))):
        op = rng.integers(0, 3)
        pos = int(rng.integers(0, len(fuzzed)))
        if op == 0:
            fuzzed.insert(pos, letters[rng.integers(0, 26)])
        elif op == 1 and len(fuzzed) > 1:
            del fuzzed[pos]
        else:
            fuzzed[pos] = letters[rng.integers(0, 26)]
    candidate = "".join(fuzzed)
    if match_topic(dictionary, candidate) == topic:
        return candidate
    return sentence


def _topic_text(rng, spec, topic, planted_by_topic, word_dict, rules):
    """Participant reply for one topic; returns (text, realized liwc/key values)."""
    n_tokens = spec.tokens_per_topic
    realized = {}
    lead: list[str] = []
    tokens: list[str] = []
    for pos, f in planted_by_topic.get(topic, ()):
        if f.kind == "liwc":
            cat = _liwc_category_index(word_dict, f.stat) if f.channel is None else f.channel
            word = _single_category_token(word_dict, cat)
            count = int(rng.integers(0, n_tokens + 1))
            tokens.extend([word] * count)
            realized[pos] = count / n_tokens
        elif f.kind == "key":
            rule = rules[topic]
            code = int(rng.integers(0, len(rule.categories)))
            lead.extend(rule.categories[code][1][0].split())
            realized[pos] = float(code)
    while len(lead) + len(tokens) < n_tokens:
        pool = FILLERS if rng.random() < 0.75 else FLAVOR
        tokens.append(pool[rng.integers(0, len(pool))])
    order = rng.permutation(len(tokens))
    return " ".join(lead + [tokens[i] for i in order]), realized


def _write_frames(path, matrix, header=None, timestamps=None):
    # round to 6 decimals so the default (fast) csv writer emits short cells;
    # planted values are already on that grid, so they survive bit-exactly
    df = pd.DataFrame(np.round(matrix, 6))
    if header is not None:
        df.insert(0, "timestamp", timestamps)
        df.columns = ["timestamp"] + list(header)
        df.to_csv(path, index=False, na_rep="nan")
    else:
        df.to_csv(path, index=False, header=False, na_rep="nan")


def generate_corpus(spec: SynthSpec, out_dir,
                    topic_dict: TopicDictionary | None = None,
                    word_dict: WordCategoryDictionary | None = None,
                    rules: dict[int, KeyTopicRule] | None = None):
    """Write a full synthetic corpus under ``out_dir`` and load it back.

    Returns ``(dataset, truth)``. Output is a pure function of the spec: the
    same spec written twice produces byte-identical trees.
    """
    topic_dict = topic_dict or defaults.topic_dictionary()
    word_dict = word_dict or defaults.word_categories()
    rules = rules if rules is not None else defaults.key_topic_rules()
    _validate(spec, topic_dict, rules)
    layout = layout_for(topic_dict)
    planted = list(spec.planted)
    indices = [_resolve_index(f, layout, word_dict) for f in planted]
    planted_by_topic: dict[int, list] = {}
    for pos, f in enumerate(planted):
        if f.topic is not None and f.kind in ("liwc", "key"):
            planted_by_topic.setdefault(f.topic, []).append((pos, f))

    out = Path(out_dir)
    for sub in ("transcripts", "covarep", "formant", "au"):
        (out / sub).mkdir(parents=True, exist_ok=True)

    n = spec.sessions
    n_train = int(round(spec.split_fractions[0] * n))
    n_dev = int(round(spec.split_fractions[1] * n))
    splits = ["train"] * n_train + ["dev"] * n_dev + ["test"] * (n - n_train - n_dev)

    presence_p = {
        e.index: spec.common_presence if e.index in spec.common_topics else spec.rare_presence
        for e in topic_dict.entries
    }

    manifest_sessions = []
    values = np.full((n, len(planted)), -1.0)
    labels = np.zeros(n, dtype=int)
    session_ids = []
    au_names = [f"AU{i:02d}_r" for i in range(1, 21)]

    for s in range(n):
        sid = f"S{s:03d}"
        session_ids.append(sid)
        rng = np.random.default_rng(derive_seed(spec.seed, "session", sid))
        gender = int(rng.integers(0, 2))
        present = [t for t in presence_p if rng.random() < presence_p[t]]
        order = [present[i] for i in rng.permutation(len(present))]

        utterances = [Utterance(0.0, 1.0, INTERVIEWER, _GREETING),
                      Utterance(1.2, 1.9, PARTICIPANT, _PRE_TOPIC_SPEECH)]
        t = 2.0
        topic_windows: list[tuple[int, float]] = []  # (topic, window start)
        for topic in order:
            trigger = topic_dict.entry(topic).trigger_sentences[0]
            if rng.random() < spec.trigger_fuzz:
                trigger = _fuzz_trigger(rng, topic_dict, topic, trigger)
            text, realized = _topic_text(rng, spec, topic, planted_by_topic, word_dict, rules)
            for pos, value in realized.items():
                values[s, pos] = value
            utterances.append(Utterance(t, t + 0.3, INTERVIEWER, trigger))
            utterances.append(Utterance(t + 0.4, t + 0.9, PARTICIPANT, text))
            topic_windows.append((topic, t))
            t += 1.0
            if rng.random() < 0.15:
                utterances.append(Utterance(t, t + 0.5, INTERVIEWER, _BACKCHANNEL))
                t += 1.0
        t_end = utterances[-1].stop
        # window i runs from its trigger to the next trigger (last one to the end)
        window_of = {}
        for i, (topic, start) in enumerate(topic_windows):
            stop = topic_windows[i + 1][1] if i + 1 < len(topic_windows) else t_end
            window_of[topic] = (start, stop)

        n_fast = int(round(t_end * 100))
        ts_fast = np.arange(n_fast) / 100.0
        n_slow = int(round(t_end * 30))
        ts_slow = np.arange(n_slow) / 30.0

        streams = {}
        for kind, n_ch, ts in (("covarep", 74, ts_fast), ("formant", 5, ts_fast),
                               ("au", 20, ts_slow)):
            offsets = rng.normal(0.0, 1.0, n_ch)
            noise = offsets + rng.normal(0.0, spec.frame_noise_sd, (len(ts), n_ch))
            if kind == "covarep":
                noise[rng.random(noise.shape) < 0.02] = np.nan
            streams[kind] = (ts, noise)

        for pos, f in enumerate(planted):
            if f.kind not in FRAME_KINDS:
                continue
            ts, matrix = streams[f.kind]
            if f.topic is None:
                value = round(float(rng.uniform(0.0, 1.0)), 6)
                matrix[:, f.channel] = value
                values[s, pos] = value
            elif f.topic in window_of:
                value = round(float(rng.uniform(0.0, 1.0)), 6)
                w0, w1 = window_of[f.topic]
                lo = int(np.searchsorted(ts, w0, side="left"))
                hi = int(np.searchsorted(ts, w1, side="left"))
                matrix[lo:hi, f.channel] = value
                values[s, pos] = value

        y_raw = spec.intercept + float(np.dot([f.weight for f in planted], values[s]))
        y_raw += float(rng.normal(0.0, spec.label_noise_sd))
        labels[s] = int(np.clip(np.round(y_raw), 0, 24))

        (out / "transcripts" / f"{sid}.tsv").write_text(
            serialize_transcript(utterances), encoding="utf-8")
        _write_frames(out / "covarep" / f"{sid}.csv", streams["covarep"][1])
        _write_frames(out / "formant" / f"{sid}.csv", streams["formant"][1])
        _write_frames(out / "au" / f"{sid}.csv", streams["au"][1],
                      header=au_names, timestamps=streams["au"][0])

        manifest_sessions.append({
            "id": sid,
            "transcript_path": f"transcripts/{sid}.tsv",
            "covarep_path": f"covarep/{sid}.csv",
            "formant_path": f"formant/{sid}.csv",
            "au_path": f"au/{sid}.csv",
            "gender": gender,
            "phq8": int(labels[s]),
            "split": splits[s],
        })

    (out / "manifest.json").write_text(
        json.dumps({"sessions": manifest_sessions}, indent=2, sort_keys=True),
        encoding="utf-8")

    truth = PlantedTruth(
        indices=tuple(indices),
        names=tuple(layout.name_of(i) if i is not None else None for i in indices),
        weights=tuple(f.weight for f in planted),
        session_ids=tuple(session_ids),
        values=values,
        labels=labels.astype(float),
    )
    (out / "planted_truth.json").write_text(_truth_json(truth), encoding="utf-8")
    return load_dataset(out / "manifest.json"), truth


def _truth_json(truth: PlantedTruth) -> str:
    payload = {
        "indices": [None if i is None else int(i) for i in truth.indices],
        "names": list(truth.names),
        "weights": list(truth.weights),
        "sessions": [
            {"id": sid, "phq8": float(truth.labels[i]), "values": truth.values[i].tolist()}
            for i, sid in enumerate(truth.session_ids)
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def load_planted_truth(path) -> PlantedTruth:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    sessions = payload["sessions"]
    return PlantedTruth(
        indices=tuple(payload["indices"]),
        names=tuple(payload["names"]),
        weights=tuple(payload["weights"]),
        session_ids=tuple(s["id"] for s in sessions),
        values=np.array([s["values"] for s in sessions], dtype=float),
        labels=np.array([s["phq8"] for s in sessions], dtype=float),
    )


def verify_recovery(truth: PlantedTruth, report: SelectionReport) -> float:
    """Fraction of slot-addressable planted features in the selected set."""
    planted = [i for i in truth.indices if i is not None]
    if not planted:
        return 0.0
    selected = set(report.selected)
    return sum(1 for i in planted if i in selected) / len(planted)
