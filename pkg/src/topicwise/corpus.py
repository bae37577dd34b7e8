"""Session data model and ingestion.

A dataset is a manifest-ordered list of sessions; each session bundles its
metadata, the parsed interview transcript, and three time-stamped frame
feature streams (voice descriptors, formants, facial action units). All
loaders are pure functions over file contents, and a loaded dataset is
immutable and safe to share across workers.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import (
    BadTimestamp,
    ColumnCountMismatch,
    EmptyDataset,
    FileNotFound,
    InvalidWindow,
    MalformedRow,
    ManifestError,
    MissingColumn,
    NonMonotonicTimestamps,
    NonNumericCell,
    UnknownSpeaker,
)
from .text import normalize_sentence

INTERVIEWER = "interviewer"
PARTICIPANT = "participant"

SPLITS = ("train", "dev", "test")

# frame stream kinds and their fixed channel counts
KIND_COVAREP = "covarep"
KIND_FORMANT = "formant"
KIND_AU = "au"
CHANNELS = {KIND_COVAREP: 74, KIND_FORMANT: 5, KIND_AU: 20}

# implicit clock for headerless voice streams: one frame every 10 ms
FRAME_RATE_HZ = 100.0

_SPEAKER_MAP = {
    "ellie": INTERVIEWER,
    "interviewer": INTERVIEWER,
    "participant": PARTICIPANT,
}

_NAN_LIKE = {"nan", "+nan", "-nan", "inf", "+inf", "-inf", "infinity", "-infinity", ""}


@dataclass(frozen=True)
class SessionMeta:
    session_id: str
    gender: int
    phq8: int
    split: str

    def __post_init__(self):
        if self.gender not in (0, 1):
            raise ValueError(f"gender must be 0 or 1, got {self.gender!r}")
        if not (0 <= int(self.phq8) <= 24):
            raise ValueError(f"phq8 must lie in [0, 24], got {self.phq8!r}")
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {self.split!r}")


@dataclass(frozen=True)
class Utterance:
    start: float
    stop: float
    speaker: str
    text: str


@dataclass(frozen=True)
class FrameSeries:
    """Timestamped frame matrix; rows align with ``timestamps``."""

    timestamps: np.ndarray
    channels: np.ndarray
    channel_names: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.timestamps)


@dataclass(frozen=True)
class Session:
    meta: SessionMeta
    transcript: tuple[Utterance, ...]
    covarep: FrameSeries
    formant: FrameSeries
    aus: FrameSeries


@dataclass(frozen=True)
class Dataset:
    sessions: tuple[Session, ...]

    def __len__(self) -> int:
        return len(self.sessions)

    def __iter__(self):
        return iter(self.sessions)

    def subset(self, splits) -> "Dataset":
        wanted = {splits} if isinstance(splits, str) else set(splits)
        return Dataset(tuple(s for s in self.sessions if s.meta.split in wanted))


def parse_transcript(raw: str) -> list[Utterance]:
    """Parse a delimited transcript into utterances, in file order.

    The header must name start/stop/speaker/value columns; the delimiter is
    auto-detected from it (tab preferred, comma fallback). Rows whose text is
    empty after normalization are dropped.
    """
    lines = [ln for ln in raw.splitlines() if ln.strip()]
    if not lines:
        raise MissingColumn("start_time")
    header_line = lines[0]
    delim = "\t" if "\t" in header_line else ","
    rows = list(csv.reader(io.StringIO("\n".join(lines)), delimiter=delim))
    header = [h.strip().lower() for h in rows[0]]

    def col(*names):
        for name in names:
            if name in header:
                return header.index(name)
        raise MissingColumn(names[0])

    i_start = col("start_time", "start")
    i_stop = col("stop_time", "stop", "end_time")
    i_speaker = col("speaker")
    i_value = col("value", "text")
    needed = max(i_start, i_stop, i_speaker, i_value) + 1

    utterances = []
    for row_no, row in enumerate(rows[1:], start=1):
        if len(row) < needed:
            raise MalformedRow(row_no, f"expected at least {needed} fields, got {len(row)}")
        try:
            start = float(row[i_start])
            stop = float(row[i_stop])
        except ValueError:
            raise BadTimestamp(row_no, "unparseable time") from None
        if not (math.isfinite(start) and math.isfinite(stop)) or stop < start:
            raise BadTimestamp(row_no, f"start={row[i_start]} stop={row[i_stop]}")
        label = row[i_speaker].strip()
        speaker = _SPEAKER_MAP.get(label.lower())
        if speaker is None:
            raise UnknownSpeaker(row_no, label)
        text = row[i_value].strip()
        if not normalize_sentence(text):
            continue
        utterances.append(Utterance(start=start, stop=stop, speaker=speaker, text=text))
    return utterances


def serialize_transcript(utterances, delimiter: str = "\t") -> str:
    """Inverse of :func:`parse_transcript` (re-parsing yields equal utterances)."""
    out = [delimiter.join(("start_time", "stop_time", "speaker", "value"))]
    names = {INTERVIEWER: "Ellie", PARTICIPANT: "Participant"}
    for u in utterances:
        out.append(delimiter.join((repr(u.start), repr(u.stop), names[u.speaker], u.text)))
    return "\n".join(out) + "\n"


def _read_numeric_table(raw: str, header) -> pd.DataFrame:
    if not raw.strip():
        return pd.DataFrame()
    first = raw.splitlines()[0]
    sep = "," if "," in first else r"\s+"
    return pd.read_csv(io.StringIO(raw), header=header, sep=sep)


def _coerce_numeric(df: pd.DataFrame) -> np.ndarray:
    """Convert to float, keeping NaN/inf, and point at the first junk cell."""
    for ci, col in enumerate(df.columns):
        if df[col].dtype == object:
            for ri, value in enumerate(df[col]):
                if isinstance(value, str):
                    if value.strip().lower() in _NAN_LIKE:
                        continue
                    try:
                        float(value)
                    except ValueError:
                        raise NonNumericCell(ri, ci, value) from None
    return df.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=float)


def load_frame_series(raw: str, kind: str) -> FrameSeries:
    """Load one frame stream from delimited numeric text.

    COVAREP and formant files are headerless with an implicit 100 Hz clock
    (timestamps synthesized as frame index / 100). Action-unit files carry a
    header with a timestamp column plus exactly 20 AU-named columns.
    Non-finite cells are kept; the feature layer excludes them per channel.
    """
    if kind not in CHANNELS:
        raise ValueError(f"unknown frame kind {kind!r}")
    expected = CHANNELS[kind]

    if kind == KIND_AU:
        df = _read_numeric_table(raw, header=0)
        if df.empty and len(df.columns) == 0:
            return FrameSeries(
                timestamps=np.empty(0),
                channels=np.empty((0, expected)),
                channel_names=tuple(f"au{i:02d}" for i in range(expected)),
            )
        names = [str(c).strip() for c in df.columns]
        lowered = [n.lower() for n in names]
        if "timestamp" in lowered:
            t_col = lowered.index("timestamp")
        elif "time" in lowered:
            t_col = lowered.index("time")
        else:
            raise MissingColumn("timestamp")
        au_cols = [i for i, n in enumerate(lowered) if n.startswith("au")]
        if len(au_cols) != expected:
            raise ColumnCountMismatch(expected, len(au_cols))
        values = _coerce_numeric(df)
        timestamps = values[:, t_col]
        if not np.all(np.isfinite(timestamps)):
            raise NonMonotonicTimestamps("non-finite timestamps")
        if len(timestamps) > 1 and not np.all(np.diff(timestamps) > 0):
            raise NonMonotonicTimestamps("timestamps must be strictly increasing")
        return FrameSeries(
            timestamps=timestamps,
            channels=values[:, au_cols],
            channel_names=tuple(names[i] for i in au_cols),
        )

    df = _read_numeric_table(raw, header=None)
    names = tuple(f"ch{i:02d}" for i in range(expected))
    if df.empty and len(df.columns) == 0:
        return FrameSeries(np.empty(0), np.empty((0, expected)), names)
    if len(df.columns) != expected:
        raise ColumnCountMismatch(expected, len(df.columns))
    values = _coerce_numeric(df)
    timestamps = np.arange(len(values)) / FRAME_RATE_HZ
    return FrameSeries(timestamps=timestamps, channels=values, channel_names=names)


def slice_frames(series: FrameSeries, t0: float, t1: float) -> FrameSeries:
    """Frames with ``t0 <= timestamp < t1``; the input is left untouched."""
    if t0 > t1:
        raise InvalidWindow(f"t0={t0} > t1={t1}")
    lo = int(np.searchsorted(series.timestamps, t0, side="left"))
    hi = int(np.searchsorted(series.timestamps, t1, side="left"))
    return FrameSeries(
        timestamps=series.timestamps[lo:hi],
        channels=series.channels[lo:hi],
        channel_names=series.channel_names,
    )


def _require(entry: dict, key: str):
    if key not in entry:
        raise ManifestError(f"manifest session entry missing field {key!r}")
    return entry[key]


def load_dataset(manifest_path) -> Dataset:
    """Load every session named by a manifest; order follows the manifest.

    Relative paths resolve against the manifest's directory. Any per-session
    parse error is re-raised tagged with the offending session id.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise FileNotFound(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ManifestError(f"manifest is not valid JSON: {e}") from e
    entries = manifest.get("sessions")
    if not isinstance(entries, list):
        raise ManifestError("manifest must contain a 'sessions' array")

    root = manifest_path.parent
    sessions = []
    seen = set()
    for entry in entries:
        sid = str(_require(entry, "id"))
        if sid in seen:
            raise ManifestError(f"duplicate session id {sid!r}")
        seen.add(sid)
        try:
            meta = SessionMeta(
                session_id=sid,
                gender=int(_require(entry, "gender")),
                phq8=int(_require(entry, "phq8")),
                split=str(_require(entry, "split")),
            )
        except (TypeError, ValueError) as e:
            raise ManifestError(f"session {sid}: {e}") from e

        def read(key, sid=sid):
            path = root / str(_require(entry, key))
            if not path.exists():
                raise FileNotFound(path, session_id=sid)
            return path.read_text(encoding="utf-8")

        try:
            transcript = tuple(parse_transcript(read("transcript_path")))
            covarep = load_frame_series(read("covarep_path"), KIND_COVAREP)
            formant = load_frame_series(read("formant_path"), KIND_FORMANT)
            aus = load_frame_series(read("au_path"), KIND_AU)
        except FileNotFound:
            raise
        except (MissingColumn, BadTimestamp, UnknownSpeaker, MalformedRow,
                ColumnCountMismatch, NonMonotonicTimestamps, NonNumericCell) as e:
            e.args = (f"session {sid}: {e}",)
            e.session_id = sid
            raise
        sessions.append(Session(meta, transcript, covarep, formant, aus))
    return Dataset(tuple(sessions))


def require_sessions(dataset: Dataset) -> Dataset:
    if len(dataset) == 0:
        raise EmptyDataset("dataset has no sessions")
    return dataset
