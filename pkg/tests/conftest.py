import numpy as np
import pytest

from topicwise import defaults
from topicwise.corpus import (
    FrameSeries,
    INTERVIEWER,
    PARTICIPANT,
    Session,
    SessionMeta,
    Utterance,
)


@pytest.fixture(scope="session")
def topic_dict():
    return defaults.topic_dictionary()


@pytest.fixture(scope="session")
def word_dict():
    return defaults.word_categories()


@pytest.fixture(scope="session")
def rules():
    return defaults.key_topic_rules()


def frame_series(n_channels, values, rate=100.0):
    """Constant-free helper: ``values`` is (n_frames, n_channels)."""
    values = np.asarray(values, dtype=float).reshape(-1, n_channels)
    return FrameSeries(
        timestamps=np.arange(len(values)) / rate,
        channels=values,
        channel_names=tuple(f"ch{i:02d}" for i in range(n_channels)),
    )


def utt(start, stop, speaker, text):
    return Utterance(start=start, stop=stop, speaker=speaker, text=text)


def make_session(transcript, covarep=None, formant=None, aus=None,
                 session_id="S000", gender=1, phq8=7, split="train"):
    empty = {
        "covarep": frame_series(74, np.empty((0, 74))),
        "formant": frame_series(5, np.empty((0, 5))),
        "au": frame_series(20, np.empty((0, 20)), rate=30.0),
    }
    return Session(
        meta=SessionMeta(session_id=session_id, gender=gender, phq8=phq8, split=split),
        transcript=tuple(transcript),
        covarep=covarep if covarep is not None else empty["covarep"],
        formant=formant if formant is not None else empty["formant"],
        aus=aus if aus is not None else empty["au"],
    )


__all__ = ["frame_series", "utt", "make_session", "INTERVIEWER", "PARTICIPANT"]
