"""Access to the example data files shipped with the package."""

from __future__ import annotations

from importlib import resources

from .features import KeyTopicRule, WordCategoryDictionary, load_key_topic_rules, load_word_categories
from .topic import TopicDictionary, load_topic_dictionary


def data_path(name: str):
    """Filesystem path of one shipped data file."""
    return resources.files("topicwise.data") / name


def topic_dictionary() -> TopicDictionary:
    """The 83-topic example dictionary."""
    return load_topic_dictionary(data_path("topics_83.json"))


def word_categories() -> WordCategoryDictionary:
    """The 93-category example word dictionary."""
    return load_word_categories(data_path("word_categories_93.txt"))


def key_topic_rules() -> dict[int, KeyTopicRule]:
    """Example classification rules for the eight key topics."""
    return load_key_topic_rules(data_path("key_topic_rules.json"))
