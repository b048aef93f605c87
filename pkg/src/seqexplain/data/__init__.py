"""Bundled fixtures: a substitution lexicon, a 20-sentence sentiment set,
and spike-drop value series."""

from importlib import resources

from ..perturb import load_lexicon


def fixture_path(name: str):
    """Filesystem path of a bundled data file."""
    return resources.files(__package__) / name


def default_lexicon() -> dict:
    """The bundled substitution lexicon.

    Sentiment words map to one same-polarity and one opposite-polarity
    alternative, so substitution is label-balanced; negators map to
    non-negators; common neutral words map to neutral alternatives.
    """
    return load_lexicon(fixture_path("lexicon.txt"))
