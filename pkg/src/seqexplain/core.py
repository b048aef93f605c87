"""Shared data model: sequence inputs, model contract, labels, explanations."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

TOKENS = "tokens"
VALUES = "values"


class Label(Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"

    def __str__(self):
        return self.value.capitalize()


@dataclass(frozen=True)
class SequenceInput:
    """A variable-length sequence of homogeneous features.

    Features are either all symbolic tokens (str) or all real values (float).
    Positions are 1-based throughout the library; use :meth:`feature_at`.
    """

    features: tuple
    kind: str

    def __post_init__(self):
        if self.kind not in (TOKENS, VALUES):
            raise ValueError(f"unknown sequence kind: {self.kind!r}")
        want = str if self.kind == TOKENS else float
        if not all(isinstance(f, want) for f in self.features):
            raise TypeError(f"{self.kind} sequence must contain only {want.__name__} features")

    @classmethod
    def of_tokens(cls, tokens) -> "SequenceInput":
        return cls(tuple(str(t) for t in tokens), TOKENS)

    @classmethod
    def of_values(cls, values) -> "SequenceInput":
        return cls(tuple(float(v) for v in values), VALUES)

    def __len__(self):
        return len(self.features)

    def __iter__(self):
        return iter(self.features)

    def feature_at(self, j: int):
        """Feature at 1-based position j."""
        if not 1 <= j <= len(self.features):
            raise IndexError(f"position {j} out of range 1..{len(self.features)}")
        return self.features[j - 1]

    def replace_features(self, features) -> "SequenceInput":
        return SequenceInput(tuple(features), self.kind)

    def __str__(self):
        if self.kind == TOKENS:
            return " ".join(self.features)
        return " ".join(f"{v:g}" for v in self.features)


@dataclass(frozen=True)
class BinaryClassification:
    threshold: float = 0.0


@dataclass(frozen=True)
class Regression:
    pass


class SequenceModel:
    """Black-box model contract: a pure function from a sequence to a real.

    ``predict`` must be deterministic (same input, same output). Implementations
    that are not safe for concurrent calls set ``concurrency_safe = False`` and
    are then only queried from a single dispatch point.
    """

    task = Regression()
    concurrency_safe = True

    def predict(self, seq: SequenceInput) -> float:
        raise NotImplementedError

    def predict_batch(self, seqs) -> np.ndarray:
        return np.array([self.predict(s) for s in seqs], dtype=np.float64)


def label(model: SequenceModel, seq: SequenceInput) -> Label:
    """Classification label of ``seq``; outputs at the threshold map to Positive."""
    task = model.task
    if not isinstance(task, BinaryClassification):
        raise TypeError("label() requires a BinaryClassification model")
    return Label.POSITIVE if model.predict(seq) >= task.threshold else Label.NEGATIVE


def labels_from_outputs(outputs, threshold: float) -> np.ndarray:
    """Vectorized sign rule: True where output >= threshold (Positive)."""
    return np.asarray(outputs, dtype=np.float64) >= threshold


@dataclass(frozen=True)
class Decision:
    """Outcome of applying an explanation to one input."""

    covered: bool
    prediction: Optional[Label] = None
    value: Optional[float] = None  # linear surrogate value, when applicable


@dataclass(frozen=True)
class AnchorExplanation:
    """A predicate conjunction that held on the explained input, with estimates."""

    predicates: tuple
    target_label: Label
    precision_lcb: float
    coverage: float
    low_precision: bool = False  # set when no anchor reached the precision target

    @property
    def size(self) -> int:
        return len(self.predicates)


@dataclass(frozen=True)
class LinearExplanation:
    """A sparse weighted sum of predicate indicators plus an intercept."""

    terms: tuple  # of (predicate, weight) pairs
    intercept: float
    degenerate: bool = False  # set when the sample design had no variation

    def __post_init__(self):
        if not all(np.isfinite(w) for _, w in self.terms) or not np.isfinite(self.intercept):
            raise ValueError("linear explanation weights must be finite")
