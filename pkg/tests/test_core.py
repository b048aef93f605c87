import numpy as np
import pytest

from seqexplain.core import (
    AnchorExplanation,
    BinaryClassification,
    Label,
    LinearExplanation,
    Regression,
    SequenceInput,
    SequenceModel,
    TOKENS,
    VALUES,
    label,
    labels_from_outputs,
)


class ConstantModel(SequenceModel):
    task = BinaryClassification(0.0)

    def __init__(self, value):
        self.value = value

    def predict(self, seq):
        return self.value


def test_token_input_basics():
    s = SequenceInput.of_tokens(["a", "b", "c"])
    assert s.kind == TOKENS
    assert len(s) == 3
    assert s.feature_at(1) == "a"
    assert s.feature_at(3) == "c"
    assert list(s) == ["a", "b", "c"]


def test_value_input_coerces_to_float():
    s = SequenceInput.of_values([1, 2.5, -3])
    assert s.kind == VALUES
    assert s.features == (1.0, 2.5, -3.0)
    assert all(isinstance(v, float) for v in s.features)


def test_empty_input_is_allowed():
    assert len(SequenceInput.of_tokens([])) == 0
    assert len(SequenceInput.of_values([])) == 0


def test_mixed_features_rejected():
    with pytest.raises(TypeError):
        SequenceInput(features=("a", 1.0), kind=TOKENS)
    with pytest.raises(TypeError):
        SequenceInput(features=(1.0, "a"), kind=VALUES)


def test_feature_at_is_one_based():
    s = SequenceInput.of_tokens(["x", "y"])
    with pytest.raises(IndexError):
        s.feature_at(0)
    with pytest.raises(IndexError):
        s.feature_at(3)


def test_replace_features_keeps_kind():
    s = SequenceInput.of_tokens(["a", "b"])
    t = s.replace_features(["c"])
    assert t.kind == TOKENS
    assert t.features == ("c",)
    assert s.features == ("a", "b")


def test_label_threshold_rule():
    m = ConstantModel(0.0)
    s = SequenceInput.of_tokens(["x"])
    # value at the threshold counts as positive
    assert label(m, s) is Label.POSITIVE
    assert label(ConstantModel(-1e-9), s) is Label.NEGATIVE
    assert label(ConstantModel(5.0), s) is Label.POSITIVE


def test_label_requires_classification_task():
    m = ConstantModel(1.0)
    m.task = Regression()
    with pytest.raises(TypeError):
        label(m, SequenceInput.of_tokens(["x"]))


def test_labels_from_outputs_vectorized():
    got = labels_from_outputs([-1.0, 0.0, 0.5], threshold=0.0)
    assert got.tolist() == [False, True, True]
    got = labels_from_outputs(np.array([0.4, 0.6]), threshold=0.5)
    assert got.tolist() == [False, True]


def test_predict_batch_default_loops():
    m = ConstantModel(2.0)
    seqs = [SequenceInput.of_tokens(["a"]), SequenceInput.of_tokens(["b"])]
    got = m.predict_batch(seqs)
    assert isinstance(got, np.ndarray)
    assert got.tolist() == [2.0, 2.0]


def test_label_str_rendering():
    assert str(Label.POSITIVE) == "Positive"
    assert str(Label.NEGATIVE) == "Negative"
    assert Label.POSITIVE.value == "positive"


def test_anchor_explanation_size():
    e = AnchorExplanation(predicates=(), target_label=Label.POSITIVE,
                          precision_lcb=1.0, coverage=1.0)
    assert e.size == 0
    assert not e.low_precision


def test_linear_explanation_rejects_nonfinite():
    with pytest.raises(ValueError):
        LinearExplanation(terms=(), intercept=float("nan"))
    with pytest.raises(ValueError):
        LinearExplanation(terms=((object(), float("inf")),), intercept=0.0)
