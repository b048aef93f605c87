import os
import subprocess
import sys

import numpy as np
import pytest

from seqexplain import kernels
from seqexplain.core import SequenceInput
from seqexplain.predicates import (
    TEMPORAL,
    CLASSIC,
    VocabConfig,
    enumerate_vocabulary,
    eval_predicate,
    featurize_batch,
)

needs_ext = pytest.mark.skipif(not kernels.AVAILABLE,
                               reason="compiled kernel not built")


def _random_token_seqs(rng, words, count, max_len=12):
    out = []
    for _ in range(count):
        n = int(rng.integers(0, max_len + 1))
        out.append(SequenceInput.of_tokens(rng.choice(words, n).tolist()))
    return out


def _random_value_seqs(rng, count, max_len=24):
    out = []
    for _ in range(count):
        n = int(rng.integers(0, max_len + 1))
        out.append(SequenceInput.of_values(rng.normal(0, 2, n).tolist()))
    return out


@needs_ext
def test_token_backends_agree():
    rng = np.random.default_rng(17)
    base = SequenceInput.of_tokens("he never fails in any exam .".split())
    for mode in (CLASSIC, TEMPORAL):
        preds = list(enumerate_vocabulary(base, mode).predicates)
        seqs = _random_token_seqs(rng, list(base.features) + ["zzz"], 60)
        py = featurize_batch(seqs, preds, backend="py")
        ext = featurize_batch(seqs, preds, backend="ext")
        assert np.array_equal(py, ext)


@needs_ext
def test_value_backends_agree():
    rng = np.random.default_rng(23)
    base = SequenceInput.of_values(rng.normal(0, 2, 16).round(1).tolist())
    for mode in (CLASSIC, TEMPORAL):
        preds = list(enumerate_vocabulary(
            base, mode, VocabConfig(value_band=1.0)).predicates)
        seqs = _random_value_seqs(rng, 60)
        py = featurize_batch(seqs, preds, backend="py")
        ext = featurize_batch(seqs, preds, backend="ext")
        assert np.array_equal(py, ext)


@needs_ext
def test_ext_backend_matches_pointwise_eval():
    rng = np.random.default_rng(29)
    base = SequenceInput.of_tokens("a b a c".split())
    preds = list(enumerate_vocabulary(base).predicates)
    seqs = _random_token_seqs(rng, ["a", "b", "c", "d"], 30, max_len=6)
    got = featurize_batch(seqs, preds, backend="ext")
    for i, s in enumerate(seqs):
        for j, p in enumerate(preds):
            assert bool(got[i, j]) == eval_predicate(p, s)


def test_fallback_never_imports_ext():
    code = (
        "import seqexplain.kernels as k\n"
        "assert not k.AVAILABLE and k.BACKEND == 'fallback', k.BACKEND\n"
    )
    env = dict(os.environ, SEQEXPLAIN_NO_EXT="1")
    subprocess.run([sys.executable, "-c", code], check=True, env=env)


def test_default_backend_reports_choice():
    assert kernels.BACKEND in ("compiled", "fallback")
    assert kernels.AVAILABLE == (kernels.BACKEND == "compiled")


def test_unknown_backend_rejected():
    seq = SequenceInput.of_tokens(["a"])
    preds = list(enumerate_vocabulary(seq, CLASSIC).predicates)
    with pytest.raises(ValueError):
        featurize_batch([seq], preds, backend="gpu")


def test_empty_batch_has_zero_rows():
    seq = SequenceInput.of_tokens(["a", "b"])
    preds = list(enumerate_vocabulary(seq).predicates)
    out = featurize_batch([], preds)
    assert out.shape == (0, len(preds))
