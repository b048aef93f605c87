"""Sparse locality-weighted linear surrogates over predicate features.

Samples perturbed inputs, featurizes them against the vocabulary, weights
each sample by a kernel on the normalized Hamming distance between its
predicate bit-vector and the input's, then fits a ridge regression (closed
form, unpenalized intercept) restricted to at most K greedily chosen
predicates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    Decision,
    Label,
    LinearExplanation,
    Regression,
    SequenceInput,
    TOKENS,
)
from .perturb import PerturbationSpec, sample
from .predicates import (
    eval_predicate,
    featurize,
    featurize_batch,
    predicate_from_json,
    predicate_to_json,
)

TEXT_THRESHOLD = 0.1
SERIES_THRESHOLD = 0.05


def default_threshold(seq: SequenceInput) -> float:
    return TEXT_THRESHOLD if seq.kind == TOKENS else SERIES_THRESHOLD


@dataclass(frozen=True)
class LimeConfig:
    kernel_width: Optional[float] = None  # None -> 0.75 * sqrt(|vocab|)
    ridge: float = 1.0
    sparsity: int = 6
    coverage_threshold: Optional[float] = None  # None -> 0.1 tokens / 0.05 values

    def __post_init__(self):
        if self.kernel_width is not None and self.kernel_width <= 0:
            raise ValueError("kernel_width must be > 0")
        if self.ridge < 0:
            raise ValueError("ridge must be >= 0")
        if self.sparsity < 1:
            raise ValueError("sparsity must be >= 1")

    def width_for(self, n_predicates: int) -> float:
        if self.kernel_width is not None:
            return self.kernel_width
        return 0.75 * math.sqrt(max(n_predicates, 1))

    def threshold_for(self, seq: SequenceInput) -> float:
        if self.coverage_threshold is not None:
            return self.coverage_threshold
        return default_threshold(seq)


def kernel_weights(X: np.ndarray, x0: np.ndarray, width: float) -> np.ndarray:
    """exp(-d^2 / width^2) with d the per-sample normalized Hamming distance."""
    dist = np.mean(X != x0[None, :], axis=1)
    return np.exp(-(dist ** 2) / width ** 2)


def _ridge_subset(G, b, yty, sel, lam):
    """Weighted ridge solve on the selected columns of the centered design.

    G = Xc' W Xc, b = Xc' W yc, yty = yc' W yc; returns (beta, weighted RSS).
    """
    idx = np.asarray(sel, dtype=int)
    Gs = G[np.ix_(idx, idx)] + lam * np.eye(len(idx))
    bs = b[idx]
    try:
        beta = np.linalg.solve(Gs, bs)
    except np.linalg.LinAlgError:
        beta = np.linalg.lstsq(Gs, bs, rcond=None)[0]
    rss = float(yty - 2.0 * beta @ bs + beta @ (G[np.ix_(idx, idx)] @ beta))
    return beta, rss


def forward_select(G, b, yty, k, lam, min_gain: float = 1e-10):
    """Greedy subset of at most k columns minimizing the weighted ridge RSS."""
    m = G.shape[0]
    usable = [j for j in range(m) if G[j, j] > 1e-12]
    sel: list = []
    rss = float(yty)
    while usable and len(sel) < k:
        best_j, best_rss = None, rss
        for j in usable:
            _, cand = _ridge_subset(G, b, yty, sel + [j], lam)
            if cand < best_rss - min_gain:
                best_j, best_rss = j, cand
        if best_j is None:
            break
        sel.append(best_j)
        usable.remove(best_j)
        rss = best_rss
    return sel


def explain_lime(model, seq: SequenceInput, vocab, spec: PerturbationSpec,
                 config: LimeConfig = LimeConfig(), rng=None) -> LinearExplanation:
    """Fit the sparse surrogate around ``seq`` and return it.

    The regression target is the raw model output for regression tasks and
    the signed margin (output minus threshold) for classification, so the
    surrogate's sign matches the label.
    """
    predicates = list(vocab.predicates) if hasattr(vocab, "predicates") else list(vocab)
    if not predicates:
        raise ValueError("vocabulary is empty")
    if rng is None:
        rng = np.random.default_rng(spec.seed)

    samples = sample(seq, spec, rng)
    X = featurize_batch(samples, predicates).astype(np.float64)
    x0 = featurize(seq, predicates).astype(np.float64)
    width = config.width_for(len(predicates))
    w = kernel_weights(X, x0, width)

    outs = np.asarray(model.predict_batch(samples), dtype=np.float64)
    offset = model.task.threshold if not isinstance(model.task, Regression) else 0.0
    y = outs - offset

    sw = float(np.sum(w))
    ybar = float(np.dot(w, y) / sw)
    xbar = (w @ X) / sw
    Xc = X - xbar
    yc = y - ybar
    Xw = Xc * w[:, None]
    G = Xc.T @ Xw
    b = Xw.T @ yc
    yty = float(np.dot(w, yc * yc))

    if not np.any(np.diag(G) > 1e-12):
        return LinearExplanation(terms=(), intercept=ybar, degenerate=True)

    sel = forward_select(G, b, yty, config.sparsity, config.ridge)
    if not sel:
        return LinearExplanation(terms=(), intercept=ybar, degenerate=True)
    beta, _ = _ridge_subset(G, b, yty, sel, config.ridge)
    intercept = ybar - float(np.dot(beta, xbar[sel]))
    terms = tuple(
        (predicates[j], float(beta[i])) for i, j in enumerate(sel)
    )
    terms = tuple(sorted(terms, key=lambda t: -abs(t[1])))
    return LinearExplanation(terms=terms, intercept=intercept)


def lime_value(expl: LinearExplanation, seq: SequenceInput) -> float:
    """Evaluate the surrogate on one input: intercept + sum of active weights."""
    v = expl.intercept
    for p, wgt in expl.terms:
        if eval_predicate(p, seq):
            v += wgt
    return float(v)


def lime_decide(expl: LinearExplanation, seq: SequenceInput,
                threshold: float) -> Decision:
    """Covered iff the surrogate value clears the threshold in magnitude
    (strict); the prediction is then the value's sign."""
    v = lime_value(expl, seq)
    if abs(v) > threshold:
        pred = Label.POSITIVE if v > 0 else Label.NEGATIVE
        return Decision(covered=True, prediction=pred, value=v)
    return Decision(covered=False, value=v)


def linear_to_json(expl: LinearExplanation) -> dict:
    out = {
        "type": "linear",
        "intercept": expl.intercept,
        "terms": [
            {"predicate": predicate_to_json(p), "weight": wgt}
            for p, wgt in expl.terms
        ],
    }
    if expl.degenerate:
        out["degenerate"] = True
    return out


def linear_from_json(obj: dict) -> LinearExplanation:
    if obj.get("type") != "linear":
        raise ValueError(f"not a linear explanation: {obj.get('type')!r}")
    return LinearExplanation(
        terms=tuple(
            (predicate_from_json(t["predicate"]), float(t["weight"]))
            for t in obj["terms"]
        ),
        intercept=float(obj["intercept"]),
        degenerate=bool(obj.get("degenerate", False)),
    )
