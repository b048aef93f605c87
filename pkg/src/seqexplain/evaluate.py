"""Simulated-user evaluation: how often an explanation makes a call on
perturbed inputs (coverage) and how often that call matches the model
(precision).

All four methods are scored on the same length-varying sample set per input,
so coverage comparisons are paired. The classic methods generate their
explanations under a length-preserving perturbation (no deletions, no swaps);
the starred methods use the full model. Scoring always uses the full model.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .anchors import AnchorConfig, AnchorExplanation, anchor_decide, explain_anchors
from .core import Label, LinearExplanation, SequenceInput, VALUES, label, labels_from_outputs
from .lime import LimeConfig, explain_lime, lime_decide
from .perturb import PerturbationSpec, child_seed, sample
from .predicates import CLASSIC, TEMPORAL, VocabConfig, enumerate_vocabulary, featurize_batch

log = logging.getLogger(__name__)

_EVAL_STREAM = 0xFF
_GEN_STREAM_BITS = 8  # per-input stream block: (input_index << 8) | method slot


class Method(Enum):
    ANCHORS = "anchors"
    ANCHORS_T = "anchors-t"
    LIME = "lime"
    LIME_T = "lime-t"

    @property
    def temporal(self) -> bool:
        return self in (Method.ANCHORS_T, Method.LIME_T)

    @property
    def is_anchor(self) -> bool:
        return self in (Method.ANCHORS, Method.ANCHORS_T)


def generation_spec(method: Method, spec: PerturbationSpec) -> PerturbationSpec:
    """Perturbation used while fitting the explanation.

    Classic methods assume perturbations keep the input's length, so their
    generation runs with deletions and swaps off; starred methods train
    against the full length-varying model.
    """
    if method.temporal:
        return spec
    return spec.replace(pi=0, delete_prob=0.0)


@dataclass(frozen=True)
class EvalConfig:
    n_samples: int = 10_000
    anchor: AnchorConfig = field(default_factory=AnchorConfig)
    lime: LimeConfig = field(default_factory=LimeConfig)
    vocab: VocabConfig = field(default_factory=VocabConfig)
    lime_threshold: Optional[float] = None  # None -> 0.1 tokens / 0.05 values
    flagged_only: Optional[bool] = None     # None -> auto: True for value inputs

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")


def auto_window(model, seq: SequenceInput, width: int = 20):
    """A width-sized 1-based window containing the model's flagged span.

    Works for models exposing anomaly_span(); returns None (whole input)
    otherwise, or when nothing is flagged or the input already fits.
    """
    span_fn = getattr(model, "anomaly_span", None)
    if span_fn is None or len(seq) <= width:
        return None
    span = span_fn(seq)
    if span is None:
        return None
    j, k = span
    slack = width - (k - j + 1)
    lo = max(1, j - max(slack, 0) // 2)
    hi = min(len(seq), lo + width - 1)
    lo = max(1, hi - width + 1)
    return (lo, hi)


def generate_explanation(method: Method, model, seq: SequenceInput,
                         spec: PerturbationSpec, config: EvalConfig = EvalConfig(),
                         rng=None):
    """One explanation for ``seq`` with the given method's vocabulary and
    perturbation regime."""
    mode = TEMPORAL if method.temporal else CLASSIC
    vcfg = config.vocab
    if vcfg.window != spec.window:
        vcfg = dataclasses.replace(vcfg, window=spec.window)
    vocab = enumerate_vocabulary(seq, mode, vcfg)
    gspec = generation_spec(method, spec)
    if method.is_anchor:
        return explain_anchors(model, seq, vocab, gspec, config.anchor, rng=rng)
    # surrogate fits want at least 10 samples per predicate
    floor = 10 * len(vocab.predicates)
    if gspec.sample_budget < floor:
        gspec = gspec.replace(sample_budget=floor)
    return explain_lime(model, seq, vocab, gspec, config.lime, rng=rng)


def _decide_batch(expl, samples, lime_threshold: float):
    """(covered mask, predicted-positive mask over covered) for one sample set."""
    n = len(samples)
    if isinstance(expl, AnchorExplanation):
        if expl.predicates:
            covered = featurize_batch(samples, list(expl.predicates)).all(axis=1)
        else:
            covered = np.ones(n, dtype=bool)
        pred_positive = np.full(n, expl.target_label is Label.POSITIVE)
        return covered, pred_positive
    if isinstance(expl, LinearExplanation):
        values = np.full(n, expl.intercept, dtype=np.float64)
        if expl.terms:
            B = featurize_batch(samples, [p for p, _ in expl.terms]).astype(np.float64)
            values += B @ np.array([w for _, w in expl.terms])
        covered = np.abs(values) > lime_threshold
        return covered, values > 0
    raise TypeError(f"unknown explanation type {type(expl).__name__}")


def evaluate_on_samples(expl, model, samples, outputs=None,
                        lime_threshold: Optional[float] = None):
    """(coverage, precision) of one explanation on a fixed sample set.

    Precision is over covered samples only; None when nothing is covered.
    """
    if lime_threshold is None:
        from .lime import default_threshold
        lime_threshold = default_threshold(samples[0])
    if outputs is None:
        outputs = model.predict_batch(samples)
    actual_positive = labels_from_outputs(outputs, model.task.threshold)
    covered, pred_positive = _decide_batch(expl, samples, lime_threshold)
    coverage = float(covered.mean()) if len(samples) else 0.0
    if not covered.any():
        return coverage, None
    precision = float((pred_positive[covered] == actual_positive[covered]).mean())
    return coverage, precision


def evaluate_explanation(expl, model, seq: SequenceInput, spec: PerturbationSpec,
                         n: int = 10_000, rng=None,
                         lime_threshold: Optional[float] = None):
    """Draw n fresh perturbed samples of ``seq`` and score the explanation."""
    if rng is None:
        rng = np.random.default_rng(child_seed(spec.seed, _EVAL_STREAM))
    samples = sample(seq, spec.replace(sample_budget=n), rng)
    if lime_threshold is None:
        from .lime import default_threshold
        lime_threshold = default_threshold(seq)
    return evaluate_on_samples(expl, model, samples, lime_threshold=lime_threshold)


@dataclass(frozen=True)
class RowResult:
    input_id: str
    method: Method
    coverage: Optional[float]
    precision: Optional[float]
    n_covered: int
    n_samples: int
    seconds: float
    error: Optional[str] = None
    explanation: object = None  # not serialized


@dataclass(frozen=True)
class EvalReport:
    rows: tuple
    aggregates: dict  # method value -> {"mean_coverage": f, "mean_precision": f}
    metadata: dict


def _aggregate(rows):
    agg = {}
    for m in Method:
        mine = [r for r in rows if r.method is m and r.error is None]
        if not mine:
            continue
        covs = [r.coverage for r in mine]
        precs = [r.precision for r in mine if r.precision is not None]
        agg[m.value] = {
            "mean_coverage": float(np.mean(covs)),
            "mean_precision": float(np.mean(precs)) if precs else None,
        }
    return agg


def run_benchmark(dataset, model, methods, spec: PerturbationSpec,
                  config: EvalConfig = EvalConfig(), window=None) -> EvalReport:
    """Explain and score every dataset input with every method.

    ``dataset`` is a list of (input_id, SequenceInput). Per-input failures
    are recorded in their rows and the run continues. ``window="auto"``
    restricts each input's perturbation and vocabulary to a 20-step window
    around the span the model flags.
    """
    if not dataset:
        raise ValueError("dataset is empty")
    methods = sorted(set(methods), key=lambda m: m.value)
    method_slot = {m: i for i, m in enumerate(Method)}
    rows = []
    for idx, (input_id, seq) in enumerate(dataset):
        flagged_only = config.flagged_only
        if flagged_only is None:
            flagged_only = seq.kind == VALUES
        if flagged_only and label(model, seq) is Label.NEGATIVE:
            log.info("input %s not flagged by the model, skipped", input_id)
            continue
        in_spec = spec
        if window == "auto":
            in_spec = spec.replace(window=auto_window(model, seq))
        eval_rng = np.random.default_rng(
            child_seed(spec.seed, (idx << _GEN_STREAM_BITS) | _EVAL_STREAM))
        try:
            samples = sample(seq, in_spec.replace(sample_budget=config.n_samples),
                             eval_rng)
            outputs = model.predict_batch(samples)
        except Exception as e:  # a dead pool fails every method for this input
            log.warning("input %s evaluation pool failed: %s", input_id, e)
            rows.extend(RowResult(
                input_id=input_id, method=m, coverage=None, precision=None,
                n_covered=0, n_samples=config.n_samples, seconds=0.0,
                error=str(e)) for m in methods)
            continue
        lime_thr = config.lime_threshold
        if lime_thr is None:
            from .lime import default_threshold
            lime_thr = default_threshold(seq)
        for m in methods:
            t0 = time.perf_counter()
            gen_seed = child_seed(spec.seed, (idx << _GEN_STREAM_BITS) | method_slot[m])
            try:
                expl = generate_explanation(
                    m, model, seq, in_spec.replace(seed=gen_seed), config)
                cov, prec = evaluate_on_samples(
                    expl, model, samples, outputs, lime_threshold=lime_thr)
                secs = time.perf_counter() - t0
                rows.append(RowResult(
                    input_id=input_id, method=m, coverage=cov, precision=prec,
                    n_covered=int(round(cov * len(samples))),
                    n_samples=len(samples), seconds=secs, explanation=expl))
            except Exception as e:  # per-input failures must not kill the run
                secs = time.perf_counter() - t0
                log.warning("input %s method %s failed: %s", input_id, m.value, e)
                rows.append(RowResult(
                    input_id=input_id, method=m, coverage=None, precision=None,
                    n_covered=0, n_samples=config.n_samples, seconds=secs,
                    error=str(e)))
            log.info("input %s method %s done in %.2fs", input_id, m.value,
                     rows[-1].seconds)
    rows = tuple(rows)
    meta = {
        "n_samples": config.n_samples,
        "seed": spec.seed,
        "spec": {
            "pi": spec.pi,
            "max_deletions": spec.max_deletions,
            "delete_prob": spec.delete_prob,
            "swap_prob": spec.swap_prob,
            "window": list(spec.window) if spec.window else None,
            "base": type(spec.base).__name__,
        },
    }
    return EvalReport(rows=rows, aggregates=_aggregate(rows), metadata=meta)


def report_to_json(report: EvalReport, deterministic_seconds: bool = False) -> str:
    obj = {
        "per_input": [
            {
                "input_id": r.input_id,
                "method": r.method.value,
                "coverage": r.coverage,
                "precision": r.precision,
                "n_covered": r.n_covered,
                "n_samples": r.n_samples,
                "seconds": 0.0 if deterministic_seconds else round(r.seconds, 3),
                **({"error": r.error} if r.error is not None else {}),
            }
            for r in report.rows
        ],
        "aggregates": report.aggregates,
        "metadata": report.metadata,
    }
    return json.dumps(obj, indent=2)


def report_to_csv(report: EvalReport, deterministic_seconds: bool = False) -> str:
    """CSV rows per input and method; seconds can be zeroed for byte-stable
    comparisons."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["input_id", "method", "coverage", "precision",
                     "n_covered", "n_samples", "seconds"])
    for r in report.rows:
        writer.writerow([
            r.input_id,
            r.method.value,
            "" if r.coverage is None else f"{r.coverage:.6f}",
            "" if r.precision is None else f"{r.precision:.6f}",
            r.n_covered,
            r.n_samples,
            "0.000" if deterministic_seconds else f"{r.seconds:.3f}",
        ])
    return buf.getvalue()
