"""Anchor explanations: a minimal predicate conjunction with high conditional
precision, found by beam search with best-arm-identification sampling.

Precision of a candidate anchor is the probability, under the perturbation
model conditioned on the anchor, that the model keeps the input's label.
Candidates are compared with KL-LUCB: Bernoulli confidence bounds obtained by
inverting the binary KL divergence, sampled adaptively until the top
candidates are separated to tolerance epsilon at confidence 1 - delta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    AnchorExplanation,
    Decision,
    Label,
    SequenceInput,
    label,
    labels_from_outputs,
)
from .perturb import PerturbationSpec, child_seed, conditional_sample, sample
from .predicates import (
    Temporal2D,
    eval_predicate,
    featurize_batch,
    predicate_from_json,
    predicate_to_json,
    sort_key,
)

_KL_EPS = 1e-12
_BISECT_TOL = 1e-6

# rng stream offsets so the coverage pool, the empty-anchor arm and the
# per-candidate arms never share a stream
_COVERAGE_STREAM = 0x0C0FFEE
_EMPTY_ARM_STREAM = 0x00E317
_ARM_STREAM = 0x1000000


@dataclass(frozen=True)
class AnchorConfig:
    precision_target: float = 0.95  # tau
    confidence: float = 0.1         # delta
    tolerance: float = 0.05         # epsilon
    beam_width: int = 4
    max_anchor_size: int = 4
    batch: int = 100
    init_batch: int = 10
    max_lucb_steps: int = 200
    verify_batches: int = 30
    coverage_samples: int = 10_000

    def __post_init__(self):
        if not 0.0 < self.precision_target <= 1.0:
            raise ValueError("precision_target must be in (0, 1]")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must be in (0, 1)")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be > 0")
        if self.beam_width < 1 or self.max_anchor_size < 1:
            raise ValueError("beam_width and max_anchor_size must be >= 1")
        if min(self.batch, self.init_batch, self.max_lucb_steps,
               self.verify_batches, self.coverage_samples) < 1:
            raise ValueError("sampling budgets must be >= 1")


# --- Bernoulli KL confidence bounds ---------------------------------------

def kl_bernoulli(p: float, q: float) -> float:
    """KL(Bern(p) || Bern(q)), with the usual 0 log 0 = 0 conventions."""
    p = min(max(p, _KL_EPS), 1.0 - _KL_EPS)
    q = min(max(q, _KL_EPS), 1.0 - _KL_EPS)
    return p * math.log(p / q) + (1.0 - p) * math.log((1.0 - p) / (1.0 - q))


def _bisect(f, lo: float, hi: float) -> float:
    """Root of the monotone f on [lo, hi] with f(lo) <= 0 <= f(hi)."""
    while hi - lo > _BISECT_TOL:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def kl_ucb(mean: float, n: int, beta: float) -> float:
    """Largest q with n * KL(mean || q) <= beta."""
    if n <= 0:
        return 1.0
    level = beta / n
    if kl_bernoulli(mean, 1.0) <= level:
        return 1.0
    return _bisect(lambda q: kl_bernoulli(mean, q) - level, mean, 1.0)


def kl_lcb(mean: float, n: int, beta: float) -> float:
    """Smallest q with n * KL(mean || q) <= beta."""
    if n <= 0:
        return 0.0
    level = beta / n
    if kl_bernoulli(mean, 0.0) <= level:
        return 0.0
    return _bisect(lambda q: level - kl_bernoulli(mean, q), 0.0, mean)


def _beta(n_arms: int, t: int, delta: float) -> float:
    # log(n_arms * (t+1)^2 / delta): a union bound over arms and rounds that
    # keeps the per-round confidence level summable
    return math.log(n_arms * (t + 1) ** 2 / delta)


class BernoulliArm:
    """Adaptive-sampling state for one candidate; subclasses define draw()."""

    def __init__(self, key=()):
        self.key = key
        self.n = 0
        self.successes = 0

    def draw(self, k: int) -> int:
        """Number of successes in k fresh Bernoulli pulls."""
        raise NotImplementedError

    def pull(self, k: int):
        self.successes += self.draw(k)
        self.n += k

    @property
    def mean(self) -> float:
        return self.successes / self.n if self.n else 0.0

    def lcb(self, beta: float) -> float:
        return kl_lcb(self.mean, self.n, beta)

    def ucb(self, beta: float) -> float:
        return kl_ucb(self.mean, self.n, beta)


def kl_lucb_select(arms, top_b: int, epsilon: float, delta: float,
                   batch: int = 100, init_batch: int = 10,
                   max_steps: int = 200):
    """Top-``top_b`` arms by empirical precision, LUCB-sampled to tolerance.

    Samples the weakest of the provisional top set against the strongest
    challenger until their confidence bounds are within epsilon (or the step
    cap is hit). Returns the top arms sorted by mean, best first; bounds are
    available through arm.lcb/arm.ucb at beta(n_arms, t, delta).
    """
    arms = list(arms)
    if not arms:
        raise ValueError("kl_lucb_select needs at least one arm")
    for arm in arms:
        if arm.n == 0:
            arm.pull(init_batch)
    t = 1
    while len(arms) > top_b and t < max_steps:
        beta = _beta(len(arms), t, delta)
        ranked = sorted(arms, key=lambda a: (-a.mean, a.key))
        top, rest = ranked[:top_b], ranked[top_b:]
        leader = min(top, key=lambda a: (a.lcb(beta), a.key))
        challenger = max(rest, key=lambda a: (a.ucb(beta), a.key))
        if challenger.ucb(beta) - leader.lcb(beta) < epsilon:
            break
        leader.pull(batch)
        challenger.pull(batch)
        t += 1
    ranked = sorted(arms, key=lambda a: (-a.mean, a.key))
    return ranked[:top_b], _beta(len(arms), t, delta)


# --- precision and coverage ------------------------------------------------

def estimate_precision(anchor, model, seq: SequenceInput, spec: PerturbationSpec,
                       n: int, rng=None) -> float:
    """Fraction of n conditional samples that keep the input's label."""
    target_positive = label(model, seq) is Label.POSITIVE
    samples = conditional_sample(seq, anchor, spec, rng=rng, n=n)
    outs = model.predict_batch(samples)
    positives = labels_from_outputs(outs, model.task.threshold)
    return float(np.mean(positives == target_positive))


class _AnchorArm(BernoulliArm):
    def __init__(self, predicates, seq, model, spec, seed):
        super().__init__(key=tuple(sort_key(p) for p in predicates))
        self.predicates = tuple(predicates)
        self._seq = seq
        self._model = model
        self._spec = spec
        self._rng = np.random.default_rng(seed)
        self._target_positive = label(model, seq) is Label.POSITIVE

    def draw(self, k: int) -> int:
        if self.predicates:
            samples = conditional_sample(self._seq, self.predicates, self._spec,
                                         rng=self._rng, n=k)
        else:
            samples = sample(self._seq, self._spec.replace(sample_budget=k), self._rng)
        outs = self._model.predict_batch(samples)
        positives = labels_from_outputs(outs, self._model.task.threshold)
        return int(np.sum(positives == self._target_positive))


class _CoveragePool:
    """Fixed unconditional sample set; coverage = satisfaction fraction."""

    def __init__(self, seq, spec, n, seed):
        rng = np.random.default_rng(seed)
        self.samples = sample(seq, spec.replace(sample_budget=n), rng)
        self._cols = {}

    def _col(self, p):
        k = sort_key(p)
        if k not in self._cols:
            self._cols[k] = featurize_batch(self.samples, [p])[:, 0]
        return self._cols[k]

    def coverage(self, predicates) -> float:
        if not predicates:
            return 1.0
        mask = np.ones(len(self.samples), dtype=bool)
        for p in predicates:
            mask &= self._col(p).astype(bool)
        return float(mask.mean())


# --- beam search -----------------------------------------------------------

def _verify(arm, tau, delta, n_arms, config):
    """Push one arm's bounds until they settle on a side of tau.

    Returns (reached, lcb): reached is True when the LCB cleared tau."""
    t = max(arm.n // config.batch, 1)
    while t < config.verify_batches:
        beta = _beta(n_arms, t, delta)
        if arm.lcb(beta) >= tau or arm.ucb(beta) < tau:
            break
        arm.pull(config.batch)
        t += 1
    beta = _beta(n_arms, t, delta)
    return arm.lcb(beta) >= tau, arm.lcb(beta)


def _t2d_family(p):
    """Grouping key that ignores d, so d variants of one pair compete.

    Keys are shape-uniform per leading tag so mixed predicate types sort."""
    if isinstance(p, Temporal2D):
        return ("t2d", p.op1, _ck(p.c1), p.op2, _ck(p.c2))
    return ("one", sort_key(p))


def _ck(c):
    return (0, c) if isinstance(c, str) else (1, repr(c))


def _select_result(stoppers, pool):
    """stoppers: list of (predicates, lcb). Applies the d rule, then coverage,
    then size, then predicate order."""
    # d rule: among anchors identical up to the d of their 2-D predicates,
    # keep the largest d (it still holds on the input by construction)
    best_by_family = {}
    for preds, lcb in stoppers:
        fam = tuple(sorted(_t2d_family(p) for p in preds))
        ds = tuple(sorted(p.d for p in preds if isinstance(p, Temporal2D)))
        cur = best_by_family.get(fam)
        if cur is None or ds > cur[0]:
            best_by_family[fam] = (ds, preds, lcb)
    survivors = [(preds, lcb) for _, preds, lcb in best_by_family.values()]
    scored = [
        (-pool.coverage(preds), len(preds), tuple(sort_key(p) for p in preds), preds, lcb)
        for preds, lcb in survivors
    ]
    scored.sort(key=lambda r: r[:3])
    _, _, _, preds, lcb = scored[0]
    return preds, lcb, pool.coverage(preds)


def explain_anchors(model, seq: SequenceInput, vocab, spec: PerturbationSpec,
                    config: AnchorConfig = AnchorConfig(), rng=None) -> AnchorExplanation:
    """Beam search for the highest-coverage anchor whose precision LCB
    reaches the target.

    Every returned anchor holds on the explained input. When nothing reaches
    the target within the size cap, returns the empty anchor flagged
    low_precision.
    """
    predicates = list(vocab.predicates) if hasattr(vocab, "predicates") else list(vocab)
    if not predicates:
        raise ValueError("vocabulary is empty")
    # every stream below derives from one base seed, so runs are repeatable
    base = spec.seed if rng is None else int(rng.integers(1 << 63))
    target = label(model, seq)
    pool = _CoveragePool(seq, spec, config.coverage_samples,
                         child_seed(base, _COVERAGE_STREAM))
    tau, delta, eps = config.precision_target, config.confidence, config.tolerance

    # candidate predicates must hold on the explained input
    alive = sorted((p for p in predicates if eval_predicate(p, seq)), key=sort_key)

    # does the unconditioned perturbation already keep the label often enough
    empty_arm = _AnchorArm((), seq, model, spec, child_seed(base, _EMPTY_ARM_STREAM))
    empty_arm.pull(config.batch)
    reached, lcb = _verify(empty_arm, tau, delta, max(len(alive), 1) + 1, config)
    if reached or not alive:
        return AnchorExplanation(
            predicates=(), target_label=target, precision_lcb=lcb,
            coverage=1.0, low_precision=not reached,
        )

    beam = [()]
    seen = set()
    arm_counter = 0
    for size in range(1, config.max_anchor_size + 1):
        arms = []
        for members in beam:
            held = set(map(sort_key, members))
            for p in alive:
                if sort_key(p) in held:
                    continue
                cand = tuple(sorted(members + (p,), key=sort_key))
                ck = tuple(map(sort_key, cand))
                if ck in seen:
                    continue
                seen.add(ck)
                arm_counter += 1
                arms.append(_AnchorArm(
                    cand, seq, model, spec,
                    child_seed(base, _ARM_STREAM + arm_counter)))
        if not arms:
            break
        top, _ = kl_lucb_select(
            arms, config.beam_width, eps, delta,
            batch=config.batch, init_batch=config.init_batch,
            max_steps=config.max_lucb_steps)

        stoppers = []
        for arm in top:
            ok, arm_lcb = _verify(arm, tau, delta, len(arms), config)
            if ok:
                stoppers.append((arm.predicates, arm_lcb))
        if stoppers:
            preds, lcb, cov = _select_result(stoppers, pool)
            return AnchorExplanation(
                predicates=preds, target_label=target,
                precision_lcb=lcb, coverage=cov,
            )
        beam = [arm.predicates for arm in top]

    return AnchorExplanation(
        predicates=(), target_label=target,
        precision_lcb=empty_arm.lcb(_beta(len(alive) + 1, config.verify_batches, delta)),
        coverage=1.0, low_precision=True,
    )


def anchor_decide(expl: AnchorExplanation, seq: SequenceInput) -> Decision:
    """Covered with the anchor's label iff every predicate holds on seq."""
    if all(eval_predicate(p, seq) for p in expl.predicates):
        return Decision(covered=True, prediction=expl.target_label)
    return Decision(covered=False)


def anchor_to_json(expl: AnchorExplanation) -> dict:
    out = {
        "type": "anchor",
        "label": expl.target_label.value,
        "precision_lcb": expl.precision_lcb,
        "coverage": expl.coverage,
        "predicates": [predicate_to_json(p) for p in expl.predicates],
    }
    if expl.low_precision:
        out["low_precision"] = True
    return out


def anchor_from_json(obj: dict) -> AnchorExplanation:
    if obj.get("type") != "anchor":
        raise ValueError(f"not an anchor explanation: {obj.get('type')!r}")
    from .core import Label
    return AnchorExplanation(
        predicates=tuple(predicate_from_json(p) for p in obj["predicates"]),
        target_label=Label(obj["label"]),
        precision_lcb=float(obj["precision_lcb"]),
        coverage=float(obj["coverage"]),
        low_precision=bool(obj.get("low_precision", False)),
    )
