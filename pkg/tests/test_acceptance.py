"""End-to-end acceptance checks, one test per criterion.

Each test prints a single "acceptance NN <name>: PASS/FAIL" line and
enforces its own wall-clock budget. Oracles here are written from the
definitions (nested-loop quantifier expansion, brute-force closure
enumeration, explicit normal-equation solves) so they do not share code
with the implementation under test.
"""

import csv
import io
import itertools
import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from seqexplain.anchors import (
    AnchorConfig,
    BernoulliArm,
    explain_anchors,
    kl_lucb_select,
)
from seqexplain.cli import load_dataset, main
from seqexplain.core import Label, SequenceInput, labels_from_outputs
from seqexplain.data import default_lexicon, fixture_path
from seqexplain.evaluate import (
    EvalConfig,
    Method,
    auto_window,
    generate_explanation,
    run_benchmark,
)
from seqexplain.lime import (
    LimeConfig,
    LinearExplanation,
    default_threshold,
    explain_lime,
    kernel_weights,
    lime_decide,
)
from seqexplain.models import ToyAnomalyModel, ToySentimentModel
from seqexplain.perturb import (
    GaussianJitter,
    PerturbationSpec,
    TextSubstitution,
    UNK,
    child_seed,
    sample,
)
from seqexplain.predicates import (
    AT_LEAST,
    AT_MOST,
    EQ,
    GT,
    LT,
    TEMPORAL,
    Positional,
    Temporal1D,
    Temporal2D,
    VocabConfig,
    enumerate_vocabulary,
    eval_predicate,
    featurize,
    featurize_batch,
)


@contextmanager
def criterion(number, name, budget_s):
    start = time.time()
    try:
        yield
        elapsed = time.time() - start
        assert elapsed < budget_s, f"took {elapsed:.1f}s, budget {budget_s}s"
    except BaseException:
        print(f"acceptance {number:02d} {name}: FAIL")
        raise
    print(f"acceptance {number:02d} {name}: PASS ({elapsed:.1f}s)")


# --- 1: predicate evaluation vs quantifier-expansion oracle -----------------

def oracle_holds(pred, tokens):
    """Evaluate a token predicate by expanding its quantifiers as loops."""
    pos = {}
    for j, tok in enumerate(tokens, start=1):
        pos.setdefault(tok, []).append(j)
    if isinstance(pred, Positional):
        return pred.j <= len(tokens) and tokens[pred.j - 1] == pred.c
    if isinstance(pred, Temporal1D):
        where = pos.get(pred.c, [])
        if pred.bound == AT_LEAST:
            return any(j >= pred.d for j in where)
        return any(j <= pred.d for j in where)
    if isinstance(pred, Temporal2D):
        return any(k - j >= pred.d
                   for j in pos.get(pred.c1, [])
                   for k in pos.get(pred.c2, [])
                   if j != k)
    raise TypeError(type(pred).__name__)


PANEL = [
    Positional(1, EQ, "a"),
    Positional(2, EQ, "c"),
    Positional(3, EQ, "b"),
    Temporal1D(EQ, "a", d=2),
    Temporal1D(EQ, "d", d=1),
    Temporal1D(EQ, "b", d=3, bound=AT_MOST),
    Temporal1D(EQ, "c", d=2, bound=AT_MOST),
    Temporal2D(EQ, "a", EQ, "b", d=1),
    Temporal2D(EQ, "b", EQ, "a", d=-1),
    Temporal2D(EQ, "a", EQ, "a", d=2),
    Temporal2D(EQ, "c", EQ, "d", d=3),
    Temporal2D(EQ, "d", EQ, "c", d=-1),
]


def test_01_predicate_oracle_equivalence():
    with criterion(1, "predicate oracle equivalence", budget_s=5.0):
        alphabet = "abcd"
        checked = 0
        for length in range(7):
            for tokens in itertools.product(alphabet, repeat=length):
                seq = SequenceInput.of_tokens(tokens)
                for pred in PANEL:
                    assert eval_predicate(pred, seq) == \
                        oracle_holds(pred, tokens), (tokens, pred)
                checked += 1
        assert checked == 5461  # 4^0 + ... + 4^6


# --- 2: sampled perturbations are members of the brute-force closure --------

CLOSURE_LEX = {"a": ("A",), "b": ("B", "B2"), "c": ("C",)}


def closure_of(tokens, pi, lexicon):
    """Every sequence reachable by <=cap deletions, <=1 swap at distance
    <=pi, then per-position substitution into the base model's support."""
    cap = math.ceil(len(tokens) / 3)
    skeletons = set()
    for k in range(cap + 1):
        for deleted in itertools.combinations(range(len(tokens)), k):
            rest = tuple(t for i, t in enumerate(tokens) if i not in deleted)
            skeletons.add(rest)
            for gap in range(1, pi + 1):
                for m in range(len(rest) - gap):
                    swapped = list(rest)
                    swapped[m], swapped[m + gap] = swapped[m + gap], swapped[m]
                    skeletons.add(tuple(swapped))
    support = lambda t: (t,) + (lexicon[t] if t in lexicon else (UNK,))
    members = set()
    for sk in skeletons:
        members.update(itertools.product(*(support(t) for t in sk)))
    return members


def test_02_per_t_membership():
    with criterion(2, "perturbation closure membership", budget_s=10.0):
        base = TextSubstitution(CLOSURE_LEX, replace_prob=0.5)
        budgets = {("a", "b"): 1000, ("a", "b", "c"): 1500,
                   ("a", "b", "c", "d"): 2500}
        total = 0
        for tokens, budget in budgets.items():
            allowed = closure_of(tokens, pi=1, lexicon=CLOSURE_LEX)
            spec = PerturbationSpec(base=base, pi=1, delete_prob=0.35,
                                    swap_prob=0.5, sample_budget=budget,
                                    seed=902)
            for out in sample(SequenceInput.of_tokens(tokens), spec):
                assert out.features in allowed, (tokens, out.features)
                total += 1
        assert total == 5000


# --- 3: ordered-pair anchor on the bundled sentiment example ----------------

def test_03_sentiment_anchor_vs_exhaustive_search():
    with criterion(3, "exhaustive anchor search agreement", budget_s=60.0):
        seq = SequenceInput.of_tokens(
            ["he", "never", "fails", "in", "any", "exam", "."])
        model = ToySentimentModel()
        spec = PerturbationSpec(base=TextSubstitution(default_lexicon()),
                                pi=1, sample_budget=4000, seed=7)
        vocab = enumerate_vocabulary(seq, TEMPORAL, VocabConfig())
        expl = explain_anchors(model, seq, vocab, spec, AnchorConfig())

        assert expl.target_label is Label.POSITIVE
        assert expl.precision_lcb >= 0.95
        assert any(isinstance(p, Temporal2D) and p.c1 == "never"
                   and p.c2 == "fails" and p.d >= 1 for p in expl.predicates)

        # oracle: score every size-<=2 candidate on one large shared pool
        tau = 0.95
        preds = list(vocab.predicates)
        pool_rng = np.random.default_rng(child_seed(123, 0xACCE))
        pool = sample(seq, spec.replace(sample_budget=50_000), rng=pool_rng)
        match = labels_from_outputs(model.predict_batch(pool),
                                    model.task.threshold)
        B = featurize_batch(pool, preds).astype(np.float64)
        n = len(pool)

        def fam(p):
            if isinstance(p, Temporal2D):
                return ("pair", p.op1, p.c1, p.op2, p.c2)
            return ("single", repr(p))

        def canonical(idx_set):
            # within one ordered-pair family only the largest d survives
            best = {}
            for j in idx_set:
                key = fam(preds[j])
                if key not in best or getattr(preds[j], "d", 0) > \
                        getattr(preds[best[key]], "d", 0):
                    best[key] = j
            return frozenset(best.values())

        good = B.T @ (B * match[:, None])
        both = B.T @ B
        cands = []
        for j in range(len(preds)):
            if both[j, j] and good[j, j] / both[j, j] >= tau:
                cands.append((frozenset([j]), both[j, j] / n))
        for j, k in itertools.combinations(range(len(preds)), 2):
            if both[j, k] and good[j, k] / both[j, k] >= tau:
                cands.append((frozenset([j, k]), both[j, k] / n))
        cands = [(s, cov) for s, cov in cands if canonical(s) == s]
        assert cands
        best_set, best_cov = min(cands, key=lambda t: (-t[1], len(t[0])))

        engine_set = frozenset(preds.index(p) for p in expl.predicates)
        assert engine_set == best_set
        assert expl.coverage == pytest.approx(best_cov, abs=0.03)


# --- 4: temporal methods widen coverage without losing precision ------------

def test_04_directional_coverage_gain():
    with criterion(4, "temporal coverage gain", budget_s=600.0):
        dataset = load_dataset(fixture_path("sentiment_fixture.tsv"))
        assert len(dataset) == 20
        model = ToySentimentModel()
        spec = PerturbationSpec(
            base=TextSubstitution(default_lexicon(), replace_prob=0.3),
            pi=1, delete_prob=0.5, swap_prob=0.5, sample_budget=4000,
            seed=13)
        report = run_benchmark(dataset, model, list(Method), spec,
                               EvalConfig(n_samples=1000))
        assert len(report.rows) == 80
        assert all(r.error is None for r in report.rows)
        agg = report.aggregates

        for starred, plain in (("anchors-t", "anchors"), ("lime-t", "lime")):
            cov_gain = agg[starred]["mean_coverage"] / agg[plain]["mean_coverage"]
            prec_gap = abs(agg[starred]["mean_precision"]
                           - agg[plain]["mean_precision"])
            assert cov_gain >= 1.5, (starred, cov_gain)
            assert prec_gap <= 0.05, (starred, prec_gap)


# --- 5: spike-then-drop anomaly structure recovered from series -------------

def test_05_anomaly_structure_recovery():
    with criterion(5, "anomaly structure recovery", budget_s=300.0):
        model = ToyAnomalyModel()
        rows = load_dataset(fixture_path("anomaly_fixture.csv"))
        assert len(rows) == 5
        hits = 0
        for idx, (_, seq) in enumerate(rows):
            window = auto_window(model, seq)
            lo, hi = window
            assert hi - lo + 1 <= 20
            span = model.anomaly_span(seq)
            assert lo <= span[0] and span[1] <= hi
            spec = PerturbationSpec(base=GaussianJitter(), pi=1,
                                    sample_budget=4000, seed=100 + idx,
                                    window=window)
            expl = generate_explanation(Method.ANCHORS_T, model, seq, spec)
            recovered = [
                p for p in expl.predicates
                if isinstance(p, Temporal2D) and p.op1 == GT and p.op2 == LT
                and p.c1 >= 3.0 and p.c2 <= -3.0 and p.d >= 1]
            if recovered and expl.precision_lcb >= 0.8:
                hits += 1
        assert hits >= 4, f"recovered {hits}/5"


# --- 6: surrogate decision thresholds are strict at the defaults ------------

def test_06_lime_decision_thresholds():
    with criterion(6, "surrogate decision thresholds", budget_s=5.0):
        text = SequenceInput.of_tokens(["good"])
        series = SequenceInput.of_values([1.0])
        assert default_threshold(text) == 0.1
        assert default_threshold(series) == 0.05
        for seq, at in ((text, 0.1), (series, 0.05)):
            on_boundary = LinearExplanation(terms=(), intercept=at)
            just_above = LinearExplanation(terms=(), intercept=at + 1e-9)
            negative = LinearExplanation(terms=(), intercept=-(at + 1e-9))
            thr = default_threshold(seq)
            assert not lime_decide(on_boundary, seq, thr).covered
            assert lime_decide(just_above, seq, thr).covered
            assert lime_decide(just_above, seq, thr).prediction is Label.POSITIVE
            assert lime_decide(negative, seq, thr).prediction is Label.NEGATIVE


# --- 7: KL-LUCB separates Bernoulli arms and reports honest bounds ----------

class SimArm(BernoulliArm):
    def __init__(self, p, rng, key):
        super().__init__(key=key)
        self.p = p
        self.rng = rng

    def draw(self, k):
        return int(self.rng.binomial(k, self.p))


def test_07_kl_lucb_soundness():
    with criterion(7, "bandit selection soundness", budget_s=30.0):
        trials = 200
        wins = 0
        overshoots = 0
        for t in range(trials):
            rng = np.random.default_rng(child_seed(4242, t))
            arms = [SimArm(0.50, rng, key=0), SimArm(0.99, rng, key=1)]
            top, beta = kl_lucb_select(arms, top_b=1, epsilon=0.05,
                                       delta=0.1, batch=30, init_batch=10)
            chosen = top[0]
            if chosen.p == 0.99:
                wins += 1
            if chosen.lcb(beta) > chosen.p:
                overshoots += 1
        assert wins >= 190, f"best arm chosen {wins}/{trials}"
        # delta=0.1 plus a finite-sample margin of 5 points
        assert overshoots <= trials * 0.15, f"{overshoots} LCB overshoots"


# --- 8: fitted coefficients match explicit normal-equation solves -----------

RIDGE_LEX = {
    "it": ("this", "that"), "never": ("always", "rarely"),
    "fails": ("works", "stops"), "to": ("and",),
    "engage": ("please", "bore"), "us": ("me", "them"),
}


def test_08_ridge_normal_equation_oracle():
    with criterion(8, "weighted ridge oracle", budget_s=30.0):
        seq = SequenceInput.of_tokens(["it", "never", "fails", "to",
                                       "engage", "us"])
        model = ToySentimentModel()
        vocab = enumerate_vocabulary(seq, TEMPORAL, VocabConfig())
        preds = list(vocab.predicates)
        for ridge in (1.0, 25.0):
            spec = PerturbationSpec(base=TextSubstitution(RIDGE_LEX),
                                    pi=1, sample_budget=800, seed=21)
            config = LimeConfig(ridge=ridge, sparsity=4)
            expl = explain_lime(model, seq, vocab, spec, config)
            assert expl.terms and not expl.degenerate

            samples = sample(seq, spec, np.random.default_rng(spec.seed))
            X = featurize_batch(samples, preds).astype(float)
            x0 = featurize(seq, preds).astype(float)
            w = kernel_weights(X, x0, config.width_for(len(preds)))
            y = np.asarray(model.predict_batch(samples), float) \
                - model.task.threshold
            sel = [preds.index(p) for p, _ in expl.terms]
            A = np.column_stack([np.ones(len(X)), X[:, sel]])
            M = A.T @ (A * w[:, None])
            M[1:, 1:] += ridge * np.eye(len(sel))
            coef = np.linalg.solve(M, A.T @ (w * y))
            assert expl.intercept == pytest.approx(coef[0], rel=1e-8,
                                                   abs=1e-10)
            fitted = np.array([weight for _, weight in expl.terms])
            assert fitted == pytest.approx(coef[1:], rel=1e-8, abs=1e-10)


# --- 9: seeded CLI runs are byte-identical ----------------------------------

def test_09_cli_determinism(capsys, tmp_path):
    with criterion(9, "seeded CLI determinism", budget_s=120.0):
        dataset = tmp_path / "pair.tsv"
        dataset.write_text("pos\tthe plan finally works\n"
                           "neg\tthe printer always breaks\n")
        invocations = [
            ["explain", "--model", "toy-sentiment", "--method", "anchors-t",
             "--seed", "7", "--samples", "800", "not good at all"],
            ["explain", "--model", "toy-sentiment", "--method", "lime",
             "--output", "json", "--seed", "7", "--samples", "400",
             "it never fails"],
            ["bench", "--model", "toy-sentiment", "--dataset", str(dataset),
             "--methods", "lime,lime-t", "--samples", "200", "--seed", "11"],
            ["bench", "--model", "toy-sentiment", "--dataset", str(dataset),
             "--methods", "lime", "--samples", "200", "--seed", "11",
             "--output", "json"],
            ["perturb", "--seed", "3", "--samples", "8", "--pi", "1",
             "he never fails in any exam ."],
        ]
        for argv in invocations:
            assert main(list(argv)) == 0
            first = capsys.readouterr().out
            assert main(list(argv)) == 0
            second = capsys.readouterr().out
            assert first == second, argv
            assert first.strip()


# --- 10: value-sequence base perturbation is unit-variance Gaussian ---------

def test_10_gaussian_base_moments():
    with criterion(10, "base perturbation moments", budget_s=30.0):
        originals = (1.5, -2.0)
        seq = SequenceInput.of_values(originals)
        spec = PerturbationSpec(base=GaussianJitter(), pi=0, delete_prob=0.0,
                                swap_prob=0.0, sample_budget=50_000, seed=77)
        draws = np.array([s.features for s in sample(seq, spec)])
        assert draws.shape == (50_000, 2)  # 1e5 scalar draws
        for col, orig in enumerate(originals):
            assert abs(draws[:, col].mean() - orig) < 0.05
            assert abs(draws[:, col].std() - 1.0) < 0.05
