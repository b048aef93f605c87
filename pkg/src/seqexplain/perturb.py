"""Perturbation models that vary input lengths.

The sampler composes, in this order:

1. random feature deletions (geometric stopping, capped),
2. at most one swap of two features at distance <= pi,
3. a base per-feature model: token substitution from a lexicon, or Gaussian
   jitter for real values.

``conditional_sample`` draws from the same process restricted to samples that
satisfy an anchor, by rejection first and a witness-pinning repair fallback
when the acceptance rate is too low.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace as _dc_replace
from typing import Mapping, Optional

import numpy as np

from .core import SequenceInput, TOKENS, VALUES
from .predicates import (
    Positional,
    Temporal1D,
    Temporal2D,
    AT_LEAST,
    _cmp,
    eval_predicate,
    featurize_batch,
)

UNK = "<unk>"


class BudgetExhausted(RuntimeError):
    """Conditional sampling could not produce the requested samples."""


@dataclass(frozen=True)
class TextSubstitution:
    """Per-token substitution from a static lexicon; unlisted tokens fall back to UNK."""

    lexicon: Mapping[str, tuple]
    replace_prob: float = 0.3

    def __post_init__(self):
        if not 0.0 <= self.replace_prob <= 1.0:
            raise ValueError("replace_prob must be in [0, 1]")


@dataclass(frozen=True)
class GaussianJitter:
    sd: float = 1.0

    def __post_init__(self):
        if self.sd < 0:
            raise ValueError("sd must be >= 0")


@dataclass(frozen=True)
class PerturbationSpec:
    """Full sampling recipe: base model plus the length-varying preprocessor."""

    base: object  # TextSubstitution | GaussianJitter
    pi: int = 1
    max_deletions: Optional[int] = None  # None -> ceil(len / 3) per input
    delete_prob: float = 0.35
    swap_prob: float = 0.5
    sample_budget: int = 1000
    seed: int = 42
    window: Optional[tuple] = None  # 1-based inclusive (start, end)

    def __post_init__(self):
        if self.pi < 0:
            raise ValueError("pi must be >= 0")
        if self.max_deletions is not None and self.max_deletions < 0:
            raise ValueError("max_deletions must be >= 0")
        for name in ("delete_prob", "swap_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.sample_budget <= 0:
            raise ValueError("sample_budget must be > 0")

    def replace(self, **kw) -> "PerturbationSpec":
        return _dc_replace(self, **kw)


def child_seed(seed: int, index: int) -> int:
    """Seed for an independently-seeded child sampler (worker or input split)."""
    return (seed ^ index) & 0xFFFFFFFFFFFFFFFF


@dataclass(frozen=True)
class SampleInfo:
    """Edit record for one sample: original positions deleted, swap applied."""

    deleted: tuple
    swap: Optional[tuple]


def load_lexicon(path) -> dict:
    """Parse a substitution lexicon file: ``word<TAB>alt1,alt2,...`` per line."""
    lex = {}
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            word, _, alts = line.partition("\t")
            if not _:
                raise ValueError(f"malformed lexicon line (no tab): {line!r}")
            lex[word] = tuple(a for a in alts.split(",") if a)
    return lex


def default_max_deletions(n: int) -> int:
    return math.ceil(n / 3)


def delete_features(seq: SequenceInput, rng, max_deletions: int,
                    delete_prob: float) -> SequenceInput:
    """Remove up to ``max_deletions`` random features, keeping survivor order."""
    out, _ = _delete_with_positions(list(seq.features), rng, max_deletions, delete_prob)
    return seq.replace_features(out)


def _delete_with_positions(features, rng, max_deletions, delete_prob):
    # Geometric stopping: each round deletes one uniform position with
    # probability delete_prob, otherwise stops.
    remaining = list(range(1, len(features) + 1))
    feats = list(features)
    deleted = []
    for _ in range(max_deletions):
        if not feats or rng.random() >= delete_prob:
            break
        i = int(rng.integers(len(feats)))
        deleted.append(remaining.pop(i))
        feats.pop(i)
    return feats, tuple(sorted(deleted))


def swap_features(seq: SequenceInput, m: int, n: int) -> SequenceInput:
    """Exchange the features at 1-based positions m < n."""
    if not (1 <= m < n <= len(seq)):
        raise ValueError(f"invalid swap positions ({m}, {n}) for length {len(seq)}")
    feats = list(seq.features)
    feats[m - 1], feats[n - 1] = feats[n - 1], feats[m - 1]
    return seq.replace_features(feats)


def _choose_swap(length: int, pi: int, swap_prob: float, rng):
    if pi < 1 or length < 2 or rng.random() >= swap_prob:
        return None
    pairs = [(m, m + gap) for gap in range(1, pi + 1) for m in range(1, length + 1 - gap)]
    if not pairs:
        return None
    return pairs[int(rng.integers(len(pairs)))]


def preprocess(seq: SequenceInput, rng, spec: PerturbationSpec) -> SequenceInput:
    """Deletions followed by at most one bounded swap (identity included)."""
    out, _ = _preprocess_info(seq, rng, spec)
    return out


def _split_window(seq: SequenceInput, window):
    if window is None:
        return (), list(seq.features), ()
    lo, hi = window
    lo = max(1, lo)
    hi = min(len(seq), hi)
    feats = seq.features
    return feats[: lo - 1], list(feats[lo - 1:hi]), feats[hi:]


def _preprocess_info(seq, rng, spec):
    prefix, body, suffix = _split_window(seq, spec.window)
    cap = spec.max_deletions
    if cap is None:
        cap = default_max_deletions(len(body))
    body, deleted = _delete_with_positions(body, rng, cap, spec.delete_prob)
    swap = _choose_swap(len(body), spec.pi, spec.swap_prob, rng)
    if swap is not None:
        m, n = swap
        body[m - 1], body[n - 1] = body[n - 1], body[m - 1]
    off = len(prefix)
    info = SampleInfo(
        deleted=tuple(p + off for p in deleted),
        swap=None if swap is None else (swap[0] + off, swap[1] + off),
    )
    return seq.replace_features(prefix + tuple(body) + suffix), info


def _apply_base(seq, rng, spec, protected=frozenset(), window=None):
    # window is the effective region on *this* sequence; after deletions it
    # is narrower than spec.window, so callers must pass it explicitly
    prefix, body, suffix = _split_window(seq, window)
    off = len(prefix)
    base = spec.base
    n = len(body)
    if isinstance(base, TextSubstitution):
        hit = rng.random(n) < base.replace_prob
        for i in range(n):
            if hit[i] and (i + off + 1) not in protected:
                alts = tuple(base.lexicon.get(body[i], ())) or (UNK,)
                body[i] = alts[int(rng.integers(len(alts)))]
    elif isinstance(base, GaussianJitter):
        noise = rng.normal(0.0, base.sd, size=n)
        for i in range(n):
            if (i + off + 1) not in protected:
                body[i] = float(body[i] + noise[i])
    else:
        raise TypeError(f"unknown base perturbation {type(base).__name__}")
    return seq.replace_features(prefix + tuple(body) + suffix)


def sample(seq: SequenceInput, spec: PerturbationSpec, rng=None) -> list:
    """Draw ``spec.sample_budget`` perturbed inputs; deterministic given seed."""
    return [s for s, _ in sample_with_info(seq, spec, rng)]


def sample_with_info(seq: SequenceInput, spec: PerturbationSpec, rng=None) -> list:
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    _check_base_kind(seq, spec)
    out = []
    for _ in range(spec.sample_budget):
        pre, info = _preprocess_info(seq, rng, spec)
        win = spec.window
        if win is not None and info.deleted:
            win = (win[0], win[1] - len(info.deleted))
        out.append((_apply_base(pre, rng, spec, window=win), info))
    return out


def _check_base_kind(seq, spec):
    if isinstance(spec.base, TextSubstitution) and seq.kind != TOKENS:
        raise TypeError("TextSubstitution requires a token sequence")
    if isinstance(spec.base, GaussianJitter) and seq.kind != VALUES:
        raise TypeError("GaussianJitter requires a value sequence")


# --- conditional sampling under an anchor ---------------------------------

def _witness_positions(p, seq: SequenceInput):
    """First witness position(s) that make ``p`` true on ``seq``."""
    fs = seq.features
    n = len(fs)
    if isinstance(p, Positional):
        return (p.j,)
    if isinstance(p, Temporal1D):
        positions = range(p.d, n + 1) if p.bound == AT_LEAST else range(1, min(p.d, n) + 1)
        for j in positions:
            if _cmp(fs[j - 1], p.op, p.c, p.tol):
                return (j,)
        return None
    if not isinstance(p, Temporal2D):
        raise TypeError(f"unknown predicate type {type(p).__name__}")
    for j in range(1, n + 1):
        if not _cmp(fs[j - 1], p.op1, p.c1, p.tol):
            continue
        for k in range(max(1, j + p.d), n + 1):
            if k != j and _cmp(fs[k - 1], p.op2, p.c2, p.tol):
                return (j, k)
    return None


def _anchor_holds(anchor, seq):
    return all(eval_predicate(p, seq) for p in anchor)


def _repair_one(seq, anchor, protected, rng, spec):
    """One sample with anchor witnesses pinned.

    Protected positions are exempt from deletion and from the base model;
    deletions and the swap are applied tentatively and reverted whenever the
    anchor would stop holding (position shifts or distance-bound violations).
    """
    prefix, body, suffix = _split_window(seq, spec.window)
    off = len(prefix)
    cap = spec.max_deletions
    if cap is None:
        cap = default_max_deletions(len(body))

    cur = list(seq.features)
    prot = set(protected)

    def assemble(b):
        return seq.replace_features(prefix + tuple(b) + suffix)

    # deletions, one tentative removal at a time
    for _ in range(cap):
        if rng.random() >= spec.delete_prob:
            break
        candidates = [i for i in range(len(body)) if (i + off + 1) not in prot]
        if not candidates:
            break
        i = candidates[int(rng.integers(len(candidates)))]
        trial = body[:i] + body[i + 1:]
        if _anchor_holds(anchor, assemble(trial)):
            body = trial
            prot = {p if p <= i + off else p - 1 for p in prot}
        # else: this deletion would break the anchor; skip it

    # at most one bounded swap, rejected if it violates the anchor
    swap = _choose_swap(len(body), spec.pi, spec.swap_prob, rng)
    if swap is not None:
        m, n = swap
        trial = list(body)
        trial[m - 1], trial[n - 1] = trial[n - 1], trial[m - 1]
        if _anchor_holds(anchor, assemble(trial)):
            body = trial
            remap = {m + off: n + off, n + off: m + off}
            prot = {remap.get(p, p) for p in prot}

    win = None if spec.window is None else (off + 1, off + len(body))
    out = _apply_base(assemble(body), rng, spec, protected=frozenset(prot),
                      window=win)
    return out


def conditional_sample(seq: SequenceInput, anchor, spec: PerturbationSpec,
                       rng=None, n: Optional[int] = None,
                       min_accept: float = 0.02, allow_repair: bool = True) -> list:
    """Samples from the perturbation model restricted to the anchor.

    Every returned sample satisfies all anchor predicates (hard guarantee).
    Raises BudgetExhausted when rejection falls below ``min_accept`` and the
    repair fallback is disabled.
    """
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    if n is None:
        n = spec.sample_budget
    anchor = list(anchor)
    if not anchor:
        return sample(seq, spec.replace(sample_budget=n), rng)
    if not _anchor_holds(anchor, seq):
        raise ValueError("anchor does not hold on the input it conditions")

    # rejection first: probe the acceptance rate on a small unconditional batch
    probe_n = max(64, min(256, 4 * n))
    probe = sample(seq, spec.replace(sample_budget=probe_n), rng)
    hits = featurize_batch(probe, anchor).all(axis=1)
    accepted = [s for s, h in zip(probe, hits) if h]
    rate = max(len(accepted) / probe_n, 1.0 / probe_n)

    if len(accepted) / probe_n >= min_accept:
        out = accepted[:n]
        budget = int(4 * (n / rate)) + probe_n
        spent = probe_n
        while len(out) < n and spent < budget:
            chunk = min(max(int((n - len(out)) / rate) + 16, 64), 8192)
            batch = sample(seq, spec.replace(sample_budget=chunk), rng)
            ok = featurize_batch(batch, anchor).all(axis=1)
            out.extend(s for s, h in zip(batch, ok) if h)
            spent += chunk
        if len(out) >= n:
            return out[:n]

    if not allow_repair:
        raise BudgetExhausted(
            f"anchor acceptance rate ~{len(accepted) / probe_n:.3f} below {min_accept}"
        )

    # constructive repair: pin one witness per predicate
    protected = set()
    for p in anchor:
        w = _witness_positions(p, seq)
        if w is None:
            raise BudgetExhausted("anchor predicate has no witness on the input")
        protected.update(w)

    out = []
    for _ in range(n):
        for _attempt in range(8):
            s = _repair_one(seq, anchor, protected, rng, spec)
            if _anchor_holds(anchor, s):
                out.append(s)
                break
        else:
            raise BudgetExhausted("repair could not produce an anchored sample")
    return out
