"""Explanation vocabulary: positional and temporal predicates over sequences.

A positional predicate constrains the feature at one fixed position. The
temporal predicates existentially quantify positions instead, so they stay
meaningful on perturbed inputs whose lengths differ from the original:

* 1-D: some position j has ``f_j op c`` and j is >= d (or <= d).
* 2-D: positions j, k (j != k) have ``f_j op1 c1``, ``f_k op2 c2`` and
  ``k - j >= d``. With d = -1 an adjacent pair matches in either order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Union

import numpy as np

from .core import SequenceInput, TOKENS, VALUES
from . import kernels

EQ = "eq"
GT = "gt"
LT = "lt"
OPS = (EQ, GT, LT)

AT_LEAST = "atleast"
AT_MOST = "atmost"

CLASSIC = "classic"
TEMPORAL = "temporal"

# Half-width used for equality on real values when a predicate carries no
# explicit tolerance; exact float equality is useless after Gaussian noise.
DEFAULT_EQ_TOL = 0.5


class PredicateTypeError(TypeError):
    """Predicate constant kind does not match the sequence kind."""


def _check_const(op, c):
    if isinstance(c, str):
        if op != EQ:
            raise ValueError("token constants only support the eq operator")
    elif not isinstance(c, float):
        raise TypeError(f"predicate constant must be str or float, got {type(c).__name__}")
    if op not in OPS:
        raise ValueError(f"unknown operator {op!r}")


@dataclass(frozen=True)
class Positional:
    """``f_j op c`` at the fixed 1-based position j; false when j > length."""

    j: int
    op: str
    c: Union[str, float]
    tol: Optional[float] = None

    def __post_init__(self):
        if self.j < 1:
            raise ValueError("position must be >= 1")
        _check_const(self.op, self.c)


@dataclass(frozen=True)
class Temporal1D:
    """``exists j. f_j op c  and  j >= d`` (or ``j <= d`` with the atmost bound)."""

    op: str
    c: Union[str, float]
    d: int = 1
    bound: str = AT_LEAST
    tol: Optional[float] = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("1-D temporal distance d must be a positive integer")
        if self.bound not in (AT_LEAST, AT_MOST):
            raise ValueError(f"unknown bound {self.bound!r}")
        _check_const(self.op, self.c)


@dataclass(frozen=True)
class Temporal2D:
    """``exists j != k. f_j op1 c1  and  f_k op2 c2  and  k - j >= d``."""

    op1: str
    c1: Union[str, float]
    op2: str
    c2: Union[str, float]
    d: int = 1
    tol: Optional[float] = None

    def __post_init__(self):
        if self.d < -1:
            raise ValueError("2-D temporal distance d must be >= -1")
        _check_const(self.op1, self.c1)
        _check_const(self.op2, self.c2)


Predicate = Union[Positional, Temporal1D, Temporal2D]


def predicate_constants(p: Predicate):
    if isinstance(p, Temporal2D):
        return (p.c1, p.c2)
    return (p.c,)


def _check_kind(p: Predicate, kind: str):
    for c in predicate_constants(p):
        if isinstance(c, str) != (kind == TOKENS):
            raise PredicateTypeError(
                f"{type(p).__name__} constant {c!r} cannot be evaluated on a {kind} sequence"
            )


def _cmp(feature, op, c, tol) -> bool:
    if isinstance(c, str):
        return feature == c  # token constants are eq-only by construction
    if op == EQ:
        return abs(feature - c) <= (DEFAULT_EQ_TOL if tol is None else tol)
    if op == GT:
        return feature > c
    return feature < c


def eval_predicate(p: Predicate, seq: SequenceInput) -> bool:
    """Evaluate one predicate on one sequence (1-based positions)."""
    _check_kind(p, seq.kind)
    fs = seq.features
    n = len(fs)
    if isinstance(p, Positional):
        return p.j <= n and _cmp(fs[p.j - 1], p.op, p.c, p.tol)
    if isinstance(p, Temporal1D):
        positions = range(p.d, n + 1) if p.bound == AT_LEAST else range(1, min(p.d, n) + 1)
        return any(_cmp(fs[j - 1], p.op, p.c, p.tol) for j in positions)
    for j in range(1, n + 1):
        if not _cmp(fs[j - 1], p.op1, p.c1, p.tol):
            continue
        for k in range(max(1, j + p.d), n + 1):
            if k != j and _cmp(fs[k - 1], p.op2, p.c2, p.tol):
                return True
    return False


def sort_key(p: Predicate):
    """Deterministic total order over predicates, used for tie-breaking."""

    def ckey(c):
        return (0, c) if isinstance(c, str) else (1, repr(c))

    if isinstance(p, Positional):
        return (0, p.j, OPS.index(p.op), ckey(p.c))
    if isinstance(p, Temporal1D):
        return (1, ckey(p.c), OPS.index(p.op), 0 if p.bound == AT_LEAST else 1, p.d)
    return (2, ckey(p.c1), OPS.index(p.op1), ckey(p.c2), OPS.index(p.op2), p.d)


@dataclass(frozen=True)
class Vocabulary:
    """Ordered, duplicate-free predicate list an explanation is built from."""

    predicates: tuple
    mode: str

    def __post_init__(self):
        if self.mode not in (CLASSIC, TEMPORAL):
            raise ValueError(f"unknown vocabulary mode {self.mode!r}")
        if len(set(self.predicates)) != len(self.predicates):
            raise ValueError("vocabulary contains duplicate predicates")
        for p in self.predicates:
            if self.mode == CLASSIC and not isinstance(p, Positional):
                raise ValueError("classic vocabulary admits positional predicates only")
            if self.mode == TEMPORAL and isinstance(p, Positional):
                raise ValueError("temporal vocabulary admits temporal predicates only")

    def __len__(self):
        return len(self.predicates)

    def __iter__(self):
        return iter(self.predicates)

    def __getitem__(self, i):
        return self.predicates[i]


@dataclass(frozen=True)
class VocabConfig:
    """Enumeration knobs.

    eq_tol: half-width for value equality (classic mode on real sequences).
    value_band: offset of the >, < thresholds enumerated around observed values.
    window: optional 1-based inclusive (start, end) position range; predicates
        are only built from features inside it.
    """

    eq_tol: float = DEFAULT_EQ_TOL
    value_band: float = 1.0
    include_1d: bool = True
    window: Optional[tuple] = None


def _window_positions(n: int, config: VocabConfig):
    if config.window is None:
        return range(1, n + 1)
    lo, hi = config.window
    return range(max(1, lo), min(n, hi) + 1)


def enumerate_vocabulary(seq: SequenceInput, mode: str = TEMPORAL,
                         config: Optional[VocabConfig] = None) -> Vocabulary:
    """Build the predicate vocabulary for one input.

    Classic mode emits one equality predicate per position. Temporal mode
    emits presence predicates per distinct feature plus ordered-pair 2-D
    predicates at d in {-1, 1, observed gap}, deduplicated.
    """
    if len(seq) == 0:
        raise ValueError("cannot enumerate a vocabulary for an empty input")
    config = config or VocabConfig()
    positions = list(_window_positions(len(seq), config))
    tokens = seq.kind == TOKENS

    if mode == CLASSIC:
        preds = [
            Positional(j, EQ, seq.feature_at(j), tol=None if tokens else config.eq_tol)
            for j in positions
        ]
        return Vocabulary(tuple(preds), CLASSIC)

    if mode != TEMPORAL:
        raise ValueError(f"unknown vocabulary mode {mode!r}")

    preds = []
    seen = set()

    def add(p):
        if p not in seen:
            seen.add(p)
            preds.append(p)

    def unary(v):
        # Value conditions a feature can contribute: equality for tokens,
        # banded thresholds for reals.
        if tokens:
            return [(EQ, v)]
        return [(GT, v - config.value_band), (LT, v + config.value_band)]

    if config.include_1d:
        for j in positions:
            for op, c in unary(seq.feature_at(j)):
                add(Temporal1D(op, c, d=1, bound=AT_LEAST))

    for a, j in enumerate(positions):
        for k in positions[a + 1:]:
            vj, vk = seq.feature_at(j), seq.feature_at(k)
            if vj == vk:
                continue
            if tokens:
                combos = [((EQ, vj), (EQ, vk))]
            else:
                combos = [
                    ((GT, vj - config.value_band), (LT, vk + config.value_band)),
                    ((LT, vj + config.value_band), (GT, vk - config.value_band)),
                ]
            for (op1, c1), (op2, c2) in combos:
                for d in {-1, 1, k - j}:
                    add(Temporal2D(op1, c1, op2, c2, d=d))

    return Vocabulary(tuple(preds), TEMPORAL)


def featurize(seq: SequenceInput, predicates) -> np.ndarray:
    """Bit-vector of one sequence against a predicate list/vocabulary."""
    return featurize_batch([seq], predicates)[0]


def featurize_batch(seqs, predicates, backend: Optional[str] = None) -> np.ndarray:
    """(n_sequences, n_predicates) uint8 matrix of predicate truth values.

    Uses the compiled kernel when it is available; ``backend`` forces "py"
    (pure-Python fallback) or "ext" (compiled, raising if absent).
    """
    preds = list(predicates)
    seqs = list(seqs)
    if not seqs or not preds:
        return np.zeros((len(seqs), len(preds)), dtype=np.uint8)

    kind = seqs[0].kind
    for s in seqs:
        if s.kind != kind:
            raise ValueError("featurize_batch requires sequences of one kind")
    for p in preds:
        _check_kind(p, kind)

    if backend is None:
        backend = "ext" if kernels.AVAILABLE else "py"
    if backend == "py":
        return np.array(
            [[eval_predicate(p, s) for p in preds] for s in seqs], dtype=np.uint8
        )
    if backend != "ext":
        raise ValueError(f"unknown backend {backend!r}")
    if not kernels.AVAILABLE:
        raise RuntimeError("compiled kernel requested but not built")
    return _featurize_compiled(seqs, preds, kind)


_KIND_CODE = {Positional: 0, Temporal1D: 1, Temporal2D: 2}
_OP_CODE = {EQ: 0, GT: 1, LT: 2}


def _featurize_compiled(seqs, preds, kind) -> np.ndarray:
    n = len(seqs)
    m = len(preds)
    lengths = np.array([len(s) for s in seqs], dtype=np.int32)
    maxlen = int(lengths.max(initial=0))

    kcode = np.empty(m, dtype=np.int8)
    op1 = np.zeros(m, dtype=np.int8)
    op2 = np.zeros(m, dtype=np.int8)
    jd = np.zeros(m, dtype=np.int32)   # positional j, unused otherwise
    dd = np.zeros(m, dtype=np.int32)   # temporal distance d
    bound = np.zeros(m, dtype=np.int8)  # 0 atleast, 1 atmost
    tol = np.full(m, DEFAULT_EQ_TOL, dtype=np.float64)

    for i, p in enumerate(preds):
        kcode[i] = _KIND_CODE[type(p)]
        if isinstance(p, Positional):
            jd[i] = p.j
            op1[i] = _OP_CODE[p.op]
        elif isinstance(p, Temporal1D):
            dd[i] = p.d
            bound[i] = 0 if p.bound == AT_LEAST else 1
            op1[i] = _OP_CODE[p.op]
        else:
            dd[i] = p.d
            op1[i] = _OP_CODE[p.op1]
            op2[i] = _OP_CODE[p.op2]
        if getattr(p, "tol", None) is not None:
            tol[i] = p.tol

    if kind == TOKENS:
        symtab = {}
        for s in seqs:
            for t in s.features:
                symtab.setdefault(t, len(symtab))
        ids = np.full((n, max(maxlen, 1)), -9, dtype=np.int32)
        for r, s in enumerate(seqs):
            for c, t in enumerate(s.features):
                ids[r, c] = symtab[t]

        def const_id(c):
            return symtab.get(c, -1)

        c1 = np.empty(m, dtype=np.int32)
        c2 = np.zeros(m, dtype=np.int32)
        for i, p in enumerate(preds):
            consts = predicate_constants(p)
            c1[i] = const_id(consts[0])
            if len(consts) > 1:
                c2[i] = const_id(consts[1])
        return kernels.featurize_tokens(ids, lengths, kcode, op1, op2, jd, dd, bound, c1, c2)

    vals = np.zeros((n, max(maxlen, 1)), dtype=np.float64)
    for r, s in enumerate(seqs):
        vals[r, : len(s)] = s.features
    c1 = np.empty(m, dtype=np.float64)
    c2 = np.zeros(m, dtype=np.float64)
    for i, p in enumerate(preds):
        consts = predicate_constants(p)
        c1[i] = consts[0]
        if len(consts) > 1:
            c2[i] = consts[1]
    return kernels.featurize_values(vals, lengths, kcode, op1, op2, jd, dd, bound, c1, c2, tol)


# --- JSON schema -----------------------------------------------------------
# Field names (and their order, for canonical output) are part of the CLI
# contract: {"kind":"t2d","c1":...,"op1":...,"c2":...,"op2":...,"d":...}.

def predicate_to_json(p: Predicate) -> dict:
    if isinstance(p, Positional):
        out = {"kind": "pos", "j": p.j, "op": p.op, "c": p.c}
    elif isinstance(p, Temporal1D):
        out = {"kind": "t1d", "c": p.c, "op": p.op, "bound": p.bound, "d": p.d}
    else:
        out = {"kind": "t2d", "c1": p.c1, "op1": p.op1, "c2": p.c2, "op2": p.op2, "d": p.d}
    if getattr(p, "tol", None) is not None:
        out["tol"] = p.tol
    return out


def predicate_from_json(obj: dict) -> Predicate:
    kind = obj.get("kind")
    tol = obj.get("tol")
    if kind == "pos":
        return Positional(obj["j"], obj["op"], obj["c"], tol=tol)
    if kind == "t1d":
        return Temporal1D(obj["op"], obj["c"], d=obj["d"], bound=obj.get("bound", AT_LEAST), tol=tol)
    if kind == "t2d":
        return Temporal2D(obj["op1"], obj["c1"], obj["op2"], obj["c2"], d=obj["d"], tol=tol)
    raise ValueError(f"unknown predicate kind {kind!r}")
