"""Batch predicate evaluation backend.

At import time this package picks the compiled Cython kernel when it was
built, otherwise callers fall back to the pure-Python evaluator. Set the
environment variable ``SEQEXPLAIN_NO_EXT=1`` to force the fallback.
"""

import os

try:
    from . import _speedups as _ext
except ImportError:
    _ext = None

if os.environ.get("SEQEXPLAIN_NO_EXT"):
    _ext = None

AVAILABLE = _ext is not None
BACKEND = "compiled" if AVAILABLE else "fallback"


def featurize_tokens(ids, lengths, kind, op1, op2, jd, dd, bound, c1, c2):
    return _ext.featurize_tokens(ids, lengths, kind, op1, op2, jd, dd, bound, c1, c2)


def featurize_values(vals, lengths, kind, op1, op2, jd, dd, bound, c1, c2, tol):
    return _ext.featurize_values(vals, lengths, kind, op1, op2, jd, dd, bound, c1, c2, tol)
