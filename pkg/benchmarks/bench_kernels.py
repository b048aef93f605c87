"""Timing comparison of the compiled and pure-Python featurization paths.

Run as: python benchmarks/bench_kernels.py [--samples N]
"""

import argparse
import time

import numpy as np

from seqexplain import (
    PerturbationSpec,
    SequenceInput,
    TextSubstitution,
    GaussianJitter,
    enumerate_vocabulary,
    sample,
)
from seqexplain.kernels import AVAILABLE, BACKEND
from seqexplain.predicates import featurize_batch


def bench(name, seqs, predicates):
    rows = []
    for backend in ("py", "ext") if AVAILABLE else ("py",):
        t0 = time.perf_counter()
        out = featurize_batch(seqs, predicates, backend=backend)
        dt = time.perf_counter() - t0
        rows.append((backend, dt, out))
    if len(rows) == 2 and not np.array_equal(rows[0][2], rows[1][2]):
        raise AssertionError(f"{name}: backends disagree")
    base = rows[0][1]
    for backend, dt, out in rows:
        speedup = base / dt if dt else float("inf")
        print(f"  {name:28s} {backend:4s} {dt * 1000:9.1f} ms"
              f"  ({out.shape[0]}x{out.shape[1]} bits, {speedup:5.1f}x vs py)")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--samples", type=int, default=5000)
    args = ap.parse_args()
    print(f"active backend: {BACKEND} (compiled available: {AVAILABLE})")

    rng = np.random.default_rng(0)

    tok = SequenceInput.of_tokens(
        "the committee met again this week and the new plan finally works .".split())
    lex = {w: ("x", "y") for w in tok.features}
    tspec = PerturbationSpec(base=TextSubstitution(lex), seed=1,
                             sample_budget=args.samples)
    tsamples = sample(tok, tspec)
    tvocab = enumerate_vocabulary(tok)
    print(f"token workload: {args.samples} samples, {len(tvocab.predicates)} predicates")
    bench("token featurize", tsamples, list(tvocab.predicates))

    val = SequenceInput.of_values(np.round(rng.normal(0, 1, 30), 2).tolist())
    vspec = PerturbationSpec(base=GaussianJitter(), seed=2,
                             sample_budget=args.samples)
    vsamples = sample(val, vspec)
    vvocab = enumerate_vocabulary(val)
    print(f"value workload: {args.samples} samples, {len(vvocab.predicates)} predicates")
    bench("value featurize", vsamples, list(vvocab.predicates))


if __name__ == "__main__":
    main()
