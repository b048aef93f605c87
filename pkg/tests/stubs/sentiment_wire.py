"""Independent transcription of the negation-scoped sentiment score.

Written directly from the definition, as a set comprehension over index
pairs, to cross-check the in-package implementation over the wire.
"""
import json
import sys

POS = {"good", "great", "fine", "excellent", "works", "succeeds", "helps",
       "pleasant", "reliable", "engage", "passes"}
NEG = {"bad", "awful", "poor", "fails", "breaks", "crashes", "disappoints",
       "unpleasant", "unreliable", "bores", "stalls"}
NEGATORS = {"never", "not", "no", "n't", "hardly", "rarely", "without"}
SCOPE = 3


def score(toks):
    sentiment = {k for k, w in enumerate(toks) if w in POS or w in NEG}
    total = 0.0
    for k in sentiment:
        base = 1.0 if toks[k] in POS else -1.0
        flipped = any(
            toks[j] in NEGATORS
            and k - SCOPE <= j < k
            and not (sentiment & set(range(j + 1, k)))
            for j in range(len(toks))
        )
        total += -base if flipped else base
    return total


for line in sys.stdin:
    msg = json.loads(line)
    out = score(msg["input"]["data"])
    print(json.dumps({"id": msg["id"], "output": out}), flush=True)
