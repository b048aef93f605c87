"""Target models: deterministic toys with known temporal structure, plus a
line-delimited JSON adapter for external child-process models."""

from __future__ import annotations

import json
import shlex
import subprocess
import threading
from dataclasses import dataclass, field
from typing import Optional

from .core import (
    BinaryClassification,
    SequenceInput,
    SequenceModel,
    TOKENS,
    VALUES,
)

POSITIVE_WORDS = frozenset({
    "good", "great", "fine", "excellent", "works", "succeeds", "helps",
    "pleasant", "reliable", "engage", "passes",
})
NEGATIVE_WORDS = frozenset({
    "bad", "awful", "poor", "fails", "breaks", "crashes", "disappoints",
    "unpleasant", "unreliable", "bores", "stalls",
})
NEGATORS = frozenset({"never", "not", "no", "n't", "hardly", "rarely", "without"})


@dataclass(frozen=True)
class ToySentimentModel(SequenceModel):
    """Lexicon sentiment scorer with short-range negation.

    Each sentiment word contributes +1 or -1; the sign flips when a negator
    sits at most ``scope`` positions before it with no other sentiment word
    strictly in between. "never fails" therefore reads positive, while the
    same words far apart read as plain negative.
    """

    positive_lexicon: frozenset = POSITIVE_WORDS
    negative_lexicon: frozenset = NEGATIVE_WORDS
    negators: frozenset = NEGATORS
    scope: int = 3
    task: BinaryClassification = field(default=BinaryClassification(0.0))
    concurrency_safe: bool = True

    def __post_init__(self):
        if self.scope < 1:
            raise ValueError("scope must be >= 1")
        if self.positive_lexicon & self.negative_lexicon:
            raise ValueError("a word cannot be both positive and negative")

    def _sign(self, w) -> int:
        if w in self.positive_lexicon:
            return 1
        if w in self.negative_lexicon:
            return -1
        return 0

    def predict(self, seq: SequenceInput) -> float:
        if seq.kind != TOKENS:
            raise TypeError("sentiment model expects token input")
        toks = seq.features
        sentiment_at = [self._sign(w) != 0 for w in toks]
        score = 0
        for k, w in enumerate(toks):
            s = self._sign(w)
            if s == 0:
                continue
            flip = 1
            for j in range(max(0, k - self.scope), k):
                if toks[j] in self.negators and not any(sentiment_at[j + 1:k]):
                    flip = -1
                    break
            score += s * flip
        return float(score)


@dataclass(frozen=True)
class ToyAnomalyModel(SequenceModel):
    """Flags a spike followed by a drop within a bounded window.

    Output is 1.0 iff some pair j < k has v_j > spike_threshold,
    v_k < drop_threshold and k - j <= window; else 0.0.
    """

    spike_threshold: float = 3.0
    drop_threshold: float = -3.0
    window: int = 20
    task: BinaryClassification = field(default=BinaryClassification(0.5))
    concurrency_safe: bool = True

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")

    def anomaly_span(self, seq: SequenceInput) -> Optional[tuple]:
        """First (j, k) pair triggering the detector, 1-based; None if clean."""
        vs = seq.features
        for j in range(len(vs)):
            if vs[j] <= self.spike_threshold:
                continue
            for k in range(j + 1, min(len(vs), j + self.window + 1)):
                if vs[k] < self.drop_threshold:
                    return (j + 1, k + 1)
        return None

    def predict(self, seq: SequenceInput) -> float:
        if seq.kind != VALUES:
            raise TypeError("anomaly model expects value input")
        return 1.0 if self.anomaly_span(seq) is not None else 0.0


class ModelProtocolError(RuntimeError):
    """External model broke the wire protocol (exit, bad line, or timeout)."""


class ExternalModel(SequenceModel):
    """Black-box model run as a child process speaking line-delimited JSON.

    One request per line on its stdin: ``{"id": n, "input": {"kind": ...,
    "data": [...]}}``; one response per line on its stdout: ``{"id": n,
    "output": x}``. Ids are strictly increasing; responses may come back out
    of order and are re-matched by id.
    """

    concurrency_safe = False

    def __init__(self, command, task=BinaryClassification(0.0), timeout: float = 30.0):
        if isinstance(command, str):
            command = shlex.split(command)
        self.command = list(command)
        self.task = task
        self.timeout = timeout
        self._proc = subprocess.Popen(
            self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            text=True, encoding="utf-8", bufsize=1,
        )
        self._lock = threading.Lock()
        self._cond = threading.Condition(self._lock)
        self._next_id = 1
        self._results = {}
        self._error: Optional[ModelProtocolError] = None
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    # -- reader thread ----------------------------------------------------

    def _fail(self, exc: ModelProtocolError):
        with self._cond:
            if self._error is None:
                self._error = exc
            self._cond.notify_all()

    def _read_loop(self):
        stdout = self._proc.stdout
        while True:
            line = stdout.readline()
            if not line:
                self._fail(ModelProtocolError(
                    f"model process exited (code {self._proc.poll()})"))
                return
            try:
                msg = json.loads(line)
                rid = msg["id"]
                out = float(msg["output"])
            except (ValueError, TypeError, KeyError) as e:
                self._fail(ModelProtocolError(f"malformed response {line!r}: {e}"))
                return
            with self._cond:
                self._results[rid] = out
                self._cond.notify_all()

    # -- request/response -------------------------------------------------

    def _send(self, seq: SequenceInput) -> int:
        data = list(seq.features) if seq.kind == TOKENS else [float(v) for v in seq.features]
        with self._cond:
            if self._error is not None:
                raise self._error
            rid = self._next_id
            self._next_id += 1
        req = {"id": rid, "input": {"kind": seq.kind, "data": data}}
        try:
            self._proc.stdin.write(json.dumps(req) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise ModelProtocolError(f"model process exited: {e}") from e
        return rid

    def _wait(self, rid: int) -> float:
        with self._cond:
            ok = self._cond.wait_for(
                lambda: rid in self._results or self._error is not None,
                timeout=self.timeout,
            )
            if rid in self._results:
                return self._results.pop(rid)
            if self._error is not None:
                raise self._error
            if not ok:
                raise ModelProtocolError(
                    f"timeout after {self.timeout}s waiting for response id {rid}")
            raise ModelProtocolError("no response")  # unreachable

    def predict(self, seq: SequenceInput) -> float:
        out = self._wait(self._send(seq))
        if not _finite(out):
            raise ModelProtocolError(f"non-finite model output {out!r}")
        return out

    def predict_batch(self, seqs) -> list:
        # Pipelined: write every request, then collect; the reader thread
        # re-matches out-of-order responses by id.
        ids = [self._send(s) for s in seqs]
        outs = [self._wait(i) for i in ids]
        for out in outs:
            if not _finite(out):
                raise ModelProtocolError(f"non-finite model output {out!r}")
        return outs

    # -- lifecycle --------------------------------------------------------

    def close(self):
        proc = self._proc
        if proc.poll() is None:
            try:
                proc.stdin.close()
            except OSError:
                pass
            try:
                proc.wait(timeout=2.0)
            except subprocess.TimeoutExpired:
                proc.terminate()
                try:
                    proc.wait(timeout=2.0)
                except subprocess.TimeoutExpired:
                    proc.kill()
                    proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def _finite(x: float) -> bool:
    return x == x and abs(x) != float("inf")
