"""Command-line surface: explain single inputs, run benchmarks, inspect
perturbation samples, and probe external models."""

from __future__ import annotations

import argparse
import json
import re
import sys

from .anchors import AnchorConfig, anchor_to_json
from .core import (
    AnchorExplanation,
    BinaryClassification,
    LinearExplanation,
    SequenceInput,
    TOKENS,
    VALUES,
    label,
)
from .evaluate import (
    EvalConfig,
    Method,
    auto_window,
    generate_explanation,
    report_to_csv,
    report_to_json,
    run_benchmark,
)
from .lime import LimeConfig, lime_decide, linear_to_json
from .models import ExternalModel, ModelProtocolError, ToyAnomalyModel, ToySentimentModel
from .perturb import (
    GaussianJitter,
    PerturbationSpec,
    TextSubstitution,
    load_lexicon,
    sample_with_info,
)
from .predicates import AT_LEAST, Positional, Temporal1D, Temporal2D

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PROTOCOL = 3

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


def tokenize(text: str) -> list:
    """Lowercased whitespace split with punctuation detached as own tokens."""
    return _TOKEN_RE.findall(text.lower())


def parse_input(raw: str, kind: str) -> SequenceInput:
    """Build a sequence from a CLI argument; kind 'auto' sniffs numbers."""
    if kind == "auto":
        parts = raw.replace(",", " ").split()
        try:
            values = [float(p) for p in parts]
            return SequenceInput.of_values(values)
        except ValueError:
            kind = TOKENS
    if kind == VALUES:
        return SequenceInput.of_values(
            [float(p) for p in raw.replace(",", " ").split()])
    return SequenceInput.of_tokens(tokenize(raw))


def read_input_arg(arg: str) -> str:
    if arg == "-":
        return sys.stdin.read().strip()
    if arg.startswith("@"):
        with open(arg[1:], encoding="utf-8") as fh:
            return fh.read().strip()
    return arg


# --- rendering -------------------------------------------------------------

def _cond_name(op, c) -> str:
    if isinstance(c, str):
        return c
    sym = {"eq": "≈", "gt": ">", "lt": "<"}[op]
    return f"({sym}{c:g})"


def render_predicate(p) -> str:
    if isinstance(p, Positional):
        if isinstance(p.c, str):
            return f"f{p.j} = {p.c}"
        sym = {"eq": "≈", "gt": ">", "lt": "<"}[p.op]
        return f"f{p.j} {sym} {p.c:g}"
    if isinstance(p, Temporal1D):
        sym = "≥" if p.bound == AT_LEAST else "≤"
        return f"Pos_{_cond_name(p.op, p.c)} {sym} {p.d}"
    if isinstance(p, Temporal2D):
        a = _cond_name(p.op1, p.c1)
        b = _cond_name(p.op2, p.c2)
        return f"Pos_{b} − Pos_{a} ≥ {p.d}"
    raise TypeError(f"unknown predicate type {type(p).__name__}")


def render_anchor(expl: AnchorExplanation) -> str:
    names = []
    for p in expl.predicates:
        if isinstance(p, Positional):
            names.append(_cond_name(p.op, p.c))
        elif isinstance(p, Temporal1D):
            names.append(_cond_name(p.op, p.c))
        else:
            names.append(_cond_name(p.op1, p.c1))
            names.append(_cond_name(p.op2, p.c2))
    seen = set()
    names = [n for n in names if not (n in seen or seen.add(n))]
    parts = ["{" + ", ".join(names) + "}"]
    parts.extend(render_predicate(p) for p in expl.predicates)
    rule = " ∧ ".join(parts) if expl.predicates else "{}"
    suffix = " (low precision)" if expl.low_precision else ""
    return f"{rule} ⇒ {expl.target_label}{suffix}"


def render_linear(expl: LinearExplanation) -> list:
    lines = []
    for p, w in expl.terms:
        lines.append(f"  {w:+.4f}  {render_predicate(p)}")
    lines.append(f"  {expl.intercept:+.4f}  intercept")
    if expl.degenerate:
        lines.append("  (degenerate: samples showed no predicate variation)")
    return lines


# --- argument plumbing -----------------------------------------------------

def _add_spec_flags(ap: argparse.ArgumentParser):
    ap.add_argument("--pi", type=int, default=1,
                    help="max swap distance (0 disables swaps)")
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--delete-prob", type=float, default=0.35)
    ap.add_argument("--swap-prob", type=float, default=0.5)
    ap.add_argument("--max-deletions", type=int, default=None)
    ap.add_argument("--replace-prob", type=float, default=0.3,
                    help="per-token substitution probability (token inputs)")
    ap.add_argument("--sd", type=float, default=1.0,
                    help="jitter standard deviation (value inputs)")
    ap.add_argument("--lexicon", default=None,
                    help="substitution lexicon file (word<TAB>alt1,alt2,...)")
    ap.add_argument("--window", default=None,
                    help="'lo:hi' 1-based inclusive, or 'auto' to center on "
                         "the model's flagged span")


def _add_method_flags(ap: argparse.ArgumentParser):
    ap.add_argument("--tau", type=float, default=0.95,
                    help="anchor precision target")
    ap.add_argument("--delta", type=float, default=0.1,
                    help="anchor confidence parameter")
    ap.add_argument("--kernel-width", type=float, default=None)
    ap.add_argument("--ridge", type=float, default=1.0)
    ap.add_argument("--threshold", type=float, default=None,
                    help="surrogate coverage threshold "
                         "(default 0.1 tokens / 0.05 values)")
    ap.add_argument("--samples", type=int, default=None,
                    help="sample budget (explain: fit samples; bench: "
                         "evaluation samples per input)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="seqexplain",
        description="Local explanations for sequence models, with temporal "
                    "predicates and a length-varying perturbation model.")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    ex = sub.add_parser("explain", help="explain one input")
    ex.add_argument("--model", required=True,
                    help="toy-sentiment | toy-anomaly | external:<command>")
    ex.add_argument("--method", default="anchors-t",
                    choices=[m.value for m in Method])
    ex.add_argument("--output", default="text", choices=["text", "json"])
    ex.add_argument("--kind", default="auto", choices=["auto", TOKENS, VALUES])
    ex.add_argument("--model-threshold", type=float, default=0.0,
                    help="classification threshold for external models")
    _add_spec_flags(ex)
    _add_method_flags(ex)
    ex.add_argument("input", help="input text/values, @file, or - for stdin")

    be = sub.add_parser("bench", help="coverage/precision benchmark over a dataset")
    be.add_argument("--model", required=True)
    be.add_argument("--methods", default=",".join(m.value for m in Method),
                    help="comma-separated subset of "
                         + ",".join(m.value for m in Method))
    be.add_argument("--dataset", required=True,
                    help="text: label<TAB>sentence per line; "
                         "series: CSV label,v1,v2,...")
    be.add_argument("--output", default="csv", choices=["csv", "json"])
    be.add_argument("--model-threshold", type=float, default=0.0)
    _add_spec_flags(be)
    _add_method_flags(be)

    pe = sub.add_parser("perturb", help="print perturbation samples")
    pe.add_argument("--kind", default="auto", choices=["auto", TOKENS, VALUES])
    _add_spec_flags(pe)
    pe.add_argument("--samples", type=int, default=10)
    pe.add_argument("input")

    ck = sub.add_parser("check-model", help="probe an external model's protocol")
    ck.add_argument("--model", required=True, help="external:<command>")
    ck.add_argument("--kind", default=TOKENS, choices=[TOKENS, VALUES])
    ck.add_argument("--timeout", type=float, default=30.0)
    return ap


def _parse_window(raw, model, seq):
    if raw is None:
        return None
    if raw == "auto":
        return auto_window(model, seq)
    try:
        lo, hi = raw.split(":")
        return (int(lo), int(hi))
    except ValueError:
        raise ValueError(f"window must be 'lo:hi' or 'auto', got {raw!r}")


def make_model(spec: str, threshold: float = 0.0, timeout: float = 30.0):
    if spec == "toy-sentiment":
        return ToySentimentModel()
    if spec == "toy-anomaly":
        return ToyAnomalyModel()
    if spec.startswith("external:"):
        return ExternalModel(spec[len("external:"):],
                             task=BinaryClassification(threshold),
                             timeout=timeout)
    raise ValueError(f"unknown model {spec!r}")


def make_perturbation(args, seq: SequenceInput) -> PerturbationSpec:
    if seq.kind == TOKENS:
        if args.lexicon:
            lex = load_lexicon(args.lexicon)
        else:
            from .data import default_lexicon
            lex = default_lexicon()
        base = TextSubstitution(lex, replace_prob=args.replace_prob)
    else:
        base = GaussianJitter(sd=args.sd)
    return PerturbationSpec(
        base=base, pi=args.pi, max_deletions=args.max_deletions,
        delete_prob=args.delete_prob, swap_prob=args.swap_prob,
        seed=args.seed,
    )


def _eval_config(args, n_samples=None) -> EvalConfig:
    kw = {}
    if n_samples is not None:
        kw["n_samples"] = n_samples
    return EvalConfig(
        anchor=AnchorConfig(precision_target=args.tau, confidence=args.delta),
        lime=LimeConfig(kernel_width=args.kernel_width, ridge=args.ridge,
                        coverage_threshold=args.threshold),
        **kw,
    )


# --- subcommands -----------------------------------------------------------

def cmd_explain(args) -> int:
    model = make_model(args.model, args.model_threshold)
    try:
        seq = parse_input(read_input_arg(args.input), args.kind)
        spec = make_perturbation(args, seq)
        spec = spec.replace(window=_parse_window(args.window, model, seq))
        if args.samples:
            spec = spec.replace(sample_budget=args.samples)
        method = Method(args.method)
        config = _eval_config(args)
        expl = generate_explanation(method, model, seq, spec, config)

        if args.output == "json":
            obj = anchor_to_json(expl) if isinstance(expl, AnchorExplanation) \
                else linear_to_json(expl)
            print(json.dumps(obj, indent=2))
            return EXIT_OK

        print(f"input: {seq}")
        print(f"label: {label(model, seq)}")
        if isinstance(expl, AnchorExplanation):
            print(f"anchor: {render_anchor(expl)}")
            print(f"precision_lcb: {expl.precision_lcb:.4f}")
            print(f"coverage: {expl.coverage:.4f}")
        else:
            thr = args.threshold
            if thr is None:
                thr = LimeConfig().threshold_for(seq)
            print(f"surrogate (threshold {thr:g}):")
            for line in render_linear(expl):
                print(line)
            d = lime_decide(expl, seq, thr)
            verdict = f"Covered({d.prediction})" if d.covered else "NotCovered"
            print(f"value: {d.value:+.4f} ⇒ {verdict}")
        return EXIT_OK
    finally:
        if isinstance(model, ExternalModel):
            model.close()


def load_dataset(path):
    """(id, SequenceInput) rows; tab-separated text or CSV value series."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for i, raw in enumerate(fh):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            if "\t" in line:
                _, text = line.split("\t", 1)
                seq = SequenceInput.of_tokens(tokenize(text))
            else:
                cells = line.split(",")
                seq = SequenceInput.of_values([float(c) for c in cells[1:]])
            rows.append((f"i{i + 1:03d}", seq))
    return rows


def cmd_bench(args) -> int:
    try:
        dataset = load_dataset(args.dataset)
    except (OSError, ValueError) as e:
        print(f"error: cannot read dataset: {e}", file=sys.stderr)
        return EXIT_USAGE
    if not dataset:
        print("error: dataset is empty", file=sys.stderr)
        return EXIT_USAGE
    try:
        methods = [Method(m) for m in args.methods.split(",") if m]
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    model = make_model(args.model, args.model_threshold)
    try:
        seq0 = dataset[0][1]
        spec = make_perturbation(args, seq0)
        config = _eval_config(args, n_samples=args.samples or 10_000)
        window = args.window
        if window not in (None, "auto"):
            spec = spec.replace(window=_parse_window(window, model, seq0))
            window = None
        report = run_benchmark(dataset, model, methods, spec, config,
                               window="auto" if window == "auto" else None)
        # the CLI is always seeded, so its output must be run-to-run stable;
        # wall-clock timings would break that
        if args.output == "json":
            print(report_to_json(report, deterministic_seconds=True))
        else:
            print(report_to_csv(report, deterministic_seconds=True), end="")
        return EXIT_OK
    finally:
        if isinstance(model, ExternalModel):
            model.close()


def cmd_perturb(args) -> int:
    seq = parse_input(read_input_arg(args.input), args.kind)
    spec = make_perturbation(args, seq)
    if args.window:
        lo, hi = args.window.split(":")
        spec = spec.replace(window=(int(lo), int(hi)))
    spec = spec.replace(sample_budget=args.samples)
    for out, info in sample_with_info(seq, spec):
        dels = ",".join(str(d) for d in info.deleted) or "none"
        swap = f"{info.swap[0]},{info.swap[1]}" if info.swap else "none"
        print(f"{out}\t(deleted={dels} swap={swap})")
    return EXIT_OK


def cmd_check_model(args) -> int:
    if not args.model.startswith("external:"):
        print("error: check-model needs an external:<command> model",
              file=sys.stderr)
        return EXIT_USAGE
    if args.kind == TOKENS:
        probes = [
            SequenceInput.of_tokens(["hello"]),
            SequenceInput.of_tokens("he never fails in any exam .".split()),
            SequenceInput.of_tokens([]),
        ]
    else:
        probes = [
            SequenceInput.of_values([0.0, 1.0, -1.0]),
            SequenceInput.of_values([5.0, 0.0, -5.0, 0.0]),
        ]
    model = make_model(args.model, timeout=args.timeout)
    try:
        outs = model.predict_batch(probes)
        for seq, out in zip(probes, outs):
            print(f"{seq!s:<40} -> {out:g}")
        print(f"ok: {len(probes)} probes answered")
        return EXIT_OK
    finally:
        model.close()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "explain": cmd_explain,
        "bench": cmd_bench,
        "perturb": cmd_perturb,
        "check-model": cmd_check_model,
    }
    try:
        return handlers[args.subcommand](args)
    except ModelProtocolError as e:
        print(f"model protocol error: {e}", file=sys.stderr)
        return EXIT_PROTOCOL
    except (ValueError, TypeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
