"""Local explanations for sequence models with temporal structure.

Provides positional and temporal predicates, a length-varying perturbation
model, anchor and sparse-linear explainers built on top of it, toy target
models, and a simulated-user evaluation harness.
"""

from .core import (
    AnchorExplanation,
    BinaryClassification,
    Decision,
    Label,
    LinearExplanation,
    Regression,
    SequenceInput,
    SequenceModel,
    TOKENS,
    VALUES,
    label,
)
from .predicates import (
    Positional,
    Temporal1D,
    Temporal2D,
    Vocabulary,
    VocabConfig,
    enumerate_vocabulary,
    eval_predicate,
    featurize,
    featurize_batch,
    predicate_from_json,
    predicate_to_json,
)
from .perturb import (
    BudgetExhausted,
    GaussianJitter,
    PerturbationSpec,
    TextSubstitution,
    UNK,
    conditional_sample,
    load_lexicon,
    sample,
)
from .models import (
    ExternalModel,
    ModelProtocolError,
    ToyAnomalyModel,
    ToySentimentModel,
)
from .anchors import (
    AnchorConfig,
    anchor_decide,
    anchor_from_json,
    anchor_to_json,
    estimate_precision,
    explain_anchors,
)
from .lime import (
    LimeConfig,
    explain_lime,
    lime_decide,
    lime_value,
    linear_from_json,
    linear_to_json,
)
from .evaluate import (
    EvalConfig,
    EvalReport,
    Method,
    evaluate_explanation,
    generate_explanation,
    run_benchmark,
)

__version__ = "0.1.0"

__all__ = [
    "AnchorExplanation", "BinaryClassification", "Decision", "Label",
    "LinearExplanation", "Regression", "SequenceInput", "SequenceModel",
    "TOKENS", "VALUES", "label",
    "Positional", "Temporal1D", "Temporal2D", "Vocabulary", "VocabConfig",
    "enumerate_vocabulary", "eval_predicate", "featurize", "featurize_batch",
    "predicate_from_json", "predicate_to_json",
    "BudgetExhausted", "GaussianJitter", "PerturbationSpec",
    "TextSubstitution", "UNK", "conditional_sample", "load_lexicon", "sample",
    "ExternalModel", "ModelProtocolError", "ToyAnomalyModel",
    "ToySentimentModel",
    "AnchorConfig", "anchor_decide", "anchor_from_json", "anchor_to_json",
    "estimate_precision", "explain_anchors",
    "LimeConfig", "explain_lime", "lime_decide", "lime_value",
    "linear_from_json", "linear_to_json",
    "EvalConfig", "EvalReport", "Method", "evaluate_explanation",
    "generate_explanation", "run_benchmark",
    "__version__",
]
