"""Non-function-calling baseline: NL to SQL via examples and schema knowledge."""

from .identifiers import (
    SqlParseError,
    apply_renames,
    extract_identifiers,
    levenshtein,
    scan_sql,
    tokenize,
)
from .pipeline import (
    DraftOrigin,
    DraftRejected,
    EntityKind,
    FixKind,
    IntentRecord,
    Nl2SqlPipeline,
    NL2SQL_PROMPT,
    PipelineFailure,
    PipelineOutcome,
    SchemaCatalog,
    SqlDraft,
    ValidationFix,
    decide_and_draft,
    extract_intent,
    generate_answer,
    intent_from_arguments,
    validate_draft,
)
from .retrieval import (
    ExampleEntry,
    jaccard,
    load_examples_file,
    normalize_tokens,
    retrieve_examples,
)

__all__ = [
    "DraftOrigin",
    "DraftRejected",
    "EntityKind",
    "ExampleEntry",
    "FixKind",
    "IntentRecord",
    "NL2SQL_PROMPT",
    "Nl2SqlPipeline",
    "PipelineFailure",
    "PipelineOutcome",
    "SchemaCatalog",
    "SqlDraft",
    "SqlParseError",
    "ValidationFix",
    "apply_renames",
    "decide_and_draft",
    "extract_identifiers",
    "extract_intent",
    "generate_answer",
    "intent_from_arguments",
    "jaccard",
    "levenshtein",
    "load_examples_file",
    "normalize_tokens",
    "retrieve_examples",
    "scan_sql",
    "tokenize",
    "validate_draft",
]
