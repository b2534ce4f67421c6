from .catalog import GenreProfile, PersonaRegistry, PromptCatalog, ReaderPersona, UnknownPersonaError, load_few_shot
from .roles import (
    AgentRuntime,
    ModelSettings,
    classify_genre,
    collect_feedback,
    default_catalog,
    draft_initial_summary,
    enforce_bounds,
    propose_revisions,
    resolve_personas,
)
from .types import (
    CATEGORIES,
    AgentError,
    EmptyDraftError,
    ExpertRole,
    FeedbackItem,
    Genre,
    ReaderFeedback,
    RevisionKind,
    RevisionProposal,
    SchemaViolationError,
    SummaryTemplate,
    TemplateSlot,
    TruncatedOutputWarning,
    UnknownLabelError,
    UnparseableClassificationError,
)

__all__ = [
    "CATEGORIES",
    "AgentError",
    "AgentRuntime",
    "EmptyDraftError",
    "ExpertRole",
    "FeedbackItem",
    "Genre",
    "GenreProfile",
    "ModelSettings",
    "PersonaRegistry",
    "PromptCatalog",
    "ReaderFeedback",
    "ReaderPersona",
    "RevisionKind",
    "RevisionProposal",
    "SchemaViolationError",
    "SummaryTemplate",
    "TemplateSlot",
    "TruncatedOutputWarning",
    "UnknownLabelError",
    "UnknownPersonaError",
    "UnparseableClassificationError",
    "classify_genre",
    "collect_feedback",
    "default_catalog",
    "draft_initial_summary",
    "enforce_bounds",
    "load_few_shot",
    "propose_revisions",
    "resolve_personas",
]
