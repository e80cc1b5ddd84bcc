"""Zero-shot plan-and-solve prompting harness.

Builds two-step reasoning/extraction prompts from a versioned trigger
catalog, runs them against live, replayed, or scripted completion
backends, parses typed answers, votes across self-consistency draws,
and aggregates accuracy reports plus post-hoc trace analysis.
"""

from .analysis import (
    CorrelationMatrix,
    ErrorLabel,
    ErrorType,
    FeatureVector,
    correlation_matrix,
    detect_plan,
    detect_solution,
    detect_variables,
    error_distribution,
    plan_presence_rate,
)
from .catalog import (
    PromptStrategy,
    StrategyCatalog,
    StrategyFamily,
    dump_catalog,
    load_catalog,
    lookup_strategy,
    parse_catalog,
)
from .datasets import (
    DATASETS,
    DatasetDescriptor,
    Domain,
    Example,
    ingest_dataset,
    load_dataset,
    slice_dataset,
)
from .errors import HarnessError
from .extraction import (
    AnswerKind,
    ExtractedAnswer,
    GoldAnswer,
    answers_equal,
    extract_answer,
    extract_number,
    extract_option,
    extract_string,
    extract_yesno,
)
from .gateway import (
    CacheEntry,
    CacheStore,
    CachingBackend,
    CompletionExchange,
    CompletionRequest,
    LiveBackend,
    MockBackend,
    MockRule,
    ReplayBackend,
    cache_key,
)
from .prompts import (
    ExtractionPrompt,
    ReasoningPrompt,
    build_extraction_prompt,
    build_reasoning_prompt,
)
from .runner import (
    EvalRecord,
    EvalReport,
    RunConfig,
    SelfConsistencyConfig,
    compute_report,
    majority_vote,
    run_dataset,
    run_example,
)

__version__ = "0.1.0"

__all__ = [
    "AnswerKind",
    "CacheEntry",
    "CacheStore",
    "CachingBackend",
    "CompletionExchange",
    "CompletionRequest",
    "CorrelationMatrix",
    "DATASETS",
    "DatasetDescriptor",
    "Domain",
    "ErrorLabel",
    "ErrorType",
    "EvalRecord",
    "EvalReport",
    "Example",
    "ExtractedAnswer",
    "ExtractionPrompt",
    "FeatureVector",
    "GoldAnswer",
    "HarnessError",
    "LiveBackend",
    "MockBackend",
    "MockRule",
    "PromptStrategy",
    "ReasoningPrompt",
    "ReplayBackend",
    "RunConfig",
    "SelfConsistencyConfig",
    "StrategyCatalog",
    "StrategyFamily",
    "answers_equal",
    "build_extraction_prompt",
    "build_reasoning_prompt",
    "cache_key",
    "compute_report",
    "correlation_matrix",
    "detect_plan",
    "detect_solution",
    "detect_variables",
    "dump_catalog",
    "error_distribution",
    "extract_answer",
    "extract_number",
    "extract_option",
    "extract_string",
    "extract_yesno",
    "ingest_dataset",
    "load_catalog",
    "load_dataset",
    "lookup_strategy",
    "majority_vote",
    "parse_catalog",
    "plan_presence_rate",
    "run_dataset",
    "run_example",
    "slice_dataset",
]
