"""Per-example two-step inference, self-consistency voting, and reports.

A run walks examples through Step-1 reasoning completions (one draw under
greedy decoding, n draws under self-consistency), one Step-2 extraction
completion per draw, typed answer extraction, majority voting, and gold
scoring. Records stream to an append-only JSON-lines log so interrupted
runs resume without re-querying the backend.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

from .catalog import PromptStrategy
from .datasets import Example
from .errors import (
    BackendUnavailable,
    CacheMiss,
    EmptyInput,
    EmptyVote,
    KindMismatch,
    MalformedResponse,
    MixedRuns,
    NoAnswerFound,
    RateLimited,
)
from .extraction import (
    ExtractedAnswer,
    GoldAnswer,
    answer_from_payload,
    answer_to_payload,
    answers_equal,
    extract_answer,
    gold_from_payload,
    gold_to_payload,
    votes_equal,
)
from .gateway import (
    Backend,
    CompletionRequest,
    STEP1_MAX_TOKENS,
    STEP2_MAX_TOKENS,
)
from .prompts import build_extraction_prompt, build_reasoning_prompt

logger = logging.getLogger(__name__)

_BACKEND_ERRORS = (BackendUnavailable, RateLimited, CacheMiss, MalformedResponse)


@dataclass(frozen=True)
class SelfConsistencyConfig:
    n: int
    temperature: float

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError("self-consistency needs at least 2 draws")
        if not self.temperature > 0:
            raise ValueError("self-consistency needs a positive temperature")


@dataclass(frozen=True)
class RunConfig:
    strategy_id: str
    dataset: str
    model_id: str = "offline-model"
    sc: SelfConsistencyConfig | None = None
    max_tokens_step1: int = STEP1_MAX_TOKENS
    max_tokens_step2: int = STEP2_MAX_TOKENS
    seed: int = 0
    parallelism: int = 1

    def __post_init__(self) -> None:
        if self.parallelism < 1:
            raise ValueError("parallelism must be positive")


@dataclass(frozen=True)
class EvalRecord:
    """Outcome of one example: every draw's reasoning, extraction, and the vote."""

    example_id: str
    dataset: str
    strategy_id: str
    reasoning_texts: tuple[str, ...]
    extracted: tuple[ExtractedAnswer | None, ...]
    final: ExtractedAnswer | None
    gold: GoldAnswer
    correct: bool
    latency_ms: int
    failures: tuple[str, ...] = ()

    @property
    def unanswered(self) -> bool:
        return self.final is None


@dataclass(frozen=True)
class EvalReport:
    dataset: str
    strategy_id: str
    total: int
    correct: int
    incorrect: int
    unanswered: int
    accuracy: float
    records_ref: str | None = None


def majority_vote(answers: Sequence[ExtractedAnswer]) -> ExtractedAnswer:
    """Modal answer under vote-equality; ties break to the earliest first
    occurrence in list order."""
    if not answers:
        raise EmptyVote("no answers to vote over")
    kind = answers[0].kind
    if any(answer.kind is not kind for answer in answers):
        raise KindMismatch("voting pool mixes answer kinds")
    # Representatives keep first-occurrence order, so the first maximal
    # count encountered is the declared tie-break winner.
    pooled: list[tuple[ExtractedAnswer, int]] = []
    for answer in answers:
        for i, (representative, count) in enumerate(pooled):
            if votes_equal(representative, answer):
                pooled[i] = (representative, count + 1)
                break
        else:
            pooled.append((answer, 1))
    winner, best = pooled[0]
    for representative, count in pooled[1:]:
        if count > best:
            winner, best = representative, count
    return winner


def run_example(
    example: Example, strategy: PromptStrategy, backend: Backend, config: RunConfig
) -> EvalRecord:
    """Run the two-step pipeline (with optional self-consistency) on one example."""
    if config.sc is not None:
        return _run_draws(example, strategy, backend, config, config.sc.n, config.sc.temperature)
    return _run_draws(example, strategy, backend, config, 1, 0.0)


def _run_draws(
    example: Example,
    strategy: PromptStrategy,
    backend: Backend,
    config: RunConfig,
    n: int,
    temperature: float,
) -> EvalRecord:
    kind = example.gold.kind
    reasoning_prompt = build_reasoning_prompt(example, strategy)
    reasoning_texts: list[str] = []
    extracted: list[ExtractedAnswer | None] = []
    failures: list[str] = []
    latency_ms = 0

    for draw in range(n):
        reasoning = ""
        answer: ExtractedAnswer | None = None
        try:
            step1 = backend.complete(
                CompletionRequest(
                    prompt=reasoning_prompt.text,
                    temperature=temperature,
                    max_tokens=config.max_tokens_step1,
                    model_id=config.model_id,
                    sample_index=draw if temperature > 0 else 0,
                )
            )
            latency_ms += step1.latency_ms
            reasoning = step1.response_text
            extraction_prompt = build_extraction_prompt(reasoning_prompt, reasoning, strategy, kind)
            step2 = backend.complete(
                CompletionRequest(
                    prompt=extraction_prompt.text,
                    temperature=0.0,
                    max_tokens=config.max_tokens_step2,
                    model_id=config.model_id,
                    sample_index=0,
                )
            )
            latency_ms += step2.latency_ms
            try:
                answer = extract_answer(step2.response_text, kind)
            except NoAnswerFound:
                answer = None
        except _BACKEND_ERRORS as exc:
            failures.append(f"{type(exc).__name__}: {exc}")
        reasoning_texts.append(reasoning)
        extracted.append(answer)

    answered = [answer for answer in extracted if answer is not None]
    final = majority_vote(answered) if answered else None
    correct = final is not None and answers_equal(final, example.gold)
    return EvalRecord(
        example_id=example.id,
        dataset=example.dataset,
        strategy_id=strategy.id,
        reasoning_texts=tuple(reasoning_texts),
        extracted=tuple(extracted),
        final=final,
        gold=example.gold,
        correct=correct,
        latency_ms=latency_ms,
        failures=tuple(failures),
    )


def compute_report(records: Sequence[EvalRecord], records_ref: str | None = None) -> EvalReport:
    """Aggregate records into an accuracy report (exact integer counting)."""
    if not records:
        raise EmptyInput("no records to report over")
    datasets = {record.dataset for record in records}
    strategies = {record.strategy_id for record in records}
    if len(datasets) > 1 or len(strategies) > 1:
        raise MixedRuns(f"records span datasets {sorted(datasets)} / strategies {sorted(strategies)}")
    total = len(records)
    correct = sum(1 for record in records if record.correct)
    unanswered = sum(1 for record in records if record.unanswered)
    incorrect = total - correct - unanswered
    return EvalReport(
        dataset=datasets.pop(),
        strategy_id=strategies.pop(),
        total=total,
        correct=correct,
        incorrect=incorrect,
        unanswered=unanswered,
        accuracy=correct / total,
        records_ref=records_ref,
    )


def format_percent(accuracy: float) -> str:
    """Render an accuracy ratio at one decimal percent ("0.593" -> "59.3")."""
    return f"{accuracy * 100:.1f}"


def rescore_record(record: EvalRecord) -> EvalRecord:
    """Re-derive the vote and correctness from a record's stored extractions."""
    answered = [answer for answer in record.extracted if answer is not None]
    final = majority_vote(answered) if answered else None
    correct = final is not None and answers_equal(final, record.gold)
    return replace(record, final=final, correct=correct)


def run_dataset(
    examples: Sequence[Example],
    strategy: PromptStrategy,
    backend: Backend,
    config: RunConfig,
    log_path: str | Path | None = None,
    progress: Callable[[EvalRecord], None] | None = None,
) -> tuple[EvalReport, list[EvalRecord]]:
    """Evaluate examples, checkpointing each record to `log_path`.

    Already-logged example ids are skipped on restart, so an interrupted
    run resumed against a replay store reproduces the uninterrupted
    report. Records land in the log in dataset order.
    """
    completed: dict[str, EvalRecord] = {}
    if log_path is not None and Path(log_path).exists():
        for record in read_records(log_path):
            completed[record.example_id] = record
        if completed:
            logger.info("resuming: %d records already logged", len(completed))

    pending = [example for example in examples if example.id not in completed]

    def handle(record: EvalRecord) -> None:
        completed[record.example_id] = record
        if log_path is not None:
            append_record(log_path, record)
        if progress is not None:
            progress(record)

    if config.parallelism > 1 and len(pending) > 1:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            futures = [
                pool.submit(run_example, example, strategy, backend, config)
                for example in pending
            ]
            # Collect in submission order so the log stays in dataset order.
            for future in futures:
                handle(future.result())
    else:
        for example in pending:
            handle(run_example(example, strategy, backend, config))

    records = [completed[example.id] for example in examples]
    ref = str(log_path) if log_path is not None else None
    return compute_report(records, records_ref=ref), records


# --- results log (one JSON object per record) -------------------------------

def record_to_json(record: EvalRecord) -> dict:
    return {
        "example_id": record.example_id,
        "dataset": record.dataset,
        "strategy_id": record.strategy_id,
        "reasoning_texts": list(record.reasoning_texts),
        "extracted": [
            answer_to_payload(answer) if answer is not None else None
            for answer in record.extracted
        ],
        "final": answer_to_payload(record.final) if record.final is not None else None,
        "gold": gold_to_payload(record.gold),
        "correct": record.correct,
        "latency_ms": record.latency_ms,
        "failures": list(record.failures),
    }


def record_from_json(payload: dict) -> EvalRecord:
    return EvalRecord(
        example_id=payload["example_id"],
        dataset=payload["dataset"],
        strategy_id=payload["strategy_id"],
        reasoning_texts=tuple(payload["reasoning_texts"]),
        extracted=tuple(
            answer_from_payload(item) if item is not None else None
            for item in payload["extracted"]
        ),
        final=answer_from_payload(payload["final"]) if payload["final"] is not None else None,
        gold=gold_from_payload(payload["gold"]),
        correct=payload["correct"],
        latency_ms=payload["latency_ms"],
        failures=tuple(payload.get("failures", ())),
    )


def append_record(path: str | Path, record: EvalRecord) -> None:
    destination = Path(path)
    destination.parent.mkdir(parents=True, exist_ok=True)
    with destination.open("a", encoding="utf-8") as handle:
        handle.write(json.dumps(record_to_json(record), ensure_ascii=False, sort_keys=True) + "\n")


def read_records(path: str | Path) -> list[EvalRecord]:
    records = []
    for lineno, line in enumerate(Path(path).read_text("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(record_from_json(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            # A truncated trailing line (crash mid-write) is recomputed on
            # resume rather than poisoning the whole log.
            logger.warning("%s:%d: skipping unreadable record line", path, lineno)
    return records
