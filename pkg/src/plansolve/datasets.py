"""Benchmark loading: ten datasets, one canonical example schema.

The harness only ever reads the canonical format: UTF-8 JSON lines with
fields ``id``, ``question``, ``answer``, ``kind``. Per-dataset adapters
convert the upstream native formats into it once (``ingest`` in the CLI),
which isolates the rest of the pipeline from upstream format churn.
"""

from __future__ import annotations

import json
import logging
import random
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

from .errors import CountMismatch, KindViolation, SliceTooLarge, SourceParseError
from .extraction import AnswerKind, GoldAnswer

logger = logging.getLogger(__name__)


class Domain(Enum):
    MATH = "math"
    COMMONSENSE = "commonsense"
    SYMBOLIC = "symbolic"


@dataclass(frozen=True)
class DatasetDescriptor:
    name: str
    display_name: str
    domain: Domain
    kind: AnswerKind
    expected_count: int


DATASETS: dict[str, DatasetDescriptor] = {
    descriptor.name: descriptor
    for descriptor in (
        DatasetDescriptor("multiarith", "MultiArith", Domain.MATH, AnswerKind.NUMBER, 600),
        DatasetDescriptor("addsub", "AddSub", Domain.MATH, AnswerKind.NUMBER, 395),
        DatasetDescriptor("gsm8k", "GSM8K", Domain.MATH, AnswerKind.NUMBER, 1319),
        DatasetDescriptor("aqua", "AQuA", Domain.MATH, AnswerKind.OPTION, 254),
        DatasetDescriptor("singleeq", "SingleEq", Domain.MATH, AnswerKind.NUMBER, 508),
        DatasetDescriptor("svamp", "SVAMP", Domain.MATH, AnswerKind.NUMBER, 1000),
        DatasetDescriptor("csqa", "CommonsenseQA", Domain.COMMONSENSE, AnswerKind.OPTION, 1221),
        DatasetDescriptor("strategyqa", "StrategyQA", Domain.COMMONSENSE, AnswerKind.YES_NO, 2290),
        DatasetDescriptor("last-letters", "Last Letters", Domain.SYMBOLIC, AnswerKind.STRING, 500),
        DatasetDescriptor("coin-flip", "Coin Flip", Domain.SYMBOLIC, AnswerKind.YES_NO, 500),
    )
}


def descriptor_for(name: str) -> DatasetDescriptor:
    try:
        return DATASETS[name]
    except KeyError:
        known = ", ".join(sorted(DATASETS))
        raise SourceParseError(f"unknown dataset {name!r} (known: {known})") from None


@dataclass(frozen=True)
class Example:
    """One benchmark item in canonical form."""

    id: str
    question: str
    gold: GoldAnswer
    dataset: str


def _parse_gold(kind: AnswerKind, value: object, where: str) -> GoldAnswer:
    try:
        if kind is AnswerKind.NUMBER:
            if isinstance(value, str):
                value = float(value.replace(",", ""))
            return GoldAnswer.number(value)  # type: ignore[arg-type]
        if kind is AnswerKind.OPTION:
            return GoldAnswer.option(str(value))
        if kind is AnswerKind.YES_NO:
            if isinstance(value, str):
                lowered = value.strip().lower()
                if lowered not in ("yes", "no", "true", "false"):
                    raise ValueError(f"not a yes/no value: {value!r}")
                value = lowered in ("yes", "true")
            return GoldAnswer.yes_no(value)  # type: ignore[arg-type]
        return GoldAnswer.string(str(value))
    except (TypeError, ValueError) as exc:
        raise KindViolation(f"{where}: {exc}") from None


def read_canonical(path: str | Path) -> list[dict]:
    """Read canonical JSON lines, skipping blank lines."""
    source = Path(path)
    try:
        raw = source.read_text("utf-8")
    except OSError as exc:
        raise SourceParseError(f"{source}: {exc}") from None
    records = []
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SourceParseError(f"{source}:{lineno}: {exc.msg}") from None
        if not isinstance(record, dict):
            raise SourceParseError(f"{source}:{lineno}: expected an object")
        records.append(record)
    return records


def load_dataset(
    descriptor: DatasetDescriptor, path: str | Path, strict: bool = False
) -> list[Example]:
    """Load and validate a canonical dataset file.

    In strict mode the example count must equal the descriptor's declared
    count; in lenient mode a mismatch is only logged.
    """
    examples: list[Example] = []
    seen_ids: set[str] = set()
    for i, record in enumerate(read_canonical(path)):
        where = f"{path}: record #{i}"
        example_id = record.get("id")
        if not isinstance(example_id, str) or not example_id:
            raise SourceParseError(f"{where}: missing id")
        if example_id in seen_ids:
            raise SourceParseError(f"{where}: duplicate id {example_id!r}")
        seen_ids.add(example_id)
        question = record.get("question")
        if not isinstance(question, str) or not question.strip():
            raise SourceParseError(f"{where}: missing question")
        kind_name = record.get("kind")
        try:
            kind = AnswerKind.parse(str(kind_name))
        except ValueError as exc:
            raise SourceParseError(f"{where}: {exc}") from None
        if kind is not descriptor.kind:
            raise KindViolation(
                f"{where}: kind {kind.value} does not match "
                f"{descriptor.name}'s declared kind {descriptor.kind.value}"
            )
        if "answer" not in record:
            raise SourceParseError(f"{where}: missing answer")
        gold = _parse_gold(kind, record["answer"], where)
        examples.append(
            Example(id=example_id, question=question.strip(), gold=gold, dataset=descriptor.name)
        )

    if len(examples) != descriptor.expected_count:
        message = (
            f"{path}: {descriptor.name} has {len(examples)} examples, "
            f"expected {descriptor.expected_count}"
        )
        if strict:
            raise CountMismatch(message)
        logger.warning("%s (lenient mode, continuing)", message)
    return examples


def slice_dataset(examples: Sequence[Example], seed: int, n: int) -> list[Example]:
    """Deterministic pseudo-random subset of size n, in dataset order.

    Selection is driven only by Random.random(), the one generator method
    with a cross-version reproducibility guarantee.
    """
    if n > len(examples):
        raise SliceTooLarge(f"requested {n} of {len(examples)} examples")
    rng = random.Random(seed)
    order = list(range(len(examples)))
    for i in range(len(order) - 1, 0, -1):
        j = int(rng.random() * (i + 1))
        order[i], order[j] = order[j], order[i]
    return [examples[i] for i in sorted(order[:n])]


def write_canonical(records: Iterable[dict], path: str | Path) -> int:
    """Write canonical records as JSON lines; returns the record count."""
    destination = Path(path)
    destination.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with destination.open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
            count += 1
    return count


def example_to_record(example: Example) -> dict:
    value = example.gold.payload
    return {
        "id": example.id,
        "question": example.question,
        "answer": value,
        "kind": example.gold.kind.value,
    }


# --- upstream adapters -------------------------------------------------------
#
# Each adapter turns one dataset's native file into canonical records.
# They only normalize structure; question text is passed through.

_GSM8K_ANSWER_RE = re.compile(r"####\s*(.+)\s*$")


def _require(condition: bool, where: str, message: str) -> None:
    if not condition:
        raise SourceParseError(f"{where}: {message}")


def _read_json(path: Path) -> object:
    try:
        return json.loads(path.read_text("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SourceParseError(f"{path}: {exc}") from None


def _read_jsonl(path: Path) -> list[dict]:
    return read_canonical(path)


def _adapt_gsm8k(path: Path) -> Iterator[dict]:
    for i, row in enumerate(_read_jsonl(path)):
        where = f"{path}: record #{i}"
        _require("question" in row and "answer" in row, where, "needs question/answer")
        match = _GSM8K_ANSWER_RE.search(str(row["answer"]).strip().splitlines()[-1])
        _require(match is not None, where, "no '####' answer delimiter")
        assert match is not None
        value = match.group(1).replace(",", "").strip()
        yield {
            "id": row.get("id") or f"gsm8k-{i + 1:04d}",
            "question": str(row["question"]).strip(),
            "answer": float(value),
            "kind": "number",
        }


def _adapt_svamp(path: Path) -> Iterator[dict]:
    rows = _read_json(path)
    _require(isinstance(rows, list), str(path), "expected a JSON array")
    for i, row in enumerate(rows):  # type: ignore[union-attr]
        where = f"{path}: record #{i}"
        _require(isinstance(row, dict), where, "expected an object")
        body = str(row.get("Body", "")).strip()
        question = str(row.get("Question", "")).strip()
        _require(bool(question), where, "missing Question")
        _require("Answer" in row, where, "missing Answer")
        yield {
            "id": str(row.get("ID") or f"svamp-{i + 1:04d}"),
            "question": f"{body} {question}".strip(),
            "answer": float(row["Answer"]),
            "kind": "number",
        }


def _adapt_mawps(prefix: str) -> Callable[[Path], Iterator[dict]]:
    def adapt(path: Path) -> Iterator[dict]:
        rows = _read_json(path)
        _require(isinstance(rows, list), str(path), "expected a JSON array")
        for i, row in enumerate(rows):  # type: ignore[union-attr]
            where = f"{path}: record #{i}"
            _require(isinstance(row, dict), where, "expected an object")
            _require("sQuestion" in row, where, "missing sQuestion")
            solutions = row.get("lSolutions")
            _require(
                isinstance(solutions, list) and len(solutions) >= 1,
                where,
                "missing lSolutions",
            )
            identifier = row.get("iIndex")
            yield {
                "id": f"{prefix}-{identifier}" if identifier is not None else f"{prefix}-{i + 1:04d}",
                "question": str(row["sQuestion"]).strip(),
                "answer": float(solutions[0]),
                "kind": "number",
            }

    return adapt


def _format_choices(pairs: Iterable[tuple[str, str]]) -> str:
    return " ".join(f"({label}) {text}" for label, text in pairs)


def _adapt_aqua(path: Path) -> Iterator[dict]:
    for i, row in enumerate(_read_jsonl(path)):
        where = f"{path}: record #{i}"
        _require("question" in row and "correct" in row, where, "needs question/correct")
        options = row.get("options")
        _require(isinstance(options, list) and options, where, "missing options")
        pairs = []
        for raw in options:  # type: ignore[union-attr]
            text = str(raw).strip()
            match = re.match(r"^\(?([A-Ea-e])\)?\s*[).:]?\s*(.*)$", text)
            _require(match is not None, where, f"unparseable option {raw!r}")
            assert match is not None
            pairs.append((match.group(1).upper(), match.group(2).strip()))
        yield {
            "id": f"aqua-{i + 1:04d}",
            "question": f"{str(row['question']).strip()} Answer Choices: {_format_choices(pairs)}",
            "answer": str(row["correct"]).strip().upper(),
            "kind": "option",
        }


def _adapt_csqa(path: Path) -> Iterator[dict]:
    for i, row in enumerate(_read_jsonl(path)):
        where = f"{path}: record #{i}"
        question = row.get("question")
        _require(isinstance(question, dict), where, "missing question object")
        stem = str(question.get("stem", "")).strip()  # type: ignore[union-attr]
        _require(bool(stem), where, "missing question stem")
        choices = question.get("choices")  # type: ignore[union-attr]
        _require(isinstance(choices, list) and choices, where, "missing choices")
        pairs = [
            (str(choice["label"]).upper(), str(choice["text"]).strip())
            for choice in choices  # type: ignore[union-attr]
        ]
        _require("answerKey" in row, where, "missing answerKey")
        # The options become part of the question surface, mirroring how
        # multiple-choice prompts are rendered downstream.
        yield {
            "id": str(row.get("id") or f"csqa-{i + 1:04d}"),
            "question": f"{stem} Answer Choices: {_format_choices(pairs)}",
            "answer": str(row["answerKey"]).strip().upper(),
            "kind": "option",
        }


def _adapt_strategyqa(path: Path) -> Iterator[dict]:
    rows = _read_json(path)
    if isinstance(rows, dict) and "examples" in rows:
        rows = rows["examples"]
    _require(isinstance(rows, list), str(path), "expected a JSON array")
    for i, row in enumerate(rows):  # type: ignore[union-attr]
        where = f"{path}: record #{i}"
        _require(isinstance(row, dict), where, "expected an object")
        _require("question" in row and "answer" in row, where, "needs question/answer")
        yield {
            "id": str(row.get("qid") or f"strategyqa-{i + 1:04d}"),
            "question": str(row["question"]).strip(),
            "answer": bool(row["answer"]),
            "kind": "yes_no",
        }


def _adapt_wrapped_examples(prefix: str, kind: str) -> Callable[[Path], Iterator[dict]]:
    def adapt(path: Path) -> Iterator[dict]:
        document = _read_json(path)
        _require(
            isinstance(document, dict) and isinstance(document.get("examples"), list),
            str(path),
            "expected an object with an 'examples' list",
        )
        for i, row in enumerate(document["examples"]):  # type: ignore[index]
            where = f"{path}: record #{i}"
            _require(isinstance(row, dict), where, "expected an object")
            _require("question" in row and "answer" in row, where, "needs question/answer")
            yield {
                "id": f"{prefix}-{i + 1:04d}",
                "question": str(row["question"]).strip(),
                "answer": row["answer"],
                "kind": kind,
            }

    return adapt


_ADAPTERS: dict[str, Callable[[Path], Iterator[dict]]] = {
    "gsm8k": _adapt_gsm8k,
    "svamp": _adapt_svamp,
    "multiarith": _adapt_mawps("multiarith"),
    "addsub": _adapt_mawps("addsub"),
    "singleeq": _adapt_mawps("singleeq"),
    "aqua": _adapt_aqua,
    "csqa": _adapt_csqa,
    "strategyqa": _adapt_strategyqa,
    "last-letters": _adapt_wrapped_examples("last-letters", "string"),
    "coin-flip": _adapt_wrapped_examples("coin-flip", "yes_no"),
}


def ingest_dataset(dataset: str, src: str | Path, dst: str | Path) -> int:
    """Convert one dataset's native file to canonical JSON lines."""
    descriptor = descriptor_for(dataset)
    adapter = _ADAPTERS[descriptor.name]
    count = write_canonical(adapter(Path(src)), dst)
    load_dataset(descriptor, dst, strict=False)  # round-trip validation
    return count
