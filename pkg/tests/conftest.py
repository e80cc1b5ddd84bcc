from __future__ import annotations

import json
from pathlib import Path

import pytest

from plansolve.catalog import load_catalog
from plansolve.datasets import Example
from plansolve.extraction import GoldAnswer

FIXTURES = Path(__file__).parent / "fixtures"
MINIS = FIXTURES / "minis"


@pytest.fixture(scope="session")
def catalog():
    return load_catalog()


@pytest.fixture(scope="session")
def extraction_corpus() -> list[dict]:
    return _read_jsonl(FIXTURES / "extraction_corpus.jsonl")


@pytest.fixture(scope="session")
def transcripts() -> list[dict]:
    return _read_jsonl(FIXTURES / "reasoning_transcripts.jsonl")


def _read_jsonl(path: Path) -> list[dict]:
    return [json.loads(line) for line in path.read_text("utf-8").splitlines() if line.strip()]


def read_jsonl(path: Path) -> list[dict]:
    return _read_jsonl(path)


def number_example(example_id: str, question: str, answer: float, dataset: str = "gsm8k") -> Example:
    return Example(
        id=example_id, question=question, gold=GoldAnswer.number(answer), dataset=dataset
    )
