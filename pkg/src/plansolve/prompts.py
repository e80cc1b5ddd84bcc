"""Deterministic construction of the two-step prompts.

Step 1 wraps the question and a trigger sentence into the
"Q: <question>. A: <trigger>" template. Step 2 re-sends the full Step-1
prompt, the generated reasoning text, and an answer-extraction
instruction, so the model only has to state the final answer.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

from .catalog import PromptStrategy
from .errors import EmptyQuestion
from .extraction import AnswerKind

if TYPE_CHECKING:  # pragma: no cover
    from .datasets import Example

# If the question already ends a sentence, adding the template's period
# would change the prompt surface ("x? ." etc.), so it is skipped.
_SENTENCE_END = (".", "?", "!")


@dataclass(frozen=True)
class ReasoningPrompt:
    text: str
    strategy_id: str
    example_id: str


@dataclass(frozen=True)
class ExtractionPrompt:
    text: str
    reasoning_text: str


def build_reasoning_prompt(example: "Example", strategy: PromptStrategy) -> ReasoningPrompt:
    """Build the Step-1 prompt for one example. Pure and deterministic."""
    question = example.question
    if not question.strip():
        raise EmptyQuestion(example.id)
    joiner = " A: " if question.endswith(_SENTENCE_END) else ". A: "
    return ReasoningPrompt(
        text=f"Q: {question}{joiner}{strategy.trigger}",
        strategy_id=strategy.id,
        example_id=example.id,
    )


def build_extraction_prompt(
    reasoning_prompt: ReasoningPrompt,
    reasoning_text: str,
    strategy: PromptStrategy,
    kind: AnswerKind,
) -> ExtractionPrompt:
    """Build the Step-2 prompt around the raw Step-1 completion.

    The completion is embedded verbatim except for a single trailing
    whitespace strip (completions commonly end with stray whitespace);
    the extraction instruction follows on its own line and is the last
    thing in the prompt.
    """
    embedded = reasoning_text.rstrip()
    instruction = strategy.instruction_for(kind)
    return ExtractionPrompt(
        text=f"{reasoning_prompt.text}{embedded}\n{instruction}",
        reasoning_text=embedded,
    )
