"""Post-hoc analysis of reasoning traces and error annotations.

Three rule-based detectors flag binary features of a generated trace
(variable definitions, an explicit plan, a worked solution). Human
error annotations are aggregated into a distribution, and features are
correlated with one-hot error indicators via the Pearson/phi
coefficient. Error labels are always human-authored input; nothing here
classifies errors automatically.

Detector rules (documented here and in the README so they can be audited):

* plan      -- a line starting "Plan" (optional colon), or at least two
               "Step <k>" lines whose numbers run 1, 2, ... consecutively.
* variables -- a "Variables" / "Given" / "Relevant Variables" heading line
               (bare or colon-terminated) followed, before the next
               plan/solution-style heading, by at least one line carrying
               a numeral.
* solution  -- a "Calculation" / "Solution" / "Answer" marker (optionally
               "Final ...") with a colon and same-line content, or as a
               bare heading followed by a non-empty line.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .errors import DuplicateExample, EmptyInput, IdMismatch
from .runner import EvalRecord


class ErrorType(Enum):
    CALCULATION = "calculation"
    MISSING_STEP = "missing_step"
    SEMANTIC = "semantic"
    NONE = "none"

    @classmethod
    def parse(cls, value: str) -> "ErrorType":
        try:
            return cls(value.strip().lower().replace("-", "_").replace(" ", "_"))
        except ValueError:
            raise ValueError(f"unknown error label: {value!r}") from None


@dataclass(frozen=True)
class ErrorLabel:
    example_id: str
    label: ErrorType


@dataclass(frozen=True)
class FeatureVector:
    example_id: str
    has_variables: bool
    has_plan: bool
    has_solution: bool


_PLAN_LINE_RE = re.compile(r"^\s*plan\b\s*:?", re.IGNORECASE)
_STEP_LINE_RE = re.compile(r"^\s*step\s+(\d+)\b", re.IGNORECASE)
_VARIABLE_HEADING_RE = re.compile(
    r"^\s*(relevant\s+variables|variables|given)\s*(:)?\s*(.*)$", re.IGNORECASE
)
_SECTION_TERMINATORS = frozenset(
    {"plan", "plans", "calculation", "solution", "answer", "explanation", "conclusion", "steps"}
)
_SOLUTION_INLINE_RE = re.compile(
    r"^\s*(?:final\s+)?(calculation|solution|answer)s?\s*:\s*(.*)$", re.IGNORECASE
)
_SOLUTION_BARE_RE = re.compile(r"^\s*(?:final\s+)?(calculation|solution|answer)s?\s*$", re.IGNORECASE)


def detect_plan(reasoning_text: str) -> bool:
    """True iff the trace contains an explicit plan marker."""
    step_numbers: list[int] = []
    for line in reasoning_text.splitlines():
        if _PLAN_LINE_RE.match(line):
            return True
        step = _STEP_LINE_RE.match(line)
        if step:
            step_numbers.append(int(step.group(1)))
    for i, number in enumerate(step_numbers[:-1]):
        if number == 1 and step_numbers[i + 1] == 2:
            return True
    return False


def _is_terminator(line: str) -> bool:
    return line.strip().rstrip(":").strip().lower() in _SECTION_TERMINATORS


def detect_variables(reasoning_text: str) -> bool:
    """True iff the trace opens a variables/given section that binds numerals."""
    lines = reasoning_text.splitlines()
    for i, line in enumerate(lines):
        match = _VARIABLE_HEADING_RE.match(line)
        if not match:
            continue
        has_colon, rest = match.group(2), match.group(3).strip()
        if not has_colon and rest:
            continue  # prose like "Given that ..." is not a heading
        if any(ch.isdigit() for ch in rest):
            return True
        for follower in lines[i + 1 :]:
            if _is_terminator(follower):
                break
            if any(ch.isdigit() for ch in follower):
                return True
    return False


def detect_solution(reasoning_text: str) -> bool:
    """True iff the trace has a calculation/solution/answer section with content."""
    lines = reasoning_text.splitlines()
    for i, line in enumerate(lines):
        inline = _SOLUTION_INLINE_RE.match(line)
        if inline and inline.group(2).strip():
            return True
        if (inline and not inline.group(2).strip()) or _SOLUTION_BARE_RE.match(line):
            for follower in lines[i + 1 :]:
                if follower.strip():
                    return True
    return False


def features_from_record(record: EvalRecord) -> FeatureVector:
    """Detect binary trace features on a record's first reasoning text."""
    text = record.reasoning_texts[0] if record.reasoning_texts else ""
    return FeatureVector(
        example_id=record.example_id,
        has_variables=detect_variables(text),
        has_plan=detect_plan(text),
        has_solution=detect_solution(text),
    )


def plan_presence_rate(records: Sequence[EvalRecord]) -> float:
    """Fraction of records whose first reasoning text contains a plan."""
    if not records:
        raise EmptyInput("no records")
    with_plan = sum(
        1
        for record in records
        if record.reasoning_texts and detect_plan(record.reasoning_texts[0])
    )
    return with_plan / len(records)


def error_distribution(labels: Sequence[ErrorLabel]) -> dict[ErrorType, float]:
    """Percentage of each error type over the full annotated set."""
    if not labels:
        raise EmptyInput("no labels")
    seen: set[str] = set()
    for label in labels:
        if label.example_id in seen:
            raise DuplicateExample(label.example_id)
        seen.add(label.example_id)
    total = len(labels)
    return {
        kind: 100.0 * sum(1 for label in labels if label.label is kind) / total
        for kind in (ErrorType.CALCULATION, ErrorType.MISSING_STEP, ErrorType.SEMANTIC)
    }


# --- correlation ----------------------------------------------------------

MATRIX_LABELS = (
    "has_variables",
    "has_plan",
    "has_solution",
    "calculation",
    "missing_step",
    "semantic",
)


@dataclass(frozen=True)
class CorrelationMatrix:
    """Symmetric Pearson/phi matrix; None marks zero-variance (undefined) cells."""

    labels: tuple[str, ...]
    values: tuple[tuple[float | None, ...], ...]
    sample_size: int

    def value(self, row: str, column: str) -> float | None:
        return self.values[self.labels.index(row)][self.labels.index(column)]

    def undefined_cells(self) -> list[tuple[str, str]]:
        return [
            (self.labels[i], self.labels[j])
            for i in range(len(self.labels))
            for j in range(len(self.labels))
            if self.values[i][j] is None
        ]


def _pearson(x: Sequence[int], y: Sequence[int]) -> float | None:
    n = len(x)
    sum_x, sum_y = sum(x), sum(y)
    sum_xx = sum(v * v for v in x)
    sum_yy = sum(v * v for v in y)
    sum_xy = sum(a * b for a, b in zip(x, y))
    var_x = n * sum_xx - sum_x * sum_x
    var_y = n * sum_yy - sum_y * sum_y
    if var_x == 0 or var_y == 0:
        return None
    r = (n * sum_xy - sum_x * sum_y) / math.sqrt(var_x * var_y)
    return max(-1.0, min(1.0, r))


def correlation_matrix(
    features: Sequence[FeatureVector], labels: Sequence[ErrorLabel]
) -> CorrelationMatrix:
    """Pearson correlation over binary feature and one-hot error columns.

    With 0/1 columns this equals the phi coefficient. Zero-variance
    columns produce flagged (None) cells, never fabricated values.
    """
    feature_ids = {feature.example_id for feature in features}
    label_ids = {label.example_id for label in labels}
    if len(feature_ids) != len(features) or len(label_ids) != len(labels):
        raise DuplicateExample("duplicate example ids in features or labels")
    if feature_ids != label_ids:
        missing = feature_ids.symmetric_difference(label_ids)
        raise IdMismatch(f"features and labels cover different ids: {sorted(missing)[:5]}")
    if len(features) < 2:
        raise EmptyInput("need at least 2 joined rows")

    by_id_features = {feature.example_id: feature for feature in features}
    by_id_labels = {label.example_id: label for label in labels}
    columns: dict[str, list[int]] = {name: [] for name in MATRIX_LABELS}
    for example_id in sorted(feature_ids):
        feature = by_id_features[example_id]
        label = by_id_labels[example_id]
        columns["has_variables"].append(int(feature.has_variables))
        columns["has_plan"].append(int(feature.has_plan))
        columns["has_solution"].append(int(feature.has_solution))
        columns["calculation"].append(int(label.label is ErrorType.CALCULATION))
        columns["missing_step"].append(int(label.label is ErrorType.MISSING_STEP))
        columns["semantic"].append(int(label.label is ErrorType.SEMANTIC))

    values: list[tuple[float | None, ...]] = []
    for row_name in MATRIX_LABELS:
        row: list[float | None] = []
        for column_name in MATRIX_LABELS:
            if row_name == column_name:
                variance = _pearson(columns[row_name], columns[row_name])
                row.append(1.0 if variance is not None else None)
            else:
                row.append(_pearson(columns[row_name], columns[column_name]))
        values.append(tuple(row))
    return CorrelationMatrix(
        labels=MATRIX_LABELS, values=tuple(values), sample_size=len(features)
    )


def matrix_to_json(matrix: CorrelationMatrix) -> dict:
    return {
        "labels": list(matrix.labels),
        "sample_size": matrix.sample_size,
        "values": [list(row) for row in matrix.values],
    }


def render_matrix(matrix: CorrelationMatrix) -> str:
    """Fixed-width text heatmap of the correlation grid."""
    width = max(len(label) for label in matrix.labels) + 2
    header = " " * width + "".join(label.rjust(width) for label in matrix.labels)
    rows = [header]
    for label, row in zip(matrix.labels, matrix.values):
        cells = "".join(
            ("  n/a" if cell is None else f"{cell:+.2f}").rjust(width) for cell in row
        )
        rows.append(label.ljust(width) + cells)
    return "\n".join(rows)


# --- annotation file handling ---------------------------------------------

def labels_from_records(rows: Iterable[dict], source: str = "<labels>") -> list[ErrorLabel]:
    """Build ErrorLabels from parsed annotation records ({example_id, label})."""
    labels = []
    for i, row in enumerate(rows):
        if "example_id" not in row or "label" not in row:
            raise ValueError(f"{source}: record #{i} needs example_id and label")
        labels.append(ErrorLabel(str(row["example_id"]), ErrorType.parse(str(row["label"]))))
    return labels
