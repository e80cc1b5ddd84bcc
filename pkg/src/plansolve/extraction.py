"""Answer parsing and gold-answer comparison.

Turns free-form completion text into one of four normalized answer shapes
(number, option letter, yes/no, short string) and decides equality against
gold answers. All extractors follow a last-occurrence rule: when a text
mentions several candidates, the one closest to the end wins, because
extraction completions state the final answer last.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal, localcontext
from enum import Enum

from .errors import KindMismatch, NoAnswerFound


class AnswerKind(Enum):
    NUMBER = "number"
    OPTION = "option"
    YES_NO = "yes_no"
    STRING = "string"

    @classmethod
    def parse(cls, value: str) -> "AnswerKind":
        try:
            return cls(value.strip().lower().replace("-", "_"))
        except ValueError:
            raise ValueError(f"unknown answer kind: {value!r}") from None


OPTION_LETTERS = "ABCDE"


@dataclass(frozen=True)
class GoldAnswer:
    """Reference answer for one benchmark example."""

    kind: AnswerKind
    payload: float | str | bool

    def __post_init__(self) -> None:
        kind, payload = self.kind, self.payload
        if kind is AnswerKind.NUMBER:
            if isinstance(payload, bool) or not isinstance(payload, (int, float)):
                raise ValueError(f"number gold needs a numeric payload, got {payload!r}")
            value = float(payload)
            if not math.isfinite(value):
                raise ValueError("number gold must be finite")
            object.__setattr__(self, "payload", value)
        elif kind is AnswerKind.OPTION:
            if not isinstance(payload, str) or len(payload) != 1 or payload.upper() not in OPTION_LETTERS:
                raise ValueError(f"option gold must be one of A-E, got {payload!r}")
            object.__setattr__(self, "payload", payload.upper())
        elif kind is AnswerKind.YES_NO:
            if not isinstance(payload, bool):
                raise ValueError(f"yes/no gold must be a bool, got {payload!r}")
        else:
            if not isinstance(payload, str) or not payload.strip():
                raise ValueError(f"string gold must be non-empty text, got {payload!r}")
            object.__setattr__(self, "payload", payload.strip())

    @classmethod
    def number(cls, value: float) -> "GoldAnswer":
        return cls(AnswerKind.NUMBER, value)

    @classmethod
    def option(cls, letter: str) -> "GoldAnswer":
        return cls(AnswerKind.OPTION, letter)

    @classmethod
    def yes_no(cls, value: bool) -> "GoldAnswer":
        return cls(AnswerKind.YES_NO, value)

    @classmethod
    def string(cls, value: str) -> "GoldAnswer":
        return cls(AnswerKind.STRING, value)


@dataclass(frozen=True)
class ExtractedAnswer:
    """One parsed answer; exactly one payload field is set, matching kind."""

    kind: AnswerKind
    raw_span: str
    number: float | None = None
    option: str | None = None
    yesno: bool | None = None
    text: str | None = None

    def __post_init__(self) -> None:
        payloads = {
            AnswerKind.NUMBER: self.number,
            AnswerKind.OPTION: self.option,
            AnswerKind.YES_NO: self.yesno,
            AnswerKind.STRING: self.text,
        }
        populated = [kind for kind, value in payloads.items() if value is not None]
        if populated != [self.kind]:
            raise ValueError(f"payload fields {populated} do not match kind {self.kind}")
        if self.number is not None and not math.isfinite(self.number):
            raise ValueError("extracted number must be finite")

    @property
    def payload(self) -> float | str | bool:
        value = {
            AnswerKind.NUMBER: self.number,
            AnswerKind.OPTION: self.option,
            AnswerKind.YES_NO: self.yesno,
            AnswerKind.STRING: self.text,
        }[self.kind]
        assert value is not None
        return value


# --- numbers ---------------------------------------------------------------

# A candidate is either a thousands-grouped integer ("6,840", "1,234,567") or
# a plain run of digits, with an optional decimal tail. Commas are absorbed
# only in exact groups of three, so "1,2" stays two candidates. The lookbehind
# rejects candidates glued to a preceding digit or dot ("19-18" yields 19 and
# 18, never -18; "1.2.3" never yields a bare trailing fragment).
_NUMBER_RE = re.compile(r"(?<![\d.])[-+]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?")


def extract_number(text: str) -> ExtractedAnswer:
    """Return the last numeric literal in `text`.

    Cleansing: thousands separators are dropped, and currency symbols,
    percent signs, and trailing periods never make it into the match.
    """
    last: re.Match[str] | None = None
    last_value = 0.0
    for match in _NUMBER_RE.finditer(text):
        try:
            value = float(match.group().replace(",", ""))
        except ValueError:  # pragma: no cover - regex should prevent this
            continue
        if math.isfinite(value):
            last, last_value = match, value
    if last is None:
        raise NoAnswerFound("no numeric literal in text")
    return ExtractedAnswer(kind=AnswerKind.NUMBER, number=last_value, raw_span=last.group())


# --- option letters ----------------------------------------------------------

_PAREN_OPTION_RE = re.compile(r"\(\s*([A-Ea-e])\s*\)")
_HALF_PAREN_OPTION_RE = re.compile(r"(?<![A-Za-z(])([A-Ea-e])\)")
# "answer is D" / "Answer: D" / "answer D" -- the lookahead keeps multi-letter
# tokens ("AB/2700") and words from matching.
_ANSWER_OPTION_RE = re.compile(
    r"\banswers?\b(?:\s+is)?\s*[:\-]?\s*\(?([A-Ea-e])(?![A-Za-z0-9/])",
    re.IGNORECASE,
)
_FINAL_TOKEN_STRIP = "\"'`.,!?:;()[]*"


def extract_option(text: str) -> ExtractedAnswer:
    """Return the last standalone option letter A-E in `text`.

    Recognized forms: "(D)", "D)", "answer is D", and a bare final letter.
    """
    candidates: dict[int, tuple[str, str]] = {}  # letter position -> (letter, span)
    for pattern in (_PAREN_OPTION_RE, _HALF_PAREN_OPTION_RE, _ANSWER_OPTION_RE):
        for match in pattern.finditer(text):
            candidates.setdefault(match.start(1), (match.group(1).upper(), match.group(0)))
    tokens = text.split()
    if tokens:
        last_token = tokens[-1]
        core = last_token.strip(_FINAL_TOKEN_STRIP)
        if len(core) == 1 and core.upper() in OPTION_LETTERS:
            position = text.rindex(last_token) + last_token.index(core)
            candidates.setdefault(position, (core.upper(), last_token))
    if not candidates:
        raise NoAnswerFound("no option letter in text")
    letter, span = candidates[max(candidates)]
    return ExtractedAnswer(kind=AnswerKind.OPTION, option=letter, raw_span=span)


# --- yes / no ----------------------------------------------------------------

_YES_NO_RE = re.compile(r"\b(yes|no)\b", re.IGNORECASE)


def extract_yesno(text: str) -> ExtractedAnswer:
    """Return the last word-boundary "yes" or "no" token, case-insensitively."""
    last: re.Match[str] | None = None
    for match in _YES_NO_RE.finditer(text):
        last = match
    if last is None:
        raise NoAnswerFound("no yes/no token in text")
    return ExtractedAnswer(
        kind=AnswerKind.YES_NO,
        yesno=last.group(1).lower() == "yes",
        raw_span=last.group(0),
    )


# --- free strings --------------------------------------------------------------

_ANSWER_ANCHOR_RE = re.compile(r"\banswer\b", re.IGNORECASE)
_ALPHA_TOKEN_RE = re.compile(r"[A-Za-z]+")


def extract_string(text: str) -> ExtractedAnswer:
    """Return the last alphabetic token after the final "answer", lowercased.

    Quotes and punctuation around the token fall away. When no "answer"
    anchor exists the whole text is searched, so extracting from an
    already-normalized answer is a no-op.
    """
    anchor_end = 0
    for match in _ANSWER_ANCHOR_RE.finditer(text):
        anchor_end = match.end()
    region = text[anchor_end:]
    token: re.Match[str] | None = None
    for match in _ALPHA_TOKEN_RE.finditer(region):
        token = match
    if token is None:
        raise NoAnswerFound("no alphabetic token after the answer anchor")
    return ExtractedAnswer(
        kind=AnswerKind.STRING,
        text=token.group().lower(),
        raw_span=token.group(),
    )


_EXTRACTORS = {
    AnswerKind.NUMBER: extract_number,
    AnswerKind.OPTION: extract_option,
    AnswerKind.YES_NO: extract_yesno,
    AnswerKind.STRING: extract_string,
}


def extract_answer(text: str, kind: AnswerKind) -> ExtractedAnswer:
    """Dispatch to the extractor for `kind`."""
    return _EXTRACTORS[kind](text)


# --- equality -------------------------------------------------------------------

def _round6(value: float) -> Decimal:
    """Round half away from zero to six decimal places."""
    with localcontext() as ctx:
        ctx.prec = 400  # enough for any finite double plus six decimals
        return Decimal(repr(value)).quantize(Decimal("0.000001"), rounding=ROUND_HALF_UP)


def numbers_equal(a: float, b: float) -> bool:
    """Numeric match rule: six-decimal rounded equality, with an extra
    1e-6 absolute tolerance when either side is a whole number."""
    if _round6(a) == _round6(b):
        return True
    if (float(a).is_integer() or float(b).is_integer()) and abs(a - b) < 1e-6:
        return True
    return False


def _payloads_equal(kind: AnswerKind, a: float | str | bool, b: float | str | bool) -> bool:
    if kind is AnswerKind.NUMBER:
        return numbers_equal(float(a), float(b))  # type: ignore[arg-type]
    if kind is AnswerKind.STRING:
        return str(a).strip().lower() == str(b).strip().lower()
    return a == b


def answers_equal(predicted: ExtractedAnswer, gold: GoldAnswer) -> bool:
    """Decide whether an extracted answer matches the gold answer."""
    if predicted.kind is not gold.kind:
        raise KindMismatch(f"predicted {predicted.kind.value} vs gold {gold.kind.value}")
    return _payloads_equal(gold.kind, predicted.payload, gold.payload)


def votes_equal(a: ExtractedAnswer, b: ExtractedAnswer) -> bool:
    """Equivalence used to pool answers during majority voting."""
    if a.kind is not b.kind:
        raise KindMismatch(f"{a.kind.value} vs {b.kind.value}")
    return _payloads_equal(a.kind, a.payload, b.payload)


# --- (de)serialization -------------------------------------------------------

def answer_to_payload(answer: ExtractedAnswer) -> dict:
    return {
        "kind": answer.kind.value,
        "value": answer.payload,
        "raw_span": answer.raw_span,
    }


def answer_from_payload(payload: dict) -> ExtractedAnswer:
    kind = AnswerKind.parse(payload["kind"])
    value = payload["value"]
    field = {
        AnswerKind.NUMBER: "number",
        AnswerKind.OPTION: "option",
        AnswerKind.YES_NO: "yesno",
        AnswerKind.STRING: "text",
    }[kind]
    if kind is AnswerKind.NUMBER:
        value = float(value)
    return ExtractedAnswer(kind=kind, raw_span=payload.get("raw_span", ""), **{field: value})


def gold_to_payload(gold: GoldAnswer) -> dict:
    return {"kind": gold.kind.value, "value": gold.payload}


def gold_from_payload(payload: dict) -> GoldAnswer:
    return GoldAnswer(AnswerKind.parse(payload["kind"]), payload["value"])
