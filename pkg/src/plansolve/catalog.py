"""Versioned, immutable registry of prompt strategies.

The catalog is data, not code: every trigger sentence and extraction
instruction lives in one JSON fixture under version control, so prompt
ablations are config edits. Trigger text is preserved byte-for-byte --
no whitespace or unicode normalization anywhere, because models are
sensitive to the exact prompt surface.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterator, Mapping

from .errors import CatalogParseError, DuplicateStrategyId, UnknownStrategy
from .extraction import AnswerKind

_BUNDLED_CATALOG = "data/strategies.json"


class StrategyFamily(Enum):
    ZERO_SHOT_COT = "zero-shot-cot"
    PS = "ps"
    PS_PLUS = "ps-plus"

    @classmethod
    def parse(cls, value: str) -> "StrategyFamily":
        try:
            return cls(value.strip().lower())
        except ValueError:
            raise ValueError(f"unknown strategy family: {value!r}") from None


@dataclass(frozen=True)
class PromptStrategy:
    """A named trigger sentence plus its answer-extraction instructions."""

    id: str
    family: StrategyFamily
    trigger: str
    extraction_instruction: str
    default_temperature: float = 0.0
    answer_kind_overrides: Mapping[AnswerKind, str] = field(default_factory=dict)

    def instruction_for(self, kind: AnswerKind) -> str:
        """Extraction instruction for `kind`; numbers use the base instruction."""
        return self.answer_kind_overrides.get(kind, self.extraction_instruction)


@dataclass(frozen=True)
class StrategyCatalog:
    entries: tuple[PromptStrategy, ...]
    version: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "_by_id", {entry.id: entry for entry in self.entries})

    def __iter__(self) -> Iterator[PromptStrategy]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def ids(self) -> tuple[str, ...]:
        return tuple(entry.id for entry in self.entries)

    def lookup(self, strategy_id: str) -> PromptStrategy:
        """Return the entry with the given id, unmodified."""
        try:
            return self._by_id[strategy_id]  # type: ignore[attr-defined]
        except KeyError:
            raise UnknownStrategy(strategy_id) from None


def lookup_strategy(catalog: StrategyCatalog, strategy_id: str) -> PromptStrategy:
    return catalog.lookup(strategy_id)


def _parse_entry(index: int, raw: object, source: str) -> PromptStrategy:
    where = f"{source}: strategy #{index}"
    if not isinstance(raw, dict):
        raise CatalogParseError(f"{where}: expected an object, got {type(raw).__name__}")

    def required(key: str) -> object:
        if key not in raw:
            raise CatalogParseError(f"{where}: missing field {key!r}")
        return raw[key]

    strategy_id = required("id")
    if not isinstance(strategy_id, str) or not strategy_id:
        raise CatalogParseError(f"{where}: id must be a non-empty string")
    where = f"{source}: strategy {strategy_id!r}"

    try:
        family = StrategyFamily.parse(str(required("family")))
    except ValueError as exc:
        raise CatalogParseError(f"{where}: {exc}") from None

    trigger = required("trigger")
    if not isinstance(trigger, str) or not trigger:
        raise CatalogParseError(f"{where}: trigger must be non-empty")

    instruction = required("extraction_instruction")
    if not isinstance(instruction, str) or not instruction:
        raise CatalogParseError(f"{where}: extraction_instruction must be non-empty")

    temperature = required("temperature")
    if isinstance(temperature, bool) or not isinstance(temperature, (int, float)):
        raise CatalogParseError(f"{where}: temperature must be a number")
    if not 0.0 <= float(temperature) <= 2.0:
        raise CatalogParseError(f"{where}: temperature {temperature} outside [0, 2]")
    if float(temperature) != 0.0:
        # Greedy decoding is the catalog-wide default; sampling temperature
        # is a run-time (self-consistency) setting, never catalog data.
        raise CatalogParseError(f"{where}: catalog entries must declare temperature 0")

    overrides: dict[AnswerKind, str] = {}
    raw_overrides = raw.get("answer_kind_overrides", {})
    if not isinstance(raw_overrides, dict):
        raise CatalogParseError(f"{where}: answer_kind_overrides must be an object")
    for kind_name, text in raw_overrides.items():
        try:
            kind = AnswerKind.parse(str(kind_name))
        except ValueError as exc:
            raise CatalogParseError(f"{where}: {exc}") from None
        if not isinstance(text, str) or not text:
            raise CatalogParseError(f"{where}: override for {kind_name!r} must be non-empty")
        overrides[kind] = text

    return PromptStrategy(
        id=strategy_id,
        family=family,
        trigger=trigger,
        extraction_instruction=instruction,
        default_temperature=float(temperature),
        answer_kind_overrides=overrides,
    )


def parse_catalog(text: str, source: str = "<string>") -> StrategyCatalog:
    """Parse and validate catalog JSON; triggers are kept byte-exact."""
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CatalogParseError(f"{source}: line {exc.lineno}: {exc.msg}") from None
    if not isinstance(document, dict):
        raise CatalogParseError(f"{source}: top level must be an object")
    version = document.get("version")
    if not isinstance(version, str) or not version:
        raise CatalogParseError(f"{source}: missing catalog version")
    raw_entries = document.get("strategies")
    if not isinstance(raw_entries, list) or not raw_entries:
        raise CatalogParseError(f"{source}: 'strategies' must be a non-empty list")

    entries = tuple(_parse_entry(i, raw, source) for i, raw in enumerate(raw_entries))
    seen: set[str] = set()
    for entry in entries:
        if entry.id in seen:
            raise DuplicateStrategyId(entry.id)
        seen.add(entry.id)
    return StrategyCatalog(entries=entries, version=version)


def load_catalog(path: str | Path | None = None) -> StrategyCatalog:
    """Load the catalog from `path`, or the bundled fixture when omitted."""
    if path is None:
        text = resources.files(__package__).joinpath(_BUNDLED_CATALOG).read_text("utf-8")
        return parse_catalog(text, source=_BUNDLED_CATALOG)
    file_path = Path(path)
    try:
        text = file_path.read_text("utf-8")
    except OSError as exc:
        raise CatalogParseError(f"{file_path}: {exc}") from None
    return parse_catalog(text, source=str(file_path))


def dump_catalog(catalog: StrategyCatalog) -> str:
    """Serialize a catalog back to its JSON container format."""
    document = {
        "version": catalog.version,
        "strategies": [
            {
                "id": entry.id,
                "family": entry.family.value,
                "trigger": entry.trigger,
                "extraction_instruction": entry.extraction_instruction,
                "temperature": entry.default_temperature,
                "answer_kind_overrides": {
                    kind.value: text for kind, text in entry.answer_kind_overrides.items()
                },
            }
            for entry in catalog.entries
        ],
    }
    return json.dumps(document, ensure_ascii=False, indent=2) + "\n"
