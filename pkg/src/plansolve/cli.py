"""Command-line entry point.

Subcommands: catalog, ingest, eval, vote-replay, analyze, cache-inspect.
Exit codes: 0 success; 1 evaluation completed but backend failures were
recorded; 2 configuration or parse errors. Every eval echoes its fully
resolved configuration (flags > config file > environment > defaults)
so runs are auditable, and the default backend is strict replay --
going live is always an explicit choice.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from . import analysis, datasets, runner
from .catalog import StrategyCatalog, load_catalog
from .errors import EmptyInput, HarnessError
from .gateway import (
    API_KEY_ENV,
    BASE_URL_ENV,
    Backend,
    CacheStore,
    CachingBackend,
    CompletionRequest,
    CompletionExchange,
    LiveBackend,
    MockBackend,
    ReplayBackend,
)

EXIT_OK = 0
EXIT_BACKEND_FAILURES = 1
EXIT_CONFIG_ERROR = 2

_EVAL_DEFAULTS: dict[str, object] = {
    "backend": "replay",
    "model": "offline-model",
    "seed": 0,
    "limit": None,
    "sc_n": None,
    "sc_temp": None,
    "parallelism": 1,
    "max_tokens_step1": None,
    "max_tokens_step2": None,
    "strict_counts": False,
    "record": False,
    "replay_fallthrough": False,
    "offline": False,
    "base_url": None,
    "api_key": None,
    "cache_dir": None,
    "mock_script": None,
    "data": None,
    "log": None,
    "report": None,
    "dump_prompts": None,
}


class _PromptDumpBackend:
    """Wraps a backend and writes every outgoing prompt verbatim to a file."""

    def __init__(self, inner: Backend, path: Path):
        self._inner = inner
        self._handle = path.open("w", encoding="utf-8")

    def complete(self, request: CompletionRequest) -> CompletionExchange:
        self._handle.write(
            json.dumps(
                {
                    "model_id": request.model_id,
                    "temperature": request.temperature,
                    "max_tokens": request.max_tokens,
                    "sample_index": request.sample_index,
                    "prompt": request.prompt,
                },
                ensure_ascii=False,
                sort_keys=True,
            )
            + "\n"
        )
        self._handle.flush()
        return self._inner.complete(request)

    def close(self) -> None:
        self._handle.close()


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_CONFIG_ERROR


def _load_catalog(args: argparse.Namespace) -> StrategyCatalog:
    return load_catalog(getattr(args, "catalog", None))


def _preview(text: str, limit: int = 60) -> str:
    flat = text.replace("\n", "\\n")
    return flat if len(flat) <= limit else flat[: limit - 3] + "..."


# --- catalog ---------------------------------------------------------------

def _cmd_catalog(args: argparse.Namespace) -> int:
    catalog = _load_catalog(args)
    if args.action == "list":
        print(f"catalog version {catalog.version} ({len(catalog)} strategies)")
        width = max(len(entry.id) for entry in catalog) + 2
        print(f"{'id'.ljust(width)}{'family'.ljust(15)}{'temp'.ljust(7)}trigger")
        for entry in catalog:
            print(
                f"{entry.id.ljust(width)}{entry.family.value.ljust(15)}"
                f"{str(entry.default_temperature).ljust(7)}{_preview(entry.trigger)}"
            )
        return EXIT_OK
    # show
    entry = catalog.lookup(args.id)
    print(
        json.dumps(
            {
                "id": entry.id,
                "family": entry.family.value,
                "trigger": entry.trigger,
                "extraction_instruction": entry.extraction_instruction,
                "temperature": entry.default_temperature,
                "answer_kind_overrides": {
                    kind.value: text for kind, text in entry.answer_kind_overrides.items()
                },
                "trigger_sha256": hashlib.sha256(entry.trigger.encode("utf-8")).hexdigest(),
            },
            ensure_ascii=False,
            indent=2,
        )
    )
    return EXIT_OK


# --- ingest ------------------------------------------------------------------

def _cmd_ingest(args: argparse.Namespace) -> int:
    count = datasets.ingest_dataset(args.dataset, args.src, args.dst)
    print(f"ingested {count} {args.dataset} examples -> {args.dst}")
    return EXIT_OK


# --- eval ----------------------------------------------------------------------

def _resolve_eval_config(args: argparse.Namespace) -> dict:
    resolved = dict(_EVAL_DEFAULTS)
    resolved["base_url"] = os.environ.get(BASE_URL_ENV)
    resolved["api_key"] = os.environ.get(API_KEY_ENV)
    if args.config is not None:
        try:
            overrides = json.loads(Path(args.config).read_text("utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise HarnessError(f"config file {args.config}: {exc}") from None
        if not isinstance(overrides, dict):
            raise HarnessError(f"config file {args.config}: expected a JSON object")
        unknown = set(overrides) - set(_EVAL_DEFAULTS) - {"dataset", "strategy"}
        if unknown:
            raise HarnessError(f"config file {args.config}: unknown keys {sorted(unknown)}")
        resolved.update(overrides)
    for key in _EVAL_DEFAULTS:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            resolved[key] = flag_value
    for key in ("dataset", "strategy"):
        value = getattr(args, key, None) or resolved.get(key)
        if not value:
            raise HarnessError(f"--{key} is required (flag or config file)")
        resolved[key] = value
    return resolved


def _build_backend(config: dict) -> Backend:
    name = str(config["backend"])
    offline = bool(config["offline"])
    if name == "mock":
        if not config["mock_script"]:
            raise HarnessError("--mock-script is required with the mock backend")
        return MockBackend.from_script(str(config["mock_script"]))
    if name == "live":
        if offline:
            raise HarnessError("--offline forbids the live backend")
        live = LiveBackend(
            base_url=config["base_url"],
            api_key=config["api_key"],
            max_in_flight=max(1, int(config["parallelism"])),  # type: ignore[arg-type]
        )
        if config["record"]:
            if not config["cache_dir"]:
                raise HarnessError("--record needs --cache-dir")
            return CachingBackend(live, CacheStore(str(config["cache_dir"])))
        return live
    if name == "replay":
        if not config["cache_dir"]:
            raise HarnessError("--cache-dir is required with the replay backend")
        fallthrough: Backend | None = None
        if config["replay_fallthrough"]:
            if offline:
                raise HarnessError("--offline forbids replay fall-through to live")
            fallthrough = LiveBackend(base_url=config["base_url"], api_key=config["api_key"])
        return ReplayBackend(CacheStore(str(config["cache_dir"])), fallthrough=fallthrough)
    raise HarnessError(f"unknown backend {name!r} (use replay, mock, or live)")


def _echo_config(config: dict, trigger_sha256: str) -> dict:
    echo = {
        "dataset": config["dataset"],
        "strategy": config["strategy"],
        "trigger_sha256": trigger_sha256,
        "backend": config["backend"],
        "model": config["model"],
        "seed": config["seed"],
        "limit": config["limit"],
        "sc": (
            {"n": config["sc_n"], "temperature": config["sc_temp"]}
            if config["sc_n"] is not None
            else None
        ),
        "parallelism": config["parallelism"],
        "strict_counts": config["strict_counts"],
        "offline": config["offline"],
        "record": config["record"],
        "replay_fallthrough": config["replay_fallthrough"],
    }
    print("resolved-config " + json.dumps(echo, ensure_ascii=False, sort_keys=True))
    return echo


def _cmd_eval(args: argparse.Namespace) -> int:
    config = _resolve_eval_config(args)
    catalog = _load_catalog(args)
    strategy = catalog.lookup(str(config["strategy"]))
    descriptor = datasets.descriptor_for(str(config["dataset"]))
    if not config["data"]:
        raise HarnessError("--data is required (canonical dataset file)")
    examples = datasets.load_dataset(
        descriptor, str(config["data"]), strict=bool(config["strict_counts"])
    )
    if config["limit"] is not None:
        examples = datasets.slice_dataset(examples, int(config["seed"]), int(config["limit"]))  # type: ignore[arg-type]

    sc = None
    if (config["sc_n"] is None) != (config["sc_temp"] is None):
        raise HarnessError("--sc-n and --sc-temp must be given together")
    if config["sc_n"] is not None:
        try:
            sc = runner.SelfConsistencyConfig(
                n=int(config["sc_n"]), temperature=float(config["sc_temp"])  # type: ignore[arg-type]
            )
        except ValueError as exc:
            raise HarnessError(str(exc)) from None

    run_config_kwargs: dict = {}
    if config["max_tokens_step1"] is not None:
        run_config_kwargs["max_tokens_step1"] = int(config["max_tokens_step1"])  # type: ignore[arg-type]
    if config["max_tokens_step2"] is not None:
        run_config_kwargs["max_tokens_step2"] = int(config["max_tokens_step2"])  # type: ignore[arg-type]
    run_config = runner.RunConfig(
        strategy_id=strategy.id,
        dataset=descriptor.name,
        model_id=str(config["model"]),
        sc=sc,
        seed=int(config["seed"]),  # type: ignore[arg-type]
        parallelism=int(config["parallelism"]),  # type: ignore[arg-type]
        **run_config_kwargs,
    )

    backend = _build_backend(config)
    dumper: _PromptDumpBackend | None = None
    if config["dump_prompts"]:
        dumper = _PromptDumpBackend(backend, Path(str(config["dump_prompts"])))
        backend = dumper

    trigger_sha256 = hashlib.sha256(strategy.trigger.encode("utf-8")).hexdigest()
    echo = _echo_config(config, trigger_sha256)
    try:
        report, records = runner.run_dataset(
            examples,
            strategy,
            backend,
            run_config,
            log_path=str(config["log"]) if config["log"] else None,
        )
    finally:
        if dumper is not None:
            dumper.close()

    backend_failures = sum(1 for record in records if record.failures)
    report_payload = {
        "config": echo,
        "dataset": report.dataset,
        "strategy_id": report.strategy_id,
        "total": report.total,
        "correct": report.correct,
        "incorrect": report.incorrect,
        "unanswered": report.unanswered,
        "backend_failures": backend_failures,
        "accuracy": report.accuracy,
        "accuracy_percent": runner.format_percent(report.accuracy),
        "records_ref": report.records_ref,
    }
    if config["report"]:
        report_path = Path(str(config["report"]))
        report_path.parent.mkdir(parents=True, exist_ok=True)
        report_path.write_text(
            json.dumps(report_payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
            "utf-8",
        )
    _print_report_table(report_payload)
    return EXIT_BACKEND_FAILURES if backend_failures else EXIT_OK


def _print_report_table(payload: dict) -> None:
    columns = ("dataset", "strategy_id", "total", "correct", "incorrect", "unanswered")
    widths = {name: max(len(name), len(str(payload[name]))) + 2 for name in columns}
    header = "".join(name.ljust(widths[name]) for name in columns) + "accuracy"
    row = (
        "".join(str(payload[name]).ljust(widths[name]) for name in columns)
        + payload["accuracy_percent"]
    )
    print(header)
    print(row)


# --- vote-replay ------------------------------------------------------------

def _cmd_vote_replay(args: argparse.Namespace) -> int:
    records = runner.read_records(args.records)
    if not records:
        return _fail(f"no records in {args.records}")
    rescored = [runner.rescore_record(record) for record in records]
    report = runner.compute_report(rescored, records_ref=str(args.records))
    changed = sum(1 for old, new in zip(records, rescored) if old.correct != new.correct)
    payload = {
        "dataset": report.dataset,
        "strategy_id": report.strategy_id,
        "total": report.total,
        "correct": report.correct,
        "incorrect": report.incorrect,
        "unanswered": report.unanswered,
        "backend_failures": sum(1 for record in rescored if record.failures),
        "accuracy": report.accuracy,
        "accuracy_percent": runner.format_percent(report.accuracy),
        "rescored_changes": changed,
        "records_ref": report.records_ref,
    }
    if args.report:
        Path(args.report).write_text(
            json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n", "utf-8"
        )
    _print_report_table(payload)
    return EXIT_OK


# --- analyze --------------------------------------------------------------------

def _cmd_analyze(args: argparse.Namespace) -> int:
    records = runner.read_records(args.records)
    if not records:
        return _fail(f"no records in {args.records}")
    rate = analysis.plan_presence_rate(records)
    print(f"plan-presence-rate {rate:.2f} ({len(records)} records)")

    label_rows = datasets.read_canonical(args.labels)
    labels = analysis.labels_from_records(label_rows, source=str(args.labels))
    distribution = analysis.error_distribution(labels)
    print("error-distribution " + json.dumps({k.value: v for k, v in distribution.items()}))

    features = [analysis.features_from_record(record) for record in records]
    try:
        matrix = analysis.correlation_matrix(features, labels)
    except EmptyInput:
        matrix = None
        print("correlation matrix skipped: need at least 2 joined rows")
    if matrix is not None:
        print(analysis.render_matrix(matrix))
    if args.out:
        payload = {
            "plan_presence_rate": rate,
            "error_distribution": {k.value: v for k, v in distribution.items()},
            "correlation": analysis.matrix_to_json(matrix) if matrix is not None else None,
        }
        Path(args.out).write_text(
            json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n", "utf-8"
        )
    return EXIT_OK


# --- cache-inspect ----------------------------------------------------------------

def _cmd_cache_inspect(args: argparse.Namespace) -> int:
    store = CacheStore(args.cache_dir)
    if args.key:
        entry = store.get(args.key)
        if entry is None:
            return _fail(f"no cache entry {args.key}")
        print(
            json.dumps(
                {
                    "key": entry.key,
                    "created_at": entry.created_at,
                    "backend": entry.exchange.backend,
                    "latency_ms": entry.exchange.latency_ms,
                    "request": {
                        "model_id": entry.exchange.request.model_id,
                        "temperature": entry.exchange.request.temperature,
                        "max_tokens": entry.exchange.request.max_tokens,
                        "sample_index": entry.exchange.request.sample_index,
                        "prompt": entry.exchange.request.prompt,
                    },
                    "response_text": entry.exchange.response_text,
                },
                ensure_ascii=False,
                indent=2,
            )
        )
        return EXIT_OK
    print(f"{len(store)} entries in {store.root}")
    print(f"{'key'.ljust(14)}{'backend'.ljust(9)}{'temp'.ljust(7)}{'idx'.ljust(5)}prompt")
    for entry in store.entries():
        request = entry.exchange.request
        print(
            f"{entry.key[:12].ljust(14)}{entry.exchange.backend.ljust(9)}"
            f"{f'{request.temperature:.3f}'.ljust(7)}{str(request.sample_index).ljust(5)}"
            f"{_preview(request.prompt, 50)}"
        )
    return EXIT_OK


# --- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plansolve",
        description="Zero-shot plan-and-solve prompting evaluation harness.",
    )
    parser.add_argument("--catalog", help="path to a strategy catalog file (default: bundled)")
    subparsers = parser.add_subparsers(dest="command", required=True)

    p_catalog = subparsers.add_parser("catalog", help="list or show prompt strategies")
    p_catalog.add_argument("action", choices=("list", "show"))
    p_catalog.add_argument("id", nargs="?", help="strategy id (for show)")
    p_catalog.set_defaults(handler=_cmd_catalog)

    p_ingest = subparsers.add_parser("ingest", help="convert a native dataset file to canonical JSONL")
    p_ingest.add_argument("dataset", choices=sorted(datasets.DATASETS))
    p_ingest.add_argument("src")
    p_ingest.add_argument("dst")
    p_ingest.set_defaults(handler=_cmd_ingest)

    p_eval = subparsers.add_parser("eval", help="run a strategy over a dataset")
    p_eval.add_argument("--config", help="JSON config file (flags override it)")
    p_eval.add_argument("--dataset", choices=sorted(datasets.DATASETS))
    p_eval.add_argument("--strategy", help="strategy id from the catalog")
    p_eval.add_argument("--data", help="canonical dataset file")
    p_eval.add_argument("--backend", choices=("replay", "mock", "live"))
    p_eval.add_argument("--cache-dir", dest="cache_dir")
    p_eval.add_argument("--mock-script", dest="mock_script")
    p_eval.add_argument("--model")
    p_eval.add_argument("--base-url", dest="base_url")
    p_eval.add_argument("--api-key", dest="api_key")
    p_eval.add_argument("--limit", type=int)
    p_eval.add_argument("--seed", type=int)
    p_eval.add_argument("--sc-n", dest="sc_n", type=int, help="self-consistency draws (>= 2)")
    p_eval.add_argument("--sc-temp", dest="sc_temp", type=float, help="self-consistency temperature")
    p_eval.add_argument("--parallelism", type=int)
    p_eval.add_argument("--max-tokens-step1", dest="max_tokens_step1", type=int)
    p_eval.add_argument("--max-tokens-step2", dest="max_tokens_step2", type=int)
    p_eval.add_argument("--log", help="append-only per-example results log (JSONL)")
    p_eval.add_argument("--report", help="write the machine-readable report here")
    p_eval.add_argument("--dump-prompts", dest="dump_prompts", help="write exact outgoing prompts here")
    p_eval.add_argument("--strict-counts", dest="strict_counts", action="store_const", const=True)
    p_eval.add_argument("--record", action="store_const", const=True, help="record live exchanges into --cache-dir")
    p_eval.add_argument(
        "--replay-fallthrough",
        dest="replay_fallthrough",
        action="store_const",
        const=True,
        help="on replay miss, fall through to live and record",
    )
    p_eval.add_argument("--offline", action="store_const", const=True, help="forbid the live backend")
    p_eval.set_defaults(handler=_cmd_eval)

    p_vote = subparsers.add_parser("vote-replay", help="re-run majority voting over a results log")
    p_vote.add_argument("--records", required=True)
    p_vote.add_argument("--report")
    p_vote.set_defaults(handler=_cmd_vote_replay)

    p_analyze = subparsers.add_parser("analyze", help="trace features, error distribution, correlation")
    p_analyze.add_argument("--records", required=True)
    p_analyze.add_argument("--labels", required=True, help="JSONL of {example_id, label}")
    p_analyze.add_argument("--out", help="write the machine-readable grid here")
    p_analyze.set_defaults(handler=_cmd_analyze)

    p_cache = subparsers.add_parser("cache-inspect", help="list or show recorded exchanges")
    p_cache.add_argument("--cache-dir", dest="cache_dir", required=True)
    p_cache.add_argument("--key")
    p_cache.set_defaults(handler=_cmd_cache_inspect)

    return parser


def run_cli(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG_ERROR if exc.code not in (0, None) else EXIT_OK
    if args.command == "catalog" and args.action == "show" and not args.id:
        return _fail("catalog show needs a strategy id")
    try:
        return args.handler(args)
    except HarnessError as exc:
        return _fail(f"{type(exc).__name__}: {exc}")


def main() -> None:  # pragma: no cover - thin wrapper
    sys.exit(run_cli())
