"""Command-line workflow: sync, eval, align, errors, stats, fetch, transcripts.

Exit codes are a stable contract: 0 success, 1 partial failure, 2 bad
configuration or usage.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import dataset, gateway as gw
from .alignment import (
    align_deterministic,
    alignment_from_doc,
    alignment_to_doc,
    multi_vote_align,
    score_alignment,
)
from .error_analysis import ErrorAnalyzer, ledger_jsonable, render_ledger
from .errors import ConfigError, StageFailed, TableSyncError
from .metrics import aggregate_reports, evaluate_instance, report_jsonable
from .pipeline import Pipeline, Strategy, traces_from_jsonable, traces_jsonable
from .stub import StubBackend, StubRuleSet
from .tables import DEFAULT_PIVOT, InfoTable, parse_table, serialize_table
from .wiki import MediaWikiClient

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2

_CONFIG_KEYS = (
    "strategy",
    "backend",
    "model",
    "models",
    "eval_models",
    "rounds",
    "pivot",
    "concurrency",
    "corpus",
    "out",
    "lexicons",
    "transcripts",
    "endpoint",
    "api_key",
)


@dataclass
class RunConfig:
    """Resolved run settings; precedence is flags > environment > config file."""

    strategy: str = "hierarchical"
    backend: str = "stub"
    model: str = "stub-model"
    models: tuple[str, ...] = ()
    eval_models: tuple[str, ...] = ()
    rounds: int = 1
    pivot: str = DEFAULT_PIVOT
    concurrency: int = 4
    corpus: str = ""
    out: str = ""
    lexicons: str = ""
    transcripts: str = ""
    record: bool = False
    endpoint: str = ""
    api_key: str = ""

    def snapshot_lines(self) -> list[str]:
        values = {
            "strategy": self.strategy,
            "backend": self.backend,
            "model": self.model,
            "models": ",".join(self.models),
            "eval_models": ",".join(self.eval_models),
            "rounds": str(self.rounds),
            "pivot": self.pivot,
            "concurrency": str(self.concurrency),
            "corpus": self.corpus,
            "out": self.out,
            "lexicons": self.lexicons,
            "transcripts": self.transcripts,
            "record": str(self.record).lower(),
            "endpoint": self.endpoint,
            "api_key": "***" if self.api_key else "",
        }
        return [f"{key} = {values[key]}" for key in sorted(values)]


def _read_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text("utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"malformed config line: {line!r}")
        values[key.strip()] = value.strip()
    return values


def _split_csv(value: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in value.split(",") if part.strip())


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge flags, SYNC_LLM_* environment, and the optional config file."""
    file_values = _read_config_file(args.config) if getattr(args, "config", None) else {}
    for key in file_values:
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}")

    def pick(name: str, env_var: str | None, default: str) -> str:
        flag = getattr(args, name, None)
        if flag not in (None, ""):
            return str(flag)
        if env_var and os.environ.get(env_var):
            return os.environ[env_var]
        return file_values.get(name, default)

    config = RunConfig(
        strategy=pick("strategy", None, "hierarchical"),
        backend=pick("backend", None, "stub"),
        model=pick("model", gw.ENV_MODEL, "stub-model"),
        models=_split_csv(pick("models", None, "")),
        eval_models=_split_csv(pick("eval_models", None, "")),
        rounds=int(pick("rounds", None, "1")),
        pivot=pick("pivot", None, DEFAULT_PIVOT),
        concurrency=int(pick("concurrency", None, "4")),
        corpus=pick("corpus", None, ""),
        out=pick("out", None, ""),
        lexicons=pick("lexicons", None, ""),
        transcripts=pick("transcripts", None, ""),
        record=bool(getattr(args, "record", False)),
        endpoint=pick("endpoint", gw.ENV_ENDPOINT, ""),
        api_key=pick("api_key", gw.ENV_API_KEY, ""),
    )
    if not config.eval_models:
        config.eval_models = (config.model,)
    if config.rounds < 1:
        raise ConfigError("rounds must be >= 1")
    if config.backend not in ("stub", "http", "replay"):
        raise ConfigError(f"unknown backend {config.backend!r}")
    if config.backend == "replay":
        if not config.transcripts:
            raise ConfigError("replay backend requires --transcripts")
        if not Path(config.transcripts).is_file():
            raise ConfigError(f"transcript file not found: {config.transcripts}")
    if config.backend == "http" and not config.endpoint:
        raise ConfigError(f"http backend requires --endpoint or {gw.ENV_ENDPOINT}")
    return config


def load_rules(config: RunConfig) -> StubRuleSet:
    if config.lexicons:
        if not Path(config.lexicons).is_dir():
            raise ConfigError(f"lexicon directory not found: {config.lexicons}")
        return StubRuleSet.from_dir(config.lexicons)
    return StubRuleSet()


def build_gateway(config: RunConfig) -> gw.Gateway:
    if config.backend == "stub":
        backend = StubBackend(load_rules(config))
    elif config.backend == "replay":
        backend = gw.ReplayBackend(config.transcripts)
    else:
        backend = gw.HttpBackend(config.endpoint, config.api_key)
    record_path = config.transcripts if (config.record and config.backend != "replay") else None
    return gw.Gateway(backend, record_path=record_path, in_flight=config.concurrency)


def _write_json(path: Path, payload: object) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n", "utf-8")


def _write_snapshot(out_dir: Path, config: RunConfig) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.snapshot").write_text("\n".join(config.snapshot_lines()) + "\n", "utf-8")


def _select_instances(corpus: str, selector: str | None) -> list[Path]:
    if not corpus or not Path(corpus).is_dir():
        raise ConfigError(f"corpus directory not found: {corpus!r}")
    dirs = dataset.iter_instance_dirs(corpus)
    if selector:
        dirs = [d for d in dirs if selector in str(d.relative_to(corpus))]
    if not dirs:
        raise ConfigError("no instances matched")
    return dirs


def _evaluate_and_write(
    out_dir: Path,
    instance,
    output: InfoTable,
    config: RunConfig,
    gateway: gw.Gateway,
) -> dict:
    evaluation = evaluate_instance(
        instance.source,
        output,
        instance.gold,
        gateway=gateway,
        evaluator_models=config.eval_models,
    )
    payload = {
        "entity": instance.source.entity,
        "category": instance.source.category,
        "languages": {
            "source": instance.source.language,
            "reference": instance.reference.language,
        },
        "ensemble": report_jsonable(evaluation.ensemble),
        "per_model": {m: report_jsonable(r) for m, r in evaluation.per_model.items()},
        "flagged_rows": [list(item) for item in evaluation.flagged],
    }
    _write_json(out_dir / "report.json", payload)
    return {"ensemble": evaluation.ensemble, "payload": payload}


def cmd_sync(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    if not config.out:
        raise ConfigError("sync requires --out")
    try:
        strategy = Strategy(config.strategy)
    except ValueError:
        raise ConfigError(f"unknown strategy {config.strategy!r}") from None
    instance_dirs = _select_instances(config.corpus, args.instance)
    gateway = build_gateway(config)
    pipeline = Pipeline(gateway, config.model, pivot=config.pivot)
    out_root = Path(config.out)

    def run_one(directory: Path):
        instance = dataset.load_instance(directory)
        return instance, pipeline.run(instance, strategy)

    results: dict[Path, tuple] = {}
    failures: dict[Path, StageFailed] = {}
    with ThreadPoolExecutor(max_workers=max(1, config.concurrency)) as pool:
        futures = {pool.submit(run_one, d): d for d in instance_dirs}
        for future, directory in futures.items():
            try:
                results[directory] = future.result()
            except StageFailed as exc:
                failures[directory] = exc

    reports = []
    for directory in instance_dirs:
        rel = directory.relative_to(config.corpus)
        out_dir = out_root / rel
        out_dir.mkdir(parents=True, exist_ok=True)
        if directory in failures:
            exc = failures[directory]
            _write_json(out_dir / "traces.json", traces_jsonable(exc.traces))
            _write_json(out_dir / "failure.json", {"stage": exc.stage, "error": str(exc)})
            print(f"FAIL {rel}: {exc}", file=sys.stderr)
            continue
        instance, result = results[directory]
        (out_dir / f"output.{result.output.language}.table").write_text(
            serialize_table(result.output) + "\n", "utf-8"
        )
        _write_json(out_dir / "traces.json", traces_jsonable(result.traces))
        evaluated = _evaluate_and_write(out_dir, instance, result.output, config, gateway)
        reports.append(evaluated["ensemble"])
        print(f"ok {rel}")

    _write_json(out_root / "report.json", aggregate_reports(reports))
    _write_snapshot(out_root, config)
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    if not args.outputs:
        raise ConfigError("eval requires --outputs")
    if not config.out:
        raise ConfigError("eval requires --out")
    instance_dirs = _select_instances(config.corpus, args.instance)
    gateway = build_gateway(config)
    out_root = Path(config.out)

    reports = []
    missing = 0
    for directory in instance_dirs:
        rel = directory.relative_to(config.corpus)
        instance = dataset.load_instance(directory)
        table_path = Path(args.outputs) / rel / f"output.{instance.source.language}.table"
        if not table_path.is_file():
            print(f"FAIL {rel}: no output table at {table_path}", file=sys.stderr)
            missing += 1
            continue
        output = InfoTable(
            instance.source.entity,
            instance.source.language,
            instance.source.category,
            parse_table(table_path.read_text("utf-8")),
        )
        evaluated = _evaluate_and_write(out_root / rel, instance, output, config, gateway)
        reports.append(evaluated["ensemble"])
        print(f"ok {rel}")
    _write_json(out_root / "report.json", aggregate_reports(reports))
    _write_snapshot(out_root, config)
    return EXIT_PARTIAL if missing else EXIT_OK


def _table_from_file(path: str, language: str, name: str) -> InfoTable:
    try:
        rows = parse_table(Path(path).read_text("utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read table {path}: {exc}") from exc
    return InfoTable(name, language, "Uncategorized", rows)


def cmd_align(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    left = _table_from_file(args.left, args.language, "left")
    right = _table_from_file(args.right, args.language, "right")
    if config.models:
        gateway = build_gateway(config)
        alignment = multi_vote_align(left, right, config.models, config.rounds, gateway)
    else:
        alignment = align_deterministic(left, right)
    doc = alignment_to_doc(alignment)
    if args.out:
        _write_json(Path(args.out), doc)
    else:
        print(json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False))
    if args.gold_alignment:
        gold_doc = json.loads(Path(args.gold_alignment).read_text("utf-8"))
        score = score_alignment(alignment, alignment_from_doc(gold_doc))
        print(f"precision={score.precision:.4f} recall={score.recall:.4f} f1={score.f1:.4f}")
    return EXIT_OK


def cmd_errors(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    instance = dataset.load_instance(args.instance_dir)
    try:
        docs = json.loads(Path(args.traces).read_text("utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read traces {args.traces}: {exc}") from exc
    traces = traces_from_jsonable(docs)
    analyzer = ErrorAnalyzer(load_rules(config), pivot=config.pivot)
    ledger = analyzer.stagewise_ledger(instance, traces)
    print(render_ledger(ledger))
    if args.out:
        _write_json(Path(args.out), ledger_jsonable(ledger))
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    stats = dataset.corpus_stats(args.corpus)
    payload = {
        "instances": stats.instance_count,
        "by_language": dict(sorted(stats.tables_by_language.items())),
        "by_category": dict(sorted(stats.tables_by_category.items())),
    }
    if args.json:
        print(json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False))
    else:
        print(f"instances: {stats.instance_count}")
        for name, counts in (("language", payload["by_language"]), ("category", payload["by_category"])):
            print(f"by {name}:")
            for key, value in counts.items():
                print(f"  {key}: {value}")
    return EXIT_OK


def cmd_fetch(args: argparse.Namespace) -> int:
    client = MediaWikiClient(api_template=args.api_template)
    table = client.fetch_revision(args.title, args.lang, args.as_of, category=args.category)
    text = serialize_table(table) + "\n"
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, "utf-8")
        print(f"wrote {len(table.rows)} rows ({table.revision_tag}) to {args.out}")
    else:
        print(text, end="")
    return EXIT_OK


def cmd_transcripts(args: argparse.Namespace) -> int:
    path = Path(args.file)
    if not path.is_file():
        raise ConfigError(f"transcript file not found: {path}")
    records = [json.loads(line) for line in path.read_text("utf-8").splitlines() if line.strip()]
    if args.digest:
        for record in records:
            if record["digest"].startswith(args.digest):
                print(record["response"])
                return EXIT_OK
        raise ConfigError(f"digest {args.digest!r} not in transcript")
    for record in records:
        tag = record.get("request", {}).get("tag", "")
        print(f"{record['digest']}  tag={tag}  latency_ms={record.get('latency_ms', '?')}")
    print(f"{len(records)} records")
    return EXIT_OK


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--backend", choices=["stub", "http", "replay"])
    parser.add_argument("--model", help="pipeline model id")
    parser.add_argument("--models", help="comma-separated alignment voter model ids")
    parser.add_argument("--eval-models", dest="eval_models", help="comma-separated evaluator model ids")
    parser.add_argument("--rounds", type=int, help="voting rounds per model")
    parser.add_argument("--pivot", help="pivot language code (default en)")
    parser.add_argument("--concurrency", type=int, help="instance/in-flight parallelism cap")
    parser.add_argument("--lexicons", help="stub lexicon directory")
    parser.add_argument("--transcripts", help="transcript file for record/replay")
    parser.add_argument("--record", action="store_true", help="record completions to the transcript file")
    parser.add_argument("--endpoint", help="http backend endpoint URL")
    parser.add_argument("--api-key", dest="api_key", help="http backend API key")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tablesync", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sync = sub.add_parser("sync", help="run a synchronization strategy over a corpus")
    p_sync.add_argument("--corpus", help="corpus root directory")
    p_sync.add_argument("--out", help="output directory for tables, traces, reports")
    p_sync.add_argument("--strategy", choices=[s.value for s in Strategy])
    p_sync.add_argument("--instance", help="substring selector over instance paths")
    _add_config_flags(p_sync)
    p_sync.set_defaults(func=cmd_sync)

    p_eval = sub.add_parser("eval", help="evaluate existing output tables against gold")
    p_eval.add_argument("--corpus", help="corpus root directory")
    p_eval.add_argument("--outputs", help="directory holding output tables from sync")
    p_eval.add_argument("--out", help="report output directory")
    p_eval.add_argument("--instance", help="substring selector over instance paths")
    _add_config_flags(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_align = sub.add_parser("align", help="align two table files")
    p_align.add_argument("--left", required=True)
    p_align.add_argument("--right", required=True)
    p_align.add_argument("--language", default=DEFAULT_PIVOT)
    p_align.add_argument("--out", help="write the alignment document here")
    p_align.add_argument("--gold-alignment", dest="gold_alignment", help="score against this alignment doc")
    _add_config_flags(p_align)
    p_align.set_defaults(func=cmd_align)

    p_errors = sub.add_parser("errors", help="stage-wise error ledger from run traces")
    p_errors.add_argument("--instance-dir", dest="instance_dir", required=True)
    p_errors.add_argument("--traces", required=True)
    p_errors.add_argument("--out", help="write the ledger JSON here")
    _add_config_flags(p_errors)
    p_errors.set_defaults(func=cmd_errors)

    p_stats = sub.add_parser("stats", help="corpus statistics")
    p_stats.add_argument("--corpus", required=True)
    p_stats.add_argument("--json", action="store_true")
    p_stats.set_defaults(func=cmd_stats)

    p_fetch = sub.add_parser("fetch", help="fetch an infobox revision from a wiki")
    p_fetch.add_argument("--title", required=True)
    p_fetch.add_argument("--lang", required=True)
    p_fetch.add_argument("--as-of", dest="as_of", required=True, help="ISO timestamp upper bound")
    p_fetch.add_argument("--category", default="Uncategorized")
    p_fetch.add_argument("--api-template", dest="api_template", default="https://{lang}.wikipedia.org/w/api.php")
    p_fetch.add_argument("--out", help="write the table file here")
    p_fetch.set_defaults(func=cmd_fetch)

    p_tr = sub.add_parser("transcripts", help="inspect a transcript file")
    p_tr.add_argument("file")
    p_tr.add_argument("--digest", help="print the recorded response for this digest prefix")
    p_tr.set_defaults(func=cmd_transcripts)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TableSyncError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
