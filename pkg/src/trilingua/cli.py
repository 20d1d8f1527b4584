"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 runtime failure, 3 corpus
validation failure. All errors go to stderr; with ``--json`` each command
writes a machine-readable summary to stdout.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import threading
from pathlib import Path

from trilingua import client
from trilingua.client import BackendEndpoint, BackendError
from trilingua.config import AppConfig, ConfigError, load_config
from trilingua.corpus import CorpusError, load_corpus, load_results
from trilingua.metrics import (
    evaluate_results,
    load_gold,
    load_judgments,
    load_scores,
    render_report,
    win_rate_cells,
)
from trilingua.mockserve import TRANSLATORS, MockBehavior, serve_mock
from trilingua.pipeline import PipelineError, run_corpus
from trilingua.prompts import PromptError

CONFIG_ENV_VAR = "TRILINGUA_CONFIG"


class _UsageError(Exception):
    """Bad command line; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(f"{self.prog}: {message}\n{self.format_usage().rstrip()}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="trilingua", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the three-stage pipeline over a corpus")
    run.add_argument("--corpus", required=True, help="input corpus (JSONL)")
    run.add_argument("--config", help=f"config file (default: ${CONFIG_ENV_VAR})")
    run.add_argument("--out", required=True, help="final results file (JSONL)")
    run.add_argument("--parallelism", type=int, help="override config parallelism")
    run.add_argument("--checkpoint", help="override config checkpoint path")
    run.add_argument("--json", action="store_true", help="summary as JSON on stdout")
    run.set_defaults(func=_cmd_run)

    ev = sub.add_parser("eval", help="score results against reference texts")
    ev.add_argument("--pred", required=True, help="pipeline results file (JSONL)")
    ev.add_argument("--gold", required=True, help="reference texts (JSONL id/task/text)")
    ev.add_argument("--embed-endpoint", help="embedding backend base URL")
    ev.add_argument("--config", help=f"config file (default: ${CONFIG_ENV_VAR})")
    ev.add_argument("--out", help="write per-pair scores as JSONL here")
    ev.add_argument("--json", action="store_true", help="summary as JSON on stdout")
    ev.set_defaults(func=_cmd_eval)

    rep = sub.add_parser("report", help="render win-rate and metric tables")
    rep.add_argument("--judgments", required=True, help="pairwise judgments (JSONL)")
    rep.add_argument("--scores", help="per-cell F1/embedding scores (JSONL)")
    rep.add_argument("--out", help="write the Markdown report here instead of stdout")
    rep.add_argument(
        "--drop-ties",
        action="store_true",
        help="exclude ties from win-rate denominators (default counts them)",
    )
    rep.add_argument("--json", action="store_true", help="cells as JSON on stdout")
    rep.set_defaults(func=_cmd_report)

    serve = sub.add_parser("serve-mock", help="serve deterministic mock backends")
    serve.add_argument(
        "--behavior",
        choices=TRANSLATORS,
        help="translator behavior (overrides the config's mock section)",
    )
    serve.add_argument("--port", type=int, default=0, help="port (0 picks a free one)")
    serve.add_argument("--config", help=f"config file (default: ${CONFIG_ENV_VAR})")
    serve.add_argument("--ready-file", help="write the base URL here once serving")
    serve.add_argument("--json", action="store_true", help="print base URL as JSON")
    serve.set_defaults(func=_cmd_serve_mock)

    val = sub.add_parser("validate", help="validate a corpus file and exit")
    val.add_argument("--corpus", required=True, help="corpus file (JSONL)")
    val.add_argument("--json", action="store_true", help="summary as JSON on stdout")
    val.set_defaults(func=_cmd_validate)

    return parser


def _config_path(args: argparse.Namespace) -> str | None:
    return getattr(args, "config", None) or os.environ.get(CONFIG_ENV_VAR) or None


def _load_app_config(args: argparse.Namespace) -> AppConfig | None:
    path = _config_path(args)
    return load_config(path) if path else None


def _cmd_run(args: argparse.Namespace) -> int:
    path = _config_path(args)
    if not path:
        raise _UsageError(f"run requires --config or ${CONFIG_ENV_VAR}")
    pipeline_config = load_config(path).pipeline
    overrides = {}
    if args.parallelism is not None:
        overrides["parallelism"] = args.parallelism
    if args.checkpoint is not None:
        overrides["checkpoint_path"] = args.checkpoint
    if overrides:
        pipeline_config = dataclasses.replace(pipeline_config, **overrides)
    summary = run_corpus(args.corpus, pipeline_config, args.out)
    if args.json:
        print(json.dumps(summary.to_dict()))
    else:
        print(
            f"processed {summary.processed}, skipped {summary.skipped},"
            f" failed {summary.failed} -> {args.out}"
        )
    return 0 if summary.failed == 0 else 2


def _cmd_eval(args: argparse.Namespace) -> int:
    results = load_results(args.pred)
    gold = load_gold(args.gold)

    endpoint = None
    if args.embed_endpoint:
        endpoint = BackendEndpoint(role="embed", base_url=args.embed_endpoint)
    else:
        app = _load_app_config(args)
        if app is not None:
            endpoint = app.pipeline.endpoints.get("embed")
    embed_fn = (lambda tokens: client.embed(endpoint, tokens)) if endpoint else None

    rows, summary = evaluate_results(results, gold, embed_fn=embed_fn)
    if args.out:
        with Path(args.out).open("w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row.to_dict(), ensure_ascii=False))
                fh.write("\n")
    if args.json:
        print(json.dumps(summary))
    else:
        token = summary["token_f1"]["overall"]
        embedf = summary["embed_f1"]["overall"]
        print(
            f"evaluated {summary['pairs']} pairs"
            f" (missing gold {summary['missing_gold']},"
            f" missing pred {summary['missing_pred']})"
        )
        print(f"token F1 overall: {'—' if token is None else token}")
        print(f"embedding F1 overall: {'—' if embedf is None else embedf}")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    judgments = load_judgments(args.judgments)
    scores = load_scores(args.scores) if args.scores else []
    count_ties = not args.drop_ties
    report = render_report(judgments, scores, count_ties=count_ties)
    if args.out:
        Path(args.out).write_text(report, encoding="utf-8")
    if args.json:
        cells = win_rate_cells(judgments, count_ties=count_ties)
        payload = {
            "win_rates": [
                {"language": lang, "task": task, "rate": rate}
                for (lang, task), rate in sorted(cells.items())
            ],
            "scores": [
                {"language": s.language, "task": s.task, "f1": s.f1, "bert_f": s.bert_f}
                for s in scores
            ],
        }
        print(json.dumps(payload))
    elif not args.out:
        print(report)
    return 0


def _cmd_serve_mock(args: argparse.Namespace) -> int:
    app = _load_app_config(args)
    behavior = app.mock if app and app.mock else MockBehavior()
    if args.behavior:
        behavior = dataclasses.replace(behavior, translator=args.behavior)
    try:
        server = serve_mock(behavior, port=args.port)
    except OSError as exc:
        raise BackendError("mock", f"cannot bind port {args.port}: {exc}") from exc
    if args.json:
        print(json.dumps({"base_url": server.base_url}), flush=True)
    else:
        print(f"serving mock backends at {server.base_url}", flush=True)
    if args.ready_file:
        Path(args.ready_file).write_text(server.base_url + "\n", encoding="utf-8")
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    records = load_corpus(args.corpus)
    if args.json:
        print(json.dumps({"records": len(records)}))
    else:
        print(f"OK: {len(records)} records")
    return 0


def main(argv: list[str] | None = None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except CorpusError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (
        ConfigError,
        BackendError,
        PipelineError,
        PromptError,
        OSError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
