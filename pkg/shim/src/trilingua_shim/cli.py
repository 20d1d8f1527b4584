"""Command-line entry point: load checkpoints and serve them until interrupted.

Exit codes: 0 success, 1 usage error, 2 config or model-loading failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import threading
from pathlib import Path

from .backends import ModelLoadError
from .config import ShimConfigError, load_shim_config
from .server import serve_models


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(f"{self.prog}: {message}\n{self.format_usage().rstrip()}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="shim", description=__doc__)
    parser.add_argument("--config", required=True, help="shim config file (TOML or JSON)")
    parser.add_argument("--port", type=int, help="override the config's port (0 picks a free one)")
    parser.add_argument("--ready-file", help="write the base URL here once serving")
    parser.add_argument("--json", action="store_true", help="print base URL and models as JSON")
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        config = load_shim_config(args.config)
        server = serve_models(config, port=args.port)
    except (ShimConfigError, ModelLoadError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    models = {role: backend.model_id for role, backend in sorted(server.backends.items())}
    if args.json:
        print(json.dumps({"base_url": server.base_url, "models": models}), flush=True)
    else:
        print(f"serving {len(models)} model(s) at {server.base_url}", flush=True)
        for role, model_id in models.items():
            print(f"  {role}: {model_id}", flush=True)
    if args.ready_file:
        Path(args.ready_file).write_text(server.base_url + "\n", encoding="utf-8")
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
    return 0


if __name__ == "__main__":
    sys.exit(main())
