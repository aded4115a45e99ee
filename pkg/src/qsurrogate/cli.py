"""``surrogate <task> --config path [--seed k] [--out dir]``.

Exit codes: 0 success, 2 bad config, 3 resource guard tripped.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _apply_threads():
    # must run before numpy loads BLAS
    n = os.environ.get("SURROGATE_THREADS")
    if n:
        for var in _THREAD_VARS:
            os.environ[var] = n


def build_parser() -> argparse.ArgumentParser:
    from .harness import TASKS

    p = argparse.ArgumentParser(prog="surrogate", description="Classical surrogates for parametrized quantum circuits.")
    p.add_argument("task", choices=TASKS)
    p.add_argument("--config", required=True, help="TOML or JSON config file")
    p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    p.add_argument("--out", default=None, help="output directory (default: $SURROGATE_OUT or ./surrogate_out)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    _apply_threads()
    from .errors import ConfigError, GuardError
    from .harness import run_config

    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    out = args.out or os.environ.get("SURROGATE_OUT")
    try:
        summary = run_config(args.config, task=args.task, seed=args.seed, out=out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except GuardError as exc:
        print(f"resource guard: {exc}", file=sys.stderr)
        return 3
    print(json.dumps({k: v for k, v in summary.items() if not isinstance(v, (list, dict))}, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
