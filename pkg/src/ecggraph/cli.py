"""Command-line entry point: ``ecggraph <stage> [options]``."""
from __future__ import annotations

import argparse
import logging
import sys

from .pipeline import STAGES, StageError, resolve_config, run_all


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data-dir", help="directory with MIT-BIH .hea/.dat/.atr files (default: $ECG_DATA_DIR)")
    common.add_argument("--out-dir", help="artifact directory (default: out)")
    common.add_argument("--config", help="JSON file of settings; CLI flags take precedence")
    common.add_argument("--seed", type=int)
    common.add_argument("--epochs", type=int)
    common.add_argument("--lr", type=float)
    common.add_argument("--threshold", type=float, help="correlation threshold for an edge")
    common.add_argument("--gnn-hidden", type=int)
    common.add_argument("--lin-hidden", type=int)
    common.add_argument("--batch-size", type=int, help="<= 0 for full-batch training")
    common.add_argument("--abs-threshold", action="store_const", const=True,
                        help="threshold |r| instead of r")
    common.add_argument("--class-weights", action="store_const", const=True,
                        help="inverse-frequency class weights in the loss")
    common.add_argument("--filter-phase", choices=["delay", "zero_phase"])
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ecggraph", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in list(STAGES) + ["run-all"]:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    cli = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    try:
        cfg = resolve_config(cli, args.config)
        if args.command == "run-all":
            run_all(cfg)
        else:
            STAGES[args.command](cfg)
    except StageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as e:
        print(f"error [{args.command}]: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
