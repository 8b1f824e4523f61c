import argparse
import os
import sys
from typing import List, Optional

import Util_Config as config
from Command_Manager import COMMANDS
from Run_Config import RunConfig
from Util_Debug import DebugLog
from Util_Errors import QHError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qh", description="Quasihomogeneous n-body toolkit")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub = subparsers.add_parser(name)
        sub.add_argument("--config", required=True, help="Path to the JSON run configuration")
        sub.add_argument("--out", default=None, help="Output directory (overrides output.dir in the config)")
        sub.add_argument("--debug", action="store_true", help="Echo debug messages")
        sub.add_argument("--no-progress", action="store_true", help="Hide progress bars")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.debug:
        config.IN_DEBUG_MODE = True
        DebugLog.initialize()
    if args.no_progress:
        config.SHOW_PROGRESS = False

    try:
        cfg = RunConfig.from_json(args.config)
        out_dir = args.out or cfg.out_dir
        if not os.path.isabs(out_dir) and args.out is None:
            out_dir = os.path.join(cfg.base_dir, out_dir)
        os.makedirs(out_dir, exist_ok=True)
        COMMANDS[args.command](cfg, out_dir)
    except QHError as e:
        print(f"❌ {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code
    return config.EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
