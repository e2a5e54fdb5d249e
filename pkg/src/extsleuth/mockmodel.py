"""Standalone mock model process: reads a prompt on stdin, emits a fixed
template whose risk level is chosen by a seed flag.

Usage: python -m extsleuth.mockmodel [--risk high|medium|low]
Pairs with StdioProcessAdapter for end-to-end adapter tests.
"""

from __future__ import annotations

import argparse
import sys


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="extsleuth-mockmodel")
    parser.add_argument("--risk", default="high",
                        choices=["high", "medium", "low"])
    args = parser.parse_args(argv)
    prompt = sys.stdin.read()
    lines = prompt.count("\n")
    sys.stdout.write(
        "Reviewed the supplied analysis context "
        f"({lines} lines). The behaviors described are assessed per the "
        "evidence provided; no external facts were consulted. "
        f"Risk level: {args.risk.capitalize()}.\n"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
