"""
Synchronous Correlation Slices: application entry point.

Usage:
    synccorr slice --y .5,.5,.5 --x 1,1,1 --class q --side lower
    python -m src.main verify-universal3 --a 1 --b 1
"""

from __future__ import annotations

import sys
from pathlib import Path

# Ensure project root is on path
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from src.interface.cli import run  # noqa: E402


def main() -> None:
    """Console-script entry point."""
    sys.exit(run())


if __name__ == "__main__":
    main()
