"""Run the bundled toy experiment end to end with a short training budget.

The full budget is ``phonemt compare --config src/phonemt/data/toy.ini``.
"""

from __future__ import annotations

import sys
import tempfile
from pathlib import Path

from phonemt.cli import run_subcommand
from phonemt.toy import data_dir


def main() -> int:
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "toy"
        status = run_subcommand(
            "compare",
            str(data_dir() / "toy.ini"),
            [f"run.output_dir={out}", "training.steps=150", "training.eval_every=50"],
        )
        if status != 0:
            return status
        print((out / "reports" / "compare.txt").read_text(encoding="utf-8"))
        print("artifacts:")
        for path in sorted(p for p in out.rglob("*") if p.is_file()):
            print("  ", path.relative_to(out))
    return 0


if __name__ == "__main__":
    sys.exit(main())
