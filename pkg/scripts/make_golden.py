"""Regenerate the golden report tables under tests/golden.

Run from the repository root after an intended change to the report output::

    python3 scripts/make_golden.py
"""

from __future__ import annotations

from pathlib import Path

from gravpanel.cli import EXAMPLE_CONFIG
from gravpanel.config import load_pipeline_config
from gravpanel.report import REPORT_FILE, render_markdown, run_pipeline, write_report

GOLDEN = Path(__file__).resolve().parents[1] / "tests" / "golden"


def main():
    # Keep the example config untouched so its hash matches; drop the PNGs.
    report = run_pipeline(load_pipeline_config(EXAMPLE_CONFIG))
    for p in write_report(report, GOLDEN):
        if p.suffix == ".png":
            p.unlink()
        else:
            print(p)
    (GOLDEN / REPORT_FILE).write_text(render_markdown(report), encoding="utf-8")


if __name__ == "__main__":
    main()
