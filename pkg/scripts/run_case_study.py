#!/usr/bin/env python3
"""Run the bundled LPBF -> DED pre-transfer case study.

Scores the transferability of the bundled melt-pool monitoring solution
(LPBF source context) to the DED target context, picks the transfer
scenario and method family, and writes the report artifacts.
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from amtransfer.knowledge import bundled_context_path, load_context
from amtransfer.pretransfer import pretransfer_score, render_report_table
from amtransfer.scenario import compare


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--source", default="lpbf_nist", help="context JSON path or bundled name")
    parser.add_argument("--target", default="ded_msu", help="context JSON path or bundled name")
    parser.add_argument("--out", default="runs/case_study", help="output directory")
    args = parser.parse_args()

    def load(spec: str):
        path = Path(spec)
        return load_context(path if path.is_file() else bundled_context_path(spec))

    source = load(args.source)
    target = load(args.target)
    report = pretransfer_score(source, target)
    plan = compare(source, target)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "pretransfer_report.json").write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    )
    (out_dir / "transfer_plan.json").write_text(
        json.dumps(plan.to_dict(), indent=2, sort_keys=True) + "\n"
    )

    print(render_report_table(report, source, target))
    print()
    print(f"scenario:      {plan.scenario.value}")
    print(f"method family: {plan.method_family.value}")
    for note in plan.notes:
        print(f"  - {note}")
    print(f"\nartifacts: {out_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
