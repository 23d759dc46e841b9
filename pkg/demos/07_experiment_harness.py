"""Driving the experiment runner from Python.

The same machinery behind ``gexpect run`` is a plain function: load a JSON
config, execute the named experiment deterministically, collect check
records, series and artifacts.  This demo runs two of the shipped configs
into a scratch directory and prints their records.
"""

import json
import tempfile
from pathlib import Path

from gexpect.experiment_cli import emit_plotdata, run

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

with tempfile.TemporaryDirectory() as scratch:
    for name in ("moments", "gheat"):
        report, report_path = run(CONFIGS / f"{name}.json",
                                  out_override=Path(scratch) / name)
        print(f"== {name}: ok={report['ok']} ({report_path})")
        for rec in report["records"]:
            print(f"   {rec['name']:<24} lhs={rec['lhs']:+.5g} "
                  f"rhs={rec['rhs']:+.5g} ok={rec['ok']}")
        for series in report["series"]:
            dest = emit_plotdata(report, series, Path(scratch) / name / "plots")
            print(f"   series {series!r} -> {dest.name}")
        print()

    # Reports are deterministic: repeat a run and compare everything but the
    # timing block byte for byte.
    a, _ = run(CONFIGS / "moments.json", out_override=Path(scratch) / "again")
    b, _ = run(CONFIGS / "moments.json", out_override=Path(scratch) / "again")
    strip = lambda r: json.dumps(
        {k: v for k, v in r.items() if k != "timings"}, sort_keys=True
    )
    print("byte-identical reports modulo timings:", strip(a) == strip(b))
