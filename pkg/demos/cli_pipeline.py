"""
The command-line pipeline
=========================

The same checks are available as ``kernelquant verify-all``.  This script
drives the entry point in-process on the bundled inputs, including the
corrupted series that must be rejected.
"""

from pathlib import Path

from kernelquant.cli import main

data = Path(__file__).resolve().parent / "data"

for flow in ("plane_translation", "disc_elliptic"):
    code = main(["verify-all", "--flow", str(data / f"{flow}.json"), "--measure", str(data / "measure3.json"), "--n", "40"])
    print(f"\n{flow}: exit {code}\n")

code = main([
    "verify-all", "--flow", str(data / "plane_translation.json"), "--measure", str(data / "measure3.json"),
    "--series", str(data / "plane_translation_corrupted_series.json"), "--n", "40",
])
print(f"\ncorrupted series: exit {code}")
