"""
End-to-end run: guided agent, report, replay audit
==================================================

Drives the command-line interface in-process against a scripted backend.
The run directory it leaves behind is the complete experiment record:
config snapshot, trajectory log, rule bank, profile events, and report.
"""

import pathlib
import tempfile

from taskguide.cli import main

workdir = pathlib.Path(tempfile.mkdtemp(prefix="taskguide-demo-"))
run_dir = workdir / "exact-exploit"

# A guided number-guessing run with the probe-then-resolve scripted policy.
# Same config + same master seed always reproduces trajectories.jsonl
# byte for byte.
code = main([
    "run",
    "--env", "gmn",
    "--variant", "guided",
    "--backend", "scripted:gmn_exact_exploit",
    "--epochs", "3",
    "--trajectories", "10",
    "--seed", "7",
    "--out", str(run_dir),
])
print("run exit code:", code)
print("\nrun directory contents:")
for path in sorted(run_dir.iterdir()):
    print("   ", path.name)

print("\n--- report ---")
main(["report", "--run", str(run_dir)])

print("\n--- mined rules ---")
main(["rules", "list", "--run", str(run_dir)])

# Every logged step can be re-derived from the seed alone; replay
# re-executes all 30 trajectories and compares records exactly.
print("\n--- replay verification ---")
code = main(["replay", "--run", str(run_dir)])
print("replay exit code:", code)

# The audit re-checks that every logged rule application actually matched
# its observation and directive at the time.
print("\n--- rule application audit ---")
code = main(["rules", "audit", "--run", str(run_dir)])
print("audit exit code:", code)
