#!/usr/bin/env python3
"""Recomputes the hand-arithmetic oracle and compares it with the frozen copy."""
import json
import pathlib
import subprocess
import sys

here = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else pathlib.Path(__file__).parent)
fresh = subprocess.run([sys.executable, str(here / "hand_arithmetic.py")], capture_output=True, text=True)
if fresh.returncode != 0:
    sys.stderr.write(fresh.stdout + fresh.stderr)
    sys.exit("oracle self-check failed")
now = json.loads(fresh.stdout)
frozen = json.loads((here / "hand_arithmetic.json").read_text())


def flat(v):
    return v if isinstance(v, list) else [v]


bad = [k for k in frozen if any(abs(a - b) > 1e-12 for a, b in zip(flat(now[k]), flat(frozen[k])))]
if bad or set(now) != set(frozen):
    sys.exit(f"frozen oracle values drifted: {bad}")
print("hand arithmetic oracle matches frozen values")
