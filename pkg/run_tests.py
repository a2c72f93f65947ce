#!/usr/bin/env python3
"""Test runner for teethseg-bench.

Usage:
    python run_tests.py          # Run the fast suite (excluding slow)
    python run_tests.py -slow    # Run the acceptance-scale suites only
    python run_tests.py -all     # Run all tests (fast + slow)
"""

import shutil
import subprocess
import sys
from pathlib import Path


def run_tests(slow=False, all_tests=False):
    """Run the test suite.

    Args:
        slow: Run only the slow, acceptance-scale tests
        all_tests: Run all tests including slow ones
    """
    if not shutil.which("uv"):
        print("uv is required to run tests. Install uv: https://docs.astral.sh/uv/")
        return 1

    cmd = ["uv", "run", "pytest", "tests/", "-v", "--tb=short"]

    if all_tests:
        print("Running all tests (fast + slow)...")
    elif slow:
        cmd.extend(["-m", "slow"])
        print("Running slow tests...")
    else:
        cmd.extend(["-m", "not slow"])
        print("Running fast tests (excluding slow)...")

    result = subprocess.run(cmd, cwd=Path(__file__).parent)

    return result.returncode


if __name__ == "__main__":
    slow = "-slow" in sys.argv
    all_tests = "-all" in sys.argv

    sys.exit(run_tests(slow=slow, all_tests=all_tests))
