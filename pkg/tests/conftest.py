"""Shared fixtures: the reference desk-scale experiment, built once.

The reference setup (10 classes, 50 clips/class, 16 frames, 64x64) backs
the end-to-end tests and the acceptance suite. Building it takes a few
minutes, so it is session-scoped and only constructed when a test asks
for it.
"""

import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

# pass/fail lines for acceptance criteria, printed in the terminal summary
ACCEPTANCE_RESULTS: dict[str, str] = {}


def record_acceptance(name: str, passed: bool, detail: str = ""):
    ACCEPTANCE_RESULTS[name] = f"{'PASS' if passed else 'FAIL'}  {detail}".rstrip()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"{name}: {ACCEPTANCE_RESULTS[name]}")


@pytest.fixture(scope="session")
def reference_setup():
    """Train toy models and build the evaluation split once per session."""
    from vlguard.reference import build_reference_setup

    t0 = time.monotonic()
    setup = build_reference_setup()
    setup.build_seconds = time.monotonic() - t0
    return setup
