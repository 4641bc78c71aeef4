"""Acceptance criteria 1-9 at full scale, one pass/fail line each.

Run with ``pytest tests/test_acceptance.py -s`` or ``python3 tests/test_acceptance.py``.
The whole set takes around seven minutes on one core.
"""

import os
import sys

import pytest

from localcc.suites import CRITERIA, run_criterion

SCALE = os.environ.get("LOCALCC_ACCEPTANCE_SCALE", "full")


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    r = run_criterion(number, SCALE, 1)
    with capsys.disabled():
        print("\n" + r.line())
    assert r.passed, r.line()


if __name__ == "__main__":
    ok = True
    for i in sorted(CRITERIA):
        r = run_criterion(i, SCALE, 1)
        print(r.line(), flush=True)
        ok &= r.passed
    sys.exit(0 if ok else 1)
