"""Acceptance criteria, one test each.  Run with ``-s`` to see the summary lines."""

import pytest

from thermomodal.acceptance import CRITERIA, run_check


@pytest.mark.parametrize("cid", sorted(CRITERIA), ids=lambda c: f"criterion_{c:02d}_{CRITERIA[c][0]}")
def test_criterion(cid):
    result = run_check(cid)
    print(result.line())
    assert result.runtime < result.budget, f"over budget: {result.line()}"
    assert result.passed, result.line()
