"""The spec's acceptance matrix: one printed pass/fail line per criterion.

Criteria 5 and 6 share one dichotomy sweep through the session context.
Criterion 3 is expected to fail: its t = 100 rate test contradicts the exact
kernel (see the criterion note and the README).
"""
import pytest

from fujitalab.acceptance import CRITERIA


@pytest.fixture(scope="session")
def ctx():
    return {}


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, ctx, capsys):
    fn = CRITERIA[number]
    result = fn(ctx)
    with capsys.disabled():
        print("\n" + result.line())
        if result.note:
            print(f"    note: {result.note}")
    assert result.passed, {k: v for k, v in result.checks.items() if not v} or f"runtime {result.runtime:.1f}s"
