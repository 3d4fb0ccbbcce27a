"""Acceptance criteria; each test prints its PASS/FAIL line (see ``pytest -s``)."""

from __future__ import annotations

import pytest

from glminmax import acceptance


@pytest.mark.parametrize("number", sorted(acceptance.CRITERIA))
def test_criterion(number):
    outcome = acceptance.evaluate(number)
    print(outcome.line())
    assert outcome.ok, outcome.line()
