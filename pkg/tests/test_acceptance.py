"""End-to-end acceptance suite: one test (and one PASS/FAIL line) per criterion."""
import pytest

from mildbbm.acceptance import CRITERIA


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    res = CRITERIA[number]()
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.line()
