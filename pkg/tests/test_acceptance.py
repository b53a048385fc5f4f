"""Acceptance gate: run every criterion end-to-end at its stated threshold.

One line is printed per criterion (PASS/FAIL with the measured values), and
the test fails if the criterion does. The same checks back `viplab repro`.
"""

import pytest

from viplab.acceptance import CRITERIA


@pytest.fixture(scope="session")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


@pytest.mark.parametrize("criterion_id", list(CRITERIA))
def test_acceptance(criterion_id, workdir, capsys):
    result = CRITERIA[criterion_id](workdir)
    with capsys.disabled():
        print(f"\n{result.line()}")
    assert result.passed, result.line()
