"""The eleven acceptance criteria at their stated sizes and tolerances.

Each test prints one PASS/FAIL line; the lines are also collected into the
terminal summary.
"""
import pytest

from extremal_sv import verification as v

from conftest import ACCEPTANCE_LINES

CASES = [
    (v.check_decreasing, 1.0),
    (v.check_ar1, 1.0),
    (v.check_round_trip, 5.0),
    (v.check_lp_oracle, 10.0),
    (v.check_tau, 30.0),
    (v.check_truncation, 5.0),
    pytest.param(v.check_hill_zoo, 600.0, marks=pytest.mark.slow),
    pytest.param(v.check_joint_exceedance, 900.0, marks=pytest.mark.slow),
    pytest.param(v.check_extremal, 900.0, marks=pytest.mark.slow),
    pytest.param(v.check_marginal, 600.0, marks=pytest.mark.slow),
    pytest.param(v.check_probe, 900.0, marks=pytest.mark.slow),
]


@pytest.mark.parametrize("check,budget", CASES, ids=[f"criterion_{i:02d}" for i in range(1, 12)])
def test_criterion(check, budget):
    res = check(full=True, seed=0)
    line = res.line() + ("" if res.seconds <= budget else f" [over {budget:.0f}s budget]")
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert res.passed, line
    assert res.seconds <= budget, line
