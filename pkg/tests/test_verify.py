from __future__ import annotations

import pytest

from maxrl.verify import (
    SUITES,
    SuiteResult,
    contraction_suite,
    fixedpoint_suite,
    horizon_for,
    jensen_suite,
    recovery_suite,
    run_suite,
)


def test_horizon_for():
    h = horizon_for(0.5, 1e-3)
    assert 0.5**h <= 1e-3 < 0.5 ** (h - 1)


def test_summary_reports_first_failure():
    r = SuiteResult("demo", 4, [(17, "boom")])
    assert not r.passed
    assert r.summary() == "FAIL demo: 3/4 cases; first failing seed 17: boom"
    assert SuiteResult("ok", 2).summary() == "PASS ok: 2/2 cases"


def test_small_suites_pass():
    for r in (contraction_suite(20, seed=5), fixedpoint_suite(3, seed=5),
              recovery_suite(3, seed=5), jensen_suite(5, 3, seed=5)):
        assert r.passed, r.summary()


def test_contraction_counts_every_operator():
    r = contraction_suite(5, operators=("max_det", "cumulative"))
    assert r.n_cases == 10


def test_run_suite_rejects_unknown():
    assert set(SUITES) == {"contraction", "fixedpoint", "jensen", "recovery"}
    with pytest.raises(ValueError):
        run_suite("nonsense")
