"""The verify-command building blocks."""

import pytest

from lbmperf.report import make_run_report
from lbmperf.selfcheck import (
    CheckResult,
    _model_with_fault,
    check_oracle_equivalence,
    check_stencil,
    padding_poison_check,
    run_checks,
)


def test_check_result_lines():
    assert CheckResult("x", True, "fine").line() == "PASS x: fine"
    assert CheckResult("x", False, "broken").line().startswith("FAIL x")


def test_fault_models():
    assert check_stencil(_model_with_fault("none")).passed
    assert not check_stencil(_model_with_fault("weight")).passed
    bad = check_stencil(_model_with_fault("opposite"))
    assert not bad.passed
    assert "opposite" in bad.detail
    with pytest.raises(ValueError):
        _model_with_fault("typo")


def test_oracle_equivalence_check_single_precision():
    result = check_oracle_equivalence(max_edge=4, patterns=2, steps=2,
                                      value_bytes=4, rtol=1e-5)
    assert result.passed, result.detail


def test_run_checks_all_pass_quickly():
    results = run_checks(max_edge=4, patterns=2, steps=2)
    assert len(results) == 7
    assert all(r.passed for r in results), [r.line() for r in results]


def test_padding_check_needs_actual_padding():
    result = padding_poison_check(dims=(16, 4, 4), alignment=128, value_bytes=8)
    assert not result.passed  # 16 doubles already fill a 128 B line
    assert "no padding" in result.detail


def test_run_report_guards_zero_elapsed():
    report = make_run_report({}, 0.0, 10, 100, "abc")
    assert report.mlups == 0.0
    payload = report.to_dict()
    assert payload["checksum"] == "abc"
    assert "mlups" in report.to_json()
