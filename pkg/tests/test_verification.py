import math

import pytest

from tsbandit.verification import CHECKS, SUITES, run_suite


def test_smoke_suite_has_no_failures():
    results = run_suite("all", "smoke")
    assert len(results) == sum(len(v) for v in CHECKS.values())
    assert len({r.name for r in results}) == len(results)
    assert all(r.status in ("pass", "skipped(budget)") for r in results), [r for r in results if not r.ok]
    skipped = {r.name for r in results if r.status == "skipped(budget)"}
    assert skipped == {"lemma2_e2_frequency", "delay_sublinearity"}
    for r in results:
        if r.name in skipped:
            assert math.isnan(r.observed)


def test_unknown_suite_and_budget():
    assert "all" in SUITES
    with pytest.raises(ValueError):
        run_suite("nope")
    with pytest.raises(ValueError):
        run_suite("identities", "huge")
