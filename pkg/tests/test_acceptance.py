"""The nine acceptance criteria, each at its stated tolerance and runtime budget.

Every criterion prints one PASS/FAIL line; the lines are also collected into
the pytest terminal summary.
"""
import pytest

from cxhyp.cli import ExperimentConfig, run_suite

RESULTS = []

# criterion -> (suite, record names); None means every record of the suite
CRITERIA = {
    1: ("group", ["iwasawa_roundtrip", "phi_action_law", "a_splitting", "explicit_A_formula",
                  "runtime_group"]),
    2: ("group", ["a_derivatives_vs_fd", "grad_K_A_at_r0", "grad_K_A_vs_fd",
                  "uniformization_sigma", "runtime_derivative"]),
    3: ("geometry", None),
    4: ("spherical", None),
    5: ("transforms", None),
    6: ("decay_J", None),
    7: ("split_I", None),
    8: ("hecke", None),
    9: ("decay_I", ["phase_certificate_min", "runtime_certificate"]),
}

_REPORTS = {}


def _report(suite):
    if suite not in _REPORTS:
        _REPORTS[suite] = run_suite(ExperimentConfig.from_dict({"suite": suite}))
    return _REPORTS[suite]


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n):
    suite, names = CRITERIA[n]
    rep = _report(suite)
    recs = rep.records if names is None else [r for r in rep.records if r.name in names]
    if names is not None:
        assert {r.name for r in recs} == set(names), "missing records"
    ok = bool(recs) and all(r.passed for r in recs)
    detail = "; ".join(f"{r.name}={r.to_dict()['measured']}" for r in recs)
    line = f"{'PASS' if ok else 'FAIL'} criterion {n} [{suite}]: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line
