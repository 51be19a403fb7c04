"""Acceptance suite: every criterion at full scale and at its stated tolerance.

Each test prints one ``[PASS]`` / ``[FAIL]`` line with the criterion name,
runtime and the key numbers behind the verdict.
"""
import json

import pytest

from sheetwalk.verification import CRITERIA, run_criteria

SEED = 0


def _summary(res):
    keys = ("z", "p_value", "ks_p_value", "slope", "inversions", "mean_tau", "target",
            "sample_variance", "d3_max_corner_error", "max_path_gap")
    d = res.details
    short = {k: d[k] for k in keys if k in d}
    if "checks" in d:
        short["z"] = [round(c["z"], 2) for c in d["checks"]]
    if "rows" in d and "eps" in d:
        short["gamma_tail"] = [r["gamma_tail"]["probability"] for r in d["rows"]]
        short["sigma_tail"] = [r["sigma_tail"]["probability"] for r in d["rows"]]
    if "commands" in d:
        short["identical"] = [c["identical"] for c in d["commands"]]
    return json.dumps(short, default=float)


@pytest.mark.slow
@pytest.mark.parametrize("name", list(CRITERIA))
def test_criterion(name, capsys):
    (res,) = run_criteria([name], seed=SEED)
    with capsys.disabled():
        print(f"\n{res.line()} {_summary(res)}")
    assert res.passed, json.dumps(res.details, default=float)
