"""Acceptance gate: every numbered criterion at its pinned tolerance.

Criteria share one Workspace (module-scoped) so deep sweeps and Monte Carlo
runs are computed once.  Each test prints the one-line PASS/FAIL verdict for
its criterion.
"""

import pytest

from percodyn import acceptance


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    return acceptance.Workspace(outdir=tmp_path_factory.mktemp("accept"))


def _run(workspace, func):
    result = func(workspace)
    print(result.line())
    assert result.passed, result.details
    return result


def test_criterion_01_oracle_equivalence(workspace):
    result = _run(workspace, acceptance.criterion_1_oracle)
    for key, delta in result.details["worst_deltas"].items():
        assert delta <= 1e-12, (key, delta)


def test_criterion_02_second_moment_bounds(workspace):
    _run(workspace, acceptance.criterion_2_second_moment)


def test_criterion_03_product_bound(workspace):
    _run(workspace, acceptance.criterion_3_product_bound)


def test_criterion_04_lyons_ratio(workspace):
    result = _run(workspace, acceptance.criterion_4_lyons_ratio)
    assert all(s <= 20.0 for s in result.details["spreads"].values())


def test_criterion_05_one_arm_scaling(workspace):
    result = _run(workspace, acceptance.criterion_5_one_arm)
    assert result.details["factor"] <= 10.0


def test_criterion_06_correlation_bound(workspace):
    result = _run(workspace, acceptance.criterion_6_correlation)
    assert result.details["pair_factor"] <= 3.0


def test_criterion_07_flip_identity(workspace):
    _run(workspace, acceptance.criterion_7_flip_identity)


def test_criterion_08_stationarity(workspace):
    _run(workspace, acceptance.criterion_8_stationarity)


def test_criterion_09_component_transition(workspace):
    result = _run(workspace, acceptance.criterion_9_transition)
    assert 0.35 <= result.details["slope"] <= 0.65


def test_criterion_10_flip_proxy_gap(workspace):
    _run(workspace, acceptance.criterion_10_flip_proxy)


def test_criterion_11_gadget_trends(workspace):
    _run(workspace, acceptance.criterion_11_gadget)


def test_criterion_12_determinism(workspace):
    _run(workspace, acceptance.criterion_12_determinism)
