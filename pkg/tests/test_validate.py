import pytest

from rcbm.validate import SMOKE, SUITES, ExperimentReport, run_suite, summarize


@pytest.fixture(scope="module")
def smoke_reports():
    return run_suite("all", seed=0, scale=dict(SMOKE))


def test_every_criterion_reported(smoke_reports):
    found = {r.criterion for r in smoke_reports if r.criterion}
    assert found == {f"C{k}" for k in range(1, 12)}


def test_report_fields(smoke_reports):
    for r in smoke_reports:
        d = r.to_dict()
        for key in ("name", "parameters", "analytic_value", "mc_estimate", "stderr", "z_score",
                    "pass", "runtime_seconds"):
            assert key in d
        assert r.parameters["suite"] in SUITES
        assert r.runtime_seconds >= 0
        if r.kind == "z" and r.z_score is not None:
            assert r.stderr > 0
            assert r.z_score == pytest.approx((r.mc_estimate - r.analytic_value) / r.stderr)


def test_deterministic_checks_pass_at_any_scale(smoke_reports):
    by_name = {r.name: r for r in smoke_reports}
    for name in ("reducer drops middle constraint", "ndist n=2 vs 2-d law", "kernel identity",
                 "density g normalization", "density g xz-moment", "srpt work conservation",
                 "srpt flow conservation", "srpt dominates FIFO queue length"):
        assert by_name[name].passed, name
    assert all(r.passed for r in smoke_reports if r.criterion == "C11")


def test_reproducible():
    a = run_suite("ndist", seed=4, scale=dict(SMOKE))
    b = run_suite("ndist", seed=4, scale=dict(SMOKE))
    assert [r.mc_estimate for r in a] == [r.mc_estimate for r in b]


def test_rescoring_thresholds():
    loose = run_suite("ndist", seed=0, scale=dict(SMOKE), z_threshold=100.0)
    z = [r for r in loose if r.kind == "z"]
    assert z and all(r.passed and r.threshold == 100.0 for r in z)


def test_unknown_inputs_rejected():
    with pytest.raises(ValueError, match="unknown suite"):
        run_suite("nope")
    with pytest.raises(ValueError, match="unknown scale keys"):
        run_suite("ndist", scale={"bogus_N": 3})


def test_summarize_counts():
    ok = ExperimentReport("a", {}, 1.0, 1.0, 0.1, 0.0, True)
    bad = ExperimentReport("b", {}, 1.0, 2.0, 0.1, 10.0, False)
    info = ExperimentReport("c", {}, None, None, None, None, False, gate=False)
    s = summarize([ok, bad, info])
    assert s == {"n_reports": 3, "n_gated": 2, "n_failed": 1, "passed": False, "failed": ["b"]}
    assert summarize([])["passed"] is True
    assert ok.to_dict()["pass"] is True
