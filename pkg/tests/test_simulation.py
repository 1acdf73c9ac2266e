import numpy as np
import pytest
from scipy import special, stats

from condtau import kendall_tau, members, tau_matrix
from condtau.errors import ValidationError
from condtau.simulation import (Scenario, clayton_tau, equicorrelation, generate_scenario, regimes,
                                report_csv, rho_from_tau, run_study, sample_clayton_pair,
                                sample_equicorr_gaussian, scenario_boxes, stream_rng, tau_from_rho)


def test_tau_rho_conversion():
    assert tau_from_rho(0.0) == 0.0
    assert tau_from_rho(0.7071) == pytest.approx(0.5, abs=1e-3)
    assert rho_from_tau(2 / 6) == pytest.approx(0.5, abs=1e-3)
    assert tau_from_rho(0.259) == pytest.approx(1 / 6, abs=1e-3)
    with pytest.raises(ValidationError):
        tau_from_rho(1.5)


def test_equicorrelation_requires_positive_definite():
    with pytest.raises(ValidationError):
        equicorrelation(3, -0.6)
    np.testing.assert_array_equal(np.diag(equicorrelation(3, 0.2)), 1.0)


@pytest.mark.parametrize("rho,target", [(0.7071, 0.5), (0.259, 1 / 6)])
def test_equicorrelated_gaussian_tau(rho, target):
    x = sample_equicorr_gaussian(3, rho, np.zeros(3), np.random.default_rng(1), size=10_000)
    assert abs(kendall_tau(x[:, 0], x[:, 2]) - target) < 0.03


def test_zero_correlation_gives_independent_coordinates():
    x = sample_equicorr_gaussian(2, 0.0, np.zeros(2), np.random.default_rng(2), size=10_000)
    assert abs(np.corrcoef(x.T)[0, 1]) < 0.03


@pytest.mark.parametrize("theta", [1.0, 5.0])
def test_clayton_tau_and_margins(theta):
    u, v = sample_clayton_pair(theta, np.random.default_rng(3), size=100_000)
    assert abs(kendall_tau(u, v) - clayton_tau(theta)) < 0.02
    assert stats.kstest(u, "uniform").statistic < 0.01
    assert stats.kstest(v, "uniform").statistic < 0.01
    with pytest.raises(ValidationError):
        sample_clayton_pair(0.0, np.random.default_rng(0))


def test_gauss_level_box_occupancy():
    sc = Scenario("gauss_level", n=4000)
    s = generate_scenario(sc, np.random.default_rng(4))
    counts = [members(s, b).size for b in scenario_boxes(sc).boxes]
    assert all(abs(c - 1000) <= 3 * np.sqrt(4000) for c in counts)
    edges = special.ndtri([0.25, 0.5, 0.75])
    assert scenario_boxes(sc).boxes[0].constraints[0].upper == edges[0]


def test_clayton_break_taus():
    sc = Scenario("clayton_break", n=100_000, m=2, lam=0.5)
    s = generate_scenario(sc, np.random.default_rng(5))
    t = tau_matrix(s, scenario_boxes(sc)).tau[0]
    assert abs(t[0] - 1 / 3) < 0.02 and abs(t[1] - 5 / 7) < 0.02


def test_generated_uniforms_pass_ks():
    sc = Scenario("clayton_break", n=10_000, m=2)
    s = generate_scenario(sc, np.random.default_rng(6))
    for col in range(3):
        assert stats.kstest(s.data[:, col], "uniform").statistic < 0.02


def test_counterexample_one_boxes_and_regimes():
    sc = Scenario("counterexample_1", n=100_000)
    s = generate_scenario(sc, np.random.default_rng(7))
    t = tau_matrix(s, scenario_boxes(sc)).tau[0]
    assert abs(t[0] - 0.5) < 0.02 and abs(t[1] + 0.5) < 0.02
    small = generate_scenario(Scenario("counterexample_1", n=40_000), np.random.default_rng(8))
    reg = regimes(small)
    for g in range(4):
        sel = reg == g
        assert sel.sum() > 9000
        assert abs(kendall_tau(small.xi[sel, 0], small.xi[sel, 1])) < 0.03


def test_counterexample_two_equal_box_taus():
    sc = Scenario("counterexample_2", n=100_000)
    s = generate_scenario(sc, np.random.default_rng(9))
    t = tau_matrix(s, scenario_boxes(sc)).tau[0]
    assert abs(t[0] - t[1]) < 0.02
    reg = regimes(s)
    rt = [kendall_tau(s.xi[reg == g, 0], s.xi[reg == g, 1]) for g in range(4)]
    assert abs((rt[0] - rt[1]) - 2 * (2 / np.pi) * np.arcsin(0.5)) < 0.03


def test_counterexample_two_wald_holds_level():
    rep = run_study(Scenario("counterexample_2", n=10_000), ["wald"], R=100, seed=3)
    assert rep.frequencies["wald"] <= 0.10


def test_scenario_validation():
    with pytest.raises(ValidationError):
        Scenario("nope")
    with pytest.raises(ValidationError):
        Scenario("clayton_break", lam=1.5)
    with pytest.raises(ValidationError):
        run_study(Scenario("gauss_level"), ["bogus"], R=1)
    with pytest.raises(ValidationError):
        run_study(Scenario("gauss_level"), ["wald"], R=0)
    assert Scenario.from_dict(Scenario("dvine_datadriven").to_dict()) == Scenario("dvine_datadriven")


def test_run_study_deterministic_and_worker_independent():
    sc = Scenario("gauss_power", n=200, m=3)
    methods = ["wald", "boot_inf_classical", "boot_l2_conditional"]
    a = run_study(sc, methods, R=6, seed=11, B=50, keep_p_values=True)
    b = run_study(sc, methods, R=6, seed=11, B=50, keep_p_values=True, workers=2)
    assert a.to_dict(include_timing=False) == b.to_dict(include_timing=False)
    assert all(0 <= f <= 1 for f in a.frequencies.values())
    table = report_csv([a])
    assert table.splitlines()[0].startswith("scenario,n,m,method")
    assert len(table.splitlines()) == 1 + len(methods)


def test_dvine_replicate_streams():
    sc = Scenario("dvine_datadriven", n=400, alternative=True)
    s1 = generate_scenario(sc, stream_rng(1, 0, 0))
    s2 = generate_scenario(sc, stream_rng(1, 0, 0))
    np.testing.assert_array_equal(s1.data, s2.data)
    assert s1.p == 2 and s1.q == 1
