import json
from dataclasses import replace

import numpy as np
import pytest

from feedback_lens import crosscheck as cc, mna
from feedback_lens.feedback import AmplifierParams
from feedback_lens.netlist import GROUND, parse_netlist_file
from feedback_lens.smallsignal import linearize

from support import draw_params, random_resistor_mesh

TYPICAL = AmplifierParams.typical()


def test_case1_report_golden():
    report = cc.run_case(1, TYPICAL, cc.CrossCheckConfig(closed_error_band=(0.005, 0.0005)))
    assert report.values["closed_form"] == pytest.approx(6723980.678746291, rel=1e-12)
    for engine in ("exact_formula", "mason", "mna"):
        assert report.values[engine] == pytest.approx(6758132.690389, rel=1e-9)
    assert abs(report.closed_form_error - 0.005) <= 0.0005
    assert report.verdict == "pass"


def test_case2_report_golden():
    report = cc.run_case(2, TYPICAL, cc.CrossCheckConfig(closed_error_band=(0.0501, 0.001)))
    assert report.values["closed_form"] == pytest.approx(1005025.0, rel=1e-12)
    for engine in ("exact_formula", "mason", "mna"):
        assert report.values[engine] == pytest.approx(956986.6698405, rel=1e-9)
    assert abs(report.closed_form_error - 0.0501) <= 0.001
    assert report.verdict == "pass"


def test_case2_error_shrinks_with_small_driver_resistance():
    report = cc.run_case(2, replace(TYPICAL, r_out=10.0))
    assert report.closed_form_error < 0.005
    # oracle arithmetic: closed = 1000025.1, exact = 999774.40762, so the
    # error relative to exact is 250.6924/999774.4
    assert report.closed_form_error == pytest.approx(250.6923763135 / 999774.4076236865, rel=1e-9)
    assert report.verdict == "pass"


def test_band_verdict_fails_when_error_leaves_band():
    config = cc.CrossCheckConfig(closed_error_band=(0.0501, 0.001))
    report = cc.run_case(2, replace(TYPICAL, r_out=10.0), config)
    assert report.verdict == "fail"


def test_engines_agree_on_random_draws():
    rng = np.random.default_rng(101)
    for _ in range(20):
        p = draw_params(rng)
        for case in (1, 2):
            report = cc.run_case(case, p)
            for pair in (
                "exact_formula vs mason",
                "exact_formula vs mna",
                "mason vs mna",
            ):
                assert report.relative_errors[pair] <= 1e-6, (case, pair)


def test_relative_error_is_symmetric_and_normalized():
    assert cc.relative_error(1.0, 2.0) == cc.relative_error(2.0, 1.0) == 0.5
    assert cc.relative_error(0.0, 0.0) == 0.0


def test_sweep_monotone_and_consistent():
    reports = cc.sweep(1, TYPICAL, "K", [10.0, 100.0, 1000.0])
    values = [r.values["exact_formula"] for r in reports]
    assert values == sorted(values) and values[0] < values[-1]
    assert cc.sweep(1, TYPICAL, "K", []) == []
    single = cc.sweep(1, TYPICAL, "R1", [TYPICAL.R1])
    assert cc.report_json(single[0]) == cc.report_json(cc.run_case(1, TYPICAL))
    with pytest.raises(ValueError):
        cc.sweep(1, TYPICAL, "bogus", [1.0])


def test_reports_are_deterministic_bytes():
    a = cc.run_case(1, TYPICAL)
    b = cc.run_case(1, TYPICAL)
    assert cc.report_json(a) == cc.report_json(b)
    assert cc.report_table(a) == cc.report_table(b)
    payload = json.loads(cc.report_json(a))
    assert payload["verdict"] == "pass"
    assert set(payload["values"]) == set(cc.ENGINES)


def test_flow_graph_of_system_reproduces_sensitivities(netlists_dir):
    from feedback_lens import sfg
    from feedback_lens.netlist import VSource
    from feedback_lens.smallsignal import LinearCircuit

    lc = linearize(parse_netlist_file(str(netlists_dir / "fig7.net")))
    driven = LinearCircuit(
        lc.nodes, lc.elements + (VSource("Vs", "c", GROUND, 1.0),), {}
    )
    system = mna.assemble(driven)
    graph = cc.flow_graph_of_system(system)
    gain = sfg.mason_gain(graph, "src", "V(e)")
    solution = mna.solve(system)
    assert gain == pytest.approx(solution.voltage("e"), rel=1e-9)


def test_mason_driving_point_impedance_matches_lu_route():
    rng = np.random.default_rng(55)
    for _ in range(10):
        mesh = random_resistor_mesh(rng, n_nodes=4, extra_edges=2)
        direct = mna.driving_point_impedance(mesh, ("n1", GROUND))
        via_graph = cc.mason_driving_point_impedance(mesh, ("n1", GROUND))
        assert via_graph == pytest.approx(direct, rel=1e-9)


def test_mason_driving_point_impedance_on_case_models(netlists_dir):
    fig7 = linearize(parse_netlist_file(str(netlists_dir / "fig7.net")))
    assert cc.mason_driving_point_impedance(fig7, ("c", GROUND)) == pytest.approx(
        6758132.690389, rel=1e-6
    )
    fig9 = linearize(parse_netlist_file(str(netlists_dir / "fig9.net")))
    assert cc.mason_driving_point_impedance(fig9, ("e", GROUND)) == pytest.approx(
        956986.6698405, rel=1e-6
    )


def test_fixture_models_match_builders(netlists_dir):
    fig7 = linearize(parse_netlist_file(str(netlists_dir / "fig7.net")))
    assert mna.driving_point_impedance(fig7, cc.CASE1_PORT) == pytest.approx(
        cc.mna_rx(1, TYPICAL), rel=1e-12
    )
    fig9 = linearize(parse_netlist_file(str(netlists_dir / "fig9.net")))
    assert mna.driving_point_impedance(fig9, cc.CASE2_PORT) == pytest.approx(
        cc.mna_rx(2, TYPICAL), rel=1e-12
    )


def test_finite_input_resistance_is_supported():
    loaded = replace(TYPICAL, R_in=1e6)
    r_with = cc.mna_rx(1, loaded)
    r_without = cc.mna_rx(1, TYPICAL)
    assert r_with != pytest.approx(r_without, rel=1e-6)
    assert r_with == pytest.approx(r_without, rel=0.05)  # large R_in: small shift
