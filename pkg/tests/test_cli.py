"""Command-line runs end to end: output, files and exit codes."""

import json

import numpy as np
import pytest
from pydantic import TypeAdapter

from app.core import bounds, netgraph
from app.core.qstate import PAULI_X, apply_channel, ghz_state, maximally_mixed
from app.main import EXIT_DOMAIN, EXIT_FAILURE, EXIT_GRAPH, EXIT_OK, EXIT_PARSE, main
from app.models.network import Hypergraph
from app.models.quantum import KrausChannel, MatrixPayload, Observable


@pytest.fixture
def state_file(tmp_path):
    def write(rho, name="state.json"):
        path = tmp_path / name
        path.write_text(rho.to_payload().model_dump_json())
        return path

    return write


@pytest.fixture
def graph_file(tmp_path):
    def write(g, name="graph.json"):
        path = tmp_path / name
        netgraph.dump_hypergraph(g, path)
        return path

    return write


def _run(capsys, argv):
    code = main(argv)
    return code, capsys.readouterr().out


@pytest.mark.parametrize("name,radius,domination", [("c5.json", 2, 3), ("c4.json", 1, 2)])
def test_graph_command(capsys, networks_dir, name, radius, domination):
    code, out = _run(capsys, ["graph", "--graph", str(networks_dir / name)])
    assert code == EXIT_OK
    params = json.loads(out)
    assert params["edge_radius"] == radius
    assert params["connected_domination"] == domination


def test_graph_command_exit_codes(capsys, tmp_path, graph_file):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["graph", "--graph", str(bad)]) == EXIT_PARSE
    assert main(["graph", "--graph", str(tmp_path / "missing.json")]) == EXIT_PARSE
    split = graph_file(Hypergraph(n=4, edges=[[0, 1], [2, 3]]))
    assert main(["graph", "--graph", str(split)]) == EXIT_GRAPH


def test_bounds_on_ghz(capsys, state_file):
    code, out = _run(
        capsys,
        ["bounds", "--state", str(state_file(ghz_state(2, 3))), "--k", "2", "--restarts", "2"],
    )
    assert code == EXIT_OK
    result = json.loads(out)
    by_method = {r["method"]: r["value"] for r in result["lower_bounds"]}
    assert by_method["witness"] == pytest.approx(1.0)
    assert by_method["covariance"] == pytest.approx(1.0)
    assert len(result["trace_distance_bounds"]) == 4


def test_bounds_with_graph_reports_intervals(capsys, state_file, networks_dir):
    code, out = _run(
        capsys,
        [
            "bounds",
            "--state", str(state_file(ghz_state(2, 3))),
            "--graph", str(networks_dir / "triangle.json"),
            "--method", "witness",
        ],
    )
    assert code == EXIT_OK
    result = json.loads(out)
    assert [r["measure"] for r in result["intervals"]] == ["E_w", "E_c", "E_r"]
    assert result["intervals"][0]["value"] == pytest.approx(1.0)
    assert len(result["exactness"]["claims"]) == 3


def test_bounds_dimension_mismatch(state_file, networks_dir):
    argv = ["bounds", "--state", str(state_file(ghz_state(2, 3))),
            "--graph", str(networks_dir / "c4.json")]
    assert main(argv) == EXIT_DOMAIN


def test_figure3_csv(capsys):
    code, out = _run(capsys, ["figure3", "--k", "2", "--n", "3"])
    assert code == EXIT_OK
    lines = out.splitlines()
    assert lines[0] == "p,witness,nonlocality,covariance"
    assert len(lines) == 102
    assert lines[-1].split(",") == ["1", "1", "1", "1"]


def test_figure3_json_and_svg(capsys, tmp_path):
    code, out = _run(capsys, ["figure3", "--d", "inf", "--k", "2", "--n", "3",
                              "--p-grid", "0:1:0.5", "--format", "json"])
    assert code == EXIT_OK
    assert [row["p"] for row in json.loads(out)] == [0.0, 0.5, 1.0]

    target = tmp_path / "curves.svg"
    code = main(["figure3", "--k", "2", "--n", "3", "--format", "svg", "--out", str(target)])
    assert code == EXIT_OK
    assert "<svg" in target.read_text()


def test_figure3_needs_more_parties_than_k():
    assert main(["figure3", "--k", "3", "--n", "3"]) == EXIT_DOMAIN


def test_plan_command(capsys, graph_file):
    code, out = _run(capsys, ["plan", "--graph", str(graph_file(netgraph.line(6)))])
    assert code == EXIT_OK
    plan = json.loads(out)
    assert plan["mode"] == "steps"
    assert plan["cost"] == 2

    code, out = _run(capsys, ["plan", "--graph", str(graph_file(netgraph.cycle(4))),
                              "--mode", "rounds"])
    assert code == EXIT_OK
    assert json.loads(out)["cost"] == 2


def test_demo_c4(capsys):
    code, out = _run(capsys, ["demo-c4"])
    assert code == EXIT_OK
    report = json.loads(out)
    assert report["network"] == "C4"
    assert report["rounds_used"] == 1
    assert report["fidelity"] == pytest.approx(1.0, abs=1e-10)


def test_unknown_setting_and_flag():
    assert main(["demo-c4", "--tol", "no_such_setting=1"]) == EXIT_PARSE
    assert main(["demo-c4", "--tol", "lmi_psd_tol=not-a-number"]) == EXIT_PARSE
    assert main(["demo-c4", "--frobnicate"]) == EXIT_PARSE
    assert main([]) == EXIT_PARSE


def test_tolerance_override_is_scoped():
    from app.config import settings

    before = settings.lmi_psd_tol
    assert main(["demo-c4", "--tol", "lmi_psd_tol=1e-5"]) == EXIT_OK
    assert settings.lmi_psd_tol == before


def test_metrics_file(tmp_path):
    metrics = tmp_path / "metrics.prom"
    assert main(["figure3", "--k", "2", "--n", "3", "--metrics-file", str(metrics)]) == EXIT_OK
    text = metrics.read_text()
    assert "netent_lmi_cuts_total" in text
    assert "netent_seesaw_upper_bound" in text


def test_seesaw_and_verify(capsys, tmp_path, state_file, graph_file, bell_and_zero):
    state = state_file(bell_and_zero)
    graph = graph_file(netgraph.line(3))
    code, out = _run(
        capsys,
        [
            "seesaw", "--state", str(state), "--graph", str(graph),
            "--source-dims", "[[2,2],[1,2]]", "--restarts", "1", "--sweeps", "0",
            "--tol", "seesaw_pool_size=0",
        ],
    )
    assert code == EXIT_OK
    result = json.loads(out)
    assert result["report"]["upper"] <= 1e-6
    assert "certificate" not in result["report"]["params"]

    cert = tmp_path / "cert.json"
    cert.write_text(json.dumps(result["certificate"]))
    code, out = _run(capsys, ["seesaw", "--state", str(state), "--verify", str(cert)])
    assert code == EXIT_OK
    assert json.loads(out)["valid"] is True

    other = state_file(maximally_mixed((2, 2, 2)), "mixed.json")
    assert main(["seesaw", "--state", str(other), "--verify", str(cert)]) == EXIT_FAILURE


def test_seesaw_needs_graph(state_file):
    assert main(["seesaw", "--state", str(state_file(ghz_state(2, 3)))]) == EXIT_DOMAIN


def test_demo_c5(capsys):
    code, out = _run(capsys, ["demo-c5"])
    assert code == EXIT_OK
    report = json.loads(out)
    assert report["network"] == "C5"
    assert report["rounds_used"] == 1
    assert report["fidelity"] == pytest.approx(1.0, abs=1e-10)


def test_measurement_file_reaches_intervals(capsys, tmp_path, state_file, networks_dir):
    hadamard = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    rho = ghz_state(2, 3)
    for party in range(3):
        rho = apply_channel(rho, KrausChannel.unitary(hadamard), party)
    x = Observable(local_dims=(2,), data=PAULI_X)
    measurements = tmp_path / "x.json"
    measurements.write_bytes(TypeAdapter(list[MatrixPayload]).dump_json([x.to_payload()] * 3))

    code, out = _run(
        capsys,
        [
            "bounds",
            "--state", str(state_file(rho)),
            "--graph", str(networks_dir / "triangle.json"),
            "--measurements", str(measurements),
            "--method", "covariance",
        ],
    )
    assert code == EXIT_OK
    result = json.loads(out)
    (covariance,) = result["lower_bounds"]
    assert covariance["value"] == pytest.approx(1.0, abs=1e-6)
    assert result["intervals"][0]["value"] == pytest.approx(covariance["value"])


def test_bounds_optimize_sn_once(capsys, monkeypatch, state_file, networks_dir):
    calls = []
    optimize = bounds.sn_optimize

    def counting(*args, **kwargs):
        calls.append(args)
        return optimize(*args, **kwargs)

    monkeypatch.setattr(bounds, "sn_optimize", counting)
    argv = ["bounds", "--state", str(state_file(ghz_state(2, 3))),
            "--graph", str(networks_dir / "triangle.json"), "--restarts", "2"]
    code, out = _run(capsys, argv)
    assert code == EXIT_OK
    assert len(calls) == 1
    assert "trace_distance_bounds" in json.loads(out)


def test_internal_errors_are_not_input_errors(monkeypatch, networks_dir):
    def broken(g):
        raise ValueError("internal failure")

    monkeypatch.setattr(netgraph, "graph_params", broken)
    with pytest.raises(ValueError, match="internal failure"):
        main(["graph", "--graph", str(networks_dir / "c4.json")])


def test_unwritable_output_is_an_input_error(tmp_path):
    target = tmp_path / "missing" / "out.json"
    assert main(["demo-c4", "--out", str(target)]) == EXIT_PARSE


def test_malformed_certificate(tmp_path, state_file):
    cert = tmp_path / "cert.json"
    cert.write_text('{"weights": [1.0]}')
    state = state_file(ghz_state(2, 3))
    assert main(["seesaw", "--state", str(state), "--verify", str(cert)]) == EXIT_PARSE


def test_seesaw_rejects_mismatched_source_dims(state_file, graph_file, bell_and_zero):
    argv = ["seesaw", "--state", str(state_file(bell_and_zero)),
            "--graph", str(graph_file(netgraph.line(3))), "--source-dims", "[[2,2]]"]
    assert main(argv) == EXIT_DOMAIN
