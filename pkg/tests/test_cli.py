import io
import json

import pytest

from channel_models.channel import save_channel
from channel_models.standard_channels import make_standard
from report_tools.commands import EXIT_OK, EXIT_SOLVER, EXIT_USAGE, build_parser, run
from report_tools.report import SWEEP_COLUMNS, parse_sweep_csv


def invoke(*argv):
    out = io.StringIO()
    code, report = run([str(arg) for arg in argv], stdout=out)
    return code, report, out.getvalue()


@pytest.fixture
def noiseless_file(tmp_path):
    path = tmp_path / "noiseless2.json"
    save_channel(make_standard("noiseless", 2), path)
    return path


def test_error_command(samples):
    code, report, text = invoke("error", "--channel", samples / "bsc.json", "-M", 2)
    assert code == EXIT_OK
    assert report.results["p_err"] == pytest.approx(0.1, abs=1e-10)
    document = json.loads(text)
    assert document["results"]["p_err"] == pytest.approx(0.1, abs=1e-10)
    assert document["channel"]["inputs"] == 2
    assert document["mode"] == "float"
    assert document["results"]["M"] == 2
    assert document["results"]["mu"] == "1/2"


def test_exact_error_command(samples):
    code, _, text = invoke("error", "--channel", samples / "bsc.json", "-M", 2, "--exact")
    assert code == EXIT_OK
    document = json.loads(text)
    assert document["results"]["p_err"] == "1/10"
    assert document["mode"] == "exact"


def test_size_command(samples):
    code, report, _ = invoke("size", "--channel", samples / "useless.json", "--eps", 0.75)
    assert code == EXIT_OK
    assert report.results["M_beta"] == pytest.approx(4.0)
    assert report.results["M_NS"] == 4


def test_size_with_joint_types_matches_explicit(samples):
    argv = ["size", "--channel", samples / "bsc.json", "--eps", 0.01, "--power", 2]
    _, explicit, _ = invoke(*argv)
    code, reduced, _ = invoke(*argv, "--types")
    assert code == EXIT_OK
    assert reduced.results["M_beta"] == pytest.approx(explicit.results["M_beta"], rel=1e-6)
    assert reduced.results["joint_types"] == 10


def test_certificate_round_trip(samples, tmp_path):
    cert = tmp_path / "cert.json"
    channel = samples / "bsc.json"
    code, size, _ = invoke("size", "--channel", channel, "--eps", 0.1, "--save-cert", cert)
    assert code == EXIT_OK and cert.exists()
    code, checked, _ = invoke("certify", "--channel", channel, "--eps", 0.1, "--cert", cert)
    assert code == EXIT_OK
    assert checked.results["valid"]
    assert float(checked.results["bound"]) == pytest.approx(size.results["M_beta"], rel=1e-8)


def test_code_command(samples, tmp_path):
    saved = tmp_path / "code.json"
    code, report, _ = invoke(
        "code", "--channel", samples / "bsc.json", "-M", 2, "--save-code", saved
    )
    assert code == EXIT_OK
    assert report.results["passed"]
    assert report.results["p_err_code"] == pytest.approx(0.1, abs=1e-9)
    assert json.loads(saved.read_text())["M"] == 2


def test_zero_error_command(samples):
    code, report, _ = invoke("zero-error", "--channel", samples / "typewriter5.json")
    assert code == EXIT_OK
    assert float(report.results["alpha_star"]) == pytest.approx(2.5)
    assert report.results["M0"] == 2
    assert len(report.results["edges"]) == 5


def test_asymptotics_command(samples):
    code, report, _ = invoke(
        "asymptotics", "--channel", samples / "bsc.json", "--eps", 0.05, "-n", 100
    )
    assert code == EXIT_OK
    assert report.results["C"] == pytest.approx(0.5310044, abs=1e-6)
    assert report.results["V"] == pytest.approx(0.9043582, abs=1e-5)
    assert report.results["normal_approx"] == pytest.approx(37.459, abs=1e-2)
    assert report.results["consistent"]


def test_beta_command(samples):
    code, report, _ = invoke("beta", "--p0", "0.9,0.1", "--p1", "0.5,0.5", "--eps", 0.1)
    assert code == EXIT_OK
    assert report.results["beta"] == pytest.approx(0.5)
    code, report, _ = invoke("beta", "--channel", samples / "useless.json", "--eps", 0.75)
    assert code == EXIT_OK
    assert float(report.results["M_ppv"]) == pytest.approx(4.0)


def test_sweep_csv(samples):
    argv = ["sweep", "--channel", samples / "bsc.json", "--eps", 0.1, "--n-list", "1,2,3"]
    code, report, text = invoke(*argv, "--format", "csv")
    assert code == EXIT_OK
    assert text.splitlines()[0] == ",".join(SWEEP_COLUMNS)
    rows = parse_sweep_csv(text)
    assert [row["n"] for row in rows] == [1, 2, 3]
    assert rows == report.rows


def test_sweep_noiseless_rate(noiseless_file):
    code, report, _ = invoke(
        "sweep", "--channel", noiseless_file, "--eps", 0.1, "--n-list", "1,2,3", "--types"
    )
    assert code == EXIT_OK
    assert all(row["rate"] >= 1.0 for row in report.rows)


def test_identical_runs_give_identical_reports(samples, tmp_path):
    argv = ["size", "--channel", samples / "bsc.json", "--eps", 0.1, "--power", 2]
    _, first, _ = invoke(*argv)
    _, second, _ = invoke(*argv)
    one, two = first.to_json_dict(), second.to_json_dict()
    one.pop("timing")
    two.pop("timing")
    assert one == two

    out = tmp_path / "report.json"
    code, _, text = invoke(*argv, "--out", out)
    assert code == EXIT_OK and text == ""
    assert json.loads(out.read_text())["results"] == one["results"]


@pytest.mark.parametrize(
    "argv",
    [
        ["error", "--channel", "sample_channels/bsc.json"],
        ["size", "--channel", "sample_channels/bsc.json"],
        ["size", "--eps", "0.1"],
        ["size", "--channel", "missing.json", "--eps", "0.1"],
        ["size", "--channel", "sample_channels/bsc.json", "--eps", "1.5"],
        ["sweep", "--channel", "sample_channels/bsc.json", "--eps", "0", "--n-list", "1,2"],
        ["sweep", "--channel", "sample_channels/bsc.json", "--eps", "0.1", "--n-list", "3,2"],
        ["size", "--channel", "sample_channels/bsc.json", "--eps", "0.1", "--power", "30"],
        ["size", "--channel", "sample_channels/bsc.json", "--eps", "1"],
        ["error", "--channel", "sample_channels/bsc.json", "-M", "0"],
        ["teleport"],
    ],
)
def test_usage_errors(argv, monkeypatch, samples):
    monkeypatch.chdir(samples.parent)
    code, report, text = invoke(*argv)
    assert code == EXIT_USAGE
    assert report is None
    assert text == ""


def test_solver_failure_exit_code(tmp_path):
    channel = tmp_path / "z.json"
    save_channel(make_standard("zchannel", 0.3), channel)
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"asymptotics": {"max_iterations": 1}}))
    code, report, _ = invoke("capacity", "--channel", channel, "--config", config)
    assert code == EXIT_SOLVER
    assert report is None


def test_subcommands_parse():
    parser = build_parser()
    for name in ("error", "size", "zero-error", "capacity", "dispersion", "asymptotics"):
        assert parser.parse_args([name, "-M", "2"] if name == "error" else [name]).command == name


def test_sweep_at_median_error_is_capacity(samples):
    argv = ["sweep", "--channel", samples / "bsc.json", "--eps", 0.5, "--n-list", "1"]
    code, report, _ = invoke(*argv)
    assert code == EXIT_OK
    assert report.rows[0]["normal_approx"] == pytest.approx(0.531004, abs=1e-6)
