import json
import socket
import subprocess
import sys
import threading

import pytest

from followsim.cli import main
from followsim.results import TrialResult
from followsim.scenario import crossing_fixture, default_scenario, packaged_scenario_path, write_scenario
from followsim.session import run_in_process
from followsim.transport import open_server_socket, serve_forever

FIXTURE = str(packaged_scenario_path("crossing_fixture"))


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_run_success_prints_one_json_line(capsys):
    code, out, _ = run_cli(capsys, "run", "--scenario", FIXTURE, "--tracker", "ocsort")
    assert code == 0
    (line,) = out.splitlines()
    assert TrialResult.from_dict(json.loads(line)).outcome == "Success"


def test_run_failure_exits_one(capsys):
    code, out, _ = run_cli(capsys, "run", "--scenario", FIXTURE, "--tracker", "baseline")
    assert code == 1
    assert json.loads(out)["failure_cause"] == "id_switch"


def test_invalid_tracker_lists_names(capsys):
    with pytest.raises(SystemExit) as e:
        main(["run", "--scenario", FIXTURE, "--tracker", "warp9"])
    assert e.value.code == 2
    err = capsys.readouterr().err
    for name in ("baseline", "bytetrack", "ocsort", "botsort_lite"):
        assert name in err


def test_missing_file_exits_two(capsys, tmp_path):
    code, out, err = run_cli(capsys, "run", "--scenario", str(tmp_path / "nope.json"), "--tracker", "ocsort")
    assert code == 2 and out == "" and "nope.json" in err


def test_bad_scenario_exits_two(capsys, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"scenario": {"activation_distance": 4.0}}')
    code, _, err = run_cli(capsys, "run", "--scenario", str(p), "--tracker", "ocsort")
    assert code == 2 and "activation_distance" in err


def test_repeat_runs_have_identical_stdout(capsys):
    args = ("run", "--scenario", str(packaged_scenario_path("lab_d2.5")), "--tracker", "bytetrack", "--seed", "3")
    assert run_cli(capsys, *args)[1] == run_cli(capsys, *args)[1]


def test_campaign_single_trial_grid(capsys, tmp_path):
    out = tmp_path / "r.csv"
    code, table, _ = run_cli(capsys, "campaign", "--trials", "1", "--out", str(out))
    assert code == 0
    assert len(out.read_text().splitlines()) == 1 + 12
    assert table.splitlines()[-1].startswith("| Average")


def test_campaign_rejects_bad_distance(capsys):
    with pytest.raises(SystemExit) as e:
        main(["campaign", "--distances", "1.5,4.0"])
    assert e.value.code == 2


def test_table_command_round_trip(capsys, tmp_path):
    out = tmp_path / "r.csv"
    run_cli(capsys, "campaign", "--trials", "1", "--distances", "1.5", "--trackers", "ocsort,baseline", "--out", str(out))
    code, text, _ = run_cli(capsys, "table", "--results", str(out), "--format", "csv")
    assert code == 0
    assert text.splitlines() == ["Distance,OC-SORT,Baseline", "1.5m,100.0,0.0", "Average,100.0,0.0"]


def test_fisher_command(capsys):
    code, out, _ = run_cli(capsys, "fisher", "5", "0", "0", "5")
    assert code == 0 and float(out) == pytest.approx(2 / 252, abs=1e-12)


def _free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def test_client_to_closed_port_exits_two(capsys):
    code, out, err = run_cli(capsys, "client", "--connect", f"127.0.0.1:{_free_port()}", "--tracker", "ocsort")
    assert code == 2 and out == "" and "connection" in err


def test_run_over_network_matches_in_process(capsys, tmp_path):
    srv = open_server_socket("127.0.0.1", 0)
    port = srv.getsockname()[1]
    th = threading.Thread(target=serve_forever, args=(srv, None, 1))
    th.start()
    path = tmp_path / "s.json"
    write_scenario(default_scenario(1.5), path)
    try:
        code, out, _ = run_cli(capsys, "run", "--scenario", str(path), "--tracker", "ocsort", "--seed", "7", "--net", f"127.0.0.1:{port}")
    finally:
        th.join(30)
        srv.close()
    assert TrialResult.from_dict(json.loads(out)) == run_in_process(default_scenario(1.5), "ocsort", 7)
    assert code in (0, 1)


def test_serve_and_client_processes(tmp_path):
    port = _free_port()
    server = subprocess.Popen(
        [sys.executable, "-m", "followsim", "serve", "--port", str(port), "--scenario", FIXTURE, "--sessions", "1"],
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        text=True,
    )
    try:
        assert "listening" in server.stderr.readline()
        client = subprocess.run(
            [sys.executable, "-m", "followsim", "client", "--connect", f"127.0.0.1:{port}", "--tracker", "ocsort"],
            capture_output=True,
            text=True,
            timeout=60,
        )
        server_out, _ = server.communicate(timeout=60)
    finally:
        server.kill()
    assert client.returncode == 0
    assert json.loads(client.stdout) == json.loads(server_out)
    assert TrialResult.from_dict(json.loads(client.stdout)) == run_in_process(crossing_fixture(), "ocsort", 0)
