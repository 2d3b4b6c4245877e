import json
import subprocess
import sys

import pytest

from adsbauth.cli import main


def run(capsys, *argv: str) -> tuple[int, str, str]:
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def plan_file(tmp_path):
    def write(keyfile, alt=80.0):
        pub = json.loads(keyfile.read_text())["signing_public"]
        plan = {
            "registration_id": "FA-CLI-1",
            "icao_address": "ABCDEF",
            "waypoints": [[29.19, -81.05, alt], [29.25, -81.10, alt]],
            "etas": [1000.0, 1600.0],
            "submitter_public_key": pub,
        }
        path = tmp_path / f"plan_{alt:g}.json"
        path.write_text(json.dumps(plan))
        return path

    return write


def test_check_config(capsys):
    code, out, _ = run(capsys, "check-config", "1024", "32", "3.25")
    assert code == 0 and "L_h + L_C = 7 + 32 = 39" in out
    code, out, _ = run(capsys, "check-config", "2048", "32", "3.25")
    assert "51 - L_h = 43" in out
    assert run(capsys, "check-config", "4096", "48", "4")[0] == 1


def test_frame_build_and_parse(capsys):
    code, out, _ = run(capsys, "frame", "build", "--icao", "ABCDEF", "--column", "103", "--data", "DEADBEEF")
    hexframe = out.strip()
    assert code == 0 and len(hexframe) == 28
    code, out, _ = run(capsys, "frame", "parse", hexframe)
    assert out.strip() == "icao ABCDEF column 103 data DEADBEEF"
    bad = hexframe[:-1] + ("0" if hexframe[-1] != "0" else "1")
    code, _, err = run(capsys, "frame", "parse", bad)
    assert code == 2 and "CrcMismatch" in err


def test_preflight_flow(tmp_path, capsys, plan_file):
    net, key, other = tmp_path / "net", tmp_path / "uas.json", tmp_path / "other.json"
    assert run(capsys, "keygen", str(key), "--seed", "1")[0] == 0
    assert run(capsys, "keygen", str(other), "--seed", "2")[0] == 0
    assert run(capsys, "net", "init", str(net), "--seed", "0")[0] == 0
    plan = plan_file(key)

    code, sig, _ = run(capsys, "plan", "sign", str(plan), "--key", str(key))
    assert code == 0
    assert run(capsys, "plan", "submit", str(net), str(plan), "--signature", sig.strip())[0] == 0
    code, _, err = run(capsys, "plan", "submit", str(net), str(plan), "--key", str(other))
    assert code == 2 and "BadSignature" in err

    code, out, _ = run(capsys, "plan", "assess", str(net), str(plan))
    assert (code, out.strip()) == (0, "approve")
    code, out, _ = run(capsys, "plan", "assess", str(net), str(plan_file(key, alt=300.0)))
    assert (code, out.strip()) == (1, "reject AltitudeViolation")

    sealed = tmp_path / "cred.bin"
    code, out, _ = run(
        capsys, "credential", "issue", str(net), str(plan), "--recipient", str(key), "--out", str(sealed), "--seed", "5"
    )
    assert code == 0 and "k=32 n=105 L_h=7" in out
    code, out, _ = run(capsys, "credential", "open", str(sealed), "--key", str(key))
    info = json.loads(out)
    assert info["matrix"]["n"] == 105 and info["icao_address"] == "ABCDEF"
    code, _, err = run(capsys, "credential", "open", str(sealed), "--key", str(other))
    assert code == 2 and "DecryptFailure" in err

    code, out, _ = run(capsys, "chain", "verify", str(net))
    assert code == 0 and out.startswith("ok")

    # tamper with one stored block
    chain = net / "chain.ndjson"
    lines = chain.read_text().splitlines()
    rec = json.loads(lines[2])
    rec["payload"] = format(int(rec["payload"][0], 16) ^ 1, "x") + rec["payload"][1:]
    lines[2] = json.dumps(rec)
    chain.write_text("\n".join(lines) + "\n")
    code, out, _ = run(capsys, "chain", "verify", str(net))
    assert (code, out.strip()) == (1, "first bad block 2")


def test_ceil_n_flag(tmp_path, capsys, plan_file):
    net, key = tmp_path / "net", tmp_path / "uas.json"
    run(capsys, "keygen", str(key), "--seed", "1")
    run(capsys, "net", "init", str(net))
    plan = plan_file(key)
    code, _, err = run(
        capsys, "credential", "issue", str(net), str(plan), "--recipient", str(key), "--out", str(tmp_path / "c"),
        "--ceil-n",
    )
    assert code == 2 and "ParamViolation" in err


def test_sweep_plr_stdout_deterministic(capsys):
    argv = ["sweep", "plr", "--payload-sizes", "256", "--plr-grid", "0.7", "--trials", "5", "--seed", "4"]
    _, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv)
    assert a == b and a.startswith("payload_bits,") and len(a.splitlines()) == 3


def test_sweep_range_to_file(tmp_path, capsys):
    out = tmp_path / "range.csv"
    code, table, _ = run(
        capsys, "sweep", "range", "--payload-sizes", "512", "--distance-grid", "0", "100", "--trials", "4",
        "--out", str(out),
    )
    assert code == 0 and "r0*" in table and len(out.read_text().splitlines()) == 3


def test_demo_e2e(tmp_path, capsys):
    transcript = tmp_path / "t.txt"
    code, out, _ = run(capsys, "demo", "e2e", "--seed", "2", "--transcript", str(transcript))
    assert code == 0
    assert "StaleSequence" in out and "accept" in out
    assert all(len(line) == 28 for line in transcript.read_text().split())


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "adsbauth", "check-config", "1024", "32", "3.25"], capture_output=True, text=True)
    assert proc.returncode == 0 and "39" in proc.stdout
