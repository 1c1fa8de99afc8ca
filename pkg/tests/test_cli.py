import json

import pytest

from ppkda import cli, keystroke
from ppkda.keystroke import GeneratorProfile, build_template, synthesize, write_event_log


def run_cli(*args):
    return cli.main([str(a) for a in args])


@pytest.fixture
def keyfiles(tmp_path):
    prefix = tmp_path / "keys"
    assert run_cli("keygen", "--bits", 512, "--seed", 5, "--keys", prefix) == 0
    return prefix


@pytest.fixture
def corpus(tmp_path):
    """Genuine/imposter event logs plus an enrollment log, all seeded."""
    genuine = GeneratorProfile.random(4, seed=20)
    imposter = GeneratorProfile.random(4, seed=21)
    enroll_log = tmp_path / "enroll.csv"
    genuine_log = tmp_path / "genuine.csv"
    imposter_log = tmp_path / "imposter.csv"
    write_event_log(enroll_log, synthesize(genuine, 240, stream_seed=22))
    write_event_log(genuine_log, synthesize(genuine, 15, stream_seed=23))
    write_event_log(imposter_log, synthesize(imposter, 120, stream_seed=24))
    return enroll_log, genuine_log, imposter_log


def test_keygen_writes_files(tmp_path, capsys):
    prefix = tmp_path / "k"
    assert run_cli("keygen", "--bits", 512, "--seed", 1, "--keys", prefix) == 0
    pub = json.loads((tmp_path / "k.pub.json").read_text())
    priv = json.loads((tmp_path / "k.priv.json").read_text())
    assert pub["k"] == 512
    assert {"n", "g", "version"} <= set(pub)
    assert {"p", "q"} <= set(priv)
    assert "wrote" in capsys.readouterr().out


def test_keygen_refuses_overwrite(tmp_path, capsys):
    prefix = tmp_path / "k"
    run_cli("keygen", "--bits", 512, "--seed", 1, "--keys", prefix)
    assert run_cli("keygen", "--bits", 512, "--seed", 1, "--keys", prefix) == 3
    assert "--force" in capsys.readouterr().err
    assert run_cli("keygen", "--bits", 512, "--seed", 1, "--keys", prefix,
                   "--force") == 0


def test_keygen_seed_reproducible(tmp_path):
    run_cli("keygen", "--bits", 512, "--seed", 8, "--keys", tmp_path / "a")
    run_cli("keygen", "--bits", 512, "--seed", 8, "--keys", tmp_path / "b")
    assert (tmp_path / "a.pub.json").read_text() == (tmp_path / "b.pub.json").read_text()
    assert (tmp_path / "a.priv.json").read_text() == (tmp_path / "b.priv.json").read_text()


def test_enroll_then_auth_genuine(tmp_path, keyfiles, corpus, capsys):
    enroll_log, genuine_log, _ = corpus
    store = tmp_path / "store"
    assert run_cli("enroll", "--log", enroll_log, "--user", "alice",
                   "--keys", keyfiles, "--store", store, "--seed", 0) == 0
    out = capsys.readouterr().out
    assert "enrolled" in out

    # 2 ciphertexts per enrolled key end up in the store
    doc = json.loads((store / "alice.json").read_text())
    template = build_template(keystroke.read_event_log(enroll_log))
    assert len(doc["entries"]) == len(template.stats)

    trace = tmp_path / "trace.csv"
    assert run_cli("auth", "--log", genuine_log, "--user", "alice",
                   "--keys", keyfiles, "--store", store, "--seed", 0,
                   "--trace-csv", trace) == 0
    assert "accepted throughout" in capsys.readouterr().out
    lines = trace.read_text().splitlines()
    assert lines[0] == "event_idx,key,decision"
    assert all(line.endswith("active") for line in lines[1:])


def test_auth_imposter_rejected(tmp_path, keyfiles, corpus, capsys):
    enroll_log, _, imposter_log = corpus
    store = tmp_path / "store"
    run_cli("enroll", "--log", enroll_log, "--user", "alice",
            "--keys", keyfiles, "--store", store, "--seed", 0)
    capsys.readouterr()
    code = run_cli("auth", "--log", imposter_log, "--user", "alice",
                   "--keys", keyfiles, "--store", store, "--seed", 0)
    assert code == 2
    assert "rejected at event" in capsys.readouterr().out


def test_auth_unenrolled_user(tmp_path, keyfiles, corpus, capsys):
    _, genuine_log, _ = corpus
    code = run_cli("auth", "--log", genuine_log, "--user", "nobody",
                   "--keys", keyfiles, "--store", tmp_path / "store", "--seed", 0)
    assert code == 3
    assert "unknown user" in capsys.readouterr().err


def test_enroll_single_sample_key_warns(tmp_path, keyfiles, capsys):
    profile = GeneratorProfile.random(2, seed=30)
    events = synthesize(profile, 20, stream_seed=31)
    lone = keystroke.KeyEvent(7, 10 ** 6, 10 ** 6 + 90)
    log = tmp_path / "log.csv"
    write_event_log(log, events + [lone])
    assert run_cli("enroll", "--log", log, "--user", "bob",
                   "--keys", keyfiles, "--store", tmp_path / "store",
                   "--seed", 0) == 0
    captured = capsys.readouterr()
    assert "warning: key 7 excluded" in captured.err


def test_unreachable_server(tmp_path, keyfiles, corpus, capsys):
    _, genuine_log, _ = corpus
    code = run_cli("auth", "--log", genuine_log, "--user", "alice",
                   "--keys", keyfiles, "--addr", "127.0.0.1:1", "--seed", 0)
    assert code == 1
    assert "cannot reach server" in capsys.readouterr().err


def test_simulate_deterministic(capsys):
    args = ["simulate", "--seed", "3", "--n-keys", "4", "--n-events", "12",
            "--bits", "512"]
    assert run_cli(*args) == 0
    first = capsys.readouterr().out
    assert run_cli(*args) == 0
    second = capsys.readouterr().out
    assert first == second
    assert "genuine:" in first and "imposter:" in first
    assert "C trajectory" in first
    assert first.count("traces identical: yes") == 2


def test_table1_output(capsys):
    assert run_cli("table1", "--n", "10", "--seed", "0") == 0
    out = capsys.readouterr().out
    assert "N+4=14" in out
    assert "Govindarajan" in out and "Balagani" in out and "Wei" in out
    # the N flag changes only the arithmetic column
    assert run_cli("table1", "--n", "6", "--seed", "0") == 0
    out6 = capsys.readouterr().out
    assert "N+4=10" in out6


def test_bench_small_grid(tmp_path, capsys):
    csv = tmp_path / "bench.csv"
    assert run_cli("bench", "--key-sizes", "512", "--bit-lengths", "4,7",
                   "--reps", "5", "--seed", "0", "--csv", csv) == 0
    out = capsys.readouterr().out
    assert "median of 5 reps" in out
    assert "complexity counters" in out
    rows = csv.read_text().splitlines()
    assert rows[0].startswith("key_bits,comparison_bits,median_total_ms")
    assert len(rows) == 3


def test_config_file_and_env_precedence(tmp_path, monkeypatch):
    config = tmp_path / "ppkda.conf"
    config.write_text("# comment\nbits = 512\n")
    prefix = tmp_path / "c"
    assert run_cli("--config", config, "keygen", "--seed", 2, "--keys", prefix) == 0
    assert json.loads((tmp_path / "c.pub.json").read_text())["k"] == 512

    # environment beats the config file
    monkeypatch.setenv("PPKDA_BITS", "768")
    prefix2 = tmp_path / "d"
    assert run_cli("--config", config, "keygen", "--seed", 2, "--keys", prefix2) == 0
    assert json.loads((tmp_path / "d.pub.json").read_text())["k"] == 768


def test_bad_config_line(tmp_path, capsys):
    config = tmp_path / "bad.conf"
    config.write_text("this is not key value\n")
    assert run_cli("--config", config, "table1") == 1
    assert "key=value" in capsys.readouterr().err
