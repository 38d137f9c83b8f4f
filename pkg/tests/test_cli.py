import csv
import json

import numpy as np
import pytest

from csvt import cli

CONFIGS = {
    "channel-gen": {"channel": {"d": 2, "env_dim": 4, "seed": 7}},
    "encode-converge": {"channel": {"named": "identity", "d": 2},
                        "params": {"k": [0, 0.5], "n_steps": [8, 16, 32, 64, 128]}},
    "moments": {"channel": {"d": 2, "env_dim": 4, "count": 3}, "params": {"q": [3, 4], "eps": 0.01,
                                                                        "mode": ["exact", "sampled"]}},
    "first-moment": {"channel": {"named": "identity", "d": 2}, "params": {"eps": 0.1}},
    "discriminate": {"params": {"n": 1, "pq": [[1.0, 0.9], [0.5, 0.5]], "delta_grid": [0.2],
                                "t_grid": [0.5]}},
    "spectrum": {"channel": {"d": 2, "count": 2}},
}


def run(tmp_path, command, cfg, name="cfg.json", extra=()):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    out = tmp_path / f"out_{command}_{name}"
    code = cli.main([command, "--config", str(path), "--out", str(out), *extra])
    return code, out


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_channel_gen(tmp_path):
    code, out = run(tmp_path, "channel-gen", CONFIGS["channel-gen"])
    assert code == 0
    ch = json.loads((out / "channel.json").read_text())
    assert len(ch["kraus"]) == 4
    assert json.loads((out / "lemma_report.json").read_text())["ok"]
    _, again = run(tmp_path, "channel-gen", CONFIGS["channel-gen"], "again.json")
    assert (again / "channel.json").read_bytes() == (out / "channel.json").read_bytes()


def test_channel_gen_unital(tmp_path):
    code, out = run(tmp_path, "channel-gen", {"channel": {"unital": True, "d": 2, "seed": 1}})
    rep = json.loads((out / "lemma_report.json").read_text())
    assert code == 0 and abs(rep["values"]["opnorm_EA"] - 1) <= 1e-8


def test_encode_converge(tmp_path, capsys):
    code, out = run(tmp_path, "encode-converge", CONFIGS["encode-converge"], extra=["--emit-gnuplot"])
    assert code == 0 and (out / "converge.gp").exists()
    summary = json.loads((out / "summary.json").read_text())
    assert all(abs(s + 1) <= 0.2 for s in summary["slopes"].values())
    assert "slope" in capsys.readouterr().out
    table = rows(out / "converge.csv")
    for k in ("0", "0.5"):
        sub = [r for r in table if r["k"] == k]
        for a, b in zip(sub, sub[1:]):
            assert int(b["n_steps"]) == 2 * int(a["n_steps"])
            assert int(b["query_count"]) == 2 * int(a["query_count"])
        totals = {float(r["total_time"]) for r in sub}
        assert max(totals) - min(totals) <= 1e-12
    t0 = float(next(r for r in table if r["k"] == "0")["total_time"])
    t5 = float(next(r for r in table if r["k"] == "0.5")["total_time"])
    assert t5 / t0 == pytest.approx(np.sqrt(2))


def test_moments(tmp_path):
    cfg = {"channel": {"d": 2, "env_dim": 4, "count": 20}, "params": {"q": [4, 6], "eps": 0.01}}
    code, out = run(tmp_path, "moments", cfg)
    table = rows(out / "moments.csv")
    assert code == 0 and len(table) == 40
    assert max(float(r["abs_error"]) for r in table) <= 0.01
    for r in table:
        est, exact = float(r["estimate"]), float(r["exact"])
        assert abs(est - exact) <= 1e-6
        if r["q"] == "4":
            assert abs(float(r["swap_moment"]) - exact) <= 1e-6
    _, ident = run(tmp_path, "moments", {"channel": {"named": "identity", "d": 2}, "params": {"q": 4}}, "id.json")
    assert float(rows(ident / "moments.csv")[0]["estimate"]) == pytest.approx(0.25, abs=1e-6)
    assert len(list((out / "runs").glob("run_*.json"))) == 40


def test_first_moment(tmp_path):
    code, out = run(tmp_path, "first-moment", CONFIGS["first-moment"])
    r = rows(out / "first_moment.csv")[0]
    assert code == 0 and abs(float(r["estimate"]) - 2) <= 0.1
    assert r["verdict"] == "not entanglement-breaking" and r["L"] == "39"
    _, dep = run(tmp_path, "first-moment", {"channel": {"named": "completely_depolarizing", "d": 2},
                                            "params": {"eps": 0.1}}, "dep.json")
    r = rows(dep / "first_moment.csv")[0]
    assert abs(float(r["estimate"]) - 0.5) <= 0.1 and r["verdict"] == "consistent with entanglement-breaking"


def test_discriminate(tmp_path):
    code, out = run(tmp_path, "discriminate", CONFIGS["discriminate"])
    ident = rows(out / "identities.csv")
    assert code == 0
    assert abs(float(ident[0]["fidelity"]) - float(ident[0]["fidelity_closed"])) <= 1e-9
    assert all(float(r["commutator_norm"]) <= 1e-9 for r in ident)
    same = ident[1]
    assert float(same["delta_trace"]) == 0 and float(same["d_reshuffled_opnorm"]) == 0
    table = rows(out / "bound_table.csv")
    assert all(float(r["measured_upper_queries"]) >= float(r["lower_bound"]) for r in table)


def test_spectrum(tmp_path):
    code, out = run(tmp_path, "spectrum", CONFIGS["spectrum"])
    assert code == 0 and max(float(r["abs_error"]) for r in rows(out / "spectrum.csv")) <= 1e-7


def test_every_csv_carries_provenance(tmp_path):
    for command, cfg in CONFIGS.items():
        _, out = run(tmp_path, command, cfg, f"{command}.json")
        for path in out.glob("*.csv"):
            header = rows(path)[0].keys()
            assert {"seed", "mode", "version"} <= set(header), path


@pytest.mark.parametrize("command", sorted(CONFIGS))
def test_manifest_rerun_is_byte_identical(tmp_path, command):
    _, out = run(tmp_path, command, CONFIGS[command])
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest) == {"command", "config", "seed", "version"}
    rerun = tmp_path / "rerun"
    assert cli.main([command, "--config", str(out / "manifest.json"), "--out", str(rerun)]) == 0
    for path in out.iterdir():
        if path.is_file() and path.name != "manifest.json":
            assert (rerun / path.name).read_bytes() == path.read_bytes(), path.name


def test_thread_pool_preserves_output(tmp_path, monkeypatch):
    _, serial = run(tmp_path, "moments", CONFIGS["moments"])
    monkeypatch.setenv("CSVT_THREADS", "4")
    _, pooled = run(tmp_path, "moments", CONFIGS["moments"], "pooled.json")
    assert (serial / "moments.csv").read_bytes() == (pooled / "moments.csv").read_bytes()


def test_exit_codes(tmp_path):
    assert run(tmp_path, "discriminate", {"params": {"n": 4}}, "cap.json")[0] == 3
    assert run(tmp_path, "encode-converge", {"channel": {"named": "identity", "d": 5}}, "capd.json")[0] == 3
    assert run(tmp_path, "spectrum", {"channel": {"d": 0}}, "bad.json")[0] == 2
    assert run(tmp_path, "moments", {"channel": {"d": 2}, "params": {"q": 2}}, "q2.json")[0] == 2
    assert run(tmp_path, "spectrum", {"channel": {"named": "trace_and_replace", "d": 2}}, "nu.json")[0] == 2
    assert run(tmp_path, "channel-gen", {"command": "moments"}, "wrong.json")[0] == 2
    (tmp_path / "broken.json").write_text("{not json")
    assert cli.main(["spectrum", "--config", str(tmp_path / "broken.json"), "--out", str(tmp_path / "x")]) == 2
