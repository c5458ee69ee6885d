import csv
import json
import subprocess
import sys

import pytest

from opcqkd import cli
from opcqkd.errors import ConfigError


def run(argv):
    try:
        return cli.main(argv)
    except SystemExit as exc:
        return exc.code


def write_config(tmp_path, **fields):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(fields), encoding="utf-8")
    return path


SMALL = dict(n_cores=2, q_perturbations=3, n_rounds=600, seed=11)


class TestVerify:
    def test_passes(self, capsys):
        assert run(["verify", "--dim", "8", "--q", "5", "--trials", "100", "--seed", "3"]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out

    def test_general_mode(self):
        assert run(["verify", "--dim", "6", "--q", "4", "--trials", "20", "--seed", "1", "--mode", "general"]) == 0

    def test_no_segments_is_exact(self, tmp_path):
        out = tmp_path / "v.json"
        assert run(["verify", "--dim", "4", "--q", "0", "--trials", "5", "--seed", "0", "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["results"]["max_deviation"] == 0.0
        assert doc["seed"] == 0

    @pytest.mark.parametrize("dim", ["3", "0", "-2"])
    def test_bad_dim(self, dim, capsys):
        assert run(["verify", "--dim", dim, "--q", "2"]) == 2
        assert "--dim" in capsys.readouterr().err

    def test_failure_exit_code(self, monkeypatch):
        monkeypatch.setattr(cli, "VERIFY_THRESHOLD", -1.0)
        assert run(["verify", "--dim", "4", "--q", "1", "--trials", "1", "--seed", "0"]) == 1


class TestConfig:
    def test_defaults(self):
        cfg = cli.parse_config("{}")
        assert cfg == {k: d for k, (_, d) in cli.CONFIG_FIELDS.items()}

    def test_json_error_location(self):
        with pytest.raises(ConfigError, match=r"cfg:2:\d+"):
            cli.parse_config('{"n_cores": 2,\n "seed": }', "cfg")

    def test_unknown_field(self):
        with pytest.raises(ConfigError, match="'n_core'"):
            cli.parse_config('{"n_core": 2}')

    @pytest.mark.parametrize("text", ['{"n_rounds": 1.5}', '{"n_cores": true}', '{"eve": 3}'])
    def test_wrong_type_names_field(self, text):
        key = next(iter(json.loads(text)))
        with pytest.raises(ConfigError, match=repr(key)):
            cli.parse_config(text)

    def test_bad_enum(self):
        with pytest.raises(ConfigError, match="'mirror'"):
            cli.parse_config('{"mirror": "silver"}')

    def test_not_an_object(self):
        with pytest.raises(ConfigError):
            cli.parse_config("[1, 2]")

    def test_semantic_error(self):
        with pytest.raises(ConfigError):
            cli.session_config(cli.parse_config('{"n_cores": 3}'))

    def test_optional_intensities(self):
        sc = cli.session_config(cli.parse_config('{"mu_decoy": null, "mu_vacuum": null}'))
        assert [i.role.value for i in sc.intensities] == ["signal"]


class TestSession:
    def test_noiseless(self, tmp_path, capsys):
        out = tmp_path / "stats.json"
        assert run(["session", "--config", str(write_config(tmp_path, **SMALL)), "--out", str(out)]) == 0
        doc = json.loads(out.read_text(encoding="utf-8"))
        assert doc["results"]["qber"] == 0.0
        assert doc["seed"] == 11
        assert doc["config"]["n_cores"] == 2
        assert "qber" in capsys.readouterr().out

    def test_intercept_resend_d4(self, tmp_path):
        out = tmp_path / "stats.json"
        cfg = write_config(tmp_path, n_cores=2, q_perturbations=1, n_rounds=8000, seed=5,
                           eve="intercept_resend", mu_signal=3.0, mu_decoy=None, mu_vacuum=None)
        assert run(["session", "--config", str(cfg), "--out", str(out)]) == 0
        res = json.loads(out.read_text())["results"]
        sigma = (0.375 * 0.625 / res["sifted"]) ** 0.5
        assert abs(res["qber"] - 0.375) <= 4 * sigma

    def test_seed_recorded_when_absent(self, tmp_path):
        out = tmp_path / "s.json"
        cfg = write_config(tmp_path, n_cores=1, n_rounds=20)
        assert run(["session", "--config", str(cfg), "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert isinstance(doc["seed"], int) and doc["config"]["seed"] == doc["seed"]

    def test_missing_file(self, tmp_path, capsys):
        out = tmp_path / "never.json"
        assert run(["session", "--config", str(tmp_path / "nope.json"), "--out", str(out)]) != 0
        assert not out.exists()
        assert list(tmp_path.iterdir()) == []
        assert "nope.json" in capsys.readouterr().err

    def test_parse_error_leaves_no_output(self, tmp_path, capsys):
        cfg = tmp_path / "bad.json"
        cfg.write_text('{\n  "n_cores": 2,\n  "q_perturbations": ,\n}', encoding="utf-8")
        out = tmp_path / "o.json"
        assert run(["session", "--config", str(cfg), "--out", str(out)]) == 2
        assert not out.exists()
        assert ":3:" in capsys.readouterr().err

    def test_deterministic_payload(self, tmp_path):
        cfg = write_config(tmp_path, **SMALL, eve="intercept_resend")
        docs = []
        for name in ("a.json", "b.json"):
            assert run(["session", "--config", str(cfg), "--out", str(tmp_path / name)]) == 0
            docs.append(json.loads((tmp_path / name).read_text()))
        for doc in docs:
            del doc["started_at"], doc["finished_at"]
        assert docs[0] == docs[1]


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


class TestSweep:
    def test_q_axis_zero_qber(self, tmp_path):
        out = tmp_path / "q.csv"
        cfg = write_config(tmp_path, n_cores=2, n_rounds=300, seed=2)
        values = ",".join(str(q) for q in range(9))
        assert run(["sweep", "--config", str(cfg), "--axis", "q_perturbations", "--values", values, "--out", str(out)]) == 0
        rows = read_csv(out)
        assert tuple(rows[0]) == cli.SWEEP_HEADER
        assert [int(r[0]) for r in rows[1:]] == list(range(9))
        assert all(float(r[1]) == 0.0 for r in rows[1:])
        assert {len(r) for r in rows} == {len(cli.SWEEP_HEADER)}
        manifest = json.loads((tmp_path / "q.csv.manifest.json").read_text())
        assert manifest["seed"] == 2 and manifest["results"]["axis"] == "q_perturbations"

    def test_mu_signal_gain_increasing(self, tmp_path):
        out = tmp_path / "mu.csv"
        cfg = write_config(tmp_path, n_cores=1, q_perturbations=1, n_rounds=6000, seed=4)
        assert run(["sweep", "--config", str(cfg), "--axis", "mu_signal", "--values", "0.1,0.5", "--out", str(out)]) == 0
        gains = [float(r[2]) for r in read_csv(out)[1:]]
        assert gains[0] < gains[1]

    def test_missing_decoy_column_stays_aligned(self, tmp_path):
        out = tmp_path / "k.csv"
        cfg = write_config(tmp_path, n_cores=1, n_rounds=50, seed=1, mu_decoy=None)
        assert run(["sweep", "--config", str(cfg), "--axis", "kappa_l", "--values", "0.3,-0.3", "--out", str(out)]) == 0
        rows = read_csv(out)
        assert {len(r) for r in rows} == {5}
        assert all(r[3] == "" for r in rows[1:])

    @pytest.mark.parametrize(
        "axis,values",
        [("mu_signal", ""), ("mu_signal", " , "), ("z_length", "1,2"), ("n_cores", "1.5"), ("mu_signal", "a,b")],
    )
    def test_usage_errors(self, tmp_path, axis, values):
        out = tmp_path / "x.csv"
        cfg = write_config(tmp_path, n_rounds=10, seed=0)
        assert run(["sweep", "--config", str(cfg), "--axis", axis, "--values", values, "--out", str(out)]) == 2
        assert not out.exists()

    def test_deterministic(self, tmp_path):
        cfg = write_config(tmp_path, n_cores=2, n_rounds=300, seed=9, eve="intercept_resend")
        texts = []
        for name in ("a.csv", "b.csv"):
            path = tmp_path / name
            assert run(["sweep", "--config", str(cfg), "--axis", "n_cores", "--values", "1,2,4", "--out", str(path)]) == 0
            texts.append(path.read_bytes())
        assert texts[0] == texts[1]


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "opcqkd", "verify", "--dim", "4", "--q", "2", "--trials", "3", "--seed", "1"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "PASS" in proc.stdout
