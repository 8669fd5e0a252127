import json

import numpy as np
import pytest

from lpideals.cli_lab import EXIT_CAPACITY, EXIT_CONFIG, EXIT_OK, emit_plot_data, main, to_json_text
from lpideals.errors import ConfigError
from lpideals.ideal_functionals import DecayRow, DecayTable
from lpideals.lp_core import BlockOperator, operator_to_json


def read(path):
    return json.loads(path.read_text())


def test_float_format_round_trips():
    x = 0.1 + 0.2
    assert float(to_json_text(x)) == x
    assert to_json_text([1.0, 2]) == "[1, 2]"
    assert to_json_text({"a": True, "b": None}) == '{\n  "a": true,\n  "b": null\n}'


def test_opnorm_identity(tmp_path):
    mfile = tmp_path / "m.json"
    mfile.write_text(json.dumps(operator_to_json(BlockOperator.between(np.eye(4), 2, 2))))
    assert main(["opnorm", "--matrix", str(mfile), "--p", "1.5", "--q", "3", "--out", str(tmp_path)]) == EXIT_OK
    res = read(tmp_path / "opnorm.json")
    assert res["lower"] == pytest.approx(1.0) and res["upper"] == pytest.approx(1.0)


def test_construct_round_trip(tmp_path):
    assert main(["construct", "--name", "S", "--p", "1.5", "--q", "3", "--n-max", "3",
                 "--out", str(tmp_path)]) == EXIT_OK
    obj = read(tmp_path / "S.json")
    assert (obj["rows"], obj["cols"]) == (6, 14)


def test_lemma25_campaign(tmp_path):
    code = main(["verify", "lemma25", "--s", "2", "--t", "1.5", "--trials", "40", "--seed", "7",
                 "--out", str(tmp_path)])
    assert code == EXIT_OK
    lines = (tmp_path / "lemma25.csv").read_text().splitlines()
    assert lines[0] == "seed,m,n,s,t,rho,lhs,rhs,pass"
    assert len(lines) == 41 and all(l.endswith("true") for l in lines[1:])
    man = read(tmp_path / "manifest.json")
    assert man["exit"] == 0 and man["results"][0]["passed"] == 40


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# fss run\np = 1.5\nq = 3\nn = 2\nm = 6\ntrials = 5\n")
    assert main(["fss", "--config", str(cfg), "--q", "4", "--out", str(tmp_path)]) == EXIT_OK
    man = read(tmp_path / "manifest.json")
    assert man["config"]["params"]["q"] == 4 and man["config"]["params"]["n"] == 2


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("p = 1.5\nbogus = 1\n")
    assert main(["fss", "--config", str(cfg), "--q", "3", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("LPIDEALS_OUT", str(tmp_path / "env"))
    assert main(["khintchine", "--n", "2", "--p", "1.5"]) == EXIT_OK
    assert (tmp_path / "env" / "khintchine.json").exists()


def test_exit_codes(tmp_path):
    assert main(["certify", "--p", "2.5", "--q", "3", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["construct", "--name", "hadamard", "--n", "20", "--out", str(tmp_path)]) == EXIT_CAPACITY
    with pytest.raises(SystemExit) as exc:
        main(["verify", "nothing"])
    assert exc.value.code == 2


def test_failed_verification_exits_4(tmp_path, monkeypatch):
    import lpideals.cli_lab as cli
    from lpideals.bounds import BoundReport

    def fake_campaign(trials, seed, **kw):
        bad = BoundReport.check(2.0, 1.0)
        return [{"seed": 1, "m": 1, "n": 1, "s": 2.0, "t": 1.5, "rho": 0.5, "kind": "x",
                 "lemma25": bad, "cor26": bad}]

    monkeypatch.setattr(cli, "campaign", fake_campaign)
    assert main(["verify", "cor26", "--trials", "1", "--out", str(tmp_path)]) == 4
    assert (tmp_path / "cor26.csv").exists() and read(tmp_path / "manifest.json")["exit"] == 4


def test_emit_plot_data(tmp_path):
    rows = [DecayRow(n, 0, 0.5, 1.0, 1.0) for n in (1, 2, 4)]
    assert emit_plot_data(DecayTable("phi", 1.5, 3, rows), tmp_path / "a.csv") == pytest.approx(0.0)
    assert emit_plot_data(DecayTable("phi", 1.5, 3, rows[:1]), tmp_path / "b.csv") is None
    with pytest.raises(ValueError):
        emit_plot_data(DecayTable("phi", 1.5, 3, []), tmp_path / "c.csv")


def test_functionals_phi(tmp_path):
    assert main(["functionals", "phi", "--p", "1.5", "--q", "3", "--n-max", "3", "--samples", "4",
                 "--out", str(tmp_path)]) == EXIT_OK
    header = (tmp_path / "decay_phi.csv").read_text().splitlines()[0]
    assert header == "n,sample_id,measured,bound,C,pass"
