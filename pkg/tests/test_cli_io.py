import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from deltanls import csvio
from deltanls.cli import load_trajectory, main
from deltanls.config import RunConfig, normalize, parse_config, parse_p_list, parse_range, serialize
from deltanls.errors import UsageError


@given(
    st.floats(min_value=-5.0, max_value=-0.1),
    st.floats(min_value=0.5, max_value=8.0),
    st.sampled_from([-1, 1]),
    st.floats(min_value=1e-4, max_value=0.1),
    st.booleans(),
)
def test_config_round_trip(q, p, sigma, dt, extrapolate):
    cfg = parse_config({"q": q, "p": p, "sigma": sigma, "dt": dt, "extrapolate": extrapolate})
    again = parse_config(json.loads(serialize(cfg)))
    assert again == cfg
    assert serialize(again) == serialize(cfg)


def test_unknown_key_rejected():
    with pytest.raises(UsageError, match="unknown"):
        parse_config({"omgea": 1.0})


def test_validation():
    with pytest.raises(UsageError):
        parse_config({"q": 0.5})
    with pytest.raises(UsageError):
        parse_config({"sigma": 0})
    with pytest.raises(UsageError):
        parse_config({"dt": "fast"})


def test_config_file_then_overrides(tmp_path):
    f = tmp_path / "run.json"
    f.write_text(json.dumps({"p": 4.0, "omega": 2.0}))
    cfg = parse_config({"omega": 3.0}, f)
    assert (cfg.p, cfg.omega) == (4.0, 3.0)
    assert normalize({"p": 4, "omega": 3}) == serialize(cfg)


def test_ranges():
    assert parse_range("1.2:1.8") == (1.2, 1.8)
    assert parse_range("0:10:5", with_count=True) == (0.0, 10.0, 5)
    for bad in ("2:1", "a:b", "1"):
        with pytest.raises(UsageError):
            parse_range(bad)
    assert parse_p_list("4.2:6.2:0.2") == [round(4.2 + 0.2 * k, 10) for k in range(11)]
    assert parse_p_list("4,5.5") == [4.0, 5.5]
    with pytest.raises(UsageError):
        parse_p_list("4:5")


def test_fmt():
    assert csvio.fmt(1 / 3) == "0.333333333"
    assert csvio.fmt(-0.0) == "0"
    assert csvio.fmt(float("nan")) == "nan"
    assert csvio.fmt(-np.inf) == "-inf"
    assert csvio.fmt(np.int64(7)) == "7"
    assert csvio.fmt(True) == "1"
    assert csvio.fmt(1.23456789012e-7) == "1.23456789e-07"


@given(st.lists(st.floats(allow_nan=True, allow_infinity=True), min_size=1, max_size=20))
def test_render_deterministic(vals):
    a = csvio.render(["v"], [[v] for v in vals])
    b = csvio.render(["v"], [[v] for v in list(vals)])
    assert a == b and "\r" not in a
    assert a.count("\n") == len(vals) + 1


def test_usage_errors_exit_2(capsys):
    assert main(["soliton", "--q", "0.5"]) == 2
    assert main(["spectrum", "--window=1,2"]) == 2
    assert main(["resonance-scan"]) == 2
    assert "usage error" in capsys.readouterr().err


def test_soliton_command(capsys):
    assert main(["soliton", "--p", "5", "--omega", "1", "--x", "0"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("Q(0) = ")
    assert float(out.splitlines()[0].split("=")[1]) > 0


def test_omega_crit_csv_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["omega-crit", "--p", "5", "--out", str(a)]) == 0
    assert main(["omega-crit", "--p", "5", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    header, rows = csvio.read_csv(a)
    assert header == ["p", "q", "Omega"]
    assert 5.6 < float(rows[0][2]) < 6.0


def test_jost_command(tmp_path):
    out = tmp_path / "jost.csv"
    assert main(["jost", "--all-xi", "0.5:2:3", "--out", str(out)]) == 0
    header, rows = csvio.read_csv(out)
    assert len(rows) == 3
    w12 = [float(r[header.index("w12_err")]) for r in rows]
    assert max(w12) < 1e-6


def test_spectrum_window(tmp_path):
    out = tmp_path / "spec.csv"
    assert main(["spectrum", "--h", "0.1", "--X", "10", "--window=-0.5,0.5,-2,2", "--out", str(out)]) == 0
    _, rows = csvio.read_csv(out)
    lam = np.array([[float(a), float(b)] for a, b in rows])
    assert np.all(np.abs(lam[:, 0]) <= 0.5) and np.all(np.abs(lam[:, 1]) <= 2)


def test_evolve_then_modulate(tmp_path):
    traj = tmp_path / "traj.csv"
    args = ["evolve", "--X", "10", "--h", "0.1", "--tmax", "0.5", "--eta", "0.005", "--out", str(traj)]
    assert main(args) == 0
    assert (tmp_path / "traj_summary.csv").exists()
    tr, run = load_trajectory(traj)
    assert tr.states.shape[1] == tr.grid.n and run.eta == 0.005
    mod = tmp_path / "mod.csv"
    # the run is too short for a decay fit, so the verdict is n/a and the exit code 0
    assert main(["modulate", "--traj", str(traj), "--out", str(mod)]) == 0
    header, rows = csvio.read_csv(mod)
    assert header[:3] == ["t", "theta", "omega"]
    assert len(rows) == len(tr.times)
    assert max(abs(float(r[2]) - 1.0) for r in rows) < 1e-3


def test_modulate_without_sidecar(tmp_path):
    f = tmp_path / "x.csv"
    f.write_text("t,x,re_u,im_u\n")
    assert main(["modulate", "--traj", str(f)]) == 2


def test_default_config_is_valid():
    assert RunConfig().validate() == RunConfig()
