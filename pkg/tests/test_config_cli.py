import csv
import json
from importlib import resources

import pytest
from hypothesis import given, settings, strategies as st

from photon_decision import cli, config as cfgio
from photon_decision.experiment import ConfigError, ExperimentConfig, swap_delay_line
from photon_decision.models import ModelKind
from photon_decision.source import DetectorSpec, SourceSpec
from photon_decision.spacetime import FiberPath


def test_presets_match_reference():
    for name in cfgio.PRESETS:
        text = resources.files("photon_decision").joinpath(f"presets/{name}.toml").read_text()
        assert text == cfgio.dumps(cfgio.reference_config(name))
    assert cfgio.preset("timelike") == swap_delay_line(cfgio.preset("spacelike"))


def test_reference_defaults():
    c = cfgio.preset("spacelike")
    assert c.detector_distance_AB == 10.0
    assert c.fiber_BS_to_A.signal_speed == 2e8
    assert all(d.jitter == 1e-9 for d in c.detectors)
    assert c.transmittance == 0.5
    assert c.coincidence_window == 2e-9


@settings(max_examples=60, deadline=None)
@given(mu=st.floats(0, 2), eff=st.floats(0, 1), dark=st.floats(0, 0.5),
       dist=st.floats(0, 1e3), seed=st.integers(0, 2**64 - 1),
       model=st.sampled_from(list(ModelKind)), n=st.integers(1, 10**9),
       la=st.floats(10, 50), single=st.booleans())
def test_roundtrip(mu, eff, dark, dist, seed, model, n, la, single):
    c = ExperimentConfig(
        source=SourceSpec(mu, 1e6, single), detector_A=DetectorSpec("A", eff, dark, 1e-9),
        fiber_BS_to_A=FiberPath(la), fiber_BS_to_B=FiberPath(la), detector_distance_AB=dist,
        master_seed=seed, model=model, n_pulses=n)
    assert cfgio.loads(cfgio.dumps(c)) == c


def test_partial_file_uses_defaults():
    c = cfgio.loads('[run]\nmodel = "empty_wave"\nn_pulses = 10\n[detectors.B]\nefficiency = 0.5\n')
    assert c.model is ModelKind.EMPTY_WAVE and c.n_pulses == 10
    assert c.detector_B.efficiency == 0.5 and c.detector_A.efficiency == 1.0


@pytest.mark.parametrize("text", [
    "[nope]\nx = 1\n",
    "[run]\nbogus = 1\n",
    "[run]\nn_pulses = 1.5\n",
    "[run]\nn_pulses = 0\n",
    '[run]\nmodel = "copenhagen"\n',
    "[detectors.A]\nefficiency = 2.0\n",
    "[source\n",
])
def test_invalid_files(text):
    with pytest.raises(ConfigError):
        cfgio.loads(text)


def test_overrides():
    c = cfgio.apply_overrides(cfgio.preset("spacelike"),
                              ["source.single_pair=true", "run.model=local_collapse",
                               "detectors.A.efficiency=0.25"])
    assert c.source.single_pair and c.model is ModelKind.LOCAL_COLLAPSE
    assert c.detector_A.efficiency == 0.25
    with pytest.raises(ConfigError):
        cfgio.apply_overrides(c, ["nokey"])


# --- CLI ------------------------------------------------------------------------


def _run(tmp_path, *args):
    return cli.main(["run", "--no-plots", "--out", str(tmp_path), *args])


def test_cmd_run_outputs(tmp_path, capsys):
    assert cli.main(["run", "--config", "spacelike", "--model", "local_collapse",
                     "--pulses", "20000", "--out", str(tmp_path), "--log-trials"]) == 0
    for name in ("counts.json", "estimates.json", "report.txt", "audit.json", "trials.csv",
                 "config.toml", "joint.png"):
        assert (tmp_path / name).is_file(), name
    est = json.loads((tmp_path / "estimates.json").read_text())
    assert est["model"] == "local_collapse" and est["separation"] == "spacelike"
    assert "P11" in capsys.readouterr().out
    assert cfgio.load(tmp_path / "config.toml").n_pulses == 20000


def test_cmd_run_config_file(tmp_path):
    path = tmp_path / "spacelike.toml"
    assert cli.main(["init", "spacelike", str(path)]) == 0
    assert cli.main(["init", "spacelike", str(path)]) == 2
    assert _run(tmp_path / "out", "--config", str(path), "--pulses", "1000") == 0


def test_cmd_run_missing_config(tmp_path, capsys):
    assert _run(tmp_path, "--config", str(tmp_path / "missing.toml")) == 2
    assert "not found" in capsys.readouterr().err


def test_cmd_run_zero_pulses(tmp_path):
    assert _run(tmp_path, "--pulses", "0") == 2


def test_cmd_run_branch_cap_is_runtime_error(tmp_path):
    assert _run(tmp_path, "--model", "many_worlds", "--pulses", "5000",
                "--set", "source.mean_pairs_per_pulse=3.0", "--set", "run.branch_cap=4") == 3


def test_cmd_run_no_heralds(tmp_path):
    assert _run(tmp_path, "--pulses", "1", "--set", "source.mean_pairs_per_pulse=0.0") == 3
    counts = json.loads((tmp_path / "counts.json").read_text())
    assert counts["R_H"] == 0


def test_counts_byte_identical(tmp_path):
    args = ["--pulses", "300000", "--seed", "9", "--set", "source.mean_pairs_per_pulse=0.1"]
    assert _run(tmp_path / "a", *args) == 0
    assert _run(tmp_path / "b", *args, "--workers", "3") == 0
    assert (tmp_path / "a/counts.json").read_bytes() == (tmp_path / "b/counts.json").read_bytes()


def test_cmd_compare(tmp_path, capsys):
    base = ["--pulses", "2000000", "--set", "source.mean_pairs_per_pulse=0.01"]
    assert _run(tmp_path / "sl", "--config", "spacelike", "--seed", "1", *base) == 0
    assert _run(tmp_path / "tl", "--config", "timelike", "--seed", "2", *base) == 0
    out = tmp_path / "cmp"
    assert cli.main(["compare", str(tmp_path / "sl"), str(tmp_path / "tl"), "--out", str(out)]) == 0
    rep = json.loads((out / "comparison.json").read_text())
    assert max(rep["z"].values()) < 3

    assert cli.main(["compare", str(tmp_path / "sl"), str(tmp_path / "sl"),
                     "--out", str(out)]) == 0
    rep = json.loads((out / "comparison.json").read_text())
    assert all(z == 0 for z in rep["z"].values())


def test_cmd_compare_bad_inputs(tmp_path):
    (tmp_path / "bad").mkdir()
    (tmp_path / "bad/estimates.json").write_text('{"P_A": 0.5}')
    assert cli.main(["compare", str(tmp_path / "bad"), str(tmp_path / "bad"),
                     "--out", str(tmp_path / "o")]) == 2
    (tmp_path / "bad/estimates.json").write_text("not json")
    assert cli.main(["compare", str(tmp_path / "bad"), str(tmp_path / "bad"),
                     "--out", str(tmp_path / "o")]) == 2
    assert cli.main(["compare", str(tmp_path / "none"), str(tmp_path / "bad"),
                     "--out", str(tmp_path / "o")]) == 2


def test_cmd_oracle(capsys):
    assert cli.main(["oracle", "--mu", "0"]) == 0
    assert "= 0.000000000000e+00" in capsys.readouterr().out
    assert cli.main(["oracle", "--mu", "0.01"]) == 0
    out = capsys.readouterr().out
    assert "2.4999947" in out
    assert cli.main(["oracle", "--mu", "0.01", "--n-max", "1"]) == 2


def _sweep(tmp_path, *args):
    assert cli.main(["sweep", *args, "--out", str(tmp_path), "--no-plots"]) == 0
    with open(tmp_path / "sweep.csv") as fh:
        return list(csv.DictReader(fh))


def _flip(rows):
    for a, b in zip(rows, rows[1:]):
        if a["separation"] != b["separation"]:
            return float(a["value"]), float(b["value"]), float(a["threshold_distance"])


def test_sweep_distance_timelike(tmp_path):
    rows = _sweep(tmp_path, "distance", "--range", "0.1:50:500", "--config", "timelike",
                  "--no-simulate")
    lo, hi, thr = _flip(rows)
    assert lo <= 30.3 < hi and thr == pytest.approx(30.3, rel=1e-12)


def test_sweep_distance_spacelike(tmp_path):
    rows = _sweep(tmp_path, "distance", "--range", "0.01:1:100", "--config", "spacelike",
                  "--no-simulate")
    lo, hi, thr = _flip(rows)
    assert lo <= 0.3 < hi and thr == pytest.approx(0.3, rel=1e-12)


def test_sweep_with_simulation(tmp_path):
    rows = _sweep(tmp_path, "mu", "--range", "0.01,0.05,0.1", "--pulses", "400000")
    p11 = [float(r["P11"]) for r in rows]
    assert p11 == sorted(p11) and p11[0] > 0
    assert (tmp_path / "sweep.csv").is_file()


def test_sweep_plot(tmp_path):
    assert cli.main(["sweep", "delay", "--range", "0:40:5", "--pulses", "20000",
                     "--model", "local_collapse", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "sweep.png").stat().st_size > 0


@pytest.mark.parametrize("args", [
    ["sweep", "distance", "--range", "1:0:0"],
    ["sweep", "distance", "--range", ""],
    ["sweep", "distance", "--range", "5:1:3"],
    ["sweep", "colour", "--range", "1:2:3"],
])
def test_sweep_usage_errors(tmp_path, args):
    assert cli.main(args + ["--out", str(tmp_path), "--no-plots"]) == 2


def test_argparse_usage_exit():
    with pytest.raises(SystemExit) as exc:
        cli.main(["run", "--model", "copenhagen"])
    assert exc.value.code == 2
