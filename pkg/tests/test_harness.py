import csv
import dataclasses
import io
import json
import math
import warnings
from pathlib import Path

import numpy as np
import pytest

from sipservo import cli, harness
from sipservo import phantom as ph

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = sorted((ROOT / "scenarios").glob("*.json"))


@pytest.fixture(scope="module")
def short_log():
    s = harness.Scenario(duration=0.5, seed=3)
    return harness.run_trial(s)


# ---- scenario config ---------------------------------------------------------

@pytest.mark.parametrize("path", SCENARIOS, ids=lambda p: p.stem)
def test_shipped_scenarios_load(path):
    s = harness.Scenario.load(path)
    assert s.duration > 0 and s.perception_every >= 1


def test_scenario_dict_round_trip():
    s = harness.Scenario(offset=0.01, respiration=True, noise_px=2)
    back = harness.Scenario.from_dict(s.to_dict())
    assert back == s
    assert json.loads(json.dumps(s.to_dict())) == s.to_dict()


@pytest.mark.parametrize("bad", [
    {"offsett": 0.01},
    {"phantom": {"rib_spacin": 0.035}},
    {"gains": {"ibvs": {"lambda": 1.0}}},
    {"gains": {"visual": {}}},
    {"controllers": {"ibvs": True, "extra": 1}},
])
def test_unknown_keys_rejected(bad):
    with pytest.raises(harness.ScenarioError):
        harness.Scenario.from_dict(bad)


@pytest.mark.parametrize("kw", [
    {"offset": 0.02},
    {"perception_rate": 2000},
    {"control_rate": 0},
    {"rig": "hexapod"},
    {"segmenter": "unet"},
    {"duration": 0},
])
def test_invalid_scenarios(kw):
    with pytest.raises(harness.ScenarioError):
        harness.Scenario(**kw)


def test_half_rib_needs_non_quantitative():
    s = harness.Scenario(offset=0.0225, quantitative=False)
    assert s.offset == 0.0225


def test_timing_derivation():
    s = harness.Scenario()
    assert s.dt == 0.001 and s.steps == 5000 and s.perception_every == 33


# ---- trial log ---------------------------------------------------------------

def test_record_count_and_monotone_time(short_log):
    t = short_log.col("t")
    assert len(short_log) == 501
    assert np.all(np.diff(t) > 0)
    assert t[0] == 0.0 and t[-1] == pytest.approx(0.5)


def test_ibvs_changes_only_at_perception_steps(short_log):
    every = short_log.scenario.perception_every
    for name in ("ibvs_vx", "ibvs_vz", "ibvs_wy"):
        x = short_log.col(name)
        changed = np.nonzero(np.diff(x) != 0)[0] + 1
        assert np.all(changed % every == 0), name


def test_force_contribution_changes_between_updates(short_log):
    v = short_log.col("force_vz")[1:33]
    assert len(np.unique(v)) > 1


def test_fused_slots(short_log):
    assert np.all(short_log.col("v_y") == 0) and np.all(short_log.col("w_z") == 0)
    assert np.allclose(short_log.col("v_z"),
                       short_log.col("ibvs_vz") + short_log.col("force_vz"))


def test_quaternions_are_unit(short_log):
    q = np.stack([short_log.col(c) for c in ("qw", "qx", "qy", "qz")], axis=1)
    assert np.allclose(np.linalg.norm(q, axis=1), 1.0)


def test_nssd_normalised_post_hoc(short_log):
    n = short_log.col("nssd")
    assert n.min() >= 0.0 and n.max() <= 1.0
    assert n.min() == pytest.approx(0.0, abs=1e-12)


def test_zero_offset_converges_immediately():
    lg = harness.run_trial(harness.Scenario(offset=0.0, duration=0.5, segmenter="oracle"))
    assert lg.col("converged")[0] == 1
    assert lg.convergence_time == 0.0
    assert lg.final_error[0] < 0.1


def test_default_trial_converges_and_improves():
    lg = harness.run_trial(harness.Scenario())
    mm, deg = lg.final_error
    assert mm <= 1.5 and deg <= 1.5
    assert lg.converged
    imp = lg.similarity_improvement()
    assert imp["ncc"] > 30 and imp["nssd"] > 0
    assert lg.force_rms_error() <= 0.6


def test_half_rib_goes_to_neighbouring_sip():
    s = harness.Scenario(offset=0.035 / 2 + 0.005, quantitative=False, segmenter="oracle")
    lg = harness.run_trial(s)
    assert lg.converged
    assert lg.final_error[0] == pytest.approx(35.0, abs=2.0)
    assert lg.col("pl_px_dist")[-1] < 2.0


def test_arm_rig_matches_direct():
    s = harness.Scenario(rig="arm", duration=1.0, segmenter="oracle")
    arm = harness.run_trial(s)
    direct = harness.run_trial(dataclasses.replace(s, rig="direct"))
    assert arm.final_error[0] == pytest.approx(direct.final_error[0], abs=0.5)


def test_tilted_start_is_corrected():
    lg = harness.run_trial(harness.Scenario(initial_tilt=(0.1, -0.05, 0.0), offset=0.01))
    assert lg.col("err_deg")[0] > 5
    assert lg.final_error[1] < 0.5


def test_contact_loss_aborts():
    s = harness.Scenario(duration=4.0, respiration=True,
                         phantom=ph.PhantomModel(respiration_amplitude=0.05),
                         controllers=harness.Controllers(False, False, False))
    lg = harness.run_trial(s)
    assert lg.status == "aborted_contact" and not lg.converged
    lg0 = harness.run_trial(harness.Scenario(offset_axis="z", offset=0.02, duration=0.1))
    assert lg0.status == "aborted_contact" and len(lg0) == 0
    assert math.isnan(lg0.final_error[0])


def test_sensor_fault_aborts_after_half_second():
    s = harness.Scenario(initial_tilt=(0.8, 0, 0), offset=0.0, duration=1.0)
    lg = harness.run_trial(s)
    assert lg.status == "aborted_sensor"
    assert lg.col("t")[-1] == pytest.approx(0.499)


def test_live_mode_runs():
    lg = harness.run_trial(harness.Scenario(live=True, duration=1.0))
    assert lg.status == "completed" and len(lg) == 1001


def test_latest_slot_last_writer_wins():
    slot = harness.LatestSlot()
    assert slot.get() == (0, None)
    slot.put("a")
    slot.put("b")
    assert slot.get() == (2, "b")


# ---- sweep and outputs -------------------------------------------------------

def test_sweep_single_repeat_has_zero_std():
    report, logs = harness.run_sweep(harness.Scenario(duration=0.3), repeats=1)
    assert report.final_error_mm[1] == 0.0 and report.final_error_deg[1] == 0.0
    assert len(logs) == 1


def test_sweep_excludes_aborted_trials():
    s = harness.Scenario(offset_axis="z", offset=0.02, duration=0.1)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        report, _ = harness.run_sweep(s, repeats=2)
    assert report.n_aborted == 2 and not report.converged
    assert any("aborted" in str(x.message) for x in w)
    json.dumps(report.to_dict(), allow_nan=False)


def test_emit_outputs(short_log, tmp_path):
    paths = harness.emit_outputs(short_log, tmp_path)
    text = (tmp_path / "trial.csv").read_text()
    rows = list(csv.reader(io.StringIO(text)))
    assert tuple(rows[0]) == harness.CSV_COLUMNS
    assert len(rows) - 1 == len(short_log)
    for row in rows[1:]:
        for name, field in zip(rows[0], row):
            if field == "":
                assert name in ("pl_px_dist", "rs_px_dist", "ncc", "nssd", "mi")
                continue
            assert math.isfinite(float(field))
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["trials"][0]["records"] == len(short_log)
    assert paths[0].name == "trial.csv"


def test_emit_outputs_frames(tmp_path):
    lg = harness.run_trial(harness.Scenario(duration=0.1), dump_frames=True)
    harness.emit_outputs(lg, tmp_path)
    frames = sorted(tmp_path.glob("frame_*.pgm"))
    assert [f.name for f in frames] == ["frame_0.pgm", "frame_33.pgm", "frame_66.pgm",
                                        "frame_99.pgm"]
    assert ph.read_pgm(frames[0]).shape == (256, 256)


def test_emit_outputs_io_error(short_log, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        harness.emit_outputs(short_log, blocker / "out")


def test_csv_deterministic(short_log):
    again = harness.run_trial(harness.Scenario(duration=0.5, seed=3))
    assert harness.trial_csv(again) == harness.trial_csv(short_log)
    other = harness.run_trial(harness.Scenario(duration=0.5, seed=4))
    assert harness.trial_csv(other) != harness.trial_csv(short_log)


# ---- CLI ---------------------------------------------------------------------

def write_scenario(tmp_path, **kw):
    path = tmp_path / "s.json"
    path.write_text(json.dumps(kw))
    return path


def test_cli_converged_exit_zero(tmp_path):
    path = write_scenario(tmp_path, offset=0.0, duration=0.2)
    assert cli.main(["run", "--scenario", str(path), "--seed", "1",
                     "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "trial.csv").exists()
    assert (tmp_path / "o" / "summary.json").exists()


def test_cli_not_converged_exit_one(tmp_path):
    path = write_scenario(tmp_path, duration=0.2)
    assert cli.main(["run", "--scenario", str(path), "--out", str(tmp_path / "o")]) == 1


def test_cli_abort_exit_two(tmp_path):
    path = write_scenario(tmp_path, offset_axis="z", offset=0.02, duration=0.1)
    with pytest.warns(UserWarning, match="aborted"):
        assert cli.main(["run", "--scenario", str(path), "--out", str(tmp_path / "o")]) == 2


def test_cli_bad_scenario_exit_two(tmp_path, capsys):
    path = write_scenario(tmp_path, bogus=1)
    assert cli.main(["run", "--scenario", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "bogus" in capsys.readouterr().err


def test_cli_repeats_and_frames(tmp_path):
    path = write_scenario(tmp_path, offset=0.0, duration=0.05)
    out = tmp_path / "o"
    assert cli.main(["run", "--scenario", str(path), "--out", str(out), "--repeats", "2",
                     "--rig", "arm", "--dump-frames"]) == 0
    assert (out / "repeat_0" / "trial.csv").exists() and (out / "repeat_1" / "trial.csv").exists()
    assert (out / "repeat_0" / "frame_0.pgm").exists()
    summary = json.loads((out / "summary.json").read_text())
    assert len(summary["trials"]) == 2


def test_cli_template(tmp_path):
    out = tmp_path / "t.json"
    assert cli.main(["template", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert len(data["classes"]["PL"]) == 1 and len(data["classes"]["RS"]) == 2
