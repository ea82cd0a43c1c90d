import math
import os

import pytest

import fbsim.cli
from fbsim.cli import main
from fbsim.hamiltonians import Drive
from fbsim.protocols import PulseSchedule, PulseSegment, save_schedule


def _sim(tmp_path, *extra):
    out = str(tmp_path / "out")
    argv = ["simulate", "--preset", "w-standard", "--n", "3",
            "--alpha-max", "100.0", "--out", out, *extra]
    return main(argv), out


def test_version_flag(capsys):
    code = main(["--version"])
    assert code == 0
    text = capsys.readouterr().out
    assert text.startswith("fbsim ")
    assert "numpy" in text and "scipy" in text


def test_simulate_preset_writes_outputs(tmp_path, capsys):
    code, out = _sim(tmp_path)
    assert code == 0
    report = capsys.readouterr().out
    assert "fidelity: 1.000000 to |W_3>" in report
    assert "timing t_W: gt 1.570796e-02" in report
    for name in ("trace.csv", "trace.svg", "final_state.txt", "report.txt"):
        assert os.path.exists(os.path.join(out, name))
    assert not any(p.endswith(".partial") for p in os.listdir(out))
    with open(os.path.join(out, "report.txt")) as fh:
        assert fh.read() == report


def test_simulate_csv_only_format(tmp_path):
    code, out = _sim(tmp_path, "--format", "csv")
    assert code == 0
    assert os.path.exists(os.path.join(out, "trace.csv"))
    assert not os.path.exists(os.path.join(out, "trace.svg"))


def test_simulate_bad_format(tmp_path, capsys):
    code, _ = _sim(tmp_path, "--format", "pdf")
    assert code == 1
    assert "unknown format" in capsys.readouterr().err


def test_simulate_unknown_preset_usage_error(tmp_path, capsys):
    code = main(["simulate", "--preset", "w-giant", "--out", str(tmp_path)])
    assert code == 1


def test_simulate_without_protocol(tmp_path, capsys):
    code = main(["simulate", "--out", str(tmp_path / "out")])
    assert code == 1
    assert "nothing to run" in capsys.readouterr().err


def test_simulate_lossy_writes_populations(tmp_path, capsys):
    code, out = _sim(tmp_path, "--n", "2", "--alpha-max", "2.0",
                     "--gamma-over-g", "0.5")
    assert code == 0
    report = capsys.readouterr().out
    assert "gamma_over_g: 0.5" in report
    pops = os.path.join(out, "final_populations.txt")
    assert os.path.exists(pops)
    assert not os.path.exists(os.path.join(out, "final_state.txt"))
    with open(pops) as fh:
        lines = fh.read().splitlines()
    assert lines[0].startswith("# fock-populations")
    # vacuum population is the lost weight; all rows parse as occupation TAB value
    total = 0.0
    for line in lines[1:]:
        occ_text, value = line.split("\t")
        assert len(occ_text.split(",")) == 3
        total += float(value)
    assert total == pytest.approx(1.0, abs=1e-6)


def test_simulate_config_file_and_flag_override(tmp_path, capsys):
    config = tmp_path / "run.toml"
    out = tmp_path / "out"
    config.write_text(
        "seed = 7\n"
        "[system]\n"
        "n_pairs = 3\n"
        "g_rad_per_s = 94247.7796076938\n"
        "omega_phonon_rad_per_s = 3.7699111843077517e10\n"
        "[protocol]\n"
        "preset = \"w-standard\"\n"
        "n = 3\n"
        "alpha_max = 50.0\n"
        f"[output]\ndir = \"{out}\"\nformats = [\"csv\"]\n"
    )
    code = main(["simulate", "--config", str(config), "--n", "4"])
    assert code == 0
    report = capsys.readouterr().out
    assert "fidelity: 1.000000 to |W_4>" in report  # flag overrode config n
    assert "seed: 7" in report
    assert "source: preset w-standard" in report
    assert os.path.exists(out / "trace.csv")
    assert not os.path.exists(out / "trace.svg")


def test_simulate_config_formats_spellings(tmp_path, capsys):
    out = tmp_path / "out"
    body = ("[protocol]\npreset = \"w-standard\"\nn = 3\nalpha_max = 50.0\n"
            f"[output]\ndir = \"{out}\"\n")

    string_form = tmp_path / "string.toml"
    string_form.write_text(body + "formats = \"csv\"\n")
    assert main(["simulate", "--config", str(string_form)]) == 0
    capsys.readouterr()
    assert os.path.exists(out / "trace.csv")
    assert not os.path.exists(out / "trace.svg")

    pair_form = tmp_path / "pair.toml"
    pair_form.write_text(body + "formats = \"svg,csv\"\n")
    assert main(["simulate", "--config", str(pair_form)]) == 0
    capsys.readouterr()
    assert os.path.exists(out / "trace.svg")

    bad_type = tmp_path / "bad.toml"
    bad_type.write_text(body + "formats = 3\n")
    assert main(["simulate", "--config", str(bad_type)]) == 1
    assert "formats must be a string" in capsys.readouterr().err

    bad_entry = tmp_path / "entry.toml"
    bad_entry.write_text(body + "formats = [\"csv\", 3]\n")
    assert main(["simulate", "--config", str(bad_entry)]) == 1
    assert "formats must be a string" in capsys.readouterr().err


def test_simulate_config_validation(tmp_path, capsys):
    both = tmp_path / "both.toml"
    both.write_text("[protocol]\npreset = \"herald\"\nschedule = \"s.toml\"\n")
    assert main(["simulate", "--config", str(both)]) == 1
    assert "mutually exclusive" in capsys.readouterr().err

    unknown = tmp_path / "unknown.toml"
    unknown.write_text("[protocol]\npreset = \"herald\"\n[extra]\nx = 1\n")
    assert main(["simulate", "--config", str(unknown)]) == 1
    assert "unknown table(s): extra" in capsys.readouterr().err

    bad_preset = tmp_path / "preset.toml"
    bad_preset.write_text("[protocol]\npreset = \"w-giant\"\n")
    assert main(["simulate", "--config", str(bad_preset)]) == 1
    assert "unknown preset" in capsys.readouterr().err

    broken = tmp_path / "broken.toml"
    broken.write_text("[protocol\npreset = \"herald\"\n")
    assert main(["simulate", "--config", str(broken)]) == 1

    missing = tmp_path / "missing.toml"
    assert main(["simulate", "--config", str(missing)]) == 1

    bad_param = tmp_path / "param.toml"
    bad_param.write_text("[protocol]\npreset = \"herald\"\nflavor = 2\n")
    assert main(["simulate", "--config", str(bad_param),
                 "--out", str(tmp_path / "out")]) == 1
    assert "unknown parameter" in capsys.readouterr().err

    custom_loss = tmp_path / "loss.toml"
    custom_loss.write_text("[protocol]\npreset = \"w-standard\"\n"
                           "[loss]\ngamma_over_g = 0.1\ndt = 0.001\n")
    assert main(["simulate", "--config", str(custom_loss),
                 "--out", str(tmp_path / "out")]) == 1
    assert "gamma_over_g" in capsys.readouterr().err


def test_simulate_preset_flag_drops_config_schedule(tmp_path, capsys):
    config = tmp_path / "run.toml"
    config.write_text("[protocol]\nschedule = \"does-not-exist.toml\"\n")
    code = main(["simulate", "--config", str(config), "--preset", "herald",
                 "--out", str(tmp_path / "out")])
    assert code == 0
    assert "success probability: 0.077661" in capsys.readouterr().out


def test_simulate_schedule_file(tmp_path, capsys):
    sched = PulseSchedule(
        segments=(PulseSegment(Drive.from_polar([1.0, 1.0]), 0.9),),
        initial_occupation=(0, 0, 1),
    )
    sched_path = tmp_path / "sched.toml"
    save_schedule(sched, sched_path)
    config = tmp_path / "run.toml"
    out = tmp_path / "out"
    config.write_text(f"[protocol]\nschedule = \"{sched_path}\"\n"
                      f"[output]\ndir = \"{out}\"\n")
    code = main(["simulate", "--config", str(config)])
    assert code == 0
    report = capsys.readouterr().out
    assert f"source: schedule {sched_path}" in report
    assert "timing total: gt 9.000000e-01" in report
    assert os.path.exists(out / "final_state.txt")
    assert os.path.exists(out / "trace.csv")


def test_simulate_truncation_budget_is_numerical_failure(tmp_path, capsys):
    config = tmp_path / "run.toml"
    config.write_text("[protocol]\npreset = \"herald\"\nr = 2.0\n")
    code = main(["simulate", "--config", str(config),
                 "--out", str(tmp_path / "out")])
    assert code == 2
    assert "raise the cutoff" in capsys.readouterr().err


def test_simulate_deterministic_csv_bytes(tmp_path):
    _, out_a = _sim(tmp_path / "a", "--seed", "42", "--format", "csv")
    _, out_b = _sim(tmp_path / "b", "--seed", "42", "--format", "csv")
    with open(os.path.join(out_a, "trace.csv"), "rb") as fh:
        bytes_a = fh.read()
    with open(os.path.join(out_b, "trace.csv"), "rb") as fh:
        bytes_b = fh.read()
    assert bytes_a == bytes_b


def test_simulate_interrupt_exit_code(tmp_path, monkeypatch, capsys):
    def boom(name, params):
        raise KeyboardInterrupt

    monkeypatch.setattr(fbsim.cli, "run_preset", boom)
    code, _ = _sim(tmp_path)
    assert code == 130
    assert ".partial" in capsys.readouterr().err


def test_oracle_check_passes(capsys):
    code = main(["oracle-check", "--seed", "5", "--trials", "3"])
    assert code == 0
    text = capsys.readouterr().out
    assert "ok" in text
    assert "max |factored - exact|" in text


def test_oracle_check_detects_corruption(capsys):
    code = main(["oracle-check", "--seed", "5", "--trials", "3",
                 "--self-corrupt", "1e-3"])
    assert code == 3
    captured = capsys.readouterr()
    assert "BREACH" in captured.err


def test_oracle_check_trials_validation(capsys):
    assert main(["oracle-check", "--trials", "0"]) == 1


def test_figures_writes_all(tmp_path, capsys):
    out = str(tmp_path / "figs")
    code = main(["figures", "--out", out, "--format", "csv", "--samples", "17"])
    assert code == 0
    for name in ("fig4a", "fig4b", "fig6a", "fig6b"):
        assert os.path.exists(os.path.join(out, f"{name}.csv"))
        assert not os.path.exists(os.path.join(out, f"{name}.svg"))
    text = capsys.readouterr().out
    assert "fig4a: w-standard" in text
    assert main(["figures", "--out", out, "--samples", "1"]) == 1
