import math
import os

import numpy as np
import pytest

import fbsim.analysis
from fbsim.analysis import (
    SweepSpec,
    Trace,
    emit,
    fidelity,
    fidelity_sweep,
    probability_trace,
    read_trace_csv,
    single_photon_patterns,
)
from fbsim.dynamics import LindbladConfig, lindblad_evolve
from fbsim.errors import BasisMismatchError, ConfigError, OracleMismatchError
from fbsim.fock import DensityOp, Ket, build_basis, single_excitation_basis
from fbsim.hamiltonians import Drive, build_classical_pump_hamiltonian
from fbsim.protocols import (
    Measurement,
    ProtocolResult,
    PulseSchedule,
    PulseSegment,
    run_preset,
)


def _drive(*r, phi=None):
    return Drive.from_polar(list(r), phi)


def _phonon_schedule(drive, gt):
    occ = (0,) * drive.n_pairs + (1,)
    return PulseSchedule(segments=(PulseSegment(drive, gt),),
                         initial_occupation=occ)


def test_trace_validation():
    Trace(times=(0.0, 1.0), series={"P": (0.0, 1.0)})
    with pytest.raises(ValueError, match="samples"):
        Trace(times=(0.0, 1.0), series={"P": (0.0,)})
    with pytest.raises(ValueError, match="outside"):
        Trace(times=(0.0,), series={"P": (1.5,)})
    Trace(times=(0.0,), series={"P": (1.5,)}, metadata={"unbounded": True})


def test_fidelity_metric():
    basis = single_excitation_basis(2)
    a = Ket.from_occupation(basis, (1, 0, 0))
    b = Ket.from_occupation(basis, (0, 1, 0))
    both = Ket.from_components(basis, {(1, 0, 0): 1.0, (0, 1, 0): 1.0j}).normalized()
    assert fidelity(a, a) == pytest.approx(1.0)
    assert fidelity(b, a) == 0.0
    assert fidelity(both, a) == pytest.approx(0.5)
    assert fidelity(DensityOp.from_ket(both), a) == pytest.approx(0.5)
    with pytest.raises(BasisMismatchError):
        fidelity(a, Ket.vacuum(single_excitation_basis(3)))
    with pytest.raises(TypeError):
        fidelity(a.amplitudes, a)


def test_single_photon_patterns():
    patterns = single_photon_patterns(3)
    assert set(patterns) == {"P1", "P2", "P3", "P_ph"}
    assert patterns["P2"] == {0: 0, 1: 1, 2: 0, 3: 0}
    assert patterns["P_ph"] == {0: 0, 1: 0, 2: 0, 3: 1}


def test_trace_engines_agree():
    drive = _drive(1.1, 0.7, 0.9, phi=[0.3, -0.8, 1.9])
    sched = _phonon_schedule(drive, 1.7)
    patterns = single_photon_patterns(3)
    fast = probability_trace(sched, patterns, samples=60, engine="closed-form")
    slow = probability_trace(sched, patterns, samples=60, engine="exact")
    assert fast.times == slow.times
    for label in patterns:
        diff = np.abs(np.array(fast.series[label]) - np.array(slow.series[label]))
        assert diff.max() < 1e-8


def test_trace_engines_agree_photon_start():
    drive = _drive(0.8, 1.2, phi=[0.0, 2.2])
    sched = PulseSchedule(segments=(PulseSegment(drive, 2.0),),
                          initial_occupation=(0, 1, 0))
    patterns = single_photon_patterns(2)
    fast = probability_trace(sched, patterns, samples=40, engine="closed-form")
    slow = probability_trace(sched, patterns, samples=40, engine="exact")
    for label in patterns:
        diff = np.abs(np.array(fast.series[label]) - np.array(slow.series[label]))
        assert diff.max() < 1e-8


def test_trace_engines_agree_two_phonon_start():
    drive = _drive(0.9, 1.0)
    occ = (0, 0, 2)
    basis = build_basis(3, 2, total_cap=2)
    sched = PulseSchedule(segments=(PulseSegment(drive, 1.2),),
                          initial_occupation=occ)
    patterns = {"P_ph2": {0: 0, 1: 0, 2: 2}}
    fast = probability_trace(sched, patterns, samples=30, engine="closed-form",
                             basis=basis)
    slow = probability_trace(sched, patterns, samples=30, engine="exact",
                             basis=basis)
    diff = np.abs(np.array(fast.series["P_ph2"]) - np.array(slow.series["P_ph2"]))
    assert diff.max() < 1e-8


def test_trace_initial_sample_and_unit_sum():
    drive = _drive(1.0, 1.0, 1.0)
    sched = _phonon_schedule(drive, 2.5)
    trace = probability_trace(sched, single_photon_patterns(3), samples=101,
                              include_w_sum=True)
    assert trace.times[0] == 0.0
    assert trace.series["P_ph"][0] == pytest.approx(1.0)
    assert trace.series["W"][0] == pytest.approx(0.0)
    assert trace.metadata["dashed"] == ["W"]
    w = np.array(trace.series["W"])
    total = w + np.array(trace.series["P_ph"])
    assert np.abs(total - 1.0).max() < 1e-9
    parts = sum(np.array(trace.series[f"P{k}"]) for k in (1, 2, 3))
    assert np.abs(parts - w).max() < 1e-12


def test_trace_boundary_samples_precede_measurement():
    # theta advances pi/4 per segment; the boundary sample reports the
    # pre-measurement probabilities, conditioning applies after it
    gt = math.pi / 4.0
    sched = PulseSchedule(
        segments=(PulseSegment(_drive(1.0), gt), PulseSegment(_drive(1.0), gt)),
        initial_occupation=(0, 1),
        measurements=(Measurement(0, 0, 0),),
    )
    trace = probability_trace(sched, {"P_ph": {0: 0, 1: 1}, "P1": {0: 1, 1: 0}},
                              samples=3)
    assert trace.series["P_ph"] == pytest.approx((1.0, 0.5, 0.5))
    assert trace.series["P1"] == pytest.approx((0.0, 0.5, 0.5))


def test_trace_lossy_matches_direct_integration():
    drive = _drive(1.0, 0.8)
    sched = _phonon_schedule(drive, 1.5)
    loss = LindbladConfig(gamma_over_g=0.3, dt=0.01)
    trace = probability_trace(sched, single_photon_patterns(2), samples=7,
                              loss=loss)
    basis = single_excitation_basis(2)
    h = build_classical_pump_hamiltonian(drive, basis)
    rho = lindblad_evolve(h, Ket.from_occupation(basis, (0, 0, 1)), loss, 1.5)
    want = rho.populations()[basis.index_of((0, 0, 1))]
    assert trace.series["P_ph"][-1] == pytest.approx(want, abs=1e-6)
    # loss drains the tracked populations below unity
    final_sum = trace.series["P_ph"][-1] + sum(
        trace.series[f"P{k}"][-1] for k in (1, 2))
    assert final_sum < 1.0


def test_trace_input_validation():
    drive = _drive(1.0)
    sched = _phonon_schedule(drive, 1.0)
    with pytest.raises(ConfigError, match="samples"):
        probability_trace(sched, {"P": {0: 1}}, samples=1)
    with pytest.raises(ConfigError, match="engine"):
        probability_trace(sched, {"P": {0: 1}}, samples=5, engine="magic")
    with pytest.raises(ConfigError, match="collides"):
        probability_trace(sched, {"W": {0: 1}}, samples=5, include_w_sum=True)
    two_seg = PulseSchedule(
        segments=(PulseSegment(drive, 1.0), PulseSegment(drive, 1.0)),
        initial_occupation=(0, 1))
    with pytest.raises(ConfigError, match="single"):
        probability_trace(two_seg, {"P": {0: 1}}, samples=5, engine="closed-form")
    vacuum_start = PulseSchedule(segments=(PulseSegment(drive, 1.0),),
                                 initial_occupation=(0, 0))
    with pytest.raises(ConfigError, match="phonon Fock start"):
        probability_trace(vacuum_start, {"P": {0: 1}}, samples=5,
                          engine="closed-form")


def test_fidelity_sweep_monotone_loss():
    spec = SweepSpec(parameter="gamma_over_g", values=(0.0, 2.0, 8.0),
                     protocol="w-standard", base={"n": 2, "alpha": 1.0})
    trace = fidelity_sweep(spec)
    assert trace.times == (0.0, 2.0, 8.0)
    assert trace.metadata["x_label"] == "gamma_over_g"
    vals = trace.series["fidelity"]
    assert vals[0] == pytest.approx(1.0, abs=1e-9)
    assert vals[0] >= vals[1] >= vals[2]
    # spot check against a direct run
    direct = run_preset("w-standard", {"n": 2, "alpha": 1.0, "gamma_over_g": 2.0})
    assert vals[1] == pytest.approx(direct.fidelity, abs=1e-12)


def test_fidelity_sweep_rejects_nonmonotone(monkeypatch):
    calls = {"count": 0}

    def fake_run_preset(name, params):
        calls["count"] += 1
        fid = 0.5 + 0.1 * float(params["gamma_over_g"])
        return ProtocolResult(
            final_state=None, target_state=None, fidelity=min(fid, 1.0),
            global_phase=None, timings={}, success_probability=None,
            schedule=None, details={})

    monkeypatch.setattr(fbsim.analysis, "run_preset", fake_run_preset)
    spec = SweepSpec(parameter="gamma_over_g", values=(0.0, 1.0),
                     protocol="w-standard", base={"n": 2, "alpha": 1.0})
    with pytest.raises(OracleMismatchError, match="rose"):
        fidelity_sweep(spec)
    assert calls["count"] == 2


def test_sweep_other_metric_and_validation():
    spec = SweepSpec(parameter="r", values=(0.2, 0.3), protocol="herald",
                     metric="success_probability")
    trace = fidelity_sweep(spec)
    want = [math.tanh(r) ** 2 / math.cosh(r) ** 2 for r in (0.2, 0.3)]
    assert trace.series["success_probability"] == pytest.approx(want)

    with pytest.raises(ConfigError, match="at least one value"):
        SweepSpec(parameter="x", values=(), protocol="herald")
    with pytest.raises(ConfigError, match="metric"):
        SweepSpec(parameter="x", values=(1.0,), protocol="herald",
                  metric="phase")
    with pytest.raises(ConfigError, match="reports no"):
        fidelity_sweep(SweepSpec(parameter="r", values=(1.0,),
                                 protocol="pi-pulse",
                                 metric="success_probability"))


def test_emit_csv_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(3)
    times = tuple(np.sort(rng.uniform(0, 5, size=20)).tolist())
    series = {
        "P1": tuple(rng.uniform(0, 1, size=20).tolist()),
        "P_ph": tuple(rng.uniform(0, 1, size=20).tolist()),
    }
    trace = Trace(times=times, series=series, metadata={"x_label": "gt"})
    path = tmp_path / "trace.csv"
    emit(trace, "csv", path)
    assert not os.path.exists(str(path) + ".partial")
    back = read_trace_csv(path)
    assert back.times == times
    assert back.series["P1"] == series["P1"]
    assert back.series["P_ph"] == series["P_ph"]
    header = path.read_text().splitlines()[0]
    assert header == "gt,P1,P_ph"


def test_emit_svg_structure(tmp_path):
    trace = Trace(
        times=(0.0, 0.5, 1.0),
        series={"P<1>": (0.0, 0.5, 1.0), "W": (0.0, 0.25, 0.5)},
        metadata={"x_label": "gt", "y_label": "probability",
                  "dashed": ["W"],
                  "markers": [{"x": 0.5, "label": "t_W"}]},
    )
    path = tmp_path / "trace.svg"
    emit(trace, "svg", path)
    text = path.read_text()
    assert text.startswith("<svg")
    assert text.count("<polyline") == 2
    assert 'stroke-dasharray="6 4"' in text  # dashed W series
    assert 'stroke-dasharray="2 4"' in text  # marker line
    assert ">gt</text>" in text
    assert ">probability</text>" in text
    assert "t_W" in text
    assert "P&lt;1&gt;" in text  # series label is escaped
    assert not os.path.exists(str(path) + ".partial")


def test_emit_errors(tmp_path):
    empty = Trace(times=(0.0,), series={})
    with pytest.raises(ValueError, match="no series"):
        emit(empty, "csv", tmp_path / "x.csv")
    trace = Trace(times=(0.0,), series={"P": (0.5,)})
    with pytest.raises(ConfigError, match="format"):
        emit(trace, "pdf", tmp_path / "x.pdf")


def test_read_trace_csv_errors(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(ValueError, match="empty"):
        read_trace_csv(empty)
    one_col = tmp_path / "one.csv"
    one_col.write_text("gt\n0.0\n")
    with pytest.raises(ValueError, match="header"):
        read_trace_csv(one_col)
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("gt,P\n0.0,0.5\n1.0\n")
    with pytest.raises(ValueError, match=":3:"):
        read_trace_csv(ragged)
