import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import spearmanr

from viscoptt.emd import EemdConfig
from viscoptt.errors import NonUniformGrid, ProfileLengthMismatch
from viscoptt.fiducial import detect_r_peaks, segment_beats
from viscoptt.pipeline import PipelineConfig, extract_beats
from viscoptt.signal import ECG_FILTER, PPG_FILTER, makima_upsample, zero_phase_filter
from viscoptt.synth import (
    BpLaw, FOOT_FRACTION, KelvinVoigtParams, kv_pressure, pulse_shape, synth_beat_train, synth_subject,
    viscous_energy, viscous_share,
)

GRID = np.arange(0, 2, 1e-3)
INTERIOR = slice(1, -1)


def test_elastic_only():
    out = kv_pressure(KelvinVoigtParams(3.0, 0.0, np.sin), GRID)
    assert np.max(np.abs(out - 3.0 * np.sin(GRID))) <= 1e-12


def test_viscous_ramp():
    out = kv_pressure(KelvinVoigtParams(0.0, 1.0, lambda t: t), GRID)
    assert np.allclose(out[INTERIOR], 1.0, atol=1e-9)


def test_harmonic_response():
    eta = 0.5
    out = kv_pressure(KelvinVoigtParams(1.0, eta, lambda t: np.sin(2 * np.pi * t)), GRID)
    w = 2 * np.pi
    # least-squares fit of a*sin + b*cos over the interior
    A = np.column_stack([np.sin(w * GRID), np.cos(w * GRID)])[INTERIOR]
    a, b = np.linalg.lstsq(A, out[INTERIOR], rcond=None)[0]
    assert math.hypot(a, b) == pytest.approx(math.sqrt(1 + (eta * w) ** 2), rel=1e-4)
    assert math.atan2(b, a) == pytest.approx(math.atan(eta * w), abs=1e-4)


def test_non_uniform_grid():
    with pytest.raises(NonUniformGrid):
        kv_pressure(KelvinVoigtParams(1.0, 1.0, np.sin), np.array([0.0, 0.1, 0.3, 0.4]))
    with pytest.raises(NonUniformGrid):
        kv_pressure(KelvinVoigtParams(1.0, 1.0, np.sin), np.array([0.0, -0.1, -0.2]))


@given(st.floats(0, 10), st.floats(0, 10), st.floats(0, 10), st.floats(0, 10))
def test_kv_linear_in_parameters(e1, n1, e2, n2):
    f = lambda t: np.sin(3 * t) + 0.2 * t ** 2
    s = kv_pressure(KelvinVoigtParams(e1 + e2, n1 + n2, f), GRID)
    parts = kv_pressure(KelvinVoigtParams(e1, n1, f), GRID) + kv_pressure(KelvinVoigtParams(e2, n2, f), GRID)
    assert np.max(np.abs(s - parts)) <= 1e-12 * max(1.0, np.max(np.abs(s)))


def test_pulse_foot_is_tangent_intersection():
    # analytic steepest point of the sin^2 rise is its midpoint
    rise, foot = 0.12, 0.3
    onset = foot - FOOT_FRACTION * rise
    mid = onset + rise / 2
    slope = np.pi / (2 * rise)
    assert mid + (0.0 - 0.5) / slope == pytest.approx(foot, abs=1e-12)
    assert pulse_shape(np.array([onset - 1e-6]), foot, rise)[0] == 0.0


def test_viscous_energy_grows_with_sharper_upstroke():
    e = [viscous_energy(0.14 / v, 0.9) for v in (0.8, 1.2, 1.6, 2.0)]
    assert np.all(np.diff(e) > 0)
    assert viscous_energy(0.1, 0.9, amplitude=2.0) == pytest.approx(4 * viscous_energy(0.1, 0.9))


def test_profile_mismatch():
    with pytest.raises(ProfileLengthMismatch):
        synth_beat_train(0, [], [], [])
    with pytest.raises(ProfileLengthMismatch):
        synth_beat_train(3, [60, 60, 60], [0.2, 0.2], [1, 1, 1])


def test_constant_profiles_recover_ptt():
    n = 10
    ecg, ppg, truth = synth_beat_train(n, np.full(n, 60.0), np.full(n, 0.25), np.ones(n), 125.0, seed=1)
    assert np.allclose(truth.ptt, 0.25) and np.allclose(truth.foot_time - truth.r_time, 0.25)
    ecg = makima_upsample(zero_phase_filter(ecg, ECG_FILTER), 10)
    ppg = makima_upsample(zero_phase_filter(ppg, PPG_FILTER), 10)
    seg = segment_beats(detect_r_peaks(ecg), ppg)
    assert len(seg.beats) == n - 1  # the last R-peak has no successor
    assert all(abs(b.ptt_s - 0.25) <= 0.002 for b in seg.beats)
    assert all(abs(b.hr_bpm - 60.0) < 0.5 for b in seg.beats)


def test_v_visco_follows_viscous_profile():
    n = 60
    visco = np.linspace(1.0, 2.0, n)  # doubles the maximum upstroke derivative
    sub_ecg, sub_ppg, truth = synth_beat_train(n, np.full(n, 70.0), np.full(n, 0.22), visco, 125.0, seed=4)
    from viscoptt.synth import SyntheticSubject

    sbp, dbp = BpLaw().apply(truth, 5)
    rec = SyntheticSubject("mono", sub_ecg, sub_ppg, truth, sbp, dbp).to_record()
    res = extract_beats(rec, PipelineConfig(eemd=EemdConfig(ensemble_size=20)))
    k = [int(np.argmin(np.abs(truth.r_time - b.beat_time))) for b in res.beats]
    rho = spearmanr([b.v_visco for b in res.beats], visco[k]).statistic
    assert len(res.beats) >= n - 3
    assert rho > 0.9


def test_ground_truth_complete_and_deterministic():
    a = synth_subject("x", 30, seed=11)
    b = synth_subject("x", 30, seed=11)
    assert np.array_equal(a.ppg.samples, b.ppg.samples) and np.array_equal(a.sbp, b.sbp)
    t = a.truth
    for name in ("r_time", "foot_time", "peak_time", "ptt", "hr", "rr", "visco", "amp", "visc_energy"):
        arr = getattr(t, name)
        assert arr.shape == (30,) and np.all(np.isfinite(arr))
    assert np.all(t.peak_time > t.foot_time) and np.all(t.foot_time > t.r_time)
    c = synth_subject("x", 30, seed=12)
    assert not np.array_equal(a.ppg.samples, c.ppg.samples)


def test_viscous_share_meets_design_floor():
    shares = [viscous_share(BpLaw(), synth_subject("s", 200, seed=s).truth) for s in range(5)]
    assert min(shares) >= 0.3
