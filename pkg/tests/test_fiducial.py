import numpy as np
import pytest
from hypothesis import given, strategies as st

from viscoptt.errors import IntersectionOutOfRange, NoBeatsFound, NonPositiveSlope, WindowTooShort
from viscoptt.fiducial import (
    BeatMeasures, FiducialPoint, Landmark, beat_is_valid, detect_r_peaks, max_upstroke,
    segment_beats, tangent_foot, tangent_intersection,
)
from viscoptt.signal import Channel, Waveform
from viscoptt.synth import pulse_shape, synth_beat_train

FS_UP = 1250.0


def spike_train(noise=0.0, seed=0, fs=250.0, secs=10.0):
    t = np.arange(0, secs, 1 / fs)
    x = sum(np.exp(-0.5 * ((t - c) / 0.010) ** 2) for c in np.arange(0, secs, 1.0))
    x = x + noise * np.random.default_rng(seed).standard_normal(t.size)
    return Waveform(x, fs, Channel.ECG)


def point(w, i, kind=Landmark.PULSE_FOOT):
    return FiducialPoint(i, w.time_of(i), kind, float(w.samples[i]))


# --- R-peaks ------------------------------------------------------------------

def test_clean_spike_train():
    peaks = detect_r_peaks(spike_train())
    times = np.array([p.time_s for p in peaks])
    assert times.size == 10
    assert np.max(np.abs(times - np.arange(10))) <= 0.008


def test_noisy_spike_train():
    peaks = detect_r_peaks(spike_train(noise=0.05, seed=42))
    times = np.array([p.time_s for p in peaks])
    assert times.size == 10
    assert np.max(np.abs(times - np.arange(10))) <= 0.016


def test_flat_ecg_has_no_beats():
    with pytest.raises(NoBeatsFound):
        detect_r_peaks(Waveform(np.zeros(2500), 250.0, Channel.ECG))


def test_short_ecg_rejected():
    with pytest.raises(NoBeatsFound):
        detect_r_peaks(Waveform(np.zeros(100), 250.0, Channel.ECG))


@given(st.integers(0, 500), st.floats(45, 150))
def test_r_peak_contract(seed, bpm):
    rng = np.random.default_rng(seed)
    n = 12
    hr = np.full(n, bpm) * rng.uniform(0.9, 1.1, n)
    ecg, _, _ = synth_beat_train(n, hr, np.full(n, 0.2), np.ones(n), 250.0, seed, ecg_noise=0.03)
    peaks = detect_r_peaks(ecg)
    idx = np.array([p.index for p in peaks])
    times = np.array([p.time_s for p in peaks])
    assert np.all(np.diff(times) > 0)
    assert np.all(np.diff(times) >= 0.27 - 1e-12)
    half = int(0.05 * ecg.fs)
    x = ecg.samples
    for i in idx:
        lo, hi = max(i - half, 0), min(i + half + 1, x.size)
        assert x[i] == x[lo:hi].max()


# --- upstroke and tangent foot -------------------------------------------------

def test_linear_ramp_upstroke_is_first_interior():
    w = Waveform(np.r_[np.arange(10.0), np.full(5, 9.0)], 100.0, Channel.PPG)
    assert max_upstroke(w, 0, 8).index == 1


def test_sigmoid_upstroke_at_midpoint():
    fs, t0, tau = 1250.0, 0.4, 0.02
    t = np.arange(0, 1, 1 / fs)
    w = Waveform(1 / (1 + np.exp(-(t - t0) / tau)), fs, Channel.PPG)
    up = max_upstroke(w, 0, t.size - 1)
    assert abs(up.index - t0 * fs) <= 1


def test_upstroke_window_too_short():
    w = Waveform(np.arange(10.0), 100.0, Channel.PPG)
    with pytest.raises(WindowTooShort):
        max_upstroke(w, 3, 4)


def test_intersection_closed_forms():
    assert tangent_intersection(0.50, 0.30, 10.0, 0.10) == pytest.approx(0.48, abs=1e-12)
    assert tangent_intersection(1.0, 4.0, 2.0, 0.0) == pytest.approx(-1.0)
    with pytest.raises(NonPositiveSlope):
        tangent_intersection(1.0, 4.0, 0.0, 0.0)


def _line_wave(t_u, y_u, slope, fs=1000.0, secs=2.0):
    t = np.arange(0, secs, 1 / fs)
    return Waveform(y_u + slope * (t - t_u), fs, Channel.PPG)


def test_foot_before_minimum_is_out_of_range():
    # tangent (1.0 s, 4.0), slope 2/s, baseline 0 -> foot at -1.0 s; minimum at 0.9 s
    w = _line_wave(1.0, 4.0, 2.0)
    up = point(w, 1000, Landmark.MAX_UPSTROKE)
    dmin = FiducialPoint(900, 0.9, Landmark.PULSE_FOOT, 0.0)
    samples = w.samples.copy()
    samples[900] = 0.0
    w2 = Waveform(samples, w.fs, Channel.PPG)
    with pytest.raises(IntersectionOutOfRange):
        tangent_foot(w2, up, dmin)


def test_ramp_onset_recovered_at_1250hz():
    fs, t_on = FS_UP, 0.3137
    t = np.arange(0, 1, 1 / fs)
    y = np.clip((t - t_on) * 5.0, 0, 1.0)
    w = Waveform(y, fs, Channel.PPG)
    up = max_upstroke(w, 1, int(0.9 * fs))
    lo = int(np.argmin(y[: up.index + 1]))
    foot = tangent_foot(w, up, point(w, lo))
    assert abs(foot.time_s - t_on) <= 1 / fs


def test_zero_slope_rejected():
    w = Waveform(np.zeros(50), 100.0, Channel.PPG)
    with pytest.raises(NonPositiveSlope):
        tangent_foot(w, point(w, 20, Landmark.MAX_UPSTROKE), point(w, 10))


def _pulse_wave(foot_time, rise, offset=0.0, scale=1.0):
    t = np.arange(0, 1.2, 1 / FS_UP)
    return Waveform(offset + scale * pulse_shape(t, foot_time, rise), FS_UP, Channel.PPG)


def _foot_of(w):
    up = max_upstroke(w, 1, int(0.9 * FS_UP))
    lo = int(np.argmin(w.samples[: up.index + 1]))
    return tangent_foot(w, up, point(w, lo)).time_s


@given(st.floats(0.2, 0.6), st.floats(0.06, 0.2), st.floats(-100, 100), st.floats(0.01, 100))
def test_foot_baseline_and_scale_invariance(foot_time, rise, c, k):
    base = _foot_of(_pulse_wave(foot_time, rise))
    assert abs(base - foot_time) <= 2 / FS_UP
    assert _foot_of(_pulse_wave(foot_time, rise, offset=c)) == pytest.approx(base, abs=1e-9)
    assert _foot_of(_pulse_wave(foot_time, rise, scale=k)) == pytest.approx(base, abs=1e-9)


# --- beat segmentation ---------------------------------------------------------

def test_segment_arithmetic():
    # R at 0.10 s, onset ramp from 0.2 at 0.35 s to 1.2, next R at 1.10 s
    fs = FS_UP
    t = np.arange(0, 2.0, 1 / fs)
    y = np.full(t.size, 0.2)
    rise = (t >= 0.35) & (t < 0.45)
    y[rise] = 0.2 + 10.0 * (t[rise] - 0.35)
    y[(t >= 0.45) & (t < 0.55)] = 1.2
    fall = t >= 0.55
    y[fall] = 0.2 + np.maximum(1.0 - 4.0 * (t[fall] - 0.55), 0)
    ppg = Waveform(y, fs, Channel.PPG)
    r = [FiducialPoint(int(0.1 * fs), 0.1, Landmark.R_PEAK), FiducialPoint(int(1.1 * fs), 1.1, Landmark.R_PEAK)]
    seg = segment_beats(r, ppg)
    assert len(seg.beats) == 1 and seg.n_dropped == 0
    b = seg.beats[0]
    assert b.ptt_s == pytest.approx(0.25, abs=1e-9)
    assert b.hr_bpm == pytest.approx(60.0)
    assert b.amp == pytest.approx(1.0, abs=1e-9)
    assert b.foot.time_s > b.r_peak.time_s


def test_long_ptt_is_dropped():
    r = FiducialPoint(0, 0.0, Landmark.R_PEAK)
    f = FiducialPoint(875, 0.7, Landmark.PULSE_FOOT)
    assert beat_is_valid(BeatMeasures(0.7, 60.0, 1.0, r, f)) == "ptt_out_of_range"
    assert beat_is_valid(BeatMeasures(0.3, 20.0, 1.0, r, f)) == "hr_out_of_range"
    assert beat_is_valid(BeatMeasures(0.3, 60.0, 0.0, r, f)) == "non_positive_amplitude"
    assert beat_is_valid(BeatMeasures(0.3, 60.0, 1.0, r, f)) is None


def test_ten_synthetic_beats_within_2ms():
    from viscoptt.signal import ECG_FILTER, PPG_FILTER, makima_upsample, zero_phase_filter

    n = 11  # ten beats plus the closing R-peak that defines the last RR interval
    rng = np.random.default_rng(3)
    ptt = rng.uniform(0.18, 0.3, n)
    ecg, ppg, truth = synth_beat_train(n, np.full(n, 70.0), ptt, np.ones(n), 125.0, seed=3,
                                       ecg_noise=0.0, ppg_noise=0.0)
    ecg = makima_upsample(zero_phase_filter(ecg, ECG_FILTER), 10)
    ppg = makima_upsample(zero_phase_filter(ppg, PPG_FILTER), 10)
    seg = segment_beats(detect_r_peaks(ecg), ppg)
    assert len(seg.beats) == 10
    got = np.array([b.ptt_s for b in seg.beats])
    assert np.max(np.abs(got - truth.ptt[:10])) <= 0.002


def test_noisy_ptt_error_distribution():
    from viscoptt.signal import ECG_FILTER, PPG_FILTER, makima_upsample, zero_phase_filter

    errs = []
    for seed in range(30):
        n = 11
        ptt = np.random.default_rng(seed).uniform(0.18, 0.3, n)
        ecg, ppg, truth = synth_beat_train(n, np.full(n, 70.0), ptt, np.ones(n), 125.0, seed=seed)
        ecg = makima_upsample(zero_phase_filter(ecg, ECG_FILTER), 10)
        ppg = makima_upsample(zero_phase_filter(ppg, PPG_FILTER), 10)
        for b in segment_beats(detect_r_peaks(ecg), ppg).beats:
            k = int(np.argmin(np.abs(truth.r_time - b.r_peak.time_s)))
            errs.append(b.ptt_s - truth.ptt[k])
    errs = np.abs(errs)
    assert errs.size == 300
    assert np.percentile(errs, 99) <= 0.002
    assert np.mean(errs) <= 0.001


@given(st.integers(0, 200))
def test_pairing_and_drop_accounting(seed):
    rng = np.random.default_rng(seed)
    n = 8
    ecg, ppg, _ = synth_beat_train(n, rng.uniform(50, 120, n), rng.uniform(0.1, 0.5, n),
                                   rng.uniform(0.7, 2.0, n), 250.0, seed)
    peaks = detect_r_peaks(ecg)
    seg = segment_beats(peaks, ppg)
    assert len(seg.beats) + seg.n_dropped == len(peaks) - 1
    times = [b.r_peak.time_s for b in seg.beats]
    assert times == sorted(set(times))
    assert all(b.foot.time_s > b.r_peak.time_s for b in seg.beats)
