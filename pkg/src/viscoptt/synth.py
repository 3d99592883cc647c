"""Synthetic ECG/PPG beat trains with known landmarks and a Kelvin-Voigt
blood-pressure law, used as test oracles for the whole pipeline."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NonUniformGrid, ProfileLengthMismatch
from .signal import Channel, Waveform


@dataclass(frozen=True)
class KelvinVoigtParams:
    E: float
    eta: float
    strain_fn: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self):
        if not self.E >= 0 or not self.eta >= 0:
            raise ValueError("E and eta must be non-negative")


def kv_pressure(params: KelvinVoigtParams, t_grid) -> np.ndarray:
    """Stress E*strain + eta*d(strain)/dt on a uniform time grid."""
    t = np.asarray(t_grid, dtype=np.float64)
    if t.size < 3:
        raise NonUniformGrid("need at least 3 grid points")
    dt = np.diff(t)
    if np.any(dt <= 0) or np.ptp(dt) > 1e-9 * abs(dt[0]):
        raise NonUniformGrid("time grid must be strictly increasing and uniform")
    eps = np.asarray(params.strain_fn(t), dtype=np.float64)
    out = params.E * eps
    if params.eta:
        out = out + params.eta * np.gradient(eps, dt[0])
    return out


# ----------------------------------------------------------------------------
# beat trains

RISE_S = 0.14  # upstroke duration at unit viscous modulation
FALL_S = 0.10
REFLECT_DELAY_S = 0.20
REFLECT_WIDTH_S = 0.06
REFLECT_GAIN = 0.4
LEAD_IN_S = 0.5
FOOT_FRACTION = 0.5 - 1.0 / np.pi  # tangent foot position inside the rise


def pulse_shape(t, foot_time, rise_s, amplitude=1.0):
    """Single PPG pulse: sin^2 upstroke, Gaussian fall, reflected wave.

    The upstroke lasts ``rise_s`` and starts at
    ``foot_time - FOOT_FRACTION * rise_s``, which places the intersection of
    the steepest tangent with the zero baseline exactly at ``foot_time``.
    The pulse is identically zero before its onset.
    """
    t = np.asarray(t, dtype=np.float64)
    onset = foot_time - FOOT_FRACTION * rise_s
    peak = onset + rise_s
    u = t - peak
    rise = np.sin(0.5 * np.pi * (t - onset) / rise_s) ** 2
    fall = np.exp(-0.5 * (u / FALL_S) ** 2)
    refl = REFLECT_GAIN * np.exp(-0.5 * ((u - REFLECT_DELAY_S) / REFLECT_WIDTH_S) ** 2)
    y = np.where(t < onset, 0.0, np.where(u < 0, rise, fall + refl))
    return amplitude * y


@dataclass(frozen=True, eq=False)
class BeatTruth:
    """Per-beat ground truth of a synthetic record (arrays of length n_beats)."""

    r_time: np.ndarray
    foot_time: np.ndarray
    peak_time: np.ndarray
    ptt: np.ndarray
    hr: np.ndarray
    rr: np.ndarray
    visco: np.ndarray
    rise_s: np.ndarray
    amp: np.ndarray
    visc_energy: np.ndarray  # mean square Kelvin-Voigt viscous stress over the beat (strain = pulse)

    def __len__(self):
        return self.r_time.size


def viscous_energy(rise_s: float, rr_s: float, amplitude: float = 1.0, eta: float = 1.0,
                   fs: float = 2000.0) -> float:
    """Mean square of eta * d(strain)/dt over one beat, strain being the pulse."""
    foot = FOOT_FRACTION * rise_s
    t = np.arange(0.0, rr_s, 1.0 / fs)
    kv = KelvinVoigtParams(0.0, eta, lambda tt: pulse_shape(tt, foot, rise_s, amplitude))
    return float(np.mean(kv_pressure(kv, t) ** 2))


def synth_beat_train(
    n_beats: int,
    hr_profile,
    ptt_profile,
    visco_profile,
    fs: float = 125.0,
    seed: int = 0,
    amp_profile=None,
    ecg_noise: float = 0.01,
    ppg_noise: float = 0.002,
):
    """Generate synchronized ECG and PPG with known per-beat landmarks.

    R-peaks are Gaussian spikes (10 ms) with a small T wave. The tangent
    foot of each PPG pulse lies ``ptt_profile[k]`` after its R-peak;
    ``visco_profile[k]`` divides the upstroke duration, so doubling it
    doubles the maximum upstroke slope.
    Returns ``(ecg, ppg, truth)``.
    """
    profiles = [np.asarray(p, dtype=np.float64) for p in (hr_profile, ptt_profile, visco_profile)]
    if amp_profile is None:
        amp_profile = np.ones(n_beats)
    profiles.append(np.asarray(amp_profile, dtype=np.float64))
    if n_beats < 1 or any(p.shape != (n_beats,) for p in profiles):
        raise ProfileLengthMismatch(f"all profiles must have length n_beats={n_beats}")
    if fs < 125:
        raise ValueError("fs must be >= 125 Hz")
    hr, ptt, visco, amp = profiles
    if np.any(visco <= 0) or np.any(hr <= 0) or np.any(ptt <= 0):
        raise ValueError("profiles must be positive")

    rr = 60.0 / hr
    r_time = LEAD_IN_S + np.concatenate([[0.0], np.cumsum(rr[:-1])])
    rise = RISE_S / visco
    foot = r_time + ptt
    peak = foot + (1.0 - FOOT_FRACTION) * rise
    total = r_time[-1] + rr[-1] + LEAD_IN_S
    t = np.arange(0.0, total, 1.0 / fs)

    rng = np.random.default_rng(seed)
    ecg = np.zeros_like(t)
    ppg = np.zeros_like(t)
    for k in range(n_beats):
        near = np.abs(t - r_time[k]) < 1.0
        ecg[near] += np.exp(-0.5 * ((t[near] - r_time[k]) / 0.010) ** 2)
        ecg[near] += 0.25 * np.exp(-0.5 * ((t[near] - r_time[k] - 0.3) / 0.05) ** 2)
        near = (t > peak[k] - 2 * rise[k]) & (t < peak[k] + 1.0)
        ppg[near] += pulse_shape(t[near], foot[k], rise[k], amp[k])
    ecg += ecg_noise * rng.standard_normal(t.size)
    ppg += ppg_noise * rng.standard_normal(t.size)

    energy = np.array([viscous_energy(rise[k], rr[k], amp[k]) for k in range(n_beats)])
    truth = BeatTruth(r_time, foot, peak, ptt, hr, rr, visco, rise, amp, energy)
    return Waveform(ecg, fs, Channel.ECG), Waveform(ppg, fs, Channel.PPG), truth


# ----------------------------------------------------------------------------
# profiles and the blood-pressure law

def smooth_profile(n: int, lo: float, hi: float, rng: np.random.Generator, periods=(6, 25)) -> np.ndarray:
    """Random slowly varying profile spanning roughly [lo, hi].

    A sum of three sinusoids with random periods (in beats) and phases, so a
    chronological half of the record still sees most of the range.
    """
    k = np.arange(n)
    s = np.zeros(n)
    for _ in range(3):
        period = rng.uniform(*periods)
        s += np.sin(2 * np.pi * k / period + rng.uniform(0, 2 * np.pi))
    s = (s - s.min()) / (np.ptp(s) or 1.0)
    return lo + (hi - lo) * s


def random_profiles(n_beats: int, seed: int, periods=(6, 25)):
    """(hr, ptt, visco, amp) profiles with independent random phases."""
    rng = np.random.default_rng(seed)
    hr = smooth_profile(n_beats, 55.0, 90.0, rng, periods)
    ptt = smooth_profile(n_beats, 0.16, 0.32, rng, periods)
    visco = smooth_profile(n_beats, 0.8, 2.0, rng, periods)
    amp = smooth_profile(n_beats, 0.8, 1.2, rng, periods)
    return hr, ptt, visco, amp


@dataclass(frozen=True)
class BpLaw:
    """SBP/DBP = a / PTT + b * viscous_energy + c + N(0, noise_sd)."""

    sbp_a: float = 10.0
    sbp_b: float = 1.6
    sbp_c: float = 60.0
    dbp_a: float = 8.0
    dbp_b: float = 1.3
    dbp_c: float = 30.0
    noise_sd: float = 2.0

    def components(self, truth: BeatTruth):
        """Elastic and viscous SBP and DBP terms without noise."""
        inv = 1.0 / truth.ptt
        return (
            self.sbp_a * inv,
            self.sbp_b * truth.visc_energy,
            self.dbp_a * inv,
            self.dbp_b * truth.visc_energy,
        )

    def apply(self, truth: BeatTruth, seed: int = 0):
        rng = np.random.default_rng(seed)
        se, sv, de, dv = self.components(truth)
        sbp = se + sv + self.sbp_c + self.noise_sd * rng.standard_normal(len(truth))
        dbp = de + dv + self.dbp_c + self.noise_sd * rng.standard_normal(len(truth))
        return sbp, dbp


def viscous_share(law: BpLaw, truth: BeatTruth) -> float:
    """Viscous term variance over noise-free SBP variance.

    Exceeds 1 when the elastic and viscous terms are anticorrelated.
    """
    se, sv, _, _ = law.components(truth)
    total = np.var(se + sv)
    return float(np.var(sv) / total) if total > 0 else 0.0


def per_sample_reference(truth: BeatTruth, values, t: np.ndarray) -> np.ndarray:
    """Hold each beat's value from its R-peak until the next R-peak."""
    k = np.clip(np.searchsorted(truth.r_time, t, side="right") - 1, 0, len(truth) - 1)
    return np.asarray(values)[k]


@dataclass(frozen=True, eq=False)
class SyntheticSubject:
    subject_id: str
    ecg: Waveform
    ppg: Waveform
    truth: BeatTruth
    sbp: np.ndarray  # per beat
    dbp: np.ndarray

    def reference_columns(self):
        """Per-sample SBP/DBP columns, constant over each beat."""
        t = self.ppg.times
        return per_sample_reference(self.truth, self.sbp, t), per_sample_reference(self.truth, self.dbp, t)

    def to_record(self):
        """In-memory RecordFile equal to what ``dump`` followed by ingest gives."""
        from .records import RecordFile

        sbp, dbp = self.reference_columns()
        return RecordFile(self.subject_id, self.ppg.fs, self.ppg.times,
                          np.array(self.ecg.samples), np.array(self.ppg.samples), sbp, dbp)

    def dump(self, path):
        from .records import dump_record

        sbp, dbp = self.reference_columns()
        dump_record(path, self.subject_id, self.ppg.fs, self.ecg.samples, self.ppg.samples, sbp, dbp)


def synth_subject(subject_id: str, n_beats: int, seed: int, law: BpLaw = BpLaw(),
                  fs: float = 125.0, periods=(6, 25)) -> SyntheticSubject:
    """One synthetic subject with random profiles and Kelvin-Voigt pressures.

    ``periods`` bounds the profile oscillation periods in beats.
    """
    hr, ptt, visco, amp = random_profiles(n_beats, seed, periods)
    ecg, ppg, truth = synth_beat_train(n_beats, hr, ptt, visco, fs, seed, amp)
    sbp, dbp = law.apply(truth, seed + 1_000_003)
    return SyntheticSubject(subject_id, ecg, ppg, truth, sbp, dbp)
