"""Beat landmarks: ECG R-peaks, PPG maximum upstroke and the tangent foot."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

from .errors import (
    IntersectionOutOfRange,
    NoBeatsFound,
    NonPositiveSlope,
    WindowTooShort,
)
from .signal import Channel, Waveform

REFRACTORY_S = 0.27
PPG_SEARCH_S = 0.6
PTT_MAX_S = 0.6
HR_RANGE = (30.0, 220.0)


class Landmark(str, enum.Enum):
    R_PEAK = "RPeak"
    PULSE_FOOT = "PulseFoot"
    SYSTOLIC_PEAK = "SystolicPeak"
    MAX_UPSTROKE = "MaxUpstroke"


@dataclass(frozen=True)
class FiducialPoint:
    index: int
    time_s: float
    kind: Landmark
    value: float = float("nan")


@dataclass(frozen=True)
class BeatMeasures:
    ptt_s: float
    hr_bpm: float
    amp: float
    r_peak: FiducialPoint
    foot: FiducialPoint
    peak: FiducialPoint = None
    upstroke: FiducialPoint = None
    cycle: tuple = (0, 0)  # PPG sample window [start, end) for per-cycle features


@dataclass
class Segmentation:
    beats: list = field(default_factory=list)
    dropped: dict = field(default_factory=dict)  # reason -> count

    @property
    def n_dropped(self) -> int:
        return sum(self.dropped.values())

    def drop(self, reason: str):
        self.dropped[reason] = self.dropped.get(reason, 0) + 1


def _point(w: Waveform, index: int, kind: Landmark) -> FiducialPoint:
    return FiducialPoint(int(index), w.time_of(index), kind, float(w.samples[index]))


# ----------------------------------------------------------------------------
# R-peaks

def detect_r_peaks(ecg: Waveform) -> list[FiducialPoint]:
    """Pan-Tompkins style QRS detector.

    Band-pass 5-15 Hz, derivative, squaring and 150 ms moving integration,
    then an adaptive signal/noise threshold over candidate peaks. Each
    accepted candidate is snapped to the raw ECG maximum nearby.
    """
    if ecg.kind is not Channel.ECG:
        raise ValueError("detect_r_peaks expects an ECG waveform")
    if ecg.duration < 2.0:
        raise NoBeatsFound("ECG shorter than 2 s")
    fs = ecg.fs
    x = ecg.samples
    sos = sps.butter(2, [5.0, 15.0], btype="bandpass", fs=fs, output="sos")
    bp = sps.sosfiltfilt(sos, x, padtype="even")
    der = np.gradient(bp) * fs
    win = max(int(round(0.150 * fs)), 1)
    mwi = np.convolve(der * der, np.ones(win) / win, mode="same")
    if not np.any(mwi > 1e-12 * max(1.0, float(np.max(np.abs(x))) ** 2)):
        raise NoBeatsFound("no QRS energy in ECG")

    refractory = int(np.ceil(REFRACTORY_S * fs))
    padded = np.pad(mwi, 1)
    cand, _ = sps.find_peaks(padded, distance=refractory)
    cand = cand - 1
    if cand.size == 0:
        raise NoBeatsFound("no candidate QRS complexes")

    head = mwi[: int(2 * fs)]
    spki = 0.25 * float(head.max())
    npki = 0.5 * float(head.mean())
    accepted = []
    for c in cand:
        pk = mwi[c]
        if pk > npki + 0.25 * (spki - npki):
            accepted.append(c)
            spki = 0.125 * pk + 0.875 * spki
        else:
            npki = 0.125 * pk + 0.875 * npki
    if not accepted:
        raise NoBeatsFound("no candidate passed the adaptive threshold")

    half = int(round(0.075 * fs))
    snapped = []
    for c in accepted:
        lo, hi = max(c - half, 0), min(c + half + 1, len(x))
        snapped.append(lo + int(np.argmax(x[lo:hi])))
    # enforce the refractory period after snapping; keep the taller peak
    peaks = []
    for i in snapped:
        if peaks and i - peaks[-1] < refractory:
            if x[i] > x[peaks[-1]]:
                peaks[-1] = i
            continue
        peaks.append(i)
    return [_point(ecg, i, Landmark.R_PEAK) for i in peaks]


# ----------------------------------------------------------------------------
# PPG landmarks

def central_slope(ppg: Waveform, index: int) -> float:
    x = ppg.samples
    return float((x[index + 1] - x[index - 1]) * ppg.fs / 2.0)


def max_upstroke(ppg: Waveform, search_start: int, search_end: int) -> FiducialPoint:
    """Sample of steepest rise in the inclusive window [start, end].

    The derivative is the central difference, so only interior window
    samples are candidates; ties go to the earliest index.
    """
    start = max(int(search_start), 0)
    end = min(int(search_end), len(ppg) - 1)
    if end - start + 1 < 3:
        raise WindowTooShort(f"upstroke window [{search_start}, {search_end}] too short")
    x = ppg.samples
    d = x[start + 2 : end + 1] - x[start : end - 1]
    i = start + 1 + int(np.argmax(d))
    return _point(ppg, i, Landmark.MAX_UPSTROKE)


def tangent_intersection(t_u: float, y_u: float, slope: float, y_min: float) -> float:
    """Time where the tangent through (t_u, y_u) meets the level y_min."""
    if not slope > 0:
        raise NonPositiveSlope(f"upstroke slope {slope} is not positive")
    return t_u + (y_min - y_u) / slope


def tangent_foot(ppg: Waveform, upstroke: FiducialPoint, diastolic_min: FiducialPoint) -> FiducialPoint:
    """Intersecting-tangent pulse foot.

    The tangent at the maximum-upstroke sample is intersected with the
    horizontal line through the diastolic minimum value. The returned
    ``time_s`` is continuous; ``index`` is the nearest sample.
    """
    if not diastolic_min.time_s < upstroke.time_s:
        raise IntersectionOutOfRange("diastolic minimum does not precede the upstroke")
    y_u = float(ppg.samples[upstroke.index])
    y_min = float(ppg.samples[diastolic_min.index])
    t_foot = tangent_intersection(upstroke.time_s, y_u, central_slope(ppg, upstroke.index), y_min)
    if not diastolic_min.time_s <= t_foot <= upstroke.time_s:
        raise IntersectionOutOfRange(
            f"foot at {t_foot:.4f} s outside [{diastolic_min.time_s:.4f}, {upstroke.time_s:.4f}]"
        )
    idx = int(np.clip(np.rint(ppg.index_of(t_foot)), 0, len(ppg) - 1))
    return FiducialPoint(idx, t_foot, Landmark.PULSE_FOOT, y_min)


def measure_beat(ppg: Waveform, r_peak: FiducialPoint, rr_s: float) -> BeatMeasures:
    """Landmarks of the pulse following ``r_peak`` and the three scalar measures."""
    first = int(np.floor(ppg.index_of(r_peak.time_s))) + 1
    last = int(np.floor(ppg.index_of(r_peak.time_s + PPG_SEARCH_S)))
    first = max(first, 1)
    last = min(last, len(ppg) - 2)
    if last - first + 1 < 3:
        raise WindowTooShort("PPG search window truncated by record end")
    x = ppg.samples
    pk = first + int(np.argmax(x[first : last + 1]))
    up = max_upstroke(ppg, first - 1, pk)
    lo = first + int(np.argmin(x[first : up.index + 1]))
    foot = tangent_foot(ppg, up, _point(ppg, lo, Landmark.PULSE_FOOT))
    peak = _point(ppg, pk, Landmark.SYSTOLIC_PEAK)
    cycle_start = foot.index
    cycle_end = min(cycle_start + int(round(rr_s * ppg.fs)), len(ppg))
    return BeatMeasures(
        ptt_s=foot.time_s - r_peak.time_s,
        hr_bpm=60.0 / rr_s,
        amp=peak.value - foot.value,
        r_peak=r_peak,
        foot=foot,
        peak=peak,
        upstroke=up,
        cycle=(cycle_start, cycle_end),
    )


def beat_is_valid(b: BeatMeasures) -> str | None:
    """Name of the first violated plausibility gate, or None."""
    if not 0 < b.ptt_s < PTT_MAX_S:
        return "ptt_out_of_range"
    if not HR_RANGE[0] <= b.hr_bpm <= HR_RANGE[1]:
        return "hr_out_of_range"
    if not b.amp > 0:
        return "non_positive_amplitude"
    return None


def segment_beats(r_peaks, ppg: Waveform) -> Segmentation:
    """Pair each R-peak that has a successor with its PPG pulse.

    Beats whose landmarks cannot be located or fail the plausibility gates
    are counted per reason in ``Segmentation.dropped``.
    """
    out = Segmentation()
    for cur, nxt in zip(r_peaks[:-1], r_peaks[1:]):
        rr = nxt.time_s - cur.time_s
        try:
            beat = measure_beat(ppg, cur, rr)
        except (WindowTooShort, NonPositiveSlope, IntersectionOutOfRange) as exc:
            out.drop(type(exc).__name__)
            continue
        reason = beat_is_valid(beat)
        if reason:
            out.drop(reason)
        else:
            out.beats.append(beat)
    return out
