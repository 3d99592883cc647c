"""Waveform container, zero-phase filtering and Makima upsampling."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

from .errors import (
    EmptySignal,
    FactorTooSmall,
    InvalidFilterSpec,
    NonFiniteSample,
    NonPositiveRate,
    SignalTooShort,
)


class Channel(str, enum.Enum):
    ECG = "ECG"
    PPG = "PPG"


@dataclass(frozen=True, eq=False)
class Waveform:
    """Uniformly sampled single-channel signal.

    ``samples`` is stored as a read-only float64 array so a Waveform can be
    shared between threads or processes without copying defensively.
    """

    samples: np.ndarray
    fs: float
    kind: Channel
    t0: float = 0.0

    def __post_init__(self):
        x = np.array(self.samples, dtype=np.float64)
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "kind", Channel(self.kind))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return (len(self) - 1) / self.fs

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self)) / self.fs

    def time_of(self, index) -> float:
        return self.t0 + index / self.fs

    def index_of(self, time_s: float) -> float:
        """Fractional sample index of ``time_s``."""
        return (time_s - self.t0) * self.fs

    def with_samples(self, samples, fs=None) -> "Waveform":
        return Waveform(samples, self.fs if fs is None else fs, self.kind, self.t0)


def validate_and_load(samples, fs: float, kind, t0: float = 0.0) -> Waveform:
    """Build a Waveform, rejecting empty, non-finite or badly sampled input."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size == 0:
        raise EmptySignal("signal has no samples")
    if not np.isfinite(fs) or fs <= 0:
        raise NonPositiveRate(f"sampling rate must be positive, got {fs}")
    bad = np.flatnonzero(~np.isfinite(x))
    if bad.size:
        raise NonFiniteSample(int(bad[0]))
    if x.size < 2:
        raise SignalTooShort("a waveform needs at least 2 samples")
    return Waveform(x, float(fs), Channel(kind), float(t0))


# ----------------------------------------------------------------------------
# filtering

class FilterKind(str, enum.Enum):
    BANDPASS = "band-pass"
    HIGHPASS = "high-pass"
    NOTCH = "notch"


@dataclass(frozen=True)
class FilterSpec:
    kind: FilterKind = FilterKind.BANDPASS
    low_cut_hz: float = 0.5
    high_cut_hz: float = 20.0
    order: int = 4

    def __post_init__(self):
        object.__setattr__(self, "kind", FilterKind(self.kind))

    def check(self, fs: float):
        nyq = fs / 2.0
        if self.order < 2 or self.order % 2:
            raise InvalidFilterSpec(f"order must be even and >= 2, got {self.order}")
        if self.kind is FilterKind.HIGHPASS:
            if not 0 < self.low_cut_hz < nyq:
                raise InvalidFilterSpec(f"high-pass cutoff {self.low_cut_hz} Hz outside (0, {nyq})")
        elif not 0 < self.low_cut_hz < self.high_cut_hz < nyq:
            raise InvalidFilterSpec(
                f"need 0 < {self.low_cut_hz} < {self.high_cut_hz} < {nyq} Hz"
            )


PPG_FILTER = FilterSpec(FilterKind.BANDPASS, 0.5, 20.0, 4)
ECG_FILTER = FilterSpec(FilterKind.BANDPASS, 0.5, 40.0, 4)


def _design(spec: FilterSpec, fs: float):
    if spec.kind is FilterKind.HIGHPASS:
        return sps.butter(spec.order, spec.low_cut_hz, btype="highpass", fs=fs, output="sos")
    btype = "bandpass" if spec.kind is FilterKind.BANDPASS else "bandstop"
    return sps.butter(
        spec.order, [spec.low_cut_hz, spec.high_cut_hz], btype=btype, fs=fs, output="sos"
    )


def zero_phase_filter(w: Waveform, spec: FilterSpec) -> Waveform:
    """Butterworth filter applied forward and backward (no net phase shift)."""
    spec.check(w.fs)
    sos = _design(spec, w.fs)
    # pad by about three time constants of the lowest corner so the edge
    # transient has settled; never more than the signal allows
    settle = int(np.ceil(3.0 * w.fs / spec.low_cut_hz))
    padlen = min(max(6 * sos.shape[0], settle), len(w) - 1)
    y = sps.sosfiltfilt(sos, w.samples, padlen=padlen)
    return w.with_samples(y)


# ----------------------------------------------------------------------------
# Modified Akima interpolation

def makima_slopes(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Knot derivatives of the Modified Akima interpolant."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.size
    delta = np.diff(y) / np.diff(x)
    # two secants of quadratic extrapolation at each end
    m = np.empty(n + 3)
    m[2:n + 1] = delta
    m[1] = 2.0 * m[2] - m[3]
    m[0] = 2.0 * m[1] - m[2]
    m[n + 1] = 2.0 * m[n] - m[n - 1]
    m[n + 2] = 2.0 * m[n + 1] - m[n]

    dm = np.abs(np.diff(m))
    pm = np.abs(m[1:] + m[:-1])
    # weight on delta_{i-1} looks right, weight on delta_i looks left
    w_right = dm[2:] + 0.5 * pm[2:]
    w_left = dm[:-2] + 0.5 * pm[:-2]
    den = w_right + w_left
    d_prev, d_next = m[1:n + 1], m[2:n + 2]
    with np.errstate(invalid="ignore", divide="ignore"):
        d = (w_right * d_prev + w_left * d_next) / den
    tie = den == 0
    d[tie] = 0.5 * (d_prev[tie] + d_next[tie])
    return d


def _hermite(y0, y1, d0, d1, h, t):
    t2 = t * t
    t3 = t2 * t
    h10 = t3 - 2 * t2 + t
    h01 = -2 * t3 + 3 * t2
    h11 = t3 - t2
    # y0 + dy * h01 form: exactly flat when y0 == y1 and both slopes vanish
    return y0 + (y1 - y0) * h01 + h * (h10 * d0 + h11 * d1)


def makima_eval(x, y, xq) -> np.ndarray:
    """Evaluate the Modified Akima interpolant of (x, y) at ``xq``.

    ``x`` must be strictly increasing with at least 4 knots. Queries outside
    [x[0], x[-1]] extrapolate with the end cubic.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size < 4:
        raise SignalTooShort("Makima needs at least 4 knots")
    if np.any(np.diff(x) <= 0):
        raise ValueError("knots must be strictly increasing")
    d = makima_slopes(x, y)
    xq = np.asarray(xq, dtype=np.float64)
    k = np.clip(np.searchsorted(x, xq, side="right") - 1, 0, x.size - 2)
    h = x[k + 1] - x[k]
    t = (xq - x[k]) / h
    return _hermite(y[k], y[k + 1], d[k], d[k + 1], h, t)


def makima_upsample(w: Waveform, factor: int = 10) -> Waveform:
    """Resample ``w`` on a grid ``factor`` times denser.

    Output sample ``i * factor`` is input sample ``i`` unchanged.
    """
    if factor < 2:
        raise FactorTooSmall(f"upsample factor must be >= 2, got {factor}")
    n = len(w)
    if n < 4:
        raise SignalTooShort("Makima upsampling needs at least 4 samples")
    y = w.samples
    x = np.arange(n, dtype=np.float64)
    d = makima_slopes(x, y)
    t = np.arange(factor, dtype=np.float64) / factor
    seg = _hermite(y[:-1, None], y[1:, None], d[:-1, None], d[1:, None], 1.0, t[None, :])
    seg[:, 0] = y[:-1]
    out = np.concatenate([seg.ravel(), y[-1:]])
    return Waveform(out, w.fs * factor, w.kind, w.t0)
