"""Empirical mode decomposition, its noise-assisted ensemble and the
viscoelastic velocity metric computed from IMF2 + IMF3."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import NotEnoughImfs, SignalTooShort, WindowTooShort

ENERGY_FLOOR = 1e-12


@dataclass(frozen=True)
class EemdConfig:
    ensemble_size: int = 100
    noise_std_ratio: float = 0.2
    max_imfs: int = 0  # 0 -> ceil(log2(N))
    sift_stop_sd: float = 0.2
    max_sift_iters: int = 50
    rng_seed: int = 0

    def __post_init__(self):
        if self.ensemble_size < 1:
            raise ValueError("ensemble_size must be >= 1")
        if self.noise_std_ratio < 0:
            raise ValueError("noise_std_ratio must be >= 0")
        if not 0 < self.sift_stop_sd < 1:
            raise ValueError("sift_stop_sd must lie in (0, 1)")
        if self.max_sift_iters < 1 or self.max_imfs < 0:
            raise ValueError("max_sift_iters must be >= 1 and max_imfs >= 0")

    def imf_limit(self, n: int) -> int:
        return self.max_imfs or int(math.ceil(math.log2(n)))


@dataclass(frozen=True, eq=False)
class ImfSet:
    imfs: np.ndarray  # (n_imfs, source_len), IMF1 first
    residual: np.ndarray
    fs: float
    source_len: int

    @property
    def n_imfs(self) -> int:
        return self.imfs.shape[0]

    def reconstruct(self) -> np.ndarray:
        return self.imfs.sum(axis=0) + self.residual


def find_extrema(x: np.ndarray):
    """Indices of interior local maxima and minima.

    A flat run of equal samples bounded by opposite slopes counts as one
    extremum located at the middle of the run.
    """
    d = np.diff(x)
    nz = np.flatnonzero(d)
    if nz.size < 2:
        return np.empty(0, dtype=np.intp), np.empty(0, dtype=np.intp)
    s = d[nz] > 0
    k = np.flatnonzero(s[:-1] != s[1:])
    loc = (nz[k] + 1 + nz[k + 1]) // 2
    rising = s[k]
    return loc[rising], loc[~rising]


def _envelope(idx: np.ndarray, x: np.ndarray, n: int) -> np.ndarray:
    # mirror the two extrema nearest each end about the end sample
    left = idx[:2]
    right = idx[-2:]
    knots = np.concatenate([-left[::-1], idx, 2 * (n - 1) - right[::-1]])
    vals = np.concatenate([x[left[::-1]], x[idx], x[right[::-1]]])
    return CubicSpline(knots.astype(np.float64), vals)(np.arange(n, dtype=np.float64))


def _sift(r: np.ndarray, cfg: EemdConfig):
    """Extract one IMF from ``r``; None when ``r`` has too few extrema."""
    n = r.size
    maxima, minima = find_extrema(r)
    if maxima.size < 2 or minima.size < 2:
        return None
    h = r
    for _ in range(cfg.max_sift_iters):
        mean = 0.5 * (_envelope(maxima, h, n) + _envelope(minima, h, n))
        h_new = h - mean
        denom = np.dot(h, h)
        sd = np.dot(mean, mean) / denom if denom > 0 else 0.0
        h = h_new
        if sd < cfg.sift_stop_sd:
            break
        maxima, minima = find_extrema(h)
        if maxima.size < 2 or minima.size < 2:
            break
    return h


def emd(signal, cfg: EemdConfig = EemdConfig(), fs: float = 1.0) -> ImfSet:
    """Plain EMD by envelope-mean sifting with the Cauchy SD stop rule."""
    x = np.asarray(signal, dtype=np.float64)
    n = x.size
    if n < 8:
        raise SignalTooShort(f"EMD needs at least 8 samples, got {n}")
    imfs = []
    r = x
    for _ in range(cfg.imf_limit(n)):
        h = _sift(r, cfg)
        if h is None:
            break
        imfs.append(h)
        r = r - h
    stack = np.array(imfs) if imfs else np.zeros((0, n))
    residual = x - stack.sum(axis=0)
    return ImfSet(stack, residual, fs, n)


def eemd_decompose(signal, cfg: EemdConfig = EemdConfig(), fs: float = 1.0) -> ImfSet:
    """Ensemble EMD: average the IMFs of noise-perturbed copies.

    Member ``j`` adds white Gaussian noise of standard deviation
    ``noise_std_ratio * std(signal)`` drawn from seed ``rng_seed + j``.
    Members with fewer modes are zero-padded. The residual is what the
    averaged IMFs leave of the clean signal.
    """
    x = np.asarray(signal, dtype=np.float64)
    n = x.size
    if n < 8:
        raise SignalTooShort(f"EMD needs at least 8 samples, got {n}")
    sigma = cfg.noise_std_ratio * float(np.std(x))
    members = []
    for j in range(cfg.ensemble_size):
        if sigma > 0:
            noise = np.random.default_rng(cfg.rng_seed + j).standard_normal(n) * sigma
            members.append(emd(x + noise, cfg, fs).imfs)
        else:
            members.append(emd(x, cfg, fs).imfs)
    depth = max(m.shape[0] for m in members)
    total = np.zeros((depth, n))
    for m in members:
        total[: m.shape[0]] += m
    mean_imfs = total / cfg.ensemble_size
    residual = x - mean_imfs.sum(axis=0)
    return ImfSet(mean_imfs, residual, fs, n)


def imf_frequencies(imfs: ImfSet) -> np.ndarray:
    """Mean zero-crossing frequency of every IMF in Hz (diagnostic)."""
    duration = imfs.source_len / imfs.fs
    crossings = np.count_nonzero(np.diff(np.signbit(imfs.imfs), axis=1), axis=1)
    return crossings / (2.0 * duration)


def v_visco(imfs: ImfSet, cycle_start: int, cycle_end: int) -> float:
    """Log mean squared first difference of IMF2 + IMF3 over one cycle.

    The cycle covers samples ``cycle_start .. cycle_end - 1``. Differences
    reach one sample to the left of the window so K samples give K terms;
    at the start of the record only K - 1 terms exist.
    """
    if imfs.n_imfs < 3:
        raise NotEnoughImfs(f"decomposition has {imfs.n_imfs} IMFs, need 3")
    start = max(int(cycle_start), 0)
    end = min(int(cycle_end), imfs.source_len)
    if end - start < 2:
        raise WindowTooShort(f"cycle window [{cycle_start}, {cycle_end}) too short")
    lo = start - 1 if start > 0 else start
    s = imfs.imfs[1, lo:end] + imfs.imfs[2, lo:end]
    energy = float(np.mean(np.diff(s) ** 2))
    return math.log(max(energy, ENERGY_FLOOR))
