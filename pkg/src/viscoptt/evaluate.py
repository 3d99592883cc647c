"""Chronological split, error metrics, Bland-Altman agreement and the
feature ablation harness."""
from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import LengthMismatch, TooFewBeats
from .forest import BASELINE_FEATURES, FEATURES, ForestHyperparams, Target, fit_forest, predict
from .records import BeatRecord, feature_matrix

AAMI_MAX_BIAS = 5.0
AAMI_MAX_SD = 8.0
LOA_Z = 1.96
MIN_SUBJECT_BEATS = 4


@dataclass(frozen=True)
class SplitProtocol:
    train_fraction: float = 0.5
    mode: str = "chronological"
    scope: str = "per-subject"  # or "pooled"

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must lie in (0, 1)")
        if self.mode != "chronological":
            raise ValueError(f"unsupported split mode {self.mode!r}")
        if self.scope not in ("per-subject", "pooled"):
            raise ValueError(f"unknown split scope {self.scope!r}")


@dataclass(frozen=True)
class EvalReport:
    rmse: float
    mae: float
    pearson_r: float | None
    bias: float
    sd: float
    loa_low: float
    loa_high: float
    aami_pass: bool
    n_beats: int
    n_subjects: int = 1

    def as_dict(self) -> dict:
        return asdict(self)


def group_by_subject(beats) -> "OrderedDict[str, list[int]]":
    groups = OrderedDict()
    for i, b in enumerate(beats):
        groups.setdefault(b.subject, []).append(i)
    return groups


def split_mask(beats, protocol: SplitProtocol = SplitProtocol()) -> np.ndarray:
    """Boolean training mask: the first ceil(fraction * n) beats of each unit."""
    beats = list(beats)
    units = group_by_subject(beats) if protocol.scope == "per-subject" else {"*": list(range(len(beats)))}
    mask = np.zeros(len(beats), dtype=bool)
    for subject, idx in units.items():
        if protocol.scope == "per-subject" and len(idx) < MIN_SUBJECT_BEATS:
            raise TooFewBeats(subject, len(idx))
        n_train = math.ceil(protocol.train_fraction * len(idx))
        mask[idx[:n_train]] = True
    return mask


def chronological_split(beats, protocol: SplitProtocol = SplitProtocol()):
    """(train, test) lists; input order is preserved within each."""
    beats = list(beats)
    mask = split_mask(beats, protocol)
    return [b for b, m in zip(beats, mask) if m], [b for b, m in zip(beats, mask) if not m]


# ----------------------------------------------------------------------------
# metrics

def compute_metrics(est, ref, n_subjects: int = 1) -> EvalReport:
    est = np.asarray(est, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if est.shape != ref.shape or est.ndim != 1:
        raise LengthMismatch(f"estimate shape {est.shape} vs reference {ref.shape}")
    if est.size == 0:
        raise LengthMismatch("no values to compare")
    d = est - ref
    bias = float(np.mean(d))
    sd = float(np.std(d))
    rmse = float(np.sqrt(np.mean(d * d)))
    mae = float(np.mean(np.abs(d)))
    r = None
    if np.ptp(ref) > 0 and np.ptp(est) > 0:
        r = float(np.clip(np.corrcoef(est, ref)[0, 1], -1.0, 1.0))
    return EvalReport(
        rmse=rmse, mae=mae, pearson_r=r, bias=bias, sd=sd,
        loa_low=bias - LOA_Z * sd, loa_high=bias + LOA_Z * sd,
        aami_pass=bool(abs(bias) <= AAMI_MAX_BIAS and sd <= AAMI_MAX_SD),
        n_beats=int(est.size), n_subjects=n_subjects,
    )


def summary_consistency(rmse, bias, loa_low, loa_high, tol) -> list[str]:
    """Check a published (rmse, bias, LoA) triple for internal agreement.

    The LoA half-width fixes SD = half / 1.96; with population SD the RMSE
    must then equal sqrt(bias^2 + SD^2). Returns the list of violations.
    """
    problems = []
    if loa_low > loa_high:
        problems.append("loa_low exceeds loa_high")
    centre = 0.5 * (loa_low + loa_high)
    if abs(centre - bias) > tol:
        problems.append(f"LoA centre {centre:.4g} differs from bias {bias:.4g}")
    sd = 0.5 * (loa_high - loa_low) / LOA_Z
    implied = math.sqrt(bias * bias + sd * sd)
    if abs(implied - rmse) > tol:
        problems.append(f"rmse {rmse:.4g} vs sqrt(bias^2 + sd^2) = {implied:.4g}")
    return problems


def validate_report(rep: EvalReport, rel_tol: float = 1e-9) -> list[str]:
    """Violations of the identities every emitted report must satisfy."""
    scale = max(1.0, rep.rmse)
    tol = rel_tol * scale
    problems = []
    if not rep.rmse + tol >= rep.mae >= 0:
        problems.append("expected rmse >= mae >= 0")
    if rep.rmse * rep.rmse + tol * scale < rep.bias * rep.bias:
        problems.append("rmse^2 below bias^2")
    if rep.pearson_r is not None and not -1 <= rep.pearson_r <= 1:
        problems.append("pearson_r outside [-1, 1]")
    if abs((rep.loa_high - rep.loa_low) - 2 * LOA_Z * rep.sd) > tol:
        problems.append("LoA width differs from 2 * 1.96 * sd")
    problems += summary_consistency(rep.rmse, rep.bias, rep.loa_low, rep.loa_high, tol)
    if rep.aami_pass != (abs(rep.bias) <= AAMI_MAX_BIAS and rep.sd <= AAMI_MAX_SD):
        problems.append("aami_pass inconsistent with bias and sd")
    return problems


def mean_of_reports(reports) -> dict:
    """Unweighted mean over subjects of the scalar metrics."""
    reports = list(reports)
    keys = ("rmse", "mae", "bias", "sd")
    out = {k: float(np.mean([getattr(r, k) for r in reports])) for k in keys}
    rs = [r.pearson_r for r in reports if r.pearson_r is not None]
    out["pearson_r"] = float(np.mean(rs)) if rs else None
    out["n_subjects"] = len(reports)
    return out


# ----------------------------------------------------------------------------
# model fitting on a split

TARGET_FIELDS = {Target.SBP: "sbp_ref", Target.DBP: "dbp_ref"}


def fit_predict(beats, mask, features, hp: ForestHyperparams, scope: str = "per-subject"):
    """Fit per target on the training beats and predict every test beat.

    Returns ``{target: estimates for the test beats in input order}`` and the
    fitted models (``{target: model}`` for pooled scope,
    ``{target: {subject: model}}`` per subject).
    """
    beats = list(beats)
    X = feature_matrix(beats, features)
    test_idx = np.flatnonzero(~mask)
    preds = {t: np.empty(test_idx.size) for t in Target}
    models = {}
    pos = {i: k for k, i in enumerate(test_idx)}
    units = group_by_subject(beats) if scope == "per-subject" else {None: list(range(len(beats)))}
    for t in Target:
        y = np.array([getattr(b, TARGET_FIELDS[t]) for b in beats])
        per_unit = {}
        for key, idx in units.items():
            idx = np.asarray(idx)
            tr, te = idx[mask[idx]], idx[~mask[idx]]
            model = fit_forest(X[tr], y[tr], hp, t, features)
            per_unit[key] = model
            if te.size:
                est = predict(model, X[te])
                for i, e in zip(te, est):
                    preds[t][pos[i]] = e
        models[t] = per_unit if scope == "per-subject" else per_unit[None]
    return preds, models


def evaluate_predictions(beats, mask, preds) -> dict:
    """Pooled (beat-weighted) and per-subject reports for each target."""
    beats = list(beats)
    test = [b for b, m in zip(beats, mask) if not m]
    n_subj = len({b.subject for b in test})
    out = {}
    for t in Target:
        ref = np.array([getattr(b, TARGET_FIELDS[t]) for b in test])
        pooled = compute_metrics(preds[t], ref, n_subj)
        per = {}
        for subject, idx in group_by_subject(test).items():
            per[subject] = compute_metrics(preds[t][idx], ref[idx])
        out[t] = {"pooled": pooled, "per_subject": per}
    return out


@dataclass
class AblationResult:
    baseline: dict  # Target -> EvalReport
    proposed: dict
    baseline_features: tuple = BASELINE_FEATURES
    proposed_features: tuple = FEATURES

    def rmse_delta(self, target) -> float:
        return self.proposed[target].rmse - self.baseline[target].rmse

    def rmse_reduction(self, target) -> float:
        """Relative RMSE reduction of the proposed arm (0.2 == 20 % lower)."""
        return 1.0 - self.proposed[target].rmse / self.baseline[target].rmse


def ablation_run(beats, hp: ForestHyperparams = ForestHyperparams(),
                 protocol: SplitProtocol = SplitProtocol()) -> AblationResult:
    """Train with and without ``v_visco`` on one split and the same seeds."""
    beats = list(beats)
    mask = split_mask(beats, SplitProtocol(protocol.train_fraction, protocol.mode, "per-subject"))
    reports = {}
    for arm, feats in (("baseline", BASELINE_FEATURES), ("proposed", FEATURES)):
        preds, _ = fit_predict(beats, mask, feats, hp, protocol.scope)
        ev = evaluate_predictions(beats, mask, preds)
        reports[arm] = {t: ev[t]["pooled"] for t in Target}
    return AblationResult(reports["baseline"], reports["proposed"])
