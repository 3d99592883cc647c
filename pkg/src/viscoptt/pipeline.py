"""Record-to-report orchestration: preprocessing, beat features, model
fitting, evaluation and artifact output."""
from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .emd import EemdConfig, eemd_decompose, v_visco
from .errors import ConfigError, PipelineError, WindowTooShort
from .evaluate import (
    MIN_SUBJECT_BEATS,
    SplitProtocol,
    ablation_run,
    evaluate_predictions,
    fit_predict,
    mean_of_reports,
    split_mask,
    validate_report,
)
from .fiducial import detect_r_peaks, segment_beats
from .forest import FEATURES, ForestHyperparams, Target
from .modelio import save_model
from .records import BeatRecord, RecordFile, ingest, write_beats
from .signal import ECG_FILTER, PPG_FILTER, FilterSpec, makima_upsample, zero_phase_filter

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    upsample_factor: int = 10
    upsample_ecg: bool = True
    ppg_filter: FilterSpec = PPG_FILTER
    ecg_filter: FilterSpec = ECG_FILTER
    eemd: EemdConfig = EemdConfig()
    # "native": decompose the filtered PPG at its recorded rate; "upsampled": after Makima
    eemd_rate: str = "native"
    forest: ForestHyperparams = ForestHyperparams()
    split: SplitProtocol = SplitProtocol()
    output_dir: str = "out"
    ablation: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.upsample_factor < 2:
            raise ConfigError("upsample_factor must be >= 2")
        if self.eemd_rate not in ("native", "upsampled"):
            raise ConfigError(f"eemd_rate must be 'native' or 'upsampled', got {self.eemd_rate!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


_SECTIONS = {"ppg_filter": FilterSpec, "ecg_filter": FilterSpec, "eemd": EemdConfig,
             "forest": ForestHyperparams, "split": SplitProtocol}


def _coerce(text: str, like):
    if isinstance(like, bool):
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if isinstance(like, int):
        return int(text)
    if isinstance(like, float):
        return float(text)
    return text


def config_from_pairs(pairs: dict, base: PipelineConfig = PipelineConfig()) -> PipelineConfig:
    """Apply ``{"forest.n_trees": "50", "ablation": "true", ...}`` to a config."""
    top = {}
    nested = {name: {} for name in _SECTIONS}
    for key, text in pairs.items():
        section, _, name = key.partition(".")
        try:
            if name:
                if section not in _SECTIONS:
                    raise ConfigError(f"unknown config section {section!r}")
                current = getattr(base, section)
                if name not in {f.name for f in dataclasses.fields(current)}:
                    raise ConfigError(f"unknown config key {key!r}")
                nested[section][name] = _coerce(text, getattr(current, name))
            else:
                if key not in {f.name for f in dataclasses.fields(base)} or key in _SECTIONS:
                    raise ConfigError(f"unknown config key {key!r}")
                top[key] = _coerce(text, getattr(base, key))
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None
    try:
        for section, values in nested.items():
            if values:
                top[section] = dataclasses.replace(getattr(base, section), **values)
        return dataclasses.replace(base, **top)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path, base: PipelineConfig = PipelineConfig()) -> PipelineConfig:
    """Read ``key = value`` lines; ``#`` starts a comment."""
    pairs = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        pairs[key.strip()] = value.strip()
    return config_from_pairs(pairs, base)


# ----------------------------------------------------------------------------
# per-record processing

class RecordSkipped(PipelineError):
    pass


@dataclass
class RecordResult:
    subject: str
    beats: list = field(default_factory=list)
    dropped: dict = field(default_factory=dict)
    skip_reason: str | None = None


def extract_beats(record: RecordFile, cfg: PipelineConfig) -> RecordResult:
    """Filter, upsample, locate landmarks, decompose and build beat rows."""
    ecg_raw, ppg_raw = record.waveforms()
    ecg_f = zero_phase_filter(ecg_raw, cfg.ecg_filter)
    ppg_f = zero_phase_filter(ppg_raw, cfg.ppg_filter)
    factor = cfg.upsample_factor
    ppg = makima_upsample(ppg_f, factor)
    ecg = makima_upsample(ecg_f, factor) if cfg.upsample_ecg else ecg_f

    r_peaks = detect_r_peaks(ecg)
    seg = segment_beats(r_peaks, ppg)
    if not seg.beats:
        raise RecordSkipped(f"no valid beats ({seg.dropped or 'fewer than 2 R-peaks'})")

    if cfg.eemd_rate == "native":
        imfs = eemd_decompose(ppg_f.samples, cfg.eemd, ppg_f.fs)
        scale = 1.0 / factor
    else:
        imfs = eemd_decompose(ppg.samples, cfg.eemd, ppg.fs)
        scale = 1.0
    if imfs.n_imfs < 3:
        raise RecordSkipped(f"PPG decomposition yielded {imfs.n_imfs} IMFs, need 3")

    result = RecordResult(record.subject_id, dropped=dict(seg.dropped))
    for b in seg.beats:
        start = int(round(b.cycle[0] * scale))
        end = int(round(b.cycle[1] * scale))
        try:
            vv = v_visco(imfs, start, end)
        except WindowTooShort:
            result.dropped["cycle_too_short"] = result.dropped.get("cycle_too_short", 0) + 1
            continue
        # median over the R-R interval, so rounding at the edges cannot pick
        # up the neighbouring beat's reference
        lo = int(np.clip(math.ceil(ppg_raw.index_of(b.r_peak.time_s)), 0, len(record) - 1))
        hi = int(np.clip(math.floor(ppg_raw.index_of(b.r_peak.time_s + 60.0 / b.hr_bpm)), lo + 1, len(record)))
        result.beats.append(BeatRecord(
            subject=record.subject_id,
            beat_time=b.r_peak.time_s,
            ptt_s=b.ptt_s,
            inv_ptt=1.0 / b.ptt_s,
            v_visco=vv,
            hr=b.hr_bpm,
            amp=b.amp,
            sbp_ref=float(np.median(record.sbp_ref[lo:hi])),
            dbp_ref=float(np.median(record.dbp_ref[lo:hi])),
        ))
    return result


def process_path(path, cfg: PipelineConfig) -> RecordResult:
    """Ingest and process one file; failures become a skip reason."""
    try:
        record = ingest(path)
    except PipelineError as exc:
        return RecordResult(str(path), skip_reason=f"{type(exc).__name__}: {exc}")
    try:
        return extract_beats(record, cfg)
    except PipelineError as exc:
        return RecordResult(record.subject_id, skip_reason=f"{type(exc).__name__}: {exc}")


def _process_star(args):
    return process_path(*args)


# ----------------------------------------------------------------------------
# batch run

class AllRecordsFailed(PipelineError):
    pass


@dataclass
class PipelineResult:
    beats: list
    train_mask: np.ndarray
    reports: dict  # scope -> Target -> {"pooled": EvalReport, "per_subject": {...}}
    predictions: dict  # scope -> Target -> test estimates
    models: dict  # scope -> Target -> model or {subject: model}
    records_in: int
    skipped: dict  # record -> reason
    dropped: dict  # reason -> count
    ablation: object = None
    primary_scope: str = "per-subject"

    @property
    def records_processed(self) -> int:
        return self.records_in - len(self.skipped)

    @property
    def primary(self) -> dict:
        return {t: self.reports[self.primary_scope][t]["pooled"] for t in Target}


def collect_beats(paths, cfg: PipelineConfig):
    paths = [str(p) for p in paths]
    if cfg.workers > 1 and len(paths) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_process_star, [(p, cfg) for p in paths]))
    else:
        results = [process_path(p, cfg) for p in paths]

    skipped, dropped, by_subject = {}, {}, {}
    for path, res in zip(paths, results):
        for k, v in res.dropped.items():
            dropped[k] = dropped.get(k, 0) + v
        if res.skip_reason is None and len(res.beats) < MIN_SUBJECT_BEATS:
            res.skip_reason = f"only {len(res.beats)} valid beats (need {MIN_SUBJECT_BEATS})"
        if res.skip_reason is None and res.subject in by_subject:
            res.skip_reason = f"duplicate subject id {res.subject!r}"
        if res.skip_reason is not None:
            skipped[path] = res.skip_reason
            log.warning("skipping %s: %s", path, res.skip_reason)
            continue
        by_subject[res.subject] = res.beats
    beats = [b for s in sorted(by_subject) for b in by_subject[s]]
    return beats, skipped, dropped


def run_pipeline(cfg: PipelineConfig, paths, write: bool = True) -> PipelineResult:
    paths = list(paths)
    if not paths:
        raise ConfigError("no record files given")
    beats, skipped, dropped = collect_beats(paths, cfg)
    if not beats:
        raise AllRecordsFailed(f"all {len(paths)} records failed")

    mask = split_mask(beats, SplitProtocol(cfg.split.train_fraction, cfg.split.mode, "per-subject"))
    reports, predictions, models = {}, {}, {}
    for scope in ("per-subject", "pooled"):
        preds, mods = fit_predict(beats, mask, FEATURES, cfg.forest, scope)
        predictions[scope] = preds
        models[scope] = mods
        reports[scope] = evaluate_predictions(beats, mask, preds)
        for t in Target:
            problems = validate_report(reports[scope][t]["pooled"])
            if problems:
                raise PipelineError(f"inconsistent {scope} {t.value} report: {problems}")
    ablation = None
    if cfg.ablation:
        ablation = ablation_run(beats, cfg.forest, cfg.split)
    result = PipelineResult(
        beats, mask, reports, predictions, models, len(paths), skipped, dropped,
        ablation, cfg.split.scope,
    )
    if write:
        write_outputs(result, cfg)
    return result


# ----------------------------------------------------------------------------
# artifacts

def _fmt(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def report_pairs(result: PipelineResult, cfg: PipelineConfig) -> list[tuple[str, str]]:
    """Flat key/value view of the run, also the content of report.kv."""
    kv = [
        ("records_in", result.records_in),
        ("records_processed", result.records_processed),
        ("records_skipped", len(result.skipped)),
        ("n_beats", len(result.beats)),
        ("n_train", int(result.train_mask.sum())),
        ("n_test", int((~result.train_mask).sum())),
        ("primary_scope", result.primary_scope),
        ("aami_max_bias", 5.0),
        ("aami_max_sd", 8.0),
    ]
    for reason, n in sorted(result.dropped.items()):
        kv.append((f"dropped.{reason}", n))
    for scope in ("per-subject", "pooled"):
        tag = "primary" if scope == result.primary_scope else "secondary"
        for t in Target:
            rep = result.reports[scope][t]["pooled"]
            for k, v in rep.as_dict().items():
                kv.append((f"{tag}.{t.value.lower()}.{k}", v))
    for t in Target:
        per = result.reports[result.primary_scope][t]["per_subject"]
        for k, v in mean_of_reports(per.values()).items():
            kv.append((f"subject_mean.{t.value.lower()}.{k}", v))
    if result.ablation is not None:
        ab = result.ablation
        for t in Target:
            low = t.value.lower()
            for arm, reps in (("baseline", ab.baseline), ("proposed", ab.proposed)):
                kv.append((f"ablation.{low}.{arm}.rmse", reps[t].rmse))
                kv.append((f"ablation.{low}.{arm}.mae", reps[t].mae))
            kv.append((f"ablation.{low}.rmse_delta", ab.rmse_delta(t)))
            kv.append((f"ablation.{low}.rmse_reduction", ab.rmse_reduction(t)))
    return [(k, _fmt(v)) for k, v in kv]


def render_report(result: PipelineResult, cfg: PipelineConfig) -> str:
    lines = [
        "Cuffless blood-pressure estimation report",
        "",
        f"records: {result.records_in} in, {result.records_processed} processed, "
        f"{len(result.skipped)} skipped",
    ]
    for path, reason in sorted(result.skipped.items()):
        lines.append(f"  skipped {path}: {reason}")
    n_test = int((~result.train_mask).sum())
    lines.append(f"beats: {len(result.beats)} ({len(result.beats) - n_test} train / {n_test} test)")
    if result.dropped:
        lines.append("dropped beats: " + ", ".join(f"{k}={v}" for k, v in sorted(result.dropped.items())))
    lines.append("")

    header = f"{'scope':<12}{'target':<7}{'RMSE':>8}{'MAE':>8}{'R':>8}{'bias':>8}{'SD':>8}{'LoA low':>9}{'LoA high':>9}  AAMI"
    lines += [header, "-" * len(header)]
    for scope in (result.primary_scope, "pooled" if result.primary_scope == "per-subject" else "per-subject"):
        for t in Target:
            r = result.reports[scope][t]["pooled"]
            rr = f"{r.pearson_r:8.3f}" if r.pearson_r is not None else f"{'NA':>8}"
            lines.append(
                f"{scope:<12}{t.value:<7}{r.rmse:8.2f}{r.mae:8.2f}{rr}{r.bias:8.2f}{r.sd:8.2f}"
                f"{r.loa_low:9.2f}{r.loa_high:9.2f}  {'pass' if r.aami_pass else 'FAIL'}"
            )
    lines.append("")
    lines.append(f"first row is the primary scope ({result.primary_scope}); "
                 "AAMI: |bias| <= 5 mmHg and SD <= 8 mmHg on pooled test beats")
    for t in Target:
        m = mean_of_reports(result.reports[result.primary_scope][t]["per_subject"].values())
        lines.append(f"subject-mean {t.value}: RMSE {m['rmse']:.2f}  MAE {m['mae']:.2f} over {m['n_subjects']} subjects")

    if result.ablation is not None:
        ab = result.ablation
        lines += ["", "Ablation (identical split and seeds)",
                  f"{'target':<7}{'features':<30}{'RMSE':>8}{'MAE':>8}"]
        for t in Target:
            for arm, reps, feats in (("baseline", ab.baseline, ab.baseline_features),
                                     ("proposed", ab.proposed, ab.proposed_features)):
                lines.append(f"{t.value:<7}{','.join(feats):<30}{reps[t].rmse:8.2f}{reps[t].mae:8.2f}")
            lines.append(f"{t.value:<7}{'delta (proposed - baseline)':<30}{ab.rmse_delta(t):8.2f}"
                         f"   ({100 * ab.rmse_reduction(t):.1f} % lower RMSE)")
    return "\n".join(lines) + "\n"


def write_outputs(result: PipelineResult, cfg: PipelineConfig):
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    labels = np.where(result.train_mask, "train", "test")
    write_beats(out / "beats.csv", result.beats, labels)

    test = [b for b, m in zip(result.beats, result.train_mask) if not m]
    preds = result.predictions[result.primary_scope]
    with (out / "predictions.csv").open("w") as fh:
        fh.write("subject,beat_time,sbp_est,sbp_ref,dbp_est,dbp_ref\n")
        for i, b in enumerate(test):
            fh.write(",".join([b.subject, repr(b.beat_time), repr(float(preds[Target.SBP][i])),
                               repr(b.sbp_ref), repr(float(preds[Target.DBP][i])), repr(b.dbp_ref)]) + "\n")

    (out / "report.txt").write_text(render_report(result, cfg))
    (out / "report.kv").write_text("".join(f"{k}={v}\n" for k, v in report_pairs(result, cfg)))

    save_model(result.models["pooled"][Target.SBP], out / "model_sbp.bin")
    save_model(result.models["pooled"][Target.DBP], out / "model_dbp.bin")
    per_dir = out / "models"
    per_dir.mkdir(exist_ok=True)
    for t in Target:
        for subject, model in result.models["per-subject"][t].items():
            save_model(model, per_dir / f"{subject}_{t.value.lower()}.bin")
