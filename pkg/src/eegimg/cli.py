"""Command-line pipeline: synth, ingest, encode, features, split, train, eval,
and the chained `pipeline` command.

Stages are file-mediated: each writes its artifacts plus a stage manifest
carrying provenance (config hash, seed, tool version). Exit codes: 0 ok,
2 configuration problems, 3 data errors, 4 I/O errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import multiprocessing
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .classify import (EvalReport, SoftmaxConfig, evaluate, knn_fit, knn_predict,
                       save_model, softmax_fit, softmax_predict, softmax_proba,
                       svm_fit, svm_predict)
from .encoding import (EncodeConfig, EncodedTensor, encode_trial, read_tensor,
                       replicate_channels, resize_bilinear, stack_subjects,
                       write_png, write_tensor)
from .errors import ConfigError, DataError
from .features import (FeatureConfig, FeatureMatrix, export_features,
                       extract_tensor, import_features)
from .fusion import (apply_scaler, average_subjects, concat_features, fit_scaler,
                     ridge_fit, ridge_predict, vstack_features)
from .splitting import (SPLIT_NAMES, SplitAssignment, apply_split, load_assignment,
                        save_assignment, stratified_group_split)
from .trials import (SyntheticSpec, TrialSet, crop_window, generate_synthetic,
                     ingest, write_trialset, zscore_channels)

LAYOUT_TRIAL = "trial"
LAYOUT_STACK = "stimulus_stack"
FUSION_STRATEGIES = ("none", "concat", "vstack", "regression")
CLASSIFIER_KINDS = ("knn", "softmax", "svm")


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass
class PipelineConfig:
    """Resolved run configuration (config file merged with CLI overrides)."""

    manifest: str | None = None
    out_dir: str = "run_out"
    seed: int = 0
    jobs: int = 1
    crop: tuple[int, int] | None = None
    zscore: bool = True
    layout: str = LAYOUT_TRIAL
    write_pngs: bool = False
    encode: EncodeConfig = field(default_factory=lambda: EncodeConfig(replicate_to=1))
    features: FeatureConfig = field(default_factory=FeatureConfig)
    fusion_strategy: str = "none"
    image_features: str | None = None
    ridge_lambda: float = 1.0
    scale: bool = True
    classifier: str = "softmax"
    knn_k: int = 5
    softmax: SoftmaxConfig = field(default_factory=SoftmaxConfig)
    svm_c: float = 1.0
    svm_gamma: float | None = None
    svm_tol: float = 1e-3
    svm_max_passes: int = 20
    split_ratios: tuple[float, float, float] = (0.7, 0.15, 0.15)

    def to_dict(self) -> dict:
        # jobs is deliberately absent: parallelism never changes results, so
        # it must not perturb the config hash or the report echo
        return {
            "manifest": self.manifest,
            "out_dir": self.out_dir,
            "seed": self.seed,
            "crop": list(self.crop) if self.crop else None,
            "zscore": self.zscore,
            "encode": {
                "layout": self.layout,
                "stretch_factor": self.encode.stretch_factor,
                "normalization_scope": self.encode.normalization_scope,
                "replicate_to": self.encode.replicate_to,
                "resize_to": list(self.encode.resize_to) if self.encode.resize_to else None,
                "write_pngs": self.write_pngs,
            },
            "features": {
                "glcm_distance": self.features.glcm_distance,
                "glcm_levels": self.features.glcm_levels,
                "glcm_angles": list(self.features.glcm_angles),
                "include_glcm": self.features.include_glcm,
                "include_hu": self.features.include_hu,
                "include_lbp": self.features.include_lbp,
            },
            "fusion": {
                "strategy": self.fusion_strategy,
                "image_features": self.image_features,
                "ridge_lambda": self.ridge_lambda,
                "scale": self.scale,
            },
            "classifier": {
                "kind": self.classifier,
                "k": self.knn_k,
                "learning_rate": self.softmax.learning_rate,
                "epochs": self.softmax.epochs,
                "l2": self.softmax.l2,
                "tol": self.softmax.tol,
                "svm_c": self.svm_c,
                "svm_gamma": self.svm_gamma,
                "svm_tol": self.svm_tol,
                "svm_max_passes": self.svm_max_passes,
            },
            "split": {"ratios": list(self.split_ratios), "seed": self.seed},
        }

    def hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def _build_config(doc: dict, args: argparse.Namespace) -> PipelineConfig:
    """Merge a config document with CLI overrides into a PipelineConfig."""
    cfg = PipelineConfig()
    try:
        cfg.manifest = doc.get("manifest", cfg.manifest)
        cfg.out_dir = doc.get("out_dir", cfg.out_dir)
        cfg.seed = int(doc.get("seed", cfg.seed))
        cfg.jobs = int(doc.get("jobs", cfg.jobs))
        if doc.get("crop") is not None:
            start, end = doc["crop"]
            cfg.crop = (int(start), int(end))
        cfg.zscore = bool(doc.get("zscore", cfg.zscore))
        enc = doc.get("encode", {})
        cfg.layout = enc.get("layout", cfg.layout)
        if cfg.layout not in (LAYOUT_TRIAL, LAYOUT_STACK):
            raise ConfigError(f"unknown encode layout {cfg.layout!r}")
        cfg.write_pngs = bool(enc.get("write_pngs", cfg.write_pngs))
        resize = enc.get("resize_to")
        cfg.encode = EncodeConfig(
            stretch_factor=int(enc.get("stretch_factor", 4)),
            normalization_scope=enc.get("normalization_scope", "per_trial"),
            replicate_to=int(enc.get("replicate_to", 1)),
            resize_to=(int(resize[0]), int(resize[1])) if resize else None,
        )
        feat = doc.get("features", {})
        cfg.features = FeatureConfig(
            glcm_distance=int(feat.get("glcm_distance", 1)),
            glcm_levels=int(feat.get("glcm_levels", 32)),
            glcm_angles=tuple(feat.get("glcm_angles", (0, 45, 90, 135))),
            include_glcm=bool(feat.get("include_glcm", True)),
            include_hu=bool(feat.get("include_hu", True)),
            include_lbp=bool(feat.get("include_lbp", True)),
        )
        fus = doc.get("fusion", {})
        cfg.fusion_strategy = fus.get("strategy", cfg.fusion_strategy)
        if cfg.fusion_strategy not in FUSION_STRATEGIES:
            raise ConfigError(f"unknown fusion strategy {cfg.fusion_strategy!r}")
        cfg.image_features = fus.get("image_features", cfg.image_features)
        cfg.ridge_lambda = float(fus.get("ridge_lambda", cfg.ridge_lambda))
        cfg.scale = bool(fus.get("scale", cfg.scale))
        clf = doc.get("classifier", {})
        cfg.classifier = clf.get("kind", cfg.classifier)
        if cfg.classifier not in CLASSIFIER_KINDS:
            raise ConfigError(f"unknown classifier kind {cfg.classifier!r}")
        cfg.knn_k = int(clf.get("k", cfg.knn_k))
        cfg.softmax = SoftmaxConfig(
            learning_rate=float(clf.get("learning_rate", 1e-2)),
            epochs=int(clf.get("epochs", 500)),
            l2=float(clf.get("l2", 1e-4)),
            tol=float(clf.get("tol", 1e-6)),
        )
        cfg.svm_c = float(clf.get("svm_c", cfg.svm_c))
        gamma = clf.get("svm_gamma")
        cfg.svm_gamma = float(gamma) if gamma is not None else None
        cfg.svm_tol = float(clf.get("svm_tol", cfg.svm_tol))
        cfg.svm_max_passes = int(clf.get("svm_max_passes", cfg.svm_max_passes))
        split = doc.get("split", {})
        ratios = split.get("ratios", list(cfg.split_ratios))
        cfg.split_ratios = (float(ratios[0]), float(ratios[1]), float(ratios[2]))
        if "seed" in split:
            cfg.seed = int(split["seed"])
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad config value: {exc}") from exc
    # CLI flags override the file
    if getattr(args, "manifest", None):
        cfg.manifest = args.manifest
    if getattr(args, "out", None):
        cfg.out_dir = args.out
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "jobs", None) is not None:
        if args.jobs < 1:
            raise ConfigError(f"--jobs must be >= 1, got {args.jobs}")
        cfg.jobs = args.jobs
    if getattr(args, "png", False):
        cfg.write_pngs = True
    return cfg


def _load_config(args: argparse.Namespace) -> PipelineConfig:
    doc = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path) as f:
                doc = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
    return _build_config(doc, args)


# ---------------------------------------------------------------------------
# Stage plumbing
# ---------------------------------------------------------------------------

def _write_json(path, doc) -> None:
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def _stage_manifest(out_dir: Path, stage: str, cfg: PipelineConfig, payload: dict) -> None:
    doc = {
        "stage": stage,
        "tool_version": __version__,
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        **payload,
    }
    _write_json(out_dir / f"{stage}_manifest.json", doc)


_POOL_STATE: dict = {}


def _encode_worker(task):
    """Runs in a forked worker; reads shared state set before the fork."""
    index, trial_indices = task
    cfg: PipelineConfig = _POOL_STATE["cfg"]
    trials = [_POOL_STATE["trials"][i] for i in trial_indices]
    tensor = _encode_group(trials, cfg)
    rel = f"enc_{index:05d}.eegi"
    write_tensor(tensor, _POOL_STATE["enc_dir"] / rel)
    if cfg.write_pngs:
        _write_pngs(tensor, _POOL_STATE["enc_dir"], f"enc_{index:05d}")
    first = trials[0]
    return {
        "file": rel,
        "stimulus_id": first.stimulus_id,
        "class_label": first.class_label,
        "subject_ids": sorted(t.subject_id for t in trials),
        "rows": tensor.rows,
        "cols": tensor.cols,
        "channels": tensor.channels,
    }


def _encode_group(trials, cfg: PipelineConfig) -> EncodedTensor:
    if len(trials) == 1 and cfg.layout == LAYOUT_TRIAL:
        tensor = encode_trial(trials[0], cfg.encode)
        if cfg.encode.replicate_to > 1:
            tensor = replicate_channels(tensor, cfg.encode.replicate_to)
    else:
        tensor = stack_subjects(trials, cfg.encode)
    if cfg.encode.resize_to is not None:
        tensor = resize_bilinear(tensor, *cfg.encode.resize_to)
    return tensor


def _write_pngs(tensor: EncodedTensor, enc_dir: Path, stem: str) -> None:
    if tensor.channels == 1:
        write_png(tensor, enc_dir / f"{stem}.png")
    else:
        for c in range(tensor.channels):
            plane = EncodedTensor(pixels=tensor.pixels[:, :, c:c + 1])
            write_png(plane, enc_dir / f"{stem}_c{c}.png")


def _features_worker(task):
    index, rel = task
    cfg: PipelineConfig = _POOL_STATE["cfg"]
    tensor = read_tensor(_POOL_STATE["enc_dir"] / rel)
    fv = extract_tensor(tensor, cfg.features)
    return index, fv.values, fv.names


def _map_tasks(worker, tasks, state: dict, jobs: int):
    """Run tasks serially or over a fork pool sharing `state`."""
    global _POOL_STATE
    _POOL_STATE = state
    try:
        if jobs <= 1 or len(tasks) <= 1:
            return [worker(t) for t in tasks]
        ctx = multiprocessing.get_context("fork")
        chunk = max(1, len(tasks) // (jobs * 4))
        with ctx.Pool(processes=jobs) as pool:
            return pool.map(worker, tasks, chunksize=chunk)
    finally:
        _POOL_STATE = {}


def _preprocess(ts: TrialSet, cfg: PipelineConfig) -> TrialSet:
    trials = list(ts.trials)
    if cfg.crop is not None:
        trials = [crop_window(t, cfg.crop[0], cfg.crop[1]) for t in trials]
    if cfg.zscore:
        trials = [zscore_channels(t) for t in trials]
    if cfg.crop is None and not cfg.zscore:
        return ts
    return TrialSet(trials=tuple(trials), band_tag=ts.band_tag,
                    class_names=ts.class_names, n_subjects=ts.n_subjects)


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------

def stage_ingest(cfg: PipelineConfig, out_dir: Path) -> TrialSet:
    if not cfg.manifest:
        raise ConfigError("no trial manifest configured (set manifest or --manifest)")
    ts = ingest(cfg.manifest)
    counts = np.bincount([t.class_label for t in ts.trials],
                         minlength=len(ts.class_names))
    _stage_manifest(out_dir, "ingest", cfg, {
        "manifest": str(cfg.manifest),
        "n_trials": len(ts),
        "n_channels": ts.n_channels,
        "n_samples": ts.n_samples,
        "n_classes": len(ts.class_names),
        "n_subjects": ts.n_subjects,
        "band_tag": ts.band_tag,
        "trials_per_class": counts.tolist(),
    })
    return ts


def stage_encode(cfg: PipelineConfig, out_dir: Path, ts: TrialSet) -> list[dict]:
    enc_dir = out_dir / "encoded"
    enc_dir.mkdir(parents=True, exist_ok=True)
    if cfg.layout == LAYOUT_TRIAL:
        tasks = [(i, (i,)) for i in range(len(ts))]
    else:
        groups: dict[int, list[int]] = {}
        order: list[int] = []
        for i, t in enumerate(ts.trials):
            if t.stimulus_id not in groups:
                groups[t.stimulus_id] = []
                order.append(t.stimulus_id)
            groups[t.stimulus_id].append(i)
        tasks = [(k, tuple(groups[sid])) for k, sid in enumerate(order)]
    state = {"cfg": cfg, "trials": ts.trials, "enc_dir": enc_dir}
    entries = _map_tasks(_encode_worker, tasks, state, cfg.jobs)
    _stage_manifest(out_dir, "encode", cfg, {
        "layout": cfg.layout,
        "n_tensors": len(entries),
        "tensors": entries,
    })
    return entries


def stage_features(cfg: PipelineConfig, out_dir: Path, entries: list[dict]) -> FeatureMatrix:
    enc_dir = out_dir / "encoded"
    tasks = [(i, e["file"]) for i, e in enumerate(entries)]
    state = {"cfg": cfg, "enc_dir": enc_dir}
    results = _map_tasks(_features_worker, tasks, state, cfg.jobs)
    results.sort(key=lambda r: r[0])
    rows = np.vstack([r[1] for r in results])
    names = results[0][2]
    matrix = FeatureMatrix(
        rows=rows,
        sample_ids=np.array([e["stimulus_id"] for e in entries], dtype=np.int64),
        labels=np.array([e["class_label"] for e in entries], dtype=np.int64),
        feature_names=names,
    )
    path = out_dir / "features.eegf"
    export_features(matrix, path)
    _stage_manifest(out_dir, "features", cfg, {
        "file": path.name,
        "n_samples": matrix.n_samples,
        "n_features": matrix.n_features,
    })
    return matrix


def stage_split(cfg: PipelineConfig, out_dir: Path, ts: TrialSet) -> SplitAssignment:
    assignment = stratified_group_split(ts, cfg.split_ratios, cfg.seed)
    save_assignment(assignment, out_dir / "split.json")
    sizes = {name: len(assignment.subset_ids(name)) for name in SPLIT_NAMES}
    _stage_manifest(out_dir, "split", cfg, {
        "file": "split.json",
        "ratios": list(cfg.split_ratios),
        "stimuli_per_split": sizes,
    })
    return assignment


def _align_to(reference_ids: np.ndarray, m: FeatureMatrix) -> FeatureMatrix:
    """Reorder m's rows to follow reference_ids (each id once)."""
    lookup: dict[int, int] = {}
    for i, sid in enumerate(m.sample_ids):
        sid = int(sid)
        if sid in lookup:
            raise DataError(f"sample id {sid} appears twice in the imported features")
        lookup[sid] = i
    try:
        index = np.array([lookup[int(sid)] for sid in reference_ids], dtype=np.intp)
    except KeyError as exc:
        raise DataError(f"imported features are missing sample id {exc}") from None
    return m.subset(index)


def _fit_classifier(cfg: PipelineConfig, train: FeatureMatrix):
    if cfg.classifier == "knn":
        return knn_fit(train, cfg.knn_k)
    if cfg.classifier == "softmax":
        return softmax_fit(train, cfg.softmax)
    return svm_fit(train, box_c=cfg.svm_c, gamma=cfg.svm_gamma,
                   tol=cfg.svm_tol, max_passes=cfg.svm_max_passes)


def _predict(cfg: PipelineConfig, model, m: FeatureMatrix) -> np.ndarray:
    if cfg.classifier == "knn":
        return knn_predict(model, m)
    if cfg.classifier == "softmax":
        return softmax_predict(model, m)
    return svm_predict(model, m)


class FusionRun:
    """Per-split feature matrices after the configured fusion strategy."""

    def __init__(self, train: FeatureMatrix, splits: dict, model,
                 n_classes: int, extras: dict | None = None):
        self.train = train
        self.splits = splits  # name -> FeatureMatrix or (FeatureMatrix pair)
        self.model = model
        self.n_classes = n_classes
        self.extras = extras or {}


def _prepare_fusion(cfg: PipelineConfig, eeg: FeatureMatrix,
                    assignment: SplitAssignment, ts: TrialSet) -> FusionRun:
    """Apply fusion + scaling and fit the classifier on the train split."""
    strategy = cfg.fusion_strategy
    need_image = strategy in ("concat", "vstack", "regression")
    image = None
    if need_image:
        if not cfg.image_features:
            raise ConfigError(
                f"fusion strategy {strategy!r} needs fusion.image_features"
            )
        image = import_features(cfg.image_features)

    if cfg.layout == LAYOUT_TRIAL and strategy in ("concat", "regression"):
        eeg = average_subjects(eeg, ts.n_subjects)
    if need_image:
        image = _align_to(np.unique(eeg.sample_ids) if strategy == "vstack"
                          else eeg.sample_ids, image)

    eeg_splits = dict(zip(SPLIT_NAMES, apply_split(assignment, eeg)))
    img_splits = (dict(zip(SPLIT_NAMES, apply_split(assignment, image)))
                  if image is not None else None)

    if cfg.scale:
        scaler = fit_scaler(eeg_splits["train"])
        eeg_splits = {k: apply_scaler(scaler, v) for k, v in eeg_splits.items()}
        if img_splits is not None:
            img_scaler = fit_scaler(img_splits["train"])
            img_splits = {k: apply_scaler(img_scaler, v) for k, v in img_splits.items()}

    n_classes = len(ts.class_names)
    if strategy == "none":
        model = _fit_classifier(cfg, eeg_splits["train"])
        return FusionRun(eeg_splits["train"], eeg_splits, model, n_classes)

    if strategy == "concat":
        fused = {k: concat_features(eeg_splits[k], img_splits[k]) for k in SPLIT_NAMES}
        model = _fit_classifier(cfg, fused["train"])
        return FusionRun(fused["train"], fused, model, n_classes)

    if strategy == "vstack":
        train = vstack_features(eeg_splits["train"], img_splits["train"],
                                tag_a="eeg", tag_b="image")
        model = _fit_classifier(cfg, train)
        pairs = {k: (eeg_splits[k], img_splits[k]) for k in SPLIT_NAMES}
        return FusionRun(train, pairs, model, n_classes)

    # regression: map EEG features onto image features, classify image space
    ridge = ridge_fit(eeg_splits["train"], img_splits["train"], cfg.ridge_lambda)
    model = _fit_classifier(cfg, img_splits["train"])
    splits = {"train": img_splits["train"]}
    for name in ("validation", "test"):
        splits[name] = (ridge_predict(ridge, eeg_splits[name])
                        if eeg_splits[name].n_samples else eeg_splits[name])
    return FusionRun(img_splits["train"], splits, model, n_classes,
                     extras={"ridge": ridge})


def _evaluate_split(cfg: PipelineConfig, run: FusionRun, name: str) -> EvalReport | None:
    part = run.splits[name]
    if cfg.fusion_strategy == "vstack":
        return _evaluate_vstack(cfg, run, part)
    if part is None or part.n_samples == 0:
        return None
    pred = _predict(cfg, run.model, part)
    return evaluate(pred, part.labels, run.n_classes)


def _evaluate_vstack(cfg: PipelineConfig, run: FusionRun, part) -> EvalReport | None:
    """Predict every modality row, then pool per sample id.

    Softmax pools by averaging class probabilities; other classifiers use a
    majority vote with ties going to the lowest label.
    """
    eeg_m, img_m = part
    if eeg_m.n_samples == 0:
        return None
    order: list[int] = []
    sample_label: dict[int, int] = {}
    for sid, lab in zip(eeg_m.sample_ids.tolist(), eeg_m.labels.tolist()):
        if sid not in sample_label:
            order.append(sid)
            sample_label[sid] = lab
    all_ids = np.concatenate([eeg_m.sample_ids, img_m.sample_ids])
    preds = np.empty(len(order), dtype=np.int64)
    trues = np.array([sample_label[sid] for sid in order], dtype=np.int64)
    if cfg.classifier == "softmax":
        proba_rows = np.vstack([softmax_proba(run.model, eeg_m),
                                softmax_proba(run.model, img_m)])
        for i, sid in enumerate(order):
            preds[i] = int(np.argmax(proba_rows[all_ids == sid].mean(axis=0)))
    else:
        pred_rows = np.concatenate([_predict(cfg, run.model, eeg_m),
                                    _predict(cfg, run.model, img_m)])
        for i, sid in enumerate(order):
            votes = np.bincount(pred_rows[all_ids == sid], minlength=run.n_classes)
            preds[i] = int(np.argmax(votes))
    return evaluate(preds, trues, run.n_classes)


# ---------------------------------------------------------------------------
# Run report
# ---------------------------------------------------------------------------

@dataclass
class RunReport:
    """Everything one pipeline run produced, including per-stage timings.

    The JSON written to report.json excludes timings so reruns of the same
    config produce byte-identical reports; timings land in timings.json.
    """

    config: dict
    config_hash: str
    seed: int
    splits: dict
    summary: dict
    timings: dict

    def to_report_dict(self) -> dict:
        return {
            "tool": "eegimg",
            "tool_version": __version__,
            "config": self.config,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "summary": self.summary,
            "splits": {
                name: (report.to_dict() if report is not None else None)
                for name, report in self.splits.items()
            },
        }


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    spec = SyntheticSpec(
        n_classes=args.classes,
        n_stimuli_per_class=args.stimuli,
        n_subjects=args.subjects,
        n_channels=args.channels,
        n_samples=args.samples,
        class_separation=args.separation,
        noise_std=args.noise,
        seed=args.seed if args.seed is not None else 0,
    )
    out = Path(args.out or "synthetic")
    manifest = write_trialset(generate_synthetic(spec), out)
    print(f"wrote {spec.n_classes * spec.n_stimuli_per_class * spec.n_subjects} "
          f"trials -> {manifest}")
    return 0


def cmd_ingest(args) -> int:
    cfg = _load_config(args)
    _require_manifest(cfg)
    out_dir = _ensure_out(cfg)
    ts = stage_ingest(cfg, out_dir)
    print(f"ingested {len(ts)} trials "
          f"({ts.n_channels} channels x {ts.n_samples} samples, "
          f"{len(ts.class_names)} classes)")
    return 0


def cmd_encode(args) -> int:
    cfg = _load_config(args)
    _require_manifest(cfg)
    out_dir = _ensure_out(cfg)
    ts = _preprocess(stage_ingest(cfg, out_dir), cfg)
    entries = stage_encode(cfg, out_dir, ts)
    first = entries[0]
    print(f"encoded {len(entries)} tensors "
          f"({first['rows']}x{first['cols']}x{first['channels']}) -> "
          f"{out_dir / 'encoded'}")
    return 0


def cmd_features(args) -> int:
    cfg = _load_config(args)
    out_dir = _ensure_out(cfg)
    entries = _read_encode_manifest(out_dir)
    matrix = stage_features(cfg, out_dir, entries)
    print(f"extracted {matrix.n_samples} x {matrix.n_features} features -> "
          f"{out_dir / 'features.eegf'}")
    return 0


def cmd_split(args) -> int:
    cfg = _load_config(args)
    _require_manifest(cfg)
    out_dir = _ensure_out(cfg)
    ts = stage_ingest(cfg, out_dir)
    assignment = stage_split(cfg, out_dir, ts)
    sizes = {name: len(assignment.subset_ids(name)) for name in SPLIT_NAMES}
    print(f"split stimuli {sizes} -> {out_dir / 'split.json'}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args)
    _require_manifest(cfg)
    out_dir = _ensure_out(cfg)
    ts = stage_ingest(cfg, out_dir)
    eeg = import_features(out_dir / "features.eegf")
    assignment = load_assignment(out_dir / "split.json")
    run = _prepare_fusion(cfg, eeg, assignment, ts)
    save_model(run.model, out_dir / "model.json")
    report = _evaluate_split(cfg, run, "train")
    _stage_manifest(out_dir, "train", cfg, {
        "model": "model.json",
        "classifier": cfg.classifier,
        "fusion": cfg.fusion_strategy,
        "train_accuracy": None if report is None else report.accuracy,
    })
    print(f"trained {cfg.classifier} (fusion={cfg.fusion_strategy}); "
          f"train accuracy {report.accuracy:.4f}" if report else "trained")
    return 0


def cmd_eval(args) -> int:
    """Evaluate on every split.

    Fusion transforms (scaler, ridge map) and the classifier are re-derived
    from the stage artifacts; fits are deterministic, so this reproduces the
    model saved by `train` exactly. model.json is the exportable artifact.
    """
    cfg = _load_config(args)
    _require_manifest(cfg)
    out_dir = _ensure_out(cfg)
    ts = stage_ingest(cfg, out_dir)
    eeg = import_features(out_dir / "features.eegf")
    assignment = load_assignment(out_dir / "split.json")
    run = _prepare_fusion(cfg, eeg, assignment, ts)
    reports = {name: _evaluate_split(cfg, run, name) for name in SPLIT_NAMES}
    doc = {name: (r.to_dict() if r else None) for name, r in reports.items()}
    _write_json(out_dir / "eval.json", doc)
    for name, r in reports.items():
        if r is not None:
            print(f"{name}: accuracy {r.accuracy:.4f}")
    return 0


def cmd_pipeline(args) -> int:
    cfg = _load_config(args)
    _require_manifest(cfg)
    out_dir = _ensure_out(cfg)
    timings: dict[str, float] = {}

    def timed(stage, fn, *a):
        t0 = time.perf_counter()
        result = fn(*a)
        timings[stage] = time.perf_counter() - t0
        return result

    ts = timed("ingest", stage_ingest, cfg, out_dir)
    ts = timed("preprocess", _preprocess, ts, cfg)
    entries = timed("encode", stage_encode, cfg, out_dir, ts)
    eeg = timed("features", stage_features, cfg, out_dir, entries)
    assignment = timed("split", stage_split, cfg, out_dir, ts)
    run = timed("train", _prepare_fusion, cfg, eeg, assignment, ts)
    save_model(run.model, out_dir / "model.json")
    t0 = time.perf_counter()
    reports = {name: _evaluate_split(cfg, run, name) for name in SPLIT_NAMES}
    timings["evaluate"] = time.perf_counter() - t0

    report = RunReport(
        config=cfg.to_dict(),
        config_hash=cfg.hash(),
        seed=cfg.seed,
        splits=reports,
        summary={
            "n_trials": len(ts),
            "n_tensors": len(entries),
            "n_features": eeg.n_features,
            "classifier": cfg.classifier,
            "fusion": cfg.fusion_strategy,
        },
        timings=timings,
    )
    _write_json(out_dir / "report.json", report.to_report_dict())
    _write_json(out_dir / "timings.json", {"stage_seconds": timings})
    for name, r in reports.items():
        if r is not None:
            print(f"{name}: accuracy {r.accuracy:.4f}")
    print(f"report -> {out_dir / 'report.json'}")
    return 0


def _require_manifest(cfg: PipelineConfig) -> None:
    if not cfg.manifest:
        raise ConfigError("no trial manifest configured (set manifest or --manifest)")
    if not Path(cfg.manifest).exists():
        raise ConfigError(f"trial manifest not found: {cfg.manifest}")


def _ensure_out(cfg: PipelineConfig) -> Path:
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def _read_encode_manifest(out_dir: Path) -> list[dict]:
    path = out_dir / "encode_manifest.json"
    if not path.exists():
        raise ConfigError(f"encode stage has not run yet (missing {path})")
    with open(path) as f:
        return json.load(f)["tensors"]


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--manifest", help="trial manifest path (overrides config)")
    p.add_argument("--out", help="output directory (overrides config)")
    p.add_argument("--seed", type=int, help="split/run seed (overrides config)")
    p.add_argument("--jobs", type=int, help="parallel workers for encode/features")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eegimg",
        description="EEG-to-image encoding, texture features, fusion, classification",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic trial set")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--stimuli", type=int, required=True, help="stimuli per class")
    p.add_argument("--subjects", type=int, required=True)
    p.add_argument("--channels", type=int, default=8)
    p.add_argument("--samples", type=int, default=32)
    p.add_argument("--separation", type=float, default=1.0)
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_synth)

    for name, fn, help_text in (
        ("ingest", cmd_ingest, "validate a trial manifest"),
        ("encode", cmd_encode, "encode trials to image tensors"),
        ("features", cmd_features, "extract texture features from encoded tensors"),
        ("split", cmd_split, "compute the stratified stimulus-grouped split"),
        ("train", cmd_train, "fuse features and fit the configured classifier"),
        ("eval", cmd_eval, "evaluate the configured classifier on every split"),
        ("pipeline", cmd_pipeline, "run every stage and write report.json"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name == "encode":
            p.add_argument("--png", action="store_true",
                           help="also write grayscale PNGs per tensor channel")
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
