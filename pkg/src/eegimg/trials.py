"""Trial data model, on-disk container format, cleaning and preprocessing.

A Trial is one multi-channel recording (channels x samples) plus metadata.
Trials are stored on disk as "EEGT v1" blobs referenced by a JSON manifest;
see `write_trialset` / `ingest` for the round-trip.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DataError, FormatError

BLOB_MAGIC = b"EEGT"
BLOB_VERSION = 1
_HEADER = struct.Struct("<4sHIIfHIH")  # magic, version, nch, ns, rate, subj, stim, label


@dataclass(frozen=True, eq=False)
class Trial:
    """One recording: data is (n_channels, n_samples), row per electrode.

    Values are microvolts before normalization, dimensionless after.
    """

    subject_id: int
    stimulus_id: int
    class_label: int
    data: np.ndarray
    sample_rate: float = 1000.0

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise DataError(f"trial data must be 2D (channels x samples), got shape {arr.shape}")
        object.__setattr__(self, "data", arr)
        if self.sample_rate <= 0:
            raise DataError(f"sample_rate must be positive, got {self.sample_rate}")

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class TrialSet:
    """Ordered, immutable collection of trials with shared geometry.

    band_tag records the bandpass variant the recordings came from
    (provenance only; no filtering happens here).
    """

    trials: tuple[Trial, ...]
    band_tag: str
    class_names: tuple[str, ...]
    n_subjects: int

    def __post_init__(self):
        object.__setattr__(self, "trials", tuple(self.trials))
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if not self.trials:
            raise DataError("TrialSet must contain at least one trial")
        nch, ns = self.trials[0].data.shape
        seen: set[tuple[int, int]] = set()
        for i, t in enumerate(self.trials):
            if t.data.shape != (nch, ns):
                raise DataError(
                    f"trial {i} has shape {t.data.shape}, expected {(nch, ns)}"
                )
            if not 0 <= t.class_label < len(self.class_names):
                raise DataError(
                    f"trial {i} has class_label {t.class_label}, "
                    f"but only {len(self.class_names)} class names are defined"
                )
            key = (t.subject_id, t.stimulus_id)
            if key in seen:
                raise DataError(f"duplicate (subject_id, stimulus_id) pair {key}")
            seen.add(key)

    def __len__(self) -> int:
        return len(self.trials)

    def __iter__(self):
        return iter(self.trials)

    def __getitem__(self, i: int) -> Trial:
        return self.trials[i]

    @property
    def n_channels(self) -> int:
        return self.trials[0].n_channels

    @property
    def n_samples(self) -> int:
        return self.trials[0].n_samples


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters for desk-scale synthetic trial generation."""

    n_classes: int
    n_stimuli_per_class: int
    n_subjects: int
    n_channels: int = 8
    n_samples: int = 32
    class_separation: float = 1.0
    noise_std: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for name in ("n_classes", "n_stimuli_per_class", "n_subjects", "n_channels", "n_samples"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.class_separation < 0:
            raise ConfigError(f"class_separation must be >= 0, got {self.class_separation}")
        if self.noise_std <= 0:
            raise ConfigError(f"noise_std must be > 0, got {self.noise_std}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must fit in 64 bits, got {self.seed}")


# ---------------------------------------------------------------------------
# Container format
# ---------------------------------------------------------------------------

def write_blob(trial: Trial, path) -> None:
    """Write one trial as an EEGT v1 blob (little-endian f32 payload)."""
    header = _HEADER.pack(
        BLOB_MAGIC,
        BLOB_VERSION,
        trial.n_channels,
        trial.n_samples,
        trial.sample_rate,
        trial.subject_id,
        trial.stimulus_id,
        trial.class_label,
    )
    with open(path, "wb") as f:
        f.write(header)
        f.write(trial.data.astype("<f4").tobytes())


def read_blob(path) -> Trial:
    """Read one EEGT v1 blob back into a Trial."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, nch, ns, rate, subj, stim, label = _HEADER.unpack_from(raw)
    if magic != BLOB_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {BLOB_MAGIC!r}")
    if version != BLOB_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + 4 * nch * ns
    if len(raw) != expected:
        raise FormatError(f"{path}: payload is {len(raw)} bytes, expected {expected}")
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(nch, ns)
    return Trial(
        subject_id=subj,
        stimulus_id=stim,
        class_label=label,
        data=data.astype(np.float64),
        sample_rate=float(rate),
    )


def write_trialset(s: TrialSet, out_dir, manifest_name: str = "manifest.json"):
    """Write all trials as blobs plus a manifest; returns the manifest path."""
    from pathlib import Path

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    blob_names = []
    for i, t in enumerate(s.trials):
        name = f"trial_{i:05d}.eegt"
        write_blob(t, out_dir / name)
        blob_names.append(name)
    manifest = {
        "band_tag": s.band_tag,
        "class_names": list(s.class_names),
        "n_subjects": s.n_subjects,
        "n_channels": s.n_channels,
        "n_samples": s.n_samples,
        "blobs": blob_names,
    }
    manifest_path = out_dir / manifest_name
    with open(manifest_path, "w") as f:
        json.dump(manifest, f, indent=2)
    return manifest_path


def ingest(manifest_path) -> TrialSet:
    """Load and validate a TrialSet from a manifest.

    Trial order follows manifest order. Blob paths are resolved relative to
    the manifest's directory. Raises FormatError / DataError on bad blobs,
    dimension mismatches, or non-finite samples.
    """
    from pathlib import Path

    manifest_path = Path(manifest_path)
    try:
        with open(manifest_path) as f:
            manifest = json.load(f)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{manifest_path}: manifest is not valid JSON: {exc}") from exc
    for key in ("band_tag", "class_names", "n_subjects", "blobs"):
        if key not in manifest:
            raise FormatError(f"{manifest_path}: manifest missing key {key!r}")
    base = manifest_path.parent
    want_nch = manifest.get("n_channels")
    want_ns = manifest.get("n_samples")
    trials = []
    for i, name in enumerate(manifest["blobs"]):
        path = base / name
        if not path.exists():
            raise FormatError(f"trial {i}: blob file not found: {path}")
        t = read_blob(path)
        if want_nch is None:
            want_nch, want_ns = t.n_channels, t.n_samples
        if (t.n_channels, t.n_samples) != (want_nch, want_ns):
            raise DataError(
                f"trial {i} ({path}): shape {(t.n_channels, t.n_samples)} "
                f"does not match manifest ({want_nch}, {want_ns})"
            )
        finite = np.isfinite(t.data)
        if not finite.all():
            ch = int(np.argwhere(~finite)[0][0])
            raise DataError(f"trial {i} ({path}): non-finite sample value in channel {ch}")
        trials.append(t)
    return TrialSet(
        trials=tuple(trials),
        band_tag=manifest["band_tag"],
        class_names=tuple(manifest["class_names"]),
        n_subjects=int(manifest["n_subjects"]),
    )


# ---------------------------------------------------------------------------
# Preprocessing
# ---------------------------------------------------------------------------

def crop_window(t: Trial, start: int, end: int) -> Trial:
    """Keep sample columns [start, end); metadata unchanged."""
    if not (0 <= start < end <= t.n_samples):
        raise DataError(
            f"invalid crop window [{start}, {end}) for {t.n_samples} samples"
        )
    return replace(t, data=t.data[:, start:end].copy())


def zscore_channels(t: Trial) -> Trial:
    """Standardize each channel to mean 0 and population std 1.

    Constant channels map to all-zero rows.
    """
    if t.n_samples < 2:
        raise DataError("zscore_channels needs at least 2 samples per channel")
    mean = t.data.mean(axis=1, keepdims=True)
    std = t.data.std(axis=1, keepdims=True)  # population (1/N)
    out = np.where(std > 0, (t.data - mean) / np.where(std > 0, std, 1.0), 0.0)
    return replace(t, data=out)


def drop_class(s: TrialSet, label: int) -> TrialSet:
    """Remove every trial of one class and re-index labels densely.

    Surviving labels keep their relative order: labels above the dropped one
    shift down by one. class_names shrinks accordingly.
    """
    if not 0 <= label < len(s.class_names):
        raise DataError(f"label {label} is not a valid class index")
    if not any(t.class_label == label for t in s.trials):
        raise DataError(f"label {label} is not present in the TrialSet")
    kept = []
    for t in s.trials:
        if t.class_label == label:
            continue
        new_label = t.class_label - 1 if t.class_label > label else t.class_label
        kept.append(replace(t, class_label=new_label))
    names = tuple(n for i, n in enumerate(s.class_names) if i != label)
    return TrialSet(trials=tuple(kept), band_tag=s.band_tag, class_names=names,
                    n_subjects=s.n_subjects)


def generate_synthetic(spec: SyntheticSpec) -> TrialSet:
    """Deterministic synthetic TrialSet for a given seed.

    Each class gets a random mean pattern scaled by class_separation; each
    trial adds Gaussian noise of std noise_std. All n_subjects trials of a
    stimulus share its stimulus_id. Values are quantized through float32 so
    the set round-trips bit-exactly through the EEGT container.
    """
    rng = np.random.default_rng(spec.seed)
    patterns = rng.standard_normal((spec.n_classes, spec.n_channels, spec.n_samples))
    trials = []
    for c in range(spec.n_classes):
        for j in range(spec.n_stimuli_per_class):
            stimulus = c * spec.n_stimuli_per_class + j
            for subject in range(1, spec.n_subjects + 1):
                noise = rng.standard_normal((spec.n_channels, spec.n_samples))
                data = spec.class_separation * patterns[c] + spec.noise_std * noise
                trials.append(Trial(
                    subject_id=subject,
                    stimulus_id=stimulus,
                    class_label=c,
                    data=data.astype(np.float32).astype(np.float64),
                ))
    names = tuple(f"class_{c:02d}" for c in range(spec.n_classes))
    return TrialSet(trials=tuple(trials), band_tag="synthetic", class_names=names,
                    n_subjects=spec.n_subjects)
