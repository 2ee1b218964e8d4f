"""Classical texture descriptors over encoded tensors, plus feature-matrix I/O.

GLCM statistics (Haralick's standard five), the seven Hu moment invariants,
and 8-neighbor local binary pattern histograms. Externally computed feature
matrices (e.g. deep features) enter through `import_features`, which accepts
the CSV layout `sample_id,label,f0,...` or the "EEGF v1" binary format.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass

import numpy as np

from .encoding import EncodedTensor
from .errors import ConfigError, DataError, FormatError
from .kernels import glcm_counts, lbp_codes

FEATURE_MAGIC = b"EEGF"
_FEATURE_HEADER = struct.Struct("<4sII")  # magic, n_rows, n_features

GLCM_ANGLES = (0, 45, 90, 135)
# forward pixel offset (drow, dcol) per angle, distance 1
_ANGLE_OFFSETS = {0: (0, 1), 45: (-1, 1), 90: (-1, 0), 135: (-1, -1)}

HARALICK_NAMES = ("contrast", "correlation", "energy", "homogeneity", "entropy")


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """Named feature values for one sample."""

    values: np.ndarray
    names: tuple[str, ...]

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "names", tuple(self.names))
        if vals.ndim != 1 or len(vals) != len(self.names):
            raise DataError(
                f"feature vector has {len(vals)} values but {len(self.names)} names"
            )
        if not np.isfinite(vals).all():
            raise DataError("feature vector contains non-finite values")

    def __len__(self) -> int:
        return len(self.values)


@dataclass(eq=False)
class FeatureMatrix:
    """n_samples x n_features matrix with per-row sample ids and labels.

    `modality` optionally tags each row's origin (used by vertical stacking).
    """

    rows: np.ndarray
    sample_ids: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...] = ()
    modality: tuple[str, ...] | None = None

    def __post_init__(self):
        self.rows = np.atleast_2d(np.asarray(self.rows, dtype=np.float64))
        self.sample_ids = np.asarray(self.sample_ids, dtype=np.int64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        n = self.rows.shape[0]
        if len(self.sample_ids) != n or len(self.labels) != n:
            raise DataError(
                f"row/id/label counts disagree: {n}/{len(self.sample_ids)}/{len(self.labels)}"
            )
        if not self.feature_names:
            self.feature_names = tuple(f"f{i}" for i in range(self.rows.shape[1]))
        else:
            self.feature_names = tuple(self.feature_names)
        if len(self.feature_names) != self.rows.shape[1]:
            raise DataError(
                f"{len(self.feature_names)} feature names for {self.rows.shape[1]} columns"
            )
        if self.modality is not None:
            self.modality = tuple(self.modality)
            if len(self.modality) != n:
                raise DataError("modality tags must match row count")
        if self.rows.size and not np.isfinite(self.rows).all():
            bad = int(np.argwhere(~np.isfinite(self.rows).all(axis=1))[0][0])
            raise DataError(f"non-finite feature value in row {bad}")

    @property
    def n_samples(self) -> int:
        return self.rows.shape[0]

    @property
    def n_features(self) -> int:
        return self.rows.shape[1]

    def subset(self, index: np.ndarray) -> "FeatureMatrix":
        """Row subset preserving order of `index`."""
        mod = None if self.modality is None else tuple(self.modality[i] for i in index)
        return FeatureMatrix(
            rows=self.rows[index],
            sample_ids=self.sample_ids[index],
            labels=self.labels[index],
            feature_names=self.feature_names,
            modality=mod,
        )


@dataclass(frozen=True, eq=False)
class Glcm:
    """Normalized symmetric gray-level co-occurrence matrix."""

    levels: int
    matrix: np.ndarray
    distance: int
    angle: int


@dataclass(frozen=True)
class FeatureConfig:
    """Which descriptor families to extract and their GLCM parameters."""

    glcm_distance: int = 1
    glcm_levels: int = 32
    glcm_angles: tuple[int, ...] = GLCM_ANGLES
    include_glcm: bool = True
    include_hu: bool = True
    include_lbp: bool = True

    def __post_init__(self):
        if self.glcm_distance < 1:
            raise ConfigError(f"glcm_distance must be >= 1, got {self.glcm_distance}")
        if not 2 <= self.glcm_levels <= 256:
            raise ConfigError(f"glcm_levels must be in [2, 256], got {self.glcm_levels}")
        for a in self.glcm_angles:
            if a not in _ANGLE_OFFSETS:
                raise ConfigError(f"unsupported GLCM angle {a}; choose from {GLCM_ANGLES}")


def _plane(img) -> np.ndarray:
    """Coerce an EncodedTensor or 2D array into a single uint8 plane."""
    if isinstance(img, EncodedTensor):
        if img.channels != 1:
            raise DataError(
                f"expected a single-channel tensor, got {img.channels} channels"
            )
        return img.plane(0)
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise DataError(f"expected a 2D image, got shape {arr.shape}")
    return np.ascontiguousarray(arr, dtype=np.uint8)


# ---------------------------------------------------------------------------
# GLCM + Haralick
# ---------------------------------------------------------------------------

def glcm(img, distance: int = 1, angle: int = 0, levels: int = 32) -> Glcm:
    """Symmetric normalized co-occurrence matrix for one offset.

    Pixels are binned as v * levels // 256; co-occurrences are counted for
    the angle's offset and its opposite, then normalized to unit mass.
    """
    plane = _plane(img)
    if plane.shape[0] < 2 and plane.shape[1] < 2:
        raise DataError(f"image {plane.shape} too small for GLCM")
    if angle not in _ANGLE_OFFSETS:
        raise ConfigError(f"unsupported GLCM angle {angle}; choose from {GLCM_ANGLES}")
    if not 2 <= levels <= 256:
        raise ConfigError(f"levels must be in [2, 256], got {levels}")
    if distance < 1:
        raise ConfigError(f"distance must be >= 1, got {distance}")
    binned = ((plane.astype(np.int32) * levels) >> 8).astype(np.uint8)
    dr, dc = _ANGLE_OFFSETS[angle]
    counts = glcm_counts(binned, dr * distance, dc * distance, levels)
    counts = counts + counts.T
    total = counts.sum()
    if total == 0:
        raise DataError(
            f"offset ({dr * distance}, {dc * distance}) reaches outside image {plane.shape}"
        )
    return Glcm(levels=levels, matrix=counts / total, distance=distance, angle=angle)


def haralick(g: Glcm) -> FeatureVector:
    """Contrast, correlation, energy, homogeneity and entropy of a GLCM.

    Entropy uses the natural log with 0*log0 := 0; correlation is 0 when
    either marginal variance vanishes.
    """
    p = g.matrix
    idx = np.arange(g.levels, dtype=np.float64)
    i = idx[:, None]
    j = idx[None, :]
    contrast = float((p * (i - j) ** 2).sum())
    energy = float((p * p).sum())
    homogeneity = float((p / (1.0 + (i - j) ** 2)).sum())
    nz = p[p > 0]
    entropy = float(-(nz * np.log(nz)).sum())
    pi = p.sum(axis=1)
    pj = p.sum(axis=0)
    mu_i = float(idx @ pi)
    mu_j = float(idx @ pj)
    var_i = float(((idx - mu_i) ** 2) @ pi)
    var_j = float(((idx - mu_j) ** 2) @ pj)
    if var_i > 0 and var_j > 0:
        correlation = float((p * (i - mu_i) * (j - mu_j)).sum() / math.sqrt(var_i * var_j))
    else:
        correlation = 0.0
    return FeatureVector(
        values=np.array([contrast, correlation, energy, homogeneity, entropy]),
        names=HARALICK_NAMES,
    )


# ---------------------------------------------------------------------------
# Hu moments
# ---------------------------------------------------------------------------

def hu_moments(img) -> FeatureVector:
    """Seven Hu invariants of the intensity-normalized image.

    The image is divided by its total pixel mass, making the invariants
    insensitive to uniform brightness scaling as well as translation and
    rotation. Values are reported as sign(h) * log10(|h| + 1e-30).
    """
    plane = _plane(img).astype(np.float64)
    total = plane.sum()
    if total <= 0:
        raise DataError("hu_moments needs an image with nonzero pixel mass")
    w = plane / total
    ys = np.arange(plane.shape[0], dtype=np.float64)
    xs = np.arange(plane.shape[1], dtype=np.float64)
    xbar = float(w.sum(axis=0) @ xs)
    ybar = float(w.sum(axis=1) @ ys)
    dx = xs - xbar
    dy = ys - ybar
    # mu(p, q) = sum_y dy^q (sum_x w[y, x] dx^p), via separable reductions
    xp = np.stack([np.ones_like(dx), dx, dx * dx, dx * dx * dx])  # (4, W)
    yq = np.stack([np.ones_like(dy), dy, dy * dy, dy * dy * dy])  # (4, H)
    m = yq @ (w @ xp.T)  # m[q, p]

    def mu(p: int, q: int) -> float:
        return float(m[q, p])

    n20, n02, n11 = mu(2, 0), mu(0, 2), mu(1, 1)
    n30, n03 = mu(3, 0), mu(0, 3)
    n21, n12 = mu(2, 1), mu(1, 2)

    h1 = n20 + n02
    h2 = (n20 - n02) ** 2 + 4.0 * n11**2
    h3 = (n30 - 3.0 * n12) ** 2 + (3.0 * n21 - n03) ** 2
    h4 = (n30 + n12) ** 2 + (n21 + n03) ** 2
    h5 = (n30 - 3.0 * n12) * (n30 + n12) * (
        (n30 + n12) ** 2 - 3.0 * (n21 + n03) ** 2
    ) + (3.0 * n21 - n03) * (n21 + n03) * (
        3.0 * (n30 + n12) ** 2 - (n21 + n03) ** 2
    )
    h6 = (n20 - n02) * ((n30 + n12) ** 2 - (n21 + n03) ** 2) + 4.0 * n11 * (
        n30 + n12
    ) * (n21 + n03)
    h7 = (3.0 * n21 - n03) * (n30 + n12) * (
        (n30 + n12) ** 2 - 3.0 * (n21 + n03) ** 2
    ) - (n30 - 3.0 * n12) * (n21 + n03) * (
        3.0 * (n30 + n12) ** 2 - (n21 + n03) ** 2
    )

    hs = np.array([h1, h2, h3, h4, h5, h6, h7])
    scaled = np.sign(hs) * np.log10(np.abs(hs) + 1e-30)
    return FeatureVector(values=scaled, names=tuple(f"hu_{k}" for k in range(1, 8)))


# ---------------------------------------------------------------------------
# Local binary patterns
# ---------------------------------------------------------------------------

def lbp_histogram(img) -> FeatureVector:
    """Normalized 256-bin histogram of 8-neighbor LBP codes.

    Neighbor >= center sets a bit; bits run clockwise from the top-left
    neighbor, most significant first.
    """
    plane = _plane(img)
    if plane.shape[0] < 3 or plane.shape[1] < 3:
        raise DataError(f"image {plane.shape} too small for LBP (needs >= 3x3)")
    codes = lbp_codes(plane)
    hist = np.bincount(codes.ravel(), minlength=256).astype(np.float64)
    hist /= hist.sum()
    return FeatureVector(values=hist, names=tuple(f"lbp_{k:03d}" for k in range(256)))


# ---------------------------------------------------------------------------
# Combined extraction
# ---------------------------------------------------------------------------

def extract_all(img, config: FeatureConfig = FeatureConfig()) -> FeatureVector:
    """All enabled descriptors of one single-channel image, concatenated.

    Default layout: 5 Haralick stats x 4 angles, then 7 Hu values, then 256
    LBP bins (283 features). Ordering is deterministic.
    """
    values: list[np.ndarray] = []
    names: list[str] = []
    if config.include_glcm:
        for angle in config.glcm_angles:
            g = glcm(img, distance=config.glcm_distance, angle=angle,
                     levels=config.glcm_levels)
            h = haralick(g)
            values.append(h.values)
            names.extend(f"glcm_d{config.glcm_distance}_a{angle}_{n}" for n in h.names)
    if config.include_hu:
        h = hu_moments(img)
        values.append(h.values)
        names.extend(h.names)
    if config.include_lbp:
        h = lbp_histogram(img)
        values.append(h.values)
        names.extend(h.names)
    if not values:
        raise ConfigError("feature config disables every descriptor family")
    return FeatureVector(values=np.concatenate(values), names=tuple(names))


def extract_tensor(t: EncodedTensor, config: FeatureConfig = FeatureConfig()) -> FeatureVector:
    """extract_all over every channel of a tensor, channel-prefixed names."""
    if t.channels == 1:
        return extract_all(t, config)
    values = []
    names: list[str] = []
    for c in range(t.channels):
        fv = extract_all(t.pixels[:, :, c], config)
        values.append(fv.values)
        names.extend(f"ch{c}_{n}" for n in fv.names)
    return FeatureVector(values=np.concatenate(values), names=tuple(names))


# ---------------------------------------------------------------------------
# Feature matrix I/O
# ---------------------------------------------------------------------------

def export_features(m: FeatureMatrix, path) -> None:
    """Write a feature matrix as CSV (*.csv) or EEGF v1 binary (anything else).

    Values are stored at float32 precision in both formats.
    """
    path = str(path)
    if path.endswith(".csv"):
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["sample_id", "label"] + [f"f{i}" for i in range(m.n_features)])
            for sid, label, row in zip(m.sample_ids, m.labels, m.rows):
                writer.writerow([int(sid), int(label)] + [f"{v:.9g}" for v in row.astype(np.float32)])
        return
    dtype = np.dtype([("sample_id", "<u4"), ("label", "<u2"),
                      ("values", "<f4", (m.n_features,))])
    packed = np.empty(m.n_samples, dtype=dtype)
    packed["sample_id"] = m.sample_ids
    packed["label"] = m.labels
    packed["values"] = m.rows.astype(np.float32)
    with open(path, "wb") as f:
        f.write(_FEATURE_HEADER.pack(FEATURE_MAGIC, m.n_samples, m.n_features))
        f.write(packed.tobytes())


def import_features(path) -> FeatureMatrix:
    """Read a feature matrix written by export_features (CSV or EEGF).

    The format is detected from the file's leading bytes, not its name.
    Row order is preserved.
    """
    with open(path, "rb") as f:
        head = f.read(4)
    if head == FEATURE_MAGIC:
        return _import_binary(path)
    return _import_csv(path)


def _import_binary(path) -> FeatureMatrix:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _FEATURE_HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, n, d = _FEATURE_HEADER.unpack_from(raw)
    if magic != FEATURE_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    dtype = np.dtype([("sample_id", "<u4"), ("label", "<u2"), ("values", "<f4", (d,))])
    expected = _FEATURE_HEADER.size + n * dtype.itemsize
    if len(raw) != expected:
        raise FormatError(f"{path}: payload is {len(raw)} bytes, expected {expected}")
    packed = np.frombuffer(raw, dtype=dtype, offset=_FEATURE_HEADER.size)
    rows = packed["values"].astype(np.float64).reshape(n, d)
    bad = np.argwhere(~np.isfinite(rows).all(axis=1))
    if len(bad):
        raise DataError(f"{path}: non-finite feature value in row {int(bad[0][0])}")
    return FeatureMatrix(rows=rows, sample_ids=packed["sample_id"].astype(np.int64),
                         labels=packed["label"].astype(np.int64))


def _import_csv(path) -> FeatureMatrix:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty feature file") from None
        if header[:2] != ["sample_id", "label"]:
            raise FormatError(
                f"{path}: header must start with sample_id,label, got {header[:2]}"
            )
        width = len(header)
        ids, labels, rows = [], [], []
        for lineno, rec in enumerate(reader):
            if len(rec) != width:
                raise DataError(
                    f"{path}: row {lineno} has {len(rec)} fields, expected {width}"
                )
            try:
                ids.append(int(rec[0]))
                labels.append(int(rec[1]))
                vals = [float(v) for v in rec[2:]]
            except ValueError as exc:
                raise DataError(f"{path}: row {lineno}: {exc}") from exc
            if not all(math.isfinite(v) for v in vals):
                raise DataError(f"{path}: non-finite feature value in row {lineno}")
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: feature file has no data rows")
    return FeatureMatrix(
        rows=np.array(rows, dtype=np.float64),
        sample_ids=np.array(ids, dtype=np.int64),
        labels=np.array(labels, dtype=np.int64),
        feature_names=tuple(header[2:]),
    )
