"""Trial-to-image encoding: 8-bit grayscale tensors and their container format.

Each electrode's normalized, quantized signal row is stretched into a block
of identical pixel rows, so a 128-channel 440-sample trial with stretch 4
becomes a 512x440 grayscale image. Tensors round-trip through the "EEGI v1"
raw format; single-channel tensors can also be written as PNG.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, FormatError
from .trials import Trial

TENSOR_MAGIC = b"EEGI"
TENSOR_VERSION = 1
_TENSOR_HEADER = struct.Struct("<4sHIIH")  # magic, version, rows, cols, channels

SCOPE_PER_TRIAL = "per_trial"
SCOPE_PER_CHANNEL = "per_channel"


@dataclass(frozen=True)
class EncodeConfig:
    """Controls the trial-to-image transform.

    stretch_factor: pixel rows per electrode.
    normalization_scope: "per_trial" (one min/max for the whole trial) or
        "per_channel" (each electrode scaled independently).
    replicate_to: channel count for the single-trial replicated variant.
    resize_to: optional (rows, cols) bilinear resize applied after encoding.
    Rounding is fixed to half-away-from-zero throughout.
    """

    stretch_factor: int = 4
    normalization_scope: str = SCOPE_PER_TRIAL
    replicate_to: int = 3
    resize_to: tuple[int, int] | None = None

    def __post_init__(self):
        if self.stretch_factor < 1:
            raise ConfigError(f"stretch_factor must be >= 1, got {self.stretch_factor}")
        if self.normalization_scope not in (SCOPE_PER_TRIAL, SCOPE_PER_CHANNEL):
            raise ConfigError(f"unknown normalization_scope {self.normalization_scope!r}")
        if self.replicate_to < 1:
            raise ConfigError(f"replicate_to must be >= 1, got {self.replicate_to}")
        if self.resize_to is not None:
            r, c = self.resize_to
            if r < 1 or c < 1:
                raise ConfigError(f"resize_to must be >= 1x1, got {self.resize_to}")


@dataclass(frozen=True, eq=False)
class EncodedTensor:
    """8-bit image tensor, shape (rows, cols, channels), row-major."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.pixels)
        if arr.ndim != 3:
            raise DataError(f"pixels must be 3D (rows, cols, channels), got {arr.shape}")
        if arr.dtype != np.uint8:
            raise DataError(f"pixels must be uint8, got {arr.dtype}")
        object.__setattr__(self, "pixels", arr)

    @property
    def rows(self) -> int:
        return self.pixels.shape[0]

    @property
    def cols(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    def plane(self, c: int = 0) -> np.ndarray:
        """One channel as a 2D uint8 array."""
        return self.pixels[:, :, c]


def minmax_normalize(t: Trial, scope: str = SCOPE_PER_TRIAL) -> np.ndarray:
    """Map trial values affinely into [0, 1].

    Global min/max for per_trial scope, row-wise for per_channel. Zero-range
    input (constant trial or constant channel) maps to 0.5.
    """
    x = t.data
    if scope == SCOPE_PER_TRIAL:
        lo, hi = x.min(), x.max()
        if hi > lo:
            return (x - lo) / (hi - lo)
        return np.full_like(x, 0.5)
    if scope == SCOPE_PER_CHANNEL:
        lo = x.min(axis=1, keepdims=True)
        hi = x.max(axis=1, keepdims=True)
        span = hi - lo
        safe = np.where(span > 0, span, 1.0)
        return np.where(span > 0, (x - lo) / safe, 0.5)
    raise ConfigError(f"unknown normalization scope {scope!r}")


def quantize_u8(m: np.ndarray) -> np.ndarray:
    """Quantize values in [0, 1] to u8 via round-half-away-from-zero of 255*v."""
    m = np.asarray(m, dtype=np.float64)
    if m.size and (m.min() < 0.0 or m.max() > 1.0):
        bad = m.min() if m.min() < 0.0 else m.max()
        raise DataError(f"quantize_u8 input must lie in [0, 1], found {bad}")
    # values are nonnegative, so half-away-from-zero == floor(x + 0.5)
    return np.floor(m * 255.0 + 0.5).astype(np.uint8)


def encode_trial(t: Trial, cfg: EncodeConfig = EncodeConfig()) -> EncodedTensor:
    """Encode one trial as a single-channel grayscale tensor.

    Output shape is (n_channels * stretch_factor, n_samples, 1); each
    electrode's quantized row repeats stretch_factor times as a contiguous
    block, in channel order.
    """
    q = quantize_u8(minmax_normalize(t, cfg.normalization_scope))
    stretched = np.repeat(q, cfg.stretch_factor, axis=0)
    return EncodedTensor(pixels=stretched[:, :, None])


def replicate_channels(img: EncodedTensor, k: int) -> EncodedTensor:
    """Clone a single-channel tensor into k identical channels."""
    if img.channels != 1:
        raise DataError(f"replicate_channels expects a 1-channel tensor, got {img.channels}")
    if k < 1:
        raise ConfigError(f"channel count must be >= 1, got {k}")
    return EncodedTensor(pixels=np.repeat(img.pixels, k, axis=2))


def stack_subjects(trials: list[Trial], cfg: EncodeConfig = EncodeConfig()) -> EncodedTensor:
    """Encode several subjects' trials of one stimulus as image channels.

    Channels are ordered by ascending subject_id. All trials must share
    stimulus_id and dimensions, with distinct subject_ids.
    """
    if not trials:
        raise DataError("stack_subjects needs at least one trial")
    stim = trials[0].stimulus_id
    for t in trials:
        if t.stimulus_id != stim:
            raise DataError(
                f"stack_subjects: mixed stimulus ids {stim} and {t.stimulus_id}"
            )
    subjects = [t.subject_id for t in trials]
    if len(set(subjects)) != len(subjects):
        raise DataError(f"stack_subjects: duplicate subject ids in {sorted(subjects)}")
    planes = [encode_trial(t, cfg).pixels[:, :, 0]
              for t in sorted(trials, key=lambda t: t.subject_id)]
    return EncodedTensor(pixels=np.stack(planes, axis=2))


def resize_bilinear(img: EncodedTensor, rows: int, cols: int) -> EncodedTensor:
    """Per-channel bilinear resize with half-pixel center alignment.

    Interpolated values are re-quantized with half-away-from-zero rounding.
    Resizing to the input dimensions is a bit-exact identity.
    """
    if rows < 1 or cols < 1:
        raise ConfigError(f"resize target must be >= 1x1, got ({rows}, {cols})")
    h, w = img.rows, img.cols
    ys = np.clip((np.arange(rows) + 0.5) * (h / rows) - 0.5, 0.0, h - 1.0)
    xs = np.clip((np.arange(cols) + 0.5) * (w / cols) - 0.5, 0.0, w - 1.0)
    y0 = ys.astype(np.intp)
    x0 = xs.astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    p = img.pixels.astype(np.float64)
    top = p[y0][:, x0] * (1.0 - fx) + p[y0][:, x1] * fx
    bot = p[y1][:, x0] * (1.0 - fx) + p[y1][:, x1] * fx
    out = top * (1.0 - fy) + bot * fy
    return EncodedTensor(pixels=np.floor(out + 0.5).astype(np.uint8))


# ---------------------------------------------------------------------------
# Output formats
# ---------------------------------------------------------------------------

def write_png(img: EncodedTensor, path) -> None:
    """Write a single-channel tensor as an 8-bit grayscale PNG."""
    if img.channels != 1:
        raise DataError(
            f"PNG output is grayscale-only; got {img.channels} channels. "
            "Write each channel as its own PNG instead."
        )
    from PIL import Image

    Image.fromarray(img.plane(0), mode="L").save(path, format="PNG")


def write_tensor(img: EncodedTensor, path) -> None:
    """Write a tensor in the EEGI v1 raw format (bit-exact round trip)."""
    header = _TENSOR_HEADER.pack(TENSOR_MAGIC, TENSOR_VERSION,
                                 img.rows, img.cols, img.channels)
    with open(path, "wb") as f:
        f.write(header)
        f.write(img.pixels.tobytes())


def read_tensor(path) -> EncodedTensor:
    """Read an EEGI v1 tensor file."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _TENSOR_HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, rows, cols, channels = _TENSOR_HEADER.unpack_from(raw)
    if magic != TENSOR_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {TENSOR_MAGIC!r}")
    if version != TENSOR_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    expected = _TENSOR_HEADER.size + rows * cols * channels
    if len(raw) != expected:
        raise FormatError(f"{path}: payload is {len(raw)} bytes, expected {expected}")
    pixels = np.frombuffer(raw, dtype=np.uint8, offset=_TENSOR_HEADER.size)
    return EncodedTensor(pixels=pixels.reshape(rows, cols, channels).copy())
