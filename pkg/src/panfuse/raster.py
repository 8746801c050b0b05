"""Image cube type, MSR file IO, synthetic scenes, and patch extraction.

A raster is an H x W x B cube of finite 64-bit floats, nominally in
[0, 1], band-interleaved-by-pixel (C order). It is the carrier for every
image in the toolkit: multispectral cubes, single-band panchromatic
images, fused outputs, and feature maps.

MSR file layout:
    bytes 0-3    magic ``MSR1``
    bytes 4-7    little-endian u32 header length N
    bytes 8-8+N  UTF-8 JSON {"width": W, "height": H, "bands": B, "dtype": "f64"}
    payload      W*H*B little-endian float64, row-major, band-interleaved
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import (
    HeaderError,
    MagicError,
    MissingFileError,
    NonFiniteDataError,
    PayloadSizeError,
    RasterIOError,
    ShapeMismatchError,
    UsageError,
)

MSR_MAGIC = b"MSR1"


@dataclass(frozen=True)
class Raster:
    """Immutable H x W x B image cube of finite float64 values."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.data, dtype=np.float64, order="C")
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ValueError(f"raster data must be 2-D or 3-D, got ndim={arr.ndim}")
        if min(arr.shape) < 1:
            raise ValueError(f"raster dimensions must all be >= 1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("raster data contains non-finite values")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def bands(self) -> int:
        return self.data.shape[2]

    def band(self, b: int) -> np.ndarray:
        """Read-only 2-D view of band ``b``."""
        return self.data[:, :, b]


class Patch(NamedTuple):
    lrms: Raster
    pan: Raster
    reference: Optional[Raster]


@dataclass(frozen=True)
class PatchSet:
    """Aligned (lrms, pan, reference) tiles cut from one scene."""

    patches: tuple[Patch, ...]
    ratio: int

    def __post_init__(self) -> None:
        for p in self.patches:
            if p.pan.bands != 1:
                raise ShapeMismatchError("patch pan must be single band")
            if (p.pan.height, p.pan.width) != (
                self.ratio * p.lrms.height,
                self.ratio * p.lrms.width,
            ):
                raise ShapeMismatchError("patch pan dims must be ratio * lrms dims")
            if p.reference is not None:
                if (p.reference.height, p.reference.width) != (p.pan.height, p.pan.width):
                    raise ShapeMismatchError("patch reference dims must match pan dims")
                if p.reference.bands != p.lrms.bands:
                    raise ShapeMismatchError("patch reference bands must match lrms bands")


def write_raster(raster: Raster, path: str | Path) -> None:
    """Write ``raster`` to ``path`` in MSR format (bit-exact round trip)."""
    header = json.dumps(
        {
            "width": raster.width,
            "height": raster.height,
            "bands": raster.bands,
            "dtype": "f64",
        },
        separators=(",", ":"),
    ).encode("utf-8")
    payload = raster.data.astype("<f8").tobytes(order="C")
    try:
        with open(path, "wb") as fh:
            fh.write(MSR_MAGIC)
            fh.write(struct.pack("<I", len(header)))
            fh.write(header)
            fh.write(payload)
    except OSError as exc:
        raise RasterIOError(f"cannot write raster to {path}: {exc}") from exc


def read_raster(path: str | Path) -> Raster:
    """Read an MSR file, validating magic, header, payload size, and finiteness."""
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"no such raster file: {path}")
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise RasterIOError(f"cannot read {path}: {exc}") from exc

    if blob[:4] != MSR_MAGIC:
        raise MagicError(f"{path}: bad magic {blob[:4]!r}, expected {MSR_MAGIC!r}")
    if len(blob) < 8:
        raise HeaderError(f"{path}: file too short for header length field")
    (header_len,) = struct.unpack("<I", blob[4:8])
    if len(blob) < 8 + header_len:
        raise HeaderError(f"{path}: declared header length {header_len} exceeds file size")
    try:
        header = json.loads(blob[8 : 8 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise HeaderError(f"{path}: header is not valid JSON: {exc}") from exc

    for key in ("width", "height", "bands"):
        if not isinstance(header.get(key), int) or header[key] < 1:
            raise HeaderError(f"{path}: header field {key!r} missing or invalid")
    if header.get("dtype") != "f64":
        raise HeaderError(f"{path}: unsupported dtype {header.get('dtype')!r}")

    w, h, b = header["width"], header["height"], header["bands"]
    payload = blob[8 + header_len :]
    expected = w * h * b * 8
    if len(payload) != expected:
        raise PayloadSizeError(
            f"{path}: payload is {len(payload)} bytes, header implies {expected}"
        )
    values = np.frombuffer(payload, dtype="<f8")
    if not np.all(np.isfinite(values)):
        raise NonFiniteDataError(f"{path}: payload contains non-finite values")
    return Raster(values.reshape(h, w, b).copy())


def pan_from_weights(hrms: Raster, pan_weights: Sequence[float]) -> Raster:
    """Simulate a panchromatic band as the normalized weighted band sum."""
    w = np.asarray(pan_weights, dtype=np.float64)
    if w.shape != (hrms.bands,):
        raise UsageError(
            f"pan_weights length {w.size} does not match band count {hrms.bands}"
        )
    if np.any(w < 0):
        raise UsageError("pan_weights must be nonnegative")
    total = w.sum()
    if total <= 0:
        raise UsageError("pan_weights must have a positive sum")
    pan = np.tensordot(hrms.data, w / total, axes=([2], [0]))
    return Raster(pan[:, :, None])


def synth_scene(
    width: int,
    height: int,
    bands: int,
    seed: int,
    pan_weights: Sequence[float],
) -> tuple[Raster, Raster]:
    """Generate a deterministic (hrms, pan) pair for pipeline experiments.

    Each band is a linear gradient plus a handful of smoothed ellipses,
    clipped to [0, 1], so scenes carry both low-frequency content and
    edges. The pan band is the normalized ``pan_weights`` combination of
    the multispectral bands. Identical arguments give bit-identical
    output.
    """
    if width < 8 or height < 8:
        raise UsageError(f"scene dimensions must be >= 8, got {width}x{height}")
    if bands < 1:
        raise UsageError(f"band count must be >= 1, got {bands}")
    w = np.asarray(pan_weights, dtype=np.float64)
    if w.shape != (bands,):
        raise UsageError(f"pan_weights length {w.size} does not match bands {bands}")
    if np.any(w < 0) or w.sum() <= 0:
        raise UsageError("pan_weights must be nonnegative with a positive sum")

    rng = np.random.default_rng(seed)
    yy, xx = np.meshgrid(
        np.linspace(0.0, 1.0, height), np.linspace(0.0, 1.0, width), indexing="ij"
    )
    cube = np.empty((height, width, bands), dtype=np.float64)
    for b in range(bands):
        theta = rng.uniform(0.0, 2.0 * np.pi)
        base = rng.uniform(0.35, 0.55)
        grad_amp = rng.uniform(0.1, 0.25)
        img = base + grad_amp * (
            (xx - 0.5) * np.cos(theta) + (yy - 0.5) * np.sin(theta)
        )
        for _ in range(6):
            cx, cy = rng.uniform(0.1, 0.9, size=2)
            rx, ry = rng.uniform(0.06, 0.25, size=2)
            phi = rng.uniform(0.0, np.pi)
            amp = rng.uniform(-0.3, 0.3)
            soft = rng.uniform(0.01, 0.05)
            dx, dy = xx - cx, yy - cy
            u = (dx * np.cos(phi) + dy * np.sin(phi)) / rx
            v = (-dx * np.sin(phi) + dy * np.cos(phi)) / ry
            d = np.sqrt(u * u + v * v)
            img += amp / (1.0 + np.exp(np.clip((d - 1.0) / soft, -60.0, 60.0)))
        cube[:, :, b] = np.clip(img, 0.0, 1.0)

    hrms = Raster(cube)
    return hrms, pan_from_weights(hrms, pan_weights)


def patchify(ms: Raster, pan: Raster, patch: int, ratio: int) -> PatchSet:
    """Cut non-overlapping aligned tiles; partial edge tiles are discarded.

    Pan tiles are ``patch`` x ``patch``; the matching ms tiles are
    ``patch/ratio`` squared. References stay empty until a degradation
    step fills them. Pixel values are exact sub-windows of the inputs.
    """
    if ratio < 1:
        raise UsageError(f"ratio must be >= 1, got {ratio}")
    if patch % ratio != 0:
        raise UsageError(f"patch size {patch} not divisible by ratio {ratio}")
    if pan.bands != 1:
        raise ShapeMismatchError("pan must be single band")
    if (pan.height, pan.width) != (ratio * ms.height, ratio * ms.width):
        raise ShapeMismatchError(
            f"pan dims {pan.height}x{pan.width} != ratio * ms dims "
            f"{ratio * ms.height}x{ratio * ms.width}"
        )
    mp = patch // ratio
    patches = []
    for py in range(pan.height // patch):
        for px in range(pan.width // patch):
            pr, pc = py * patch, px * patch
            mr, mc = py * mp, px * mp
            patches.append(
                Patch(
                    lrms=Raster(ms.data[mr : mr + mp, mc : mc + mp, :].copy()),
                    pan=Raster(pan.data[pr : pr + patch, pc : pc + patch, :].copy()),
                    reference=None,
                )
            )
    return PatchSet(patches=tuple(patches), ratio=ratio)
