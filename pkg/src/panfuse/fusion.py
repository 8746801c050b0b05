"""Classical pansharpening baselines sharing one input contract.

Component substitution (GIHS, Brovey, PCA, Gram-Schmidt) and multiresolution
analysis (high-pass filter injection). All methods upsample the low-resolution
multispectral cube, derive an intensity surrogate, and inject detail from the
histogram-matched pan band; outputs are clipped to [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, ShapeMismatchError, UsageError
from .raster import Raster
from .resample import _correlate_axis, downsample_antialias, histogram_match, upsample

_STD_EPS = 1e-12
GS_LR_PAN_MODES = ("weighted-mean", "blur-decimate", "mmse")


@dataclass(frozen=True)
class FusionInput:
    """A (lrms, pan) pair with the resolution ratio between them."""

    lrms: Raster
    pan: Raster
    ratio: int

    def __post_init__(self) -> None:
        if self.ratio < 1:
            raise UsageError(f"ratio must be >= 1, got {self.ratio}")
        if self.pan.bands != 1:
            raise ShapeMismatchError("pan must be single band")
        if (self.pan.height, self.pan.width) != (
            self.ratio * self.lrms.height,
            self.ratio * self.lrms.width,
        ):
            raise ShapeMismatchError(
                f"pan dims {self.pan.height}x{self.pan.width} != ratio "
                f"{self.ratio} * lrms dims {self.lrms.height}x{self.lrms.width}"
            )


def _matched_pan(pan: Raster, target: np.ndarray) -> np.ndarray:
    """Histogram-match the pan band to a 2-D intensity surrogate."""
    return histogram_match(pan, Raster(target[:, :, None])).data[:, :, 0]


def fuse_gihs(fin: FusionInput) -> Raster:
    """Generalized intensity-hue-saturation fusion (additive form).

    The intensity is the equal-weight band mean, which folds the NIR band
    into the substitution instead of restricting it to three color bands.
    """
    if fin.lrms.bands < 3:
        raise UsageError(f"gihs requires at least 3 bands, got {fin.lrms.bands}")
    ms_up = upsample(fin.lrms, fin.ratio)
    intensity = ms_up.data.mean(axis=2)
    matched = _matched_pan(fin.pan, intensity)
    fused = ms_up.data + (matched - intensity)[:, :, None]
    return Raster(np.clip(fused, 0.0, 1.0))


def fuse_brovey(fin: FusionInput) -> Raster:
    """Brovey transform: band-ratio-preserving multiplicative injection."""
    ms_up = upsample(fin.lrms, fin.ratio)
    intensity = ms_up.data.mean(axis=2)
    matched = _matched_pan(fin.pan, intensity)
    gain = matched / (intensity + 1e-12)
    return Raster(np.clip(ms_up.data * gain[:, :, None], 0.0, 1.0))


def pca_basis(ms: Raster) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Band means plus eigendecomposition of the band covariance.

    Returns (means, eigenvalues, eigenvectors) with eigenvalues descending
    and eigenvectors as columns. The leading eigenvector's sign is fixed so
    its loadings sum to a nonnegative value; otherwise the substitution
    direction would be arbitrary.
    """
    flat = ms.data.reshape(-1, ms.bands)
    means = flat.mean(axis=0)
    cov = np.atleast_2d(np.cov(flat, rowvar=False, ddof=1))
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    if vals[0] <= 0 or vals[-1] <= 1e-10 * vals[0]:
        raise DegenerateInputError("pca: band covariance is singular")
    if vecs[:, 0].sum() < 0:
        vecs = vecs.copy()
        vecs[:, 0] = -vecs[:, 0]
    return means, vals, vecs


def fuse_pca(fin: FusionInput) -> Raster:
    """Principal-component substitution fusion.

    The pan band is histogram matched to the first principal component,
    replaces it in score space, and the result is projected back.
    """
    ms_up = upsample(fin.lrms, fin.ratio)
    means, _, vecs = pca_basis(ms_up)
    flat = ms_up.data.reshape(-1, ms_up.bands)
    scores = (flat - means) @ vecs
    pc1 = scores[:, 0].reshape(ms_up.height, ms_up.width)
    scores[:, 0] = _matched_pan(fin.pan, pc1).ravel()
    fused = (scores @ vecs.T + means).reshape(ms_up.data.shape)
    return Raster(np.clip(fused, 0.0, 1.0))


def mmse_band_weights(lrms: Raster, pan: Raster, ratio: int) -> np.ndarray:
    """Least-squares band weights matching the downsampled pan.

    Solves min_w ||downsample(pan) - sum_b w_b * lrms_b||^2 without a
    nonnegativity constraint.
    """
    lrpan = downsample_antialias(pan, ratio)
    if (lrpan.height, lrpan.width) != (lrms.height, lrms.width):
        raise ShapeMismatchError("downsampled pan dims do not match lrms dims")
    a = lrms.data.reshape(-1, lrms.bands)
    y = lrpan.data.ravel()
    weights, _, rank, _ = np.linalg.lstsq(a, y, rcond=None)
    if rank < lrms.bands:
        raise DegenerateInputError("mmse weights: rank-deficient band system")
    return weights


def fuse_gs(fin: FusionInput, lr_pan_mode: str = "weighted-mean") -> Raster:
    """Gram-Schmidt fusion in the equivalent injection-gain form.

    ``lr_pan_mode`` selects the synthetic low-resolution intensity:
    ``weighted-mean`` (equal-weight band mean), ``blur-decimate``
    (degraded pan, re-upsampled), or ``mmse`` (band weights fitted to the
    downsampled pan, the enhanced-GS variant). Per-band gains are
    cov(band, intensity) / var(intensity).
    """
    if lr_pan_mode not in GS_LR_PAN_MODES:
        raise UsageError(f"unknown gs lr-pan mode {lr_pan_mode!r}")
    ms_up = upsample(fin.lrms, fin.ratio)
    if lr_pan_mode == "weighted-mean":
        intensity = ms_up.data.mean(axis=2)
    elif lr_pan_mode == "blur-decimate":
        lrpan = downsample_antialias(fin.pan, fin.ratio)
        intensity = upsample(lrpan, fin.ratio).data[:, :, 0]
    else:
        weights = mmse_band_weights(fin.lrms, fin.pan, fin.ratio)
        intensity = np.tensordot(ms_up.data, weights, axes=([2], [0]))

    dev_i = intensity - intensity.mean()
    var_i = np.mean(dev_i * dev_i)
    if np.sqrt(var_i) < _STD_EPS:
        raise DegenerateInputError("gs: intensity surrogate has zero variance")
    dev_b = ms_up.data - ms_up.data.mean(axis=(0, 1))
    gains = np.mean(dev_b * dev_i[:, :, None], axis=(0, 1)) / var_i
    matched = _matched_pan(fin.pan, intensity)
    fused = ms_up.data + gains[None, None, :] * (matched - intensity)[:, :, None]
    return Raster(np.clip(fused, 0.0, 1.0))


def fuse_hpf(fin: FusionInput) -> Raster:
    """High-pass filter fusion: add the pan's box-filter residual to every band.

    The box kernel is (2*ratio + 1) squared, so the extracted detail scales
    with the resolution gap.
    """
    ms_up = upsample(fin.lrms, fin.ratio)
    k = 2 * fin.ratio + 1
    kernel = np.full(k, 1.0 / k)
    pan2d = fin.pan.data[:, :, 0]
    lowpass = _correlate_axis(_correlate_axis(pan2d, kernel, 0), kernel, 1)
    detail = pan2d - lowpass
    return Raster(np.clip(ms_up.data + detail[:, :, None], 0.0, 1.0))
