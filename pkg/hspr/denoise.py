"""Complex-domain sparse filtering and sensor-plane noise suppression"""
import logging
from collections import namedtuple

import numpy as np
import pywt
from numpy.lib.stride_tricks import sliding_window_view
from scipy import fft

from .exceptions import ConfigurationError, InvalidArgumentError

logger = logging.getLogger(__name__)

DENOISER_KINDS = ("none", "block_transform_threshold")
SIGMA_MODES = ("auto_mad", "fixed")
BLOCK_SIZES = (4, 8, 16)

# median(|N(0, 1)|), converts a MAD into a standard deviation
MAD_TO_SIGMA = 0.6745


class DenoiserSpec(
    namedtuple(
        "DenoiserSpec",
        [
            "kind",
            "block_size",
            "threshold_multiplier",
            "sigma_mode",
            "fixed_sigma",
        ],
    )
):
    """Settings of the object-plane denoiser

    Attributes:
        kind (str): none or block_transform_threshold
        block_size (int): Block edge, one of 4, 8, 16
        threshold_multiplier (float): tau, coefficients below tau * sigma
            are dropped
        sigma_mode (str): auto_mad estimates sigma on every call, fixed uses
            fixed_sigma
        fixed_sigma (float): Sigma for the fixed mode
    """

    __slots__ = ()

    def __new__(
        cls,
        kind="block_transform_threshold",
        block_size=8,
        threshold_multiplier=2.7,
        sigma_mode="auto_mad",
        fixed_sigma=None,
    ):
        if kind not in DENOISER_KINDS:
            raise ConfigurationError(
                f"Unknown denoiser kind {kind!r}, "
                f"expect one of {DENOISER_KINDS}"
            )
        if block_size not in BLOCK_SIZES:
            raise ConfigurationError(
                f"Block size must be one of {BLOCK_SIZES}, got {block_size}"
            )
        if not threshold_multiplier > 0:
            raise ConfigurationError(
                f"Threshold multiplier must be positive, "
                f"got {threshold_multiplier}"
            )
        if sigma_mode not in SIGMA_MODES:
            raise ConfigurationError(
                f"Unknown sigma mode {sigma_mode!r}, "
                f"expect one of {SIGMA_MODES}"
            )
        if sigma_mode == "fixed" and not (
            fixed_sigma is not None and fixed_sigma >= 0
        ):
            raise ConfigurationError(
                f"Fixed sigma mode needs fixed_sigma >= 0, got {fixed_sigma}"
            )
        return super().__new__(
            cls,
            kind,
            int(block_size),
            float(threshold_multiplier),
            sigma_mode,
            fixed_sigma,
        )


class SnsSpec(namedtuple("SnsSpec", ["gamma"])):
    """Sensor noise suppression, gamma weighs the model amplitude"""

    __slots__ = ()

    def __new__(cls, gamma=1.0):
        if not (np.isfinite(gamma) and gamma >= 0):
            raise ConfigurationError(
                f"SNS gamma must be finite and >= 0, got {gamma}"
            )
        return super().__new__(cls, float(gamma))


def estimate_noise_sigma(field):
    """Robust noise level of a field

    Median absolute value of the diagonal details of a one-level Haar
    decomposition of the real part, divided by 0.6745.

    Args:
        field (ComplexField): The field

    Returns:
        float: The sigma estimate, >= 0

    Raises:
        InvalidArgumentError: If the field is smaller than 2x2
    """
    if field.rows < 2 or field.cols < 2:
        raise InvalidArgumentError(
            f"Noise estimation needs at least 2x2, "
            f"got {field.rows}x{field.cols}"
        )
    _, (_, _, diagonal) = pywt.dwt2(field.data.real, "haar")
    return float(np.median(np.abs(diagonal)) / MAD_TO_SIGMA)


def _padded_extent(size, block, step):
    n_blocks = -(-max(size - block, 0) // step) + 1
    return (n_blocks - 1) * step + block


def _threshold_blocks(blocks, threshold):
    """Hard-threshold the DCT of real and imaginary parts jointly"""
    axes = (-2, -1)
    real = fft.dctn(blocks.real, type=2, norm="ortho", axes=axes)
    imag = fft.dctn(blocks.imag, type=2, norm="ortho", axes=axes)
    keep = np.hypot(real, imag) >= threshold
    # DC is exempt
    keep[..., 0, 0] = True
    real = fft.idctn(real * keep, type=2, norm="ortho", axes=axes)
    imag = fft.idctn(imag * keep, type=2, norm="ortho", axes=axes)
    return real + 1j * imag


def denoise_complex(field, spec):
    """Sparse filtering of a complex field

    block_transform_threshold splits the field into half-overlapping blocks
    (edge-replicated to fit), hard-thresholds the orthonormal 2D DCT of the
    real and imaginary parts with a shared support, and averages the
    overlapping blocks back.

    Args:
        field (ComplexField): The field
        spec (DenoiserSpec): The settings

    Returns:
        ComplexField: The filtered field, same dims and wavelength

    Raises:
        ConfigurationError: If the denoiser kind is unknown
    """
    if spec.kind == "none":
        return field
    if spec.kind != "block_transform_threshold":
        raise ConfigurationError(f"Unknown denoiser kind {spec.kind!r}")

    if spec.sigma_mode == "fixed":
        sigma = spec.fixed_sigma
    else:
        sigma = estimate_noise_sigma(field)
    threshold = spec.threshold_multiplier * sigma
    logger.debug(
        "Denoising %dx%d field at %g m, sigma=%g",
        field.rows,
        field.cols,
        field.wavelength,
        sigma,
    )
    if threshold <= 0:
        return field

    block = spec.block_size
    step = block // 2
    rows = _padded_extent(field.rows, block, step)
    cols = _padded_extent(field.cols, block, step)
    padded = np.pad(
        field.data,
        ((0, rows - field.rows), (0, cols - field.cols)),
        mode="edge",
    )

    blocks = sliding_window_view(padded, (block, block))[::step, ::step]
    filtered = _threshold_blocks(blocks, threshold)

    n_block_rows, n_block_cols = filtered.shape[:2]
    acc = np.zeros((rows, cols), dtype=np.complex128)
    weights = np.zeros((rows, cols))
    row_end = (n_block_rows - 1) * step + 1
    col_end = (n_block_cols - 1) * step + 1
    for i in range(block):
        for j in range(block):
            acc[i:i + row_end:step, j:j + col_end:step] += filtered[
                :, :, i, j
            ]
            weights[i:i + row_end:step, j:j + col_end:step] += 1.0

    data = acc / weights
    return field.with_data(data[:field.rows, :field.cols])


def sns_amplitude_update(observed_amp, model_amp, spec):
    """Blend observed and propagated amplitudes at the sensor plane

    (|V~| + gamma * |V|) / (1 + gamma), which always lies between the two.
    gamma = 0 gives the plain amplitude replacement.

    Args:
        observed_amp (numpy.ndarray): Measured amplitude |V~(lambda)|
        model_amp (numpy.ndarray): Propagated model amplitude |V^t(lambda)|
        spec (SnsSpec): The settings

    Returns:
        numpy.ndarray: The updated amplitude

    Raises:
        InvalidArgumentError: If shapes differ or entries are negative
    """
    observed_amp = np.asarray(observed_amp, dtype=np.float64)
    model_amp = np.asarray(model_amp, dtype=np.float64)
    if observed_amp.shape != model_amp.shape:
        raise InvalidArgumentError(
            f"Amplitude shapes differ: {observed_amp.shape} "
            f"vs {model_amp.shape}"
        )
    if np.any(observed_amp < 0) or np.any(model_amp < 0):
        raise InvalidArgumentError("Amplitudes must be >= 0")
    gamma = spec.gamma
    return (observed_amp + gamma * model_amp) / (1.0 + gamma)
