"""Dispersion models, thickness/phase conversion and evaluation metrics"""
import logging
import math
import warnings
from collections import namedtuple

import numpy as np

from .exceptions import (
    ConfigurationError,
    InvalidArgumentError,
    ModelError,
    PhaseWrapWarning,
)

logger = logging.getLogger(__name__)

DISPERSION_KINDS = ("constant", "sellmeier_fused_silica")

# Three-term Sellmeier coefficients of fused silica, wavelengths in um
SELLMEIER_B = (0.6961663, 0.4079426, 0.8974794)
SELLMEIER_C = (0.0684043 ** 2, 0.1162414 ** 2, 9.896161 ** 2)
SELLMEIER_RANGE = (200e-9, 2500e-9)


class DispersionModel(
    namedtuple("DispersionModel", ["kind", "constant_n"])
):
    """Refractive index of the object material versus wavelength

    Attributes:
        kind (str): constant or sellmeier_fused_silica
        constant_n (float): The index used by the constant kind
    """

    __slots__ = ()

    def __new__(cls, kind="constant", constant_n=1.46):
        if kind not in DISPERSION_KINDS:
            raise ConfigurationError(
                f"Unknown dispersion kind {kind!r}, "
                f"expect one of {DISPERSION_KINDS}"
            )
        return super().__new__(cls, kind, float(constant_n))


class DepthMap(namedtuple("DepthMap", ["heights", "pixel_pitch"])):
    """Thickness h(x, y) of a transparent object in meters"""

    __slots__ = ()

    def __new__(cls, heights, pixel_pitch=1.0):
        heights = np.asarray(heights, dtype=np.float64)
        if heights.ndim != 2:
            raise InvalidArgumentError(
                f"Depth map must be 2D, got {heights.shape}"
            )
        if not np.all(np.isfinite(heights)):
            raise InvalidArgumentError("Depth map contains NaN or Inf")
        if np.any(heights < 0):
            raise InvalidArgumentError("Heights must be >= 0")
        if not pixel_pitch > 0:
            raise InvalidArgumentError(
                f"Pixel pitch must be positive, got {pixel_pitch}"
            )
        return super().__new__(cls, heights, float(pixel_pitch))

    @property
    def rows(self):
        return self.heights.shape[0]

    @property
    def cols(self):
        return self.heights.shape[1]

    @property
    def max_height(self):
        return float(np.max(self.heights)) if self.heights.size else 0.0

    def mask(self):
        """Where the object rises above the substrate"""
        return self.heights > 0


def refractive_index(dispersion, wavelength):
    """Refractive index at a wavelength

    Args:
        dispersion (DispersionModel): The model
        wavelength (float): Wavelength in meters

    Returns:
        float: n(wavelength)

    Raises:
        ModelError: If the index is not above 1, or the wavelength is out of
            the Sellmeier validity range
    """
    if dispersion.kind == "constant":
        index = dispersion.constant_n
    else:
        low, high = SELLMEIER_RANGE
        if not low <= wavelength <= high:
            raise ModelError(
                f"Fused silica Sellmeier model is valid in "
                f"[{low}, {high}] m, got {wavelength}"
            )
        lambda_sq = (wavelength * 1e6) ** 2
        index = math.sqrt(
            1.0
            + sum(
                b * lambda_sq / (lambda_sq - c)
                for b, c in zip(SELLMEIER_B, SELLMEIER_C)
            )
        )

    if not index > 1:
        raise ModelError(f"Refractive index must exceed 1, got {index}")
    return index


def thickness_to_phase(depth, wavelength, dispersion, strict=False):
    """Phase delay of a depth map, 2 pi (n - 1) h / lambda

    Args:
        depth (DepthMap|numpy.ndarray): The heights
        wavelength (float): Wavelength in meters
        dispersion (DispersionModel): The material
        strict (bool): Raise instead of warn when the phase reaches pi

    Returns:
        numpy.ndarray: Phase in radians

    Raises:
        ModelError: If n <= 1, or in strict mode when max phase >= pi
    """
    heights = np.asarray(getattr(depth, "heights", depth), dtype=np.float64)
    index = refractive_index(dispersion, wavelength)
    phase = 2.0 * np.pi * (index - 1.0) * heights / wavelength
    if phase.size and np.max(phase) >= np.pi:
        msg = (
            f"Phase reaches {np.max(phase):.4f} rad >= pi at {wavelength} m, "
            "wrapped phases become ambiguous"
        )
        if strict:
            raise ModelError(msg)
        warnings.warn(msg, PhaseWrapWarning)
    return phase


def phase_to_thickness(phase, wavelength, dispersion, pixel_pitch=1.0):
    """Heights from a phase map, phi lambda / (2 pi (n - 1))

    Negative heights are clipped to the substrate.

    Args:
        phase (numpy.ndarray): Phase in radians
        wavelength (float): Wavelength in meters
        dispersion (DispersionModel): The material
        pixel_pitch (float): Pitch recorded on the depth map

    Returns:
        DepthMap: The heights
    """
    index = refractive_index(dispersion, wavelength)
    heights = (
        np.asarray(phase, dtype=np.float64)
        * wavelength
        / (2.0 * np.pi * (index - 1.0))
    )
    return DepthMap(np.clip(heights, 0.0, None), pixel_pitch)


def rrmse(estimate, truth):
    """Relative root-mean-square error ||est - truth|| / ||truth||

    Raises:
        InvalidArgumentError: If shapes differ or truth has zero norm
    """
    estimate = np.asarray(estimate, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if estimate.shape != truth.shape:
        raise InvalidArgumentError(
            f"Estimate is {estimate.shape} but truth is {truth.shape}"
        )
    norm = np.linalg.norm(truth)
    if norm == 0:
        raise InvalidArgumentError("RRMSE is undefined for a zero truth")
    return float(np.linalg.norm(estimate - truth) / norm)


def plateau_mean(depth, mask):
    """Mean height over the pixels of mask"""
    heights = np.asarray(getattr(depth, "heights", depth), dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != heights.shape:
        raise InvalidArgumentError(
            f"Mask is {mask.shape} but depth map is {heights.shape}"
        )
    if not mask.any():
        raise InvalidArgumentError("Plateau mask selects no pixels")
    return float(np.mean(heights[mask]))
