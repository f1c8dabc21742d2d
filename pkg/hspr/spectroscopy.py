"""Delay-line interferograms and Fourier-transform spectral estimation"""
import logging
import math
from collections import namedtuple

import numpy as np
from scipy import fft

from .exceptions import ConfigurationError, InvalidArgumentError

logger = logging.getLogger(__name__)

# relative slack when testing a wavelength against its DFT bin
ON_GRID_RTOL = 1e-9


class DelayLineConfig(namedtuple("DelayLineConfig", ["delta_z", "n_steps"])):
    """Delay line with n_steps steps of size delta_z (meters)"""

    __slots__ = ()

    def __new__(cls, delta_z, n_steps):
        if not delta_z > 0:
            raise InvalidArgumentError(
                f"Delay step must be positive, got {delta_z}"
            )
        if int(n_steps) != n_steps or int(n_steps) < 2:
            raise InvalidArgumentError(
                f"Delay line needs an integer number of steps >= 2, "
                f"got {n_steps}"
            )
        return super().__new__(cls, float(delta_z), int(n_steps))

    @property
    def total_travel(self):
        """Z = N * dz"""
        return self.n_steps * self.delta_z

    @property
    def spectral_resolution(self):
        """Wavenumber resolution 1 / (2 Z) in 1/m"""
        return 1.0 / (2.0 * self.total_travel)

    def nyquist_ok(self, lambda_min):
        """Whether dz is at most half of the smallest wavelength"""
        return self.delta_z <= lambda_min / 2.0

    def z_positions(self):
        return np.arange(self.n_steps) * self.delta_z

    def bin_of(self, wavelength):
        """The DFT bin q with wavelength == Z / q

        Raises:
            InvalidArgumentError: If the wavelength is off the bin grid
        """
        ratio = self.total_travel / wavelength
        q = int(round(ratio))
        if q < 1 or abs(ratio - q) > ON_GRID_RTOL * ratio:
            raise InvalidArgumentError(
                f"Wavelength {wavelength!r} m is not on the delay grid "
                f"(Z/lambda = {ratio!r} is not an integer)"
            )
        return q


class WavelengthGrid(
    namedtuple("WavelengthGrid", ["wavelengths", "bin_indices"])
):
    """On-grid wavelengths, ascending, with their DFT bins (descending)"""

    __slots__ = ()

    def __new__(cls, wavelengths, bin_indices):
        wavelengths = np.asarray(wavelengths, dtype=np.float64).ravel()
        bin_indices = np.asarray(bin_indices, dtype=np.int64).ravel()
        if wavelengths.size != bin_indices.size:
            raise InvalidArgumentError(
                "Wavelengths and bin indices differ in length"
            )
        if np.any(bin_indices < 1):
            raise InvalidArgumentError("Bin indices must be >= 1")
        if np.any(np.diff(wavelengths) <= 0) or np.any(
            np.diff(bin_indices) >= 0
        ):
            raise InvalidArgumentError(
                "Wavelengths must ascend and bin indices descend strictly"
            )
        return super().__new__(cls, wavelengths, bin_indices)

    @classmethod
    def from_wavelengths(cls, wavelengths, delay):
        """Grid of on-grid wavelengths, bins looked up on the delay line"""
        wavelengths = np.sort(np.asarray(wavelengths, dtype=np.float64))
        bins = [delay.bin_of(wavelength) for wavelength in wavelengths]
        return cls([delay.total_travel / q for q in bins], bins)

    @property
    def L(self):
        return self.wavelengths.size

    def subset(self, count):
        """An evenly spaced subset of count wavelengths, ends kept

        Args:
            count (int|None): Number of wavelengths; None or >= L keeps all

        Returns:
            WavelengthGrid: The subset
        """
        if count is None or count >= self.L:
            return self
        if count < 1:
            raise InvalidArgumentError(
                f"Wavelength subset needs count >= 1, got {count}"
            )
        picks = np.unique(np.round(np.linspace(0, self.L - 1, count)))
        picks = picks.astype(np.int64)
        return WavelengthGrid(self.wavelengths[picks], self.bin_indices[picks])


class InterferogramStack(
    namedtuple("InterferogramStack", ["data", "delay", "pixel_pitch"])
):
    """Sensor intensities J(x, y, z_m), rows x cols x N"""

    __slots__ = ()

    def __new__(cls, data, delay, pixel_pitch):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 3:
            raise InvalidArgumentError(
                f"Interferogram stack must be 3D, got {data.shape}"
            )
        if data.shape[2] != delay.n_steps:
            raise InvalidArgumentError(
                f"Stack has {data.shape[2]} delay samples but the delay "
                f"line has {delay.n_steps} steps"
            )
        if not pixel_pitch > 0:
            raise InvalidArgumentError(
                f"Pixel pitch must be positive, got {pixel_pitch}"
            )
        return super().__new__(cls, data, delay, float(pixel_pitch))


class SpectralAmplitudeCube(
    namedtuple(
        "SpectralAmplitudeCube",
        ["amplitudes", "grid", "spectral_weights", "pixel_pitch"],
    )
):
    """Sensor-plane spectral amplitudes |V(lambda_s)|, rows x cols x L"""

    __slots__ = ()

    def __new__(cls, amplitudes, grid, spectral_weights=None, pixel_pitch=1.0):
        amplitudes = np.asarray(amplitudes, dtype=np.float64)
        if amplitudes.ndim != 3:
            raise InvalidArgumentError(
                f"Amplitude cube must be 3D, got {amplitudes.shape}"
            )
        if amplitudes.shape[2] != grid.L:
            raise InvalidArgumentError(
                f"Amplitude cube has {amplitudes.shape[2]} slices but the "
                f"grid has {grid.L} wavelengths"
            )
        if not np.all(np.isfinite(amplitudes)):
            raise InvalidArgumentError("Amplitude cube contains NaN or Inf")
        if np.any(amplitudes < 0):
            raise InvalidArgumentError("Amplitudes must be >= 0")
        if spectral_weights is None:
            spectral_weights = np.ones(grid.L)
        spectral_weights = np.asarray(spectral_weights, dtype=np.float64)
        if spectral_weights.shape != (grid.L,):
            raise InvalidArgumentError(
                "One spectral weight per wavelength is required"
            )
        if not pixel_pitch > 0:
            raise InvalidArgumentError(
                f"Pixel pitch must be positive, got {pixel_pitch}"
            )
        return super().__new__(
            cls, amplitudes, grid, spectral_weights, float(pixel_pitch)
        )

    @property
    def L(self):
        return self.grid.L

    def intensities(self):
        return self.amplitudes ** 2

    def subset(self, grid):
        """The slices of the wavelengths in grid"""
        picks = [
            int(np.flatnonzero(self.grid.bin_indices == q)[0])
            for q in grid.bin_indices
        ]
        return SpectralAmplitudeCube(
            self.amplitudes[:, :, picks],
            grid,
            self.spectral_weights[picks],
            self.pixel_pitch,
        )


class PsnrReport(
    namedtuple(
        "PsnrReport", ["wavelengths", "per_wavelength", "aggregate"]
    )
):
    """Spectral-domain PSNR, per wavelength and aggregated

    Attributes:
        wavelengths (numpy.ndarray): The grid wavelengths
        per_wavelength (numpy.ndarray): PSNR of each spectral component (dB)
        aggregate (float|None): The band-wide approximation
            10 log10(max J / (sigma sqrt(N))), None without a stack
    """

    __slots__ = ()

    @property
    def mean(self):
        return float(np.mean(self.per_wavelength))

    @property
    def min(self):
        return float(np.min(self.per_wavelength))

    @property
    def max(self):
        return float(np.max(self.per_wavelength))


def wavelength_grid_for_band(delay, band_min, band_max):
    """All on-grid wavelengths Z/q inside [band_min, band_max]

    Args:
        delay (DelayLineConfig): The delay line
        band_min (float): Lower band edge in meters
        band_max (float): Upper band edge in meters

    Returns:
        WavelengthGrid: The grid, ascending wavelengths

    Raises:
        InvalidArgumentError: If the band is empty or not positive
        ConfigurationError: If dz > band_min / 2 (Nyquist)
    """
    if not 0 < band_min < band_max:
        raise InvalidArgumentError(
            f"Band must satisfy 0 < min < max, got [{band_min}, {band_max}]"
        )
    if not delay.nyquist_ok(band_min):
        raise ConfigurationError(
            f"Delay step {delay.delta_z!r} m exceeds half of the smallest "
            f"wavelength {band_min!r} m"
        )

    travel = delay.total_travel
    q_low = max(1, math.floor(travel / band_max) - 1)
    q_high = math.ceil(travel / band_min) + 1
    slack = ON_GRID_RTOL
    bins = [
        q
        for q in range(q_high, q_low - 1, -1)
        if band_min * (1 - slack) <= travel / q <= band_max * (1 + slack)
    ]
    grid = WavelengthGrid([travel / q for q in bins], bins)
    logger.debug(
        "Wavelength grid: %d bins in [%g, %g] m", grid.L, band_min, band_max
    )
    return grid


def spectral_weight_profile(
    grid, profile="uniform", center=None, width=None, scale=1.0
):
    """Source weights per wavelength

    Args:
        grid (WavelengthGrid): The wavelengths
        profile (str): uniform or gaussian
        center (float): Center of the gaussian bump in meters, the band
            middle by default
        width (float): Standard deviation of the bump in meters, a quarter
            of the band by default
        scale (float): Peak weight

    Returns:
        numpy.ndarray: The weights
    """
    if not scale > 0:
        raise InvalidArgumentError(f"Weight scale must be positive: {scale}")
    if profile == "uniform":
        return np.full(grid.L, float(scale))
    if profile == "gaussian":
        lo, hi = grid.wavelengths[0], grid.wavelengths[-1]
        center = (lo + hi) / 2.0 if center is None else center
        width = max(hi - lo, lo * 1e-3) / 4.0 if width is None else width
        if not width > 0:
            raise InvalidArgumentError(
                f"Profile width must be positive: {width}"
            )
        return scale * np.exp(
            -0.5 * ((grid.wavelengths - center) / width) ** 2
        )
    raise InvalidArgumentError(f"Unknown spectral profile: {profile!r}")


def _delay_kernel(bins, n_steps):
    """2 + 2 cos(2 pi m q / N) for every bin q and step m

    The phase m q / N is reduced modulo N in integers first, which is the
    same as z_m / lambda_q for on-grid wavelengths.
    """
    steps = np.arange(n_steps, dtype=np.int64)
    cycles = np.mod(np.outer(bins, steps), n_steps)
    return 2.0 + 2.0 * np.cos(2.0 * np.pi * cycles / n_steps)


def synthesize_interferograms(cube, delay):
    """Self-reference interferograms J(z_m) for a sensor-plane cube

    J(z_m) = sum_s |V(lambda_s)|^2 * (2 + 2 cos(2 pi z_m / lambda_s))
    for z_m = m * dz, m = 0 .. N - 1.

    Args:
        cube (HyperCube): Complex sensor-plane wavefronts
        delay (DelayLineConfig): The delay line

    Returns:
        InterferogramStack: The noiseless stack

    Raises:
        InvalidArgumentError: If a wavelength is off the bin grid
    """
    bins = np.array([delay.bin_of(w) for w in cube.wavelengths])
    intensities = np.abs(cube.data) ** 2
    kernel = _delay_kernel(bins, delay.n_steps)
    data = np.tensordot(intensities, kernel, axes=([2], [0]))
    logger.debug(
        "Synthesized %dx%dx%d stack from %d wavelengths",
        cube.rows,
        cube.cols,
        delay.n_steps,
        cube.L,
    )
    return InterferogramStack(data, delay, cube.pixel_pitch)


def derive_seed(seed, stage):
    """A stage sub-seed from the run seed by fixed integer mixing"""
    return (int(seed) * 1000003 + int(stage) * 7919) % (2 ** 63)


def add_noise(stack, sigma_noise, rng_seed):
    """Add i.i.d. zero-mean Gaussian noise to every sample

    Rows draw from independent generators seeded by (rng_seed, row), so
    the result does not depend on how the rows are scheduled.

    Args:
        stack (InterferogramStack): The clean stack
        sigma_noise (float): Noise standard deviation
        rng_seed (int): Seed

    Returns:
        InterferogramStack: The noisy stack

    Raises:
        InvalidArgumentError: If sigma_noise is negative
    """
    if not sigma_noise >= 0:
        raise InvalidArgumentError(
            f"Noise sigma must be >= 0, got {sigma_noise}"
        )
    if int(rng_seed) < 0:
        raise InvalidArgumentError(f"Seed must be >= 0, got {rng_seed}")
    if sigma_noise == 0:
        return stack._replace(data=stack.data.copy())

    noisy = stack.data.copy()
    row_shape = noisy.shape[1:]
    for row in range(noisy.shape[0]):
        rng = np.random.default_rng([int(rng_seed), row])
        noisy[row] += rng.normal(0.0, sigma_noise, size=row_shape)
    return stack._replace(data=noisy)


def _checked_bins(stack, grid):
    bins = grid.bin_indices
    n_steps = stack.delay.n_steps
    if grid.L and np.max(bins) * 2 >= n_steps:
        raise InvalidArgumentError(
            f"Bin index {int(np.max(bins))} is not below N/2 = {n_steps / 2}"
        )
    return bins


def complex_spectra(stack, grid, workers=None):
    """Complex DFT bins of J over z, divided by N

    Args:
        stack (InterferogramStack): The stack
        grid (WavelengthGrid): Bins to read
        workers (int): Threads for the FFT, see scipy.fft

    Returns:
        numpy.ndarray: rows x cols x L complex spectra
    """
    bins = _checked_bins(stack, grid)
    spectrum = fft.rfft(stack.data, axis=-1, workers=workers)
    return spectrum[:, :, bins] / stack.delay.n_steps


def estimate_spectra(stack, grid, workers=None):
    """Spectral amplitudes from an interferogram stack

    |V(lambda_s)|^2 = |DFT(J)[q_s]| / N, amplitude is its square root.
    The DC bin is never read.

    Args:
        stack (InterferogramStack): The (noisy) stack
        grid (WavelengthGrid): The wavelengths to estimate
        workers (int): Threads for the FFT, see scipy.fft

    Returns:
        SpectralAmplitudeCube: The estimated amplitudes

    Raises:
        InvalidArgumentError: If a bin index is >= N/2
    """
    intensities = np.abs(complex_spectra(stack, grid, workers=workers))
    return SpectralAmplitudeCube(
        np.sqrt(intensities), grid, pixel_pitch=stack.pixel_pitch
    )


def _check_sigma(sigma_noise):
    if not sigma_noise > 0:
        raise InvalidArgumentError(
            f"PSNR is undefined for sigma {sigma_noise}, it must be > 0"
        )


def psnr_observations(stack, sigma_noise):
    """PSNR of the observations, 10 log10(max J / sigma)

    The ratio is intensity over standard deviation, not squared. A stack
    without a positive sample gives -inf.

    Raises:
        InvalidArgumentError: If sigma_noise <= 0
    """
    _check_sigma(sigma_noise)
    peak = float(np.max(stack.data))
    if not peak > 0:
        return -math.inf
    return 10.0 * math.log10(peak / sigma_noise)


def psnr_spectral(cube, sigma_noise, delay, stack=None):
    """PSNR of each spectral component

    For each wavelength 10 log10(max_xy |V|^2 / (sigma / sqrt(N))).

    Args:
        cube (SpectralAmplitudeCube): The spectral amplitudes
        sigma_noise (float): Noise sigma of the observations
        delay (DelayLineConfig): The delay line (for N)
        stack (InterferogramStack): If given, the band-wide approximation
            10 log10(max J / (sigma sqrt(N))) is reported as aggregate

    Returns:
        PsnrReport: Per-wavelength values and the aggregate

    Raises:
        InvalidArgumentError: If sigma_noise <= 0
    """
    _check_sigma(sigma_noise)
    spectral_sigma = sigma_noise / math.sqrt(delay.n_steps)
    peaks = np.max(cube.intensities(), axis=(0, 1))
    with np.errstate(divide="ignore"):
        per_wavelength = 10.0 * np.log10(peaks / spectral_sigma)

    aggregate = None
    if stack is not None:
        aggregate = psnr_observations(stack, sigma_noise) - 5.0 * math.log10(
            delay.n_steps
        )
    return PsnrReport(cube.grid.wavelengths, per_wavelength, aggregate)
