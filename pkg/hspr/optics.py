"""Field records and the angular-spectrum propagation operator"""
import logging
from collections import OrderedDict, namedtuple

import numpy as np
from scipy import fft

from .exceptions import InvalidArgumentError

logger = logging.getLogger(__name__)

TRANSFER_CACHE_BYTES = 256 * 2 ** 20


class ComplexField(
    namedtuple("ComplexField", ["data", "wavelength", "pixel_pitch"])
):
    """One 2D complex wavefront at a fixed wavelength

    Attributes:
        data (numpy.ndarray): rows x cols complex128 amplitudes
        wavelength (float): Wavelength in meters
        pixel_pitch (float): Sampling pitch in meters
    """

    __slots__ = ()

    def __new__(cls, data, wavelength, pixel_pitch):
        data = np.asarray(data, dtype=np.complex128)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise InvalidArgumentError(
                f"Field data must be a non-empty 2D array, got {data.shape}"
            )
        if not np.all(np.isfinite(data)):
            raise InvalidArgumentError("Field data contains NaN or Inf")
        if not wavelength > 0:
            raise InvalidArgumentError(
                f"Wavelength must be positive, got {wavelength}"
            )
        if not pixel_pitch > 0:
            raise InvalidArgumentError(
                f"Pixel pitch must be positive, got {pixel_pitch}"
            )
        return super().__new__(
            cls, data, float(wavelength), float(pixel_pitch)
        )

    @property
    def rows(self):
        return self.data.shape[0]

    @property
    def cols(self):
        return self.data.shape[1]

    @property
    def amplitude(self):
        return np.abs(self.data)

    @property
    def phase(self):
        """Phase in (-pi, pi]"""
        return np.angle(self.data)

    def with_data(self, data):
        """A field at the same wavelength and pitch with new data"""
        return ComplexField(data, self.wavelength, self.pixel_pitch)


class HyperCube(namedtuple("HyperCube", ["data", "wavelengths", "pixel_pitch"])):
    """2D slices stacked along wavelength, rows x cols x L

    Complex cubes hold wavefronts, real cubes hold intensities, amplitudes
    or phases.
    """

    __slots__ = ()

    def __new__(cls, data, wavelengths, pixel_pitch):
        data = np.asarray(data)
        wavelengths = np.asarray(wavelengths, dtype=np.float64).ravel()
        if data.ndim != 3:
            raise InvalidArgumentError(
                f"Cube data must be 3D (rows x cols x L), got {data.shape}"
            )
        if data.shape[2] != wavelengths.size:
            raise InvalidArgumentError(
                f"Cube has {data.shape[2]} slices but "
                f"{wavelengths.size} wavelengths"
            )
        if not np.all(np.isfinite(data)):
            raise InvalidArgumentError("Cube data contains NaN or Inf")
        if np.any(wavelengths <= 0):
            raise InvalidArgumentError("Cube wavelengths must be positive")
        if not pixel_pitch > 0:
            raise InvalidArgumentError(
                f"Pixel pitch must be positive, got {pixel_pitch}"
            )
        return super().__new__(cls, data, wavelengths, float(pixel_pitch))

    @classmethod
    def from_fields(cls, fields):
        """Stack ComplexFields that share dims and pitch"""
        if not fields:
            raise InvalidArgumentError("Cannot stack an empty list of fields")
        return cls(
            np.stack([field.data for field in fields], axis=-1),
            [field.wavelength for field in fields],
            fields[0].pixel_pitch,
        )

    @property
    def rows(self):
        return self.data.shape[0]

    @property
    def cols(self):
        return self.data.shape[1]

    @property
    def L(self):
        return self.data.shape[2]

    def slice(self, index):
        """The slice at index as a ComplexField"""
        return ComplexField(
            self.data[:, :, index], self.wavelengths[index], self.pixel_pitch
        )

    def index_of(self, wavelength):
        """Index of the slice nearest to wavelength"""
        return int(np.argmin(np.abs(self.wavelengths - wavelength)))


class PropagationGeometry(
    namedtuple(
        "PropagationGeometry",
        ["distance", "pixel_pitch", "rows", "cols", "padding"],
    )
):
    """Object-to-sensor geometry

    Attributes:
        distance (float): Object-to-sensor distance d in meters, 0 for
            identity propagation
        pixel_pitch (float): Sampling pitch in meters
        rows (int): Field rows
        cols (int): Field columns
        padding (int): Zero-padding factor applied before propagation
    """

    __slots__ = ()

    def __new__(cls, distance, pixel_pitch, rows, cols, padding=1):
        if not distance >= 0:
            raise InvalidArgumentError(
                f"Propagation distance must be >= 0, got {distance}"
            )
        if not pixel_pitch > 0:
            raise InvalidArgumentError(
                f"Pixel pitch must be positive, got {pixel_pitch}"
            )
        if int(rows) < 1 or int(cols) < 1:
            raise InvalidArgumentError(
                f"Frame must be at least 1x1, got {rows}x{cols}"
            )
        if int(padding) < 1:
            raise InvalidArgumentError(
                f"Padding factor must be >= 1, got {padding}"
            )
        return super().__new__(
            cls,
            float(distance),
            float(pixel_pitch),
            int(rows),
            int(cols),
            int(padding),
        )

    @property
    def shape(self):
        """Shape of the padded propagation frame"""
        return self.rows * self.padding, self.cols * self.padding


class TransferCache:
    """Transfer functions kept by (geometry, wavelength) under a byte budget

    The least recently used entries are dropped once the stored arrays
    exceed max_bytes. An array larger than the budget is never stored.

    Attributes:
        max_bytes (int): The budget
        nbytes (int): Bytes currently held
    """

    def __init__(self, max_bytes=TRANSFER_CACHE_BYTES):
        self.max_bytes = int(max_bytes)
        self.nbytes = 0
        self._entries = OrderedDict()

    def __len__(self):
        return len(self._entries)

    def __contains__(self, key):
        return key in self._entries

    def get(self, key, build):
        """The cached value of key, built with build(*key) on a miss"""
        if key in self._entries:
            self._entries.move_to_end(key)
            return self._entries[key]
        value = build(*key)
        if value.nbytes <= self.max_bytes:
            self._entries[key] = value
            self.nbytes += value.nbytes
            self._shrink()
        return value

    def resize(self, max_bytes):
        """Change the budget, dropping entries that no longer fit"""
        self.max_bytes = int(max_bytes)
        self._shrink()

    def clear(self):
        self._entries.clear()
        self.nbytes = 0

    def _shrink(self):
        while self.nbytes > self.max_bytes:
            _, dropped = self._entries.popitem(last=False)
            self.nbytes -= dropped.nbytes


transfer_cache = TransferCache()


def _build_transfer_function(geom, wavelength):
    n_rows, n_cols = geom.shape
    if geom.distance == 0:
        transfer = np.ones((n_rows, n_cols), dtype=np.complex128)
    else:
        f_y = fft.fftfreq(n_rows, d=geom.pixel_pitch)
        f_x = fft.fftfreq(n_cols, d=geom.pixel_pitch)
        radial = (
            1.0 / wavelength ** 2
            - f_y[:, np.newaxis] ** 2
            - f_x[np.newaxis, :] ** 2
        )
        propagating = radial > 0
        root = np.sqrt(np.where(propagating, radial, 0.0))
        transfer = np.where(
            propagating, np.exp(2j * np.pi * geom.distance * root), 0.0
        )
    transfer.setflags(write=False)
    return transfer


def transfer_function(geom, wavelength):
    """Angular-spectrum transfer function on the DFT frequency grid

    H = exp(j*2*pi*d*sqrt(1/lambda^2 - fx^2 - fy^2)) on propagating
    frequencies and 0 on evanescent ones. Frequencies follow the unshifted
    DFT ordering of the (padded) frame. Results are kept in
    transfer_cache.

    Args:
        geom (PropagationGeometry): The geometry
        wavelength (float): Wavelength in meters

    Returns:
        numpy.ndarray: Read-only complex transfer function

    Raises:
        InvalidArgumentError: If wavelength is not positive
    """
    if not wavelength > 0:
        raise InvalidArgumentError(
            f"Wavelength must be positive, got {wavelength}"
        )
    return transfer_cache.get(
        (geom, float(wavelength)), _build_transfer_function
    )


def _check_dims(field, geom):
    if (field.rows, field.cols) != (geom.rows, geom.cols):
        raise InvalidArgumentError(
            f"Field is {field.rows}x{field.cols} but geometry is "
            f"{geom.rows}x{geom.cols}"
        )


def _apply(field, geom, transfer):
    if geom.padding == 1:
        data = fft.ifft2(fft.fft2(field.data) * transfer)
        return field.with_data(data)

    n_rows, n_cols = geom.shape
    padded = np.zeros((n_rows, n_cols), dtype=np.complex128)
    top = (n_rows - geom.rows) // 2
    left = (n_cols - geom.cols) // 2
    padded[top:top + geom.rows, left:left + geom.cols] = field.data
    data = fft.ifft2(fft.fft2(padded) * transfer)
    return field.with_data(
        data[top:top + geom.rows, left:left + geom.cols]
    )


def propagate_forward(field, geom):
    """Propagate a field from the object plane to the sensor plane

    Args:
        field (ComplexField): The object-plane field
        geom (PropagationGeometry): The geometry

    Returns:
        ComplexField: The sensor-plane field, same wavelength and pitch

    Raises:
        InvalidArgumentError: If field and geometry dims differ
    """
    _check_dims(field, geom)
    return _apply(field, geom, transfer_function(geom, field.wavelength))


def propagate_backward(field, geom):
    """Propagate a field from the sensor plane back to the object plane

    Uses the conjugate transfer function, so it inverts propagate_forward
    on the propagating band.

    Args:
        field (ComplexField): The sensor-plane field
        geom (PropagationGeometry): The geometry

    Returns:
        ComplexField: The object-plane field

    Raises:
        InvalidArgumentError: If field and geometry dims differ
    """
    _check_dims(field, geom)
    transfer = np.conj(transfer_function(geom, field.wavelength))
    return _apply(field, geom, transfer)
