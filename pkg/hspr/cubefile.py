"""Read and write the binary hypercube container

Layout: the 8-byte magic, the header length as unsigned 64-bit little
endian, the JSON header, then the raw little-endian payload with the slice
index outermost and each slice stored row-major.
"""
import json
import logging
import os
import struct
import tempfile
from collections import namedtuple
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .exceptions import CubeFormatError, InvalidArgumentError
from .optics import HyperCube
from .spectroscopy import (
    DelayLineConfig,
    InterferogramStack,
    SpectralAmplitudeCube,
    WavelengthGrid,
)

logger = logging.getLogger(__name__)

MAGIC = b"HSCUBE1\n"
HEADER_LEN = struct.Struct("<Q")
DTYPES = {"f64": np.dtype("<f8"), "c128": np.dtype("<c16")}
# what the slices hold
KINDS = ("field", "stack", "spectra", "real")
REQUIRED_KEYS = (
    "dtype",
    "rows",
    "cols",
    "slices",
    "wavelengths_m",
    "pixel_pitch_m",
)


class CubeFile(
    namedtuple(
        "CubeFile",
        ["data", "wavelengths", "pixel_pitch", "delta_z", "n_steps", "kind"],
    )
):
    """Contents of a cube file

    Attributes:
        data (numpy.ndarray): rows x cols x slices, float64 or complex128
        wavelengths (numpy.ndarray): Slice wavelengths in meters, empty for
            interferogram stacks
        pixel_pitch (float): Pitch in meters
        delta_z (float): Delay step in meters, or None
        n_steps (int): Delay steps, or None
        kind (str): field, stack, spectra or real
    """

    __slots__ = ()

    def __new__(
        cls,
        data,
        wavelengths=(),
        pixel_pitch=1.0,
        delta_z=None,
        n_steps=None,
        kind="real",
    ):
        data = np.asarray(data)
        if data.ndim != 3:
            raise InvalidArgumentError(
                f"Cube data must be 3D, got {data.shape}"
            )
        if np.iscomplexobj(data):
            data = data.astype(np.complex128, copy=False)
        else:
            data = data.astype(np.float64, copy=False)
        wavelengths = np.asarray(wavelengths, dtype=np.float64).ravel()
        if kind not in KINDS:
            raise InvalidArgumentError(
                f"Unknown cube kind {kind!r}, expect one of {KINDS}"
            )
        if kind != "stack" and wavelengths.size != data.shape[2]:
            raise InvalidArgumentError(
                f"Cube has {data.shape[2]} slices but "
                f"{wavelengths.size} wavelengths"
            )
        return super().__new__(
            cls,
            data,
            wavelengths,
            float(pixel_pitch),
            None if delta_z is None else float(delta_z),
            None if n_steps is None else int(n_steps),
            kind,
        )

    @property
    def dtype_name(self):
        return "c128" if np.iscomplexobj(self.data) else "f64"

    def delay(self):
        """The delay line recorded in the file

        Raises:
            CubeFormatError: If the delay metadata is missing
        """
        if self.delta_z is None or self.n_steps is None:
            raise CubeFormatError("Cube file has no delay metadata")
        return DelayLineConfig(self.delta_z, self.n_steps)

    @classmethod
    def from_hypercube(cls, cube, kind="field"):
        return cls(cube.data, cube.wavelengths, cube.pixel_pitch, kind=kind)

    @classmethod
    def from_stack(cls, stack):
        return cls(
            stack.data,
            (),
            stack.pixel_pitch,
            stack.delay.delta_z,
            stack.delay.n_steps,
            kind="stack",
        )

    @classmethod
    def from_spectra(cls, cube, delay):
        return cls(
            cube.amplitudes,
            cube.grid.wavelengths,
            cube.pixel_pitch,
            delay.delta_z,
            delay.n_steps,
            kind="spectra",
        )

    def to_hypercube(self):
        return HyperCube(self.data, self.wavelengths, self.pixel_pitch)

    def to_stack(self):
        if self.kind != "stack":
            raise CubeFormatError(
                f"Expect an interferogram stack, got a {self.kind} cube"
            )
        return InterferogramStack(self.data, self.delay(), self.pixel_pitch)

    def to_spectra(self):
        if self.kind != "spectra":
            raise CubeFormatError(
                f"Expect a spectral amplitude cube, got a {self.kind} cube"
            )
        grid = WavelengthGrid.from_wavelengths(self.wavelengths, self.delay())
        return SpectralAmplitudeCube(
            self.data, grid, pixel_pitch=self.pixel_pitch
        )

    def header(self):
        """The JSON header as a dict"""
        rows, cols, slices = self.data.shape
        header = {
            "cols": cols,
            "dtype": self.dtype_name,
            "kind": self.kind,
            "pixel_pitch_m": self.pixel_pitch,
            "rows": rows,
            "slices": slices,
            "wavelengths_m": self.wavelengths.tolist(),
        }
        if self.delta_z is not None:
            header["delta_z_m"] = self.delta_z
        if self.n_steps is not None:
            header["n_steps"] = self.n_steps
        return header


@contextmanager
def atomic_write(path, mode="wb", **kwargs):
    """Write to a temporary file next to path, renamed over it on success"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, mode, **kwargs) as handle:
            yield handle
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def encode_cube(cube):
    """Serialize a CubeFile into bytes"""
    header = json.dumps(
        cube.header(), sort_keys=True, separators=(",", ":")
    ).encode("utf-8")
    payload = np.ascontiguousarray(
        np.transpose(cube.data, (2, 0, 1)), dtype=DTYPES[cube.dtype_name]
    )
    return b"".join(
        [MAGIC, HEADER_LEN.pack(len(header)), header, payload.tobytes()]
    )


def write_cube(path, cube):
    """Write a CubeFile atomically

    Args:
        path (str|Path): Target file
        cube (CubeFile): The contents
    """
    with atomic_write(path) as handle:
        handle.write(encode_cube(cube))
    logger.info(
        "Wrote %s cube %s to %s", cube.kind, cube.data.shape, str(path)
    )


def _parse_header(raw):
    try:
        header = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CubeFormatError("Cube header is not valid JSON") from exc
    if not isinstance(header, dict):
        raise CubeFormatError("Cube header must be a JSON object")
    missing = [key for key in REQUIRED_KEYS if key not in header]
    if missing:
        raise CubeFormatError(f"Cube header lacks keys: {missing}")
    if header["dtype"] not in DTYPES:
        raise CubeFormatError(f"Unknown cube dtype {header['dtype']!r}")
    for key in ("rows", "cols", "slices"):
        if not isinstance(header[key], int) or header[key] < 0:
            raise CubeFormatError(
                f"Header {key} must be a non-negative integer, "
                f"got {header[key]!r}"
            )
    return header


def decode_cube(blob):
    """Parse bytes produced by encode_cube

    Raises:
        CubeFormatError: If the bytes are not a well-formed cube
    """
    if blob[:len(MAGIC)] != MAGIC:
        raise CubeFormatError("Not a cube file, bad magic")
    offset = len(MAGIC) + HEADER_LEN.size
    if len(blob) < offset:
        raise CubeFormatError("Cube file is truncated in its header length")
    (header_len,) = HEADER_LEN.unpack_from(blob, len(MAGIC))
    if len(blob) < offset + header_len:
        raise CubeFormatError(
            f"Header length {header_len} runs past the end of the file"
        )
    header = _parse_header(blob[offset:offset + header_len])

    dtype = DTYPES[header["dtype"]]
    rows, cols, slices = header["rows"], header["cols"], header["slices"]
    payload = blob[offset + header_len:]
    expected = rows * cols * slices * dtype.itemsize
    if len(payload) != expected:
        raise CubeFormatError(
            f"Payload has {len(payload)} bytes, expect {expected}"
        )
    data = np.frombuffer(payload, dtype=dtype).reshape(slices, rows, cols)
    data = np.ascontiguousarray(np.transpose(data, (1, 2, 0)))
    data = data.astype(dtype.newbyteorder("="), copy=False)

    try:
        return CubeFile(
            data,
            header["wavelengths_m"],
            header["pixel_pitch_m"],
            header.get("delta_z_m"),
            header.get("n_steps"),
            header.get("kind", "real"),
        )
    except (InvalidArgumentError, TypeError) as exc:
        raise CubeFormatError(f"Inconsistent cube header: {exc}") from exc


def read_cube(path):
    """Read a cube file

    Args:
        path (str|Path): The file

    Returns:
        CubeFile: The contents

    Raises:
        CubeFormatError: If the file is malformed
        OSError: If the file cannot be read
    """
    cube = decode_cube(Path(path).read_bytes())
    logger.debug("Read %s cube %s from %s", cube.kind, cube.data.shape, path)
    return cube
