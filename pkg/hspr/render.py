"""Static artifacts: grayscale images, cross-sections and tables"""
import csv
import json
import logging
from pathlib import Path

import numpy as np
from PIL import Image

from .cubefile import atomic_write
from .exceptions import InvalidArgumentError
from .metrics import phase_to_thickness

logger = logging.getLogger(__name__)

QUANTITIES = ("amplitude", "phase", "depth", "real")
LEVELS = 255


def slice_quantity(cube, index, quantity, dispersion=None):
    """One slice of a cube as a real map

    Args:
        cube (HyperCube): The cube
        index (int): Slice index
        quantity (str): amplitude, phase, depth (meters, from the phase) or
            real (the real part as is)
        dispersion (DispersionModel): Needed for depth

    Returns:
        numpy.ndarray: The map

    Raises:
        InvalidArgumentError: If the index or quantity is invalid
    """
    if not 0 <= index < cube.L:
        raise InvalidArgumentError(
            f"Slice index {index} out of range [0, {cube.L})"
        )
    if quantity not in QUANTITIES:
        raise InvalidArgumentError(
            f"Unknown quantity {quantity!r}, expect one of {QUANTITIES}"
        )
    data = cube.data[:, :, index]
    if quantity == "amplitude":
        return np.abs(data)
    if quantity == "phase":
        return np.angle(data)
    if quantity == "depth":
        if dispersion is None:
            raise InvalidArgumentError("Depth rendering needs a dispersion")
        return phase_to_thickness(
            np.angle(data), cube.wavelengths[index], dispersion
        ).heights
    return np.real(data).astype(np.float64)


def check_selection(cube, slices=(), rows=(), cols=()):
    """Make sure every slice, row and column index lies inside the cube

    Raises:
        InvalidArgumentError: Listing the indices out of range
    """
    for name, indices, size in (
        ("slice", slices, cube.L),
        ("row", rows, cube.rows),
        ("col", cols, cube.cols),
    ):
        bad = [index for index in indices if not 0 <= index < size]
        if bad:
            raise InvalidArgumentError(
                f"{name} indices {bad} out of range [0, {size})"
            )


def to_gray_levels(values):
    """Min-max normalize values to 8-bit levels

    Returns:
        tuple: The uint8 levels and the sidecar record with min, max and
            whether the map is constant
    """
    values = np.asarray(values, dtype=np.float64)
    low, high = float(np.min(values)), float(np.max(values))
    constant = not high > low
    if constant:
        levels = np.zeros(values.shape, dtype=np.uint8)
    else:
        scaled = (values - low) / (high - low) * LEVELS
        levels = np.round(scaled).astype(np.uint8)
    return levels, {"min": low, "max": high, "constant": constant}


def write_pgm(path, values, **meta):
    """Write an 8-bit binary PGM with a JSON sidecar of the scaling

    Args:
        path (str|Path): Target .pgm file
        values (numpy.ndarray): The 2D map
        **meta: Extra sidecar entries

    Returns:
        dict: The sidecar record
    """
    path = Path(path)
    levels, sidecar = to_gray_levels(values)
    sidecar.update(meta)
    with atomic_write(path) as handle:
        Image.fromarray(levels).save(handle, format="PPM")
    with atomic_write(
        path.with_suffix(".json"), "w", encoding="utf-8"
    ) as handle:
        json.dump(sidecar, handle, sort_keys=True, indent=2)
    logger.debug("Wrote %s", str(path))
    return sidecar


def cross_section(values, pixel_pitch, row=None, col=None):
    """A line through a map

    Exactly one of row and col is given.

    Returns:
        tuple: Positions in micrometers and the values along the line
    """
    values = np.asarray(values)
    if (row is None) == (col is None):
        raise InvalidArgumentError("Give exactly one of row and col")
    if row is not None:
        if not 0 <= row < values.shape[0]:
            raise InvalidArgumentError(f"Row {row} out of range")
        line = values[row, :]
    else:
        if not 0 <= col < values.shape[1]:
            raise InvalidArgumentError(f"Column {col} out of range")
        line = values[:, col]
    positions = np.arange(line.size) * pixel_pitch * 1e6
    return positions, line


def write_csv(path, header, rows):
    """Write a comma separated table with a header row"""
    with atomic_write(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)
    logger.debug("Wrote %s", str(path))


def write_cross_section(path, positions, line):
    write_csv(
        path,
        ["position_um", "value"],
        ([float(pos), float(val)] for pos, val in zip(positions, line)),
    )
