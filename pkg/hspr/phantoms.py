"""Ground-truth depth phantoms and the object fields they produce"""
import logging
from collections import namedtuple
from pathlib import Path

import numpy as np
from PIL import Image

from .exceptions import ConfigurationError, InvalidArgumentError
from .metrics import DepthMap, thickness_to_phase
from .optics import ComplexField, HyperCube

logger = logging.getLogger(__name__)

PHANTOM_KINDS = ("binary_bars", "graymap")
MIN_FRAME = 16
# bars per element, and the long edge of a bar in units of its width
BARS = 3
BAR_LENGTH = 5


class PhantomSpec(
    namedtuple(
        "PhantomSpec", ["kind", "max_depth", "bar_layout", "graymap_source"]
    )
):
    """What phantom to build

    Attributes:
        kind (str): binary_bars or graymap
        max_depth (float): Height of the tallest feature in meters
        bar_layout (tuple): ((row, col), width) of each three-bar element,
            generated from the frame size when None
        graymap_source (str): Path of an 8-bit grayscale image for graymap
    """

    __slots__ = ()

    def __new__(
        cls,
        kind="binary_bars",
        max_depth=317e-9,
        bar_layout=None,
        graymap_source=None,
    ):
        if kind not in PHANTOM_KINDS:
            raise ConfigurationError(
                f"Unknown phantom kind {kind!r}, "
                f"expect one of {PHANTOM_KINDS}"
            )
        if not max_depth > 0:
            raise ConfigurationError(
                f"Phantom max depth must be positive, got {max_depth}"
            )
        if kind == "graymap" and not graymap_source:
            raise ConfigurationError("A graymap phantom needs a source image")
        if bar_layout is not None:
            bar_layout = tuple(
                ((int(pos[0]), int(pos[1])), int(width))
                for pos, width in bar_layout
            )
        return super().__new__(
            cls, kind, float(max_depth), bar_layout, graymap_source
        )


def element_extent(width):
    """Rows and columns covered by one element of bar width"""
    # vertical triplet, one gap, horizontal triplet
    side = BAR_LENGTH * width
    return side, 2 * side + width


def default_bar_layout(rows, cols):
    """Elements of halving size, the largest on top, the rest below it

    A zero-height margin of at least two pixels is kept on every side.
    """
    margin = max(2, min(rows, cols) // 16)
    width = max(1, (min(rows, cols) - 2 * margin) // (4 * BAR_LENGTH - 8))
    layout = [((margin, margin), width)]
    first_rows, _ = element_extent(width)

    row = margin + first_rows + width
    col = margin
    width //= 2
    while width >= 1:
        height, span = element_extent(width)
        if row + height > rows - margin or col + span > cols - margin:
            break
        layout.append(((row, col), width))
        col += span + width
        width //= 2
    return tuple(layout)


def _draw_element(canvas, row, col, width, depth):
    side, _ = element_extent(width)
    for bar in range(BARS):
        offset = 2 * bar * width
        # vertical bars
        canvas[row:row + side, col + offset:col + offset + width] = depth
        # horizontal bars, right of the vertical ones
        left = col + side + width
        canvas[row + offset:row + offset + width, left:left + side] = depth


def _binary_bars(spec, rows, cols):
    layout = spec.bar_layout or default_bar_layout(rows, cols)
    heights = np.zeros((rows, cols))
    for (row, col), width in layout:
        height, span = element_extent(width)
        if (
            width < 1
            or row < 0
            or col < 0
            or row + height > rows
            or col + span > cols
        ):
            raise InvalidArgumentError(
                f"Bar element at ({row}, {col}) of width {width} does not "
                f"fit the {rows}x{cols} frame"
            )
        _draw_element(heights, row, col, width, spec.max_depth)
    return heights


def _graymap(spec, rows, cols):
    path = Path(spec.graymap_source)
    try:
        with Image.open(path) as img:
            gray = img.convert("L")
            if gray.size != (cols, rows):
                gray = gray.resize((cols, rows), Image.Resampling.NEAREST)
            levels = np.asarray(gray, dtype=np.float64)
    except OSError as exc:
        raise OSError(f"Cannot read graymap source {str(path)!r}") from exc
    return spec.max_depth * levels / 255.0


def make_phantom(spec, rows, cols, pixel_pitch):
    """Build a depth phantom

    binary_bars draws resolution-target style elements of three vertical
    and three horizontal bars at height max_depth on a zero substrate.
    graymap scales the luminance of an 8-bit image to [0, max_depth].

    Args:
        spec (PhantomSpec): What to build
        rows (int): Frame rows, at least 16
        cols (int): Frame columns, at least 16
        pixel_pitch (float): Pitch in meters

    Returns:
        DepthMap: The phantom

    Raises:
        InvalidArgumentError: If the frame is too small or a bar element
            does not fit
        OSError: If the graymap source cannot be read
    """
    if rows < MIN_FRAME or cols < MIN_FRAME:
        raise InvalidArgumentError(
            f"Phantom frame must be at least {MIN_FRAME}x{MIN_FRAME}, "
            f"got {rows}x{cols}"
        )
    if spec.kind == "binary_bars":
        heights = _binary_bars(spec, rows, cols)
    else:
        heights = _graymap(spec, rows, cols)
    logger.debug(
        "Built %s phantom %dx%d, max depth %g m",
        spec.kind,
        rows,
        cols,
        spec.max_depth,
    )
    return DepthMap(heights, pixel_pitch)


def object_field(depth, wavelength, dispersion, pixel_pitch=None, strict=False):
    """Unit-amplitude phase object exp(j phi) of a depth map"""
    phase = thickness_to_phase(depth, wavelength, dispersion, strict=strict)
    pitch = depth.pixel_pitch if pixel_pitch is None else pixel_pitch
    return ComplexField(np.exp(1j * phase), wavelength, pitch)


def object_cube(depth, wavelengths, dispersion, strict=False):
    """Object fields of a depth map at every wavelength"""
    return HyperCube.from_fields(
        [
            object_field(depth, wavelength, dispersion, strict=strict)
            for wavelength in wavelengths
        ]
    )
