import numpy as np

from hspr import (
    DelayLineConfig,
    DispersionModel,
    HyperCube,
    PhantomSpec,
    PropagationGeometry,
    SpectralAmplitudeCube,
    make_phantom,
    object_cube,
    propagate_forward,
    wavelength_grid_for_band,
)

PITCH = 3.45e-6
DISTANCE = 16e-3
BAND_DELAY = DelayLineConfig(100e-9, 2000)
BAND = (680e-9, 820e-9)


def band_grid(count=None, delay=BAND_DELAY):
    return wavelength_grid_for_band(delay, *BAND).subset(count)


def relative_rms(actual, expected):
    return np.linalg.norm(actual - expected) / np.linalg.norm(expected)


def phantom_scene(
    size=64,
    count=16,
    max_depth=317e-9,
    dispersion=DispersionModel(),
    scale=1.0,
):
    """Phantom, its object cube and the sensor cube at the grid wavelengths"""
    geom = PropagationGeometry(DISTANCE, PITCH, size, size)
    grid = band_grid(count)
    depth = make_phantom(PhantomSpec(max_depth=max_depth), size, size, PITCH)
    objects = object_cube(depth, grid.wavelengths, dispersion)
    sensor = HyperCube.from_fields(
        [
            propagate_forward(objects.slice(index), geom)
            for index in range(grid.L)
        ]
    )
    sensor = sensor._replace(data=sensor.data * np.sqrt(scale))
    return geom, grid, depth, objects, sensor


def amplitude_cube(sensor, grid):
    return SpectralAmplitudeCube(
        np.abs(sensor.data), grid, pixel_pitch=sensor.pixel_pitch
    )


def phase_cube(objects):
    return HyperCube(
        np.angle(objects.data), objects.wavelengths, objects.pixel_pitch
    )
