"""The hyperspectral phase retrieval loop

One cube iteration sweeps the wavelengths up and back down, starting and
ending at the first one. At every visit the sensor field is propagated back
to the object plane, filtered, carried over to the next wavelength by phase
scaling, propagated forward and given the observed amplitude.
"""
import logging
from collections import namedtuple

import numpy as np

from .denoise import DenoiserSpec, SnsSpec, denoise_complex
from .denoise import sns_amplitude_update
from .exceptions import ConfigurationError, HsprError, InvalidArgumentError
from .metrics import DispersionModel, refractive_index, rrmse
from .optics import (
    ComplexField,
    HyperCube,
    propagate_backward,
    propagate_forward,
)

logger = logging.getLogger(__name__)

PHASE_REFERENCES = ("border", "none")
# width in pixels of the frame ring that fixes the global phase
BORDER_WIDTH = 2
# default tolerance per sqrt(pixel)
TOLERANCE_PER_PIXEL = 1e-3


class SolverConfig(
    namedtuple(
        "SolverConfig",
        [
            "geometry",
            "max_cube_iterations",
            "tolerance",
            "denoiser",
            "sns",
            "dispersion",
            "wavelengths",
            "phase_reference",
        ],
    )
):
    """Settings of the retrieval loop

    Attributes:
        geometry (PropagationGeometry): Object-to-sensor geometry
        max_cube_iterations (int): T, the cap on cube iterations
        tolerance (float): xi, stop once the phase change drops below it.
            None means 1e-3 * sqrt(rows * cols)
        denoiser (DenoiserSpec): Object-plane filter
        sns (SnsSpec): Sensor-plane amplitude update
        dispersion (DispersionModel): Object material
        wavelengths (int): Number of wavelengths to retrieve, evenly picked
            from the cube, all of them when None
        phase_reference (str): border fixes the global phase of every
            object estimate on the frame border, none leaves it free
    """

    __slots__ = ()

    def __new__(
        cls,
        geometry,
        max_cube_iterations=30,
        tolerance=None,
        denoiser=None,
        sns=None,
        dispersion=None,
        wavelengths=None,
        phase_reference="border",
    ):
        if int(max_cube_iterations) != max_cube_iterations or (
            max_cube_iterations < 1
        ):
            raise ConfigurationError(
                f"Max cube iterations must be an integer >= 1, "
                f"got {max_cube_iterations}"
            )
        if tolerance is not None and not tolerance > 0:
            raise ConfigurationError(
                f"Tolerance must be positive, got {tolerance}"
            )
        if wavelengths is not None and int(wavelengths) < 1:
            raise ConfigurationError(
                f"Retrieval needs at least one wavelength, got {wavelengths}"
            )
        if phase_reference not in PHASE_REFERENCES:
            raise ConfigurationError(
                f"Unknown phase reference {phase_reference!r}, "
                f"expect one of {PHASE_REFERENCES}"
            )
        return super().__new__(
            cls,
            geometry,
            int(max_cube_iterations),
            None if tolerance is None else float(tolerance),
            DenoiserSpec() if denoiser is None else denoiser,
            SnsSpec() if sns is None else sns,
            DispersionModel() if dispersion is None else dispersion,
            None if wavelengths is None else int(wavelengths),
            phase_reference,
        )

    @property
    def xi(self):
        """The effective tolerance"""
        if self.tolerance is not None:
            return self.tolerance
        pixels = self.geometry.rows * self.geometry.cols
        return TOLERANCE_PER_PIXEL * np.sqrt(pixels)


class SweepOutcome(
    namedtuple("SweepOutcome", ["objects", "sensor_field", "phase_change"])
):
    """One cube iteration

    Attributes:
        objects (list): Object-plane ComplexField per wavelength
        sensor_field (ComplexField): Sensor field at the first wavelength,
            the state of the next iteration
        phase_change (float): Norm of the wrapped change of the object
            phase at the first wavelength over the iteration
    """

    __slots__ = ()


class RetrievalResult(
    namedtuple(
        "RetrievalResult",
        [
            "object_cube",
            "iterations_run",
            "phase_change_history",
            "converged",
            "rrmse_history",
        ],
    )
):
    """Output of hspr_run

    Attributes:
        object_cube (HyperCube): Complex object estimates, one per
            retrieved wavelength
        iterations_run (int): Cube iterations executed
        phase_change_history (list): Phase change of each iteration
        converged (bool): Whether the tolerance was reached
        rrmse_history (numpy.ndarray): iterations x L phase RRMSE against
            the truth, None without truth
    """

    __slots__ = ()


def phase_scale_mu(lambda_prev, lambda_next, dispersion):
    """Factor carrying an object phase from one wavelength to another

    mu = lambda_prev (n_next - 1) / (lambda_next (n_prev - 1))

    Raises:
        InvalidArgumentError: If a wavelength is not positive
        ModelError: If n <= 1 at either wavelength
    """
    if not (lambda_prev > 0 and lambda_next > 0):
        raise InvalidArgumentError(
            f"Wavelengths must be positive, got {lambda_prev}, {lambda_next}"
        )
    if lambda_prev == lambda_next:
        return 1.0
    n_prev = refractive_index(dispersion, lambda_prev)
    n_next = refractive_index(dispersion, lambda_next)
    return (lambda_prev * (n_next - 1.0)) / (lambda_next * (n_prev - 1.0))


def sweep_order(n_wavelengths):
    """Visits of one cube iteration and the successor of each

    Indices go 0, 1, ..., L-1, L-2, ..., 1 and the last successor is 0.

    Returns:
        list: (visited, successor) index pairs
    """
    if n_wavelengths < 1:
        raise InvalidArgumentError("Sweep needs at least one wavelength")
    if n_wavelengths == 1:
        return [(0, 0)]
    visits = list(range(n_wavelengths)) + list(
        range(n_wavelengths - 2, 0, -1)
    )
    return list(zip(visits, visits[1:] + [0]))


def border_mask(rows, cols, width=BORDER_WIDTH):
    """The ring of width pixels along the frame edge"""
    mask = np.ones((rows, cols), dtype=bool)
    if rows > 2 * width and cols > 2 * width:
        mask[width:rows - width, width:cols - width] = False
    return mask


def apply_phase_reference(data, mode="border"):
    """Remove the global phase so the frame border has zero mean phase

    Args:
        data (numpy.ndarray): Complex object-plane data
        mode (str): border or none

    Returns:
        numpy.ndarray: The referenced data, the input itself for none
    """
    if mode == "none":
        return data
    ring = data[border_mask(*data.shape)]
    mean = np.mean(ring)
    if mean == 0:
        return data
    return data * np.exp(-1j * np.angle(mean))


def select_wavelengths(cube, config):
    """The slices of cube the solver retrieves"""
    return cube.subset(cube.grid.subset(config.wavelengths))


def hspr_init(cube):
    """Initial sensor field, |V~(lambda_1)| with zero phase

    Raises:
        InvalidArgumentError: If the cube has no wavelengths
    """
    if cube.L < 1:
        raise InvalidArgumentError("Cannot initialize from an empty cube")
    return ComplexField(
        cube.amplitudes[:, :, 0].astype(np.complex128),
        cube.grid.wavelengths[0],
        cube.pixel_pitch,
    )


def _wrapped_change(before, after):
    return float(np.linalg.norm(np.angle(np.exp(1j * (after - before)))))


def _object_estimate(sensor, config):
    obj = propagate_backward(sensor, config.geometry)
    return denoise_complex(obj, config.denoiser)


def _visit(sensor, index, successor, cube, config):
    """Steps at one wavelength, returns the object and the next sensor field"""
    obj = _object_estimate(sensor, config)
    referenced = obj.with_data(
        apply_phase_reference(obj.data, config.phase_reference)
    )
    if successor != index:
        mu = phase_scale_mu(
            cube.grid.wavelengths[index],
            cube.grid.wavelengths[successor],
            config.dispersion,
        )
        obj = ComplexField(
            referenced.amplitude * np.exp(1j * mu * referenced.phase),
            cube.grid.wavelengths[successor],
            obj.pixel_pitch,
        )
    logger.debug(
        "Visit %d -> %d at %g m", index, successor, referenced.wavelength
    )

    model = propagate_forward(obj, config.geometry)
    amplitude = sns_amplitude_update(
        cube.amplitudes[:, :, successor], model.amplitude, config.sns
    )
    return referenced, model.with_data(
        amplitude * np.exp(1j * np.angle(model.data))
    )


def hspr_sweep(state, cube, config, t=1):
    """Run one cube iteration

    The object estimate of every wavelength is recorded at its latest
    visit. The first wavelength gets a closing backward propagation of the
    returned sensor field.

    Args:
        state (ComplexField): Sensor field at the first wavelength
        cube (SpectralAmplitudeCube): Observed amplitudes
        config (SolverConfig): The settings
        t (int): Iteration number, for logging

    Returns:
        SweepOutcome: Object estimates, the new state and the phase change

    Raises:
        InvalidArgumentError: If the state does not match the cube
    """
    if state.data.shape != cube.amplitudes.shape[:2]:
        raise InvalidArgumentError(
            f"State is {state.data.shape} but cube slices are "
            f"{cube.amplitudes.shape[:2]}"
        )

    objects = [None] * cube.L
    start_phase = None
    sensor = state
    for index, successor in sweep_order(cube.L):
        try:
            obj, sensor = _visit(sensor, index, successor, cube, config)
        except HsprError as exc:
            raise type(exc)(
                f"Sweep {t} failed at wavelength index {index}: {exc}"
            ) from exc
        if start_phase is None:
            start_phase = obj.phase
        objects[index] = obj

    final = _object_estimate(sensor, config)
    objects[0] = final.with_data(
        apply_phase_reference(final.data, config.phase_reference)
    )
    phase_change = _wrapped_change(start_phase, objects[0].phase)
    logger.debug("Sweep %d: phase change %g rad", t, phase_change)
    return SweepOutcome(objects, sensor, phase_change)


def _truth_phases(truth_phases, cube, mode):
    """Referenced true phases in the order of the cube's wavelengths"""
    if truth_phases.data.shape[:2] != cube.amplitudes.shape[:2]:
        raise InvalidArgumentError(
            f"Truth slices are {truth_phases.data.shape[:2]} but cube "
            f"slices are {cube.amplitudes.shape[:2]}"
        )
    phases = []
    for wavelength in cube.grid.wavelengths:
        index = truth_phases.index_of(wavelength)
        if not np.isclose(
            truth_phases.wavelengths[index], wavelength, rtol=1e-9, atol=0
        ):
            raise InvalidArgumentError(
                f"Truth has no slice at {wavelength} m"
            )
        phase = np.real(truth_phases.data[:, :, index])
        referenced = apply_phase_reference(np.exp(1j * phase), mode)
        phases.append(np.angle(referenced))
    return phases


def hspr_run(cube, config, truth_phases=None):
    """Retrieve the object cube from spectral amplitudes

    Runs cube iterations until the phase change drops below the tolerance
    or max_cube_iterations is reached.

    Args:
        cube (SpectralAmplitudeCube): Observed sensor-plane amplitudes
        config (SolverConfig): The settings
        truth_phases (HyperCube): True object phases; when given, the phase
            RRMSE of every iteration and wavelength is recorded

    Returns:
        RetrievalResult: The retrieved objects and the convergence record
    """
    cube = select_wavelengths(cube, config)
    truth = None
    if truth_phases is not None:
        truth = _truth_phases(truth_phases, cube, config.phase_reference)
    xi = config.xi
    logger.info(
        "Retrieving %d wavelengths on %dx%d, T=%d, xi=%g",
        cube.L,
        cube.amplitudes.shape[0],
        cube.amplitudes.shape[1],
        config.max_cube_iterations,
        xi,
    )

    state = hspr_init(cube)
    history = []
    rrmse_history = [] if truth is not None else None
    converged = False
    outcome = None
    for t in range(1, config.max_cube_iterations + 1):
        outcome = hspr_sweep(state, cube, config, t)
        state = outcome.sensor_field
        history.append(outcome.phase_change)
        if truth is not None:
            rrmse_history.append(
                [
                    rrmse(obj.phase, phase)
                    for obj, phase in zip(outcome.objects, truth)
                ]
            )
        if outcome.phase_change < xi:
            converged = True
            break

    logger.info(
        "Stopped after %d iterations, converged: %s, last change %g rad",
        len(history),
        converged,
        history[-1],
    )
    return RetrievalResult(
        HyperCube.from_fields(outcome.objects),
        len(history),
        history,
        converged,
        None if rrmse_history is None else np.asarray(rrmse_history),
    )


def backpropagation_baseline(cube, config):
    """Single backward propagation of the zero-phase observed amplitudes"""
    cube = select_wavelengths(cube, config)
    fields = []
    for index, wavelength in enumerate(cube.grid.wavelengths):
        sensor = ComplexField(
            cube.amplitudes[:, :, index].astype(np.complex128),
            wavelength,
            cube.pixel_pitch,
        )
        obj = propagate_backward(sensor, config.geometry)
        fields.append(
            obj.with_data(
                apply_phase_reference(obj.data, config.phase_reference)
            )
        )
    return HyperCube.from_fields(fields)
