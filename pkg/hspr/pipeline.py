"""Pipeline stages that read and write files

Every stage validates its configuration and inputs first, writes its
outputs atomically into an output directory and leaves a manifest.json
there from which the run can be repeated.
"""
import json
import logging
from collections import namedtuple
from pathlib import Path

import numpy as np

from .config import (
    band_limits,
    delay_config,
    dispersion_model,
    geometry,
    phantom_spec,
    pixel_pitch,
    solver_config,
    source_profile,
    validate_config,
    wavelength_grid,
)
from .cubefile import CubeFile, atomic_write, read_cube, write_cube
from .exceptions import InvalidArgumentError
from .metrics import rrmse
from .optics import HyperCube, PropagationGeometry, propagate_forward
from .phantoms import make_phantom, object_cube
from .render import (
    check_selection,
    cross_section,
    slice_quantity,
    write_cross_section,
    write_csv,
    write_pgm,
)
from .retrieval import (
    apply_phase_reference,
    backpropagation_baseline,
    hspr_run,
)
from .spectroscopy import (
    add_noise,
    derive_seed,
    estimate_spectra,
    psnr_observations,
    psnr_spectral,
    synthesize_interferograms,
    wavelength_grid_for_band,
)

logger = logging.getLogger(__name__)

# sub-seed stages
NOISE_STAGE = 1
STUDY_STAGE = 100

MANIFEST = "manifest.json"
STUDY_KINDS = ("psnr", "rrmse")


class Simulation(
    namedtuple(
        "Simulation",
        ["depth", "grid", "objects", "sensor", "clean", "noisy"],
    )
):
    """Everything a simulation produces

    Attributes:
        depth (DepthMap): The phantom
        grid (WavelengthGrid): All on-grid wavelengths of the band
        objects (HyperCube): True object fields
        sensor (HyperCube): Sensor-plane fields, scaled by the source
        clean (InterferogramStack): Noiseless interferograms
        noisy (InterferogramStack): The observations
    """

    __slots__ = ()


def write_manifest(out, stage, config, inputs=(), outputs=()):
    """Record what a stage did, without timestamps"""
    from . import __version__

    manifest = {
        "stage": stage,
        "version": __version__,
        "seed": config.seed,
        "config": config.to_dict(),
        "inputs": [Path(path).name for path in inputs],
        "outputs": sorted(Path(path).name for path in outputs),
    }
    path = Path(out) / MANIFEST
    with atomic_write(path, "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, sort_keys=True, indent=2)
        handle.write("\n")
    return path


def simulate(config, noise_sigma=None, noise_stage=NOISE_STAGE):
    """Build the phantom and synthesize its observations in memory

    Args:
        config (PipelineConfig): The configuration
        noise_sigma (float): Overrides config.noise_sigma
        noise_stage (int): Stage mixed into the seed of the noise

    Returns:
        Simulation: The intermediate and final products
    """
    delay = delay_config(config)
    grid = wavelength_grid(config)
    geom = geometry(config)
    dispersion = dispersion_model(config)
    depth = make_phantom(
        phantom_spec(config),
        config.frame.rows,
        config.frame.cols,
        pixel_pitch(config),
    )
    objects = object_cube(
        depth, grid.wavelengths, dispersion, strict=config.strict_phase
    )

    weights = source_profile(config, grid)
    fields = []
    for index in range(grid.L):
        field = propagate_forward(objects.slice(index), geom)
        fields.append(field.with_data(field.data * np.sqrt(weights[index])))
    sensor = HyperCube.from_fields(fields)
    clean = synthesize_interferograms(sensor, delay)
    sigma = config.noise_sigma if noise_sigma is None else noise_sigma
    noisy = add_noise(clean, sigma, derive_seed(config.seed, noise_stage))
    logger.info(
        "Simulated %d wavelengths, %d delay steps, sigma %g",
        grid.L,
        delay.n_steps,
        sigma,
    )
    return Simulation(depth, grid, objects, sensor, clean, noisy)


def run_simulate(config, out):
    """Simulate and write truth.cube, clean.cube, noisy.cube

    Returns:
        dict: Output name to path
    """
    validate_config(config)
    out = Path(out)
    sim = simulate(config)
    outputs = {
        "truth": out / "truth.cube",
        "clean": out / "clean.cube",
        "noisy": out / "noisy.cube",
    }
    write_cube(outputs["truth"], CubeFile.from_hypercube(sim.objects))
    write_cube(outputs["clean"], CubeFile.from_stack(sim.clean))
    write_cube(outputs["noisy"], CubeFile.from_stack(sim.noisy))
    write_manifest(out, "simulate", config, outputs=outputs.values())
    return outputs


def run_spectra(stack_path, config, out):
    """Estimate spectral amplitudes from an interferogram stack file

    Writes spectra.cube, spectra.csv with per-wavelength peak intensity
    and PSNR, and psnr.csv with the band-wide figures. All figures are
    computed before the first file is written.

    Returns:
        SpectralAmplitudeCube: The estimate
    """
    validate_config(config, [stack_path])
    out = Path(out)
    stack = read_cube(stack_path).to_stack()
    grid = wavelength_grid_for_band(stack.delay, *band_limits(config))
    spectra = estimate_spectra(stack, grid)

    sigma = config.noise_sigma
    peaks = np.max(spectra.intensities(), axis=(0, 1))
    report = observation = None
    if sigma > 0:
        report = psnr_spectral(spectra, sigma, stack.delay, stack)
        observation = psnr_observations(stack, sigma)

    write_cube(
        out / "spectra.cube", CubeFile.from_spectra(spectra, stack.delay)
    )
    write_csv(
        out / "spectra.csv",
        ["wavelength_nm", "bin", "max_intensity", "psnr_db"],
        (
            [
                float(grid.wavelengths[index] * 1e9),
                int(grid.bin_indices[index]),
                float(peaks[index]),
                "" if report is None else float(report.per_wavelength[index]),
            ]
            for index in range(grid.L)
        ),
    )
    outputs = [out / "spectra.cube", out / "spectra.csv"]
    if report is not None:
        write_csv(
            out / "psnr.csv",
            ["metric", "value_db"],
            [
                ["observation", observation],
                ["aggregate", report.aggregate],
                ["spectral_mean", report.mean],
                ["spectral_min", report.min],
                ["spectral_max", report.max],
            ],
        )
        outputs.append(out / "psnr.csv")
    write_manifest(out, "spectra", config, [stack_path], outputs)
    return spectra


def _solver_for(config, cube):
    """The solver configuration with the geometry fitted to the cube"""
    solver = solver_config(config)
    geom = solver.geometry
    rows, cols = cube.amplitudes.shape[:2]
    return solver._replace(
        geometry=PropagationGeometry(
            geom.distance, cube.pixel_pitch, rows, cols, geom.padding
        )
    )


def _phase_cube(cube):
    return HyperCube(np.angle(cube.data), cube.wavelengths, cube.pixel_pitch)


def run_retrieve(spectra_path, config, out, truth_path=None):
    """Retrieve the object cube from a spectral amplitude file

    Writes objects.cube, baseline.cube (single back propagation),
    convergence.csv, and rrmse.csv when a truth cube is given.

    Returns:
        RetrievalResult: The result of the solver
    """
    inputs = [spectra_path] + ([truth_path] if truth_path else [])
    validate_config(config, inputs)
    out = Path(out)
    cube = read_cube(spectra_path).to_spectra()
    solver = _solver_for(config, cube)
    truth = None
    if truth_path:
        truth = _phase_cube(read_cube(truth_path).to_hypercube())

    result = hspr_run(cube, solver, truth)
    baseline = backpropagation_baseline(cube, solver)
    write_cube(
        out / "objects.cube", CubeFile.from_hypercube(result.object_cube)
    )
    write_cube(out / "baseline.cube", CubeFile.from_hypercube(baseline))
    write_csv(
        out / "convergence.csv",
        ["iteration", "phase_change_rad"],
        (
            [t, float(change)]
            for t, change in enumerate(result.phase_change_history, 1)
        ),
    )
    outputs = [
        out / "objects.cube",
        out / "baseline.cube",
        out / "convergence.csv",
    ]
    if result.rrmse_history is not None:
        wavelengths = result.object_cube.wavelengths
        write_csv(
            out / "rrmse.csv",
            ["iteration", "wavelength_nm", "rrmse"],
            (
                [t, float(wavelengths[index] * 1e9), float(value)]
                for t, row in enumerate(result.rrmse_history, 1)
                for index, value in enumerate(row)
            ),
        )
        outputs.append(out / "rrmse.csv")
    write_manifest(out, "retrieve", config, inputs, outputs)
    return result


def run_render(cube_path, config, out):
    """Render cube slices as PGM images and cross-section CSVs

    Returns:
        list: Paths of the written images
    """
    validate_config(config, [cube_path])
    out = Path(out)
    cubefile = read_cube(cube_path)
    if cubefile.kind == "stack":
        raise InvalidArgumentError("Interferogram stacks are not rendered")
    cube = cubefile.to_hypercube()
    options = config.render
    slices = range(cube.L) if options.slices is None else options.slices
    rows, cols = list(options.rows), list(options.cols)
    if not rows and not cols:
        rows = [cube.rows // 2]
    check_selection(cube, slices, rows, cols)
    dispersion = dispersion_model(config)

    outputs = []
    for index in slices:
        values = slice_quantity(cube, index, options.quantity, dispersion)
        stem = f"slice_{index:03d}_{options.quantity}"
        image = out / f"{stem}.pgm"
        write_pgm(
            image,
            values,
            quantity=options.quantity,
            wavelength_m=float(cube.wavelengths[index]),
        )
        outputs.extend([image, image.with_suffix(".json")])
        lines = [("row", row) for row in rows] + [("col", col) for col in cols]
        for axis, line in lines:
            path = out / f"{stem}_{axis}_{line:03d}.csv"
            write_cross_section(
                path,
                *cross_section(values, cube.pixel_pitch, **{axis: line}),
            )
            outputs.append(path)
    write_manifest(out, "render", config, [cube_path], outputs)
    logger.info("Rendered %d slices into %s", len(slices), str(out))
    return [path for path in outputs if path.suffix == ".pgm"]


def phase_rrmse(estimate, truth, mode="border"):
    """Phase RRMSE of every estimate slice against its truth slice

    Args:
        estimate (HyperCube): Complex object estimates
        truth (HyperCube): Complex true objects, any superset of the
            estimate wavelengths
        mode (str): Phase reference applied to both

    Returns:
        numpy.ndarray: One RRMSE per estimate wavelength

    Raises:
        InvalidArgumentError: On mismatched dims or missing wavelengths
    """
    if estimate.data.shape[:2] != truth.data.shape[:2]:
        raise InvalidArgumentError(
            f"Estimate slices are {estimate.data.shape[:2]} but truth "
            f"slices are {truth.data.shape[:2]}"
        )
    values = []
    for index, wavelength in enumerate(estimate.wavelengths):
        match = truth.index_of(wavelength)
        if not np.isclose(truth.wavelengths[match], wavelength, rtol=1e-9):
            raise InvalidArgumentError(f"Truth has no slice at {wavelength} m")
        est = apply_phase_reference(estimate.data[:, :, index], mode)
        ref = apply_phase_reference(truth.data[:, :, match], mode)
        values.append(rrmse(np.angle(est), np.angle(ref)))
    return np.asarray(values)


def run_evaluate(estimate_path, truth_path, config, out):
    """Per-wavelength phase RRMSE of an object cube against the truth

    Writes evaluate.csv, the last row holding the mean.

    Returns:
        tuple: The per-wavelength RRMSE and their mean
    """
    validate_config(config, [estimate_path, truth_path])
    out = Path(out)
    estimate = read_cube(estimate_path).to_hypercube()
    truth = read_cube(truth_path).to_hypercube()
    values = phase_rrmse(estimate, truth, config.solver.phase_reference)
    mean = float(np.mean(values))
    rows = [
        [float(wavelength * 1e9), float(value)]
        for wavelength, value in zip(estimate.wavelengths, values)
    ]
    rows.append(["mean", mean])
    write_csv(out / "evaluate.csv", ["wavelength_nm", "rrmse"], rows)
    write_manifest(
        out,
        "evaluate",
        config,
        [estimate_path, truth_path],
        [out / "evaluate.csv"],
    )
    logger.info("Mean phase RRMSE %.4f", mean)
    return values, mean


def _psnr_study(config):
    delay = delay_config(config)
    clean = simulate(config, noise_sigma=0.0)
    rows = []
    map_rows = []
    for index, sigma in enumerate(config.study.sigmas):
        noisy = add_noise(
            clean.clean, sigma, derive_seed(config.seed, STUDY_STAGE + index)
        )
        spectra = estimate_spectra(noisy, clean.grid)
        report = psnr_spectral(spectra, sigma, delay, noisy)
        rows.append(
            [
                float(sigma),
                psnr_observations(noisy, sigma),
                report.aggregate,
                report.mean,
                report.min,
                report.max,
            ]
        )
        map_rows.extend(
            [float(sigma), float(wavelength * 1e9), float(value)]
            for wavelength, value in zip(
                report.wavelengths, report.per_wavelength
            )
        )
    header = [
        "sigma",
        "observation_db",
        "aggregate_db",
        "spectral_mean_db",
        "spectral_min_db",
        "spectral_max_db",
    ]
    return {
        "psnr": (header, rows),
        "psnr_map": (["sigma", "wavelength_nm", "psnr_db"], map_rows),
    }


def _rrmse_study(config):
    solver = solver_config(config)
    rows = []
    for index, sigma in enumerate(config.study.sigmas):
        sim = simulate(
            config, noise_sigma=sigma, noise_stage=STUDY_STAGE + index
        )
        observation = psnr_observations(sim.noisy, sigma)
        spectra = estimate_spectra(sim.noisy, sim.grid)
        result = hspr_run(spectra, solver, _phase_cube(sim.objects))
        for t, row in enumerate(result.rrmse_history, 1):
            rows.append([float(sigma), observation, t, float(np.mean(row))])
    header = ["sigma", "observation_db", "iteration", "mean_rrmse"]
    return {"rrmse": (header, rows)}


def run_study(config, out, kind="psnr"):
    """Sweep the noise level

    psnr writes study_psnr.csv with the observation, aggregate and
    spectral PSNR per sigma, and study_psnr_map.csv with the PSNR of
    every wavelength per sigma. rrmse writes study_rrmse.csv with the
    observation PSNR and the mean phase RRMSE per sigma and iteration.

    Returns:
        list: The rows of study_<kind>.csv
    """
    if kind not in STUDY_KINDS:
        raise InvalidArgumentError(
            f"Unknown study {kind!r}, expect one of {STUDY_KINDS}"
        )
    validate_config(config)
    out = Path(out)
    tables = (_psnr_study if kind == "psnr" else _rrmse_study)(config)
    outputs = []
    for name, (header, rows) in tables.items():
        path = out / f"study_{name}.csv"
        write_csv(path, header, rows)
        outputs.append(path)
    write_manifest(out, f"study-{kind}", config, outputs=outputs)
    return tables[kind][1]
