import math

import numpy as np
import pytest
from scipy import fft

from hspr import (
    ConfigurationError,
    DenoiserSpec,
    DispersionModel,
    InvalidArgumentError,
    ModelError,
    PropagationGeometry,
    SnsSpec,
    SolverConfig,
    SpectralAmplitudeCube,
    WavelengthGrid,
    add_noise,
    backpropagation_baseline,
    estimate_spectra,
    hspr_init,
    hspr_run,
    hspr_sweep,
    phase_scale_mu,
    phase_to_thickness,
    plateau_mean,
    psnr_spectral,
    sweep_order,
    synthesize_interferograms,
    transfer_function,
)
from hspr.pipeline import phase_rrmse
from hspr.retrieval import apply_phase_reference, border_mask
from hspr.spectroscopy import derive_seed

from .helpers import (
    BAND_DELAY,
    PITCH,
    amplitude_cube,
    phantom_scene,
    phase_cube,
    relative_rms,
)

CONSTANT = DispersionModel()
NO_FILTER = DenoiserSpec(kind="none")
NO_SNS = SnsSpec(0.0)


def plain_config(geom, **kwargs):
    kwargs.setdefault("denoiser", NO_FILTER)
    kwargs.setdefault("sns", NO_SNS)
    return SolverConfig(geom, **kwargs)


def test_mu_identity_and_values():
    assert phase_scale_mu(700e-9, 700e-9, CONSTANT) == 1.0
    assert phase_scale_mu(680e-9, 820e-9, CONSTANT) == pytest.approx(
        680 / 820, abs=1e-12
    )
    silica = DispersionModel("sellmeier_fused_silica")
    assert phase_scale_mu(680e-9, 820e-9, silica) < 680 / 820


@pytest.mark.parametrize(
    "dispersion", [CONSTANT, DispersionModel("sellmeier_fused_silica")]
)
def test_mu_chains(dispersion):
    a, b, c = 680e-9, 745e-9, 820e-9
    chained = phase_scale_mu(a, b, dispersion) * phase_scale_mu(
        b, c, dispersion
    )
    assert chained == pytest.approx(phase_scale_mu(a, c, dispersion), abs=1e-14)
    assert phase_scale_mu(c, a, dispersion) == pytest.approx(
        1 / phase_scale_mu(a, c, dispersion)
    )


def test_mu_errors():
    with pytest.raises(ModelError):
        phase_scale_mu(680e-9, 820e-9, DispersionModel(constant_n=0.9))
    with pytest.raises(InvalidArgumentError):
        phase_scale_mu(0.0, 820e-9, CONSTANT)


def test_sweep_order():
    assert sweep_order(1) == [(0, 0)]
    assert sweep_order(2) == [(0, 1), (1, 0)]
    assert sweep_order(4) == [(0, 1), (1, 2), (2, 3), (3, 2), (2, 1), (1, 0)]
    with pytest.raises(InvalidArgumentError):
        sweep_order(0)


def test_solver_config():
    geom = PropagationGeometry(16e-3, PITCH, 64, 64)
    config = SolverConfig(geom)
    assert config.max_cube_iterations == 30
    assert config.xi == pytest.approx(1e-3 * 64)
    assert config.denoiser == DenoiserSpec()
    assert config.sns == SnsSpec(1.0)
    assert SolverConfig(geom, tolerance=0.5).xi == 0.5
    with pytest.raises(ConfigurationError):
        SolverConfig(geom, max_cube_iterations=0)
    with pytest.raises(ConfigurationError):
        SolverConfig(geom, tolerance=0)
    with pytest.raises(ConfigurationError):
        SolverConfig(geom, phase_reference="center")
    with pytest.raises(ConfigurationError):
        SolverConfig(geom, wavelengths=0)


def test_init_has_zero_phase():
    grid = WavelengthGrid([700e-9, 710e-9], [20, 19])
    rng = np.random.default_rng(0)
    amplitudes = rng.uniform(0, 2, (8, 8, 2))
    field = hspr_init(SpectralAmplitudeCube(amplitudes, grid))
    np.testing.assert_array_equal(field.phase, 0.0)
    np.testing.assert_array_equal(field.amplitude, amplitudes[:, :, 0])
    assert field.wavelength == 700e-9

    ones = SpectralAmplitudeCube(np.ones((4, 4, 2)), grid)
    np.testing.assert_array_equal(hspr_init(ones).data, 1.0)
    with pytest.raises(InvalidArgumentError):
        amplitudes[0, 0, 0] = np.nan
        SpectralAmplitudeCube(amplitudes, grid)


def test_phase_reference():
    rng = np.random.default_rng(5)
    data = np.exp(1j * rng.uniform(-0.2, 0.2, (16, 16)))
    shifted = data * np.exp(1.3j)
    referenced = apply_phase_reference(shifted)
    np.testing.assert_allclose(referenced, apply_phase_reference(data))
    assert abs(np.angle(np.mean(referenced[border_mask(16, 16)]))) < 1e-12
    assert apply_phase_reference(shifted, "none") is shifted
    assert border_mask(16, 16).sum() == 16 * 16 - 12 * 12


def test_single_wavelength_is_gerchberg_saxton():
    rng = np.random.default_rng(7)
    size = 32
    wavelength = 700e-9
    geom = PropagationGeometry(5e-3, PITCH, size, size)
    amplitude = rng.uniform(0.5, 1.5, (size, size))
    grid = WavelengthGrid([wavelength], [300])
    cube = SpectralAmplitudeCube(amplitude[:, :, np.newaxis], grid, None, PITCH)
    config = plain_config(geom, max_cube_iterations=10)

    transfer = transfer_function(geom, wavelength)
    sensor = amplitude.astype(np.complex128)
    state = hspr_init(cube)
    for _ in range(10):
        obj = fft.ifft2(fft.fft2(sensor) * np.conj(transfer))
        model = fft.ifft2(fft.fft2(obj) * transfer)
        sensor = amplitude * np.exp(1j * np.angle(model))

        state = hspr_sweep(state, cube, config).sensor_field
        np.testing.assert_array_equal(state.data, sensor)


def test_true_object_is_a_fixed_point():
    geom, grid, _, objects, sensor = phantom_scene(size=32, count=4)
    cube = amplitude_cube(sensor, grid)
    outcome = hspr_sweep(sensor.slice(0), cube, plain_config(geom))
    for index in range(grid.L):
        assert (
            relative_rms(outcome.objects[index].data, objects.data[:, :, index])
            < 1e-10
        )
    assert relative_rms(outcome.sensor_field.data, sensor.data[:, :, 0]) < 1e-10
    assert outcome.phase_change < 1e-8


def test_state_must_match_cube():
    geom, grid, _, _, sensor = phantom_scene(size=32, count=2)
    cube = amplitude_cube(sensor, grid)
    small = sensor.slice(0).with_data(np.ones((16, 16)))
    with pytest.raises(InvalidArgumentError):
        hspr_sweep(small, cube, plain_config(geom))


def test_sweep_errors_name_the_wavelength():
    geom, grid, _, _, sensor = phantom_scene(size=32, count=2)
    cube = amplitude_cube(sensor, grid)
    config = plain_config(geom, dispersion=DispersionModel(constant_n=1.0))
    with pytest.raises(ModelError, match="wavelength index 0"):
        hspr_sweep(hspr_init(cube), cube, config)


def test_one_iteration():
    geom, grid, _, objects, sensor = phantom_scene(size=32, count=3)
    cube = amplitude_cube(sensor, grid)
    config = plain_config(geom, max_cube_iterations=1, tolerance=1e-12)
    result = hspr_run(cube, config, phase_cube(objects))
    assert result.iterations_run == 1
    assert len(result.phase_change_history) == 1
    assert not result.converged
    assert result.object_cube.L == 3
    assert result.rrmse_history.shape == (1, 3)


def test_huge_tolerance_stops_at_once():
    geom, grid, _, _, sensor = phantom_scene(size=32, count=3)
    config = plain_config(geom, tolerance=1e9)
    result = hspr_run(amplitude_cube(sensor, grid), config)
    assert result.iterations_run == 1
    assert result.converged
    assert result.rrmse_history is None


def test_retrieval_wavelength_subset():
    geom, grid, _, objects, sensor = phantom_scene(size=32, count=None)
    config = plain_config(
        geom, max_cube_iterations=1, wavelengths=5, tolerance=1e-12
    )
    result = hspr_run(amplitude_cube(sensor, grid), config, phase_cube(objects))
    assert result.object_cube.L == 5
    assert result.object_cube.wavelengths[0] == grid.wavelengths[0]
    assert result.object_cube.wavelengths[-1] == grid.wavelengths[-1]


def test_truth_must_match():
    geom, grid, _, objects, sensor = phantom_scene(size=32, count=3)
    cube = amplitude_cube(sensor, grid)
    truth = phase_cube(objects)
    config = plain_config(geom, max_cube_iterations=1)
    with pytest.raises(InvalidArgumentError):
        hspr_run(cube, config, truth._replace(data=truth.data[:16, :16]))
    with pytest.raises(InvalidArgumentError):
        hspr_run(cube, config, truth._replace(wavelengths=truth.wavelengths * 2))


def test_baseline():
    geom, grid, _, objects, sensor = phantom_scene(size=32, count=4)
    baseline = backpropagation_baseline(
        amplitude_cube(sensor, grid), plain_config(geom)
    )
    assert baseline.L == 4
    np.testing.assert_array_equal(baseline.wavelengths, objects.wavelengths)


# full-size scenarios


def mean_final_rrmse(result):
    return float(np.mean(result.rrmse_history[-1]))


def noisy_spectra(sensor, grid, sigma, seed=0):
    clean = synthesize_interferograms(sensor, BAND_DELAY)
    noisy = add_noise(clean, sigma, derive_seed(seed, 1))
    return estimate_spectra(noisy, grid)


@pytest.fixture(scope="module")
def full_scene():
    return phantom_scene(size=64, count=16)


@pytest.mark.slow
def test_noiseless_convergence(full_scene):
    geom, grid, _, objects, sensor = full_scene
    config = plain_config(geom, max_cube_iterations=30, tolerance=1e-12)
    result = hspr_run(amplitude_cube(sensor, grid), config, phase_cube(objects))
    history = result.rrmse_history
    assert history.shape == (30, 16)
    assert np.all(history[-1] < 0.05)
    mean = history.mean(axis=1)
    assert np.all(np.diff(history[4:], axis=0) <= 1e-6)
    assert mean[14] < mean[4] < mean[0]
    assert np.all(np.diff(result.phase_change_history[3:]) <= 1e-6)


@pytest.mark.slow
def test_quality_bar_under_noise(full_scene):
    geom, grid, _, objects, sensor = full_scene
    clean = amplitude_cube(sensor, grid)
    # sigma that puts the weakest wavelength at 18.5 dB spectral PSNR
    peak = np.min(np.max(clean.intensities(), axis=(0, 1)))
    sigma = peak * math.sqrt(BAND_DELAY.n_steps) / 10 ** 1.85
    spectra = noisy_spectra(sensor, grid, sigma)
    assert psnr_spectral(spectra, sigma, BAND_DELAY).min >= 18.0

    config = SolverConfig(geom, max_cube_iterations=30, tolerance=1e-12)
    result = hspr_run(spectra, config, phase_cube(objects))
    assert mean_final_rrmse(result) < 0.1


@pytest.fixture(scope="module")
def faint_scene():
    # source weights giving an observation PSNR near 16.5 dB at sigma 0.5
    geom, grid, depth, objects, sensor = phantom_scene(
        size=64, count=None, scale=0.1
    )
    return geom, grid, objects, noisy_spectra(sensor, grid, 0.5, seed=4)


@pytest.mark.slow
def test_filtering_beats_plain_iterations(faint_scene):
    geom, _, objects, spectra = faint_scene
    truth = phase_cube(objects)
    full = SolverConfig(
        geom, max_cube_iterations=30, tolerance=1e-12, wavelengths=16
    )
    plain = plain_config(
        geom, max_cube_iterations=30, tolerance=1e-12, wavelengths=16
    )
    assert mean_final_rrmse(hspr_run(spectra, full, truth)) < mean_final_rrmse(
        hspr_run(spectra, plain, truth)
    )


@pytest.mark.slow
def test_iterations_beat_back_propagation(faint_scene):
    geom, _, objects, spectra = faint_scene
    truth = phase_cube(objects)
    config = SolverConfig(
        geom, max_cube_iterations=30, tolerance=1e-12, wavelengths=16
    )
    result = hspr_run(spectra, config, truth)
    baseline = backpropagation_baseline(spectra, config)
    baseline_rrmse = np.mean(phase_rrmse(baseline, objects))
    assert baseline_rrmse >= 2 * mean_final_rrmse(result)


@pytest.mark.slow
def test_etched_depth_is_recovered():
    geom, grid, depth, objects, sensor = phantom_scene(
        size=64, count=16, max_depth=127e-9
    )
    config = plain_config(geom, max_cube_iterations=30, tolerance=1e-12)
    result = hspr_run(amplitude_cube(sensor, grid), config)
    index = result.object_cube.index_of(687e-9)
    recovered = phase_to_thickness(
        np.angle(result.object_cube.data[:, :, index]),
        result.object_cube.wavelengths[index],
        CONSTANT,
    )
    assert plateau_mean(recovered, depth.mask()) == pytest.approx(
        127e-9, rel=0.1
    )
