"""Pipeline configuration: defaults, presets, JSON files and overrides"""
import copy
import json
import logging
from pathlib import Path

from diot import Diot

from .denoise import DenoiserSpec, SnsSpec
from .exceptions import ConfigurationError, HsprError
from .metrics import DispersionModel
from .optics import PropagationGeometry
from .phantoms import PhantomSpec
from .render import QUANTITIES
from .retrieval import SolverConfig
from .spectroscopy import (
    DelayLineConfig,
    spectral_weight_profile,
    wavelength_grid_for_band,
)
from .units import quantity_parser

logger = logging.getLogger(__name__)

DEFAULTS = {
    "frame": {"rows": 64, "cols": 64, "pixel_pitch": "3.45 um"},
    "delay": {"delta_z": "100 nm", "n_steps": 2000},
    "band": ["680 nm", "820 nm"],
    "source": {
        "profile": "uniform",
        "center": None,
        "width": None,
        "scale": 1.0,
    },
    "phantom": {
        "kind": "binary_bars",
        "max_depth": "317 nm",
        "bar_layout": None,
        "graymap_source": None,
    },
    "noise_sigma": 0.5,
    "seed": 0,
    "strict_phase": False,
    "solver": {
        "max_cube_iterations": 30,
        "tolerance": None,
        "wavelengths": 16,
        "distance": "16 mm",
        "padding": 1,
        "phase_reference": "border",
        "denoiser": {
            "kind": "block_transform_threshold",
            "block_size": 8,
            "threshold_multiplier": 2.7,
            "sigma_mode": "auto_mad",
            "fixed_sigma": None,
        },
        "sns": {"gamma": 1.0},
        "dispersion": {"kind": "constant", "constant_n": 1.46},
    },
    "render": {"quantity": "phase", "slices": None, "rows": [], "cols": []},
    "study": {"sigmas": [0.1, 0.25, 0.5, 1.0]},
}

PRESETS = {
    "paper-sim": {
        "frame": {"rows": 64, "cols": 64, "pixel_pitch": "3.45 um"},
        "delay": {"delta_z": "100 nm", "n_steps": 2000},
        "band": ["680 nm", "820 nm"],
        "phantom": {"kind": "binary_bars", "max_depth": "317 nm"},
        "noise_sigma": 0.5,
        "solver": {
            "distance": "16 mm",
            "wavelengths": 16,
            "dispersion": {"kind": "constant", "constant_n": 1.46},
        },
    },
    "paper-exp": {
        "frame": {"pixel_pitch": "3.45 um"},
        "delay": {"delta_z": "59.7 nm", "n_steps": 1880},
        "band": ["650 nm", "850 nm"],
        "phantom": {"kind": "binary_bars", "max_depth": "127 nm"},
        "solver": {
            "distance": "16 mm",
            "dispersion": {"kind": "sellmeier_fused_silica"},
        },
    },
}


class PipelineConfig(Diot):
    """The resolved configuration of a pipeline run"""

    def __init__(self, *args, **kwargs):
        kwargs["diot_nest"] = True
        super().__init__(*args, **kwargs)


def _check_keys(layer, defaults, where=""):
    for key, value in layer.items():
        if key not in defaults:
            raise ConfigurationError(f"Unknown configuration key {where}{key}")
        if isinstance(defaults[key], dict) and isinstance(value, dict):
            _check_keys(value, defaults[key], f"{where}{key}.")


def merge(base, layer):
    """Deep-merge layer into a copy of base, layer wins"""
    merged = copy.deepcopy(base)
    for key, value in layer.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def load_config(path=None, preset=None, overrides=None):
    """Resolve a configuration

    Layers, later ones winning: DEFAULTS, the preset, the JSON file, the
    overrides.

    Args:
        path (str|Path): A JSON configuration file
        preset (str): paper-sim or paper-exp
        overrides (dict): Last-word values, such as the seed from the CLI

    Returns:
        PipelineConfig: The configuration

    Raises:
        ConfigurationError: On an unknown preset or key, or bad JSON
    """
    layers = []
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigurationError(
                f"Unknown preset {preset!r}, expect one of {list(PRESETS)}"
            )
        layers.append(PRESETS[preset])
    if path is not None:
        try:
            with open(path, encoding="utf-8") as handle:
                layers.append(json.load(handle))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(
                f"Configuration file {str(path)!r} is not valid JSON"
            ) from exc
        except OSError as exc:
            raise ConfigurationError(
                f"Cannot read configuration file {str(path)!r}"
            ) from exc
    if overrides:
        layers.append(overrides)

    resolved = DEFAULTS
    for layer in layers:
        if not isinstance(layer, dict):
            raise ConfigurationError("A configuration layer must be a dict")
        _check_keys(layer, DEFAULTS)
        resolved = merge(resolved, layer)
    return PipelineConfig(resolved)


def quantity(value):
    return quantity_parser.parse(value)


def delay_config(config):
    return DelayLineConfig(
        quantity(config.delay.delta_z), config.delay.n_steps
    )


def band_limits(config):
    low, high = config.band
    return quantity(low), quantity(high)


def wavelength_grid(config):
    """All on-grid wavelengths of the band"""
    return wavelength_grid_for_band(delay_config(config), *band_limits(config))


def pixel_pitch(config):
    return quantity(config.frame.pixel_pitch)


def geometry(config):
    return PropagationGeometry(
        quantity(config.solver.distance),
        pixel_pitch(config),
        config.frame.rows,
        config.frame.cols,
        config.solver.padding,
    )


def phantom_spec(config):
    phantom = config.phantom
    return PhantomSpec(
        phantom.kind,
        quantity(phantom.max_depth),
        phantom.bar_layout,
        phantom.graymap_source,
    )


def dispersion_model(config):
    return DispersionModel(**config.solver.dispersion)


def solver_config(config):
    """The SolverConfig of a pipeline configuration"""
    solver = config.solver
    return SolverConfig(
        geometry(config),
        max_cube_iterations=solver.max_cube_iterations,
        tolerance=solver.tolerance,
        denoiser=DenoiserSpec(**solver.denoiser),
        sns=SnsSpec(**solver.sns),
        dispersion=dispersion_model(config),
        wavelengths=solver.wavelengths,
        phase_reference=solver.phase_reference,
    )


def source_profile(config, grid):
    """Source weights on the grid wavelengths"""
    source = config.source
    center = None if source.center is None else quantity(source.center)
    width = None if source.width is None else quantity(source.width)
    return spectral_weight_profile(
        grid, source.profile, center, width, source.scale
    )


def _check_render(render):
    if render.quantity not in QUANTITIES:
        raise ConfigurationError(
            f"Unknown render quantity {render.quantity!r}, "
            f"expect one of {QUANTITIES}"
        )
    for key in ("slices", "rows", "cols"):
        indices = render[key]
        if key == "slices" and indices is None:
            continue
        if not isinstance(indices, (list, tuple)) or not all(
            isinstance(index, int) and not isinstance(index, bool)
            and index >= 0
            for index in indices
        ):
            raise ConfigurationError(
                f"render.{key} must be a list of integers >= 0, "
                f"got {indices!r}"
            )


def validate_config(config, inputs=()):
    """Check every invariant before any computation starts

    Args:
        config (PipelineConfig): The configuration
        inputs (list): Input files that must exist

    Raises:
        ConfigurationError: Naming the offending section
    """
    builders = (
        ("delay", delay_config),
        ("band", wavelength_grid),
        ("frame", geometry),
        ("phantom", phantom_spec),
        ("solver", solver_config),
        ("source", lambda cfg: source_profile(cfg, wavelength_grid(cfg))),
    )
    for section, build in builders:
        try:
            build(config)
        except ConfigurationError:
            raise
        except (HsprError, TypeError, ValueError) as exc:
            raise ConfigurationError(
                f"Invalid {section} configuration: {exc}"
            ) from exc

    if not config.noise_sigma >= 0:
        raise ConfigurationError(
            f"noise_sigma must be >= 0, got {config.noise_sigma}"
        )
    if int(config.seed) != config.seed or config.seed < 0:
        raise ConfigurationError(
            f"seed must be an integer >= 0, got {config.seed}"
        )
    _check_render(config.render)
    source = config.phantom.graymap_source
    if config.phantom.kind == "graymap" and not Path(source).is_file():
        raise ConfigurationError(f"Graymap source {source!r} does not exist")
    for path in inputs:
        if not Path(path).is_file():
            raise ConfigurationError(f"Input file {str(path)!r} does not exist")
    logger.debug("Configuration is valid")
