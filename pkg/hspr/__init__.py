"""Hyperspectral phase retrieval from self-reference interferograms"""
from .cubefile import CubeFile, read_cube, write_cube
from .denoise import (
    DenoiserSpec,
    SnsSpec,
    denoise_complex,
    estimate_noise_sigma,
    sns_amplitude_update,
)
from .exceptions import (
    ConfigurationError,
    CubeFormatError,
    HsprError,
    InvalidArgumentError,
    ModelError,
    PhaseWrapWarning,
)
from .metrics import (
    DepthMap,
    DispersionModel,
    phase_to_thickness,
    plateau_mean,
    refractive_index,
    rrmse,
    thickness_to_phase,
)
from .optics import (
    ComplexField,
    HyperCube,
    PropagationGeometry,
    TransferCache,
    propagate_backward,
    propagate_forward,
    transfer_cache,
    transfer_function,
)
from .phantoms import PhantomSpec, make_phantom, object_cube, object_field
from .retrieval import (
    RetrievalResult,
    SolverConfig,
    backpropagation_baseline,
    hspr_init,
    hspr_run,
    hspr_sweep,
    phase_scale_mu,
    sweep_order,
)
from .spectroscopy import (
    DelayLineConfig,
    InterferogramStack,
    PsnrReport,
    SpectralAmplitudeCube,
    WavelengthGrid,
    add_noise,
    estimate_spectra,
    psnr_observations,
    psnr_spectral,
    synthesize_interferograms,
    wavelength_grid_for_band,
)
from .units import quantity_parser

__version__ = "0.1.0"
