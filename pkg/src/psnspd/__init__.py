"""Model, fitting and statistics reconstruction for parallel multi-pixel
photon-number-resolving single-photon detectors."""

from .detector_model import (
    ActiveSubsetDistribution,
    PixelEfficiencies,
    ProbabilityMatrix,
    build_p_matrix,
    enumerate_pnm_closed_form,
    evolve_one_photon,
)
from .efficiency_fit import FitOptions, FitResult, fit_efficiencies, fit_efficiencies_joint
from .mc_simulator import ClickCountsHistogram, SimulationConfig, simulate_pulses
from .photon_sources import (
    ClickStatistics,
    PhotonStatistics,
    forward_map,
    forward_map_raw,
    poisson_statistics,
)
from .pipeline import (
    CountRecord,
    counts_to_click_statistics,
    run_fit_workflow,
    run_reconstruct_workflow,
)
from .reconstruction import ReconstructionResult, SingularTruncationError, reconstruct_statistics
from .uncertainty import (
    FluxErrorBudget,
    MatrixUncertainty,
    flux_relative_uncertainty,
    matrix_uncertainty,
    resample_click_counts,
    resample_mu,
)

__version__ = "0.1.0"
