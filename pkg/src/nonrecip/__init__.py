"""Non-Markovian Hatano-Nelson chain: Green's functions, transmission and NESS currents.

Energies are measured in units of the chain hopping ``g``.
"""

__version__ = "0.1.0"

from .errors import (
    DefectiveMatrixError,
    DegenerateFitError,
    NonrecipError,
    QuadratureError,
    SingularDenominatorError,
    SingularMatrixError,
)
from .model import (
    ClosedFormSelfEnergy,
    ConstantSelfEnergy,
    FrozenGamma,
    ModelParams,
    gamma_of_z,
    hoppings,
    markovian_gamma,
    onsite_energy,
)
from .greens import (
    EffectiveHamiltonian,
    build_matrix,
    greens_dense,
    greens_element,
    scaling_factors,
    transfer_matrix,
)
from .momentum import dissipationless_mode, momentum_greens, spectral_function, spectral_heatmap
from .transport import (
    CorrelationMatrix,
    CurrentResult,
    LeadConfig,
    current_markovian_lyapunov,
    current_markovian_negf,
    current_nonmarkovian,
    lyapunov_steady_state,
    transmission,
)
from .analysis import FitResult, NdqptCurve, fit_scaling, ndqpt_scan, skin_measure
