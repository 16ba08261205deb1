"""Steady-state Keldysh Green's functions with fluctuation-dissipation checks.

Weak-coupling closed-form correlators, the Keldysh component algebra
(contraction products, Dyson inversion), and Born / one-step / fully
self-consistent non-crossing solvers for a bosonic mode whose occupation
couples to an Ohmic bath.
"""

from .bath import BathPropagator, SpectralDensity, bath_propagator, lamb_shift, spectral_times_coth
from .errors import (
    BoseZeroFrequency,
    DomainMismatch,
    GridMismatch,
    KeldyshNcaError,
    NonHermitianPair,
    NotConverged,
    OutOfRange,
    ParseError,
    SingularPropagator,
    ValidationError,
)
from .keldysh import (
    FdrReport,
    KeldyshGF,
    SelfEnergy,
    SpectralFunction,
    circ_multi,
    circ_product,
    circ_two,
    dyson,
    fdr_check,
    from_spectral,
    linear_self_energy,
    to_spectral,
)
from .nca import (
    CompareResult,
    ModelConfig,
    SolveTrace,
    SolverConfig,
    born,
    g1,
    g2,
    nca_solve,
    retarded_compare,
    sum_rule,
)
from .numerics import (
    ComplexSignal,
    FrequencyGrid,
    ThermalParams,
    TimeGrid,
    coth_half,
    occupation,
    principal_value_integral,
    to_frequency,
    to_time,
)
from .weakcorr import (
    CorrelatorResult,
    KmsReport,
    LinearModeModel,
    SpinBosonModel,
    kms_check,
    mode_correlator,
    spin_correlator,
)

__version__ = "0.1.0"
