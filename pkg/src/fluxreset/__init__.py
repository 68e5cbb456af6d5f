"""Parametric flux-modulation reset toolkit.

Closed-form sideband theory, a time-dependent Lindblad engine, and the
experiment drivers that regenerate the protocol's scan maps and traces.
"""

from .analytics import (
    EffectiveModel,
    RateModel,
    TwoToneCouplings,
    classify_regime,
    coupling_for_first_minimum,
    dispersive_shift,
    effective_eigenvalues,
    evolve_effective,
    first_minimum_time,
    pe_closed_form,
    ramsey_beating,
    rate_model_steady_state,
    reset_rate,
    resonance_frequency,
    sideband_coupling,
    spam_rescale,
    thermal_dephasing,
    three_level_decay,
    two_tone_couplings,
)
from .device import (
    CouplingSpec,
    DeviceSpec,
    FluxDrive,
    OutputFilter,
    ResonatorSpec,
    SidebandDecomposition,
    ThermalSpec,
    Tone,
    TransmonSpec,
    flux_waveform,
    fourier_expand,
    qubit_frequency,
)
from .errors import (
    ConfigError,
    DomainError,
    FluxresetError,
    IntegrationError,
    IntegrityError,
)
from .lindblad import (
    CollapseSet,
    HilbertConfig,
    Trajectory,
    apply_pi_pulse,
    basis_density,
    build_hamiltonian,
    evolve,
    populations,
)

__version__ = "0.1.0"
