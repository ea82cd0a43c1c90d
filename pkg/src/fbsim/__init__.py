"""Forward-Brillouin optomechanics in truncated Fock space.

A small numpy/scipy toolkit for a comb of optical pump/Stokes pairs coupled
to a single acoustic phonon mode: Hamiltonian builders on capped
multimode Fock bases, exact and factored propagators, heralding and pulse
protocols that synthesize frequency-bin W states, quantum frequency
translation, and Lindblad loss estimates.
"""

from .errors import (
    FbsimError,
    ConfigError,
    BasisSizeError,
    BasisMismatchError,
    StateFormatError,
    NonHermitianError,
    SingularTimeError,
    SeriesDivergenceError,
    TraceDriftError,
    TruncationBudgetError,
    OracleMismatchError,
)
from .fock import (
    Basis,
    Ket,
    DensityOp,
    SparseOp,
    build_basis,
    single_excitation_basis,
    ladder,
    ladder_product,
    number_op,
    apply,
    expect,
    partial_probability,
    leakage_weight,
    save_state,
    load_state,
)
from .hamiltonians import (
    HBAR,
    SystemSpec,
    Drive,
    PowerBudget,
    alpha_from_power,
    power_from_alpha,
    reference_budget,
    build_ladder_hamiltonian,
    build_truncated_hamiltonian,
    classical_pump_parts,
    build_classical_pump_hamiltonian,
    collective_lowering,
    build_squeezer_generator,
    build_beamsplitter_generator,
    load_config_toml,
)
from .dynamics import (
    WeiNormanCoefficients,
    evolve_exact,
    wei_norman_evolve,
    closed_form_phonon_start,
    closed_form_fock_start,
    closed_form_photon_start,
    LindbladConfig,
    lindblad_evolve,
)
from .protocols import (
    PulseSegment,
    Measurement,
    PulseSchedule,
    ProtocolResult,
    run_schedule,
    herald_phonon,
    pi_pulse_swap,
    synthesize_w_standard,
    synthesize_w_perfect,
    synthesize_w_lasers_on,
    frequency_translate,
    super_pi_time,
    run_preset,
    save_schedule,
    load_schedule,
)
from .analysis import (
    Trace,
    fidelity,
    probability_trace,
    SweepSpec,
    fidelity_sweep,
    emit,
    read_trace_csv,
)

__version__ = "0.1.0"

__all__ = [
    "FbsimError", "ConfigError", "BasisSizeError", "BasisMismatchError",
    "StateFormatError", "NonHermitianError", "SingularTimeError",
    "SeriesDivergenceError", "TraceDriftError", "TruncationBudgetError",
    "OracleMismatchError",
    "Basis", "Ket", "DensityOp", "SparseOp", "build_basis",
    "single_excitation_basis", "ladder", "ladder_product", "number_op",
    "apply", "expect", "partial_probability", "leakage_weight",
    "save_state", "load_state",
    "HBAR", "SystemSpec", "Drive", "PowerBudget", "alpha_from_power",
    "power_from_alpha", "reference_budget", "build_ladder_hamiltonian",
    "build_truncated_hamiltonian", "classical_pump_parts",
    "build_classical_pump_hamiltonian", "collective_lowering",
    "build_squeezer_generator", "build_beamsplitter_generator",
    "load_config_toml",
    "WeiNormanCoefficients", "evolve_exact", "wei_norman_evolve",
    "closed_form_phonon_start", "closed_form_fock_start",
    "closed_form_photon_start", "LindbladConfig", "lindblad_evolve",
    "PulseSegment", "Measurement", "PulseSchedule", "ProtocolResult",
    "run_schedule", "herald_phonon", "pi_pulse_swap",
    "synthesize_w_standard", "synthesize_w_perfect", "synthesize_w_lasers_on",
    "frequency_translate", "super_pi_time", "run_preset",
    "save_schedule", "load_schedule",
    "Trace", "fidelity", "probability_trace", "SweepSpec", "fidelity_sweep",
    "emit", "read_trace_csv",
    "__version__",
]
