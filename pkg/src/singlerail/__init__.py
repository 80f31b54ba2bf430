"""Simulation and analysis toolkit for single-rail (vacuum/one-photon) teleportation and swapping.

Modules
-------
fock
    Sparse Fock-state algebra, linear-optical elements and source states.
detection
    Lossy threshold / photon-number-resolving detection, heralding and
    conditional single-mode states.
protocols
    Wiring of the characterization interferometer, teleportation and swapping
    experiments, plus fringe scanning.
analytics
    Closed-form visibility, probability, bound and inverse formulas.
montecarlo
    Poisson count traces and fringe-visibility estimators.
oracle
    Brute-force verifier with loss as explicit environment modes.
cli
    ``singlerail`` command-line entry point.
"""

from .errors import (
    ConfigError,
    DomainError,
    FitError,
    ImpossibleHeraldError,
    InconsistentVisibilitiesError,
    NoSignalError,
    PhotonLimitError,
)
from .fock import (
    BeamSplitter,
    Circuit,
    Delay,
    Ensemble,
    FockBasisState,
    ModeLabel,
    PhaseShift,
    PureState,
    apply_element,
    apply_purity,
    make_distinguishable_qubit,
    make_qubit_state,
    run_circuit,
)
from .detection import (
    DetectionPattern,
    DetectorSpec,
    OutcomeDistribution,
    QubitDensity,
    condition,
    heralding_probability,
    outcome_distribution,
    pattern_probability,
)
from .protocols import FringeScanResult, ProtocolSpec, build_protocol, conditioning_contrast, fringe_scan

__version__ = "0.1.0"

__all__ = [
    "BeamSplitter",
    "Circuit",
    "ConfigError",
    "Delay",
    "DetectionPattern",
    "DetectorSpec",
    "DomainError",
    "Ensemble",
    "FitError",
    "FockBasisState",
    "FringeScanResult",
    "ImpossibleHeraldError",
    "InconsistentVisibilitiesError",
    "ModeLabel",
    "NoSignalError",
    "OutcomeDistribution",
    "PhaseShift",
    "PhotonLimitError",
    "ProtocolSpec",
    "PureState",
    "QubitDensity",
    "apply_element",
    "apply_purity",
    "build_protocol",
    "condition",
    "conditioning_contrast",
    "fringe_scan",
    "heralding_probability",
    "make_distinguishable_qubit",
    "make_qubit_state",
    "outcome_distribution",
    "pattern_probability",
    "run_circuit",
]
