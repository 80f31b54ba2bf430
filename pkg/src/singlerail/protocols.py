"""Circuit builders for the three experiments and the fringe scanner.

Mode layout (spatial index, time bin in pulse periods):

* ``mzi`` -- time-unbalanced Mach-Zehnder fed by a train of two qubit copies
  on path 1 (bins 0 and 1).  BS1 splits, path 2 is delayed by one period and
  picks up the scan phase, BS2 recombines; detectors D1/D2 watch bin 1 where
  the two copies overlap.  With ``mzi_delay=0`` it becomes a balanced MZI fed
  by a single pulse (the Bell-state analyzer).
* ``teleportation`` -- psi at bin 0 on path 3, |1> at bin 1 on path 1, probe
  at bin 2 on path 3.  BS12 -> BS34 -> delay path 4 -> BS24 (Alice) -> delay
  path 1 -> scan phase on path 1 -> BS13 (Bob).  Alice watches paths 2/4 at
  bin 1, Bob paths 1/3 at bin 2.  Deterministic routing places psi directly on
  path 4 and skips BS34.
* ``swapping`` -- |1> at bins 1 and 0 on path 1.  BS1 (1|2), BS2 (1|4), BS3
  (2|3), delay paths 1 and 2, scan phase on path 4, BS4 (4|1), BS5 (2|3).
  Detectors D1..D4 watch bin 1; D2/D3 are Alice's BSM outputs.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from collections.abc import Mapping, Sequence

import numpy as np

from .detection import (
    PNR,
    THRESHOLD,
    DetectorSpec,
    QubitDensity,
    condition,
    count_populations,
    pattern_probability,
    probability_from_counts,
)
from .errors import ConfigError, DomainError, NoSignalError
from .fock import (
    BeamSplitter,
    Circuit,
    Delay,
    ModeLabel,
    PhaseShift,
    PureState,
    State,
    apply_purity,
    make_distinguishable_qubit,
    make_qubit_state,
    run_circuit,
    tensor,
)

MZI = "mzi"
TELEPORTATION = "teleportation"
SWAPPING = "swapping"
DETERMINISTIC = "deterministic"
PROBABILISTIC = "probabilistic"

BS_IDS = {
    MZI: ("BS1", "BS2"),
    TELEPORTATION: ("BS12", "BS34", "BS24", "BS13"),
    SWAPPING: ("BS1", "BS2", "BS3", "BS4", "BS5"),
}
DETECTOR_IDS = {
    MZI: ("D1", "D2"),
    TELEPORTATION: ("A2", "A4", "B1", "B3"),
    SWAPPING: ("D1", "D2", "D3", "D4"),
}
# detectors doing the self-homodyne readout (high_loss="probe")
PROBE_DETECTORS = {
    MZI: ("D1", "D2"),
    TELEPORTATION: ("B1", "B3"),
    SWAPPING: ("D1", "D4"),
}
SWAP_PAIRS = ((1, 2), (1, 3), (4, 2), (4, 3))
DEFAULT_GRID_POINTS = 64


@dataclass(frozen=True)
class ProtocolSpec:
    """Parameters of one experiment.

    ``x_a``/``x_b`` are principal-mode weights of the photons (see
    :func:`source_weights`); ``high_loss`` selects which detectors are taken in
    the eta -> 0 limit: ``"none"``, ``"all"`` or ``"probe"`` (self-homodyne
    detectors only, heralds stay at their finite efficiency).
    """

    kind: str
    alpha: float = math.sqrt(0.5)
    delta: float = 0.0
    lam: float = 1.0
    x_a: float = 1.0
    x_b: float = 1.0
    etas: Mapping[str, float] = field(default_factory=dict)
    transmittances: Mapping[str, float] = field(default_factory=dict)
    routing: str = PROBABILISTIC
    detector_kind: str = THRESHOLD
    high_loss: str = "none"
    mzi_delay: int = 1

    def __post_init__(self):
        if self.kind not in BS_IDS:
            raise ConfigError(f"unknown protocol kind {self.kind!r}")
        for name, v in (("alpha", self.alpha), ("lambda", self.lam), ("x_a", self.x_a), ("x_b", self.x_b)):
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name}={v} outside [0, 1]")
        if self.routing not in (DETERMINISTIC, PROBABILISTIC):
            raise ConfigError(f"unknown routing {self.routing!r}")
        if self.detector_kind not in (THRESHOLD, PNR):
            raise ConfigError(f"unknown detector kind {self.detector_kind!r}")
        if self.high_loss not in ("none", "all", "probe"):
            raise ConfigError(f"unknown high_loss mode {self.high_loss!r}")
        if self.mzi_delay not in (0, 1):
            raise ConfigError("mzi_delay must be 0 or 1")
        for k, v in self.etas.items():
            if k not in DETECTOR_IDS[self.kind]:
                raise ConfigError(f"{self.kind}: unknown detector {k!r}")
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"eta[{k}]={v} outside [0, 1]")
        for k, v in self.transmittances.items():
            if k not in BS_IDS[self.kind]:
                raise ConfigError(f"{self.kind}: unknown beam splitter {k!r}")
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"T[{k}]={v} outside [0, 1]")

    def T(self, bs: str) -> float:
        return self.transmittances.get(bs, 0.5)

    def eta(self, det: str) -> float:
        return self.etas.get(det, 1.0)

    def with_eta(self, eta: float) -> "ProtocolSpec":
        return replace(self, etas={d: eta for d in DETECTOR_IDS[self.kind]})


def source_weights(v_hom_alice: float, v_hom_bob: float) -> tuple[float, float]:
    """Principal-mode weights (x_a, x_b) reproducing two measured HOM visibilities.

    Alice's photons (the qubit and the Bell photon) carry weight x_a, so their
    HOM visibility is x_a**2; the probe carries x_b, so the Bell-photon/probe
    HOM visibility is x_a * x_b.
    """
    if not (0.0 < v_hom_alice <= 1.0 and 0.0 <= v_hom_bob <= 1.0):
        raise DomainError("HOM visibilities must lie in (0, 1]")
    x_a = math.sqrt(v_hom_alice)
    x_b = v_hom_bob / x_a
    if x_b > 1.0 + 1e-12:
        raise DomainError("v_hom_bob > sqrt(v_hom_alice) cannot be represented")
    return x_a, min(x_b, 1.0)


def _qubit(alpha, delta, x, mode, internal, lam) -> State:
    if x < 1.0:
        q = make_distinguishable_qubit(alpha, delta, x, mode, internal)
    else:
        q = make_qubit_state(alpha, delta, mode)
    if lam < 1.0 and 0.0 < alpha < 1.0:
        return apply_purity(q, lam, alpha)
    return q


def _photon(x, mode, internal) -> PureState:
    return _qubit(0.0, 0.0, x, mode, internal, 1.0)


def _detectors(spec: ProtocolSpec, slots: Mapping[str, tuple[int, int]]) -> list[DetectorSpec]:
    if spec.high_loss == "all":
        limited = set(slots)
    elif spec.high_loss == "probe":
        limited = set(PROBE_DETECTORS[spec.kind])
    else:
        limited = set()
    return [
        DetectorSpec(name, ModeLabel(*slot), spec.eta(name), spec.detector_kind, name in limited)
        for name, slot in slots.items()
    ]


def _build_mzi(spec: ProtocolSpec, phase: float):
    d = spec.mzi_delay
    pulses = [
        _qubit(spec.alpha, spec.delta, spec.x_a, ModeLabel(1, b), b + 1, spec.lam)
        for b in range(d + 1)
    ]
    circuit = Circuit(
        (
            BeamSplitter(1, 2, spec.T("BS1")),
            Delay(2, d),
            PhaseShift(2, phase),
            BeamSplitter(1, 2, spec.T("BS2")),
        )
    )
    slots = {"D1": (1, d), "D2": (2, d)}
    return tensor(*pulses), circuit, _detectors(spec, slots)


def _teleport_input(spec: ProtocolSpec) -> State:
    psi_path = 3 if spec.routing == PROBABILISTIC else 4
    psi = _qubit(spec.alpha, spec.delta, spec.x_a, ModeLabel(psi_path, 0), 1, spec.lam)
    bell = _photon(spec.x_a, ModeLabel(1, 1), 2)
    probe = _qubit(spec.alpha, 0.0, spec.x_b, ModeLabel(3, 2), 3, spec.lam)
    return tensor(psi, bell, probe)


def _teleport_alice_circuit(spec: ProtocolSpec) -> Circuit:
    els = [BeamSplitter(1, 2, spec.T("BS12"))]
    if spec.routing == PROBABILISTIC:
        els.append(BeamSplitter(3, 4, spec.T("BS34")))
    els += [Delay(4, 1), BeamSplitter(2, 4, spec.T("BS24"))]
    return Circuit(els)


def _build_teleportation(spec: ProtocolSpec, phase: float):
    circuit = _teleport_alice_circuit(spec) + Circuit(
        (Delay(1, 1), PhaseShift(1, phase), BeamSplitter(3, 1, spec.T("BS13")))
    )
    slots = {"A2": (2, 1), "A4": (4, 1), "B1": (1, 2), "B3": (3, 2)}
    return _teleport_input(spec), circuit, _detectors(spec, slots)


def swapping_setup(
    spec: ProtocolSpec, phase: float, alpha: float = 0.0
) -> tuple[State, Circuit, list[DetectorSpec]]:
    """Swapping wiring with optional vacuum admixture ``alpha`` on both input pulses."""
    early = _qubit(alpha, spec.delta, spec.x_b, ModeLabel(1, 0), 2, spec.lam)
    late = _qubit(alpha, 0.0, spec.x_a, ModeLabel(1, 1), 1, spec.lam)
    circuit = Circuit(
        (
            BeamSplitter(1, 2, spec.T("BS1")),
            BeamSplitter(1, 4, spec.T("BS2")),
            BeamSplitter(2, 3, spec.T("BS3")),
            Delay(1, 1),
            Delay(2, 1),
            PhaseShift(4, phase),
            BeamSplitter(4, 1, spec.T("BS4")),
            BeamSplitter(2, 3, spec.T("BS5")),
        )
    )
    slots = {f"D{i}": (i, 1) for i in (1, 2, 3, 4)}
    return tensor(late, early), circuit, _detectors(spec, slots)


def build_protocol(spec: ProtocolSpec, phase: float) -> tuple[State, Circuit, list[DetectorSpec]]:
    """Input state, wired circuit (scan phase included) and detectors."""
    if spec.kind == MZI:
        return _build_mzi(spec, phase)
    if spec.kind == TELEPORTATION:
        return _build_teleportation(spec, phase)
    return swapping_setup(spec, phase)


def probe_bs_setup(alpha: float, phi: float, eta: float = 1.0, kind: str = THRESHOLD, limit: bool = False):
    """Two qubit copies on paths 1 and 2 (second one phase-shifted) meeting on one BS."""
    state = tensor(make_qubit_state(alpha, 0.0, ModeLabel(1)), make_qubit_state(alpha, 0.0, ModeLabel(2)))
    circuit = Circuit((PhaseShift(2, phi), BeamSplitter(1, 2)))
    dets = [DetectorSpec("D1", ModeLabel(1), eta, kind, limit), DetectorSpec("D2", ModeLabel(2), eta, kind, limit)]
    return state, circuit, dets


# --------------------------------------------------------------------------- heralds


def _click(spec: ProtocolSpec):
    return 1 if spec.detector_kind == PNR else True


def _silent(spec: ProtocolSpec):
    return 0 if spec.detector_kind == PNR else False


def alice_herald(spec: ProtocolSpec, detector: str) -> dict:
    """Teleportation BSM outcome: ``detector`` fires, the other Alice detector stays silent."""
    other = {"A2": "A4", "A4": "A2"}[detector]
    return {detector: _click(spec), other: _silent(spec)}


def heralds(spec: ProtocolSpec) -> dict[str, dict]:
    """Herald label -> partial pattern evaluated across the scan."""
    c = _click(spec)
    if spec.kind == MZI:
        return {"D1": {"D1": c}, "D2": {"D2": c}}
    if spec.kind == TELEPORTATION:
        return {
            f"{a},{b}": {**alice_herald(spec, a), b: c}
            for a in ("A2", "A4")
            for b in ("B1", "B3")
        }
    return {f"{i},{j}": {f"D{i}": c, f"D{j}": c} for i, j in SWAP_PAIRS}


# --------------------------------------------------------------------------- scanning


def default_grid(n: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    return np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)


def fringe_visibility(phases: Sequence[float], probs: Sequence[float]) -> tuple[float, float]:
    """Visibility and phase of maximum of a fringe pattern.

    Fits ``a + b cos(phi) + c sin(phi)`` by least squares; when the fit leaves
    residuals above 1e-6 (relative to the mean level) falls back to
    (max - min) / (max + min) on the samples.
    """
    phi = np.asarray(phases, dtype=float)
    p = np.asarray(probs, dtype=float)
    if np.max(np.abs(p)) == 0.0:
        raise NoSignalError("all-zero fringe pattern")
    design = np.column_stack([np.ones_like(phi), np.cos(phi), np.sin(phi)])
    coef, *_ = np.linalg.lstsq(design, p, rcond=None)
    a, b, c = coef
    resid = np.max(np.abs(design @ coef - p))
    if a > 0.0 and resid <= 1e-6 * abs(a):
        v = math.hypot(b, c) / a
        phase_max = math.atan2(c, b) % (2.0 * math.pi)
    else:
        hi, lo = float(np.max(p)), float(np.min(p))
        v = (hi - lo) / (hi + lo)
        phase_max = float(phi[int(np.argmax(p))])
    return float(min(max(v, 0.0), 1.0)), float(phase_max)


@dataclass(frozen=True)
class HeraldFringe:
    herald: str
    visibility: float
    mean_probability: float
    phase_of_max: float
    probabilities: tuple[float, ...]


@dataclass(frozen=True)
class FringeScanResult:
    spec: ProtocolSpec
    phases: tuple[float, ...]
    fringes: Mapping[str, HeraldFringe]

    def visibility(self, herald: str) -> float:
        return self.fringes[herald].visibility

    def visibilities(self) -> dict[str, float]:
        return {k: f.visibility for k, f in self.fringes.items()}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["herald", "phase", "probability"])
        for name, f in self.fringes.items():
            for ph, p in zip(self.phases, f.probabilities):
                w.writerow([name, f"{ph:.17g}", f"{p:.17g}"])
        return buf.getvalue()

    def summary(self) -> str:
        return "\n".join(f"{k} -> {f.visibility:.17g}" for k, f in self.fringes.items()) + "\n"


def _check_grid(grid: Sequence[float]) -> np.ndarray:
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size < 8:
        raise DomainError("phase grid needs at least 8 points")
    if np.min(g) < 0.0 or np.max(g) >= 2.0 * math.pi:
        raise DomainError("phase grid must lie in [0, 2 pi)")
    return g


def scan_probabilities(spec: ProtocolSpec, grid: Sequence[float], selected: Mapping[str, Mapping]) -> dict[str, np.ndarray]:
    """Probabilities of the selected partial patterns at every grid phase.

    Every builder applies the scan phase through its only PhaseShift, so the
    state in front of it is computed once and shared across the grid.
    """
    g = _check_grid(grid)
    state, circuit, dets = build_protocol(spec, 0.0)
    k = next(i for i, e in enumerate(circuit.elements) if isinstance(e, PhaseShift))
    scan_el = circuit.elements[k]
    prefix = run_circuit(state, circuit.elements[:k])
    suffix = circuit.elements[k + 1 :]
    out = {name: np.empty(g.size) for name in selected}
    for i, ph in enumerate(g):
        el = PhaseShift(scan_el.mode, float(ph), scan_el.time_bin)
        final = run_circuit(prefix, (el, *suffix))
        counts = count_populations(final, dets)
        for name, h in selected.items():
            out[name][i] = probability_from_counts(counts, dets, h)
    return out


def fringe_scan(spec: ProtocolSpec, grid: Sequence[float] | None = None) -> FringeScanResult:
    """Evaluate every herald's coincidence probability across the phase grid."""
    g = default_grid() if grid is None else _check_grid(grid)
    probs = scan_probabilities(spec, g, heralds(spec))
    fringes = {}
    for k, p in probs.items():
        v, ph = fringe_visibility(g, p)
        fringes[k] = HeraldFringe(k, v, float(np.mean(p)), ph, tuple(float(x) for x in p))
    return FringeScanResult(spec, tuple(float(x) for x in g), fringes)


def conditioning_contrast(spec: ProtocolSpec, grid: Sequence[float] | None = None) -> tuple[float, float]:
    """(heralded, unheralded) visibility of Bob's B1 counts in teleportation."""
    if spec.kind != TELEPORTATION:
        raise ConfigError("conditioning contrast applies to teleportation only")
    g = default_grid() if grid is None else _check_grid(grid)
    c = _click(spec)
    probs = scan_probabilities(
        spec, g, {"cond": {**alice_herald(spec, "A2"), "B1": c}, "uncond": {"B1": c}}
    )
    v_cond = fringe_visibility(g, probs["cond"])[0] if np.any(probs["cond"]) else 0.0
    v_unc = fringe_visibility(g, probs["uncond"])[0] if np.any(probs["uncond"]) else 0.0
    return v_cond, v_unc


def teleported_density(spec: ProtocolSpec, detector: str = "A2") -> tuple[float, QubitDensity]:
    """Herald probability and Bob's state on path 1, bin 1, right after Alice's BSM."""
    if spec.kind != TELEPORTATION:
        raise ConfigError("teleported_density applies to teleportation only")
    state = run_circuit(_teleport_input(spec), _teleport_alice_circuit(spec))
    slots = {"A2": (2, 1), "A4": (4, 1)}
    dets = _detectors(replace(spec, high_loss="none" if spec.high_loss == "probe" else spec.high_loss), slots)
    return condition(state, dets, alice_herald(spec, detector), ModeLabel(1, 1))


def success_probability(spec: ProtocolSpec, alice_detector: str) -> float:
    """Probability of one successful heralded run.

    Teleportation: the BSM outcome on the correctly wired setup, times the
    chance that passive routing sends the input pulse to Alice (R of BS34)
    and the probe pulse to Bob (T of BS34); routing is counted per pulse, as
    a classical switch.  Swapping: Alice detector fires together with either
    Bob/Charlie detector.
    """
    if spec.kind == TELEPORTATION:
        wired = replace(spec, routing=DETERMINISTIC)
        state, circuit, dets = build_protocol(wired, 0.0)
        p = pattern_probability(run_circuit(state, circuit), dets, alice_herald(wired, alice_detector))
        if spec.routing == PROBABILISTIC:
            p *= (1.0 - spec.T("BS34")) * spec.T("BS34")
        return p
    state, circuit, dets = build_protocol(spec, 0.0)
    final = run_circuit(state, circuit)
    if spec.kind == SWAPPING:
        c = _click(spec)
        if alice_detector not in ("D2", "D3"):
            raise ConfigError("swapping Alice detectors are D2 and D3")
        both = pattern_probability(final, dets, {alice_detector: c, "D1": c, "D4": c})
        return (
            pattern_probability(final, dets, {alice_detector: c, "D1": c})
            + pattern_probability(final, dets, {alice_detector: c, "D4": c})
            - both
        )
    raise ConfigError("success probability is defined for teleportation and swapping")
