"""Brute-force verifier for the detection model and the closed-form formulas.

Loss is modelled literally: every detector gets a beam splitter of
transmittance eta that couples its slot to a private environment mode
(spatial index ``ENV_BASE + k``).  The resulting pure state is expanded in
the Fock basis and every fine-grained photon-count outcome is enumerated;
environment modes and internal labels are traced out by summation.  Nothing
here uses the binomial thinning factors of :mod:`singlerail.detection`.
"""

from __future__ import annotations

import math
import time
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from . import analytics as an
from .detection import (
    PNR,
    THRESHOLD,
    DetectionPattern,
    DetectorSpec,
    OutcomeDistribution,
    condition,
    outcome_distribution,
)
from .errors import ConfigError, DomainError, PhotonLimitError
from .fock import BeamSplitter, Circuit, ModeLabel, PureState, State, run_circuit
from .protocols import (
    DETERMINISTIC,
    MZI,
    PROBABILISTIC,
    SWAP_PAIRS,
    SWAPPING,
    TELEPORTATION,
    ProtocolSpec,
    _teleport_alice_circuit,
    _teleport_input,
    alice_herald,
    build_protocol,
    fringe_visibility,
    heralds,
    probe_bs_setup,
    swapping_setup,
)

ENV_BASE = 1000
ORACLE_MAX_PHOTONS = 6
EXACT_TOL = 1e-12
FIT_TOL = 1e-9
LIMIT_RAW_TOL = 1e-3
LIMIT_RICHARDSON_TOL = 1e-6
LIMIT_ETAS = (1e-2, 1e-3, 1e-4)


# --------------------------------------------------------------------------- oracle core


def _components(state: State):
    return [(1.0, state)] if isinstance(state, PureState) else list(state.components)


def loss_circuit(detectors: Sequence[DetectorSpec]) -> Circuit:
    """One beam splitter per detector sending the lost fraction to an environment mode."""
    return Circuit(
        BeamSplitter(d.mode.spatial, ENV_BASE + k, d.eta, 1, d.mode.time_bin) for k, d in enumerate(detectors)
    )


def _with_losses(state: State, detectors: Sequence[DetectorSpec]) -> list[tuple[float, PureState]]:
    for d in detectors:
        if d.limit:
            raise ConfigError("the oracle evaluates finite efficiencies only")
    names, slots = set(), set()
    for d in detectors:
        if d.name in names or d.slot in slots:
            raise ConfigError(f"duplicate detector {d.name!r} / slot {d.slot}")
        names.add(d.name)
        slots.add(d.slot)
    out = []
    for w, s in _components(state):
        if s.max_photons() > ORACLE_MAX_PHOTONS:
            raise PhotonLimitError(f"oracle supports at most {ORACLE_MAX_PHOTONS} photons")
        if any(m.spatial >= ENV_BASE for m in s.modes()):
            raise ConfigError(f"spatial indices >= {ENV_BASE} are reserved for environment modes")
        out.append((w, run_circuit(s, loss_circuit(detectors))))
    return out


def _fine_counts(basis, slot_index: Mapping[tuple[int, int], int], n: int) -> list[int]:
    counts = [0] * n
    for m, k in basis.occupations:
        i = slot_index.get((m.spatial, m.time_bin))
        if i is not None:
            counts[i] += k
    return counts


def _coarse(det: DetectorSpec, n: int):
    return n > 0 if det.kind == THRESHOLD else n


def oracle_distribution(state: State, detectors: Sequence[DetectorSpec]) -> OutcomeDistribution:
    """Exact detection-pattern distribution with loss as explicit environment coupling."""
    slot_index = {d.slot: i for i, d in enumerate(detectors)}
    names = [d.name for d in detectors]
    probs: dict[DetectionPattern, float] = {}
    for w, s in _with_losses(state, detectors):
        for basis, amp in s:
            counts = _fine_counts(basis, slot_index, len(detectors))
            key = DetectionPattern(zip(names, (_coarse(d, c) for d, c in zip(detectors, counts))))
            probs[key] = probs.get(key, 0.0) + w * abs(amp) ** 2
    return OutcomeDistribution(detectors, probs)


def oracle_probability(state: State, detectors: Sequence[DetectorSpec], herald: Mapping) -> float:
    return oracle_distribution(state, detectors).marginal(herald)


def oracle_condition(
    state: State, detectors: Sequence[DetectorSpec], herald: Mapping, keep_mode
) -> tuple[float, np.ndarray]:
    """Unnormalized-then-normalized {|0>,|1>} density of ``keep_mode`` by explicit projection."""
    keep = keep_mode if isinstance(keep_mode, ModeLabel) else ModeLabel(*keep_mode)
    slot_index = {d.slot: i for i, d in enumerate(detectors)}
    idx = [(i, d, herald[d.name]) for i, d in enumerate(detectors) if d.name in herald]
    rho = np.zeros((2, 2), dtype=complex)
    for w, s in _with_losses(state, detectors):
        groups: dict[tuple, list] = {}
        for basis, amp in s:
            counts = _fine_counts(basis, slot_index, len(detectors))
            if any(_coarse(d, counts[i]) != outcome for i, d, outcome in idx):
                continue
            n_principal = basis.occupation(keep)
            rest = tuple((m, k) for m, k in basis.occupations if m != keep)
            n_other = sum(k for m, k in rest if (m.spatial, m.time_bin) == (keep.spatial, keep.time_bin))
            if n_principal + n_other > 1:
                raise DomainError("kept mode carries more than one photon")
            g = groups.setdefault(rest, [0j, 0j, n_other])
            g[n_principal] += amp
        for a0, a1, n_other in groups.values():
            if n_other:
                rho[1, 1] += w * abs(a0) ** 2
                continue
            rho[0, 0] += w * abs(a0) ** 2
            rho[1, 1] += w * abs(a1) ** 2
            rho[0, 1] += w * a0 * a1.conjugate()
    rho[1, 0] = rho[0, 1].conjugate()
    p = float(np.trace(rho).real)
    if p <= 0.0:
        raise DomainError("herald never occurs")
    return p, rho / p


# --------------------------------------------------------------------------- reports


@dataclass(frozen=True)
class OracleReport:
    formula_id: str
    grid: str
    n_points: int
    max_abs_deviation: float
    worst_point: str
    threshold: float
    fast_path_deviation: float = 0.0
    raw_limit_deviation: float | None = None
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        ok = self.max_abs_deviation <= self.threshold and self.fast_path_deviation <= EXACT_TOL
        if self.raw_limit_deviation is not None:
            ok = ok and self.raw_limit_deviation <= LIMIT_RAW_TOL
        return ok


def format_reports(reports: Sequence[OracleReport]) -> str:
    """Plain-text table, one line per formula."""
    head = f"{'formula':<22} {'points':>6} {'max_dev':>10} {'threshold':>9} {'fast_dev':>10} {'raw_limit':>10} status  worst"
    lines = [head, "-" * len(head)]
    for r in reports:
        raw = "-" if r.raw_limit_deviation is None else f"{r.raw_limit_deviation:.3e}"
        lines.append(
            f"{r.formula_id:<22} {r.n_points:>6} {r.max_abs_deviation:>10.3e} {r.threshold:>9.0e} "
            f"{r.fast_path_deviation:>10.3e} {raw:>10} {'PASS' if r.passed else 'FAIL':<6}  {r.worst_point}"
        )
    return "\n".join(lines) + "\n"


class _Tracker:
    def __init__(self):
        self.worst = (-1.0, "")
        self.fast = 0.0
        self.n = 0

    def add(self, dev: float, point: str):
        self.n += 1
        if dev > self.worst[0]:
            self.worst = (dev, point)

    def fast_dev(self, state, dets):
        d = outcome_distribution(state, dets).max_abs_deviation(oracle_distribution(state, dets))
        self.fast = max(self.fast, d)


def _phases(n: int) -> np.ndarray:
    return np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)


def richardson(eta_hi: float, v_hi: float, eta_lo: float, v_lo: float) -> float:
    """First-order extrapolation to eta = 0 from two evaluations."""
    return (eta_hi * v_lo - eta_lo * v_hi) / (eta_hi - eta_lo)


# --------------------------------------------------------------------------- formulas


def _v_probe_P(grid):
    t = _Tracker()
    for a2 in grid["alpha_sq"]:
        a = math.sqrt(a2)
        for eta in grid["eta"]:
            for phi in grid["phi"]:
                state, circ, dets = probe_bs_setup(a, phi, eta)
                final = run_circuit(state, circ)
                p = oracle_probability(final, dets, {"D1": True})
                t.add(abs(p - an.probe_click_probability(a, eta, phi)), f"alpha_sq={a2} eta={eta} phi={phi:.4f}")
                t.fast_dev(final, dets)
    return t, EXACT_TOL, None


def _limit_check(points: Sequence[tuple[str, Callable, float]], etas):
    """points: (label, visibility(eta, tracker), target).  Tracks Richardson deviations."""
    t = _Tracker()
    raw = 0.0
    for label, vis, target in points:
        vs = [vis(e, t) for e in etas]
        devs = [abs(v - target) for v in vs]
        if not all(d1 >= d2 for d1, d2 in zip(devs, devs[1:])):
            t.add(float("inf"), label + " (not converging)")
            continue
        raw = max(raw, devs[-1])
        t.add(abs(richardson(etas[-2], vs[-2], etas[-1], vs[-1]) - target), label)
    return t, raw


def _v_probe_V_limit(grid):
    phases = _phases(grid["n_phases"])

    def vis_fn(a):
        def vis(eta, t):
            probs = []
            for phi in phases:
                state, circ, dets = probe_bs_setup(a, phi, eta)
                final = run_circuit(state, circ)
                probs.append(oracle_probability(final, dets, {"D1": True}))
                t.fast_dev(final, dets)
            return fringe_visibility(phases, probs)[0]

        return vis

    pts = [(f"alpha_sq={a2}", vis_fn(math.sqrt(a2)), a2) for a2 in grid["alpha_sq"]]
    t, raw = _limit_check(pts, grid["eta"])
    return t, LIMIT_RICHARDSON_TOL, raw


def _teleport_etas(et):
    return dict(zip(("B1", "B3", "A2", "A4"), et))


def _v_teleport_P4(grid):
    t = _Tracker()
    for a2 in grid["alpha_sq"]:
        a = math.sqrt(a2)
        for et in grid["etas"]:
            etas = _teleport_etas(et)
            for delta in grid["delta"]:
                spec = ProtocolSpec(TELEPORTATION, alpha=a, delta=delta, etas=etas)
                state, circ, dets = build_protocol(spec, 0.0)
                final = run_circuit(state, circ)
                dist = oracle_distribution(final, dets)
                for i, j in an.TELEPORT_PAIRS:
                    p = dist.marginal({f"B{i}": True, f"A{j}": True})
                    f = an.teleport_coincidence_probability((i, j), a, delta, etas[f"B{i}"], etas[f"A{j}"])
                    t.add(abs(p - f), f"pair={i},{j} alpha_sq={a2} etas={et} delta={delta:.4f}")
                t.fast_dev(final, dets)
    return t, EXACT_TOL, None


def _v_teleport_VT(grid):
    phases = _phases(grid["n_phases"])

    def vis_fn(a, herald_name):
        def vis(eta, t):
            spec = ProtocolSpec(TELEPORTATION, alpha=a).with_eta(eta)
            h = heralds(spec)[herald_name]
            probs = []
            for phi in phases:
                state, circ, dets = build_protocol(spec, phi)
                final = run_circuit(state, circ)
                probs.append(oracle_probability(final, dets, h))
                t.fast_dev(final, dets)
            return fringe_visibility(phases, probs)[0]

        return vis

    pts = [
        (f"alpha_sq={a2} herald={h}", vis_fn(math.sqrt(a2), h), 2 * a2 / (3 - a2))
        for a2 in grid["alpha_sq"]
        for h in grid["heralds"]
    ]
    t, raw = _limit_check(pts, grid["eta"])
    return t, LIMIT_RICHARDSON_TOL, raw


def _swap_spec(Ts, xs):
    return ProtocolSpec(
        SWAPPING, x_a=xs[0], x_b=xs[1], transmittances={f"BS{i + 1}": T for i, T in enumerate(Ts)}
    )


def _swap_params(Ts, xs):
    return an.SwapParams(*(1.0 - T for T in Ts[1:]), m=xs[0] * xs[1])


def _v_swap_P4(grid):
    t = _Tracker()
    for Ts in grid["transmittances"]:
        for xs in grid["x"]:
            spec, params = _swap_spec(Ts, xs), _swap_params(Ts, xs)
            for a2 in grid["alpha_sq"]:
                for xi in grid["xi"]:
                    state, circ, dets = swapping_setup(spec, xi, alpha=math.sqrt(a2))
                    final = run_circuit(state, circ)
                    dist = oracle_distribution(final, dets)
                    for i, j in SWAP_PAIRS:
                        p = dist.marginal({f"D{i}": True, f"D{j}": True})
                        f = an.swap_coincidence_probability((i, j), 1.0 - a2, params, 1.0 - Ts[0], xi)
                        t.add(abs(p - f), f"pair={i},{j} T={Ts} x={xs} alpha_sq={a2} xi={xi:.4f}")
                    t.fast_dev(final, dets)
    return t, EXACT_TOL, None


def _v_swap_V4(grid):
    t = _Tracker()
    phases = _phases(grid["n_phases"])
    for Ts in grid["transmittances"]:
        for xs in grid["x"]:
            spec, params = _swap_spec(Ts, xs), _swap_params(Ts, xs)
            expected = an.swap_visibilities(params)
            probs = {p: [] for p in SWAP_PAIRS}
            for xi in phases:
                state, circ, dets = build_protocol(spec, xi)
                dist = oracle_distribution(run_circuit(state, circ), dets)
                for i, j in SWAP_PAIRS:
                    probs[(i, j)].append(dist.marginal({f"D{i}": True, f"D{j}": True}))
            for pair, ps in probs.items():
                v = fringe_visibility(phases, ps)[0]
                t.add(abs(v - expected[pair]), f"pair={pair} T={Ts} x={xs}")
    return t, FIT_TOL, None


def _v_rho(grid, ideal: bool):
    t = _Tracker()
    formula = an.teleported_density_ideal if ideal else an.teleported_density_nonideal
    for a2 in grid["alpha_sq"]:
        a = math.sqrt(a2)
        for delta in grid["delta"]:
            for det in ("A2", "A4"):
                if ideal:
                    spec = ProtocolSpec(TELEPORTATION, alpha=a, delta=delta, routing=DETERMINISTIC, detector_kind=PNR)
                else:
                    spec = ProtocolSpec(TELEPORTATION, alpha=a, delta=delta, routing=PROBABILISTIC)
                state = run_circuit(_teleport_input(spec), _teleport_alice_circuit(spec))
                dets = [DetectorSpec("A2", ModeLabel(2, 1), kind=spec.detector_kind),
                        DetectorSpec("A4", ModeLabel(4, 1), kind=spec.detector_kind)]
                herald = alice_herald(spec, det)
                _, rho = oracle_condition(state, dets, herald, ModeLabel(1, 1))
                t.add(float(np.max(np.abs(rho - formula(a, delta, det)))), f"alpha_sq={a2} delta={delta:.4f} det={det}")
                _, fast = condition(state, dets, herald, ModeLabel(1, 1))
                t.fast = max(t.fast, float(np.max(np.abs(fast.rho - rho))))
    return t, EXACT_TOL, None


def _v_bell_mzi(grid):
    t = _Tracker()
    for phi in grid["phi"]:
        spec = ProtocolSpec(MZI, alpha=0.0, mzi_delay=0)
        state, circ, dets = build_protocol(spec, phi)
        final = run_circuit(state, circ)
        p = oracle_probability(final, dets, {"D1": True})
        t.add(abs(p - math.cos(phi / 2.0) ** 2), f"phi={phi:.4f}")
        t.fast_dev(final, dets)
    return t, EXACT_TOL, None


_T_SETS = ((0.5, 0.5, 0.5, 0.5, 0.5), (0.45, 0.6, 0.35, 0.55, 0.62), (0.3, 0.7, 0.52, 0.4, 0.25))

DEFAULT_GRIDS: dict[str, dict] = {
    "probe_P": {"alpha_sq": (0.0, 0.25, 0.5, 0.75, 1.0), "eta": (0.01, 0.5, 1.0), "phi": tuple(_phases(16))},
    "probe_V_limit": {"alpha_sq": (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9), "eta": LIMIT_ETAS, "n_phases": 8},
    "teleport_P4": {
        "alpha_sq": (0.0, 0.25, 0.5, 0.75, 1.0),
        "etas": ((1.0, 1.0, 1.0, 1.0), (0.7, 0.4, 0.9, 0.5), (0.2, 0.6, 0.3, 0.8)),
        "delta": tuple(_phases(8)),
    },
    "teleport_VT_threshold": {
        "alpha_sq": (0.1, 0.3, 0.5, 0.7, 0.9),
        "heralds": ("A2,B1", "A4,B3"),
        "eta": LIMIT_ETAS,
        "n_phases": 8,
    },
    "swap_P4": {
        "transmittances": _T_SETS,
        "x": ((1.0, 1.0), (0.95, 0.9)),
        "alpha_sq": (0.0, 0.3),
        "xi": tuple(_phases(4)),
    },
    "swap_V4": {"transmittances": _T_SETS, "x": ((1.0, 1.0), (0.95, 0.9)), "n_phases": 8},
    "rho_T_ideal": {"alpha_sq": (0.0, 0.2, 0.5, 0.8, 1.0), "delta": tuple(_phases(4))},
    "rho_T_nonideal": {"alpha_sq": (0.0, 0.2, 0.5, 0.8, 1.0), "delta": tuple(_phases(4))},
    "bell_mzi_cos2": {"phi": tuple(_phases(16))},
}

_VERIFIERS = {
    "probe_P": _v_probe_P,
    "probe_V_limit": _v_probe_V_limit,
    "teleport_P4": _v_teleport_P4,
    "teleport_VT_threshold": _v_teleport_VT,
    "swap_P4": _v_swap_P4,
    "swap_V4": _v_swap_V4,
    "rho_T_ideal": lambda g: _v_rho(g, True),
    "rho_T_nonideal": lambda g: _v_rho(g, False),
    "bell_mzi_cos2": _v_bell_mzi,
}
FORMULA_IDS = tuple(_VERIFIERS)


def _describe(grid: Mapping) -> str:
    return "; ".join(f"{k}[{len(v)}]" if isinstance(v, (tuple, list)) else f"{k}={v}" for k, v in grid.items())


def verify_formula(formula_id: str, grid: Mapping | None = None) -> OracleReport:
    """Run the oracle over a grid and compare with the closed form ``formula_id``.

    ``grid`` entries override the registered defaults key by key.
    """
    if formula_id not in _VERIFIERS:
        raise ConfigError(f"unknown formula id {formula_id!r}; known: {', '.join(FORMULA_IDS)}")
    g = dict(DEFAULT_GRIDS[formula_id])
    for k, v in (grid or {}).items():
        if k not in g:
            raise ConfigError(f"{formula_id}: unknown grid key {k!r}")
        g[k] = v
    start = time.perf_counter()
    tracker, threshold, raw = _VERIFIERS[formula_id](g)
    return OracleReport(
        formula_id,
        _describe(g),
        tracker.n,
        tracker.worst[0],
        tracker.worst[1],
        threshold,
        tracker.fast,
        raw,
        time.perf_counter() - start,
    )


def verify_all(ids: Sequence[str] | None = None) -> list[OracleReport]:
    return [verify_formula(i) for i in (ids or FORMULA_IDS)]
