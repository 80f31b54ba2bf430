"""Closed-form visibility, probability and fidelity models.

Everything here is a plain function of real parameters; the simulator in
:mod:`singlerail.protocols` and the brute-force :mod:`singlerail.oracle` are
used by the tests to cross-check each formula.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, FitError, InconsistentVisibilitiesError

TELEPORT_PAIRS = ((1, 2), (1, 4), (3, 2), (3, 4))
SWAP_PAIRS = ((1, 2), (1, 3), (4, 2), (4, 3))
DEGENERATE_TOL = 1e-12


def _unit(name: str, v: float) -> float:
    if not 0.0 <= v <= 1.0:
        raise DomainError(f"{name}={v} outside [0, 1]")
    return float(v)


@dataclass(frozen=True)
class SourceParams:
    """Source quality: conditional purity and the two HOM visibilities."""

    lam: float = 1.0
    v_hom_alice: float = 1.0
    v_hom_bob: float = 1.0

    def __post_init__(self):
        _unit("lambda", self.lam)
        _unit("v_hom_alice", self.v_hom_alice)
        _unit("v_hom_bob", self.v_hom_bob)


IDEAL_SOURCE = SourceParams()


# --------------------------------------------------------------------------- probe


def probe_click_probability(alpha: float, eta: float, phi: float) -> float:
    """Single-click probability on one output of the two-copy probe beam splitter."""
    a2 = _unit("alpha", alpha) ** 2
    b2 = 1.0 - a2
    return eta * b2 / 2.0 * (2.0 - b2 * eta + 2.0 * a2 * math.cos(phi))


def probe_visibility(alpha: float, source: SourceParams = IDEAL_SOURCE) -> float:
    """High-loss self-homodyne visibility ``lam**2 * sqrt(V_HOM^A) * alpha**2``."""
    a2 = _unit("alpha", alpha) ** 2
    return source.lam**2 * math.sqrt(source.v_hom_alice) * a2


# --------------------------------------------------------------------------- teleportation


def classical_teleport_visibility(V: float, F: float) -> float:
    """Fringe visibility after an optimal measure-and-prepare strategy of fidelity F."""
    _unit("V", V)
    if not 1.0 / 3.0 - 1e-12 <= F <= 2.0 / 3.0 + 1e-12:
        raise DomainError(f"F={F} outside [1/3, 2/3]")
    return 2.0 * V * (1.0 - V) * abs(2.0 * F - 1.0) / (1.0 + F * (1.0 - 2.0 * V))


def classical_bound(V: float) -> float:
    """Upper edge of the classically reachable teleported visibility."""
    return max(classical_teleport_visibility(V, 1.0 / 3.0), classical_teleport_visibility(V, 2.0 / 3.0))


def teleported_visibility_ideal(V: float, pnr_deterministic: bool = False) -> float:
    """Ideal-source teleported visibility: ``2V/(3-V)`` with threshold detectors, ``V`` with PNR."""
    _unit("V", V)
    return V if pnr_deterministic else 2.0 * V / (3.0 - V)


def teleported_visibility_model(V: float, source: SourceParams = IDEAL_SOURCE) -> float:
    """Teleported visibility for target visibility V with a noisy source (threshold detectors)."""
    lam2 = source.lam**2
    den = 3.0 * lam2 * math.sqrt(source.v_hom_alice) - V
    if den <= 0.0:
        raise DomainError("non-positive denominator: V too large for this source")
    return 2.0 * lam2 * math.sqrt(source.v_hom_alice * source.v_hom_bob) * V / den


def teleported_visibility_from_alpha(alpha: float, source: SourceParams = IDEAL_SOURCE) -> float:
    """Same model parametrized by the qubit vacuum amplitude."""
    a2 = _unit("alpha", alpha) ** 2
    return 2.0 * source.lam**2 * math.sqrt(source.v_hom_alice * source.v_hom_bob) * a2 / (3.0 - a2)


def teleport_coincidence_probability(
    pair: tuple[int, int], alpha: float, delta: float, eta_i: float, eta_j: float
) -> float:
    """Joint click probability of Bob's detector ``pair[0]`` (1 or 3) and Alice's ``pair[1]`` (2 or 4).

    ``eta_i`` and ``eta_j`` are the efficiencies of those two detectors; the
    remaining detectors are marginalized.  Probabilistic routing, threshold
    detectors, ideal source.
    """
    if tuple(pair) not in TELEPORT_PAIRS:
        raise DomainError(f"unknown pair {pair}")
    a2 = _unit("alpha", alpha) ** 2
    sign = -1.0 if tuple(pair) in ((1, 2), (3, 4)) else 1.0
    s = eta_i + eta_j
    return (1.0 - a2) * eta_i * eta_j / 32.0 * (6.0 - s - (2.0 - s) * a2 + sign * 4.0 * a2 * math.cos(delta))


def _alice_sign(detector: str) -> float:
    if detector not in ("A2", "A4"):
        raise DomainError(f"unknown Alice detector {detector!r}")
    return 1.0 if detector == "A2" else -1.0


def teleported_density_ideal(alpha: float, delta: float, detector: str = "A2") -> np.ndarray:
    """Bob's state after an ideal BSM outcome: the input qubit, phase-flipped for detector A4."""
    a = _unit("alpha", alpha)
    g = math.sqrt(1.0 - a * a) * complex(math.cos(delta), math.sin(delta))
    c = _alice_sign(detector) * a * g.conjugate()
    return np.array([[a * a, c], [c.conjugate(), abs(g) ** 2]], dtype=complex)


def teleported_density_nonideal(alpha: float, delta: float, detector: str = "A2") -> np.ndarray:
    """Bob's state after a threshold click with probabilistic routing (unit efficiency).

    Routing leakage and the unresolved two-photon click add vacuum and
    one-photon population and shrink the coherence by sqrt(2).
    """
    a = _unit("alpha", alpha)
    g = math.sqrt(1.0 - a * a) * complex(math.cos(delta), math.sin(delta))
    g2 = abs(g) ** 2
    c = _alice_sign(detector) * a * g.conjugate() / math.sqrt(2.0)
    rho = np.array([[a * a + g2, c], [c.conjugate(), g2 / 2.0]], dtype=complex)
    return rho / (a * a + 1.5 * g2)


# --------------------------------------------------------------------------- swapping


@dataclass(frozen=True)
class SwapParams:
    """Reflectivities of BS2..BS5 and the indistinguishability scale m."""

    R2: float = 0.5
    R3: float = 0.5
    R4: float = 0.5
    R5: float = 0.5
    m: float = 1.0

    def __post_init__(self):
        for name in ("R2", "R3", "R4", "R5"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise DomainError(f"{name}={v} outside (0, 1)")
        _unit("m", self.m)

    @property
    def x(self) -> float:
        return (1 - self.R2) * self.R3 / (self.R2 * (1 - self.R3))

    @property
    def y(self) -> float:
        return (1 - self.R4) / self.R4

    @property
    def z(self) -> float:
        return (1 - self.R5) / self.R5

    @property
    def w(self) -> float:
        return 2.0 * self.m * math.sqrt(self.x * self.y * self.z)

    @classmethod
    def from_xyzw(cls, x: float, y: float, z: float, w: float, R2: float = 0.5) -> "SwapParams":
        """Parameters realizing (x, y, z, w); x fixes only the BS2/BS3 ratio, so R2 is a free choice."""
        if min(x, y, z) <= 0.0:
            raise DomainError("x, y, z must be positive")
        q = x * R2 / (1.0 - R2)  # = R3 / T3
        m = w / (2.0 * math.sqrt(x * y * z))
        return cls(R2, q / (1.0 + q), 1.0 / (1.0 + y), 1.0 / (1.0 + z), m)


def swap_forward(x: float, y: float, z: float, w: float) -> tuple[float, float, float, float]:
    """(V12, V13, V42, V43) of the (x, y, z, w) parametrization."""
    return (w / (x * y + z), w / (x * y * z + 1.0), w / (x + y * z), w / (y + x * z))


def swap_visibilities(params: SwapParams) -> dict[tuple[int, int], float]:
    """Fringe visibilities of the four relevant two-fold coincidences."""
    if params.m == 0.0:
        return {p: 0.0 for p in SWAP_PAIRS}
    return dict(zip(SWAP_PAIRS, swap_forward(params.x, params.y, params.z, params.w)))


def swap_coincidence_probability(
    pair: tuple[int, int], beta_sq: float, params: SwapParams, R1: float = 0.5, xi: float = 0.0
) -> float:
    """Two-fold coincidence probability of ``pair`` at interferometer phase ``xi``.

    Both input pulses carry single-photon weight ``beta_sq``; unit-efficiency
    threshold detectors.  The interference term of (1,2) and (4,3) enters with
    a minus sign, that of (1,3) and (4,2) with a plus sign.
    """
    pair = tuple(pair)
    if pair not in SWAP_PAIRS:
        raise DomainError(f"unknown pair {pair}")
    _unit("beta_sq", beta_sq)
    if not 0.0 <= R1 <= 1.0:
        raise DomainError(f"R1={R1} outside [0, 1]")
    R2, R3, R4, R5 = params.R2, params.R3, params.R4, params.R5
    T2, T3, T4, T5 = 1 - R2, 1 - R3, 1 - R4, 1 - R5
    base = {
        (1, 2): (R2 * T3 * R4 * T5, T2 * R3 * T4 * R5),
        (1, 3): (R2 * T3 * R4 * R5, T2 * R3 * T4 * T5),
        (4, 2): (R2 * T3 * T4 * T5, T2 * R3 * R4 * R5),
        (4, 3): (R2 * T3 * T4 * R5, T2 * R3 * R4 * T5),
    }[pair]
    sign = -1.0 if pair in ((1, 2), (4, 3)) else 1.0
    cross = 2.0 * params.m * math.sqrt(R2 * T2 * R3 * T3 * R4 * T4 * R5 * T5)
    return beta_sq**2 * R1 * (1 - R1) * (base[0] + base[1] + sign * cross * math.cos(xi))


@dataclass(frozen=True)
class SwapSolution:
    x: float
    y: float
    z: float
    w: float

    @property
    def R4(self) -> float:
        return 1.0 / (1.0 + self.y)

    @property
    def R5(self) -> float:
        return 1.0 / (1.0 + self.z)

    @property
    def v_hom(self) -> float:
        return self.w / (2.0 * math.sqrt(self.x * self.y * self.z))

    def forward(self) -> tuple[float, float, float, float]:
        return swap_forward(self.x, self.y, self.z, self.w)


@dataclass(frozen=True)
class SwapInverseResult:
    """Inverse of the swap visibilities.

    The system is symmetric under (x, y, z) -> (1/x, 1/y, 1/z) with m fixed,
    so two parameter sets reproduce the same visibilities.  ``primary`` is the
    one with x*y*z >= 1; ``alternative`` the mirrored one.
    """

    t1: float
    t2: float
    t3: float
    primary: SwapSolution
    alternative: SwapSolution
    degenerate: bool = False

    @property
    def x(self) -> float:
        return self.primary.x

    @property
    def y(self) -> float:
        return self.primary.y

    @property
    def z(self) -> float:
        return self.primary.z

    @property
    def w(self) -> float:
        return self.primary.w

    @property
    def R4(self) -> float:
        return self.primary.R4

    @property
    def R5(self) -> float:
        return self.primary.R5

    @property
    def v_hom(self) -> float:
        return self.primary.v_hom

    def solutions(self) -> tuple[SwapSolution, SwapSolution]:
        return self.primary, self.alternative


def swap_inverse(V12: float, V13: float, V42: float, V43: float) -> SwapInverseResult:
    """Recover (x, y, z, w) from the four swap visibilities.

    z solves ``C z**2 - B z + C = 0`` with ``C = t2 t3 - t1`` and
    ``B = t2**2 + t3**2 - t1**2 - 1``; both roots are positive and reciprocal.
    """
    vs = (V12, V13, V42, V43)
    if any(not 0.0 < v <= 1.0 for v in vs):
        raise DomainError("visibilities must lie in (0, 1]")
    t1, t2, t3 = V12 / V13, V12 / V42, V12 / V43
    C = t2 * t3 - t1
    B = t2 * t2 + t3 * t3 - t1 * t1 - 1.0
    if abs(C) < DEGENERATE_TOL:
        sym = SwapSolution(1.0, 1.0, 1.0, 2.0 * V12)
        return SwapInverseResult(t1, t2, t3, sym, sym, degenerate=True)
    disc = B * B - 4.0 * C * C
    if disc < 0.0:
        raise InconsistentVisibilitiesError(
            f"no real solution (discriminant {disc:.3g}) for visibilities {vs}"
        )
    sols = []
    for z in ((B + math.sqrt(disc)) / (2.0 * C), (B - math.sqrt(disc)) / (2.0 * C)):
        if abs(t1 - z) < DEGENERATE_TOL:
            raise InconsistentVisibilitiesError("z coincides with t1; x and y undefined")
        x = (t2 - t3 * z) / (t1 - z)
        y = (t3 - z * t2) / (t1 - z)
        w = V12 * (1.0 - z * z) / (t1 - z)
        sols.append(SwapSolution(x, y, z, w))
    in_domain = [s for s in sols if s.x > 0 and s.y > 0 and s.z > 0 and s.w >= 0]
    if not in_domain:
        raise InconsistentVisibilitiesError(f"no positive solution for visibilities {vs}")
    in_domain.sort(key=lambda s: s.x * s.y * s.z < 1.0)
    primary = in_domain[0]
    alternative = in_domain[1] if len(in_domain) > 1 else primary
    return SwapInverseResult(t1, t2, t3, primary, alternative)


def swap_permutation_search(
    measured: Mapping[str, float], physical: bool = True
) -> list[tuple[dict[tuple[int, int], str], SwapInverseResult]]:
    """Try every assignment of the measured labels to (V12, V13, V42, V43).

    Returns the assignments whose inversion succeeds (and, with ``physical``,
    gives m <= 1), each with its inverse result.
    """
    labels = list(measured)
    if len(labels) != 4:
        raise DomainError("need exactly four measured visibilities")
    out = []
    for perm in itertools.permutations(labels):
        try:
            res = swap_inverse(*(measured[k] for k in perm))
        except InconsistentVisibilitiesError:
            continue
        if physical and res.primary.v_hom > 1.0 + 1e-12:
            continue
        out.append((dict(zip(SWAP_PAIRS, perm)), res))
    return out


# --------------------------------------------------------------------------- fidelity / purity


def fidelity_from_visibility(V: float) -> float:
    """Average fidelity of the equatorial-plane states, ``(1 + V) / 2``."""
    return (1.0 + _unit("V", V)) / 2.0


@dataclass(frozen=True)
class PurityFit:
    lam: float
    slope: float
    intercept: float


def estimate_purity_from_scan(points: Sequence[tuple[float, float]], v_hom: float) -> PurityFit:
    """Fit V against the single-count rate S_c and read lambda from the S_c -> 0 intercept."""
    if len(points) < 2:
        raise FitError("need at least two (S_c, V) points")
    pts = np.asarray(points, dtype=float)
    if np.any(pts[:, 0] <= 0.0):
        raise DomainError("single-count rates must be positive")
    if not 0.0 < v_hom <= 1.0:
        raise DomainError("v_hom must lie in (0, 1]")
    slope, intercept = np.polyfit(pts[:, 0], pts[:, 1], 1)
    if intercept < 0.0:
        raise FitError(f"negative intercept {intercept:.3g}")
    return PurityFit(math.sqrt(intercept / math.sqrt(v_hom)), float(slope), float(intercept))


# --------------------------------------------------------------------------- curves


def teleport_curve_rows(v_grid: Sequence[float], source: SourceParams = IDEAL_SOURCE) -> list[tuple[float, ...]]:
    """Rows (V, V_T_ideal, V_T_model, classical_bound) on a target-visibility grid."""
    rows = []
    for V in v_grid:
        try:
            model = teleported_visibility_model(V, source)
        except DomainError:
            model = float("nan")
        rows.append((float(V), teleported_visibility_ideal(V, pnr_deterministic=True), model, classical_bound(V)))
    return rows


def teleport_curve_csv(v_grid: Sequence[float], source: SourceParams = IDEAL_SOURCE) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["V", "V_T_ideal", "V_T_model", "classical_bound"])
    for row in teleport_curve_rows(v_grid, source):
        w.writerow([f"{v:.17g}" for v in row])
    return buf.getvalue()
