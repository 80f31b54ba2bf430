"""Lossy photon detection, heralding and conditional single-mode states.

Losses are folded into detector efficiency.  A detector with efficiency eta
that receives N photons (summed over internal labels, which it cannot
resolve) registers k of them with binomial probability C(N, k) eta^k
(1 - eta)^(N - k); a threshold detector only reports k > 0.  The resulting
POVM is diagonal in the Fock basis, so pattern probabilities are sums of
basis populations weighted by these factors.

Detectors flagged ``limit=True`` are evaluated to leading order in eta -> 0:
each detected photon contributes one power of eta and no-click factors tend to
one.  Ratios of such leading-order probabilities (visibilities, conditional
states) are the exact high-loss limits, free of the cancellation a tiny
numerical eta would suffer.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass
from collections.abc import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DomainError, ImpossibleHeraldError
from .fock import FockBasisState, ModeLabel, PureState, State, _as_mode

THRESHOLD = "threshold"
PNR = "pnr"


@dataclass(frozen=True)
class DetectorSpec:
    """Detector on one (spatial, time_bin) slot; the internal label of ``mode`` is ignored."""

    name: str
    mode: ModeLabel
    eta: float = 1.0
    kind: str = THRESHOLD
    limit: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mode", _as_mode(self.mode))
        if not 0.0 <= self.eta <= 1.0:
            raise DomainError(f"detector {self.name}: eta={self.eta} outside [0, 1]")
        if self.kind not in (THRESHOLD, PNR):
            raise ConfigError(f"detector {self.name}: unknown kind {self.kind!r}")

    @property
    def slot(self) -> tuple[int, int]:
        return (self.mode.spatial, self.mode.time_bin)


class DetectionPattern(Mapping):
    """Immutable map detector name -> outcome (bool for threshold, int for PNR)."""

    __slots__ = ("_items", "_hash")

    def __init__(self, results: Mapping | Iterable = ()):
        items = results.items() if isinstance(results, Mapping) else results
        self._items = dict(items)
        self._hash = hash(frozenset(self._items.items()))

    def __getitem__(self, key):
        return self._items[key]

    def __iter__(self):
        return iter(self._items)

    def __len__(self):
        return len(self._items)

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if isinstance(other, Mapping):
            return self._items == dict(other)
        return NotImplemented

    def encode(self, order: Sequence[str] | None = None) -> str:
        keys = order if order is not None else list(self._items)
        return ";".join(f"{k}={_encode_outcome(self._items[k])}" for k in keys)

    def __repr__(self):
        return f"DetectionPattern({self.encode()!r})"


def _encode_outcome(v) -> str:
    if v is True:
        return "click"
    if v is False:
        return "0"
    return str(int(v))


def parse_pattern(text: str, detectors: Sequence[DetectorSpec]) -> DetectionPattern:
    kinds = {d.name: d.kind for d in detectors}
    out = {}
    for tok in text.split(";"):
        name, _, val = tok.partition("=")
        if name not in kinds:
            raise ConfigError(f"unknown detector {name!r} in pattern")
        if kinds[name] == THRESHOLD:
            out[name] = val == "click"
        else:
            out[name] = int(val)
    return DetectionPattern(out)


def check_detectors(detectors: Sequence[DetectorSpec]) -> None:
    names, slots = set(), set()
    for d in detectors:
        if d.name in names:
            raise ConfigError(f"duplicate detector name {d.name!r}")
        if d.slot in slots:
            raise ConfigError(f"two detectors on slot {d.slot}")
        names.add(d.name)
        slots.add(d.slot)


def populations(state: State) -> list[tuple[float, FockBasisState]]:
    """(weight, basis) pairs: squared amplitudes, ensemble weights folded in."""
    if isinstance(state, PureState):
        return [(abs(a) ** 2, b) for b, a in state]
    return [(w * abs(a) ** 2, b) for w, s in state.components for b, a in s]


def detected_counts(basis: FockBasisState, detectors: Sequence[DetectorSpec]) -> tuple[int, ...]:
    idx = {d.slot: i for i, d in enumerate(detectors)}
    counts = [0] * len(detectors)
    for m, n in basis.occupations:
        i = idx.get((m.spatial, m.time_bin))
        if i is not None:
            counts[i] += n
    return tuple(counts)


def outcome_factor(det: DetectorSpec, n: int, outcome) -> float:
    """P(outcome | n photons reach det); leading order in eta for limit detectors."""
    eta = det.eta
    if det.kind == THRESHOLD:
        click = bool(outcome)
        if det.limit:
            return n * eta if click else 1.0
        miss = (1.0 - eta) ** n
        return 1.0 - miss if click else miss
    k = int(outcome)
    if k < 0 or k > n:
        return 0.0
    if det.limit:
        return math.comb(n, k) * eta**k
    return math.comb(n, k) * eta**k * (1.0 - eta) ** (n - k)


def _herald_index(detectors, herald):
    by_name = {d.name: d for d in detectors}
    for name in herald:
        if name not in by_name:
            raise ConfigError(f"herald names unknown detector {name!r}")
    return [(i, d, herald[d.name]) for i, d in enumerate(detectors) if d.name in herald]


def count_populations(state: State, detectors: Sequence[DetectorSpec]) -> dict[tuple[int, ...], float]:
    """Total weight of each tuple of photon numbers reaching the detectors (before loss)."""
    check_detectors(detectors)
    idx = {d.slot: i for i, d in enumerate(detectors)}
    out: dict[tuple[int, ...], float] = {}
    for w, basis in populations(state):
        counts = [0] * len(detectors)
        for m, n in basis.occupations:
            i = idx.get((m.spatial, m.time_bin))
            if i is not None:
                counts[i] += n
        key = tuple(counts)
        out[key] = out.get(key, 0.0) + w
    return out


def probability_from_counts(
    counts: Mapping[tuple[int, ...], float], detectors: Sequence[DetectorSpec], herald: Mapping
) -> float:
    """Partial-pattern probability from :func:`count_populations` output."""
    sel = _herald_index(detectors, herald)
    total = 0.0
    for c, w in counts.items():
        f = w
        for i, d, outcome in sel:
            f *= outcome_factor(d, c[i], outcome)
            if f == 0.0:
                break
        total += f
    return total


def pattern_probability(
    state: State, detectors: Sequence[DetectorSpec], herald: Mapping
) -> float:
    """Probability of a partial pattern; detectors not named in ``herald`` are marginalized."""
    return probability_from_counts(count_populations(state, detectors), detectors, herald)


def heralding_probability(state: State, detectors: Sequence[DetectorSpec], herald: Mapping) -> float:
    """Alias of :func:`pattern_probability` for heralds."""
    return pattern_probability(state, detectors, herald)


class OutcomeDistribution:
    """Probabilities of full detection patterns over a fixed detector list."""

    def __init__(self, detectors: Sequence[DetectorSpec], probs: Mapping):
        self.detectors = tuple(detectors)
        self.probs = dict(probs)

    def total(self) -> float:
        return math.fsum(self.probs.values())

    def __getitem__(self, pattern) -> float:
        return self.probs.get(DetectionPattern(pattern), 0.0)

    def __len__(self):
        return len(self.probs)

    def marginal(self, herald: Mapping) -> float:
        return math.fsum(
            p for pat, p in self.probs.items() if all(pat[k] == v for k, v in herald.items())
        )

    def max_abs_deviation(self, other: "OutcomeDistribution") -> float:
        keys = set(self.probs) | set(other.probs)
        return max((abs(self.probs.get(k, 0.0) - other.probs.get(k, 0.0)) for k in keys), default=0.0)

    def to_csv(self) -> str:
        order = [d.name for d in self.detectors]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["pattern", "probability"])
        rows = sorted((pat.encode(order), p) for pat, p in self.probs.items())
        for enc, p in rows:
            w.writerow([enc, f"{p:.17g}"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, detectors: Sequence[DetectorSpec]) -> "OutcomeDistribution":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != ["pattern", "probability"]:
            raise ConfigError("missing pattern,probability header")
        return cls(detectors, {parse_pattern(r[0], detectors): float(r[1]) for r in rows[1:] if r})


def _outcomes(d: DetectorSpec, n: int):
    if d.kind == THRESHOLD:
        return (False, True) if n else (False,)
    return range(n + 1)


def outcome_distribution(state: State, detectors: Sequence[DetectorSpec]) -> OutcomeDistribution:
    """Exact distribution over full detection patterns."""
    check_detectors(detectors)
    if any(d.limit for d in detectors):
        raise ConfigError("full distributions need finite-eta detectors (limit=False)")
    probs: dict[DetectionPattern, float] = {}
    names = [d.name for d in detectors]
    cache: dict[tuple[int, ...], list[tuple[tuple, float]]] = {}
    for w, basis in populations(state):
        counts = detected_counts(basis, detectors)
        table = cache.get(counts)
        if table is None:
            table = []
            for combo in itertools.product(*(_outcomes(d, n) for d, n in zip(detectors, counts))):
                p = 1.0
                for d, n, o in zip(detectors, counts, combo):
                    p *= outcome_factor(d, n, o)
                if p:
                    table.append((combo, p))
            cache[counts] = table
        for combo, p in table:
            key = DetectionPattern(zip(names, combo))
            probs[key] = probs.get(key, 0.0) + w * p
    return OutcomeDistribution(detectors, probs)


@dataclass(frozen=True)
class QubitDensity:
    """2x2 density matrix on {|0>, |1>} of one mode; ``rho[0, 1] = <0|rho|1>``."""

    rho: np.ndarray

    def __post_init__(self):
        rho = np.array(self.rho, dtype=complex)
        if rho.shape != (2, 2):
            raise DomainError("qubit density must be 2x2")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    def check(self, herm_tol: float = 1e-12, trace_tol: float = 1e-9, eig_tol: float = 1e-12) -> None:
        if np.max(np.abs(self.rho - self.rho.conj().T)) > herm_tol:
            raise DomainError("density matrix is not Hermitian")
        if abs(np.trace(self.rho).real - 1.0) > trace_tol:
            raise DomainError("density matrix trace differs from one")
        if np.min(np.linalg.eigvalsh(self.rho)) < -eig_tol:
            raise DomainError("density matrix has a negative eigenvalue")

    @property
    def vacuum_population(self) -> float:
        return float(self.rho[0, 0].real)

    @property
    def coherence(self) -> complex:
        return complex(self.rho[0, 1])

    def purity(self) -> float:
        return float(np.trace(self.rho @ self.rho).real)

    def fidelity_with(self, psi: Sequence[complex]) -> float:
        v = np.asarray(psi, dtype=complex)
        return float((v.conj() @ self.rho @ v).real)


def condition(
    state: State,
    detectors: Sequence[DetectorSpec],
    herald: Mapping,
    keep_mode,
) -> tuple[float, QubitDensity]:
    """Herald probability and the normalized {|0>,|1>} state of ``keep_mode`` given the herald.

    All other modes are traced out.  Photons on the kept slot with a nonzero
    internal label count toward the one-photon population but carry no
    coherence with the principal-mode vacuum term.
    """
    check_detectors(detectors)
    keep = _as_mode(keep_mode)
    slot = (keep.spatial, keep.time_bin)
    sel = _herald_index(detectors, herald)
    if any(d.slot == slot for _, d, _ in sel):
        raise ConfigError("kept mode is covered by a heralding detector")
    comps = [(1.0, state)] if isinstance(state, PureState) else list(state.components)
    rho = np.zeros((2, 2), dtype=complex)
    for w, s in comps:
        groups: dict[FockBasisState, list] = {}
        for basis, amp in s:
            rest, n_keep, principal = [], 0, False
            for m, n in basis.occupations:
                if (m.spatial, m.time_bin) == slot:
                    n_keep += n
                    principal = principal or m.internal == keep.internal
                    if m.internal != keep.internal:
                        rest.append((m, n))
                else:
                    rest.append((m, n))
            rkey = FockBasisState(rest)
            counts = detected_counts(basis, detectors)
            f = 1.0
            for i, d, outcome in sel:
                f *= outcome_factor(d, counts[i], outcome)
            if f == 0.0:
                continue
            if n_keep > 1:
                raise DomainError(f"kept mode {keep} carries {n_keep} photons in a heralded term")
            g = groups.setdefault(rkey, [f, 0j, 0j, 0.0])
            if n_keep == 0:
                g[1] += amp
            elif principal:
                g[2] += amp
            else:
                g[3] += abs(amp) ** 2
        for f, a0, a1, extra in groups.values():
            rho[0, 0] += w * f * abs(a0) ** 2
            rho[1, 1] += w * f * (abs(a1) ** 2 + extra)
            rho[0, 1] += w * f * a0 * a1.conjugate()
    rho[1, 0] = rho[0, 1].conjugate()
    prob = float(np.trace(rho).real)
    if prob < 1e-15:
        raise ImpossibleHeraldError("herald probability below 1e-15")
    out = QubitDensity(rho / prob)
    return prob, out
