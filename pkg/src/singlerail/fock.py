"""Sparse Fock-state algebra for linear optics on labelled bosonic modes.

A mode is addressed by ``(spatial, time_bin, internal)``.  Optical elements act
on *spatial* indices: a beam splitter between spatial modes 1 and 2 mixes every
time bin and every internal label of those two paths identically, which is how
a passive element treats a train of pulses carrying partially distinguishable
photons.  An element may be restricted to one time bin when a single pulse
slot has to be addressed (e.g. the loss splitters inserted by the oracle).

Beam-splitter convention (``s`` is the reflection sign)::

    a_a^dag -> t a_a^dag + r a_b^dag
    a_b^dag -> s r a_a^dag - s t a_b^dag

i.e. the column-wise matrix ``[[t, s r], [r, -s t]]`` with ``t = sqrt(T)``,
``r = sqrt(1 - T)``.  It is unitary for every ``T`` and ``s``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache
from types import MappingProxyType
from collections.abc import Iterable, Iterator, Mapping, Sequence
from typing import NamedTuple, Union

from .errors import DomainError, PhotonLimitError

MAX_PHOTONS = 8
DEFAULT_PRUNE_TOL = 1e-15
NORM_TOL = 1e-9


class ModeLabel(NamedTuple):
    """One bosonic mode: spatial path, time bin (units of the pulse period) and internal label.

    ``internal == 0`` is the principal mode; positive labels are the fictitious
    modes used to model partial distinguishability.
    """

    spatial: int
    time_bin: int = 0
    internal: int = 0

    def __str__(self) -> str:
        return f"({self.spatial},{self.time_bin},{self.internal})"


def _as_mode(m) -> ModeLabel:
    if isinstance(m, ModeLabel):
        return m
    if isinstance(m, int):
        return ModeLabel(m)
    return ModeLabel(*m)


class FockBasisState:
    """Occupation-number basis ket; only nonzero occupations are stored, in canonical order."""

    __slots__ = ("_occ", "_hash")

    def __init__(self, occupations: Mapping | Iterable = ()):
        items = occupations.items() if isinstance(occupations, Mapping) else occupations
        acc: dict[ModeLabel, int] = {}
        for mode, n in items:
            n = int(n)
            if n < 0:
                raise DomainError(f"negative occupation {n} on {mode}")
            if n:
                mode = _as_mode(mode)
                acc[mode] = acc.get(mode, 0) + n
        self._occ = tuple(sorted(acc.items()))
        self._hash = hash(self._occ)

    @classmethod
    def vacuum(cls) -> "FockBasisState":
        return cls()

    @property
    def occupations(self) -> tuple[tuple[ModeLabel, int], ...]:
        return self._occ

    def occupation(self, mode) -> int:
        mode = _as_mode(mode)
        for m, n in self._occ:
            if m == mode:
                return n
        return 0

    @property
    def total(self) -> int:
        return sum(n for _, n in self._occ)

    def modes(self) -> tuple[ModeLabel, ...]:
        return tuple(m for m, _ in self._occ)

    def as_dict(self) -> dict[ModeLabel, int]:
        return dict(self._occ)

    def __eq__(self, other) -> bool:
        return isinstance(other, FockBasisState) and self._occ == other._occ

    def __lt__(self, other: "FockBasisState") -> bool:
        return self._occ < other._occ

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"FockBasisState({format_basis(self)!r})"


class PureState:
    """Sparse superposition of Fock basis states with complex amplitudes.

    Amplitudes with modulus below ``prune_tol`` are dropped.  Instances are not
    normalized automatically; call :meth:`normalize`.
    """

    __slots__ = ("_terms", "prune_tol")

    def __init__(self, terms: Mapping | Iterable = (), prune_tol: float = DEFAULT_PRUNE_TOL):
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[FockBasisState, complex] = {}
        for basis, amp in items:
            if not isinstance(basis, FockBasisState):
                basis = FockBasisState(basis)
            acc[basis] = acc.get(basis, 0j) + complex(amp)
        kept = {}
        for basis, amp in acc.items():
            if abs(amp) < prune_tol:
                continue
            if basis.total > MAX_PHOTONS:
                raise PhotonLimitError(
                    f"term with {basis.total} photons exceeds the limit of {MAX_PHOTONS}"
                )
            kept[basis] = amp
        self._terms = MappingProxyType(kept)
        self.prune_tol = prune_tol

    @classmethod
    def vacuum(cls) -> "PureState":
        return cls({FockBasisState(): 1.0})

    @classmethod
    def fock(cls, *occupied, prune_tol: float = DEFAULT_PRUNE_TOL) -> "PureState":
        """Single basis state; arguments are modes (occupation 1) or ``(mode, n)`` pairs."""
        occ = []
        for item in occupied:
            if isinstance(item, tuple) and len(item) == 2 and not isinstance(item, ModeLabel):
                occ.append((_as_mode(item[0]), item[1]))
            else:
                occ.append((_as_mode(item), 1))
        return cls({FockBasisState(occ): 1.0}, prune_tol=prune_tol)

    @property
    def terms(self) -> Mapping[FockBasisState, complex]:
        return self._terms

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self) -> Iterator[tuple[FockBasisState, complex]]:
        return iter(self._terms.items())

    def amplitude(self, basis) -> complex:
        if not isinstance(basis, FockBasisState):
            basis = FockBasisState(basis)
        return self._terms.get(basis, 0j)

    def norm_sq(self) -> float:
        return math.fsum(abs(a) ** 2 for a in self._terms.values())

    def normalize(self) -> "PureState":
        n = self.norm_sq()
        if n == 0.0:
            raise DomainError("cannot normalize the zero vector")
        s = 1.0 / math.sqrt(n)
        return PureState({b: a * s for b, a in self._terms.items()}, self.prune_tol)

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(self.norm_sq() - 1.0) <= tol

    def modes(self) -> set[ModeLabel]:
        return {m for b in self._terms for m in b.modes()}

    def max_photons(self) -> int:
        return max((b.total for b in self._terms), default=0)

    def tensor(self, other: "PureState") -> "PureState":
        """Product state; the two factors must not share modes."""
        if self.modes() & other.modes():
            raise DomainError("tensor product of states sharing modes")
        out = {}
        for b1, a1 in self._terms.items():
            for b2, a2 in other._terms.items():
                out[FockBasisState(b1.occupations + b2.occupations)] = a1 * a2
        return PureState(out, min(self.prune_tol, other.prune_tol))

    def inner(self, other: "PureState") -> complex:
        """<self|other>."""
        return sum(a.conjugate() * other._terms.get(b, 0j) for b, a in self._terms.items())

    def isclose(self, other: "PureState", tol: float = 1e-12) -> bool:
        keys = set(self._terms) | set(other._terms)
        return all(abs(self.amplitude(k) - other.amplitude(k)) <= tol for k in keys)

    def __repr__(self) -> str:
        return f"PureState({len(self)} terms)"


@dataclass(frozen=True)
class Ensemble:
    """Weighted mixture of normalized pure states."""

    components: tuple[tuple[float, PureState], ...]

    def __post_init__(self):
        comps = tuple((float(w), s) for w, s in self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise DomainError("empty ensemble")
        for w, s in comps:
            if not (-1e-12 <= w <= 1.0 + 1e-12):
                raise DomainError(f"ensemble weight {w} outside [0, 1]")
            if not s.is_normalized():
                raise DomainError("ensemble component is not normalized")
        total = math.fsum(w for w, _ in comps)
        if abs(total - 1.0) > NORM_TOL:
            raise DomainError(f"ensemble weights sum to {total}")

    @classmethod
    def pure(cls, state: PureState) -> "Ensemble":
        return cls(((1.0, state),))

    def __len__(self) -> int:
        return len(self.components)

    def modes(self) -> set[ModeLabel]:
        return set().union(*(s.modes() for _, s in self.components))

    def max_photons(self) -> int:
        return max(s.max_photons() for _, s in self.components)

    def tensor(self, other: Union["Ensemble", PureState]) -> "Ensemble":
        if isinstance(other, PureState):
            other = Ensemble.pure(other)
        return Ensemble(
            tuple(
                (w1 * w2, s1.tensor(s2))
                for w1, s1 in self.components
                for w2, s2 in other.components
            )
        )

    def map(self, fn) -> "Ensemble":
        return Ensemble(tuple((w, fn(s)) for w, s in self.components))


State = Union[PureState, Ensemble]


def tensor(*states: State) -> State:
    """Tensor product of several states; the result is an Ensemble if any factor is one."""
    if not states:
        return PureState.vacuum()
    out = states[0]
    for s in states[1:]:
        if isinstance(out, PureState) and isinstance(s, PureState):
            out = out.tensor(s)
        else:
            out = (out if isinstance(out, Ensemble) else Ensemble.pure(out)).tensor(s)
    return out


# --------------------------------------------------------------------------- elements


@dataclass(frozen=True)
class BeamSplitter:
    """Two-port beam splitter between spatial paths ``mode_a`` and ``mode_b``.

    ``transmittance`` is the intensity transmittance ``T``.  With ``time_bin``
    set, only that time slot is mixed.
    """

    mode_a: int
    mode_b: int
    transmittance: float = 0.5
    reflection_sign: int = 1
    time_bin: int | None = None

    def __post_init__(self):
        if self.mode_a == self.mode_b:
            raise DomainError("beam splitter ports must differ")
        if not 0.0 <= self.transmittance <= 1.0:
            raise DomainError(f"transmittance {self.transmittance} outside [0, 1]")
        if self.reflection_sign not in (1, -1):
            raise DomainError("reflection_sign must be +1 or -1")

    @property
    def t(self) -> float:
        return math.sqrt(self.transmittance)

    @property
    def r(self) -> float:
        return math.sqrt(1.0 - self.transmittance)

    def matrix(self) -> tuple[tuple[float, float], tuple[float, float]]:
        """Column-wise mode matrix ``[[t, s r], [r, -s t]]``."""
        t, r, s = self.t, self.r, self.reflection_sign
        return ((t, s * r), (r, -s * t))


@dataclass(frozen=True)
class PhaseShift:
    """Phase ``exp(i n phi)`` on spatial path ``mode`` (optionally one time bin)."""

    mode: int
    phi: float
    time_bin: int | None = None


@dataclass(frozen=True)
class Delay:
    """Shift every time bin on spatial path ``mode`` by ``bins`` pulse periods."""

    mode: int
    bins: int = 1


Element = Union[BeamSplitter, PhaseShift, Delay]


@dataclass(frozen=True)
class Circuit:
    """Ordered sequence of elements, applied left to right."""

    elements: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))

    def __add__(self, other: "Circuit") -> "Circuit":
        return Circuit(self.elements + tuple(other.elements))

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def spatial_modes(self) -> set[int]:
        out = set()
        for e in self.elements:
            if isinstance(e, BeamSplitter):
                out |= {e.mode_a, e.mode_b}
            else:
                out.add(e.mode)
        return out


@lru_cache(maxsize=4096)
def _bs_expansion(na: int, nb: int, t: float, r: float, s: int) -> tuple[tuple[int, float], ...]:
    """Output amplitudes ``(p, amp)`` of |na, nb> -> sum amp |p, na + nb - p>."""
    n = na + nb
    coeff = [0.0] * (n + 1)
    for i in range(na + 1):
        c1 = math.comb(na, i) * t**i * r ** (na - i)
        if c1 == 0.0:
            continue
        for j in range(nb + 1):
            c2 = math.comb(nb, j) * (s * r) ** j * (-s * t) ** (nb - j)
            coeff[i + j] += c1 * c2
    norm = math.sqrt(math.factorial(na) * math.factorial(nb))
    out = []
    for p, c in enumerate(coeff):
        if c != 0.0:
            out.append((p, c * math.sqrt(math.factorial(p) * math.factorial(n - p)) / norm))
    return tuple(out)


def _apply_bs(state: PureState, e: BeamSplitter) -> PureState:
    t, r, s = e.t, e.r, e.reflection_sign
    out: dict[FockBasisState, complex] = {}
    for basis, amp in state:
        rest = []
        slots: dict[tuple[int, int], list[int]] = {}
        for mode, n in basis.occupations:
            if mode.spatial in (e.mode_a, e.mode_b) and (
                e.time_bin is None or mode.time_bin == e.time_bin
            ):
                pair = slots.setdefault((mode.time_bin, mode.internal), [0, 0])
                pair[0 if mode.spatial == e.mode_a else 1] += n
            else:
                rest.append((mode, n))
        branches: list[tuple[list, complex]] = [(rest, amp)]
        for (tb, internal), (na, nb) in slots.items():
            ma = ModeLabel(e.mode_a, tb, internal)
            mb = ModeLabel(e.mode_b, tb, internal)
            expansion = _bs_expansion(na, nb, t, r, s)
            branches = [
                (occ + [(ma, p), (mb, na + nb - p)], a * c)
                for occ, a in branches
                for p, c in expansion
            ]
        for occ, a in branches:
            key = FockBasisState(occ)
            out[key] = out.get(key, 0j) + a
    return PureState(out, state.prune_tol)


def _apply_phase(state: PureState, e: PhaseShift) -> PureState:
    out = {}
    for basis, amp in state:
        n = sum(
            k
            for m, k in basis.occupations
            if m.spatial == e.mode and (e.time_bin is None or m.time_bin == e.time_bin)
        )
        out[basis] = amp * cmath.exp(1j * n * e.phi) if n else amp
    return PureState(out, state.prune_tol)


def _apply_delay(state: PureState, e: Delay) -> PureState:
    out = {}
    for basis, amp in state:
        occ = []
        for m, k in basis.occupations:
            if m.spatial == e.mode:
                tb = m.time_bin + e.bins
                if tb < 0:
                    raise DomainError(f"delay moves {m} to negative time bin {tb}")
                m = ModeLabel(m.spatial, tb, m.internal)
            occ.append((m, k))
        out[FockBasisState(occ)] = amp
    return PureState(out, state.prune_tol)


def apply_element(state: PureState, e: Element) -> PureState:
    """Apply one optical element to a pure state."""
    if isinstance(e, BeamSplitter):
        return _apply_bs(state, e)
    if isinstance(e, PhaseShift):
        return _apply_phase(state, e)
    if isinstance(e, Delay):
        return _apply_delay(state, e)
    raise TypeError(f"unknown element {e!r}")


def run_circuit(state: State, circuit: Circuit | Sequence[Element]) -> State:
    """Apply every element in order; ensembles are mapped component-wise."""
    if isinstance(state, Ensemble):
        return state.map(lambda s: run_circuit(s, circuit))
    for e in circuit:
        state = apply_element(state, e)
    return state


# --------------------------------------------------------------------------- constructors


def _check_unit(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise DomainError(f"{name}={value} outside [0, 1]")


def make_qubit_state(alpha: float, delta: float, mode) -> PureState:
    """alpha|0> + sqrt(1 - alpha^2) e^{i delta} |1_mode>."""
    _check_unit("alpha", alpha)
    beta = math.sqrt(max(0.0, 1.0 - alpha * alpha))
    mode = _as_mode(mode)
    return PureState(
        {
            FockBasisState(): alpha,
            FockBasisState({mode: 1}): beta * cmath.exp(1j * delta),
        }
    ).normalize()


def make_distinguishable_qubit(
    alpha: float, delta: float, x: float, mode, fictitious_internal: int
) -> PureState:
    """Qubit whose photon overlaps the principal mode with weight ``x``.

    The remaining ``1 - x`` of the one-photon amplitude sits on the same path and
    time bin with internal label ``fictitious_internal``.  Two photons built this
    way with weights x_a, x_b have HOM visibility x_a * x_b.
    """
    _check_unit("alpha", alpha)
    _check_unit("x", x)
    if fictitious_internal <= 0:
        raise DomainError("fictitious internal label must be positive")
    mode = _as_mode(mode)
    beta = math.sqrt(max(0.0, 1.0 - alpha * alpha))
    ph = beta * cmath.exp(1j * delta)
    fict = ModeLabel(mode.spatial, mode.time_bin, fictitious_internal)
    return PureState(
        {
            FockBasisState(): alpha,
            FockBasisState({mode: 1}): ph * math.sqrt(x),
            FockBasisState({fict: 1}): ph * math.sqrt(1.0 - x),
        }
    ).normalize()


def apply_purity(pure: PureState, lam: float, alpha: float) -> Ensemble:
    """Mix a vacuum/one-photon state with its dephased populations.

    Realizes ``lam |psi><psi| + (1 - lam) (alpha^2 |0><0| + (1 - alpha^2) |1><1|)``
    where ``|1>`` is the normalized one-photon part of ``pure`` (which may be
    spread over internal labels).
    """
    _check_unit("lambda", lam)
    _check_unit("alpha", alpha)
    vac = FockBasisState()
    one = {b: a for b, a in pure if b != vac}
    if any(b.total != 1 for b in one):
        raise DomainError("apply_purity needs a vacuum / one-photon superposition")
    p0 = abs(pure.amplitude(vac)) ** 2
    if abs(p0 - alpha * alpha) > 1e-9:
        raise DomainError(f"vacuum weight {p0} does not match alpha^2={alpha * alpha}")
    comps = [(lam, pure)]
    w0 = (1.0 - lam) * alpha * alpha
    w1 = (1.0 - lam) * (1.0 - alpha * alpha)
    if w0 > 0.0:
        comps.append((w0, PureState.vacuum()))
    if w1 > 0.0:
        comps.append((w1, PureState(one).normalize()))
    return Ensemble(tuple((w, s) for w, s in comps if w > 0.0))


# --------------------------------------------------------------------------- text format


def format_basis(basis: FockBasisState) -> str:
    return " ".join(f"{m}:{n}" for m, n in basis.occupations)


def parse_basis(text: str) -> FockBasisState:
    occ = []
    for tok in text.split():
        mode_txt, n_txt = tok.rsplit(":", 1)
        parts = mode_txt.strip("()").split(",")
        if len(parts) != 3:
            raise ValueError(f"bad mode token {tok!r}")
        occ.append((ModeLabel(*(int(p) for p in parts)), int(n_txt)))
    return FockBasisState(occ)


def format_state(state: PureState) -> str:
    """One term per line: ``<re> <im> | (s,t,i):n ...`` in canonical basis order."""
    lines = []
    for basis in sorted(state.terms):
        a = state.terms[basis]
        lines.append(f"{a.real:.17g} {a.imag:.17g} | {format_basis(basis)}".rstrip())
    return "\n".join(lines) + ("\n" if lines else "")


def parse_state(text: str, prune_tol: float = DEFAULT_PRUNE_TOL) -> PureState:
    terms = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        amp_txt, _, basis_txt = line.partition("|")
        re_txt, im_txt = amp_txt.split()
        terms[parse_basis(basis_txt)] = complex(float(re_txt), float(im_txt))
    return PureState(terms, prune_tol)
