import math

import numpy as np
from hypothesis import settings, strategies as st

from singlerail.fock import FockBasisState, ModeLabel, PureState

settings.register_profile("default", deadline=None)
settings.load_profile("default")

MODES = [ModeLabel(s, t, i) for s in (1, 2, 3) for t in (0, 1) for i in (0, 1)]


@st.composite
def basis_states(draw, max_total=3, modes=MODES):
    total = draw(st.integers(0, max_total))
    picks = draw(st.lists(st.sampled_from(modes), min_size=total, max_size=total))
    return FockBasisState([(m, 1) for m in picks])


@st.composite
def pure_states(draw, max_terms=4, max_total=3, modes=MODES):
    """Random normalized superposition of a few basis states."""
    bases = draw(st.lists(basis_states(max_total, modes), min_size=1, max_size=max_terms, unique=True))
    amps = draw(
        st.lists(
            st.tuples(st.floats(-1, 1), st.floats(-1, 1)),
            min_size=len(bases),
            max_size=len(bases),
        )
    )
    terms = {b: complex(re, im) for b, (re, im) in zip(bases, amps)}
    if sum(abs(a) ** 2 for a in terms.values()) < 1e-6:
        terms[bases[0]] = 1.0
    return PureState(terms).normalize()


unit = st.floats(0.0, 1.0)
phase = st.floats(0.0, 2 * math.pi)


def rho_of(state):
    """Dense density matrix of a pure state over its own basis (test helper)."""
    keys = sorted(state.terms)
    v = np.array([state.amplitude(k) for k in keys])
    return keys, np.outer(v, v.conj())


# ---------------------------------------------------------------- acceptance reporting

ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
