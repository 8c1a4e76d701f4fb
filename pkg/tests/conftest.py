import itertools
from functools import reduce

import numpy as np
import pytest
from gmpy2 import mpq
from hypothesis import strategies as st

from nicolai.algebra import CarMonomial, CarPolynomial


def random_monomial(rng, sites, max_degree=4):
    sites = list(sites)
    cre, ann = [], []
    for s in sites:
        if len(cre) + len(ann) >= max_degree:
            break
        r = rng.random()
        if r < 0.2:
            cre.append(s)
        elif r < 0.4:
            ann.append(s)
        elif r < 0.45:
            cre.append(s)
            ann.append(s)
    return CarMonomial(tuple(cre), tuple(ann))


def random_polynomial(rng, sites, n_terms=4, max_degree=4, exact=True):
    terms = {}
    for _ in range(n_terms):
        mono = random_monomial(rng, sites, max_degree)
        if exact:
            coeff = mpq(int(rng.integers(-5, 6)), int(rng.integers(1, 4)))
        else:
            coeff = complex(rng.standard_normal(), rng.standard_normal())
        terms[mono] = coeff
    return CarPolynomial({m: c for m, c in terms.items() if c})


def monomial_from_states(sites, states):
    """State 0: identity, 1: c*, 2: c, 3: c* c at each site."""
    cre = tuple(s for s, st_ in zip(sites, states) if st_ & 1)
    ann = tuple(s for s, st_ in zip(sites, states) if st_ & 2)
    return CarMonomial(cre, ann)


def all_monomials(sites):
    for states in itertools.product(range(4), repeat=len(sites)):
        yield monomial_from_states(sites, states)


@st.composite
def polynomials(draw, sites=tuple(range(4)), max_terms=4):
    n = draw(st.integers(0, max_terms))
    terms = {}
    for _ in range(n):
        states = draw(st.lists(st.integers(0, 3), min_size=len(sites), max_size=len(sites)))
        num = draw(st.integers(-4, 4))
        den = draw(st.integers(1, 3))
        if num:
            terms[monomial_from_states(sites, states)] = mpq(num, den)
    return CarPolynomial(terms)


# -- independent Kronecker-product oracle ----------------------------------

_A = np.array([[0, 1], [0, 0]], dtype=complex)  # |1> -> |0>
_Z = np.diag([1.0, -1.0]).astype(complex)
_I = np.eye(2, dtype=complex)


def kron_annihilator(slot, n_slots):
    """Dense c_slot with slot 0 as the least significant bit."""
    factors = [_I] * (n_slots - 1 - slot) + [_A] + [_Z] * slot
    return reduce(np.kron, factors, np.eye(1, dtype=complex))


def kron_matrix(poly, sites):
    slots = {s: k for k, s in enumerate(sites)}
    n = len(sites)
    dim = 1 << n
    out = np.zeros((dim, dim), dtype=complex)
    ann = {s: kron_annihilator(k, n) for s, k in slots.items()}
    for mono, coeff in poly.items():
        mat = np.eye(dim, dtype=complex)
        for i in mono.creations:
            mat = mat @ ann[i].conj().T
        for j in mono.annihilations:
            mat = mat @ ann[j]
        out += complex(coeff) * mat
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# -- acceptance report -------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
