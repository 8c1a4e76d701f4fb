import itertools

import numpy as np
import pytest
from gmpy2 import mpq
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import kron_matrix, polynomials, random_polynomial
from nicolai.algebra import (
    CarPolynomial,
    adjoint,
    annihilator,
    anticommutator,
    creator,
    grade,
    grade_parts,
    identity,
    multiply,
    number_op,
    op,
    shift,
    support,
)
from nicolai.errors import BadRegionParity, NonHomogeneousArgument, ZeroCoupling
from nicolai.model import (
    SuperchargeSpec,
    WitnessSpec,
    as_coupling,
    averaged_witness,
    delta,
    delta_star,
    free_supercharge,
    hamiltonian_derivation,
    local_hamiltonian,
    margin_region,
    periodic_hamiltonian,
    periodic_supercharge,
    superderivation,
    susy_laplacian,
    witness_operator,
    witness_supercharge_region,
)
from nicolai.region import Boundary, Region

GRID_G = [0, mpq(1, 2), mpq(-1, 2), 1, -1, 2, -2]


def test_periodic_supercharge_examples():
    trilinear = op("c_-1 c*_0 c_1") + op("c_1 c*_2 c_-1")
    assert SuperchargeSpec.periodic(0, 2, 2).build() == trilinear
    assert SuperchargeSpec.periodic(1, 2, 2).build() == trilinear + op("c_-1") + op("c_1")


def test_free_supercharge_examples():
    bulk = op("c_-1 c*_0 c_1") + op("c_1 c*_2 c_3")
    assert SuperchargeSpec.free(1, 2, 2).build() == bulk + op("c_-1") + op("c_1") + op("c_3")
    assert SuperchargeSpec.free(0, 2, 2).build() == bulk


def test_region_parity_checks():
    with pytest.raises(BadRegionParity):
        periodic_supercharge(1, Region(0, 3, Boundary.PERIODIC))
    with pytest.raises(BadRegionParity):
        periodic_supercharge(1, Region(-1, 0, Boundary.PERIODIC))
    with pytest.raises(BadRegionParity):
        free_supercharge(1, Region(-1, 2, Boundary.FREE))
    with pytest.raises(BadRegionParity):
        margin_region(Region(0, 1), extra=1)


def test_coupling_coercion():
    assert as_coupling("2/3") == mpq(2, 3)
    assert as_coupling(3) == 3 and isinstance(as_coupling(3), type(mpq(3)))
    assert isinstance(as_coupling(0.5), float)
    with pytest.raises(TypeError):
        as_coupling(1j)


@pytest.mark.parametrize("g", GRID_G)
def test_nilpotency_grid(g):
    for M, N in itertools.product([2, 4, 6], repeat=2):
        for spec in (SuperchargeSpec.periodic(g, M, N), SuperchargeSpec.free(g, M, N)):
            Q = spec.build()
            assert multiply(Q, Q).is_zero()
            Qd = adjoint(Q)
            assert multiply(Qd, Qd).is_zero()
            assert grade_parts(Q).odd == Q


def test_local_hamiltonian():
    assert local_hamiltonian(annihilator(1)) == identity()
    H = local_hamiltonian(SuperchargeSpec.periodic(1, 2, 2).build())
    assert adjoint(H) == H
    assert grade(H) == 0
    with pytest.raises(NonHomogeneousArgument):
        local_hamiltonian(identity() + annihilator(1))


def test_periodic_supercharge_matches_wrapped_matrix():
    # the wraparound term carries a sign string across the whole window
    Q = SuperchargeSpec.periodic(1, 2, 2).build()
    sites = [-1, 0, 1, 2]
    mat = kron_matrix(Q, sites)
    np.testing.assert_allclose(mat @ mat, 0, atol=0)


def test_margin_rule_reproduces_reference_region():
    O2 = witness_operator(1, 2)
    assert support(O2) == Region(1, 5)
    assert margin_region(support(O2)) == Region(-1, 8, Boundary.PERIODIC)
    assert witness_supercharge_region(3) == Region(-3, 10, Boundary.PERIODIC)


def test_delta_examples():
    assert delta(1, identity()).is_zero()
    assert delta(1, CarPolynomial.zero()).is_zero()
    assert delta(1, creator(1)) == identity() + op("c*_2 c_3") + op("c_-1 c*_0")
    g = mpq(2, 3)
    assert delta(g, creator(1)) == identity(g) + op("c*_2 c_3") + op("c_-1 c*_0")


def test_delta_of_creator_matches_matrix_oracle():
    sites = list(range(-3, 5))
    Q = periodic_supercharge(1, Region(-3, 4, Boundary.PERIODIC))
    a = creator(1)
    lhs = kron_matrix(Q, sites) @ kron_matrix(a, sites) + kron_matrix(a, sites) @ kron_matrix(Q, sites)
    np.testing.assert_allclose(lhs, kron_matrix(delta(1, a), sites), atol=1e-12)


def test_witness_operator_example():
    expected = multiply(creator(3), identity() - (op("c*_4 c_5") + op("c_1 c*_2"))
                        + op("c_1 c*_2 c*_4 c_5", 2))
    assert witness_operator(1, 2) == expected
    assert WitnessSpec(1, 2).build() == expected
    with pytest.raises(ZeroCoupling):
        witness_operator(0, 1)
    with pytest.raises(ZeroCoupling):
        WitnessSpec("0", 1)


@pytest.mark.parametrize("g", [1, mpq(2, 3), -1, 7, 0.5])
@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_witness_identity(g, k):
    O = witness_operator(g, k)
    result = delta(g, O)
    if O.exact:
        assert result == identity(g)
    else:
        assert result.is_scalar() and abs(list(result.terms.values())[0] - g) < 1e-12


def test_witness_translation_and_average():
    assert shift(witness_operator(1, 1), 2) == witness_operator(1, 2)
    assert averaged_witness(1, 1) == witness_operator(1, 1)
    assert support(averaged_witness(1, 3)) == Region(-1, 7)
    assert delta(1, averaged_witness(1, 3)) == identity()
    with pytest.raises(ZeroCoupling):
        averaged_witness(0, 2)


def test_averaged_witness_through_reference_region():
    from nicolai.algebra import graded_commutator

    for n in (1, 2, 3):
        Q = periodic_supercharge(1, witness_supercharge_region(n))
        assert graded_commutator(Q, averaged_witness(1, n)) == identity()


@pytest.mark.parametrize("k,kp", [(k, kp) for k in range(0, 3) for kp in range(-2, 7) if abs(k - kp) > 2])
def test_witness_anticommutation(k, kp):
    assert anticommutator(adjoint(witness_operator(1, k)), witness_operator(1, kp)).is_zero()


@pytest.mark.parametrize("extra", [2, 4])
def test_region_stability(rng, extra):
    for _ in range(8):
        A = random_polynomial(rng, range(0, 5), 4)
        A = grade_parts(A).odd if rng.random() < 0.5 else grade_parts(A).even
        if A.is_zero() or support(A) is None:
            continue
        base = delta(1, A)
        assert delta(1, A, extra=extra) == base
        assert delta(1, A, boundary=Boundary.FREE) == base
        assert delta(1, A, prune=False) == base
        assert delta_star(1, A, extra=extra) == delta_star(1, A)


def test_nilpotent_superderivations(rng):
    for _ in range(8):
        A = grade_parts(random_polynomial(rng, range(0, 4), 4)).odd
        if A.is_zero():
            continue
        assert delta(1, delta(1, A)).is_zero()
        assert delta_star(1, delta_star(1, A)).is_zero()


def test_laplacian_examples():
    assert susy_laplacian(1, identity()).is_zero()
    n1 = number_op(1)
    lap = susy_laplacian(1, n1)
    # the Hamiltonian reaches one supercharge block further than Q itself
    for M, N in [(4, 6), (6, 8), (8, 10)]:
        H = periodic_hamiltonian(1, M, N)
        assert lap == multiply(H, n1) - multiply(n1, H)
    # too small: the wrapped block at the seam overlaps site 1
    H = periodic_hamiltonian(1, 4, 4)
    assert lap != multiply(H, n1) - multiply(n1, H)
    O2 = witness_operator(1, 2)
    assert susy_laplacian(1, O2) == delta(1, delta_star(1, O2))
    assert grade(susy_laplacian(1, O2)) == 1


def test_laplacian_preserves_grade(rng):
    for _ in range(6):
        A = random_polynomial(rng, range(0, 4), 3)
        for part in (grade_parts(A).even, grade_parts(A).odd):
            if part.is_zero():
                continue
            out = susy_laplacian(1, part)
            assert out.is_zero() or grade(out) == grade(part)
            assert out == hamiltonian_derivation(1, part)


@settings(max_examples=25, deadline=None)
@given(polynomials(sites=tuple(range(0, 4)), max_terms=3), st.sampled_from([0, 1, mpq(1, 2)]))
def test_translation_covariance(A, g):
    A = grade_parts(A).odd
    assert delta(g, shift(A, 2)) == shift(delta(g, A), 2)


def test_superderivation_in_float_mode():
    A = witness_operator(0.5, 1)
    assert not A.exact
    result = superderivation(0.5, A)
    assert not result.exact
    assert len(result) == 1 and abs(list(result.terms.values())[0] - 0.5) < 1e-12
