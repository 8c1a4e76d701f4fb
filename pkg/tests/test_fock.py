import numpy as np
import pytest

from conftest import kron_matrix, random_polynomial
from nicolai.algebra import (
    CarPolynomial,
    adjoint,
    annihilator,
    anticommutator,
    creator,
    identity,
    multiply,
    number_op,
)
from nicolai.errors import IterationDivergence, SupportOutsideWindow, WindowMismatch, WindowTooLarge
from nicolai.fock import (
    FockVector,
    Window,
    export_coordinates,
    expectation,
    identity_operator,
    import_coordinates,
    operator_norm,
    represent,
)
from nicolai.model import averaged_witness, delta, periodic_supercharge, witness_operator
from nicolai.region import Boundary, Region


def test_single_mode():
    m = represent(annihilator(0), Window((0,))).toarray()
    np.testing.assert_array_equal(m, [[0, 1], [0, 0]])


def test_window_validation():
    with pytest.raises(WindowTooLarge):
        Window.interval(0, 20)
    with pytest.raises(ValueError):
        Window((2, 1))
    with pytest.raises(SupportOutsideWindow):
        represent(annihilator(5), Window.interval(0, 3))


def test_car_in_representation():
    w = Window.interval(0, 3)
    for i in range(4):
        for j in range(4):
            m = represent(anticommutator(creator(i), annihilator(j)), w).toarray()
            np.testing.assert_array_equal(m, np.eye(16) * (i == j))
            ci, cj = represent(annihilator(i), w).matrix, represent(annihilator(j), w).matrix
            assert (ci @ cj + cj @ ci).count_nonzero() == 0


def test_matches_kron_oracle(rng):
    sites = [-2, 0, 1, 3, 4]
    w = Window(tuple(sites))
    for _ in range(20):
        a = random_polynomial(rng, sites, 5, exact=False)
        np.testing.assert_allclose(represent(a, w).toarray(), kron_matrix(a, sites), atol=1e-13)


def test_homomorphism_laws(rng):
    w = Window.interval(0, 7)
    for _ in range(20):
        a = random_polynomial(rng, w.sites, 5)
        b = random_polynomial(rng, w.sites, 5)
        ra, rb = represent(a, w).matrix, represent(b, w).matrix
        assert abs(represent(multiply(a, b), w).matrix - ra @ rb).max() <= 1e-12
        assert abs(represent(a + b * 3, w).matrix - (ra + 3 * rb)).max() <= 1e-12
        assert abs(represent(adjoint(a), w).matrix - ra.conj().T).max() <= 1e-12


def test_faithfulness(rng):
    w = Window.interval(0, 3)
    assert represent(CarPolynomial.zero(), w).matrix.nnz == 0
    for _ in range(30):
        a = random_polynomial(rng, w.sites, 3)
        assert (represent(a, w).matrix.count_nonzero() == 0) == a.is_zero()


def test_periodic_region_folding():
    region = Region(-1, 2, Boundary.PERIODIC)
    Q = periodic_supercharge(1, region)
    m = represent(Q, region).matrix
    assert (m @ m).count_nonzero() == 0


def test_norms():
    w = Window.interval(0, 3)
    assert operator_norm(represent(annihilator(1), w)).value == pytest.approx(1, abs=1e-12)
    assert operator_norm(represent(number_op(1), w)).value == pytest.approx(1, abs=1e-12)
    assert operator_norm(represent(CarPolynomial.zero(), w)).value == 0.0


def test_norm_window_independence():
    O1 = witness_operator(1, 1)
    base = operator_norm(represent(O1, Window.interval(-1, 3)), "dense_svd").value
    values = [operator_norm(represent(O1, Window.interval(-1 - e, 3 + e)), "sector_blocks").value
              for e in range(4)]
    assert max(abs(v - base) for v in values) <= 1e-10


def test_norm_methods_agree():
    op = represent(averaged_witness(1, 2), Window.interval(-1, 5))
    dense = operator_norm(op, "dense_svd").value
    iterative = operator_norm(op, "iterative")
    blocks = operator_norm(op, "sector_blocks").value
    assert iterative.converged
    assert abs(dense - blocks) <= 1e-12
    assert abs(dense - iterative.value) <= 1e-7 * dense


def test_power_iteration_divergence_flag():
    op = represent(averaged_witness(1, 2), Window.interval(-1, 5))
    res = operator_norm(op, "iterative", max_iter=2)
    assert not res.converged and res.value > 0
    with pytest.raises(IterationDivergence) as info:
        operator_norm(op, "iterative", max_iter=2, raise_on_divergence=True)
    assert info.value.estimate > 0


def test_expectations(rng):
    w = Window.interval(-1, 3)
    v = FockVector(w, rng.standard_normal(w.dim) + 1j * rng.standard_normal(w.dim))
    assert expectation(identity_operator(w), v) == pytest.approx(1, abs=1e-12)
    # delta_g(o(n)) is g times the identity, so every state gives g
    for n in (1, 2):
        o = averaged_witness(1, n)
        wn = Window.interval(-1, 2 * n + 1)
        vn = FockVector(wn, rng.standard_normal(wn.dim))
        assert expectation(represent(delta(1, o), wn, True), vn) == pytest.approx(1, abs=1e-12)
    with pytest.raises(WindowMismatch):
        expectation(identity_operator(Window.interval(0, 2)), v)


def test_coordinate_round_trip(tmp_path, rng):
    w = Window.interval(0, 3)
    a = random_polynomial(rng, w.sites, 4, exact=False)
    op = represent(a, w)
    text = export_coordinates(op, tmp_path / "a.txt")
    back = import_coordinates((tmp_path / "a.txt").read_text())
    assert text.startswith("# window 0 1 2 3")
    assert back.window == w
    assert abs(back.matrix - op.matrix).max() == 0


def test_identity_operator():
    w = Window.interval(0, 2)
    np.testing.assert_array_equal(represent(identity(), w).toarray(), identity_operator(w).toarray())
