"""Supercharges, Hamiltonians, superderivations and witness operators of the
Nicolai chain with linear coupling g.

The infinite-volume supercharge

    Q(g) = sum_k ( g c_{2k-1} + c_{2k-1} c*_{2k} c_{2k+1} )

is never built.  Every map that needs it (``delta_g``, ``delta_g^*``,
``d_g``) is evaluated on a local operator through a finite truncation large
enough that graded locality makes the result exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from gmpy2 import mpq

from .algebra import (
    CarPolynomial,
    adjoint,
    annihilator,
    coerce_coefficient,
    commutator,
    creator,
    grade,
    graded_commutator,
    local_graded_commutator,
    multiply,
    op,
    support,
)
from .errors import BadRegionParity, NonHomogeneousArgument, ZeroCoupling
from .region import Boundary, Region


def as_coupling(g):
    """Exact rational for ints, fractions and decimal/rational strings; floats stay floats."""
    if isinstance(g, str):
        return mpq(g.strip())
    c, exact = coerce_coefficient(g)
    if isinstance(c, complex) or (exact and not isinstance(c, mpq)):
        raise TypeError(f"coupling must be real, got {g!r}")
    return c


@dataclass(frozen=True)
class SuperchargeSpec:
    g: object
    region: Region

    def __post_init__(self):
        object.__setattr__(self, "g", as_coupling(self.g))

    @classmethod
    def periodic(cls, g, M: int, N: int) -> SuperchargeSpec:
        return cls(g, Region(-M + 1, N, Boundary.PERIODIC))

    @classmethod
    def free(cls, g, M: int, N: int) -> SuperchargeSpec:
        return cls(g, Region(-M + 1, N + 1, Boundary.FREE))

    @property
    def boundary(self) -> Boundary:
        return self.region.boundary

    def build(self) -> CarPolynomial:
        return supercharge(self)


@dataclass(frozen=True)
class WitnessSpec:
    g: object
    k: int

    def __post_init__(self):
        g = as_coupling(self.g)
        if g == 0:
            raise ZeroCoupling("witness operators need g != 0")
        object.__setattr__(self, "g", g)

    def build(self) -> CarPolynomial:
        return witness_operator(self.g, self.k)


def _check_periodic(region: Region):
    if region.boundary is not Boundary.PERIODIC:
        raise BadRegionParity(f"{region} is not a periodic region")
    if region.left % 2 == 0 or region.right % 2 or region.size < 4:
        raise BadRegionParity(f"periodic supercharge needs [-M+1, N] with M, N even and M+N >= 4, got {region}")


def _check_free(region: Region):
    if region.boundary is not Boundary.FREE:
        raise BadRegionParity(f"{region} is not a free region")
    if region.left % 2 == 0 or region.right % 2 == 0 or region.size < 3:
        raise BadRegionParity(f"free supercharge needs [-M+1, N+1] with M, N even and M+N >= 2, got {region}")


def _bulk_terms(g, k_lo: int, k_hi: int, last_site) -> CarPolynomial:
    out = CarPolynomial.zero()
    for k in range(k_lo, k_hi + 1):
        a, b, c = 2 * k - 1, 2 * k, last_site(2 * k + 1)
        out = out + CarPolynomial.from_word([(a, False), (b, True), (c, False)])
        if g:
            out = out + annihilator(a) * g
    return out


def periodic_supercharge(g, region: Region) -> CarPolynomial:
    """Truncated supercharge on ``[-M+1, N]`` with site ``N+1`` wrapped to ``-M+1``."""
    g = as_coupling(g)
    _check_periodic(region)
    return _bulk_terms(g, (region.left + 1) // 2, region.right // 2, region.fold)


def free_supercharge(g, region: Region) -> CarPolynomial:
    """Truncated supercharge on ``[-M+1, N+1]`` ending in the tail ``g c_{N+1}``."""
    g = as_coupling(g)
    _check_free(region)
    bulk = _bulk_terms(g, (region.left + 1) // 2, (region.right - 1) // 2, lambda s: s)
    return bulk + annihilator(region.right) * g if g else bulk


@lru_cache(maxsize=256)
def _cached_supercharge(g, region: Region) -> CarPolynomial:
    if region.boundary is Boundary.PERIODIC:
        return periodic_supercharge(g, region)
    return free_supercharge(g, region)


@lru_cache(maxsize=256)
def _cached_hamiltonian(g, region: Region) -> CarPolynomial:
    return local_hamiltonian(_cached_supercharge(g, region))


def supercharge(spec: SuperchargeSpec) -> CarPolynomial:
    if spec.boundary is Boundary.PERIODIC:
        return periodic_supercharge(spec.g, spec.region)
    return free_supercharge(spec.g, spec.region)


def local_hamiltonian(Q: CarPolynomial) -> CarPolynomial:
    """``{Q, Q*}`` for an odd supercharge ``Q``."""
    if grade(Q) != 1 and not Q.is_zero():
        raise NonHomogeneousArgument("local Hamiltonians are built from odd supercharges")
    Qd = adjoint(Q)
    return multiply(Q, Qd) + multiply(Qd, Q)


def periodic_hamiltonian(g, M: int, N: int) -> CarPolynomial:
    return local_hamiltonian(periodic_supercharge(g, Region(-M + 1, N, Boundary.PERIODIC)))


def free_hamiltonian(g, M: int, N: int) -> CarPolynomial:
    return local_hamiltonian(free_supercharge(g, Region(-M + 1, N + 1, Boundary.FREE)))


# -- superderivations ------------------------------------------------------

def _round_up_even(x: int) -> int:
    return x + (x % 2)


def margin_region(sup: Region, boundary: Boundary | str = Boundary.PERIODIC, extra: int = 0) -> Region:
    """Truncation region on which the local supercharge reproduces ``delta_g``.

    ``sup`` is widened outward to ``[-S+1, T]`` with ``S``, ``T`` even; the
    periodic region is then ``[-(S+2)+1, T+2]`` and the free one
    ``[-(S+2)+1, T+3]``.  ``extra`` (even) widens both sides further.
    """
    if extra % 2:
        raise BadRegionParity("extra margin must be even")
    S = _round_up_even(1 - sup.left)
    T = _round_up_even(sup.right)
    M, N = S + 2 + extra, T + 2 + extra
    if Boundary(boundary) is Boundary.PERIODIC:
        return Region(-M + 1, N, Boundary.PERIODIC)
    return Region(-M + 1, N + 1, Boundary.FREE)


def local_supercharge_for(g, A: CarPolynomial, boundary=Boundary.PERIODIC, extra: int = 0) -> CarPolynomial | None:
    """Truncated supercharge adapted to ``A``; ``None`` when ``A`` is a scalar or zero."""
    if A.is_zero():
        return None
    sup = support(A)
    if sup is None:
        return None
    return _cached_supercharge(as_coupling(g), margin_region(sup, boundary, extra))


def superderivation(g, A: CarPolynomial, *, conjugate: bool = False, boundary=Boundary.PERIODIC,
                    extra: int = 0, prune: bool = True) -> CarPolynomial:
    """``delta_g(A) = [Q(g), A]_gamma`` (or ``delta_g^*`` with ``conjugate=True``).

    The supercharge is truncated to :func:`margin_region` of ``support(A)``.
    With ``prune=False`` every term of the truncation enters the graded
    commutator literally; the default skips terms on sites disjoint from
    ``A``, which contribute exactly zero.
    """
    Q = local_supercharge_for(g, A, boundary, extra)
    if Q is None:
        return CarPolynomial.zero(A.exact)
    if conjugate:
        Q = adjoint(Q)
    return local_graded_commutator(Q, A) if prune else graded_commutator(Q, A)


def delta(g, A: CarPolynomial, **kw) -> CarPolynomial:
    return superderivation(g, A, **kw)


def delta_star(g, A: CarPolynomial, **kw) -> CarPolynomial:
    return superderivation(g, A, conjugate=True, **kw)


def susy_laplacian(g, A: CarPolynomial, prune: bool = True) -> CarPolynomial:
    """``d_g(A) = delta*_g delta_g (A) + delta_g delta*_g (A)``."""
    return (delta_star(g, delta(g, A, prune=prune), prune=prune)
            + delta(g, delta_star(g, A, prune=prune), prune=prune))


def hamiltonian_region_for(A: CarPolynomial, extra: int = 0) -> Region | None:
    """Periodic region on which ``[H_loc, A]`` equals ``d_g(A)``.

    Hamiltonian terms reach one supercharge term further than the supercharge
    itself, so the support is padded by two sites before the margin rule.
    """
    if A.is_zero():
        return None
    sup = support(A)
    if sup is None:
        return None
    return margin_region(sup.enlarged(2), Boundary.PERIODIC, extra)


def hamiltonian_derivation(g, A: CarPolynomial, region: Region | None = None,
                           prune: bool = True) -> CarPolynomial:
    """``[H(g), A]`` through a local periodic Hamiltonian."""
    if region is None:
        region = hamiltonian_region_for(A)
        if region is None:
            return CarPolynomial.zero(A.exact)
    _check_periodic(region)
    H = _cached_hamiltonian(as_coupling(g), region)
    return local_graded_commutator(H, A) if prune else commutator(H, A)


# -- witness operators -----------------------------------------------------

def witness_operator(g, k: int) -> CarPolynomial:
    """``O_k``, the local odd operator with ``delta_g(O_k) = g``."""
    g = as_coupling(g)
    if g == 0:
        raise ZeroCoupling("O_k contains 1/g and is undefined at g = 0")
    k = int(k)
    a = 2 * k
    hop_right = op(f"c*_{a} c_{a + 1}")
    hop_left = op(f"c_{a - 3} c*_{a - 2}")
    both = op(f"c_{a - 3} c*_{a - 2} c*_{a} c_{a + 1}")
    inv = 1 / g
    bracket = 1 - (hop_right + hop_left) * inv + both * (2 * inv * inv)
    return multiply(creator(a - 1), bracket)


def averaged_witness(g, n: int) -> CarPolynomial:
    """``o(n) = (1/n) sum_{k=1}^{n} O_k``, supported on ``[-1, 2n+1]``."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    total = CarPolynomial.zero()
    for k in range(1, n + 1):
        total = total + witness_operator(g, k)
    return total * mpq(1, n) if total.exact else total * (1.0 / n)


def witness_supercharge_region(n: int) -> Region:
    """The periodic region ``[-3, 2(n+2)]`` used for ``o(n)``."""
    return Region(-3, 2 * (n + 2), Boundary.PERIODIC)
