"""Ground-state spectroscopy of the local SUSY Hamiltonians.

``H = Q Q* + Q* Q`` commutes with the total fermion number, because both
terms of ``Q`` lower it by one.  Every solve therefore runs sector by sector:
dense ``eigh`` for small sectors, ARPACK Lanczos (``eigsh``) above
:data:`DENSE_SECTOR_MAX`.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .algebra import graded_commutator
from .errors import NotNumberConserving, SolverNoConvergence, WindowTooLarge, ZeroCoupling
from .fock import (
    DEFAULT_MAX_SITES,
    FockOperator,
    FockVector,
    Window,
    number_operator_diagonal,
    operator_norm,
    represent,
)
from .model import (
    as_coupling,
    averaged_witness,
    free_supercharge,
    periodic_supercharge,
    superderivation,
    witness_operator,
    witness_supercharge_region,
)
from .region import Boundary, Region

logger = logging.getLogger(__name__)

DENSE_SECTOR_MAX = 1000
ITERATIVE_EIGS = 8
POSITIVITY_TOL = 1e-10
RESIDUAL_TOL = 1e-8
# Earlier work proved breaking only for |g| above this value; kept as a scan landmark.
G0_LANDMARK = 4 / math.pi


def degeneracy_tol(e0: float) -> float:
    return max(1e-8 * max(1.0, abs(e0)), 1e-10)


# -- regions ---------------------------------------------------------------

def region_for_size(L: int, boundary: Boundary | str = Boundary.PERIODIC) -> Region:
    """Supercharge region with ``M + N = L`` (``M``, ``N`` even, ``N >= M``).

    Periodic regions have ``L`` sites, free ones ``L + 1``.
    """
    if L % 2 or L < 4:
        raise ValueError(f"size must be even and >= 4, got {L}")
    N = 2 * math.ceil(L / 4)
    M = L - N
    if Boundary(boundary) is Boundary.PERIODIC:
        return Region(-M + 1, N, Boundary.PERIODIC)
    return Region(-M + 1, N + 1, Boundary.FREE)


def supercharge_matrix(g, region: Region, max_sites: int = DEFAULT_MAX_SITES) -> FockOperator:
    if region.size > max_sites:
        raise WindowTooLarge(f"region {region} has {region.size} sites, cap is {max_sites}")
    if region.boundary is Boundary.PERIODIC:
        Q = periodic_supercharge(g, region)
    else:
        Q = free_supercharge(g, region)
    return represent(Q, Window.from_region(region, max_sites))


def hamiltonian_matrix(Q: FockOperator) -> FockOperator:
    q = Q.matrix
    qd = q.conj().T.tocsr()
    H = (q @ qd + qd @ q).tocsr()
    H.eliminate_zeros()
    return FockOperator(Q.window, H, hermitian_hint=True)


# -- sectors ---------------------------------------------------------------

@dataclass
class SectorBlock:
    particles: int
    indices: np.ndarray
    matrix: sp.csr_matrix

    @property
    def dim(self) -> int:
        return len(self.indices)


def number_commutator_norm(H: FockOperator) -> float:
    """Frobenius norm of ``[H, N_total]``, an upper bound on its operator norm."""
    nums = number_operator_diagonal(H.window)
    coo = H.matrix.tocoo()
    vals = coo.data * (nums[coo.col] - nums[coo.row])
    return float(np.linalg.norm(vals))


def sector_decompose(H: FockOperator, check: bool = True) -> dict[int, SectorBlock]:
    """Split ``H`` into fermion-number blocks."""
    if check:
        err = number_commutator_norm(H)
        if err > 1e-10:
            raise NotNumberConserving(f"||[H, N]|| = {err:.3e}")
    nums = number_operator_diagonal(H.window)
    mat = H.matrix.tocsr()
    blocks = {}
    for n in range(H.window.size + 1):
        idx = np.flatnonzero(nums == n)
        blocks[n] = SectorBlock(n, idx, mat[idx][:, idx].tocsr())
    return blocks


def reassemble(blocks: dict[int, SectorBlock], dim: int) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    for b in blocks.values():
        coo = b.matrix.tocoo()
        rows.append(b.indices[coo.row])
        cols.append(b.indices[coo.col])
        vals.append(coo.data)
    return sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(dim, dim)).tocsr()


@dataclass
class SectorSolution:
    particles: int
    eigenvalues: np.ndarray
    ground_vector: np.ndarray
    solver: str
    complete: bool


def solve_sector(block: SectorBlock, k: int = ITERATIVE_EIGS, seed: int = 0,
                 dense_max: int = DENSE_SECTOR_MAX) -> SectorSolution:
    mat = block.matrix
    if mat.nnz == 0 or not np.any(mat.data.imag):
        mat = mat.real
    if block.dim <= dense_max or block.dim <= k + 1:
        w, v = np.linalg.eigh(mat.toarray())
        return SectorSolution(block.particles, w, v[:, 0], "dense", True)
    rng = np.random.default_rng([seed, block.particles])
    v0 = rng.standard_normal(block.dim)
    if np.iscomplexobj(mat):
        v0 = v0 + 1j * rng.standard_normal(block.dim)
    try:
        w, v = eigsh(mat, k=k, which="SA", v0=v0, tol=1e-12, maxiter=20 * block.dim)
    except ArpackNoConvergence as exc:
        raise SolverNoConvergence(f"Lanczos failed in sector N={block.particles}") from exc
    order = np.argsort(w)
    return SectorSolution(block.particles, w[order], v[:, order[0]], "iterative", False)


# -- ground states ---------------------------------------------------------

@dataclass
class SpectrumResult:
    g: object
    region: Region
    ground_energy: float
    degeneracy: int
    sector_energies: dict[int, float]
    solver: str
    residual: float
    q_norm: float
    qdag_norm: float
    degeneracy_complete: bool = True
    sector_spectra: dict[int, np.ndarray] = field(default_factory=dict, repr=False)
    ground_vector: FockVector | None = field(default=None, repr=False)

    @property
    def sites(self) -> int:
        return self.region.size

    @property
    def zero_mode(self) -> bool:
        return abs(self.ground_energy) <= POSITIVITY_TOL


def ground_state(g, region: Region, *, seed: int = 0, max_sites: int = DEFAULT_MAX_SITES,
                 dense_max: int = DENSE_SECTOR_MAX) -> SpectrumResult:
    """Exact diagonalization of ``{Q, Q*}`` for the truncated supercharge on ``region``."""
    Q = supercharge_matrix(g, region, max_sites)
    H = hamiltonian_matrix(Q)
    blocks = sector_decompose(H)
    solutions = {n: solve_sector(b, seed=seed, dense_max=dense_max) for n, b in blocks.items()}

    sector_energies = {n: float(s.eigenvalues[0]) for n, s in solutions.items()}
    best = min(solutions, key=lambda n: (sector_energies[n], n))
    e0 = sector_energies[best]
    tol = degeneracy_tol(e0)
    degeneracy = sum(int(np.count_nonzero(s.eigenvalues <= e0 + tol)) for s in solutions.values())
    complete = all(s.complete or s.eigenvalues[-1] > e0 + tol for s in solutions.values())

    psi = np.zeros(H.window.dim, dtype=complex)
    psi[blocks[best].indices] = solutions[best].ground_vector
    psi /= np.linalg.norm(psi)
    residual = float(np.linalg.norm(H.matrix @ psi - e0 * psi))
    if residual > RESIDUAL_TOL:
        raise SolverNoConvergence(f"ground residual {residual:.2e} exceeds {RESIDUAL_TOL}")
    solver = "dense" if all(s.solver == "dense" for s in solutions.values()) else "iterative"
    return SpectrumResult(
        g=as_coupling(g),
        region=region,
        ground_energy=e0,
        degeneracy=degeneracy,
        sector_energies=sector_energies,
        solver=solver,
        residual=residual,
        q_norm=float(np.linalg.norm(Q.matrix @ psi)),
        qdag_norm=float(np.linalg.norm(Q.matrix.conj().T @ psi)),
        degeneracy_complete=complete,
        sector_spectra={n: s.eigenvalues for n, s in solutions.items()},
        ground_vector=FockVector(H.window, psi),
    )


def full_spectrum(H: FockOperator) -> np.ndarray:
    """All eigenvalues from one dense diagonalization (oracle path)."""
    return np.linalg.eigvalsh(H.matrix.toarray())


def susy_pairing_defect(sector_spectra: dict[int, np.ndarray], tol: float = 1e-8) -> float:
    """Check that nonzero levels come in pairs across adjacent sectors.

    With ``P_n`` the nonzero spectrum of ``Q*Q`` on sector ``n`` (equal to
    that of ``QQ*`` on ``n-1``), sector ``n`` of ``H`` carries ``P_n + P_{n+1}``.
    Peeling ``P_{n+1} = S_n - P_n`` upward must always succeed and leave
    nothing above the top sector.  Returns the largest mismatch found, or
    ``inf`` if a level cannot be matched.
    """
    carry: list[float] = []
    worst = 0.0
    for n in sorted(sector_spectra):
        levels = sorted(float(x) for x in sector_spectra[n] if x > tol)
        rest = list(levels)
        for e in carry:
            if not rest:
                return math.inf
            j = int(np.argmin([abs(e - r) for r in rest]))
            dev = abs(e - rest[j])
            if dev > tol * max(1.0, e):
                return math.inf
            worst = max(worst, dev)
            rest.pop(j)
        carry = rest
    return math.inf if carry else worst


# -- energy density --------------------------------------------------------

@dataclass
class DensityRow:
    g: object
    L: int
    boundary: str
    sites: int
    ground_energy: float
    e: float
    degeneracy: int
    residual: float
    solver: str


@dataclass
class DensityCurve:
    rows: list[DensityRow]
    # diagnostic only: intercept of a linear fit of e(L) against 1/L
    extrapolated_e: float | None = None

    def values(self) -> list[tuple[int, float]]:
        return [(r.L, r.e) for r in self.rows]


def energy_density_curve(g, sizes: Sequence[int], boundary: Boundary | str = Boundary.PERIODIC,
                         seed: int = 0, max_sites: int = DEFAULT_MAX_SITES) -> DensityCurve:
    """``e(L) = E0(L) / L`` where ``L = M + N``."""
    rows = []
    for L in sizes:
        region = region_for_size(L, boundary)
        res = ground_state(g, region, seed=seed, max_sites=max_sites)
        rows.append(DensityRow(res.g, L, Boundary(boundary).value, region.size, res.ground_energy,
                               res.ground_energy / L, res.degeneracy, res.residual, res.solver))
    intercept = None
    if len(rows) >= 2:
        x = np.array([1.0 / r.L for r in rows])
        y = np.array([r.e for r in rows])
        intercept = float(np.polyfit(x, y, 1)[1])
    return DensityCurve(rows, intercept)


def boundary_gap(g, sizes: Sequence[int], seed: int = 0) -> list[tuple[int, float, float, float]]:
    """``(L, e_periodic, e_free, |difference|)`` for each size."""
    per = energy_density_curve(g, sizes, Boundary.PERIODIC, seed)
    fre = energy_density_curve(g, sizes, Boundary.FREE, seed)
    return [(a.L, a.e, b.e, abs(a.e - b.e)) for a, b in zip(per.rows, fre.rows)]


# -- averaged witness norms and the bound chain ------------------------------

def witness_norm(g, k: int = 1, method: str | None = None) -> float:
    """``||O_k||`` on its own support window."""
    O = witness_operator(g, k)
    return operator_norm(represent(O, Window.interval(2 * k - 3, 2 * k + 1)), method).value


@dataclass
class NormRow:
    n: int
    norm: float
    sqrt_n_norm: float
    bound: float
    slack: float
    method: str
    converged: bool


def averaged_witness_norms(g, ns: Iterable[int], C: float | None = None,
                           method: str | None = None) -> list[NormRow]:
    """``||o(n)||`` against the bound ``C / sqrt(n)`` with ``C^2 = 10 ||O_1||^2``."""
    if C is None:
        C = math.sqrt(10.0) * witness_norm(g, 1)
    rows = []
    for n in ns:
        o = averaged_witness(g, n)
        res = operator_norm(represent(o, Window.interval(-1, 2 * n + 1)), method)
        bound = C / math.sqrt(n)
        rows.append(NormRow(n, res.value, math.sqrt(n) * res.value, bound, bound - res.value,
                            res.method, res.converged))
    return rows


@dataclass
class BoundReport:
    g: object
    n: int
    region: Region
    ground_energy: float
    qdag_norm: float  # ||Q* Omega||
    q_norm: float  # ||Q Omega||
    witness_norm: float  # ||o(n)||
    expectation_delta: float  # <Omega, delta_g(o(n)) Omega>
    symbolic_identity: bool  # delta_g(o(n)) == [Q_loc, o(n)]_gamma == g
    identity_error: float
    chain_slack: float
    energy_bound: float
    checks: dict[str, bool]

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def susy_bound_check(g, n: int, *, seed: int = 0, max_sites: int = DEFAULT_MAX_SITES,
                     norm_method: str | None = None) -> BoundReport:
    """Finite-volume form of the estimate ``|g| <= (||Q*W|| + ||QW||) ||o(n)||``.

    ``W`` is the ground vector of the periodic Hamiltonian on ``[-3, 2(n+2)]``.
    """
    g = as_coupling(g)
    if g == 0:
        raise ZeroCoupling("the bound chain needs g != 0")
    region = witness_supercharge_region(n)
    if region.size > max_sites:
        raise WindowTooLarge(f"n={n} needs {region.size} sites, cap is {max_sites}")

    res = ground_state(g, region, seed=seed, max_sites=max_sites)
    o = averaged_witness(g, n)
    Qloc = periodic_supercharge(g, region)
    d_o = graded_commutator(Qloc, o)
    symbolic = d_o == superderivation(g, o) and d_o == g

    window = Window.from_region(region, max_sites)
    omega = res.ground_vector.amplitudes
    d_rep = represent(d_o, window)
    exp_delta = complex(np.vdot(omega, d_rep.matrix @ omega))
    onorm = operator_norm(represent(o, Window.interval(-1, 2 * n + 1)), norm_method).value

    a, b, e0 = res.qdag_norm, res.q_norm, res.ground_energy
    identity_error = abs(a * a + b * b - e0)
    chain_slack = (a + b) * onorm - abs(float(g))
    energy_bound = float(g) ** 2 / (2 * onorm ** 2)
    checks = {
        "energy_identity": identity_error <= 1e-8,
        "bound_chain": chain_slack >= 0.0,
        "energy_lower_bound": e0 >= energy_bound,
        "witness_expectation": abs(exp_delta - float(g)) <= 1e-10,
        "symbolic_identity": bool(symbolic),
    }
    return BoundReport(g, n, region, e0, a, b, onorm, exp_delta.real, bool(symbolic), identity_error,
                       chain_slack, energy_bound, checks)


# -- CSV -------------------------------------------------------------------

CSV_FIELDS = ["g", "L", "boundary", "sites", "E0", "e", "degeneracy", "residual", "solver",
              "a", "b", "o_norm"]


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def to_csv(rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(row.get(k)) for k in CSV_FIELDS})
    return buf.getvalue()


def spectrum_row(res: SpectrumResult, L: int | None = None) -> dict:
    L = L if L is not None else (res.region.size if res.region.boundary is Boundary.PERIODIC
                                 else res.region.size - 1)
    return {"g": res.g, "L": L, "boundary": res.region.boundary.value, "sites": res.region.size,
            "E0": res.ground_energy, "e": res.ground_energy / L, "degeneracy": res.degeneracy,
            "residual": res.residual, "solver": res.solver, "a": res.qdag_norm, "b": res.q_norm}


def density_rows(curve: DensityCurve) -> list[dict]:
    return [{"g": r.g, "L": r.L, "boundary": r.boundary, "sites": r.sites, "E0": r.ground_energy,
             "e": r.e, "degeneracy": r.degeneracy, "residual": r.residual, "solver": r.solver}
            for r in curve.rows]


def bound_row(rep: BoundReport) -> dict:
    L = rep.region.size
    return {"g": rep.g, "L": L, "boundary": rep.region.boundary.value, "sites": L, "E0": rep.ground_energy,
            "e": rep.ground_energy / L, "a": rep.qdag_norm, "b": rep.q_norm, "o_norm": rep.witness_norm}
