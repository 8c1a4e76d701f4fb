"""Occupation-number representation of CAR polynomials on a finite window.

Basis states are integers whose bit ``s`` is the occupation of window slot
``s`` (slot 0 is the least significant bit).  A generator acting on slot ``s``
picks up the sign ``(-1)^(number of occupied slots below s)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .algebra import CarPolynomial, _to_float
from .errors import IterationDivergence, SupportOutsideWindow, WindowMismatch, WindowTooLarge
from .region import Boundary, Region

logger = logging.getLogger(__name__)

DEFAULT_MAX_SITES = 20
DENSE_NORM_MAX_SITES = 12


@dataclass(frozen=True)
class Window:
    sites: tuple[int, ...]
    max_sites: int = DEFAULT_MAX_SITES

    def __post_init__(self):
        sites = tuple(int(s) for s in self.sites)
        if list(sites) != sorted(set(sites)):
            raise ValueError("window sites must be distinct and ascending")
        if len(sites) > self.max_sites:
            raise WindowTooLarge(f"window of {len(sites)} sites exceeds cap {self.max_sites}")
        object.__setattr__(self, "sites", sites)

    @classmethod
    def from_region(cls, region: Region, max_sites: int = DEFAULT_MAX_SITES) -> Window:
        return cls(tuple(region.sites), max_sites)

    @classmethod
    def interval(cls, left: int, right: int, max_sites: int = DEFAULT_MAX_SITES) -> Window:
        return cls(tuple(range(left, right + 1)), max_sites)

    @property
    def size(self) -> int:
        return len(self.sites)

    @property
    def dim(self) -> int:
        return 1 << len(self.sites)

    def slot(self, site: int) -> int:
        try:
            return self._slots[site]
        except KeyError:
            raise SupportOutsideWindow(f"site {site} is not in window {self.sites}") from None

    @cached_property
    def _slots(self) -> dict[int, int]:
        return {s: k for k, s in enumerate(self.sites)}


@dataclass(frozen=True, eq=False)
class FockOperator:
    window: Window
    matrix: sp.csr_matrix
    hermitian_hint: bool = False

    @property
    def shape(self):
        return self.matrix.shape

    def dagger(self) -> FockOperator:
        return FockOperator(self.window, self.matrix.conj().T.tocsr(), self.hermitian_hint)

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def __matmul__(self, other):
        if isinstance(other, FockOperator):
            _same_window(self.window, other.window)
            return FockOperator(self.window, (self.matrix @ other.matrix).tocsr())
        if isinstance(other, FockVector):
            _same_window(self.window, other.window)
            return self.matrix @ other.amplitudes
        return self.matrix @ other


@dataclass(frozen=True, eq=False)
class FockVector:
    window: Window
    amplitudes: np.ndarray
    normalized: bool = field(default=True)

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        if amp.shape != (self.window.dim,):
            raise ValueError(f"expected {self.window.dim} amplitudes, got {amp.shape}")
        if self.normalized:
            nrm = np.linalg.norm(amp)
            if abs(nrm - 1.0) > 1e-12:
                amp = amp / nrm
        object.__setattr__(self, "amplitudes", amp)


def _same_window(a: Window, b: Window):
    if a.sites != b.sites:
        raise WindowMismatch(f"windows differ: {a.sites} vs {b.sites}")


def _parity_below(states: np.ndarray, slot: int) -> np.ndarray:
    mask = np.uint64((1 << slot) - 1)
    return np.bitwise_count(states & mask) & 1


def fold_polynomial(a: CarPolynomial, region: Region) -> CarPolynomial:
    """Map the sites of ``a`` into a periodic region, re-normal-ordering."""
    from .algebra import relabel

    if region.boundary is not Boundary.PERIODIC:
        return a
    if all(s in region for s in a.sites()):
        return a
    return relabel(a, region.fold)


def represent(a: CarPolynomial, window: Window | Region, hermitian_hint: bool = False) -> FockOperator:
    """Sparse matrix of ``a`` on the Fock space of ``window``.

    A periodic :class:`Region` may be passed instead of a window; sites are
    folded into it first.
    """
    if isinstance(window, Region):
        a = fold_polynomial(a, window)
        window = Window.from_region(window)
    slots = window._slots
    for s in a.sites():
        if s not in slots:
            raise SupportOutsideWindow(f"site {s} of the operator lies outside window {window.sites}")

    dim = window.dim
    all_states = np.arange(dim, dtype=np.uint64)
    rows, cols, vals = [], [], []
    for mono, coeff in a.items():
        coeff = complex(_to_float(coeff))
        # act right-to-left: annihilators (descending), then creators (descending)
        word = [(slots[i], True) for i in mono.creations] + [(slots[j], False) for j in mono.annihilations]
        states = all_states
        origin = all_states
        sign = np.ones(dim, dtype=np.int8)
        for slot, dagger in reversed(word):
            bit = np.uint64(1 << slot)
            occupied = (states & bit) != 0
            keep = ~occupied if dagger else occupied
            states, origin, sign = states[keep], origin[keep], sign[keep]
            flip = _parity_below(states, slot).astype(bool)
            sign = np.where(flip, -sign, sign)
            states = states ^ bit
            if states.size == 0:
                break
        if states.size:
            rows.append(states.astype(np.int64))
            cols.append(origin.astype(np.int64))
            vals.append(sign.astype(complex) * coeff)
    if rows:
        mat = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
        ).tocsr()
        mat.sum_duplicates()
        mat.eliminate_zeros()
    else:
        mat = sp.csr_matrix((dim, dim), dtype=complex)
    return FockOperator(window, mat, hermitian_hint)


def identity_operator(window: Window) -> FockOperator:
    return FockOperator(window, sp.identity(window.dim, dtype=complex, format="csr"), True)


def number_operator_diagonal(window: Window) -> np.ndarray:
    """Total fermion number of every basis state."""
    return np.bitwise_count(np.arange(window.dim, dtype=np.uint64)).astype(np.int64)


@dataclass(frozen=True)
class NormResult:
    value: float
    method: str
    converged: bool = True
    iterations: int = 0


def operator_norm(
    operator: FockOperator,
    method: str | None = None,
    tol: float = 1e-10,
    max_iter: int = 20000,
    seed: int = 0,
    raise_on_divergence: bool = False,
) -> NormResult:
    """Largest singular value.

    ``method`` is ``"dense_svd"`` or ``"iterative"``; by default the dense path
    is used up to :data:`DENSE_NORM_MAX_SITES` sites.  The iterative path is
    power iteration on ``A^H A`` stopped at relative change ``tol``; it
    approaches the norm from below.  ``"sector_blocks"`` is an exact dense
    SVD per fermion-number block, valid for operators that change the
    particle number by a fixed amount.
    """
    if method is None:
        method = "dense_svd" if operator.window.size <= DENSE_NORM_MAX_SITES else "iterative"
    mat = operator.matrix
    if mat.nnz == 0:
        return NormResult(0.0, method)
    if method == "dense_svd":
        return NormResult(float(np.linalg.norm(mat.toarray(), 2)), method)
    if method == "sector_blocks":
        return NormResult(_sector_block_norm(operator), method)
    if method != "iterative":
        raise ValueError(f"unknown norm method {method!r}")

    rng = np.random.default_rng(seed)
    x = rng.standard_normal(mat.shape[1]) + 1j * rng.standard_normal(mat.shape[1])
    x /= np.linalg.norm(x)
    adj = mat.conj().T.tocsr()
    lam_old = 0.0
    for it in range(1, max_iter + 1):
        y = adj @ (mat @ x)
        lam = np.linalg.norm(y)
        if lam == 0.0:
            return NormResult(0.0, method, True, it)
        x = y / lam
        if abs(lam - lam_old) <= tol * lam:
            return NormResult(float(np.sqrt(lam)), method, True, it)
        lam_old = lam
    estimate = float(np.linalg.norm(mat @ x))
    logger.warning("power iteration stopped after %d steps without reaching tol=%g", max_iter, tol)
    if raise_on_divergence:
        raise IterationDivergence(f"no convergence in {max_iter} iterations", estimate)
    return NormResult(estimate, method, False, max_iter)


def _sector_block_norm(operator: FockOperator) -> float:
    nums = number_operator_diagonal(operator.window)
    coo = operator.matrix.tocoo()
    shifts = np.unique(nums[coo.row] - nums[coo.col])
    if len(shifts) != 1:
        raise ValueError("sector_blocks needs an operator with a definite particle-number change")
    mat = operator.matrix.tocsr()
    best = 0.0
    for n in np.unique(nums[coo.col]):
        cols = np.flatnonzero(nums == n)
        rows = np.flatnonzero(nums == n + shifts[0])
        block = mat[rows][:, cols].toarray()
        if block.size:
            best = max(best, float(np.linalg.norm(block, 2)))
    return best


def expectation(operator: FockOperator, vector: FockVector) -> complex:
    """``<v, A v>``."""
    _same_window(operator.window, vector.window)
    v = vector.amplitudes
    val = complex(np.vdot(v, operator.matrix @ v))
    if operator.hermitian_hint:
        if abs(val.imag) > 1e-12 * max(1.0, abs(val.real)):
            logger.warning("hermitian operator has complex expectation %r", val)
        return complex(val.real, 0.0)
    return val


def export_coordinates(operator: FockOperator, path=None) -> str:
    """Coordinate text format, one ``row col re im`` line per stored entry."""
    coo = operator.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    lines = [f"# window {' '.join(map(str, operator.window.sites))}", f"# shape {coo.shape[0]} {coo.shape[1]}"]
    for k in order:
        v = coo.data[k]
        lines.append(f"{coo.row[k]} {coo.col[k]} {float(v.real)!r} {float(v.imag)!r}")
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def import_coordinates(text: str) -> FockOperator:
    sites: Sequence[int] = ()
    rows, cols, vals = [], [], []
    for line in text.splitlines():
        if line.startswith("# window"):
            sites = tuple(int(s) for s in line.split()[2:])
        elif line.startswith("#") or not line.strip():
            continue
        else:
            r, c, re_, im_ = line.split()
            rows.append(int(r))
            cols.append(int(c))
            vals.append(complex(float(re_), float(im_)))
    window = Window(tuple(sites))
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(window.dim, window.dim), dtype=complex).tocsr()
    return FockOperator(window, mat)
