"""Exact symbolic algebra of fermion creation/annihilation operators on Z.

Every element is kept in normal order: creators with ascending sites to the
left of annihilators with ascending sites.  Because the normal form is unique,
equality of two polynomials is a structural comparison and "is zero" is
decidable, which is what the nilpotency and witness identities need.

Coefficients are exact by default (``gmpy2.mpq`` rationals for real values,
:class:`GaussianRational` otherwise).  Any float or complex coefficient moves
the polynomial to float mode, where terms with ``|c| <= 1e-14`` are dropped.
"""

from __future__ import annotations

import re
from bisect import bisect_left
from dataclasses import dataclass
from functools import lru_cache
from numbers import Integral, Rational
from typing import Iterable, Iterator, NamedTuple, Sequence

from gmpy2 import mpq

from .errors import EmptySupport, NonHomogeneousArgument
from .region import Region

FLOAT_ZERO_TOL = 1e-14


class GaussianRational:
    """Complex number with exact rational real and imaginary parts.

    Construct through :func:`gaussian`, which collapses to a real rational when
    the imaginary part vanishes.
    """

    __slots__ = ("real", "imag")

    def __init__(self, real, imag):
        self.real = mpq(real)
        self.imag = mpq(imag)

    @staticmethod
    def _split(other):
        if isinstance(other, GaussianRational):
            return other.real, other.imag
        if isinstance(other, Rational):
            return mpq(other), mpq(0)
        return None

    def __add__(self, other):
        parts = self._split(other)
        if parts is None:
            return complex(self) + other
        return gaussian(self.real + parts[0], self.imag + parts[1])

    __radd__ = __add__

    def __sub__(self, other):
        parts = self._split(other)
        if parts is None:
            return complex(self) - other
        return gaussian(self.real - parts[0], self.imag - parts[1])

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        parts = self._split(other)
        if parts is None:
            return complex(self) * other
        a, b = parts
        return gaussian(self.real * a - self.imag * b, self.real * b + self.imag * a)

    __rmul__ = __mul__

    def __truediv__(self, other):
        parts = self._split(other)
        if parts is None:
            return complex(self) / other
        a, b = parts
        den = a * a + b * b
        return gaussian((self.real * a + self.imag * b) / den, (self.imag * a - self.real * b) / den)

    def __rtruediv__(self, other):
        return gaussian(other, 0) / self if isinstance(other, Rational) else other / complex(self)

    def __neg__(self):
        return GaussianRational(-self.real, -self.imag)

    def conjugate(self):
        return GaussianRational(self.real, -self.imag)

    def __abs__(self):
        return abs(complex(self))

    def __complex__(self):
        return complex(float(self.real), float(self.imag))

    def __eq__(self, other):
        parts = self._split(other)
        if parts is None:
            return complex(self) == other
        return self.real == parts[0] and self.imag == parts[1]

    def __hash__(self):
        return hash(complex(self))

    def __bool__(self):
        return bool(self.real) or bool(self.imag)

    def __repr__(self):
        return f"GaussianRational({self.real!s}, {self.imag!s})"

    def __str__(self):
        sign = "-" if self.imag < 0 else "+"
        return f"({self.real}{sign}{abs(self.imag)}i)"


def gaussian(real, imag):
    real, imag = mpq(real), mpq(imag)
    if imag == 0:
        return real
    return GaussianRational(real, imag)


def coerce_coefficient(value):
    """Return ``(coefficient, exact)`` for a user-supplied scalar."""
    if isinstance(value, (mpq, GaussianRational)):
        return value, True
    if isinstance(value, Integral):
        return mpq(int(value)), True
    if isinstance(value, Rational):
        return mpq(value), True
    if isinstance(value, complex) or (hasattr(value, "imag") and value.imag != 0):
        value = complex(value)
        return (value.real if value.imag == 0 else value), False
    return float(value), False


def _is_zero(c, exact: bool) -> bool:
    if exact:
        return not c
    return abs(c) <= FLOAT_ZERO_TOL


def _to_float(c):
    if isinstance(c, (float, complex)):
        return c
    if isinstance(c, GaussianRational):
        return complex(c)
    return float(c)


class CarMonomial(NamedTuple):
    """Normal-ordered product ``c*_{creations...} c_{annihilations...}``."""

    creations: tuple[int, ...] = ()
    annihilations: tuple[int, ...] = ()

    @property
    def degree(self) -> int:
        return len(self.creations) + len(self.annihilations)

    @property
    def parity(self) -> int:
        return self.degree % 2

    @property
    def sites(self) -> set[int]:
        return set(self.creations) | set(self.annihilations)

    def __str__(self):
        ops = [f"c*_{i}" for i in self.creations] + [f"c_{j}" for j in self.annihilations]
        return " ".join(ops) if ops else "1"


IDENTITY = CarMonomial()


def _times_creator(mono: CarMonomial, j: int) -> list[tuple[CarMonomial, int]]:
    """Normal-order ``mono * c*_j``."""
    cre, ann = mono
    q = len(ann)
    pos = bisect_left(ann, j)
    out = []
    if pos < q and ann[pos] == j:
        # c_j c*_j = 1 - c*_j c_j: contraction term
        r = q - pos - 1
        out.append((CarMonomial(cre, ann[:pos] + ann[pos + 1:]), -1 if r % 2 else 1))
    cpos = bisect_left(cre, j)
    if cpos < len(cre) and cre[cpos] == j:
        return out
    sign = (-1) ** (q + len(cre) - cpos)
    out.append((CarMonomial(cre[:cpos] + (j,) + cre[cpos:], ann), sign))
    return out


def _times_annihilator(mono: CarMonomial, j: int) -> list[tuple[CarMonomial, int]]:
    """Normal-order ``mono * c_j``."""
    cre, ann = mono
    pos = bisect_left(ann, j)
    if pos < len(ann) and ann[pos] == j:
        return []
    sign = -1 if (len(ann) - pos) % 2 else 1
    return [(CarMonomial(cre, ann[:pos] + (j,) + ann[pos:]), sign)]


def _normal_order_word(start: CarMonomial, word: Iterable[tuple[int, bool]]) -> dict[CarMonomial, int]:
    acc = {start: 1}
    for site, dagger in word:
        step = _times_creator if dagger else _times_annihilator
        nxt: dict[CarMonomial, int] = {}
        for mono, coeff in acc.items():
            for m, s in step(mono, site):
                v = nxt.get(m, 0) + s * coeff
                if v:
                    nxt[m] = v
                else:
                    nxt.pop(m, None)
        acc = nxt
        if not acc:
            break
    return acc


def _word_of(mono: CarMonomial) -> list[tuple[int, bool]]:
    return [(i, True) for i in mono.creations] + [(j, False) for j in mono.annihilations]


def _merge(first: tuple[int, ...], second: tuple[int, ...]):
    """Sorted union of two ascending tuples and the parity of the shuffle.

    Returns ``None`` when they share a site (the product vanishes).
    """
    if not first:
        return second, 0
    if not second:
        return first, 0
    inversions = 0
    n = len(first)
    for y in second:
        pos = bisect_left(first, y)
        if pos < n and first[pos] == y:
            return None
        inversions += n - pos
    return tuple(sorted(first + second)), inversions & 1


def _contractions(ann: tuple[int, ...], cre: tuple[int, ...]):
    """Expand ``c_{ann...} c*_{cre...}`` as ``sum sign * c_{ann'} c*_{cre'}``."""
    shared = sorted(set(ann) & set(cre))
    out = [(ann, cre, 0)]
    for s in shared:
        nxt = []
        for a, c, parity in out:
            i, j = a.index(s), c.index(s)
            # contracted: move c_s to the end of a and c*_s to the front of c
            nxt.append((a[:i] + a[i + 1:], c[:j] + c[j + 1:], parity ^ ((len(a) - 1 - i + j) & 1)))
            # uncontracted: keep both, picks up the minus sign of -c*_s c_s later
            nxt.append((a, c, parity))
        out = nxt
    return out


def _product_terms(left: CarMonomial, right: CarMonomial) -> dict[CarMonomial, int]:
    c1, a1 = left
    c2, a2 = right
    acc: dict[CarMonomial, int] = {}
    for a, c, parity in _contractions(a1, c2):
        # c_{a} c*_{c} -> (-1)^{|a||c|} c*_{c} c_{a}
        parity ^= (len(a) * len(c)) & 1
        cre = _merge(c1, c)
        if cre is None:
            continue
        ann = _merge(a, a2)
        if ann is None:
            continue
        mono = CarMonomial(cre[0], ann[0])
        sign = -1 if (parity ^ cre[1] ^ ann[1]) else 1
        v = acc.get(mono, 0) + sign
        if v:
            acc[mono] = v
        else:
            acc.pop(mono, None)
    return acc


@lru_cache(maxsize=1 << 20)
def monomial_product(left: CarMonomial, right: CarMonomial) -> tuple[tuple[CarMonomial, int], ...]:
    """Normal-ordered expansion of ``left * right`` as ``(monomial, sign)`` pairs."""
    if not right.degree:
        return ((left, 1),)
    if not left.degree:
        return ((right, 1),)
    return tuple(_product_terms(left, right).items())


def monomial_product_by_rewriting(left: CarMonomial, right: CarMonomial) -> dict[CarMonomial, int]:
    """Same product, one generator at a time; kept as an independent check."""
    return _normal_order_word(left, _word_of(right))


def _adjoint_monomial(mono: CarMonomial) -> tuple[CarMonomial, int]:
    p, q = len(mono.creations), len(mono.annihilations)
    flips = p * (p - 1) // 2 + q * (q - 1) // 2
    return CarMonomial(mono.annihilations, mono.creations), (-1 if flips % 2 else 1)


class CarPolynomial:
    """Finite linear combination of normal-ordered monomials.

    Values are immutable; arithmetic returns new polynomials.
    """

    __slots__ = ("_terms", "exact")

    def __init__(self, terms=None, exact: bool | None = None):
        clean: dict[CarMonomial, object] = {}
        is_exact = True
        raw = dict(terms or {})
        coerced = {}
        for mono, c in raw.items():
            c, ex = coerce_coefficient(c)
            is_exact = is_exact and ex
            coerced[CarMonomial(tuple(mono[0]), tuple(mono[1]))] = c
        if exact is not None and not exact:
            is_exact = False
        for mono, c in coerced.items():
            _check_canonical(mono)
            if not is_exact:
                c = _to_float(c)
            if not _is_zero(c, is_exact):
                clean[mono] = c
        self._terms = clean
        self.exact = is_exact

    @classmethod
    def _raw(cls, terms: dict, exact: bool) -> CarPolynomial:
        # trusted constructor: canonical monomials, no zero coefficients
        obj = cls.__new__(cls)
        obj._terms = terms
        obj.exact = exact
        return obj

    # -- constructors -----------------------------------------------------
    @classmethod
    def scalar(cls, value) -> CarPolynomial:
        return cls({IDENTITY: value})

    @classmethod
    def from_word(cls, word: Sequence[tuple[int, bool]], coeff=1) -> CarPolynomial:
        """Normal-order an arbitrary product of generators.

        ``word`` lists ``(site, is_creator)`` pairs from left to right.
        """
        acc = _normal_order_word(IDENTITY, word)
        c, exact = coerce_coefficient(coeff)
        return cls._raw({m: s * c for m, s in acc.items()}, exact) if c else cls.zero(exact)

    @classmethod
    def zero(cls, exact: bool = True) -> CarPolynomial:
        return cls._raw({}, exact)

    # -- container protocol -----------------------------------------------
    @property
    def terms(self) -> dict[CarMonomial, object]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self):
        return len(self._terms)

    def __iter__(self) -> Iterator[CarMonomial]:
        return iter(self._terms)

    def coefficient(self, mono: CarMonomial):
        return self._terms.get(CarMonomial(*mono), 0)

    def __bool__(self):
        return bool(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_scalar(self) -> bool:
        return all(not m.degree for m in self._terms)

    # -- arithmetic -------------------------------------------------------
    def _combine(self, other: CarPolynomial, sign: int) -> CarPolynomial:
        exact = self.exact and other.exact
        out = dict(self._terms) if exact else {m: _to_float(c) for m, c in self._terms.items()}
        for m, c in other._terms.items():
            if not exact:
                c = _to_float(c)
            v = out.get(m, 0) + (c if sign > 0 else -c)
            if _is_zero(v, exact):
                out.pop(m, None)
            else:
                out[m] = v
        return CarPolynomial._raw(out, exact)

    def __add__(self, other):
        other = as_polynomial(other)
        if other is NotImplemented:
            return other
        return self._combine(other, 1)

    __radd__ = __add__

    def __sub__(self, other):
        other = as_polynomial(other)
        if other is NotImplemented:
            return other
        return self._combine(other, -1)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return CarPolynomial._raw({m: -c for m, c in self._terms.items()}, self.exact)

    def scale(self, value) -> CarPolynomial:
        c, ex = coerce_coefficient(value)
        exact = self.exact and ex
        if not exact:
            c = _to_float(c)
        out = {}
        for m, v in self._terms.items():
            w = (v if exact else _to_float(v)) * c
            if not _is_zero(w, exact):
                out[m] = w
        return CarPolynomial._raw(out, exact)

    def __mul__(self, other):
        if isinstance(other, CarPolynomial):
            return multiply(self, other)
        try:
            return self.scale(other)
        except (TypeError, ValueError):
            return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, CarPolynomial):
            return multiply(other, self)
        try:
            return self.scale(other)
        except (TypeError, ValueError):
            return NotImplemented

    def __truediv__(self, other):
        c, _ = coerce_coefficient(other)
        return self.scale(1 / c)

    def __pow__(self, n: int):
        out = CarPolynomial.scalar(1)
        for _ in range(n):
            out = out * self
        return out

    # -- comparison -------------------------------------------------------
    def __eq__(self, other):
        other = as_polynomial(other)
        if other is NotImplemented:
            return other
        return self._terms == other._terms

    def __hash__(self):
        return hash(frozenset((m, complex(_to_float(c))) for m, c in self._terms.items()))

    def __repr__(self):
        return f"CarPolynomial({to_text(self)!r})"

    def __str__(self):
        return to_text(self)

    # -- shortcuts --------------------------------------------------------
    def adjoint(self) -> CarPolynomial:
        return adjoint(self)

    def dagger(self) -> CarPolynomial:
        return adjoint(self)

    def shift(self, k: int) -> CarPolynomial:
        return shift(self, k)

    def sites(self) -> set[int]:
        out: set[int] = set()
        for m in self._terms:
            out |= m.sites
        return out

    def to_float(self) -> CarPolynomial:
        return CarPolynomial(self._terms, exact=False)


def _check_canonical(mono: CarMonomial):
    for seq in mono:
        if any(a >= b for a, b in zip(seq, seq[1:])):
            raise ValueError(f"monomial {mono} is not in canonical (strictly ascending) form")


def as_polynomial(x):
    if isinstance(x, CarPolynomial):
        return x
    try:
        return CarPolynomial.scalar(x)
    except (TypeError, ValueError):
        return NotImplemented


# -- generators ------------------------------------------------------------

def annihilator(i: int) -> CarPolynomial:
    return CarPolynomial._raw({CarMonomial((), (int(i),)): mpq(1)}, True)


def creator(i: int) -> CarPolynomial:
    return CarPolynomial._raw({CarMonomial((int(i),), ()): mpq(1)}, True)


def number_op(i: int) -> CarPolynomial:
    i = int(i)
    return CarPolynomial._raw({CarMonomial((i,), (i,)): mpq(1)}, True)


def identity(coeff=1) -> CarPolynomial:
    return CarPolynomial.scalar(coeff)


# -- operations ------------------------------------------------------------

def multiply(a: CarPolynomial, b: CarPolynomial) -> CarPolynomial:
    """Normal-ordered product ``a b``."""
    exact = a.exact and b.exact
    ta, tb = a._terms, b._terms
    if not exact:
        ta = {m: _to_float(c) for m, c in ta.items()}
        tb = {m: _to_float(c) for m, c in tb.items()}
    acc: dict[CarMonomial, object] = {}
    for m1, c1 in ta.items():
        for m2, c2 in tb.items():
            c = c1 * c2
            for m, s in monomial_product(m1, m2):
                v = acc.get(m)
                w = c if s > 0 else -c
                acc[m] = w if v is None else v + w
    return CarPolynomial._raw({m: c for m, c in acc.items() if not _is_zero(c, exact)}, exact)


def adjoint(a: CarPolynomial) -> CarPolynomial:
    out = {}
    for m, c in a._terms.items():
        m2, s = _adjoint_monomial(m)
        cc = c.conjugate()
        out[m2] = cc if s > 0 else -cc
    return CarPolynomial._raw(out, a.exact)


@dataclass(frozen=True)
class GradedPair:
    even: CarPolynomial
    odd: CarPolynomial

    def recombine(self) -> CarPolynomial:
        return self.even + self.odd


def grade_parts(a: CarPolynomial) -> GradedPair:
    even, odd = {}, {}
    for m, c in a._terms.items():
        (odd if m.parity else even)[m] = c
    return GradedPair(CarPolynomial._raw(even, a.exact), CarPolynomial._raw(odd, a.exact))


def grading(a: CarPolynomial) -> CarPolynomial:
    """The grading automorphism: negate every odd monomial."""
    return CarPolynomial._raw({m: (-c if m.parity else c) for m, c in a._terms.items()}, a.exact)


def grade(a: CarPolynomial) -> int | None:
    """0 for even, 1 for odd, ``None`` if ``a`` mixes grades.

    The zero polynomial counts as even.
    """
    parities = {m.parity for m in a._terms}
    if len(parities) > 1:
        return None
    return parities.pop() if parities else 0


def graded_commutator(a: CarPolynomial, b: CarPolynomial) -> CarPolynomial:
    """``[a, b]_gamma = a b - gamma^{|a|}(b) a`` for homogeneous ``a``."""
    g = grade(a)
    if g is None:
        raise NonHomogeneousArgument("first argument of a graded commutator must be homogeneous")
    return multiply(a, b) - multiply(grading(b) if g else b, a)


def local_graded_commutator(a: CarPolynomial, b: CarPolynomial) -> CarPolynomial:
    """:func:`graded_commutator` skipping monomial pairs on disjoint sites.

    Graded locality makes every skipped pair contribute exactly zero, so the
    result is identical; only the work shrinks.
    """
    g = grade(a)
    if g is None:
        raise NonHomogeneousArgument("first argument of a graded commutator must be homogeneous")
    exact = a.exact and b.exact
    conv = (lambda c: c) if exact else _to_float
    left = [(m, conv(c), m.sites) for m, c in a._terms.items()]
    acc: dict[CarMonomial, object] = {}
    for mb, cb in b._terms.items():
        sb = mb.sites
        cb = conv(cb)
        swap_sign = -1 if (g and mb.parity) else 1
        for ma, ca, sa in left:
            if sa.isdisjoint(sb):
                continue
            c = ca * cb
            for m, s in monomial_product(ma, mb):
                w = c if s > 0 else -c
                v = acc.get(m)
                acc[m] = w if v is None else v + w
            for m, s in monomial_product(mb, ma):
                w = -c if s * swap_sign > 0 else c
                v = acc.get(m)
                acc[m] = w if v is None else v + w
    return CarPolynomial._raw({m: c for m, c in acc.items() if not _is_zero(c, exact)}, exact)


def commutator(a: CarPolynomial, b: CarPolynomial) -> CarPolynomial:
    return multiply(a, b) - multiply(b, a)


def anticommutator(a: CarPolynomial, b: CarPolynomial) -> CarPolynomial:
    return multiply(a, b) + multiply(b, a)


def shift(a: CarPolynomial, k: int) -> CarPolynomial:
    k = int(k)
    if not k:
        return a
    return CarPolynomial._raw(
        {
            CarMonomial(tuple(i + k for i in m.creations), tuple(j + k for j in m.annihilations)): c
            for m, c in a._terms.items()
        },
        a.exact,
    )


def support(a: CarPolynomial) -> Region | None:
    """Smallest interval holding every site of ``a``.

    Returns ``None`` (the empty region) for a nonzero multiple of the identity.
    """
    if a.is_zero():
        raise EmptySupport("the zero polynomial has no support")
    sites = a.sites()
    if not sites:
        return None
    return Region(min(sites), max(sites))


def relabel(a: CarPolynomial, site_map) -> CarPolynomial:
    """Apply an injective site relabelling and re-normal-order the result."""
    out = CarPolynomial.zero(a.exact)
    for m, c in a._terms.items():
        word = [(site_map(i), True) for i in m.creations] + [(site_map(j), False) for j in m.annihilations]
        out = out + CarPolynomial.from_word(word, c)
    return out


# -- text format -----------------------------------------------------------

def _format_coeff(c, exact: bool) -> str:
    if exact:
        return str(c)
    if isinstance(c, complex):
        return repr(c)
    return repr(float(c))


def to_text(a: CarPolynomial) -> str:
    """One ``coeff * ops`` line per term, sorted by degree then sites."""
    if a.is_zero():
        return "0"
    lines = []
    for m in sorted(a._terms, key=lambda m: (m.degree, m.creations, m.annihilations)):
        lines.append(f"{_format_coeff(a._terms[m], a.exact)} * {m}")
    return "\n".join(lines)


_TOKEN = re.compile(r"^c(\*?)_(-?\d+)$")
_GAUSS = re.compile(r"^\((?P<re>[-+]?\d+(?:/\d+)?)(?P<im>[-+]\d+(?:/\d+)?)i\)$")


def _parse_coeff(text: str):
    text = text.strip()
    m = _GAUSS.match(text)
    if m:
        return gaussian(mpq(m["re"]), mpq(m["im"]))
    if text.endswith("j)") or text.endswith("j"):
        return complex(text)
    if any(ch in text.lower() for ch in ".en"):
        return float(text)
    return mpq(text)


def parse_monomial_word(text: str) -> list[tuple[int, bool]]:
    text = text.strip()
    if text in ("", "1"):
        return []
    word = []
    for tok in text.split():
        m = _TOKEN.match(tok)
        if not m:
            raise ValueError(f"cannot parse operator token {tok!r}")
        word.append((int(m.group(2)), bool(m.group(1))))
    return word


def from_text(text: str) -> CarPolynomial:
    """Inverse of :func:`to_text`; operator strings need not be normal-ordered."""
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if lines == ["0"]:
        return CarPolynomial.zero()
    out = None
    for ln in lines:
        coeff, sep, ops = ln.partition("*")
        if not sep:
            raise ValueError(f"malformed term line {ln!r}")
        # "c*_3" contains '*', so split on the first " * " when present
        if " * " in ln:
            coeff, _, ops = ln.partition(" * ")
        term = CarPolynomial.from_word(parse_monomial_word(ops), _parse_coeff(coeff))
        out = term if out is None else out + term
    return out if out is not None else CarPolynomial.zero()


def op(text: str, coeff=1) -> CarPolynomial:
    """Shorthand: ``op("c_1 c*_2 c_3")`` is the normal-ordered product."""
    return CarPolynomial.from_word(parse_monomial_word(text), coeff)
