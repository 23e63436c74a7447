"""Free abelian groups of finite rank, integer matrices, and K*-valued pairings.

Lattice elements are tuples of ints.  A homomorphism ``Z^m -> Z^n`` is an
``n x m`` integer matrix (``LatticeHom``).  Smith normal form drives index
computations and coset representatives.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from fractions import Fraction
import itertools
import math

__all__ = [
    "INFINITE",
    "InfiniteIndex",
    "Lattice",
    "LatticeHom",
    "SmithForm",
    "smith_normal_form",
    "smith_index",
    "coset_reps",
    "coset_reduce",
    "integer_kernel",
    "hermite_basis",
    "AlternatingPairing",
    "SymmetricPairing",
    "CharacterPoint",
    "pairing_eval",
    "character_eval",
]

INFINITE = math.inf


class InfiniteIndex(ValueError):
    """The image of a homomorphism has infinite index in its target."""


def _vec(v):
    return tuple(int(x) for x in v)


def add(u, v):
    return tuple(a + b for a, b in zip(u, v, strict=True))


def sub(u, v):
    return tuple(a - b for a, b in zip(u, v, strict=True))


def neg(u):
    return tuple(-a for a in u)


def sup_norm(v):
    return max((abs(x) for x in v), default=0)


def ball(rank, radius):
    """All integer vectors with sup-norm at most ``radius``, in lexicographic order."""
    return itertools.product(range(-radius, radius + 1), repeat=rank)


@dataclass(frozen=True)
class Lattice:
    rank: int

    def __post_init__(self):
        if self.rank < 0:
            raise ValueError("rank must be nonnegative")

    def zero(self):
        return (0,) * self.rank

    def basis(self):
        return [tuple(int(i == j) for j in range(self.rank)) for i in range(self.rank)]

    def check(self, v):
        if len(v) != self.rank:
            raise ValueError(f"element {v!r} does not have length {self.rank}")
        return _vec(v)


@dataclass(frozen=True)
class LatticeHom:
    """Homomorphism Z^source_rank -> Z^target_rank given by an integer matrix."""

    matrix: tuple
    source_rank: int
    target_rank: int

    def __init__(self, rows, source_rank=None):
        rows = tuple(_vec(r) for r in rows)
        if source_rank is None:
            if not rows:
                raise ValueError("source rank is required for a matrix with no rows")
            source_rank = len(rows[0])
        for r in rows:
            if len(r) != source_rank:
                raise ValueError("ragged matrix")
        object.__setattr__(self, "matrix", rows)
        object.__setattr__(self, "source_rank", source_rank)
        object.__setattr__(self, "target_rank", len(rows))

    @classmethod
    def identity(cls, n):
        return cls([[int(i == j) for j in range(n)] for i in range(n)], n)

    @classmethod
    def zero(cls, target_rank, source_rank):
        return cls([[0] * source_rank for _ in range(target_rank)], source_rank)

    @classmethod
    def scalar(cls, n, c):
        return cls([[c * int(i == j) for j in range(n)] for i in range(n)], n)

    @classmethod
    def block_diagonal(cls, a, b):
        rows = [list(r) + [0] * b.source_rank for r in a.matrix]
        rows += [[0] * a.source_rank + list(r) for r in b.matrix]
        return cls(rows, a.source_rank + b.source_rank)

    def __call__(self, v):
        if len(v) != self.source_rank:
            raise ValueError(f"vector of length {len(v)} for source rank {self.source_rank}")
        return tuple(sum(a * x for a, x in zip(r, v)) for r in self.matrix)

    def column(self, j):
        return tuple(r[j] for r in self.matrix)

    def __matmul__(self, other):
        """Composition ``self o other``."""
        if other.target_rank != self.source_rank:
            raise ValueError("ranks do not compose")
        cols = [self(other.column(j)) for j in range(other.source_rank)]
        rows = [[cols[j][i] for j in range(other.source_rank)] for i in range(self.target_rank)]
        return LatticeHom(rows, other.source_rank)

    def _same_shape(self, other):
        if (self.source_rank, self.target_rank) != (other.source_rank, other.target_rank):
            raise ValueError("shape mismatch")

    def __add__(self, other):
        self._same_shape(other)
        return LatticeHom([add(r, s) for r, s in zip(self.matrix, other.matrix)], self.source_rank)

    def __sub__(self, other):
        self._same_shape(other)
        return LatticeHom([sub(r, s) for r, s in zip(self.matrix, other.matrix)], self.source_rank)

    def __neg__(self):
        return LatticeHom([neg(r) for r in self.matrix], self.source_rank)

    def scaled(self, c):
        return LatticeHom([[c * x for x in r] for r in self.matrix], self.source_rank)

    def transpose(self):
        return LatticeHom([self.column(j) for j in range(self.source_rank)], self.target_rank)

    def tolist(self):
        return [list(r) for r in self.matrix]

    @property
    def rank(self):
        return smith_normal_form(self).rank

    def is_injective(self):
        return self.rank == self.source_rank


def _identity(n):
    return [[int(i == j) for j in range(n)] for i in range(n)]


@dataclass(frozen=True)
class SmithForm:
    """``U @ A @ V == diag(divisors)`` with U, V unimodular; ``U_inv`` inverts U."""

    divisors: tuple
    rank: int
    U: tuple
    U_inv: tuple
    V: tuple


def smith_normal_form(f) -> SmithForm:
    """Smith normal form of an integer matrix.

    Pivoting: the nonzero entry of least absolute value in the remaining
    block, ties broken by lowest row index and then lowest column index.
    Divisors are nonnegative and each divides the next.
    """
    if not isinstance(f, LatticeHom):
        f = LatticeHom(f)
    n, m = f.target_rank, f.source_rank
    A = [list(r) for r in f.matrix]
    U = _identity(n)
    Ui = _identity(n)
    V = _identity(m)

    def swap_rows(i, j):
        A[i], A[j] = A[j], A[i]
        U[i], U[j] = U[j], U[i]
        for r in Ui:
            r[i], r[j] = r[j], r[i]

    def swap_cols(i, j):
        for r in A:
            r[i], r[j] = r[j], r[i]
        for r in V:
            r[i], r[j] = r[j], r[i]

    def add_row(dst, src, c):
        # row_dst += c * row_src
        A[dst] = [a + c * b for a, b in zip(A[dst], A[src])]
        U[dst] = [a + c * b for a, b in zip(U[dst], U[src])]
        for r in Ui:
            r[src] -= c * r[dst]

    def add_col(dst, src, c):
        for r in A:
            r[dst] += c * r[src]
        for r in V:
            r[dst] += c * r[src]

    t = 0
    while t < min(n, m):
        while True:
            best = None
            for i in range(t, n):
                for j in range(t, m):
                    a = A[i][j]
                    if a and (best is None or abs(a) < best[0]):
                        best = (abs(a), i, j)
            if best is None:
                break
            _, pi, pj = best
            if pi != t:
                swap_rows(t, pi)
            if pj != t:
                swap_cols(t, pj)
            p = A[t][t]
            dirty = False
            for i in range(t + 1, n):
                if A[i][t]:
                    add_row(i, t, -(A[i][t] // p))
                    dirty = dirty or A[i][t] != 0
            for j in range(t + 1, m):
                if A[t][j]:
                    add_col(j, t, -(A[t][j] // p))
                    dirty = dirty or A[t][j] != 0
            if dirty:
                continue
            bad = next(
                (i for i in range(t + 1, n) for j in range(t + 1, m) if A[i][j] % p),
                None,
            )
            if bad is None:
                break
            add_row(t, bad, 1)
        if best is None:
            break
        if A[t][t] < 0:
            A[t] = [-a for a in A[t]]
            U[t] = [-a for a in U[t]]
            for r in Ui:
                r[t] = -r[t]
        t += 1
    divisors = tuple(A[i][i] for i in range(min(n, m)))
    rank = sum(1 for d in divisors if d)
    return SmithForm(
        divisors,
        rank,
        tuple(map(tuple, U)),
        tuple(map(tuple, Ui)),
        tuple(map(tuple, V)),
    )


def _matvec(M, v):
    return tuple(sum(a * x for a, x in zip(r, v)) for r in M)


def _target_divisors(f, snf):
    return [snf.divisors[i] if i < len(snf.divisors) else 0 for i in range(f.target_rank)]


def smith_index(f):
    """Index of the image of ``f`` in its target; ``INFINITE`` if rank deficient."""
    if not isinstance(f, LatticeHom):
        f = LatticeHom(f)
    snf = smith_normal_form(f)
    if snf.rank < f.target_rank:
        return INFINITE
    return math.prod(snf.divisors[: f.target_rank])


def coset_reps(f):
    """Representatives of ``target / image(f)``, canonical in Smith coordinates.

    Each representative is ``U_inv @ y`` with ``0 <= y_i < d_i``; the list is
    ordered lexicographically in ``y`` and starts with 0.
    """
    if not isinstance(f, LatticeHom):
        f = LatticeHom(f)
    snf = smith_normal_form(f)
    if snf.rank < f.target_rank:
        raise InfiniteIndex("image has infinite index")
    ds = _target_divisors(f, snf)
    return [_matvec(snf.U_inv, y) for y in itertools.product(*(range(d) for d in ds))]


def coset_reduce(f, h, snf=None):
    """Split ``h`` as ``rep + f(b)`` with ``rep`` from :func:`coset_reps`.

    Returns ``(rep, b)``.
    """
    if not isinstance(f, LatticeHom):
        f = LatticeHom(f)
    snf = snf or smith_normal_form(f)
    if snf.rank < f.target_rank:
        raise InfiniteIndex("image has infinite index")
    h = _vec(h)
    ds = _target_divisors(f, snf)
    y = _matvec(snf.U, h)
    r = tuple(yi % d for yi, d in zip(y, ds))
    z = [(yi - ri) // d for yi, ri, d in zip(y, r, ds)]
    z += [0] * (f.source_rank - len(z))
    return _matvec(snf.U_inv, r), _matvec(snf.V, z)


def integer_kernel(f):
    """Basis of ``ker f`` (as tuples), in Hermite normal form."""
    if not isinstance(f, LatticeHom):
        f = LatticeHom(f)
    snf = smith_normal_form(f)
    m = f.source_rank
    cols = [tuple(snf.V[i][j] for i in range(m)) for j in range(snf.rank, m)]
    return hermite_basis(cols, m)


def hermite_basis(vectors, dim=None):
    """Row-style Hermite normal form of the lattice spanned by ``vectors``.

    Pivots are positive and entries above each pivot are reduced into
    ``[0, pivot)``.  Equal lattices give equal outputs.
    """
    rows = [list(_vec(v)) for v in vectors]
    if dim is None:
        dim = len(rows[0]) if rows else 0
    out = []
    col = 0
    while rows and col < dim:
        nz = [r for r in rows if r[col]]
        rest = [r for r in rows if not r[col]]
        if not nz:
            col += 1
            continue
        while len(nz) > 1:
            nz.sort(key=lambda r: abs(r[col]))
            p = nz[0]
            new = [p]
            for r in nz[1:]:
                q = r[col] // p[col]
                r = [a - q * b for a, b in zip(r, p)]
                if r[col]:
                    new.append(r)
                elif any(r):
                    rest.append(r)
            nz = new
        p = nz[0]
        if p[col] < 0:
            p = [-a for a in p]
        out.append(p)
        rows = [r for r in rest if any(r)]
        col += 1
    for i, r in enumerate(out):
        c = next(j for j, a in enumerate(r) if a)
        for k in range(i):
            q = out[k][c] // r[c]
            if q:
                out[k] = [a - q * b for a, b in zip(out[k], r)]
    return [tuple(r) for r in out]


def _one(field):
    return field.one()


@dataclass(frozen=True, eq=False)
class AlternatingPairing:
    """Alternating bimultiplicative pairing ``H x H -> K*`` stored by basis values.

    ``offdiag[(i, j)]`` (i < j) is ``alpha(e_i, e_j)``; missing entries are 1.
    ``diag[i]`` is the sign ``alpha(e_i, e_i)``.
    """

    field: object
    rank: int
    offdiag: dict
    diag: tuple
    _cache: dict = dc_field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        diag = tuple(int(s) for s in self.diag)
        if len(diag) != self.rank or any(s not in (1, -1) for s in diag):
            raise ValueError("diag must be a tuple of +-1 of length rank")
        object.__setattr__(self, "diag", diag)
        od = {}
        for (i, j), v in self.offdiag.items():
            if not 0 <= i < j < self.rank:
                raise ValueError(f"offdiag index ({i}, {j}) must satisfy 0 <= i < j < rank")
            if v.field != self.field:
                raise ValueError("offdiag value from a different field")
            od[(i, j)] = v
        object.__setattr__(self, "offdiag", od)

    @classmethod
    def trivial(cls, field, rank):
        return cls(field, rank, {}, (1,) * rank)

    def _power(self, key, e):
        v = self._cache.get((key, e))
        if v is None:
            v = self.offdiag[key] ** e
            self._cache[(key, e)] = v
        return v

    def __call__(self, h, g):
        if len(h) != self.rank or len(g) != self.rank:
            raise ValueError("rank mismatch")
        out = self.field.one()
        for (i, j) in self.offdiag:
            e = h[i] * g[j] - h[j] * g[i]
            if e:
                out = out * self._power((i, j), e)
        sign = 1
        for i, s in enumerate(self.diag):
            if s == -1 and (h[i] * g[i]) % 2:
                sign = -sign
        if sign == -1:
            out = out * self._minus_one()
        return out

    def _minus_one(self):
        return self.field.real(-1)

    def epsilon(self, h):
        """The character ``alpha(h, h)``, returned as +1 or -1."""
        sign = 1
        for i, s in enumerate(self.diag):
            if s == -1 and h[i] % 2:
                sign = -sign
        return sign

    def basis_value(self, i, j):
        if i == j:
            return self.field.real(self.diag[i])
        if i < j:
            return self.offdiag.get((i, j), self.field.one())
        return self.basis_value(j, i).inverse()

    def __pow__(self, k):
        """Pointwise power; rational exponents take the principal root of each value."""
        k = Fraction(k)
        if k.denominator == 1:
            diag = tuple(s ** int(k) if s == -1 else 1 for s in self.diag)
        else:
            diag = self.diag if k.denominator % 2 else (1,) * self.rank
            if k.denominator % 2 == 0 and any(s == -1 for s in self.diag):
                raise ValueError("no root of even degree for a pairing with nontrivial signs")
        return AlternatingPairing(
            self.field, self.rank, {key: v ** k for key, v in self.offdiag.items()}, diag
        )

    def __mul__(self, other):
        if other.rank != self.rank:
            raise ValueError("rank mismatch")
        keys = set(self.offdiag) | set(other.offdiag)
        one = self.field.one()
        od = {key: self.offdiag.get(key, one) * other.offdiag.get(key, one) for key in keys}
        return AlternatingPairing(
            self.field, self.rank, od, tuple(a * b for a, b in zip(self.diag, other.diag))
        )

    def direct_sum(self, other):
        od = dict(self.offdiag)
        n = self.rank
        od.update({(i + n, j + n): v for (i, j), v in other.offdiag.items()})
        return AlternatingPairing(self.field, n + other.rank, od, self.diag + other.diag)

    def same_values(self, other):
        if other.rank != self.rank or self.diag != other.diag:
            return False
        return all(
            self.basis_value(i, j).close(other.basis_value(i, j))
            for i in range(self.rank)
            for j in range(i + 1, self.rank)
        )

    def is_trivial(self):
        return all(s == 1 for s in self.diag) and all(v.is_one() for v in self.offdiag.values())

    def to_json(self):
        return {
            "offdiag": [[i, j, v.to_json()] for (i, j), v in sorted(self.offdiag.items())],
            "diag": list(self.diag),
        }


@dataclass(frozen=True, eq=False)
class SymmetricPairing:
    """Symmetric bimultiplicative pairing ``B x B -> K*``; ``values[(i, j)]`` for i <= j."""

    field: object
    rank: int
    values: dict

    def __post_init__(self):
        vals = {}
        for (i, j), v in self.values.items():
            if i > j:
                i, j = j, i
            if not 0 <= i <= j < self.rank:
                raise ValueError(f"pairing index ({i}, {j}) out of range")
            vals[(i, j)] = v
        object.__setattr__(self, "values", vals)

    @classmethod
    def trivial(cls, field, rank):
        return cls(field, rank, {})

    def basis_value(self, i, j):
        if i > j:
            i, j = j, i
        return self.values.get((i, j), self.field.one())

    def __call__(self, b1, b2):
        if len(b1) != self.rank or len(b2) != self.rank:
            raise ValueError("rank mismatch")
        out = self.field.one()
        for (i, j), v in self.values.items():
            e = b1[i] * b2[i] if i == j else b1[i] * b2[j] + b1[j] * b2[i]
            if e:
                out = out * v ** e
        return out

    def __mul__(self, other):
        keys = set(self.values) | set(other.values)
        return SymmetricPairing(
            self.field,
            self.rank,
            {k: self.basis_value(*k) * other.basis_value(*k) for k in keys},
        )

    def __pow__(self, k):
        return SymmetricPairing(self.field, self.rank, {key: v ** k for key, v in self.values.items()})

    def pullback(self, M):
        """The pairing ``(b1, b2) -> self(M b1, M b2)`` for an integer matrix ``M``."""
        cols = [M.column(j) for j in range(M.source_rank)]
        return SymmetricPairing(
            self.field,
            M.source_rank,
            {(i, j): self(cols[i], cols[j]) for i in range(M.source_rank) for j in range(i, M.source_rank)},
        )

    def to_json(self):
        return [
            [self.basis_value(i, j).to_json() for j in range(i, self.rank)] for i in range(self.rank)
        ]


@dataclass(frozen=True, eq=False)
class CharacterPoint:
    """A point of ``Hom(H, K*)``: the values of the basis characters."""

    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        if not self.values:
            raise ValueError("a character point needs at least one value; use field-aware trivial()")

    @property
    def rank(self):
        return len(self.values)

    @property
    def field(self):
        return self.values[0].field

    def __call__(self, h):
        if len(h) != self.rank:
            raise ValueError("rank mismatch")
        out = self.field.one()
        for v, e in zip(self.values, h):
            if e:
                out = out * v ** e
        return out

    def __mul__(self, other):
        return CharacterPoint(tuple(a * b for a, b in zip(self.values, other.values, strict=True)))

    def __pow__(self, k):
        return CharacterPoint(tuple(v ** k for v in self.values))

    def close(self, other, tol=None):
        return self.rank == other.rank and all(
            a.close(b, tol) for a, b in zip(self.values, other.values)
        )

    def to_json(self):
        return [v.to_json() for v in self.values]


def pairing_eval(alpha, h, g):
    return alpha(h, g)


def character_eval(point, h):
    return point(h)
