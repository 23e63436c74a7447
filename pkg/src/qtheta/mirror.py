"""Framed abstract tori, their duals, real fibration data and complex structures.

An abstract torus is stored as a pairing table ``P[i][j] = e(h_i)(b_j)``
between a character lattice H (rank n) and a period lattice B (rank m).
A framing adds a second table on ``H^t x B`` with ``rank H^t = n``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
import itertools
import math

import sympy

from .lattice import LatticeHom, hermite_basis, integer_kernel
from .scalar import ComplexField, ComplexScalar, PAdicScalar

__all__ = [
    "NotDiscrete",
    "SingularBlock",
    "AbstractTorus",
    "FramedTorus",
    "FibrationData",
    "PeriodMatrixPair",
    "poincare_dual",
    "mirror_dual",
    "pairing_kernels",
    "framing_nondegenerate",
    "fibration_data",
    "complex_structure_from_tau",
    "tau_from_complex_structure",
    "system_residual",
    "framing_from_omega",
    "monodromy_matrix",
    "invariant_sublattice",
]

CONDITION_LIMIT = 1e10


class NotDiscrete(ValueError):
    """Periods do not form a discrete lattice (noncommutative-torus regime)."""


class SingularBlock(ValueError):
    pass


def _table(rows):
    rows = tuple(tuple(r) for r in rows)
    if rows and len({len(r) for r in rows}) != 1:
        raise ValueError("ragged table")
    return rows


@dataclass(frozen=True)
class AbstractTorus:
    """Triple ``(H, B, P)``; ``table`` is ``n x m``."""

    table: tuple

    def __post_init__(self):
        object.__setattr__(self, "table", _table(self.table))

    @property
    def char_rank(self):
        return len(self.table)

    @property
    def period_rank(self):
        return len(self.table[0]) if self.table else 0

    @property
    def field(self):
        return self.table[0][0].field

    def same_as(self, other):
        return _tables_equal(self.table, other.table)

    def to_json(self):
        return {"periods": [[v.to_json() for v in r] for r in self.table]}


@dataclass(frozen=True)
class FramedTorus:
    """Abstract torus with a framing table on ``H^t x B``."""

    torus: AbstractTorus
    framing: tuple

    def __post_init__(self):
        framing = _table(self.framing)
        object.__setattr__(self, "framing", framing)
        if len(framing) != self.torus.char_rank:
            raise ValueError("framing must have as many rows as the character lattice has rank")
        if framing and len(framing[0]) != self.torus.period_rank:
            raise ValueError("framing must have one column per period")

    @classmethod
    def from_tables(cls, periods, framing):
        return cls(AbstractTorus(periods), framing)

    @property
    def rank(self):
        return self.torus.char_rank

    def same_as(self, other):
        return self.torus.same_as(other.torus) and _tables_equal(self.framing, other.framing)

    def to_json(self):
        return {
            "rank": self.rank,
            "periods": [[v.to_json() for v in r] for r in self.torus.table],
            "framing": [[v.to_json() for v in r] for r in self.framing],
        }


def _tables_equal(a, b):
    if len(a) != len(b):
        return False
    for ra, rb in zip(a, b):
        if len(ra) != len(rb):
            return False
        if not all(x.close(y) for x, y in zip(ra, rb)):
            return False
    return True


def poincare_dual(A: AbstractTorus) -> AbstractTorus:
    """Swap characters and periods: the table is transposed and inverted."""
    n, m = A.char_rank, A.period_rank
    return AbstractTorus([[A.table[i][j].inverse() for i in range(n)] for j in range(m)])


def mirror_dual(F: FramedTorus) -> FramedTorus:
    """Mirror partner: the framing becomes the main pairing and vice versa."""
    return FramedTorus(AbstractTorus(F.framing), F.torus.table)


# kernels ---------------------------------------------------------------------


def _exact_log(x):
    """(prime exponents, turns) for an exact scalar, or None."""
    if isinstance(x, PAdicScalar):
        v = x.value
        turns = Fraction(1, 2) if v < 0 else Fraction(0)
        v = abs(v)
    elif isinstance(x, ComplexScalar) and x.exact:
        v, turns = x.abs, x.turns
    else:
        return None
    exps = dict(sympy.factorint(v.numerator))
    for p, e in sympy.factorint(v.denominator).items():
        exps[p] = exps.get(p, 0) - e
    return exps, turns


def _exact_kernel(rows):
    """Kernel of ``h -> (prod_i rows[i][j]^{h_i})_j`` on Z^n, or None if data is inexact."""
    n = len(rows)
    m = len(rows[0]) if rows else 0
    data = [[_exact_log(x) for x in r] for r in rows]
    if any(d is None for r in data for d in r):
        return None
    primes = sorted({p for r in data for d in r for p in d[0]})
    L = 1
    for r in data:
        for d in r:
            L = L * d[1].denominator // math.gcd(L, d[1].denominator)
    mat = []
    for j in range(m):
        for p in primes:
            mat.append([data[i][j][0].get(p, 0) for i in range(n)] + [0] * m)
        row = [int(data[i][j][1] * L) for i in range(n)] + [0] * m
        row[n + j] = -L
        mat.append(row)
    if not mat:
        return [tuple(int(i == k) for i in range(n)) for k in range(n)]
    ker = integer_kernel(LatticeHom(mat, n + m))
    return hermite_basis([v[:n] for v in ker if any(v[:n])], n)


def _numeric_kernel(rows, box=6, tol=None):
    """Small-box search for kernel vectors when the table is not exact."""
    n = len(rows)
    hits = []
    for h in itertools.product(range(-box, box + 1), repeat=n):
        if not any(h) or next(a for a in h if a) < 0:
            continue
        if all(_char_value(rows, h, j).is_one(tol) for j in range(len(rows[0]))):
            hits.append(h)
    return hermite_basis(hits, n)


def _char_value(rows, h, j):
    out = rows[0][j].field.one()
    for i, e in enumerate(h):
        if e:
            out = out * rows[i][j] ** e
    return out


def pairing_kernels(table, tol=None):
    """Kernel bases on both sides of a pairing table, plus whether the computation was exact."""
    rows = [list(r) for r in table]
    cols = [list(c) for c in zip(*rows)]
    left = _exact_kernel(rows)
    right = _exact_kernel(cols)
    exact = left is not None and right is not None
    if left is None:
        left = _numeric_kernel(rows, tol=tol)
    if right is None:
        right = _numeric_kernel(cols, tol=tol)
    return {"left": left, "right": right, "exact": exact}


def framing_nondegenerate(F: FramedTorus, tol=None):
    """Nondegeneracy verdicts for the main pairing and for the framing."""
    out = {}
    for name, table in (("periods", F.torus.table), ("framing", F.framing)):
        k = pairing_kernels(table, tol)
        out[name] = {
            "nondegenerate": not k["left"] and not k["right"],
            "left_kernel": [list(v) for v in k["left"]],
            "right_kernel": [list(v) for v in k["right"]],
            "exact": k["exact"],
        }
    return out


# fibrations ------------------------------------------------------------------


@dataclass
class FibrationData:
    log_lattice: object
    angles: object
    dual_log_lattice: object
    dual_angles: object
    base_map: object

    def to_json(self, digits=20):
        return {
            "log_lattice": _mat_json(self.log_lattice, digits),
            "angles": _mat_json(self.angles, digits),
            "dual_log_lattice": _mat_json(self.dual_log_lattice, digits),
            "dual_angles": _mat_json(self.dual_angles, digits),
            "base_map": _mat_json(self.base_map, digits),
        }


def _mat_json(M, digits):
    import mpmath

    return [[mpmath.nstr(M[i, j], digits) for j in range(M.cols)] for i in range(M.rows)]


def _log_parts(table, ctx):
    n, m = len(table), len(table[0])
    lam = ctx.matrix(n, m)
    ang = ctx.matrix(n, m)
    for i in range(n):
        for j in range(m):
            x = table[i][j]
            if not isinstance(x, ComplexScalar):
                raise ValueError("fibration data needs the complex backend")
            lam[i, j] = x.log_norm()
            ang[i, j] = x._turns_mpf()
    return lam, ang


def _check_discrete(ctx, lam, label):
    if lam.rows != lam.cols:
        raise NotDiscrete(f"{label}: periods not discrete (rank mismatch); noncommutative-torus regime")
    try:
        cond = ctx.cond(lam)
    except ZeroDivisionError:
        cond = ctx.inf
    if not ctx.isfinite(cond) or cond > CONDITION_LIMIT:
        raise NotDiscrete(f"{label}: periods not discrete (log-lattice singular); noncommutative-torus regime")


def fibration_data(F: FramedTorus) -> FibrationData:
    """Log-lattices of both sides and the base map ``G = Lambda^t Lambda^-1``."""
    field = F.torus.field
    if not isinstance(field, ComplexField):
        raise ValueError("fibration data needs the complex backend")
    ctx = field.ctx
    lam, ang = _log_parts(F.torus.table, ctx)
    lam_t, ang_t = _log_parts(F.framing, ctx)
    _check_discrete(ctx, lam, "periods")
    _check_discrete(ctx, lam_t, "framing")
    G = lam_t * ctx.inverse(lam)
    return FibrationData(lam, ang, lam_t, ang_t, G)


# complex structures ----------------------------------------------------------


@dataclass
class PeriodMatrixPair:
    tau: object
    I: object

    def to_json(self, digits=20):
        import mpmath

        tau = [[[mpmath.nstr(self.tau[i, j].real, digits), mpmath.nstr(self.tau[i, j].imag, digits)]
                for j in range(self.tau.cols)] for i in range(self.tau.rows)]
        return {"tau": tau, "I": _mat_json(self.I, digits)}


def _ctx(prec):
    return ComplexField(prec).ctx


def _blocks(ctx, M, n):
    X = ctx.matrix(n, n)
    Y = ctx.matrix(n, n)
    U = ctx.matrix(n, n)
    V = ctx.matrix(n, n)
    for i in range(n):
        for j in range(n):
            X[i, j] = M[i, j]
            Y[i, j] = M[i, n + j]
            U[i, j] = M[n + i, j]
            V[i, j] = M[n + i, n + j]
    return X, Y, U, V


def complex_structure_from_tau(tau, prec=256):
    """The real ``2n x 2n`` matrix ``I = ((X, Y), (U, V))`` attached to ``tau``.

    With ``tau = R + iS``: ``X = S^-1 R``, ``Y = S^-1``, ``U = -S - R S^-1 R``,
    ``V = -R S^-1``.
    """
    ctx = _ctx(prec)
    tau = ctx.matrix(tau)
    n = tau.rows
    R = ctx.matrix(n, n)
    S = ctx.matrix(n, n)
    for i in range(n):
        for j in range(n):
            R[i, j] = ctx.re(tau[i, j])
            S[i, j] = ctx.im(tau[i, j])
    try:
        Si = ctx.inverse(S)
    except ZeroDivisionError:
        raise SingularBlock("imaginary part of tau is singular") from None
    X, Y, U, V = Si * R, Si, -S - R * Si * R, -R * Si
    I = ctx.matrix(2 * n, 2 * n)
    for i in range(n):
        for j in range(n):
            I[i, j] = X[i, j]
            I[i, n + j] = Y[i, j]
            I[n + i, j] = U[i, j]
            I[n + i, n + j] = V[i, j]
    return I


def tau_from_complex_structure(I, prec=256):
    """Inverse of ``complex_structure_from_tau``: ``Im tau = Y^-1``, ``Re tau = Y^-1 X``."""
    ctx = _ctx(prec)
    I = ctx.matrix(I)
    if I.rows != I.cols or I.rows % 2:
        raise ValueError("I must be a square matrix of even size")
    n = I.rows // 2
    X, Y, _, _ = _blocks(ctx, I, n)
    try:
        S = ctx.inverse(Y)
    except ZeroDivisionError:
        raise SingularBlock("block Y is singular: crossover map is not bijective") from None
    R = S * X
    tau = ctx.matrix(n, n)
    for i in range(n):
        for j in range(n):
            tau[i, j] = ctx.mpc(R[i, j], S[i, j])
    return tau


def system_residual(tau, I, prec=256):
    """``|(tau, E) I - (-Im tau + i Re tau, iE)|_inf``."""
    ctx = _ctx(prec)
    tau = ctx.matrix(tau)
    n = tau.rows
    lhs = ctx.matrix(n, 2 * n)
    for i in range(n):
        for j in range(2 * n):
            lhs[i, j] = sum((tau[i, k] * I[k, j] for k in range(n)), ctx.mpc(0)) + I[n + i, j]
    worst = ctx.mpf(0)
    for i in range(n):
        for j in range(n):
            want_a = -ctx.im(tau[i, j]) + 1j * ctx.re(tau[i, j])
            want_b = 1j if i == j else 0
            worst = max(worst, abs(lhs[i, j] - want_a), abs(lhs[i, n + j] - want_b))
    return worst


def framing_from_omega(omega, field: ComplexField):
    """Table ``exp(2 pi i omega)``: abs ``exp(-2 pi Im omega)``, turns ``Re omega mod 1``.

    Entries may be Fractions (real, exact turns), ``(re, im)`` pairs or
    complex numbers.
    """
    ctx = field.ctx
    out = []
    for row in omega:
        r = []
        for w in row:
            if isinstance(w, tuple):
                re, im = w
            elif isinstance(w, (int, Fraction)):
                re, im = Fraction(w), 0
            else:
                w = ctx.mpc(w)
                re, im = w.real, w.imag
            if isinstance(re, int):
                re = Fraction(re)
            if im == 0:
                a = Fraction(1)
            else:
                a = ctx.exp(-2 * ctx.pi * ctx.mpf(im))
            r.append(field.scalar(a, re))
        out.append(r)
    return out


# monodromy -------------------------------------------------------------------


def monodromy_matrix(r, s, n):
    """``E + E_{r, n+s}`` in the basis ``(gamma_1..gamma_n, beta_1..beta_n)`` (1-based r, s)."""
    if not (1 <= r <= n and 1 <= s <= n):
        raise IndexError(f"monodromy indices must lie in 1..{n}")
    M = [[int(i == j) for j in range(2 * n)] for i in range(2 * n)]
    M[r - 1][n + s - 1] += 1
    return M


def invariant_sublattice(matrices):
    """Common fixed sublattice of integer matrices, in Hermite normal form."""
    matrices = [list(map(list, M)) for M in matrices]
    if not matrices:
        raise ValueError("need at least one matrix")
    d = len(matrices[0])
    rows = []
    for M in matrices:
        for i in range(d):
            rows.append([M[i][j] - int(i == j) for j in range(d)])
    return integer_kernel(LatticeHom(rows, d))
