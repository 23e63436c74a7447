"""Period lattices, two-sided theta multipliers and quantized theta functions.

Conventions
-----------
* H = Z^n is the character lattice of ``torus``; B = Z^m the period lattice.
  Elements of B are integer coordinate vectors ``k`` over the period basis.
* ``PeriodLattice.table[i][j]`` is ``e(h_i)(b_j)``.
* A multiplier ``L = (h_l, h_r, psi, pairing)`` stores ``h_l, h_r`` as
  ``n x m`` integer matrices, ``psi`` by its values on the period basis and
  the symmetric pairing by its basis values.

A theta function ``sum a_h e(h)`` for L obeys, for every period b,

    a_{h + hm_b} = a_h psi(b) h(b)^-1 (b,b)^-1 eps(h_{b,l}) alpha(h_{b,r}, h_{b,l}) alpha(hp_b, h)

with ``hm = h_l - h_r`` and ``hp = h_l + h_r``.  Coefficients on each coset
of ``hm(B)`` are generated from one seed value by walking along the period
basis.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
import itertools

from .lattice import (
    INFINITE,
    CharacterPoint,
    LatticeHom,
    SymmetricPairing,
    add,
    ball,
    coset_reduce,
    coset_reps,
    smith_index,
    smith_normal_form,
    sub,
    sup_norm,
)
from .nctorus import GroupRingElement, NCTorus, TorusMismatch, TorusMorphism, ring_inv, ring_mul
from .scalar import Coefficient

__all__ = [
    "InvalidMultiplier",
    "InconsistentPairing",
    "NotAmple",
    "NotComposable",
    "PullbackError",
    "PeriodLattice",
    "ThetaMultiplier",
    "MultiplierReport",
    "AmplenessReport",
    "ThetaSeries",
    "EvalResult",
    "multiplier_validate",
    "multiplier_solve_pairing",
    "solve_periods",
    "shift_apply",
    "automorphy_apply",
    "automorphy_inverse_apply",
    "twisted_shift",
    "recursion_factor",
    "walk_coefficient",
    "theta_dimension",
    "ampleness_gram",
    "theta_series",
    "theta_basis",
    "functional_equation_residual",
    "certify",
    "theta_eval",
    "multiplier_compose",
    "theta_mul",
    "infer_period_map",
    "preimage_periods",
    "multiplier_pullback",
    "theta_pullback",
    "same_automorphy",
]


class InvalidMultiplier(ValueError):
    pass


class InconsistentPairing(ValueError):
    pass


class NotAmple(ValueError):
    pass


class NotComposable(ValueError):
    pass


class PullbackError(ValueError):
    pass


def _unit(m, j):
    return tuple(int(i == j) for i in range(m))


class PeriodLattice:
    """Period group B inside T(H, 1)(K), given by its basis points."""

    def __init__(self, torus: NCTorus, table):
        table = tuple(tuple(row) for row in table)
        if len(table) != torus.rank:
            raise ValueError(f"period table needs {torus.rank} rows, got {len(table)}")
        m = len(table[0]) if table else 0
        for row in table:
            if len(row) != m:
                raise ValueError("ragged period table")
            for v in row:
                if v.field != torus.field:
                    raise ValueError("period value from a different field")
        self.torus = torus
        self.table = table
        self.rank = m
        self._pow_cache = {}

    @classmethod
    def from_points(cls, torus, points):
        points = list(points)
        return cls(torus, [[p.values[i] for p in points] for i in range(torus.rank)])

    @property
    def field(self):
        return self.torus.field

    def _pow(self, i, j, e):
        key = (i, j, e)
        v = self._pow_cache.get(key)
        if v is None:
            v = self.table[i][j] ** e
            self._pow_cache[key] = v
        return v

    def point(self, k) -> CharacterPoint:
        """The point ``sum_j k_j b_j`` (B is written additively)."""
        return CharacterPoint(tuple(self.char(_unit(self.torus.rank, i), k) for i in range(self.torus.rank)))

    def char(self, h, k):
        """``h(b)`` for the period ``b = sum_j k_j b_j``."""
        out = self.field.one()
        for i, hi in enumerate(h):
            if hi:
                for j, kj in enumerate(k):
                    if kj:
                        out = out * self._pow(i, j, hi * kj)
        return out

    def same_as(self, other):
        return self is other or (
            self.torus.same_as(other.torus)
            and self.rank == other.rank
            and all(a.close(b) for ra, rb in zip(self.table, other.table) for a, b in zip(ra, rb))
        )

    def to_json(self):
        return [[v.to_json() for v in row] for row in self.table]


class ThetaMultiplier:
    """Two-sided theta multiplier ``(h_l, h_r, psi, pairing)`` for a torus and periods."""

    def __init__(self, periods: PeriodLattice, h_l: LatticeHom, h_r: LatticeHom, psi, pairing: SymmetricPairing, meta=None):
        n, m = periods.torus.rank, periods.rank
        for name, h in (("h_l", h_l), ("h_r", h_r)):
            if (h.target_rank, h.source_rank) != (n, m):
                raise ValueError(f"{name} must be a {n}x{m} matrix")
        psi = tuple(psi)
        if len(psi) != m:
            raise ValueError(f"psi needs {m} values")
        if pairing.rank != m:
            raise ValueError(f"pairing must have rank {m}")
        self.periods = periods
        self.h_l = h_l
        self.h_r = h_r
        self.psi = psi
        self.pairing = pairing
        self.h_minus = h_l - h_r
        self.h_plus = h_l + h_r
        self.meta = dict(meta or {})
        self._snf = None

    @property
    def torus(self):
        return self.periods.torus

    @property
    def field(self):
        return self.periods.field

    @property
    def alpha(self):
        return self.torus.alpha

    @property
    def smith(self):
        if self._snf is None:
            self._snf = smith_normal_form(self.h_minus)
        return self._snf

    def psi_at(self, k):
        out = self.field.one()
        for v, e in zip(self.psi, k):
            if e:
                out = out * v ** e
        return out

    def band(self):
        """Largest sup-norm of ``hm(b_j)`` over the period basis."""
        return max((sup_norm(self.h_minus.column(j)) for j in range(self.periods.rank)), default=0)

    def to_json(self):
        return {
            "h_l": self.h_l.tolist(),
            "h_r": self.h_r.tolist(),
            "psi": [v.to_json() for v in self.psi],
            "pairing": self.pairing.to_json(),
        }


@dataclass
class MultiplierReport:
    valid: bool
    residuals: dict
    max_residual: object

    def to_json(self):
        return {
            "valid": self.valid,
            "max_residual": _num(self.max_residual),
            "residuals": [[i, j, _num(r)] for (i, j), r in sorted(self.residuals.items())],
        }


def _num(x):
    import mpmath

    if x == INFINITE:
        return "inf"
    return mpmath.nstr(x, 6) if not isinstance(x, (int, Fraction)) else str(x)


def _compat_sides(L, i, j):
    """Both sides of the compatibility condition on the basis pair (b_i, b_j)."""
    m = L.periods.rank
    bi, bj = _unit(m, i), _unit(m, j)
    alpha = L.alpha
    lhs = L.periods.char(L.h_minus.column(j), bi)
    rhs = (
        L.pairing(bi, bj) ** 2
        * alpha(L.h_l.column(i), L.h_l.column(j))
        / alpha(L.h_r.column(i), L.h_r.column(j))
    )
    return lhs, rhs


def multiplier_validate(L: ThetaMultiplier, tol=None) -> MultiplierReport:
    """Check ``hm_{b2}(b1) = (b1,b2)^2 alpha(l1, l2) alpha(r1, r2)^-1`` on all basis pairs.

    Both sides are bimultiplicative in (b1, b2), so the basis check is complete.
    """
    m = L.periods.rank
    residuals = {}
    ok = True
    for i in range(m):
        for j in range(m):
            lhs, rhs = _compat_sides(L, i, j)
            r = lhs.relative_error(rhs)
            residuals[(i, j)] = r
            if not lhs.close(rhs, tol):
                ok = False
    worst = max(residuals.values(), default=L.field.ctx.mpf(0))
    return MultiplierReport(ok, residuals, worst)


def multiplier_solve_pairing(h_l, h_r, periods: PeriodLattice, branch="principal") -> SymmetricPairing:
    """Symmetric pairing that makes ``(h_l, h_r, psi, pairing)`` a valid multiplier.

    The compatibility condition fixes the squares ``(b_i, b_j)^2``; square roots
    are taken on ``branch``.  Raises ``InconsistentPairing`` when the conditions
    for (i, j) and (j, i) disagree, and ``NotASquare`` when a p-adic square
    root does not exist.
    """
    m = periods.rank
    alpha = periods.torus.alpha
    hm = h_l - h_r

    def required(i, j):
        return (
            periods.char(hm.column(j), _unit(m, i))
            / alpha(h_l.column(i), h_l.column(j))
            * alpha(h_r.column(i), h_r.column(j))
        )

    values = {}
    for i in range(m):
        for j in range(i, m):
            sq = required(i, j)
            if i != j and not sq.close(required(j, i)):
                raise InconsistentPairing(
                    f"periods {i} and {j} impose different values on the square of their pairing"
                )
            values[(i, j)] = sq.sqrt(branch)
    return SymmetricPairing(periods.field, m, values)


def _rational_inverse(M):
    import sympy

    inv = sympy.Matrix(M).inv()
    return [[Fraction(int(x.p), int(x.q)) for x in inv.row(i)] for i in range(inv.rows)]


def solve_periods(torus: NCTorus, h_l, h_r, pairing: SymmetricPairing) -> PeriodLattice:
    """Period table for which ``(h_l, h_r, *, pairing)`` satisfies the compatibility condition.

    Needs ``hm = h_l - h_r`` square and invertible over Q.  Entries are
    ``P[k][i] = prod_j w_ij^{(hm^-1)_{jk}}`` with
    ``w_ij = (b_i,b_j)^2 alpha(l_i, l_j) alpha(r_i, r_j)^-1``; fractional powers
    are exact when the roots are.
    """
    hm = h_l - h_r
    n, m = hm.target_rank, hm.source_rank
    if n != m or smith_index(hm) == INFINITE:
        raise ValueError("h_l - h_r must be square and invertible")
    c = _rational_inverse(hm.tolist())
    alpha = torus.alpha
    w = [
        [
            pairing.basis_value(i, j) ** 2
            * alpha(h_l.column(i), h_l.column(j))
            / alpha(h_r.column(i), h_r.column(j))
            for j in range(m)
        ]
        for i in range(m)
    ]
    table = []
    for k in range(n):
        row = []
        for i in range(m):
            v = torus.field.one()
            for j in range(m):
                if c[j][k]:
                    v = v * w[i][j] ** c[j][k]
            row.append(v)
        table.append(row)
    return PeriodLattice(torus, table)


# automorphy factors and shifts ------------------------------------------------


def _on_torus(L, phi):
    if not phi.torus.same_as(L.torus):
        raise TorusMismatch("function lives on another torus")


def shift_apply(periods: PeriodLattice, k, phi: GroupRingElement) -> GroupRingElement:
    """``b*``: ``e(h) -> h(b) e(h)`` for the period ``b = sum k_j b_j``."""
    return GroupRingElement(phi.torus, {h: c * periods.char(h, k) for h, c in phi.terms.items()})


def automorphy_apply(L: ThetaMultiplier, k, phi: GroupRingElement) -> GroupRingElement:
    """``j_L(b): phi -> psi(b) (b,b) e(h_{b,l}) phi e(h_{b,r})^-1``."""
    _on_torus(L, phi)
    return _automorphy_operator(L, k)(phi)


def _automorphy_operator(L, k):
    """``j_L(b)`` with its period-dependent factors computed once."""
    T = L.torus
    c = L.psi_at(k) * L.pairing(k, k)
    left = T.e(L.h_l(k))
    right = ring_inv(T.e(L.h_r(k)))
    return lambda phi: ring_mul(ring_mul(left, phi), right) * c


def automorphy_inverse_apply(L: ThetaMultiplier, k, phi: GroupRingElement) -> GroupRingElement:
    """``j_L(b)^-1``, termwise:
    ``e(h) -> psi(b)^-1 (b,b)^-1 eps(l) alpha(h, hp_b) alpha(r, l) e(h - hm_b)``.
    """
    _on_torus(L, phi)
    alpha = L.alpha
    l, r = L.h_l(k), L.h_r(k)
    hp, hm = add(l, r), sub(l, r)
    const = (L.psi_at(k) * L.pairing(k, k)).inverse() * alpha(r, l)
    if alpha.epsilon(l) == -1:
        const = const * L.field.real(-1)
    out = {}
    for h, c in phi.terms.items():
        out[sub(h, hm)] = c * const * alpha(h, hp)
    return GroupRingElement(phi.torus, out)


def twisted_shift(L: ThetaMultiplier, k, phi: GroupRingElement) -> GroupRingElement:
    """The operator ``j_L(b)^-1 o b*``."""
    return automorphy_inverse_apply(L, k, shift_apply(L.periods, k, phi))


# coefficient recursion -------------------------------------------------------


def recursion_factor(L: ThetaMultiplier, h, k):
    """``a_{h + hm_b} / a_h`` for the period ``b = sum k_j b_j``."""
    alpha = L.alpha
    l, r = L.h_l(k), L.h_r(k)
    out = (
        L.psi_at(k)
        / L.periods.char(h, k)
        / L.pairing(k, k)
        * alpha(r, l)
        * alpha(add(l, r), h)
    )
    if alpha.epsilon(l) == -1:
        out = out * L.field.real(-1)
    return out


class _Walker:
    """Unit-seed coefficients along B-walks from a coset representative.

    The walk to ``rep + hm(k)`` takes the steps of ``k`` one basis direction
    at a time in ascending index order; every prefix is cached.
    """

    def __init__(self, L: ThetaMultiplier):
        self.L = L
        m, n = L.periods.rank, L.torus.rank
        alpha = L.alpha
        self.steps = [L.h_minus.column(j) for j in range(m)]
        self.const = []
        self.weights = []
        for j in range(m):
            l, r = L.h_l.column(j), L.h_r.column(j)
            c = L.psi[j] / L.pairing.basis_value(j, j) * alpha(r, l)
            if alpha.epsilon(l) == -1:
                c = c * L.field.real(-1)
            self.const.append(c)
            hp = add(l, r)
            self.weights.append(
                [
                    L.periods.table[i][j].inverse() * alpha(hp, _unit(n, i))
                    for i in range(n)
                ]
            )
        self.cache = {}
        self._wpow = {}

    def factor(self, g, j):
        out = self.const[j]
        for i, e in enumerate(g):
            if e:
                key = (j, i, e)
                v = self._wpow.get(key)
                if v is None:
                    v = self.weights[j][i] ** e
                    self._wpow[key] = v
                out = out * v
        return out

    def value(self, rep, k, order=None):
        m = len(k)
        order = range(m) if order is None else order
        cur = [0] * m
        g = rep
        a = self.L.field.one()
        use_cache = order == range(m)
        for j in order:
            step = self.steps[j]
            sgn = 1 if k[j] > 0 else -1
            for _ in range(abs(k[j])):
                cur[j] += sgn
                key = (rep, tuple(cur))
                cached = self.cache.get(key) if use_cache else None
                if sgn > 0:
                    new_g = add(g, step)
                    if cached is None:
                        cached = a * self.factor(g, j)
                else:
                    new_g = sub(g, step)
                    if cached is None:
                        cached = a / self.factor(new_g, j)
                if use_cache:
                    self.cache[key] = cached
                a, g = cached, new_g
        return a


def walk_coefficient(L: ThetaMultiplier, rep, k, order=None):
    """Unit-seed coefficient at ``rep + hm(k)`` reached by stepping through the
    period basis in ``order`` (default ascending)."""
    return _Walker(L).value(tuple(rep), tuple(k), order=list(order) if order is not None else None)


def theta_dimension(L: ThetaMultiplier):
    """``[H : hm(B)]``, possibly ``INFINITE``."""
    return smith_index(L.h_minus)


@dataclass
class AmplenessReport:
    gram: list
    eigenvalues: list
    dimension: object
    verdict: str
    reason: str

    @property
    def ample(self):
        return self.verdict == "ample"

    def to_json(self):
        return {
            "verdict": self.verdict,
            "reason": self.reason,
            "dimension": "infinite" if self.dimension == INFINITE else self.dimension,
            "gram": [[_num(x) for x in row] for row in self.gram],
            "eigenvalues": [_num(x) for x in self.eigenvalues],
        }


def quadratic_form(L: ThetaMultiplier, k):
    """``log |(b,b) alpha(h_{b,l}, -h_{b,r})|``."""
    l, r = L.h_l(k), L.h_r(k)
    return (L.pairing(k, k) * L.alpha(l, tuple(-x for x in r))).log_norm()


def ampleness_gram(L: ThetaMultiplier, rel_tol=1e-12) -> AmplenessReport:
    """Gram matrix ``A`` with ``Q(b) = k^T A k`` and the ampleness verdict.

    ``ample`` needs finite dimension and smallest eigenvalue above
    ``rel_tol * trace``; borderline forms are reported as ``degenerate``.
    """
    ctx = L.field.ctx
    m = L.periods.rank
    diag = [quadratic_form(L, _unit(m, i)) for i in range(m)]
    A = [[ctx.mpf(0)] * m for _ in range(m)]
    for i in range(m):
        A[i][i] = diag[i]
        for j in range(i + 1, m):
            k = tuple(int(t in (i, j)) for t in range(m))
            A[i][j] = A[j][i] = (quadratic_form(L, k) - diag[i] - diag[j]) / 2
    dim = theta_dimension(L)
    if m:
        eig, _ = ctx.eigsy(ctx.matrix(A))
        eigs = sorted(eig[i] for i in range(m))
    else:
        eigs = []
    trace = sum(diag, ctx.mpf(0))
    scale = max([abs(x) for x in eigs] + [ctx.mpf(0)])
    if dim == INFINITE:
        verdict, reason = "degenerate", "theta space is infinite-dimensional"
    elif not eigs:
        verdict, reason = "degenerate", "empty period lattice"
    elif trace > 0 and eigs[0] > rel_tol * trace:
        verdict, reason = "ample", "positive definite"
    elif eigs[0] < -rel_tol * scale:
        verdict, reason = "indefinite", "quadratic form has a negative direction"
    else:
        verdict, reason = "degenerate", "quadratic form is not positive definite"
    return AmplenessReport(A, eigs, dim, verdict, reason)


# theta series ----------------------------------------------------------------


@dataclass
class ThetaSeries:
    """Truncation of a theta function to the sup-norm ball of ``radius``.

    ``interior`` is the radius on which the coefficients are trusted (smaller
    than ``radius`` for products).  ``formal`` marks series of non-ample
    multipliers.
    """

    multiplier: ThetaMultiplier
    radius: int
    coeffs: dict
    seeds: tuple = ()
    interior: int = None
    formal: bool = False
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if self.interior is None:
            self.interior = self.radius
        self.coeffs = {h: c for h, c in self.coeffs.items() if not c.is_zero()}

    @property
    def field(self):
        return self.multiplier.field

    def coefficient(self, h):
        h = tuple(h)
        if sup_norm(h) > self.radius:
            raise ValueError(f"{h} lies outside the truncation ball of radius {self.radius}")
        return self.coeffs.get(h, self.field.zero())

    def with_coefficient(self, h, c):
        coeffs = dict(self.coeffs)
        coeffs[tuple(h)] = c
        return ThetaSeries(self.multiplier, self.radius, coeffs, self.seeds, self.interior, self.formal, dict(self.meta))

    def as_element(self):
        return GroupRingElement(self.multiplier.torus, self.coeffs)

    def to_json(self):
        return {
            "radius": self.radius,
            "interior": self.interior,
            "formal": self.formal,
            "coeffs": [[list(h), c.to_json()] for h, c in sorted(self.coeffs.items())],
        }


def _require_finite(L, force):
    dim = theta_dimension(L)
    if dim == INFINITE:
        raise NotAmple("theta space is infinite-dimensional")
    verdict = ampleness_gram(L)
    if not verdict.ample and not force:
        raise NotAmple(f"multiplier is not ample ({verdict.verdict}: {verdict.reason}); use force for formal series")
    return verdict


def _unit_coefficients(L, radius, reps_wanted=None, jobs=1):
    """Map rep -> {h: unit-seed Scalar} over the ball of ``radius``."""
    snf = L.smith
    groups = {}
    for h in ball(L.torus.rank, radius):
        rep, k = coset_reduce(L.h_minus, h, snf)
        if reps_wanted is None or rep in reps_wanted:
            groups.setdefault(rep, []).append((h, k))

    def run(rep):
        walker = _Walker(L)
        return rep, {h: walker.value(rep, k) for h, k in groups[rep]}

    reps = list(groups)
    if jobs > 1 and len(reps) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return dict(pool.map(run, reps))
    return dict(map(run, reps))


def theta_series(L: ThetaMultiplier, radius: int, seeds, force=False, jobs=1) -> ThetaSeries:
    """The theta function whose value on coset representative ``reps[i]`` is ``seeds[i]``."""
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    verdict = _require_finite(L, force)
    reps = coset_reps(L.h_minus)
    seeds = tuple(s if isinstance(s, Coefficient) else L.field.coefficient(s) for s in seeds)
    if len(seeds) != len(reps):
        raise ValueError(f"need {len(reps)} seeds, got {len(seeds)}")
    wanted = {r for r, s in zip(reps, seeds) if not s.is_zero()}
    units = _unit_coefficients(L, radius, wanted, jobs)
    coeffs = {}
    for rep, s in zip(reps, seeds):
        for h, a in units.get(rep, {}).items():
            coeffs[h] = s * a
    return ThetaSeries(L, radius, coeffs, seeds, formal=not verdict.ample)


def theta_basis(L: ThetaMultiplier, radius: int, force=False, jobs=1):
    """One series per coset representative, seeded by 1 on its own coset."""
    verdict = _require_finite(L, force)
    reps = coset_reps(L.h_minus)
    units = _unit_coefficients(L, radius, None, jobs)
    one, zero = L.field.coefficient(L.field.one()), L.field.zero()
    out = []
    for i, rep in enumerate(reps):
        seeds = tuple(one if j == i else zero for j in range(len(reps)))
        coeffs = {h: L.field.coefficient(a) for h, a in units.get(rep, {}).items()}
        out.append(ThetaSeries(L, radius, coeffs, seeds, formal=not verdict.ample, meta={"rep": rep}))
    return out


def functional_equation_residual(theta: ThetaSeries, k, r_check=None):
    """Largest relative mismatch between ``b* theta`` and ``j_L(b) theta`` on a ball.

    Compares, for every ``h`` with ``|h| <= r_check``, the coefficient of
    ``e(h + hm_b)`` on both sides; ``j_L(b)`` is applied through ring
    multiplication.
    """
    L = theta.multiplier
    k = tuple(k)
    hm = L.h_minus(k)
    if r_check is None:
        r_check = theta.interior - sup_norm(hm)
    if r_check < 0 or sup_norm(hm) + r_check > theta.interior:
        raise ValueError(
            f"ball too small: |hm_b| = {sup_norm(hm)}, check radius {r_check}, trusted radius {theta.interior}"
        )
    T = L.torus
    j = _automorphy_operator(L, k)
    worst = L.field.ctx.mpf(0)
    for h in ball(T.rank, r_check):
        g = add(h, hm)
        lhs = theta.coefficient(g) * L.periods.char(g, k)
        a = theta.coefficient(h)
        if a.is_zero():
            rhs = L.field.zero()
        else:
            image = j(GroupRingElement(T, {h: a}))
            rhs = image.terms.get(g, L.field.zero())
        r = lhs.relative_distance(rhs)
        if r > worst:
            worst = r
    return worst


def certify(theta: ThetaSeries, period_radius=1):
    """Max functional-equation residual over all periods in a ball of B.

    The check radius for each period is ``interior - |hm_b|``; periods whose
    shift leaves the trusted ball are skipped.
    """
    L = theta.multiplier
    worst = L.field.ctx.mpf(0)
    checked = 0
    for k in ball(L.periods.rank, period_radius):
        hm = L.h_minus(k)
        r = theta.interior - sup_norm(hm)
        if r < 0:
            continue
        worst = max(worst, functional_equation_residual(theta, k, r))
        checked += 1
    return worst, checked


@dataclass
class EvalResult:
    value: Coefficient
    tail_bound: object


def _tail_bound(theta, x):
    """Envelope for the terms of ``theta`` at ``x`` outside the truncation ball."""
    L = theta.multiplier
    ctx = L.field.ctx
    m = L.periods.rank
    rows = L.h_minus.matrix
    row_norm = max((ctx.sqrt(sum(a * a for a in r)) for r in rows), default=ctx.mpf(0))
    eig = ampleness_gram(L).eigenvalues
    reps = coset_reps(L.h_minus)
    total = ctx.mpf(0)
    walker = _Walker(L)
    for rep, seed in zip(reps, theta.seeds):
        if seed.is_zero():
            continue

        def f(k):
            h = add(rep, L.h_minus(k))
            return (walker.value(rep, k) * x(h)).log_norm()

        c = f((0,) * m)
        lin = []
        quad = [[ctx.mpf(0)] * m for _ in range(m)]
        fp = [f(_unit(m, i)) for i in range(m)]
        fn = [f(tuple(-t for t in _unit(m, i))) for i in range(m)]
        for i in range(m):
            lin.append((fp[i] - fn[i]) / 2)
            quad[i][i] = c - (fp[i] + fn[i]) / 2
            for j in range(i + 1, m):
                kij = tuple(int(t in (i, j)) for t in range(m))
                quad[i][j] = quad[j][i] = -(f(kij) - fp[i] - fp[j] + c) / 2
        lam = min(ctx.eigsy(ctx.matrix(quad))[0][i] for i in range(m)) if m else ctx.mpf(0)
        if lam <= 0:
            return ctx.inf
        ell = ctx.sqrt(sum(v * v for v in lin))
        rho = (theta.radius + 1 - sup_norm(rep)) / row_norm if row_norm else ctx.inf
        t = max(0, int(ctx.floor(rho)))
        part = ctx.mpf(0)
        first = None
        while True:
            term = (2 * t + 3) ** m * ctx.exp(c + ell * (t + 1) - lam * t * t)
            part += term
            if first is None:
                first = term
            if t * lam > ell and term < (first + part) * ctx.mpf(2) ** (-L.field.prec - 10):
                break
            t += 1
        total += part * seed.norm()
    del eig
    return total


def theta_eval(theta: ThetaSeries, x: CharacterPoint, with_tail=True) -> EvalResult:
    """``sum_{|h| <= R} a_h h(x)`` and an envelope for the discarded tail."""
    L = theta.multiplier
    if theta.formal or not ampleness_gram(L).ample:
        raise NotAmple("evaluation needs an ample multiplier")
    if x.rank != L.torus.rank:
        raise ValueError("point rank does not match the torus")
    total = L.field.zero()
    for h, a in sorted(theta.coeffs.items()):
        total = total + a * x(h)
    tail = _tail_bound(theta, x) if with_tail and theta.seeds else None
    return EvalResult(total, tail)


# products --------------------------------------------------------------------


def _same_lattice(L1, L2):
    if not L1.periods.same_as(L2.periods):
        raise NotComposable("multipliers are defined for different tori or period lattices")


def multiplier_compose(L1: ThetaMultiplier, L2: ThetaMultiplier, require_ample=True) -> ThetaMultiplier:
    """``L1 (x) L2 = (h_l1, h_r2, psi1 psi2, pairing1 pairing2)`` when ``h_l2 == h_r1``.

    On a commutative torus with trivial alpha only ``hm`` enters the
    automorphy factor, so any two multipliers compose, to
    ``(h_l1 + h_l2, h_r1 + h_r2, ...)``.
    """
    _same_lattice(L1, L2)
    if L1.alpha.is_trivial():
        h_l, h_r = L1.h_l + L2.h_l, L1.h_r + L2.h_r
    elif L2.h_l.matrix != L1.h_r.matrix:
        raise NotComposable("h_l of the second multiplier must equal h_r of the first")
    else:
        h_l, h_r = L1.h_l, L2.h_r
    if require_ample:
        for L in (L1, L2):
            rep = ampleness_gram(L)
            if not rep.ample:
                raise NotAmple(f"factor is not ample ({rep.verdict})")
    L = ThetaMultiplier(
        L1.periods,
        h_l,
        h_r,
        tuple(a * b for a, b in zip(L1.psi, L2.psi)),
        L1.pairing * L2.pairing,
        meta={"composed": True},
    )
    report = multiplier_validate(L)
    if not report.valid:
        raise InvalidMultiplier(f"product fails the compatibility condition (residual {report.max_residual})")
    return L


def theta_mul(t1: ThetaSeries, t2: ThetaSeries, require_ample=True) -> ThetaSeries:
    """Product ``theta1 theta2`` as a series for ``L1 (x) L2``.

    Coefficients are computed on the ball of ``min(R1, R2)``; the trusted
    interior excludes a band of width ``max_j |hm_{b_j}|`` of the product.
    """
    L = multiplier_compose(t1.multiplier, t2.multiplier, require_ample)
    alpha = L.alpha
    radius = min(t1.radius, t2.radius)
    out = {}
    items2 = t2.coeffs
    for h1, a in t1.coeffs.items():
        for h2, b in items2.items():
            h = add(h1, h2)
            if sup_norm(h) > radius:
                continue
            c = a * b * alpha(h1, h2)
            out[h] = out[h] + c if h in out else c
    interior = max(0, min(t1.interior, t2.interior) - L.band())
    series = ThetaSeries(L, radius, out, interior=interior, formal=t1.formal or t2.formal)
    reps = coset_reps(L.h_minus) if theta_dimension(L) != INFINITE else []
    if all(sup_norm(r) <= radius for r in reps):
        series.seeds = tuple(series.coefficient(r) for r in reps)
    return series


# pullback --------------------------------------------------------------------


def infer_period_map(F: TorusMorphism, B1: PeriodLattice, B2: PeriodLattice, box=4):
    """Integer matrix ``M`` with ``F(b2_j) = sum_l M_lj b1_l``, verified exactly."""
    m1, m2 = B1.rank, B2.rank
    images = [F.point_map(B2.point(_unit(m2, j))) for j in range(m2)]
    cols = []
    for img in images:
        found = _solve_point(B1, img, box)
        if found is None:
            raise PullbackError("F does not map the source periods into the target period lattice")
        cols.append(found)
    return LatticeHom([[cols[j][l] for j in range(m2)] for l in range(m1)], m2)


def _solve_point(B, target, box):
    import mpmath

    ctx = B.field.ctx
    n, m = B.torus.rank, B.rank
    try:
        A = ctx.matrix([[B.table[i][j].log_norm() for j in range(m)] for i in range(n)])
        v = ctx.matrix([target.values[i].log_norm() for i in range(n)])
        sol = ctx.qr_solve(A, v)[0] if n >= m else None
        if sol is not None:
            guess = tuple(int(ctx.nint(sol[j])) for j in range(m))
            if B.point(guess).close(target):
                return guess
    except (ZeroDivisionError, ValueError, mpmath.libmp.NoConvergence):
        pass
    cands = sorted(itertools.product(range(-box, box + 1), repeat=m), key=lambda k: (sum(map(abs, k)), k))
    for k in cands:
        if B.point(k).close(target):
            return k
    return None


def preimage_periods(F: TorusMorphism, B1: PeriodLattice) -> PeriodLattice:
    """Periods ``B2`` of the source with ``F(b2_j) = b1_j`` (so the period map is the identity).

    Needs ``f`` square and invertible over Q; fractional powers use the
    principal branch.
    """
    f = F.f
    if f.source_rank != f.target_rank or smith_index(f) == INFINITE:
        raise PullbackError("preimage periods need f invertible over Q")
    c = _rational_inverse(f.tolist())
    n1 = F.target.rank
    pts = []
    for j in range(B1.rank):
        b = B1.point(_unit(B1.rank, j))
        vals = []
        for i in range(F.source.rank):
            v = B1.field.one()
            for kk in range(n1):
                if c[kk][i]:
                    v = v * b.values[kk] ** c[kk][i]
            vals.append(v)
        pts.append(CharacterPoint(tuple(vals)))
    return PeriodLattice.from_points(F.source, pts)


def multiplier_pullback(F: TorusMorphism, L1: ThetaMultiplier, B2: PeriodLattice, period_map=None) -> ThetaMultiplier:
    """``F*(L1)``: ``h' = f o h o F``, ``psi'(b) = psi(F b) a_{hm_{F b}}``,
    ``(b1, b2)' = (F b1, F b2)``.

    ``period_map`` is the integer matrix of ``F: B2 -> B1``; it is inferred and
    always verified entrywise on the period tables.
    """
    if not F.report.characteristic_one:
        raise PullbackError("pullback needs a morphism of characteristic 1")
    if not F.target.same_as(L1.torus):
        raise TorusMismatch("L1 must live on the target torus of F")
    if not B2.torus.same_as(F.source):
        raise TorusMismatch("B2 must be periods of the source torus of F")
    B1 = L1.periods
    M = period_map if period_map is not None else infer_period_map(F, B1, B2)
    if (M.target_rank, M.source_rank) != (B1.rank, B2.rank):
        raise ValueError("period map has the wrong shape")
    for j in range(B2.rank):
        img = F.point_map(B2.point(_unit(B2.rank, j)))
        if not img.close(B1.point(M.column(j))):
            raise PullbackError(f"F(b2_{j}) is not the period given by the period map")
    h_l = F.f @ L1.h_l @ M
    h_r = F.f @ L1.h_r @ M
    psi = []
    for j in range(B2.rank):
        Fb = M.column(j)
        psi.append(L1.psi_at(Fb) * F.a(L1.h_minus(Fb)))
    L2 = ThetaMultiplier(B2, h_l, h_r, psi, L1.pairing.pullback(M), meta={"pullback": F.label})
    report = multiplier_validate(L2)
    if not report.valid:
        raise InvalidMultiplier(f"pulled-back multiplier fails the compatibility condition ({report.max_residual})")
    return L2


def _left_inverse_norm(f: LatticeHom):
    import sympy

    A = sympy.Matrix(f.tolist())
    Linv = (A.T * A).inv() * A.T
    return max(sum(abs(x) for x in Linv.row(i)) for i in range(Linv.rows))


def theta_pullback(F: TorusMorphism, theta: ThetaSeries, L2: ThetaMultiplier, radius=None) -> ThetaSeries:
    """``F*(theta)`` with ``C_g = sum_{f(h) = g} c_h a_h`` (zero off the image of f).

    ``f`` must be injective so that the output ball is covered by the input
    ball; ``radius`` defaults to the largest covered radius.
    """
    if not theta.multiplier.torus.same_as(F.target):
        raise TorusMismatch("theta must live on the target torus of F")
    if not F.report.characteristic_one:
        raise PullbackError("pullback needs a morphism of characteristic 1")
    if not F.f.is_injective():
        raise PullbackError("insufficient input radius: fibres of a non-injective f are unbounded")
    bound = _left_inverse_norm(F.f)
    max_r = int(theta.interior // bound) if bound else theta.interior
    if radius is None:
        radius = max_r
    elif radius > max_r:
        raise PullbackError(f"insufficient input radius: output radius {radius} needs input radius {radius * bound}")
    out = {}
    for h, c in theta.coeffs.items():
        if sup_norm(h) > theta.interior:
            continue
        g = F.f(h)
        if sup_norm(g) > radius:
            continue
        v = c * F.a(h)
        out[g] = out[g] + v if g in out else v
    dim = theta_dimension(L2)
    formal = dim == INFINITE or not ampleness_gram(L2).ample
    return ThetaSeries(L2, radius, out, formal=formal, meta={"pullback": F.label})


def same_automorphy(L: ThetaMultiplier, L2: ThetaMultiplier) -> bool:
    """Whether ``j_L(b)^-1 o b*`` and ``j_L2(b)^-1 o b*`` agree for every period.

    Both operators send ``e(h)`` to (constant) x (character of h) x ``e(h - hm_b)``
    and are homomorphic in b, so basis periods and the monomials ``e(0), e(e_i)``
    decide equality.
    """
    _same_lattice(L, L2)
    if L.h_minus.matrix != L2.h_minus.matrix:
        return False
    T = L.torus
    n, m = T.rank, L.periods.rank
    probes = [(0,) * n] + [_unit(n, i) for i in range(n)]
    for j in range(m):
        k = _unit(m, j)
        for h in probes:
            x = twisted_shift(L, k, T.e(h))
            y = twisted_shift(L2, k, T.e(h))
            if set(x.terms) != set(y.terms) or not x.close(y):
                return False
    return True
