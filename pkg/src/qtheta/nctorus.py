"""Function rings of noncommutative tori and their morphisms.

``NCTorus(alpha)`` stands for T(H, alpha) with H = Z^rank; its ring of
algebraic functions is spanned by symbols e(h) with
``e(h) e(g) = alpha(h, g) e(h + g)``.

A ``TorusMorphism`` F: T(H2, alpha2) -> T(H1, alpha1) is stored through its
contravariant action ``F*(e(h)) = a_h e(f(h))`` with ``f: H1 -> H2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
import itertools

from .lattice import AlternatingPairing, CharacterPoint, LatticeHom, add, neg
from .scalar import Coefficient, Scalar

__all__ = [
    "TorusMismatch",
    "NotInvertible",
    "IncompatibleMorphism",
    "NCTorus",
    "GroupRingElement",
    "TorusMorphism",
    "MorphismReport",
    "ring_mul",
    "ring_inv",
    "morphism_validate",
    "morphism_apply",
    "direct_product",
    "make_identity",
    "make_shift",
    "make_mult_n",
    "make_external_mult",
    "make_mumford",
    "FiniteGroupoid",
    "groupoid_convolve",
]


class TorusMismatch(ValueError):
    pass


class NotInvertible(ValueError):
    pass


class IncompatibleMorphism(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class NCTorus:
    alpha: AlternatingPairing

    @property
    def rank(self):
        return self.alpha.rank

    @property
    def field(self):
        return self.alpha.field

    def is_commutative(self):
        return self.alpha.is_trivial()

    def e(self, h, coeff=None):
        """The monomial ``coeff * e(h)`` (coefficient 1 by default)."""
        h = tuple(int(x) for x in h)
        if len(h) != self.rank:
            raise ValueError(f"{h!r} is not an element of a rank-{self.rank} lattice")
        c = self.field.one() if coeff is None else coeff
        c = c if isinstance(c, Coefficient) else self.field.coefficient(c)
        return GroupRingElement(self, {h: c})

    def zero(self):
        return GroupRingElement(self, {})

    def same_as(self, other):
        return self is other or (
            isinstance(other, NCTorus)
            and other.field == self.field
            and self.alpha.same_values(other.alpha)
        )

    def to_json(self):
        return {"rank": self.rank, "alpha": self.alpha.to_json()}


class GroupRingElement:
    """Finitely supported element ``sum a_h e(h)`` of Al(H, alpha)."""

    __slots__ = ("torus", "terms")

    def __init__(self, torus, terms):
        self.torus = torus
        self.terms = {h: c for h, c in terms.items() if not c.is_zero()}

    def _check(self, other):
        if not isinstance(other, GroupRingElement):
            raise TypeError(f"expected GroupRingElement, got {type(other).__name__}")
        if not self.torus.same_as(other.torus):
            raise TorusMismatch("elements live on different tori")

    def __add__(self, other):
        self._check(other)
        terms = dict(self.terms)
        for h, c in other.terms.items():
            terms[h] = terms[h] + c if h in terms else c
        return GroupRingElement(self.torus, terms)

    def __neg__(self):
        return GroupRingElement(self.torus, {h: -c for h, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, (Scalar, Coefficient)):
            return GroupRingElement(self.torus, {h: c * other for h, c in self.terms.items()})
        return ring_mul(self, other)

    def __rmul__(self, other):
        if isinstance(other, (Scalar, Coefficient)):
            return self * other
        return NotImplemented

    def is_monomial(self):
        return len(self.terms) == 1

    def monomial(self):
        """``(h, coefficient)`` of a single-term element."""
        if len(self.terms) != 1:
            raise ValueError("not a monomial")
        return next(iter(self.terms.items()))

    def close(self, other, tol=None):
        self._check(other)
        keys = set(self.terms) | set(other.terms)
        zero = self.torus.field.zero()
        return all(
            self.terms.get(h, zero).close(other.terms.get(h, zero), tol) for h in keys
        )

    def __repr__(self):
        body = " + ".join(f"{c!r}*e{h}" for h, c in sorted(self.terms.items()))
        return f"GroupRingElement({body or '0'})"


def ring_mul(x: GroupRingElement, y: GroupRingElement) -> GroupRingElement:
    """Bilinear extension of ``e(h) e(g) = alpha(h, g) e(h + g)``."""
    x._check(y)
    alpha = x.torus.alpha
    out = {}
    for h, a in x.terms.items():
        for g, b in y.terms.items():
            k = add(h, g)
            c = a * b * alpha(h, g)
            out[k] = out[k] + c if k in out else c
    return GroupRingElement(x.torus, out)


def ring_inv(x: GroupRingElement) -> GroupRingElement:
    """Inverse of an invertible element ``a e(h)``: ``a^-1 eps(h) e(-h)``.

    Only monomials are invertible; anything else raises ``NotInvertible``.
    """
    if len(x.terms) != 1:
        raise NotInvertible(f"element with {len(x.terms)} terms is not invertible")
    h, a = x.monomial()
    value = a.value
    field = x.torus.field
    if isinstance(value, Scalar):
        inv = value.inverse()
    else:
        inv = 1 / value
    c = field.coefficient(inv) if not isinstance(inv, Scalar) else Coefficient(field, inv)
    if x.torus.alpha.epsilon(h) == -1:
        c = -c
    return GroupRingElement(x.torus, {neg(h): c})


def direct_product(t1: NCTorus, t2: NCTorus) -> NCTorus:
    """T(H1, a1) x T(H2, a2) = T(H1 + H2, a1 + a2); e(h1) (x) e(h2) is e((h1, h2))."""
    if t1.field != t2.field:
        raise TorusMismatch("tori over different fields")
    return NCTorus(t1.alpha.direct_sum(t2.alpha))


def tensor_monomials(x: GroupRingElement, y: GroupRingElement, product: NCTorus):
    """Image of ``x (x) y`` in the function ring of the direct product."""
    out = {}
    for h, a in x.terms.items():
        for g, b in y.terms.items():
            out[h + g] = a * b
    return GroupRingElement(product, out)


@dataclass(frozen=True)
class MorphismReport:
    compatible: bool
    sigma: dict
    characteristic_one: bool
    strictly_compatible: bool
    violations: list

    def to_json(self):
        return {
            "compatible": self.compatible,
            "characteristic_one": self.characteristic_one,
            "strictly_compatible": self.strictly_compatible,
            "sigma": [[i, j, s] for (i, j), s in sorted(self.sigma.items())],
            "violations": [list(v) for v in self.violations],
        }


class TorusMorphism:
    """Morphism ``F: source -> target`` acting on functions by ``F*(e(h)) = a_h e(f(h))``.

    ``f`` maps the target's character lattice H1 to the source's H2.
    ``a_basis`` holds ``a_{e_i}`` for the basis of H1; the remaining ``a_h``
    follow from ``a_{h+g} = a_h a_g sigma(h, g)`` with sigma the characteristic.
    Construction raises ``IncompatibleMorphism`` when
    ``alpha2(f h, f g)^2 != alpha1(h, g)^2`` on some basis pair.
    """

    def __init__(self, source: NCTorus, target: NCTorus, f: LatticeHom, a_basis=None, label=None):
        if f.source_rank != target.rank or f.target_rank != source.rank:
            raise ValueError(
                f"f must map the target lattice (rank {target.rank}) to the source lattice (rank {source.rank})"
            )
        if source.field != target.field:
            raise TorusMismatch("tori over different fields")
        self.source = source
        self.target = target
        self.f = f
        one = target.field.one()
        self.a_basis = tuple(a_basis) if a_basis is not None else (one,) * target.rank
        if len(self.a_basis) != target.rank:
            raise ValueError("a_basis must have one value per basis vector of the target lattice")
        self.label = label
        self.report = morphism_validate(self)
        if not self.report.compatible:
            raise IncompatibleMorphism(
                f"alpha-compatibility fails on basis pairs {self.report.violations}"
            )
        self._sigma_sign = self.report.sigma

    @property
    def field(self):
        return self.target.field

    def sigma(self, h, g):
        """Characteristic ``alpha1(h, g) alpha2(f h, f g)^-1`` as +1 or -1."""
        sign = 1
        n = self.target.rank
        for i in range(n):
            for j in range(i, n):
                s = self._sigma_sign[(i, j)]
                if s == -1:
                    e = h[i] * g[i] if i == j else h[i] * g[j] + h[j] * g[i]
                    if e % 2:
                        sign = -sign
        return sign

    def a(self, h):
        """The coefficient ``a_h`` of ``F*(e(h))``.

        Closed form of the basis-order reconstruction:
        ``prod a_i^{h_i} * prod_{i<j} s_ij^{h_i h_j} * prod_i s_ii^{h_i (h_i - 1)/2}``.
        """
        out = self.field.one()
        for v, e in zip(self.a_basis, h):
            if e:
                out = out * v ** e
        sign = 1
        n = len(h)
        for i in range(n):
            for j in range(i, n):
                if self._sigma_sign[(i, j)] == -1:
                    e = h[i] * (h[i] - 1) // 2 if i == j else h[i] * h[j]
                    if e % 2:
                        sign = -sign
        if sign == -1:
            out = out * self.field.real(-1)
        return out

    def apply(self, x: GroupRingElement) -> GroupRingElement:
        return morphism_apply(self, x)

    def point_map(self, point: CharacterPoint) -> CharacterPoint:
        """Induced map ``Hom(H2, K*) -> Hom(H1, K*)``, ``x -> x o f``."""
        return CharacterPoint(tuple(point(self.f.column(i)) for i in range(self.target.rank)))

    def __repr__(self):
        return f"TorusMorphism({self.label or 'F'}: rank {self.source.rank} -> rank {self.target.rank})"


def morphism_validate(F: TorusMorphism) -> MorphismReport:
    """Check ``alpha2^2(f h, f g) = alpha1^2(h, g)`` on basis pairs and compute sigma."""
    a1, a2 = F.target.alpha, F.source.alpha
    n = F.target.rank
    cols = [F.f.column(i) for i in range(n)]
    basis = [tuple(int(i == j) for j in range(n)) for i in range(n)]
    sigma = {}
    violations = []
    minus_one = F.target.field.real(-1)
    for i in range(n):
        for j in range(i, n):
            ratio = a1(basis[i], basis[j]) / a2(cols[i], cols[j])
            if ratio.is_one():
                sigma[(i, j)] = 1
            elif ratio.close(minus_one):
                sigma[(i, j)] = -1
            else:
                sigma[(i, j)] = 0
                violations.append((i, j))
    compatible = not violations
    char_one = compatible and all(s == 1 for s in sigma.values())
    return MorphismReport(compatible, sigma, char_one, char_one, violations)


def morphism_apply(F: TorusMorphism, x: GroupRingElement) -> GroupRingElement:
    """``F*`` on a function of the target torus; the result lives on the source."""
    if not x.torus.same_as(F.target):
        raise TorusMismatch("F* acts on functions of the target torus")
    out = {}
    for h, c in x.terms.items():
        g = F.f(h)
        v = c * F.a(h)
        out[g] = out[g] + v if g in out else v
    return GroupRingElement(F.source, out)


def make_identity(torus: NCTorus) -> TorusMorphism:
    return TorusMorphism(torus, torus, LatticeHom.identity(torus.rank), label="id")


def make_shift(torus: NCTorus, point: CharacterPoint) -> TorusMorphism:
    """The automorphism ``b*: e(h) -> h(b) e(h)`` for a point ``b`` of T(H, 1)."""
    if point.rank != torus.rank:
        raise ValueError("point rank does not match the torus")
    return TorusMorphism(
        torus, torus, LatticeHom.identity(torus.rank), a_basis=point.values, label="shift"
    )


def make_mult_n(torus: NCTorus, n: int) -> TorusMorphism:
    """``[n]: T(H, alpha) -> T(H, alpha^(n^2))`` with ``[n]*(e(h)) = e(n h)``."""
    target = NCTorus(torus.alpha ** (n * n))
    return TorusMorphism(torus, target, LatticeHom.scalar(torus.rank, n), label=f"[{n}]")


def make_external_mult(alpha: AlternatingPairing, beta: AlternatingPairing) -> TorusMorphism:
    """``m: T(H, alpha) x T(H, beta) -> T(H, alpha beta)``, ``e(h) -> e(h) (x) e(h)``."""
    n = alpha.rank
    source = NCTorus(alpha.direct_sum(beta))
    target = NCTorus(alpha * beta)
    rows = [[int(i == j) for j in range(n)] for i in range(n)] * 2
    return TorusMorphism(source, target, LatticeHom(rows, n), label="external")


def make_mumford(alpha: AlternatingPairing) -> TorusMorphism:
    """Mumford's morphism ``T(H+H, a+a) -> T(H+H, a^2+a^2)``, ``e(h, g) -> e(h+g, h-g)``."""
    n = alpha.rank
    source = NCTorus(alpha.direct_sum(alpha))
    sq = alpha ** 2
    target = NCTorus(sq.direct_sum(sq))
    rows = []
    for i in range(n):
        rows.append([int(i == j) for j in range(n)] + [int(i == j) for j in range(n)])
    for i in range(n):
        rows.append([int(i == j) for j in range(n)] + [-int(i == j) for j in range(n)])
    return TorusMorphism(source, target, LatticeHom(rows, 2 * n), label="mumford")


class FiniteGroupoid:
    """Finite groupoid given by morphisms with sources, targets and a composition table.

    ``compose[(i, j)]`` is the composite ``i o j`` ("first j, then i"), defined
    when ``source[i] == target[j]``.
    """

    def __init__(self, objects, source, target, compose, identities):
        self.objects = tuple(objects)
        self.morphisms = tuple(source)
        self.source = dict(source)
        self.target = dict(target)
        self.compose = dict(compose)
        self.identities = dict(identities)
        self._check()

    def _check(self):
        for i in self.morphisms:
            for j in self.morphisms:
                if self.source[i] == self.target[j]:
                    k = self.compose.get((i, j))
                    if k is None:
                        raise ValueError(f"missing composite {i} o {j}")
                    if self.source[k] != self.source[j] or self.target[k] != self.target[i]:
                        raise ValueError(f"composite {i} o {j} has the wrong endpoints")
        for u, e in self.identities.items():
            for i in self.morphisms:
                if self.source[i] == u and self.compose[(i, e)] != i:
                    raise ValueError("identity is not right neutral")
                if self.target[i] == u and self.compose[(e, i)] != i:
                    raise ValueError("identity is not left neutral")
        for i in self.morphisms:
            if not any(
                self.source[j] == self.target[i]
                and self.compose[(j, i)] == self.identities[self.source[i]]
                for j in self.morphisms
            ):
                raise ValueError(f"morphism {i} has no inverse")

    @classmethod
    def from_group(cls, elements, mul, identity):
        """One-object groupoid of a finite group; ``mul(i, j)`` is the composite ``i o j``."""
        elements = list(elements)
        return cls(
            ["*"],
            {g: "*" for g in elements},
            {g: "*" for g in elements},
            {(i, j): mul(i, j) for i in elements for j in elements},
            {"*": identity},
        )

    @classmethod
    def pair_groupoid(cls, objects):
        """One morphism ``(u, v): u -> v`` for every ordered pair of objects."""
        objects = list(objects)
        morphisms = list(itertools.product(objects, repeat=2))
        return cls(
            objects,
            {m: m[0] for m in morphisms},
            {m: m[1] for m in morphisms},
            {(i, j): (j[0], i[1]) for i in morphisms for j in morphisms if j[1] == i[0]},
            {u: (u, u) for u in objects},
        )

    def delta(self, k, field):
        return {m: field.coefficient(Fraction(int(m == k))) for m in self.morphisms}


def groupoid_convolve(G: FiniteGroupoid, f: dict, g: dict) -> dict:
    """``(f*g)(k) = sum over i o j = k of f(j) g(i)``."""
    some = next(iter(f.values()))
    zero = some.field.zero()
    out = {k: zero for k in G.morphisms}
    for (i, j), k in G.compose.items():
        out[k] = out[k] + f[j] * g[i]
    return out
