"""Reading and writing JSON/TOML descriptors.

A multiplier descriptor::

    {
      "backend": "complex",            # or "padic" (with "prime")
      "prec": 256,
      "torus": {"rank": 2, "alpha": {"offdiag": [[0, 1, {"abs": 1, "turns": "1/7"}]], "diag": [1, 1]}},
      "periods": [[...], [...]],       # n x m scalar table
      "h_l": [[1, 0], [0, 1]],
      "h_r": [[0, 0], [0, 0]],
      "psi": [1, 1],                   # optional, defaults to ones
      "pairing": [[s00, s01], [s11]]   # upper triangle, or "solve"
    }

Complex scalars are ``{"abs": ..., "turns": ...}`` or plain numbers; p-adic
scalars are ``{"rat": "p/q"}`` or plain rationals.  Numbers may be written
as ``"p/q"`` strings.
"""

from __future__ import annotations

import json
import sys
from fractions import Fraction

from .lattice import AlternatingPairing, CharacterPoint, LatticeHom, SymmetricPairing
from .mirror import FramedTorus
from .nctorus import IncompatibleMorphism, NCTorus, TorusMorphism, make_identity, make_mult_n, make_mumford, make_shift
from .scalar import ComplexField, PAdicField
from .theta import PeriodLattice, ThetaMultiplier, multiplier_solve_pairing, preimage_periods

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "DescriptorError",
    "load_descriptor",
    "make_field",
    "parse_multiplier",
    "parse_framed",
    "parse_morphism",
    "elliptic_multiplier",
    "dumps",
]


class DescriptorError(ValueError):
    """Malformed descriptor; ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


def load_descriptor(path):
    """Parse a ``.json`` or ``.toml`` file; syntax errors carry line numbers."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if str(path).endswith(".toml"):
        try:
            return tomllib.loads(raw.decode("utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise DescriptorError(str(path), f"TOML syntax error: {exc}") from None
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise DescriptorError(str(path), f"JSON syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def make_field(backend="complex", prec=256, prime=None, tol=None):
    if backend == "complex":
        if prec < 64:
            raise DescriptorError("prec", "precision must be at least 64 bits")
        return ComplexField(prec, tol)
    if backend == "padic":
        if prime is None:
            raise DescriptorError("prime", "p-adic backend needs a prime")
        return PAdicField(int(prime), prec)
    raise DescriptorError("backend", f"unknown backend {backend!r}")


def _scalar(field, obj, path):
    try:
        return field.parse(obj)
    except (ValueError, TypeError, KeyError, ZeroDivisionError) as exc:
        raise DescriptorError(path, f"bad scalar literal {obj!r} ({exc})") from None


def _matrix(obj, path, rows=None, cols=None):
    if not isinstance(obj, list) or not all(isinstance(r, list) for r in obj):
        raise DescriptorError(path, "expected a list of rows")
    if rows is not None and len(obj) != rows:
        raise DescriptorError(path, f"expected {rows} rows, got {len(obj)}")
    for i, r in enumerate(obj):
        if cols is not None and len(r) != cols:
            raise DescriptorError(f"{path}[{i}]", f"expected {cols} entries, got {len(r)}")
        for j, x in enumerate(r):
            if isinstance(x, bool) or not isinstance(x, int):
                raise DescriptorError(f"{path}[{i}][{j}]", f"expected an integer, got {x!r}")
    return obj


def _get(d, key, path):
    if not isinstance(d, dict) or key not in d:
        raise DescriptorError(f"{path}.{key}" if path else key, "missing field")
    return d[key]


def parse_alpha(field, obj, rank, path="torus.alpha"):
    if obj is None:
        return AlternatingPairing.trivial(field, rank)
    od = {}
    for t, entry in enumerate(obj.get("offdiag", [])):
        if not isinstance(entry, list) or len(entry) != 3:
            raise DescriptorError(f"{path}.offdiag[{t}]", "expected [i, j, scalar]")
        i, j, v = entry
        od[(int(i), int(j))] = _scalar(field, v, f"{path}.offdiag[{t}][2]")
    diag = tuple(obj.get("diag", (1,) * rank))
    try:
        return AlternatingPairing(field, rank, od, diag)
    except ValueError as exc:
        raise DescriptorError(path, str(exc)) from None


def parse_torus(field, obj, path="torus"):
    rank = _get(obj, "rank", path)
    if isinstance(rank, bool) or not isinstance(rank, int) or rank < 1:
        raise DescriptorError(f"{path}.rank", "expected a positive integer")
    return NCTorus(parse_alpha(field, obj.get("alpha"), rank, f"{path}.alpha"))


def parse_table(field, obj, path, rows=None):
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise DescriptorError(path, "expected a nonempty list of rows")
    if rows is not None and len(obj) != rows:
        raise DescriptorError(path, f"expected {rows} rows, got {len(obj)}")
    width = len(obj[0])
    out = []
    for i, r in enumerate(obj):
        if len(r) != width:
            raise DescriptorError(f"{path}[{i}]", "ragged table")
        out.append([_scalar(field, x, f"{path}[{i}][{j}]") for j, x in enumerate(r)])
    return out


def parse_multiplier(obj, field=None, prefix=""):
    """Build a ``ThetaMultiplier`` from a descriptor dict."""
    if field is None:
        field = make_field(obj.get("backend", "complex"), obj.get("prec", 256), obj.get("prime"))
    p = prefix
    torus = parse_torus(field, _get(obj, "torus", p), f"{p}torus")
    n = torus.rank
    periods = PeriodLattice(torus, parse_table(field, _get(obj, "periods", p), f"{p}periods", rows=n))
    m = periods.rank
    h_l = LatticeHom(_matrix(_get(obj, "h_l", p), f"{p}h_l", n, m), m)
    h_r = LatticeHom(_matrix(_get(obj, "h_r", p), f"{p}h_r", n, m), m)
    psi_obj = obj.get("psi")
    if psi_obj is None:
        psi = [field.one()] * m
    else:
        if not isinstance(psi_obj, list) or len(psi_obj) != m:
            raise DescriptorError(f"{p}psi", f"expected {m} scalars")
        psi = [_scalar(field, x, f"{p}psi[{j}]") for j, x in enumerate(psi_obj)]
    pairing_obj = obj.get("pairing", "solve")
    if pairing_obj == "solve":
        pairing = multiplier_solve_pairing(h_l, h_r, periods, obj.get("branch", "principal"))
    else:
        pairing = parse_pairing(field, pairing_obj, m, f"{p}pairing")
    return ThetaMultiplier(periods, h_l, h_r, psi, pairing)


def parse_pairing(field, obj, m, path):
    if not isinstance(obj, list) or len(obj) != m:
        raise DescriptorError(path, f"expected {m} upper-triangular rows")
    values = {}
    for i, row in enumerate(obj):
        if not isinstance(row, list) or len(row) != m - i:
            raise DescriptorError(f"{path}[{i}]", f"expected {m - i} entries")
        for t, x in enumerate(row):
            values[(i, i + t)] = _scalar(field, x, f"{path}[{i}][{t}]")
    return SymmetricPairing(field, m, values)


def parse_morphism(obj, L1, path="morphism"):
    """Morphism into the torus of ``L1`` and the source periods.

    Kinds: ``identity``, ``shift`` (``point``), ``mult`` (``n``), ``mumford``
    and ``matrix`` (``matrix`` for f, optional ``a_basis``, ``source`` torus).
    Source periods default to the preimage periods of the target ones.
    Returns ``(F, B2, period_map)``.
    """
    field = L1.field
    T = L1.torus
    kind = _get(obj, "kind", path)
    if kind == "identity":
        F = make_identity(T)
    elif kind == "shift":
        pt = _get(obj, "point", path)
        if not isinstance(pt, list) or len(pt) != T.rank:
            raise DescriptorError(f"{path}.point", f"expected {T.rank} scalars")
        F = make_shift(T, CharacterPoint(tuple(_scalar(field, x, f"{path}.point[{i}]") for i, x in enumerate(pt))))
    elif kind == "mult":
        k = _get(obj, "n", path)
        if isinstance(k, bool) or not isinstance(k, int) or k == 0:
            raise DescriptorError(f"{path}.n", "expected a nonzero integer")
        source = NCTorus(T.alpha ** Fraction(1, k * k))
        F = make_mult_n(source, k)
    elif kind == "mumford":
        if T.rank % 2:
            raise DescriptorError(path, "Mumford morphism needs a torus of even rank")
        half = T.rank // 2
        od = {key: v for key, v in T.alpha.offdiag.items() if key[1] < half}
        base = AlternatingPairing(field, half, od, T.alpha.diag[:half]) ** Fraction(1, 2)
        F = make_mumford(base)
    elif kind == "matrix":
        source = parse_torus(field, _get(obj, "source", path), f"{path}.source")
        f = LatticeHom(_matrix(_get(obj, "matrix", path), f"{path}.matrix", source.rank, T.rank), T.rank)
        a_obj = obj.get("a_basis")
        a_basis = None if a_obj is None else [_scalar(field, x, f"{path}.a_basis[{i}]") for i, x in enumerate(a_obj)]
        try:
            F = TorusMorphism(source, T, f, a_basis, label="matrix")
        except IncompatibleMorphism as exc:
            raise DescriptorError(f"{path}.matrix", str(exc)) from None
    else:
        raise DescriptorError(f"{path}.kind", f"unknown morphism kind {kind!r}")
    if not F.target.same_as(T):
        raise DescriptorError(path, "morphism target does not match the multiplier torus")
    src = obj.get("source_periods")
    if src is None:
        B2 = preimage_periods(F, L1.periods)
        M = LatticeHom.identity(L1.periods.rank)
    else:
        B2 = PeriodLattice(F.source, parse_table(field, src, f"{path}.source_periods", rows=F.source.rank))
        pm = obj.get("period_map")
        M = None if pm is None else LatticeHom(_matrix(pm, f"{path}.period_map", L1.periods.rank, B2.rank), B2.rank)
    return F, B2, M


def parse_framed(obj, field=None):
    if field is None:
        field = make_field(obj.get("backend", "complex"), obj.get("prec", 256), obj.get("prime"))
    periods = parse_table(field, _get(obj, "periods", ""), "periods")
    rank = obj.get("rank", len(periods))
    if rank != len(periods):
        raise DescriptorError("rank", "does not match the number of period rows")
    framing = parse_table(field, _get(obj, "framing", ""), "framing", rows=rank)
    if len(framing[0]) != len(periods[0]):
        raise DescriptorError("framing", "needs one column per period")
    return FramedTorus.from_tables(periods, framing)


def elliptic_multiplier(field, q, pairing=None):
    """Commutative rank-1 configuration: periods ``q``, ``h_l = 1``, ``h_r = 0``, ``psi = 1``."""
    T = NCTorus(AlternatingPairing.trivial(field, 1))
    B = PeriodLattice(T, [[q]])
    h_l, h_r = LatticeHom([[1]]), LatticeHom([[0]])
    if pairing is None:
        pairing = multiplier_solve_pairing(h_l, h_r, B)
    elif not isinstance(pairing, SymmetricPairing):
        pairing = SymmetricPairing(field, 1, {(0, 0): pairing})
    return ThetaMultiplier(B, h_l, h_r, [field.one()], pairing)


def dumps(obj):
    """Deterministic JSON text."""
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"
