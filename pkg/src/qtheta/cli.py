"""Command-line driver.

Every subcommand prints a JSON report on stdout (or writes it to ``--out``)
and exits with status 1 when a verdict fails.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys

from .descriptors import (
    DescriptorError,
    dumps,
    elliptic_multiplier,
    load_descriptor,
    make_field,
    parse_framed,
    parse_morphism,
    parse_multiplier,
)
from .lattice import INFINITE, CharacterPoint
from .mirror import (
    NotDiscrete,
    complex_structure_from_tau,
    fibration_data,
    framing_nondegenerate,
    invariant_sublattice,
    mirror_dual,
    monodromy_matrix,
    system_residual,
    tau_from_complex_structure,
    FramedTorus,
)
from .nctorus import morphism_validate
from .scalar import ComplexField, NotASquare
from .theta import (
    InconsistentPairing,
    NotAmple,
    NotComposable,
    PullbackError,
    ampleness_gram,
    certify,
    multiplier_pullback,
    multiplier_validate,
    theta_basis,
    theta_dimension,
    theta_eval,
    theta_mul,
    theta_pullback,
)

PRESETS = {
    "fast": {"prec": 64, "ceiling": "1e-12"},
    "medium": {"prec": 128, "ceiling": "1e-25"},
    "high": {"prec": 256, "ceiling": "1e-50"},
}


class Failed(Exception):
    """A verdict failed; the report is still written."""

    def __init__(self, report):
        super().__init__(report.get("verdict", "failed"))
        self.report = report


def _num(x, digits=6):
    import mpmath

    if x == INFINITE or x == mpmath.inf:
        return "inf"
    return mpmath.nstr(x, digits)


def _field_for(args, desc):
    backend = args.backend or desc.get("backend", "complex")
    prec = args.prec or desc.get("prec", 256)
    prime = args.prime or desc.get("prime")
    return make_field(backend, prec, prime, args.tol)


def _dim(d):
    return "infinite" if d == INFINITE else d


def _multiplier_summary(L):
    report = multiplier_validate(L)
    amp = ampleness_gram(L)
    dim = theta_dimension(L)
    if report.valid:
        verdict = f"valid, {amp.verdict}, dim {_dim(dim)}"
    else:
        worst = max(report.residuals, key=lambda k: report.residuals[k])
        verdict = f"invalid: compatibility basis residual {_num(report.max_residual)} at pair {list(worst)}"
    return report, amp, {
        "verdict": verdict,
        "valid": report.valid,
        "compatibility": report.to_json(),
        "ampleness": amp.to_json(),
        "dimension": _dim(dim),
    }


def _load_multiplier(args, path):
    desc = load_descriptor(path)
    field = _field_for(args, desc)
    return desc, field, parse_multiplier(desc, field)


def cmd_validate(args):
    desc, field, L = _load_multiplier(args, args.config)
    report, _, out = _multiplier_summary(L)
    ok = report.valid
    if "morphism" in desc:
        F, _, _ = parse_morphism(desc["morphism"], L)
        mr = morphism_validate(F)
        out["morphism"] = mr.to_json()
        ok = ok and mr.compatible
    if not ok:
        raise Failed(out)
    return out


def _certificate(series, field, tol):
    if series.formal:
        return {"status": "formal only", "residual": None, "periods_checked": 0}
    worst, checked = certify(series, period_radius=1)
    ceiling = tol if tol is not None else field.tolerance
    status = "certified" if worst <= ceiling else "failed"
    return {"status": status, "residual": _num(worst), "periods_checked": checked, "ceiling": _num(ceiling)}


def _write(outdir, name, obj):
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, name)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj))
    return path


def cmd_theta(args):
    _, field, L = _load_multiplier(args, args.config)
    report = multiplier_validate(L)
    if not report.valid:
        raise Failed({"verdict": "invalid multiplier", "compatibility": report.to_json()})
    radius = args.radius or 10
    basis = theta_basis(L, radius, force=args.force_formal, jobs=args.jobs)
    outdir = args.out or "theta_out"
    files, certs = [], []
    for i, th in enumerate(basis):
        files.append(os.path.basename(_write(outdir, f"theta_{i}.json", th.to_json())))
        cert = _certificate(th, field, args.tol)
        cert["rep"] = list(th.meta["rep"])
        certs.append(cert)
    ok = all(c["status"] != "failed" for c in certs)
    out = {
        "verdict": "certified" if ok else "certification failed",
        "dimension": len(basis),
        "radius": radius,
        "files": files,
        "certificates": certs,
        "formal": any(th.formal for th in basis),
    }
    _write(outdir, "certification.json", out)
    if not ok:
        raise Failed(out)
    return out


def cmd_multiply(args):
    _, field, L1 = _load_multiplier(args, args.first)
    _, _, L2 = _load_multiplier(args, args.second)
    radius = args.radius or 10
    i, j = args.pick
    t1 = theta_basis(L1, radius, jobs=args.jobs)[i]
    t2 = theta_basis(L2, radius, jobs=args.jobs)[j]
    prod = theta_mul(t1, t2)
    cert = _certificate(prod, field, args.tol)
    out = {
        "verdict": cert["status"],
        "multiplier": prod.multiplier.to_json(),
        "dimension": _dim(theta_dimension(prod.multiplier)),
        "interior": prod.interior,
        "certificate": cert,
        "series": prod.to_json(),
    }
    if cert["status"] == "failed":
        raise Failed(out)
    return out


def cmd_pullback(args):
    desc, field, L1 = _load_multiplier(args, args.config)
    if "morphism" not in desc:
        raise DescriptorError("morphism", "missing field")
    F, B2, M = parse_morphism(desc["morphism"], L1)
    L2 = multiplier_pullback(F, L1, B2, M)
    radius = args.radius or 12
    certs = []
    for th in theta_basis(L1, radius, jobs=args.jobs):
        pb = theta_pullback(F, th, L2)
        certs.append(_certificate(pb, field, args.tol))
    _, _, summary = _multiplier_summary(L2)
    out = {
        "verdict": "certified" if all(c["status"] != "failed" for c in certs) else "certification failed",
        "morphism": F.label,
        "pulled_back": L2.to_json(),
        "pulled_back_summary": summary,
        "certificates": certs,
    }
    if out["verdict"] != "certified" or not summary["valid"]:
        raise Failed(out)
    return out


def _mirror_report(F: FramedTorus, tau=None, digits=20):
    partner = mirror_dual(F)
    out = {
        "partner": partner.to_json(),
        "nondegenerate": framing_nondegenerate(F),
    }
    ok = True
    try:
        fib = fibration_data(F)
        out["fibration"] = fib.to_json(digits)
        out["regime"] = "discrete periods"
    except NotDiscrete as exc:
        out["regime"] = "noncommutative-torus regime"
        out["notice"] = str(exc)
        ok = False
    n = F.rank
    mats = [monodromy_matrix(r, s, n) for r in range(1, n + 1) for s in range(1, n + 1)]
    out["monodromy"] = {
        "matrices": mats,
        "invariant_sublattice": [list(v) for v in invariant_sublattice(mats)],
    }
    if tau is not None:
        prec = F.torus.field.prec if isinstance(F.torus.field, ComplexField) else 256
        I = complex_structure_from_tau(tau, prec)
        back = tau_from_complex_structure(I, prec)
        ctx = ComplexField(prec).ctx
        sq = I * I
        sq_res = max(abs(sq[a, b] + (a == b)) for a in range(I.rows) for b in range(I.cols))
        rt = max(abs(back[a, b] - ctx.matrix(tau)[a, b]) for a in range(back.rows) for b in range(back.cols))
        out["complex_structure"] = {
            "I": [[_num(I[a, b], digits) for b in range(I.cols)] for a in range(I.rows)],
            "square_residual": _num(sq_res),
            "round_trip_residual": _num(rt),
            "system_residual": _num(system_residual(tau, I, prec)),
        }
    return out, ok


def _parse_tau(obj):
    import mpmath

    rows = []
    for r in obj:
        rows.append([mpmath.mpc(mpmath.mpf(str(x[0])), mpmath.mpf(str(x[1]))) for x in r])
    return rows


def cmd_mirror(args):
    desc = load_descriptor(args.config)
    field = _field_for(args, desc)
    F = parse_framed(desc, field)
    tau = _parse_tau(desc["tau"]) if "tau" in desc else None
    out, ok = _mirror_report(F, tau)
    out["verdict"] = "ok" if ok else "noncommutative regime"
    if not ok:
        raise Failed(out)
    return out


def _jacobi_oracle(ctx, q, z):
    """``sum p^{h^2} z^h`` with ``p = q^{-1/2}`` through mpmath's theta function."""
    p = ctx.sqrt(q) ** -1
    t = ctx.log(z) / (2j * ctx.pi)
    return ctx.jtheta(3, ctx.pi * t, p)


def cmd_demo_elliptic(args):
    preset = PRESETS[args.preset]
    prec = args.prec or preset["prec"]
    field = ComplexField(prec, args.tol)
    ctx = field.ctx
    q = field.parse(json.loads(args.q) if args.q.strip().startswith("{") else args.q)
    if q.is_unit_norm():
        raise DescriptorError("q", "|q| = 1 is the noncommutative-torus regime; the demo needs |q| != 1")
    if q.log_norm() < 0:
        raise DescriptorError("q", "the demo uses the convention |q| > 1 for convergent series")
    ceiling = ctx.mpf(preset["ceiling"])
    digits = int(ctx.ceil(ctx.mpf(prec) * ctx.log10(2)))
    radius = args.radius or int(ctx.ceil(ctx.sqrt(2 * (digits + 10) * ctx.log(10) / q.log_norm()))) + 1
    L = elliptic_multiplier(field, q)
    th = theta_basis(L, radius)[0]
    qc = q.to_complex()
    closed = max(
        th.coefficient((h,)).relative_distance(field.coefficient(qc ** (-ctx.mpf(h * h) / 2)))
        for h in range(-radius, radius + 1)
    )
    rng = random.Random(args.seed)
    worst, worst_tail = ctx.mpf(0), ctx.mpf(0)
    for _ in range(20):
        u = ctx.mpf(rng.randrange(10**6)) / 10**6
        x = CharacterPoint((field.scalar(1, u),))
        res = theta_eval(th, x)
        ref = _jacobi_oracle(ctx, qc, x.values[0].to_complex())
        worst = max(worst, abs(res.value.value_complex() - ref) / abs(ref))
        worst_tail = max(worst_tail, res.tail_bound)
    cert, _ = certify(th, period_radius=2)
    framing = field.parse(args.framing)
    F = FramedTorus.from_tables([[q]], [[framing]])
    mirror, mirror_ok = _mirror_report(F, digits=min(digits, 30))
    ok = closed <= ceiling and worst <= ceiling and cert <= ceiling and mirror_ok
    out = {
        "verdict": "pass" if ok else "fail",
        "preset": args.preset,
        "prec": prec,
        "radius": radius,
        "q": q.to_json(),
        "pairing": L.pairing.to_json(),
        "multiplier": _multiplier_summary(L)[2]["verdict"],
        "ceiling": _num(ceiling),
        "residuals": {
            "closed_form": _num(closed),
            "jacobi_oracle": _num(worst),
            "tail_bound": _num(worst_tail),
            "functional_equation": _num(cert),
        },
        "mirror": mirror,
    }
    if not ok:
        raise Failed(out)
    return out


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--backend", choices=["complex", "padic"], default=None)
    common.add_argument("--prec", type=int, default=None, help="working precision in bits")
    common.add_argument("--prime", type=int, default=None, help="prime for the p-adic backend")
    common.add_argument("--radius", type=int, default=None, help="truncation radius (sup norm)")
    common.add_argument("--tol", type=float, default=None, help="tolerance override")
    common.add_argument("--jobs", type=int, default=1, help="worker threads for coset walks")
    common.add_argument("--out", default=None, help="output path (directory for theta)")
    common.add_argument("--force-formal", action="store_true", help="emit formal series for non-ample multipliers")

    parser = argparse.ArgumentParser(prog="qtheta", description="Quantized theta functions on noncommutative tori.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="check a multiplier (and optional morphism)")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("theta", parents=[common], help="theta basis, one file per element")
    p.add_argument("config")
    p.set_defaults(func=cmd_theta)

    p = sub.add_parser("multiply", parents=[common], help="product of two basis elements")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("--pick", type=int, nargs=2, default=(0, 0), metavar=("I", "J"))
    p.set_defaults(func=cmd_multiply)

    p = sub.add_parser("pullback", parents=[common], help="pull a multiplier and its basis back along a morphism")
    p.add_argument("config")
    p.set_defaults(func=cmd_pullback)

    p = sub.add_parser("mirror", parents=[common], help="mirror partner, fibration data, complex structure")
    p.add_argument("config")
    p.set_defaults(func=cmd_mirror)

    p = sub.add_parser("demo-elliptic", parents=[common], help="end-to-end elliptic curve demo")
    p.add_argument("--q", default="4")
    p.add_argument("--framing", default="2")
    p.add_argument("--preset", choices=sorted(PRESETS), default="high")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_demo_elliptic)
    return parser


def _emit(args, report):
    text = dumps(report)
    if args.out and args.command != "theta":
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    sys.stdout.write(text)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        report = args.func(args)
    except Failed as exc:
        _emit(args, exc.report)
        return 1
    except (DescriptorError, InconsistentPairing, NotASquare, NotAmple, NotComposable, PullbackError, NotDiscrete, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    _emit(args, report)
    return 0


if __name__ == "__main__":
    sys.exit(main())
