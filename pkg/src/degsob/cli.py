"""Command-line experiments writing JSON verdicts, CSV curves and SVG plots.

Every subcommand writes ``<name>.verdict.json`` (and ``<name>.curve.csv``
when it produces a curve) into ``--out`` and exits 0 exactly when the
verdict matches the expected outcome.  ``degsob run CONFIG`` runs every
section of an INI file as one experiment.
"""
import argparse
import configparser
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import counterexamples as cx
from .cover import coverage_grid, euclidean, finite_overlap_cover, power_euclidean
from .errors import DegsobError, DivergenceVerdict, ParameterError
from .fields import (Ball, BoxDomain, cone_bump, constant_weight, diag_power_matrix,
                     exp_inverse_weight, identity_matrix, polynomial_family, power_weight,
                     sine_mode, check_ellipticity)
from .probes import (compat_ratio, extract_subsequence, poincare_vanishing_probe,
                     sobolev_ratio, sobolev_sweep)
from .weightclass import (ap_constant, balance_check, check_admissible, default_family,
                          doubling_constant, q_search)

SCHEMA = 1
log = logging.getLogger("degsob")


# ---------------------------------------------------------------------------
# registries
# ---------------------------------------------------------------------------

def make_weight(spec, n):
    """``const``/``lebesgue``, ``sqrt``, ``power:E``, ``exp-inverse``."""
    spec = spec.strip()
    if spec in ("const", "lebesgue", "1"):
        return constant_weight(1.0, n)
    if spec == "sqrt":
        return power_weight(0.5, n)
    if spec.startswith("power:"):
        return power_weight(float(spec.split(":", 1)[1]), n)
    if spec == "exp-inverse":
        return exp_inverse_weight(n)
    raise ParameterError(f"unknown weight {spec!r}")


def make_matrix(spec, n):
    """``identity`` or ``diag-power:P`` (``Diag[x1^P, 1, ...]``)."""
    if spec == "identity":
        return identity_matrix(n)
    if spec.startswith("diag-power:"):
        return diag_power_matrix(n, float(spec.split(":", 1)[1]), 0)
    raise ParameterError(f"unknown matrix {spec!r}")


def make_family(spec, n):
    if spec == "polynomials":
        return polynomial_family(n, 2)
    if spec == "sines":
        return [sine_mode(k, n) for k in range(1, 6)]
    raise ParameterError(f"unknown test family {spec!r}")


def floats(text):
    return [float(t) for t in str(text).split(",") if t.strip()]


def ints(text):
    return [int(float(t)) for t in str(text).split(",") if t.strip()]


def box(text, n):
    lo, hi = floats(text)
    return BoxDomain((lo,) * n, (hi,) * n)


# ---------------------------------------------------------------------------
# outputs
# ---------------------------------------------------------------------------

def clean(obj):
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(obj, BoxDomain):
        return [list(obj.lower), list(obj.upper)]
    return obj


@dataclass
class Outcome:
    payload: dict
    passed: bool
    curve: tuple = None          # (parameter name, xs, ys)
    extra_curves: dict = field(default_factory=dict)


def write_csv(path, name, xs, ys):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow([name, "value"])
        for x, y in zip(xs, ys):
            wr.writerow([repr(float(x)), repr(float(y))])


def write_svg(path, xs, ys, title="", width=480, height=320, pad=48):
    """Log-log polyline of a positive curve (linear axes if any value is not positive)."""
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    ok = np.isfinite(xs) & np.isfinite(ys)
    xs, ys = xs[ok], ys[ok]
    logs = len(xs) > 0 and np.all(xs > 0) and np.all(ys > 0)
    X, Y = (np.log10(xs), np.log10(ys)) if logs else (xs, ys)

    def scale(v, a, b, lo, hi):
        return lo + (hi - lo) * (0.5 if b == a else (v - a) / (b - a))

    pts = []
    if len(X):
        x0, x1, y0, y1 = X.min(), X.max(), Y.min(), Y.max()
        pts = [(scale(a, x0, x1, pad, width - pad), scale(b, y0, y1, height - pad, pad))
               for a, b in zip(X, Y)]
    poly = " ".join(f"{a:.2f},{b:.2f}" for a, b in pts)
    dots = "".join(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="3"/>' for a, b in pts)
    with open(path, "w") as fh:
        fh.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">'
                 f'<rect width="100%" height="100%" fill="white"/>'
                 f'<text x="{pad}" y="24" font-size="14">{title}{" (log-log)" if logs else ""}</text>'
                 f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
                 f'fill="none" stroke="#999"/>'
                 f'<polyline points="{poly}" fill="none" stroke="#1f77b4" stroke-width="2"/>'
                 f'<g fill="#1f77b4">{dots}</g></svg>\n')


def emit(out_dir, name, command, config, outcome, svg):
    os.makedirs(out_dir, exist_ok=True)
    doc = {"schema": SCHEMA, "command": command, "name": name, "config": config,
           "passed": bool(outcome.passed)}
    doc.update(outcome.payload)
    path = os.path.join(out_dir, f"{name}.verdict.json")
    with open(path, "w") as fh:
        fh.write(json.dumps(clean(doc), sort_keys=True, indent=2) + "\n")
    if outcome.curve is not None:
        pname, xs, ys = outcome.curve
        write_csv(os.path.join(out_dir, f"{name}.curve.csv"), pname, xs, ys)
        if svg:
            write_svg(os.path.join(out_dir, f"{name}.svg"), xs, ys, name)
    for suffix, (pname, xs, ys) in sorted(outcome.extra_curves.items()):
        write_csv(os.path.join(out_dir, f"{name}.{suffix}.curve.csv"), pname, xs, ys)
    return path


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def expect_ok(args, passed):
    """``--expect pass`` (default) or ``fail``."""
    return passed if args.expect == "pass" else not passed


def cmd_ellipticity(a):
    n = a.n
    Q = make_matrix(a.matrix, n)
    w, tau = make_weight(a.w, n), make_weight(a.tau, n)
    pts = np.random.default_rng(a.seed).random((a.samples, n))
    cert = check_ellipticity(Q, w, tau, a.p, pts)
    return Outcome({"certificate": cert.to_dict()}, expect_ok(a, cert.passed))


def cmd_cover(a):
    n = a.n
    K = box(a.K, n)
    space = euclidean(BoxDomain.unit(n), n) if a.alpha == 1 else power_euclidean(a.alpha, BoxDomain.unit(n), n)
    covers = []
    for r in a.radii:
        cv = finite_overlap_cover(space, K, r, a.c0, a.grid)
        covers.append({"r": r, "N": cv.count, "P": cv.overlap,
                       "covers_grid": cv.covers(coverage_grid(K, a.grid))})
    Ps = [c["P"] for c in covers]
    ok = all(c["covers_grid"] for c in covers) and max(Ps) <= a.max_overlap and max(Ps) <= 2 * min(Ps)
    return Outcome({"covers": covers, "max_overlap": a.max_overlap},
                   expect_ok(a, ok), ("r", a.radii, Ps))


def cmd_doubling(a):
    dom = BoxDomain.unit(a.n)
    fam = default_family(dom, a.mode, a.dilation, a.level)
    est = doubling_constant(make_weight(a.weight, a.n), fam)
    return Outcome({"doubling_constant": est.to_dict()}, expect_ok(a, est.passed),
                   ("level", est.levels, est.per_level))


def cmd_ap(a):
    est = ap_constant(make_weight(a.weight, a.n), a.p, default_family(BoxDomain.unit(a.n)))
    return Outcome({"ap_constant": est.to_dict()}, expect_ok(a, est.passed),
                   ("level", est.levels, est.per_level))


def cmd_balance(a):
    w, tau = make_weight(a.w, a.n), make_weight(a.tau, a.n)
    dom = BoxDomain.unit(a.n)
    if a.q is None:
        q, est, info = q_search(w, tau, a.p, domain=dom, k_max=a.k_max, depth=a.depth)
        if est is None:
            return Outcome({"q": None, "q_search": info}, expect_ok(a, False))
        return Outcome({"q": q, "q_search": info, "balance_constant": est.to_dict()},
                       expect_ok(a, True), ("depth", est.levels, est.per_level))
    est = balance_check(w, tau, a.p, a.q, domain=dom, depth=a.depth)
    return Outcome({"balance_constant": est.to_dict()}, expect_ok(a, est.passed),
                   ("depth", est.levels, est.per_level))


def verdict_ok(a, verdict):
    return verdict in a.expect_verdict.split(",")


def cmd_poincare(a):
    n = a.n
    rep = poincare_vanishing_probe(make_family(a.family, n), box(a.K, n), a.radii,
                                   make_matrix(a.matrix, n), p=a.p, c0=a.c0,
                                   family_name=a.family)
    return Outcome({"report": rep.to_dict()}, verdict_ok(a, rep.verdict), ("r", rep.params, rep.values))


def cmd_compat(a):
    n = a.n
    rep = compat_ratio(make_weight(a.v, n), radii=a.radii, K=box(a.K, n), c0=a.c0, p=a.p)
    return Outcome({"report": rep.to_dict()}, verdict_ok(a, rep.verdict), ("r", rep.params, rep.values))


def cmd_sobolev(a):
    n = a.n
    c = np.full(n, 0.5)
    B = Ball(c, a.radius)
    Q = make_matrix(a.matrix, n)
    fields = [cone_bump(c, k) for k in a.ks]
    rep = sobolev_sweep(fields, a.ks, lambda f: sobolev_ratio(f, B, Q, p=a.p, sigma=a.sigma),
                        family="cone bumps")
    return Outcome({"report": rep.to_dict(), "sigma": a.sigma},
                   verdict_ok(a, rep.verdict), ("k", rep.params, rep.values))


def cmd_global_sobolev(a):
    ex = cx.build_example_b(cx.ExampleBParams(p=a.p, indices=tuple(a.indices), dim=a.n))
    rep = cx.lifted_sobolev_growth(ex, a.sigma)
    ok = verdict_ok(a, rep.verdict) and rep.extra["growth"] >= a.min_growth
    return Outcome({"report": rep.to_dict(), "min_growth": a.min_growth}, ok,
                   ("j", rep.params, rep.values))


def cmd_subsequence(a):
    n = a.n
    E = box(a.K, n)
    space = euclidean(BoxDomain.unit(n), n)
    cover = finite_overlap_cover(space, E, a.r, a.c0)
    fam = [sine_mode(k, n) for k in range(1, a.modes + 1)]
    tr = extract_subsequence(fam, E, cover, p=a.p, eps=a.eps)
    ok = tr.passed and tr.ii_bound <= a.eps ** a.p
    return Outcome({"trace": tr.to_dict()}, expect_ok(a, ok))


def cmd_example_a(a):
    P = cx.ExampleAParams(n=a.n, p=a.p, q=a.q, beta=a.beta, indices=tuple(a.indices))
    ex = cx.build_example_a(P)
    jumps = {str(k): pr.seam_jumps() for k, pr in ex.profiles.items()}
    ca = cx.verify_a_cauchy(ex)
    dv = cx.verify_a_divergence(ex, halvings=a.halvings)
    seams_ok = max(max(j) for j in jumps.values()) <= 1e-10
    div_ok = dv.extra["divergence_verdict_raised"] and (
        abs(dv.extra["fitted_exponent"] - dv.extra["expected_exponent"]) <= 0.02)
    cauchy_ok = (ca.extra["monotone_from"] is not None
                 and ca.extra["final_over_initial"] < a.decay_target)
    return Outcome({"cauchy": ca.to_dict(), "divergence": dv.to_dict(), "seam_jumps": jumps,
                    "checks": {"seams": seams_ok, "divergence": div_ok, "cauchy_decay": cauchy_ok}},
                   expect_ok(a, seams_ok and div_ok and cauchy_ok),
                   ("j", ca.params, ca.values),
                   {"divergence": ("eps", dv.params, dv.values)})


def cmd_example_b(a):
    ex = cx.build_example_b(cx.ExampleBParams(p=a.p, indices=tuple(a.indices), dim=1))
    jumps = {str(k): pr.seam_jumps() for k, pr in ex.profiles.items()}
    b = cx.verify_b_bounds(ex)
    g = cx.verify_b_gradient_bound(ex)
    nc = cx.verify_b_noncompact(a.p)
    seams_ok = max(max(j) for j in jumps.values()) <= 1e-10
    ok = seams_ok and b.extra["passed"] and g.extra["passed"] and nc.extra["passed"]
    return Outcome({"bounds": b.to_dict(), "gradient": g.to_dict(), "noncompact": nc.to_dict(),
                    "lower_limit": b.extra["tail_min"], "upper": max(b.values),
                    "gradient_sup": g.extra["sup"], "seam_jumps": jumps},
                   expect_ok(a, ok), ("j", b.params, b.values),
                   {"gradient": ("j", g.params, g.values)})


def cmd_admissible(a):
    n = a.n
    rep = check_admissible(make_weight(a.w, n), make_weight(a.tau, n), a.p, BoxDomain.unit(n),
                           k_max=a.k_max, depth=a.depth)
    return Outcome({"admissibility": rep.to_dict()}, expect_ok(a, rep.admissible))


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

COMMANDS = {
    "ellipticity": (cmd_ellipticity, "degenerate ellipticity w|xi|^p <= |sqrt(Q) xi|^p <= tau|xi|^p at sampled points"),
    "cover": (cmd_cover, "finite-overlap ball cover of a compact set with radius-independent overlap P"),
    "doubling": (cmd_doubling, "doubling constant of a weight measure tau(2B)/tau(B)"),
    "ap": (cmd_ap, "Muckenhoupt A_p constant of a weight"),
    "balance": (cmd_balance, "balance condition between w and tau for exponents p < q (q-search when --q is omitted)"),
    "poincare": (cmd_poincare, "local Poincare inequality with vanishing constant as r -> 0"),
    "sobolev": (cmd_sobolev, "local Sobolev inequality with gain sigma on a ball"),
    "global-sobolev": (cmd_global_sobolev, "failure of a global Sobolev inequality on the lifted tent family"),
    "compat": (cmd_compat, "compatibility of v and mu: r^p v(B(x,r)) / mu(B(x,c0 r)) -> 0"),
    "subsequence": (cmd_subsequence, "L^p-convergent subsequence extraction from ball averages on a finite-overlap cover"),
    "example-a": (cmd_example_a, "QH^{1,p}_0 not embedded in L^q: u = (x1^-beta - 2) psi with Q = Diag[x1^2, 1, ...]"),
    "example-b": (cmd_example_b, "bounded but non-compact tent family v_j for the weight q(t) = t^{2p}"),
    "admissible": (cmd_admissible, "p-admissible pair: doubling, A_p and balance for some q > p"),
}


def build_parser():
    ap = argparse.ArgumentParser(prog="degsob", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name):
        func, text = COMMANDS[name]
        sp = sub.add_parser(name, help=text, description=text)
        sp.set_defaults(func=func)
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--name", default=None, help="report basename (default: the command)")
        sp.add_argument("--svg", action="store_true", help="also render the curve as SVG")
        return sp

    def expect(sp, default="pass"):
        sp.add_argument("--expect", choices=("pass", "fail"), default=default)

    def expect_verdict(sp, default):
        sp.add_argument("--expect-verdict", default=default,
                        help="comma-separated acceptable verdicts")

    sp = add("ellipticity")
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--matrix", default="identity")
    sp.add_argument("--w", default="const")
    sp.add_argument("--tau", default="const")
    sp.add_argument("--p", type=float, default=2.0)
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    expect(sp)

    sp = add("cover")
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--K", default="0.25,0.75", help="lo,hi of the cube K")
    sp.add_argument("--radii", type=floats, default=[0.05, 0.025])
    sp.add_argument("--c0", type=float, default=2.0)
    sp.add_argument("--alpha", type=float, default=1.0, help="rho = |x - y|^alpha")
    sp.add_argument("--grid", type=int, default=200)
    sp.add_argument("--max-overlap", type=int, default=25)
    expect(sp)

    sp = add("doubling")
    sp.add_argument("--weight", default="const")
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--mode", choices=("intersect", "interior"), default="interior")
    sp.add_argument("--dilation", type=float, default=2.0)
    sp.add_argument("--level", type=int, default=None)
    expect(sp)

    sp = add("ap")
    sp.add_argument("--weight", default="const")
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--p", type=float, default=2.0)
    expect(sp)

    sp = add("balance")
    sp.add_argument("--w", default="lebesgue")
    sp.add_argument("--tau", default="lebesgue")
    sp.add_argument("--n", type=int, default=3)
    sp.add_argument("--p", type=float, default=2.0)
    sp.add_argument("--q", type=float, default=None)
    sp.add_argument("--depth", type=int, default=10)
    sp.add_argument("--k-max", type=int, default=80)
    expect(sp)

    sp = add("poincare")
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--family", default="polynomials")
    sp.add_argument("--matrix", default="identity")
    sp.add_argument("--K", default="0.4,0.6")
    sp.add_argument("--radii", type=floats, default=[0.2, 0.1, 0.05, 0.025, 0.0125, 0.00625])
    sp.add_argument("--p", type=float, default=2.0)
    sp.add_argument("--c0", type=float, default=1.0)
    expect_verdict(sp, "vanishing")

    sp = add("compat")
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--v", default="const")
    sp.add_argument("--K", default="0.25,0.75")
    sp.add_argument("--radii", type=floats, default=[0.2, 0.1, 0.05, 0.025, 0.0125])
    sp.add_argument("--p", type=float, default=2.0)
    sp.add_argument("--c0", type=float, default=1.0)
    expect_verdict(sp, "vanishing")

    sp = add("sobolev")
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--matrix", default="identity")
    sp.add_argument("--radius", type=float, default=0.25)
    sp.add_argument("--ks", type=ints, default=[4, 8, 16, 32])
    sp.add_argument("--p", type=float, default=2.0)
    sp.add_argument("--sigma", type=float, default=1.5)
    expect_verdict(sp, "bounded,vanishing")

    sp = add("global-sobolev")
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--p", type=float, default=2.0)
    sp.add_argument("--sigma", type=float, default=1.5)
    sp.add_argument("--indices", type=ints, default=[10, 30, 100, 300, 1000])
    sp.add_argument("--min-growth", type=float, default=10.0)
    expect_verdict(sp, "diverging")

    sp = add("subsequence")
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--K", default="0.25,0.75")
    sp.add_argument("--r", type=float, default=0.05)
    sp.add_argument("--c0", type=float, default=2.0)
    sp.add_argument("--modes", type=int, default=20)
    sp.add_argument("--p", type=float, default=2.0)
    sp.add_argument("--eps", type=float, default=0.1)
    expect(sp)

    sp = add("example-a")
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--p", type=float, default=2.0)
    sp.add_argument("--q", type=float, default=4.0)
    sp.add_argument("--beta", type=float, default=0.3)
    sp.add_argument("--indices", type=ints, default=[21, 30, 50, 100, 200, 500, 1000])
    sp.add_argument("--halvings", type=int, default=60)
    sp.add_argument("--decay-target", type=float, default=1e-3)
    expect(sp)

    sp = add("example-b")
    sp.add_argument("--p", type=float, default=2.0)
    sp.add_argument("--indices", type=ints, default=[10, 20, 50, 100, 200, 500, 1000])
    expect(sp)

    sp = add("admissible")
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--w", default="const")
    sp.add_argument("--tau", default="const")
    sp.add_argument("--p", type=float, default=2.0)
    sp.add_argument("--depth", type=int, default=10)
    sp.add_argument("--k-max", type=int, default=80)
    expect(sp)

    sp = sub.add_parser("run", help="run every section of an INI config as an experiment",
                        description="Each [section] names an experiment; its 'command' key "
                                    "selects the subcommand and other keys become --flags.")
    sp.add_argument("config")
    sp.add_argument("--out", default=None, help="override every section's output directory")
    return ap


def config_argv(section):
    """Turn an INI section into subcommand argv."""
    items = dict(section)
    if "command" not in items:
        raise ParameterError(f"section [{section.name}] has no 'command' key")
    argv = [items.pop("command")]
    for key, val in items.items():
        flag = "--" + key.replace("_", "-")
        if val.lower() in ("true", "yes", "on"):
            argv.append(flag)
        elif val.lower() in ("false", "no", "off"):
            continue
        else:
            argv += [flag, val]
    if "name" not in items:
        argv += ["--name", section.name]
    return argv


def run_one(args, parser):
    name = args.name or args.command
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out", "verbose")}
    try:
        outcome = args.func(args)
    except ParameterError as e:
        parser.error(f"{args.command}: {e}")
    except DivergenceVerdict as e:
        outcome = Outcome({"divergence": {"message": str(e), "locus": str(e.locus),
                                          "exponent": e.exponent, "threshold": e.threshold}}, False)
    except DegsobError as e:
        outcome = Outcome({"error": {"type": type(e).__name__, "message": str(e)}}, False)
    path = emit(args.out, name, args.command, config, outcome, args.svg)
    log.info("%s: %s -> %s", name, "ok" if outcome.passed else "MISMATCH", path)
    print(f"{name}: {'ok' if outcome.passed else 'MISMATCH'} ({path})")
    return 0 if outcome.passed else 1


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command != "run":
        return run_one(args, parser)
    cp = configparser.ConfigParser()
    if not cp.read(args.config):
        parser.error(f"cannot read config {args.config}")
    status = 0
    for sec in cp.sections():
        sub_argv = config_argv(cp[sec])
        if args.out is not None:
            sub_argv += ["--out", args.out]
        sub_args = parser.parse_args(sub_argv)
        status = max(status, run_one(sub_args, parser))
    return status


if __name__ == "__main__":
    sys.exit(main())
