"""Command-line interface: ``ckt-prolong <command> [options]``."""

import argparse
import sys

from . import checks, flatpoly
from .coeff import RatFunc
from .gradients import Finding, bochner_report, build_gradient, verify_gradient_system
from .prolong import (ClosureError, classified_tree, close_system, dimension_polynomial,
                      elimination_steps, prolongation_dimension)
from .report import Report, finding, latex_text, verbatim
from .symmetry import OPERATORS, solve_symmetry
from .tensor import CURVED, FLAT, to_latex, to_text
from .young import BundleLabel, decompose, dimension_check, fiber_dimension

EXIT_OK, EXIT_REFUTED, EXIT_USAGE, EXIT_CLOSURE = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _n_arg(text):
    if text == "symbolic":
        return None
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("--n takes an integer or 'symbolic'")
    if v < 1:
        raise argparse.ArgumentTypeError("--n must be positive")
    return v


def _bundle(text):
    try:
        return BundleLabel.parse(text)
    except ValueError:
        raise UsageError("cannot parse bundle label %r: %s" % (text, BundleLabel.GRAMMAR))


def _need_n(args, lo=3):
    if args.n is None or args.n < lo:
        raise UsageError("this command needs --n with an integer of at least %d" % lo)
    return args.n


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_decompose(args):
    b = _bundle(args.bundle)
    parts = decompose(b)
    data = {"bundle": b.ascii(), "summands": [p.ascii() for p in parts], "count": len(parts)}
    text = "T* ⊗ %s = %s" % (b.ascii(), " ⊕ ".join(p.ascii() for p in parts))
    findings = [Finding("T*⊗%s has %d irreducible summands" % (b.ascii(), len(parts)), "derived",
                        "cotangent product decomposition", {"summands": data["summands"]})]
    if args.n is not None:
        lhs, rhs = dimension_check(b, args.n)
        data["n"] = args.n
        data["dimensions"] = {p.ascii(): fiber_dimension(p, args.n) for p in parts}
        text += "\ndimensions at n=%d: %d = %s" % (
            args.n, lhs, " + ".join(str(data["dimensions"][p.ascii()]) for p in parts))
        findings.append(finding("n·dim %s = sum of summand dimensions at n=%d" % (b.ascii(), args.n),
                                lhs == rhs, "dimension additivity", {"lhs": lhs, "rhs": rhs}))
    latex = "\\[ T^*M\\otimes %s \\cong %s \\]" % (b.latex(), " \\oplus ".join(p.latex() for p in parts))
    return findings, data, text, latex


def cmd_dims(args):
    findings, data, lines, tex = [], {}, [], []
    for label in args.bundles:
        b = _bundle(label)
        if args.n is None:
            poly = dimension_polynomial(b)
            data[b.ascii()] = poly.short()
            lines.append("dim %s = %s" % (b.ascii(), poly.short()))
            tex.append("\\dim %s = %s" % (b.latex(), poly.latex()))
        else:
            d = fiber_dimension(b, args.n)
            data[b.ascii()] = d
            lines.append("dim %s = %d at n=%d" % (b.ascii(), d, args.n))
            tex.append("\\dim %s = %d" % (b.latex(), d))
    if args.rank:
        js = close_system(args.rank, args.mode or FLAT)
        jets = {}
        total = None
        for j in js.jets:
            d = dimension_polynomial(j.bundle) if args.n is None else fiber_dimension(j.bundle, args.n)
            jets[j.name] = {"bundle": j.bundle.ascii(), "dimension": d}
            total = d if total is None else total + d
        data["prolongation"] = {"rank": args.rank, "jets": jets, "total": total}
        shown = total.short() if isinstance(total, RatFunc) else str(total)
        lines.append("rank-%d prolongation: %s = %s" % (
            args.rank, " + ".join(j.bundle.ascii() for j in js.jets), shown))
        tex.append("\\dim \\mathcal{P}_{%d} = %s" % (
            args.rank, total.latex() if isinstance(total, RatFunc) else total))
        findings.append(Finding("rank-%d prolongation dimension = %s" % (args.rank, shown), "derived",
                                "prolongation dimension", {"total": shown}))
    if not args.bundles and not args.rank:
        raise UsageError("dims needs bundle labels or --rank")
    latex = "\\begin{gather*}\n" + " \\\\\n".join(tex) + "\n\\end{gather*}"
    return findings, data, "\n".join(lines), latex


def cmd_tree(args):
    js = close_system(args.rank, args.mode or FLAT)
    root = classified_tree(js)
    findings = []
    nodes = list(root.walk())
    un = [n.bundle.ascii() for n in nodes if n.classification == "unclassified"]
    findings.append(finding("every node of the rank-%d derivative tree is classified" % args.rank,
                            not un, "derivative tree", {"unclassified": un}))
    text = root.to_text()
    return findings, {"tree": root.to_json()}, text, verbatim(text)


def cmd_gradient(args):
    src, tgt = _bundle(args.source), _bundle(args.target)
    if tgt not in decompose(src):
        raise UsageError("%s is not a summand of T*⊗%s" % (tgt.ascii(), src.ascii()))
    op = build_gradient(src, tgt)
    findings = [Finding("%s constant %s = %s" % (op.label, k, v.short()), "derived",
                        "gradient constants", {k: v.short()}) for k, v in op.constants.items()]
    if args.check:
        findings.extend(verify_gradient_system(src))
    data = op.to_json()
    data["constants"] = {k: v.short() for k, v in op.constants.items()}
    return findings, data, op.to_text(), "\\[ %s \\]" % op.to_latex()


def cmd_bochner(args):
    mode = args.mode or CURVED
    findings, parts = bochner_report(mode)
    data = {k: to_text(v) for k, v in parts.items()}
    text = "\n".join("%s: %s" % (k, data[k]) for k in sorted(data))
    latex = "\n".join("\\paragraph{%s} $%s$" % (latex_text(k), to_latex(v))
                      for k, v in sorted(parts.items()))
    return findings, data, text, latex


def cmd_close(args):
    js = close_system(args.rank, args.mode or FLAT)
    findings = [Finding("rank-%d %s system closes with %d jets" % (js.rank, js.mode, len(js.jets)),
                        "verified" if js.closed else "refuted", "closure",
                        {"jets": [j.name for j in js.jets]})]
    if js.rank == 2 and js.mode == FLAT and args.steps:
        findings.extend(elimination_steps(js))
    if args.n is not None:
        findings.append(Finding("prolongation dimension at n=%d is %d"
                                % (args.n, prolongation_dimension(js, args.n)),
                                "derived", "prolongation dimension"))
    return findings, js.to_json(), js.to_text(), js.to_latex()


def cmd_solve_symmetry(args):
    rep = solve_symmetry(args.op, args.order, args.mode, args.n)
    data = rep.to_json()
    data["findings"] = len(rep.findings)
    return rep.findings, data, rep.to_text(), rep.to_latex()


def cmd_oracle(args):
    nval = _need_n(args)
    findings, lines = [], []
    data = {"rank": args.rank, "n": nval, "seed": args.seed}
    if args.rank:
        K = flatpoly.kernel(args.rank, nval)
        dims = K.dimensions()
        data["kernel"] = {"dimension": K.dimension, "per_degree": dims}
        lines.append("rank-%d kernel at n=%d: dimension %d, per degree %s"
                     % (args.rank, nval, K.dimension, dims))
        js = close_system(args.rank, FLAT)
        pd = prolongation_dimension(js, nval)
        findings.append(finding("kernel dimension %d equals the prolongation dimension %d"
                                % (K.dimension, pd), K.dimension == pd, "oracle dimension"))
        res = flatpoly.verify_rules(js, nval, K)
        data["rules"] = {name: {"ok": ok, "failing": len(bad)} for name, ok, bad in res}
        for name, ok, bad in res:
            findings.append(finding("rule ∇%s vanishes on the kernel at n=%d" % (name, nval), ok,
                                    "oracle equivalence", {"failing": len(bad)}))
        r, total = flatpoly.jet_map_rank(js, nval, K)
        findings.append(finding("jets at a point determine the kernel (rank %d of %d)" % (r, total),
                                r == K.dimension, "oracle dimension"))
    if args.fit:
        order = 1 if args.fit == "order1" else 2
        fit = flatpoly.fit_symmetry_coefficients(args.op, order, nval, seed=args.seed)
        data["fit"] = fit.to_json()
        lines.append("%s order-%d fit at n=%d: %s %s" % (
            args.op, order, nval, fit.status,
            ", ".join("%s = %s" % kv for kv in sorted(fit.values.items()))))
        findings.append(finding("oracle fit of %s order %d at n=%d is unique" % (args.op, order, nval),
                                fit.status == "unique", "oracle fit", fit.to_json(), good="derived"))
        if fit.checks:
            findings.append(finding("fitted coefficients give zero residual on %d fresh samples"
                                    % len(fit.checks), all(c == "zero" for c in fit.checks),
                                    "oracle fit"))
    if not args.rank and not args.fit:
        raise UsageError("oracle needs --rank and/or --fit")
    text = "\n".join(lines)
    return findings, data, text, verbatim(text)


def cmd_verify_all(args):
    only = set(args.criteria) if args.criteria else None
    rows = checks.run_all(seed=args.seed, only=only)
    findings, lines, data = [], [], {}
    for k, title, ok, fs in rows:
        lines.append("criterion %2d %-36s %s" % (k, title, "pass" if ok else "FAIL"))
        data[str(k)] = {"title": title, "pass": ok}
        for f in fs:
            findings.append(Finding("[%d] %s" % (k, f.statement), f.status, f.ref, f.payload))
    text = "\n".join(lines)
    return findings, data, text, verbatim(text)


COMMANDS = {
    "decompose": cmd_decompose, "dims": cmd_dims, "tree": cmd_tree, "gradient": cmd_gradient,
    "bochner": cmd_bochner, "close": cmd_close, "solve-symmetry": cmd_solve_symmetry,
    "oracle": cmd_oracle, "verify-all": cmd_verify_all,
}


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _globals(p, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--format", choices=("text", "json", "latex"), default=d("text"))
    p.add_argument("--mode", choices=(FLAT, CURVED), default=d(None))
    p.add_argument("--n", type=_n_arg, default=d(None), metavar="INT|symbolic")
    p.add_argument("--out", default=d(None), metavar="PATH")
    p.add_argument("--seed", type=int, default=d(flatpoly.SEED))


def build_parser():
    p = argparse.ArgumentParser(prog="ckt-prolong",
                                description="Prolongation of conformal Killing tensor equations.")
    _globals(p, False)
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def add(name, help):
        s = sub.add_parser(name, help=help)
        _globals(s, True)
        return s

    s = add("decompose", "irreducible summands of T*⊗bundle")
    s.add_argument("bundle")
    s = add("dims", "fiber dimensions of bundles or of a prolonged system")
    s.add_argument("bundles", nargs="*")
    s.add_argument("--rank", type=int, choices=(1, 2))
    s = add("tree", "classified derivative tree of the rank-1 or rank-2 system")
    s.add_argument("--rank", type=int, choices=(1, 2), default=2)
    s = add("gradient", "generalized gradient between two bundles")
    s.add_argument("source")
    s.add_argument("target")
    s.add_argument("--check", action="store_true", help="verify the whole gradient system")
    add("bochner", "Bochner formulas on B[2]o")
    s = add("close", "close the prolonged system")
    s.add_argument("--rank", type=int, choices=(1, 2), default=1)
    s.add_argument("--steps", action="store_true", help="check the rank-2 elimination steps")
    s = add("solve-symmetry", "solve for symmetry operators")
    s.add_argument("--op", choices=OPERATORS, default="laplacian")
    s.add_argument("--order", type=int, choices=(0, 1, 2), default=1)
    s = add("oracle", "flat polynomial oracle")
    s.add_argument("--rank", type=int, choices=(1, 2))
    s.add_argument("--fit", choices=("order1", "order2"))
    s.add_argument("--op", choices=OPERATORS, default="laplacian")
    s = add("verify-all", "run every acceptance check")
    s.add_argument("--criteria", type=int, nargs="*", choices=sorted(checks.TITLES))
    return p


def run(argv):
    """Run a command line; returns (exit code, Report or None, rendered
    output or error message, parsed arguments)."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return (EXIT_USAGE if exc.code else EXIT_OK), None, "", None
    try:
        findings, data, text, latex = COMMANDS[args.command](args)
    except UsageError as exc:
        return EXIT_USAGE, None, "error: %s\n" % exc, args
    except ClosureError as exc:
        return EXIT_CLOSURE, None, "closure failure: %s\n" % exc, args
    except ValueError as exc:
        return EXIT_USAGE, None, "error: %s\n" % exc, args
    mode = args.mode or data.get("mode")
    rep = Report(argv, mode, findings, data, text, latex)
    return rep.exit_code(), rep, rep.render(args.format), args


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    code, rep, out, args = run(argv)
    if rep is None:
        if out:
            sys.stderr.write(out)
        return code
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)
    return code


if __name__ == "__main__":
    sys.exit(main())
