"""Command-line workbench: ``revree <subcommand> ...``.

Every subcommand prints its headline value(s) to stdout (``%.6f`` bits or
``inf``).  With ``--output`` it also writes a CSV (or JSON) report whose first
line is ``# config: {...}`` holding the fully resolved run configuration.

Exit codes: 0 success, 1 usage error, 2 malformed input file, 3 dimension
mismatch.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from fractions import Fraction

CSV_COLUMNS = ("quantity", "n", "epsilon", "value_bits", "lower_bits", "upper_bits", "certificate", "seed")

EXIT_USAGE = 1
EXIT_FILE = 2
EXIT_DIMS = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(EXIT_USAGE)


def _num(x) -> str:
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.12e" % x


def _show(x) -> str:
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.6f}"


def _cert(d) -> str:
    if not d:
        return ""
    items = []
    for k in sorted(d):
        v = d[k]
        if isinstance(v, float):
            v = _num(v)
        elif isinstance(v, (bool, int, str)):
            v = str(v)
        else:
            continue
        items.append(f"{k}={v}")
    return ";".join(items)


class Report:
    """Rows in the fixed CSV schema plus the resolved configuration."""

    def __init__(self, config: dict):
        self.config = config
        self.rows = []

    def add(self, quantity, value, n="", eps=None, lower=None, upper=None, certificate=None):
        self.rows.append({
            "quantity": quantity,
            "n": "" if n is None else str(n),
            "epsilon": _num(eps),
            "value_bits": _num(value),
            "lower_bits": _num(lower),
            "upper_bits": _num(upper),
            "certificate": certificate if isinstance(certificate, str) else _cert(certificate),
            "seed": str(self.config["seed"]),
        })

    def render(self, fmt: str) -> str:
        head = "# config: " + json.dumps(self.config, sort_keys=True) + "\n"
        if fmt == "json":
            return json.dumps({"config": self.config, "rows": self.rows}, indent=2, sort_keys=True) + "\n"
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(self.rows)
        return head + buf.getvalue()


# -- subcommands ------------------------------------------------------------------------------

def _load_state(path):
    from .operators import load_state

    return load_state(path)


def cmd_divergence(args, rep: Report):
    from .divergences import dh_two_state, dmax, petz_renyi, umegaki
    from .operators import DimensionError

    a, b = _load_state(args.first), _load_state(args.second)
    if a.dims != b.dims:
        raise DimensionError(f"factor dims {a.dims} and {b.dims} differ")
    if args.kind == "umegaki":
        val = umegaki(a, b)
    elif args.kind == "renyi":
        if args.alpha is None:
            raise UsageError("renyi needs --alpha")
        val = petz_renyi(args.alpha, a, b)
    elif args.kind == "max":
        val = dmax(a, b)
    else:
        if args.eps is None:
            raise UsageError("dh needs --eps")
        val, test = dh_two_state(args.eps, a, b)
    rep.add(f"divergence_{args.kind}", val.bits, eps=args.eps, certificate=val.certificate)
    print(_show(val.bits))


def cmd_ree(args, rep: Report):
    from .ree import FWConfig, SymmetricFamilyPoint, reverse_ree

    if args.family:
        if args.param is None:
            raise UsageError("--family needs --param")
        val = SymmetricFamilyPoint(args.family, args.param, args.d).reverse_ree()
        rep.add(f"reverse_ree_{args.family}_closed_form", val.bits, certificate={"param": args.param, "d": args.d})
        print(_show(val.bits))
        return
    if not args.state:
        raise UsageError("give a state file or --family")
    rho = _load_state(args.state)
    cfg = FWConfig(seed=args.seed, restarts=args.restarts or FWConfig.restarts)
    val, trace = reverse_ree(rho, cfg=cfg)
    lower = val.certificate.get("lower_bound", val.bits)
    rep.add("reverse_ree", val.bits, lower=lower, upper=val.bits, certificate=val.certificate)
    print(_show(val.bits))


def _composite_cfg(args):
    from .composite_testing import CompositeConfig

    return CompositeConfig(seed=args.seed, restarts=args.restarts or CompositeConfig.restarts)


def cmd_sanov(args, rep: Report):
    from .composite_testing import sanov_series
    from .ree import FWConfig

    rho = _load_state(args.state)
    out = sanov_series(rho, args.eps, args.nmax, _composite_cfg(args), FWConfig(seed=args.seed))
    rep.add("single_letter", out.single_letter, eps=args.eps)
    print("single_letter", _show(out.single_letter))
    for n, v, lo, up, ok in zip(out.n_values, out.per_copy_exponents, out.lower, out.upper, out.converged):
        rep.add("sanov_per_copy", v, n=n, eps=args.eps, lower=lo, upper=up,
                certificate={"converged": ok, "lower_kind": "heuristic"})
        print(f"n={n}", _show(v))


def cmd_distill(args, rep: Report):
    from .distillation import distillation_exponent
    from .ree import FWConfig

    rho = _load_state(args.state)
    out = distillation_exponent(rho, args.m, args.nmax, _composite_cfg(args), FWConfig(seed=args.seed))
    eps = 2.0 ** -args.m
    rep.add("single_letter", out.single_letter, eps=eps,
            certificate={"target_unbounded": out.target_unbounded})
    print("single_letter", _show(out.single_letter))
    for r in out.reports:
        rep.add("distill_per_copy", r.exponent_estimate, n=r.n, eps=eps, upper=r.certified_bound,
                certificate={"fidelity": r.fidelity, "worst_sep_overlap": r.worst_sep_overlap,
                             "verdict": r.nonentangling_verdict})
        print(f"n={r.n}", _show(r.exponent_estimate), f"fidelity={r.fidelity:.9f}", r.nonentangling_verdict)


def _parse_probs(text: str):
    try:
        vals = [float(Fraction(x)) for x in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"bad probability list {text!r}: {exc}") from None
    return vals


def cmd_blurring(args, rep: Report):
    import numpy as np

    from .types_classical import SymmetricTypeDistribution, apply_blurring, blurring_lemma_check

    if args.demo:
        s = np.array([0.5, 0.3, 0.2])
        q = SymmetricTypeDistribution.iid(np.array([0.4, 0.35, 0.25]), 12)
        delta, eta = 0.2, 0.5
    else:
        if not args.input:
            raise UsageError("give --input FILE or --demo")
        try:
            q = SymmetricTypeDistribution.load(args.input)
        except json.JSONDecodeError as exc:
            raise _FileError(f"line {exc.lineno}: {exc.msg}") from None
        except (KeyError, TypeError, ValueError) as exc:
            raise _FileError(f"malformed distribution file: {exc}") from None
        s = np.array(_parse_probs(args.s)) if args.s else None
        delta, eta = args.delta, args.eta
    if args.n is not None and args.n != q.n:
        raise _DimsError(f"--n {args.n} does not match the file (n = {q.n})")
    if args.alphabet is not None and args.alphabet != q.alphabet_size:
        raise _DimsError(f"--alphabet {args.alphabet} does not match the file ({q.alphabet_size})")
    m = args.m if args.m is not None else math.ceil(2 * delta * q.n) if delta is not None else 1
    blurred = apply_blurring(q, m)
    if args.blurred_output:
        with open(args.blurred_output, "w") as fh:
            fh.write(blurred.to_json())
    rep.add("blurring_total_mass", float(np.sum(blurred.weights)), n=q.n, certificate={"m": m})
    print("m", m)
    if s is not None and delta is not None and eta is not None:
        if len(s) != q.alphabet_size:
            raise _DimsError("the --s distribution does not match the alphabet")
        chk = blurring_lemma_check(s, q, delta, eta)
        rep.add("blurring_lemma", chk.lhs, n=q.n, eps=eta, upper=chk.rhs,
                certificate={"holds": chk.holds, "m": chk.m, "delta": delta})
        print("lhs", _show(chk.lhs))
        print("rhs", _show(chk.rhs))
        print("holds", chk.holds)


def cmd_counterexample(args, rep: Report):
    from .types_classical import counterexample_dh

    try:
        eps = Fraction(args.eps)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"bad --eps {args.eps!r}") from None
    if not 0 <= eps < Fraction(1, 2):
        raise UsageError("--eps must lie in [0, 1/2)")
    print("n closed_form brute_force agree")
    for n in range(1, args.n + 1):
        v = counterexample_dh(eps, n)
        rep.add("counterexample_dh", v.brute_force, n=n, eps=float(eps), lower=v.closed_form, upper=v.closed_form,
                certificate={"type_two_error": str(v.type_two_error), "agree": v.agree})
        print(n, _show(v.closed_form), _show(v.brute_force), v.agree)


def cmd_werner_nonadditivity(args, rep: Report):
    from .ree import reverse_renyi_werner
    from .separability import SeesawConfig

    cfg = SeesawConfig(restarts=args.restarts or 256, seed=args.seed)
    one = reverse_renyi_werner(args.alpha, args.d, 1)
    two = reverse_renyi_werner(args.alpha, args.d, 2, cfg)
    margin = 2 * one.bits - two.bits
    rep.add("reverse_renyi_one_copy", one.bits, n=1, certificate=one.certificate)
    rep.add("reverse_renyi_two_copy", two.bits, n=2, upper=two.bits, certificate=two.certificate)
    rep.add("nonadditivity_margin", margin, n=2)
    print("one_copy", _show(one.bits))
    print("two_copy", _show(two.bits))
    print("margin", _show(margin))


def cmd_axioms(args, rep: Report):
    from .composite_testing import axioms_audit

    for row in axioms_audit(args.set, seed=args.seed):
        rep.add("axiom", None, certificate=f"{row.axiom}|{row.status}|{row.detail}")
        print(f"{row.axiom}: {row.status} ({row.detail})")


class _FileError(Exception):
    pass


class _DimsError(Exception):
    pass


# -- wiring ---------------------------------------------------------------------------------------

def _env_int(name, default):
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{name} must be an integer, got {raw!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="RNG seed (default: $REVREE_SEED or 0)")
    common.add_argument("--threads", type=int, default=None, help="BLAS threads (default: $REVREE_THREADS)")
    common.add_argument("--restarts", type=int, default=None, help="seesaw restarts per oracle call")
    common.add_argument("--output", "-o", default=None, help="write a report file")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    p = _Parser(prog="revree", description="Reverse relative entropy of entanglement workbench.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("divergence", parents=[common], help="two-state divergences in bits")
    d.add_argument("kind", choices=("umegaki", "renyi", "max", "dh"))
    d.add_argument("first", help="state file (first argument of the divergence)")
    d.add_argument("second", help="state file (second argument)")
    d.add_argument("--alpha", type=float)
    d.add_argument("--eps", type=float)
    d.set_defaults(func=cmd_divergence)

    r = sub.add_parser("ree", parents=[common], help="reverse relative entropy of entanglement")
    r.add_argument("state", nargs="?")
    r.add_argument("--family", choices=("werner", "isotropic"))
    r.add_argument("--param", type=float)
    r.add_argument("--d", type=int, default=2)
    r.set_defaults(func=cmd_ree)

    s = sub.add_parser("sanov", parents=[common], help="composite testing exponent series")
    s.add_argument("state")
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--nmax", type=int, default=2)
    s.set_defaults(func=cmd_sanov)

    t = sub.add_parser("distill", parents=[common], help="test-derived distillation protocol")
    t.add_argument("state")
    t.add_argument("--m", type=int, default=1, choices=(1, 2))
    t.add_argument("--nmax", type=int, default=1)
    t.set_defaults(func=cmd_distill)

    b = sub.add_parser("blurring", parents=[common], help="blurring map and its lemma")
    b.add_argument("--input", help="symmetric distribution JSON file")
    b.add_argument("--demo", action="store_true")
    b.add_argument("--n", type=int)
    b.add_argument("--m", type=int)
    b.add_argument("--alphabet", type=int)
    b.add_argument("--s", help="comma separated single-letter distribution for the lemma check")
    b.add_argument("--delta", type=float)
    b.add_argument("--eta", type=float)
    b.add_argument("--blurred-output", help="write the blurred distribution here")
    b.set_defaults(func=cmd_blurring)

    c = sub.add_parser("counterexample", parents=[common], help="partition-mixture family: closed form vs LP")
    c.add_argument("--eps", default="1/4", help="rational allowed, e.g. 1/8")
    c.add_argument("--n", type=int, default=3)
    c.set_defaults(func=cmd_counterexample)

    w = sub.add_parser("werner-nonadditivity", parents=[common], help="reverse Renyi on one and two Werner copies")
    w.add_argument("--d", type=int, default=3)
    w.add_argument("--alpha", type=float, default=0.5)
    w.set_defaults(func=cmd_werner_nonadditivity)

    a = sub.add_parser("axioms", parents=[common], help="free-set axiom spot checks")
    a.add_argument("--set", choices=("separable", "ppt", "counterexample"), default="separable")
    a.set_defaults(func=cmd_axioms)
    return p


def _resolved_config(args) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "output", "threads")}
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.seed is None:
            args.seed = _env_int("REVREE_SEED", 0)
        if args.threads is None:
            args.threads = _env_int("REVREE_THREADS", None)
    except UsageError as exc:
        sys.stderr.write(f"revree: error: {exc}\n")
        return EXIT_USAGE
    if args.threads is not None:
        # only effective before the BLAS library is loaded; results do not depend on it
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)

    from .operators import DimensionError, StateFileError

    rep = Report(_resolved_config(args))
    try:
        args.func(args, rep)
    except UsageError as exc:
        sys.stderr.write(f"revree {args.command}: error: {exc}\n")
        return EXIT_USAGE
    except (StateFileError, _FileError) as exc:
        sys.stderr.write(f"revree {args.command}: malformed input: {exc}\n")
        return EXIT_FILE
    except OSError as exc:
        sys.stderr.write(f"revree {args.command}: cannot read input: {exc}\n")
        return EXIT_FILE
    except (DimensionError, _DimsError) as exc:
        sys.stderr.write(f"revree {args.command}: dimension mismatch: {exc}\n")
        return EXIT_DIMS
    except ValueError as exc:
        sys.stderr.write(f"revree {args.command}: error: {exc}\n")
        return EXIT_USAGE
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(rep.render(args.format))
    return 0


if __name__ == "__main__":
    sys.exit(main())
