"""Command line front end (``deflab``).

Exit codes: 0 success, 2 parse/validation error, 3 precondition error,
4 deficiency precondition failure, 5 solver non-convergence.
"""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

import numpy as np

from . import io
from .curve import TestingCurve
from .deficiency import bayes_risk, two_deficiency_index
from .errors import DeficiencyPreconditionError, PreconditionError, SolverError, ValidationError
from .experiment import BinaryExperiment, as_binary, classical_reduction, is_abelian
from .morphism import cp_extension
from .parallel import pmap
from .witness import separation_demo, tangent_witness

EXIT_OK, EXIT_PARSE, EXIT_PRECONDITION, EXIT_DEFICIENCY, EXIT_SOLVER = 0, 2, 3, 4, 5


def _binary(path: str) -> BinaryExperiment:
    E = io.load_experiment(path)
    if E.n_params != 2:
        raise ValidationError(f"{path}: expected a binary experiment, found {E.n_params} states")
    return as_binary(E)


def _report(command: str, body: dict) -> dict:
    return {"version": io.FORMAT_VERSION, "command": command, **body}


def _fmt(x: float) -> str:
    return "inf" if np.isinf(x) else f"{x:.12g}"


def cmd_curve(args) -> str:
    if args.steps < 1:
        raise ValidationError("--steps must be at least 1")
    c = TestingCurve(_binary(args.input))
    bps = c.breakpoints
    t_hi = args.t_max if args.t_max is not None else 2 * (max(bps) if bps else 0.0) + 2
    if t_hi < args.t_min or args.t_min < 0:
        raise ValidationError("need 0 <= t-min <= t-max")
    ts = np.linspace(args.t_min, t_hi, args.steps)
    vals = pmap(c, ts)
    lines = [
        "# T_E\t" + "\t".join(_fmt(b) for b in bps),
        f"# t1\t{_fmt(c.t1)}",
        f"# tmax\t{_fmt(c.tmax)}",
        "t\tf",
    ]
    lines += [f"{_fmt(t)}\t{_fmt(v)}" for t, v in zip(ts, vals)]
    return "\n".join(lines) + "\n"


def cmd_compare(args) -> str:
    E, F = _binary(args.E), _binary(args.F)
    rep = two_deficiency_index(E, F, grid=args.grid)
    body = rep.to_dict()
    if args.eps is not None:
        body["eps"] = args.eps
        body["pass"] = rep.epsilon <= args.eps + 1e-9
    return io.dumps(_report("compare", body))


def cmd_witness(args) -> str:
    E = _binary(args.input)
    w = tangent_witness(E, args.s1, args.s2)
    c = TestingCurve(E)
    ts = np.linspace(0.0, 2 * (max(c.breakpoints) if c.breakpoints else 0.0) + 2, args.grid)
    gap = max(w.f_witness(t) - c(t) for t in ts)
    tangency = [abs(w.f_witness(s) - c(s)) for s in (w.s1, w.s2)]
    body = w.to_dict()
    body["verification"] = {"max_excess": gap, "tangency_residuals": tangency, "dominated": gap <= 1e-9}
    return io.dumps(_report("witness", body))


def cmd_separate(args) -> str:
    E = _binary(args.input)
    rep = separation_demo(E, args.s1, args.s2, tol=args.tol, seed=args.seed)
    if rep.verdict == "INCONCLUSIVE" and not rep.match.converged:
        raise SolverError(f"matching solver did not converge (value {rep.match.value:.3e}, "
                          f"bound {rep.match.lower_bound:.3e})")
    return io.dumps(_report("separate", rep.to_dict()))


def cmd_extend(args) -> str:
    ext = cp_extension(_binary(args.E), _binary(args.F))
    body = ext.to_dict()
    body["choi"] = io.encode_matrix(ext.choi.matrix)
    return io.dumps(_report("extend", body))


def cmd_reduce(args) -> str:
    E = io.load_experiment(args.input)
    if not is_abelian(E, tol=args.tol):
        raise PreconditionError("experiment is not abelian; no classical reduction exists")
    table, pvm = classical_reduction(E, tol=args.tol, seed=args.seed)
    body = {"n_outcomes": pvm.n_outcomes, "distributions": table, "pvm": [io.encode_matrix(M) for M in pvm.elements]}
    return io.dumps(_report("reduce", body))


def cmd_bayes(args) -> str:
    E = io.load_experiment(args.input)
    W = io.load_loss(args.loss)
    value = bayes_risk(E, W, tol=args.tol, seed=args.seed)
    return io.dumps(_report("bayes", {"n_decisions": W.n_decisions, "bayes_risk": value}))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=1e-10, help="solver / reduction tolerance")
    common.add_argument("--grid", type=int, default=512, help="grid size for sampled searches")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="write output here instead of stdout")

    p = argparse.ArgumentParser(prog="deflab", description="Compare binary quantum experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("curve", parents=[common], help="tabulate the testing curve")
    s.add_argument("input")
    s.add_argument("--t-min", type=float, default=0.0)
    s.add_argument("--t-max", type=float, default=None)
    s.add_argument("--steps", type=int, default=201)
    s.set_defaults(func=cmd_curve)

    s = sub.add_parser("compare", parents=[common], help="2-deficiency index of E w.r.t. F")
    s.add_argument("E")
    s.add_argument("F")
    s.add_argument("--eps", type=float, default=None)
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("witness", parents=[common], help="tangent three-outcome witness")
    s.add_argument("input")
    s.add_argument("s1", type=float)
    s.add_argument("s2", type=float)
    s.set_defaults(func=cmd_witness)

    s = sub.add_parser("separate", parents=[common], help="try to reproduce the witness by one measurement")
    s.add_argument("input")
    s.add_argument("--s1", type=float, default=None)
    s.add_argument("--s2", type=float, default=None)
    s.set_defaults(func=cmd_separate)

    s = sub.add_parser("extend", parents=[common], help="completely positive extension")
    s.add_argument("E")
    s.add_argument("F")
    s.set_defaults(func=cmd_extend)

    s = sub.add_parser("reduce", parents=[common], help="classical form of an abelian experiment")
    s.add_argument("input")
    s.set_defaults(func=cmd_reduce, tol=1e-9)

    s = sub.add_parser("bayes", parents=[common], help="minimal Bayes risk for a loss table")
    s.add_argument("input")
    s.add_argument("loss")
    s.set_defaults(func=cmd_bayes)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out = args.func(args)
    except DeficiencyPreconditionError as exc:
        print(f"deflab: deficiency precondition failed: {exc}", file=sys.stderr)
        return EXIT_DEFICIENCY
    except PreconditionError as exc:
        print(f"deflab: precondition error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except ValidationError as exc:
        print(f"deflab: input error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except SolverError as exc:
        print(f"deflab: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
