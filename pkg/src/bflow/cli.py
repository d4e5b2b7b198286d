"""Command line frontend.

Subcommands cover the algebraic tables (trees, coproduct), method
analysis (compose, substitute, modified, order, geometric, series), and
the numerical side (integrate, converge). Output is plain text, TSV, or
CSV, with every listing in a canonical sort so runs are byte-stable.

Exit codes: 0 on success, 1 on usage or parse errors, 2 on domain
errors (unknown names, unsupported combinations, capacity limits).
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction

import numpy as np

from .algebra import render_sum
from .bseries_hopf import (
    builtin_tableau,
    convolve_bck,
    delta_bck,
    delta_cefm,
    exact_gamma,
    check_geometric,
    order_report,
    parse_tableau,
    rk_character,
    solve_modified,
    substitute_b,
)
from .errors import CapacityError, DomainError, ParseError
from .forest_core import (
    enumerate_forests,
    enumerate_trees,
    max_order,
    parse_forest,
    parse_tree,
    tree_stats,
)
from .integrators import (
    LGProblem,
    PolyVectorField,
    affine_element,
    convergence_order,
    integrate,
    make_action,
    rigid_body_problem,
    rk_step,
    toda_problem,
)
from .lbseries import BellWord, delta_mkw, fdb_coproduct, method_series

CLASSICAL_METHODS = ("euler", "explicit_midpoint", "implicit_midpoint", "rk4")
LIE_METHODS = ("lie_euler", "lie_midpoint", "lie_rk4", "cf4")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit 2; usage errors are 1 here
        raise _UsageError(message)


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _tensor_key(t):
    return (-t.left.order, t.left.serial, t.right.serial)


def _word_key(w):
    return (w.order, w.serial)


def _parse_bell_word(text: str) -> BellWord:
    text = text.strip()
    if text == "1":
        return BellWord(())
    letters = []
    for pos, chunk in enumerate(text.split(".")):
        if not chunk.startswith("d") or not chunk[1:].isdigit() or int(chunk[1:]) < 1:
            raise ParseError(f"bad Bell letter {chunk!r}", text, pos)
        letters.append(int(chunk[1:]))
    return BellWord(letters)


def _bell_words_up_to(n: int):
    """All words of grade 0..n: integer compositions, grade by grade."""
    out = [BellWord(())]
    for total in range(1, n + 1):
        grade = []

        def build(remaining, prefix):
            if remaining == 0:
                grade.append(BellWord(prefix))
                return
            for first in range(1, remaining + 1):
                build(remaining - first, prefix + [first])

        build(total, [])
        out.extend(sorted(grade, key=lambda w: w.serial))
    return out


_COPRODUCTS = {
    "bck": (lambda text: parse_forest(text), delta_bck),
    "cefm": (lambda text: parse_tree(text), delta_cefm),
    "mkw": (lambda text: parse_forest(text, planar=True), delta_mkw),
    "fdb": (_parse_bell_word, fdb_coproduct),
}


def cmd_trees(args) -> int:
    for n in range(1, args.N + 1):
        if args.forests:
            for forest in enumerate_forests(n, planar=args.planar):
                print(f"{forest.serial}\t{forest.order}")
        elif args.planar:
            for tree in enumerate_trees(n, planar=True):
                print(f"{tree.serial}\t{tree.order}")
        else:
            for tree in enumerate_trees(n):
                order, sigma, factorial = tree_stats(tree)
                print(f"{tree.serial}\t{order}\t{sigma}\t{factorial}")
    return 0


def cmd_coproduct(args) -> int:
    parse, delta = _COPRODUCTS[args.algebra]
    key = _tensor_key if args.algebra != "fdb" else lambda t: (t.left.serial, t.right.serial)
    if args.table is not None:
        if args.algebra == "fdb":
            basis = _bell_words_up_to(args.table)
        elif args.algebra == "bck":
            basis = [f for n in range(1, args.table + 1) for f in enumerate_forests(n)]
        elif args.algebra == "mkw":
            basis = [
                w for n in range(1, args.table + 1) for w in enumerate_forests(n, planar=True)
            ]
        else:
            basis = [t for n in range(1, args.table + 1) for t in enumerate_trees(n)]
        for x in basis:
            print(f"{x.serial}\t{render_sum(delta(x), sort_key=key)}")
        return 0
    if args.element is None:
        raise _UsageError("coproduct needs an element or --table N")
    x = parse(args.element)
    print(render_sum(delta(x), sort_key=key))
    return 0


def _load_character(args, N: int, name_attr: str = "builtin", file_attr: str = "tableau"):
    path = getattr(args, file_attr, None)
    if path:
        with open(path, "r", encoding="utf-8") as fh:
            return rk_character(parse_tableau(fh.read(), name=path), N)
    name = getattr(args, name_attr, None)
    if name is None:
        raise _UsageError(f"missing --{name_attr.replace('_', '-')} (or a tableau file)")
    return rk_character(builtin_tableau(name), N)


def _print_tree_table(alpha, N: int) -> None:
    unit = alpha.unit_value()
    if unit:
        print(f"1\t{unit}")
    for n in range(1, N + 1):
        for tree in enumerate_trees(n):
            value = alpha.tree_value(tree)
            if value:
                print(f"{tree.serial}\t{value}")


def cmd_compose(args) -> int:
    first = _load_character(args, args.N, "first", "tableau_first")
    second = _load_character(args, args.N, "second", "tableau_second")
    _print_tree_table(convolve_bck(first, second, args.N), args.N)
    return 0


def cmd_substitute(args) -> int:
    alpha = _load_character(args, args.N)
    beta = solve_modified(alpha, args.mode, args.N)
    if args.into == "exact":
        gamma = exact_gamma(args.N)
    else:
        gamma = rk_character(builtin_tableau(args.into), args.N)
    _print_tree_table(substitute_b(beta, gamma, args.N), args.N)
    return 0


def cmd_modified(args) -> int:
    alpha = _load_character(args, args.N)
    _print_tree_table(solve_modified(alpha, args.mode, args.N), args.N)
    return 0


def cmd_order(args) -> int:
    alpha = _load_character(args, args.N)
    order, witness = order_report(alpha, args.N)
    print(f"order: {order}")
    if witness is None:
        print(f"no violations through order {args.N}")
    else:
        got = alpha.tree_value(witness)
        want = Fraction(1, tree_stats(witness)[2])
        print(f"first violation: {witness.serial} (weight {got}, exact flow {want})")
    return 0


def cmd_geometric(args) -> int:
    kind = {"symplectic": "symplectic_method", "hamiltonian": "hamiltonian_field"}[args.kind]
    alpha = _load_character(args, args.N)
    if args.kind == "hamiltonian":
        alpha = solve_modified(alpha, "backward_error", args.N)
    violations = check_geometric(alpha, kind, args.N)
    if not violations:
        print("OK")
        return 0
    for t1, t2 in violations:
        print(f"violation: {t1.serial} | {t2.serial}")
    return 0


def cmd_series(args) -> int:
    series = method_series(args.method, args.rep, args.N)
    for n in range(0, args.N + 1):
        for word in enumerate_forests(n, planar=True):
            value = series(word)
            if value:
                print(f"{word.serial}\t{value}")
    return 0


_NAMED_FIELDS = {
    "linear": (
        ["y1", "-y0", "-y2/2"],
        (1.0, 0.5, 0.25),
    ),
}


def _resolve_field(spec: str):
    """A named field or comma-separated polynomial components; returns
    the compiled callable and a default initial state."""
    if spec in _NAMED_FIELDS:
        texts, y0 = _NAMED_FIELDS[spec]
    else:
        texts = [c.strip() for c in spec.split(",")]
        y0 = tuple(1.0 / (k + 1) for k in range(len(texts)))
    return PolyVectorField.from_strings(texts).as_callable(), y0


def _build_problem(args):
    """Problem, state labels, and invariant hooks for one action."""
    if args.action == "rotation":
        problem = rigid_body_problem()
        if args.f:
            fn, y0 = _resolve_field(args.f)
            if len(y0) != 3:
                raise DomainError("a rotation field needs exactly 3 components")
            problem = LGProblem(problem.action, lambda t, y: fn(y), problem.y0)
    elif args.action == "isospectral":
        if args.f:
            raise DomainError("the isospectral action runs its stock problem")
        problem = toda_problem()
    elif args.action == "translation":
        if not args.f:
            raise DomainError("the translation action needs --f")
        fn, y0 = _resolve_field(args.f)
        action = make_action("translation", len(y0))
        problem = LGProblem(action, lambda t, y: fn(y), y0)
    elif args.action == "affine":
        if args.f:
            raise DomainError("the affine action runs its stock problem")
        V = np.array([[0.0, 1.0], [-1.0, 0.0]])
        b = np.array([1.0, 0.0])
        action = make_action("affine", 2)
        problem = LGProblem(action, lambda t, y: affine_element(V, b), np.array([1.0, 0.0]))
    else:
        raise DomainError(f"unknown action {args.action!r}")
    if args.y0 is not None:
        if problem.y0.ndim != 1:
            raise DomainError("--y0 override applies to vector states only")
        values = [float(v) for v in args.y0.split(",")]
        if len(values) != len(problem.y0):
            raise DomainError(
                f"--y0 needs {len(problem.y0)} components, got {len(values)}"
            )
        problem = LGProblem(problem.action, problem.f, np.array(values), problem.reference)
    return problem


def _state_columns(y) -> list[str]:
    return [f"y{k}" for k in range(np.asarray(y).size)]


def _invariant_tracker(kind, y0):
    y0 = np.asarray(y0)
    if kind == "norm":
        if y0.ndim != 1:
            raise DomainError("norm drift applies to vector states")
        base = float(np.linalg.norm(y0))
        return "norm_drift", lambda y: abs(float(np.linalg.norm(y)) - base)
    if kind == "spectrum":
        if y0.ndim != 2 or not np.allclose(y0, y0.T):
            raise DomainError("spectrum drift applies to symmetric matrix states")
        base = np.sort(np.linalg.eigvalsh(y0))
        return "eig_drift", lambda y: float(
            np.max(np.abs(np.sort(np.linalg.eigvalsh(y)) - base))
        )
    raise DomainError(f"unknown invariant {kind!r}; choose norm or spectrum")


def _run_trajectory(args, problem):
    method = args.method
    if method in CLASSICAL_METHODS or (method == "custom" and args.tableau):
        if problem.action.kind != "translation":
            raise DomainError("classical methods integrate the translation action only")
        if method == "custom":
            with open(args.tableau, "r", encoding="utf-8") as fh:
                tab = parse_tableau(fh.read(), name=args.tableau)
        else:
            tab = builtin_tableau(method)
        field = problem.f
        y = problem.y0.copy()
        out = [y]
        t = 0.0
        for _ in range(args.steps):
            y = rk_step(tab, lambda z: field(t, z), y, args.h)
            t += args.h
            out.append(y)
        return out
    tableau = None
    if args.tableau:
        with open(args.tableau, "r", encoding="utf-8") as fh:
            tableau = parse_tableau(fh.read(), name=args.tableau)
    return integrate(method, problem, args.h, args.steps, m=args.m, tableau=tableau)


def cmd_integrate(args) -> int:
    problem = _build_problem(args)
    trajectory = _run_trajectory(args, problem)
    columns = ["step", "t"] + _state_columns(problem.y0)
    tracker = None
    if args.check_invariant:
        name, tracker = _invariant_tracker(args.check_invariant, problem.y0)
        columns.append(name)
    lines = [",".join(columns)]
    for k, y in enumerate(trajectory[1:], start=1):
        row = [str(k), _fmt(k * args.h)]
        row.extend(_fmt(v) for v in np.asarray(y).reshape(-1))
        if tracker is not None:
            row.append(_fmt(tracker(y)))
        lines.append(",".join(row))
    _emit(args, lines)
    return 0


def cmd_converge(args) -> int:
    problem = _build_problem(args)
    if args.method in CLASSICAL_METHODS:
        raise DomainError("converge drives the Lie group methods; see integrate")
    h_list = [float(v) for v in args.h.split(",")]
    tableau = None
    if args.tableau:
        with open(args.tableau, "r", encoding="utf-8") as fh:
            tableau = parse_tableau(fh.read(), name=args.tableau)
    slope, rows = convergence_order(
        args.method, problem, args.t_end, h_list, m=args.m, tableau=tableau
    )
    lines = ["method,h,error,slope_estimate"]
    for h, err, pair in rows:
        tail = "" if pair is None else _fmt(pair)
        lines.append(f"{args.method},{_fmt(h)},{_fmt(err)},{tail}")
    lines.append(f"# least-squares slope: {_fmt(slope)}")
    _emit(args, lines)
    return 0


def _emit(args, lines) -> None:
    text = "\n".join(lines) + "\n"
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def build_parser() -> _Parser:
    parser = _Parser(prog="bflow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("trees", help="list trees or forests with their statistics")
    p.add_argument("-N", type=int, required=True, help="maximum order")
    p.add_argument("--planar", action="store_true")
    p.add_argument("--forests", action="store_true")
    p.set_defaults(fn=cmd_trees)

    p = sub.add_parser("coproduct", help="print a coproduct, or a table of them")
    p.add_argument("algebra", choices=sorted(_COPRODUCTS))
    p.add_argument("element", nargs="?", help="serialized element")
    p.add_argument("--table", type=int, metavar="N", help="all basis elements up to N")
    p.set_defaults(fn=cmd_coproduct)

    def add_character_options(p, which="builtin"):
        p.add_argument(f"--{which}", help="builtin tableau name")
        p.add_argument(
            f"--{which.replace('builtin', 'tableau')}", help="tableau file", metavar="FILE"
        )
        p.add_argument("-N", type=int, required=True)

    p = sub.add_parser("compose", help="coefficients of one method after another")
    p.add_argument("--first", help="builtin name of the first step")
    p.add_argument("--second", help="builtin name of the second step")
    p.add_argument("--tableau-first", dest="tableau_first", metavar="FILE")
    p.add_argument("--tableau-second", dest="tableau_second", metavar="FILE")
    p.add_argument("-N", type=int, required=True)
    p.set_defaults(fn=cmd_compose)

    p = sub.add_parser("substitute", help="substitute a solved modified field into a series")
    add_character_options(p)
    p.add_argument("--mode", choices=["backward_error", "modifying_integrator"], required=True)
    p.add_argument("--into", default="exact", help="exact or a builtin name")
    p.set_defaults(fn=cmd_substitute)

    p = sub.add_parser("modified", help="modified-equation coefficients of a method")
    add_character_options(p)
    p.add_argument("--mode", choices=["backward_error", "modifying_integrator"], required=True)
    p.set_defaults(fn=cmd_modified)

    p = sub.add_parser("order", help="classical order of a method with first violation")
    add_character_options(p)
    p.set_defaults(fn=cmd_order)

    p = sub.add_parser("geometric", help="check a tree-pair geometric condition")
    add_character_options(p)
    p.add_argument("--kind", choices=["symplectic", "hamiltonian"], required=True)
    p.set_defaults(fn=cmd_geometric)

    p = sub.add_parser("series", help="word coefficients of a Lie-Butcher method")
    p.add_argument("--method", required=True)
    p.add_argument("--rep", choices=["type1", "type3"], required=True)
    p.add_argument("-N", type=int, required=True)
    p.set_defaults(fn=cmd_series)

    def add_run_options(p):
        p.add_argument("--method", required=True)
        p.add_argument(
            "--action",
            choices=["rotation", "isospectral", "translation", "affine"],
            required=True,
        )
        p.add_argument("--f", help="named field or comma-separated components")
        p.add_argument("--y0", help="comma-separated initial state")
        p.add_argument("--tableau", metavar="FILE")
        p.add_argument("-m", type=int, help="dexpinv truncation for rkmk")
        p.add_argument("--out", metavar="FILE", help="write CSV here instead of stdout")

    p = sub.add_parser("integrate", help="run a trajectory, CSV per step")
    add_run_options(p)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--check-invariant", dest="check_invariant", choices=["norm", "spectrum"])
    p.set_defaults(fn=cmd_integrate)

    p = sub.add_parser("converge", help="measure a convergence slope, CSV per step size")
    add_run_options(p)
    p.add_argument("--h", required=True, help="comma-separated step sizes")
    p.add_argument("--t-end", dest="t_end", type=float, default=1.0)
    p.set_defaults(fn=cmd_converge)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        # fail before any output when a truncation order exceeds the cap
        for attr in ("N", "table"):
            value = getattr(args, attr, None)
            if value is not None and value > max_order():
                raise CapacityError(
                    f"order {value} exceeds the configured cap {max_order()}; "
                    "raise BF_MAX_ORDER to go higher"
                )
        return args.fn(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DomainError, CapacityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
