"""Elementary differentials, Runge-Kutta steppers, and Lie group integrators.

Two layers that never mix arithmetic. The exact layer evaluates truncated
series on polynomial vector fields: elementary differentials follow the
derivative recursion, and the Taylor oracle expands a Runge-Kutta map over
a generic field, one monomial per tree, with no reference to the
elementary-weight product formula (that independence is the point). The
floating-point layer supplies the steppers, the group actions, and a
convergence-order harness; it works in 64-bit floats throughout.

Algebra elements are numpy arrays: vectors for the rotation and
translation actions, matrices for the isospectral action and for the
affine action in its homogeneous embedding.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
import sympy
from scipy.linalg import expm

from .bseries_hopf import BCoeff, RKTableau, builtin_tableau, order_of, rk_character
from .errors import DomainError
from .forest_core import Forest, RootedTree, bplus, enumerate_trees, single, tree_stats

DOT = single()


# ---------------------------------------------------------------------------
# Polynomial vector fields
# ---------------------------------------------------------------------------


class PolyVectorField:
    """A vector field whose components are polynomials with rational
    coefficients.

    Components are sympy expressions in the state symbols, so partial
    derivatives and point evaluations stay exact. Extra symbols may be
    declared as parameters; they pass through evaluation untouched, which
    lets a modified field keep its step size symbolic. ``as_callable``
    compiles a float version for the steppers (parameter-free fields
    only).
    """

    def __init__(self, exprs, syms, params=()):
        self.syms = tuple(sympy.sympify(s) for s in syms)
        self.params = tuple(sympy.sympify(p) for p in params)
        self.exprs = tuple(sympy.expand(sympy.sympify(e)) for e in exprs)
        self.n = len(self.exprs)
        if len(self.syms) != self.n:
            raise DomainError(
                f"field needs one state symbol per component, got {len(self.syms)} "
                f"symbols for {self.n} components"
            )
        allowed = set(self.syms) | set(self.params)
        for e in self.exprs:
            if not e.free_symbols <= allowed:
                stray = e.free_symbols - allowed
                raise DomainError(f"unexpected symbols in field component: {stray}")
            if not e.is_polynomial(*self.syms):
                raise DomainError(f"field component is not polynomial: {e}")
        self._diff_cache: dict = {}
        self._elem_cache: dict[RootedTree, tuple] = {}
        self._fn = None

    @classmethod
    def from_strings(cls, texts: Sequence[str], prefix: str = "y") -> "PolyVectorField":
        """Parse components like ``"y0**2 - y1"`` over symbols y0..y_{n-1}."""
        n = len(texts)
        syms = sympy.symbols(f"{prefix}0:{n}")
        local = {str(s): s for s in syms}
        try:
            exprs = [sympy.sympify(t, locals=local, rational=True) for t in texts]
        except (sympy.SympifyError, SyntaxError, TypeError) as exc:
            raise DomainError(f"cannot parse field component: {exc}") from None
        return cls(exprs, syms)

    def as_callable(self) -> Callable[[np.ndarray], np.ndarray]:
        if self.params:
            raise DomainError("cannot compile a field with free parameters")
        if self._fn is None:
            compiled = sympy.lambdify(self.syms, sympy.Matrix(self.exprs), "numpy")

            def fn(y, _c=compiled, _n=self.n):
                arr = np.asarray(y, dtype=float).reshape(_n)
                return np.asarray(_c(*arr), dtype=float).reshape(_n)

            self._fn = fn
        return self._fn

    def _derivative(self, i: int, indices: tuple[int, ...]):
        # f^i_{j1..jk}; symmetric in the lower indices, so sort the key.
        key = (i, tuple(sorted(indices)))
        if key not in self._diff_cache:
            expr = self.exprs[i]
            for j in key[1]:
                expr = sympy.diff(expr, self.syms[j])
            self._diff_cache[key] = sympy.expand(expr)
        return self._diff_cache[key]

    def elementary_symbolic(self, tree: RootedTree) -> tuple:
        """The elementary differential of ``tree`` as symbolic components.

        F(.) = f, and on B+(t1..tm) the m-th derivative tensor of f is
        contracted against the children's differentials.
        """
        if tree in self._elem_cache:
            return self._elem_cache[tree]
        children = [self.elementary_symbolic(c) for c in tree.children]
        m = len(children)
        out = []
        for i in range(self.n):
            total = sympy.Integer(0)
            for jtuple in itertools.product(range(self.n), repeat=m):
                d = self._derivative(i, jtuple)
                if d == 0:
                    continue
                term = d
                for j, child in zip(jtuple, children):
                    term = term * child[j]
                total = total + term
            out.append(sympy.expand(total))
        result = tuple(out)
        self._elem_cache[tree] = result
        return result


def _exact(value):
    """Rational sympy scalar -> Fraction; anything symbolic passes through."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if value.free_symbols:
        return value
    r = sympy.Rational(value)
    return Fraction(int(r.p), int(r.q))


def _point_subs(field: PolyVectorField, y) -> dict:
    if len(y) != field.n:
        raise DomainError(
            f"state has dimension {len(y)}, field expects {field.n}"
        )
    subs = {}
    for s, v in zip(field.syms, y):
        subs[s] = v if isinstance(v, sympy.Expr) else sympy.Rational(Fraction(v))
    return subs


def elementary_differential(tree: RootedTree, field: PolyVectorField, y) -> list:
    """Exact value of the elementary differential F(tree) at the point y."""
    subs = _point_subs(field, y)
    return [_exact(e.subs(subs)) for e in field.elementary_symbolic(tree)]


def eval_bseries(alpha: BCoeff, field: PolyVectorField, y, h, N: int) -> list:
    """Evaluate the truncated series: alpha(1) y plus, for every tree of
    order at most N, h^|t| alpha(t)/sigma(t) times the elementary
    differential at y. Exact in rational arithmetic; a symbolic h (or a
    parametric field) produces symbolic components instead."""
    if alpha.N < N:
        raise DomainError(
            f"series evaluation to order {N} needs coefficients at that order "
            f"(map truncated at {alpha.N})"
        )
    if len(y) != field.n:
        raise DomainError(f"state has dimension {len(y)}, field expects {field.n}")
    hval = h if isinstance(h, sympy.Expr) else Fraction(h)
    unit = alpha.unit_value()
    acc = [unit * (v if isinstance(v, sympy.Expr) else Fraction(v)) for v in y]
    for n in range(1, N + 1):
        hn = hval**n
        for tree in enumerate_trees(n):
            c = alpha.tree_value(tree)
            if not c:
                continue
            weight = hn * c / tree_stats(tree)[1]
            vec = elementary_differential(tree, field, y)
            acc = [a + weight * v for a, v in zip(acc, vec)]
    return [_exact(a) for a in acc]


def modified_field(beta: BCoeff, field: PolyVectorField, h, N: int) -> PolyVectorField:
    """The vector field represented by an infinitesimal series: the sum
    over trees of h^{|t|-1} beta(t)/sigma(t) F(t), as a new polynomial
    field in the same state symbols. Pass h as an exact rational to get a
    concrete field, or as a sympy symbol to keep it parametric."""
    if beta.unit_value() != 0:
        raise DomainError("a vector field series must vanish on the empty forest")
    if beta.N < N:
        raise DomainError(
            f"field construction to order {N} needs coefficients at that order"
        )
    hval = h if isinstance(h, sympy.Expr) else sympy.Rational(Fraction(h))
    exprs = [sympy.Integer(0)] * field.n
    for n in range(1, N + 1):
        for tree in enumerate_trees(n):
            c = beta(Forest((tree,)))
            if not c:
                continue
            weight = hval ** (n - 1) * sympy.Rational(c) / tree_stats(tree)[1]
            vec = field.elementary_symbolic(tree)
            exprs = [e + weight * v for e, v in zip(exprs, vec)]
    params = set(field.params) | (hval.free_symbols if hval.free_symbols else set())
    return PolyVectorField([sympy.expand(e) for e in exprs], field.syms, tuple(params))


# ---------------------------------------------------------------------------
# The Taylor oracle
# ---------------------------------------------------------------------------
#
# A series is a dict {tree: Fraction} for the deviation of a state from the
# base point y, the tree standing for its elementary differential over a
# generic field (derivative tensors as opaque symmetric slots, which is why
# non-planar trees are the right bookkeeping) and carrying the h-power equal
# to its order. Expanding h f(y + D) by multivariate Taylor contributes, for
# every multiset of monomials from D, the tree obtained by grafting the
# multiset under a fresh root, weighted by prod c^k / k!.


def _expand_field(series: dict, N: int) -> dict:
    out = {DOT: Fraction(1)}
    items = [(t, c) for t, c in sorted(series.items(), key=lambda kv: kv[0].order) if c]

    def rec(idx: int, budget: int, chosen: list, coeff: Fraction) -> None:
        if idx == len(items):
            if chosen:
                t = bplus(Forest(tuple(chosen)))
                out[t] = out.get(t, Fraction(0)) + coeff
            return
        tree, c = items[idx]
        rec(idx + 1, budget, chosen, coeff)
        k, mult, fact, used = 1, c, 1, tree.order
        while used <= budget:
            rec(idx + 1, budget - used, chosen + [tree] * k, coeff * mult / fact)
            k += 1
            mult *= c
            fact *= k
            used += tree.order

    rec(0, N - 1, [], Fraction(1))
    return out


def _merge(*parts) -> dict:
    out: dict = {}
    for scale, series in parts:
        if not scale:
            continue
        for t, c in series.items():
            v = out.get(t, Fraction(0)) + scale * c
            if v:
                out[t] = v
            elif t in out:
                del out[t]
    return out


def _rk_deviation(tableau: RKTableau, base: dict, N: int) -> dict:
    """Deviation series of one step started at y + base, truncated at N.

    Stages are solved by structural fixed point: each sweep recomputes
    every stage from the previous sweep's values, and the iteration must
    reach a sweep that changes nothing.
    """
    s = tableau.s
    stages: list[dict] = [{} for _ in range(s)]
    for _ in range(N + s + 2):
        expanded = [_expand_field(_merge((1, base), (1, st)), N) for st in stages]
        new_stages = [
            _merge(*[(tableau.a[i][j], expanded[j]) for j in range(s)])
            for i in range(s)
        ]
        if new_stages == stages:
            return _merge((1, base), *[(tableau.b[j], expanded[j]) for j in range(s)])
        stages = new_stages
    raise DomainError(
        f"stage expansion of {tableau.name or 'tableau'} did not stabilize "
        f"at order {N}"
    )


def _oracle_cap(N: int) -> None:
    if N > 5:
        raise DomainError(f"the Taylor oracle is capped at order 5, got {N}")


def rk_taylor_oracle(tableau: RKTableau, N: int) -> BCoeff:
    """Brute-force character of a Runge-Kutta map.

    Expands the map over a generic polynomial field and reads the tree
    coefficients straight off the Taylor series (times sigma, undoing the
    B-series normalization). Shares no code with elementary_weights.
    """
    _oracle_cap(N)
    final = _rk_deviation(tableau, {}, N)
    table = {t: c * tree_stats(t)[1] for t, c in final.items()}
    return BCoeff.character(lambda t: table.get(t, Fraction(0)), N)


def composed_taylor_oracle(first: RKTableau, second: RKTableau, N: int) -> BCoeff:
    """Taylor character of the composed map: a step of ``first``, then a
    step of ``second`` with the same h, expanded around the original
    point."""
    _oracle_cap(N)
    once = _rk_deviation(first, {}, N)
    final = _rk_deviation(second, once, N)
    table = {t: c * tree_stats(t)[1] for t, c in final.items()}
    return BCoeff.character(lambda t: table.get(t, Fraction(0)), N)


# ---------------------------------------------------------------------------
# Classical Runge-Kutta stepping (floats)
# ---------------------------------------------------------------------------


def rk_step(tableau: RKTableau, field, y, h: float, solver_tol: float = 1e-14):
    """One Runge-Kutta step. Explicit tableaus sweep the stages in order;
    implicit ones iterate the stage fixed point to solver_tol (scaled by
    the stage magnitude, at most 100 iterations)."""
    f = field.as_callable() if isinstance(field, PolyVectorField) else field
    y = np.asarray(y, dtype=float)
    s = tableau.s
    a = [[float(x) for x in row] for row in tableau.a]
    b = [float(x) for x in tableau.b]
    K = [np.asarray(f(y), dtype=float) for _ in range(s)]
    if tableau.is_explicit:
        for i in range(s):
            yi = y.copy()
            for j in range(i):
                if a[i][j]:
                    yi = yi + (h * a[i][j]) * K[j]
            K[i] = np.asarray(f(yi), dtype=float)
    else:
        for _ in range(100):
            shift = 0.0
            scale = 1.0
            new = []
            for i in range(s):
                yi = y.copy()
                for j in range(s):
                    if a[i][j]:
                        yi = yi + (h * a[i][j]) * K[j]
                ki = np.asarray(f(yi), dtype=float)
                shift = max(shift, float(np.max(np.abs(ki - K[i]), initial=0.0)))
                scale = max(scale, float(np.max(np.abs(ki), initial=0.0)))
                new.append(ki)
            K = new
            if shift <= solver_tol * scale:
                break
        else:
            raise DomainError(
                f"implicit stage iteration stalled, residual {shift:.3e}"
            )
    out = y.copy()
    for j in range(s):
        if b[j]:
            out = out + (h * b[j]) * K[j]
    return out


# ---------------------------------------------------------------------------
# Group actions
# ---------------------------------------------------------------------------


def _hat(v: np.ndarray) -> np.ndarray:
    return np.array(
        [[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]]
    )


def _rodrigues(v) -> np.ndarray:
    """Closed-form exponential of the skew matrix of a 3-vector."""
    v = np.asarray(v, dtype=float)
    theta = float(np.linalg.norm(v))
    hat = _hat(v)
    # sin(t)/t and (1-cos(t))/t^2 via sinc, stable through t = 0
    a = np.sinc(theta / np.pi)
    half = np.sinc(theta / (2.0 * np.pi))
    return np.eye(3) + a * hat + 0.5 * half * half * (hat @ hat)


class GroupAction:
    """A Lie group acting on a state space, reduced to callables.

    ``bracket``, ``exp``, ``act`` and ``inf_act`` operate on numpy
    arrays; ``zero()`` makes the algebra's zero element. The invariants
    (exp of zero acts as the identity; inf_act is the derivative of the
    action along exp) are checked by the test suite via finite
    differences.
    """

    __slots__ = ("kind", "n", "algebra_dim", "bracket", "exp", "act", "inf_act", "_zero")

    def __init__(self, kind, n, algebra_dim, bracket, exp, act, inf_act, zero):
        self.kind = kind
        self.n = n
        self.algebra_dim = algebra_dim
        self.bracket = bracket
        self.exp = exp
        self.act = act
        self.inf_act = inf_act
        self._zero = np.asarray(zero, dtype=float)

    def zero(self) -> np.ndarray:
        return self._zero.copy()

    def __repr__(self) -> str:
        return f"GroupAction(kind={self.kind!r}, n={self.n})"


def _commutator(u, v):
    return u @ v - v @ u


def make_action(kind: str, n: int) -> GroupAction:
    """Build one of the supported actions.

    rotation_s2: SO(3) on R^3 by matrix-vector product; algebra elements
    are 3-vectors (hat map implied), the exponential is the Rodrigues
    formula and the bracket is the cross product. isospectral: SO(n) on
    matrices by conjugation Q y Q^T. affine: matrices of the homogeneous
    (n+1) x (n+1) embedding acting on R^n. translation: R^n on itself;
    exp is the identity and the bracket vanishes, so every method
    collapses to its classical counterpart.
    """
    if kind == "rotation":
        kind = "rotation_s2"
    if kind == "rotation_s2":
        if n != 3:
            raise DomainError("the rotation action lives on R^3")
        return GroupAction(
            kind,
            3,
            3,
            bracket=lambda u, v: np.cross(u, v),
            exp=_rodrigues,
            act=lambda g, y: g @ y,
            inf_act=lambda v, y: np.cross(v, y),
            zero=np.zeros(3),
        )
    if kind == "isospectral":
        if n < 2:
            raise DomainError("isospectral action needs n >= 2")
        return GroupAction(
            kind,
            n,
            n * (n - 1) // 2,
            bracket=_commutator,
            exp=expm,
            act=lambda g, y: g @ y @ g.T,
            inf_act=lambda v, y: v @ y - y @ v,
            zero=np.zeros((n, n)),
        )
    if kind == "affine":
        if n < 1:
            raise DomainError("affine action needs n >= 1")

        def act(g, y):
            return g[:n, :n] @ y + g[:n, n]

        return GroupAction(
            kind,
            n,
            n * n + n,
            bracket=_commutator,
            exp=expm,
            act=act,
            inf_act=lambda v, y: v[:n, :n] @ y + v[:n, n],
            zero=np.zeros((n + 1, n + 1)),
        )
    if kind == "translation":
        if n < 1:
            raise DomainError("translation action needs n >= 1")
        return GroupAction(
            kind,
            n,
            n,
            bracket=lambda u, v: np.zeros(n),
            exp=lambda v: v,
            act=lambda g, y: y + g,
            inf_act=lambda v, y: v,
            zero=np.zeros(n),
        )
    raise DomainError(
        f"unsupported action {kind!r}; choose rotation_s2, isospectral, "
        "affine or translation"
    )


def affine_element(V, b) -> np.ndarray:
    """Embed the pair (V, b) as the homogeneous algebra matrix."""
    V = np.asarray(V, dtype=float)
    b = np.asarray(b, dtype=float)
    n = len(b)
    out = np.zeros((n + 1, n + 1))
    out[:n, :n] = V
    out[:n, n] = b
    return out


class LGProblem:
    """An initial value problem written through a group action.

    ``f(t, y)`` returns an algebra element; the equation is
    y' = inf_act(f(t, y), y). ``reference`` may supply a high-accuracy
    solution callback t -> state for the convergence harness.
    """

    __slots__ = ("action", "f", "y0", "reference")

    def __init__(self, action: GroupAction, f, y0, reference=None):
        self.action = action
        self.f = f
        self.y0 = np.asarray(y0, dtype=float)
        self.reference = reference


# ---------------------------------------------------------------------------
# dexpinv and the Lie group steppers
# ---------------------------------------------------------------------------

_BERNOULLI = (
    Fraction(1),
    Fraction(-1, 2),
    Fraction(1, 6),
    Fraction(0),
    Fraction(-1, 30),
    Fraction(0),
    Fraction(1, 42),
    Fraction(0),
    Fraction(-1, 30),
    Fraction(0),
)


def dexpinv(U, K, m: int, bracket=None):
    """Truncation of the inverse right-trivialized tangent of exp: the
    first m terms of sum_k B_k/k! ad_U^k(K). The default bracket is the
    matrix commutator; vector-shaped algebras pass their own."""
    if m < 1:
        raise DomainError("dexpinv needs at least one term")
    if m > len(_BERNOULLI):
        raise DomainError(f"dexpinv truncation capped at {len(_BERNOULLI)} terms")
    if bracket is None:
        bracket = _commutator
    U = np.asarray(U, dtype=float)
    term = np.asarray(K, dtype=float)
    acc = term.copy()
    fact = 1
    for k in range(1, m):
        fact *= k
        term = bracket(U, term)
        coeff = _BERNOULLI[k]
        if coeff:
            acc = acc + (float(coeff) / fact) * term
    return acc


def _fixed_point(update, start, tol: float, label: str):
    value = start
    for _ in range(100):
        new = update(value)
        shift = float(np.max(np.abs(new - value), initial=0.0))
        scale = max(1.0, float(np.max(np.abs(new), initial=0.0)))
        value = new
        if shift <= tol * scale:
            return value
    raise DomainError(f"{label}: fixed point stalled, residual {shift:.3e}")


def _rkmk_step(tableau: RKTableau, problem: LGProblem, t, y, h, m: int, tol: float):
    A = problem.action
    f = problem.f
    s = tableau.s
    a = [[float(x) for x in row] for row in tableau.a]
    b = [float(x) for x in tableau.b]
    c = [float(x) for x in tableau.c]

    def stage(i, K):
        U = A.zero()
        for j in range(s):
            if a[i][j]:
                U = U + a[i][j] * K[j]
        return dexpinv(U, h * f(t + c[i] * h, A.act(A.exp(U), y)), m, A.bracket)

    if tableau.is_explicit:
        K = []
        for i in range(s):
            K.append(stage(i, K + [A.zero()] * (s - i)))
    else:
        K0 = [A.zero() for _ in range(s)]

        def sweep(K):
            return [stage(i, K) for i in range(s)]

        def update(stacked):
            return np.stack(sweep(list(stacked)))

        K = list(_fixed_point(update, np.stack(K0), tol, "rkmk stages"))
    U = A.zero()
    for j in range(s):
        if b[j]:
            U = U + b[j] * K[j]
    return A.act(A.exp(U), y)


def lg_step(method: str, problem: LGProblem, t, y, h, m=None, tableau=None, tol=1e-14):
    """Advance one step of a Lie group method.

    Methods: lie_euler, lie_midpoint (fixed point, tol scaled, max 100
    iterations), lie_rk4 (the two-commutator version), cf4 (the
    commutator-free two-exponential update), and rkmk:<tableau name>
    (any tableau through dexpinv; pass ``tableau`` to override the name
    lookup and ``m`` to override the truncation, which defaults to the
    classical order of the tableau minus one).
    """
    if h <= 0:
        raise DomainError("step size must be positive")
    A = problem.action
    f = problem.f
    y = np.asarray(y, dtype=float)
    if method == "lie_euler":
        return A.act(A.exp(h * f(t, y)), y)
    if method == "lie_midpoint":
        K = _fixed_point(
            lambda K: h * f(t + h / 2.0, A.act(A.exp(K / 2.0), y)),
            A.zero(),
            tol,
            "lie_midpoint",
        )
        return A.act(A.exp(K), y)
    if method == "lie_rk4":
        # Two commutators in total: one correcting the third stage, one
        # correcting the update exponent.
        K1 = h * f(t, y)
        K2 = h * f(t + h / 2.0, A.act(A.exp(K1 / 2.0), y))
        K3 = h * f(t + h / 2.0, A.act(A.exp(K2 / 2.0 - A.bracket(K1, K2) / 8.0), y))
        K4 = h * f(t + h, A.act(A.exp(K3), y))
        U = K1 / 6.0 + K2 / 3.0 + K3 / 3.0 + K4 / 6.0 - A.bracket(K1, K4) / 12.0
        return A.act(A.exp(U), y)
    if method == "cf4":
        # Exponentials are applied in the order written: the half step of
        # K1 reaches the fourth stage point first, and the update applies
        # its first exponential before its second.
        K1 = h * f(t, y)
        K2 = h * f(t + h / 2.0, A.act(A.exp(K1 / 2.0), y))
        K3 = h * f(t + h / 2.0, A.act(A.exp(K2 / 2.0), y))
        K4 = h * f(t + h, A.act(A.exp(K3 - K1 / 2.0), A.act(A.exp(K1 / 2.0), y)))
        first = A.act(A.exp(K1 / 4.0 + K2 / 6.0 + K3 / 6.0 - K4 / 12.0), y)
        return A.act(A.exp(K2 / 6.0 + K3 / 6.0 + K4 / 4.0 - K1 / 12.0), first)
    if method == "rkmk" or method.startswith("rkmk:"):
        if tableau is None:
            if ":" not in method:
                raise DomainError("rkmk needs a tableau: use rkmk:<name>")
            tableau = builtin_tableau(method.split(":", 1)[1])
        if m is None:
            order = order_of(rk_character(tableau, 5), 5)
            m = max(1, order - 1)
        return _rkmk_step(tableau, problem, t, y, h, m, tol)
    raise DomainError(
        f"unknown method {method!r}; choose lie_euler, lie_midpoint, lie_rk4, "
        "cf4 or rkmk:<tableau>"
    )


LG_METHODS = ("lie_euler", "lie_midpoint", "lie_rk4", "cf4")


def integrate(
    method: str,
    problem: LGProblem,
    h: float,
    steps: int,
    t0: float = 0.0,
    m=None,
    tableau=None,
) -> list[np.ndarray]:
    """Run ``steps`` steps from the problem's initial state; returns the
    trajectory including the initial state (steps + 1 entries)."""
    if steps < 1:
        raise DomainError("need at least one step")
    y = problem.y0.copy()
    out = [y]
    t = t0
    for _ in range(steps):
        y = lg_step(method, problem, t, y, h, m=m, tableau=tableau)
        t += h
        out.append(y)
    return out


def convergence_order(
    method: str,
    problem: LGProblem,
    t_end: float,
    h_list: Sequence[float],
    m=None,
    tableau=None,
):
    """Measure the convergence order of a method on a problem.

    For each h (t_end must be an integer number of steps), the end state
    is compared against the problem's reference callback, or against the
    same method run at h/64 when no reference is given. Returns the
    least-squares slope of log error against log h together with the rows
    (h, error, pairwise slope or None).
    """
    if len(h_list) < 3:
        raise DomainError("order measurement needs at least three step sizes")
    errors = []
    for h in h_list:
        raw = t_end / h
        steps = round(raw)
        if steps < 1 or abs(raw - steps) > 1e-9:
            raise DomainError(f"t_end is not a whole number of steps of {h}")
        yT = integrate(method, problem, h, steps, m=m, tableau=tableau)[-1]
        if problem.reference is not None:
            ref = np.asarray(problem.reference(t_end), dtype=float)
        else:
            ref = integrate(method, problem, h / 64.0, steps * 64, m=m, tableau=tableau)[-1]
        err = float(np.linalg.norm(yT - ref))
        errors.append(max(err, np.finfo(float).tiny))
    logs_h = np.log(np.asarray(h_list, dtype=float))
    logs_e = np.log(np.asarray(errors))
    slope = float(np.polyfit(logs_h, logs_e, 1)[0])
    rows = []
    for i, (h, err) in enumerate(zip(h_list, errors)):
        if i == 0:
            rows.append((float(h), err, None))
        else:
            pair = float((logs_e[i - 1] - logs_e[i]) / (logs_h[i - 1] - logs_h[i]))
            rows.append((float(h), err, pair))
    return slope, rows


# ---------------------------------------------------------------------------
# Stock test problems
# ---------------------------------------------------------------------------


def rigid_body_problem(inertia=(1.0, 2.0, 4.0), y0=(0.8, 0.6, 0.0)) -> LGProblem:
    """Free rigid body as a rotation problem: y' = v(y) x y with
    v(y) = y / inertia componentwise. Norm of y is conserved."""
    action = make_action("rotation_s2", 3)
    moments = np.asarray(inertia, dtype=float)

    def f(t, y):
        return np.asarray(y, dtype=float) / moments

    return LGProblem(action, f, y0)


def toda_problem(y0=None) -> LGProblem:
    """Toda-style isospectral flow: f(y) is the skew part y_+ - y_- built
    from the strict triangles of y. Eigenvalues of y are conserved."""
    if y0 is None:
        y0 = [[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]]
    y0 = np.asarray(y0, dtype=float)
    action = make_action("isospectral", y0.shape[0])

    def f(t, y):
        return np.triu(y, 1) - np.tril(y, -1)

    return LGProblem(action, f, y0)


def bell_frechet_word(word) -> str:
    """Symbolic image of a Bell word under the letter map d_i to the
    (i-1)-th derivative of the frozen field. Bookkeeping only."""
    if not word.word:
        return "1"
    return ".".join(f"F^({i - 1})" for i in word.word)
