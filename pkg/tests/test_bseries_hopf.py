"""Tests for the composition and substitution structure on forests.

The coproduct tables are frozen strings checked against both
implementations; convolution identities, antipode laws, modified-field
solves, and the geometric pair conditions are verified exhaustively on
small orders and on seeded random characters.
"""

from __future__ import annotations

import random
from fractions import Fraction

import pytest

from bflow.algebra import FormalSum, Tensor, render_sum
from bflow.bseries_hopf import (
    BCoeff,
    RKTableau,
    antipode_bck,
    builtin_tableau,
    cefm_splits,
    check_geometric,
    convolve_bck,
    delta_bck,
    delta_bck_recursive,
    delta_cefm,
    dot_field,
    elementary_weights,
    eta,
    exact_gamma,
    order_of,
    order_report,
    parse_tableau,
    rk_character,
    solve_modified,
    substitute_b,
)
from bflow.errors import CapacityError, DomainError, ParseError
from bflow.forest_core import (
    Forest,
    RootedTree,
    enumerate_forests,
    enumerate_trees,
    parse_forest,
    parse_tree,
    single,
    tree_stats,
)

DOT = single()
L2 = parse_tree("[[]]")
CHERRY = parse_tree("[[][]]")
L3 = parse_tree("[[[]]]")


def show(tensors: FormalSum) -> str:
    return render_sum(
        tensors, sort_key=lambda t: (-t.left.order, t.left.serial, t.right.serial)
    )


# ---------------------------------------------------------------------------
# Pruning coproduct: frozen table
# ---------------------------------------------------------------------------


BCK_TABLE = [
    ("1", "1 (x) 1"),
    ("[]", "[] (x) 1 + 1 (x) []"),
    ("[[]]", "[[]] (x) 1 + [] (x) [] + 1 (x) [[]]"),
    (
        "[[[]]]",
        "[[[]]] (x) 1 + [[]] (x) [] + [] (x) [[]] + 1 (x) [[[]]]",
    ),
    (
        "[[][]]",
        "[[][]] (x) 1 + [] [] (x) [] + 2 * [] (x) [[]] + 1 (x) [[][]]",
    ),
    (
        "[[[[]]]]",
        "[[[[]]]] (x) 1 + [[[]]] (x) [] + [[]] (x) [[]] + [] (x) [[[]]] + 1 (x) [[[[]]]]",
    ),
    (
        "[[[][]]]",
        "[[[][]]] (x) 1 + [[][]] (x) [] + [] [] (x) [[]] + 2 * [] (x) [[[]]] "
        "+ 1 (x) [[[][]]]",
    ),
    (
        "[[[]][]]",
        "[[[]][]] (x) 1 + [[]] [] (x) [] + [[]] (x) [[]] + [] [] (x) [[]] "
        "+ [] (x) [[[]]] + [] (x) [[][]] + 1 (x) [[[]][]]",
    ),
]


@pytest.mark.parametrize("serial, expected", BCK_TABLE, ids=lambda x: x[:20])
def test_delta_bck_table(serial, expected):
    assert show(delta_bck(parse_forest(serial))) == expected


@pytest.mark.parametrize("serial, expected", BCK_TABLE, ids=lambda x: x[:20])
def test_delta_bck_recursive_table(serial, expected):
    assert show(delta_bck_recursive(parse_forest(serial))) == expected


def test_delta_bck_routes_agree_to_order_six():
    for n in range(0, 7):
        for forest in enumerate_forests(n):
            assert delta_bck(forest) == delta_bck_recursive(forest)


def test_delta_bck_multiplicative():
    f1 = parse_forest("[[]]")
    f2 = parse_forest("[] []")
    combined = delta_bck(f1 * f2)
    product = FormalSum.zero()
    for t1, c1 in delta_bck(f1):
        for t2, c2 in delta_bck(f2):
            product = product + FormalSum.term(
                Tensor(t1.left * t2.left, t1.right * t2.right), c1 * c2
            )
    assert combined == product


def test_delta_bck_vertex_grading():
    for n in range(0, 6):
        for forest in enumerate_forests(n):
            for t, _ in delta_bck(forest):
                assert t.left.order + t.right.order == n


def triple(delta, forest, first_slot: bool) -> dict:
    """Apply delta twice, once into the chosen slot, collecting a
    three-slot coefficient dictionary."""
    out: dict = {}
    for t, c in delta(forest):
        inner = delta(t.left if first_slot else t.right)
        for s, d in inner:
            key = (s.left, s.right, t.right) if first_slot else (t.left, s.left, s.right)
            out[key] = out.get(key, Fraction(0)) + c * d
    return {k: v for k, v in out.items() if v}


@pytest.mark.parametrize("delta", [delta_bck, delta_cefm], ids=["prune", "contract"])
def test_coassociativity(delta):
    for n in range(0, 6):
        for forest in enumerate_forests(n):
            assert triple(delta, forest, True) == triple(delta, forest, False)


# ---------------------------------------------------------------------------
# Antipode
# ---------------------------------------------------------------------------


def test_antipode_small():
    assert render_sum(
        antipode_bck(DOT), sort_key=lambda f: (f.order, f.serial)
    ) == "-1 * []"
    assert render_sum(
        antipode_bck(L2), sort_key=lambda f: (f.order, f.serial)
    ) == "-1 * [[]] + [] []"
    assert render_sum(
        antipode_bck(CHERRY), sort_key=lambda f: (f.order, f.serial)
    ) == "-1 * [[][]] + 2 * [[]] [] + -1 * [] [] []"


def test_antipode_unit():
    assert antipode_bck(parse_forest("1")) == FormalSum.term(Forest())


def test_antipode_multiplicative():
    f = parse_forest("[[]] []")
    direct = antipode_bck(f)
    left = antipode_bck(L2)
    right = antipode_bck(DOT)
    product = FormalSum.zero()
    for f1, c1 in left:
        for f2, c2 in right:
            product = product + FormalSum.term(f1 * f2, c1 * c2)
    assert direct == product


def random_character(rng: random.Random, N: int) -> BCoeff:
    values = {}
    for n in range(1, N + 1):
        for tree in enumerate_trees(n):
            values[tree] = Fraction(rng.randint(-6, 6), rng.randint(1, 6))
    return BCoeff.character(values, N)


def test_antipode_gives_convolution_inverse():
    rng = random.Random(20240817)
    for _ in range(50):
        alpha = random_character(rng, 5)
        inv = BCoeff.character(lambda t: alpha(antipode_bck(t)), 5)
        conv = convolve_bck(alpha, inv, 5)
        for n in range(1, 6):
            for tree in enumerate_trees(n):
                assert conv(tree) == 0
        assert conv.unit_value() == 1


# ---------------------------------------------------------------------------
# Convolution
# ---------------------------------------------------------------------------


def test_convolution_unit_law():
    rng = random.Random(7)
    alpha = random_character(rng, 4)
    for conv in (convolve_bck(alpha, eta(4), 4), convolve_bck(eta(4), alpha, 4)):
        for n in range(1, 5):
            for tree in enumerate_trees(n):
                assert conv(tree) == alpha(tree)


def test_exact_flow_self_composition():
    gamma = exact_gamma(4)
    twice = convolve_bck(gamma, gamma, 4)
    # Composing two unit-step exact flows is the exact 2-step flow.
    for n in range(1, 5):
        for tree in enumerate_trees(n):
            assert twice(tree) == 2**n * gamma(tree)


def test_euler_composed_with_itself():
    euler = rk_character(builtin_tableau("euler"), 4)
    twice = convolve_bck(euler, euler, 4)
    assert twice(L2) == 1


def test_first_applied_method_sits_in_first_slot():
    # Euler then exact flow: the h^3 cherry coefficient is 7/3; swapped
    # order gives 4/3, so the slot convention is observable.
    euler = rk_character(builtin_tableau("euler"), 4)
    gamma = exact_gamma(4)
    assert convolve_bck(euler, gamma, 4)(CHERRY) == Fraction(7, 3)
    assert convolve_bck(gamma, euler, 4)(CHERRY) == Fraction(4, 3)


def test_convolution_associativity_random():
    rng = random.Random(99)
    for _ in range(10):
        a = random_character(rng, 5)
        b = random_character(rng, 5)
        c = random_character(rng, 5)
        left = convolve_bck(convolve_bck(a, b, 5), c, 5)
        right = convolve_bck(a, convolve_bck(b, c, 5), 5)
        for n in range(1, 6):
            for tree in enumerate_trees(n):
                assert left(tree) == right(tree)


def test_convolution_truncation_mismatch():
    with pytest.raises(DomainError):
        convolve_bck(exact_gamma(3), exact_gamma(5), 4)


def test_evaluation_beyond_truncation():
    gamma = exact_gamma(2)
    with pytest.raises(CapacityError):
        gamma(CHERRY)


# ---------------------------------------------------------------------------
# Exact flow coefficients
# ---------------------------------------------------------------------------


def test_exact_gamma_values():
    gamma = exact_gamma(4)
    assert gamma(DOT) == 1
    assert gamma(CHERRY) == Fraction(1, 3)
    assert gamma(L3) == Fraction(1, 6)
    assert gamma(parse_forest("1")) == 1
    assert gamma(parse_forest("[] [[]]")) == Fraction(1, 2)


# ---------------------------------------------------------------------------
# Tableaus and elementary weights
# ---------------------------------------------------------------------------


def test_tableau_round_sums():
    rk4 = builtin_tableau("rk4")
    assert rk4.c == (0, Fraction(1, 2), Fraction(1, 2), 1)
    assert rk4.is_explicit
    assert not builtin_tableau("implicit_midpoint").is_explicit


def test_tableau_c_consistency_enforced():
    with pytest.raises(DomainError):
        RKTableau([[0]], [1], c=[Fraction(1, 2)])


def test_parse_tableau():
    text = "2\n0 0\n1/2 0\n0 1\n"
    tab = parse_tableau(text)
    assert tab.s == 2
    assert tab.a[1][0] == Fraction(1, 2)
    assert tab.c == (0, Fraction(1, 2))
    with pytest.raises(ParseError):
        parse_tableau("2\n0 0\n1/2 0\n")
    with pytest.raises(ParseError):
        parse_tableau("x\n")
    with pytest.raises(ParseError):
        parse_tableau("1\n0 0\n1\n")


def random_tableau(rng: random.Random, s: int) -> RKTableau:
    a = [[Fraction(rng.randint(-3, 3), rng.randint(1, 4)) for _ in range(s)] for _ in range(s)]
    b = [Fraction(rng.randint(-3, 3), rng.randint(1, 4)) for _ in range(s)]
    return RKTableau(a, b)


def test_elementary_weights_closed_forms():
    # Low-order weights have classical closed forms in the coefficients.
    rng = random.Random(5)
    for _ in range(5):
        tab = random_tableau(rng, 3)
        s = range(tab.s)
        assert elementary_weights(tab, DOT) == sum(tab.b[j] for j in s)
        assert elementary_weights(tab, L2) == sum(tab.b[j] * tab.c[j] for j in s)
        assert elementary_weights(tab, CHERRY) == sum(tab.b[j] * tab.c[j] ** 2 for j in s)
        assert elementary_weights(tab, L3) == sum(
            tab.b[j] * tab.a[j][k] * tab.c[k] for j in s for k in s
        )


def test_implicit_midpoint_weights():
    tab = builtin_tableau("implicit_midpoint")
    assert [elementary_weights(tab, t) for t in (DOT, L2, CHERRY, L3)] == [
        1,
        Fraction(1, 2),
        Fraction(1, 4),
        Fraction(1, 4),
    ]


def test_implicit_midpoint_weight_formula():
    # The one-stage midpoint rule weights depend only on the order.
    tab = builtin_tableau("implicit_midpoint")
    for n in range(1, 7):
        for tree in enumerate_trees(n):
            assert elementary_weights(tab, tree) == Fraction(1, 2 ** (n - 1))


@pytest.mark.parametrize(
    "name, expected",
    [("euler", 1), ("explicit_midpoint", 2), ("implicit_midpoint", 2), ("rk4", 4)],
)
def test_builtin_orders(name, expected):
    alpha = rk_character(builtin_tableau(name), 6)
    assert order_of(alpha, 5) == expected


def test_rk4_order_report():
    alpha = rk_character(builtin_tableau("rk4"), 6)
    n, violation = order_report(alpha, 5)
    assert n == 4
    assert violation is not None and violation.order == 5
    # Every order-4 condition holds exactly.
    for k in range(1, 5):
        for tree in enumerate_trees(k):
            assert alpha(tree) == Fraction(1, tree_stats(tree)[2])


def test_order_zero_for_inconsistent():
    alpha = BCoeff.character({DOT: Fraction(1, 2)}, 4)
    assert order_of(alpha, 4) == 0


# ---------------------------------------------------------------------------
# Contraction coproduct: frozen table
# ---------------------------------------------------------------------------


CEFM_TABLE = [
    ("[]", "[] (x) []"),
    ("[[]]", "[[]] (x) [] + [] [] (x) [[]]"),
    (
        "[[[]]]",
        "[[[]]] (x) [] + 2 * [[]] [] (x) [[]] + [] [] [] (x) [[[]]]",
    ),
    (
        "[[][]]",
        "[[][]] (x) [] + 2 * [[]] [] (x) [[]] + [] [] [] (x) [[][]]",
    ),
    (
        "[[[[]]]]",
        "[[[[]]]] (x) [] + 2 * [[[]]] [] (x) [[]] + [[]] [[]] (x) [[]] "
        "+ 3 * [[]] [] [] (x) [[[]]] + [] [] [] [] (x) [[[[]]]]",
    ),
    (
        "[[[][]]]",
        "[[[][]]] (x) [] + 2 * [[[]]] [] (x) [[]] + [[][]] [] (x) [[]] "
        "+ 2 * [[]] [] [] (x) [[[]]] + [[]] [] [] (x) [[][]] + [] [] [] [] (x) [[[][]]]",
    ),
    (
        "[[[]][]]",
        "[[[]][]] (x) [] + [[[]]] [] (x) [[]] + [[][]] [] (x) [[]] + [[]] [[]] (x) [[]] "
        "+ [[]] [] [] (x) [[[]]] + 2 * [[]] [] [] (x) [[][]] + [] [] [] [] (x) [[[]][]]",
    ),
]


@pytest.mark.parametrize("serial, expected", CEFM_TABLE, ids=lambda x: x[:20])
def test_delta_cefm_table(serial, expected):
    assert show(delta_cefm(parse_forest(serial))) == expected


def test_delta_cefm_edge_grading():
    def edges(f: Forest) -> int:
        return f.order - len(f.trees)

    for n in range(1, 6):
        for forest in enumerate_forests(n):
            if not forest.trees:
                continue
            e = edges(forest)
            for t, _ in delta_cefm(forest):
                assert edges(t.left) + edges(t.right) == e


def test_cefm_split_count_is_edge_powerset():
    for n in range(1, 7):
        for tree in enumerate_trees(n):
            assert len(cefm_splits(tree)) == 2 ** (tree.order - 1)


# ---------------------------------------------------------------------------
# Substitution and modified fields
# ---------------------------------------------------------------------------


def random_field(rng: random.Random, N: int) -> BCoeff:
    values = {DOT: Fraction(1)}
    for n in range(2, N + 1):
        for tree in enumerate_trees(n):
            values[tree] = Fraction(rng.randint(-6, 6), rng.randint(1, 6))
    return BCoeff.infinitesimal(values, N)


def test_substitution_identity():
    gamma = exact_gamma(4)
    out = substitute_b(dot_field(4), gamma, 4)
    for n in range(1, 5):
        for tree in enumerate_trees(n):
            assert out(tree) == gamma(tree)
    assert out.unit_value() == 1


def test_substitution_low_order_formulas():
    rng = random.Random(11)
    alpha = random_field(rng, 3)
    beta = random_character(rng, 3)
    out = substitute_b(alpha, beta, 3)
    assert out(DOT) == alpha(DOT) * beta(DOT)
    assert out(L2) == alpha(L2) * beta(DOT) + alpha(DOT) ** 2 * beta(L2)


def test_substitution_rejects_nonfield():
    with pytest.raises(DomainError):
        substitute_b(exact_gamma(3), exact_gamma(3), 3)


def test_solve_modified_euler():
    euler = rk_character(builtin_tableau("euler"), 4)
    back = solve_modified(euler, "backward_error", 4)
    mod = solve_modified(euler, "modifying_integrator", 4)
    assert back(L2) == Fraction(-1, 2)
    assert mod(L2) == Fraction(1, 2)
    assert back.unit_value() == 0


def test_solve_modified_exact_flow_is_fixed():
    gamma = exact_gamma(4)
    for mode in ("backward_error", "modifying_integrator"):
        beta = solve_modified(gamma, mode, 4)
        assert beta(DOT) == 1
        for n in range(2, 5):
            for tree in enumerate_trees(n):
                assert beta(tree) == 0


@pytest.mark.parametrize("name", ["euler", "explicit_midpoint", "implicit_midpoint", "rk4"])
def test_solve_modified_roundtrips(name):
    alpha = rk_character(builtin_tableau(name), 5)
    gamma = exact_gamma(5)
    back = solve_modified(alpha, "backward_error", 5)
    recovered = substitute_b(back, gamma, 5)
    mod = solve_modified(alpha, "modifying_integrator", 5)
    exactified = substitute_b(mod, alpha, 5)
    for n in range(1, 6):
        for tree in enumerate_trees(n):
            assert recovered(tree) == alpha(tree)
            assert exactified(tree) == gamma(tree)


def test_solve_modified_requires_consistency():
    with pytest.raises(DomainError):
        solve_modified(eta(3), "backward_error", 3)
    with pytest.raises(DomainError):
        solve_modified(exact_gamma(3), "sideways", 3)


# ---------------------------------------------------------------------------
# Geometric pair conditions
# ---------------------------------------------------------------------------


def test_midpoint_is_symplectic():
    alpha = rk_character(builtin_tableau("implicit_midpoint"), 6)
    assert check_geometric(alpha, "symplectic_method", 6) == []


def test_euler_is_not_symplectic():
    alpha = rk_character(builtin_tableau("euler"), 4)
    violations = check_geometric(alpha, "symplectic_method", 2)
    assert violations == [(DOT, DOT)]


def test_zero_field_is_hamiltonian():
    alpha = BCoeff.infinitesimal({}, 4)
    assert check_geometric(alpha, "hamiltonian_field", 4) == []


def test_dot_field_is_hamiltonian():
    assert check_geometric(dot_field(4), "hamiltonian_field", 4) == []


def test_hamiltonian_requires_field():
    with pytest.raises(DomainError):
        check_geometric(exact_gamma(4), "hamiltonian_field", 4)


def test_symplectic_method_has_hamiltonian_modified_field():
    alpha = rk_character(builtin_tableau("implicit_midpoint"), 6)
    beta = solve_modified(alpha, "backward_error", 6)
    assert check_geometric(beta, "hamiltonian_field", 6) == []


def test_nonsymplectic_method_fails_through_its_field():
    euler = rk_character(builtin_tableau("euler"), 4)
    beta = solve_modified(euler, "backward_error", 4)
    violations = check_geometric(beta, "hamiltonian_field", 4)
    assert (DOT, DOT) in violations
