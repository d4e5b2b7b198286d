"""Rooted trees, planar (ordered) trees, forests, and their products.

Serialized grammar, used everywhere (tests, dumps, the command line):

    tree   := "[" [color ":"] forest "]"
    forest := tree tree ... | "1"

``[]`` is the single vertex, ``[[][]]`` the cherry, ``[[[]]]`` the
three-vertex ladder, and ``1`` the empty forest. Trees inside a forest
may be juxtaposed or separated by whitespace. A vertex color other than
the default 0 is tagged as in ``[2:[][]]``.

Non-planar trees keep their children sorted by serialized form, so two
trees are isomorphic exactly when their serial strings are equal. Planar
trees keep child order as given.

The products implemented here:

* ``butcher_product``    graft a forest directly onto the root
* ``prelie_graft``       sum of single-edge attachments over all vertices
* ``left_graft``         planar grafting, attaching as leftmost child
* ``shuffle``            word shuffle of planar forests
* ``gl_product``         Grossman-Larson product of planar forests
"""

from __future__ import annotations

import functools
import itertools
import os
from typing import Iterable, Iterator, Sequence, Union

from .algebra import FormalSum, as_sum, bilinear
from .errors import CapacityError, DomainError, ParseError

DEFAULT_MAX_ORDER = 8


def max_order() -> int:
    """The configured order cap (environment variable BF_MAX_ORDER, default 8)."""
    raw = os.environ.get("BF_MAX_ORDER")
    if raw is None:
        return DEFAULT_MAX_ORDER
    try:
        value = int(raw)
    except ValueError as exc:
        raise CapacityError(f"BF_MAX_ORDER must be an integer, got {raw!r}") from exc
    if value < 1:
        raise CapacityError(f"BF_MAX_ORDER must be positive, got {value}")
    return value


def _check_capacity(n: int) -> None:
    cap = max_order()
    if n > cap:
        raise CapacityError(
            f"order {n} exceeds the configured cap {cap}; raise BF_MAX_ORDER to go higher"
        )


class RootedTree:
    """A non-planar rooted tree; children form a canonically sorted multiset."""

    __slots__ = ("children", "color", "order", "serial", "_hash")

    def __init__(self, children: Iterable["RootedTree"] = (), color: int = 0):
        kids = tuple(sorted(children, key=lambda t: t.serial))
        for kid in kids:
            if not isinstance(kid, RootedTree):
                raise TypeError(f"RootedTree children must be RootedTree, got {type(kid)}")
        self.children = kids
        self.color = color
        tag = f"{color}:" if color else ""
        self.serial = "[" + tag + "".join(t.serial for t in kids) + "]"
        self.order = 1 + sum(t.order for t in kids)
        self._hash = hash(self.serial)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, RootedTree):
            return self.serial == other.serial
        return NotImplemented

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"RootedTree({self.serial!r})"


class PlanarTree:
    """An ordered rooted tree; the order of children is significant."""

    __slots__ = ("children", "color", "order", "serial", "_hash")

    def __init__(self, children: Iterable["PlanarTree"] = (), color: int = 0):
        kids = tuple(children)
        for kid in kids:
            if not isinstance(kid, PlanarTree):
                raise TypeError(f"PlanarTree children must be PlanarTree, got {type(kid)}")
        self.children = kids
        self.color = color
        tag = f"{color}:" if color else ""
        self.serial = "[" + tag + "".join(t.serial for t in kids) + "]"
        self.order = 1 + sum(t.order for t in kids)
        self._hash = hash(("p", self.serial))

    def __eq__(self, other: object) -> bool:
        if isinstance(other, PlanarTree):
            return self.serial == other.serial
        return NotImplemented

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"PlanarTree({self.serial!r})"


class Forest:
    """A multiset of non-planar rooted trees; the empty forest is the unit."""

    __slots__ = ("trees", "order", "serial", "_hash")

    def __init__(self, trees: Iterable[RootedTree] = ()):
        ts = tuple(sorted(trees, key=lambda t: t.serial))
        for t in ts:
            if not isinstance(t, RootedTree):
                raise TypeError(f"Forest members must be RootedTree, got {type(t)}")
        self.trees = ts
        self.order = sum(t.order for t in ts)
        self.serial = " ".join(t.serial for t in ts) if ts else "1"
        self._hash = hash(self.serial)

    def __mul__(self, other: "Forest") -> "Forest":
        return Forest(self.trees + other.trees)

    def __len__(self) -> int:
        return len(self.trees)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Forest):
            return self.serial == other.serial
        return NotImplemented

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"Forest({self.serial!r})"


class PlanarForest:
    """An ordered word of planar trees; concatenation is the magma product."""

    __slots__ = ("word", "order", "serial", "_hash")

    def __init__(self, word: Iterable[PlanarTree] = ()):
        ws = tuple(word)
        for t in ws:
            if not isinstance(t, PlanarTree):
                raise TypeError(f"PlanarForest members must be PlanarTree, got {type(t)}")
        self.word = ws
        self.order = sum(t.order for t in ws)
        self.serial = " ".join(t.serial for t in ws) if ws else "1"
        self._hash = hash(("p", self.serial))

    def __mul__(self, other: "PlanarForest") -> "PlanarForest":
        return PlanarForest(self.word + other.word)

    def __len__(self) -> int:
        return len(self.word)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, PlanarForest):
            return self.serial == other.serial
        return NotImplemented

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"PlanarForest({self.serial!r})"


Tree = Union[RootedTree, PlanarTree]
AnyForest = Union[Forest, PlanarForest]

EMPTY_FOREST = Forest()
EMPTY_WORD = PlanarForest()


def single(color: int = 0) -> RootedTree:
    """The one-vertex tree."""
    return RootedTree((), color)


def psingle(color: int = 0) -> PlanarTree:
    """The one-vertex planar tree."""
    return PlanarTree((), color)


# ---------------------------------------------------------------------------
# B+ / B- and basic statistics
# ---------------------------------------------------------------------------


def bplus(forest: AnyForest, color: int = 0) -> Tree:
    """Attach every tree of the forest to a fresh root."""
    if isinstance(forest, Forest):
        return RootedTree(forest.trees, color)
    if isinstance(forest, PlanarForest):
        return PlanarTree(forest.word, color)
    raise TypeError(f"bplus expects a forest, got {type(forest)}")


def bminus(tree: Tree) -> AnyForest:
    """Remove the root, returning the forest of its subtrees."""
    if isinstance(tree, RootedTree):
        return Forest(tree.children)
    if isinstance(tree, PlanarTree):
        return PlanarForest(tree.children)
    raise DomainError(f"bminus needs a single tree, got {type(tree).__name__}")


@functools.lru_cache(maxsize=None)
def tree_stats(tree: RootedTree) -> tuple[int, int, int]:
    """Return ``(order, sigma, factorial)`` for a non-planar tree.

    ``sigma`` is the symmetry (automorphism count): the product over the
    distinct child shapes of ``sigma(child)**m * m!`` where ``m`` is the
    multiplicity. The tree factorial follows the recursion
    ``B+(t1..tk)! = |B+(t1..tk)| * t1! * ... * tk!``.
    """
    if not isinstance(tree, RootedTree):
        raise TypeError("tree_stats is defined for non-planar RootedTree input")
    sigma = 1
    factorial = tree.order
    for shape, group in itertools.groupby(tree.children):
        m = len(list(group))
        _, child_sigma, child_factorial = tree_stats(shape)
        sigma *= child_sigma**m * _int_factorial(m)
        factorial *= child_factorial**m
    return tree.order, sigma, factorial


def _int_factorial(n: int) -> int:
    out = 1
    for k in range(2, n + 1):
        out *= k
    return out


def forest_sigma(forest: Forest) -> int:
    """Symmetry of a forest: tree symmetries times multiplicity factorials."""
    sigma = 1
    for shape, group in itertools.groupby(forest.trees):
        m = len(list(group))
        sigma *= tree_stats(shape)[1] ** m * _int_factorial(m)
    return sigma


# ---------------------------------------------------------------------------
# Enumeration
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=None)
def _nonplanar_trees(n: int) -> tuple[RootedTree, ...]:
    if n == 1:
        return (single(),)
    out = [bplus(f) for f in _nonplanar_forests(n - 1)]
    return tuple(sorted(set(out), key=lambda t: t.serial))


@functools.lru_cache(maxsize=None)
def _nonplanar_pool(n: int) -> tuple[RootedTree, ...]:
    pool: list[RootedTree] = []
    for k in range(1, n + 1):
        pool.extend(_nonplanar_trees(k))
    return tuple(pool)


@functools.lru_cache(maxsize=None)
def _nonplanar_forests(n: int) -> tuple[Forest, ...]:
    if n == 0:
        return (EMPTY_FOREST,)
    pool = _nonplanar_pool(n)

    def pick(remaining: int, start: int) -> Iterator[tuple[RootedTree, ...]]:
        if remaining == 0:
            yield ()
            return
        for i in range(start, len(pool)):
            t = pool[i]
            if t.order <= remaining:
                for rest in pick(remaining - t.order, i):
                    yield (t,) + rest

    forests = [Forest(ts) for ts in pick(n, 0)]
    return tuple(sorted(forests, key=lambda f: f.serial))


@functools.lru_cache(maxsize=None)
def _planar_trees(n: int) -> tuple[PlanarTree, ...]:
    if n == 1:
        return (psingle(),)
    out = [bplus(f) for f in _planar_forests(n - 1)]
    return tuple(sorted(out, key=lambda t: t.serial))


@functools.lru_cache(maxsize=None)
def _planar_forests(n: int) -> tuple[PlanarForest, ...]:
    if n == 0:
        return (EMPTY_WORD,)
    out = []
    for k in range(1, n + 1):
        for head in _planar_trees(k):
            for tail in _planar_forests(n - k):
                out.append(PlanarForest((head,) + tail.word))
    return tuple(sorted(out, key=lambda f: f.serial))


def enumerate_trees(n: int, planar: bool = False) -> list[Tree]:
    """All trees of order exactly ``n`` in canonical serialization order."""
    if n < 1:
        raise DomainError(f"tree order must be at least 1, got {n}")
    _check_capacity(n)
    return list(_planar_trees(n) if planar else _nonplanar_trees(n))


def enumerate_forests(n: int, planar: bool = False) -> list[AnyForest]:
    """All forests of total order exactly ``n`` (n = 0 gives the unit)."""
    if n < 0:
        raise DomainError(f"forest order must be non-negative, got {n}")
    _check_capacity(n)
    return list(_planar_forests(n) if planar else _nonplanar_forests(n))


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _parse_word(text: str, pos: int, planar: bool) -> tuple[list, int]:
    items = []
    n = len(text)
    while pos < n:
        ch = text[pos]
        if ch.isspace():
            pos += 1
            continue
        if ch == "]":
            break
        if ch != "[":
            raise ParseError("expected '['", text, pos)
        tree, pos = _parse_tree(text, pos, planar)
        items.append(tree)
    return items, pos


def _parse_tree(text: str, pos: int, planar: bool) -> tuple[Tree, int]:
    assert text[pos] == "["
    start = pos
    pos += 1
    color = 0
    digits = ""
    while pos < len(text) and text[pos].isdigit():
        digits += text[pos]
        pos += 1
    if digits:
        if pos < len(text) and text[pos] == ":":
            color = int(digits)
            pos += 1
        else:
            raise ParseError("color tag must be followed by ':'", text, pos)
    children, pos = _parse_word(text, pos, planar)
    if pos >= len(text) or text[pos] != "]":
        raise ParseError("unclosed '['", text, start)
    pos += 1
    cls = PlanarTree if planar else RootedTree
    return cls(children, color), pos


def parse_forest(text: str, planar: bool = False) -> AnyForest:
    """Parse the bracket grammar; ``"1"`` denotes the empty forest."""
    stripped = text.strip()
    if stripped == "1":
        return EMPTY_WORD if planar else EMPTY_FOREST
    items, pos = _parse_word(text, 0, planar)
    if pos != len(text) and not text[pos:].isspace():
        raise ParseError("trailing input", text, pos)
    if not items:
        raise ParseError("empty input (write '1' for the empty forest)", text, 0)
    return PlanarForest(items) if planar else Forest(items)


def parse_tree(text: str, planar: bool = False) -> Tree:
    forest = parse_forest(text, planar)
    seq = forest.word if planar else forest.trees
    if len(seq) != 1:
        raise ParseError("expected a single tree", text, 0)
    return seq[0]


# ---------------------------------------------------------------------------
# Products
# ---------------------------------------------------------------------------


def butcher_product(tree: RootedTree, forest: Forest | RootedTree) -> RootedTree:
    """Graft every tree of ``forest`` directly onto the root of ``tree``."""
    if isinstance(forest, RootedTree):
        forest = Forest((forest,))
    if not isinstance(tree, RootedTree) or not isinstance(forest, Forest):
        raise DomainError("butcher_product expects a non-planar tree and forest")
    return RootedTree(tree.children + forest.trees, tree.color)


def prelie_graft(t1: RootedTree, t2: RootedTree) -> FormalSum:
    """Sum over the vertices of ``t2`` of attaching ``t1`` below that vertex.

    Defined on single non-planar trees only; forests raise DomainError.
    """
    if isinstance(t1, (Forest, PlanarForest)) or isinstance(t2, (Forest, PlanarForest)):
        raise DomainError("prelie_graft is defined on trees, not forests")
    if not isinstance(t1, RootedTree) or not isinstance(t2, RootedTree):
        raise DomainError("prelie_graft expects non-planar rooted trees")
    return _prelie(t1, t2)


@functools.lru_cache(maxsize=None)
def _prelie(t1: RootedTree, t2: RootedTree) -> FormalSum:
    out = FormalSum.term(RootedTree(t2.children + (t1,), t2.color))
    for i, child in enumerate(t2.children):
        rest = t2.children[:i] + t2.children[i + 1 :]
        for sub, coeff in _prelie(t1, child):
            out = out + FormalSum.term(RootedTree(rest + (sub,), t2.color), coeff)
    return out


def _as_word(x) -> PlanarForest:
    if isinstance(x, PlanarForest):
        return x
    if isinstance(x, PlanarTree):
        return PlanarForest((x,))
    raise TypeError(f"expected a planar forest, got {type(x)}")


@functools.lru_cache(maxsize=None)
def _graft(w1: PlanarForest, w2: PlanarForest) -> FormalSum:
    # The defining recursion. The only case not forced by bilinearity is a
    # single tree grafted onto a single tree, handled by attaching it as the
    # leftmost child of each vertex: onto B+(w) this is B+(t w) + B+(t -> w).
    if not w1.word:
        return FormalSum.term(w2)
    if not w2.word:
        return FormalSum.zero()
    if len(w1.word) >= 2:
        head = PlanarForest(w1.word[:1])
        tail = PlanarForest(w1.word[1:])
        inner = _graft(tail, w2).map_basis(lambda w: _graft(head, w))
        outer = _graft(head, tail).map_basis(lambda w: _graft(w, w2))
        return inner - outer
    if len(w2.word) >= 2:
        head = PlanarForest(w2.word[:1])
        tail = PlanarForest(w2.word[1:])
        left = _graft(w1, head).map_basis(lambda w: w * tail)
        right = _graft(w1, tail).map_basis(lambda w: head * w)
        return left + right
    target = w2.word[0]
    inside = PlanarForest(target.children)
    first = PlanarTree((w1.word[0],) + target.children, target.color)
    out = FormalSum.term(PlanarForest((first,)))
    wrap = lambda w: PlanarForest((PlanarTree(w.word, target.color),))
    return out + _graft(w1, inside).map_basis(wrap)


def left_graft(x, y) -> FormalSum:
    """Planar left grafting, extended bilinearly to formal sums."""
    lifted = bilinear(lambda a, b: _graft(_as_word(a), _as_word(b)))
    return lifted(x, y)


@functools.lru_cache(maxsize=None)
def _shuffle(w1: PlanarForest, w2: PlanarForest) -> FormalSum:
    if not w1.word:
        return FormalSum.term(w2)
    if not w2.word:
        return FormalSum.term(w1)
    h1, t1 = w1.word[0], PlanarForest(w1.word[1:])
    h2, t2 = w2.word[0], PlanarForest(w2.word[1:])
    first = _shuffle(t1, w2).map_basis(lambda w: PlanarForest((h1,) + w.word))
    second = _shuffle(w1, t2).map_basis(lambda w: PlanarForest((h2,) + w.word))
    return first + second


def shuffle(x, y) -> FormalSum:
    """Word shuffle of planar forests, extended bilinearly."""
    lifted = bilinear(lambda a, b: _shuffle(_as_word(a), _as_word(b)))
    return lifted(x, y)


def concat(x, y) -> FormalSum:
    """Concatenation of planar forests, extended bilinearly."""
    lifted = bilinear(lambda a, b: _as_word(a) * _as_word(b))
    return lifted(x, y)


def gl_product(x, y) -> FormalSum:
    """Grossman-Larson product: ``B-(w1 grafted onto B+(w2))``."""

    def base(w1: PlanarForest, w2: PlanarForest) -> FormalSum:
        lifted = _graft(w1, PlanarForest((bplus(w2),)))
        return lifted.map_basis(lambda w: bminus(w.word[0]))

    return bilinear(lambda a, b: base(_as_word(a), _as_word(b)))(x, y)


# ---------------------------------------------------------------------------
# Planarity projection
# ---------------------------------------------------------------------------


def project_nonplanar(x):
    """Forget planar structure: PlanarTree -> RootedTree, words -> multisets.

    Formal sums are mapped linearly, with coefficients collected.
    """
    if isinstance(x, FormalSum):
        return x.map_basis(project_nonplanar)
    if isinstance(x, PlanarTree):
        return RootedTree((project_nonplanar(c) for c in x.children), x.color)
    if isinstance(x, PlanarForest):
        return Forest(project_nonplanar(t) for t in x.word)
    if isinstance(x, (RootedTree, Forest)):
        return x
    raise TypeError(f"cannot project {type(x)}")
