"""Sparse exact-rational linear combinations over arbitrary hashable bases.

Every graded computation in the package runs through :class:`FormalSum`:
coproducts, grafting products, antipodes, series coefficients. Instances
are treated as immutable values; arithmetic returns fresh sums and zero
coefficients are pruned eagerly, so equality is plain dict equality.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Any, Callable, Hashable, Iterable, Iterator, Mapping

Scalar = int | Fraction


def _as_fraction(x: Scalar) -> Fraction:
    if isinstance(x, Fraction):
        return x
    return Fraction(x)


class FormalSum:
    """A finite linear combination ``sum(coeff * basis)`` with exact coefficients."""

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[Hashable, Scalar] | Iterable[tuple[Hashable, Scalar]] = ()):
        data: dict[Hashable, Fraction] = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for basis, coeff in items:
            c = data.get(basis, _ZERO) + _as_fraction(coeff)
            if c:
                data[basis] = c
            else:
                data.pop(basis, None)
        self._terms = data

    @classmethod
    def zero(cls) -> "FormalSum":
        return cls()

    @classmethod
    def term(cls, basis: Hashable, coeff: Scalar = 1) -> "FormalSum":
        return cls(((basis, coeff),))

    # -- inspection ------------------------------------------------------

    def coeff(self, basis: Hashable) -> Fraction:
        return self._terms.get(basis, _ZERO)

    def support(self) -> frozenset:
        return frozenset(self._terms)

    def __iter__(self) -> Iterator[tuple[Hashable, Fraction]]:
        return iter(self._terms.items())

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, FormalSum):
            return self._terms == other._terms
        return NotImplemented

    def __hash__(self) -> int:
        return hash(frozenset(self._terms.items()))

    def __repr__(self) -> str:
        if not self._terms:
            return "FormalSum(0)"
        parts = ", ".join(f"{b!r}: {c}" for b, c in self._terms.items())
        return f"FormalSum({{{parts}}})"

    # -- linear arithmetic ----------------------------------------------

    def __add__(self, other: "FormalSum") -> "FormalSum":
        if not isinstance(other, FormalSum):
            return NotImplemented
        out = dict(self._terms)
        for basis, coeff in other._terms.items():
            c = out.get(basis, _ZERO) + coeff
            if c:
                out[basis] = c
            else:
                out.pop(basis, None)
        result = FormalSum.__new__(FormalSum)
        result._terms = out
        return result

    def __sub__(self, other: "FormalSum") -> "FormalSum":
        return self + (-1) * other

    def __neg__(self) -> "FormalSum":
        return (-1) * self

    def __rmul__(self, scalar: Scalar) -> "FormalSum":
        c = _as_fraction(scalar)
        if not c:
            return FormalSum()
        result = FormalSum.__new__(FormalSum)
        result._terms = {b: c * v for b, v in self._terms.items()}
        return result

    def __mul__(self, scalar: Scalar) -> "FormalSum":
        return self.__rmul__(scalar)

    def __truediv__(self, scalar: Scalar) -> "FormalSum":
        return self.__rmul__(Fraction(1, 1) / _as_fraction(scalar))

    # -- structural maps -------------------------------------------------

    def map_basis(self, fn: Callable[[Hashable], Any]) -> "FormalSum":
        """Linear extension of ``fn``; ``fn`` may return a basis element or a FormalSum."""
        out = FormalSum()
        for basis, coeff in self._terms.items():
            image = fn(basis)
            if isinstance(image, FormalSum):
                out = out + coeff * image
            else:
                out = out + FormalSum.term(image, coeff)
        return out

    def filter(self, keep: Callable[[Hashable], bool]) -> "FormalSum":
        return FormalSum((b, c) for b, c in self._terms.items() if keep(b))


_ZERO = Fraction(0)


def as_sum(x: Any) -> FormalSum:
    """Wrap a bare basis element as a singleton sum; pass sums through."""
    if isinstance(x, FormalSum):
        return x
    return FormalSum.term(x)


def bilinear(fn: Callable[[Any, Any], Any]) -> Callable[[Any, Any], FormalSum]:
    """Extend a basis-level product to FormalSum arguments in both slots."""

    def lifted(x: Any, y: Any) -> FormalSum:
        xs, ys = as_sum(x), as_sum(y)
        out = FormalSum()
        for bx, cx in xs:
            for by, cy in ys:
                image = fn(bx, by)
                if isinstance(image, FormalSum):
                    out = out + (cx * cy) * image
                else:
                    out = out + FormalSum.term(image, cx * cy)
        return out

    return lifted


class Tensor:
    """An ordered pair of basis elements, used for coproduct output."""

    __slots__ = ("left", "right", "_hash")

    def __init__(self, left: Any, right: Any):
        self.left = left
        self.right = right
        self._hash = hash((left, right))

    @property
    def serial(self) -> str:
        ls = getattr(self.left, "serial", None) or str(self.left)
        rs = getattr(self.right, "serial", None) or str(self.right)
        return f"{ls} (x) {rs}"

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Tensor):
            return self.left == other.left and self.right == other.right
        return NotImplemented

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"Tensor({self.left!r}, {self.right!r})"


def tensor_sum(pairs: Iterable[tuple[Any, Any, Scalar]]) -> FormalSum:
    return FormalSum((Tensor(l, r), c) for l, r, c in pairs)


def render_sum(fs: FormalSum, sort_key: Callable[[Any], Any]) -> str:
    """Serialize a sum as ``coeff * basis`` terms joined by `` + ``.

    A unit coefficient is left implicit. The zero sum renders as ``0``.
    """
    if not fs:
        return "0"
    parts = []
    for basis in sorted(fs.support(), key=sort_key):
        coeff = fs.coeff(basis)
        serial = getattr(basis, "serial", None) or str(basis)
        parts.append(serial if coeff == 1 else f"{coeff} * {serial}")
    return " + ".join(parts)
