"""Cylinder partitions and locally constant functions on the boundary of F_k.

A partition is a finite prefix-free complete set of reduced words (trie
leaves).  Locally constant functions carry one value per cell; all operations
go through common refinements, so results are independent of the particular
partition representation.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, Iterable, List, Tuple

from .words import Word, EPSILON, WeightedFreeGroup, is_prefix
from .geometry import Cylinder, translate_cylinder


class PartitionError(ValueError):
    """Leaf set is not a complete prefix-free cylinder partition."""


class ValueNotConstantError(ValueError):
    """Queried a cell strictly above the partition leaves."""


def _coverage(group: WeightedFreeGroup, leaves: Iterable[Word]) -> Fraction:
    """Combinatorial mass of a prefix-free leaf set (1 iff complete)."""
    k2 = group.two_k
    total = Fraction(0)
    for w in leaves:
        if not w:
            total += 1
        else:
            total += Fraction(1, k2 * (k2 - 1) ** (len(w) - 1))
    return total


def validate_partition(group: WeightedFreeGroup, leaves: Iterable[Word]) -> None:
    leaves = list(leaves)
    seen = set(leaves)
    if len(seen) != len(leaves):
        raise PartitionError("duplicate cells in partition")
    for w in seen:
        for i in range(len(w)):
            if w[:i] in seen:
                raise PartitionError(f"cell {w} nested inside cell {w[:i]}")
        for i in range(1, len(w)):
            if w[i] == (w[i - 1] ^ 1):
                raise PartitionError(f"cell label {w} is not a reduced word")
    if _coverage(group, seen) != 1:
        raise PartitionError("partition does not cover the boundary exactly")


@dataclass(frozen=True)
class CylinderPartition:
    """A complete prefix-free set of cylinder cells."""

    group: WeightedFreeGroup
    cells: Tuple[Word, ...]

    @classmethod
    def of(cls, group: WeightedFreeGroup, leaves: Iterable[Word]) -> "CylinderPartition":
        leaves = tuple(sorted(set(leaves), key=lambda w: (len(w), w)))
        validate_partition(group, leaves)
        return cls(group, leaves)

    @classmethod
    def uniform(cls, group: WeightedFreeGroup, depth: int) -> "CylinderPartition":
        return cls.of(group, group.sphere(depth))

    def cylinders(self) -> List[Cylinder]:
        return [Cylinder(w) for w in self.cells]

    def __iter__(self):
        return iter(self.cells)

    def __len__(self):
        return len(self.cells)


def trie_closure(group: WeightedFreeGroup, words: Iterable[Word]) -> List[Word]:
    """Smallest partition in which every given word is a cell or an ancestor
    of cells (the trie generated by the words, closed by siblings)."""
    words = {tuple(w) for w in words}
    internal = set()
    for w in words:
        for i in range(len(w)):
            internal.add(w[:i])
    if not internal:
        return [EPSILON]
    leaves: List[Word] = []

    def descend(node: Word):
        for x in group.valid_extensions(node):
            child = node + (x,)
            if child in internal:
                descend(child)
            else:
                leaves.append(child)

    descend(EPSILON)
    return sorted(leaves, key=lambda w: (len(w), w))


def refine_leaves(group: WeightedFreeGroup, a: Iterable[Word], b: Iterable[Word]) -> List[Word]:
    """Common refinement of two partitions: the deeper cell wins pointwise."""
    a = set(a)
    b = set(b)
    prefixes_b = set()
    for w in b:
        for i in range(len(w) + 1):
            prefixes_b.add(w[:i])
    prefixes_a = set()
    for w in a:
        for i in range(len(w) + 1):
            prefixes_a.add(w[:i])
    out = []
    for w in a:
        if w not in prefixes_b or w in b:
            out.append(w)
    for w in b:
        if w not in prefixes_a:
            out.append(w)
    return sorted(set(out), key=lambda w: (len(w), w))


class LocallyConstantFunction:
    """A cylinder partition plus one value (Fraction or float) per cell."""

    def __init__(self, group: WeightedFreeGroup, values: Dict[Word, object],
                 validate: bool = True):
        self.group = group
        self.values = dict(values)
        if validate:
            validate_partition(group, self.values.keys())

    # -- constructors --------------------------------------------------------

    @classmethod
    def constant(cls, group: WeightedFreeGroup, value) -> "LocallyConstantFunction":
        return cls(group, {EPSILON: value}, validate=False)

    @classmethod
    def from_cells(cls, group: WeightedFreeGroup,
                   cells: Iterable[Tuple[Cylinder, object]]) -> "LocallyConstantFunction":
        return cls(group, {c.word: v for c, v in cells})

    # -- evaluation -----------------------------------------------------------

    def cell_of(self, word: Word) -> Word:
        for i in range(len(word) + 1):
            if word[:i] in self.values:
                return word[:i]
        raise ValueNotConstantError(
            f"word {word} lies above the partition leaves; value not constant there")

    def at(self, word: Word):
        return self.values[self.cell_of(word)]

    def spine_of(self, word: Word) -> Word:
        """Canonical boundary point in C(word): extend by the smallest valid letter
        until inside a cell."""
        w = tuple(word)
        guard = 0
        while True:
            for i in range(len(w) + 1):
                if w[:i] in self.values:
                    return w
            w = w + (self.group.valid_extensions(w)[0],)
            guard += 1
            if guard > 10000:
                raise RuntimeError("spine descent failed to reach a cell")

    def at_spine(self, word: Word):
        return self.at(self.spine_of(word))

    def min_on(self, word: Word):
        vals = [v for w, v in self.values.items() if is_prefix(word, w)]
        if vals:
            return min(vals)
        return self.at(word)

    def max_on(self, word: Word):
        vals = [v for w, v in self.values.items() if is_prefix(word, w)]
        if vals:
            return max(vals)
        return self.at(word)

    # -- partition plumbing ----------------------------------------------------

    def leaves(self) -> List[Word]:
        return sorted(self.values, key=lambda w: (len(w), w))

    def partition(self) -> CylinderPartition:
        return CylinderPartition.of(self.group, self.values.keys())

    def depth(self) -> int:
        return max((len(w) for w in self.values), default=0)

    def refine_to(self, leaves: Iterable[Word]) -> "LocallyConstantFunction":
        return LocallyConstantFunction(
            self.group, {w: self.at(w) for w in leaves}, validate=False)

    def combine(self, other: "LocallyConstantFunction",
                fn: Callable) -> "LocallyConstantFunction":
        leaves = refine_leaves(self.group, self.values.keys(), other.values.keys())
        return LocallyConstantFunction(
            self.group, {w: fn(self.at(w), other.at(w)) for w in leaves}, validate=False)

    def map(self, fn: Callable) -> "LocallyConstantFunction":
        return LocallyConstantFunction(
            self.group, {w: fn(v) for w, v in self.values.items()}, validate=False)

    def scale(self, c) -> "LocallyConstantFunction":
        return self.map(lambda v: c * v)

    def add(self, other):
        return self.combine(other, lambda a, b: a + b)

    def sub(self, other):
        return self.combine(other, lambda a, b: a - b)

    def mul(self, other):
        return self.combine(other, lambda a, b: a * b)

    def abs(self):
        return self.map(lambda v: -v if v < 0 else v)

    def sup(self):
        return max(self.values.values())

    def inf(self):
        return min(self.values.values())

    def canonical(self) -> "LocallyConstantFunction":
        """Merge complete sibling families with equal values (canonical form)."""
        vals = dict(self.values)
        changed = True
        while changed:
            changed = False
            by_parent: Dict[Word, List[int]] = {}
            for w in vals:
                if w:
                    by_parent.setdefault(w[:-1], []).append(w[-1])
            for parent, xs in by_parent.items():
                if set(xs) != set(self.group.valid_extensions(parent)):
                    continue
                children = [parent + (x,) for x in xs]
                vv = {vals[c] for c in children}
                if len(vv) == 1:
                    v = vals[children[0]]
                    for c in children:
                        del vals[c]
                    vals[parent] = v
                    changed = True
                    break
        return LocallyConstantFunction(self.group, vals, validate=False)

    def translate(self, g: Word) -> "LocallyConstantFunction":
        """The function z -> f(g^{-1} z) (left translate of f by g)."""
        from .words import invert
        out: Dict[Word, object] = {}
        pieces: List[Tuple[Word, object]] = []
        for w, v in self.values.items():
            for cyl in translate_cylinder(self.group, g, Cylinder(w)):
                pieces.append((cyl.word, v))
        # pieces may overlap as a non-canonical cover; deepest label wins
        leaves = trie_closure(self.group, [w for w, _ in pieces])
        pieces.sort(key=lambda wv: len(wv[0]))
        for leaf in leaves:
            for w, v in reversed(pieces):
                if is_prefix(w, leaf):
                    out[leaf] = v
                    break
        return LocallyConstantFunction(self.group, out)

    def __eq__(self, other):
        if not isinstance(other, LocallyConstantFunction):
            return NotImplemented
        leaves = refine_leaves(self.group, self.values.keys(), other.values.keys())
        return all(self.at(w) == other.at(w) for w in leaves)

    def __repr__(self):
        cells = ", ".join(f"{self.group.format_word(w)}:{v}"
                          for w, v in sorted(self.values.items(),
                                             key=lambda t: (len(t[0]), t[0]))[:6])
        more = "..." if len(self.values) > 6 else ""
        return f"LocallyConstantFunction({cells}{more})"

    # -- serialization -----------------------------------------------------------

    def to_json(self) -> dict:
        cells = [[self.group.format_word(w), _num_to_str(v)]
                 for w, v in sorted(self.values.items(), key=lambda t: (len(t[0]), t[0]))]
        return {"cells": cells}

    @classmethod
    def from_json(cls, group: WeightedFreeGroup, doc: dict) -> "LocallyConstantFunction":
        vals = {group.parse_word(w): _num_from_str(v) for w, v in doc["cells"]}
        return cls(group, vals)


def _num_to_str(v) -> str:
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, int):
        return f"{v}/1"
    return repr(float(v))


def _num_from_str(s: str):
    s = str(s)
    if "/" in s:
        num, den = s.split("/")
        return Fraction(int(num), int(den))
    return float(s)
