"""Tree geometry of F_k: Gromov products, Busemann functions, cylinders,
the visual ultrametric and shadows.

Boundary points are never materialized: every boundary quantity is exposed
through cylinders at a self-reported sufficient depth.  Exponentials e^{-x t}
are kept symbolic as base^(-coeff*t) whenever x = coeff*log(base) with a
rational base, so comparisons and cell values stay exact rationals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple, Union

from .words import (Word, EPSILON, WeightedFreeGroup, InputError, invert,
                    multiply, cancellation, common_prefix_length, is_prefix)


class IdenticalBoundaryPointsError(ValueError):
    """Gromov product of a boundary direction with itself is +infinity."""


class OverlappingCylindersError(ValueError):
    """Visual distance between overlapping cylinders is undefined."""


class AmbiguousCylinderError(ValueError):
    """Cylinder too shallow for the requested quantity to be constant on it."""

    def __init__(self, message, required_depth=None):
        super().__init__(message)
        self.required_depth = required_depth


# ---------------------------------------------------------------------------
# scales: x = coeff * log(base), evaluated through e^{-x t}
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LogScale:
    """Exponent x in e^{-x t}; exact when x = coeff*log(base), base rational > 1."""

    value: float
    base: Optional[Fraction] = None
    coeff: Fraction = Fraction(1)

    @classmethod
    def of_float(cls, x: float) -> "LogScale":
        if x <= 0:
            raise InputError(f"scale exponent must be positive, got {x}")
        return cls(value=float(x))

    @classmethod
    def log_of(cls, base, coeff=1) -> "LogScale":
        base = Fraction(base)
        coeff = Fraction(coeff)
        if base <= 1 or coeff <= 0:
            raise InputError(f"need base > 1 and coeff > 0, got {base}, {coeff}")
        return cls(value=float(coeff) * math.log(base), base=base, coeff=coeff)

    @property
    def exact(self) -> bool:
        return self.base is not None

    def exp_neg(self, t):
        """e^{-x t}; a Fraction whenever the symbolic exponent is integral."""
        if self.base is not None:
            e = self.coeff * Fraction(t)
            if e.denominator == 1:
                return Fraction(self.base) ** (-e.numerator)
        return math.exp(-self.value * float(t))

    def leq_scaled(self, p, t, mult=1) -> bool:
        """Exact test of e^{-x p} <= mult * e^{-x t} (mult rational or float)."""
        if self.base is not None:
            e = self.coeff * (Fraction(p) - Fraction(t))
            if e.denominator == 1:
                # b^{-e} <= mult  <=>  b^{e} >= 1/mult
                try:
                    return Fraction(self.base) ** e.numerator >= 1 / Fraction(mult)
                except (TypeError, ValueError):
                    pass
        return math.exp(-self.value * (float(p) - float(t))) <= float(mult) * (1 + 1e-15)

    def leq_value(self, p, r) -> bool:
        """Exact test of e^{-x p} <= r for rational r."""
        return self.leq_scaled(p, 0, mult=r)

    def log_recip(self, r) -> float:
        """log(1/r) expressed in units of this scale: t with e^{-x t} = r."""
        return -math.log(float(r)) / self.value


@dataclass(frozen=True)
class VisualParams:
    """Visual metric exponent epsilon and conformal-density exponent alpha."""

    alpha: LogScale
    epsilon: LogScale

    @classmethod
    def exact_base(cls, base, alpha_coeff=1, epsilon_coeff=1) -> "VisualParams":
        return cls(alpha=LogScale.log_of(base, alpha_coeff),
                   epsilon=LogScale.log_of(base, epsilon_coeff))

    @classmethod
    def floats(cls, alpha: float, epsilon: float) -> "VisualParams":
        return cls(alpha=LogScale.of_float(alpha), epsilon=LogScale.of_float(epsilon))

    @property
    def exact(self) -> bool:
        return self.alpha.exact and self.epsilon.exact

    @property
    def q_exponent(self):
        """Q = alpha/epsilon; a Fraction when both scales share a base."""
        if (self.alpha.base is not None and self.alpha.base == self.epsilon.base):
            return self.alpha.coeff / self.epsilon.coeff
        return self.alpha.value / self.epsilon.value


def default_params(group: WeightedFreeGroup) -> VisualParams:
    """alpha = epsilon = log(2k-1), the critical exponent for unit weights."""
    return VisualParams.exact_base(2 * group.rank - 1)


# ---------------------------------------------------------------------------
# cylinders
# ---------------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class Cylinder:
    """Set of infinite reduced words extending `word`; () denotes all of the boundary."""

    word: Word

    @property
    def is_everything(self) -> bool:
        return not self.word

    def contains(self, other: "Cylinder") -> bool:
        return is_prefix(self.word, other.word)

    def disjoint_from(self, other: "Cylinder") -> bool:
        return not (self.contains(other) or other.contains(self))

    def __repr__(self):
        return f"Cylinder({self.word})"


BoundaryArg = Union[Word, tuple, Cylinder]


def merge_cylinders(group: WeightedFreeGroup, cylinders: Sequence[Cylinder]) -> List[Cylinder]:
    """Canonical minimal form: drop nested cylinders, merge complete sibling sets."""
    words = sorted({c.word for c in cylinders}, key=lambda w: (len(w), w))
    kept: List[Word] = []
    for w in words:
        if not any(is_prefix(p, w) for p in kept):
            kept.append(w)
    merged = True
    current = set(kept)
    while merged:
        merged = False
        by_parent = {}
        for w in current:
            if w:
                by_parent.setdefault(w[:-1], set()).add(w[-1])
        for parent, xs in by_parent.items():
            need = set(group.valid_extensions(parent))
            if xs == need:
                current -= {parent + (x,) for x in xs}
                current.add(parent)
                merged = True
                break
    return [Cylinder(w) for w in sorted(current, key=lambda w: (len(w), w))]


def translate_cylinder(group: WeightedFreeGroup, g: Word, cyl: Cylinder) -> List[Cylinder]:
    """g . C(u) as a minimal list of cylinders."""
    u = cyl.word
    if not u:
        return [Cylinder(EPSILON)]
    c = cancellation(g, u)
    if c < len(u):
        return [Cylinder(multiply(g, u))]
    # g ends with u^{-1}: the image is rest . { v : v_1 != inv(last(u)) }
    rest = g[: len(g) - len(u)]
    out: List[Cylinder] = []
    for x in group.letters():
        if x == (u[-1] ^ 1):
            continue
        out.extend(translate_cylinder(group, rest, Cylinder((x,))))
    return merge_cylinders(group, out)


def _join_word(cyls: Sequence[Cylinder]) -> Word:
    """Longest common prefix of a cylinder union (the union's branch node)."""
    words = [c.word for c in cyls]
    base = words[0]
    n = len(base)
    for w in words[1:]:
        n = min(n, common_prefix_length(base, w))
    return base[:n]


# ---------------------------------------------------------------------------
# Gromov products and Busemann functions
# ---------------------------------------------------------------------------

def gromov_product(group: WeightedFreeGroup, x: BoundaryArg, y: BoundaryArg,
                   base: Word = EPSILON) -> Fraction:
    """(x . y)_base, exact.

    Group elements use the half-sum formula; boundary cylinders use the
    weighted length of the common prefix after translating to the base point
    (the canonical minimal value when one cylinder nests in the other).
    """
    def to_parts(a):
        if isinstance(a, Cylinder):
            cs = translate_cylinder(group, invert(base), a)
            return ("bdy", _join_word(cs))
        return ("elt", multiply(invert(base), tuple(a)))

    kx, wx = to_parts(x)
    ky, wy = to_parts(y)
    if kx == "elt" and ky == "elt":
        dx = group.word_weight(wx)
        dy = group.word_weight(wy)
        dxy = group.distance(wx, wy)
        return (dx + dy - dxy) / 2
    if kx == "bdy" and ky == "bdy":
        if isinstance(x, Cylinder) and isinstance(y, Cylinder) and x == y:
            raise IdenticalBoundaryPointsError(
                f"Gromov product of {x} with itself is +infinity")
        n = common_prefix_length(wx, wy)
        return group.word_weight(wx[:n])
    # mixed: common prefix of the element's word with the cylinder prefix
    n = common_prefix_length(wx, wy)
    return group.word_weight(wx[:n])


def busemann(group: WeightedFreeGroup, q: Word, cyl: Cylinder,
             p: Word = EPSILON) -> Fraction:
    """rho_{q,z}(p) = lim_n [d(q, z_n) - d(p, z_n)] for any z in `cyl`.

    On the tree this equals d(q, u) - d(p, u) for the cylinder prefix u once u
    is deep enough that the value is constant on the cylinder.
    """
    u = cyl.word
    cq = cancellation(invert(q), u)
    cp = cancellation(invert(p), u)
    if (cq >= len(u) and len(q) > len(u)) or (cp >= len(u) and len(p) > len(u)):
        need = max(len(q), len(p))
        raise AmbiguousCylinderError(
            f"cylinder {cyl} too shallow for rho_{{q,.}}(p); "
            f"need depth > {need}", required_depth=need + 1)
    return group.distance(q, u) - group.distance(p, u)


def locally_constant_cells(group: WeightedFreeGroup, q: Word,
                           p: Word = EPSILON) -> List[Tuple[Cylinder, Fraction]]:
    """Cells of the coarsest partition on which z -> rho_{q,z}(p) is constant,
    with the constant value per cell."""
    spine = {q[:i] for i in range(len(q) + 1)} | {p[:i] for i in range(len(p) + 1)}
    cells: List[Tuple[Cylinder, Fraction]] = []

    def descend(node: Word):
        for x in group.valid_extensions(node):
            child = node + (x,)
            if child in spine:
                descend(child)
            else:
                cells.append((Cylinder(child),
                              group.distance(q, child) - group.distance(p, child)))

    descend(EPSILON)
    # merge complete sibling families carrying one value
    changed = True
    while changed:
        changed = False
        by_parent = {}
        for cyl, v in cells:
            if cyl.word:
                by_parent.setdefault(cyl.word[:-1], []).append((cyl.word[-1], v))
        for parent, kids in by_parent.items():
            need = set(group.valid_extensions(parent))
            if {x for x, _ in kids} == need and len({v for _, v in kids}) == 1:
                value = kids[0][1]
                cells = [(c, v) for c, v in cells
                         if not (len(c.word) == len(parent) + 1 and c.word[:-1] == parent)]
                cells.append((Cylinder(parent), value))
                changed = True
                break
    cells.sort(key=lambda cv: (len(cv[0].word), cv[0].word))
    return cells


def locally_constant_depth(group: WeightedFreeGroup, q: Word,
                           p: Word = EPSILON) -> List[Cylinder]:
    """Coarsest cylinder partition on which rho_{q,.}(p) is constant."""
    return [c for c, _ in locally_constant_cells(group, q, p)]


# ---------------------------------------------------------------------------
# visual quasimetric and shadows
# ---------------------------------------------------------------------------

def visual_quasimetric(group: WeightedFreeGroup, x: Cylinder, y: Cylinder,
                       base: Word, params: VisualParams):
    """d_base^epsilon(x, y) = e^{-epsilon (x.y)_base}; an ultrametric on trees."""
    if not x.disjoint_from(y):
        raise OverlappingCylindersError(
            f"visual distance undefined for overlapping cylinders {x}, {y}")
    return params.epsilon.exp_neg(gromov_product(group, x, y, base))


def sup_product(group: WeightedFreeGroup, gamma: Word, base: Word = EPSILON) -> Fraction:
    """U_{p,gamma} = sup_z (z . gamma^{-1} p)_p = d(p, gamma^{-1} p) on the tree."""
    return group.distance(base, multiply(invert(gamma), base))


def plus_direction(group: WeightedFreeGroup, gamma: Word, base: Word = EPSILON) -> Cylinder:
    """Canonical z^+: the cylinder of the full reduced word of gamma^{-1} p seen from p."""
    q = multiply(invert(base), multiply(invert(gamma), base))
    if not q:
        raise InputError("z^+ undefined for gamma with gamma^{-1} p = p")
    cyls = translate_cylinder(group, base, Cylinder(q))
    return cyls[0] if len(cyls) == 1 else Cylinder(_join_word(cyls))


def shadow(group: WeightedFreeGroup, gamma: Word, D=0, base: Word = EPSILON,
           params: Optional[VisualParams] = None) -> List[Cylinder]:
    """O_p(gamma, D) = { y : d_p(z^+, y) <= e^{-(U_{p,gamma} - D)} } as cylinders.

    The visual radius threshold only enters through the product bound
    U - D, so no params are required; they are accepted for API symmetry.
    """
    if not gamma:
        raise InputError("shadow undefined for gamma = e")
    D = Fraction(D)
    if D < 0:
        raise InputError(f"shadow margin D must be >= 0, got {D}")
    u_val = sup_product(group, gamma, base)
    threshold = u_val - D
    if threshold <= 0:
        return [Cylinder(EPSILON)]
    # centre direction as a word from the base point
    q = multiply(invert(base), multiply(invert(gamma), base))
    acc = Fraction(0)
    cut = len(q)
    for i, x in enumerate(q):
        acc += group.letter_weight(x)
        if acc >= threshold:
            cut = i + 1
            break
    at_base = Cylinder(q[:cut])
    return merge_cylinders(group, translate_cylinder(group, base, at_base))
