"""Freely reduced words and the weighted free group F_k.

Letters are ints 0..2k-1; letter 2i is the i-th generator, 2i+1 its inverse
(so ``x ^ 1`` inverts a letter).  A word is a tuple of letters with no adjacent
inverse pair; the empty tuple is the identity e, which is also the base point
of the Cayley tree.  The same tuple doubles as a boundary cylinder label: the
set of infinite reduced words extending it.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple

Word = Tuple[int, ...]

EPSILON: Word = ()


class InputError(ValueError):
    """Bad user-facing input (unknown letter, malformed word, bad config)."""


def inverse_letter(x: int) -> int:
    return x ^ 1


def invert(word: Sequence[int]) -> Word:
    return tuple(x ^ 1 for x in reversed(word))


def reduce_word(letters: Iterable[int], two_k: int) -> Word:
    """Free reduction of an arbitrary letter sequence (stack cancellation)."""
    out: List[int] = []
    for x in letters:
        if not isinstance(x, int) or not 0 <= x < two_k:
            raise InputError(f"unknown letter {x!r} for alphabet of size {two_k}")
        if out and out[-1] == (x ^ 1):
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def is_reduced(word: Sequence[int], two_k: int) -> bool:
    if any(not 0 <= x < two_k for x in word):
        return False
    return all(word[i + 1] != (word[i] ^ 1) for i in range(len(word) - 1))


def multiply(u: Sequence[int], v: Sequence[int]) -> Word:
    """Product of two reduced words (cancellation only at the junction)."""
    u = list(u)
    i = 0
    while u and i < len(v) and u[-1] == (v[i] ^ 1):
        u.pop()
        i += 1
    return tuple(u) + tuple(v[i:])


def cancellation(u: Sequence[int], v: Sequence[int]) -> int:
    """Number of letters cancelled when forming u·v."""
    c = 0
    while c < len(u) and c < len(v) and u[len(u) - 1 - c] == (v[c] ^ 1):
        c += 1
    return c


def common_prefix_length(u: Sequence[int], v: Sequence[int]) -> int:
    n = min(len(u), len(v))
    i = 0
    while i < n and u[i] == v[i]:
        i += 1
    return i


def is_prefix(u: Sequence[int], v: Sequence[int]) -> bool:
    return len(u) <= len(v) and tuple(v[: len(u)]) == tuple(u)


_TOKEN_RE = re.compile(r"([A-Za-z_][A-Za-z_0-9]*)(\^-1|'|⁻¹)?")


class WeightedFreeGroup:
    """F_k with one strictly positive rational weight per generator.

    A generator and its inverse share a weight; the word metric is the
    weighted path metric on the Cayley tree.
    """

    def __init__(self, rank: int,
                 weights: Optional[Sequence] = None,
                 names: Optional[Sequence[str]] = None):
        if not isinstance(rank, int) or rank < 2:
            raise InputError(f"rank must be an integer >= 2, got {rank!r}")
        self.rank = rank
        if weights is None:
            weights = [1] * rank
        if len(weights) != rank:
            raise InputError(f"expected {rank} weights, got {len(weights)}")
        self.weights = tuple(Fraction(w) for w in weights)
        if any(w <= 0 for w in self.weights):
            raise InputError("generator weights must be strictly positive")
        if names is None:
            names = [chr(ord("a") + i) for i in range(rank)] if rank <= 26 \
                else [f"g{i+1}" for i in range(rank)]
        if len(names) != rank or len(set(names)) != rank:
            raise InputError("generator names must be distinct, one per generator")
        self.names = tuple(str(n) for n in names)
        self.two_k = 2 * rank

    # -- alphabet ----------------------------------------------------------

    def letters(self) -> range:
        return range(self.two_k)

    def letter_weight(self, x: int) -> Fraction:
        return self.weights[x >> 1]

    def unit_weights(self) -> bool:
        return all(w == self.weights[0] for w in self.weights)

    def valid_extensions(self, word: Sequence[int]) -> List[int]:
        """Letters that extend `word` without cancelling (2k at e, else 2k-1)."""
        if not word:
            return list(self.letters())
        bad = word[-1] ^ 1
        return [x for x in self.letters() if x != bad]

    # -- group operations ---------------------------------------------------

    def reduce(self, letters: Iterable[int]) -> Word:
        return reduce_word(letters, self.two_k)

    def word_weight(self, word: Sequence[int]) -> Fraction:
        total = Fraction(0)
        for x in word:
            total += self.letter_weight(x)
        return total

    def distance(self, g: Sequence[int], h: Sequence[int]) -> Fraction:
        return self.word_weight(multiply(invert(g), h))

    def norm(self, g: Sequence[int]) -> Fraction:
        return self.word_weight(g)

    # -- enumeration ---------------------------------------------------------

    def sphere(self, radius: int) -> List[Word]:
        """All reduced words of combinatorial length `radius`, in canonical order."""
        if radius < 0:
            raise InputError(f"radius must be >= 0, got {radius}")
        level: List[Word] = [EPSILON]
        for _ in range(radius):
            level = [w + (x,) for w in level for x in self.valid_extensions(w)]
        return level

    def ball(self, radius: int) -> List[Word]:
        out: List[Word] = []
        for n in range(radius + 1):
            out.extend(self.sphere(n))
        return out

    # -- parsing / formatting -------------------------------------------------

    def letter_name(self, x: int) -> str:
        name = self.names[x >> 1]
        return name if x % 2 == 0 else name + "'"

    def format_word(self, word: Sequence[int]) -> str:
        if not word:
            return "e"
        if all(len(n) == 1 and n.isalpha() for n in self.names):
            return "".join(self.names[x >> 1] if x % 2 == 0
                           else self.names[x >> 1].upper() for x in word)
        return " ".join(self.letter_name(x) for x in word)

    def parse_word(self, text: str) -> Word:
        """Parse a word; inverse marked by uppercase (compact) or ' / ^-1 / ⁻¹."""
        text = text.strip()
        if text in ("", "e", "1"):
            return EPSILON
        lower_names = {n: 2 * i for i, n in enumerate(self.names)}
        letters: List[int] = []
        if " " in text or "'" in text or "^" in text or "⁻" in text:
            for tok in text.replace("*", " ").split():
                m = _TOKEN_RE.fullmatch(tok)
                if not m or m.group(1) not in lower_names:
                    raise InputError(f"unknown token {tok!r} in word {text!r}")
                x = lower_names[m.group(1)]
                letters.append(x ^ 1 if m.group(2) else x)
        else:
            for ch in text:
                if ch.lower() not in lower_names:
                    raise InputError(f"unknown letter {ch!r} in word {text!r}")
                x = lower_names[ch.lower()]
                letters.append(x ^ 1 if ch.isupper() else x)
        word = tuple(letters)
        if not is_reduced(word, self.two_k):
            word = self.reduce(word)
        return word

    # -- config ---------------------------------------------------------------

    @classmethod
    def from_config(cls, cfg: dict) -> "WeightedFreeGroup":
        """Build from a structured config: rank, names, weights as fraction strings."""
        if "rank" not in cfg:
            raise InputError("group config needs a 'rank' field")
        weights = cfg.get("weights")
        if weights is not None:
            weights = [Fraction(str(w)) for w in weights]
        return cls(int(cfg["rank"]), weights=weights, names=cfg.get("names"))

    def to_config(self) -> dict:
        return {"rank": self.rank,
                "names": list(self.names),
                "weights": [str(w) for w in self.weights]}

    def __repr__(self):
        ws = ",".join(str(w) for w in self.weights)
        return f"WeightedFreeGroup(rank={self.rank}, weights=[{ws}])"

    def __eq__(self, other):
        return (isinstance(other, WeightedFreeGroup)
                and self.rank == other.rank
                and self.weights == other.weights
                and self.names == other.names)

    def __hash__(self):
        return hash((self.rank, self.weights, self.names))
