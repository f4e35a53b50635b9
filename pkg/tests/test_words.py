"""Reduced words, the weighted metric and enumeration."""

from fractions import Fraction

import pytest

from freewalk import WeightedFreeGroup, InputError, invert, multiply
from freewalk.words import cancellation, common_prefix_length, is_reduced


def reduce_oracle(letters, two_k):
    """Independent fixed-point scanner: delete adjacent inverse pairs until stable."""
    word = list(letters)
    changed = True
    while changed:
        changed = False
        for i in range(len(word) - 1):
            if word[i] == (word[i + 1] ^ 1):
                del word[i:i + 2]
                changed = True
                break
    return tuple(word)


def test_reduce_examples(f2):
    a, b, B = 0, 2, 3
    assert f2.reduce((a, b, B)) == (a,)          # a b b^-1 -> a
    assert f2.reduce(()) == ()                   # identity
    assert f2.reduce((a, a ^ 1, a)) == (a,)      # a a^-1 a -> a


def test_reduce_against_oracle(f2):
    import itertools
    for n in range(0, 5):
        for letters in itertools.product(range(4), repeat=n):
            assert f2.reduce(letters) == reduce_oracle(letters, 4)


def test_reduce_idempotent_and_unknown_letter(f2):
    w = f2.reduce((0, 2, 3, 1, 0))
    assert f2.reduce(w) == w
    with pytest.raises(InputError):
        f2.reduce((0, 7))


def test_distance(f2):
    assert f2.distance((), (0, 2)) == 2
    assert f2.distance((0,), (0,)) == 0
    g = WeightedFreeGroup(2, weights=[1, 3])
    # d(e, a b^-1 a) with weight(b) = 3
    assert g.distance((), (0, 3, 0)) == 5
    # symmetry
    for u in f2.ball(2):
        for v in f2.ball(2):
            assert f2.distance(u, v) == f2.distance(v, u)


def test_multiply_invert(f2):
    for u in f2.ball(3):
        assert multiply(u, invert(u)) == ()
        assert f2.reduce(u + invert(u)) == ()
    assert multiply((0, 2), (3, 1)) == ()
    assert cancellation((0, 2), (3, 0)) == 1
    assert common_prefix_length((0, 2, 1), (0, 2, 3)) == 2


def test_sphere_sizes(f2, f3):
    assert [len(f2.sphere(n)) for n in range(4)] == [1, 4, 12, 36]
    assert [len(f3.sphere(n)) for n in range(3)] == [1, 6, 30]
    for w in f2.sphere(3):
        assert is_reduced(w, 4)


def test_parse_format_roundtrip(f2):
    assert f2.parse_word("abA") == (0, 2, 1)
    assert f2.parse_word("a b' a") == (0, 3, 0)
    assert f2.parse_word("a b^-1 a") == (0, 3, 0)
    assert f2.parse_word("e") == ()
    assert f2.format_word(()) == "e"
    for w in f2.ball(3):
        assert f2.parse_word(f2.format_word(w)) == w


def test_group_config_roundtrip():
    g = WeightedFreeGroup(2, weights=[Fraction(3, 2), 1], names=["x", "y"])
    g2 = WeightedFreeGroup.from_config(g.to_config())
    assert g == g2
    assert g2.weights == (Fraction(3, 2), Fraction(1))


def test_group_validation():
    with pytest.raises(InputError):
        WeightedFreeGroup(1)
    with pytest.raises(InputError):
        WeightedFreeGroup(2, weights=[1, 0])
    with pytest.raises(InputError):
        WeightedFreeGroup(2, weights=[1])
