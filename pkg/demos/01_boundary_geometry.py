"""
Tree geometry of the free group and its boundary
================================================

The Cayley graph of F_k with positive generator weights is a tree; its
boundary is the space of infinite reduced words, carved into cylinders.
This walkthrough computes distances, Gromov products, Busemann cells,
the visual ultrametric and shadows -- all in exact rational arithmetic.
"""

from fractions import Fraction

from freewalk import (WeightedFreeGroup, Cylinder, default_params,
                      gromov_product, busemann, locally_constant_cells,
                      visual_quasimetric, shadow, sup_product)

# 1. the group: F_2 with unit weights, generators a, b
G = WeightedFreeGroup(2)
P = default_params(G)          # alpha = epsilon = log 3, kept symbolic
w = G.parse_word("abA")        # a b a^-1
print("word:", G.format_word(w), " |w| =", G.word_weight(w))
print("d(e, ab) =", G.distance((), G.parse_word("ab")))

# weighted metric: weight(b) = 3 stretches the b-edges
W = WeightedFreeGroup(2, weights=[1, 3])
print("weighted d(e, ab'a) =", W.distance((), W.parse_word("a b' a")))

# 2. Gromov products: distance to the branch point of the tripod
print("\n(ab . aB)_e =", gromov_product(G, G.parse_word("ab"), G.parse_word("aB")))
print("(C(ab) . C(b))_a =",
      gromov_product(G, Cylinder(G.parse_word("ab")), Cylinder(G.parse_word("b")),
                     base=G.parse_word("a")))

# 3. Busemann functions are locally constant: the cells along [e, q]
q = G.parse_word("ab")
print("\nBusemann cells for q = ab (value of rho_{q,.}(e) per cell):")
for cyl, value in locally_constant_cells(G, q):
    print(f"   C({G.format_word(cyl.word)}):  {value}")
print("rho on a deep cylinder:", busemann(G, q, Cylinder(G.parse_word("abab"))))

# 4. the visual ultrametric d(x,y) = e^{-eps (x.y)} and a shadow
d = visual_quasimetric(G, Cylinder(G.parse_word("ab")),
                       Cylinder(G.parse_word("aB")), (), P)
print("\nd_e(C(ab), C(aB)) =", d)
gamma = G.parse_word("AB")     # gamma^-1 = ba
print("U_{e,gamma} =", sup_product(G, gamma))
print("shadow O(gamma, 0):", [G.format_word(c.word) for c in shadow(G, gamma, 0)])
print("shadow O(gamma, 1):", [G.format_word(c.word) for c in shadow(G, gamma, 1)])
print("shadow O(gamma, 5):",
      ["whole boundary" if c.is_everything else G.format_word(c.word)
       for c in shadow(G, gamma, 5)])
