"""
The conformal measure and its derivatives
=========================================

With q_x = e^{-alpha w_x} per letter, cylinder masses follow the closed form
mass(a_1...a_n) = q_{a_1}...q_{a_{n-1}} q_{a_n}/(1+q_{a_n}), additive exactly
when sum q_x/(1+q_x) = 1 -- the equation that pins alpha at the critical
exponent.  Pushforwards, derivatives and convolution all stay exact.
"""

import math
from fractions import Fraction

from freewalk import (WeightedFreeGroup, default_params, uniform_ps_measure,
                      critical_exponent, conformal_exponent, poincare_series,
                      radon_nikodym, pushforward, convolve, integrate,
                      GroupMeasure, sphere_uniform)

G = WeightedFreeGroup(2)
P = default_params(G)
nu = uniform_ps_measure(G, P)

# 1. masses and growth
print("nu(C(a))  =", nu.mass_of(G.parse_word("a")))
print("nu(C(ab)) =", nu.mass_of(G.parse_word("ab")))
print("total     =", nu.total)
print("critical exponent:", critical_exponent(G), "= log 3 =", math.log(3))
val, diverges, _ = poincare_series(G, math.log(3), 8)
print("Poincare series at s = log 3: partial", round(val, 3),
      "flagged divergent:", diverges)

# general weights: solve sum e^{-s w}/(1+e^{-s w}) = 1
W = WeightedFreeGroup(2, weights=[1, 2])
print("critical exponent of F_2 with weights (1,2):", conformal_exponent(W))

# 2. Radon-Nikodym derivatives f_gamma = d(gamma nu)/d nu = e^{-alpha rho}
gamma = G.parse_word("A")
f = radon_nikodym(gamma, nu, P)
print("\nf_{a^-1} per cell:",
      {G.format_word(w): str(v) for w, v in sorted(f.values.items())})
print("integral f d nu =", integrate(f, nu))

# 3. pushforward (gamma nu)(E) = nu(gamma E), dual route to the density
pf = pushforward(gamma, nu)
print("(a^-1 nu)(C(a)) =", pf.mass_of(G.parse_word("a")), "= 3 * 1/4")

# 4. the sphere-uniform measure stationizes nu exactly
mu = sphere_uniform(G, 2)
conv = convolve(mu, nu)
worst = max(abs(conv.mass_of(w) - nu.mass_of(w)) for w in G.sphere(5))
print("\nsphere-2 uniform mu: max |mu*nu - nu| at depth 5 =", worst)
