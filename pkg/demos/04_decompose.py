"""
Greedy positive-basis decomposition
===================================

Writing a target density F as a nonnegative combination of unit spikes
turns the coefficients into a group measure mu with mu * nu = F d nu.
For F = 1 the loop recovers the sphere-uniform measure exactly; for
F = f_gamma it recovers the point mass at gamma.
"""

from fractions import Fraction

from freewalk import (WeightedFreeGroup, LocallyConstantFunction, GreedyParams,
                      default_params, uniform_ps_measure, basis_decompose,
                      radon_nikodym, pushforward, verify_stationarity)

G = WeightedFreeGroup(2)
P = default_params(G)
nu = uniform_ps_measure(G, P)
params = GreedyParams(tau=1e-6)

# 1. F = 1: mu * nu = nu; the decomposition lands on the sphere-uniform mu
F = LocallyConstantFunction.constant(G, Fraction(1))
res = basis_decompose(F, nu, params)
print("F = 1: rounds", res.rounds, " residual", res.achieved_tolerance)
print("mu:", {G.format_word(w): str(v) for w, v in res.coefficients.items()})
report = verify_stationarity(res.coefficients, nu, nu, depth=5)
print("stationary exactly:", report.exact,
      " moment:", report.moment, " entropy:", round(report.entropy, 6))

# 2. F = f_gamma: the fixed point mu = delta_gamma, with mu * nu = gamma * nu
gamma = G.parse_word("ab")
f = radon_nikodym(gamma, nu, P)
res2 = basis_decompose(f, nu, params)
print("\nF = f_ab: mu =",
      {G.format_word(w): str(v) for w, v in res2.coefficients.items()})
report2 = verify_stationarity(res2.coefficients, nu, pushforward(gamma, nu),
                              depth=4)
print("mu * nu = ab * nu exactly:", report2.exact)

# 3. a lopsided target: F = (1 + 3 f_a)/4 still decomposes below tolerance
F3 = radon_nikodym(G.parse_word("a"), nu, P).scale(Fraction(3, 4)).combine(
    LocallyConstantFunction.constant(G, Fraction(1, 4)), lambda x, y: x + y)
res3 = basis_decompose(F3, nu, params)
print("\nlopsided target: rounds", res3.rounds,
      " residual", float(res3.achieved_tolerance),
      " support size", len(res3.coefficients.atoms))
print("residual trace:", [float(x) for x in res3.residual_trace])
