"""
The space of stationizing measures
==================================

Convex combinations of measures that stationize nu stationize it too, so the
solution set is a convex body containing all sphere-uniform measures and the
greedy outputs.  Symmetrizing a solution need not preserve stationarity in
general -- the helper re-verifies.
"""

from fractions import Fraction

from freewalk import (WeightedFreeGroup, LocallyConstantFunction, GreedyParams,
                      default_params, uniform_ps_measure, basis_decompose,
                      sphere_uniform, mix, symmetrize, verify_stationarity,
                      functionals)

G = WeightedFreeGroup(2)
P = default_params(G)
nu = uniform_ps_measure(G, P)

# 1. three independent solutions
mu1 = sphere_uniform(G, 1)
mu2 = sphere_uniform(G, 2)
mu3 = basis_decompose(LocallyConstantFunction.constant(G, Fraction(1)), nu,
                      GreedyParams(tau=1e-9)).coefficients
for name, mu in (("sphere-1", mu1), ("sphere-2", mu2), ("greedy", mu3)):
    rep = verify_stationarity(mu, nu, nu, depth=5)
    m, lm, h = functionals(mu)
    print(f"{name:>9}: exact={rep.exact}  support={len(mu.atoms):>3}  "
          f"moment={float(m):.4f}  entropy={h:.4f}")

# 2. mixing stays stationary, exactly, with linear functionals
blend = mix([(mu1, Fraction(1, 2)), (mu2, Fraction(1, 3)), (mu3, Fraction(1, 6))])
rep = verify_stationarity(blend, nu, nu, depth=5)
print("\nblend of all three: exact =", rep.exact,
      " support =", len(blend.atoms), " moment =", float(rep.moment))

# 3. symmetrize-and-reverify (no general guarantee; exact here by symmetry)
sym = symmetrize(blend)
rep_sym = verify_stationarity(sym, nu, nu, depth=5)
print("symmetrized blend: mu(g) = mu(g^-1) and still exact =", rep_sym.exact)
