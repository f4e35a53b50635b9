"""Conformal measures, growth quantities, derivatives, pushforwards and
convolution, with dual-route oracles."""

import math
from fractions import Fraction

import pytest

from freewalk import (WeightedFreeGroup, VisualParams,
                      default_params, uniform_ps_measure, critical_exponent,
                      conformal_exponent, poincare_series, weighted_shell_counts,
                      radon_nikodym, pushforward, convolve, integrate,
                      GroupMeasure, BoundaryMeasure,
                      DivergentNormalizationError, ConformalityError,
                      RefinementRuleError)
from freewalk.words import invert, multiply


def test_uniform_masses(f2, nu2):
    assert nu2.mass_of((0,)) == Fraction(1, 4)
    assert nu2.mass_of((0, 2)) == Fraction(1, 12)
    assert nu2.total == 1
    # additivity at every node up to depth 4
    for n in range(4):
        for w in f2.sphere(n):
            kids = sum(nu2.mass_of(w + (x,)) for x in f2.valid_extensions(w))
            assert kids == nu2.mass_of(w)


def test_general_weights_conformal():
    g = WeightedFreeGroup(2, weights=[1, 2])
    s = conformal_exponent(g)
    params = VisualParams.floats(s, s)
    nu = uniform_ps_measure(g, params)
    assert nu.conformal
    assert abs(float(nu.total) - 1) < 1e-9
    total = sum(nu.mass_of((x,)) for x in g.letters())
    assert abs(total - 1) < 1e-9


def test_alpha_off_critical(f2):
    # larger alpha: Markov fallback, flagged non-conformal
    big = VisualParams.exact_base(5)
    nu5 = uniform_ps_measure(f2, big)
    assert not nu5.conformal and nu5.rule == "markov"
    assert nu5.total == 1
    with pytest.raises(ConformalityError):
        radon_nikodym((0,), nu5, big)
    # smaller alpha: divergent normalization
    with pytest.raises(DivergentNormalizationError):
        uniform_ps_measure(f2, VisualParams.exact_base(2))


def brute_sphere_counts(group, horizon):
    """Enumeration oracle for unit weights."""
    return [len(group.sphere(n)) for n in range(horizon + 1)]


def test_critical_exponent(f2, f3):
    assert critical_exponent(f2) == math.log(3)
    assert critical_exponent(f3) == math.log(5)
    counts = brute_sphere_counts(f2, 8)
    assert weighted_shell_counts(f2, 8) == counts
    assert counts[8] == 4 * 3 ** 7
    est = critical_exponent(f2, horizon=12, method="estimate")
    assert abs(est - math.log(3)) <= 1e-6
    w = WeightedFreeGroup(2, weights=[2, 2])
    assert critical_exponent(w) == math.log(3) / 2


def test_poincare_series(f2):
    s_two = 2 * math.log(3)
    val, div, shells = poincare_series(f2, s_two, 8)
    assert not div
    # Cauchy increments beyond n = 8 are tiny: shell term 4*3^{k-1} e^{-2k log3}
    tail = 4 / 3 * (1 / 3) ** 8
    assert tail < 1e-3
    val0, div0, _ = poincare_series(f2, 0.0, 4)
    assert div0 and val0 == sum(len(f2.sphere(n)) for n in range(5))
    valc, divc, shellsc = poincare_series(f2, math.log(3), 8)
    assert divc
    by_len = dict(shellsc)
    for k in range(1, 9):
        assert by_len[Fraction(k)] * math.exp(-math.log(3) * k) == pytest.approx(4 / 3)


def test_radon_nikodym_values(f2, nu2, params2):
    f = radon_nikodym((1,), nu2, params2)     # gamma = a^-1
    assert f.at((0, 0)) == 3
    assert f.at((1,)) == Fraction(1, 3)
    assert f.at((2,)) == Fraction(1, 3)
    assert integrate(f, nu2) == 1
    assert 3 * Fraction(1, 4) + Fraction(1, 3) * Fraction(3, 4) == 1
    f_e = radon_nikodym((), nu2, params2)
    assert f_e.sup() == 1 and f_e.inf() == 1
    # bounds e^{-alpha |gamma|} <= f <= e^{alpha |gamma|}
    for gamma in f2.ball(3):
        f = radon_nikodym(gamma, nu2, params2)
        n = len(gamma)
        assert f.inf() == Fraction(3) ** (-n)
        assert f.sup() == Fraction(3) ** n
        assert integrate(f, nu2) == 1


def test_cocycle(f2, nu2, params2):
    # chain rule in the nu(gamma E) convention: f_{ge}(z) = f_e(z) f_g(e z)
    for gamma in f2.ball(2):
        fg = radon_nikodym(gamma, nu2, params2)
        for eta in f2.ball(2):
            fe = radon_nikodym(eta, nu2, params2)
            lhs = radon_nikodym(multiply(gamma, eta), nu2, params2)
            assert lhs == fe.mul(fg.translate(invert(eta)))


def test_pushforward(f2, nu2, params2):
    pf_e = pushforward((), nu2)
    for w in f2.sphere(3):
        assert pf_e.mass_of(w) == nu2.mass_of(w)
    pf = pushforward((1,), nu2)
    assert pf.mass_of((0,)) == Fraction(3, 4)
    assert pf.total == 1
    # dual route: (gamma* nu)(E) = integral of f_gamma over E
    for n in range(1, 4):
        for gamma in f2.sphere(n):
            pfg = pushforward(gamma, nu2)
            fg = radon_nikodym(gamma, nu2, params2)
            for w in f2.sphere(3):
                direct = pfg.mass_of(w)
                via_density = sum(fg.at(u) * nu2.mass_of(u)
                                  for u in f2.sphere(4) if u[:3] == w)
                assert direct == via_density


def test_convolve(f2, nu2):
    delta_e = GroupMeasure(f2, {(): Fraction(1)})
    conv = convolve(delta_e, nu2)
    for w in f2.sphere(3):
        assert conv.mass_of(w) == nu2.mass_of(w)
    sphere1 = GroupMeasure(f2, {w: Fraction(1, 4) for w in f2.sphere(1)})
    conv1 = convolve(sphere1, nu2)
    for n in range(1, 5):
        for w in f2.sphere(n):
            assert conv1.mass_of(w) == nu2.mass_of(w)
    # mixed atoms recomputed by brute pushforward
    mixed = GroupMeasure(f2, {(0,): Fraction(1, 2), (1,): Fraction(1, 2)})
    convm = convolve(mixed, nu2)
    for w in f2.sphere(2):
        brute = (pushforward((0,), nu2).mass_of(w)
                 + pushforward((1,), nu2).mass_of(w)) / 2
        assert convm.mass_of(w) == brute
    # determinism across thread counts
    conv8 = convolve(sphere1, nu2, threads=8)
    assert all(conv8.mass_of(w) == conv1.mass_of(w) for w in f2.sphere(4))


def test_integrate(f2, nu2, params2):
    from freewalk import LocallyConstantFunction
    one = LocallyConstantFunction.constant(f2, Fraction(1))
    assert integrate(one, nu2) == 1
    assert integrate(radon_nikodym((1,), nu2, params2), nu2) == 1
    # refinement invariance: the partition representation does not matter
    f = radon_nikodym((0, 2), nu2, params2)
    refined = f.refine_to(f2.sphere(4))
    assert integrate(refined, nu2) == integrate(f, nu2)
    sphere1 = GroupMeasure(f2, {w: Fraction(1, 4) for w in f2.sphere(1)})
    conv_deep = convolve(sphere1, nu2.materialize_depth(3))
    conv = convolve(sphere1, nu2)
    for w in f2.sphere(4):
        assert conv_deep.mass_of(w) == conv.mass_of(w)


def test_measure_serialization(f2, nu2, params2):
    doc = nu2.materialize_depth(2).to_json()
    back = BoundaryMeasure.from_json(doc, params=params2)
    for w in f2.sphere(4):
        assert back.mass_of(w) == nu2.mass_of(w)
    # without a rule, deep queries refuse rather than guess
    raw = BoundaryMeasure(f2, {w: nu2.mass_of(w) for w in f2.sphere(1)})
    with pytest.raises(RefinementRuleError):
        raw.mass_of((0, 2))
    assert raw.mass_of(()) == 1


def test_ps_series_audit(f2, f3, params2):
    # unit weights: the conditioned truncated series measure matches the
    # closed form exactly at every s > delta, so TV vanishes
    from freewalk import ps_series_audit, default_params
    rep = ps_series_audit(f2, params2, depth=3, truncation=9)
    assert rep["tv_distance"] <= 1e-11   # exact cancellation up to float dust
    assert 0 < rep["interior_mass"] < 1
    rep3 = ps_series_audit(f3, default_params(f3), depth=2, truncation=6)
    assert rep3["tv_distance"] <= 1e-11   # float dust over 30 cells
    # general weights: small but nonzero, shrinking with the offset
    g = WeightedFreeGroup(2, weights=[1, 2])
    s = conformal_exponent(g)
    p = VisualParams.floats(s, s)
    near = ps_series_audit(g, p, depth=2, truncation=10, offset=0.01)
    far = ps_series_audit(g, p, depth=2, truncation=10, offset=0.5)
    assert 0 < near["tv_distance"] < far["tv_distance"] < 1


def test_group_measure(f2):
    mu = GroupMeasure(f2, {(0,): Fraction(1, 2), (1,): Fraction(1, 4)})
    assert mu.total == Fraction(3, 4)
    assert mu.normalized().total == 1
    doc = mu.to_json()
    assert GroupMeasure.from_json(doc) == mu
