"""Stationarity verification, sphere-uniform baselines, mixing and the
moment/log-moment/entropy functionals."""

import math
from fractions import Fraction

import pytest

from freewalk import (WeightedFreeGroup, GroupMeasure, verify_stationarity,
                      sphere_uniform, mix, functionals, symmetrize, convolve,
                      pushforward, UnsupportedClosedFormError, InputError)


def test_sphere_uniform_shapes(f2):
    mu1 = sphere_uniform(f2, 1)
    assert len(mu1.atoms) == 4
    assert set(mu1.atoms.values()) == {Fraction(1, 4)}
    mu2 = sphere_uniform(f2, 2)
    assert len(mu2.atoms) == 12
    assert set(mu2.atoms.values()) == {Fraction(1, 12)}
    with pytest.raises(UnsupportedClosedFormError):
        sphere_uniform(WeightedFreeGroup(2, weights=[1, 2]), 1)
    with pytest.raises(InputError):
        sphere_uniform(f2, 0)


@pytest.mark.parametrize("radius", [1, 2, 3])
def test_sphere_uniform_exact_stationarity(f2, nu2, radius):
    mu = sphere_uniform(f2, radius)
    report = verify_stationarity(mu, nu2, nu2, depth=radius + 2)
    assert report.exact
    assert report.max_cell_error == 0


def test_delta_e_stationary(f2, nu2):
    mu = GroupMeasure(f2, {(): Fraction(1)})
    report = verify_stationarity(mu, nu2, nu2, depth=3)
    assert report.exact and report.max_cell_error == 0


def test_functionals_examples(f2):
    mu1 = sphere_uniform(f2, 1)
    m, lm, h = functionals(mu1)
    assert m == 1 and h == pytest.approx(math.log(4))
    mu2 = sphere_uniform(f2, 2)
    m2, lm2, h2 = functionals(mu2)
    assert m2 == 2 and h2 == pytest.approx(math.log(12))
    assert lm2 == pytest.approx(math.log(2))
    delta_a = GroupMeasure(f2, {(0,): Fraction(1)})
    m3, lm3, h3 = functionals(delta_a)
    assert m3 == 1 and h3 == 0 and lm3 == 0   # log clamp at d = 1


def test_mix(f2, nu2):
    mu1 = sphere_uniform(f2, 1)
    mu2 = sphere_uniform(f2, 2)
    mixed = mix([(mu1, Fraction(1, 2)), (mu2, Fraction(1, 2))])
    assert len(mixed.atoms) == 16
    rep = verify_stationarity(mixed, nu2, nu2, depth=4)
    assert rep.exact
    single = mix([(mu1, 1)])
    assert single == mu1
    with pytest.raises(InputError):
        mix([(mu1, Fraction(-1, 2)), (mu2, Fraction(3, 2))])
    with pytest.raises(InputError):
        mix([(mu1, Fraction(1, 2))])


def test_mix_greedy_with_sphere(f2, nu2, constants2):
    # mixing a tau-accurate greedy measure half/half with an exact solution
    # halves the error bound, by linearity
    from freewalk import LocallyConstantFunction, GreedyParams, basis_decompose
    tau = 1e-6
    res = basis_decompose(LocallyConstantFunction.constant(f2, 1.0), nu2,
                          GreedyParams(tau=tau), constants=constants2)
    blend = mix([(res.coefficients.normalized(), Fraction(1, 2)),
                 (sphere_uniform(f2, 1), Fraction(1, 2))])
    rep = verify_stationarity(blend, nu2, nu2, depth=4)
    assert float(rep.max_cell_error) <= tau / 2


def test_linearity_of_convolution(f2, nu2):
    mu1 = sphere_uniform(f2, 1)
    mu2 = sphere_uniform(f2, 2)
    t = Fraction(1, 3)
    mixed = mix([(mu1, t), (mu2, 1 - t)])
    conv_mixed = convolve(mixed, nu2)
    c1 = convolve(mu1, nu2)
    c2 = convolve(mu2, nu2)
    for w in f2.sphere(3):
        assert conv_mixed.mass_of(w) == t * c1.mass_of(w) + (1 - t) * c2.mass_of(w)


def test_perturbed_measure_fails(f2, nu2):
    mu = sphere_uniform(f2, 1)
    atoms = dict(mu.atoms)
    atoms[(0,)] = atoms[(0,)] + Fraction(1, 100)
    perturbed = GroupMeasure(f2, atoms).normalized()
    rep = verify_stationarity(perturbed, nu2, nu2, depth=3)
    assert not rep.exact
    assert rep.max_cell_error > 0
    # linearity predicts the error scale: the perturbation moves 1/100 of the
    # mass from uniform to delta_a, off by (delta_a * nu - nu) / (1 + 1/100)
    delta_a = GroupMeasure(f2, {(0,): Fraction(1)})
    worst = max(abs(pushforward((0,), nu2).mass_of(w) - nu2.mass_of(w))
                for w in f2.sphere(3))
    assert rep.max_cell_error == Fraction(1, 100) * worst / Fraction(101, 100)


def test_nu_prime_pushforward_target(f2, nu2):
    # mu = delta_gamma stationizes nu onto nu' = gamma * nu
    gamma = (0, 2)
    mu = GroupMeasure(f2, {gamma: Fraction(1)})
    rep = verify_stationarity(mu, nu2, pushforward(gamma, nu2), depth=4)
    assert rep.exact


def test_normalization_flag(f2, nu2):
    mu = GroupMeasure(f2, {w: Fraction(1) for w in f2.sphere(1)})
    rep = verify_stationarity(mu, nu2, nu2, depth=3)
    assert rep.normalized_copy and rep.exact


def test_symmetrize(f2, nu2):
    mu = GroupMeasure(f2, {(0,): Fraction(1, 2), (2,): Fraction(1, 2)})
    sym = symmetrize(mu)
    assert sym.weight((1,)) == Fraction(1, 4)
    assert sym.total == 1
    # symmetrizing a sphere-uniform is a no-op and stays stationary
    mu1 = sphere_uniform(f2, 1)
    assert symmetrize(mu1) == mu1
    rep = verify_stationarity(symmetrize(mu1), nu2, nu2, depth=3)
    assert rep.exact
