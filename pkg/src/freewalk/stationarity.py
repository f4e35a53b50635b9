"""End-to-end stationarity verification, sphere-uniform baselines, solution
mixing and the moment/entropy functionals."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Tuple

from .words import WeightedFreeGroup, InputError, invert
from .measures import BoundaryMeasure, GroupMeasure, convolve


class UnsupportedClosedFormError(ValueError):
    """Sphere-uniform closed form needs equal generator weights."""


@dataclass
class StationarityReport:
    max_cell_error: object
    depth: int
    exact: bool
    moment: object
    log_moment: float
    entropy: float
    moment_finite: bool
    log_moment_finite: bool
    entropy_finite: bool
    normalized_copy: bool = False

    def to_json(self) -> dict:
        return {"exact": self.exact,
                "depth": self.depth,
                "max_cell_error": repr(float(self.max_cell_error)),
                "moment": repr(float(self.moment)),
                "log_moment": repr(float(self.log_moment)),
                "entropy": repr(float(self.entropy)),
                "moment_finite": self.moment_finite,
                "log_moment_finite": self.log_moment_finite,
                "entropy_finite": self.entropy_finite,
                "normalized_copy": self.normalized_copy}


def functionals(mu: GroupMeasure) -> Tuple[object, float, float]:
    """(first moment, log-moment, entropy) of a finitely supported measure.

    Per-term log contributions are clamped at 0 for d(e, gamma) < 1, so the
    log-moment keeps its finiteness semantics on weighted groups.
    """
    group = mu.group
    exact = all(isinstance(v, Fraction) for v in mu.atoms.values())
    moment = Fraction(0) if exact else 0.0
    log_moment = 0.0
    entropy = 0.0
    for w, v in mu.atoms.items():
        d = group.word_weight(w)
        moment = moment + v * d
        if d > 1:
            log_moment += float(v) * math.log(float(d))
        if v > 0:
            entropy -= float(v) * math.log(float(v))
    return moment, log_moment, entropy


def verify_stationarity(mu: GroupMeasure, nu: BoundaryMeasure,
                        nu_prime: BoundaryMeasure, depth: Optional[int] = None,
                        threads: int = 1) -> StationarityReport:
    """Report max |(mu * nu)(C) - nu'(C)| over all cylinders of the given depth.

    A mu of total mass != 1 is replaced by a normalized copy and flagged.
    Default depth: maximal support word length + 2.
    """
    group = mu.group
    if depth is None:
        depth = mu.support_radius() + 2
    if depth < 1:
        raise InputError(f"depth must be >= 1, got {depth}")
    normalized = False
    total = mu.total
    if total != 1:
        mu = mu.normalized()
        normalized = True
    conv = convolve(mu, nu, threads=threads)
    worst = Fraction(0)
    exact_arith = True
    for w in group.sphere(depth):
        err = conv.mass_of(w) - nu_prime.mass_of(w)
        if isinstance(err, float):
            exact_arith = False
        if err < 0:
            err = -err
        if err > worst:
            worst = err
    exact = exact_arith and worst == 0
    moment, log_moment, entropy = functionals(mu)
    return StationarityReport(
        max_cell_error=worst, depth=depth, exact=exact,
        moment=moment, log_moment=log_moment, entropy=entropy,
        moment_finite=math.isfinite(float(moment)),
        log_moment_finite=math.isfinite(log_moment),
        entropy_finite=math.isfinite(entropy),
        normalized_copy=normalized)


def sphere_uniform(group: WeightedFreeGroup, radius: int) -> GroupMeasure:
    """Uniform probability on the sphere of combinatorial radius `radius`.

    Stationizes the conformal measure exactly on unit-weight groups; the
    closed form requires equal weights (spheres must be metrically uniform).
    """
    if radius < 1:
        raise InputError(f"radius must be >= 1, got {radius}")
    if not group.unit_weights():
        raise UnsupportedClosedFormError(
            "sphere-uniform closed form requires equal generator weights")
    words = group.sphere(radius)
    mass = Fraction(1, len(words))
    return GroupMeasure(group, {w: mass for w in words})


def mix(solutions: Sequence[Tuple[GroupMeasure, object]]) -> GroupMeasure:
    """Convex combination of group measures (weights >= 0 summing to 1)."""
    if not solutions:
        raise InputError("mix needs at least one measure")
    weights = [Fraction(t) if not isinstance(t, float) else t
               for _, t in solutions]
    if any(t < 0 for t in weights):
        raise InputError("mixing weights must be nonnegative")
    total = sum(weights)
    if (isinstance(total, Fraction) and total != 1) or \
            (not isinstance(total, Fraction) and abs(total - 1) > 1e-12):
        raise InputError(f"mixing weights must sum to 1, got {total}")
    group = solutions[0][0].group
    atoms = {}
    for m, t in zip((m for m, _ in solutions), weights):
        if m.group != group:
            raise InputError("cannot mix measures over different groups")
        for w, v in m.atoms.items():
            atoms[w] = atoms.get(w, 0) + t * v
    return GroupMeasure(group, atoms)


def symmetrize(mu: GroupMeasure) -> GroupMeasure:
    """The symmetric average gamma -> (mu(gamma) + mu(gamma^{-1}))/2.

    Whether a symmetric stationizing measure always exists is open; callers
    must re-verify stationarity of the result.
    """
    atoms = {}
    for w, v in mu.atoms.items():
        half = v / 2
        atoms[w] = atoms.get(w, 0) + half
        wi = invert(w)
        atoms[wi] = atoms.get(wi, 0) + half
    return GroupMeasure(mu.group, atoms)
