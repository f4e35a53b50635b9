"""Greedy positive-cone decomposition of boundary densities into spikes.

The inner step builds g_n by the monotone recursion

    lambda_n = max(0, F(b_n) - g_{n-1}(b_n)),   g_n = g_{n-1} + lambda_n u_n,

over unit-sup spikes u_n sorted by nonincreasing radius, then rescales so the
output stays below the target.  The outer loops iterate this on residuals:
`basis_decompose` runs until an L1 tolerance is met, `moment_decompose`
follows the shrinking-radius schedule whose shell depths grow slowly enough
to certify finite first moment and entropy of the resulting group measure
mu(gamma) = lambda_gamma * ||u_gamma||_1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .words import Word, EPSILON, WeightedFreeGroup, InputError, invert, is_prefix
from .geometry import Cylinder, VisualParams
from .partitions import LocallyConstantFunction, refine_leaves, trie_closure
from .measures import BoundaryMeasure, GroupMeasure, integrate, radon_nikodym
from .spikes import (Spike, shadow_lemma_audit, decay_check,
                     local_doubling_sup, ball_cells)


class GreedyParameterError(ValueError):
    """A precondition of the greedy subfunction construction fails."""


class InternalInvariantError(RuntimeError):
    """A guaranteed inequality failed at runtime; never silently ignored."""


# ---------------------------------------------------------------------------
# measured constants
# ---------------------------------------------------------------------------

@dataclass
class AuditConstants:
    """Regularity constants measured by the audits (not the proofs' loose ones)."""

    beta: object          # Shadow Lemma constant
    d0: object            # Shadow Lemma margin floor
    d_nu: object          # (Q, theta)-decay constant
    t_nu: object          # local doubling supremum over the spike family
    lebesgue_b: int       # cover Lebesgue number (1: disjoint cylinder covers)
    q: object             # Q = alpha/epsilon
    l_nu: object          # 3 L_nu = 1 / (1 + B + D B + B T + B D 2^Q)

    def rho_star(self, beta_damp, c_cap, s):
        """Guaranteed per-round residual factor 1 - L_nu beta / (C^2 s^2)."""
        return 1 - self.l_nu * beta_damp / (c_cap * c_cap * s * s)


def measure_constants(nu: BoundaryMeasure, params: VisualParams,
                      max_len: int = 3, ds: Sequence = (0, 1)) -> AuditConstants:
    """Run the shadow/decay/doubling audits and assemble L_nu from the measured
    values via 3 L_nu = 1/(1 + B + D_nu B + B T_nu + B D_nu 2^Q)."""
    group = nu.group
    aud = shadow_lemma_audit(nu, params, max_len, list(ds))
    q = params.q_exponent
    center = EPSILON
    for _ in range(max_len + 2):
        center = center + (group.valid_extensions(center)[0],)
    radii = [params.epsilon.exp_neg(j) for j in range(1, max_len + 2)]
    dec = decay_check(nu, q, q, EPSILON, [Cylinder(center)], radii, params=params)
    t_nu = local_doubling_sup(nu, params, max_len, list(ds))
    b = 1
    if isinstance(q, Fraction) and q.denominator == 1:
        two_q = Fraction(2) ** q.numerator
    else:
        two_q = 2.0 ** float(q)
    l_nu = Fraction(1, 3) / (1 + b + dec.d_nu * b + b * t_nu + b * dec.d_nu * two_q)
    return AuditConstants(beta=aud.beta, d0=aud.d0, d_nu=dec.d_nu, t_nu=t_nu,
                          lebesgue_b=b, q=q, l_nu=l_nu)


# ---------------------------------------------------------------------------
# parameters and results
# ---------------------------------------------------------------------------

@dataclass
class GreedyParams:
    """Knobs of the decomposition loops.

    s: oscillation bound in (1, 2]; beta: damping in (0, 1); c_cap: spike
    constant cap C > 1; margin: integer shadow margin D; tau: L1 stopping
    threshold; schedule: "fixed" C or slowly "growing" C_n; rescale:
    "adaptive" (largest safe factor) or "proof" (3 L_nu / (C s)).
    """

    s: Fraction = Fraction(2)
    beta: Fraction = Fraction(1, 2)
    c_cap: Optional[Fraction] = None
    margin: int = 0
    tau: float = 1e-6
    schedule: str = "fixed"
    rescale: str = "adaptive"
    max_rounds: int = 200
    max_shell: int = 24
    audit_len: int = 3
    truncate: Optional[float] = 1e-15

    def __post_init__(self):
        self.s = Fraction(self.s)
        self.beta = Fraction(self.beta)
        if not 1 < self.s <= 2:
            raise InputError(f"s must lie in (1, 2], got {self.s}")
        if not 0 < self.beta < 1:
            raise InputError(f"beta must lie in (0, 1), got {self.beta}")
        if self.c_cap is not None:
            self.c_cap = Fraction(self.c_cap)
            if self.c_cap <= 1:
                raise InputError(f"C must exceed 1, got {self.c_cap}")
        if self.margin < 0 or int(self.margin) != self.margin:
            raise InputError(f"shadow margin must be a nonnegative integer, got {self.margin}")
        if self.tau < 0:
            raise InputError(f"tau must be >= 0, got {self.tau}")
        if self.schedule not in ("fixed", "growing"):
            raise InputError(f"unknown schedule {self.schedule!r}")
        if self.rescale not in ("adaptive", "proof"):
            raise InputError(f"unknown rescale {self.rescale!r}")

    def cap_for(self, constants: AuditConstants, params: VisualParams):
        """Default spike-constant cap: the measured Shadow beta times e^{2 alpha D}."""
        if self.c_cap is not None:
            return self.c_cap
        bound = constants.beta / params.alpha.exp_neg(2 * self.margin)
        return bound if bound > 1 else Fraction(3, 2)


@dataclass
class RoundRecord:
    index: int
    shell: int
    cover_depth: int
    spike_count: int
    factor: object
    round_mass: object
    residual_l1: object
    eps: Optional[float] = None
    delta: Optional[float] = None
    max_log_inv_l1: Optional[float] = None
    moment_contribution: Optional[float] = None
    envelope: Optional[float] = None


@dataclass
class DecompositionResult:
    coefficients: GroupMeasure
    residual_trace: List[object]
    rounds: int
    achieved_tolerance: float
    moment: object
    log_moment: float
    entropy: float
    records: List[RoundRecord] = field(default_factory=list)
    envelope_report: Optional[dict] = None
    leak: float = 0.0

    def to_json(self) -> dict:
        from .partitions import _num_to_str
        group = self.coefficients.group
        doc = {
            "coefficients": [[group.format_word(w), _num_to_str(v)]
                             for w, v in self.coefficients.items()],
            "residual_trace": [_num_to_str(v) for v in self.residual_trace],
            "rounds": self.rounds,
            "achieved_tolerance": repr(float(self.achieved_tolerance)),
            "moment": _num_to_str(self.moment),
            "log_moment": repr(float(self.log_moment)),
            "entropy": repr(float(self.entropy)),
            "leak": repr(float(self.leak)),
        }
        if self.envelope_report is not None:
            doc["envelope"] = self.envelope_report
        return doc

    def to_csv(self) -> str:
        group = self.coefficients.group
        lines = ["norm,mu"]
        for w, v in self.coefficients.items():
            lines.append(f"{float(group.word_weight(w))},{float(v)}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# spike-sum accumulator on the cover trie
# ---------------------------------------------------------------------------

class SpikeAccumulator:
    """Incremental evaluation of sums of coeff * u_gamma.

    A unit-sup spike profile is radial in the branch depth: on a cell meeting
    the center word w at weighted depth W_t the profile equals
    e^{-2 alpha (W_n - W_t)}.  Per-node partial sums make insertion and point
    evaluation O(depth).
    """

    def __init__(self, group: WeightedFreeGroup, params: VisualParams):
        self.group = group
        self.alpha = params.alpha
        self.nodes: Dict[Word, object] = {}

    def insert(self, center: Word, coeff) -> None:
        total = self.group.word_weight(center)
        acc = Fraction(0)
        for t in range(len(center) + 1):
            node = center[:t]
            weight = coeff * self.alpha.exp_neg(2 * (total - acc))
            self.nodes[node] = self.nodes.get(node, 0) + weight
            if t < len(center):
                acc += self.group.letter_weight(center[t])

    def value_at(self, word: Word):
        total = 0
        for t in range(len(word) + 1):
            node = word[:t]
            s = self.nodes.get(node, 0)
            if t < len(word):
                child = word[: t + 1]
                sc = self.nodes.get(child, 0)
                step = self.alpha.exp_neg(2 * self.group.letter_weight(word[t]))
                total = total + (s - step * sc)
            else:
                total = total + s
        return total


def _spine_word(group: WeightedFreeGroup, word: Word, depth: int) -> Word:
    w = tuple(word)
    while len(w) < depth:
        w = w + (group.valid_extensions(w)[0],)
    return w


# ---------------------------------------------------------------------------
# the inner greedy construction
# ---------------------------------------------------------------------------

@dataclass
class GreedyOutcome:
    lambdas: List[Tuple[Word, object]]   # (gamma, raw lambda)
    g: LocallyConstantFunction
    h: LocallyConstantFunction
    factor: object
    t_value: float
    delta_exp: object


def oscillation_threshold(f: LocallyConstantFunction, s) -> Fraction:
    """Smallest weighted scale exponent T such that sup f / inf f <= s within
    every cell class at scale e^{-eps T} (0 when f is globally s-flat)."""
    group = f.group
    node_stats: Dict[Word, List] = {}
    for w, v in f.values.items():
        for i in range(len(w) + 1):
            node = w[:i]
            st = node_stats.get(node)
            if st is None:
                node_stats[node] = [v, v]
            else:
                if v < st[0]:
                    st[0] = v
                if v > st[1]:
                    st[1] = v
    # candidate thresholds: distinct node weights, ascending
    weights = sorted({group.word_weight(n) for n in node_stats})
    for t_exp in weights:
        ok = True
        for node, (lo, hi) in node_stats.items():
            if group.word_weight(node) >= t_exp:
                parent_covered = any(
                    group.word_weight(node[:i]) >= t_exp for i in range(len(node)))
                if parent_covered:
                    continue  # not a minimal class head
                if lo <= 0 or hi > s * lo:
                    ok = False
                    break
        if ok:
            return t_exp
    return max(weights)


def t_factor(sup_val, inf_val, q) -> float:
    return (float(sup_val) / float(inf_val)) ** (1.0 / float(q)) + 1.0


def greedy_lambdas(target: LocallyConstantFunction, spikes: Sequence[Spike],
                   params: VisualParams):
    """Run the positive greedy recursion; returns raw lambdas and the
    accumulated g materialized on the common refinement."""
    group = target.group
    acc = SpikeAccumulator(group, params)
    depth = max([target.depth()] + [len(s.center.word) for s in spikes])
    lambdas: List[Tuple[Word, object]] = []
    for sp in spikes:
        b = sp.center.word
        spine = _spine_word(group, b, depth)
        lam = target.at(spine) - acc.value_at(spine)
        if lam > 0:
            acc.insert(b, lam)
            lambdas.append((sp.gamma, lam))
        else:
            lambdas.append((sp.gamma, 0))
    leaves = refine_leaves(group, target.leaves(),
                           trie_closure(group, [s.center.word for s in spikes]))
    g = LocallyConstantFunction(group, {w: acc.value_at(w) for w in leaves},
                                validate=False)
    return lambdas, g


def greedy_subfunction(F: LocallyConstantFunction, spikes: Sequence[Spike],
                       Y: Sequence[Cylinder], params: GreedyParams,
                       constants: AuditConstants,
                       vparams: VisualParams) -> GreedyOutcome:
    """Proposition-style subfunction: validate the radius/oscillation
    preconditions, run the recursion, and rescale by 3 L_nu / (C s).

    Guarantees h <= F pointwise and, on a covered Y, h >= (L_nu/(C^2 s^2)) F.
    The infimum and the oscillation pairs range over the span of the cover
    (the union of the spike balls with Y); for the full covers used by the
    outer loops the span is the whole boundary.
    """
    if not spikes:
        raise GreedyParameterError("no spikes supplied")
    group = F.group
    inf_f = F.inf()
    if inf_f <= 0:
        raise GreedyParameterError(
            f"target must be uniformly positive; min cell value is {inf_f}")
    spikes = sorted(spikes, key=lambda s: (s.r_exp, len(s.gamma), s.gamma))
    c_cap = params.cap_for(constants, vparams)
    for sp in spikes:
        if sp.c is not None and sp.c > c_cap:
            raise GreedyParameterError(
                f"spike constant {sp.c} exceeds the cap C = {c_cap}")
    leaves = refine_leaves(group, F.leaves(),
                           trie_closure(group, [sp.center.word for sp in spikes]))
    span = set()
    for sp in spikes:
        span.update(ball_cells(group, leaves, sp.center.word, vparams, sp.r_exp))
    for cyl in Y:
        span.update(w for w in leaves
                    if is_prefix(cyl.word, w) or is_prefix(w, cyl.word))
    restricted = LocallyConstantFunction(group, {w: F.at(w) for w in span},
                                         validate=False)
    inf_span = restricted.inf()
    sup_y = _sup_over(F, Y)
    t_val = t_factor(sup_y, inf_span, constants.q)
    delta_exp = oscillation_threshold(restricted, params.s)
    r_min_exp = min(sp.r_exp for sp in spikes)  # largest radius
    if not vparams.epsilon.leq_scaled(r_min_exp, delta_exp, 1.0 / t_val):
        raise GreedyParameterError(
            f"largest spike radius exceeds delta/t: radius exponent {r_min_exp} "
            f"vs oscillation scale {delta_exp} with t = {t_val:.3f}")
    lambdas, g = greedy_lambdas(F, spikes, vparams)
    factor = 3 * constants.l_nu / (c_cap * params.s)
    h = g.scale(factor)
    bad = [w for w in h.values if h.values[w] > F.at(w)]
    if bad:
        raise InternalInvariantError(f"h exceeds F on cells {bad[:3]}")
    return GreedyOutcome(lambdas=lambdas, g=g, h=h, factor=factor,
                         t_value=t_val, delta_exp=delta_exp)


def _sup_over(F: LocallyConstantFunction, Y: Sequence[Cylinder]):
    if not Y or any(c.is_everything for c in Y):
        return F.sup()
    best = None
    for cyl in Y:
        for w, v in F.values.items():
            if is_prefix(cyl.word, w) or is_prefix(w, cyl.word):
                best = v if best is None else max(best, v)
    if best is None:
        raise GreedyParameterError("Y does not meet the target's partition")
    return best


# ---------------------------------------------------------------------------
# round plumbing shared by the outer loops
# ---------------------------------------------------------------------------

def _round_spikes(group: WeightedFreeGroup, nu: BoundaryMeasure,
                  vparams: VisualParams, shell: int, margin: int,
                  cap) -> List[Spike]:
    """One spike per cover cell: shadows of a canonical gamma per cell of the
    depth-(shell - margin) partition (disjoint; Lebesgue number 1)."""
    from .geometry import sup_product
    cover_depth = shell - margin
    if cover_depth < 0:
        raise InternalInvariantError(f"shell {shell} below margin {margin}")
    spikes = []
    for cell in group.sphere(cover_depth):
        word = _spine_word(group, cell, shell)
        gamma = invert(word)
        f = radon_nikodym(gamma, nu, vparams)
        sup = f.sup()
        unit = f.scale(1 / sup)
        spikes.append(Spike(function=unit, r_exp=sup_product(group, gamma) - margin,
                            center=Cylinder(word), q=vparams.q_exponent,
                            theta=vparams.q_exponent, c=cap, gamma=gamma,
                            margin=Fraction(margin), params=vparams))
    spikes.sort(key=lambda s: (s.r_exp, len(s.gamma), s.gamma))
    return spikes


def _adaptive_factor(R: LocallyConstantFunction, g: LocallyConstantFunction,
                     params: GreedyParams) -> Fraction:
    """Largest factor with h = c g <= beta R pointwise: c = beta / max(g/R).

    In exact mode the factor is snapped down to a small denominator so the
    residual's rationals stay tame across rounds.
    """
    group = R.group
    leaves = refine_leaves(group, R.leaves(), g.leaves())
    max_ratio = max(g.at(w) / R.at(w) for w in leaves)
    if max_ratio <= 0:
        raise InternalInvariantError("greedy produced the zero function")
    c = params.beta / max_ratio
    if isinstance(c, Fraction) and c.denominator > 10 ** 6:
        snapped = Fraction(math.floor(c * 10 ** 6), 10 ** 6)
        if snapped > 0:
            c = snapped
    return c


def _norm_l1(f: LocallyConstantFunction, nu: BoundaryMeasure):
    return sum(v * nu.mass_of(w) for w, v in f.values.items())


def _cone_finisher(R: LocallyConstantFunction, nu: BoundaryMeasure,
                   spikes: Sequence[Spike], vparams: VisualParams,
                   tau: float, sweeps: int = 120):
    """Try to reconstruct the residual exactly inside the positive cone.

    The round system sum_w lambda_w u_w = R is strictly diagonally dominant
    (u_w(b_w) = 1, off-center tails sum to 1/3), so projected Gauss-Seidel
    converges to its nonnegative solution whenever one exists; this is the
    fixed point the iterated round recursion approaches.  The float iterate is
    then scaled down exactly so that h <= R holds cellwise; the finisher is
    accepted only if the leftover is below tau.

    Returns (lambdas, h) or None.
    """
    group = R.group
    depth = max([R.depth()] + [len(sp.center.word) for sp in spikes])
    centers = [sp.center.word for sp in spikes]
    spines = [_spine_word(group, b, depth) for b in centers]
    targets = [float(R.at(sp)) for sp in spines]
    acc = SpikeAccumulator(group, VisualParams.floats(vparams.alpha.value,
                                                      vparams.epsilon.value))
    lam = [0.0] * len(spikes)
    for _ in range(sweeps):
        moved = 0.0
        for i, b in enumerate(centers):
            g_here = acc.value_at(spines[i])
            new = max(0.0, lam[i] + (targets[i] - g_here))
            delta = new - lam[i]
            if delta != 0.0:
                acc.insert(b, delta)
                lam[i] = new
                moved = max(moved, abs(delta))
        if moved <= 1e-16:
            break
    exact = all(isinstance(v, Fraction) for v in R.values.values())
    leaves = refine_leaves(group, R.leaves(), trie_closure(group, centers))

    def attempt(lam_list):
        acc_q = SpikeAccumulator(group, vparams)
        for b, x in zip(centers, lam_list):
            if x > 0:
                acc_q.insert(b, x)
        g_vals = {w: acc_q.value_at(w) for w in leaves}
        scale = None
        for w in leaves:
            gv = g_vals[w]
            if gv > 0:
                ratio = R.at(w) / gv
                scale = ratio if scale is None else min(scale, ratio)
        if scale is None or scale <= 0:
            return None
        one = Fraction(1) if exact else 1.0
        if scale > 1:
            scale = one
        residual = sum((R.at(w) - scale * g_vals[w]) * nu.mass_of(w)
                       for w in leaves)
        if float(residual) > tau or residual < 0:
            return None
        lambdas = [(sp.gamma, scale * x) for sp, x in zip(spikes, lam_list)]
        h = LocallyConstantFunction(group, {w: scale * g_vals[w] for w in leaves},
                                    validate=False)
        return lambdas, h, residual

    if exact:
        # snapping the float iterate often recovers the exact cone solution
        snapped = [Fraction(x).limit_denominator(10 ** 12) for x in lam]
        got = attempt(snapped)
        if got is not None and got[2] == 0:
            return got[0], got[1]
        got = attempt([Fraction(x) for x in lam])
    else:
        got = attempt(lam)
    if got is None:
        return None
    return got[0], got[1]


# ---------------------------------------------------------------------------
# outer loops
# ---------------------------------------------------------------------------

def basis_decompose(F: LocallyConstantFunction, nu: BoundaryMeasure,
                    params: GreedyParams,
                    constants: Optional[AuditConstants] = None) -> DecompositionResult:
    """Iterate the greedy subfunction on residuals until ||R||_1 <= tau.

    Returns mu with convolve(mu, nu) within tau of F d nu in total variation;
    the residual trace contracts at least by 1 - L_nu beta/(C^2 s^2) per round.
    """
    vparams = nu.params
    group = F.group
    if constants is None:
        constants = measure_constants(nu, vparams, max_len=params.audit_len,
                                      ds=(0, params.margin) if params.margin else (0, 1))
    cap = params.cap_for(constants, vparams)
    if F.inf() <= 0:
        raise GreedyParameterError("target must be uniformly positive")
    R = F
    mu: Dict[Word, object] = {}
    trace = [_norm_l1(R, nu)]
    records: List[RoundRecord] = []
    # Each round applies the recursion to the damped target beta * R and keeps
    # the whole ladder sum h = g, enforcing the domination h <= R cellwise
    # (the proof's uniform shrink factor exists to guarantee exactly this);
    # a violated check means the spike tails are too coarse for the residual's
    # contrast, so the round deepens the shell and retries.
    shell = max(1, params.margin,
                min(int(oscillation_threshold(F, params.s)) + params.margin,
                    params.max_shell))
    spike_cache: Dict[int, List[Spike]] = {}
    unit_mass: Dict[Word, object] = {}
    for round_idx in range(1, params.max_rounds + 1):
        if float(trace[-1]) <= params.tau:
            break
        c_round_cap = cap if params.schedule == "fixed" \
            else cap * Fraction(math.isqrt(1 + round_idx))
        rho = constants.rho_star(params.beta, c_round_cap, params.s)
        if shell not in spike_cache:
            spike_cache[shell] = _round_spikes(group, nu, vparams, shell,
                                               params.margin, cap)
        finish = None
        if params.rescale == "adaptive":
            finish = _cone_finisher(R, nu, spike_cache[shell], vparams, params.tau)
        if finish is not None:
            spikes = spike_cache[shell]
            lambdas, h = finish
            factor = 1
            g = h
        else:
            target = R.scale(params.beta)
            while True:
                if shell not in spike_cache:
                    spike_cache[shell] = _round_spikes(group, nu, vparams, shell,
                                                       params.margin, cap)
                spikes = spike_cache[shell]
                lambdas, g = greedy_lambdas(target, spikes, vparams)
                factor = 1 if params.rescale == "adaptive" \
                    else 3 * constants.l_nu / (c_round_cap * params.s)
                h = g if factor == 1 else g.scale(factor)
                dominated = all(h.at(w) <= R.at(w)
                                for w in refine_leaves(group, R.leaves(), h.leaves()))
                if dominated or shell >= params.max_shell:
                    break
                shell += 1  # tails too coarse for the residual's contrast
            if not dominated:
                # graceful fallback: cap the whole round uniformly
                factor = _adaptive_factor(R, g, params)
                h = g.scale(factor)
        R_next = R.sub(h).canonical()
        l1_next = _norm_l1(R_next, nu)
        if not l1_next < trace[-1]:
            raise InternalInvariantError(
                f"residual did not decrease in round {round_idx}: "
                f"{trace[-1]} -> {l1_next}")
        if float(l1_next) > float(rho) * float(trace[-1]) + 1e-12:
            raise InternalInvariantError(
                f"round {round_idx} violated the guaranteed contraction "
                f"{float(rho):.6f}")
        for (gamma, lam), sp in zip(lambdas, spikes):
            if lam > 0:
                mass = unit_mass.get(gamma)
                if mass is None:
                    mass = integrate(sp.function, nu)
                    unit_mass[gamma] = mass
                mu[gamma] = mu.get(gamma, 0) + factor * lam * mass
        records.append(RoundRecord(index=round_idx, shell=shell,
                                   cover_depth=shell - params.margin,
                                   spike_count=len(spikes), factor=factor,
                                   round_mass=factor * _norm_l1(g, nu),
                                   residual_l1=l1_next))
        R = R_next
        trace.append(l1_next)
    return _finish(group, nu, mu, trace, records, params, constants, None)


def moment_decompose(F: LocallyConstantFunction, nu: BoundaryMeasure,
                     params: GreedyParams, rounds: int = 3,
                     constants: Optional[AuditConstants] = None) -> DecompositionResult:
    """Moment-controlled schedule (fixed C, full coverage): shrink radii by

        delta_N = min((s-1) inf R / sup D_{g(eps)} R, g(eps_{N-1})),
        eps_N = min(delta_N / t_N, eps_{N-1}),  g(r) = e^{-eps D} r,

    draw one shell of shadow spikes per round with radii in [g(eps_N), eps_N],
    and certify the case-3 moment/entropy envelope from the measured run.
    """
    vparams = nu.params
    group = F.group
    if params.margin < 1:
        raise InputError("moment schedule needs an integer shadow margin D >= 1 "
                         "(the radius band must contain a shell)")
    if constants is None:
        constants = measure_constants(nu, vparams, max_len=params.audit_len,
                                      ds=(0, params.margin))
    cap = params.cap_for(constants, vparams)
    # case-3 admissibility: C^2/(C^2 - L_nu) > k = 1 holds for every C > 1
    if not (cap * cap / (cap * cap - constants.l_nu)) > 1:
        raise InputError("case-3 schedule condition violated")
    if F.inf() <= 0:
        raise GreedyParameterError("target must be uniformly positive")
    from .spikes import lipschitz_scale
    eps_sched: List[float] = [1.0]
    R = F
    mu: Dict[Word, object] = {}
    trace = [_norm_l1(R, nu)]
    records: List[RoundRecord] = []
    g_shift = float(vparams.epsilon.exp_neg(params.margin))  # g(r) = e^{-eps D} r
    proof_factor = params.beta * 3 * constants.l_nu / (cap * params.s)
    for n in range(1, rounds + 1):
        if float(trace[-1]) <= params.tau:
            break
        eps_prev = eps_sched[-1]
        g_prev = g_shift * eps_prev
        slopes = lipschitz_scale(R, _exp_of(vparams, g_prev), vparams)
        sup_slope = max(slopes.values())
        if sup_slope > 0:
            delta_n = min(float((params.s - 1)) * float(R.inf()) / float(sup_slope),
                          g_prev)
        else:
            delta_n = g_prev
        t_n = t_factor(R.sup(), R.inf(), constants.q)
        eps_n = min(delta_n / t_n, eps_prev)
        eps_sched.append(eps_n)
        shell = _band_shell(vparams, eps_n, params.margin, params.max_shell)
        spikes = _round_spikes(group, nu, vparams, shell, params.margin, cap)
        lambdas, g = greedy_lambdas(R, spikes, vparams)
        factor = proof_factor if params.rescale == "proof" \
            else _adaptive_factor(R, g, params, vparams,
                                  oscillation_threshold(R, params.s))
        h = g.scale(factor)
        bad = [w for w in h.values if h.values[w] > params.beta * R.at(w)]
        if bad:
            raise InternalInvariantError(f"h exceeds beta R on {bad[:3]}")
        R_next = R.sub(h).canonical()
        l1_next = _norm_l1(R_next, nu)
        round_mass = 0
        max_log = 0.0
        contribution = 0.0
        for (gamma, lam), sp in zip(lambdas, spikes):
            if lam > 0:
                mass_u = integrate(sp.function, nu)
                coeff = factor * lam * mass_u
                mu[gamma] = mu.get(gamma, 0) + coeff
                round_mass = round_mass + coeff
                log_inv = -math.log(float(mass_u))
                max_log = max(max_log, log_inv)
                contribution += float(coeff) * log_inv
        records.append(RoundRecord(index=n, shell=shell,
                                   cover_depth=shell - params.margin,
                                   spike_count=len(spikes), factor=factor,
                                   round_mass=round_mass, residual_l1=l1_next,
                                   eps=eps_n, delta=delta_n,
                                   max_log_inv_l1=max_log,
                                   moment_contribution=contribution))
        R = R_next
        trace.append(l1_next)
    envelope = _case3_envelope(records, trace[0], params, constants, cap, vparams,
                               eps_sched)
    return _finish(group, nu, mu, trace, records, params, constants, envelope)


def _exp_of(vparams: VisualParams, r: float) -> float:
    """Scale exponent t with e^{-eps t} = r."""
    return vparams.epsilon.log_recip(r)


def _band_shell(vparams: VisualParams, eps_n: float, margin: int,
                max_shell: int) -> int:
    """Largest-radius shell with e^{-eps(n-D)} <= eps_n (the band
    [g(eps_n), eps_n] always contains it when D >= 1)."""
    n = max(1, margin)
    while n <= max_shell:
        if vparams.epsilon.leq_scaled(Fraction(n - margin), 0, eps_n):
            return n
        n += 1
    raise InternalInvariantError(f"no shell with radius <= {eps_n} below cap")


def _case3_envelope(records: List[RoundRecord], norm_f, params: GreedyParams,
                    constants: AuditConstants, cap, vparams: VisualParams,
                    eps_sched: List[float]) -> dict:
    """Replay of the case-3 closed-form bound with measured constants.

    envelope_N = C' rho*^{N-1} (lambda_hat Q (N-1)^2 + Q log(1/g(eps_1)) + 2 log C)
    with C' = beta ||F||_1 and lambda_hat measured from the eps recursion.
    Soundness inputs (round mass bound, per-spike log bound) are checked
    separately so the envelope is not fitted to what it certifies.
    """
    rho = float(constants.rho_star(params.beta, cap, params.s))
    q = float(constants.q)
    c_prime = float(params.beta) * float(norm_f)
    lam_hat = 0.0
    for n in range(2, len(eps_sched)):
        lam_hat = max(lam_hat, -math.log(eps_sched[n]) / (n - 1) ** 2)
    g1 = float(vparams.epsilon.exp_neg(params.margin)) * eps_sched[1] \
        if len(eps_sched) > 1 else 1.0
    b0 = q * (-math.log(g1)) + 2 * math.log(float(cap))
    checks = {"mass_bound": True, "log_bound": True, "envelope": True}
    rows = []
    for rec in records:
        n = rec.index
        env = c_prime * rho ** (n - 1) * (lam_hat * q * (n - 1) ** 2 + b0)
        rec.envelope = env
        r_exp = rec.shell - params.margin
        log_r_bound = q * r_exp * vparams.epsilon.value + 2 * math.log(float(cap))
        if float(rec.round_mass) > c_prime * rho ** (n - 1) + 1e-12:
            checks["mass_bound"] = False
        if rec.max_log_inv_l1 is not None and rec.max_log_inv_l1 > log_r_bound + 1e-9:
            checks["log_bound"] = False
        if rec.moment_contribution is not None and rec.moment_contribution > env + 1e-12:
            checks["envelope"] = False
        rows.append({"round": n, "envelope": env,
                     "contribution": rec.moment_contribution,
                     "mass": float(rec.round_mass),
                     "mass_cap": c_prime * rho ** (n - 1)})
    # infinite-tail certificate: sum_{M>N} C' rho^{M-1} (lam q (M-1)^2 + b0)
    def tail(after: int) -> float:
        total, m = 0.0, after + 1
        while True:
            term = c_prime * rho ** (m - 1) * (lam_hat * q * (m - 1) ** 2 + b0)
            total += term
            if term < 1e-18 * max(total, 1.0) or m > after + 10000:
                return total
            m += 1
    tails = {str(rec.index): tail(rec.index) for rec in records}
    return {"rho_star": rho, "c_prime": c_prime, "lambda_hat": lam_hat,
            "b0": b0, "rows": rows, "checks": checks, "tail_bounds": tails}


def _finish(group, nu, mu, trace, records, params, constants, envelope):
    leak = 0.0
    exact_mode = all(isinstance(v, Fraction) for v in mu.values())
    atoms = dict(mu)
    if params.truncate is not None and not exact_mode and atoms:
        total = sum(float(v) for v in atoms.values())
        floor = params.truncate * total
        dropped = {w: v for w, v in atoms.items() if float(v) < floor}
        leak = sum(float(v) for v in dropped.values())
        for w in dropped:
            del atoms[w]
    coeffs = GroupMeasure(group, atoms)
    moment = sum((v * group.word_weight(w) for w, v in coeffs.atoms.items()),
                 Fraction(0) if exact_mode else 0.0)
    log_moment = 0.0
    entropy = 0.0
    for w, v in coeffs.atoms.items():
        d = float(group.word_weight(w))
        if d > 1:
            log_moment += float(v) * math.log(d)
        if v > 0:
            entropy -= float(v) * math.log(float(v))
    achieved = float(trace[-1]) + leak
    result = DecompositionResult(
        coefficients=coeffs, residual_trace=trace, rounds=len(records),
        achieved_tolerance=achieved, moment=moment, log_moment=log_moment,
        entropy=entropy, records=records, envelope_report=envelope, leak=leak)
    if envelope is not None:
        ent_cap = sum(float(r.round_mass)
                      * (math.log(max(r.spike_count, 1)) - math.log(float(r.round_mass)))
                      for r in records if r.round_mass and float(r.round_mass) > 0)
        envelope["entropy_bound_A"] = ent_cap / float(trace[0]) if trace[0] else 0.0
        envelope["checks"]["entropy"] = entropy <= ent_cap + 1e-9
    return result


# ---------------------------------------------------------------------------
# sequence decay lemma
# ---------------------------------------------------------------------------

def sequence_decay_bound(deltas: Sequence, epsilons: Sequence, a1) -> List:
    """Closed-form upper envelope for a_{n+1} <= (1-delta_n) a_n + delta_n eps_n:

        a_{n+1} <= sum_{k=0}^n (Delta^n_k - Delta^n_{k-1}) eps_k,

    with Delta^n_m = prod_{k=m+1}^n (1-delta_k), Delta^n_{-1} = 0, eps_0 = a_1.
    Returns [bound(a_1), bound(a_2), ..., bound(a_{N+1})].
    """
    deltas = list(deltas)
    epsilons = list(epsilons)
    if len(deltas) != len(epsilons):
        raise InputError("deltas and epsilons must have equal length")
    for d in deltas:
        if not 0 <= d <= 1:
            raise InputError(f"delta outside [0, 1]: {d}")
    eps_seq = [a1] + epsilons       # eps_0 = a_1
    dl_seq = [0] + deltas           # 1-indexed deltas
    bounds = [a1]
    n_max = len(deltas)
    for n in range(1, n_max + 1):
        delta_vals = {n: 1}         # Delta^n_m for m = n..-1
        for m in range(n - 1, -2, -1):
            delta_vals[m] = 0 if m == -1 \
                else delta_vals[m + 1] * (1 - dl_seq[m + 1])
        total = 0
        for k in range(0, n + 1):
            total = total + (delta_vals[k] - delta_vals[k - 1]) * eps_seq[k]
        bounds.append(total)
    return bounds


def sequence_decay_iterate(deltas: Sequence, epsilons: Sequence, a1) -> List:
    """Direct recursion oracle a_{n+1} = (1-delta_n) a_n + delta_n eps_n."""
    out = [a1]
    a = a1
    for d, e in zip(deltas, epsilons):
        a = (1 - d) * a + d * e
        out.append(a)
    return out


# ---------------------------------------------------------------------------
# cases 1/2 post-hoc audits
# ---------------------------------------------------------------------------

def audit_case_envelope(result: DecompositionResult, case: int) -> dict:
    """Post-hoc finiteness audit of a coefficient stream against the case-1/2
    round-mass envelopes (these schedules are not enforced on cocompact trees;
    the audit fits the envelope constant and reports the implied sums)."""
    if case not in (1, 2):
        raise InputError(f"case must be 1 or 2, got {case}")
    rows = []
    c_fit = 0.0
    for rec in result.records:
        n = rec.index + 1  # envelopes start mattering from round 2
        if case == 1:
            denom = 1.0 / (n ** 3 * math.log(n) ** 2)
        else:
            denom = 1.0 / (n ** 2 * math.log(n) ** 2 + n * math.log(n) ** 3)
        c_fit = max(c_fit, float(rec.round_mass) / denom)
        rows.append({"round": rec.index, "mass": float(rec.round_mass),
                     "envelope_shape": denom})
    moment = float(result.moment)
    log_moment = float(result.log_moment)
    return {"case": case, "fitted_constant": c_fit, "rows": rows,
            "moment": moment, "moment_finite": math.isfinite(moment),
            "log_moment": log_moment, "log_moment_finite": math.isfinite(log_moment),
            "entropy": float(result.entropy),
            "entropy_finite": math.isfinite(float(result.entropy))}
