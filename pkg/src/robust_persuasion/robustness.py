"""Continuity and robustness analysis of a reference instance.

The classifier checks whether some basic optimal policy induces, at every
posterior, a sender-preferred best reply whose region is full-dimensional
and which either has no receiver-duplicates or whose duplicates are
sender-equivalent there.  When the check fails, a *pseudo type* (low
dimensional actions removed, duplicate regions carved against the sender)
bounds how much value nearby real types can lose, and a concrete witness type
inside any wrapping box realises that loss.

Only basic optima are inspected; reports carry ``basic_only=True`` to say so.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from numpy.typing import ArrayLike

from .core import (DEFAULT_TOL, Belief, FloatArray, PersuasionInstance, ReceiverType, SignalPolicy,
                   UtilityBox, _indirect, as_type, best_replies, corner_type, make_belief, policy_value,
                   validate_policy)
from .errors import DomainError, InternalConsistencyError, InvalidInputError, NoAdjustmentError
from .geometry import (HalfspaceSystem, _dedup_sorted, all_regions, best_reply_region, max_ball_radius,
                       project_onto, vertices_of)
from .solver import Solution, solve_on_points, solve_optimal

logger = logging.getLogger(__name__)

DEFAULT_WITNESS_DELTA = 0.1
_DELTA_FLOOR = 1e-12


# -- adjustment policies ----------------------------------------------------


@dataclass(frozen=True)
class AdjustmentResult:
    policy: SignalPolicy
    correction_weight: float
    correction_posterior: Belief
    shift_norm: float
    gamma: float
    scale: float


def loss_bound(gamma: float, prior: ArrayLike) -> float:
    """Value that an adjustment with displacement ``gamma`` can cost at most."""
    if gamma < 0:
        raise InvalidInputError("gamma must be nonnegative")
    n = np.asarray(prior).shape[0]
    return float(np.sqrt(n) * gamma + gamma / max_ball_radius(prior))


def build_adjustment(policy: SignalPolicy, new_posteriors: ArrayLike, prior: ArrayLike) -> AdjustmentResult:
    """Move each posterior of ``policy`` and restore the prior as barycenter.

    The drift ``r = sum_i alpha_i mu'_i - prior`` is cancelled by one extra
    posterior at distance ``R`` from the prior in direction ``-r``, with the
    original weights scaled by ``R / (R + |r|)``.
    """
    new = np.atleast_2d(np.asarray(new_posteriors, dtype=float))
    if new.shape != policy.posteriors.shape:
        raise InvalidInputError(f"need {policy.posteriors.shape[0]} new posteriors of length "
                                f"{policy.posteriors.shape[1]}, got shape {new.shape}")
    for mu in new:
        make_belief(mu)
    prior = make_belief(prior, new.shape[1])
    radius = max_ball_radius(prior)
    alpha = policy.weights
    r = alpha @ new - prior
    # drop rounding drift off the plane sum(mu) = 1 before normalising a tiny r
    r = r - r.mean()
    norm = float(np.linalg.norm(r))
    gamma = float(np.max(np.linalg.norm(new - policy.posteriors, axis=1)))
    if norm <= 1e-15:
        return AdjustmentResult(SignalPolicy(alpha, new), 0.0, prior, 0.0, gamma, 1.0)
    corr = prior - radius * r / norm
    corr = np.where(np.abs(corr) < 1e-12, 0.0, corr)
    scale = radius / (radius + norm)
    weight = norm / (radius + norm)
    out = SignalPolicy(np.append(alpha * scale, weight), np.vstack([new, corr]))
    return AdjustmentResult(out, weight, corr, norm, gamma, scale)


def induced_actions(rtype: ReceiverType, policy: SignalPolicy) -> list[int]:
    _, acts = _indirect(rtype.receiver_u, rtype.sender_v, policy.posteriors, rtype.tol.tie)
    return [int(a) for a in acts]


def adjust_into(policy: SignalPolicy, systems: Sequence[HalfspaceSystem], prior: ArrayLike,
                tol=DEFAULT_TOL) -> AdjustmentResult:
    """Project posterior ``i`` onto ``systems[i]`` and repair the barycenter."""
    moved = []
    for mu, system in zip(policy.posteriors, systems):
        if len(vertices_of(system, tol)) == 0:
            raise NoAdjustmentError("target region is empty")
        moved.append(project_onto(system, mu, tol)[0])
    return build_adjustment(policy, np.array(moved), prior)


def adjust_to_type(policy: SignalPolicy, source: ReceiverType | PersuasionInstance,
                   target: ReceiverType | PersuasionInstance) -> tuple[AdjustmentResult, float]:
    """Adjust ``policy`` so each posterior keeps inducing its source action at ``target``."""
    source, target = as_type(source), as_type(target)
    systems = []
    for mu, a in zip(policy.posteriors, induced_actions(source, policy)):
        region = best_reply_region(target, a)
        if region.is_empty:
            raise NoAdjustmentError(f"action {a} is never a best reply for the target type")
        systems.append(region.system)
    result = adjust_into(policy, systems, source.prior, target.tol)
    return result, result.gamma


# -- stability flags --------------------------------------------------------


@dataclass(frozen=True)
class StabilityFlags:
    action: int
    nonempty: bool
    u1: bool
    u2: bool
    duplicates: tuple[int, ...]
    dim: int

    @property
    def stable(self) -> bool:
        """Empty, or free of duplicates and full-dimensional."""
        return (not self.nonempty) or (self.u1 and self.u2)


def duplicate_group(instance: PersuasionInstance | ReceiverType, action: int) -> tuple[int, ...]:
    rtype = as_type(instance)
    diff = np.abs(rtype.receiver_u - rtype.receiver_u[action]).max(axis=1)
    return tuple(int(b) for b in np.flatnonzero(diff <= rtype.tol.dup))


def action_stability_flags(instance: PersuasionInstance | ReceiverType, action: int) -> StabilityFlags:
    rtype = as_type(instance)
    region = best_reply_region(rtype, action)
    dups = duplicate_group(rtype, action)
    return StabilityFlags(int(action), not region.is_empty, len(dups) == 1,
                          region.is_full_dimensional, dups, region.dim)


def all_stability_flags(instance: PersuasionInstance | ReceiverType) -> list[StabilityFlags]:
    rtype = as_type(instance)
    return [action_stability_flags(rtype, a) for a in range(rtype.n_actions)]


def check_U1S(instance: PersuasionInstance | ReceiverType, action: int, belief: ArrayLike) -> bool:
    """Every receiver-duplicate of ``action`` gives the sender the same value at ``belief``."""
    rtype = as_type(instance)
    mu = make_belief(belief, rtype.n_states, rtype.tol)
    v = rtype.sender_v
    return all(abs(float((v[action] - v[b]) @ mu)) <= rtype.tol.tie for b in duplicate_group(rtype, action))


# -- classifier -------------------------------------------------------------


class Verdict(str, enum.Enum):
    ROBUST = "ROBUST"
    FRAGILE = "FRAGILE"


@dataclass(frozen=True, eq=False)
class RobustnessReport:
    verdict: Verdict
    witness_policy: SignalPolicy
    fragile_posteriors: list[tuple[Belief, int]]
    gap_constant: float
    witness_type: ReceiverType | None
    optimal_value: float
    pseudo_value: float
    witness_gap: float | None = None
    basic_only: bool = True

    def __post_init__(self) -> None:
        if self.verdict is Verdict.ROBUST and (self.fragile_posteriors or self.witness_type is not None):
            raise InternalConsistencyError("a robust report cannot carry fragility witnesses")
        if self.verdict is Verdict.FRAGILE and not self.gap_constant > 0:
            raise InternalConsistencyError("a fragile report needs a positive gap constant")


def _sender_optimal_replies(rtype: ReceiverType, mu: FloatArray) -> tuple[tuple[int, ...], tuple[int, ...]]:
    replies = best_replies(rtype, mu)
    vals = rtype.sender_v[list(replies)] @ mu
    top = vals.max()
    induced = tuple(b for b, x in zip(replies, vals) if x >= top - rtype.tol.tie)
    return replies, induced


def _posterior_ok(rtype: ReceiverType, flags: list[StabilityFlags], mu: FloatArray) -> bool:
    _, induced = _sender_optimal_replies(rtype, mu)
    return any(flags[a].u2 and (flags[a].u1 or check_U1S(rtype, a, mu)) for a in induced)


def _inferior_reply(rtype: ReceiverType, flags: list[StabilityFlags], mu: FloatArray) -> int:
    """Full-dimensional best reply worst for the sender (lowest index on ties)."""
    replies, induced = _sender_optimal_replies(rtype, mu)
    top = float(rtype.sender_v[induced[0]] @ mu)
    options = [(float(rtype.sender_v[b] @ mu), b) for b in replies
               if flags[b].u2 and float(rtype.sender_v[b] @ mu) < top - rtype.tol.tie]
    if not options:
        raise InternalConsistencyError(f"posterior {mu.tolist()} fails the stability check "
                                       "but has no inferior full-dimensional best reply")
    low = min(v for v, _ in options)
    return min(b for v, b in options if v <= low + rtype.tol.tie)


@dataclass(frozen=True, eq=False)
class _Analysis:
    solution: Solution
    flags: list[StabilityFlags]
    certifying: int | None


def _analyze(rtype: ReceiverType) -> _Analysis:
    solution = solve_optimal(rtype)
    flags = all_stability_flags(rtype)
    for k, pol in enumerate(solution.all_basic_optima):
        if all(_posterior_ok(rtype, flags, mu) for mu in pol.posteriors):
            return _Analysis(solution, flags, k)
    return _Analysis(solution, flags, None)


def pseudo_regions(instance: PersuasionInstance | ReceiverType) -> list[HalfspaceSystem | None]:
    """Region systems of the pseudo type (``None`` for removed actions)."""
    rtype = as_type(instance)
    regions = all_regions(rtype)
    full = rtype.n_states - 1
    out: list[HalfspaceSystem | None] = []
    for a, region in enumerate(regions):
        if region.is_empty:
            out.append(region.system)
        elif region.dim < full:
            out.append(None)
        else:
            rivals = [b for b in duplicate_group(rtype, a) if b != a]
            if not rivals:
                out.append(region.system)
            else:
                g = rtype.sender_v[a] - rtype.sender_v[rivals]
                out.append(region.system.with_full_rows(g, np.zeros(len(rivals)),
                                                        tuple(f"carve{b}" for b in rivals)))
    return out


def pseudo_optimal_value(instance: PersuasionInstance | ReceiverType) -> tuple[float, float]:
    """Optimal value at the pseudo type and its gap ``C`` to the reference optimum."""
    rtype = as_type(instance)
    tol = rtype.tol
    systems = pseudo_regions(rtype)
    verts = [vertices_of(s, tol) for s in systems if s is not None]
    points = _dedup_sorted(np.vstack([v for v in verts if len(v)]), tol.dedup)
    scores = np.full(len(points), -np.inf)
    for a, system in enumerate(systems):
        if system is None:
            continue
        inside = np.array([system.contains(p, tol.mem) for p in points])
        vals = points @ rtype.sender_v[a]
        scores = np.where(inside, np.maximum(scores, vals), scores)
    if not np.all(np.isfinite(scores)):
        raise InternalConsistencyError("pseudo regions do not cover every pooled posterior")
    value = solve_on_points(points, scores, rtype.prior, tol).value
    gap = solve_optimal(rtype).value - value
    if abs(gap) <= tol.opt:
        gap = 0.0
    return float(value), float(gap)


def _witness_direction(rtype: ReceiverType, flags: list[StabilityFlags]) -> FloatArray:
    """Per-entry direction of the witness perturbation (scaled by delta*)."""
    full = rtype.n_states - 1
    d = np.zeros_like(rtype.receiver_u)
    for f in flags:
        if f.nonempty and f.dim < full:
            d[f.action] = -1.0
        elif f.nonempty and not f.u1:
            d[f.action] = 1.0 - rtype.sender_v[f.action]
    return d


def fragile_witness_type(instance: PersuasionInstance, box: UtilityBox) -> tuple[ReceiverType, float]:
    """A type inside ``box`` whose optimal value is at least ``C / 2`` below the reference."""
    rtype = instance.reference
    if box.reference is not instance and not np.array_equal(box.reference.receiver_u, instance.receiver_u):
        raise InvalidInputError("box does not wrap this instance")
    analysis = _analyze(rtype)
    if analysis.certifying is not None:
        raise DomainError("instance is robust; there is no fragile witness")
    _, c = pseudo_optimal_value(rtype)
    if not c > 0:
        raise InternalConsistencyError("instance fails the basic-optimum check but the pseudo gap is zero; "
                                       "a non-basic optimum may satisfy the sufficient condition")
    direction = _witness_direction(rtype, analysis.flags)
    down = direction < 0
    up = direction > 0
    margins = np.concatenate([box.margin_below()[down] / -direction[down],
                              box.margin_above()[up] / direction[up]])
    if margins.size == 0:
        raise InternalConsistencyError("fragile instance produced an empty witness direction")
    margin = float(margins.min())
    if not margin > 0:
        raise DomainError("box leaves no room around the reference in the witness direction")
    step = margin / 2
    opt0 = analysis.solution.value
    while step >= _DELTA_FLOOR:
        witness = rtype.with_receiver(rtype.receiver_u + step * direction)
        gap = opt0 - solve_optimal(witness).value
        if gap >= c / 2 - rtype.tol.opt:
            logger.debug("fragile witness found at delta*=%g with gap %g", step, gap)
            return witness, float(gap)
        step /= 2
    raise InternalConsistencyError("witness perturbation shrank below 1e-12 without certifying the gap")


def default_witness_box(instance: PersuasionInstance) -> UtilityBox:
    return UtilityBox.uniform(instance, DEFAULT_WITNESS_DELTA, clip=False)


def classify(instance: PersuasionInstance, box: UtilityBox | None = None) -> RobustnessReport:
    """Decide continuity/robustness of ``instance``.

    ``box`` is only used to build the fragile witness type; by default it is
    the unclipped box of interval length 0.1 around every entry.
    """
    rtype = instance.reference
    analysis = _analyze(rtype)
    opt = analysis.solution
    if analysis.certifying is not None:
        return RobustnessReport(Verdict.ROBUST, opt.all_basic_optima[analysis.certifying], [], 0.0, None,
                                opt.value, opt.value)
    pseudo_value, c = pseudo_optimal_value(rtype)
    policy = opt.policy
    fragile = [(mu, _inferior_reply(rtype, analysis.flags, mu)) for mu in policy.posteriors
               if not _posterior_ok(rtype, analysis.flags, mu)]
    witness, gap = fragile_witness_type(instance, box if box is not None else default_witness_box(instance))
    return RobustnessReport(Verdict.FRAGILE, policy, fragile, c / 2, witness, opt.value, pseudo_value, gap)


# -- evaluation over type sets ----------------------------------------------


@dataclass(frozen=True, eq=False)
class TypeEvaluation:
    per_type: list[tuple[ReceiverType, float, float]]
    regret: float
    min_utility: float


def evaluation_from_values(types: Sequence[ReceiverType], opts: Sequence[float], values: Sequence[float]) -> TypeEvaluation:
    per = list(zip(types, (float(o) for o in opts), (float(v) for v in values)))
    regret = max(0.0, max(o - v for _, o, v in per))
    return TypeEvaluation(per, regret, min(v for _, _, v in per))


def evaluate_policy_over_types(instance: PersuasionInstance, policy: SignalPolicy,
                               types: Sequence[ReceiverType]) -> TypeEvaluation:
    if not types:
        raise InvalidInputError("need at least one type")
    bad = validate_policy(policy, instance.prior, instance.tol)
    if bad is not None:
        raise InvalidInputError(f"invalid signal policy: {bad}")
    opts = [solve_optimal(t).value for t in types]
    values = [policy_value(t, policy) for t in types]
    return evaluation_from_values(types, opts, values)


def witness_type_set(instance: PersuasionInstance, box: UtilityBox, samples: int = 0,
                     seed: int = 0) -> list[ReceiverType]:
    """Reference, both corners per action, the fragile witness if any, then random box points."""
    if samples < 0:
        raise InvalidInputError("samples must be nonnegative")
    types = [instance.reference]
    for a in range(instance.n_actions):
        types.append(corner_type(box, a, "inf"))
        types.append(corner_type(box, a, "sup"))
    if _analyze(instance.reference).certifying is None:
        types.append(fragile_witness_type(instance, box)[0])
    types.extend(box.sample(np.random.default_rng(seed), samples))
    return types


def inf_corner_system(box: UtilityBox, action: int) -> HalfspaceSystem:
    """Beliefs where ``action`` (or a reference duplicate of it) is a best reply for every box type.

    The duplicates share the entrywise minimum of their lower bounds; each
    outside rival sits at its upper bound.
    """
    ref = box.reference.reference
    group = duplicate_group(ref, action)
    row = box.lo[list(group)].min(axis=0)
    rivals = [b for b in range(ref.n_actions) if b not in group]
    g = box.hi[rivals] - row
    system = HalfspaceSystem.simplex(ref.n_states)
    if rivals:
        system = system.with_full_rows(g, np.zeros(len(rivals)), tuple(f"vs{b}" for b in rivals))
    return system


@dataclass(frozen=True, eq=False)
class SearchResult:
    policy: SignalPolicy
    score: float
    criterion: str
    evaluation: TypeEvaluation
    candidates: int
    regret_bound: float | None = None


def search_robust_policy(instance: PersuasionInstance, box: UtilityBox,
                         criterion: Literal["maxmin", "minregret"] = "minregret",
                         samples: int = 0, seed: int = 0) -> SearchResult:
    """Best policy for ``criterion`` within a finite candidate family.

    Candidates are the basic optima of every witness type, their adjustments
    into the inf-corner regions, and the uninformative policy; each is scored
    on :func:`witness_type_set`.  The score is therefore an upper bound on the
    box's minimal regret, or a lower bound on its max-min value.
    """
    if criterion not in ("maxmin", "minregret"):
        raise InvalidInputError(f"unknown criterion {criterion!r}")
    types = witness_type_set(instance, box, samples, seed)
    prior = instance.prior
    tol = instance.tol
    candidates: list[tuple[SignalPolicy, float | None]] = []
    inf_systems = [inf_corner_system(box, a) for a in range(instance.n_actions)]
    inf_empty = [len(vertices_of(s, tol)) == 0 for s in inf_systems]
    opts = []
    for t in types:
        sol = solve_optimal(t)
        opts.append(sol.value)
        for pol in sol.all_basic_optima:
            candidates.append((pol, None))
            acts = induced_actions(t, pol)
            if any(inf_empty[a] for a in acts):
                continue
            adj = adjust_into(pol, [inf_systems[a] for a in acts], prior, tol)
            candidates.append((adj.policy, 2 * loss_bound(adj.gamma, prior)))
    candidates.append((SignalPolicy.no_information(prior), None))

    best: tuple[float, int, TypeEvaluation] | None = None
    for k, (pol, _) in enumerate(candidates):
        ev = evaluation_from_values(types, opts, [policy_value(t, pol) for t in types])
        score = ev.regret if criterion == "minregret" else -ev.min_utility
        if best is None or score < best[0] - 1e-12:
            best = (score, k, ev)
    assert best is not None
    score, k, ev = best
    pol, bound = candidates[k]
    final = ev.regret if criterion == "minregret" else ev.min_utility
    return SearchResult(pol, float(final), criterion, ev, len(candidates), bound)
