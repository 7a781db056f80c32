"""Concavification over the extreme points of the best-reply regions.

The sender's problem is the linear program

    maximize   sum_e alpha_e * score_e
    subject to sum_e alpha_e * mu_e = prior,  alpha >= 0

over the pooled region vertices ``mu_e``.  Its basic feasible solutions are
supported on at most N linearly independent posteriors, so every basic
optimum can be listed by solving the N x N subsystems.  When the pool is too
large for brute force, an LP dual certificate first discards every posterior
that cannot appear in any optimal solution.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike
from scipy.optimize import linprog

from .core import (DEFAULT_TOL, Belief, FloatArray, ReceiverType, SignalPolicy, Tolerances, TypeLike,
                   _indirect, as_type, validate_policy)
from .errors import DomainError, InternalConsistencyError, InvalidInputError
from .geometry import _dedup_sorted, _subsets, all_regions

_BRUTE_FORCE_LIMIT = 50_000
_CHUNK = 20_000
_PRUNE_SLACK = 1e-7


@dataclass(frozen=True)
class ScoredPosterior:
    belief: Belief
    best_action: int
    sender_value: float


class Solution(NamedTuple):
    value: float
    policy: SignalPolicy
    all_basic_optima: list[SignalPolicy]


def pool_arrays(rtype: TypeLike) -> tuple[FloatArray, FloatArray, np.ndarray]:
    """Pooled region vertices with their indirect sender values and chosen actions."""
    rtype = as_type(rtype)
    verts = [r.vertices for r in all_regions(rtype) if len(r.vertices)]
    points = _dedup_sorted(np.vstack(verts), rtype.tol.dedup)
    values, actions = _indirect(rtype.receiver_u, rtype.sender_v, points, rtype.tol.tie)
    return points, values, actions


def extreme_point_pool(rtype: TypeLike) -> list[ScoredPosterior]:
    points, values, actions = pool_arrays(rtype)
    return [ScoredPosterior(p, int(a), float(v)) for p, v, a in zip(points, values, actions)]


def _candidate_indices(points: FloatArray, scores: FloatArray, prior: FloatArray) -> np.ndarray:
    """Indices of pool points that may carry weight in some optimal solution."""
    n = points.shape[1]
    if comb(len(points), n) <= _BRUTE_FORCE_LIMIT:
        return np.arange(len(points))
    res = linprog(-scores, A_eq=points.T, b_eq=prior, bounds=(0, None), method="highs")
    if res.status != 0:
        raise InternalConsistencyError(f"sender LP failed: {res.message}")
    # every optimal primal solution lives on the points that are tight for this dual
    dual = -np.asarray(res.eqlin.marginals)
    reduced = points @ dual - scores
    keep = np.flatnonzero(reduced <= _PRUNE_SLACK * max(1.0, np.abs(dual).max()))
    extra = np.flatnonzero(res.x > 0)
    return np.union1d(keep, extra)


def solve_on_points(points: ArrayLike, scores: ArrayLike, prior: ArrayLike,
                    tol: Tolerances = DEFAULT_TOL) -> Solution:
    """Best distribution over ``points`` with barycenter ``prior``.

    ``points`` must contain N linearly independent posteriors (the simplex
    vertices always qualify).  Every optimal support of size at most N is
    returned, ordered by their sorted pool indices.
    """
    points = np.asarray(points, dtype=float)
    scores = np.asarray(scores, dtype=float)
    prior = np.asarray(prior, dtype=float)
    n = points.shape[1]
    cand = _candidate_indices(points, scores, prior)
    idx_all = cand[_subsets(len(cand), n)] if len(cand) >= n else np.zeros((0, n), np.intp)
    best = -np.inf
    found: dict[tuple[int, ...], float] = {}
    for start in range(0, len(idx_all), _CHUNK):
        idx = idx_all[start:start + _CHUNK]
        mats = np.swapaxes(points[idx], 1, 2)
        ok = np.abs(np.linalg.det(mats)) > 1e-12
        if not np.any(ok):
            continue
        idx, mats = idx[ok], mats[ok]
        alpha = np.linalg.solve(mats, np.broadcast_to(prior, (len(idx), n))[..., None])[..., 0]
        feas = np.all(alpha >= -tol.sum, axis=1)
        idx, alpha = idx[feas], alpha[feas]
        if len(idx) == 0:
            continue
        vals = np.einsum("kn,kn->k", alpha, scores[idx])
        top = vals.max()
        if top > best + tol.opt:
            found = {key: v for key, v in found.items() if v >= top - tol.opt}
        best = max(best, top)
        for row, w, v in zip(idx, alpha, vals):
            if v >= best - tol.opt:
                key = tuple(sorted(int(i) for i, wi in zip(row, w) if wi > tol.sum))
                found.setdefault(key, float(v))
    found = {k: v for k, v in found.items() if v >= best - tol.opt}
    if not found:
        raise InternalConsistencyError("no feasible basic distribution; the pool must contain the simplex vertices")
    optima = [_policy_on(points[list(key)], prior) for key in sorted(found)]
    return Solution(float(best), optima[0], optima)


def _policy_on(support: FloatArray, prior: FloatArray) -> SignalPolicy:
    w, *_ = np.linalg.lstsq(support.T, prior, rcond=None)
    w = np.clip(w, 0.0, None)
    return SignalPolicy(w / w.sum(), support)


def solve_optimal(rtype: TypeLike) -> Solution:
    """Optimal sender value, a basic optimal policy, and every basic optimum."""
    rtype = as_type(rtype)
    points, values, _ = pool_arrays(rtype)
    return solve_on_points(points, values, rtype.prior, rtype.tol)


def optimal_value(rtype: TypeLike) -> float:
    return solve_optimal(rtype).value


def is_basic(policy: SignalPolicy, tol: Tolerances = DEFAULT_TOL) -> bool:
    """Support of at most N affinely independent posteriors."""
    k, n = policy.posteriors.shape
    return k <= n and np.linalg.matrix_rank(policy.posteriors, tol=tol.rank) == k


def make_basic(policy: SignalPolicy, rtype: TypeLike) -> SignalPolicy:
    """Shrink a policy on pool points to a basic one without losing value.

    While the posteriors are affinely dependent, move weight along a null
    direction ``beta`` (``sum beta_i mu_i = 0``) oriented so the value does not
    drop, stopping when the first weight reaches zero.
    """
    rtype = as_type(rtype)
    tol = rtype.tol
    bad = validate_policy(policy, rtype.prior, tol)
    if bad is not None:
        raise InvalidInputError(f"invalid signal policy: {bad}")
    points, _, _ = pool_arrays(rtype)
    for mu in policy.posteriors:
        if np.min(np.linalg.norm(points - mu, axis=1)) > tol.dedup:
            raise DomainError(f"posterior {mu.tolist()} is not an extreme point of any best-reply region")
    if is_basic(policy, tol):
        return policy
    current = policy.merged(tol.dedup)
    while not is_basic(current, tol):
        w, mus = current.weights, current.posteriors
        scores, _ = _indirect(rtype.receiver_u, rtype.sender_v, mus, tol.tie)
        beta = np.linalg.svd(mus.T)[2][-1]
        if beta @ scores > 0:
            beta = -beta
        pos = beta > 1e-14
        if not np.any(pos):
            beta = -beta
            pos = beta > 1e-14
        ratios = np.where(pos, w / np.where(pos, beta, 1.0), np.inf)
        t = ratios.min()
        new_w = w - t * beta
        new_w[int(np.argmin(ratios))] = 0.0
        keep = new_w > tol.sum
        current = SignalPolicy(new_w[keep] / new_w[keep].sum(), mus[keep])
    return current
