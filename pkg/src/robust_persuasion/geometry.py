"""Best-reply regions as small polytopes.

A region is kept in reduced coordinates ``x = mu[:N-1]`` (the last state's
mass is implied).  One row per rival action encodes "a is at least as good
as b"; the simplex constraints ``x >= 0`` and ``sum(x) <= 1`` are implicit in
every :class:`HalfspaceSystem` and appended by :meth:`HalfspaceSystem.rows`.

Vertices come from solving every square subsystem of the constraint set and
keeping the feasible solutions.  That is exponential in general but the
instances handled here are tiny (a handful of states and a dozen actions).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Sequence

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike

from .core import (DEFAULT_TOL, Belief, FloatArray, ReceiverType, Tolerances, TypeLike, as_type,
                   _check_action)
from .errors import DomainError, InternalConsistencyError, InvalidInputError

_DET_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class HalfspaceSystem:
    """Rows ``normals @ x <= offsets`` over ``R^(N-1)`` plus the simplex constraints."""

    normals: FloatArray
    offsets: FloatArray
    labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        a = np.array(self.normals, dtype=float)
        b = np.array(self.offsets, dtype=float)
        if a.ndim != 2 or b.ndim != 1 or a.shape[0] != b.shape[0]:
            raise InvalidInputError(f"bad halfspace shapes {a.shape} / {b.shape}")
        if a.shape[1] < 1:
            raise InvalidInputError("reduced systems need at least one coordinate")
        labels = tuple(self.labels) or tuple(f"r{i}" for i in range(a.shape[0]))
        if len(labels) != a.shape[0]:
            raise InvalidInputError("one label per row is required")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "normals", a)
        object.__setattr__(self, "offsets", b)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        """Number of reduced coordinates, ``N - 1``."""
        return int(self.normals.shape[1])

    @property
    def n_states(self) -> int:
        return self.dim + 1

    def rows(self) -> tuple[FloatArray, FloatArray]:
        """All constraints, rival rows first, then ``-x_j <= 0`` and ``sum(x) <= 1``."""
        n = self.dim
        a = np.vstack([self.normals, -np.eye(n), np.ones((1, n))])
        b = np.concatenate([self.offsets, np.zeros(n), [1.0]])
        return a, b

    def full_rows(self) -> tuple[FloatArray, FloatArray]:
        """The same set in full coordinates; the equality ``sum(mu) = 1`` is implied."""
        n = self.dim
        g = np.hstack([self.normals, np.zeros((self.normals.shape[0], 1))])
        g = np.vstack([g, -np.eye(n + 1)])
        h = np.concatenate([self.offsets, np.zeros(n + 1)])
        return g, h

    def with_full_rows(self, g: ArrayLike, h: ArrayLike, labels: Sequence[str] = ()) -> "HalfspaceSystem":
        """Append full-coordinate rows ``g @ mu <= h`` converted to reduced form."""
        g = np.atleast_2d(np.asarray(g, dtype=float))
        h = np.atleast_1d(np.asarray(h, dtype=float))
        if g.shape[1] != self.n_states:
            raise InvalidInputError("full rows must have one entry per state")
        normals = g[:, :-1] - g[:, -1:]
        offsets = h - g[:, -1]
        labels = tuple(labels) or tuple(f"c{i}" for i in range(g.shape[0]))
        return HalfspaceSystem(np.vstack([self.normals, normals]), np.concatenate([self.offsets, offsets]),
                               self.labels + labels)

    def contains(self, belief: ArrayLike, tol: float = DEFAULT_TOL.mem) -> bool:
        mu = np.asarray(belief, dtype=float)
        g, h = self.full_rows()
        return bool(abs(mu.sum() - 1.0) <= tol and np.all(g @ mu <= h + tol))

    def slack(self, belief: ArrayLike) -> float:
        """Smallest slack ``h - g @ mu`` over all rows (negative means violated)."""
        g, h = self.full_rows()
        return float(np.min(h - g @ np.asarray(belief, dtype=float)))

    @classmethod
    def simplex(cls, n_states: int) -> "HalfspaceSystem":
        return cls(np.zeros((0, n_states - 1)), np.zeros(0), ())


def _to_full(x: FloatArray) -> FloatArray:
    mu = np.hstack([x, 1.0 - x.sum(axis=-1, keepdims=True)])
    mu[np.abs(mu) < 1e-15] = 0.0
    return mu


@lru_cache(maxsize=256)
def _subsets(k: int, n: int) -> np.ndarray:
    out = np.array(list(combinations(range(k), n)), dtype=np.intp)
    out.setflags(write=False)
    return out.reshape(-1, n)


def _normalized_rows(system: HalfspaceSystem, tol: Tolerances) -> tuple[FloatArray, FloatArray] | None:
    """Unit-norm rows; ``None`` when a zero row proves the region empty."""
    a, b = system.rows()
    norms = np.linalg.norm(a, axis=1)
    zero = norms <= tol.dup
    if np.any(b[zero] < -tol.mem):
        return None
    a, b, norms = a[~zero], b[~zero], norms[~zero]
    return a / norms[:, None], b / norms


def _dedup_sorted(points: FloatArray, radius: float) -> FloatArray:
    if len(points) == 0:
        return points
    kept: list[FloatArray] = []
    for p in points:
        if all(np.linalg.norm(p - q) > radius for q in kept):
            kept.append(p)
    out = np.array(kept)
    order = np.lexsort(out.T[::-1])
    return out[order]


def vertices_of(system: HalfspaceSystem, tol: Tolerances = DEFAULT_TOL) -> FloatArray:
    """Extreme points (full coordinates, lexicographically sorted) of ``system``."""
    rows = _normalized_rows(system, tol)
    n = system.dim
    if rows is None:
        return np.zeros((0, n + 1))
    a, b = rows
    idx = _subsets(a.shape[0], n)
    if len(idx) == 0:
        return np.zeros((0, n + 1))
    sub_a = a[idx]
    sub_b = b[idx]
    dets = np.linalg.det(sub_a)
    ok = np.abs(dets) > _DET_FLOOR
    if not np.any(ok):
        return np.zeros((0, n + 1))
    xs = np.linalg.solve(sub_a[ok], sub_b[ok][..., None])[..., 0]
    feasible = np.all(xs @ a.T <= b + tol.mem, axis=1)
    return _dedup_sorted(_to_full(xs[feasible]), tol.dedup)


def affine_dimension(points: FloatArray, threshold: float = DEFAULT_TOL.rank) -> int:
    """Affine dimension of a point set via pivoted QR; ``-1`` for no points."""
    if len(points) == 0:
        return -1
    if len(points) == 1:
        return 0
    diffs = (points[1:] - points[0]).T
    r = scipy.linalg.qr(diffs, mode="r", pivoting=True)[0]
    diag = np.abs(np.diag(r))
    return int(np.sum(diag > threshold))


class RegionPolytope:
    """Best-reply region of one action: H-representation plus cached vertices.

    ``vertices`` and ``dim`` are computed on first access under a lock and
    never change afterwards, so instances can be shared across threads.
    """

    __slots__ = ("owner_action", "system", "tol", "_lock", "_vertices", "_dim")

    def __init__(self, owner_action: int, system: HalfspaceSystem, tol: Tolerances = DEFAULT_TOL):
        self.owner_action = owner_action
        self.system = system
        self.tol = tol
        self._lock = threading.Lock()
        self._vertices: FloatArray | None = None
        self._dim: int | None = None

    def _ensure(self) -> None:
        if self._vertices is not None:
            return
        with self._lock:
            if self._vertices is None:
                verts = vertices_of(self.system, self.tol)
                verts.setflags(write=False)
                self._dim = affine_dimension(verts, self.tol.rank)
                self._vertices = verts

    @property
    def vertices(self) -> FloatArray:
        self._ensure()
        return self._vertices  # type: ignore[return-value]

    @property
    def dim(self) -> int:
        self._ensure()
        return self._dim  # type: ignore[return-value]

    @property
    def n_states(self) -> int:
        return self.system.n_states

    @property
    def is_empty(self) -> bool:
        return self.dim < 0

    @property
    def is_full_dimensional(self) -> bool:
        return self.dim == self.n_states - 1

    def contains(self, belief: ArrayLike, tol: float | None = None) -> bool:
        return self.system.contains(belief, self.tol.mem if tol is None else tol)

    def centroid(self) -> FloatArray:
        if self.is_empty:
            raise DomainError("empty region has no centroid")
        return self.vertices.mean(axis=0)

    def __repr__(self) -> str:
        return f"RegionPolytope(owner_action={self.owner_action}, rows={len(self.system.offsets)})"


def reduce_region(rtype: TypeLike, action: int) -> HalfspaceSystem:
    """Reduced inequality system of the region where ``action`` is a best reply."""
    rtype = as_type(rtype)
    action = _check_action(rtype, action)
    u = rtype.receiver_u
    rivals = [b for b in range(rtype.n_actions) if b != action]
    n = rtype.n_states - 1
    if not rivals:
        return HalfspaceSystem.simplex(rtype.n_states)
    ub = u[rivals]
    beta = u[action, n] - ub[:, n]
    alpha = ub[:, :n] - u[action, :n] + beta[:, None]
    return HalfspaceSystem(alpha, beta, tuple(f"vs{b}" for b in rivals))


def all_regions(rtype: TypeLike) -> list[RegionPolytope]:
    """Regions of every action, built once per type object and then shared."""
    rtype = as_type(rtype)
    cached = rtype.__dict__.get("_regions")
    if cached is None:
        cached = tuple(RegionPolytope(a, reduce_region(rtype, a), rtype.tol) for a in range(rtype.n_actions))
        object.__setattr__(rtype, "_regions", cached)
    return list(cached)


def best_reply_region(rtype: TypeLike, action: int) -> RegionPolytope:
    rtype = as_type(rtype)
    return all_regions(rtype)[_check_action(rtype, action)]


def enumerate_vertices(region: RegionPolytope) -> list[Belief]:
    return [v for v in region.vertices]


def region_dimension(region: RegionPolytope) -> int:
    return region.dim


def project_onto(system: HalfspaceSystem, point: ArrayLike, tol: Tolerances = DEFAULT_TOL) -> tuple[FloatArray, float]:
    """Nearest point of the polytope to ``point`` (Euclidean, full coordinates).

    Every face's affine hull is tried: the point is projected onto
    ``{sum(mu) = 1, g_S mu = h_S}`` for each active set ``S`` of at most
    ``N - 1`` rows, and the closest feasible projection wins.  The true nearest
    point is the projection onto the hull of the face that contains it, so the
    minimum is exact.
    """
    y = np.asarray(point, dtype=float)
    g, h = system.full_rows()
    norms = np.linalg.norm(g, axis=1)
    zero = norms <= tol.dup
    if np.any(h[zero] < -tol.mem):
        raise DomainError("cannot project onto an empty region")
    g, h = g[~zero] / norms[~zero, None], h[~zero] / norms[~zero]
    n_states = y.shape[0]
    ones = np.ones(n_states)

    def feasible(z: FloatArray) -> np.ndarray:
        return np.all(z @ g.T <= h + tol.mem, axis=-1)

    base = y - (y.sum() - 1.0) / n_states
    if feasible(base[None, :])[0]:
        return base, float(np.linalg.norm(base - y))
    best, best_d = None, np.inf
    for size in range(1, n_states):
        idx = _subsets(g.shape[0], size)
        if len(idx) == 0:
            break
        e = np.concatenate([np.broadcast_to(ones, (len(idx), 1, n_states)), g[idx]], axis=1)
        rhs = np.concatenate([np.ones((len(idx), 1)), h[idx]], axis=1)
        gram = e @ np.swapaxes(e, 1, 2)
        ok = np.abs(np.linalg.det(gram)) > _DET_FLOOR
        if not np.any(ok):
            continue
        e, rhs, gram = e[ok], rhs[ok], gram[ok]
        resid = e @ y - rhs
        lam = np.linalg.solve(gram, resid[..., None])[..., 0]
        z = y - np.einsum("kij,ki->kj", e, lam)
        good = feasible(z)
        if np.any(good):
            d = np.linalg.norm(z[good] - y, axis=1)
            k = int(np.argmin(d))
            if d[k] < best_d:
                best_d, best = float(d[k]), z[good][k]
    if best is None:
        raise DomainError("cannot project onto an empty region")
    best = np.where(np.abs(best) < 1e-15, 0.0, best)
    return best, best_d


def distance_to_region(region: RegionPolytope, point: ArrayLike) -> float:
    if region.is_empty:
        raise DomainError(f"region of action {region.owner_action} is empty")
    return project_onto(region.system, point, region.tol)[1]


def directed_max_min_distance(p: RegionPolytope, q: RegionPolytope) -> float:
    """``max_{x in P} min_{y in Q} |x - y|``; the maximum is attained at a vertex of P."""
    if p.is_empty or q.is_empty:
        raise DomainError("directed distance needs two nonempty regions")
    return max(distance_to_region(q, x) for x in p.vertices)


def max_ball_radius(prior: ArrayLike) -> float:
    """Radius of the largest ball around ``prior`` that stays inside the simplex."""
    mu = np.asarray(prior, dtype=float)
    if mu.ndim != 1 or mu.shape[0] < 2:
        raise InvalidInputError("prior must be a vector over at least two states")
    if np.any(mu <= 0.0):
        raise DomainError("prior needs full support for a positive radius")
    n = mu.shape[0]
    return float(np.sqrt(n) / np.sqrt(n - 1) * mu.min())


def containing_fulldim_region(rtype: TypeLike, action: int) -> int:
    """Lowest-index action whose full-dimensional region contains ``action``'s region."""
    rtype = as_type(rtype)
    region = best_reply_region(rtype, action)
    full = rtype.n_states - 1
    if region.is_empty or region.dim >= full:
        raise DomainError(f"region of action {action} must be nonempty and lower dimensional "
                          f"(dimension is {region.dim})")
    for b in range(rtype.n_actions):
        if b == action:
            continue
        other = best_reply_region(rtype, b)
        if other.dim == full and all(other.contains(v) for v in region.vertices):
            return b
    raise InternalConsistencyError(f"no full-dimensional region contains the region of action {action}")


def region_debug_text(region: RegionPolytope, action_labels: Sequence[str] | None = None,
                      precision: int = 6) -> str:
    label = (action_labels[region.owner_action] if action_labels is not None
             else f"a{region.owner_action}")
    lines = [f"region of {label}: dim={region.dim}, vertices={len(region.vertices)}"]
    sysm = region.system
    lines.append("  halfspaces (reduced coordinates, normal . x <= offset):")
    for lab, a, b in zip(sysm.labels, sysm.normals, sysm.offsets):
        lines.append(f"    {lab}: {np.array2string(a, precision=precision)} <= {b:.{precision}g}")
    lines.append("    simplex: x >= 0, sum(x) <= 1")
    lines.append("  vertices (full coordinates):")
    for v in region.vertices:
        lines.append(f"    {np.array2string(v, precision=precision)}")
    return "\n".join(lines)
