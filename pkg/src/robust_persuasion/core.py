"""Domain types and pointwise evaluation for finite persuasion instances.

Beliefs are plain 1-d numpy arrays over states.  For two-state instances the
helper :func:`belief_from_p` builds ``(1 - p, p)``, i.e. ``p`` is always the
probability of the *second* state.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import InvalidInputError

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]
Belief = FloatArray


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances used throughout the package.

    Attributes:
        sum: allowed deviation of a probability vector's total from 1
        bary: per-coordinate barycenter deviation accepted for a policy
        tie: two expected utilities within ``tie`` are treated as equal
        mem: slack allowed when testing membership in a region
        dedup: Euclidean radius under which two beliefs are the same point
        rank: pivot threshold for affine-rank (dimension) computations
        opt: a policy is optimal if its value is within ``opt`` of the best
        dup: entrywise threshold for calling two receiver rows duplicates
    """

    sum: float = 1e-9
    bary: float = 1e-9
    tie: float = 1e-9
    mem: float = 1e-8
    dedup: float = 1e-7
    rank: float = 1e-8
    opt: float = 1e-9
    dup: float = 1e-9

    def replace(self, **overrides: float) -> "Tolerances":
        unknown = set(overrides) - set(self.__dataclass_fields__)
        if unknown:
            raise InvalidInputError(f"unknown tolerance(s): {sorted(unknown)}")
        values = {k: getattr(self, k) for k in self.__dataclass_fields__}
        values.update({k: float(v) for k, v in overrides.items()})
        return Tolerances(**values)


DEFAULT_TOL = Tolerances()


def _frozen(a: ArrayLike, ndim: int, what: str) -> FloatArray:
    arr = np.array(a, dtype=float)
    if arr.ndim != ndim:
        raise InvalidInputError(f"{what} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{what} contains non-finite entries")
    arr.setflags(write=False)
    return arr


def make_belief(probs: ArrayLike, n_states: int | None = None, tol: Tolerances = DEFAULT_TOL) -> Belief:
    """Validate ``probs`` as a point of the simplex and return it read-only."""
    b = _frozen(probs, 1, "belief")
    if n_states is not None and b.shape[0] != n_states:
        raise InvalidInputError(f"belief has {b.shape[0]} entries, expected {n_states}")
    if np.any(b < -tol.sum):
        raise InvalidInputError(f"belief has negative entries: {b.tolist()}")
    if abs(b.sum() - 1.0) > tol.sum:
        raise InvalidInputError(f"belief sums to {b.sum()!r}, not 1")
    return b


def belief_from_p(p: float) -> Belief:
    """Two-state belief putting probability ``p`` on the second state."""
    return make_belief([1.0 - p, p])


@dataclass(frozen=True, eq=False)
class ReceiverType:
    """One receiver payoff type together with the shared prior and sender payoffs.

    ``receiver_u`` and ``sender_v`` are ``M x N`` (actions by states).  Unlike
    :class:`PersuasionInstance`, a type may leave ``[0, 1]`` when it comes from
    an unclipped box; see :attr:`within_unit_range`.
    """

    receiver_u: FloatArray
    sender_v: FloatArray
    prior: Belief
    tol: Tolerances = DEFAULT_TOL

    def __post_init__(self) -> None:
        u = _frozen(self.receiver_u, 2, "receiver_u")
        v = _frozen(self.sender_v, 2, "sender_v")
        prior = make_belief(self.prior, tol=self.tol)
        if u.shape != v.shape:
            raise InvalidInputError(f"receiver_u shape {u.shape} != sender_v shape {v.shape}")
        if u.shape[1] != prior.shape[0]:
            raise InvalidInputError(f"utilities have {u.shape[1]} state columns, prior has {prior.shape[0]}")
        object.__setattr__(self, "receiver_u", u)
        object.__setattr__(self, "sender_v", v)
        object.__setattr__(self, "prior", prior)

    @property
    def n_states(self) -> int:
        return self.receiver_u.shape[1]

    @property
    def n_actions(self) -> int:
        return self.receiver_u.shape[0]

    @property
    def within_unit_range(self) -> bool:
        return bool(np.all(self.receiver_u >= 0.0) and np.all(self.receiver_u <= 1.0))

    def with_receiver(self, receiver_u: ArrayLike) -> "ReceiverType":
        return ReceiverType(np.asarray(receiver_u, dtype=float), self.sender_v, self.prior, self.tol)

    def same_payoffs(self, other: "ReceiverType") -> bool:
        return bool(np.array_equal(self.receiver_u, other.receiver_u))


@dataclass(frozen=True, eq=False)
class PersuasionInstance:
    """A finite persuasion instance: prior, receiver and sender payoffs."""

    state_labels: tuple[str, ...]
    action_labels: tuple[str, ...]
    prior: Belief
    receiver_u: FloatArray
    sender_v: FloatArray
    tol: Tolerances = DEFAULT_TOL

    def __post_init__(self) -> None:
        object.__setattr__(self, "state_labels", tuple(str(s) for s in self.state_labels))
        object.__setattr__(self, "action_labels", tuple(str(a) for a in self.action_labels))
        n, m = len(self.state_labels), len(self.action_labels)
        if n < 2:
            raise InvalidInputError("an instance needs at least two states")
        if m < 1:
            raise InvalidInputError("an instance needs at least one action")
        if len(set(self.state_labels)) != n or len(set(self.action_labels)) != m:
            raise InvalidInputError("state and action labels must be unique")
        prior = make_belief(self.prior, n, self.tol)
        if np.any(prior <= 0.0):
            raise InvalidInputError(f"prior must have full support, got {prior.tolist()}")
        u = _frozen(self.receiver_u, 2, "receiver_u")
        v = _frozen(self.sender_v, 2, "sender_v")
        for name, arr in (("receiver_u", u), ("sender_v", v)):
            if arr.shape != (m, n):
                raise InvalidInputError(f"{name} must be {m}x{n} (actions x states), got {arr.shape}")
            if np.any(arr < 0.0) or np.any(arr > 1.0):
                raise InvalidInputError(f"{name} entries must lie in [0, 1]")
        object.__setattr__(self, "prior", prior)
        object.__setattr__(self, "receiver_u", u)
        object.__setattr__(self, "sender_v", v)
        object.__setattr__(self, "_reference", ReceiverType(u, v, prior, self.tol))

    @property
    def n_states(self) -> int:
        return len(self.state_labels)

    @property
    def n_actions(self) -> int:
        return len(self.action_labels)

    @property
    def reference(self) -> ReceiverType:
        """The reference (baseline) receiver type."""
        return self._reference  # type: ignore[attr-defined]

    def type_with(self, receiver_u: ArrayLike) -> ReceiverType:
        return self.reference.with_receiver(receiver_u)

    def with_tolerances(self, tol: Tolerances) -> "PersuasionInstance":
        return PersuasionInstance(self.state_labels, self.action_labels, self.prior,
                                  self.receiver_u, self.sender_v, tol)

    def with_prior(self, prior: ArrayLike) -> "PersuasionInstance":
        return PersuasionInstance(self.state_labels, self.action_labels, np.asarray(prior, float),
                                  self.receiver_u, self.sender_v, self.tol)

    @classmethod
    def from_arrays(cls, prior: ArrayLike, receiver_u: ArrayLike, sender_v: ArrayLike,
                    tol: Tolerances = DEFAULT_TOL) -> "PersuasionInstance":
        u = np.asarray(receiver_u, dtype=float)
        if u.ndim != 2:
            raise InvalidInputError("receiver_u must be a matrix")
        m, n = u.shape
        return cls(tuple(f"w{j}" for j in range(n)), tuple(f"a{i}" for i in range(m)),
                   np.asarray(prior, float), u, np.asarray(sender_v, float), tol)


TypeLike = ReceiverType | PersuasionInstance


def as_type(obj: TypeLike) -> ReceiverType:
    if isinstance(obj, PersuasionInstance):
        return obj.reference
    if isinstance(obj, ReceiverType):
        return obj
    raise InvalidInputError(f"expected a ReceiverType or PersuasionInstance, got {type(obj).__name__}")


@dataclass(frozen=True, eq=False)
class UtilityBox:
    """Per-entry intervals ``[lo, hi]`` of receiver utilities around a reference.

    Every combination of entries inside the box is treated as a type.
    ``clipped`` records whether any bound was pulled back into ``[0, 1]``.
    """

    reference: PersuasionInstance
    lo: FloatArray
    hi: FloatArray
    clipped: bool = False

    def __post_init__(self) -> None:
        lo = _frozen(self.lo, 2, "box lo")
        hi = _frozen(self.hi, 2, "box hi")
        shape = self.reference.receiver_u.shape
        if lo.shape != shape or hi.shape != shape:
            raise InvalidInputError(f"box bounds must have shape {shape}")
        if np.any(lo > hi):
            raise InvalidInputError("box has lo > hi in some entry")
        u = self.reference.receiver_u
        if np.any(lo > u) or np.any(hi < u):
            raise InvalidInputError("box does not contain the reference utilities")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def from_bounds(cls, reference: PersuasionInstance, lo: ArrayLike, hi: ArrayLike,
                    clip: bool = True) -> "UtilityBox":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        clipped = False
        if clip:
            clo, chi = np.clip(lo, 0.0, 1.0), np.clip(hi, 0.0, 1.0)
            clipped = bool(np.any(clo != lo) or np.any(chi != hi))
            if clipped:
                logger.info("utility box clipped to [0, 1] in %d entries",
                            int(np.sum(clo != lo) + np.sum(chi != hi)))
            lo, hi = clo, chi
        return cls(reference, lo, hi, clipped)

    @classmethod
    def uniform(cls, reference: PersuasionInstance, delta: float, clip: bool = True) -> "UtilityBox":
        """Every interval has length ``delta`` and is centred on the reference."""
        if delta < 0:
            raise InvalidInputError("delta must be nonnegative")
        u = reference.receiver_u
        return cls.from_bounds(reference, u - delta / 2, u + delta / 2, clip)

    @classmethod
    def symmetric(cls, reference: PersuasionInstance, half_width: float, clip: bool = True) -> "UtilityBox":
        """Intervals ``[u - half_width, u + half_width]`` (length ``2 * half_width``)."""
        if half_width < 0:
            raise InvalidInputError("half_width must be nonnegative")
        u = reference.receiver_u
        return cls.from_bounds(reference, u - half_width, u + half_width, clip)

    @property
    def widths(self) -> FloatArray:
        return self.hi - self.lo

    def contains(self, rtype: ReceiverType, slack: float = 0.0) -> bool:
        u = rtype.receiver_u
        return bool(np.all(u >= self.lo - slack) and np.all(u <= self.hi + slack))

    def is_interior(self) -> bool:
        """True when the reference lies strictly inside every interval."""
        u = self.reference.receiver_u
        return bool(np.all(self.lo < u) and np.all(u < self.hi))

    def margin_below(self) -> FloatArray:
        return self.reference.receiver_u - self.lo

    def margin_above(self) -> FloatArray:
        return self.hi - self.reference.receiver_u

    def sample(self, rng: np.random.Generator, count: int) -> list[ReceiverType]:
        base = self.reference.reference
        draws = rng.uniform(size=(count,) + self.lo.shape)
        return [base.with_receiver(self.lo + d * self.widths) for d in draws]

    def scaled(self, factor: float) -> "UtilityBox":
        """Shrink (or grow) the box around the reference by ``factor``."""
        u = self.reference.receiver_u
        return UtilityBox(self.reference, u - factor * (u - self.lo), u + factor * (self.hi - u), self.clipped)


@dataclass(frozen=True, eq=False)
class SignalPolicy:
    """A finite distribution over posteriors (``weights[i]`` on ``posteriors[i]``).

    Construction only checks shapes; use :func:`validate_policy` to test
    Bayes plausibility against a prior.
    """

    weights: FloatArray
    posteriors: FloatArray

    def __post_init__(self) -> None:
        w = _frozen(self.weights, 1, "weights")
        p = _frozen(self.posteriors, 2, "posteriors")
        if w.shape[0] != p.shape[0]:
            raise InvalidInputError(f"{w.shape[0]} weights for {p.shape[0]} posteriors")
        if w.shape[0] == 0:
            raise InvalidInputError("a policy needs at least one posterior")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "posteriors", p)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, ArrayLike]]) -> "SignalPolicy":
        pairs = list(pairs)
        if not pairs:
            raise InvalidInputError("a policy needs at least one posterior")
        return cls(np.array([w for w, _ in pairs], float), np.array([np.asarray(b, float) for _, b in pairs]))

    @classmethod
    def no_information(cls, prior: ArrayLike) -> "SignalPolicy":
        prior = np.asarray(prior, float)
        return cls(np.ones(1), prior[None, :])

    @property
    def support_size(self) -> int:
        return int(self.weights.shape[0])

    @property
    def n_states(self) -> int:
        return int(self.posteriors.shape[1])

    @property
    def barycenter(self) -> FloatArray:
        return self.weights @ self.posteriors

    def pairs(self) -> list[tuple[float, Belief]]:
        return [(float(w), p) for w, p in zip(self.weights, self.posteriors)]

    def merged(self, radius: float = DEFAULT_TOL.dedup, min_weight: float = 0.0) -> "SignalPolicy":
        """Merge posteriors closer than ``radius`` and drop weights ``<= min_weight``."""
        weights: list[float] = []
        points: list[FloatArray] = []
        for w, p in zip(self.weights, self.posteriors):
            for k, q in enumerate(points):
                if np.linalg.norm(p - q) <= radius:
                    weights[k] += float(w)
                    break
            else:
                weights.append(float(w))
                points.append(p)
        keep = [k for k, w in enumerate(weights) if w > min_weight]
        if not keep:
            raise InvalidInputError("every support point has zero weight")
        return SignalPolicy(np.array([weights[k] for k in keep]), np.array([points[k] for k in keep]))

    def mix(self, other: "SignalPolicy", t: float) -> "SignalPolicy":
        """The policy that runs ``self`` with probability ``t`` and ``other`` otherwise."""
        return SignalPolicy(np.concatenate([t * self.weights, (1 - t) * other.weights]),
                            np.vstack([self.posteriors, other.posteriors]))


@dataclass(frozen=True)
class PolicyViolation:
    constraint: Literal["shape", "posterior", "weight_positive", "weight_sum", "barycenter"]
    residual: float
    index: int | None = None

    def __str__(self) -> str:
        at = "" if self.index is None else f" at support {self.index}"
        return f"{self.constraint} violated{at} (residual {self.residual:.3g})"


# -- pointwise evaluation -------------------------------------------------


def _check_belief(rtype: ReceiverType, belief: ArrayLike) -> Belief:
    return make_belief(belief, rtype.n_states, rtype.tol)


def _check_action(rtype: ReceiverType, action: int) -> int:
    if not (0 <= int(action) < rtype.n_actions):
        raise InvalidInputError(f"action index {action} out of range for {rtype.n_actions} actions")
    return int(action)


def expected_receiver_utility(rtype: TypeLike, action: int, belief: ArrayLike) -> float:
    rtype = as_type(rtype)
    action = _check_action(rtype, action)
    return float(rtype.receiver_u[action] @ _check_belief(rtype, belief))


def best_replies(rtype: TypeLike, belief: ArrayLike, tol: float | None = None) -> tuple[int, ...]:
    """All actions within ``tol`` (default: the type's tie tolerance) of the best."""
    rtype = as_type(rtype)
    if tol is None:
        tol = rtype.tol.tie
    if tol < 0:
        raise InvalidInputError("tol must be nonnegative")
    payoffs = rtype.receiver_u @ _check_belief(rtype, belief)
    return tuple(int(a) for a in np.flatnonzero(payoffs >= payoffs.max() - tol))


def indirect_sender_value(rtype: TypeLike, belief: ArrayLike) -> tuple[float, int]:
    """Sender's value at ``belief`` when the receiver breaks ties in her favour.

    Among sender-equivalent best replies the lowest action index is reported.
    """
    rtype = as_type(rtype)
    b = _check_belief(rtype, belief)
    value, action = _indirect(rtype.receiver_u, rtype.sender_v, b[None, :], rtype.tol.tie)
    return float(value[0]), int(action[0])


def _indirect(u: FloatArray, v: FloatArray, beliefs: FloatArray, tie: float) -> tuple[FloatArray, NDArray[np.int64]]:
    """Vectorised indirect value for a ``K x N`` stack of beliefs."""
    ru = beliefs @ u.T
    sv = beliefs @ v.T
    best = ru >= ru.max(axis=1, keepdims=True) - tie
    masked = np.where(best, sv, -np.inf)
    top = masked.max(axis=1)
    # lowest index among sender-equivalent replies
    choice = np.argmax(masked >= top[:, None] - tie, axis=1)
    return top, choice


def indirect_values(rtype: TypeLike, beliefs: ArrayLike) -> tuple[FloatArray, NDArray[np.int64]]:
    rtype = as_type(rtype)
    b = np.atleast_2d(np.asarray(beliefs, float))
    return _indirect(rtype.receiver_u, rtype.sender_v, b, rtype.tol.tie)


def validate_policy(policy: SignalPolicy, prior: ArrayLike, tol: Tolerances = DEFAULT_TOL) -> PolicyViolation | None:
    """Return the first violated constraint, or ``None`` if the policy is valid."""
    prior = np.asarray(prior, float)
    if policy.n_states != prior.shape[0]:
        return PolicyViolation("shape", float(abs(policy.n_states - prior.shape[0])))
    for i, p in enumerate(policy.posteriors):
        neg = float(-p.min())
        if neg > tol.sum:
            return PolicyViolation("posterior", neg, i)
        off = abs(float(p.sum()) - 1.0)
        if off > tol.sum:
            return PolicyViolation("posterior", off, i)
    for i, w in enumerate(policy.weights):
        if not w > 0.0:
            return PolicyViolation("weight_positive", float(-w), i)
    off = abs(float(policy.weights.sum()) - 1.0)
    if off > tol.sum:
        return PolicyViolation("weight_sum", off)
    dev = np.abs(policy.barycenter - prior)
    if dev.max() >= tol.bary:
        return PolicyViolation("barycenter", float(dev.max()), int(np.argmax(dev)))
    return None


def policy_value(rtype: TypeLike, policy: SignalPolicy) -> float:
    rtype = as_type(rtype)
    bad = validate_policy(policy, rtype.prior, rtype.tol)
    if bad is not None:
        raise InvalidInputError(f"invalid signal policy: {bad}")
    values, _ = _indirect(rtype.receiver_u, rtype.sender_v, policy.posteriors, rtype.tol.tie)
    return float(policy.weights @ values)


def corner_type(box: UtilityBox, action: int, mode: Literal["inf", "sup"]) -> ReceiverType:
    """Extreme type of the box for ``action``.

    ``inf`` puts ``action`` at its lower bounds and every rival at its upper
    bounds, so its best-reply region is the smallest over the box; ``sup`` is
    the mirror image.
    """
    base = box.reference.reference
    action = _check_action(base, action)
    if mode == "inf":
        u = box.hi.copy()
        u[action] = box.lo[action]
    elif mode == "sup":
        u = box.lo.copy()
        u[action] = box.hi[action]
    else:
        raise InvalidInputError(f"mode must be 'inf' or 'sup', got {mode!r}")
    return base.with_receiver(u)


def group_inf_type(box: UtilityBox, group: Sequence[int]) -> FloatArray:
    """Lower bound row shared by a group of receiver-duplicate actions.

    Returns the entrywise minimum of the group's lower bounds; a posterior at
    which this row beats every outside rival at its upper bound induces some
    member of the group for every type in the box.
    """
    return box.lo[list(group)].min(axis=0)
