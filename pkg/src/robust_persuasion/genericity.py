"""Monte Carlo check that random instances are continuous and robust."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .core import PersuasionInstance
from .errors import InvalidInputError
from .geometry import all_regions
from .robustness import Verdict, all_stability_flags, classify

PRIOR_FLOOR = 0.05


def check_lrs_property(instance: PersuasionInstance) -> bool:
    """Every action that is ever a best reply is the *unique* best reply somewhere.

    For each nonempty region the centroid of its vertices is tested for strict
    dominance over all rivals (margin larger than the tie tolerance).
    """
    rtype = instance.reference
    u = rtype.receiver_u
    for region in all_regions(rtype):
        if region.is_empty:
            continue
        payoff = u @ region.centroid()
        a = region.owner_action
        rivals = np.delete(payoff, a)
        if rivals.size and not np.all(payoff[a] > rivals + rtype.tol.tie):
            return False
    return True


@dataclass(frozen=True)
class TrialRecord:
    index: int
    stability: bool
    lrs: bool
    robust: bool
    failing_action: int | None


@dataclass(frozen=True)
class GenericityOutcome:
    n_states: int
    n_actions: int
    trials: int
    pass_stability: int
    pass_lrs: int
    pass_classifier: int
    seed: int
    records: tuple[TrialRecord, ...] = ()
    prior_floor: float = PRIOR_FLOOR

    @property
    def mismatches(self) -> list[int]:
        """Trials where the stability and unique-optimality checks disagree."""
        return [r.index for r in self.records if r.stability != r.lrs]

    @property
    def fraction_robust(self) -> float:
        return self.pass_classifier / self.trials

    def summary(self) -> str:
        return (f"N={self.n_states} M={self.n_actions} trials={self.trials} seed={self.seed} "
                f"stability={self.pass_stability} lrs={self.pass_lrs} robust={self.pass_classifier} "
                f"mismatches={len(self.mismatches)} prior_floor={self.prior_floor}")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trial", "stability", "lrs", "robust", "failing_action"])
        for r in self.records:
            w.writerow([r.index, int(r.stability), int(r.lrs), int(r.robust),
                        "" if r.failing_action is None else r.failing_action])
        return buf.getvalue()


def random_instance(n_states: int, n_actions: int, rng: np.random.Generator) -> PersuasionInstance:
    """Utilities i.i.d. uniform on [0, 1]; prior uniform, renormalised above a 0.05 floor."""
    u = rng.uniform(size=(n_actions, n_states))
    v = rng.uniform(size=(n_actions, n_states))
    x = rng.uniform(size=n_states)
    prior = PRIOR_FLOOR + (1.0 - PRIOR_FLOOR * n_states) * x / x.sum()
    return PersuasionInstance.from_arrays(prior / prior.sum(), u, v)


def run_trial(instance: PersuasionInstance, index: int = 0) -> TrialRecord:
    flags = all_stability_flags(instance)
    failing = next((f.action for f in flags if not f.stable), None)
    robust = classify(instance).verdict is Verdict.ROBUST
    return TrialRecord(index, failing is None, check_lrs_property(instance), robust, failing)


def genericity_trial(n_states: int, n_actions: int, trials: int, seed: int) -> GenericityOutcome:
    if n_states < 2 or n_actions < 1 or trials < 1:
        raise InvalidInputError("need N >= 2, M >= 1 and at least one trial")
    if PRIOR_FLOOR * n_states >= 1.0:
        raise InvalidInputError(f"prior floor {PRIOR_FLOOR} is infeasible for {n_states} states")
    children = np.random.SeedSequence(seed).spawn(trials)
    records = tuple(run_trial(random_instance(n_states, n_actions, np.random.default_rng(c)), i)
                    for i, c in enumerate(children))
    return GenericityOutcome(
        n_states, n_actions, trials,
        sum(r.stability for r in records),
        sum(r.lrs for r in records),
        sum(r.robust for r in records),
        seed, records,
    )
