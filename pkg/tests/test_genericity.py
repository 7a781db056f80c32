from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_persuasion import InvalidInputError, PersuasionInstance, check_lrs_property, genericity_trial
from robust_persuasion.genericity import PRIOR_FLOOR, random_instance, run_trial


def test_lrs_on_examples(ex1, ex2):
    assert check_lrs_property(ex1)
    assert not check_lrs_property(ex2)


def test_lrs_fails_for_duplicates():
    inst = PersuasionInstance.from_arrays([0.5, 0.5], [[1, 0], [0, 1], [0, 1]], [[0, 0], [1, 1], [0, 0]])
    assert not check_lrs_property(inst)


def test_run_trial_records_failing_action(ex2):
    rec = run_trial(ex2, 4)
    assert rec.index == 4 and not rec.stability and not rec.lrs and not rec.robust
    assert rec.failing_action == 1


def test_trial_is_reproducible():
    a = genericity_trial(2, 4, 20, seed=11)
    b = genericity_trial(2, 4, 20, seed=11)
    assert a.records == b.records
    assert a.to_csv() == b.to_csv()
    assert a.to_csv().splitlines()[0] == "trial,stability,lrs,robust,failing_action"
    assert "mismatches=0" in a.summary()


def test_trial_validation():
    with pytest.raises(InvalidInputError):
        genericity_trial(1, 3, 10, 0)
    with pytest.raises(InvalidInputError):
        genericity_trial(2, 3, 0, 0)
    with pytest.raises(InvalidInputError):
        genericity_trial(20, 3, 1, 0)


@given(st.integers(0, 2**32 - 1), st.integers(2, 6), st.integers(1, 6))
@settings(max_examples=100, deadline=None)
def test_random_prior_respects_floor(seed, n, m):
    inst = random_instance(n, m, np.random.default_rng(seed))
    assert inst.prior.min() >= PRIOR_FLOOR - 1e-12
    assert inst.prior.sum() == pytest.approx(1.0)


@given(st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_stability_matches_lrs_on_random_instances(seed):
    rec = run_trial(random_instance(3, 4, np.random.default_rng(seed)))
    assert rec.stability == rec.lrs
    if rec.stability:
        assert rec.robust
