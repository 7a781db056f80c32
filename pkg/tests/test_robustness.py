from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import random_instance
from robust_persuasion import (DomainError, InvalidInputError, NoAdjustmentError, PersuasionInstance, SignalPolicy,
                               UtilityBox, Verdict, action_stability_flags, adjust_to_type, belief_from_p,
                               build_adjustment, check_U1S, classify, evaluate_policy_over_types,
                               fragile_witness_type, loss_bound, max_ball_radius, policy_value,
                               pseudo_optimal_value, search_robust_policy, solve_optimal, validate_policy,
                               witness_type_set)
from robust_persuasion.fixtures import example1_box, example1_type, example2_box, example2_perturbed
from robust_persuasion.robustness import inf_corner_system, pseudo_regions


def duplicate_pair(g: float) -> PersuasionInstance:
    u = [[1, 0], [0, 1], [0, 1]]
    v = [[0, 0], [1, 1], [1 - g, 1 - g]]
    return PersuasionInstance.from_arrays([0.7, 0.3], u, v)


# -- adjustment -----------------------------------------------------------------


def test_loss_bound_formula():
    prior = np.array([0.7, 0.3])
    r = max_ball_radius(prior)
    assert loss_bound(0.01, prior) == pytest.approx(np.sqrt(2) * 0.01 + 0.01 / r)
    assert loss_bound(0.0, prior) == 0.0
    with pytest.raises(InvalidInputError):
        loss_bound(-1.0, prior)


def test_adjustment_without_drift_keeps_policy(ex1):
    pol = solve_optimal(ex1).policy
    res = build_adjustment(pol, pol.posteriors, ex1.prior)
    assert res.correction_weight == 0.0
    assert res.policy.support_size == pol.support_size


def test_adjustment_example1():
    pol = SignalPolicy.from_pairs([(0.4, belief_from_p(0)), (0.6, belief_from_p(0.5))])
    t = 0.9
    res, gamma = adjust_to_type(pol, example1_type(1.0), example1_type(t))
    p_new = 1 / (1 + t)
    assert gamma == pytest.approx(np.sqrt(2) * (p_new - 0.5))
    assert validate_policy(res.policy, [0.7, 0.3]) is None
    assert np.linalg.norm(res.correction_posterior - [0.7, 0.3]) == pytest.approx(max_ball_radius([0.7, 0.3]))
    loss = policy_value(example1_type(1.0), pol) - policy_value(example1_type(t), res.policy)
    assert loss <= loss_bound(gamma, [0.7, 0.3]) + 1e-9


def test_adjust_to_type_reports_empty_target(ex2):
    pol = solve_optimal(ex2).policy
    with pytest.raises(NoAdjustmentError):
        adjust_to_type(pol, ex2, example2_perturbed())


def test_adjustment_rejects_wrong_shape(ex1):
    pol = solve_optimal(ex1).policy
    with pytest.raises(InvalidInputError):
        build_adjustment(pol, [[0.5, 0.5]], ex1.prior)


@given(st.integers(0, 100_000), st.integers(2, 5), st.floats(0.0, 0.2))
@settings(max_examples=150, deadline=None)
def test_adjustment_properties(seed, n, size):
    rng = np.random.default_rng(seed)
    prior = rng.dirichlet(np.ones(n)) * 0.9 + 0.1 / n
    k = int(rng.integers(1, n + 1))
    posts = rng.dirichlet(np.ones(n), size=k)
    w = rng.dirichlet(np.ones(k))
    posts[-1] = (prior - w[:-1] @ posts[:-1]) / w[-1]
    if posts[-1].min() < 0:
        return
    pol = SignalPolicy(w, posts)
    moved = posts + size * (rng.dirichlet(np.ones(n), size=k) - posts)
    res = build_adjustment(pol, moved, prior)
    assert validate_policy(res.policy, prior) is None
    r = max_ball_radius(prior)
    if res.shift_norm > 1e-15:
        assert res.scale == pytest.approx(r / (r + res.shift_norm), rel=1e-12)
        assert res.correction_weight == pytest.approx(1 - res.scale, rel=1e-9)
        assert np.allclose(res.policy.weights[:-1], w * res.scale)
        assert np.linalg.norm(res.correction_posterior - prior) == pytest.approx(r, rel=1e-9)
    assert res.shift_norm <= res.gamma + 1e-12


# -- stability flags --------------------------------------------------------


def test_example2_flags(ex2):
    f = action_stability_flags(ex2, 1)
    assert f.nonempty and f.u1 and not f.u2 and f.dim == 0 and not f.stable
    assert action_stability_flags(ex2, 0).stable


def test_duplicate_flags():
    inst = duplicate_pair(0.5)
    f = action_stability_flags(inst, 1)
    assert f.duplicates == (1, 2) and not f.u1 and f.u2
    assert not check_U1S(inst, 1, [0.5, 0.5])
    assert check_U1S(duplicate_pair(0.0), 1, [0.5, 0.5])


# -- classifier -------------------------------------------------------------


def test_example1_is_robust(ex1):
    report = classify(ex1)
    assert report.verdict is Verdict.ROBUST
    assert report.fragile_posteriors == [] and report.witness_type is None
    assert report.basic_only
    assert policy_value(ex1, report.witness_policy) == pytest.approx(0.6)


def test_example2_is_fragile(ex2):
    report = classify(ex2)
    assert report.verdict is Verdict.FRAGILE
    assert len(report.fragile_posteriors) == 1
    mu, inferior = report.fragile_posteriors[0]
    assert mu[1] == pytest.approx(0.25)
    assert inferior == 0
    assert report.gap_constant == pytest.approx(1 / 6, abs=1e-9)
    assert report.pseudo_value == pytest.approx(1 / 15, abs=1e-9)
    assert report.optimal_value - solve_optimal(report.witness_type).value >= report.gap_constant - 1e-9


def test_pseudo_regions_example2(ex2):
    systems = pseudo_regions(ex2)
    assert systems[1] is None
    assert all(s is not None for k, s in enumerate(systems) if k != 1)


def test_duplicate_pair_gap():
    for g in (0.2, 0.5):
        inst = duplicate_pair(g)
        value, c = pseudo_optimal_value(inst)
        assert c == pytest.approx(0.6 * g, abs=1e-9)
        report = classify(inst)
        assert report.verdict is Verdict.FRAGILE
        assert report.gap_constant == pytest.approx(0.3 * g, abs=1e-9)


def test_sender_equivalent_duplicates_are_robust():
    assert classify(duplicate_pair(0.0)).verdict is Verdict.ROBUST


@pytest.mark.parametrize("delta", [0.2, 0.02, 0.002])
def test_example2_witness_in_box(ex2, delta):
    box = example2_box(delta)
    witness, gap = fragile_witness_type(ex2, box)
    assert gap >= 1 / 6 - 1e-9
    assert box.contains(witness)
    assert solve_optimal(ex2).value - solve_optimal(witness).value == pytest.approx(gap)


def test_witness_rejects_robust(ex1):
    with pytest.raises(DomainError):
        fragile_witness_type(ex1, example1_box(0.1))


@given(st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_fragile_witness_gap_on_random_ties(seed):
    # averaging two rows creates a lower-dimensional best-reply region
    rng = np.random.default_rng(seed)
    base = random_instance(rng, 2, 3)
    u = np.vstack([base.receiver_u, base.receiver_u[:2].mean(axis=0)])
    v = np.vstack([base.sender_v, [1.0, 1.0]])
    inst = PersuasionInstance.from_arrays(base.prior, u, v)
    report = classify(inst)
    if report.verdict is Verdict.FRAGILE:
        box = UtilityBox.uniform(inst, 0.01, clip=False)
        witness, gap = fragile_witness_type(inst, box)
        assert box.contains(witness)
        assert gap >= report.gap_constant - 1e-9


# -- evaluation and search --------------------------------------------------


def test_example2_regrets(ex2):
    baseline = solve_optimal(ex2).policy
    perturbed = example2_perturbed()
    ev = evaluate_policy_over_types(ex2, baseline, [perturbed])
    assert ev.regret == pytest.approx(1 / 15, abs=1e-9)
    alt = solve_optimal(perturbed).policy
    ev2 = evaluate_policy_over_types(ex2, alt, [ex2.reference])
    assert ev2.regret == pytest.approx(1 / 3, abs=1e-9)


def test_evaluation_needs_types(ex2):
    with pytest.raises(InvalidInputError):
        evaluate_policy_over_types(ex2, solve_optimal(ex2).policy, [])


def test_witness_type_set_is_seeded(ex2):
    box = example2_box(0.1)
    a = witness_type_set(ex2, box, samples=3, seed=7)
    b = witness_type_set(ex2, box, samples=3, seed=7)
    assert len(a) == 1 + 2 * 4 + 1 + 3
    assert all(np.array_equal(x.receiver_u, y.receiver_u) for x, y in zip(a, b))


def test_inf_corner_system_example1():
    box = example1_box(0.1)
    system = inf_corner_system(box, 1)
    # a1 at its lowest (t = 0.9) against a0 at its highest
    assert system.contains(belief_from_p(1 / 1.9))
    assert not system.contains(belief_from_p(1 / 1.9 - 1e-3))


def test_example1_search():
    box = example1_box(0.1)
    from robust_persuasion.fixtures import example1
    inst = example1()
    maxmin = search_robust_policy(inst, box, "maxmin")
    assert maxmin.score == pytest.approx(0.57, abs=1e-9)
    regret = search_robust_policy(inst, box, "minregret")
    assert regret.score == pytest.approx(0.06, abs=1e-9)
    assert validate_policy(regret.policy, inst.prior) is None


def test_search_rejects_unknown_criterion(ex1):
    with pytest.raises(InvalidInputError):
        search_robust_policy(ex1, example1_box(0.1), "bogus")


@pytest.mark.parametrize("delta", [0.2, 0.02, 0.002])
def test_example2_search_regret_floor(ex2, delta):
    res = search_robust_policy(ex2, example2_box(delta), "minregret")
    assert res.score >= 1 / 15 - 1e-9
