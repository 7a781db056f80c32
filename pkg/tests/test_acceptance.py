"""End-to-end acceptance checks, one test per criterion.

Each test records a one-line PASS/FAIL verdict (printed in the terminal
summary by ``conftest.py``) and then asserts it.
"""

from __future__ import annotations

import time

import numpy as np
import pytest

from oracles import grid_envelope_value, grid_hull_value, random_instance, scan_best_reply_sets
from robust_persuasion import (NoAdjustmentError, PersuasionInstance, SignalPolicy, Verdict, adjust_to_type,
                               best_reply_region, build_adjustment, classify, containing_fulldim_region,
                               evaluate_policy_over_types, fragile_witness_type, genericity_trial, loss_bound,
                               max_ball_radius, policy_value, pseudo_optimal_value, search_robust_policy,
                               solve_optimal, validate_policy)
from robust_persuasion import fixtures

RESULTS: dict[int, tuple[bool, str]] = {}


def record(number: int, ok: bool, detail: str) -> None:
    RESULTS[number] = (bool(ok), detail)
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, detail


def support(policy: SignalPolicy) -> list[float]:
    return sorted(round(float(p), 9) for p in policy.posteriors[:, 1])


def close(x: float, y: float, tol: float = 1e-9) -> bool:
    return abs(x - y) <= tol


# -- 1 ----------------------------------------------------------------------


def test_criterion_1_example1_optimum():
    start = time.perf_counter()
    sol = solve_optimal(fixtures.example1())
    elapsed = time.perf_counter() - start
    ok = close(sol.value, 0.6) and support(sol.policy) == [0.0, 0.5] and elapsed < 0.1
    record(1, ok, f"value={sol.value:.12g} support={support(sol.policy)} time={elapsed:.4f}s")


# -- 2 ----------------------------------------------------------------------


def test_criterion_2_example1_robustness():
    inst = fixtures.example1()
    verdict = classify(inst).verdict
    box = fixtures.example1_box(0.1)
    maxmin = search_robust_policy(inst, box, "maxmin").score
    regret = search_robust_policy(inst, box, "minregret").score
    ok = verdict is Verdict.ROBUST and close(maxmin, 0.3 * (2 - 0.1)) and close(regret, 0.06)
    record(2, ok, f"verdict={verdict.value} maxmin={maxmin:.12g} minregret={regret:.12g}")


# -- 3 ----------------------------------------------------------------------


def test_criterion_3_example2_optimum():
    sol = solve_optimal(fixtures.example2())
    ok = close(sol.value, 0.4) and support(sol.policy) == [0.0, 0.25]
    record(3, ok, f"value={sol.value:.12g} support={support(sol.policy)}")


# -- 4 ----------------------------------------------------------------------


def test_criterion_4_example2_fragility():
    inst = fixtures.example2()
    report = classify(inst)
    fragile_ps = [round(float(mu[1]), 9) for mu, _ in report.fragile_posteriors]
    pseudo, c = pseudo_optimal_value(inst)
    gaps = {d: fragile_witness_type(inst, fixtures.example2_box(d))[1] for d in (0.2, 0.02, 0.002)}
    ok = (report.verdict is Verdict.FRAGILE and fragile_ps == [0.25] and close(pseudo, 1 / 15)
          and close(c, 1 / 3) and all(g >= 1 / 6 - 1e-9 for g in gaps.values()))
    record(4, ok, f"verdict={report.verdict.value} fragile={fragile_ps} pseudo={pseudo:.12g} C={c:.12g} "
                  f"gaps={ {d: round(g, 9) for d, g in gaps.items()} }")


# -- 5 ----------------------------------------------------------------------


def test_criterion_5_example2_regrets():
    inst = fixtures.example2()
    baseline = solve_optimal(inst).policy
    theta_p = fixtures.example2_perturbed()
    r1 = evaluate_policy_over_types(inst, baseline, [theta_p]).regret
    r2 = evaluate_policy_over_types(inst, solve_optimal(theta_p).policy, [inst.reference]).regret
    scores = {d: search_robust_policy(inst, fixtures.example2_box(d), "minregret").score for d in (0.2, 0.02, 0.002)}
    ok = close(r1, 1 / 15) and close(r2, 1 / 3) and all(s >= 1 / 15 - 1e-9 for s in scores.values())
    record(5, ok, f"regret(baseline, theta')={r1:.12g} regret(perturbed, theta0)={r2:.12g} "
                  f"minregret={ {d: round(s, 9) for d, s in scores.items()} }")


# -- 6 ----------------------------------------------------------------------


def _random_policy(rng: np.random.Generator, prior: np.ndarray) -> SignalPolicy | None:
    n = prior.shape[0]
    k = int(rng.integers(1, n + 1))
    posts = rng.dirichlet(np.ones(n), size=k)
    w = rng.dirichlet(np.ones(k))
    if k == 1:
        return SignalPolicy(w, prior[None, :])
    posts[-1] = (prior - w[:-1] @ posts[:-1]) / w[-1]
    if posts[-1].min() < 0:
        return None
    return SignalPolicy(w, posts)


def test_criterion_6_adjustment():
    rng = np.random.default_rng(6)
    start = time.perf_counter()
    cases = ratio_failures = invalid = 0
    while cases < 500:
        n = int(rng.integers(2, 6))
        prior = rng.dirichlet(np.ones(n)) * 0.9 + 0.1 / n
        pol = _random_policy(rng, prior)
        if pol is None:
            continue
        size = float(rng.uniform(0, 0.3))
        moved = pol.posteriors + size * (rng.dirichlet(np.ones(n), size=pol.support_size) - pol.posteriors)
        res = build_adjustment(pol, moved, prior)
        cases += 1
        if validate_policy(res.policy, prior) is not None:
            invalid += 1
        r = max_ball_radius(prior)
        expected = r / (r + res.shift_norm) if res.shift_norm > 1e-15 else 1.0
        if res.shift_norm > 1e-15:
            ok_ratio = np.allclose(res.policy.weights[:-1] / pol.weights, expected, rtol=1e-12, atol=0)
        else:
            ok_ratio = np.allclose(res.policy.weights, pol.weights, rtol=1e-12, atol=0)
        ratio_failures += not ok_ratio

    pairs = loss_failures = skipped = 0
    worst = -np.inf
    while pairs < 100:
        n = int(rng.integers(2, 5))
        theta = random_instance(rng, n, int(rng.integers(2, 6)))
        delta = float(rng.uniform(1e-3, 0.05))
        target = theta.type_with(theta.receiver_u + delta * rng.uniform(-0.5, 0.5, size=theta.receiver_u.shape))
        pol = solve_optimal(theta).policy
        try:
            res, gamma = adjust_to_type(pol, theta, target)
        except NoAdjustmentError:
            skipped += 1
            continue
        pairs += 1
        loss = policy_value(theta, pol) - policy_value(target, res.policy)
        bound = loss_bound(gamma, theta.prior)
        worst = max(worst, loss - bound)
        loss_failures += loss > bound + 1e-9
    elapsed = time.perf_counter() - start
    ok = invalid == 0 and ratio_failures == 0 and loss_failures == 0 and elapsed < 10
    record(6, ok, f"cases=500 invalid={invalid} ratio_failures={ratio_failures} pairs=100 "
                  f"(skipped {skipped} without adjustment) loss_failures={loss_failures} "
                  f"max(loss-D)={worst:.3g} time={elapsed:.2f}s")


# -- 7 ----------------------------------------------------------------------


def test_criterion_7_oracle_equivalence():
    rng = np.random.default_rng(7)
    worst_value = 0.0
    region_failures = []
    pair_checks = 0
    for k in range(200):
        inst = random_instance(rng, 2, int(rng.integers(2, 7)))
        value = solve_optimal(inst).value
        oracle = grid_hull_value(inst)
        if k < 20:
            # the chord brute force on a coarser grid agrees with the hull oracle
            pair = grid_envelope_value(inst, step=1e-3)
            pair_checks += abs(pair - value) <= 2e-3
        worst_value = max(worst_value, abs(value - oracle))
        scans = scan_best_reply_sets(inst.receiver_u)
        for a, hits in enumerate(scans):
            region = best_reply_region(inst, a)
            ps = region.vertices[:, 1] if not region.is_empty else np.zeros(0)
            if region.dim == 1:
                good = len(hits) > 0 and abs(hits.min() - ps.min()) <= 1e-4 and abs(hits.max() - ps.max()) <= 1e-4
            elif region.dim == 0:
                good = len(hits) <= 1 and (len(hits) == 0 or abs(hits[0] - ps[0]) <= 1e-4)
            else:
                good = len(hits) == 0
            if not good:
                region_failures.append((k, a))
    ok = worst_value <= 1e-3 and not region_failures and pair_checks == 20
    record(7, ok, f"instances=200 max|value-grid|={worst_value:.3g} region_mismatches={len(region_failures)} "
                  f"pair_checks={pair_checks}/20")


# -- 8 ----------------------------------------------------------------------


def test_criterion_8_upper_semicontinuity():
    rng = np.random.default_rng(8)
    deltas = (0.1, 0.01, 0.001)
    violations = []
    worst_small, worst_k = 0.0, None
    for k in range(50):
        inst = random_instance(rng, 2 + k % 2, 4)
        base = solve_optimal(inst).value
        directions = rng.uniform(-0.5, 0.5, size=(100, *inst.receiver_u.shape))
        eps = []
        for d in deltas:
            gains = [solve_optimal(inst.type_with(inst.receiver_u + d * z)).value - base for z in directions]
            eps.append(max(0.0, max(gains)))
        if not (eps[0] >= eps[1] - 1e-9 and eps[1] >= eps[2] - 1e-9):
            violations.append((k, eps))
        if eps[2] > worst_small:
            worst_small, worst_k = eps[2], k
    ok = not violations and worst_small < 0.01
    record(8, ok, f"instances=50 monotonicity_violations={len(violations)} "
                  f"max eps(0.001)={worst_small:.3g} at instance {worst_k}")


# -- 9 ----------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_9_genericity():
    start = time.perf_counter()
    parts = []
    ok = True
    for n, m in ((2, 4), (3, 5), (4, 6)):
        out = genericity_trial(n, m, 1000, seed=2024)
        ok &= out.fraction_robust >= 0.99 and out.pass_stability / out.trials >= 0.99 and not out.mismatches
        parts.append(f"({n},{m}) robust={out.fraction_robust:.3f} mismatches={len(out.mismatches)}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 60
    record(9, ok, "; ".join(parts) + f" time={elapsed:.1f}s")


# -- 10 -----------------------------------------------------------------------


def _tie_instance(rng: np.random.Generator, n: int) -> PersuasionInstance:
    base = random_instance(rng, n, 3)
    i, j = rng.choice(3, size=2, replace=False)
    u = np.vstack([base.receiver_u, (base.receiver_u[i] + base.receiver_u[j]) / 2])
    v = np.vstack([base.sender_v, rng.uniform(size=n)])
    return PersuasionInstance.from_arrays(base.prior, u, v)


def test_criterion_10_low_dimensional_containment():
    rng = np.random.default_rng(10)
    tied_edge = PersuasionInstance.from_arrays(np.full(3, 1 / 3), [[1, 0, 0], [0, 1, 0], [0, 0, 1], [0.5, 0.5, 0]],
                                            np.zeros((4, 3)))
    suite = [fixtures.example1(), fixtures.example2(), tied_edge, fixtures.example2_perturbed()]
    suite += [_tie_instance(rng, 2 + k % 3) for k in range(150)]
    suite += [random_instance(rng, 2 + k % 3, 5) for k in range(150)]
    suite += [fixtures.example2().type_with(fixtures.example2().receiver_u + 0.01 * rng.uniform(-.5, .5, (4, 2)))
              for _ in range(20)]
    encountered = failures = 0
    for inst in suite:
        full = inst.n_states - 1
        for a in range(inst.n_actions):
            region = best_reply_region(inst, a)
            if region.is_empty or region.dim == full:
                continue
            encountered += 1
            try:
                b = containing_fulldim_region(inst, a)
                failures += not all(best_reply_region(inst, b).contains(v) for v in region.vertices)
            except Exception:  # noqa: BLE001 - any failure counts against the criterion
                failures += 1
    ok = encountered > 0 and failures == 0
    record(10, ok, f"instances={len(suite)} low-dimensional regions={encountered} failures={failures}")
