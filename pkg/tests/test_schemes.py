import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irsshare.channel import CascadedChannel, los_cascade, slot_snrs
from irsshare.harness import draw_drop, gaussian_channels, unit_budget
from irsshare.optimizer import OptimizerOptions, conjugate_match
from irsshare.rng import stream
from irsshare.scenario import Scenario, derive_link_budget, element_positions
from irsshare.schemes import (
    SCHEME_IDS,
    PartitionError,
    codebook_points,
    partition_surface,
    plan_digest,
    run_no_sharing,
    run_random,
    run_scheme,
    run_sharing,
    run_standalone_switching,
    run_time_division,
    subsurface_side,
)

OPTS = OptimizerOptions(restarts=2)


def single_user(seed, l_side=20):
    sc = Scenario(n_mnos=1, n_slots=1, l_side=l_side)
    b = derive_link_budget(sc)
    return sc, b, draw_drop(sc, b, seed, 0)[1]


def test_scheme_vocabulary():
    assert SCHEME_IDS == ("sharing", "time-division", "no-sharing", "random", "standalone-switching")
    with pytest.raises(ValueError, match="unknown scheme"):
        run_scheme("round-robin", [], Scenario(), None)


@pytest.mark.parametrize("scheme_id", SCHEME_IDS)
def test_result_invariants_and_purity(scheme_id, scenario, budget, drop):
    _, channels = drop
    before = [ch.coeffs.copy() for ch in channels]
    res = run_scheme(scheme_id, channels, scenario, budget, OPTS, stream(0, 0, scheme_id))
    assert res.scheme_id == scheme_id
    assert res.min_rate == min(res.per_user_rates)
    assert np.all(np.isfinite(res.per_user_rates)) and np.all(res.per_user_rates >= 0)
    assert res.plan_digest == plan_digest(res.plan)
    assert np.max(np.abs(np.abs(res.plan) - 1)) <= 1e-12
    for ch, c in zip(channels, before):
        np.testing.assert_array_equal(ch.coeffs, c)


@pytest.mark.parametrize("seed", range(5))
def test_single_operator_schemes_coincide(seed):
    sc, b, channels = single_user(seed)
    share = run_sharing(channels, sc, b, OPTS, stream(seed, 0, "s")).min_rate
    td = run_time_division(channels, sc, b).min_rate
    ns = run_no_sharing(channels, sc, b, None, stream(seed, 0, "n")).min_rate
    assert share == pytest.approx(td, rel=1e-6)
    assert ns == pytest.approx(td, rel=1e-6)


def test_sharing_requires_one_slot_per_operator(budget, drop):
    _, channels = drop
    with pytest.raises(ValueError, match="must equal"):
        run_sharing(channels, Scenario(n_slots=3), budget, OPTS)


def test_sharing_permutation(scenario, budget, drop):
    _, channels = drop
    perm = [3, 0, 4, 1, 2]
    a = run_sharing(channels, scenario, budget, OPTS, stream(0, 0, "s"))
    b = run_sharing([channels[i] for i in perm], scenario, budget, OPTS, stream(0, 0, "s"))
    # the optimizer is not permutation invariant, but its value should agree closely
    assert b.min_rate == pytest.approx(a.min_rate, rel=2e-2)
    # exact equivariance of the evaluation for a fixed plan
    td = run_time_division(channels, scenario, budget)
    from irsshare.optimizer import MaxMinProblem
    rates = MaxMinProblem([channels[i] for i in perm], 5, None, budget).rates(td.plan)
    np.testing.assert_allclose(rates, td.per_user_rates[perm], rtol=1e-14)


def test_zero_channels_give_zero_rates(scenario, budget):
    zeros = [CascadedChannel(np.zeros(scenario.n_elements), n) for n in range(5)]
    for scheme_id in SCHEME_IDS:
        res = run_scheme(scheme_id, zeros, scenario, budget, OPTS, stream(0, 0, scheme_id))
        assert np.all(res.per_user_rates == 0)


@pytest.mark.parametrize("seed", range(5))
def test_sharing_never_below_random_with_shared_start(seed, scenario, budget):
    _, channels = draw_drop(scenario, budget, seed, 0)
    rnd = run_random(channels, scenario, budget, stream(seed, 0, "r"))
    share = run_sharing(channels, scenario, budget, OPTS, stream(seed, 0, "s"), init_plan=rnd.plan)
    assert share.min_rate >= rnd.min_rate


def test_time_division_own_slot_is_closed_form(scenario, budget, drop):
    _, channels = drop
    res = run_time_division(channels, scenario, budget)
    for k, ch in enumerate(channels):
        own = slot_snrs(ch, res.plan, budget)[k]
        assert own == pytest.approx(budget.snr_scale * np.abs(ch.coeffs).sum() ** 2, rel=1e-12)


def test_time_division_own_slot_share_scales_with_one_over_n(budget):
    channels = gaussian_channels(np.random.default_rng(4), 6, 16)
    b = unit_budget(5.0)
    c0 = channels[0]
    full = math.log2(1 + 5.0 * np.abs(c0.coeffs).sum() ** 2)
    for n in (2, 3, 6):
        sc = Scenario(n_mnos=n, n_slots=n, l_side=4)
        res = run_time_division(channels[:n], sc, b)
        own = math.log2(1 + slot_snrs(c0, res.plan, b)[0]) / n
        assert own == pytest.approx(full / n, rel=1e-12)


def test_subsurface_side_rules():
    assert subsurface_side(20, 4) == 10
    assert subsurface_side(20, 5) == 8
    assert subsurface_side(25, 5) == 11
    assert subsurface_side(20, 1) == 20
    assert subsurface_side(20, 5, "literal") == 2


def test_partition_four_operators_twenty_side():
    blocks = partition_surface(20, 4)
    assert [len(b) for b in blocks] == [100] * 4
    assert len(np.unique(np.concatenate(blocks))) == 400
    grid = np.arange(400).reshape(20, 20)
    np.testing.assert_array_equal(np.sort(blocks[3]), np.sort(grid[10:, 10:].ravel()))


@pytest.mark.parametrize("l_side,n", [(20, 2), (20, 3), (20, 5), (10, 5), (25, 5), (20, 1)])
def test_partition_disjoint_and_equal(l_side, n):
    blocks = partition_surface(l_side, n)
    s = subsurface_side(l_side, n)
    assert all(len(b) == s * s for b in blocks)
    flat = np.concatenate(blocks)
    assert len(np.unique(flat)) == len(flat)
    assert flat.max() < l_side * l_side


def test_partition_errors():
    with pytest.raises(PartitionError):
        partition_surface(2, 5)
    with pytest.raises(PartitionError):
        partition_surface(4, 5, "literal")


def test_no_sharing_static_plan(scenario, budget, drop):
    _, channels = drop
    res = run_no_sharing(channels, scenario, budget, None, stream(0, 0, "n"))
    assert res.plan.shape == (1, 400)
    for ch, idx in zip(channels, partition_surface(20, 5)):
        np.testing.assert_allclose(res.plan[0, idx], conjugate_match(ch.coeffs[idx]))


def test_no_sharing_beats_block_coherent_term_on_average():
    """E|A + B|^2 = A^2 + E|B|^2 when other blocks look random to the user."""
    sc = Scenario(n_mnos=4, n_slots=4, l_side=6)
    b = unit_budget(1.0)
    rng = np.random.default_rng(21)
    mine = gaussian_channels(rng, 1, 36)[0]
    idx = partition_surface(6, 4)[0]
    coherent = np.abs(mine.coeffs[idx]).sum() ** 2
    excess = []
    for i in range(2000):
        others = gaussian_channels(np.random.default_rng(10_000 + i), 3, 36)
        res = run_no_sharing([mine, *others], sc, b, None, np.random.default_rng(i))
        excess.append(slot_snrs(mine, res.plan, b)[0] - coherent)
    excess = np.array(excess)
    assert excess.mean() >= -3 * excess.std(ddof=1) / np.sqrt(len(excess))
    assert excess.mean() > 0


def test_random_plan_properties(scenario, budget, drop):
    _, channels = drop
    a = run_random(channels, scenario, budget, stream(1, 2, "r"))
    b = run_random(channels, scenario, budget, stream(1, 2, "r"))
    assert a.plan.shape == (5, 400)
    np.testing.assert_array_equal(a.plan, b.plan)
    assert np.max(np.abs(np.abs(a.plan) - 1)) <= 1e-12


def test_random_mean_snr_is_incoherent_sum():
    c = gaussian_channels(np.random.default_rng(5), 1, 16)[0]
    sc = Scenario(n_mnos=1, n_slots=1, l_side=4)
    b = unit_budget(1.0)
    snrs = np.array([
        slot_snrs(c, run_random([c], sc, b, np.random.default_rng(i)).plan, b)[0]
        for i in range(10_000)
    ])
    expected = np.sum(np.abs(c.coeffs) ** 2)
    assert abs(snrs.mean() - expected) < 3 * snrs.std(ddof=1) / np.sqrt(len(snrs))


def test_codebook_points_cover_area():
    pts = codebook_points(Scenario(n_slots=5))
    assert pts.shape == (5, 3)
    assert np.all((-5.5 < pts[:, 0]) & (pts[:, 0] < -0.5))
    assert np.all((7.5 < pts[:, 1]) & (pts[:, 1] < 12.5))
    assert np.all(pts[:, 2] == 3.0)
    assert len({tuple(p) for p in pts}) == 5


def test_standalone_single_pattern(budget, drop):
    _, channels = drop
    sc = Scenario(n_slots=1)
    res = run_standalone_switching(channels, sc, budget)
    assert res.plan.shape == (1, 400)
    assert res.activity == ((0,),) * 5


def test_standalone_user_at_beacon_gets_closed_form(scenario, budget):
    sc = scenario.replace(n_slots=4, n_mnos=1)
    points = codebook_points(sc)
    ue = los_cascade(budget, element_positions(sc), sc.bs_pos_m, points[2])
    res = run_standalone_switching([ue], sc, budget)
    closed = budget.snr_scale * np.abs(ue.coeffs).sum() ** 2
    assert slot_snrs(ue, res.plan, budget).max() == pytest.approx(closed, rel=1e-9)


def test_standalone_activity_threshold(scenario, budget, drop):
    _, channels = drop
    res = run_standalone_switching(channels, scenario, budget)
    for ch, active in zip(channels, res.activity):
        rates = np.log2(1 + slot_snrs(ch, res.plan, budget))
        assert int(np.argmax(rates)) in active
        assert set(active) == {k for k in range(5) if rates[k] >= 0.5 * rates.max()}


def test_standalone_determinism(scenario, budget, drop):
    _, channels = drop
    a = run_standalone_switching(channels, scenario, budget, codebook_seed=3)
    b = run_standalone_switching(channels, scenario, budget, codebook_seed=3)
    assert a.plan_digest == b.plan_digest
    np.testing.assert_array_equal(a.per_user_rates, b.per_user_rates)


@given(st.integers(1, 30).flatmap(lambda l: st.tuples(st.just(l), st.integers(1, l * l))))
@settings(max_examples=150, deadline=None)
def test_partition_property(args):
    l_side, n = args
    blocks = partition_surface(l_side, n)
    s = subsurface_side(l_side, n)
    assert s * s * n <= l_side * l_side
    flat = np.concatenate(blocks)
    assert len(np.unique(flat)) == len(flat) == n * s * s
    assert flat.min() >= 0 and flat.max() < l_side * l_side
