"""The five IRS sharing policies.

Each ``run_*`` function maps one drop's channels to a phase plan plus
per-user slot activity and evaluates the resulting rates. None of them
modify the channels they are given.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import los_cascade
from .optimizer import (
    MaxMinProblem,
    conjugate_match,
    optimize_maxmin,
    random_plan,
)
from .scenario import LinkBudget, Scenario, element_positions

SCHEME_IDS = ("sharing", "time-division", "no-sharing", "random", "standalone-switching")


class PartitionError(ValueError):
    """The surface cannot be split among the operators."""


@dataclass(frozen=True)
class SchemeResult:
    scheme_id: str
    per_user_rates: np.ndarray
    min_rate: float
    plan_digest: str
    plan: np.ndarray = field(repr=False)
    activity: tuple[tuple[int, ...], ...] = field(repr=False)


def plan_digest(plan: np.ndarray) -> str:
    data = np.ascontiguousarray(plan, dtype="<c16").tobytes()
    return hashlib.sha256(data).hexdigest()[:16]


def _result(scheme_id, channels, plan, activity, budget) -> SchemeResult:
    plan = np.atleast_2d(plan)
    if activity is None:
        activity = [range(plan.shape[0])] * len(channels)
    activity = tuple(tuple(sorted(set(a))) for a in activity)
    prob = MaxMinProblem(channels, plan.shape[0], activity, budget)
    rates = prob.rates(plan)
    rates.setflags(write=False)
    return SchemeResult(scheme_id, rates, float(rates.min()), plan_digest(plan), plan, activity)


def _require_slots_match(scenario: Scenario, channels) -> None:
    if scenario.n_slots != scenario.n_mnos:
        raise ValueError(
            f"slot count K={scenario.n_slots} must equal operator count N={scenario.n_mnos}"
        )
    if len(channels) != scenario.n_mnos:
        raise ValueError(f"expected {scenario.n_mnos} channels, got {len(channels)}")


def run_sharing(channels, scenario: Scenario, budget: LinkBudget, opts=None, rng=None, *, init_plan=None):
    _require_slots_match(scenario, channels)
    plan, _ = optimize_maxmin(channels, scenario.n_slots, None, budget, opts, rng, init_plan=init_plan)
    return _result("sharing", channels, plan, None, budget)


def run_time_division(channels, scenario: Scenario, budget: LinkBudget, opts=None, rng=None):
    """Slot ``k`` is conjugate matched to operator ``k``'s user.

    Every user stays active in every slot, since the passive surface
    reflects all carriers whoever owns the slot.
    """
    _require_slots_match(scenario, channels)
    plan = np.stack([conjugate_match(ch) for ch in channels])
    return _result("time-division", channels, plan, None, budget)


def subsurface_side(l_side: int, n_mnos: int, rule: str = "side") -> int:
    if rule == "side":
        return math.isqrt(l_side * l_side // n_mnos) if n_mnos > 0 else 0
    if rule == "literal":
        return math.isqrt(l_side // n_mnos)
    raise ValueError(f"unknown subsurface rule {rule!r}")


def partition_surface(l_side: int, n_mnos: int, rule: str = "side") -> list[np.ndarray]:
    """Element indices (row-major) owned by each operator.

    Every operator gets ``s * s`` elements where ``s`` is the sub-surface
    side. When ``N`` squares of side ``s`` tile the grid they are laid out
    row-major from the top-left corner; otherwise each block is the next
    contiguous run of ``s * s`` elements in row-major order.
    """
    if n_mnos < 1 or n_mnos > l_side * l_side:
        raise PartitionError(f"cannot split {l_side * l_side} elements among {n_mnos} operators")
    s = subsurface_side(l_side, n_mnos, rule)
    if s < 1:
        raise PartitionError(f"sub-surface side is zero for L={l_side}, N={n_mnos}, rule={rule!r}")
    per_row = l_side // s
    grid = np.arange(l_side * l_side).reshape(l_side, l_side)
    if per_row * per_row >= n_mnos:
        blocks = []
        for i in range(n_mnos):
            r, c = divmod(i, per_row)
            blocks.append(grid[r * s:(r + 1) * s, c * s:(c + 1) * s].ravel())
        return blocks
    size = s * s
    return [np.arange(i * size, (i + 1) * size) for i in range(n_mnos)]


def run_no_sharing(channels, scenario: Scenario, budget: LinkBudget, opts=None, rng=None):
    """Static split of the surface; each operator conjugate matches its block."""
    n = len(channels)
    blocks = partition_surface(scenario.l_side, n, scenario.subsurface_rule)
    rng = rng if rng is not None else np.random.default_rng(0)
    phases = random_plan(rng, 1, scenario.n_elements)[0]
    for ch, idx in zip(channels, blocks):
        phases[idx] = conjugate_match(ch.coeffs[idx])
    return _result("no-sharing", channels, phases[None, :], None, budget)


def run_random(channels, scenario: Scenario, budget: LinkBudget, rng=None):
    rng = rng if rng is not None else np.random.default_rng(0)
    plan = random_plan(rng, scenario.n_slots, scenario.n_elements)
    return _result("random", channels, plan, None, budget)


def codebook_points(scenario: Scenario) -> np.ndarray:
    """``K`` beacon points on a regular grid over the UE area at mid-height."""
    k = scenario.n_slots
    cols = math.ceil(math.sqrt(k))
    rows = math.ceil(k / cols)
    area = scenario.ue_area
    x_lo, _ = area.x_range
    y_lo, _ = area.y_range
    z = 0.5 * (area.height_low + area.height_high)
    pts = [
        (x_lo + (c + 0.5) * area.side / cols, y_lo + (r + 0.5) * area.side / rows, z)
        for r in range(rows)
        for c in range(cols)
    ]
    return np.asarray(pts[:k])


def switching_codebook(scenario: Scenario, budget: LinkBudget, codebook_seed: int | None = None) -> np.ndarray:
    """Public ``(K, M)`` pattern set, built from geometry alone.

    The seed only fixes which beacon point is served in which slot.
    """
    seed = scenario.codebook_seed if codebook_seed is None else codebook_seed
    points = codebook_points(scenario)
    order = np.random.default_rng(seed).permutation(len(points))
    elements = element_positions(scenario)
    plan = np.stack([
        conjugate_match(los_cascade(budget, elements, scenario.bs_pos_m, points[j]))
        for j in order
    ])
    plan.setflags(write=False)
    return plan


def run_standalone_switching(channels, scenario: Scenario, budget: LinkBudget, codebook_seed=None, rng=None):
    """CSI-free cycling of a public codebook.

    Each operator measures its user's per-slot rate during one cycle and
    schedules the user in every slot reaching ``switching_threshold`` of
    its best slot.
    """
    plan = switching_codebook(scenario, budget, codebook_seed)
    prob = MaxMinProblem(channels, plan.shape[0], None, budget)
    s = prob.fields(plan)
    slot_rates = np.log2(1.0 + prob.rho * np.abs(s) ** 2)  # (K, N)
    activity = []
    for n in range(len(channels)):
        best = slot_rates[:, n].max()
        active = np.nonzero(slot_rates[:, n] >= scenario.switching_threshold * best)[0]
        activity.append(active.tolist())
    return _result("standalone-switching", channels, plan, activity, budget)


def run_scheme(scheme_id: str, channels, scenario, budget, opts=None, rng=None) -> SchemeResult:
    if scheme_id == "sharing":
        return run_sharing(channels, scenario, budget, opts, rng)
    if scheme_id == "time-division":
        return run_time_division(channels, scenario, budget, opts, rng)
    if scheme_id == "no-sharing":
        return run_no_sharing(channels, scenario, budget, opts, rng)
    if scheme_id == "random":
        return run_random(channels, scenario, budget, rng)
    if scheme_id == "standalone-switching":
        return run_standalone_switching(channels, scenario, budget, None, rng)
    raise ValueError(f"unknown scheme {scheme_id!r}; expected one of {', '.join(SCHEME_IDS)}")
