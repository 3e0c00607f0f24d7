"""Max-min rate optimisation of time-slotted IRS phase plans.

The optimiser is projected gradient ascent on the worst user's rate,
with Armijo backtracking evaluated on the true minimum rate. The
closed-form single-user optimum and an exhaustive search over quantised
phases are provided as independent checks.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, fields
from typing import Callable, Iterable, Sequence

import numpy as np

from .channel import CascadedChannel
from .scenario import LinkBudget

LN2 = np.log(2.0)
ZERO_MODULUS_TOL = 1e-12
BRUTE_FORCE_LIMIT = 2**26
MAX_STEP_GROWTH = 2.0**20


class ProjectionError(ValueError):
    """An entry too close to zero has no defined projection."""

    def __init__(self, indices):
        self.indices = indices
        super().__init__(f"{len(indices[0])} entries have (near) zero modulus")


class SearchSpaceError(ValueError):
    """Brute-force enumeration would exceed the size guard."""


@dataclass(frozen=True)
class OptimizerOptions:
    max_iters: int = 2000
    restarts: int = 8
    initial_step: float = 1.0
    armijo_shrink: float = 0.5
    armijo_slope: float = 1e-4
    convergence_tol: float = 1e-6
    convergence_window: int = 10
    smoothing_mode: str = "active-min"
    softmin_temperature: float = 0.1
    max_backtracks: int = 40

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "smoothing_mode":
                if v not in ("active-min", "softmin"):
                    raise ValueError(f"unknown smoothing_mode {v!r}")
            elif not v > 0:
                raise ValueError(f"{f.name} must be positive, got {v}")
        if not (0 < self.armijo_shrink < 1 and 0 < self.armijo_slope < 1):
            raise ValueError("armijo_shrink and armijo_slope must lie in (0, 1)")

    @classmethod
    def from_dict(cls, data: dict) -> "OptimizerOptions":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown optimizer options: {sorted(unknown)}")
        return cls(**data)


def activity_mask(activity: Sequence[Iterable[int]] | None, n_slots: int, n_users: int) -> np.ndarray:
    """``(K, N)`` float mask from per-user slot sets (``None`` = always active)."""
    mask = np.zeros((n_slots, n_users))
    if activity is None:
        mask[:] = 1.0
        return mask
    if len(activity) != n_users:
        raise ValueError(f"expected {n_users} activity sets, got {len(activity)}")
    for n, slots in enumerate(activity):
        for k in slots:
            if not 0 <= k < n_slots:
                raise ValueError(f"slot {k} outside 0..{n_slots - 1}")
            mask[k, n] = 1.0
    return mask


class MaxMinProblem:
    """Stacked form of one max-min instance.

    ``coeffs`` is ``(N, M)``, ``mask`` is ``(K, N)``; a plan is ``(K, M)``.
    """

    def __init__(self, channels: Sequence[CascadedChannel], n_slots: int, activity, budget: LinkBudget):
        if not channels:
            raise ValueError("need at least one user")
        self.coeffs = np.stack([ch.coeffs for ch in channels])
        self.coeffs_conj = self.coeffs.conj()
        self.n_users, self.n_elements = self.coeffs.shape
        self.n_slots = int(n_slots)
        self.mask = activity_mask(activity, self.n_slots, self.n_users)
        self.rho = budget.snr_scale

    def fields(self, plan: np.ndarray) -> np.ndarray:
        # s[k, n] = sum_l c[n, l] * plan[k, l]; plain einsum keeps the cost
        # linear in N, K and M (BLAS kernels do not)
        return np.einsum("km,nm->kn", plan, self.coeffs)

    def rates(self, plan: np.ndarray, s: np.ndarray | None = None) -> np.ndarray:
        if s is None:
            s = self.fields(plan)
        snr = self.rho * (s.real**2 + s.imag**2)
        return (self.mask * np.log2(1.0 + snr)).sum(axis=0) / self.n_slots

    def user_gradient(self, s: np.ndarray, user: int) -> np.ndarray:
        """Real-coordinate gradient ``2 dR/d(conj plan)`` of one user's rate."""
        s_n = s[:, user]
        weight = self.mask[:, user] * (2.0 * self.rho / (self.n_slots * LN2)) * s_n / (
            1.0 + self.rho * np.abs(s_n) ** 2
        )
        return weight[:, None] * self.coeffs_conj[user][None, :]

    def weighted_gradient(self, s: np.ndarray, weights: np.ndarray) -> np.ndarray:
        snr_den = 1.0 + self.rho * (s.real**2 + s.imag**2)
        w = self.mask * weights[None, :] * (2.0 * self.rho / (self.n_slots * LN2)) * s / snr_den
        return w @ self.coeffs_conj


def project_unit_modulus(plan: np.ndarray) -> np.ndarray:
    """Scale every entry onto the unit circle.

    Entries already within a few ulps of modulus one are returned as is,
    so the projection is exactly idempotent.
    """
    plan = np.asarray(plan, dtype=complex)
    mag = np.abs(plan)
    if mag.size and mag.min() <= ZERO_MODULUS_TOL:
        raise ProjectionError(np.nonzero(mag <= ZERO_MODULUS_TOL))
    mag = np.where(np.abs(mag - 1.0) <= 4 * np.finfo(float).eps, 1.0, mag)
    # component-wise real division; complex division adds rounding
    out = np.empty_like(plan)
    out.real = plan.real / mag
    out.imag = plan.imag / mag
    return out


def tangent_component(plan: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """Part of ``direction`` tangent to the unit circle at each entry."""
    radial = np.real(direction * plan.conj())
    return direction - radial * plan


def evaluate_min_rate(channels, plan, activity, budget) -> tuple[float, int]:
    plan = np.atleast_2d(plan)
    prob = MaxMinProblem(channels, plan.shape[0], activity, budget)
    rates = prob.rates(plan)
    n_star = int(np.argmin(rates))
    return float(rates[n_star]), n_star


def ascent_direction(channels, plan, user: int, activity, budget) -> np.ndarray:
    """Gradient of ``user``'s rate w.r.t. the complex plan entries.

    Uses the real-coordinate convention ``G = dR/dRe + j dR/dIm``, so the
    first-order change along ``D`` is ``Re(sum(conj(G) * D))``. Rows of
    slots where the user is inactive are zero.
    """
    plan = np.atleast_2d(plan)
    prob = MaxMinProblem(channels, plan.shape[0], activity, budget)
    return prob.user_gradient(prob.fields(plan), user)


def conjugate_match(channel: CascadedChannel | np.ndarray) -> np.ndarray:
    c = channel.coeffs if isinstance(channel, CascadedChannel) else np.asarray(channel, dtype=complex)
    phases = np.ones(c.shape, dtype=complex)
    nz = np.abs(c) > 0
    phases[nz] = np.conj(c[nz]) / np.abs(c[nz])
    return phases


def random_plan(rng: np.random.Generator, n_slots: int, n_elements: int) -> np.ndarray:
    # uniform on [0, 2pi); the endpoint has probability zero
    return np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=(n_slots, n_elements)))


@dataclass
class TraceRow:
    iteration: int
    min_rate: float
    argmin_user: int
    step: float


IterationHook = Callable[[int, np.ndarray, float, int, float], None]


def _ascend(
    prob: MaxMinProblem,
    plan: np.ndarray,
    opts: OptimizerOptions,
    rng: np.random.Generator,
    trace: list[TraceRow] | None,
    hook: IterationHook | None,
) -> tuple[np.ndarray, float]:
    s = prob.fields(plan)
    rates = prob.rates(plan, s)
    n_star = int(np.argmin(rates))
    f = float(rates[n_star])
    history = [f]
    if trace is not None:
        trace.append(TraceRow(0, f, n_star, 0.0))

    # each line search starts from twice the last accepted step, in units of
    # the gradient-rescaled initial step
    fraction = 1.0
    for it in range(1, opts.max_iters + 1):
        if opts.smoothing_mode == "softmin":
            z = -(rates - f) / opts.softmin_temperature
            w = np.exp(z - z.max())
            grad = prob.weighted_gradient(s, w / w.sum())
        else:
            grad = prob.user_gradient(s, n_star)
        scale = np.max(np.abs(grad), initial=0.0)
        slope = float(np.sum(np.abs(tangent_component(plan, grad)) ** 2))

        accepted = False
        full = opts.initial_step / scale if scale > 0 else 0.0
        fraction = min(MAX_STEP_GROWTH, fraction / opts.armijo_shrink)
        step = fraction * full
        for _ in range(opts.max_backtracks):
            trial = plan + step * grad
            try:
                trial = project_unit_modulus(trial)
            except ProjectionError as exc:
                trial[exc.indices] = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, exc.indices[0].size))
                trial = project_unit_modulus(trial)
            s_trial = prob.fields(trial)
            rates_trial = prob.rates(trial, s_trial)
            f_trial = float(rates_trial.min())
            if f_trial >= f + opts.armijo_slope * step * slope:
                accepted = True
                break
            step *= opts.armijo_shrink
            fraction *= opts.armijo_shrink
        if not accepted:
            break

        plan, s, rates = trial, s_trial, rates_trial
        n_star = int(np.argmin(rates))
        f = float(rates[n_star])
        history.append(f)
        if trace is not None:
            trace.append(TraceRow(it, f, n_star, step))
        if hook is not None:
            hook(it, plan, f, n_star, step)
        if it >= opts.convergence_window:
            gain = f - history[-1 - opts.convergence_window]
            if gain <= opts.convergence_tol * abs(f):
                break
    return plan, f


def optimize_maxmin(
    channels: Sequence[CascadedChannel],
    n_slots: int,
    activity,
    budget: LinkBudget,
    opts: OptimizerOptions | None = None,
    rng: np.random.Generator | None = None,
    *,
    init_plan: np.ndarray | None = None,
    trace: list[TraceRow] | None = None,
    hook: IterationHook | None = None,
) -> tuple[np.ndarray, float]:
    """Best plan over ``opts.restarts`` projected-gradient ascents.

    Each restart draws its random initial plan from its own child stream
    of ``rng``. If ``init_plan`` is given it replaces the first restart's
    random start. ``trace`` (if a list) collects the rows of the best run.
    """
    opts = opts or OptimizerOptions()
    rng = rng if rng is not None else np.random.default_rng(0)
    prob = MaxMinProblem(channels, n_slots, activity, budget)
    children = rng.spawn(opts.restarts)

    best_plan, best_f, best_trace = None, -np.inf, None
    for r, child in enumerate(children):
        if r == 0 and init_plan is not None:
            start = project_unit_modulus(np.atleast_2d(init_plan).astype(complex))
        else:
            start = random_plan(child, prob.n_slots, prob.n_elements)
        run_trace = [] if trace is not None else None
        plan, f = _ascend(prob, start, opts, child, run_trace, hook)
        if f > best_f:
            best_plan, best_f, best_trace = plan, f, run_trace
    if trace is not None:
        trace.extend(best_trace)
    return best_plan, best_f


def write_trace(path, rows: Sequence[TraceRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "min_rate", "argmin_user", "step"])
        for row in rows:
            w.writerow([row.iteration, repr(row.min_rate), row.argmin_user, repr(row.step)])


def brute_force_maxmin(
    channels: Sequence[CascadedChannel],
    n_slots: int,
    activity,
    budget: LinkBudget,
    q_levels: int,
    chunk: int = 1 << 15,
) -> tuple[np.ndarray, float]:
    """Exact max-min over plans whose entries lie on a ``q_levels`` phase grid."""
    if q_levels < 2:
        raise ValueError("q_levels must be >= 2")
    prob = MaxMinProblem(channels, n_slots, activity, budget)
    n_vars = prob.n_slots * prob.n_elements
    size = q_levels**n_vars
    if size > BRUTE_FORCE_LIMIT:
        raise SearchSpaceError(
            f"search space {q_levels}^{n_vars} = {size} exceeds limit {BRUTE_FORCE_LIMIT}"
        )
    grid = np.exp(2j * np.pi * np.arange(q_levels) / q_levels)
    powers = q_levels ** np.arange(n_vars - 1, -1, -1)
    mask = prob.mask.T[None, :, :]  # (1, N, K)

    best_idx, best_f = 0, -np.inf
    for start in range(0, size, chunk):
        idx = np.arange(start, min(start + chunk, size))
        digits = (idx[:, None] // powers[None, :]) % q_levels
        plans = grid[digits].reshape(-1, prob.n_slots, prob.n_elements)
        s = np.einsum("nm,bkm->bnk", prob.coeffs, plans)
        snr = prob.rho * np.abs(s) ** 2
        rates = (mask * np.log2(1.0 + snr)).sum(axis=2) / prob.n_slots
        mins = rates.min(axis=1)
        j = int(np.argmax(mins))
        if mins[j] > best_f:
            best_f, best_idx = float(mins[j]), int(idx[j])
    digits = (best_idx // powers) % q_levels
    return grid[digits].reshape(prob.n_slots, prob.n_elements), best_f


def enumerate_plans(q_levels: int, n_slots: int, n_elements: int):
    """Yield every quantised plan; slow path used only for small checks."""
    grid = np.exp(2j * np.pi * np.arange(q_levels) / q_levels)
    for combo in itertools.product(range(q_levels), repeat=n_slots * n_elements):
        yield grid[list(combo)].reshape(n_slots, n_elements)
