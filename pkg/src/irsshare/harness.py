"""Monte Carlo drops, parameter sweeps, self-checks and result files."""
from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .channel import CascadedChannel, apply_rician, los_cascade
from .optimizer import (
    MaxMinProblem,
    OptimizerOptions,
    ascent_direction,
    brute_force_maxmin,
    optimize_maxmin,
    project_unit_modulus,
    random_plan,
)
from .rng import stream
from .scenario import LinkBudget, Scenario, derive_link_budget, element_positions, place_users
from .schemes import SCHEME_IDS, run_scheme

WORKERS_ENV = "IRSSHARE_WORKERS"
CSV_HEADER = ["axis_name", "axis_value", "scheme", "mean_min_rate", "std_error", "n_drops", "seed"]
AXES = ("elements", "mnos")


@dataclass(frozen=True)
class SweepRecord:
    axis_name: str
    axis_value: int
    scheme_id: str
    mean_min_rate: float
    std_error: float
    n_drops: int
    seed: int


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def draw_drop(scenario: Scenario, budget: LinkBudget, seed: int, drop: int):
    """Users and Rician channels of one drop.

    User ``n`` always uses the streams tagged with ``n``, so the first users
    of a larger drop coincide with a smaller drop of the same seed.
    """
    users = place_users(scenario, stream(seed, drop, "users"))
    elements = element_positions(scenario)
    channels = []
    for n, ue in enumerate(users):
        los = los_cascade(budget, elements, scenario.bs_pos_m, ue, ue_index=n)
        channels.append(apply_rician(
            los,
            budget.rician_k_lin,
            stream(seed, drop, "fading-bs", n),
            stream(seed, drop, "fading-ue", n),
        ))
    return users, channels


def _drop_min_rates(args) -> dict[str, float]:
    scenario, schemes, seed, drop, opts = args
    budget = derive_link_budget(scenario)
    _, channels = draw_drop(scenario, budget, seed, drop)
    out = {}
    for scheme_id in schemes:
        rng = stream(seed, drop, "scheme:" + scheme_id)
        out[scheme_id] = run_scheme(scheme_id, channels, scenario, budget, opts, rng).min_rate
    return out


def _run_drops(scenario, schemes, n_drops, seed, opts, workers) -> list[dict[str, float]]:
    jobs = [(scenario, tuple(schemes), seed, i, opts) for i in range(n_drops)]
    workers = worker_count() if workers is None else max(1, workers)
    if workers == 1 or n_drops == 1:
        return [_drop_min_rates(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_drop_min_rates, jobs))


def _summarise(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    # plain left-to-right sums keep the reduction order fixed
    mean = math.fsum(arr) / arr.size
    if arr.size < 2:
        return mean, 0.0
    var = math.fsum((arr - mean) ** 2) / (arr.size - 1)
    return mean, math.sqrt(var / arr.size)


def _check_schemes(schemes):
    for s in schemes:
        if s not in SCHEME_IDS:
            raise ValueError(f"unknown scheme {s!r}; expected one of {', '.join(SCHEME_IDS)}")


def monte_carlo(
    scenario: Scenario,
    scheme_id: str,
    n_drops: int,
    seed: int,
    opts: OptimizerOptions | None = None,
    *,
    axis_name: str = "elements",
    workers: int | None = None,
) -> SweepRecord:
    _check_schemes([scheme_id])
    if n_drops < 1:
        raise ValueError("n_drops must be >= 1")
    scenario.validate()
    rows = _run_drops(scenario, [scheme_id], n_drops, seed, opts, workers)
    mean, se = _summarise([r[scheme_id] for r in rows])
    axis_value = scenario.n_elements if axis_name == "elements" else scenario.n_mnos
    return SweepRecord(axis_name, axis_value, scheme_id, mean, se, n_drops, seed)


def resolve_slots(scenario: Scenario) -> Scenario:
    """Tie the slot count to the operator count."""
    return scenario.replace(n_slots=scenario.n_mnos)


def _sweep(base, axis, values, n_drops, seed, opts, schemes, workers) -> list[SweepRecord]:
    schemes = list(schemes or SCHEME_IDS)
    _check_schemes(schemes)
    records = []
    for value in values:
        if axis == "elements":
            side = math.isqrt(value)
            if value < 1 or side * side != value:
                raise ValueError(f"element count {value} is not a perfect square")
            sc = base.replace(l_side=side)
        else:
            if not 1 <= value <= base.n_elements:
                raise ValueError(f"operator count {value} outside 1..{base.n_elements}")
            sc = base.replace(n_mnos=value)
        sc = resolve_slots(sc).validate()
        rows = _run_drops(sc, schemes, n_drops, seed, opts, workers)
        for scheme_id in schemes:
            mean, se = _summarise([r[scheme_id] for r in rows])
            records.append(SweepRecord(axis, int(value), scheme_id, mean, se, n_drops, seed))
    return records


def sweep_elements(base: Scenario, values, n_drops=100, seed=0, opts=None, schemes=None, workers=None):
    return _sweep(base, "elements", values, n_drops, seed, opts, schemes, workers)


def sweep_mnos(base: Scenario, values, n_drops=100, seed=0, opts=None, schemes=None, workers=None):
    return _sweep(base, "mnos", values, n_drops, seed, opts, schemes, workers)


# -- self checks ---------------------------------------------------------------

def unit_budget(snr_scale: float = 1.0) -> LinkBudget:
    """Budget with ``P / sigma^2 = snr_scale`` for synthetic instances."""
    return LinkBudget(
        wavelength_m=1.0, tx_power_w=snr_scale, tx_gain_lin=1.0, rx_gain_lin=1.0,
        noise_w=1.0, element_gain_lin=1.0, rician_k_lin=1.0,
    )


def gaussian_channels(rng: np.random.Generator, n_users: int, n_elements: int, scale: float = 1.0):
    c = (rng.standard_normal((n_users, n_elements)) + 1j * rng.standard_normal((n_users, n_elements)))
    c *= scale / np.sqrt(2.0)
    return [CascadedChannel(c[n], ue_index=n) for n in range(n_users)]


GRAD_DIMS = {"M": 16, "K": 2, "N": 3}
GRAD_TOL = 1e-4


def check_gradient(seed: int = 0, n_instances: int = 20, fd_step: float = 1e-6, perturb: float = 0.0) -> dict:
    """Compare analytic rate gradients with central differences in phase.

    For every instance, user and plan entry, the analytic partial
    derivative with respect to the entry's phase is checked against a
    central difference; errors are relative to the largest partial of that
    user. ``perturb`` scales the largest gradient entry by ``1 + perturb``
    (negative control).
    """
    M, K, N = GRAD_DIMS["M"], GRAD_DIMS["K"], GRAD_DIMS["N"]
    budget = unit_budget(2.0)
    worst = 0.0
    for inst in range(n_instances):
        rng = stream(seed, inst, "check-grad")
        channels = gaussian_channels(rng, N, M)
        theta = rng.uniform(0, 2 * np.pi, (K, M))
        plan = np.exp(1j * theta)
        # random non-empty slot sets exercise the zero rows
        activity = [sorted(set(rng.choice(K, size=rng.integers(1, K + 1), replace=False).tolist())) for _ in range(N)]
        prob = MaxMinProblem(channels, K, activity, budget)
        for user in range(N):
            grad = ascent_direction(channels, plan, user, activity, budget)
            if perturb:
                grad = grad.copy()
                i = np.unravel_index(np.argmax(np.abs(grad)), grad.shape)
                grad[i] *= 1.0 + perturb
            analytic = np.real(np.conj(grad) * 1j * plan)
            numeric = np.empty_like(analytic)
            for k in range(K):
                for m in range(M):
                    tp, tm = theta.copy(), theta.copy()
                    tp[k, m] += fd_step
                    tm[k, m] -= fd_step
                    rp = prob.rates(np.exp(1j * tp))[user]
                    rm = prob.rates(np.exp(1j * tm))[user]
                    numeric[k, m] = (rp - rm) / (2 * fd_step)
            scale = np.max(np.abs(numeric))
            if scale == 0:
                continue
            worst = max(worst, float(np.max(np.abs(analytic - numeric)) / scale))
    return {
        "check": "grad",
        "instances": n_instances,
        "M": M, "K": K, "N": N,
        "max_rel_error": worst,
        "tolerance": GRAD_TOL,
        "passed": worst < GRAD_TOL,
    }


ORACLE_DIMS = {"M": 4, "K": 1, "N": 2, "Q": 16}
ORACLE_RATIO = 0.95


def check_oracle(seed: int = 0, n_instances: int = 20, max_iters: int | None = None) -> dict:
    """Optimizer versus exhaustive search over 16-level quantised phases."""
    M, K, N, Q = ORACLE_DIMS["M"], ORACLE_DIMS["K"], ORACLE_DIMS["N"], ORACLE_DIMS["Q"]
    budget = unit_budget(10.0)
    opts = OptimizerOptions() if max_iters is None else OptimizerOptions(max_iters=max_iters)
    rows = []
    for inst in range(n_instances):
        channels = gaussian_channels(stream(seed, inst, "check-oracle"), N, M)
        _, f_bf = brute_force_maxmin(channels, K, None, budget, Q)
        _, f_opt = optimize_maxmin(channels, K, None, budget, opts, stream(seed, inst, "check-oracle-opt"))
        rows.append({"instance": inst, "optimizer": f_opt, "brute_force": f_bf,
                     "ok": f_opt >= ORACLE_RATIO * f_bf})
    n_ok = sum(r["ok"] for r in rows)
    return {
        "check": "oracle",
        "instances": n_instances,
        "M": M, "K": K, "N": N, "Q": Q,
        "passed_instances": n_ok,
        "worst_ratio": min(r["optimizer"] / r["brute_force"] for r in rows),
        "rows": rows,
        "passed": n_ok == n_instances,
    }


def iteration_time(n_users: int, n_slots: int, n_elements: int, repeats: int = 30, seed: int = 0) -> float:
    """Median wall time of one optimizer iteration.

    One iteration is: evaluate all rates, find the worst user, take its
    gradient, step, project and re-evaluate all rates.
    """
    rng = stream(seed, 0, "timing", n_users, n_slots, n_elements)
    prob = MaxMinProblem(gaussian_channels(rng, n_users, n_elements), n_slots, None, unit_budget(1.0))
    plan = random_plan(rng, n_slots, n_elements)
    times = []
    for _ in range(repeats + 3):
        t0 = time.perf_counter()
        s = prob.fields(plan)
        rates = prob.rates(plan, s)
        g = prob.user_gradient(s, int(np.argmin(rates)))
        trial = project_unit_modulus(plan + 1e-3 * g / np.max(np.abs(g)))
        prob.rates(trial)
        times.append(time.perf_counter() - t0)
    return float(np.median(times[3:]))


# -- outputs -------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def record_row(r: SweepRecord) -> list[str]:
    return [r.axis_name, str(r.axis_value), r.scheme_id, _fmt(r.mean_min_rate),
            _fmt(r.std_error), str(r.n_drops), str(r.seed)]


def write_csv(records: Sequence[SweepRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow(record_row(r))


def read_csv(path) -> list[SweepRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        SweepRecord(row["axis_name"], int(row["axis_value"]), row["scheme"],
                    float(row["mean_min_rate"]), float(row["std_error"]),
                    int(row["n_drops"]), int(row["seed"]))
        for row in rows
    ]


def write_json(records: Sequence[SweepRecord], path) -> None:
    payload = [asdict(r) for r in records]
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path) -> list[SweepRecord]:
    with open(path) as fh:
        return [SweepRecord(**d) for d in json.load(fh)]


def emit_outputs(records: Sequence[SweepRecord], out_dir, stem: str = "results", formats=("csv", "json")) -> list[Path]:
    """Write ``<stem>.csv`` / ``.json`` / ``.svg`` into ``out_dir``."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc}") from exc
    written = []
    for fmt in formats:
        if fmt == "csv":
            path = out_dir / f"{stem}.csv"
            write_csv(records, path)
        elif fmt == "json":
            path = out_dir / f"{stem}.json"
            write_json(records, path)
        elif fmt == "plot":
            from .plotting import plot_sweep

            path = out_dir / f"{stem}.svg"
            plot_sweep(records, path)
        else:
            raise ValueError(f"unknown output format {fmt!r}")
        written.append(path)
    return written
