"""Cascaded BS -> IRS -> UE channels, SNR and achievable rate.

The direct BS-UE path is treated as blocked, and operators sit on
orthogonal carriers, so every rate is noise limited.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .scenario import LinkBudget

UNIT_MODULUS_TOL = 1e-9


class DegenerateGeometryError(ValueError):
    """An endpoint coincides with an IRS element."""


class UnitModulusError(ValueError):
    """Phase vector entries are not on the unit circle."""


@dataclass(frozen=True)
class CascadedChannel:
    """Per-element cascaded coefficients ``coeffs = hop_bs * hop_ue``.

    The two hop vectors are kept so that small-scale fading can be applied
    to each hop separately.
    """

    coeffs: np.ndarray
    ue_index: int = 0
    hop_bs: np.ndarray | None = None
    hop_ue: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex).reshape(-1)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        for name in ("hop_bs", "hop_ue"):
            h = getattr(self, name)
            if h is not None:
                h = np.asarray(h, dtype=complex).reshape(-1)
                if h.shape != c.shape:
                    raise ValueError(f"{name} length {h.size} != {c.size}")
                h.setflags(write=False)
                object.__setattr__(self, name, h)
        if not np.all(np.isfinite(c)):
            raise ValueError("channel coefficients must be finite")

    @property
    def n_elements(self) -> int:
        return self.coeffs.size


def los_cascade(
    budget: LinkBudget,
    elements: np.ndarray,
    bs: Sequence[float],
    ue: Sequence[float],
    ue_index: int = 0,
) -> CascadedChannel:
    """Deterministic line-of-sight cascade through every element."""
    elements = np.asarray(elements, dtype=float).reshape(-1, 3)
    bs = np.asarray(bs, dtype=float)
    ue = np.asarray(ue, dtype=float)
    d_t = np.linalg.norm(bs - elements, axis=1)
    d_r = np.linalg.norm(elements - ue, axis=1)
    if np.any(d_t == 0.0) or np.any(d_r == 0.0):
        raise DegenerateGeometryError("BS or UE coincides with an IRS element")
    lam = budget.wavelength_m
    k = 2.0 * np.pi / lam
    amp_t = lam / (4.0 * np.pi * d_t) * np.sqrt(budget.tx_gain_lin * budget.element_gain_lin)
    amp_r = lam / (4.0 * np.pi * d_r) * np.sqrt(budget.rx_gain_lin * budget.element_gain_lin)
    hop_bs = amp_t * np.exp(-1j * k * d_t)
    hop_ue = amp_r * np.exp(-1j * k * d_r)
    return CascadedChannel(hop_bs * hop_ue, ue_index, hop_bs, hop_ue)


def _cn(rng: np.random.Generator, n: int) -> np.ndarray:
    return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)


def _mix(h_los: np.ndarray, kappa: float, rng: np.random.Generator) -> np.ndarray:
    if np.isinf(kappa):
        return h_los
    nlos = np.abs(h_los) * _cn(rng, h_los.size)
    return np.sqrt(kappa / (1.0 + kappa)) * h_los + np.sqrt(1.0 / (1.0 + kappa)) * nlos


def apply_rician(
    los: CascadedChannel,
    kappa: float,
    rng_bs: np.random.Generator,
    rng_ue: np.random.Generator,
) -> CascadedChannel:
    """Mix each hop with an equal-power diffuse component, then cascade.

    ``kappa`` is the linear Rician factor; ``np.inf`` returns the LoS
    channel unchanged.
    """
    if not kappa >= 0:
        raise ValueError(f"Rician factor must be >= 0, got {kappa}")
    if los.hop_bs is None or los.hop_ue is None:
        raise ValueError("apply_rician needs a channel built by los_cascade")
    if np.isinf(kappa):
        return los
    h_t = _mix(los.hop_bs, kappa, rng_bs)
    h_r = _mix(los.hop_ue, kappa, rng_ue)
    return CascadedChannel(h_t * h_r, los.ue_index, h_t, h_r)


def check_unit_modulus(phases: np.ndarray, tol: float = UNIT_MODULUS_TOL) -> None:
    dev = np.max(np.abs(np.abs(phases) - 1.0), initial=0.0)
    if dev > tol:
        raise UnitModulusError(f"phase entries deviate from unit modulus by {dev:.3e}")


def snr(channel: CascadedChannel, phases: np.ndarray, budget: LinkBudget) -> float:
    phases = np.asarray(phases, dtype=complex).reshape(-1)
    if phases.size != channel.n_elements:
        raise ValueError(f"expected {channel.n_elements} phases, got {phases.size}")
    check_unit_modulus(phases)
    return float(budget.snr_scale * np.abs(channel.coeffs @ phases) ** 2)


def slot_snrs(channel: CascadedChannel, plan: np.ndarray, budget: LinkBudget) -> np.ndarray:
    """SNR of one user in every slot of a ``(K, M)`` plan."""
    plan = np.atleast_2d(np.asarray(plan, dtype=complex))
    check_unit_modulus(plan)
    return budget.snr_scale * np.abs(plan @ channel.coeffs) ** 2


def rate_from_snrs(snrs: np.ndarray, active_slots: Iterable[int], n_slots: int) -> float:
    active = sorted(set(active_slots))
    if not active:
        return 0.0
    if active[0] < 0 or active[-1] >= n_slots:
        raise ValueError(f"active slots {active} outside 0..{n_slots - 1}")
    return float(np.sum(np.log2(1.0 + np.asarray(snrs)[active])) / n_slots)


def user_rate(
    channel: CascadedChannel,
    plan: np.ndarray,
    active_slots: Iterable[int],
    budget: LinkBudget,
) -> float:
    """Average rate in bit/s/Hz over the ``K`` slots of ``plan``.

    Inactive slots contribute nothing but still count in the ``1/K``
    normalisation.
    """
    plan = np.atleast_2d(plan)
    return rate_from_snrs(slot_snrs(channel, plan, budget), active_slots, plan.shape[0])


# -- debug dumps -------------------------------------------------------------

def _interleave(c: np.ndarray) -> list[float]:
    out = np.empty(2 * c.size)
    out[0::2] = c.real
    out[1::2] = c.imag
    return out.tolist()


def dump_channels(path: str | Path, drops: Sequence[tuple[int, np.ndarray, Sequence[CascadedChannel]]]) -> None:
    """Write drops as JSON lines.

    One line per drop: ``{"drop": i, "users": [[x, y, z], ...],
    "coeffs": [[re0, im0, re1, im1, ...], ...]}``.
    """
    with open(path, "w") as fh:
        for drop, users, channels in drops:
            record = {
                "drop": int(drop),
                "users": np.asarray(users, dtype=float).tolist(),
                "coeffs": [_interleave(ch.coeffs) for ch in channels],
            }
            fh.write(json.dumps(record) + "\n")


def load_channel_dump(path: str | Path) -> list[dict]:
    drops = []
    with open(path) as fh:
        for line in fh:
            rec = json.loads(line)
            rec["channels"] = [
                CascadedChannel(np.asarray(v[0::2]) + 1j * np.asarray(v[1::2]), ue_index=i)
                for i, v in enumerate(rec.pop("coeffs"))
            ]
            rec["users"] = np.asarray(rec["users"])
            drops.append(rec)
    return drops
