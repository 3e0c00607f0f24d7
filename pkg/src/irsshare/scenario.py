"""Experiment parameters, link budget and user placement.

All dB quantities and physical constants live here; downstream modules
consume only the linear values carried by :class:`LinkBudget`.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .rng import U64_MAX

SPEED_OF_LIGHT = 299_792_458.0
SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    """Raised when a scenario or configuration file is invalid."""


@dataclass(frozen=True)
class UEArea:
    """Horizontal square anchored at ``corner`` plus a height range.

    The square spans ``corner_x .. corner_x + side`` in x and
    ``corner_y .. corner_y + side`` in y.
    """

    corner_x: float = -5.5
    corner_y: float = 7.5
    side: float = 5.0
    height_low: float = 1.0
    height_high: float = 5.0

    @property
    def x_range(self) -> tuple[float, float]:
        return (self.corner_x, self.corner_x + self.side)

    @property
    def y_range(self) -> tuple[float, float]:
        return (self.corner_y, self.corner_y + self.side)


@dataclass(frozen=True)
class Scenario:
    n_mnos: int = 5
    l_side: int = 20
    n_slots: int = 5
    carrier_hz: float = 28e9
    tx_power_dbm: float = 30.0
    tx_gain_dbi: float = 20.0
    rx_gain_dbi: float = 0.0
    noise_dbm: float = -80.0
    rician_k_db: float = 0.0
    irs_center_m: tuple[float, float, float] = (0.0, 0.0, 2.0)
    bs_pos_m: tuple[float, float, float] = (10.0, 5.0, 5.0)
    ue_area: UEArea = field(default_factory=UEArea)
    seed: int = 0
    # "side" -> floor(L / sqrt(N)); "literal" -> floor(sqrt(L / N))
    subsurface_rule: str = "side"
    switching_threshold: float = 0.5
    codebook_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "irs_center_m", tuple(float(v) for v in self.irs_center_m))
        object.__setattr__(self, "bs_pos_m", tuple(float(v) for v in self.bs_pos_m))
        if isinstance(self.ue_area, dict):
            object.__setattr__(self, "ue_area", UEArea(**self.ue_area))

    @property
    def n_elements(self) -> int:
        return self.l_side**2

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    def validate(self) -> "Scenario":
        for name in ("n_mnos", "l_side", "n_slots"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
                raise ScenarioError(f"{name} must be a positive integer, got {value!r}")
        if not self.carrier_hz > 0:
            raise ScenarioError(f"carrier_hz must be > 0, got {self.carrier_hz}")
        if len(self.irs_center_m) != 3 or len(self.bs_pos_m) != 3:
            raise ScenarioError("irs_center_m and bs_pos_m must be 3-vectors")
        area = self.ue_area
        if not area.side > 0:
            raise ScenarioError(f"ue_area.side must be > 0, got {area.side}")
        if area.height_low > area.height_high:
            raise ScenarioError("ue_area height range must satisfy low <= high")
        plane_y = self.irs_center_m[1]
        if self.bs_pos_m[1] == plane_y:
            raise ScenarioError("BS lies on the IRS plane")
        y_lo, y_hi = area.y_range
        if y_lo <= plane_y <= y_hi:
            raise ScenarioError("UE area intersects the IRS plane")
        if self.subsurface_rule not in ("side", "literal"):
            raise ScenarioError(f"unknown subsurface_rule {self.subsurface_rule!r}")
        if not 0.0 <= self.switching_threshold <= 1.0:
            raise ScenarioError("switching_threshold must lie in [0, 1]")
        for name in ("seed", "codebook_seed"):
            value = getattr(self, name)
            if not 0 <= int(value) <= U64_MAX:
                raise ScenarioError(f"{name} must be an unsigned 64-bit integer")
        return self


@dataclass(frozen=True)
class LinkBudget:
    wavelength_m: float
    tx_power_w: float
    tx_gain_lin: float
    rx_gain_lin: float
    noise_w: float
    element_gain_lin: float
    rician_k_lin: float

    @property
    def snr_scale(self) -> float:
        """Transmit power over noise power, P / sigma^2."""
        return self.tx_power_w / self.noise_w


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def derive_link_budget(scenario: Scenario) -> LinkBudget:
    scenario.validate()
    wavelength = SPEED_OF_LIGHT / scenario.carrier_hz
    # half-wavelength square aperture: 4*pi*(lambda/2)^2 / lambda^2 == pi
    element_area = (wavelength / 2.0) ** 2
    element_gain = 4.0 * np.pi * element_area / wavelength**2
    return LinkBudget(
        wavelength_m=wavelength,
        tx_power_w=dbm_to_watt(scenario.tx_power_dbm),
        tx_gain_lin=db_to_linear(scenario.tx_gain_dbi),
        rx_gain_lin=db_to_linear(scenario.rx_gain_dbi),
        noise_w=dbm_to_watt(scenario.noise_dbm),
        element_gain_lin=float(element_gain),
        rician_k_lin=db_to_linear(scenario.rician_k_db),
    )


def element_positions(scenario: Scenario) -> np.ndarray:
    """Return the ``(L*L, 3)`` element grid in the x-z plane.

    Pitch is half a wavelength; rows run over z (top row first) and columns
    over x, so index ``row * L + col`` is row-major.
    """
    scenario.validate()
    lam = SPEED_OF_LIGHT / scenario.carrier_hz
    L = scenario.l_side
    offsets = (np.arange(L) - (L - 1) / 2.0) * (lam / 2.0)
    cx, cy, cz = scenario.irs_center_m
    zz, xx = np.meshgrid(-offsets, offsets, indexing="ij")
    pos = np.empty((L * L, 3))
    pos[:, 0] = cx + xx.ravel()
    pos[:, 1] = cy
    pos[:, 2] = cz + zz.ravel()
    return pos


def place_users(scenario: Scenario, rng: np.random.Generator) -> np.ndarray:
    """Draw one UE per MNO uniformly over the UE area.

    Users are drawn one after another, so the first ``n`` users of an
    ``N``-user drop coincide with an ``n``-user drop from the same stream.
    """
    scenario.validate()
    area = scenario.ue_area
    x_lo, x_hi = area.x_range
    y_lo, y_hi = area.y_range
    users = np.empty((scenario.n_mnos, 3))
    for n in range(scenario.n_mnos):
        users[n] = (
            rng.uniform(x_lo, x_hi),
            rng.uniform(y_lo, y_hi),
            rng.uniform(area.height_low, area.height_high),
        )
    return users


# -- configuration files -----------------------------------------------------

_SCENARIO_KEYS = {f.name for f in dataclasses.fields(Scenario)}
_AREA_KEYS = {f.name for f in dataclasses.fields(UEArea)}


def scenario_from_dict(data: dict[str, Any]) -> tuple[Scenario, dict[str, Any]]:
    """Build a scenario from a parsed config mapping.

    Returns the scenario and the (possibly empty) ``optimizer`` section.
    Unknown keys anywhere are rejected.
    """
    data = dict(data or {})
    version = data.pop("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ScenarioError(f"unsupported schema_version {version!r}")
    optimizer = data.pop("optimizer", {}) or {}
    unknown = set(data) - _SCENARIO_KEYS
    if unknown:
        raise ScenarioError(f"unknown config keys: {sorted(unknown)}")
    if "ue_area" in data:
        area = data["ue_area"] or {}
        bad = set(area) - _AREA_KEYS
        if bad:
            raise ScenarioError(f"unknown ue_area keys: {sorted(bad)}")
        data["ue_area"] = UEArea(**area)
    try:
        scenario = Scenario(**data)
    except TypeError as exc:
        raise ScenarioError(str(exc)) from exc
    return scenario.validate(), dict(optimizer)


def scenario_to_dict(scenario: Scenario) -> dict[str, Any]:
    data = dataclasses.asdict(scenario)
    data["irs_center_m"] = list(scenario.irs_center_m)
    data["bs_pos_m"] = list(scenario.bs_pos_m)
    return {"schema_version": SCHEMA_VERSION, **data}


def load_config(path: str | Path) -> tuple[Scenario, dict[str, Any]]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"malformed config {path}: {exc}") from exc
    if data is not None and not isinstance(data, dict):
        raise ScenarioError("config must be a key-value mapping")
    return scenario_from_dict(data or {})
