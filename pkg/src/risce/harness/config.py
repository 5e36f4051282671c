"""Scenario configuration: schema, presets and loading.

Configs are YAML (JSON is accepted as a subset). The top-level ``preset`` key
is required; every other key overrides the preset. The README lists every field.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from enum import Enum
from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..channel_model import ClusterConfig, LinkBudget, SystemGeometry, pathloss
from ..estimator import InterpolationMethod, Stage2Mode
from ..training_design import DesignKind

__all__ = [
    "ConfigError",
    "PRESETS",
    "ScenarioConfig",
    "SweepVariable",
    "load_config",
    "preset_config",
]


class ConfigError(ValueError):
    pass


class SweepVariable(str, Enum):
    K_dB = "K_dB"
    d_R = "d_R"
    rho_dB = "rho_dB"
    tau_2 = "tau_2"
    sigma_e = "sigma_e"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GeometryConfig(_Section):
    M: int = Field(8, ge=1)
    N_y: int = Field(4, ge=1)
    N_z: int = Field(8, ge=1)
    d_B: float = Field(0.5, gt=0)
    d_R: float = Field(0.25, gt=0)
    r: float = Field(100.0, gt=0)
    r_0: float = Field(15.0, ge=0)
    D_U: float = Field(50.0, gt=0)
    bs_y: float = 5.0
    ris_y: float = -5.0
    phi_bar_B_deg: float = 30.0
    phi_bar_R_deg: float = 45.0
    theta_bar_B_deg: float = Field(90.0, ge=0, le=180)
    theta_bar_R_deg: float = Field(90.0, ge=0, le=180)

    @model_validator(mode="after")
    def _check_ue(self):
        if not self.r_0 < self.D_U < self.r:
            raise ValueError(f"D_U={self.D_U} must satisfy r_0 < D_U < r")
        if self.bs_y == self.ris_y:
            raise ValueError("BS and RIS must not coincide (bs_y == ris_y)")
        return self


class LargeScaleConfig(_Section):
    A: float = Field(1.0, gt=0)
    D_0: float = Field(1.0, gt=0)
    gamma_ue: float = 3.7
    gamma_br: float = 2.0
    sigma_sf_dB: float = Field(5.5, ge=0)
    # None: shadowing on, except in K sweeps
    shadowing: bool | None = None
    # None: pure LoS RIS-BS channel
    K_dB: float | None = 1000.0


class ClusterSpec(_Section):
    C: int = Field(ge=1)
    S: int = Field(ge=1)
    eta: float = Field(0.1, gt=0, le=1)
    sigma_phi_deg: float = Field(ge=0)
    sigma_Delta_deg: float = Field(ge=0)
    sigma_theta_deg: float = Field(ge=0)
    sigma_delta_deg: float = Field(ge=0)

    def build(self) -> ClusterConfig:
        return ClusterConfig(
            C=self.C, S=self.S, eta=self.eta,
            sigma_phi=math.radians(self.sigma_phi_deg),
            sigma_theta=math.radians(self.sigma_theta_deg),
            sigma_Delta=math.radians(self.sigma_Delta_deg),
            sigma_delta=math.radians(self.sigma_delta_deg),
        )


class ChannelsConfig(_Section):
    ue: ClusterSpec
    br: ClusterSpec


class EstimationConfig(_Section):
    training: list[DesignKind] = Field(default_factory=lambda: [DesignKind.MDFT], min_length=1)
    methods: list[InterpolationMethod] = Field(default_factory=lambda: list(InterpolationMethod), min_length=1)
    # 10 log10(rho * beta_RU * beta_BR), shadow-free gains
    rho_dB: float = 5.0
    tau_2: int = Field(1, ge=0)
    stage2: Stage2Mode = Stage2Mode.REESTIMATE
    zero_noise: bool = False

    @model_validator(mode="after")
    def _check_stage2(self):
        if self.stage2 is Stage2Mode.REESTIMATE and self.tau_2 < 1:
            raise ValueError("tau_2 must be >= 1 in REESTIMATE mode")
        return self


class EvaluationConfig(_Section):
    T: int = Field(400, ge=1)
    # 10 log10(rho_D * beta_BU), shadow-free
    rho_D_dB: float = 0.0
    blocked_direct: bool = False
    phase_reference: Literal["SINGULAR", "LOS"] = "SINGULAR"
    # set to run the synthetic phase-error experiment instead of estimation
    sigma_e: float | None = Field(None, ge=0)
    include_baseline: bool = False


class MonteCarloConfig(_Section):
    trials: int = Field(200, ge=1)
    seed: int = Field(0, ge=0, lt=2 ** 64)
    workers: int = Field(1, ge=1)


class SweepConfig(_Section):
    variable: SweepVariable | None = None
    grid: list[float] = Field(default_factory=list)


class ScenarioConfig(_Section):
    preset: Literal["scenario1", "scenario2", "custom"]
    geometry: GeometryConfig = GeometryConfig()
    large_scale: LargeScaleConfig = LargeScaleConfig()
    channels: ChannelsConfig
    estimation: EstimationConfig = EstimationConfig()
    evaluation: EvaluationConfig = EvaluationConfig()
    monte_carlo: MonteCarloConfig = MonteCarloConfig()
    sweep: SweepConfig = SweepConfig()

    @model_validator(mode="after")
    def _check_cross(self):
        for m in self.estimation.methods:
            try:
                n_active = m.n_active(self.geometry.N_y, self.geometry.N_z)
            except ValueError as exc:
                raise ValueError(f"estimation.methods: {exc}") from None
            tau = n_active + 1 + self.estimation.tau_2
            if tau > self.evaluation.T:
                raise ValueError(f"evaluation.T={self.evaluation.T} is shorter than the {tau} pilots of {m.value}")
        return self

    # builders for the numerical modules

    def system_geometry(self) -> SystemGeometry:
        g = self.geometry
        return SystemGeometry.from_layout(
            M=g.M, N_y=g.N_y, N_z=g.N_z, d_B=g.d_B, d_R=g.d_R, r=g.r, r_0=g.r_0, D_U=g.D_U,
            bs_y=g.bs_y, ris_y=g.ris_y,
            phi_bar_B=math.radians(g.phi_bar_B_deg), phi_bar_R=math.radians(g.phi_bar_R_deg),
            theta_bar_B=math.radians(g.theta_bar_B_deg), theta_bar_R=math.radians(g.theta_bar_R_deg),
        )

    def link_budget(self, L_BU_dB: float = 0.0, L_RU_dB: float = 0.0) -> LinkBudget:
        """Gains with the given shadowing draws; the RIS-BS link is never shadowed."""
        geo = self.system_geometry()
        ls = self.large_scale
        return LinkBudget(
            beta_BU=pathloss(ls.A, L_BU_dB, geo.D_BU, ls.D_0, ls.gamma_ue),
            beta_RU=pathloss(ls.A, L_RU_dB, geo.D_RU, ls.D_0, ls.gamma_ue),
            beta_BR=pathloss(ls.A, 0.0, geo.D_BR, ls.D_0, ls.gamma_br),
            K=LinkBudget.k_from_db(ls.K_dB),
        )

    def shadowing_enabled(self) -> bool:
        ls = self.large_scale
        if ls.sigma_sf_dB == 0:
            return False
        if ls.shadowing is None:
            return self.sweep.variable is not SweepVariable.K_dB
        return ls.shadowing

    def training_snr(self) -> float:
        b = self.link_budget()
        return 10 ** (self.estimation.rho_dB / 10) / (b.beta_RU * b.beta_BR)

    def data_snr(self) -> float:
        return 10 ** (self.evaluation.rho_D_dB / 10) / self.link_budget().beta_BU

    # serialization

    def to_dict(self) -> dict[str, Any]:
        return self.model_dump(mode="json")

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    def config_hash(self) -> str:
        """Stable digest of everything that can change results (not ``workers``)."""
        d = self.to_dict()
        d["monte_carlo"].pop("workers", None)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def with_value(self, variable: SweepVariable | str, value: float) -> "ScenarioConfig":
        """Copy with one sweep variable set to ``value``."""
        variable = SweepVariable(variable)
        d = self.to_dict()
        if variable is SweepVariable.K_dB:
            d["large_scale"]["K_dB"] = float(value)
        elif variable is SweepVariable.d_R:
            d["geometry"]["d_R"] = float(value)
        elif variable is SweepVariable.rho_dB:
            d["estimation"]["rho_dB"] = float(value)
        elif variable is SweepVariable.tau_2:
            if float(value) != int(value):
                raise ConfigError(f"tau_2 grid values must be integers, got {value}")
            d["estimation"]["tau_2"] = int(value)
        else:
            d["evaluation"]["sigma_e"] = float(value)
        d["sweep"]["variable"] = variable.value
        return _validate(d)

    def with_overrides(self, overrides: dict[str, Any]) -> "ScenarioConfig":
        return _validate(_deep_merge(self.to_dict(), overrides))


_UE = {"C": 3, "S": 5, "eta": 0.1}
_BR = {"C": 2, "S": 2, "eta": 0.1}

PRESETS: dict[str, dict[str, Any]] = {
    "scenario1": {
        "geometry": {"N_z": 8, "d_R": 0.25},
        "large_scale": {"K_dB": 1000.0},
        "channels": {
            k: {**base, "sigma_phi_deg": 14.4, "sigma_Delta_deg": 1.9,
                "sigma_theta_deg": 6.24, "sigma_delta_deg": 1.37}
            for k, base in (("ue", _UE), ("br", _BR))
        },
    },
    "scenario2": {
        "geometry": {"N_z": 16, "d_R": 0.5},
        "large_scale": {"K_dB": 12.0},
        "channels": {
            k: {**base, "sigma_phi_deg": 31.64, "sigma_Delta_deg": 6.12,
                "sigma_theta_deg": 24.25, "sigma_delta_deg": 1.84}
            for k, base in (("ue", _UE), ("br", _BR))
        },
    },
}

REQUIRED_KEYS = ("preset",)


def _deep_merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _format_errors(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def _validate(raw: dict) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"invalid config: {_format_errors(exc)}") from None


def resolve(raw: dict | None) -> ScenarioConfig:
    """Merge a raw mapping over its preset and validate it."""
    if not raw:
        raise ConfigError(f"config is empty; required keys: {', '.join(REQUIRED_KEYS)} "
                          f"(one of scenario1, scenario2, custom)")
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping at the top level")
    missing = [k for k in REQUIRED_KEYS if k not in raw]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    preset = raw["preset"]
    base = PRESETS.get(preset, {}) if isinstance(preset, str) else {}
    return _validate(_deep_merge(base, raw))


def preset_config(name: str, overrides: dict[str, Any] | None = None) -> ScenarioConfig:
    """A preset with optional nested overrides, e.g. ``{"geometry": {"M": 4}}``."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return resolve({**(overrides or {}), "preset": name})


def load_config(path: str | Path, preset: str | None = None) -> ScenarioConfig:
    """Read a YAML config; ``preset`` replaces the file's ``preset`` key."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
    if preset is not None:
        raw = {**(raw or {}), "preset": preset}
    return resolve(raw)
