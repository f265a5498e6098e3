"""System configuration shared by every stage of the toolkit."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Any, Mapping


class ConfigError(ValueError):
    """Raised for malformed or physically inconsistent configurations."""


@dataclass(frozen=True)
class SystemConfig:
    """Physical and algorithmic parameters of one surveillance scenario.

    Lengths follow the units used by the propagation model: the area side and
    the break-point distances are in km, the UR placement radius and the
    antenna heights are in m.  Powers are in mW, the noise floor in dBm.
    """

    num_mns: int = 40
    antennas_per_mn: int = 6
    num_pairs: int = 20
    area_side: float = 1.0              # km
    ur_radius: float = 150.0            # m
    carrier_freq: float = 1900.0        # MHz
    bandwidth: float = 50.0             # MHz, informational only
    mn_height: float = 15.0             # m
    user_height: float = 1.65           # m
    d0: float = 0.01                    # km
    d1: float = 0.05                    # km
    shadow_std: float = 4.0             # dB
    noise_power: float = -92.0          # dBm
    pilot_len: int | None = None        # None -> 2K
    pilot_power: float = 250.0          # mW
    jam_power: float = 1000.0           # mW
    ut_power: float = 250.0             # mW
    si_ratio: float = 30.0              # dB, co-located baseline only
    rng_seed: int = 0
    bisection_tol: float = 1e-5         # relative to the initial bracket
    e_min: float = 1e-4                 # greedy / grouping stopping threshold
    max_alt_iters: int = 2
    power_objective: str = "msp"        # "msp" or "ratio"
    joint_greedy: bool = False

    def __post_init__(self) -> None:
        if self.pilot_len is None:
            object.__setattr__(self, "pilot_len", 2 * self.num_pairs)
        self.validate()

    @property
    def tau_t(self) -> int:
        return int(self.pilot_len)

    @property
    def noise_mw(self) -> float:
        return 10.0 ** (self.noise_power / 10.0)

    @property
    def rho_t(self) -> float:
        return self.pilot_power / self.noise_mw

    @property
    def rho_j(self) -> float:
        return self.jam_power / self.noise_mw

    @property
    def rho_ut(self) -> float:
        return self.ut_power / self.noise_mw

    @property
    def si_gain(self) -> float:
        """Residual self-interference gain of the co-located array (linear)."""
        return 10.0 ** (self.si_ratio / 10.0) * self.noise_mw

    def validate(self) -> None:
        for name in ("num_mns", "antennas_per_mn", "num_pairs"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.tau_t < 2 * self.num_pairs:
            raise ConfigError(
                f"pilot_len={self.tau_t} violates pilot_len >= 2*num_pairs={2 * self.num_pairs}"
            )
        for name in ("pilot_power", "jam_power", "ut_power"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be strictly positive")
        if not self.area_side > 0:
            raise ConfigError("area_side must be strictly positive")
        if self.ur_radius < 0:
            raise ConfigError("ur_radius must be nonnegative")
        if not 0 < self.d0 < self.d1:
            raise ConfigError(f"need 0 < d0 < d1, got d0={self.d0}, d1={self.d1}")
        if self.shadow_std < 0:
            raise ConfigError("shadow_std must be nonnegative")
        if not self.bisection_tol > 0 or self.e_min < 0:
            raise ConfigError("tolerances must be positive")
        if self.max_alt_iters < 0:
            raise ConfigError("max_alt_iters must be >= 0")
        if self.power_objective not in ("msp", "ratio"):
            raise ConfigError("power_objective must be 'msp' or 'ratio'")

    def replace(self, **changes: Any) -> "SystemConfig":
        # re-derive the default pilot length when K changes
        if "num_pairs" in changes and "pilot_len" not in changes:
            changes["pilot_len"] = None
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "SystemConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        return cls(**dict(data))

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)
