"""Network geometry and long-term channel statistics.

Monitoring nodes (MNs) and untrusted transmitters (UTs) are dropped uniformly
on a ``D x D`` torus; each untrusted receiver (UR) lies in a disc around its
UT.  Large-scale gains follow a three-slope Hata-type path loss with
log-normal shadowing, and MMSE estimation variances are derived from them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .config import SystemConfig


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based generator for the sub-stream ``(seed, *keys)``.

    Philox streams keyed by a spawn key are independent of one another, so a
    task can rebuild its own stream without knowing how work was scheduled.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class NetworkGeometry:
    mn_positions: np.ndarray   # (M, 2) km
    ut_positions: np.ndarray   # (K, 2) km
    ur_positions: np.ndarray   # (K, 2) km
    area_side: float


@dataclass(frozen=True)
class ScenarioStatistics:
    """All long-term quantities the closed forms and the oracle consume.

    Index conventions: ``beta_obs[m, k]`` is MN m -> UT k, ``beta_jam[m, k]``
    is MN m -> UR k, ``beta_untrusted[l, k]`` is UT l -> UR k (the diagonal
    holds the monitored links) and ``beta_mn[m, i]`` is MN i -> MN m.
    """

    beta_obs: np.ndarray
    beta_jam: np.ndarray
    beta_untrusted: np.ndarray
    beta_mn: np.ndarray
    gamma_obs: np.ndarray
    gamma_jam: np.ndarray
    rho_t: float
    rho_j: float
    rho_ut: float
    num_antennas: int

    @property
    def num_mns(self) -> int:
        return self.beta_obs.shape[0]

    @property
    def num_pairs(self) -> int:
        return self.beta_obs.shape[1]

    def with_rho_j(self, rho_j: float) -> "ScenarioStatistics":
        return _replace(self, rho_j=float(rho_j))

    def subset(self, mns) -> "ScenarioStatistics":
        """Statistics restricted to the MNs in ``mns`` (order preserved)."""
        idx = np.asarray(mns, dtype=int)
        return _replace(
            self,
            beta_obs=self.beta_obs[idx],
            beta_jam=self.beta_jam[idx],
            gamma_obs=self.gamma_obs[idx],
            gamma_jam=self.gamma_jam[idx],
            beta_mn=self.beta_mn[np.ix_(idx, idx)],
        )

    def to_json(self) -> str:
        payload = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, np.ndarray):
                payload[f.name] = {"shape": list(value.shape), "data": value.ravel().tolist()}
            else:
                payload[f.name] = value
        return json.dumps({"format": "cfsurv.ScenarioStatistics/1", "fields": payload}, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "ScenarioStatistics":
        blob = json.loads(text)
        if blob.get("format") != "cfsurv.ScenarioStatistics/1":
            raise ValueError("not a serialized ScenarioStatistics table")
        kwargs = {}
        for name, value in blob["fields"].items():
            if isinstance(value, dict):
                kwargs[name] = np.asarray(value["data"], dtype=float).reshape(value["shape"])
            else:
                kwargs[name] = value
        return cls(**kwargs)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "ScenarioStatistics":
        return cls.from_json(Path(path).read_text())


def _replace(stats, **changes):
    values = {f.name: getattr(stats, f.name) for f in fields(stats)}
    values.update(changes)
    return type(stats)(**values)


def torus_distance(p, q, side: float) -> np.ndarray:
    """Minimum-image distance between points on a ``side x side`` torus.

    Broadcasts over leading axes; the last axis holds the two coordinates.
    """
    delta = np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float))
    delta = np.mod(delta, side)
    delta = np.minimum(delta, side - delta)
    return np.sqrt(np.sum(delta**2, axis=-1))


def place_network(config: SystemConfig, rng: np.random.Generator) -> NetworkGeometry:
    side = config.area_side
    mns = rng.uniform(0.0, side, size=(config.num_mns, 2))
    uts = rng.uniform(0.0, side, size=(config.num_pairs, 2))
    # uniform in the disc: sqrt on the radius
    radius_km = config.ur_radius / 1000.0
    r = radius_km * np.sqrt(rng.uniform(0.0, 1.0, size=config.num_pairs))
    phi = rng.uniform(0.0, 2.0 * np.pi, size=config.num_pairs)
    offsets = np.stack([r * np.cos(phi), r * np.sin(phi)], axis=-1)
    urs = np.mod(uts + offsets, side)
    # mod can return exactly `side` for tiny negative offsets
    urs[urs >= side] = 0.0
    return NetworkGeometry(mns, uts, urs, side)


def hata_constant(config: SystemConfig) -> float:
    lf = np.log10(config.carrier_freq)
    return (
        46.3
        + 33.9 * lf
        - 13.82 * np.log10(config.mn_height)
        - (1.1 * lf - 0.7) * config.user_height
        + (1.56 * lf - 0.8)
    )


def path_loss_db(d, config: SystemConfig) -> np.ndarray:
    """Three-slope path gain in dB (negative numbers); ``d`` in km."""
    d = np.asarray(d, dtype=float)
    L = hata_constant(config)
    d0, d1 = config.d0, config.d1
    # clip before log10 so d=0 stays finite; the inner region is flat anyway
    far = -L - 35.0 * np.log10(np.maximum(d, d1))
    mid = -L - 15.0 * np.log10(d1) - 20.0 * np.log10(np.clip(d, d0, d1))
    near = -L - 15.0 * np.log10(d1) - 20.0 * np.log10(d0)
    return np.where(d > d1, far, np.where(d > d0, mid, near))


def estimation_variance(beta, tau_t, rho_t):
    """MMSE estimate variance ``tau*rho*beta^2 / (tau*rho*beta + 1)``."""
    beta = np.asarray(beta, dtype=float)
    snr = tau_t * rho_t * beta
    return snr * beta / (snr + 1.0)


def _gains(dist, config, rng) -> np.ndarray:
    pl = path_loss_db(dist, config)
    shadow = config.shadow_std * rng.standard_normal(np.shape(dist))
    return 10.0 ** ((pl + shadow) / 10.0)


def build_statistics(
    geometry: NetworkGeometry, config: SystemConfig, rng: np.random.Generator
) -> ScenarioStatistics:
    side = geometry.area_side
    mn, ut, ur = geometry.mn_positions, geometry.ut_positions, geometry.ur_positions
    d_obs = torus_distance(mn[:, None, :], ut[None, :, :], side)
    d_jam = torus_distance(mn[:, None, :], ur[None, :, :], side)
    d_unt = torus_distance(ut[:, None, :], ur[None, :, :], side)
    d_mn = torus_distance(mn[:, None, :], mn[None, :, :], side)

    beta_obs = _gains(d_obs, config, rng)
    beta_jam = _gains(d_jam, config, rng)
    beta_unt = _gains(d_unt, config, rng)
    beta_mn = _gains(d_mn, config, rng)
    np.fill_diagonal(beta_mn, 0.0)

    rho_t = config.rho_t
    return ScenarioStatistics(
        beta_obs=beta_obs,
        beta_jam=beta_jam,
        beta_untrusted=beta_unt,
        beta_mn=beta_mn,
        gamma_obs=estimation_variance(beta_obs, config.tau_t, rho_t),
        gamma_jam=estimation_variance(beta_jam, config.tau_t, rho_t),
        rho_t=rho_t,
        rho_j=config.rho_j,
        rho_ut=config.rho_ut,
        num_antennas=config.antennas_per_mn,
    )


def make_scenario(config: SystemConfig, *keys: int):
    """Geometry and statistics for the drop identified by ``keys``."""
    rng = make_rng(config.rng_seed, *keys)
    geometry = place_network(config, rng)
    return geometry, build_statistics(geometry, config, rng)


@dataclass(frozen=True)
class ColocatedStatistics:
    """A single full-duplex array at one site, split into observe/jam halves.

    ``num_antennas`` is the per-half antenna count; ``si_gain`` plays the role
    of the inter-node gain between the two halves.
    """

    beta_obs: np.ndarray        # (K,)
    beta_jam: np.ndarray        # (K,)
    beta_untrusted: np.ndarray  # (K, K)
    gamma_obs: np.ndarray
    gamma_jam: np.ndarray
    si_gain: float
    rho_t: float
    rho_j: float
    rho_ut: float
    num_antennas: int

    @property
    def num_pairs(self) -> int:
        return self.beta_obs.shape[0]

    def as_cell_free(self) -> ScenarioStatistics:
        """Equivalent two-node cell-free system (node 0 observes, node 1 jams)."""
        bo = np.vstack([self.beta_obs, self.beta_obs])
        bj = np.vstack([self.beta_jam, self.beta_jam])
        go = np.vstack([self.gamma_obs, self.gamma_obs])
        gj = np.vstack([self.gamma_jam, self.gamma_jam])
        bmn = np.array([[0.0, self.si_gain], [self.si_gain, 0.0]])
        return ScenarioStatistics(
            beta_obs=bo, beta_jam=bj, beta_untrusted=self.beta_untrusted, beta_mn=bmn,
            gamma_obs=go, gamma_jam=gj, rho_t=self.rho_t, rho_j=self.rho_j,
            rho_ut=self.rho_ut, num_antennas=self.num_antennas,
        )


def build_colocated_statistics(
    geometry: NetworkGeometry,
    stats: ScenarioStatistics,
    config: SystemConfig,
    rng: np.random.Generator,
    *,
    si_gain: float | None = None,
    num_antennas: int | None = None,
) -> ColocatedStatistics:
    """Co-located baseline for the same untrusted pairs as ``stats``.

    The array sits at the centre of the torus (every site is equivalent on a
    torus).  By default each half gets ``N*M/2`` antennas.
    """
    side = geometry.area_side
    site = np.array([side / 2.0, side / 2.0])
    beta_obs = _gains(torus_distance(site, geometry.ut_positions, side), config, rng)
    beta_jam = _gains(torus_distance(site, geometry.ur_positions, side), config, rng)
    if num_antennas is None:
        num_antennas = config.antennas_per_mn * config.num_mns // 2
    return ColocatedStatistics(
        beta_obs=beta_obs,
        beta_jam=beta_jam,
        beta_untrusted=stats.beta_untrusted,
        gamma_obs=estimation_variance(beta_obs, config.tau_t, config.rho_t),
        gamma_jam=estimation_variance(beta_jam, config.tau_t, config.rho_t),
        si_gain=config.si_gain if si_gain is None else float(si_gain),
        rho_t=config.rho_t,
        rho_j=config.rho_j,
        rho_ut=config.rho_ut,
        num_antennas=int(num_antennas),
    )
