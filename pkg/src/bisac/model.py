"""Scenario types and the frequency-domain bistatic channel simulator.

Conventions shared by every module:

* Steering vectors carry the phase ``exp(-j 2 pi n d sin(angle))`` for
  element ``n = 0 .. N-1`` with ``d`` the spacing in wavelengths.
* Subcarriers are indexed ``n = 1 .. N_P`` and a delay ``tau`` contributes
  ``exp(-j 2 pi n df tau)`` on subcarrier ``n``.
* ``noise_var`` is the total complex noise variance per sample.
* Angles are radians internally; degrees appear only in files and on the CLI.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import IllConditionedPilots, InvalidArgument

BANDWIDTH_HZ = 61.44e6
QPSK = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2.0)
PILOT_COND_LIMIT = 1e6


def derive_rng(seed: int, trial: int = 0, purpose: str = "") -> np.random.Generator:
    """Independent generator for a (seed, trial, purpose) triple."""
    tag = zlib.crc32(purpose.encode())
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(trial), tag]))


@dataclass(frozen=True)
class RadiationPattern:
    kind: str = "isotropic"
    gain: float = 1.0
    boresight_rad: float = 0.0
    beamwidth: float = 1.0

    def __post_init__(self):
        if self.kind not in ("isotropic", "gaussian"):
            raise InvalidArgument(f"unknown pattern kind {self.kind!r}")
        if not self.gain > 0:
            raise InvalidArgument("pattern gain must be positive")
        if self.kind == "gaussian" and not self.beamwidth > 0:
            raise InvalidArgument("gaussian beamwidth must be positive")

    @classmethod
    def gaussian(cls, beamwidth, gain=1.0, boresight_rad=0.0):
        return cls("gaussian", float(gain), float(boresight_rad), float(beamwidth))


ISOTROPIC = RadiationPattern()


@dataclass(frozen=True)
class ScenarioConfig:
    n_tx: int = 8
    n_rx: int = 10
    n_subcarriers: int = 64
    n_symbols: int = 10
    subcarrier_spacing_hz: float = BANDWIDTH_HZ / 64
    element_spacing_tx: float = 0.5
    element_spacing_rx: float = 0.5
    noise_var: float = 0.0
    tx_pattern: RadiationPattern = ISOTROPIC
    rx_pattern: RadiationPattern = ISOTROPIC
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_tx < 1 or self.n_rx < 1 or self.n_subcarriers < 1:
            raise InvalidArgument("array sizes and subcarrier count must be >= 1")
        if self.n_symbols < self.n_tx:
            raise InvalidArgument(
                f"n_symbols={self.n_symbols} < n_tx={self.n_tx}: pilot Gram matrix is singular"
            )
        if not self.subcarrier_spacing_hz > 0:
            raise InvalidArgument("subcarrier spacing must be positive")
        if self.element_spacing_tx <= 0 or self.element_spacing_rx <= 0:
            raise InvalidArgument("element spacing must be positive")
        if self.noise_var < 0:
            raise InvalidArgument("noise variance must be non-negative")

    @property
    def bin_duration_s(self) -> float:
        """Delay resolution of one IFFT bin, 1/(N_P df)."""
        return 1.0 / (self.n_subcarriers * self.subcarrier_spacing_hz)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        """JSON-ready dict; pattern boresights in degrees."""
        out = dataclasses.asdict(self)
        for key in ("tx_pattern", "rx_pattern"):
            pat = out[key]
            pat["boresight_deg"] = math.degrees(pat.pop("boresight_rad"))
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        data = dict(data)
        data.pop("targets", None)
        for key in ("tx_pattern", "rx_pattern"):
            if key in data:
                pat = dict(data[key])
                if "boresight_deg" in pat:
                    pat["boresight_rad"] = math.radians(pat.pop("boresight_deg"))
                data[key] = RadiationPattern(**pat)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise InvalidArgument(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**data)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class TargetPath:
    aoa_rad: float
    aod_rad: float
    delay_s: float = 0.0
    gain: complex = 1.0 + 0.0j

    def __post_init__(self):
        for name in ("aoa_rad", "aod_rad", "delay_s"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidArgument(f"{name} must be finite")
        if abs(self.aoa_rad) >= math.pi / 2 or abs(self.aod_rad) >= math.pi / 2:
            raise InvalidArgument("angles must lie strictly inside (-pi/2, pi/2)")
        if self.delay_s < 0:
            raise InvalidArgument("delay must be non-negative")

    def composite_gain(self, config: ScenarioConfig) -> complex:
        """alpha * g_t(aod) * g_r(aoa)."""
        return (
            complex(self.gain)
            * radiation_gain(config.tx_pattern, self.aod_rad)
            * radiation_gain(config.rx_pattern, self.aoa_rad)
        )

    def to_dict(self) -> dict:
        g = complex(self.gain)
        return {
            "aoa_deg": math.degrees(self.aoa_rad),
            "aod_deg": math.degrees(self.aod_rad),
            "delay_s": self.delay_s,
            "gain": [g.real, g.imag],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TargetPath":
        gain = data.get("gain", [1.0, 0.0])
        if isinstance(gain, (list, tuple)):
            gain = complex(gain[0], gain[1])
        return cls(
            math.radians(data["aoa_deg"]),
            math.radians(data["aod_deg"]),
            float(data.get("delay_s", 0.0)),
            complex(gain),
        )


@dataclass
class ComplexTensor:
    """Dense complex array with named dimensions, last dimension fastest."""

    dims: tuple
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.dims = tuple(self.dims)
        self.data = np.asarray(self.data, dtype=complex)
        if len(set(self.dims)) != len(self.dims):
            raise InvalidArgument(f"duplicate dimension names in {self.dims}")
        if self.data.ndim != len(self.dims):
            raise InvalidArgument(f"{len(self.dims)} names for a {self.data.ndim}-d array")

    @property
    def shape(self):
        return self.data.shape

    def extent(self, name: str) -> int:
        return self.data.shape[self.dims.index(name)]

    def flat(self) -> np.ndarray:
        return self.data.reshape(-1)


def load_scenario(path) -> tuple[ScenarioConfig, list[TargetPath]]:
    data = json.loads(Path(path).read_text())
    targets = [TargetPath.from_dict(t) for t in data.get("targets", [])]
    return ScenarioConfig.from_dict(data), targets


def save_scenario(path, config: ScenarioConfig, targets: Sequence[TargetPath] = ()):
    data = config.to_dict()
    if targets:
        data["targets"] = [t.to_dict() for t in targets]
    Path(path).write_text(json.dumps(data, indent=2))


def steering_vector(angle_rad, n_elems: int, spacing_wavelengths: float) -> np.ndarray:
    if not np.isfinite(angle_rad):
        raise InvalidArgument("steering angle must be finite")
    if n_elems < 1 or spacing_wavelengths <= 0:
        raise InvalidArgument("need n_elems >= 1 and positive spacing")
    n = np.arange(n_elems)
    return np.exp(-2j * np.pi * n * spacing_wavelengths * np.sin(angle_rad))


def steering_matrix(angles, n_elems: int, spacing_wavelengths: float) -> np.ndarray:
    """Columns are steering vectors, shape (n_elems, len(angles))."""
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    n = np.arange(n_elems)[:, None]
    return np.exp(-2j * np.pi * n * spacing_wavelengths * np.sin(angles)[None, :])


def wrap_angle(x):
    """mod_2pi(x + pi) - pi."""
    return np.mod(np.asarray(x, dtype=float) + np.pi, 2 * np.pi) - np.pi


def radiation_gain(pattern: RadiationPattern, angle_rad) -> complex:
    if pattern.kind == "isotropic":
        return 1.0 + 0.0j
    off = wrap_angle(angle_rad - pattern.boresight_rad)
    return complex(pattern.gain * np.exp(-(off**2) / pattern.beamwidth**2))


def _check_delays(config: ScenarioConfig, targets: Sequence[TargetPath]):
    if not targets:
        raise InvalidArgument("at least one target is required")
    limit = 1.0 / config.subcarrier_spacing_hz
    for t in targets:
        if t.delay_s >= limit:
            raise InvalidArgument(f"delay {t.delay_s:g}s >= 1/df = {limit:g}s")


def delay_phasors(config: ScenarioConfig, delays) -> np.ndarray:
    """c_n(tau) for n = 1..N_P, shape (N_P, len(delays))."""
    n = np.arange(1, config.n_subcarriers + 1)[:, None]
    tau = np.atleast_1d(np.asarray(delays, dtype=float))[None, :]
    return np.exp(-2j * np.pi * n * config.subcarrier_spacing_hz * tau)


def channel_tensor(config: ScenarioConfig, targets: Sequence[TargetPath]) -> np.ndarray:
    """All H_n stacked, shape (N_P, N_r, N_t); entry [n-1] is H_n."""
    _check_delays(config, targets)
    a_r = steering_matrix([t.aoa_rad for t in targets], config.n_rx, config.element_spacing_rx)
    a_t = steering_matrix([t.aod_rad for t in targets], config.n_tx, config.element_spacing_tx)
    g = np.array([t.composite_gain(config) for t in targets])
    c = delay_phasors(config, [t.delay_s for t in targets])
    return np.einsum("rq,nq,tq->nrt", a_r, c * g[None, :], a_t)


def channel_matrix(config: ScenarioConfig, targets: Sequence[TargetPath], subcarrier_index: int) -> np.ndarray:
    """H_n for 1-based subcarrier index n."""
    if not 1 <= subcarrier_index <= config.n_subcarriers:
        raise InvalidArgument(f"subcarrier index {subcarrier_index} outside 1..{config.n_subcarriers}")
    _check_delays(config, targets)
    h = np.zeros((config.n_rx, config.n_tx), dtype=complex)
    for t in targets:
        c = np.exp(-2j * np.pi * subcarrier_index * config.subcarrier_spacing_hz * t.delay_s)
        a_r = steering_vector(t.aoa_rad, config.n_rx, config.element_spacing_rx)
        a_t = steering_vector(t.aod_rad, config.n_tx, config.element_spacing_tx)
        h += t.composite_gain(config) * c * np.outer(a_r, a_t)
    return h


def generate_pilots(config: ScenarioConfig, rng: np.random.Generator | None = None) -> ComplexTensor:
    """Random unit-power QPSK pilots, shape (N_P, K_P, N_t)."""
    if config.n_symbols < config.n_tx:
        raise InvalidArgument("K_P < N_t makes the pilot Gram matrix singular")
    if rng is None:
        rng = derive_rng(config.rng_seed, 0, "pilots")
    shape = (config.n_subcarriers, config.n_symbols, config.n_tx)
    s = QPSK[rng.integers(0, 4, size=shape)]
    for n in range(config.n_subcarriers):
        for _ in range(100):
            block = s[n].T
            if np.linalg.cond(block @ block.conj().T) <= PILOT_COND_LIMIT:
                break
            s[n] = QPSK[rng.integers(0, 4, size=shape[1:])]
        else:
            raise IllConditionedPilots(np.linalg.cond(block @ block.conj().T), n + 1)
    return ComplexTensor(("subcarrier", "symbol", "tx"), s)


def noiseless_rx(config: ScenarioConfig, targets: Sequence[TargetPath], pilots: ComplexTensor) -> np.ndarray:
    h = channel_tensor(config, targets)
    return np.einsum("nrt,nkt->nkr", h, pilots.data)


def simulate_rx(
    config: ScenarioConfig,
    targets: Sequence[TargetPath],
    pilots: ComplexTensor,
    rng: np.random.Generator | None = None,
) -> ComplexTensor:
    """y_{n,k} = H_n s_{n,k} + w_{n,k}, shape (N_P, K_P, N_r)."""
    expected = (config.n_subcarriers, config.n_symbols, config.n_tx)
    if pilots.shape != expected:
        raise InvalidArgument(f"pilot shape {pilots.shape} does not match config {expected}")
    y = noiseless_rx(config, targets, pilots)
    if config.noise_var > 0:
        if rng is None:
            rng = derive_rng(config.rng_seed, 0, "noise")
        y = y + complex_noise(rng, y.shape, config.noise_var)
    return ComplexTensor(("subcarrier", "symbol", "rx"), y)


def complex_noise(rng: np.random.Generator, shape, variance: float) -> np.ndarray:
    scale = math.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def signal_power(config: ScenarioConfig, targets: Sequence[TargetPath], reference: str = "actual") -> float:
    """Mean received power per receive antenna per subcarrier for unit-power pilots.

    ``reference="isotropic"`` evaluates the power with both radiation patterns
    replaced by isotropic ones, so that a pattern changes the SNR a target sees.
    """
    if reference == "isotropic":
        config = config.replace(tx_pattern=ISOTROPIC, rx_pattern=ISOTROPIC)
    elif reference != "actual":
        raise InvalidArgument(f"unknown power reference {reference!r}")
    h = channel_tensor(config, targets)
    return float(np.mean(np.sum(np.abs(h) ** 2, axis=(1, 2))) / config.n_rx)


def noise_var_for_snr(config, targets, snr_db: float, reference: str = "actual") -> float:
    return signal_power(config, targets, reference) / 10 ** (snr_db / 10)
