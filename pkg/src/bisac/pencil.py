"""Hankel matrix-pencil joint AoA/AoD estimator.

The snapshot at a coarse-timing peak is folded into a block-Hankel matrix,
split into two overlapping column sets shifted by one transmit sub-array, and
the shift eigenvalues of a rank-q truncated pencil give the AoDs. A
least-squares fit against the estimated transmit manifold followed by a
linear fit of the unwrapped receive phases gives the paired AoAs.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .csi import detect_peaks, frontend, snapshot_at_peak
from .errors import DegenerateAoD, InvalidPencilConfig, RankDeficient, ZeroEnergyTarget
from .model import ComplexTensor, ScenarioConfig, steering_matrix

RANK_TOL = 1e-12
AOD_GRAM_COND_LIMIT = 1e10


def default_subarray(n: int) -> int:
    """Sub-array size floor(N/2), at least 1."""
    return max(1, n // 2)


@dataclass(frozen=True)
class PencilConfig:
    n_tx: int
    n_rx: int
    m_tx: int
    m_rx: int
    num_targets: int = 1
    cordic_iters: int = 16

    def __post_init__(self):
        if not 1 <= self.m_tx <= self.n_tx or not 1 <= self.m_rx <= self.n_rx:
            raise InvalidPencilConfig(
                f"sub-array sizes ({self.m_tx}, {self.m_rx}) outside 1..({self.n_tx}, {self.n_rx})"
            )
        if self.k_tx < 2:
            raise InvalidPencilConfig(f"K_t = {self.k_tx} < 2 leaves no shifted sub-array")
        q = self.num_targets
        if q < 0 or (q > 0 and min(self.m_rx * self.m_tx, self.k_rx * (self.k_tx - 1)) < q):
            raise InvalidPencilConfig(f"q={q} not identifiable with {self}")

    @property
    def k_tx(self) -> int:
        return self.n_tx - self.m_tx + 1

    @property
    def k_rx(self) -> int:
        return self.n_rx - self.m_rx + 1

    @classmethod
    def default(cls, n_tx: int, n_rx: int, num_targets: int = 1, **kw) -> "PencilConfig":
        return cls(n_tx, n_rx, default_subarray(n_tx), default_subarray(n_rx), num_targets, **kw)

    @classmethod
    def for_scenario(cls, config: ScenarioConfig, num_targets: int = 1, **kw) -> "PencilConfig":
        return cls.default(config.n_tx, config.n_rx, num_targets, **kw)

    def with_targets(self, q: int) -> "PencilConfig":
        return PencilConfig(self.n_tx, self.n_rx, self.m_tx, self.m_rx, q, self.cordic_iters)


@dataclass
class EstimateSet:
    aod_rad: np.ndarray
    aoa_rad: np.ndarray
    gain_mag: np.ndarray
    phase_intercept: np.ndarray
    out_of_range: np.ndarray = field(default=None)
    peak_bin: int = -1

    def __post_init__(self):
        self.aod_rad = np.atleast_1d(np.asarray(self.aod_rad, dtype=float))
        self.aoa_rad = np.atleast_1d(np.asarray(self.aoa_rad, dtype=float))
        self.gain_mag = np.atleast_1d(np.asarray(self.gain_mag, dtype=float))
        self.phase_intercept = np.atleast_1d(np.asarray(self.phase_intercept, dtype=float))
        if self.out_of_range is None:
            self.out_of_range = np.zeros(self.aod_rad.size, dtype=bool)

    def __len__(self):
        return self.aod_rad.size

    def sorted_by_aoa(self) -> "EstimateSet":
        order = np.lexsort((self.aod_rad, self.aoa_rad))
        return EstimateSet(
            self.aod_rad[order], self.aoa_rad[order], self.gain_mag[order],
            self.phase_intercept[order], self.out_of_range[order], self.peak_bin,
        )

    @classmethod
    def concat(cls, sets: Sequence["EstimateSet"]) -> "EstimateSet":
        if not sets:
            return cls([], [], [], [])
        return cls(
            np.concatenate([s.aod_rad for s in sets]),
            np.concatenate([s.aoa_rad for s in sets]),
            np.concatenate([s.gain_mag for s in sets]),
            np.concatenate([s.phase_intercept for s in sets]),
            np.concatenate([s.out_of_range for s in sets]),
        )


CSV_COLUMNS = ["trial", "peak_bin", "target_idx", "aoa_deg", "aod_deg", "gain_mag", "delta_rad"]


def write_estimates_csv(path, rows: Sequence[tuple[int, EstimateSet]]):
    """rows: (trial index, estimate set) pairs."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for trial, est in rows:
            for i in range(len(est)):
                w.writerow([
                    trial, est.peak_bin, i,
                    repr(math.degrees(est.aoa_rad[i])), repr(math.degrees(est.aod_rad[i])),
                    repr(float(est.gain_mag[i])), repr(float(est.phase_intercept[i])),
                ])


def build_block_hankel(snapshot: np.ndarray, pc: PencilConfig) -> np.ndarray:
    """Block-Hankel matrix of shape (M_r*M_t, K_r*K_t).

    Block (j, l) is the M_r x K_r Hankel matrix of transmit column j + l,
    with entry (m, n) = snapshot[m + n, j + l] (0-based).
    """
    snapshot = np.asarray(snapshot)
    if snapshot.shape != (pc.n_rx, pc.n_tx):
        raise InvalidPencilConfig(f"snapshot shape {snapshot.shape} != ({pc.n_rx}, {pc.n_tx})")
    m = np.arange(pc.m_rx)[:, None]
    n = np.arange(pc.k_rx)[None, :]
    hankels = snapshot[m + n, :]  # M_r x K_r x N_t
    out = np.empty((pc.m_rx * pc.m_tx, pc.k_rx * pc.k_tx), dtype=complex)
    for j in range(pc.m_tx):
        for l in range(pc.k_tx):
            out[j * pc.m_rx:(j + 1) * pc.m_rx, l * pc.k_rx:(l + 1) * pc.k_rx] = hankels[:, :, j + l]
    return out


def split_overlap(hankel: np.ndarray, pc: PencilConfig) -> tuple[np.ndarray, np.ndarray]:
    """Columns [0, K_r(K_t-1)) and [K_r, K_r K_t)."""
    width = pc.k_rx * (pc.k_tx - 1)
    return hankel[:, :width], hankel[:, pc.k_rx:pc.k_rx + width]


def pencil_matrix(h1: np.ndarray, h2: np.ndarray, q: int) -> np.ndarray:
    """T = S^-1 U^H H2 V from the rank-q truncated SVD of H1."""
    u, s, vh = np.linalg.svd(h1, full_matrices=False)
    if q > s.size or s[0] == 0 or s[q - 1] / s[0] < RANK_TOL:
        raise RankDeficient(f"sigma_q/sigma_1 below {RANK_TOL:g}: fewer than {q} resolvable targets")
    u_q = u[:, :q]
    v_q = vh[:q].conj().T
    return (u_q.conj().T @ h2 @ v_q) / s[:q, None]


def aod_from_eigenvalues(eigs, element_spacing_wavelengths: float) -> tuple[np.ndarray, np.ndarray]:
    """-asin(arg(gamma) / (2 pi d)); returns (angles, clamped flags)."""
    x = np.angle(np.atleast_1d(eigs)) / (2 * np.pi * element_spacing_wavelengths)
    flags = np.abs(x) > 1
    return -np.arcsin(np.clip(x, -1.0, 1.0)), flags


def ls_fit_aoa_manifold(snapshot: np.ndarray, aod_estimates, element_spacing_tx: float) -> np.ndarray:
    """X = H A_t^* (A_t^T A_t^*)^-1, shape (N_r, q)."""
    a_t = steering_matrix(aod_estimates, snapshot.shape[1], element_spacing_tx)
    gram = a_t.T @ a_t.conj()
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > AOD_GRAM_COND_LIMIT:
        raise DegenerateAoD(f"transmit manifold Gram condition number {cond:.3e}")
    # X gram = H A_t^*  ->  gram^T X^T = (H A_t^*)^T
    return np.linalg.solve(gram.T, (snapshot @ a_t.conj()).T).T


def normalize_columns(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unit-norm columns and |alpha| = ||column|| / sqrt(N_r)."""
    norms = np.linalg.norm(x, axis=0)
    if np.any(norms == 0):
        raise ZeroEnergyTarget(f"zero-energy column(s) {np.flatnonzero(norms == 0).tolist()}")
    return x / norms, norms / math.sqrt(x.shape[0])


def aoa_phase_regression(unit_vector: np.ndarray, element_spacing_rx: float) -> tuple[float, float, bool]:
    """Line fit of unwrapped phases against element numbers 1..N_r.

    Returns (aoa, raw intercept, clamped flag).
    """
    a = np.asarray(unit_vector)
    n_r = a.size
    if n_r < 2:
        raise ValueError("phase regression needs at least two receive elements")
    phase = np.unwrap(np.angle(a))
    design = np.column_stack([np.arange(1, n_r + 1), np.ones(n_r)])
    slope, intercept = np.linalg.pinv(design) @ phase
    x = -slope / (2 * np.pi * element_spacing_rx)
    flag = abs(x) > 1
    return float(np.arcsin(np.clip(x, -1.0, 1.0))), float(intercept), bool(flag)


def estimate_2d(snapshot: np.ndarray, pc: PencilConfig, scenario: ScenarioConfig) -> EstimateSet:
    q = pc.num_targets
    h1, h2 = split_overlap(build_block_hankel(snapshot, pc), pc)
    gammas = np.linalg.eigvals(pencil_matrix(h1, h2, q))
    aods, aod_flags = aod_from_eigenvalues(gammas, scenario.element_spacing_tx)
    x = ls_fit_aoa_manifold(snapshot, aods, scenario.element_spacing_tx)
    units, mags = normalize_columns(x)
    aoas = np.empty(q)
    deltas = np.empty(q)
    flags = aod_flags.copy()
    for i in range(q):
        aoas[i], deltas[i], f = aoa_phase_regression(units[:, i], scenario.element_spacing_rx)
        flags[i] |= f
    return EstimateSet(aods, aoas, mags, deltas, flags)


def sense(
    rx: ComplexTensor,
    pilots: ComplexTensor,
    config: ScenarioConfig,
    num_peaks: int,
    targets_per_peak: Sequence[int] | int = 1,
    pencil: PencilConfig | None = None,
) -> list[EstimateSet]:
    """Full chain: LS estimate, coarse timing, then the pencil per peak."""
    stack, td = frontend(rx, pilots, config)
    bins = detect_peaks(td, num_peaks).bins
    if isinstance(targets_per_peak, int):
        targets_per_peak = [targets_per_peak] * len(bins)
    out = []
    for b, p in zip(bins, targets_per_peak):
        snap = snapshot_at_peak(stack, b, config, p, time_domain=td)
        pc = (pencil or PencilConfig.for_scenario(config)).with_targets(p)
        est = estimate_2d(snap.snapshot, pc, config)
        est.peak_bin = b
        out.append(est)
    return out
