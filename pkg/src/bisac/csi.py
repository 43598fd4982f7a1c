"""LS channel estimation, CSI stacking and IFFT coarse timing."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import IllConditionedPilots, InvalidArgument
from .model import ComplexTensor, ScenarioConfig

GRAM_COND_LIMIT = 1e12
CSIS_MAGIC = b"CSIS"


@dataclass
class CsiStack:
    """Per-pair frequency responses, shape (N_t*N_r, N_P).

    Row ``t*N_r + r`` (0-based) holds receive antenna ``r`` / transmit
    antenna ``t``, i.e. each column is the column-major vec of H_n.
    """

    matrix: np.ndarray
    n_rx: int
    n_tx: int

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.n_rx * self.n_tx:
            raise InvalidArgument(
                f"stack has {self.matrix.shape[0]} rows, expected {self.n_rx * self.n_tx}"
            )

    @property
    def n_subcarriers(self) -> int:
        return self.matrix.shape[1]

    def unstack(self) -> np.ndarray:
        """Back to (N_P, N_r, N_t)."""
        return self.matrix.T.reshape(-1, self.n_tx, self.n_rx).transpose(0, 2, 1)


@dataclass
class PeakSnapshot:
    bin_index: int
    coarse_toa_s: float
    snapshot: np.ndarray
    est_num_targets: int = 1


class PeakDetection(NamedTuple):
    bins: list
    degraded: bool


def _gram_check(s: np.ndarray, n=None):
    gram = s @ s.conj().T
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > GRAM_COND_LIMIT:
        raise IllConditionedPilots(cond, n)
    return gram


def ls_channel_estimate(rx: ComplexTensor, pilots: ComplexTensor, subcarrier_index: int) -> np.ndarray:
    """Y_n S^H (S S^H)^-1 for 1-based subcarrier ``subcarrier_index``."""
    n = subcarrier_index - 1
    if not 0 <= n < rx.shape[0]:
        raise InvalidArgument(f"subcarrier index {subcarrier_index} out of range")
    y = rx.data[n].T  # N_r x K_P
    s = pilots.data[n].T  # N_t x K_P
    gram = _gram_check(s, subcarrier_index)
    # H S S^H = Y S^H  ->  gram^T H^T = (Y S^H)^T
    return np.linalg.solve(gram.T, (y @ s.conj().T).T).T


def ls_estimate_all(rx: ComplexTensor, pilots: ComplexTensor) -> np.ndarray:
    """LS estimates for every subcarrier, shape (N_P, N_r, N_t)."""
    s = np.transpose(pilots.data, (0, 2, 1))  # N_P x N_t x K_P
    y = np.transpose(rx.data, (0, 2, 1))  # N_P x N_r x K_P
    gram = s @ np.conj(np.transpose(s, (0, 2, 1)))
    conds = np.linalg.cond(gram)
    bad = np.flatnonzero(~np.isfinite(conds) | (conds > GRAM_COND_LIMIT))
    if bad.size:
        raise IllConditionedPilots(conds[bad[0]], int(bad[0]) + 1)
    rhs = y @ np.conj(np.transpose(s, (0, 2, 1)))
    sol = np.linalg.solve(np.transpose(gram, (0, 2, 1)), np.transpose(rhs, (0, 2, 1)))
    return np.transpose(sol, (0, 2, 1))


def stack_csi(estimates: Sequence[np.ndarray] | np.ndarray) -> CsiStack:
    est = np.asarray(estimates, dtype=complex)
    if est.ndim != 3:
        raise InvalidArgument("expected a sequence of N_r x N_t matrices")
    n_p, n_rx, n_tx = est.shape
    cols = np.transpose(est, (0, 2, 1)).reshape(n_p, n_rx * n_tx)
    return CsiStack(cols.T.copy(), n_rx, n_tx)


def ifft_rows(matrix) -> np.ndarray:
    """Row-wise inverse DFT with 1-based subcarrier phases.

    h[k] = (1/N_P) sum_{n=1}^{N_P} H[n] exp(+j 2 pi n k / N_P), k = 0..N_P-1,
    so a delay of exactly k bins lands on bin k with its full amplitude.
    """
    if isinstance(matrix, CsiStack):
        matrix = matrix.matrix
    matrix = np.atleast_2d(np.asarray(matrix, dtype=complex))
    n_p = matrix.shape[1]
    k = np.arange(n_p)
    return np.fft.ifft(matrix, axis=1) * np.exp(2j * np.pi * k / n_p)[None, :]


def bin_energy(time_domain: np.ndarray) -> np.ndarray:
    return np.sum(np.abs(time_domain) ** 2, axis=0)


def detect_peaks(time_domain: np.ndarray, q: int) -> PeakDetection:
    """The q strongest local maxima of the pair-aggregated energy, ascending."""
    energy = bin_energy(np.atleast_2d(time_domain))
    n_p = energy.size
    if not 1 <= q <= n_p:
        raise InvalidArgument(f"q={q} outside 1..{n_p}")
    left, right = np.roll(energy, 1), np.roll(energy, -1)
    # flat plateaus (e.g. all-zero rows) are not peaks
    is_max = (energy >= left) & (energy >= right) & ((energy > left) | (energy > right))
    maxima = np.flatnonzero(is_max)
    # stable sort keeps the lowest bin first on energy ties
    maxima = maxima[np.argsort(-energy[maxima], kind="stable")]
    if maxima.size >= q:
        return PeakDetection(sorted(int(b) for b in maxima[:q]), False)
    order = np.argsort(-energy, kind="stable")
    chosen = list(maxima)
    for b in order:
        if len(chosen) == q:
            break
        if b not in chosen:
            chosen.append(b)
    return PeakDetection(sorted(int(b) for b in chosen), True)


def snapshot_at_peak(
    stack: CsiStack, bin_index: int, config: ScenarioConfig, est_num_targets: int = 1,
    time_domain: np.ndarray | None = None,
) -> PeakSnapshot:
    """Reshape IFFT row ``bin_index`` into the N_r x N_t snapshot."""
    if not 0 <= bin_index < stack.n_subcarriers:
        raise InvalidArgument(f"bin {bin_index} outside 0..{stack.n_subcarriers - 1}")
    if time_domain is None:
        time_domain = ifft_rows(stack)
    col = time_domain[:, bin_index]
    snap = col.reshape(stack.n_tx, stack.n_rx).T.copy()
    toa = bin_index / (stack.n_subcarriers * config.subcarrier_spacing_hz)
    return PeakSnapshot(int(bin_index), toa, snap, int(est_num_targets))


def frontend(rx: ComplexTensor, pilots: ComplexTensor, config: ScenarioConfig):
    """LS estimate, stack and IFFT in one call; returns (stack, time_domain)."""
    stack = stack_csi(ls_estimate_all(rx, pilots))
    return stack, ifft_rows(stack)


def write_csi_stack(path, stack: CsiStack):
    rows, cols = stack.matrix.shape
    inter = np.empty((rows, cols, 2), dtype="<f8")
    inter[..., 0] = stack.matrix.real
    inter[..., 1] = stack.matrix.imag
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sII", CSIS_MAGIC, rows, cols))
        fh.write(inter.tobytes())


def read_csi_stack(path, n_rx: int) -> CsiStack:
    blob = Path(path).read_bytes()
    magic, rows, cols = struct.unpack_from("<4sII", blob)
    if magic != CSIS_MAGIC:
        raise InvalidArgument(f"bad magic {magic!r}")
    if rows % n_rx:
        raise InvalidArgument(f"{rows} rows is not a multiple of n_rx={n_rx}")
    data = np.frombuffer(blob, dtype="<f8", offset=12, count=rows * cols * 2)
    data = data.reshape(rows, cols, 2)
    return CsiStack(data[..., 0] + 1j * data[..., 1], n_rx, rows // n_rx)
