"""Fisher information and Cramer-Rao bounds for the joint AoA/AoD model.

Parameter order is [noise variance, AoAs, AoDs, delays, Re(gains), Im(gains)]
where the gains are the composite ones (path gain times both radiation
patterns). Every block is (2/sigma^2) sum_{n,k} Re(s^H M_a^H M_b s) with the
derivative matrices M listed in :func:`derivative_matrices`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import InvalidArgument, UnidentifiableScenario
from .model import ComplexTensor, ScenarioConfig, TargetPath, delay_phasors, steering_matrix

FIM_COND_LIMIT = 1e12
BLOCK_NAMES = ("theta", "phi", "tau", "re_gain", "im_gain")


def steering_derivative(angle, n_elems: int, spacing: float) -> np.ndarray:
    """d a(angle) / d angle for the shared steering convention."""
    n = np.arange(n_elems)
    a = np.exp(-2j * np.pi * n * spacing * np.sin(angle))
    return (-2j * np.pi * n * spacing * np.cos(angle)) * a


@dataclass
class FisherMatrix:
    matrix: np.ndarray
    q: int
    labels: list = field(default_factory=list)

    def block(self, a: str, b: str) -> np.ndarray:
        names = ("sigma2",) + BLOCK_NAMES
        sl = {names[0]: slice(0, 1)}
        for i, nm in enumerate(BLOCK_NAMES):
            sl[nm] = slice(1 + i * self.q, 1 + (i + 1) * self.q)
        return self.matrix[sl[a], sl[b]]


def derivative_matrices(config: ScenarioConfig, targets: Sequence[TargetPath]) -> np.ndarray:
    """d H_n / d xi for every non-noise parameter, shape (5q, N_P, N_r, N_t)."""
    q = len(targets)
    theta = np.array([t.aoa_rad for t in targets])
    phi = np.array([t.aod_rad for t in targets])
    tau = np.array([t.delay_s for t in targets])
    g = np.array([t.composite_gain(config) for t in targets])
    a_r = steering_matrix(theta, config.n_rx, config.element_spacing_rx)
    a_t = steering_matrix(phi, config.n_tx, config.element_spacing_tx)
    d_r = np.stack([steering_derivative(x, config.n_rx, config.element_spacing_rx) for x in theta], 1)
    d_t = np.stack([steering_derivative(x, config.n_tx, config.element_spacing_tx) for x in phi], 1)
    c = delay_phasors(config, tau)  # N_P x q
    n = np.arange(1, config.n_subcarriers + 1)[:, None]
    dc = (-2j * np.pi * n * config.subcarrier_spacing_hz) * c

    xi = np.einsum("rq,tq->qrt", a_r, a_t)
    xi_r = np.einsum("rq,tq->qrt", d_r, a_t)
    xi_t = np.einsum("rq,tq->qrt", a_r, d_t)
    out = np.empty((5 * q, config.n_subcarriers, config.n_rx, config.n_tx), dtype=complex)
    out[0:q] = np.einsum("nq,qrt->qnrt", g * c, xi_r)
    out[q:2 * q] = np.einsum("nq,qrt->qnrt", g * c, xi_t)
    out[2 * q:3 * q] = np.einsum("nq,qrt->qnrt", g * dc, xi)
    out[3 * q:4 * q] = np.einsum("nq,qrt->qnrt", c, xi)
    out[4 * q:5 * q] = 1j * out[3 * q:4 * q]
    return out


def fim_assemble(config: ScenarioConfig, targets: Sequence[TargetPath], pilots: ComplexTensor) -> FisherMatrix:
    sigma2 = config.noise_var
    if not sigma2 > 0:
        raise InvalidArgument("the FIM needs a positive noise variance")
    q = len(targets)
    mats = derivative_matrices(config, targets)
    # v[p, n, k, r] = M_{p,n} s_{n,k}
    v = np.einsum("pnrt,nkt->pnkr", mats, pilots.data)
    flat = v.reshape(5 * q, -1)
    core = (2.0 / sigma2) * np.real(flat.conj() @ flat.T)
    gamma = np.zeros((1 + 5 * q, 1 + 5 * q))
    gamma[0, 0] = config.n_rx * config.n_subcarriers * config.n_symbols / sigma2**2
    gamma[1:, 1:] = 0.5 * (core + core.T)
    labels = ["sigma2"] + [f"{nm}[{i}]" for nm in BLOCK_NAMES for i in range(q)]
    return FisherMatrix(gamma, q, labels)


def invert_fim(fisher: FisherMatrix) -> np.ndarray:
    """Inverse via symmetric-indefinite solve on the diagonally equilibrated matrix."""
    g = fisher.matrix
    d = np.sqrt(np.abs(np.diag(g)))
    if np.any(d == 0):
        raise UnidentifiableScenario("a parameter carries zero Fisher information")
    scaled = g / np.outer(d, d)
    cond = np.linalg.cond(scaled)
    if not np.isfinite(cond) or cond > FIM_COND_LIMIT:
        raise UnidentifiableScenario(f"FIM condition number {cond:.3e}")
    inv = scipy.linalg.solve(scaled, np.eye(g.shape[0]), assume_a="sym")
    return inv / np.outer(d, d)


def crb_angles(fisher: FisherMatrix) -> tuple[np.ndarray, np.ndarray]:
    """(CRB(Theta), CRB(Phi)), each q x q in rad^2."""
    inv = invert_fim(fisher)
    q = fisher.q
    return inv[1:q + 1, 1:q + 1], inv[q + 1:2 * q + 1, q + 1:2 * q + 1]


def crb_for(config: ScenarioConfig, targets: Sequence[TargetPath], pilots: ComplexTensor):
    """Diagonals of CRB(Theta), CRB(Phi) as 1-d arrays."""
    ct, cp = crb_angles(fim_assemble(config, targets, pilots))
    return np.diag(ct).copy(), np.diag(cp).copy()
