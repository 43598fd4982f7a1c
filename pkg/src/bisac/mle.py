"""Grid-search maximum-likelihood oracle.

The criterion is the residual energy sum_{n,k} ||y_{n,k} - H_n s_{n,k}||^2
over hypotheses (Theta, Phi, tau) on a grid. Gains are either fixed to known
values, solved in closed form by inner least squares, or searched on a grid
of complex values. Desk scale only.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import GridTooLarge, InvalidArgument
from .model import ComplexTensor, ScenarioConfig, delay_phasors, steering_matrix
from .pencil import EstimateSet

GRID_BUDGET = 10**7
_CHUNK = 200_000
_TABLE_LIMIT = 4_000_000


@dataclass
class GridSpec:
    theta: np.ndarray
    phi: np.ndarray
    tau: np.ndarray | None = None
    gain_values: np.ndarray | None = None
    known_delays: np.ndarray | None = None
    known_gains: np.ndarray | None = None

    def __post_init__(self):
        self.theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        self.phi = np.atleast_1d(np.asarray(self.phi, dtype=float))
        if self.theta.size < 1 or self.phi.size < 1:
            raise InvalidArgument("angle grids must be non-empty")
        if self.tau is None and self.known_delays is None:
            raise InvalidArgument("need a delay grid or known delays")

    @classmethod
    def uniform(cls, step_deg: float = 1.0, lo_deg: float = -90.0, hi_deg: float = 90.0, **kw) -> "GridSpec":
        g = np.radians(np.arange(lo_deg, hi_deg, step_deg))
        return cls(g, g.copy(), **kw)

    @property
    def step_rad(self) -> float:
        return float(np.min(np.diff(self.theta))) if self.theta.size > 1 else 0.0

    def sizes(self) -> tuple[int, int, int, int]:
        """(G_theta, G_phi, G_tau, G_alpha); fixed parameters count as 1."""
        g_tau = 1 if self.known_delays is not None else len(self.tau)
        g_alpha = 1 if self.gain_values is None else len(self.gain_values)
        return self.theta.size, self.phi.size, g_tau, g_alpha

    def total_points(self, q: int) -> int:
        gt, gp, gtau, ga = self.sizes()
        return (gt * gp * gtau) ** q * ga ** (2 * q)


def mle_grid_cost(grid: GridSpec | tuple, config: ScenarioConfig, q: int) -> int:
    """Literal operation count of an exhaustive search, as an exact integer.

    ``grid`` may be a GridSpec or a (G_theta, G_phi, G_tau, G_alpha) tuple.
    """
    gt, gp, gtau, ga = grid.sizes() if isinstance(grid, GridSpec) else grid
    nr, nt, npc, kp = config.n_rx, config.n_tx, config.n_subcarriers, config.n_symbols
    bracket = nr * npc * q * q * npc**3 * nt + nr * npc**2 * npc * kp
    return gtau**q * gt**q * gp**q * ga ** (2 * q) * bracket


class _Stats:
    """Sufficient statistics of the data for single-path hypotheses."""

    def __init__(self, rx: ComplexTensor, pilots: ComplexTensor, config: ScenarioConfig, grid: GridSpec, q: int):
        y = rx.data  # N_P x K_P x N_r
        s = pilots.data  # N_P x K_P x N_t
        self.energy = float(np.sum(np.abs(y) ** 2))
        a_r = steering_matrix(grid.theta, config.n_rx, config.element_spacing_rx)
        a_t = steering_matrix(grid.phi, config.n_tx, config.element_spacing_tx)
        # Q_n = sum_k y s^H ;  R_n = sum_k s^* s^T
        qn = np.einsum("nkr,nkt->nrt", y, s.conj())
        rn = np.einsum("nkt,nku->ntu", s.conj(), s)
        self.b = np.einsum("ra,nrt,tb->nab", a_r.conj(), qn, a_t.conj(), optimize=True)
        self.ar_gram = a_r.conj().T @ a_r
        self.at_r = np.einsum("ta,ntu,ub->nab", a_t.conj(), rn, a_t, optimize=True)
        self.shape = (grid.theta.size, grid.phi.size)
        self.config = config


def _proj(stats: _Stats, c: np.ndarray) -> np.ndarray:
    """b_h^H y for every (theta, phi) and delay column of c, shape (G_tau, G_t, G_p)."""
    return np.einsum("nd,nab->dab", c.conj(), stats.b, optimize=True)


def mle_grid_search(
    rx: ComplexTensor,
    pilots: ComplexTensor,
    config: ScenarioConfig,
    grid: GridSpec,
    q: int,
    budget: int = GRID_BUDGET,
) -> EstimateSet:
    """Grid point minimizing the residual; ties go to the lowest linear index."""
    if q < 1:
        raise InvalidArgument("q must be >= 1")
    total = grid.total_points(q)
    if total > budget:
        raise GridTooLarge(total, budget)
    stats = _Stats(rx, pilots, config, grid, q)
    taus = np.asarray(grid.known_delays if grid.known_delays is not None else grid.tau, dtype=float)
    per_target_tau = grid.known_delays is not None
    if per_target_tau and taus.size != q:
        raise InvalidArgument("need one known delay per target")
    c = delay_phasors(config, taus)  # N_P x G_tau (or q)
    p = _proj(stats, c)  # G_tau x G_t x G_p
    gt, gp = stats.shape
    n_single = gt * gp

    # hypothesis h -> (delay column, theta idx, phi idx), h = d*n_single + t*gp + f
    gains_fixed = grid.known_gains is not None or grid.gain_values is not None
    if per_target_tau and np.all(taus == taus[0]) and not gains_fixed:
        c = c[:, :1]
        p = p[:1]
        per_target_tau = False
    p_flat = p.reshape(-1)
    if per_target_tau:
        chunks = _product_chunks([n_single] * q, offsets=[i * n_single for i in range(q)])
    elif gains_fixed:
        chunks = _product_chunks([p.size] * q)
    else:
        chunks = _combination_chunks(p.size, q)

    def decode(h):
        d, rem = divmod(int(h), n_single)
        return d, *divmod(rem, gp)

    n_delay = c.shape[1]
    if n_delay**2 * gp**2 <= _TABLE_LIMIT:
        # table[d1, d2, f1, f2] = sum_n conj(c[n, d1]) c[n, d2] a_t(f1)^H R_n a_t(f2)
        table = np.einsum("nd,ne,nab->deab", c.conj(), c, stats.at_r, optimize=True)
    else:
        table = None

    def gram_entries(h1, h2):
        d1, r1 = np.divmod(h1, n_single)
        d2, r2 = np.divmod(h2, n_single)
        t1, f1 = np.divmod(r1, gp)
        t2, f2 = np.divmod(r2, gp)
        if table is not None:
            return stats.ar_gram[t1, t2] * table[d1, d2, f1, f2]
        out = np.empty(h1.size, dtype=complex)
        for lo in range(0, h1.size, 2048):
            sl = slice(lo, lo + 2048)
            cc = c.conj()[:, d1[sl]] * c[:, d2[sl]]
            out[sl] = np.sum(cc * stats.at_r[:, f1[sl], f2[sl]], axis=0)
        return stats.ar_gram[t1, t2] * out

    best = (math.inf, None, None)
    for chunk in chunks:
        proj = p_flat[chunk]  # B x q
        gram = np.empty((chunk.shape[0], q, q), dtype=complex)
        for i in range(q):
            for j in range(q):
                gram[:, i, j] = gram_entries(chunk[:, i], chunk[:, j])
        cost, gains = _residual(stats.energy, proj, gram, grid)
        k = int(np.argmin(cost))
        if cost[k] < best[0]:
            best = (float(cost[k]), chunk[k], gains[k])

    _, hyp, gains = best
    aoa, aod = [], []
    for h in hyp:
        _, t, f = decode(h)
        aoa.append(grid.theta[t])
        aod.append(grid.phi[f])
    mags = np.abs(gains)
    est = EstimateSet(aod, aoa, mags, np.angle(gains))
    return est


def _product_chunks(sizes, offsets=None):
    total = math.prod(sizes)
    offsets = np.zeros(len(sizes), dtype=np.int64) if offsets is None else np.asarray(offsets, dtype=np.int64)
    for start in range(0, total, _CHUNK):
        lin = np.arange(start, min(total, start + _CHUNK), dtype=np.int64)
        yield np.stack(np.unravel_index(lin, sizes), axis=1).astype(np.int64) + offsets


def _combination_chunks(n, q):
    """Sorted q-subsets of range(n) in lexicographic order."""
    if q == 1:
        yield from _product_chunks([n])
        return
    if q == 2:
        i, j = np.triu_indices(n, 1)
        for start in range(0, i.size, _CHUNK):
            yield np.stack([i[start:start + _CHUNK], j[start:start + _CHUNK]], axis=1).astype(np.int64)
        return
    combos = itertools.combinations(range(n), q)
    while True:
        chunk = np.array(list(itertools.islice(combos, _CHUNK)), dtype=np.int64).reshape(-1, q)
        if chunk.size == 0:
            return
        yield chunk


def _residual(energy, proj, gram, grid: GridSpec):
    """Residual ||y||^2 - 2 Re(g^H p) + g^H G g minimized or evaluated over gains."""
    b, q = proj.shape
    if grid.known_gains is not None:
        g = np.broadcast_to(np.asarray(grid.known_gains, dtype=complex), (b, q))
        return _quad(energy, proj, gram, g), g
    if grid.gain_values is None:
        reg = 1e-12 * np.trace(gram, axis1=1, axis2=2).real[:, None, None] * np.eye(q)
        try:
            g = np.linalg.solve(gram + reg, proj[..., None])[..., 0]
        except np.linalg.LinAlgError:
            g = np.linalg.lstsq(gram[0], proj[0], rcond=None)[0][None]
        cost = _quad(energy, proj, gram, g)
        # repeated paths make the Gram singular; never prefer them
        det_ok = np.abs(np.linalg.det(gram)) > 1e-9 * np.prod(np.abs(np.diagonal(gram, axis1=1, axis2=2)), axis=1)
        cost = np.where(det_ok, cost, np.inf)
        return cost, g
    values = np.asarray(grid.gain_values, dtype=float)
    complex_vals = (values[:, None] + 1j * values[None, :]).reshape(-1)
    best_cost = np.full(b, np.inf)
    best_g = np.zeros((b, q), dtype=complex)
    for combo in itertools.product(complex_vals, repeat=q):
        g = np.broadcast_to(np.array(combo), (b, q))
        cost = _quad(energy, proj, gram, g)
        better = cost < best_cost
        best_cost[better] = cost[better]
        best_g[better] = g[better]
    return best_cost, best_g


def _quad(energy, proj, gram, g):
    cross = np.real(np.sum(g.conj() * proj, axis=1))
    quad = np.real(np.einsum("bi,bij,bj->b", g.conj(), gram, g))
    return energy - 2 * cross + quad
