"""Closed-form operation counts for the pencil estimator, the complex MLP and the grid MLE.

All counts are exact Python integers. Row names follow the processing blocks
of the estimator; totals are the sums of the rows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .cvnn import NetworkSpec, mlp_op_counts
from .errors import InvalidArgument, InvalidPencilConfig
from .mle import mle_grid_cost
from .model import ScenarioConfig
from .pencil import PencilConfig, default_subarray

DEFAULT_CORDIC_ITERS = 16
FRONTEND_ROWS = ("channel estimation", "coarse timing")
SENSING_ROWS = (
    "SVD", "T matrix", "EVD square roots", "EVD QZ iterations",
    "AoD", "LS fit", "AoA",
)


@dataclass
class OpCount:
    """Multiplication/addition counts with a per-row breakdown {row: (mults, adds)}."""

    rows: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, (m, a) in self.rows.items():
            if m < 0 or a < 0:
                raise InvalidArgument(f"negative count in row {name!r}")

    @property
    def mults(self) -> int:
        return sum(m for m, _ in self.rows.values())

    @property
    def adds(self) -> int:
        return sum(a for _, a in self.rows.values())

    @property
    def total(self) -> int:
        return self.mults + self.adds

    def scaled(self, k: int) -> "OpCount":
        return OpCount({n: (k * m, k * a) for n, (m, a) in self.rows.items()})


def channel_estimation_ops(n_tx: int, n_rx: int, n_p: int, k_p: int) -> tuple[int, int]:
    nk = n_p * k_p
    mults = n_tx**3 + 2 * nk * n_tx**2 + n_rx * nk * n_tx
    adds = n_tx * (nk - 1) * n_tx + n_tx**3 - 2 * n_tx**2 + n_tx + nk * (n_tx - 1) * n_tx + n_rx * (nk - 1) * n_tx
    return mults, adds


def coarse_timing_ops(n_tx: int, n_rx: int, n_p: int) -> tuple[int, int]:
    return n_p**2 * n_tx * n_rx, n_p * (n_p - 1) * n_tx * n_rx


def svd_ops(pc: PencilConfig) -> int:
    """Golub-Reinsch cost of the M_r M_t x K_r(K_t-1) SVD (same for mults and adds)."""
    a = pc.m_rx * pc.m_tx
    b = pc.k_rx * (pc.k_tx - 1)
    return 4 * a * a * b + 8 * a * b * b + 9 * b**3


def count_2d(
    config: ScenarioConfig,
    pc: PencilConfig,
    q: int | None = None,
    include_frontend: bool = False,
    cordic_iters: int | None = None,
    include_qz: bool = True,
) -> OpCount:
    """Operation counts of the pencil estimator.

    With ``include_qz`` (default) the QZ-iteration terms are kept so that the
    sensing totals equal the closed-form T_mul/T_add; without them the totals
    are the plain sums of the per-block table cells.
    """
    q = pc.num_targets if q is None else q
    if q < 0:
        raise InvalidArgument("q must be non-negative")
    nc = pc.cordic_iters if cordic_iters is None else cordic_iters
    nt, nr = config.n_tx, config.n_rx
    if (pc.n_tx, pc.n_rx) != (nt, nr):
        raise InvalidArgument("pencil config does not match the scenario array sizes")
    a = pc.m_rx * pc.m_tx
    b = pc.k_rx * (pc.k_tx - 1)
    rows = {}
    if include_frontend:
        rows["channel estimation"] = channel_estimation_ops(nt, nr, config.n_subcarriers, config.n_symbols)
        rows["coarse timing"] = coarse_timing_ops(nt, nr, config.n_subcarriers)
    s = svd_ops(pc)
    rows["SVD"] = (s, s)
    rows["T matrix"] = (a * b * q + a * q * q + q * q, a * (b - 1) * q + (a - 1) * q * q)
    rows["EVD square roots"] = (2 * q * (q - 1), 4 * q * (q - 1) * nc)
    if include_qz:
        rows["EVD QZ iterations"] = (q * q * (q - 1), 6 * q * q * (q - 1))
    rows["AoD"] = (3 * q, 4 * nc * q)
    rows["LS fit"] = (
        q * q * nt + q**3 + q * q * nt + q * nr * nt,
        q * q * (nt - 1) + q**3 - 2 * q * q + q + nt * (q - 1) * q + nr * (nt - 1) * q,
    )
    rows["AoA"] = (q * (nr + 2), q * (2 * nr - 1))
    return OpCount(rows)


def count_mlp(config: ScenarioConfig, q: int = 1, n_out: int | None = None) -> OpCount:
    """q times the per-peak MLP cost for S_inp = N_t N_r (regression head, N_out = 2 by default)."""
    spec = NetworkSpec(config.n_tx * config.n_rx, "regression", 2 if n_out is None else n_out)
    m, a = mlp_op_counts(spec)
    return OpCount({"complex MLP": (q * m, q * a)})


def speedup_vs_mle(grid, config: ScenarioConfig, pc: PencilConfig, q: int | None = None) -> Fraction:
    """Exact ratio of the grid-search cost to T_add + T_mul."""
    q = pc.num_targets if q is None else q
    den = count_2d(config, pc, q).total
    if den == 0:
        raise InvalidArgument("zero operation count in the denominator")
    return Fraction(mle_grid_cost(grid, config, q), den)


def log10_fraction(x: Fraction) -> float:
    """log10 of a positive rational without float overflow."""
    if x <= 0:
        raise InvalidArgument("log of a non-positive ratio")
    return math.log10(x.numerator) - math.log10(x.denominator) if x.numerator > 1e300 else math.log10(x)


REFERENCE_GRID = (180, 180, 1, 1)  # (G_theta, G_phi, G_tau, G_alpha)

SUBARRAY_RULES: dict[str, Callable[[int], int]] = {
    "floor(N/2)": default_subarray,
    "ceil(N/2)": lambda n: max(1, math.ceil(n / 2)),
    "ceil((N+1)/2)": lambda n: math.ceil((n + 1) / 2),
    "floor(N/3)": lambda n: max(1, n // 3),
    "ceil(2N/3)": lambda n: math.ceil(2 * n / 3),
    "N-1": lambda n: max(1, n - 1),
    "2": lambda n: 2,
    "1": lambda n: 1,
}


def mult_ratio(n_tx: int, n_rx: int, q: int, m_tx: int, m_rx: int) -> float:
    """count_2d mults over q-scaled MLP mults, sensing rows only."""
    cfg = ScenarioConfig(n_tx=n_tx, n_rx=n_rx, n_symbols=max(10, n_tx))
    pc = PencilConfig(n_tx, n_rx, m_tx, m_rx, q)
    return count_2d(cfg, pc).mults / count_mlp(cfg, q).mults


def ratio_rule_sweep(n_tx: int = 8, n_rx_list=(8, 16), q: int = 2, targets=(6.5, 10.3), tol: float = 0.15) -> list[dict]:
    """Evaluate each (tx rule, rx rule) pair; flags pairs within ``tol`` of every target ratio."""
    out = []
    for tx_name, tx_rule in SUBARRAY_RULES.items():
        for rx_name, rx_rule in SUBARRAY_RULES.items():
            try:
                ratios = [mult_ratio(n_tx, nr, q, tx_rule(n_tx), rx_rule(nr)) for nr in n_rx_list]
            except (InvalidArgument, InvalidPencilConfig):
                continue
            ok = all(abs(r / t - 1) <= tol for r, t in zip(ratios, targets))
            out.append({"tx_rule": tx_name, "rx_rule": rx_name, "ratios": ratios, "match": ok})
    return out


def complexity_report(config: ScenarioConfig, pc: PencilConfig, grid=REFERENCE_GRID) -> str:
    """Markdown tables of multiplications and additions, totals and log10 S."""
    full = count_2d(config, pc, include_frontend=True)
    lines = ["| block | multiplications | additions |", "|---|---|---|"]
    for name, (m, a) in full.rows.items():
        lines.append(f"| {name} | {m} | {a} |")
    sensing = count_2d(config, pc)
    lines.append(f"| sensing total | {sensing.mults} | {sensing.adds} |")
    mlp = count_mlp(config, pc.num_targets)
    lines.append(f"| complex MLP (x{pc.num_targets}) | {mlp.mults} | {mlp.adds} |")
    s = speedup_vs_mle(grid, config, pc)
    lines.append("")
    lines.append(f"log10 S = {log10_fraction(s):.4f}")
    return "\n".join(lines)
