"""Monte Carlo experiment harness: scenes, datasets, sweeps and result tables."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import crb as crb_mod
from .csi import GRAM_COND_LIMIT, frontend, snapshot_at_peak
from .cvnn import (
    ComplexMLP, Dataset, NetworkSpec, TrainConfig, forward, prepare_input, save_dataset,
    sort_targets, train,
)
from .errors import BisacError, IllConditionedPilots, InvalidArgument
from .model import (
    ComplexTensor, RadiationPattern, ScenarioConfig, TargetPath, channel_tensor, complex_noise,
    derive_rng, generate_pilots, noise_var_for_snr, signal_power, simulate_rx,
)
from .pencil import PencilConfig, estimate_2d

EXPERIMENT_KINDS = ("mse_sweep", "crb_sweep", "beta_sweep", "classify", "complexity", "train", "mle_compare")


# ---------------------------------------------------------------- scenes

@dataclass(frozen=True)
class SceneSampler:
    """Random targets sharing one IFFT bin.

    Angles are uniform in +-max_angle_deg; AoAs within a peak are at least
    min_sep_deg apart. Gains have unit magnitude and uniform phase. The
    common delay sits on bin ``b`` plus a uniform offset in +-frac_delay bins.
    """

    max_angle_deg: float = 60.0
    min_sep_deg: float = 5.0
    frac_delay: float = 0.0

    def draw(self, config: ScenarioConfig, q: int, rng: np.random.Generator) -> tuple[list, int]:
        lim = math.radians(self.max_angle_deg)
        sep = math.radians(self.min_sep_deg)
        if q > 1 and (q - 1) * sep >= 2 * lim:
            raise InvalidArgument(f"{q} targets cannot be {self.min_sep_deg} deg apart within the range")
        while True:
            theta = np.sort(rng.uniform(-lim, lim, q))
            if q == 1 or np.min(np.diff(theta)) >= sep:
                break
        phi = rng.uniform(-lim, lim, q)
        b = int(rng.integers(1, config.n_subcarriers - 1))
        frac = rng.uniform(-self.frac_delay, self.frac_delay) if self.frac_delay > 0 else 0.0
        delay = (b + frac) * config.bin_duration_s
        phases = rng.uniform(0, 2 * np.pi, q)
        targets = [TargetPath(float(t), float(p), delay, complex(np.exp(1j * ph)))
                   for t, p, ph in zip(theta, phi, phases)]
        return targets, b


def ls_projectors(pilots: ComplexTensor) -> np.ndarray:
    """Per-subcarrier S^H (S S^H)^-1, shape (N_P, K_P, N_t)."""
    s = np.transpose(pilots.data, (0, 2, 1))  # N_P x N_t x K_P
    gram = s @ np.conj(np.transpose(s, (0, 2, 1)))
    conds = np.linalg.cond(gram)
    bad = np.flatnonzero(~np.isfinite(conds) | (conds > GRAM_COND_LIMIT))
    if bad.size:
        raise IllConditionedPilots(conds[bad[0]], int(bad[0]) + 1)
    return np.conj(pilots.data) @ np.linalg.inv(np.transpose(gram, (0, 2, 1))).conj()


def peak_snapshots(
    config: ScenarioConfig,
    pilots: ComplexTensor,
    scenes: Sequence[tuple[list, int]],
    snr_db: Sequence[float],
    seed: int,
    indices: Sequence[int],
    reference: str = "actual",
) -> np.ndarray:
    """Batched equivalent of simulate_rx -> frontend -> snapshot_at_peak.

    Sample i uses noise from derive_rng(seed, indices[i], "noise"), so any
    single sample can be replayed through the scalar pipeline.
    """
    proj = ls_projectors(pilots)
    n_p, k_p = config.n_subcarriers, config.n_symbols
    proj_flat = proj.reshape(n_p * k_p, config.n_tx)
    n = np.arange(1, n_p + 1)
    out = np.empty((len(scenes), config.n_rx, config.n_tx), dtype=complex)
    for i, ((targets, b), snr, idx) in enumerate(zip(scenes, snr_db, indices)):
        h = channel_tensor(config, targets)
        w = np.exp(2j * np.pi * n * b / n_p) / n_p
        # LS is exact on the noiseless part, and everything downstream is linear
        out[i] = (w @ h.reshape(n_p, -1)).reshape(config.n_rx, config.n_tx)
        if snr is not None and math.isfinite(snr):
            if reference == "actual":
                power = float(np.mean(np.sum(np.abs(h) ** 2, axis=(1, 2))) / config.n_rx)
            else:
                power = signal_power(config, targets, reference)
            var = power / 10 ** (snr / 10)
            noise = complex_noise(derive_rng(seed, idx, "noise"), (n_p, k_p, config.n_rx), var)
            weighted = (noise * w[:, None, None]).reshape(n_p * k_p, config.n_rx)
            out[i] += weighted.T @ proj_flat
    return out


def replay_snapshot(config, pilots, targets, b, snr_db, seed, index, reference="actual") -> np.ndarray:
    """Scalar pipeline for one recorded sample."""
    var = noise_var_for_snr(config, targets, snr_db, reference)
    cfg = config.replace(noise_var=var)
    rx = simulate_rx(cfg, targets, pilots, derive_rng(seed, index, "noise"))
    stack, td = frontend(rx, pilots, cfg)
    return snapshot_at_peak(stack, b, cfg, len(targets), td).snapshot


def draw_scenes(config: ScenarioConfig, sampler: SceneSampler, counts: Sequence[int], seed: int, start: int = 0):
    """Scenes for sample indices start.., one per entry of ``counts`` (targets per scene)."""
    return [sampler.draw(config, q, derive_rng(seed, start + i, "scene")) for i, q in enumerate(counts)]


def angle_labels(scenes) -> np.ndarray:
    """(aoa sorted ascending, paired aod) per scene, shape (B, 2q)."""
    rows = []
    for targets, _ in scenes:
        th = np.array([t.aoa_rad for t in targets])
        ph = np.array([t.aod_rad for t in targets])
        order = np.lexsort((ph, th))
        rows.append(np.concatenate([th[order], ph[order]]))
    return np.array(rows)


# ---------------------------------------------------------------- plans and tables

@dataclass
class ExperimentPlan:
    kind: str
    snr_list_db: tuple = (0.0, 10.0, 20.0)
    trials: int = 500
    estimator: str = "2d"
    out: str | None = None
    seed: int = 0
    num_targets: int = 1
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    sampler: SceneSampler = field(default_factory=SceneSampler)
    model_path: str | None = None
    betas: tuple = tuple(np.round(np.arange(0.1, 5.605, 0.01), 10))
    target: tuple = (0.0, -15.0)  # (aoa_deg, aod_deg) for single-scene sweeps
    threads: int = 1

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise InvalidArgument(f"unknown experiment kind {self.kind!r}")
        if self.trials < 1:
            raise InvalidArgument("trials must be >= 1")
        self.snr_list_db = tuple(float(s) for s in self.snr_list_db)
        if not self.snr_list_db:
            raise InvalidArgument("SNR list must be non-empty")
        if self.estimator not in ("2d", "nn"):
            raise InvalidArgument(f"unknown estimator {self.estimator!r}")
        if self.estimator == "nn" and self.kind == "mse_sweep" and not self.model_path:
            raise InvalidArgument("the nn estimator needs a model path")
        if self.kind == "classify" and not self.model_path:
            raise InvalidArgument("classifier evaluation needs a model path")
        if self.num_targets < 1:
            raise InvalidArgument("num_targets must be >= 1")
        if self.threads < 1:
            raise InvalidArgument("threads must be >= 1")

    def replace(self, **kw) -> "ExperimentPlan":
        return dataclasses.replace(self, **kw)

    @property
    def pilots(self) -> ComplexTensor:
        return generate_pilots(self.scenario)


RESULT_COLUMNS = ["variable", "metric", "value", "stderr", "trials", "config_hash"]


@dataclass(frozen=True)
class ResultRow:
    variable: float
    metric: str
    value: float
    stderr: float
    trials: int


@dataclass
class ResultTable:
    variable_name: str
    config_hash: str
    rows: list = field(default_factory=list)

    def add(self, variable, metric, value, stderr=0.0, trials=1):
        if not stderr >= 0 and not math.isnan(stderr):
            raise InvalidArgument("stderr must be non-negative")
        self.rows.append(ResultRow(float(variable), str(metric), float(value), float(stderr), int(trials)))

    def metrics(self) -> list:
        return list(dict.fromkeys(r.metric for r in self.rows))

    def series(self, metric: str) -> tuple[np.ndarray, np.ndarray]:
        pick = [r for r in self.rows if r.metric == metric]
        return np.array([r.variable for r in pick]), np.array([r.value for r in pick])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([self.variable_name if c == "variable" else c for c in RESULT_COLUMNS])
        for r in self.rows:
            w.writerow([repr(r.variable), r.metric, repr(r.value), repr(r.stderr), r.trials, self.config_hash])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ResultTable":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        table = None
        for row in reader:
            if table is None:
                table = cls(header[0], row[5])
            table.rows.append(ResultRow(float(row[0]), row[1], float(row[2]), float(row[3]), int(row[4])))
        return table if table is not None else cls(header[0], "")


def emit_plot_data(table: ResultTable, path) -> list[Path]:
    """Write <path>.csv (exact round trip) and <path>.dat (gnuplot blocks, 12 significant digits)."""
    base = Path(path)
    base.parent.mkdir(parents=True, exist_ok=True)
    csv_path = base.with_suffix(".csv")
    dat_path = base.with_suffix(".dat")
    csv_path.write_text(table.to_csv())
    lines = [
        f"# config_hash {table.config_hash}",
        "# columns: variable value stderr trials",
        "# set logscale y",
    ]
    for metric in table.metrics():
        lines.append("")
        lines.append("")
        lines.append(f"# metric {metric}")
        for r in table.rows:
            if r.metric == metric:
                lines.append(f"{r.variable:.12g} {r.value:.12g} {r.stderr:.12g} {r.trials}")
    dat_path.write_text("\n".join(lines) + "\n")
    return [csv_path, dat_path]


def _mean_stderr(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return math.nan, math.nan
    se = float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return float(np.mean(x)), se


def _plan_hash(plan: ExperimentPlan) -> str:
    return plan.scenario.config_hash()


# ---------------------------------------------------------------- estimators

def estimate_batch(snapshots: np.ndarray, plan: ExperimentPlan, model: ComplexMLP | None = None) -> np.ndarray:
    """(B, 2q) sorted (aoa.., aod..) estimates; rows of NaN where the 2D estimator fails."""
    q = plan.num_targets
    if plan.estimator == "nn":
        pred = forward(model, prepare_input(snapshots, model.spec.normalize_input))
        return sort_targets(pred)[0]
    pc = PencilConfig.for_scenario(plan.scenario, q)

    def one(snap):
        try:
            est = estimate_2d(snap, pc, plan.scenario).sorted_by_aoa()
        except BisacError:
            return np.full(2 * q, np.nan)
        return np.concatenate([est.aoa_rad, est.aod_rad])

    rows = _map(one, snapshots, plan.threads)
    return np.array(rows).reshape(len(snapshots), 2 * q)


def _map(func, items, threads: int) -> list:
    """Ordered map; results do not depend on the thread count."""
    if threads <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def _load_model(path) -> ComplexMLP:
    from .cvnn import load_model

    if path is None or not Path(path).exists():
        raise FileNotFoundError(f"model file {path!r} not found")
    return load_model(path)


def run_mse_sweep(plan: ExperimentPlan, model: ComplexMLP | None = None) -> ResultTable:
    """AoA/AoD MSE per SNR with mean CRB reference columns (rad^2)."""
    if plan.estimator == "nn" and model is None:
        model = _load_model(plan.model_path)
    cfg, q, pilots = plan.scenario, plan.num_targets, plan.pilots
    table = ResultTable("snr_db", _plan_hash(plan))
    for p, snr in enumerate(plan.snr_list_db):
        start = p * plan.trials
        scenes = draw_scenes(cfg, plan.sampler, [q] * plan.trials, plan.seed, start)
        snaps = peak_snapshots(cfg, pilots, scenes, [snr] * plan.trials, plan.seed, range(start, start + plan.trials))
        est = estimate_batch(snaps, plan, model)
        truth = angle_labels(scenes)
        ok = ~np.any(np.isnan(est), axis=1)
        err = (est[ok] - truth[ok]) ** 2
        crb_t, crb_p = [], []
        for targets, _ in scenes:
            c = cfg.replace(noise_var=noise_var_for_snr(cfg, targets, snr))
            ct, cp = crb_mod.crb_for(c, targets, pilots)
            crb_t.append(np.mean(ct))
            crb_p.append(np.mean(cp))
        n_ok = int(ok.sum())
        table.add(snr, "mse_aoa", *_mean_stderr(err[:, :q].mean(axis=1)), n_ok)
        table.add(snr, "mse_aod", *_mean_stderr(err[:, q:].mean(axis=1)), n_ok)
        table.add(snr, "crb_aoa", *_mean_stderr(crb_t), plan.trials)
        table.add(snr, "crb_aod", *_mean_stderr(crb_p), plan.trials)
        table.add(snr, "failures", plan.trials - n_ok, 0.0, plan.trials)
    return table


def crossing_snr(snr_db, values, level: float) -> float:
    """SNR where a decreasing curve first crosses ``level`` (log-linear interpolation)."""
    snr_db = np.asarray(snr_db, dtype=float)
    lv = np.log10(np.asarray(values, dtype=float))
    target = math.log10(level)
    for i in range(len(snr_db) - 1):
        if lv[i] >= target >= lv[i + 1]:
            if lv[i] == lv[i + 1]:
                return float(snr_db[i])
            return float(snr_db[i] + (lv[i] - target) * (snr_db[i + 1] - snr_db[i]) / (lv[i] - lv[i + 1]))
    return math.nan


def crb_gap_db(table: ResultTable, level: float = 1e-6, metric: str = "mse_aoa", bound: str = "crb_aoa") -> float:
    """Horizontal SNR distance between the estimator MSE and the CRB at ``level``."""
    x, mse = table.series(metric)
    xb, crb = table.series(bound)
    return crossing_snr(x, mse, level) - crossing_snr(xb, crb, level)


def run_crb_sweep(plan: ExperimentPlan, targets: Sequence[TargetPath] | None = None) -> ResultTable:
    """CRB(theta), CRB(phi) diagonals vs SNR for one fixed scene."""
    cfg, pilots = plan.scenario, plan.pilots
    if targets is None:
        aoa, aod = plan.target
        targets = [TargetPath(math.radians(aoa), math.radians(aod), 5 * cfg.bin_duration_s, 1.0)]
    table = ResultTable("snr_db", _plan_hash(plan))
    for snr in plan.snr_list_db:
        c = cfg.replace(noise_var=noise_var_for_snr(cfg, targets, snr))
        ct, cp = crb_mod.crb_for(c, targets, pilots)
        for i in range(len(targets)):
            table.add(snr, f"crb_aoa[{i}]", ct[i])
            table.add(snr, f"crb_aod[{i}]", cp[i])
    return table


def run_beta_sweep(plan: ExperimentPlan, threshold: float = 1e-5) -> ResultTable:
    """CRB(theta) vs gaussian transmit beamwidth at each SNR.

    The noise level is fixed by the isotropic-pattern signal power, so a
    narrow pattern pointing away from the target lowers its effective SNR.
    Rows named ``beta_threshold`` give, per SNR, the smallest beamwidth whose
    CRB is at or below ``threshold`` (NaN if none).
    """
    base, pilots = plan.scenario, plan.pilots
    aoa, aod = plan.target
    targets = [TargetPath(math.radians(aoa), math.radians(aod), 5 * base.bin_duration_s, 1.0)]
    table = ResultTable("beta_t", _plan_hash(plan))
    for snr in plan.snr_list_db:
        var = noise_var_for_snr(base, targets, snr, reference="isotropic")
        hits = []
        for beta in plan.betas:
            cfg = base.replace(tx_pattern=RadiationPattern.gaussian(beta), noise_var=var)
            ct, _ = crb_mod.crb_for(cfg, targets, pilots)
            table.add(beta, f"crb_aoa@{snr:g}dB", ct[0])
            if ct[0] <= threshold:
                hits.append(beta)
        table.add(snr, "beta_threshold", min(hits) if hits else math.nan)
    iso = base.replace(noise_var=noise_var_for_snr(base, targets, plan.snr_list_db[0], reference="isotropic"))
    table.add(plan.snr_list_db[0], "crb_aoa_isotropic", crb_mod.crb_for(iso, targets, pilots)[0][0])
    return table


CRB_COLUMNS = ["snr_db", "beta_t", "target_idx", "crb_theta_rad2", "crb_phi_rad2"]


def crb_records(plan: ExperimentPlan, targets: Sequence[TargetPath] | None = None, betas=None) -> list[tuple]:
    """Flat (snr_db, beta_t, target_idx, crb_theta, crb_phi) records.

    Without ``betas`` the scenario's own transmit pattern is used and beta_t
    is NaN; with ``betas`` the noise level follows the beta-sweep convention.
    """
    cfg, pilots = plan.scenario, plan.pilots
    if targets is None:
        aoa, aod = plan.target
        targets = [TargetPath(math.radians(aoa), math.radians(aod), 5 * cfg.bin_duration_s, 1.0)]
    out = []
    for snr in plan.snr_list_db:
        if betas is None:
            c = cfg.replace(noise_var=noise_var_for_snr(cfg, targets, snr))
            ct, cp = crb_mod.crb_for(c, targets, pilots)
            out.extend((snr, math.nan, i, ct[i], cp[i]) for i in range(len(targets)))
            continue
        var = noise_var_for_snr(cfg, targets, snr, reference="isotropic")
        for beta in betas:
            c = cfg.replace(tx_pattern=RadiationPattern.gaussian(beta), noise_var=var)
            ct, cp = crb_mod.crb_for(c, targets, pilots)
            out.extend((snr, float(beta), i, ct[i], cp[i]) for i in range(len(targets)))
    return out


def write_crb_csv(path, records) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CRB_COLUMNS)
        for snr, beta, i, ct, cp in records:
            w.writerow([repr(float(snr)), repr(float(beta)), int(i), repr(float(ct)), repr(float(cp))])
    return path


def run_classifier_eval(plan: ExperimentPlan, model: ComplexMLP | None = None, classes=(1, 2, 3, 4, 5)) -> ResultTable:
    """Accuracy per SNR, balanced over target-count classes, with binomial standard error."""
    from .cvnn import classify_num_targets  # noqa: F401  (same decision rule, batched below)

    if model is None:
        model = _load_model(plan.model_path)
    cfg, pilots = plan.scenario, plan.pilots
    per_class = max(1, plan.trials // len(classes))
    counts = [q for q in classes for _ in range(per_class)]
    table = ResultTable("snr_db", _plan_hash(plan))
    for p, snr in enumerate(plan.snr_list_db):
        start = p * len(counts)
        scenes = draw_scenes(cfg, plan.sampler, counts, plan.seed, start)
        snaps = peak_snapshots(cfg, pilots, scenes, [snr] * len(counts), plan.seed, range(start, start + len(counts)))
        probs = forward(model, prepare_input(snaps, model.spec.normalize_input))
        pred = np.argmax(probs, axis=1) + 1
        acc = float(np.mean(pred == np.array(counts)))
        table.add(snr, "accuracy", acc, math.sqrt(acc * (1 - acc) / len(counts)), len(counts))
    return table


def run_mle_compare(plan: ExperimentPlan, step_deg: float = 1.0) -> ResultTable:
    """Agreement of the 2D estimator with the grid MLE (delay and gain known), q = 1."""
    from .mle import GridSpec, mle_grid_search

    cfg, pilots = plan.scenario, plan.pilots
    pc = PencilConfig.for_scenario(cfg, 1)
    table = ResultTable("snr_db", _plan_hash(plan))
    step = math.radians(step_deg)
    def trial(idx, snr):
        targets, _ = plan.sampler.draw(cfg, 1, derive_rng(plan.seed, idx, "scene"))
        c = cfg.replace(noise_var=noise_var_for_snr(cfg, targets, snr))
        rx = simulate_rx(c, targets, pilots, derive_rng(plan.seed, idx, "noise"))
        grid = GridSpec.uniform(step_deg, known_delays=[targets[0].delay_s],
                                known_gains=[targets[0].composite_gain(c)])
        ml = mle_grid_search(rx, pilots, c, grid, 1)
        b = int(round(targets[0].delay_s / cfg.bin_duration_s)) % cfg.n_subcarriers
        try:
            stack, td = frontend(rx, pilots, c)
            est = estimate_2d(snapshot_at_peak(stack, b, c, 1, td).snapshot, pc, c)
        except BisacError:
            return None
        return abs(est.aoa_rad[0] - ml.aoa_rad[0]), abs(est.aod_rad[0] - ml.aod_rad[0])

    for p, snr in enumerate(plan.snr_list_db):
        idx = range(p * plan.trials, (p + 1) * plan.trials)
        res = _map(lambda i: trial(i, snr), idx, plan.threads)
        diffs = np.array([r for r in res if r is not None]).reshape(-1, 2)
        tol = step * (1 + 1e-9)
        agree = np.zeros(len(res))
        agree[: len(diffs)] = np.all(diffs <= tol, axis=1)
        acc = float(np.mean(agree))
        table.add(snr, "agreement", acc, math.sqrt(acc * (1 - acc) / len(res)), len(res))
        table.add(snr, "mean_abs_diff_aoa", *_mean_stderr(diffs[:, 0]), len(diffs))
        table.add(snr, "mean_abs_diff_aod", *_mean_stderr(diffs[:, 1]), len(diffs))
    return table


# ---------------------------------------------------------------- datasets and training

@dataclass
class DatasetPlan:
    """Balanced dataset over an SNR list and a set of target counts."""

    head: str = "regression"
    snr_list_db: tuple = (5, 10, 15, 20, 25, 30, 40)
    samples_per_snr: int = 500
    classes: tuple = (1,)
    seed: int = 0
    normalize_input: bool = True
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    sampler: SceneSampler = field(default_factory=SceneSampler)

    def __post_init__(self):
        if self.head not in ("regression", "classifier"):
            raise InvalidArgument(f"unknown head {self.head!r}")
        if self.head == "regression" and len(self.classes) != 1:
            raise InvalidArgument("a regression dataset has a single target count")
        if self.samples_per_snr < len(self.classes):
            raise InvalidArgument("fewer samples per SNR than classes")
        if not self.snr_list_db:
            raise InvalidArgument("SNR list must be non-empty")

    def layout(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-sample (snr, target count); classes cycle within each SNR block."""
        snr = np.repeat(np.asarray(self.snr_list_db, dtype=float), self.samples_per_snr)
        q = np.tile(np.resize(np.asarray(self.classes), self.samples_per_snr), len(self.snr_list_db))
        return snr, q

    def meta(self) -> dict:
        snr, q = self.layout()
        return {
            "config_hash": self.scenario.config_hash(),
            "seed": self.seed,
            "head": self.head,
            "snr_list_db": list(self.snr_list_db),
            "classes": list(self.classes),
            "samples_per_snr": self.samples_per_snr,
            "counts": {f"{s:g}dB/q={c}": int(np.sum((snr == s) & (q == c)))
                       for s in self.snr_list_db for c in self.classes},
            "normalize_input": self.normalize_input,
            "sampler": dataclasses.asdict(self.sampler),
            "scenario": self.scenario.to_dict(),
        }


def dataset_scenes(plan: DatasetPlan) -> list:
    _, q = plan.layout()
    return draw_scenes(plan.scenario, plan.sampler, q, plan.seed)


def generate_dataset(plan: DatasetPlan, path=None) -> Dataset:
    """Simulate, label and optionally persist (binary file plus JSON sidecar)."""
    snr, q = plan.layout()
    scenes = dataset_scenes(plan)
    snaps = peak_snapshots(plan.scenario, generate_pilots(plan.scenario), scenes, snr, plan.seed, range(len(scenes)))
    if plan.head == "regression":
        labels = angle_labels(scenes)
    else:
        labels = q.astype(float)[:, None]
    data = Dataset(prepare_input(snaps, plan.normalize_input), labels, snr, plan.meta())
    if path is not None:
        save_dataset(path, data)
        side = dict(data.meta, snr_db=snr.tolist())
        Path(str(path) + ".json").write_text(json.dumps(side, indent=1))
    return data


def load_dataset_with_meta(path) -> Dataset:
    from .cvnn import load_dataset

    data = load_dataset(path)
    side = Path(str(path) + ".json")
    if side.exists():
        meta = json.loads(side.read_text())
        data.snr_db = np.asarray(meta.pop("snr_db"), dtype=float)
        data.meta = meta
    return data


def train_model(data: Dataset, config: TrainConfig, validation: Dataset | None = None, seed: int | None = None):
    """Fresh network sized from the dataset; returns (model, history)."""
    head = data.meta.get("head", "regression")
    s = data.inputs.shape[1]
    norm = bool(data.meta.get("normalize_input", True))
    n_out = data.labels.shape[1] if head == "regression" else 5
    spec = NetworkSpec(s, head, n_out, norm)
    model = ComplexMLP.create(spec, config.seed if seed is None else seed)
    return train(model, data, config, validation)
