"""End-to-end acceptance checks; each prints one PASS/FAIL line.

Slow criteria (C5, C8, C9) run desk-scale experiments and take minutes.
"""
import dataclasses
import math

import numpy as np
import pytest

from bisac import experiments as ex
from bisac.complexity import REFERENCE_GRID, count_2d, log10_fraction, ratio_rule_sweep, speedup_vs_mle
from bisac.crb import fim_assemble
from bisac.csi import frontend, snapshot_at_peak
from bisac.cvnn import (
    ComplexLinearLayer, ComplexMLP, NetworkSpec, TrainConfig, backward, complex_linear_forward, forward, objective,
    sorted_angle_mse, sorted_mse_loss,
)
from bisac.model import ScenarioConfig, TargetPath, generate_pilots, noiseless_rx, simulate_rx
from bisac.pencil import PencilConfig, estimate_2d
from test_complexity import closed_form, random_tuples, table_rows

REFERENCE = ScenarioConfig()


def _separated(rng, q, lo, hi, gap):
    while True:
        x = np.sort(rng.uniform(lo, hi, q))
        if q == 1 or np.min(np.diff(x)) >= gap:
            return x


def test_c1_noiseless_exactness(accept):
    cfg, pilots = REFERENCE.replace(noise_var=0.0), generate_pilots(REFERENCE)
    rng = np.random.default_rng(2024)
    worst = 0.0
    for q in (1, 2, 3):
        pc = PencilConfig.for_scenario(cfg, q)
        for _ in range(100):
            lim, gap = math.radians(60), math.radians(10)
            aoas = _separated(rng, q, -lim, lim, gap)
            aods = rng.permutation(_separated(rng, q, -lim, lim, gap))
            b = int(rng.integers(1, cfg.n_subcarriers - 1))
            targets = [TargetPath(a, d, b * cfg.bin_duration_s, np.exp(2j * np.pi * rng.uniform()))
                       for a, d in zip(aoas, aods)]
            rx = simulate_rx(cfg, targets, pilots)
            stack, td = frontend(rx, pilots, cfg)
            est = estimate_2d(snapshot_at_peak(stack, b, cfg, q, td).snapshot, pc, cfg).sorted_by_aoa()
            worst = max(worst, np.max(np.abs(est.aoa_rad - aoas)), np.max(np.abs(est.aod_rad - aods)))
    assert accept("C1 noiseless exactness", worst < 1e-6, f"max angle error {worst:.2e} rad over 300 scenes")


def test_c2_mle_oracle_equivalence(accept):
    plan = ex.ExperimentPlan("mle_compare", snr_list_db=(20.0,), trials=200, seed=0)
    table = ex.run_mle_compare(plan, step_deg=1.0)
    agree = float(table.series("agreement")[1][0])
    assert accept("C2 MLE agreement", agree >= 0.9, f"{agree:.3f} of 200 trials within one 1-degree step")


def test_c3_fim_monte_carlo(accept):
    cfg = ScenarioConfig(n_tx=2, n_rx=2, n_subcarriers=4, n_symbols=2, noise_var=0.5)
    pilots = generate_pilots(cfg)
    target = TargetPath(0.3, -0.4, 1.3 * cfg.bin_duration_s, 0.8 + 0.5j)
    analytic = fim_assemble(cfg, [target], pilots).matrix

    mu = noiseless_rx(cfg, [target], pilots).ravel()
    m, s2 = mu.size, cfg.noise_var
    rng = np.random.default_rng(0)
    draws = 100_000
    y = mu + math.sqrt(s2 / 2) * (rng.standard_normal((draws, m)) + 1j * rng.standard_normal((draws, m)))

    def loglik(mean, var):
        return -m * math.log(math.pi * var) - np.sum(np.abs(y - mean) ** 2, axis=1) / var

    def mean_at(field, h):
        t = dataclasses.replace(target, **{field: getattr(target, field) + h})
        return noiseless_rx(cfg, [t], pilots).ravel()

    scores = [(loglik(mu, s2 * (1 + 1e-6)) - loglik(mu, s2 * (1 - 1e-6))) / (2e-6 * s2)]
    steps = {"aoa_rad": 1e-6, "aod_rad": 1e-6, "delay_s": 1e-6 / cfg.subcarrier_spacing_hz, "gain": 1e-6}
    for field, h in steps.items():
        units = (1.0, 1j) if field == "gain" else (1.0,)
        for u in units:
            scores.append((loglik(mean_at(field, u * h), s2) - loglik(mean_at(field, -u * h), s2)) / (2 * h))
    s = np.stack(scores, axis=1)
    outer = s[:, :, None] * s[:, None, :]
    est = outer.mean(axis=0)
    se = outer.std(axis=0, ddof=1) / math.sqrt(draws)
    z = np.abs(est - analytic) / se
    ok = bool(np.all(z <= 3))
    assert accept("C3 FIM vs score outer product", ok, f"max |deviation| {z.max():.2f} standard errors over 36 entries")


def test_c4_crb_scaling(accept):
    plan = ex.ExperimentPlan("crb_sweep", snr_list_db=tuple(range(-10, 41, 10)))
    table = ex.run_crb_sweep(plan)
    worst = 0.0
    for metric in ("crb_aoa[0]", "crb_aod[0]"):
        _, v = table.series(metric)
        worst = max(worst, float(np.max(np.abs(v[1:] / v[:-1] / 0.1 - 1))))
    assert accept("C4 CRB x0.1 per 10 dB", worst < 1e-9, f"max relative deviation {worst:.1e}")


@pytest.mark.slow
def test_c5_crb_gap(accept):
    plan = ex.ExperimentPlan("mse_sweep", snr_list_db=tuple(range(-10, 41, 5)), trials=500, seed=0,
                             sampler=ex.SceneSampler(frac_delay=0.5))
    table = ex.run_mse_sweep(plan)
    gap = ex.crb_gap_db(table)
    assert accept("C5 CRB gap", abs(gap - 9) <= 3, f"gap {gap:.2f} dB at MSE 1e-6 rad^2 (target 9 +- 3)")


@pytest.mark.parametrize("tup", random_tuples(5, seed=7))
def test_c6a_complexity_rows(accept, tup):
    nt, nr, npc, kp, mt, mr, q, nc = tup
    cfg = ScenarioConfig(n_tx=nt, n_rx=nr, n_subcarriers=npc, n_symbols=kp)
    pc = PencilConfig(nt, nr, mt, mr, q, cordic_iters=nc)
    rows_ok = count_2d(cfg, pc, include_frontend=True, include_qz=False).rows == table_rows(*tup)
    sensing = count_2d(cfg, pc)
    totals_ok = (sensing.adds, sensing.mults) == closed_form(nt, nr, mt, mr, q, nc)
    assert accept(f"C6a complexity rows {tup}", rows_ok and totals_ok, f"rows {rows_ok}, totals {totals_ok}")


def test_c6b_speedup(accept):
    got = {}
    for q in (1, 2):
        pc = PencilConfig.for_scenario(REFERENCE, q)
        got[q] = log10_fraction(speedup_vs_mle(REFERENCE_GRID, REFERENCE, pc))
    ok = abs(got[1] - 10) <= 1 and abs(got[2] - 15) <= 1
    assert accept("C6b MLE speedup", ok,
                  f"log10 S = {got[1]:.2f} (q=1, want 10 +- 1), {got[2]:.2f} (q=2, want 15 +- 1), default sub-arrays")


def test_c6c_ratio_sweep(accept):
    rows = ratio_rule_sweep()
    hits = [r for r in rows if r["match"]]
    detail = ", ".join(f"{r['tx_rule']}/{r['rx_rule']} -> {r['ratios'][0]:.2f}, {r['ratios'][1]:.2f}" for r in hits[:3])
    assert accept("C6c mult-ratio sweep", bool(hits), f"{len(hits)} of {len(rows)} rules match: {detail or 'none'}")


def test_c7_complex_nn(accept):
    rng = np.random.default_rng(11)
    layer = ComplexLinearLayer.init(12, 7, rng)
    x = rng.normal(size=(5, 12)) + 1j * rng.normal(size=(5, 12))
    wr, wi, br, bi = layer.params()
    block = np.concatenate([x.real, x.imag], 1) @ np.block([[wr, -wi], [wi, wr]]).T + np.concatenate([br, bi])
    block_err = float(np.max(np.abs(complex_linear_forward(layer, x) - (block[:, :7] + 1j * block[:, 7:]))))

    model = ComplexMLP.create(NetworkSpec(32, "regression", 4), 3)
    assert len(model.layers) == 4  # three hidden layers
    xs = rng.normal(size=(8, 32)) + 1j * rng.normal(size=(8, 32))
    ts = rng.uniform(-1, 1, size=(8, 4))
    grads = backward(model, xs, ts)
    params = model.params()
    picks = [(k, idx) for k in rng.integers(0, len(params), 50)
             for idx in [tuple(int(rng.integers(0, n)) for n in params[k].shape)]]
    fd_err = 0.0
    for k, idx in picks:
        p = params[k]
        old = p[idx]
        p[idx] = old + 1e-6
        up = objective(model, xs, ts)
        p[idx] = old - 1e-6
        down = objective(model, xs, ts)
        p[idx] = old
        fd = (up - down) / 2e-6
        fd_err = max(fd_err, abs(fd - grads[k][idx]) / max(abs(fd), abs(grads[k][idx]), 1e-8))

    pred = rng.uniform(-1, 1, size=(20, 6))
    truth = rng.uniform(-1, 1, size=(20, 6))
    perm = np.array([2, 0, 1])
    shuffled = np.concatenate([truth[:, :3][:, perm], truth[:, 3:][:, perm]], 1)
    perm_exact = sorted_mse_loss(pred, truth) == sorted_mse_loss(pred, shuffled)

    ok = block_err < 1e-12 and fd_err < 1e-4 and perm_exact
    assert accept("C7 complex NN", ok,
                  f"block form {block_err:.1e}, max FD rel error {fd_err:.1e} on 50 params, permutation exact {perm_exact}")


MIXED = (5, 10, 15, 20, 25, 30, 40)


def _block_means(x, width=20):
    x = np.asarray(x)
    return x[: len(x) // width * width].reshape(-1, width).mean(1)


@pytest.mark.slow
def test_c8_nn_regression(accept):
    def data(snrs, per, seed):
        return ex.generate_dataset(ex.DatasetPlan(snr_list_db=snrs, samples_per_snr=per, seed=seed))

    cfg = TrainConfig.scaled(100, base_lr=1e-3, batch_size=64, seed=0)
    val = data(MIXED, 100, 2)
    mixed, hist = ex.train_model(data(MIXED, 500, 1), cfg, val)
    single, _ = ex.train_model(data((5,), 500 * len(MIXED), 3), cfg, val)

    test_snrs = (5, 10, 15, 20, 25, 30, 35, 40)
    test = data(test_snrs, 500, 4)
    def mse_by_snr(model):
        pred = forward(model, test.inputs)
        return {s: sorted_angle_mse(pred[test.snr_db == s], test.labels[test.snr_db == s])[0] for s in test_snrs}

    bt, bv = _block_means(hist.train), _block_means(hist.validation)
    trend = bool(np.all(np.diff(bt) < 0) and np.all(np.diff(bv) < 0))
    m_mixed, m_single = mse_by_snr(mixed), mse_by_snr(single)
    high = [s for s in test_snrs if s >= 15]
    wins = sum(m_mixed[s] < m_single[s] for s in high)
    ok_a, ok_b, ok_c = trend, m_mixed[20] <= 1e-2, wins >= 0.8 * len(high)
    accept("C8a training trend", ok_a, f"20-epoch means train {np.round(bt, 4).tolist()}, val {np.round(bv, 4).tolist()}")
    accept("C8b AoA MSE at 20 dB", ok_b, f"{m_mixed[20]:.2e} rad^2 (limit 1e-2)")
    accept("C8c mixed beats 5 dB-only", ok_c, f"{wins} of {len(high)} test SNRs >= 15 dB")
    assert ok_a and ok_b and ok_c


@pytest.mark.slow
def test_c9_classifier(accept):
    sampler = ex.SceneSampler(min_sep_deg=15.0)
    plan = ex.DatasetPlan("classifier", snr_list_db=(5, 10, 20, 30), samples_per_snr=30_000,
                          classes=(1, 2, 3, 4, 5), seed=1, normalize_input=False, sampler=sampler)
    model, _ = ex.train_model(ex.generate_dataset(plan), TrainConfig.scaled(60, base_lr=2e-3, batch_size=128, seed=0))
    evaluation = ex.ExperimentPlan("classify", snr_list_db=(5, 10, 15, 20), trials=1000, seed=99,
                                   model_path="in-memory", sampler=sampler)
    acc = dict(zip(*ex.run_classifier_eval(evaluation, model).series("accuracy")))
    worst = min(acc.values())
    detail = ", ".join(f"{s:g} dB: {a:.3f}" for s, a in acc.items())
    assert accept("C9 target-count classifier", worst >= 0.95, f"held-out accuracy {detail}")


def test_c10_beta_sweep(accept):
    plan = ex.ExperimentPlan("beta_sweep", snr_list_db=(0.0, 10.0, 20.0), target=(0.0, -15.0))
    table = ex.run_beta_sweep(plan, threshold=1e-5)
    monotone = True
    for snr in plan.snr_list_db:
        _, crb = table.series(f"crb_aoa@{snr:g}dB")
        monotone &= bool(np.all(np.diff(crb) <= 1e-12 * crb[:-1]))
    _, thr = table.series("beta_threshold")
    # no beamwidth reaching the threshold counts as an infinite requirement
    need = np.where(np.isfinite(thr), thr, np.inf)
    inverted = bool(np.isfinite(need[-1]) and np.all(np.diff(need) < 0))
    ok = monotone and inverted
    shown = ", ".join(f"{s:g} dB: {t:.2f}" for s, t in zip(plan.snr_list_db, thr))
    assert accept("C10 beta sweep", ok, f"monotone {monotone}, threshold beta {shown}")
