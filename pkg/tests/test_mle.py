import itertools

import numpy as np
import pytest

from bisac.crb import crb_for
from bisac.errors import GridTooLarge, InvalidArgument
from bisac.mle import GridSpec, mle_grid_cost, mle_grid_search
from bisac.model import (
    ComplexTensor, ScenarioConfig, TargetPath, channel_tensor, derive_rng, generate_pilots, noise_var_for_snr, simulate_rx,
)
from bisac.pencil import PencilConfig, sense

TINY = ScenarioConfig(n_tx=3, n_rx=4, n_subcarriers=4, n_symbols=3)


def brute_force(cfg, rx, pilots, grid, q, delays):
    """Explicit residual with inner LS gains over every ordered hypothesis."""
    best = (np.inf, None)
    y = rx.data.ravel()
    for combo in itertools.product(itertools.product(grid.theta, grid.phi), repeat=q):
        if q > 1 and len(set(combo)) < q:
            continue
        cols = []
        for (th, ph), tau in zip(combo, delays):
            h = channel_tensor(cfg, [TargetPath(th, ph, tau, 1.0)])
            cols.append(np.einsum("nrt,nkt->nkr", h, pilots.data).ravel())
        a = np.stack(cols, 1)
        g = np.linalg.lstsq(a, y, rcond=None)[0]
        r = np.linalg.norm(y - a @ g) ** 2
        if r < best[0] - 1e-9:
            best = (r, sorted(combo))
    return best


@pytest.mark.parametrize("q", [1, 2])
def test_matches_brute_force(q):
    rng = np.random.default_rng(q)
    grid = GridSpec(np.radians([-40, -10, 15, 50]), np.radians([-30, 0, 35]), known_delays=[0.0] * q)
    pilots = generate_pilots(TINY)
    targets = [TargetPath(np.radians(12), np.radians(-25), 0.0, 1.0), TargetPath(np.radians(-45), np.radians(30), 0.0, 0.6j)][:q]
    cfg = TINY.replace(noise_var=0.2)
    rx = simulate_rx(cfg, targets, pilots, rng)
    _, combo = brute_force(cfg, rx, pilots, grid, q, [0.0] * q)
    est = mle_grid_search(rx, pilots, cfg, grid, q).sorted_by_aoa()
    got = sorted(zip(est.aoa_rad, est.aod_rad))
    np.testing.assert_allclose(got, combo, atol=1e-12)


def test_noiseless_on_grid_exact_with_delay_grid():
    cfg = TINY
    pilots = generate_pilots(cfg)
    tau = 1 / (cfg.n_subcarriers * cfg.subcarrier_spacing_hz)
    grid = GridSpec.uniform(5.0, -60, 60, tau=np.array([0.0, tau, 2 * tau]))
    t = TargetPath(grid.theta[7], grid.phi[19], tau, 0.8 - 0.1j)
    est = mle_grid_search(simulate_rx(cfg, [t], pilots), pilots, cfg, grid, 1)
    assert est.aoa_rad[0] == t.aoa_rad and est.aod_rad[0] == t.aod_rad
    assert est.gain_mag[0] == pytest.approx(abs(t.gain), abs=1e-9)


def test_known_and_gridded_gains():
    cfg = TINY
    pilots = generate_pilots(cfg)
    grid_known = GridSpec.uniform(10.0, -60, 60, known_delays=[0.0], known_gains=[1.0 + 1.0j])
    t = TargetPath(grid_known.theta[3], grid_known.phi[9], 0.0, 1.0 + 1.0j)
    rx = simulate_rx(cfg, [t], pilots)
    est = mle_grid_search(rx, pilots, cfg, grid_known, 1)
    assert (est.aoa_rad[0], est.aod_rad[0]) == (t.aoa_rad, t.aod_rad)
    grid_g = GridSpec.uniform(10.0, -60, 60, known_delays=[0.0], gain_values=[-1.0, 0.0, 1.0])
    assert grid_g.sizes() == (12, 12, 1, 3)
    est = mle_grid_search(rx, pilots, cfg, grid_g, 1)
    assert (est.aoa_rad[0], est.aod_rad[0]) == (t.aoa_rad, t.aod_rad)
    assert est.gain_mag[0] == pytest.approx(np.sqrt(2))


def test_noiseless_q2_reference_config(ref_cfg, ref_pilots):
    grid = GridSpec.uniform(4.0, -60, 60, known_delays=[0.0, 0.0])
    t = [TargetPath(grid.theta[5], grid.phi[20], 0.0, 1.0), TargetPath(grid.theta[22], grid.phi[4], 0.0, -0.5j)]
    est = mle_grid_search(simulate_rx(ref_cfg, t, ref_pilots), ref_pilots, ref_cfg, grid, 2).sorted_by_aoa()
    np.testing.assert_array_equal(est.aoa_rad, [t[0].aoa_rad, t[1].aoa_rad])
    np.testing.assert_array_equal(est.aod_rad, [t[0].aod_rad, t[1].aod_rad])


def test_budget_and_validation():
    grid = GridSpec.uniform(1.0, known_delays=[0.0, 0.0])
    assert grid.total_points(2) == 180**4
    with pytest.raises(GridTooLarge) as exc:
        mle_grid_search(None, None, TINY, grid, 2)
    assert str(180**4) in str(exc.value)
    with pytest.raises(InvalidArgument):
        GridSpec([0.1], [0.1])
    with pytest.raises(InvalidArgument):
        GridSpec([], [0.1], tau=[0.0])
    pilots = generate_pilots(TINY)
    rx = simulate_rx(TINY, [TargetPath(0.1, 0.1)], pilots)
    with pytest.raises(InvalidArgument):
        mle_grid_search(rx, pilots, TINY, GridSpec.uniform(10.0, known_delays=[0.0]), 0)
    with pytest.raises(InvalidArgument):
        mle_grid_search(rx, pilots, TINY, GridSpec.uniform(10.0, known_delays=[0.0]), 2)


def test_grid_cost_arithmetic(ref_cfg):
    nr, nt, npc, kp = 10, 8, 64, 10
    bracket = nr * npc * 1 * npc**3 * nt + nr * npc**2 * npc * kp
    assert mle_grid_cost((1, 1, 1, 1), ref_cfg, 1) == bracket
    assert mle_grid_cost((180, 180, 1, 1), ref_cfg, 1) == 180 * 180 * bracket
    bracket2 = nr * npc * 4 * npc**3 * nt + nr * npc**3 * kp
    assert mle_grid_cost((180, 180, 1, 1), ref_cfg, 2) == 180**4 * bracket2
    assert mle_grid_cost((3, 5, 7, 2), ref_cfg, 2) == 7**2 * 3**2 * 5**2 * 2**4 * bracket2
    assert mle_grid_cost(GridSpec.uniform(1.0, known_delays=[0.0]), ref_cfg, 1) == 180 * 180 * bracket


def test_high_snr_accuracy_and_bound(ref_cfg, ref_pilots):
    grid = GridSpec.uniform(1.0, known_delays=[0.0])
    hits, sq = 0, []
    t = [TargetPath(np.radians(12.3), np.radians(-33.7), 0.0, 1.0)]
    cfg = ref_cfg.replace(noise_var=noise_var_for_snr(ref_cfg, t, 20))
    trials = 200
    for i in range(trials):
        est = mle_grid_search(simulate_rx(cfg, t, ref_pilots, derive_rng(3, i, "noise")), ref_pilots, cfg, grid, 1)
        err = est.aoa_rad[0] - t[0].aoa_rad
        sq.append(err**2)
        hits += abs(err) <= np.radians(1.0) + 1e-12
    assert hits >= 0.95 * trials
    assert crb_for(cfg, t, ref_pilots)[0][0] <= np.mean(sq)
