import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bisac.csi import (
    CsiStack, bin_energy, detect_peaks, frontend, ifft_rows, ls_channel_estimate, ls_estimate_all,
    read_csi_stack, snapshot_at_peak, stack_csi, write_csi_stack,
)
from bisac.errors import IllConditionedPilots, InvalidArgument
from bisac.model import (
    ComplexTensor, ScenarioConfig, TargetPath, channel_tensor, derive_rng, generate_pilots,
    noise_var_for_snr, simulate_rx, steering_vector,
)


def _scene(cfg, rng, q=2):
    return [
        TargetPath(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0, 0.9) / cfg.subcarrier_spacing_hz,
                   complex(rng.normal(), rng.normal()))
        for _ in range(q)
    ]


def test_ls_noiseless_recovers_channel(ref_cfg, ref_pilots, rng):
    targets = _scene(ref_cfg, rng)
    rx = simulate_rx(ref_cfg, targets, ref_pilots)
    h = channel_tensor(ref_cfg, targets)
    for n in (1, 33, 64):
        est = ls_channel_estimate(rx, ref_pilots, n)
        assert np.linalg.norm(est - h[n - 1]) / np.linalg.norm(h[n - 1]) < 1e-10
    np.testing.assert_allclose(ls_estimate_all(rx, ref_pilots), h, atol=1e-10)


def test_ls_orthogonal_pilots():
    cfg = ScenarioConfig(n_tx=2, n_rx=3, n_subcarriers=2, n_symbols=4)
    s = np.array([[1, 1, 1, 1], [1, -1, 1, -1]], dtype=complex)  # S S^H = 4 I
    pilots = ComplexTensor(("subcarrier", "symbol", "tx"), np.stack([s.T, s.T]))
    rng = np.random.default_rng(0)
    y = rng.normal(size=(2, 4, 3)) + 1j * rng.normal(size=(2, 4, 3))
    rx = ComplexTensor(("subcarrier", "symbol", "rx"), y)
    np.testing.assert_allclose(ls_channel_estimate(rx, pilots, 2), y[1].T @ s.conj().T / 4, atol=1e-14)


def test_ls_noisy_matches_normal_equations():
    cfg = ScenarioConfig(n_tx=2, n_rx=3, n_subcarriers=4, n_symbols=4, noise_var=0.3)
    pilots = generate_pilots(cfg)
    rx = simulate_rx(cfg, [TargetPath(0.2, -0.3, 0.0, 1.0)], pilots, derive_rng(0, 0, "noise"))
    for n in range(1, 5):
        y = rx.data[n - 1].T
        s = pilots.data[n - 1].T
        # independent oracle: solve the real-valued normal equations of min ||Y - H S||
        sr = np.block([[s.real, -s.imag], [s.imag, s.real]])
        yr = np.hstack([y.real, y.imag])
        hr = np.linalg.lstsq(sr.T, yr.T, rcond=None)[0].T  # [Hr Hi] with Y = H S
        # Y = (Hr + jHi)(Sr + jSi) -> [Yr Yi] = [Hr Hi] [[Sr, Si], [-Si, Sr]]
        big = np.block([[s.real, s.imag], [-s.imag, s.real]])
        hr = np.linalg.solve(big @ big.T, big @ yr.T).T
        h = hr[:, :2] + 1j * hr[:, 2:]
        np.testing.assert_allclose(ls_channel_estimate(rx, pilots, n), h, atol=1e-9)


def test_ls_rejects_ill_conditioned():
    s = np.ones((1, 4, 2), dtype=complex)
    pilots = ComplexTensor(("subcarrier", "symbol", "tx"), s)
    rx = ComplexTensor(("subcarrier", "symbol", "rx"), np.ones((1, 4, 3)))
    with pytest.raises(IllConditionedPilots):
        ls_channel_estimate(rx, pilots, 1)
    with pytest.raises(IllConditionedPilots):
        ls_estimate_all(rx, pilots)
    with pytest.raises(InvalidArgument):
        ls_channel_estimate(rx, pilots, 2)


def test_stack_order_column_major():
    h = np.array([[[11, 12], [21, 22]]], dtype=complex)  # one subcarrier, H(a, t)
    st_ = stack_csi(h)
    np.testing.assert_array_equal(st_.matrix[:, 0], [11, 21, 12, 22])


@given(st.integers(1, 5), st.integers(1, 5), st.integers(1, 6), st.integers(0, 2**31))
def test_stack_unstack_identity_and_index(n_rx, n_tx, n_p, seed):
    rng = np.random.default_rng(seed)
    h = rng.normal(size=(n_p, n_rx, n_tx)) + 1j * rng.normal(size=(n_p, n_rx, n_tx))
    s = stack_csi(h)
    np.testing.assert_array_equal(s.unstack(), h)
    a, t, n = rng.integers(n_rx), rng.integers(n_tx), rng.integers(n_p)
    assert s.matrix[t * n_rx + a, n] == h[n, a, t]


def test_ifft_constant_row_impulse():
    out = ifft_rows(np.full((1, 16), 2.5 - 1j))
    assert out[0, 0] == pytest.approx(2.5 - 1j)
    assert np.max(np.abs(out[0, 1:])) < 1e-14


def test_ifft_on_bin_delay_peaks_at_bin(ref_cfg, ref_pilots):
    targets = [TargetPath(0.4, -0.3, 3 * ref_cfg.bin_duration_s, 1.0)]
    stack, td = frontend(simulate_rx(ref_cfg, targets, ref_pilots), ref_pilots, ref_cfg)
    assert np.all(np.argmax(np.abs(td), axis=1) == 3)


@given(st.integers(1, 40), st.integers(0, 2**31))
def test_ifft_matches_direct_sum(n, seed):
    rng = np.random.default_rng(seed)
    row = rng.normal(size=n) + 1j * rng.normal(size=n)
    k = np.arange(n)
    idx = np.arange(1, n + 1)
    direct = np.array([np.sum(row * np.exp(2j * np.pi * idx * kk / n)) / n for kk in k])
    np.testing.assert_allclose(ifft_rows(row)[0], direct, atol=1e-10)


def test_detect_two_separated_bins(ref_cfg, ref_pilots):
    targets = [TargetPath(0.2, 0.1, 3 * ref_cfg.bin_duration_s, 1.0), TargetPath(-0.5, 0.6, 9 * ref_cfg.bin_duration_s, 0.8)]
    cfg = ref_cfg.replace(noise_var=noise_var_for_snr(ref_cfg, targets, 30))
    _, td = frontend(simulate_rx(cfg, targets, ref_pilots, derive_rng(0, 0, "noise")), ref_pilots, cfg)
    det = detect_peaks(td, 2)
    assert det.bins == [3, 9] and not det.degraded


def test_detect_shared_bin_single_peak(ref_cfg, ref_pilots):
    targets = [TargetPath(0.2, 0.1, 5 * ref_cfg.bin_duration_s, 1.0), TargetPath(-0.5, 0.6, 5 * ref_cfg.bin_duration_s, 1.0)]
    _, td = frontend(simulate_rx(ref_cfg, targets, ref_pilots), ref_pilots, ref_cfg)
    assert detect_peaks(td, 1).bins == [5]


def test_detect_degraded_fill_and_validation():
    td = np.zeros((1, 8))
    td[0, 2] = 1.0
    det = detect_peaks(td, 3)
    assert det.degraded and len(det.bins) == 3 and 2 in det.bins
    with pytest.raises(InvalidArgument):
        detect_peaks(td, 0)
    with pytest.raises(InvalidArgument):
        detect_peaks(td, 9)


def test_detection_rate_20db(ref_cfg, ref_pilots):
    hits = 0
    trials = 1000
    for i in range(trials):
        r = derive_rng(7, i, "scene")
        b1 = int(r.integers(1, 60))
        b2 = int(r.integers(b1 + 2, 63))  # adjacent on-bin impulses merge into one maximum
        targets = [TargetPath(r.uniform(-1, 1), r.uniform(-1, 1), b1 * ref_cfg.bin_duration_s, np.exp(2j * np.pi * r.uniform())),
                   TargetPath(r.uniform(-1, 1), r.uniform(-1, 1), b2 * ref_cfg.bin_duration_s, np.exp(2j * np.pi * r.uniform()))]
        cfg = ref_cfg.replace(noise_var=noise_var_for_snr(ref_cfg, targets, 20))
        _, td = frontend(simulate_rx(cfg, targets, ref_pilots, derive_rng(7, i, "noise")), ref_pilots, cfg)
        hits += detect_peaks(td, 2).bins == [b1, b2]
    assert hits / trials >= 0.99


def test_snapshot_rank_one_and_entry(ref_cfg, ref_pilots):
    t = TargetPath(0.3, -0.2, 4 * ref_cfg.bin_duration_s, 0.7 + 0.1j)
    stack, td = frontend(simulate_rx(ref_cfg, [t], ref_pilots), ref_pilots, ref_cfg)
    snap = snapshot_at_peak(stack, 4, ref_cfg, 1, td)
    s = np.linalg.svd(snap.snapshot, compute_uv=False)
    assert s[1] / s[0] < 1e-10
    assert snap.snapshot[0, 0] == pytest.approx(t.gain, abs=1e-12)
    assert snap.coarse_toa_s == pytest.approx(4 * ref_cfg.bin_duration_s)


def test_snapshot_two_targets_direct_construction(ref_cfg, ref_pilots):
    ts = [TargetPath(0.3, -0.2, 6 * ref_cfg.bin_duration_s, 0.7 + 0.1j), TargetPath(-0.4, 0.5, 6 * ref_cfg.bin_duration_s, -0.3j)]
    stack, _ = frontend(simulate_rx(ref_cfg, ts, ref_pilots), ref_pilots, ref_cfg)
    snap = snapshot_at_peak(stack, 6, ref_cfg, 2).snapshot
    ref = sum(t.gain * np.outer(steering_vector(t.aoa_rad, 10, 0.5), steering_vector(t.aod_rad, 8, 0.5)) for t in ts)
    np.testing.assert_allclose(snap, ref, atol=1e-9)
    assert snap[0, 0] == pytest.approx(sum(t.gain for t in ts), abs=1e-12)


def test_snapshot_bin_validation(ref_cfg):
    stack = CsiStack(np.zeros((80, 64)), 10, 8)
    with pytest.raises(InvalidArgument):
        snapshot_at_peak(stack, 64, ref_cfg)
    with pytest.raises(InvalidArgument):
        CsiStack(np.zeros((79, 64)), 10, 8)


def test_energy_sums_pairs():
    td = np.array([[1, 2j], [3, 0]])
    np.testing.assert_allclose(bin_energy(td), [10, 4])


def test_csi_file_round_trip(tmp_path, rng):
    m = rng.normal(size=(6, 5)) + 1j * rng.normal(size=(6, 5))
    write_csi_stack(tmp_path / "c.bin", CsiStack(m, 3, 2))
    back = read_csi_stack(tmp_path / "c.bin", 3)
    np.testing.assert_array_equal(back.matrix, m)
    assert back.n_tx == 2
    with pytest.raises(InvalidArgument):
        read_csi_stack(tmp_path / "c.bin", 4)
