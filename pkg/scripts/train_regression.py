"""Train the complex-valued angle regressor on mixed and on 5 dB-only data, then compare."""
import argparse
from pathlib import Path

import numpy as np

from bisac import experiments as ex
from bisac.cvnn import TrainConfig, forward, save_model, sorted_angle_mse

MIXED = (5, 10, 15, 20, 25, 30, 40)
TEST = (5, 10, 15, 20, 25, 30, 35, 40)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--per-snr", type=int, default=500)
    ap.add_argument("--epochs", type=int, default=100)
    ap.add_argument("--lr", type=float, default=1e-3)
    ap.add_argument("--batch", type=int, default=64)
    ap.add_argument("--out", default="results/regression")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def data(snrs, per, seed):
        return ex.generate_dataset(ex.DatasetPlan(snr_list_db=snrs, samples_per_snr=per, seed=seed))

    cfg = TrainConfig.scaled(args.epochs, base_lr=args.lr, batch_size=args.batch)
    val, test = data(MIXED, 100, 2), data(TEST, 500, 4)
    runs = {"mixed": data(MIXED, args.per_snr, 1), "5dB": data((5,), args.per_snr * len(MIXED), 3)}
    for name, train_set in runs.items():
        model, hist = ex.train_model(train_set, cfg, val)
        save_model(out / f"model_{name}.bin", model)
        np.savetxt(out / f"history_{name}.dat", np.c_[np.arange(len(hist.train)), hist.train, hist.validation])
        pred = forward(model, test.inputs)
        for s in TEST:
            k = test.snr_db == s
            print(f"{name:6s} {s:3d} dB  AoA MSE {sorted_angle_mse(pred[k], test.labels[k])[0]:.3e}")


if __name__ == "__main__":
    main()
