"""Train the target-count classifier and report held-out accuracy per SNR."""
import argparse
from pathlib import Path

from bisac import experiments as ex
from bisac.cvnn import TrainConfig, save_model


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--per-snr", type=int, default=30000, help="samples per SNR, split evenly over 5 classes")
    ap.add_argument("--snrs", default="5,10,20,30")
    ap.add_argument("--epochs", type=int, default=60)
    ap.add_argument("--lr", type=float, default=2e-3)
    ap.add_argument("--batch", type=int, default=128)
    ap.add_argument("--out", default="results/classifier")
    args = ap.parse_args()
    out = Path(args.out)

    sampler = ex.SceneSampler(min_sep_deg=15.0)
    plan = ex.DatasetPlan("classifier", snr_list_db=tuple(float(s) for s in args.snrs.split(",")),
                          samples_per_snr=args.per_snr, classes=(1, 2, 3, 4, 5), seed=1,
                          normalize_input=False, sampler=sampler)
    cfg = TrainConfig.scaled(args.epochs, base_lr=args.lr, batch_size=args.batch)
    model, _ = ex.train_model(ex.generate_dataset(plan), cfg)
    out.mkdir(parents=True, exist_ok=True)
    save_model(out / "classifier.bin", model)

    evaluation = ex.ExperimentPlan("classify", snr_list_db=(-5, 0, 5, 10, 15, 20), trials=1000, seed=99,
                                   model_path=str(out / "classifier.bin"), sampler=sampler)
    table = ex.run_classifier_eval(evaluation, model)
    ex.emit_plot_data(table, out / "accuracy")
    for snr, acc in zip(*table.series("accuracy")):
        print(f"{snr:5.1f} dB  accuracy {acc:.3f}")


if __name__ == "__main__":
    main()
