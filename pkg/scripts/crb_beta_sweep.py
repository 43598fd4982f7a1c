"""CRB against SNR and against the transmit beamwidth for a single target."""
import argparse
from pathlib import Path

from bisac import experiments as ex


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--aoa", type=float, default=0.0, help="degrees")
    ap.add_argument("--aod", type=float, default=-15.0, help="degrees")
    ap.add_argument("--threshold", type=float, default=1e-5, help="CRB level in rad^2")
    ap.add_argument("--out", default="results/crb")
    args = ap.parse_args()
    out = Path(args.out)

    crb = ex.ExperimentPlan("crb_sweep", snr_list_db=tuple(range(-10, 41, 5)), target=(args.aoa, args.aod))
    ex.emit_plot_data(ex.run_crb_sweep(crb), out / "crb_vs_snr")
    ex.write_crb_csv(out / "crb_values.csv", ex.crb_records(crb))

    beta = ex.ExperimentPlan("beta_sweep", snr_list_db=(0.0, 10.0, 20.0), target=(args.aoa, args.aod))
    table = ex.run_beta_sweep(beta, threshold=args.threshold)
    ex.emit_plot_data(table, out / "crb_vs_beta")
    for snr, b in zip(*table.series("beta_threshold")):
        print(f"{snr:5.1f} dB: smallest beta_t with CRB(theta) <= {args.threshold:g} is {b:.2f}")


if __name__ == "__main__":
    main()
