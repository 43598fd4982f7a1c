"""Agreement between the 2D estimator and the grid-search MLE."""
import argparse

from bisac import experiments as ex


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--step", type=float, default=1.0, help="grid step in degrees")
    ap.add_argument("--snrs", default="0,10,20")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    plan = ex.ExperimentPlan("mle_compare", snr_list_db=tuple(float(s) for s in args.snrs.split(",")),
                             trials=args.trials, threads=args.threads)
    table = ex.run_mle_compare(plan, step_deg=args.step)
    for snr, a in zip(*table.series("agreement")):
        print(f"{snr:5.1f} dB  agreement {a:.3f}")


if __name__ == "__main__":
    main()
