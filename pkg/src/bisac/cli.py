"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .complexity import REFERENCE_GRID, complexity_report, ratio_rule_sweep
from .csi import frontend, write_csi_stack
from .cvnn import TrainConfig, save_model
from .errors import BisacError, GridTooLarge, InvalidArgument
from .model import ScenarioConfig, derive_rng, generate_pilots, load_scenario, noise_var_for_snr, simulate_rx
from .pencil import PencilConfig, sense, write_estimates_csv

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(Exception):
    pass


def _floats(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.replace(",", " ").split())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from exc


def _ints(text: str) -> tuple:
    return tuple(int(x) for x in _floats(text))


def _scenario(args) -> tuple[ScenarioConfig, list]:
    if args.config is None:
        cfg, targets = ScenarioConfig(), []
    else:
        try:
            cfg, targets = load_scenario(args.config)
        except (OSError, json.JSONDecodeError, TypeError, KeyError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    if args.seed is not None:
        cfg = cfg.replace(rng_seed=args.seed)
    return cfg, targets


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _plan(args, kind: str, **kw) -> ex.ExperimentPlan:
    cfg, _ = _scenario(args)
    sampler = ex.SceneSampler(min_sep_deg=getattr(args, "min_sep", 5.0), frac_delay=getattr(args, "frac_delay", 0.0))
    return ex.ExperimentPlan(
        kind, trials=args.trials, seed=args.seed or 0, scenario=cfg, sampler=sampler,
        out=args.out, threads=args.threads, **kw,
    )


def _emit(table: ex.ResultTable, out: Path, name: str):
    paths = ex.emit_plot_data(table, out / name)
    for p in paths:
        print(p)


def cmd_simulate(args) -> int:
    cfg, targets = _scenario(args)
    if not targets:
        raise ConfigError("simulate needs a config with a 'targets' list")
    pilots = generate_pilots(cfg)
    if args.snr is not None:
        cfg = cfg.replace(noise_var=noise_var_for_snr(cfg, targets, args.snr))
    out = _out(args)
    rows = []
    for trial in range(args.trials):
        rx = simulate_rx(cfg, targets, pilots, derive_rng(cfg.rng_seed, trial, "noise"))
        if trial == 0:
            write_csi_stack(out / "csi_stack.bin", frontend(rx, pilots, cfg)[0])
        peaks = args.peaks or len({round(t.delay_s / cfg.bin_duration_s) for t in targets})
        for est in sense(rx, pilots, cfg, peaks, args.targets_per_peak):
            rows.append((trial, est))
    write_estimates_csv(out / "estimates.csv", rows)
    print(out / "estimates.csv")
    return EXIT_OK


def _normalize_choice(choice: str, head: str) -> bool:
    # classifiers keep the raw power, which carries target-count information
    return head == "regression" if choice == "auto" else choice == "yes"


def cmd_dataset(args) -> int:
    cfg, _ = _scenario(args)
    plan = ex.DatasetPlan(
        head=args.head, snr_list_db=args.snrs, samples_per_snr=args.per_snr, classes=args.classes,
        seed=args.seed or 0, normalize_input=_normalize_choice(args.normalize, args.head), scenario=cfg,
        sampler=ex.SceneSampler(min_sep_deg=args.min_sep, frac_delay=args.frac_delay),
    )
    path = _out(args) / args.name
    data = ex.generate_dataset(plan, path)
    print(f"{path} ({len(data)} samples)")
    return EXIT_OK


def cmd_train(args) -> int:
    data = ex.load_dataset_with_meta(args.dataset)
    train, val = data.split(args.val_frac, seed=args.seed or 0) if args.val_frac > 0 else (data, None)
    cfg = TrainConfig.scaled(args.epochs, base_lr=args.lr, batch_size=args.batch, seed=args.seed or 0)
    model, hist = ex.train_model(train, cfg, val)
    out = _out(args)
    save_model(out / args.name, model)
    table = ex.ResultTable("epoch", data.meta.get("config_hash", ""))
    for e, loss in enumerate(hist.train):
        table.add(e, "train_loss", loss)
    for e, loss in enumerate(hist.validation):
        table.add(e, "validation_loss", loss)
    _emit(table, out, "history")
    print(out / args.name)
    return EXIT_OK


def cmd_eval_mse(args) -> int:
    plan = _plan(args, "mse_sweep", snr_list_db=args.snrs, estimator=args.estimator,
                 num_targets=args.targets, model_path=args.model)
    _emit(ex.run_mse_sweep(plan), _out(args), f"mse_{args.estimator}_q{args.targets}")
    return EXIT_OK


def cmd_eval_classify(args) -> int:
    plan = _plan(args, "classify", snr_list_db=args.snrs, model_path=args.model)
    _emit(ex.run_classifier_eval(plan), _out(args), "classifier_accuracy")
    return EXIT_OK


def cmd_crb(args) -> int:
    plan = _plan(args, "crb_sweep", snr_list_db=args.snrs, target=(args.aoa, args.aod))
    _, targets = _scenario(args)
    out = _out(args)
    _emit(ex.run_crb_sweep(plan, targets or None), out, "crb")
    print(ex.write_crb_csv(out / "crb_values.csv", ex.crb_records(plan, targets or None)))
    return EXIT_OK


def cmd_beta_sweep(args) -> int:
    plan = _plan(args, "beta_sweep", snr_list_db=args.snrs, target=(args.aoa, args.aod))
    out = _out(args)
    _emit(ex.run_beta_sweep(plan, args.threshold), out, "beta_sweep")
    print(ex.write_crb_csv(out / "beta_sweep_values.csv", ex.crb_records(plan, betas=plan.betas)))
    return EXIT_OK


def cmd_complexity(args) -> int:
    cfg, _ = _scenario(args)
    out = _out(args)
    lines = []
    for q in (1, 2):
        pc = PencilConfig.for_scenario(cfg, q)
        lines.append(f"## q = {q} (M_t = {pc.m_tx}, M_r = {pc.m_rx})\n")
        lines.append(complexity_report(cfg, pc, REFERENCE_GRID))
        lines.append("")
    lines.append("## multiplication ratio vs MLP, N_t = 8, N_r = 8/16, q = 2\n")
    lines.append("| tx rule | rx rule | ratio N_r=8 | ratio N_r=16 | within 15% of 6.5/10.3 |")
    lines.append("|---|---|---|---|---|")
    for r in ratio_rule_sweep():
        lines.append(f"| {r['tx_rule']} | {r['rx_rule']} | {r['ratios'][0]:.3f} | {r['ratios'][1]:.3f} | {r['match']} |")
    text = "\n".join(lines) + "\n"
    (out / "complexity.md").write_text(text)
    print(text)
    return EXIT_OK


def cmd_mle_compare(args) -> int:
    plan = _plan(args, "mle_compare", snr_list_db=args.snrs)
    _emit(ex.run_mle_compare(plan, args.step), _out(args), "mle_compare")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario JSON (optionally with a 'targets' list)")
    common.add_argument("--seed", type=int, default=None, help="master seed")
    common.add_argument("--out", default="results", help="output directory")
    common.add_argument("--trials", type=int, default=500, help="Monte Carlo trials per point")
    common.add_argument("--threads", type=int, default=1, help="worker threads for per-trial estimation")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="bisac", description="Bistatic AoA/AoD estimation experiments")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="simulate a scenario and run the 2D estimator")
    s.add_argument("--snr", type=float, default=None)
    s.add_argument("--peaks", type=int, default=None)
    s.add_argument("--targets-per-peak", type=int, default=1)
    s.set_defaults(func=cmd_simulate, trials=1)

    s = sub.add_parser("dataset", parents=[common], help="generate a training dataset")
    s.add_argument("--head", choices=("regression", "classifier"), default="regression")
    s.add_argument("--snrs", type=_floats, default=(5, 10, 15, 20, 25, 30, 40))
    s.add_argument("--per-snr", type=int, default=500)
    s.add_argument("--classes", type=_ints, default=(1,))
    s.add_argument("--normalize", choices=("auto", "yes", "no"), default="auto",
                   help="per-sample power/phase normalization (auto: regression only)")
    s.add_argument("--min-sep", type=float, default=5.0)
    s.add_argument("--frac-delay", type=float, default=0.0)
    s.add_argument("--name", default="dataset.bin")
    s.set_defaults(func=cmd_dataset)

    s = sub.add_parser("train", parents=[common], help="train a complex MLP")
    s.add_argument("--dataset", required=True)
    s.add_argument("--epochs", type=int, default=300)
    s.add_argument("--lr", type=float, default=1e-4)
    s.add_argument("--batch", type=int, default=256)
    s.add_argument("--val-frac", type=float, default=0.2)
    s.add_argument("--name", default="model.bin")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval-mse", parents=[common], help="MSE vs SNR with CRB reference")
    s.add_argument("--snrs", type=_floats, default=tuple(range(-10, 41, 5)))
    s.add_argument("--estimator", choices=("2d", "nn"), default="2d")
    s.add_argument("--model", default=None)
    s.add_argument("--targets", type=int, default=1)
    s.add_argument("--min-sep", type=float, default=5.0)
    s.add_argument("--frac-delay", type=float, default=0.0)
    s.set_defaults(func=cmd_eval_mse)

    s = sub.add_parser("eval-classify", parents=[common], help="target-count accuracy vs SNR")
    s.add_argument("--model", required=True)
    s.add_argument("--snrs", type=_floats, default=(-5, 0, 5, 10, 15, 20))
    s.add_argument("--min-sep", type=float, default=5.0)
    s.set_defaults(func=cmd_eval_classify)

    for name, func, snrs, helptext in (
        ("crb", cmd_crb, tuple(range(-10, 41, 5)), "CRB vs SNR for one scene"),
        ("beta-sweep", cmd_beta_sweep, (0, 10, 20), "CRB(theta) vs transmit beamwidth"),
    ):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("--snrs", type=_floats, default=snrs)
        s.add_argument("--aoa", type=float, default=0.0, help="degrees")
        s.add_argument("--aod", type=float, default=-15.0, help="degrees")
        if name == "beta-sweep":
            s.add_argument("--threshold", type=float, default=1e-5)
        s.set_defaults(func=func)

    s = sub.add_parser("complexity", parents=[common], help="operation-count report")
    s.set_defaults(func=cmd_complexity)

    s = sub.add_parser("mle-compare", parents=[common], help="2D estimator vs grid MLE")
    s.add_argument("--snrs", type=_floats, default=(20,))
    s.add_argument("--step", type=float, default=1.0, help="grid step in degrees")
    s.set_defaults(func=cmd_mle_compare, trials=50)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.trials < 1 or args.threads < 1:
        print("error: --trials and --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, InvalidArgument, GridTooLarge, FileNotFoundError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BisacError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
