"""Command-line entry point: ``fracdd <subcommand> ...``.

Subcommands: ``gen-data``, ``train``, ``eval-sweep``, ``latency-bench`` and
``validate-model``. With ``--gate`` a subcommand exits with status 1 when its
acceptance check fails.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .bench import latency_bench, random_dd_pairs
from .channel import make_rng
from .experiment import ExperimentConfig, load_yaml, run_sweep, sweep_csv_text, write_latency_csv
from .modelio import load_model, save_model
from .neural import (
    NormalizationSpec,
    PredictorPair,
    generate_dataset,
    init_model,
    train_pair,
    validate_latency_sizing,
)
from .otfs import OtfsConfig, cddpm_columns
from .presets import PRESETS, get_preset

logger = logging.getLogger("fracdd")

# Gate thresholds.
LOSS_RATIO_GATE = 0.5
MEDIAN_REL_ERR_GATE = 0.15
SPEEDUP_GATE_SQUARE = 5.0
SPEEDUP_GATE_WIDE = 1.5
DL_NMSE_GAP_DB = 6.0
PATH_EXCESS_RANGE = (0.0, 2.0)


def _gate(ok: bool, label: str, detail: str) -> bool:
    print(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
    return ok


def _otfs_from_args(args, default: OtfsConfig | None = None) -> OtfsConfig:
    base = default or OtfsConfig()
    kw = {}
    if getattr(args, "M", None) is not None:
        kw["M"] = args.M
    if getattr(args, "N", None) is not None:
        kw["N"] = args.N
    return replace(base, **kw) if kw else base


# gen-data ------------------------------------------------------------------


def cmd_gen_data(args) -> int:
    cfg = _otfs_from_args(args)
    norm = NormalizationSpec.for_config(cfg)
    X, Y = generate_dataset(cfg, norm, args.samples, make_rng(args.seed, 2))
    np.savez_compressed(
        args.out, X=X, Y=Y, M=cfg.M, N=cfg.N, tau_scale=norm.tau_scale, nu_scale=norm.nu_scale
    )
    print(f"wrote {len(X)} samples (M={cfg.M}, N={cfg.N}) to {args.out}")
    return 0


def _load_dataset(path, cfg: OtfsConfig):
    with np.load(path) as d:
        if (int(d["M"]), int(d["N"])) != (cfg.M, cfg.N):
            raise SystemExit(f"dataset {path} is for M={int(d['M'])}, N={int(d['N'])}, expected M={cfg.M}, N={cfg.N}")
        return d["X"], d["Y"]


# train ---------------------------------------------------------------------


def cmd_train(args) -> int:
    preset = get_preset(args.preset)
    cfg = _otfs_from_args(args, preset.otfs)
    L1 = args.l1 if args.l1 is not None else preset.L1
    L2 = args.l2 if args.l2 is not None else preset.L2
    overrides = {
        k: v
        for k, v in (
            ("num_samples", args.samples),
            ("epochs", args.epochs),
            ("batch", args.batch),
            ("lr0", args.lr),
            ("lr_period", args.lr_period),
            ("seed", args.seed),
        )
        if v is not None
    }
    tc = replace(preset.train, **overrides)
    sizing = validate_latency_sizing(cfg, L1, L2)
    if not sizing.ok:
        logger.warning("L1=%d, L2=%d violates the latency sizing rule for M=%d, N=%d", L1, L2, cfg.M, cfg.N)

    norm = NormalizationSpec.for_config(cfg)
    if args.data:
        X, Y = _load_dataset(args.data, cfg)
    else:
        X, Y = generate_dataset(cfg, norm, tc.num_samples, make_rng(tc.seed, 2))
    pair, hist = train_pair(cfg, (L1, L2), X, Y, tc, make_rng(tc.seed, 3), verbose=args.verbose)
    histories = [hist["real"], hist["imag"]]
    for part, h in hist.items():
        print(f"{part}: epoch-1 loss {h.loss[0]:.5f}, final loss {h.loss[-1]:.5f}")
    save_model(pair, args.out)
    print(f"saved model to {args.out}")

    if args.history:
        with open(args.history, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "lr", "loss_real", "loss_imag", "holdout_real", "holdout_imag"])
            for e in range(tc.epochs):
                hr = histories[0].holdout_loss[e] if histories[0].holdout_loss else ""
                hi = histories[1].holdout_loss[e] if histories[1].holdout_loss else ""
                w.writerow([e, histories[0].lr[e], histories[0].loss[e], histories[1].loss[e], hr, hi])

    if not args.gate:
        return 0
    ok = True
    for part, hist in zip(("real", "imag"), histories):
        ratio = hist.loss[-1] / hist.loss[0]
        ok &= _gate(ratio < LOSS_RATIO_GATE, f"loss halving ({part})", f"final/epoch-1 = {ratio:.3f}")
    return 0 if ok else 1


# eval-sweep ----------------------------------------------------------------


def _sweep_config(args) -> ExperimentConfig:
    d = {}
    if args.config:
        with open(args.config) as fh:
            d = load_yaml(fh)
    d = dict(d)
    if args.M is not None or args.N is not None:
        otfs = dict(d.get("otfs", {}))
        if args.M is not None:
            otfs["M"] = args.M
        if args.N is not None:
            otfs["N"] = args.N
        d["otfs"] = otfs
    if args.realizations is not None:
        d["scenario"] = {**d.get("scenario", {}), "num_realizations": args.realizations}
    for key, val in (
        ("methods", args.methods),
        ("model_path", args.model),
        ("psnr_grid_db", args.psnr),
        ("output_dir", args.output_dir),
        ("seed", args.seed),
        ("workers", args.workers),
    ):
        if val is not None:
            d[key] = val
    return ExperimentConfig.from_dict(d)


def sweep_gates(exp: ExperimentConfig, result) -> bool:
    """Shape checks on a finished sweep.

    Model-based NMSE must strictly decrease along the PSNR grid. With both
    methods present, the DL variant must stay within ``DL_NMSE_GAP_DB`` over
    the middle half of the grid and detect between 0 and 2 more paths on
    average at the highest PSNR.
    """
    ok = True
    grid = sorted(exp.psnr_grid_db)
    if "pipic" in exp.methods:
        _, curve = result.curve("pipic")
        dec = all(b < a for a, b in zip(curve, curve[1:]))
        ok &= _gate(dec, "model-based NMSE decreasing", ", ".join(f"{v:.2f}" for v in curve))
    if set(exp.methods) == {"pipic", "dl-pipic"}:
        lo, hi = len(grid) // 4, len(grid) - len(grid) // 4
        mid = grid[lo:hi] or grid
        gaps = [result.row("dl-pipic", p).nmse_db - result.row("pipic", p).nmse_db for p in mid]
        ok &= _gate(
            max(gaps) <= DL_NMSE_GAP_DB,
            f"DL NMSE within {DL_NMSE_GAP_DB:g} dB (mid band {mid[0]:g}..{mid[-1]:g} dB)",
            "gaps " + ", ".join(f"{g:.2f}" for g in gaps),
        )
        top = grid[-1]
        diff = result.row("dl-pipic", top).avg_paths - result.row("pipic", top).avg_paths
        ok &= _gate(
            PATH_EXCESS_RANGE[0] <= diff <= PATH_EXCESS_RANGE[1],
            f"DL extra paths at {top:g} dB in [{PATH_EXCESS_RANGE[0]:g}, {PATH_EXCESS_RANGE[1]:g}]",
            f"{diff:+.2f}",
        )
    return ok


def cmd_eval_sweep(args) -> int:
    exp = _sweep_config(args)
    result = run_sweep(exp, write=True)
    sys.stdout.write(sweep_csv_text(result.rows))
    print(f"outputs written to {exp.output_dir}")
    if args.gate:
        return 0 if sweep_gates(exp, result) else 1
    return 0


# latency-bench -------------------------------------------------------------


def _parse_net(text: str):
    try:
        l1, l2 = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected L1,L2 but got {text!r}") from None
    return l1, l2


def cmd_latency_bench(args) -> int:
    cfg = _otfs_from_args(args)
    pairs = [load_model(p, expected_cfg=cfg) for p in args.model]
    nets = args.net if args.net is not None else ([] if args.model else [(8 * cfg.MN, 8 * cfg.MN), (16 * cfg.MN, 64 * cfg.MN)])
    rng = make_rng(args.seed, 4)
    norm = NormalizationSpec.for_config(cfg)
    for l1, l2 in nets:
        dims = [2, l1, l2, cfg.MN]
        pairs.append(PredictorPair(init_model(dims, rng), init_model(dims, rng), cfg, norm))
    report = latency_bench(cfg, pairs, n_pairs=args.n_pairs, rng=make_rng(args.seed, 5))
    for r in report.records:
        label = r.strategy if r.l1 is None else f"{r.strategy} L1={r.l1} L2={r.l2}"
        print(f"{label:28s} mean {r.mean_us:12.1f} us  p50 {r.p50_us:12.1f} us  p95 {r.p95_us:12.1f} us")
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        write_latency_csv(report, args.out)
        print(f"wrote {args.out}")
    if not args.gate:
        return 0
    ok = True
    for r in report.records:
        if r.strategy != "fnn":
            continue
        s = report.speedup("fnn", r.l1, r.l2)
        need = SPEEDUP_GATE_WIDE if r.l2 > r.l1 else SPEEDUP_GATE_SQUARE
        ok &= _gate(s >= need, f"FNN L1={r.l1} L2={r.l2} vs full", f"speedup {s:.1f}x (need {need:g}x)")
    return 0 if ok else 1


# validate-model ------------------------------------------------------------


def column_errors(pair: PredictorPair, n_pairs: int, rng) -> np.ndarray:
    """Relative L2 error of predicted vs exact DD columns on random pairs."""
    taus, nus = random_dd_pairs(pair.cfg, n_pairs, rng)
    pred = pair.columns(taus, nus)
    exact = cddpm_columns(pair.cfg, taus, nus)
    return np.linalg.norm(pred - exact, axis=1) / np.linalg.norm(exact, axis=1)


def cmd_validate_model(args) -> int:
    pair = load_model(args.model)
    rel = column_errors(pair, args.n_pairs, make_rng(args.seed, 6))
    med = float(np.median(rel))
    print(
        f"model {args.model}: layer_dims={pair.layer_dims}, M={pair.cfg.M}, N={pair.cfg.N}; "
        f"relative column error median {med:.4f}, p90 {np.quantile(rel, 0.9):.4f}, max {rel.max():.4f}"
    )
    if args.gate:
        return 0 if _gate(med < MEDIAN_REL_ERR_GATE, "median relative error", f"{med:.4f} < {MEDIAN_REL_ERR_GATE}") else 1
    return 0


# parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fracdd", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", required=True)

    def geometry(sp):
        sp.add_argument("--M", type=int, help="delay bins")
        sp.add_argument("--N", type=int, help="Doppler bins")

    sp = sub.add_parser("gen-data", help="generate a surrogate training set (.npz)")
    geometry(sp)
    sp.add_argument("--samples", type=int, default=50_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_gen_data)

    sp = sub.add_parser("train", help="train a surrogate network pair")
    sp.add_argument("--preset", default="desk", choices=sorted(PRESETS))
    geometry(sp)
    sp.add_argument("--l1", type=int)
    sp.add_argument("--l2", type=int)
    sp.add_argument("--samples", type=int)
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--batch", type=int)
    sp.add_argument("--lr", type=float)
    sp.add_argument("--lr-period", type=int, help="epochs between LR halvings")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--data", help="dataset from gen-data instead of generating one")
    sp.add_argument("--history", help="write the per-epoch loss trace to this CSV")
    sp.add_argument("--out", required=True, help="model file to write")
    sp.add_argument("--gate", action="store_true", help="fail unless final loss < half of epoch-1 loss")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval-sweep", help="NMSE / detected-path sweep over pilot SNR")
    sp.add_argument("--config", help="YAML experiment config; flags below override it")
    geometry(sp)
    sp.add_argument("--methods", nargs="+", choices=["pipic", "dl-pipic"])
    sp.add_argument("--model", help="model file for dl-pipic")
    sp.add_argument("--psnr", nargs="+", type=float, help="PSNR grid in dB")
    sp.add_argument("--realizations", type=int)
    sp.add_argument("--output-dir")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--workers", type=int)
    sp.add_argument("--gate", action="store_true", help="check NMSE and path-count shapes")
    sp.set_defaults(func=cmd_eval_sweep)

    sp = sub.add_parser("latency-bench", help="per-call latency of column evaluation strategies")
    geometry(sp)
    sp.add_argument("--model", action="append", default=[], help="trained model file (repeatable)")
    sp.add_argument(
        "--net", action="append", type=_parse_net, metavar="L1,L2",
        help="untrained network size to time (repeatable); default 8MN,8MN and 16MN,64MN",
    )
    sp.add_argument("--n-pairs", type=int, default=200)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", help="latency CSV path")
    sp.add_argument("--gate", action="store_true", help="check speedups over brute force")
    sp.set_defaults(func=cmd_latency_bench)

    sp = sub.add_parser("validate-model", help="surrogate accuracy against exact columns")
    sp.add_argument("--model", required=True)
    sp.add_argument("--n-pairs", type=int, default=500)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--gate", action="store_true", help=f"fail unless median error < {MEDIAN_REL_ERR_GATE}")
    sp.set_defaults(func=cmd_validate_model)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
