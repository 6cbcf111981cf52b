"""Command-line interface.

Subcommands: gen-slats, estimate, sweep, eval. Exit codes: 0 on success, 2 on
usage errors, 3 on data/ingestion errors, 4 on numerical failure.

A flat ``key = value`` config file mirroring the solver settings can be passed
with --config; explicit command-line flags override file values.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from .core import (
    DisparityField,
    IngestionError,
    NumericalError,
    ParameterError,
    PenaltyKind,
    PlanError,
    SolverConfig,
)
from .data import (
    SceneSpec,
    Slat,
    crosshair_view_set,
    generate_slats,
    load_lightfield,
    load_slats_dir,
    noisy_viewset,
    parse_flat_cfg,
    read_pfm,
    save_slats_dir,
    write_pfm,
    write_pgm,
)
from .experiment import PAPER_ALPHAS, METHODS, canonical_method, emit_csv, run_experiment
from .metrics import rmse_hypotheses, rmse_plain
from .schedule import CustomOrder, GateFormula, plan_schedule, run_progressive


def _parse_penalty(text: str) -> PenaltyKind:
    parts = text.lower().split(":")
    tag = parts[0]
    if tag == "l2":
        return PenaltyKind.l2()
    if tag in ("huber", "l1"):
        return PenaltyKind.huber_l1(float(parts[1]) if len(parts) > 1 else 1e-4)
    if tag == "welsch":
        if len(parts) == 1 or parts[1] == "auto":
            return PenaltyKind.welsch_auto()
        return PenaltyKind.welsch(float(parts[1]))
    raise ParameterError(f"unknown penalty {text!r}")


_CONFIG_FLOAT_KEYS = ("alpha", "dog_sigma", "cg_tol", "schedule_k", "schedule_c")
_CONFIG_INT_KEYS = ("irls_iters", "cg_max_iters", "seed")


def build_config(file_path: str | None = None, **overrides) -> SolverConfig:
    """SolverConfig from an optional flat config file plus keyword overrides."""
    values: dict = {}
    if file_path:
        raw = parse_flat_cfg(file_path)
        for key, text in raw.items():
            if key in _CONFIG_FLOAT_KEYS:
                values[key] = float(text)
            elif key in _CONFIG_INT_KEYS:
                values[key] = int(text)
            elif key in ("data_penalty", "reg_penalty"):
                values[key] = _parse_penalty(text)
            elif key in ("gradient_mode", "reg_form"):
                values[key] = text
            else:
                raise ParameterError(f"{file_path}: unknown config key {key!r}")
    for key, value in overrides.items():
        if value is not None:
            values[key] = value
    return SolverConfig(**values)


def _detect_dataset(path: str):
    """Return ("slats"|"lightfield", loaded) for a dataset directory."""
    cfg_path = os.path.join(path, "parameters.cfg")
    if not os.path.isdir(path) or not os.path.exists(cfg_path):
        raise IngestionError(f"{path}: not a dataset directory (no parameters.cfg)")
    probe = parse_flat_cfg(cfg_path) if open(cfg_path).read(1) != "[" else {}
    if probe.get("dataset") == "slats":
        viewset, gt, meta = load_slats_dir(path)
        return "slats", (viewset, gt, meta)
    lf = load_lightfield(path)
    return "lightfield", lf


def _parse_schedule(text: str | None, kind: str, config: SolverConfig):
    if text is None:
        text = "crosshair" if kind == "lightfield" else "gate"
    if text.startswith("gate"):
        k, c = config.schedule_k, config.schedule_c
        if ":" in text:
            for item in text.split(":", 1)[1].split(","):
                key, value = item.split("=")
                if key.strip() == "k":
                    k = float(value)
                elif key.strip() == "c":
                    c = float(value)
                else:
                    raise ParameterError(f"unknown gate parameter {key!r}")
        return GateFormula(k, c)
    if text == "crosshair":
        return CustomOrder()
    raise ParameterError(f"unknown schedule {text!r}")


def _add_config_args(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat key=value solver config file")
    p.add_argument("--irls-iters", type=int, dest="irls_iters")
    p.add_argument("--cg-tol", type=float, dest="cg_tol")
    p.add_argument("--cg-max-iters", type=int, dest="cg_max_iters")
    p.add_argument("--dog-sigma", type=float, dest="dog_sigma")
    p.add_argument("--gradient-mode", choices=("average", "paper_sum"), dest="gradient_mode")
    p.add_argument("--reg-form", choices=("divergence", "symmetrized", "literal"), dest="reg_form")


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mvdisp", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-slats", help="generate a synthetic slats dataset")
    g.add_argument("--out", required=True)
    g.add_argument("--views", type=int, default=31)
    g.add_argument("--width", type=int, default=640)
    g.add_argument("--height", type=int, default=360)
    g.add_argument("--noise-var", type=float, default=0.01)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--bg-tilt", type=float, default=None,
                   help="background plane slope in w per pixel (default 0.672/width)")

    e = sub.add_parser("estimate", help="estimate disparity for a dataset")
    e.add_argument("--data", required=True)
    e.add_argument("--method", default="welsch-l1")
    e.add_argument("--alpha", type=float, required=True)
    e.add_argument("--schedule", help="gate:k=1,c=1 or crosshair")
    e.add_argument("--out-disp", required=True)
    e.add_argument("--out-png", help="optional PGM preview path")
    _add_config_args(e)

    s = sub.add_parser("sweep", help="method x alpha sweep with per-stage RMSE rows")
    s.add_argument("--data", required=True)
    s.add_argument("--methods", default="l2-l2,l2-l1,l1-l1,welsch-l1")
    s.add_argument("--alphas", default=",".join(f"{a:g}" for a in PAPER_ALPHAS))
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--schedule")
    s.add_argument("--timing", action="store_true",
                   help="record wall-clock runtimes (breaks byte determinism)")
    _add_config_args(s)

    v = sub.add_parser("eval", help="RMSE between an estimate and ground truth")
    v.add_argument("--est", required=True)
    v.add_argument("--gt", required=True)
    v.add_argument("--hypotheses", action="store_true",
                   help="nine-hypothesis RMSE against a 2x ground truth")
    return ap


def _config_from_args(args) -> SolverConfig:
    return build_config(
        getattr(args, "config", None),
        irls_iters=getattr(args, "irls_iters", None),
        cg_tol=getattr(args, "cg_tol", None),
        cg_max_iters=getattr(args, "cg_max_iters", None),
        dog_sigma=getattr(args, "dog_sigma", None),
        gradient_mode=getattr(args, "gradient_mode", None),
        reg_form=getattr(args, "reg_form", None),
    )


def _cmd_gen_slats(args) -> int:
    scale = args.width / 640.0
    slats = tuple(
        Slat(round(x * scale), max(4.0, round(w * scale)))
        for x, w in ((76, 60), (232, 48), (376, 68), (524, 40))
    )
    tilt = args.bg_tilt if args.bg_tilt is not None else 0.672 / args.width
    spec = SceneSpec(
        n_views=args.views, width=args.width, height=args.height, slats=slats,
        background_tilt_x=tilt,
    )
    viewset, gt = generate_slats(spec)
    noisy = noisy_viewset(viewset, args.noise_var, args.seed)
    save_slats_dir(args.out, noisy, gt, spec, args.noise_var, args.seed)
    print(f"wrote {args.views} views to {args.out}")
    return 0


def _cmd_estimate(args) -> int:
    config = _config_from_args(args)
    kind, data = _detect_dataset(args.data)
    if kind == "slats":
        viewset, _, _ = data
        unit = 1.0
    else:
        viewset = crosshair_view_set(data)
        unit = data.disparity_unit
    method = canonical_method(args.method)
    data_kind, reg_kind = METHODS[method]
    config = replace(
        config, alpha=args.alpha, data_penalty=data_kind, reg_penalty=reg_kind
    )
    plan = plan_schedule(viewset, _parse_schedule(args.schedule, kind, config))
    stages = run_progressive(viewset, plan, config)
    w = stages[-1].w
    write_pfm(args.out_disp, w.w * unit)
    if args.out_png:
        write_pgm(args.out_png, w.w)
    print(f"estimated disparity over {len(plan)} stages -> {args.out_disp}")
    return 0


def _cmd_sweep(args) -> int:
    config = _config_from_args(args)
    kind, data = _detect_dataset(args.data)
    if kind == "slats":
        viewset, gt, meta = data
        gt_mode, unit = "hypotheses", 1.0
        seed = args.seed if args.seed is not None else int(meta.get("seed", 0))
    else:
        viewset = crosshair_view_set(data)
        gt, gt_mode, unit = data.gt, "plain", data.disparity_unit
        seed = args.seed if args.seed is not None else 0
    plan = plan_schedule(viewset, _parse_schedule(args.schedule, kind, config))
    methods = [canonical_method(m) for m in args.methods.split(",") if m]
    alphas = [float(a) for a in args.alphas.split(",") if a]
    rows = run_experiment(
        viewset, gt, plan, config,
        methods=methods, alphas=alphas, seed=seed,
        gt_mode=gt_mode, gt_unit=unit, timing=args.timing,
    )
    emit_csv(rows, args.out)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_eval(args) -> int:
    est = read_pfm(args.est).astype(np.float64)
    gt = read_pfm(args.gt).astype(np.float64)
    if args.hypotheses:
        value = rmse_hypotheses(
            DisparityField(est), DisparityField(gt, upsampled=True)
        )
    else:
        value = rmse_plain(est, gt)
    print(f"RMSE {value:.6g}")
    return 0


_COMMANDS = {
    "gen-slats": _cmd_gen_slats,
    "estimate": _cmd_estimate,
    "sweep": _cmd_sweep,
    "eval": _cmd_eval,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ParameterError, PlanError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except IngestionError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
