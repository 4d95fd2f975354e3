"""Command-line entry point: ``estimate``, ``tune``, ``bias-study`` and ``compare``.

Exit codes: 0 on success, 2 on a configuration error, 3 when some cell has
more diverged than converged replications.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

from mlsa_risk.bench import (
    ALGORITHMS,
    TARGETS,
    bench_cell,
    bias_study,
    matched_runtime,
    records_to_csv,
    run_once,
    slope_table,
    warm_up,
)
from mlsa_risk.config import ConfigError, load_config, parse_number
from mlsa_risk.engine import DivergenceError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3

DEFAULT_CONFIG = "option_study"
MATCHED_RMSE = 5e-2


def _eps_list(text: str) -> list[float]:
    vals = [parse_number(t) for t in text.replace(" ", ",").split(",") if t.strip()]
    if not vals:
        raise ConfigError("empty --eps list")
    return vals


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=DEFAULT_CONFIG,
                        help="config file, or a bundled name (option_study, swap_study)")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", type=Path, help="directory for CSV and report files")
    common.add_argument("--algo", help="comma-separated subset of sa,nsa,mlsa")
    common.add_argument("--eps", help="accuracy grid, e.g. '1/32,1/64'")
    common.add_argument("--reps", type=int, help="replications per cell")
    common.add_argument("--target", choices=TARGETS + ("both",), default=None)
    common.add_argument("--no-timing", action="store_true",
                        help="leave runtime columns blank and skip runtime slopes")

    p = argparse.ArgumentParser(prog="mlsa-risk",
                                description="Nested and multilevel SA estimators of VaR and ES.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("estimate", parents=[common], help="one run; prints (VaR, ES) and cost")
    sub.add_parser("tune", parents=[common], help="print MLSA allocations for the grid")
    sub.add_parser("bias-study", parents=[common], help="nested SA bias over an h grid")
    sub.add_parser("compare", parents=[common], help="RMSE/runtime comparison of the algorithms")
    return p


def _load(args):
    cfg = load_config(args.config)
    algos = None
    if args.algo is not None:
        algos = [a.strip().lower() for a in args.algo.split(",") if a.strip()]
        if not algos:
            raise ConfigError("empty --algo list")
        bad = [a for a in algos if a not in ALGORITHMS]
        if bad:
            raise ConfigError(f"unknown algorithm(s) {bad}")
    eps = _eps_list(args.eps) if args.eps is not None else None
    if args.reps is not None and args.reps < 1:
        raise ConfigError("--reps must be >= 1")
    cfg = cfg.with_overrides(seed=args.seed, algorithms=algos, epsilons=eps,
                             replications=args.reps)
    targets = cfg.targets if args.target in (None, "both") else (args.target,)
    return cfg, targets


def _write(out: Path | None, name: str, text: str) -> None:
    if out is None:
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def cmd_estimate(args) -> int:
    cfg, targets = _load(args)
    algo = cfg.algorithms[0]
    eps = cfg.epsilons[0]
    truth = cfg.model.analytic_truth()
    code = EXIT_OK
    lines = ["algorithm,target,epsilon,xi,chi,inner_draws,wall_time_s"]
    for target in targets:
        plan = cfg.plan(algo, target, eps)
        try:
            res = run_once(cfg.model, plan, cfg.seed, 0, cfg.init)
        except DivergenceError as exc:
            print(f"{algo}/{target} eps={eps:g}: {exc}", file=sys.stderr)
            code = EXIT_DIVERGED
            continue
        wall = "" if args.no_timing else repr(res.wall_time)
        lines.append(f"{algo},{target},{eps!r},{res.estimate.xi!r},{res.estimate.chi!r},"
                     f"{res.inner_draws},{wall}")
        print(f"{algo} [{target}] eps={eps:g}: VaR={res.estimate.xi:.6f} "
              f"ES={res.estimate.chi:.6f}  (truth {truth.xi:.6f}, {truth.chi:.6f})  "
              f"cost={res.inner_draws} inner draws")
    _write(args.out, "estimate.csv", "\n".join(lines) + "\n")
    return code


def cmd_tune(args) -> int:
    cfg, targets = _load(args)
    csv_lines = ["target,epsilon,level,h,iterations,cost_share"]
    for target in targets:
        for eps in cfg.epsilons:
            plan = cfg.plan("mlsa", target, eps)
            alloc = plan.allocation
            print(f"\n[{target}] eps={eps:g}  h0=1/{alloc.ladder.h0.k}  M={alloc.ladder.m}  "
                  f"L={alloc.ladder.l_max}  calibration={alloc.calibration:g}  "
                  f"cost={alloc.cost:.6g}")
            print(f"  {'level':>5} {'h_l':>12} {'N_l':>12} {'share':>8}")
            for ell, h, n, share in alloc.rows():
                print(f"  {ell:>5} {h:>12.6g} {n:>12d} {share:>8.3f}")
                csv_lines.append(f"{target},{eps!r},{ell},{h!r},{n},{share!r}")
    text = "\n".join(csv_lines) + "\n"
    print("\n" + text, end="")
    _write(args.out, "tune.csv", text)
    return EXIT_OK


def cmd_bias_study(args) -> int:
    cfg, _ = _load(args)
    if cfg.bias is None:
        raise ConfigError("config has no [bias_study] section")
    bs = cfg.bias
    reps = args.reps if args.reps is not None else bs.replications
    warm_up(cfg.model)
    rows = bias_study(cfg.model, bs.biases, bs.iterations, bs.sched, reps, cfg.seed, cfg.init)
    lines = ["h,xi_error,chi_error,xi_rescaled,chi_rescaled,replications,diverged,"
             "xi_stderr,chi_stderr"]
    print(f"{'h':>10} {'xi-xi*':>12} {'chi-chi*':>12} {'(xi-xi*)/h':>12} {'(chi-chi*)/h':>13}")
    code = EXIT_OK
    for r in rows:
        lines.append(f"{r.h!r},{r.xi_error!r},{r.chi_error!r},{r.xi_rescaled!r},"
                     f"{r.chi_rescaled!r},{r.replications},{r.diverged},{r.xi_stderr!r},"
                     f"{r.chi_stderr!r}")
        print(f"{r.h:>10.5g} {r.xi_error:>12.5g} {r.chi_error:>12.5g} "
              f"{r.xi_rescaled:>12.5g} {r.chi_rescaled:>13.5g}")
        if r.diverged > r.replications:
            code = EXIT_DIVERGED
    _write(args.out, "bias_study.csv", "\n".join(lines) + "\n")
    return code


def _fmt_fit(fit) -> str:
    return "n/a" if fit is None else f"{fit.slope:+.3f} (r2={fit.r_squared:.3f})"


def compare_report(records, timing: bool) -> str:
    """Slopes per (algorithm, target) and the MLSA/NSA speedup at matched RMSE."""
    out = []
    slopes = slope_table(records, timing)
    out.append("slopes (log-log)")
    for (algo, target), entry in sorted(slopes.items()):
        parts = [f"rmse~eps {_fmt_fit(entry['rmse_vs_eps'])}",
                 f"cost~eps {_fmt_fit(entry['cost_vs_eps'])}"]
        if timing:
            parts.insert(0, f"runtime~rmse {_fmt_fit(entry['runtime_vs_rmse'])}")
            parts.insert(0, f"runtime~eps {_fmt_fit(entry['runtime_vs_eps'])}")
        out.append(f"  {algo:>4}/{target:<3} " + "  ".join(parts))
    missing = [r for r in records if r.missing]
    for r in missing:
        out.append(f"  missing cell {r.algorithm}/{r.target} eps={r.epsilon:g} (all diverged)")
    div = [r for r in records if r.diverged and not r.missing]
    for r in div:
        out.append(f"  {r.diverged} diverged replications excluded from "
                   f"{r.algorithm}/{r.target} eps={r.epsilon:g}")
    if timing:
        algos = {r.algorithm for r in records}
        if {"nsa", "mlsa"} <= algos:
            out.append(f"runtime at RMSE {MATCHED_RMSE:g}")
            for target in TARGETS:
                try:
                    t_n, in_n = matched_runtime(records, "nsa", target, MATCHED_RMSE)
                    t_m, in_m = matched_runtime(records, "mlsa", target, MATCHED_RMSE)
                except ValueError:
                    continue
                note = "" if in_n and in_m else "  (extrapolated)"
                out.append(f"  {target}: nsa {t_n:.4g}s  mlsa {t_m:.4g}s  "
                           f"speedup {t_n / t_m:.2f}x{note}")
    return "\n".join(out) + "\n"


def cmd_compare(args) -> int:
    cfg, targets = _load(args)
    timing = not args.no_timing
    if timing:
        warm_up(cfg.model)
    records = []
    code = EXIT_OK
    for algo in cfg.algorithms:
        for target in targets:
            for eps in cfg.epsilons:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RuntimeWarning)
                    rec = bench_cell(cfg.model, cfg.plan(algo, target, eps),
                                     cfg.replications, cfg.seed, cfg.init)
                records.append(rec)
                if rec.diverged > rec.replications:
                    code = EXIT_DIVERGED
                rt = f"{rec.mean_runtime_seconds:.4g}s" if timing else "-"
                print(f"{algo:>4} {target:<3} eps={eps:<10.6g} rmse={rec.rmse:<10.4g} "
                      f"runtime={rt:<10} cost={rec.mean_inner_draws:.4g}", flush=True)
    csv_text = records_to_csv(records, timing)
    report = compare_report(records, timing)
    print(report, end="")
    _write(args.out, "compare.csv", csv_text)
    _write(args.out, "compare_report.txt", report)
    return code


_COMMANDS = {"estimate": cmd_estimate, "tune": cmd_tune,
             "bias-study": cmd_bias_study, "compare": cmd_compare}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
