"""Command-line front end.

Subcommands: simulate, sweep, bopt-empirical, bopt-analytic, approx,
scaling, preset. Values from ``--config`` (a JSON object of
:class:`~fbdiv.simulator.ExperimentConfig` fields) are overridden by any
flag given on the command line.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys

from . import analytic
from .schemes import ConfigError
from .simulator import (
    PURC,
    RBF,
    ZF_PERFECT,
    ZF_RVQ,
    ExperimentConfig,
    argmax_band,
    empirical_bopt,
    load_config,
    results_to_csv,
    results_to_json,
    run,
    sweep,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_USAGE = 64

SUBCOMMANDS = ("simulate", "sweep", "bopt-empirical", "bopt-analytic", "approx", "scaling", "preset")


def _num_list(text: str) -> list[float]:
    """Parse ``"1,2,5"`` or an inclusive range ``"lo:hi[:step]"``."""
    out: list[float] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            bits = [float(x) for x in part.split(":")]
            lo, hi = bits[0], bits[1]
            step = bits[2] if len(bits) > 2 else 1.0
            n = int(math.floor((hi - lo) / step + 1e-9)) + 1
            out.extend(lo + i * step for i in range(n))
        else:
            out.append(float(part))
    return [int(v) if float(v).is_integer() else v for v in out]


def _add_system_flags(p: argparse.ArgumentParser, need_b: bool = True) -> None:
    p.add_argument("--config", help="JSON file with experiment fields")
    p.add_argument("--scheme", help="rbf | zf-rvq | purc | zf-perfect")
    p.add_argument("--M", type=int, help="transmit antennas")
    p.add_argument("--snr-db", type=float, help="SNR P in dB")
    p.add_argument("--T", type=int, help="total feedback bits")
    if need_b:
        p.add_argument("--B", type=float, help="feedback bits per user")
    p.add_argument("--users", type=int, help="override K = floor(T/B)")
    p.add_argument("--trials", type=int, help="Monte Carlo frames per point")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--rvq-method", choices=("statistical", "explicit"))


def _add_output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="output file (default: standard output)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--workers", type=int, help="worker processes (env FBDIV_WORKERS)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fbdiv", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(SUBCOMMANDS) + "}")

    p = sub.add_parser("simulate", help="Monte Carlo sum rate of one configuration")
    _add_system_flags(p)
    _add_output_flags(p)

    p = sub.add_parser("sweep", help="simulate along one axis")
    _add_system_flags(p)
    p.add_argument("--axis", choices=("B", "T", "P_dB"))
    p.add_argument("--values", type=_num_list, help="comma list or lo:hi[:step]")
    _add_output_flags(p)

    p = sub.add_parser("bopt-empirical", help="empirical best bits per user")
    _add_system_flags(p, need_b=False)
    p.add_argument("--b-values", type=_num_list, help="restrict the B grid")
    _add_output_flags(p)

    p = sub.add_parser("bopt-analytic", help="analytic best bits per user")
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--snr-db", type=float, required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--out")

    p = sub.add_parser("approx", help="approximate ZF-RVQ rate versus B")
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--snr-db", type=float, required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--B", type=_num_list, help="B values (default: feasible integers)")
    p.add_argument("--out")

    p = sub.add_parser("scaling", help="analytic optimum over a grid")
    p.add_argument("--M", type=_num_list, default=[4, 6])
    p.add_argument("--snr-db", type=_num_list, default=[0, 10, 20])
    p.add_argument("--T", type=_num_list, default=[100, 300, 1000, 5000])
    p.add_argument("--out")

    p = sub.add_parser("preset", help="data tables behind the result figures")
    p.add_argument("name", choices=sorted(PRESETS))
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--empirical", action="store_true",
                   help="add Monte Carlo optima to the B-optimum presets (slow)")
    _add_output_flags(p)
    return parser


_FLAG_FIELDS = {
    "scheme": "scheme", "M": "M", "snr_db": "snr_db", "T": "T", "B": "B", "users": "users",
    "trials": "trials", "seed": "seed", "rvq_method": "rvq_method",
}


def _resolve(args) -> dict:
    fields = load_config(args.config) if getattr(args, "config", None) else {}
    for attr, name in _FLAG_FIELDS.items():
        v = getattr(args, attr, None)
        if v is not None:
            fields[name] = v
    if isinstance(fields.get("B"), float) and fields["B"].is_integer():
        fields["B"] = int(fields["B"])
    return fields


def _config(fields: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.from_dict(fields)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _rows_csv(rows: list[dict], columns) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()


def _render(results, fmt: str, **extra) -> str:
    return results_to_json(results, **extra) if fmt == "json" else results_to_csv(results)


def cmd_simulate(args) -> int:
    cfg = _config(_resolve(args))
    _emit(_render([run(cfg, args.workers)], args.format), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    fields = _resolve(args)
    if args.axis:
        fields["sweep_axis"] = args.axis
    if args.values is not None:
        fields["sweep_values"] = args.values
    cfg = _config(fields)
    if cfg.sweep_axis is None:
        raise ConfigError("sweep_axis: --axis is required")
    _emit(_render(sweep(cfg, args.workers), args.format), args.out)
    return EXIT_OK


def cmd_bopt_empirical(args) -> int:
    fields = _resolve(args)
    fields.setdefault("scheme", ZF_RVQ)
    missing = [k for k in ("M", "snr_db", "T") if k not in fields]
    if missing:
        raise ConfigError(f"missing field(s): {', '.join(missing)}")
    res = empirical_bopt(fields["snr_db"], fields["M"], fields["T"],
                         trials=fields.get("trials", 10_000), seed=fields.get("seed", 0),
                         b_values=args.b_values, scheme=fields["scheme"], workers=args.workers)
    if args.format == "json":
        text = results_to_json(list(res.results), b_opt=res.b_opt, band=list(res.band))
    else:
        text = _rows_csv([{"M": fields["M"], "P_dB": float(fields["snr_db"]), "T": fields["T"],
                           "scheme": res.best.config.scheme, "B_opt": res.b_opt,
                           "band": " ".join(map(str, res.band)), "mean_rate": res.best.mean_rate,
                           "stderr": res.best.stderr, "trials": res.best.trials,
                           "seed": fields.get("seed", 0)}],
                         ("scheme", "M", "P_dB", "T", "B_opt", "band", "mean_rate", "stderr",
                          "trials", "seed"))
    _emit(text, args.out)
    return EXIT_OK


def _analytic_row(M: int, p_db: float, T: float) -> dict:
    P = analytic.db_to_linear(p_db)
    st = analytic.bopt_stationary(P, M, T)
    return {"M": M, "P_dB": float(p_db), "T": T, "B_hat": st.b,
            "B_brute": analytic.bopt_bruteforce(P, M, T),
            "objective_value": analytic.objective(P, M, T, st.b), "boundary": st.boundary}


def cmd_bopt_analytic(args) -> int:
    T = int(args.T) if float(args.T).is_integer() else args.T
    row = _analytic_row(args.M, args.snr_db, T)
    _emit(_rows_csv([row], (*analytic.SCALING_COLUMNS, "boundary")), args.out)
    return EXIT_OK


def cmd_approx(args) -> int:
    P = analytic.db_to_linear(args.snr_db)
    lo, hi = analytic.feasible_range(args.M, args.T)
    bs = args.B if args.B is not None else list(range(math.ceil(lo), math.floor(hi) + 1))
    rows = []
    for b in bs:
        try:
            rate = analytic.rate_approx(P, args.M, args.T, b)
        except analytic.DomainError:
            continue
        rows.append({"M": args.M, "P_dB": float(args.snr_db), "T": args.T, "B": b, "rate_approx": rate})
    _emit(_rows_csv(rows, ("M", "P_dB", "T", "B", "rate_approx")), args.out)
    return EXIT_OK


def cmd_scaling(args) -> int:
    rows = [_analytic_row(int(M), p, T) for M in args.M for p in args.snr_db for T in args.T]
    _emit(_rows_csv(rows, (*analytic.SCALING_COLUMNS, "boundary")), args.out)
    return EXIT_OK


# -- figure presets -------------------------------------------------------------


def _rate_vs_T(M: int, b_values, t_values, trials: int, seed: int, workers):
    results = []
    for T in t_values:
        results.append(run(ExperimentConfig(RBF, M, 10.0, T, trials=trials, seed=seed), workers))
        for B in b_values:
            if 1 + math.log2(M) <= B <= T / M:
                results.append(run(ExperimentConfig(ZF_RVQ, M, 10.0, T, B=B, trials=trials, seed=seed), workers))
    return results


def preset_fig_m4_sweep(args):
    return _rate_vs_T(4, (10, 15, 20, 25, 30), (40, 60, 100, 150, 200, 300, 500, 1000),
                      args.trials, args.seed, args.workers)


def preset_fig_m6_sweep(args):
    return _rate_vs_T(6, (15, 25, 35, 45), (100, 200, 300, 500, 1000, 2000),
                      args.trials, args.seed, args.workers)


def preset_fig_large_t(args):
    results = []
    for T in (1000, 2000, 5000):
        zf = [run(ExperimentConfig(ZF_RVQ, 4, 10.0, T, B=B, trials=args.trials, seed=args.seed), args.workers)
              for B in range(15, 41)]
        purc = [run(ExperimentConfig(PURC, 4, 10.0, T, B=B, trials=args.trials, seed=args.seed), args.workers)
                for B in range(2, 11)]
        results.append(argmax_band(zf).best)
        results.append(argmax_band(purc).best)
        results.append(run(ExperimentConfig(RBF, 4, 10.0, T, trials=args.trials, seed=args.seed), args.workers))
        results.append(run(ExperimentConfig(ZF_PERFECT, 4, 10.0, T, trials=args.trials, seed=args.seed),
                           args.workers))
    return results


def _bopt_rows(grid, args):
    rows = []
    for M, p_db, T in grid:
        row = _analytic_row(M, p_db, T)
        if args.empirical:
            res = empirical_bopt(p_db, M, T, trials=args.trials, seed=args.seed, workers=args.workers)
            row["B_empirical"] = res.b_opt
        rows.append(row)
    return rows


def preset_fig_bopt_vs_t(args):
    return _bopt_rows([(M, 10.0, T) for M in (4, 6) for T in (100, 150, 200, 300, 500, 1000, 2000, 5000, 10000)], args)


def preset_fig_bopt_vs_snr(args):
    return _bopt_rows([(M, p, 1000) for M in (4, 6) for p in (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)], args)


PRESETS = {
    "fig-m4-sweep": preset_fig_m4_sweep,
    "fig-m6-sweep": preset_fig_m6_sweep,
    "fig-large-T": preset_fig_large_t,
    "fig-bopt-vs-T": preset_fig_bopt_vs_t,
    "fig-bopt-vs-snr": preset_fig_bopt_vs_snr,
}


def cmd_preset(args) -> int:
    out = PRESETS[args.name](args)
    if out and isinstance(out[0], dict):
        cols = (*analytic.SCALING_COLUMNS, "boundary") + (("B_empirical",) if args.empirical else ())
        text = _rows_csv(out, cols) if args.format == "csv" else json.dumps(out, indent=2, sort_keys=True) + "\n"
    else:
        text = _render(out, args.format, preset=args.name)
    _emit(text, args.out)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "bopt-empirical": cmd_bopt_empirical,
    "bopt-analytic": cmd_bopt_analytic,
    "approx": cmd_approx,
    "scaling": cmd_scaling,
    "preset": cmd_preset,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    positional = [a for a in argv if not a.startswith("-")]
    if not positional or positional[0] not in COMMANDS:
        if not any(a in ("-h", "--help") for a in argv):
            parser.print_usage(sys.stderr)
            if positional:
                print(f"fbdiv: unknown subcommand {positional[0]!r}", file=sys.stderr)
            return EXIT_USAGE
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, analytic.DomainError) as exc:
        print(f"fbdiv: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"fbdiv: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
