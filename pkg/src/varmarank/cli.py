"""Command-line front end: adequacy tests, simulation, efficiency tables,
Monte Carlo experiments, and diagnostics.

Exit codes: 0 completed, 2 input error, 3 numerical failure.  All numeric
output is serialized with 12 significant digits; fixed seeds give
byte-identical output.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import are as are_mod
from .adaptive import statistic_adaptive
from .elliptical import (
    RadialLaw,
    density_by_name,
    make_score_pair,
    sample_elliptical,
)
from .mc import Experiment, run_experiment, stream
from .structmat import structural_set
from .teststat import NumericalError, statistic_gaussian, statistic_QK
from .tyler import TylerConvergenceError
from .varma import VarmaSpec, check_assumption_A, residuals, simulate

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3


class InputError(ValueError):
    pass


# -- config / io ---------------------------------------------------------------


def _parse_value(text: str):
    text = text.strip().strip('"').strip("'")
    if text.startswith("[") and text.endswith("]"):
        text = text[1:-1]
        return [float(x) for x in text.replace(",", " ").split()]
    parts = text.replace(",", " ").split()
    if len(parts) > 1:
        return [float(x) for x in parts]
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_flat_config(path: str) -> dict:
    """Flat key = value file; values are scalars, names, or number lists
    (row-major matrices).  Lines starting with # are comments."""
    out: dict = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise InputError(f"malformed line in {path!r}: {line!r}")
                key, val = line.split("=", 1)
                out[key.strip()] = _parse_value(val)
    except OSError as exc:
        raise InputError(f"cannot read config {path!r}: {exc}") from exc
    return out


def spec_from_config(cfg: dict) -> VarmaSpec:
    try:
        k = int(cfg["k"])
        p = int(cfg.get("p", 0))
        q = int(cfg.get("q", 0))
        A = [np.reshape(np.asarray(cfg[f"A{i}"], dtype=float), (k, k)) for i in range(1, p + 1)]
        B = [np.reshape(np.asarray(cfg[f"B{j}"], dtype=float), (k, k)) for j in range(1, q + 1)]
    except KeyError as exc:
        raise InputError(f"spec config is missing {exc}") from exc
    except Exception as exc:
        raise InputError(f"bad spec config: {exc}") from exc
    return VarmaSpec(k, p, q, tuple(A), tuple(B))


def read_series(path: str) -> np.ndarray:
    """CSV series, one row per time point, optional header."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            first = fh.readline()
        skip = 0
        try:
            [float(x) for x in first.strip().split(",") if x != ""]
        except ValueError:
            skip = 1
        data = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
    except OSError as exc:
        raise InputError(f"cannot read series {path!r}: {exc}") from exc
    except ValueError as exc:
        raise InputError(f"malformed series CSV {path!r}: {exc}") from exc
    return data


def write_series(path, data: np.ndarray) -> None:
    rows = (",".join(_fmt(x) for x in row) for row in np.atleast_2d(data))
    text = "\n".join(rows) + "\n"
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


def _round12(obj):
    if isinstance(obj, dict):
        return {k: _round12(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round12(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not np.isfinite(x):
            return None
        return float(f"{x:.12g}")
    return obj


def emit_json(payload: dict) -> None:
    json.dump(_round12(payload), sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def parse_scores_arg(text: str):
    """--scores value: sign|spearman|vdw|laplace|fscore:<density>[:<param>]|
    adaptive|gaussian."""
    text = text.strip().lower()
    if text in ("sign", "spearman", "vdw", "laplace", "adaptive", "gaussian"):
        return text, None
    if text.startswith("fscore:"):
        parts = text.split(":")
        if len(parts) == 2:
            return "fscore", density_by_name(parts[1])
        if len(parts) == 3:
            return "fscore", density_by_name(parts[1], float(parts[2]))
    raise InputError(f"unknown score family {text!r}")


def _density_from_args(args) -> "RadialLaw | None":
    name = getattr(args, "density", "gaussian")
    param = getattr(args, "nu", None)
    return density_by_name(name, param)


# -- subcommands ----------------------------------------------------------------


def cmd_test(args) -> int:
    series = read_series(args.data)
    spec = spec_from_config(read_flat_config(args.null))
    rep = check_assumption_A(spec)
    if not rep.passed:
        raise InputError(f"null spec fails stability diagnostics: {rep.as_dict()}")
    try:
        p1, q1 = (int(x) for x in args.alt_orders.split(","))
    except Exception as exc:
        raise InputError(f"bad --alt-orders {args.alt_orders!r}") from exc
    lags = None if args.lags == "full" else int(args.lags)
    kind, dens = parse_scores_arg(args.scores)
    if kind == "gaussian":
        report = statistic_gaussian(series, spec, p1, q1, alpha=args.alpha, lags=lags)
    elif kind == "adaptive":
        bw = None if args.kde_bandwidth == "auto" else float(args.kde_bandwidth)
        report = statistic_adaptive(series, spec, p1, q1, alpha=args.alpha, bandwidth=bw)
    else:
        scores = make_score_pair(kind, series.shape[1], dens)
        report = statistic_QK(
            series,
            spec,
            p1,
            q1,
            scores,
            alpha=args.alpha,
            lags=lags,
            tyler_tol=args.tyler_tol,
            tyler_max_iter=args.tyler_max_iter,
        )
    emit_json(report.as_dict())
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = spec_from_config(read_flat_config(args.null))
    rep = check_assumption_A(spec)
    if not rep.passed:
        raise InputError(f"spec fails stability diagnostics: {rep.as_dict()}")
    density = _density_from_args(args)
    law = RadialLaw(density, spec.k)
    sigma = (
        np.eye(spec.k)
        if args.sigma is None
        else np.reshape(np.asarray(read_flat_config(args.sigma)["sigma"], float), (spec.k, spec.k))
    )
    rng = stream(args.seed, 0)
    eps = sample_elliptical(law, sigma, args.n + args.burn_in, rng)
    target = spec
    if args.tau is not None:
        tau = np.asarray(read_flat_config(args.tau)["tau"], dtype=float)
        p1 = int(args.alt_orders.split(",")[0]) if args.alt_orders else spec.p
        q1 = int(args.alt_orders.split(",")[1]) if args.alt_orders else spec.q
        target = spec.perturbed(tau, p1, q1, args.n)
    series = simulate(target, eps, burn_in=args.burn_in)
    write_series(args.output, series)
    return EXIT_OK


def cmd_are(args) -> int:
    rows = []
    if args.table == "power-exponential":
        ks = [1, 3, 4, 6, 8, 10]
        nus = [0.1, 0.2, 0.3, 0.5, 1.0, 2.0, 5.0, 10.0]
        rows.append("k," + ",".join(_fmt(v) for v in nus))
        max_dev = 0.0
        for k in ks:
            cells = []
            for nu in nus:
                try:
                    val = are_mod.are_power_exponential(k, nu)
                    cells.append(_fmt(val))
                    ref = are_mod.POWER_EXPONENTIAL_ARE_REFERENCE.get((k, nu))
                    if ref is not None:
                        max_dev = max(max_dev, abs(val - ref))
                except ValueError:
                    cells.append("")
            rows.append(f"{k}," + ",".join(cells))
        tol = 0.01
    elif args.table == "spearman-bound":
        rows.append("k,bound")
        max_dev = 0.0
        for k, ref in are_mod.SPEARMAN_BOUND_REFERENCE.items():
            val = are_mod.spearman_lower_bound(k)
            rows.append(f"{k},{_fmt(val)}")
            max_dev = max(max_dev, abs(val - ref))
        tol = 0.001
    else:
        raise InputError(f"unknown table {args.table!r}")
    out = "\n".join(rows) + "\n"
    if args.check:
        out += f"# max deviation from reference: {_fmt(max_dev)} (tolerance {tol})\n"
        if max_dev > tol:
            sys.stdout.write(out)
            return EXIT_NUMERIC
    sys.stdout.write(out)
    return EXIT_OK


def cmd_mc(args) -> int:
    cfg = read_flat_config(args.config)
    spec = spec_from_config(cfg)
    density = density_by_name(
        str(cfg.get("density", "gaussian")), cfg.get("nu")
    )
    kinds = str(cfg.get("scores", "vdw")).split()
    tau = np.asarray(cfg["tau"], dtype=float) if "tau" in cfg else None
    exp = Experiment(
        spec=spec,
        p1=int(cfg.get("p1", spec.p)),
        q1=int(cfg.get("q1", spec.q)),
        density=density,
        score_kinds=tuple(kinds),
        n=int(cfg["n"]),
        replications=int(cfg.get("replications", 100)),
        alpha=float(cfg.get("alpha", 0.05)),
        tau=tau,
        seed=int(cfg.get("seed", args.seed)),
        burn_in=int(cfg.get("burn_in", 500)),
    )
    out = run_experiment(exp)
    payload = {kind: summary.as_dict() for kind, summary in out.items()}
    emit_json(payload)
    if args.dump_stats:
        for kind, summary in out.items():
            write_series(f"{args.dump_stats}.{kind}.csv", summary.statistics[:, None])
    return EXIT_OK


def cmd_diag(args) -> int:
    spec = spec_from_config(read_flat_config(args.null))
    rep = check_assumption_A(spec)
    payload: dict = {"assumption_A": rep.as_dict()}
    if args.dump_structural:
        n = args.n or (4 * (spec.k**2) * (spec.p + spec.q + 2))
        try:
            p1 = q1 = None
            if args.alt_orders:
                p1, q1 = (int(x) for x in args.alt_orders.split(","))
            struct = structural_set(spec, p1 or spec.p + 1, q1 or spec.q, n)
            payload["structural"] = {
                "pi": struct.pi,
                "pi0": struct.pi0,
                "df": struct.df,
                "D": [d.tolist() for d in struct.D],
                "M_shape": list(struct.M.shape),
                "Q_shape": list(struct.Q.shape),
                "J_identity_sigma": struct.J(np.eye(spec.k)).tolist(),
            }
        except Exception as exc:
            payload["structural_error"] = str(exc)
    if args.dump_crosscov and args.data:
        series = read_series(args.data)
        z = residuals(spec, series, check=False)
        from .tyler import tyler_fit, tyler_residuals
        from .crosscov import rank_crosscov_all_lags

        fit = tyler_fit(z)
        rr = tyler_residuals(fit, z)
        kind, dens = parse_scores_arg(args.scores)
        scores = make_score_pair(kind, spec.k, dens)
        lags = min(args.lags_dump, z.shape[0] - 1)
        gammas = rank_crosscov_all_lags(scores, rr, fit, max_lag=lags)
        payload["crosscov"] = {str(i + 1): g.tolist() for i, g in enumerate(gammas)}
    emit_json(payload)
    return EXIT_OK


# -- entry ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="varmarank", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="run an adequacy test on a series")
    t.add_argument("data", help="CSV series, one row per time point")
    t.add_argument("--null", required=True, help="null spec config file")
    t.add_argument("--alt-orders", required=True, help="p1,q1")
    t.add_argument("--scores", default="vdw")
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--lags", default="full")
    t.add_argument("--tyler-tol", type=float, default=1e-12)
    t.add_argument("--tyler-max-iter", type=int, default=500)
    t.add_argument("--kde-bandwidth", default="auto")
    t.set_defaults(func=cmd_test)

    s = sub.add_parser("simulate", help="simulate a series")
    s.add_argument("--null", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--density", default="gaussian")
    s.add_argument("--nu", type=float, default=None)
    s.add_argument("--sigma", default=None, help="config file with sigma = row-major matrix")
    s.add_argument("--tau", default=None, help="config file with tau = vector")
    s.add_argument("--alt-orders", default=None)
    s.add_argument("--burn-in", type=int, default=0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--output", default="-")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("are", help="emit efficiency tables")
    a.add_argument("--table", required=True, choices=["power-exponential", "spearman-bound"])
    a.add_argument("--check", action="store_true", help="diff against embedded reference values")
    a.set_defaults(func=cmd_are)

    m = sub.add_parser("mc", help="run a Monte Carlo experiment")
    m.add_argument("config", help="experiment descriptor file")
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--dump-stats", default=None, help="prefix for per-replication CSVs")
    m.set_defaults(func=cmd_mc)

    d = sub.add_parser("diag", help="diagnostics for a null spec")
    d.add_argument("--null", required=True)
    d.add_argument("--data", default=None)
    d.add_argument("--alt-orders", default=None)
    d.add_argument("--n", type=int, default=None)
    d.add_argument("--scores", default="vdw")
    d.add_argument("--lags-dump", type=int, default=5)
    d.add_argument("--dump-structural", action="store_true")
    d.add_argument("--dump-crosscov", action="store_true")
    d.set_defaults(func=cmd_diag)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, TylerConvergenceError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
