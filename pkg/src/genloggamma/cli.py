"""
Command line interface: ``genloggamma {fit,test,qq,simulate}``.

Exit codes: 0 success, 2 input error, 3 estimation failure, 4 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass

import numpy as np

from . import fit as fit_model
from .control import Control, RafKind
from .distribution import Theta, quantile, sample
from .exceptions import EstimationError, ParameterDomainError
from .inference import summarize, weighted_wald_test, weighted_wilks_test
from .results import METHODS, FitResult

__all__ = ["main", "read_numbers", "InputError", "UsageError", "simulate_data"]

EXIT_OK, EXIT_INPUT, EXIT_ESTIMATION, EXIT_USAGE = 0, 2, 3, 4
SCHEMA = 1
DEFAULT_PROBS = (0.9, 0.95, 0.99)

log = logging.getLogger(__name__)


class InputError(Exception):
    """Unreadable or invalid data (exit code 2)."""


class UsageError(Exception):
    """Bad flags or flag combinations (exit code 4)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# input


def read_numbers(stream, column: int | None = None, header: bool = False, source: str = "<stdin>") -> np.ndarray:
    """Numbers from one-per-line text, or from CSV column ``column`` (1-based).

    Blank lines and lines starting with ``#`` are skipped.
    """
    values = []
    first = True
    for lineno, line in enumerate(stream, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        if first and header:
            first = False
            continue
        first = False
        if column is None:
            field = text
        else:
            row = next(csv.reader([text]))
            if len(row) < column:
                raise InputError(f"{source}:{lineno}: no column {column} in {text!r}")
            field = row[column - 1].strip()
        try:
            v = float(field)
        except ValueError:
            raise InputError(f"{source}:{lineno}: cannot parse {field!r} as a number") from None
        if not math.isfinite(v):
            raise InputError(f"{source}:{lineno}: non-finite value {field!r}")
        values.append(v)
    return np.array(values, dtype=float)


def _load(path: str, column, header, log_transform: bool, minimum: int = 5) -> np.ndarray:
    try:
        if path == "-":
            y = read_numbers(sys.stdin, column, header)
        else:
            with open(path, encoding="utf-8") as fh:
                y = read_numbers(fh, column, header, source=path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    if log_transform:
        if np.any(y <= 0):
            bad = int(np.flatnonzero(y <= 0)[0]) + 1
            raise InputError(f"--log needs positive values; value #{bad} is {y[bad - 1]:g}")
        y = np.log(y)
    if y.size < minimum:
        raise InputError(f"need at least {minimum} observations, got {y.size}")
    return y


# ---------------------------------------------------------------------------
# flag parsing


def _floats(text: str, count: int | None, what: str) -> list[float]:
    try:
        vals = [float(v) for v in text.replace(";", ",").split(",")]
    except ValueError:
        raise UsageError(f"{what}: cannot parse {text!r}") from None
    if count is not None and len(vals) != count:
        raise UsageError(f"{what} needs {count} comma separated values, got {len(vals)}")
    return vals


def _grid(text: str) -> tuple[float, float, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"--grid needs lower:upper:n, got {text!r}")
    try:
        lower, upper, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"--grid needs lower:upper:n, got {text!r}") from None
    return lower, upper, n


def _control(args) -> Control:
    lower, upper, grid_n = _grid(args.grid)
    return Control(
        tuning_rho=args.tuning_rho,
        tuning_psi=args.tuning_psi,
        n_resample=args.n_resample,
        max_it=args.max_it,
        refine_tol=args.refine_tol,
        lower=lower,
        upper=upper,
        grid_n=grid_n,
        bw=args.bw,
        subdivisions=args.subdivisions,
        raf=RafKind.parse(args.raf),
        raf_tau=args.raf_tau,
        minw=args.minw,
        nexp=args.nexp,
        step=args.step,
        seed=args.seed,
    )


def _add_control(p: argparse.ArgumentParser) -> None:
    d = Control()
    g = p.add_argument_group("estimator control")
    g.add_argument("--tuning-rho", type=float, default=d.tuning_rho, help="c1 of the M-scale rho")
    g.add_argument("--tuning-psi", type=float, default=d.tuning_psi, help="c2 of the tau-scale rho")
    g.add_argument("--n-resample", type=int, default=d.n_resample, help="number of two-point candidates")
    g.add_argument("--max-it", type=int, default=d.max_it, help="iteration cap (IRWLS, WL)")
    g.add_argument("--refine-tol", type=float, default=d.refine_tol, help="relative convergence tolerance")
    g.add_argument(
        "--grid",
        metavar="LOWER:UPPER:N",
        default=f"{d.lower:g}:{d.upper:g}:{d.grid_n}",
        help="equally spaced lambda grid",
    )
    g.add_argument("--bw", type=float, default=d.bw, help="kernel bandwidth as a multiple of sigma")
    g.add_argument("--subdivisions", type=int, default=d.subdivisions, help="K of the smoothed model density")
    g.add_argument(
        "--raf", type=str.upper, choices=[k.value for k in RafKind], default=d.raf.value, help="residual adjustment function"
    )
    g.add_argument("--raf-tau", type=float, default=d.raf_tau, help="tau of the GKL and PWD families")
    g.add_argument("--minw", type=float, default=d.minw, help="weights below this are set to 0")
    g.add_argument("--nexp", type=int, default=d.nexp, help="K of the 1SWL information approximation")
    g.add_argument("--step", type=float, default=d.step, help="multiplier of the 1SWL step")
    g.add_argument("--seed", type=int, default=d.seed, help="seed of the resampling search")


def _add_data(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("data")
    g.add_argument("input", nargs="?", default="-", help="data file, one number per line ('-' for stdin)")
    g.add_argument("--column", type=int, default=None, help="1-based CSV column to read")
    g.add_argument("--header", action="store_true", help="skip the first data line")
    g.add_argument("--log", action="store_true", help="take natural logs of the data")


def _add_fit(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("estimation")
    g.add_argument("--method", choices=METHODS, default="oneWL", help="estimator")
    g.add_argument("--start", metavar="MU,SIGMA,LAMBDA", default=None, help="starting value (not for QTau)")
    g.add_argument("--weights", metavar="FILE", default=None, help="residual multipliers for QTau/WQTau")
    g.add_argument("--json", action="store_true", help="emit JSON instead of text")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="genloggamma", description="Robust fitting of the generalized loggamma distribution.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="{fit,test,qq,simulate}", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("fit", help="estimate (mu, sigma, lambda) with a summary", formatter_class=fmt)
    _add_data(p)
    _add_fit(p)
    p.add_argument("--probs", default=",".join(map(str, DEFAULT_PROBS)), help="quantile orders for the summary")
    p.add_argument("--level", type=float, default=0.95, help="confidence level")
    _add_control(p)

    p = sub.add_parser("test", help="weighted Wald test, or weighted Wilks test of sigma = lambda", formatter_class=fmt)
    _add_data(p)
    _add_fit(p)
    g = p.add_argument_group("null hypothesis")
    g.add_argument("--mu", type=float, default=None, help="location under the null")
    g.add_argument("--sigma", type=float, default=None, help="scale under the null")
    g.add_argument("--lambda", dest="lam", type=float, default=None, help="shape under the null")
    g.add_argument("--wilks", action="store_true", help="weighted Wilks test of sigma = lambda")
    g.add_argument(
        "--wilks-weights",
        choices=("unconstrained", "constrained"),
        default="unconstrained",
        help="which fit's weights enter the Wilks statistic",
    )
    p.add_argument("--level", type=float, default=0.95, help="confidence level")
    _add_control(p)

    p = sub.add_parser("qq", help="Q-Q table with pointwise bands as CSV", formatter_class=fmt)
    _add_data(p)
    _add_fit(p)
    p.add_argument("--level", type=float, default=0.90, help="band level")
    _add_control(p)

    p = sub.add_parser("simulate", help="draw LG data, optionally contaminated", formatter_class=fmt)
    p.add_argument("--mu", type=float, default=0.0, help="location")
    p.add_argument("--sigma", type=float, default=1.0, help="scale")
    p.add_argument("--lambda", dest="lam", type=float, default=0.0, help="shape")
    p.add_argument("-n", "--n", type=int, default=500, help="sample size")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--eps", type=float, default=0.0, help="fraction of draws to shift")
    p.add_argument("--shift", type=float, default=15.0, help="shift added to the contaminated draws")
    p.add_argument("-o", "--output", default="-", help="output file ('-' for stdout)")
    return parser


# ---------------------------------------------------------------------------
# commands


@dataclass
class _Run:
    y: np.ndarray
    control: Control
    fit: FitResult


def _fit_from_args(args) -> _Run:
    try:
        control = _control(args)
    except ParameterDomainError as exc:
        raise UsageError(str(exc)) from None
    y = _load(args.input, args.column, args.header, args.log)
    start = None if args.start is None else _floats(args.start, 3, "--start")
    weights = None
    if args.weights is not None:
        if args.method not in ("QTau", "WQTau"):
            raise UsageError("--weights is only accepted with --method QTau or WQTau")
        weights = _load(args.weights, None, False, False, minimum=1)
        if weights.size != y.size:
            raise InputError(f"--weights has {weights.size} values for {y.size} observations")
    if start is not None and args.method == "QTau":
        raise UsageError("--start is not accepted with --method QTau")
    if start is not None:
        try:
            start = Theta.from_sequence(start)
        except ParameterDomainError as exc:
            raise UsageError(f"--start: {exc}") from None
    log.info("fitting %d observations by %s", y.size, args.method)
    return _Run(y, control, fit_model(y, args.method, start, control, weights))


def _weights_block(w: np.ndarray) -> str:
    n = w.size
    near = np.abs(1.0 - w) < 0.1 / n
    lines = ["Robustness weights: ", f" {int(near.sum())} weights are ~= 1."]
    rest = w[~near]
    if rest.size:
        lines[-1] += f" The remaining {rest.size} ones are summarized as"
        q = np.quantile(rest, [0.0, 0.25, 0.5]).tolist() + [rest.mean()] + np.quantile(rest, [0.75, 1.0]).tolist()
        names = ("Min.", "1st Qu.", "Median", "Mean", "3rd Qu.", "Max.")
        lines.append(" ".join(f"{s:>8}" for s in names))
        lines.append(" ".join(f"{v:>8.4g}" for v in q))
    return "\n".join(lines)


def _call(argv) -> str:
    return "genloggamma " + " ".join(argv)


def cmd_fit(args, argv) -> int:
    run = _fit_from_args(args)
    probs = _floats(args.probs, None, "--probs") if args.probs else []
    summary, summary_error = None, None
    try:
        summary = summarize(run.fit, probs, args.level)
    except (EstimationError, np.linalg.LinAlgError) as exc:
        summary_error = str(exc)
    except ParameterDomainError as exc:
        raise UsageError(str(exc)) from None
    if args.json:
        out = {
            "schema": SCHEMA,
            "command": "fit",
            "fit": run.fit.to_dict(),
            "summary": None if summary is None else summary.to_dict(),
            "control": run.control.to_dict(),
        }
        if summary_error is not None:
            out["summary_error"] = summary_error
        _emit_json(out)
        return EXIT_OK
    f = run.fit
    eta = f"{f.eta:.4g}" if math.isfinite(f.eta) else "not finite"
    print("Call:")
    print(_call(argv))
    print()
    print(f"Location:  {f.mu:.4g}  Scale:  {f.sigma:.4g}  Shape:  {f.lam:.4g}  E(exp(X)):  {eta}")
    print(f"Method: {f.method}  iterations: {f.iterations}  converged: {str(f.converged).lower()}")
    print()
    if summary is not None:
        print(summary.format())
    else:
        print(f"summary not available: {summary_error}")
    print()
    print(_weights_block(f.weights))
    return EXIT_OK


def cmd_test(args, argv) -> int:
    null = {k: v for k, v in (("mu", args.mu), ("sigma", args.sigma), ("lambda", args.lam)) if v is not None}
    if args.wilks and null:
        raise UsageError("--wilks tests sigma = lambda and takes no --mu/--sigma/--lambda")
    if not args.wilks and not null:
        raise UsageError("give at least one of --mu, --sigma, --lambda, or --wilks")
    if args.wilks and args.method not in ("ML", "WL", "oneWL"):
        raise UsageError("--wilks needs a likelihood based method (ML, WL, oneWL)")
    run = _fit_from_args(args)
    if args.wilks:
        res = weighted_wilks_test(run.y, run.fit, run.control, weights=args.wilks_weights)
    else:
        try:
            res = weighted_wald_test(run.fit, null, conf_level=args.level)
        except ParameterDomainError as exc:
            raise UsageError(str(exc)) from None
    if args.json:
        _emit_json({"schema": SCHEMA, "command": "test", "fit": run.fit.to_dict(), "test": res.to_dict()})
    else:
        print(res.format())
    return EXIT_OK


def cmd_qq(args, argv) -> int:
    run = _fit_from_args(args)
    f = run.fit
    n = f.data.size
    p = (np.arange(1, n + 1) - 0.5) / n
    try:
        summary = summarize(f, p, args.level)
    except ParameterDomainError as exc:
        raise UsageError(str(exc)) from None
    theo = quantile(p, f.theta)
    rows = [(t, e, lo, hi, w) for t, e, (_, _, lo, hi), w in zip(theo, f.data, summary.quantile_cis, f.weights)]
    if args.json:
        cols = ("theoretical_q", "empirical_q", "lower", "upper", "weight")
        _emit_json(
            {
                "schema": SCHEMA,
                "command": "qq",
                "level": args.level,
                "method": f.method,
                "rows": [dict(zip(cols, map(float, r))) for r in rows],
            }
        )
        return EXIT_OK
    out = io.StringIO()
    wr = csv.writer(out, lineterminator="\n")
    wr.writerow(["theoretical_q", "empirical_q", "lower", "upper", "weight"])
    for r in rows:
        wr.writerow([repr(float(v)) for v in r])
    sys.stdout.write(out.getvalue())
    return EXIT_OK


def simulate_data(theta, n: int, seed: int, eps: float = 0.0, shift: float = 15.0) -> np.ndarray:
    """``sample(n, theta, seed)`` with the first ``floor(eps n)`` draws shifted by ``shift``."""
    if not 0 <= eps < 0.5:
        raise UsageError(f"--eps must lie in [0, 0.5), got {eps}")
    if n < 1:
        raise UsageError("--n must be positive")
    y = sample(n, theta, seed=seed)
    m = math.floor(eps * n)
    y[:m] += shift
    return y


def cmd_simulate(args, argv) -> int:
    try:
        theta = Theta(args.mu, args.sigma, args.lam)
    except ParameterDomainError as exc:
        raise UsageError(str(exc)) from None
    if args.seed < 0:
        raise UsageError("--seed must be nonnegative")
    y = simulate_data(theta, args.n, args.seed, args.eps, args.shift)
    head = (
        f"# LG draws mu={theta.mu!r} sigma={theta.sigma!r} lambda={theta.lam!r} "
        f"n={args.n} seed={args.seed} eps={args.eps!r} shift={args.shift!r}\n"
    )
    body = head + "".join(f"{v!r}\n" for v in y.tolist())
    if args.output == "-":
        sys.stdout.write(body)
    else:
        try:
            with open(args.output, "w", encoding="utf-8") as fh:
                fh.write(body)
        except OSError as exc:
            raise InputError(f"cannot write {args.output}: {exc.strerror}") from None
    return EXIT_OK


def _emit_json(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=1, sort_keys=True, allow_nan=False))
    sys.stdout.write("\n")


_COMMANDS = {"fit": cmd_fit, "test": cmd_test, "qq": cmd_qq, "simulate": cmd_simulate}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return _COMMANDS[args.command](args, argv)
    except UsageError as exc:
        print(f"genloggamma: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"genloggamma: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (EstimationError, ParameterDomainError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"genloggamma: estimation failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION


if __name__ == "__main__":
    sys.exit(main())
