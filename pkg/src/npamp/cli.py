"""Command-line surface: dataset and config ingestion, subcommand dispatch,
and JSON/CSV report emission.

Subcommands: fit (single-level penalized expectile fit), test (two-level
heteroscedasticity test), simulate (replicated scenario run), se (scalar
recursion trajectory), decorrelate (left-rotation preconditioner applied to a
dataset).  Reports go to --out or standard output; all floats are serialized
at full round-trip precision and reports carry no timing fields, so two
identical invocations produce identical bytes.

Exit codes: 0 success, 1 validation or usage error, 2 numerical failure.
"""

import argparse
import csv
import json
import logging
import sys

import numpy as np

from .amp import (DEFAULT_ALPHA_GRID, DEFAULT_MAX_ITER, DEFAULT_TOL, Dataset,
                  SolverSettings)
from .decorrelate import puffer_transform
from .distributions import ErrorDistribution
from .errors import NumericalError
from .expectile import ExpectileSpec, distribution_expectile
from .hettest import test_statistics
from .joint import estimate_u_levels, fit_joint
from .simulate import (SCENARIO_NAMES, SimConfig, builtin_config, qq_export,
                       run_simulation)
from .state_evolution import SignalPrior, run_state_evolution

CONFIG_SCHEMA = "npamp/sim-config/v1"
FIT_SCHEMA = "npamp/fit-report/v1"
TEST_SCHEMA = "npamp/test-report/v1"
SIM_SCHEMA = "npamp/sim-report/v1"


# -- dataset I/O ------------------------------------------------------------

def parse_dataset(path):
    """Read a dataset CSV: header row, first column ``y``, the rest predictors.

    Malformed cells are rejected with the file line and column name; values
    must be finite and there must be at least two data rows.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if not header or header[0].strip() != "y":
            raise ValueError(
                f"{path}: first column must be named 'y', got "
                f"{header[0].strip() if header else '<none>'!r}")
        if len(header) < 2:
            raise ValueError(f"{path}: no predictor columns after 'y'")
        names = [name.strip() for name in header]
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(names):
                raise ValueError(
                    f"{path}: line {line_no} has {len(row)} cells, "
                    f"expected {len(names)}")
            values = []
            for name, cell in zip(names, row):
                try:
                    value = float(cell)
                except ValueError:
                    raise ValueError(
                        f"{path}: line {line_no}, column {name!r}: "
                        f"not a number: {cell!r}") from None
                if not np.isfinite(value):
                    raise ValueError(
                        f"{path}: line {line_no}, column {name!r}: "
                        f"non-finite value {cell!r}")
                values.append(value)
            rows.append(values)
    if len(rows) < 2:
        raise ValueError(f"{path}: need at least two data rows, got {len(rows)}")
    table = np.asarray(rows, dtype=np.float64)
    return Dataset(table[:, 0], table[:, 1:])


def write_dataset(path, data):
    """Write a Dataset as CSV (header y,x1,...,xp) at full precision."""
    header = ["y"] + [f"x{j + 1}" for j in range(data.p)]
    with _open_out(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(data.n):
            writer.writerow([repr(float(data.y[i]))]
                            + [repr(float(v)) for v in data.x[i]])


# -- config I/O -------------------------------------------------------------

def error_to_dict(err):
    """JSON-friendly form of an ErrorDistribution."""
    out = {"kind": err.kind, "scale_sd": err.scale_sd}
    if err.kind == "normal":
        out.update(mu=err.params[0], sigma=err.params[1])
    elif err.kind == "student_t":
        out.update(df=err.params[0])
    elif err.kind == "laplace":
        out.update(mu=err.params[0], b=err.params[1])
    elif err.kind == "mixture_normal":
        w, m, v = err.params
        out.update(weights=list(w), means=list(m), variances=list(v))
    else:
        raise ValueError(f"cannot serialize error kind {err.kind!r}")
    return out


def error_from_dict(obj):
    kind = obj.get("kind")
    scale_sd = obj.get("scale_sd")
    if kind == "normal":
        return ErrorDistribution.normal(obj.get("mu", 0.0),
                                        obj.get("sigma", 1.0), scale_sd)
    if kind == "student_t":
        return ErrorDistribution.student_t(obj["df"], scale_sd)
    if kind == "laplace":
        return ErrorDistribution.laplace(obj.get("mu", 0.0),
                                         obj.get("b", 1.0), scale_sd)
    if kind == "mixture_normal":
        return ErrorDistribution.mixture_normal(
            obj["weights"], obj["means"], obj["variances"], scale_sd)
    raise ValueError(f"unknown error kind {kind!r}")


def config_to_dict(cfg):
    """JSON-friendly form of a SimConfig, with the schema tag."""
    solver = cfg.solver
    return {
        "schema": CONFIG_SCHEMA,
        "name": cfg.name,
        "n": cfg.n,
        "p": cfg.p,
        "beta_support": cfg.beta_support,
        "beta_scale": cfg.beta_scale,
        "error": error_to_dict(cfg.error),
        "heteroscedastic": cfg.heteroscedastic,
        "gamma_pattern": list(cfg.gamma_pattern),
        "gamma_overlap": cfg.gamma_overlap,
        "levels": list(cfg.levels),
        "test_alpha": cfg.test_alpha,
        "use_true_u": cfg.use_true_u,
        "replications": cfg.replications,
        "design_seed": cfg.design_seed,
        "error_seed": cfg.error_seed,
        "ar_rho": cfg.ar_rho,
        "decorrelate": cfg.decorrelate,
        "redraw_design": cfg.redraw_design,
        "solver": {
            "alpha_grid": list(solver.alpha_grid),
            "max_iter": solver.max_iter,
            "tol": solver.tol,
            "omega_init": solver.omega_init,
            "delta": solver.delta,
        },
    }


def config_from_dict(obj):
    """Rebuild a SimConfig from its JSON form (see config_to_dict)."""
    schema = obj.get("schema")
    if schema != CONFIG_SCHEMA:
        raise ValueError(
            f"unsupported config schema {schema!r}; expected {CONFIG_SCHEMA}")
    known = {
        "name", "n", "p", "beta_support", "beta_scale", "error",
        "heteroscedastic", "gamma_pattern", "gamma_overlap", "levels",
        "test_alpha", "use_true_u", "replications", "design_seed",
        "error_seed", "ar_rho", "decorrelate", "redraw_design", "solver",
    }
    unknown = set(obj) - known - {"schema"}
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    kwargs = {key: obj[key] for key in known & set(obj)}
    if "error" in kwargs:
        kwargs["error"] = error_from_dict(kwargs["error"])
    if "gamma_pattern" in kwargs:
        kwargs["gamma_pattern"] = tuple(kwargs["gamma_pattern"])
    if "levels" in kwargs:
        kwargs["levels"] = tuple(kwargs["levels"])
    if "solver" in kwargs:
        solver = dict(kwargs["solver"])
        if "alpha_grid" in solver:
            solver["alpha_grid"] = tuple(solver["alpha_grid"])
        kwargs["solver"] = SolverSettings(**solver)
    return SimConfig(**kwargs)


def load_config(ref, profile="desk", **overrides):
    """Resolve --config: a built-in scenario name or a JSON file path."""
    if ref in SCENARIO_NAMES:
        return builtin_config(ref, profile, **overrides)
    try:
        with open(ref) as fh:
            obj = json.load(fh)
    except FileNotFoundError:
        raise ValueError(
            f"{ref!r} is neither a built-in scenario "
            f"({', '.join(SCENARIO_NAMES)}) nor a readable file") from None
    except json.JSONDecodeError as exc:
        raise ValueError(f"{ref}: not valid JSON: {exc}") from None
    cfg = config_from_dict(obj)
    if overrides:
        base = config_to_dict(cfg)
        base.update(overrides)
        cfg = config_from_dict(base)
    return cfg


# -- report emission --------------------------------------------------------

class _open_out:
    """Context manager for --out: a file path or '-'/None for stdout."""

    def __init__(self, path):
        self.path = path
        self.fh = None

    def __enter__(self):
        if self.path in (None, "-"):
            return sys.stdout
        self.fh = open(self.path, "w", newline="")
        return self.fh

    def __exit__(self, *exc_info):
        if self.fh is not None:
            self.fh.close()
        return False


def emit_json(report, path):
    with _open_out(path) as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")


def emit_csv(header, rows, path):
    with _open_out(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])


# -- subcommands ------------------------------------------------------------

def _solver_from_args(args):
    return SolverSettings(alpha_grid=tuple(args.alpha_grid),
                          max_iter=args.max_iter, tol=args.tol)


def cmd_fit(args):
    data = parse_dataset(args.input)
    spec = ExpectileSpec(args.tau, args.u_tau)
    fit = _solver_from_args(args).run(data, spec)
    report = {
        "schema": FIT_SCHEMA,
        "n": data.n,
        "p": data.p,
        "tau": spec.tau,
        "u_tau": spec.u,
        "alpha": fit.alpha,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "support_size": fit.state.support_size,
        "b": fit.state.b,
        "theta": fit.state.theta,
        "zeta": fit.state.zeta_emp,
        "beta_hat": fit.beta_hat.tolist(),
        "beta_tilde": fit.beta_tilde.tolist(),
    }
    emit_json(report, args.out)
    return 0


def cmd_test(args):
    data = parse_dataset(args.input)
    if args.decorrelate:
        data, _ = puffer_transform(data)
    taus = (args.tau1, args.tau2)
    settings = _solver_from_args(args)
    if args.u_source == "value":
        if args.u1 is None or args.u2 is None:
            raise ValueError("--u-source value requires --u1 and --u2")
        u_pair = (args.u1, args.u2)
    else:
        u_pair = estimate_u_levels(data, taus, settings)
    specs = tuple(ExpectileSpec(tau, u) for tau, u in zip(taus, u_pair))
    joint = fit_joint(data, specs, settings)
    result = test_statistics(joint, args.alpha)
    report = {
        "schema": TEST_SCHEMA,
        "n": data.n,
        "p": data.p,
        "levels": list(taus),
        "u": [float(u) for u in u_pair],
        "u_source": args.u_source,
        "alpha": result.alpha,
        "decorrelated": bool(args.decorrelate),
        "degraded": joint.degraded,
        "sigma": joint.sigma.tolist(),
        "contrast_sd": result.contrast_sd,
        "t": result.t.tolist(),
        "p_value": result.p_value.tolist(),
        "reject": result.reject.tolist(),
    }
    emit_json(report, args.out)
    return 0


def cmd_simulate(args):
    overrides = {}
    if args.replications is not None:
        overrides["replications"] = args.replications
    cfg = load_config(args.config, args.profile, **overrides)
    result = run_simulation(cfg, n_jobs=args.jobs)
    report = {"schema": SIM_SCHEMA, "config": config_to_dict(cfg)}
    report.update(result.to_dict(full=args.full))
    emit_json(report, args.out)
    if args.qq is not None:
        table = qq_export(result.null_t_pooled)
        emit_csv(["theoretical", "observed"], table, args.qq)
    return 0


def cmd_se(args):
    cfg = load_config(args.config, args.profile)
    tau = cfg.levels[0] if args.tau is None else args.tau
    u = distribution_expectile(cfg.error, tau)
    prior = SignalPrior.sparse_gaussian(cfg.p, cfg.beta_support,
                                        scale=cfg.beta_scale,
                                        seed=cfg.design_seed)
    # seed omega by the same rule the solver uses for its first iteration
    if cfg.solver.omega_init is None:
        omega0 = max(int(0.05 * cfg.p), 1) / cfg.p
    else:
        omega0 = max(int(round(cfg.solver.omega_init * cfg.p)), 1) / cfg.p
    trajectory = run_state_evolution(
        prior, cfg.error, ExpectileSpec(tau, u),
        delta=cfg.n / cfg.p, omega=omega0,
        alpha=args.alpha_mult, iterations=args.iterations,
        mc_samples=args.mc_samples, seed=args.seed)
    rows = [(t, params.sigma_bar_sq, params.zeta_bar_sq)
            for t, params in enumerate(trajectory)]
    emit_csv(["t", "sigma_bar_sq", "zeta_bar_sq"], rows, args.out)
    return 0


def cmd_decorrelate(args):
    data = parse_dataset(args.input)
    transformed, _ = puffer_transform(data)
    write_dataset(args.out, transformed)
    return 0


# -- argument parsing -------------------------------------------------------

def _alpha_grid(text):
    try:
        values = tuple(float(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"not a comma-separated float list: {text!r}") from None
    if not values or any(v <= 0 for v in values):
        raise argparse.ArgumentTypeError("alpha grid entries must be > 0")
    return values


def _add_solver_flags(sub):
    sub.add_argument("--alpha-grid", type=_alpha_grid,
                     default=DEFAULT_ALPHA_GRID, metavar="A1,A2,...",
                     help="threshold multipliers to try "
                          "(default 0.5,0.75,...,3.0)")
    sub.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER,
                     help="iteration cap per multiplier")
    sub.add_argument("--tol", type=float, default=DEFAULT_TOL,
                     help="relative-change stopping tolerance")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="npamp",
        description="Penalized expectile regression and the two-level "
                    "heteroscedasticity test.")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="log progress to stderr")
    commands = parser.add_subparsers(dest="command", required=True)

    fit = commands.add_parser("fit", help="single-level penalized fit")
    fit.add_argument("--in", dest="input", required=True, metavar="CSV",
                     help="dataset file (header row, first column y)")
    fit.add_argument("--out", default=None, metavar="PATH",
                     help="JSON report destination (default stdout)")
    fit.add_argument("--tau", type=float, required=True,
                     help="expectile level in (0, 1)")
    fit.add_argument("--u-tau", type=float, default=0.0,
                     help="expectile center of the error law (default 0)")
    _add_solver_flags(fit)
    fit.set_defaults(func=cmd_fit)

    test = commands.add_parser("test", help="two-level heteroscedasticity test")
    test.add_argument("--in", dest="input", required=True, metavar="CSV")
    test.add_argument("--out", default=None, metavar="PATH")
    test.add_argument("--tau1", type=float, default=0.2)
    test.add_argument("--tau2", type=float, default=0.8)
    test.add_argument("--alpha", type=float, default=0.05,
                      help="test level (default 0.05)")
    test.add_argument("--u-source", choices=("pilot", "value"),
                      default="pilot",
                      help="error expectile centers: estimate from a pilot "
                           "fit, or take --u1/--u2 as given")
    test.add_argument("--u1", type=float, default=None)
    test.add_argument("--u2", type=float, default=None)
    test.add_argument("--decorrelate", action="store_true",
                      help="apply the left-rotation preconditioner first")
    _add_solver_flags(test)
    test.set_defaults(func=cmd_test)

    simulate = commands.add_parser("simulate", help="replicated scenario run")
    simulate.add_argument("--config", required=True,
                          help="built-in scenario name or JSON config path")
    simulate.add_argument("--profile", choices=("desk", "paper"),
                          default="desk",
                          help="size profile for built-in scenarios")
    simulate.add_argument("--replications", type=int, default=None,
                          help="override the replication count")
    simulate.add_argument("--jobs", type=int, default=None,
                          help="worker processes (default NPAMP_JOBS or 1)")
    simulate.add_argument("--full", action="store_true",
                          help="include per-replication arrays in the report")
    simulate.add_argument("--qq", default=None, metavar="CSV",
                          help="also write the pooled null-statistic QQ table")
    simulate.add_argument("--out", default=None, metavar="PATH")
    simulate.set_defaults(func=cmd_simulate)

    se = commands.add_parser("se", help="scalar recursion trajectory")
    se.add_argument("--config", required=True,
                    help="built-in scenario name or JSON config path")
    se.add_argument("--profile", choices=("desk", "paper"), default="desk")
    se.add_argument("--tau", type=float, default=None,
                    help="expectile level (default: first level of the config)")
    se.add_argument("--alpha-mult", type=float, default=2.0,
                    help="threshold multiplier (default 2.0)")
    se.add_argument("--iterations", type=int, default=30)
    se.add_argument("--mc-samples", type=int, default=100_000)
    se.add_argument("--seed", type=int, default=0)
    se.add_argument("--out", default=None, metavar="CSV")
    se.set_defaults(func=cmd_se)

    deco = commands.add_parser("decorrelate",
                               help="write the preconditioned dataset")
    deco.add_argument("--in", dest="input", required=True, metavar="CSV")
    deco.add_argument("--out", default=None, metavar="CSV")
    deco.set_defaults(func=cmd_decorrelate)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help and 2 for usage errors; fold the
        # latter into the validation-error code.
        return 0 if exc.code == 0 else 1
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"npamp: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"npamp: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
