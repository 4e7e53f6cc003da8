"""Command-line entry point.

Subcommands: ``validate``, ``gramian``, ``kernel``, ``control``, ``chain``,
``simulate``, ``verify-bounds``, ``equivalence``.  Every run writes its
results as CSV and/or JSON next to a run manifest; reruns with an identical
manifest produce byte-identical outputs (floats are serialized with
shortest-roundtrip ``repr``).

Exit codes: 0 success, 1 computational failure, 2 parse error,
3 model validation failure, 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np
from scipy.linalg import expm

from . import __version__
from .chain import HarnackConfig, build_chain, verify_chain
from .control import (
    ControlProblem,
    control_value,
    discrete_least_norm_control,
    kappa_estimate,
    optimal_control,
    partial_cost,
    trajectory,
)
from .exceptions import CoefficientError, KolmoError, StructureError
from .gramian import equivalence_constants, gramian, gramian_homogeneous
from .kernel import (
    GaussianKernel,
    aronson_upper_form,
    eval_kernel,
    eval_log_kernel,
    lower_bound_form,
)
from .mc import SimConfig, estimate_density, simulate_paths, verify_bounds
from .model import (
    coefficient_bounds,
    dilation_exponents,
    ellipticity_check,
    kalman_rank,
    spec_from_config,
)

__all__ = ["main", "load_model"]

EXIT_OK = 0
EXIT_NUMERIC = 1
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_USAGE = 64


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


class _ValidationFailure(KolmoError):
    def __init__(self, clause, message):
        super().__init__(message)
        self.clause = clause


def load_model(path):
    """Load and fully validate a model config file.

    Runs the structural validation, the coupling rank check, the sampled
    ellipticity check against the declared constant, and the sampled
    coefficient bound check.
    """
    with open(path) as fh:
        cfg = json.load(fh)
    spec = spec_from_config(cfg)
    rank = kalman_rank(spec.system)
    if rank != spec.system.d:
        raise _ValidationFailure(
            "kalman-rank", f"coupling rank {rank} < {spec.system.d}; covariance singular"
        )
    mu_low, mu_high = ellipticity_check(spec)
    if mu_low > spec.mu + 1e-12 or mu_high > spec.mu + 1e-12:
        raise _ValidationFailure(
            "ellipticity",
            f"sampled constants ({mu_low}, {mu_high}) exceed declared mu={spec.mu}",
        )
    sup_a, sup_b, sup_c = coefficient_bounds(spec)
    if max(sup_a, sup_b, sup_c) > spec.M_bound + 1e-12:
        raise _ValidationFailure(
            "coefficient-bound",
            f"sampled sup norms ({sup_a}, {sup_b}, {sup_c}) exceed M={spec.M_bound}",
        )
    return spec


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            vals = [_fmt(v) for v in row]
            for v, raw in zip(vals, row):
                if isinstance(raw, (float, np.floating)) and not np.isfinite(raw):
                    raise KolmoError(f"non-finite value {raw} in CSV output")
            writer.writerow(vals)


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _manifest(args, outputs):
    params = {
        k: v
        for k, v in sorted(vars(args).items())
        if k not in ("func", "out") and v is not None
    }
    return {
        "subcommand": args.subcommand,
        "model": getattr(args, "model", None),
        "params": params,
        "seed": getattr(args, "seed", None),
        "outputs": outputs,
        "version": __version__,
    }


def _parse_point(text, d):
    vals = [float(v) for v in text.split(",")]
    if len(vals) != d + 1:
        raise _UsageError(f"point must be 't,x1,...,x{d}', got {text!r}")
    return vals[0], np.array(vals[1:])


def _parse_grid(text):
    out = {"radius": 3.0, "n": 25}
    if text:
        for part in text.split(","):
            k, v = part.split("=")
            out[k.strip()] = float(v) if k.strip() == "radius" else int(float(v))
    return out


def _grid_points(system, t, x, T, radius, n):
    """Axis-aligned dilated offsets around the flow image, ``n`` per axis."""
    mean = expm((T - t) * system.B) @ x
    exps = dilation_exponents(system.structure).astype(float)
    scale = (T - t) ** (0.5 * exps)
    pts = []
    offsets = np.linspace(-radius, radius, n)
    for axis in range(system.d):
        for u in offsets:
            y = mean.copy()
            y[axis] += u * scale[axis]
            pts.append(y)
    return np.array(pts)


def _cmd_validate(args):
    spec = load_model(args.model)
    mu_low, mu_high = ellipticity_check(spec)
    summary = {
        "blocks": list(spec.structure.m),
        "d": spec.system.d,
        "kalman_rank": kalman_rank(spec.system),
        "mu_declared": spec.mu,
        "mu_sampled": [mu_low, mu_high],
        "valid": True,
    }
    outputs = {}
    if args.out:
        _write_json(args.out + ".json", summary)
        outputs["json"] = args.out + ".json"
    else:
        print(json.dumps(summary, sort_keys=True))
    return summary, outputs


def _cmd_gramian(args):
    spec = load_model(args.model)
    taus = [float(v) for v in args.tau_grid.split(",")]
    rows = []
    for tau in taus:
        g = gramian(spec.system, tau)
        g0 = gramian_homogeneous(spec.system, tau)
        det_ratio = float(np.exp(g.logdet - g0.logdet))
        rows.append([tau, *g.C.ravel().tolist(), g.logdet, det_ratio])
    d = spec.system.d
    header = ["tau"] + [f"C_{i}{j}" for i in range(d) for j in range(d)] + [
        "logdet",
        "det_ratio",
    ]
    _write_csv(args.out + ".csv", header, rows)
    return {"taus": taus}, {"csv": args.out + ".csv"}


def _cmd_kernel(args):
    spec = load_model(args.model)
    system = spec.system
    d = system.d
    t, x = _parse_point(args.frm, d)
    T, y = _parse_point(args.to, d)
    kernel = GaussianKernel(system, args.lam)
    if args.grid is not None:
        g = _parse_grid(args.grid)
        ys = _grid_points(system, t, x, T, g["radius"], g["n"])
    else:
        ys = y[None, :]
    rows = []
    for yi in ys:
        rows.append(
            [
                *yi.tolist(),
                eval_kernel(kernel, t, x, T, yi),
                eval_log_kernel(kernel, t, x, T, yi),
                lower_bound_form(args.c_lower, system, t, x, T, yi),
                aronson_upper_form(args.c_upper, system, t, x, T, yi),
            ]
        )
    header = [f"y{i}" for i in range(d)] + ["gamma", "log_gamma", "lower_form", "upper_form"]
    _write_csv(args.out + ".csv", header, rows)
    return {"points": len(rows)}, {"csv": args.out + ".csv"}


def _cmd_control(args):
    spec = load_model(args.model)
    d = spec.system.d
    t, x = _parse_point(args.frm, d)
    T, y = _parse_point(args.to, d)
    problem = ControlProblem(spec.system, t, T, x, y)
    ctrl = optimal_control(problem)
    rows = []
    accum = 0.0
    ss = np.linspace(t, T, args.n)
    for i, s in enumerate(ss):
        if i > 0:
            accum += partial_cost(ctrl, ss[i - 1], s)
        v = control_value(ctrl, s)
        rows.append([s, *trajectory(ctrl, s).tolist(), float(v @ v), accum])
    header = ["s"] + [f"gamma{i}" for i in range(d)] + ["v_sq", "cost_accum"]
    _write_csv(args.out + ".csv", header, rows)
    summary = {"cost": ctrl.cost, "discrete_check": discrete_least_norm_control(problem, 256)}
    _write_json(args.out + ".json", summary)
    return summary, {"csv": args.out + ".csv", "json": args.out + ".json"}


def _cmd_chain(args):
    spec = load_model(args.model)
    d = spec.system.d
    t, x = _parse_point(args.frm, d)
    T, y = _parse_point(args.to, d)
    kappa = args.kappa if args.kappa is not None else kappa_estimate(spec.system)
    config = HarnackConfig(
        C_harnack=args.c_harnack, beta=args.beta, r=args.r, tau=args.tau, kappa=kappa
    )
    problem = ControlProblem(spec.system, t, T, x, y)
    chain = build_chain(problem, config)
    verified = verify_chain(chain, config, spec.system)
    rows = []
    for j, step in enumerate(chain.steps):
        rows.append([j, step.t_start, *chain.points[j].tolist(), step.cost, step.clause])
    rows.append([chain.J, chain.times[-1], *chain.points[-1].tolist(), 0.0, "end"])
    header = ["j", "t_j"] + [f"gamma{i}" for i in range(d)] + ["step_cost", "clause"]
    _write_csv(args.out + ".csv", header, rows)
    summary = {
        "V": chain.V,
        "epsilon": config.epsilon,
        "J": chain.J,
        "exponent": chain.exponent,
        "verified": bool(verified),
        "config": {
            "C_harnack": config.C_harnack,
            "beta": config.beta,
            "r": config.r,
            "tau": config.tau,
            "kappa": config.kappa,
        },
    }
    _write_json(args.out + ".json", summary)
    return summary, {"csv": args.out + ".csv", "json": args.out + ".json"}


def _cmd_simulate(args):
    spec = load_model(args.model)
    d = spec.system.d
    t, x = _parse_point(args.frm, d)
    T = args.horizon
    config = SimConfig(n_paths=args.paths, n_steps=args.steps, seed=args.seed)
    endpoints = simulate_paths(spec, t, x, T, config)
    mean = endpoints.mean(axis=0)
    cov = np.cov(endpoints.T).reshape(d, d)
    rows = [["mean", *mean.tolist()]]
    for i in range(d):
        rows.append([f"cov_{i}", *cov[i].tolist()])
    header = ["stat"] + [f"x{i}" for i in range(d)]
    _write_csv(args.out + ".csv", header, rows)
    summary = {"n_paths": args.paths, "n_steps": args.steps, "seed": args.seed}
    if args.density_at is not None:
        y = np.array([float(v) for v in args.density_at.split(",")])
        est = estimate_density(endpoints, y, args.bandwidth, spec.structure, T - t)
        summary["density"] = {
            "y": y.tolist(),
            "value": est.value,
            "stderr": est.stderr,
            "n_hits": est.n_hits,
            "bandwidth": est.bandwidth,
        }
    _write_json(args.out + ".json", summary)
    return summary, {"csv": args.out + ".csv", "json": args.out + ".json"}


def _cmd_verify_bounds(args):
    spec = load_model(args.model)
    d = spec.system.d
    t, x = _parse_point(args.frm, d)
    T = args.horizon
    g = _parse_grid(args.grid)
    ys = _grid_points(spec.system, t, x, T, g["radius"], g["n"])
    config = SimConfig(n_paths=args.paths, n_steps=args.steps, seed=args.seed)
    report = verify_bounds(
        spec, t, x, T, ys, args.lambda_minus, args.lambda_plus,
        sim_config=config, bandwidth=args.bandwidth,
    )
    rows = []
    for i, yi in enumerate(report.y_grid):
        rows.append(
            [
                *yi.tolist(),
                report.gamma[i],
                report.stderr[i],
                report.gamma_minus[i],
                report.gamma_plus[i],
                report.ratio_minus[i],
                report.ratio_plus[i],
            ]
        )
    header = [f"y{i}" for i in range(d)] + [
        "gamma_est", "stderr", "gamma_lambda_minus", "gamma_lambda_plus",
        "ratio_minus", "ratio_plus",
    ]
    _write_csv(args.out + ".csv", header, rows)
    summary = {
        "C_minus": report.C_minus,
        "C_plus": report.C_plus,
        "lambda_minus": report.lambda_minus,
        "lambda_plus": report.lambda_plus,
        "exact": report.exact,
        "zero_hit_indices": list(report.zero_hit_indices),
        "diagonal": {
            "horizons": list(report.diagonal_horizons),
            "c": list(report.diagonal_c),
            "c_fit": report.diagonal_c_fit,
        },
        "seed": args.seed,
        "config": {"n_paths": args.paths, "n_steps": args.steps, "bandwidth": args.bandwidth},
    }
    _write_json(args.out + ".json", summary)
    return summary, {"csv": args.out + ".csv", "json": args.out + ".json"}


def _cmd_equivalence(args):
    spec = load_model(args.model)
    taus = [float(v) for v in args.tau_grid.split(",")]
    report = equivalence_constants(spec.system, taus)
    rows = [[tau, ratio] for tau, ratio in zip(report.tau_grid, report.det_ratio)]
    _write_csv(args.out + ".csv", ["tau", "det_ratio"], rows)
    summary = {
        "k_dilation": list(report.k_dilation),
        "k_quadratic": list(report.k_quadratic),
        "tau_grid": list(report.tau_grid),
    }
    _write_json(args.out + ".json", summary)
    return summary, {"csv": args.out + ".csv", "json": args.out + ".json"}


def _build_parser():
    parser = _Parser(prog="kolmo", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand")

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.add_argument("--model", required=True, help="model config JSON")
        p.add_argument("--out", default=None, help="output path base")
        p.set_defaults(func=fn)
        return p

    add("validate", _cmd_validate, help="validate a model config")

    p = add("gramian", _cmd_gramian, help="covariance matrices over a horizon grid")
    p.add_argument("--tau-grid", default="0.1,0.5,1.0")

    p = add("kernel", _cmd_kernel, help="Gaussian kernel and bound forms")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--from", dest="frm", required=True, help="t,x1,...,xd")
    p.add_argument("--to", dest="to", required=True, help="T,y1,...,yd")
    p.add_argument("--grid", default=None, help="radius=3,n=25 (dilated offsets)")
    p.add_argument("--c-lower", type=float, default=1.0)
    p.add_argument("--c-upper", type=float, default=1.0)

    p = add("control", _cmd_control, help="minimum-energy control trajectory")
    p.add_argument("--from", dest="frm", required=True)
    p.add_argument("--to", dest="to", required=True)
    p.add_argument("--n", type=int, default=65)

    p = add("chain", _cmd_chain, help="Harnack chain construction")
    p.add_argument("--from", dest="frm", required=True)
    p.add_argument("--to", dest="to", required=True)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--r", type=float, default=0.25)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--kappa", type=float, default=None, help="default: estimated")
    p.add_argument("--c-harnack", type=float, default=10.0)

    p = add("simulate", _cmd_simulate, help="endpoint simulation")
    p.add_argument("--from", dest="frm", required=True)
    p.add_argument("--horizon", type=float, required=True)
    p.add_argument("--paths", type=int, default=100000)
    p.add_argument("--steps", type=int, default=16)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--density-at", default=None, help="y1,...,yd")
    p.add_argument("--bandwidth", type=float, default=0.2)

    p = add("verify-bounds", _cmd_verify_bounds, help="two-sided bound verification")
    p.add_argument("--from", dest="frm", required=True)
    p.add_argument("--horizon", type=float, required=True)
    p.add_argument("--grid", default="radius=3,n=25")
    p.add_argument("--lambda-minus", type=float, required=True)
    p.add_argument("--lambda-plus", type=float, required=True)
    p.add_argument("--paths", type=int, default=100000)
    p.add_argument("--steps", type=int, default=16)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--bandwidth", type=float, default=0.2)

    p = add("equivalence", _cmd_equivalence, help="homogeneous comparison constants")
    p.add_argument("--tau-grid", default="0.01,0.1,1.0")

    return parser


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "subcommand", None) is None:
            parser.parse_args(["--help"])
            return EXIT_USAGE
        if args.out is None and args.subcommand != "validate":
            args.out = f"kolmo-{args.subcommand}"
        summary, outputs = args.func(args)
        if outputs:
            _write_json(args.out + ".manifest.json", _manifest(args, outputs))
        return EXIT_OK
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        # argparse --help/--version exit; usage failures come through _UsageError
        return 0 if exc.code in (None, 0) else EXIT_USAGE
    except json.JSONDecodeError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (StructureError, CoefficientError, _ValidationFailure) as exc:
        clause = getattr(exc, "clause", None)
        print(f"validation failure [{clause}]: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (KolmoError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
