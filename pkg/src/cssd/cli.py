"""Command-line interface.

Subcommands: ``simulate``, ``decompose``, ``theory``, ``basis``, ``sense``.
Each reads a JSON config (``--config``); flags override config values.
Exit codes: 0 success, 1 runtime or solver failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from . import io
from .bases import BasisSpec, build_basis
from .errors import (
    ConditioningError,
    CSSDError,
    DivergenceError,
    DomainError,
    FeasibilityError,
    InputError,
    ParseError,
)
from .evalsim import (
    DEFAULT_CV_GRID,
    DETECT_THRESHOLD,
    SimulationScenario,
    aggregate,
    detect,
    run_grid,
    run_sweep,
    sweep_csv,
)
from .sensing import compress, gaussian_operator, identity_operator, kron_operator, operator_from_json
from .solver import Problem1D, Problem2D, SolverConfig, cross_validate_lambda, solve_constrained
from .theory import SignalClassParams, theory_report

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


SOLVER_KEYS = {"max_iters", "rel_tol", "accel"}


def _solver_cfg(d: dict, lam: float = 1.0) -> SolverConfig:
    io.check_keys(d, SOLVER_KEYS | {"lambda"}, "solver")
    return SolverConfig(
        lam=float(d.get("lambda", lam)),
        max_iters=int(d.get("max_iters", 5000)),
        rel_tol=float(d.get("rel_tol", 1e-8)),
        accel=bool(d.get("accel", True)),
    )


def _load_config(args) -> dict:
    if args.config is None:
        return {}
    return io.read_json(args.config)


def _require_seed(cfg):
    if "seed" not in cfg:
        raise UsageError("a seed is required (config key 'seed' or --seed)")
    seed = cfg["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise UsageError(f"seed must be a non-negative integer, got {seed!r}")
    return seed


def _out_dir(args) -> Path:
    return io.ensure_dir(args.out or ".")


# simulate

SIM_EXTRA_KEYS = {"solver", "sweep", "save_fields", "threshold"}


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.baseline_ssd:
        cfg["baseline_ssd"] = True
    _require_seed(cfg)
    scen_keys = {f.name for f in fields(SimulationScenario)}
    io.check_keys(cfg, scen_keys | SIM_EXTRA_KEYS, "simulate config")
    solver = dict(cfg.pop("solver", {}))
    if args.lambda_ is not None:
        solver["lambda"] = args.lambda_
        cfg["lambda_policy"] = "fixed"
    sweep = cfg.pop("sweep", None)
    save_fields = bool(cfg.pop("save_fields", False))
    threshold = float(args.threshold if args.threshold is not None else cfg.pop("threshold", DETECT_THRESHOLD))
    cfg.pop("threshold", None)
    if args.ratio is not None:
        cfg["ratios"] = [args.ratio]
    sc = SimulationScenario.from_dict(cfg)
    scfg = _solver_cfg(solver)
    out = _out_dir(args)
    started = time.time()
    if sweep is not None:
        io.check_keys(sweep, {"field", "values"}, "sweep")
        if "field" not in sweep or "values" not in sweep:
            raise UsageError("sweep needs 'field' and 'values'")
        runs = run_grid(sc, scfg, sweep["field"], sweep["values"], threshold=threshold)
        csv_parts, summaries, all_reports = [], [], []
        for k, (value, reports) in enumerate(runs):
            text = sweep_csv(reports, {sweep["field"]: value})
            csv_parts.append(text if k == 0 else text.split("\n", 1)[1])
            agg = aggregate(reports)
            summaries.append({"value": value, **agg})
            all_reports.extend(reports)
        (out / "sweep.csv").write_text("".join(csv_parts))
        result = {"scenario": sc.to_dict(), "sweep_field": sweep["field"], "runs": summaries}
    else:
        reports, lam = run_sweep(sc, scfg, threshold=threshold, keep_fields=save_fields)
        all_reports = reports
        (out / "sweep.csv").write_text(sweep_csv(reports))
        agg = aggregate(reports)
        result = {"scenario": sc.to_dict(), "lambda": lam, "summary": agg["summary"], "timing": agg["timing"]}
        if save_fields:
            _save_fields(sc, reports, out / "fields")
    result["run"] = {"elapsed_seconds": time.time() - started}
    io.write_json(out / "summary.json", result)
    failed = sum(not r.ok for r in all_reports)
    if failed:
        print(f"{failed} of {len(all_reports)} cells failed", file=sys.stderr)
    if failed == len(all_reports):
        return EXIT_RUNTIME
    return EXIT_OK


def _save_fields(sc, reports, folder):
    from .evalsim import generate

    io.ensure_dir(folder)
    done = set()
    for r in reports:
        if r.replication not in done:
            truth = generate(sc, r.replication)
            for name in ("m", "a", "y"):
                io.write_matrix_csv(folder / f"rep{r.replication}_truth_{name}.csv", getattr(truth, name))
            done.add(r.replication)
        kept = getattr(r, "fields", None)
        if kept:
            tag = f"rep{r.replication}_{r.method}_ratio{r.ratio:g}"
            for name, arr in kept.items():
                io.write_matrix_csv(folder / f"{tag}_{name}.csv", arr)


# decompose

DECOMPOSE_KEYS = {
    "input",
    "measurement",
    "operator",
    "smooth_basis",
    "sparse_basis",
    "ratio",
    "seed",
    "lambda",
    "sigma_noise",
    "eps1",
    "threshold",
    "baseline_ssd",
    "solver",
    "cv_folds",
}


def _read_signal(path):
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        img, _ = io.read_pgm(path)
        return img
    M = io.read_matrix_csv(path)
    return M[:, 0] if M.shape[1] == 1 else M


def _bases_for(cfg, dims):
    def specs(key):
        if key not in cfg:
            raise UsageError(f"config key '{key}' is required")
        v = cfg[key]
        v = [v] * len(dims) if isinstance(v, dict) else list(v)
        if len(v) != len(dims):
            raise UsageError(f"'{key}' needs {len(dims)} entries")
        return [build_basis(BasisSpec.from_dict({**d, "n": n})) for d, n in zip(v, dims)]

    return specs("smooth_basis"), specs("sparse_basis")


def _operator_for(cfg, dims):
    if cfg.get("baseline_ssd"):
        return identity_operator(*dims)
    ratio = float(cfg.get("ratio", 1.0))
    if not 0 < ratio <= 1:
        raise UsageError("ratio must be in (0, 1]")
    seed = _require_seed(cfg)
    if len(dims) == 1:
        return gaussian_operator(max(1, int(round(ratio * dims[0]))), dims[0], seed)
    f = math.sqrt(ratio)
    p1, p2 = (max(1, int(round(n * f))) for n in dims)
    return kron_operator(p1, dims[0], p2, dims[1], seed)


def cmd_decompose(args) -> int:
    cfg = _load_config(args)
    flag_map = {"seed": args.seed, "ratio": args.ratio, "lambda": args.lambda_, "eps1": args.eps1, "threshold": args.threshold}
    cfg.update({k: v for k, v in flag_map.items() if v is not None})
    if args.baseline_ssd:
        cfg["baseline_ssd"] = True
    io.check_keys(cfg, DECOMPOSE_KEYS, "decompose config")
    threshold = float(cfg.get("threshold", DETECT_THRESHOLD))
    if "input" in cfg:
        signal = _read_signal(cfg["input"])
        dims = signal.shape
        op = _operator_for(cfg, dims)
        data = compress(op, signal).data
    elif "measurement" in cfg and "operator" in cfg:
        op = operator_from_json(cfg["operator"])
        data = _read_signal(cfg["measurement"])
        if data.shape != op.output_shape:
            raise UsageError(f"measurement shape {data.shape} does not match operator output {op.output_shape}")
        dims = op.input_shape
    else:
        raise UsageError("config needs 'input', or 'measurement' plus 'operator'")
    smooth, sparse = _bases_for(cfg, dims)
    scfg = _solver_cfg(cfg.get("solver", {}))
    t0 = time.perf_counter()
    if len(dims) == 1:
        prob = Problem1D(data, op, smooth[0], sparse[0])
        B, Ba = smooth[0], sparse[0]
    else:
        prob = Problem2D(data, op, smooth[0], smooth[1], sparse[0], sparse[1])
        B, Ba = tuple(smooth), tuple(sparse)
    setup = time.perf_counter() - t0
    t0 = time.perf_counter()
    if "eps1" in cfg:
        sol = solve_constrained(data, op, B, Ba, float(cfg["eps1"]), scfg)
        how = "constrained"
    else:
        if "lambda" in cfg:
            lam, how = float(cfg["lambda"]), "fixed"
        elif "sigma_noise" in cfg:
            lam, how = prob.universal_lambda(float(cfg["sigma_noise"])), "universal"
        else:
            grid = [g * prob.lambda_max() for g in DEFAULT_CV_GRID]
            lam = cross_validate_lambda(data, op, B, Ba, grid, int(cfg.get("cv_folds", 5)), seed=int(cfg.get("seed", 0)), cfg=scfg)
            how = "cv"
        sol = prob.solve(scfg.with_lam(lam))
    solve_time = time.perf_counter() - t0
    mask = detect(sol, threshold)
    out = _out_dir(args)
    io.write_matrix_csv(out / "smooth.csv", sol.smooth)
    io.write_matrix_csv(out / "sparse.csv", sol.sparse)
    io.write_matrix_csv(out / "mask.csv", mask.astype(float))
    io.write_matrix_csv(out / "measurement.csv", data)
    if len(dims) == 2:
        io.write_pgm(out / "smooth.pgm", sol.smooth)
        peak = np.abs(sol.sparse).max()
        io.write_pgm(out / "sparse.pgm", np.abs(sol.sparse) / peak if peak > 0 else np.zeros(dims))
        io.write_pgm(out / "mask.pgm", mask.astype(float))
    report = {
        "lambda": sol.lam,
        "lambda_source": how,
        "iterations": sol.iterations,
        "converged": sol.converged,
        "objective": sol.objective,
        "residual_norm": sol.residual_norm,
        "ratio": op.ratio,
        "threshold": threshold,
        "detected": int(mask.sum()),
        "operator": op.to_json(),
        "timing": {"setup_seconds": setup, "solve_seconds": solve_time},
    }
    io.write_json(out / "report.json", report)
    return EXIT_OK


# theory

THEORY_KEYS = {
    "n", "r", "s", "l", "mu", "delta_ba_s", "delta_ba_2s",
    "sigma_min_B", "delta", "c2", "delta_r3s", "c_reference",
    "smooth_basis", "sparse_basis",
}


def cmd_theory(args) -> int:
    cfg = _load_config(args)
    io.check_keys(cfg, THEORY_KEYS, "theory config")
    derived = {}
    if "smooth_basis" in cfg or "sparse_basis" in cfg:
        n = cfg.get("n")
        if n is None:
            raise UsageError("deriving parameters from bases needs 'n'")
        if "smooth_basis" in cfg:
            B = build_basis(BasisSpec.from_dict({**cfg["smooth_basis"], "n": n}))
            derived.update(r=B.shape[1], mu=B.mu, sigma_min_B=B.sigma_min)
        if "sparse_basis" in cfg:
            Ba = build_basis(BasisSpec.from_dict({**cfg["sparse_basis"], "n": n}))
            derived.update(l=Ba.support_len, delta_ba_s=Ba.ric_bound, delta_ba_2s=Ba.ric_bound)
    vals = {**derived, **{k: v for k, v in cfg.items() if k not in ("smooth_basis", "sparse_basis")}}
    pkeys = {"n", "r", "s", "l", "mu", "delta_ba_s", "delta_ba_2s"}
    params = SignalClassParams.from_dict({k: v for k, v in vals.items() if k in pkeys})
    rep = theory_report(
        params,
        sigma_min_B=vals.get("sigma_min_B"),
        delta=vals.get("delta"),
        c2=float(vals.get("c2", 1.0)),
        delta_r3s=vals.get("delta_r3s"),
    )
    d = rep.to_dict()
    d["params"] = asdict(params)
    if derived:
        d["derived_from_bases"] = derived
    if "c_reference" in vals:
        d["c_reference"] = vals["c_reference"]
    out = _out_dir(args)
    io.write_json(out / "theory.json", d)
    sys.stdout.write(io.dumps_json(d))
    return EXIT_OK


# basis

def cmd_basis(args) -> int:
    cfg = _load_config(args)
    io.check_keys(cfg, {"kind", "n", "degree", "knots"}, "basis config")
    B = build_basis(BasisSpec.from_dict(cfg))
    out = _out_dir(args)
    io.write_matrix_csv(out / "basis.csv", B.matrix)
    diag = {
        "spec": B.spec.to_dict(),
        "columns": B.shape[1],
        "mu": B.mu,
        "support_len": B.support_len,
        "sigma_max": B.sigma_max,
        "sigma_min": B.sigma_min,
        "ric_bound": B.ric_bound,
    }
    io.write_json(out / "basis.json", diag)
    return EXIT_OK


# sense

def cmd_sense(args) -> int:
    cfg = _load_config(args)
    for k in ("seed", "ratio"):
        v = getattr(args, k)
        if v is not None:
            cfg[k] = v
    if args.baseline_ssd:
        cfg["baseline_ssd"] = True
    io.check_keys(cfg, {"input", "seed", "ratio", "baseline_ssd"}, "sense config")
    if "input" not in cfg:
        raise UsageError("config key 'input' is required")
    signal = _read_signal(cfg["input"])
    op = _operator_for(cfg, signal.shape)
    meas = compress(op, signal)
    out = _out_dir(args)
    io.write_matrix_csv(out / "measurement.csv", meas.data)
    io.write_json(out / "operator.json", op.to_json())
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "decompose": cmd_decompose,
    "theory": cmd_theory,
    "basis": cmd_basis,
    "sense": cmd_sense,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cssd", description="Smooth-sparse decomposition from compressive measurements.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--out", help="output directory (default: current directory)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--ratio", type=float)
        sp.add_argument("--lambda", dest="lambda_", type=float)
        sp.add_argument("--eps1", type=float)
        sp.add_argument("--threshold", type=float)
        sp.add_argument("--baseline-ssd", action="store_true", help="use the identity operator (plain SSD)")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (ConditioningError, DivergenceError, FeasibilityError) as exc:
        print(f"cssd {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (UsageError, InputError, DomainError, ParseError, KeyError, TypeError, ValueError, FileNotFoundError) as exc:
        print(f"cssd {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CSSDError as exc:
        print(f"cssd {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
