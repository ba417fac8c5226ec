"""Command-line front end: generate-data, train, pareto, evaluate.

Exit codes: 0 success, 2 bad config, 3 missing input, 4 numeric fault,
5 non-convergence. Data files are deterministic for a given config and seed;
wall-clock times go only to ``run.log``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .artifacts import (
    PARETO_COLUMNS, SchemaError, load_dataset, read_csv, save_dataset, save_fd_solution, write_csv, write_json,
)
from .config import ConfigError, ExperimentConfig, load_config
from .fdsolve import CANONICAL_NODES, Divergence, FdSolution, NonConvergence, build_mesh
from .fdsolve import rmse_vs_analytic as fd_rmse_vs_analytic
from .mms import eval_mms
from .optim import TRACE_COLUMNS, run_schedule
from .pareto import pareto_sweep
from .scenarios import (
    DECADE_NUS, PARAMETRIC_TEST_NU, PARAMETRIC_TRAIN_NU, STANDARD_NU, FdProvider, build_scenario,
    evaluate_vs_analytic, evaluation_nodes, scale_viscosity,
)
from .tapenet import NumericFault, forward, load_checkpoint, save_checkpoint

EXIT_OK, EXIT_CONFIG, EXIT_MISSING, EXIT_NUMERIC, EXIT_NONCONVERGENCE = 0, 2, 3, 4, 5

logger = logging.getLogger("pinnbarrier")


# -- helpers ---------------------------------------------------------------

def _fd_nus(mode: str) -> tuple[float, ...]:
    return (STANDARD_NU,) if mode == "standard" else tuple(sorted(PARAMETRIC_TRAIN_NU + PARAMETRIC_TEST_NU))


def _reference_nus(mode: str) -> tuple[float, ...]:
    return (STANDARD_NU,) if mode == "standard" else DECADE_NUS


def _provider(cfg: ExperimentConfig) -> FdProvider:
    return FdProvider(method=cfg.fd.method, cfl=cfg.fd.cfl, tol=cfg.fd.tol, max_iters=cfg.fd.max_iters,
                      log_base=cfg.log_base)


def _fd_dir(root, mode, tag) -> Path:
    return Path(root) / "fd" / mode / tag


def _save_fd(root, mode, tag, sols: list[FdSolution]) -> None:
    d = _fd_dir(root, mode, tag)
    index = []
    for sol in sorted(sols, key=lambda s: s.nu):
        name = f"nu_{sol.nu!r}.csv"
        save_fd_solution(sol, d / name)
        index.append({"file": name, "n_nodes": sol.mesh.n_nodes, "nu": sol.nu, "iterations": sol.iterations,
                      "final_residual": sol.final_residual, "tol": sol.tol, "method": sol.method,
                      "log_base": sol.log_base})
    write_json(d / "solves.json", index)


def _load_fd(root, mode, tag, provider: FdProvider) -> None:
    """Seed ``provider`` with solutions written by generate-data, if present."""
    idx_path = _fd_dir(root, mode, tag) / "solves.json"
    if not idx_path.exists():
        return
    for item in json.loads(idx_path.read_text()):
        if item["log_base"] != provider.log_base:
            continue
        _, rows = read_csv(_fd_dir(root, mode, tag) / item["file"], "fd-solution")
        values = np.array([float(r[1]) for r in rows])
        mesh = build_mesh(item["n_nodes"])
        provider.add(FdSolution(mesh, item["nu"], values, item["iterations"], item["final_residual"],
                                item["tol"], item["log_base"], item["method"]))


def _run_log(out: Path, message: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    stamp = time.strftime("%Y-%m-%dT%H:%M:%S")
    with open(out / "run.log", "a") as fh:
        fh.write(f"{stamp} {message}\n")


def _run_name(cfg: ExperimentConfig) -> str:
    w = "lbpinn" if cfg.weighting == "lbpinn" else f"fixed-{cfg.alpha!r}"
    return f"{cfg.tag}-{w}-seed{cfg.seed}"


def _run_dir(cfg: ExperimentConfig) -> Path:
    return Path(cfg.out) / "runs" / cfg.mode / _run_name(cfg)


# -- commands --------------------------------------------------------------

def cmd_generate_data(cfg: ExperimentConfig) -> int:
    out = Path(cfg.out)
    t0 = time.perf_counter()
    provider = _provider(cfg)
    table1, table3 = [], []
    status = "ok"
    code = EXIT_OK
    try:
        for tag in cfg.tags:
            ds = build_scenario(cfg.mode, tag, cfg.seed, provider)
            save_dataset(ds, out)
            eps = ds.train.label - eval_mms(ds.train.x, ds.train.nu, cfg.log_base)
            table1.append((tag, float(np.mean(eps * eps))))
            if tag == "Analytical":
                continue
            sols = [provider.solve(CANONICAL_NODES[tag], nu) for nu in _fd_nus(cfg.mode)]
            _save_fd(out, cfg.mode, tag, sols)
            for nu in _reference_nus(cfg.mode):
                table3.append((tag, nu, fd_rmse_vs_analytic(provider.solve(CANONICAL_NODES[tag], nu))))
    except NonConvergence as exc:
        status, code = f"non-convergence: {exc}", EXIT_NONCONVERGENCE
    except Divergence as exc:
        status, code = f"divergence: {exc}", EXIT_NUMERIC

    summary = out / "summary" / cfg.mode
    write_csv(summary / "table1.csv", "table1", ("tag", "mean_eps2_train"), table1)
    write_csv(summary / "table3_reference.csv", "table3-reference", ("tag", "nu", "fd_rmse_vs_analytic"), table3)
    write_json(summary / "generate.json", {"status": status, "complete": code == EXIT_OK,
                                           "tags_done": [t for t, _ in table1]})
    _run_log(out, f"generate-data mode={cfg.mode} tags={','.join(cfg.tags)} status={status.split(':')[0]} "
                  f"wall={time.perf_counter() - t0:.2f}s")
    if code != EXIT_OK:
        print(f"error: {status} (partial outputs flagged in {summary / 'generate.json'})", file=sys.stderr)
    return code


def _dataset_or_missing(cfg: ExperimentConfig):
    return load_dataset(cfg.out, cfg.mode, cfg.tag)


def cmd_train(cfg: ExperimentConfig) -> int:
    ds = _dataset_or_missing(cfg)
    run_dir = _run_dir(cfg)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.json").write_text(cfg.dumps())
    try:
        rec = run_schedule(ds, cfg.schedule_obj(), cfg.seed, cfg.weighting_obj(), cfg.layer_sizes(),
                           cfg.adamw, cfg.lbfgs, cfg.log_base)
    except NumericFault as exc:
        print(f"numeric fault in phase {exc.phase} at iteration {exc.iteration}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    write_csv(run_dir / "trace.csv", "trace", TRACE_COLUMNS, ([r[c] for c in TRACE_COLUMNS] for r in rec.trace))
    provider = _provider(cfg)
    _load_fd(cfg.out, cfg.mode, cfg.tag, provider)
    report = evaluate_vs_analytic(rec.params, ds, provider=provider)
    summary = rec.summary()
    summary["tag"], summary["mode"], summary["seed"] = cfg.tag, cfg.mode, cfg.seed
    summary["rmse_vs_analytic"] = report.rmse_vs_analytic_at_nodes[_reference_nus(cfg.mode)[0]] \
        if cfg.mode == "standard" else None
    summary["evaluation"] = report.to_dict()
    write_json(run_dir / "summary.json", summary)
    save_checkpoint(run_dir / "checkpoint.json", rec.params,
                    {"log_sigmas": [float(v) for v in rec.log_sigmas], "mode": cfg.mode, "tag": cfg.tag})
    _run_log(Path(cfg.out), f"train {_run_name(cfg)} iterations={rec.iterations} wall={rec.wall_time:.2f}s")
    return EXIT_OK


def cmd_pareto(cfg: ExperimentConfig) -> int:
    ds = _dataset_or_missing(cfg)
    t0 = time.perf_counter()
    try:
        res = pareto_sweep(ds, cfg.alphas, cfg.schedule_obj(), cfg.seed, cfg.layer_sizes(), True,
                           cfg.adamw, cfg.lbfgs, cfg.log_base, cfg.workers)
    except NumericFault as exc:
        print(f"numeric fault in phase {exc.phase} at iteration {exc.iteration}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    d = Path(cfg.out) / "pareto" / cfg.mode / f"{cfg.tag}-seed{cfg.seed}"
    d.mkdir(parents=True, exist_ok=True)
    (d / "config.json").write_text(cfg.dumps())
    write_csv(d / "trajectories.csv", "pareto", PARETO_COLUMNS, res.rows())
    finals = res.final_points()
    write_csv(d / "front.csv", "pareto-front", ("alpha", "l_pde", "l_d"),
              ((res.alphas[i], finals[i, 0], finals[i, 1]) for i in res.front()))
    _run_log(Path(cfg.out), f"pareto {cfg.tag} runs={len(res.runs) + 1} wall={time.perf_counter() - t0:.2f}s")
    return EXIT_OK


def cmd_evaluate(cfg: ExperimentConfig, checkpoint: str | None) -> int:
    ds = _dataset_or_missing(cfg)
    ckpt = Path(checkpoint) if checkpoint else _run_dir(cfg) / "checkpoint.json"
    if not ckpt.exists():
        raise FileNotFoundError(f"checkpoint {ckpt} not found")
    params, _ = load_checkpoint(ckpt)
    if list(params.layer_sizes) != cfg.layer_sizes():
        raise ConfigError(f"checkpoint architecture {params.layer_sizes} does not match config {cfg.layer_sizes()}")
    provider = _provider(cfg)
    _load_fd(cfg.out, cfg.mode, cfg.tag, provider)
    report = evaluate_vs_analytic(params, ds, provider=provider)
    d = Path(cfg.out) / "eval" / cfg.mode / f"{cfg.tag}-{ckpt.parent.name}"
    d.mkdir(parents=True, exist_ok=True)
    (d / "config.json").write_text(cfg.dumps())
    write_json(d / "eval.json", report.to_dict())
    write_csv(d / "per_nu_curve.csv", "per-nu-curve", ("nu", "rmse_vs_analytic"), report.per_nu_curve)
    write_csv(d / "reference.csv", "reference", ("nu", "pinn_rmse_vs_analytic", "fd_rmse_vs_analytic"),
              ((nu, r, report.numeric_vs_analytic_rmse.get(nu)) for nu, r in report.rmse_vs_analytic_at_nodes.items()))
    # pointwise errors per reference viscosity, for distribution plots
    nodes = evaluation_nodes(cfg.tag)
    rows = []
    for nu in _reference_nus(cfg.mode):
        err = _pointwise_error(params, cfg.mode, nodes, nu, cfg.log_base)
        rows.extend((nu, x, e) for x, e in zip(nodes, err))
    write_csv(d / "pointwise_error.csv", "pointwise-error", ("nu", "x", "error"), rows)
    _run_log(Path(cfg.out), f"evaluate {ckpt}")
    return EXIT_OK


def _pointwise_error(params, mode, nodes, nu, log_base):
    if mode == "standard":
        inputs = nodes.reshape(-1, 1)
    else:
        inputs = np.column_stack([nodes, np.full(nodes.size, scale_viscosity(nu))])
    return forward(params, inputs) - eval_mms(nodes, nu, log_base)


# -- entry point -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pinnbarrier", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--preset", choices=("desk", "paper"))
    common.add_argument("--tag", help="C1 | C2 | C3 | analytical")
    common.add_argument("--mode", choices=("standard", "parametric"))
    common.add_argument("-v", "--verbose", action="store_true")
    sub.add_parser("generate-data", parents=[common], help="FD solves and datasets")
    t = sub.add_parser("train", parents=[common], help="train one PINN")
    t.add_argument("--weighting", choices=("lbpinn", "fixed"))
    t.add_argument("--alpha", type=float)
    pa = sub.add_parser("pareto", parents=[common], help="fixed-alpha sweep plus lbPINN overlay")
    pa.add_argument("--workers", type=int)
    e = sub.add_parser("evaluate", parents=[common], help="evaluate a checkpoint")
    e.add_argument("--checkpoint")
    e.add_argument("--weighting", choices=("lbpinn", "fixed"))
    e.add_argument("--alpha", type=float)
    return p


def _resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    for key in ("seed", "out", "preset", "mode", "weighting", "alpha", "workers"):
        val = getattr(args, key, None)
        if val is not None:
            setattr(cfg, key, val)
    if args.tag is not None:
        cfg.tag = args.tag
        if args.command == "generate-data":
            cfg.tags = [args.tag]
    return cfg.validate()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _resolve_config(args)
        Path(cfg.out).mkdir(parents=True, exist_ok=True)
        (Path(cfg.out) / "config.json").write_text(cfg.dumps())
        if args.command == "generate-data":
            return cmd_generate_data(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "pareto":
            return cmd_pareto(cfg)
        return cmd_evaluate(cfg, args.checkpoint)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, SchemaError) as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except NumericFault as exc:
        print(f"numeric fault: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except NonConvergence as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
