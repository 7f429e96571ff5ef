"""Experiment runner: named experiments binding the solver, bound evaluators,
flow and BSDE machinery, with machine-readable CSV/JSON reports.

Exit codes: 0 when every check passes, 1 when any check fails, 2 on
configuration errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Callable, Dict, List, Optional

import numpy as np

from . import bsde, fields, flow, heatpde, reporting
from .bounds import BoundSpec, CheckResult
from .sampling import worker_count


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# experiment catalog
# ---------------------------------------------------------------------------

CATALOG: Dict[str, str] = {
    "solve": "heat solve on the periodic grid; conservation, positivity and "
             "the identity G = |grad log u|^2 - 2 d_t log u = -lap log u",
    "liyau": "equality sweep of the refined bounds C/((t/n)C+1) and "
             "-C/(1-(t/n)C) on Gaussian data, plus the grid run against the "
             "upper bound",
    "gradbound": "sup-norm gradient bounds: 4M/t (kind th11) and the "
                 "exponential-rate variants 4KM/(1-e^{-Kt}) (kind est_o1) and "
                 "2KM/(1-e^{-Kt/2}) (kind th41) against grid solutions",
    "harnack": "two-point Harnack ratio bound ((1/C+(t+s)/n)/(1/C+t/n))^{n/2} "
               "e^{r^2/2s} against exact kernel ratios",
    "bsde": "entropic BSDE diagnostics: maximum principle, Girsanov weight "
            "mean, weighted BMO estimate of int |Z|^2, submartingale "
            "monotonicity of e^{Kt}|Z|^2 and the reciprocal identity "
            "Y_0 = 1/(T/n + E_Q[1/Y_T])",
    "flow": "stochastic flow consistency: J K = I residual under dt "
            "refinement, exact constant-field case and the two evaluations "
            "of Z along paths",
    "conditions": "structure constants C1, C2 (smallest admissible in the "
                  "bracket quadratic forms) and the Frobenius span residual",
}


def list_experiments() -> Dict[str, str]:
    return dict(CATALOG)


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------

DEFAULTS: Dict[str, dict] = {
    "solve": {
        "family": "cosine", "family_params": {"a": 0.5}, "grid": 256,
        "scheme": "crank-nicolson", "dt": 1e-3, "t_end": 1.0,
        "snapshots": [0.25, 0.5, 1.0], "tol": None,
    },
    "liyau": {
        "n": 1, "sigma2": 1.0, "t_values": [0.1, 0.25, 0.5, 1.0, 2.0],
        "grid": 512, "dt": 1e-3, "grid_sigma2": 0.25, "grid_t": 0.75,
        "tol": None,
    },
    "gradbound": {
        "kind": "th11", "a": 0.5, "grid": 256, "dt": 1e-3, "k": 0.0,
        "t_values": [0.05, 0.1, 0.2, 0.5, 1.0, 2.0], "tol": None,
    },
    "harnack": {
        "n": 1, "c": "inf", "t_values": [0.5, 0.875, 1.25, 1.625, 2.0],
        "s_values": [0.5, 0.875, 1.25, 1.625, 2.0], "y_values": [0.0, 1.0, 2.0],
        "tol": 1e-9,
    },
    "bsde": {
        "family": "cosine", "a": 0.5, "delta": 0.2, "horizon": 1.0,
        "paths": 20000, "seed": 7, "dt": 1e-2, "grid": 512,
        "t_points": 8, "k": 0.0, "demo_c": 1.0, "tol": 1e-6,
    },
    "flow": {
        "case": "gbm", "dt": 1e-3, "t_end": 1.0, "paths": 256, "seed": 11,
        "tol": 0.05, "dump": None,
    },
    "conditions": {
        "fields": {"family": "constant", "vectors": [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]},
        "box": [[-1.0, 1.0], [-1.0, 1.0]], "samples": 64, "seed": 3,
        "tol": 1e-9,
    },
}

_FLAG_KEYS = {"seed": "seed", "paths": "paths", "dt": "dt", "grid": "grid",
              "tol": "tol"}


def build_config(experiment: str, config_path: Optional[str],
                 flags: argparse.Namespace) -> dict:
    if experiment not in DEFAULTS:
        raise ConfigError(f"unknown experiment {experiment!r}; "
                          f"choose from {sorted(CATALOG)}")
    cfg = json.loads(json.dumps(DEFAULTS[experiment]))  # deep copy
    if config_path:
        try:
            with open(config_path, "r", encoding="utf-8") as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
        unknown = set(user) - set(cfg)
        if unknown:
            raise ConfigError(f"unknown config keys for {experiment}: "
                              f"{sorted(unknown)}")
        cfg.update(user)
    for flag, key in _FLAG_KEYS.items():
        val = getattr(flags, flag, None)
        if val is not None and key in cfg:
            cfg[key] = val
    return cfg


# ---------------------------------------------------------------------------
# experiment implementations
# ---------------------------------------------------------------------------

def _run_solve(cfg: dict, out: str) -> List[CheckResult]:
    grid = heatpde.TorusGrid(n=1, points=int(cfg["grid"]))
    u0 = heatpde.make_initial(grid, cfg["family"], **cfg["family_params"])
    sc = heatpde.SolveConfig(dt=float(cfg["dt"]), t_end=float(cfg["t_end"]),
                             scheme=cfg["scheme"],
                             snapshot_times=cfg["snapshots"])
    traj = heatpde.solve_heat(u0, sc)
    checks: List[CheckResult] = []
    tol = cfg["tol"]
    mean0 = u0.mean()
    summaries = []
    for t, snap in zip(traj.times, traj.snapshots):
        summaries.append(heatpde.snapshot_summary(snap, t))
        checks.append(CheckResult(bound_value=0.0,
                                  observed=abs(snap.mean() - mean0),
                                  tolerance=1e-10,
                                  context=f"mass-conservation[t={t}]"))
        checks.append(CheckResult(bound_value=float(u0.values.max()),
                                  observed=float(snap.values.max()),
                                  tolerance=1e-9,
                                  context=f"max-principle[t={t}]"))
        d = heatpde.log_diagnostics(snap)
        checks.append(heatpde.check_identity_g(
            d, tolerance=tol if tol is not None else None))
    heatpde.snapshot_to_csv(traj.final(), os.path.join(out, "solve_final.csv"))
    reporting.write_json(os.path.join(out, "solve_snapshots.json"),
                         {"snapshots": summaries})
    return checks


def _run_liyau(cfg: dict, out: str) -> List[CheckResult]:
    n = int(cfg["n"])
    sigma2 = float(cfg["sigma2"])
    c = n / sigma2
    checks: List[CheckResult] = []
    for t in cfg["t_values"]:
        t = float(t)
        fwd = heatpde.gaussian_oracle("forward", t, np.zeros(n), n=n)
        spec = BoundSpec(kind="liyau_upper", t=t, c="inf", n=n)
        checks.append(CheckResult(spec.evaluate(), fwd.g, 1e-12,
                                  context=f"forward-equality[t={t}]"))
        ini = heatpde.gaussian_oracle("initial", t, np.zeros(n),
                                      sigma2=sigma2, n=n)
        checks.append(CheckResult(
            BoundSpec(kind="liyau_upper", t=t, c=c, n=n).evaluate(),
            ini.g, 1e-12, context=f"initial-equality[t={t}]"))
        if t < sigma2:
            back = heatpde.gaussian_oracle("backward", t, np.zeros(n),
                                           sigma2=sigma2, n=n)
            lower = BoundSpec(kind="liyau_lower", t=t, c=c, n=n).evaluate()
            checks.append(CheckResult(back.g, lower, 1e-12,
                                      context=f"backward-equality[t={t}]"))
    # grid run: wrapped Gaussian initial data against the upper bound
    grid = heatpde.TorusGrid(n=1, points=int(cfg["grid"]))
    gs2 = float(cfg["grid_sigma2"])
    gt = float(cfg["grid_t"])
    u0 = heatpde.wrapped_gaussian(grid, gs2)
    traj = heatpde.solve_heat(u0, heatpde.SolveConfig(dt=float(cfg["dt"]),
                                                      t_end=gt))
    d = heatpde.log_diagnostics(traj.final())
    bound = BoundSpec(kind="liyau_upper", t=gt, c=1.0 / gs2, n=1).evaluate()
    tol = cfg["tol"]
    if tol is None:
        tol = heatpde.identity_tolerance(grid, abs(bound))
    checks.append(CheckResult(bound, float(d.g.max()), tol,
                              context=f"grid-upper[t={gt}]"))
    return checks


def _run_gradbound(cfg: dict, out: str) -> List[CheckResult]:
    kind = cfg["kind"]
    if kind not in ("th11", "est_o1", "th41"):
        raise ConfigError(f"gradbound kind must be th11, est_o1 or th41; got {kind!r}")
    a = float(cfg["a"])
    grid = heatpde.TorusGrid(n=1, points=int(cfg["grid"]))
    u0 = heatpde.make_initial(grid, "exp-cosine", a=a)
    m_norm = abs(a)
    times = [float(t) for t in cfg["t_values"]]
    traj = heatpde.solve_heat(u0, heatpde.SolveConfig(
        dt=float(cfg["dt"]), t_end=max(times), snapshot_times=times))
    checks = []
    k = float(cfg["k"])
    tol = cfg["tol"]
    for t, snap in zip(traj.times, traj.snapshots):
        d = heatpde.log_diagnostics(snap)
        observed = float(d.grad_f_sq.max())
        if kind == "th11":
            spec = BoundSpec(kind="th11", t=t, m_norm=m_norm)
        elif kind == "est_o1":
            spec = BoundSpec(kind="est_o1", t=t, k=k, m_norm=m_norm)
        else:
            spec = BoundSpec(kind="th41", t=t, k=k, m_norm=m_norm)
        use_tol = tol if tol is not None else 10.0 * grid.h ** 2
        checks.append(CheckResult(spec.evaluate(), observed, use_tol,
                                  context=f"{kind}[t={t}]"))
    return checks


def _run_harnack(cfg: dict, out: str) -> List[CheckResult]:
    n = int(cfg["n"])
    c = cfg["c"]
    tol = float(cfg["tol"])
    checks = []
    for t in cfg["t_values"]:
        for s in cfg["s_values"]:
            for yv in cfg["y_values"]:
                t, s, yv = float(t), float(s), float(yv)
                spec = BoundSpec(kind="harnack", t=t, s=s, r=abs(yv), c=c, n=n)
                # exact kernel ratio p(t, 0)/p(t+s, y) on R^n
                ratio = (((t + s) / t) ** (n / 2.0)
                         * math.exp(-0.0 / (2 * t) + yv * yv / (2 * (t + s))))
                checks.append(CheckResult(spec.evaluate(), ratio, tol,
                                          context=f"kernel-ratio[t={t},s={s},y={yv}]"))
    return checks


def _run_bsde(cfg: dict, out: str) -> List[CheckResult]:
    family = cfg["family"]
    horizon = float(cfg["horizon"])
    if family == "cosine":
        problem = bsde.cosine_problem(float(cfg["a"]), horizon,
                                      grid_n=int(cfg["grid"]))
    elif family == "step":
        problem = bsde.step_problem(float(cfg["a"]), float(cfg["delta"]),
                                    horizon, grid_n=int(cfg["grid"]))
    elif family == "constant":
        problem = bsde.constant_problem(float(cfg["a"]), horizon)
    elif family == "linear":
        problem = bsde.linear_problem([float(cfg["a"])], horizon)
    else:
        raise ConfigError(f"unknown bsde family {family!r}")
    paths = int(cfg["paths"])
    seed = int(cfg["seed"])
    dt = float(cfg["dt"])
    n_pts = int(cfg["t_points"])
    t_grid = [round(j * horizon / n_pts / dt) * dt for j in range(n_pts + 1)]
    checks: List[CheckResult] = []
    rows = []

    res = bsde.sweep(problem, t_grid, paths, seed, dt=dt)
    gw = bsde.weights_from_sweep(res)
    mean = gw.mean_final()
    rows.append(bsde.estimate_csv_row("weight-mean", problem.manifest(), mean))
    checks.append(CheckResult(0.0, abs(mean.value - 1.0),
                              3 * mean.stderr + 1e-12,
                              context="girsanov-weight-mean"))
    if problem.f0_sup is not None:
        observed = float(np.abs(res.y).max())
        checks.append(CheckResult(problem.f0_sup, observed, float(cfg["tol"]),
                                  context="max-principle"))
        est = bsde.bmo_norm_estimate(problem, 0.0, paths, seed, dt=dt)
        rows.append(bsde.estimate_csv_row("bmo", problem.manifest(), est))
        checks.append(CheckResult(4.0 * problem.f0_sup, est.value,
                                  3 * est.stderr + 1e-12, context="bmo-bound"))
    rep = bsde.submartingale_diagnostic(problem, float(cfg["k"]), t_grid,
                                        paths, seed, dt=dt)
    checks.append(CheckResult(0.0, float(len(rep.violations)), 0.0,
                              context="submartingale-monotone"))
    demo = bsde.liyau_bsde_demo(float(cfg["demo_c"]), 1, horizon,
                                min(paths, 10000), seed, dt=dt)
    rows.append(bsde.estimate_csv_row("reciprocal-demo", problem.manifest(),
                                      demo.estimate))
    checks.append(CheckResult(demo.exact, demo.estimate.value,
                              3 * demo.estimate.stderr + 1e-9,
                              context="reciprocal-identity"))
    reporting.write_rows_csv(os.path.join(out, "bsde_estimates.csv"),
                             bsde.ESTIMATE_CSV_HEADER, rows, "bsde")
    reporting.write_json(os.path.join(out, "bsde_manifest.json"),
                         problem.manifest(paths=paths, seed=seed, dt=dt))
    return checks


def _flow_case(case: str):
    if case == "gbm":
        spec = fields.linear_fields([np.zeros((1, 1)), np.eye(1)])
        x0 = [1.0]
    elif case == "constant":
        spec = fields.constant_fields([[0.5, 0.0], [1.0, 0.0], [0.0, 1.0]])
        x0 = [0.0, 0.0]
    elif case == "heisenberg":
        spec = fields.heisenberg_fields()
        x0 = [0.0, 0.0, 0.0]
    elif case == "rotation":
        rot = np.array([[0.0, -1.0], [1.0, 0.0]])
        spec = fields.linear_fields([np.zeros((2, 2)), rot])
        x0 = [1.0, 0.0]
    else:
        raise ConfigError(f"unknown flow case {case!r}")
    return spec, x0


def _run_flow(cfg: dict, out: str) -> List[CheckResult]:
    spec, x0 = _flow_case(cfg["case"])
    tol = float(cfg["tol"])
    base = flow.FlowConfig(spec=spec, t_end=float(cfg["t_end"]),
                           dt=float(cfg["dt"]), n_paths=int(cfg["paths"]),
                           seed=int(cfg["seed"]), x0=x0,
                           record_every=max(1, int(round(0.1 / float(cfg["dt"])))))
    ens = flow.simulate_flow(base)
    ens.require_healthy()
    checks = [CheckResult(tol, flow.jk_identity_residual(ens), 0.0,
                          context=f"jk-residual[{cfg['case']},dt={base.dt}]")]
    half = flow.FlowConfig(spec=spec, t_end=base.t_end, dt=base.dt / 2,
                           n_paths=base.n_paths, seed=base.seed, x0=x0,
                           record_every=2 * base.record_every)
    ens_half = flow.simulate_flow(half)
    r0 = flow.jk_identity_residual(ens)
    r1 = flow.jk_identity_residual(ens_half)
    ratio = r0 / r1 if r1 > 0 else math.inf
    checks.append(CheckResult(3.0, ratio, 0.0,
                              context="jk-refinement-upper"))
    checks.append(CheckResult(ratio, 1.5, 0.0,
                              context="jk-refinement-lower"))
    ens.summary_to_csv(os.path.join(out, "flow_summary.csv"))
    if cfg.get("dump"):
        ens.save_binary(os.path.join(out, str(cfg["dump"])))
    return checks


def _run_conditions(cfg: dict, out: str) -> List[CheckResult]:
    spec = fields.spec_from_config(cfg["fields"])
    box = cfg["box"]
    report = fields.condition_report(spec, box, int(cfg["samples"]),
                                     int(cfg["seed"]))
    with open(os.path.join(out, "conditions_report.json"), "w",
              encoding="utf-8") as fh:
        fh.write(report.to_json() + "\n")
    tol = float(cfg["tol"])
    checks = []
    for label, value in (("c1", report.c1_hat), ("c2", report.c2_hat)):
        status = report.c1_status if label == "c1" else report.c2_status
        if status == "ok":
            checks.append(CheckResult(value, 0.0, tol,
                                      context=f"{label}-nonnegative"))
        else:
            checks.append(CheckResult(0.0, 1.0, 0.0,
                                      context=f"{label}-degenerate"))
    if report.c1_status == "ok" and report.c2_status == "ok":
        checks.append(CheckResult(0.0, abs(report.k_hat
                                           - (report.c1_hat + report.c2_hat)),
                                  0.0, context="k-additivity"))
    checks.append(CheckResult(1.0, report.frobenius_residual, tol,
                              context="frobenius-residual-normalised"))
    return checks


RUNNERS: Dict[str, Callable[[dict, str], List[CheckResult]]] = {
    "solve": _run_solve,
    "liyau": _run_liyau,
    "gradbound": _run_gradbound,
    "harnack": _run_harnack,
    "bsde": _run_bsde,
    "flow": _run_flow,
    "conditions": _run_conditions,
}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def run(experiment: str, cfg: dict, out_dir: str) -> int:
    os.makedirs(out_dir, exist_ok=True)
    checks = RUNNERS[experiment](cfg, out_dir)
    reporting.write_checks_csv(os.path.join(out_dir, f"{experiment}_checks.csv"),
                               checks, experiment)
    failures = [c.to_dict() for c in checks if not c.passed]
    reporting.write_json(os.path.join(out_dir, f"{experiment}_summary.json"), {
        "experiment": experiment,
        "config": cfg,
        "checks": len(checks),
        "failures": failures,
        "passed": not failures,
        "workers": worker_count(),
    })
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status} {c.context}: bound={c.bound_value:.6g} "
              f"observed={c.observed:.6g} margin={c.margin:.3g}")
    return 0 if not failures else 1


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="heatbound",
        description="run verification experiments for heat-equation gradient "
                    "bounds and the associated BSDE machinery")
    p.add_argument("--experiment", help="experiment name (see --list)")
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="heatbound-out", help="output directory")
    p.add_argument("--paths", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--grid", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--list", action="store_true",
                   help="print the experiment catalog and exit")
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    if args.list:
        for name, desc in sorted(list_experiments().items()):
            print(f"{name}: {desc}")
        return 0
    if not args.experiment:
        print("error: --experiment is required (or --list)", file=sys.stderr)
        return 2
    try:
        cfg = build_config(args.experiment, args.config, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return run(args.experiment, cfg, args.out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
