"""Command-line entry point: ``fastslow <command> --config run.json``.

Every command writes results.csv, certificates.jsonl and summary.json
into ``--out``. Exit status: 0 when every certificate holds (or none were
issued), 2 on any violation, 3 when some are inconclusive and none fail,
1 on configuration or evaluation errors.
"""

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .diffusion import DiffusionPath
from .drivers import COUPLABLE, gen_coupled, gen_driver
from .errors import FastSlowError
from .experiments import (ExperimentConfig, block_lipschitz_check, run_coupled_convergence,
                          run_coupled_runs, run_weak_comparison, variational_transfer_check)
from .lift import chen_residual, lift_brownian, lift_continuous, lift_discrete, write_lift_csv
from .norms import (holder, increment_window, iterated_window, modified_holder, norm_comparison,
                    p_variation_values, path_window)
from .sewing import BoundReport, _plain, apriori_bound_check, proof_constants, sewing_residual
from .slow_motion import (SlowPath, reconstruction_selftest, simulate_continuous, simulate_discrete,
                          write_path_csv)

COMMANDS = ("simulate", "lift", "norms", "sew-check", "bounds", "rate", "weak")


class Outputs:
    """Collects records, certificates and summary fields for one command."""

    def __init__(self, out, cfg, command):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.cfg = cfg
        self.command = command
        self.records = []
        self.certificates = []
        self.summary = {}

    def record(self, N, replicate, kind, value):
        self.records.append((int(N), int(replicate), kind, float(value)))

    def certify(self, report):
        if report.inputs.get("config_hash") is None:
            report.inputs["config_hash"] = self.cfg.config_hash
        self.certificates.append(report)

    def exit_code(self):
        status = [c.status for c in self.certificates]
        if "violated" in status:
            return 2
        if "inconclusive" in status:
            return 3
        return 0

    def write(self):
        with open(self.out / "results.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["N", "replicate", "norm_kind", "value"])
            for N, r, kind, v in self.records:
                w.writerow([N, r, kind, repr(v)])
        with open(self.out / "certificates.jsonl", "w") as fh:
            for c in self.certificates:
                fh.write(c.to_json() + "\n")
        counts = {s: sum(c.status == s for c in self.certificates)
                  for s in ("satisfied", "violated", "inconclusive")}
        summary = {"command": self.command, "config_hash": self.cfg.config_hash,
                   "config": self.cfg.to_dict(), "certificates": counts,
                   "exit_code": self.exit_code(), **self.summary}
        with open(self.out / "summary.json", "w") as fh:
            json.dump(_plain(summary), fh, indent=2, allow_nan=True)


def _driver(cfg, N, replicate=0):
    return gen_driver(cfg.driver["kind"], cfg.seed, N, cfg.T, cfg.driver_params, replicate=replicate,
                      continuous=cfg.continuous, substeps=cfg.substeps)


def _slow(cfg, field, driver):
    if cfg.continuous:
        return simulate_continuous(field, driver, cfg.x0), lift_continuous(driver)
    return simulate_discrete(field, driver, cfg.x0), lift_discrete(driver)


def _random_windows(rng, T, n):
    return [tuple(sorted(rng.uniform(0.0, T, size=2))) for _ in range(n)]


def cmd_simulate(cfg, out, threads):
    field = cfg.field()
    driver = _driver(cfg, cfg.N)
    slow, lift = _slow(cfg, field, driver)
    write_path_csv(slow, out.out / "path.csv", fine=cfg.continuous)
    if not cfg.continuous:
        out.certify(reconstruction_selftest(slow, lift, field, cfg.n_windows, cfg.seed))
        out.summary["recurrence_residual"] = slow.recurrence_residual(field, driver)
    out.summary.update(N=cfg.N, mode=slow.mode, final_state=slow.states[-1].tolist(),
                       centering=driver.centering_check())


def _chen_certificate(lift, n, rng, label):
    T = lift.grid.T
    t = np.sort(rng.uniform(0.0, T, size=(n, 3)), axis=1)
    res = chen_residual(lift, t[:, 0], t[:, 1], t[:, 2])
    worst = float(np.max(np.abs(res)))
    return BoundReport.check("chen_2_1", worst, 1e-12 * (1 + lift.scale), lift=label, triples=n,
                             resolution=lift.resolution)


def cmd_lift(cfg, out, threads):
    driver = _driver(cfg, cfg.N)
    lift = lift_continuous(driver) if cfg.continuous else lift_discrete(driver)
    write_lift_csv(lift, out.out / "lift.csv")
    rng = np.random.default_rng(cfg.seed)
    out.certify(_chen_certificate(lift, 10_000, rng, lift.kind))
    if cfg.driver["kind"] in COUPLABLE:
        noise = gen_coupled(cfg.seed, cfg.N, cfg.T, cfg.driver["kind"], cfg.driver_params, cfg.substeps,
                            continuous=cfg.continuous)
        bl = lift_brownian(noise, noise.gamma)
        write_lift_csv(bl, out.out / "brownian_lift.csv")
        out.certify(_chen_certificate(bl, 10_000, rng, "brownian"))
    out.summary.update(N=cfg.N, kind=lift.kind, resolution=lift.resolution, scale=lift.scale)


def cmd_norms(cfg, out, threads):
    field = cfg.field()
    N, a = cfg.N, cfg.alpha
    for r in range(cfg.replicates):
        slow, lift = _slow(cfg, field, _driver(cfg, N, r))
        X = slow.states
        Xw = path_window(X, N)
        out.record(N, r, "X_alpha_N", modified_holder(Xw, a, N).value)
        out.record(N, r, "X_p", p_variation_values(X, cfg.p)[0])
        out.record(N, r, "S_alpha", holder(increment_window(lift), a).value)
        out.record(N, r, "SS_2alpha", holder(iterated_window(lift), 2 * a).value)
        if r == 0 and 1 / 3 < a < 0.49:
            beta = min(0.5 - 1e-6, a + 0.04)
            nc = norm_comparison(Xw, a, beta, 1.0, N, cfg.p)
            out.certify(BoundReport.check("norm_comparison_5_5", nc.lhs, nc.rhs,
                                          holder_branch=nc.holder_branch,
                                          variation_branch=nc.variation_branch, **nc.params))
    out.summary.update(N=N, replicates=cfg.replicates)


def cmd_sew_check(cfg, out, threads):
    field = cfg.field()
    rng = np.random.default_rng(cfg.seed)
    driver = _driver(cfg, cfg.N)
    slow, lift = _slow(cfg, field, driver)
    mode = "continuous" if cfg.continuous else "discrete"
    worst = []
    for s, t in _random_windows(rng, cfg.T, cfg.n_windows):
        if t - s < 2.0 / cfg.N:
            continue
        res, reports = sewing_residual(field, slow, lift, s, t, mode, alpha=cfg.alpha, seed=cfg.seed)
        for rep in reports:
            out.certify(rep)
        worst.append(float(np.max(res)))
    if cfg.driver["kind"] in COUPLABLE:
        run = run_coupled_runs(cfg, cfg.N, [0], field)[0]
        xi = DiffusionPath(run.noise.grid, run.Xi_fine, run.Xi_fine[0], run.noise.gamma, cfg.scheme,
                           cfg.substeps)
        for s, t in _random_windows(rng, cfg.T, cfg.n_windows):
            if t - s < 2.0 / cfg.N:
                continue
            _, reports = sewing_residual(field, xi, run.lift_W, s, t, "continuous", alpha=cfg.alpha,
                                         seed=cfg.seed)
            for rep in reports:
                out.certify(rep)
    out.summary.update(N=cfg.N, mode=mode, max_residual=max(worst) if worst else math.nan)


def cmd_bounds(cfg, out, threads):
    field = cfg.field()
    N = cfg.N
    runs = run_coupled_runs(cfg, N, list(range(cfg.replicates)), field)
    for run in runs:
        lift = run.lift_S
        consts = proof_constants(field, lift, cfg.alpha, None if cfg.continuous else N)
        if cfg.continuous:
            slow = SlowPath(lift.grid, run.X_coarse, run.X_mesh[0], "continuous", run.X_mesh)
        else:
            slow = SlowPath(lift.grid, run.X_mesh, run.X_mesh[0], "discrete")
        out.certify(apriori_bound_check(field, slow, lift, cfg.alpha, run.mode, consts))
        out.certify(variational_transfer_check(run, None, cfg.alpha, cfg.p))
        out.certify(block_lipschitz_check(field, run, cfg.alpha))
    out.summary.update(N=N, runs=len(runs))


def cmd_rate(cfg, out, threads):
    result = run_coupled_convergence(cfg, threads)
    for rec in result.records:
        out.record(*rec)
    out.summary.update(result.summary())


def cmd_weak(cfg, out, threads):
    report = run_weak_comparison(cfg, threads)
    for e in report.per_N:
        out.record(e["N"], -1, "ks_statistic_max", max(e["ks_statistic"]))
        out.record(e["N"], -1, "mean_gap", e["mean_gap"])
        out.record(e["N"], -1, "cov_gap", e["cov_gap"])
    out.summary.update(report.summary())


HANDLERS = {"simulate": cmd_simulate, "lift": cmd_lift, "norms": cmd_norms, "sew-check": cmd_sew_check,
            "bounds": cmd_bounds, "rate": cmd_rate, "weak": cmd_weak}


def build_parser():
    parser = argparse.ArgumentParser(prog="fastslow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON document with driver, coefficients, experiment blocks")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker processes")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            doc = json.load(fh)
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ValueError("--seed must be an unsigned 64-bit integer")
            doc.setdefault("experiment", {})["seed"] = args.seed
        cfg = ExperimentConfig.from_dict(doc)
        out = Outputs(args.out, cfg, args.command)
        HANDLERS[args.command](cfg, out, max(1, args.threads))
    except (FastSlowError, OSError, ValueError) as exc:
        print(f"fastslow {args.command}: {exc}", file=sys.stderr)
        return 1
    out.write()
    return out.exit_code()


if __name__ == "__main__":
    sys.exit(main())
