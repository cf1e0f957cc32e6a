"""Coupled convergence rate: medians of the four norms and log-log fits.

``python3 demos/rate_experiment.py`` runs a reduced grid in under a minute;
``--full`` runs the default grid N = 256..8192 with 64 replicates.
"""

import argparse
import json
from pathlib import Path

from fastslow.experiments import ExperimentConfig, run_coupled_convergence

CONFIG = Path(__file__).parent / "configs" / "ma1_trig.json"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--full", action="store_true")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    doc = json.loads(CONFIG.read_text())
    if not args.full:
        doc["experiment"].update(N_grid=[128, 256, 512, 1024, 2048], replicates=16)
    res = run_coupled_convergence(ExperimentConfig.from_dict(doc), args.threads)
    print("N".rjust(22) + "".join(f"{N:>9}" for N in res.N_grid))
    for kind in res.quantiles:
        print(kind.rjust(22) + "".join(f"{m:9.4f}" for m in res.medians(kind)))
    print()
    for kind, fit in res.fits.items():
        print(f"{kind:>22}: delta = {fit['delta']:.4f}, R^2 = {fit['r2']:.3f}")


if __name__ == "__main__":
    main()
