"""
A reduced Monte Carlo study
===========================

Runs the two-impact OU design at a few sample sizes and prints the study
table: location and coefficient errors, the estimated number of impacts
under BIC and under the cut-off rule, the number of components, the slope
error, the in-sample MSE and kappa-hat.
"""

import argparse
import os

from pointimpact import ImpactModelSpec, ProcessSpec, SlopeFunction, StudyConfig, run_simulation_study

ap = argparse.ArgumentParser()
ap.add_argument("--replications", type=int, default=50)
ap.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
args = ap.parse_args()

cfg = StudyConfig(
    replications=args.replications,
    sizes=((100, 1001), (250, 1001), (500, 1001)),
    process=ProcessSpec.ou(5.0, 3.5),
    model=ImpactModelSpec((0.25, 0.75), (2.0, 1.0), SlopeFunction.zero(), 1.0),
    seed=2015,
)
report = run_simulation_study(cfg, n_jobs=args.jobs)
print(report.to_text())
