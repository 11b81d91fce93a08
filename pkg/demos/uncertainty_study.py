"""Frontier approximations for three uncertainty levels on one problem.

Smaller delta_bar shrinks every uncertainty set, so the robust objectives
can only go down. The script writes the scatter plot and prints the spread
metrics per level.

Run: python demos/uncertainty_study.py [PROBLEM] [OUT_DIR]
"""

import sys
from pathlib import Path

from mocondg.benchmark import BenchmarkConfig, run_frontier
from mocondg.report import emit_report

LEVELS = [0.02, 0.05, 0.10]


def main(name: str = "BK1", out: str = "demo-uncertainty") -> None:
    config = BenchmarkConfig(problems=[name], solvers=["CondG"], delta_bar=LEVELS, seed=1,
                             budgets={"frontier_seconds": 120, "frontier_starts": 40})
    result = run_frontier(config, Path(out) / "results")
    emit_report(result, Path(out) / "report")
    for db in LEVELS:
        front = result.frontier(name, db)
        print(f"delta_bar={db:.2f}: {len(front.points)} nondominated points")
    for key, metrics in result.frontier_metrics().items():
        print(key, metrics)
    print("scatter:", Path(out) / "report" / f"frontier_{name}.svg")


if __name__ == "__main__":
    main(*sys.argv[1:3])
