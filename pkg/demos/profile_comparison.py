"""A small multistart comparison of CondG and ProxGrad with performance profiles.

Run: python demos/profile_comparison.py [STARTS] [OUT_DIR]
"""

import sys
from pathlib import Path

import numpy as np

from mocondg.benchmark import BenchmarkConfig, run_benchmark
from mocondg.report import emit_report


def main(starts: int = 10, out: str = "demo-profiles") -> None:
    config = BenchmarkConfig(problems=["BK1", "IM1", "VU2", "SP1", "Lov1", "MOP2"], starts=starts, seed=3)
    result = run_benchmark(config, Path(out) / "results")
    files = emit_report(result, Path(out) / "report")

    for measure in ("iterations", "f_evals"):
        print(f"profile on {measure}:")
        for solver, curve in result.profiles(measure).items():
            taus = np.array([1.0, 2.0, 4.0])
            vals = ", ".join(f"rho({t:g})={v:.2f}" for t, v in zip(taus, curve(taus)))
            print(f"  {solver:9s} success {result.success_rate(solver):.0%}  {vals}")
    print(f"{len(files)} report files in {Path(out) / 'report'}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 10, *sys.argv[2:3])
