"""Solve one robust problem with both methods and compare their traces.

Run: python demos/solve_robust_problem.py [PROBLEM] [SEED]
"""

import sys

import numpy as np

from mocondg.registry import get_problem
from mocondg.robust import RobustConfig, make_robust
from mocondg.solvers import Adaptive, Armijo, estimate_constants, run_condg, run_proxgrad


def main(name: str = "BK1", seed: int = 7) -> None:
    problem = make_robust(get_problem(name), RobustConfig(seed=seed))
    zset = problem.nonsmooth.sets[0]
    print(f"{problem.name}: n={problem.n}, m={problem.m}, delta={zset.delta:.4g}")

    x0 = problem.box.sample(np.random.default_rng(seed), 1)[0]
    print("start", np.array2string(x0, precision=3))

    # CondG solves one LP per iteration; ProxGrad one QP
    runs = {
        "CondG / Armijo": run_condg(problem, x0, Armijo()),
        "CondG / adaptive": run_condg(problem, x0, Adaptive()),
        "ProxGrad / Armijo": run_proxgrad(problem, x0),
    }
    for label, trace in runs.items():
        c = trace.counters
        print(f"{label:18s} {trace.stop_reason.value:14s} it={trace.iterations:3d} f_evals={c.f_evals:4d} "
              f"lp={c.lp_solves:3d} qp={c.qp_solves:3d} F={np.array2string(trace.F_final, precision=5)}")

    est = estimate_constants(problem, Armijo(), x0)
    print(f"step floor gamma = {est.gamma:.3e} (rho={est.rho:.3g}, L_G={est.L_G:.3g}, "
          f"L={est.L:.3g}, Omega={est.Omega:.3g})")
    armijo = runs["CondG / Armijo"]
    slack = min(r.lam - est.gamma * abs(r.theta) for r in armijo.records) if armijo.records else float("nan")
    print(f"smallest lambda_k - gamma|theta_k| along the Armijo run: {slack:.3e}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "BK1", int(sys.argv[2]) if len(sys.argv) > 2 else 7)
