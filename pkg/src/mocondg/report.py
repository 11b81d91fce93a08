"""CSV, JSON and SVG output for benchmark results.

SVG files are byte-stable: the hash salt is fixed, the creation date is
omitted and text is kept as text rather than glyph paths.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .benchmark import MEASURES, BenchmarkResult  # noqa: E402
from .errors import IoFailure  # noqa: E402
from .metrics import nondominated_mask  # noqa: E402

_RC = {"svg.hashsalt": "mocondg", "svg.fonttype": "none", "path.simplify": False}
_MARKERS = ("o", "s", "^", "D", "v", "P")

INSTANCE_COLUMNS = ["id", "problem", "solver", "start", "delta_bar", "success", "stop_reason",
                    "iterations", "f_evals", "grad_evals", "lp_solves", "qp_solves",
                    "theta_final", "theta_pg_final"]


def instances_table(result: BenchmarkResult) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    m = max((len(r["F_final"]) for r in result.records), default=0)
    w.writerow(INSTANCE_COLUMNS + [f"F{j + 1}" for j in range(m)])
    for r in result.records:
        w.writerow([r[c] for c in INSTANCE_COLUMNS]
                   + [repr(float(v)) for v in r["F_final"]])
    return out.getvalue()


def _save(fig, path: Path) -> None:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    try:
        path.write_text(buf.getvalue())
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def profile_figure(result: BenchmarkResult, measure: str, path: Path) -> bool:
    curves = result.profiles(measure)
    if not curves:
        return False
    finite = [c.ratios[np.isfinite(c.ratios)] for c in curves.values()]
    tau_max = max([1.0] + [float(f.max()) for f in finite if f.size]) * 1.1
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.5, 4))
        for k, (name, c) in enumerate(curves.items()):
            tau, rho = c.steps()
            xs = np.concatenate([[1.0], tau, [tau_max]])
            ys = np.concatenate([[c(1.0)], rho, [c.robustness]])
            ax.step(xs, ys, where="post", label=name, linestyle=("-", "--", ":", "-.")[k % 4])
        ax.set_xscale("log")
        ax.set_xlim(1.0, tau_max)
        ax.set_ylim(0.0, 1.02)
        ax.set_xlabel(r"performance ratio $\tau$")
        ax.set_ylabel(r"$\rho(\tau)$")
        ax.set_title(f"Performance profile ({measure})")
        ax.legend(loc="lower right")
        fig.tight_layout()
        _save(fig, path)
    return True


def frontier_figure(result: BenchmarkResult, problem: str, path: Path,
                    nondominated_only: bool = False) -> bool:
    """Scatter of final objective vectors, one layer per (delta_bar, solver).

    Only bi-objective problems are drawn.
    """
    layers = []
    for db in result.config.delta_bar:
        for solver, P in result.frontier_points(problem, db).items():
            if P.shape[1] != 2:
                return False
            if nondominated_only:
                P = P[nondominated_mask(P)]
            layers.append((db, solver, P))
    if not layers:
        return False
    multi_solver = len({s for _, s, _ in layers}) > 1
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 4))
        for k, (db, solver, P) in enumerate(layers):
            label = f"δ̄={db}" + (f" {solver}" if multi_solver else "")
            ax.scatter(P[:, 0], P[:, 1], s=10, marker=_MARKERS[k % len(_MARKERS)], label=label,
                       alpha=0.8, linewidths=0.5)
        ax.set_xlabel("$F_1$")
        ax.set_ylabel("$F_2$")
        ax.set_title(problem)
        ax.legend(loc="upper right", fontsize="small")
        fig.tight_layout()
        _save(fig, path)
    return True


def emit_report(result: BenchmarkResult, out_dir, formats=("csv", "json", "svg")) -> list[Path]:
    """Write the report files and return their paths.

    An empty result still yields ``summary.json`` and a header-only table.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    written = []

    def write(name, text):
        path = out / name
        try:
            path.write_text(text)
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        written.append(path)

    if "json" in formats:
        write("summary.json", json.dumps(result.summary(), indent=2, sort_keys=True) + "\n")
    if "csv" in formats:
        write("instances.csv", instances_table(result))
    if "svg" in formats:
        for measure in MEASURES:
            path = out / f"profile_{measure}.svg"
            if profile_figure(result, measure, path):
                written.append(path)
        for problem in result.config.problems:
            path = out / f"frontier_{problem}.svg"
            if frontier_figure(result, problem, path):
                written.append(path)
    return written
