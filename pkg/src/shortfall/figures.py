"""Figure rendering for the CLI report paths.

Each report-producing subcommand can render matplotlib figures next to its
delimited output: coverage and error-decay panels for concentration runs,
and the interval trace for training runs.  Files are written as PNG under
the requested directory; the returned list names what was written.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _finish(fig, path: str) -> str:
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def concentration_figures(details: dict, out_dir: str, stem: str = "concentration") -> list[str]:
    """Coverage-vs-n and median-error panels from a concentration report."""
    os.makedirs(out_dir, exist_ok=True)
    cells = details["cells"]
    deltas = sorted({c["delta"] for c in cells})
    written = []

    fig, ax = plt.subplots(figsize=(6, 4))
    for delta in deltas:
        rows = sorted((c for c in cells if c["delta"] == delta), key=lambda c: c["n"])
        ns = [c["n"] for c in rows]
        ax.plot(ns, [c["coverage"] for c in rows], "o-", label=f"coverage, delta={delta:g}")
        ax.plot(ns, [c["threshold"] for c in rows], "--", label=f"threshold, delta={delta:g}")
    ax.set_xscale("log")
    ax.set_xlabel("sample size n")
    ax.set_ylabel("empirical coverage")
    ax.set_ylim(0.0, 1.05)
    ax.legend(fontsize=8)
    ax.set_title("bound coverage")
    written.append(_finish(fig, os.path.join(out_dir, f"{stem}_coverage.png")))

    medians = details["median_abs_error"]
    ns = sorted(int(n) for n in medians)
    errs = [medians[n] if n in medians else medians[str(n)] for n in ns]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(ns, errs, "o-", label="median |error|")
    slope = details.get("median_error_slope")
    if slope is not None and len(ns) >= 2:
        anchor = errs[0] * (np.array(ns, dtype=float) / ns[0]) ** slope
        ax.loglog(ns, anchor, "--", label=f"fit slope {slope:.3f}")
    for delta in deltas:
        rows = sorted((c for c in cells if c["delta"] == delta), key=lambda c: c["n"])
        ax.loglog([c["n"] for c in rows], [c["bound"] for c in rows], ":", label=f"bound, delta={delta:g}")
    ax.set_xlabel("sample size n")
    ax.set_ylabel("absolute estimation error")
    ax.legend(fontsize=8)
    ax.set_title("estimation error decay")
    written.append(_finish(fig, os.path.join(out_dir, f"{stem}_error.png")))
    return written


def trace_figure(trace, out_dir: str, stem: str = "trace") -> list[str]:
    """Interval shrinkage and risk estimates across bisection iterations."""
    os.makedirs(out_dir, exist_ok=True)
    ts = [row.t for row in trace.rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.fill_between(
        ts,
        [row.alpha for row in trace.rows],
        [row.beta for row in trace.rows],
        alpha=0.25,
        label="[alpha_t, beta_t]",
    )
    ax.plot(ts, [row.gamma for row in trace.rows], "o-", label="gamma_t")
    ax.plot(ts, [row.gamma_hat for row in trace.rows], "s--", label="estimated risk")
    ax.set_xlabel("iteration t")
    ax.set_ylabel("risk level")
    ax.legend(fontsize=8)
    ax.set_title(f"bisection trace (beta0 = {trace.beta0:.4g})")
    return [_finish(fig, os.path.join(out_dir, f"{stem}.png"))]
