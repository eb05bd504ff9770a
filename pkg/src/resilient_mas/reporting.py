"""Gain tables, CSV traces and run summaries."""
from __future__ import annotations

import io
from pathlib import Path
from typing import Sequence

import numpy as np

from .linalg_control import GainSet
from .simulator import SimTrace, UubVerdict

CSV_FORMAT = "%.17g"


def _fmt_gain(a) -> str:
    a = np.atleast_2d(a)
    return "; ".join("[" + ", ".join(f"{x:9.6f}" for x in row) + "]" for row in a)


def emit_gain_report(gains: Sequence[GainSet]) -> str:
    """Fixed-layout table of Gamma, K, H and verification figures per follower."""
    header = (f"{'follower':>8}  {'Gamma':<24}  {'K':<24}  {'H':<24}  "
              f"{'CARE residual':>13}  {'regulator res.':>14}  {'Hurwitz margin':>14}  {'M scale':>10}")
    lines = [header, "-" * len(header)]
    for i, g in enumerate(gains, start=1):
        lines.append(
            f"{i:>8}  {_fmt_gain(g.Gamma):<24}  {_fmt_gain(g.K):<24}  {_fmt_gain(g.H):<24}  "
            f"{g.care_residual:>13.2e}  {g.regulator_residual:>14.2e}  {g.hurwitz_margin:>14.6f}  "
            f"{g.M[0, 0]:>10.4f}"
        )
    c = gains[0].c if gains else float("nan")
    lines.append(f"coupling gain c = {c:g}")
    return "\n".join(lines) + "\n"


# --- CSV traces ------------------------------------------------------------

def trace_columns(trace: SimTrace) -> list[str]:
    N, n = trace.x.shape[1], trace.x.shape[2]
    M = trace.leaders.shape[1]
    cols = ["t"]
    for i in range(1, N + 1):
        for name in ("x", "xhat", "xi", "dshat"):
            cols += [f"{name}_{i}_{j}" for j in range(1, n + 1)]
        cols += [f"dahat_{i}_{j}" for j in range(1, trace.m[i - 1] + 1)]
        cols += [f"chi_{i}", f"e_{i}_norm"]
    for k in range(1, M + 1):
        cols += [f"xk_{k}_{j}" for j in range(1, n + 1)]
    return cols


def trace_matrix(trace: SimTrace) -> np.ndarray:
    N = trace.x.shape[1]
    norms = trace.e_norms
    blocks = [trace.times[:, None]]
    for i in range(N):
        blocks += [trace.x[:, i], trace.x_hat[:, i], trace.xi[:, i], trace.ds_hat[:, i],
                   trace.input_of(trace.da_hat, i + 1), trace.chi[:, i:i + 1], norms[:, i:i + 1]]
    blocks += [trace.leaders[:, k] for k in range(trace.leaders.shape[1])]
    return np.hstack(blocks)


def _write_csv(path: Path, columns: list[str], data: np.ndarray) -> None:
    buf = io.StringIO()
    np.savetxt(buf, data, fmt=CSV_FORMAT, delimiter=",", header=",".join(columns), comments="")
    Path(path).write_text(buf.getvalue())


def write_trace_csv(trace: SimTrace, path) -> Path:
    path = Path(path)
    _write_csv(path, trace_columns(trace), trace_matrix(trace))
    return path


def read_trace_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path) as fh:
        columns = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return columns, data


def write_error_norms_csv(traces: dict[str, SimTrace], path) -> Path:
    """``t`` followed by ``||e_i(t)||`` of every follower for each labelled run (runs share the grid)."""
    labels = list(traces)
    times = traces[labels[0]].times
    cols, blocks = ["t"], [times[:, None]]
    for label in labels:
        tr = traces[label]
        if not np.array_equal(tr.times, times):
            raise ValueError("traces must share a time grid")
        cols += [f"{label}_e_{i}_norm" for i in range(1, tr.e.shape[1] + 1)]
        blocks.append(tr.e_norms)
    path = Path(path)
    _write_csv(path, cols, np.hstack(blocks))
    return path


# --- summaries -------------------------------------------------------------

def overall_verdict(verdicts: Sequence[UubVerdict]) -> str:
    return "divergent" if any(not v.bounded for v in verdicts) else "bounded"


def summarize_run(trace: SimTrace, verdicts: Sequence[UubVerdict]) -> str:
    idx5 = trace.sample_index(5.0)
    total = np.linalg.norm(trace.e.reshape(len(trace.times), -1), axis=1)
    lines = [f"mode: {trace.mode}", f"overall: {overall_verdict(verdicts)}",
             f"horizon: {trace.times[-1]:g} s, dt = {trace.dt:g} s, samples = {len(trace.times)}",
             f"||e(T)|| = {total[-1]:.6g}, ||e(5)|| = {total[idx5]:.6g}",
             f"{'follower':>8}  {'verdict':<10}  {'tail_sup':>12}  {'growth_rate':>12}  {'early_sup':>12}"]
    for i, v in enumerate(verdicts, start=1):
        lines.append(f"{i:>8}  {v.verdict:<10}  {v.tail_sup:>12.6g}  {v.growth_rate:>12.6g}  {v.early_sup:>12.6g}")
    if verdicts:
        lines.append(f"criterion: {verdicts[0].criterion}")
    return "\n".join(lines) + "\n"


def write_summary(path, run_summaries: Sequence[str], gain_report: str, header: str = "") -> Path:
    parts = [header.rstrip() + "\n"] if header else []
    parts += [s if s.endswith("\n") else s + "\n" for s in run_summaries]
    parts += ["gains:\n" + gain_report]
    path = Path(path)
    path.write_text("\n".join(parts))
    return path
