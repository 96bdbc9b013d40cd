"""Trace and spectrum exports: CSV files and SVG convergence charts."""

import csv
import io
import math
import os
import tempfile
from pathlib import Path
from typing import List, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from src.logger import get_logger  # noqa: E402
from src.models import ApproximationTrace, SpectralSummary, Verdict  # noqa: E402

logger = get_logger(__name__)

TRACE_COLUMNS = ["n", "size", "logdet_per_site", "running_inf", "wall_ms"]
SVG_HASH_SALT = "fkdet"


def write_atomic(path: Union[str, Path], data: Union[str, bytes]) -> Path:
    """Write to a temporary file in the target directory, then rename over path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, temp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as handle:
            handle.write(data)
        os.replace(temp, path)
    except OSError as e:
        logger.error(f"Error writing {path}: {e}")
        if os.path.exists(temp):
            os.unlink(temp)
        raise
    return path


def trace_csv(trace: ApproximationTrace) -> str:
    """CSV text with one row per schedule point and the running infimum so far."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    running = float("inf")
    for point in trace.points:
        running = min(running, point.logdet_per_site)
        writer.writerow([point.n, point.size, repr(point.logdet_per_site), repr(running), f"{point.wall_ms:.3f}"])
    return buffer.getvalue()


def spectrum_csv(summary: SpectralSummary) -> str:
    """One eigenvalue per line."""
    return "".join(f"{value!r}\n" for value in summary.eigenvalues)


def trace_svg(trace: ApproximationTrace) -> str:
    """Standalone SVG line chart of v_n against n with the running-infimum band."""
    plt.rcParams["svg.hashsalt"] = SVG_HASH_SALT
    ns = [p.n for p in trace.points]
    # a singular section plots as a gap
    values = [p.logdet_per_site if math.isfinite(p.logdet_per_site) else math.nan for p in trace.points]
    running = [min((v for v in values[:i + 1] if not math.isnan(v)), default=math.nan) for i in range(len(values))]
    fig, ax = plt.subplots(figsize=(6, 4))
    try:
        ax.plot(ns, values, marker="o", label="log det / |F|")
        ax.step(ns, running, where="post", linestyle="--", label="running inf")
        ax.fill_between(ns, running, values, alpha=0.2, step=None)
        if trace.verdict == Verdict.CONVERGED:
            ax.axhline(trace.value, color="grey", linewidth=0.8)
        ax.set_xscale("log", base=2)
        ax.set_xlabel("n")
        ax.set_ylabel("per-site log-determinant")
        ax.set_title(trace.operator or "Følner approximation")
        ax.grid(True)
        ax.legend(frameon=False)
        buffer = io.StringIO()
        fig.savefig(buffer, format="svg", metadata={"Date": None})
        return buffer.getvalue()
    finally:
        plt.close(fig)


def emit_plot(trace: ApproximationTrace, path: Union[str, Path], svg: bool = False) -> List[Path]:
    """
    Write the trace as CSV, and optionally as an SVG chart next to it.

    Args:
        trace: nonempty approximation trace
        path: output path; suffixes are replaced by .csv and .svg
        svg: also render the chart

    Returns:
        Paths written
    """
    if not trace.points:
        raise ValueError("Cannot plot an empty trace")
    path = Path(path)
    written = [write_atomic(path.with_suffix(".csv"), trace_csv(trace))]
    if svg:
        written.append(write_atomic(path.with_suffix(".svg"), trace_svg(trace)))
    logger.info(f"Trace written to {', '.join(str(p) for p in written)}")
    return written
