"""Main orchestration module: one batch job from config to cached report."""

import hashlib
import json
import math
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from src import __version__
from src.cache import ReportCache
from src.config import settings
from src.exceptions import NotPositiveError, ShapeError
from src.expressions import format_group, format_ring_expr, parse_group, parse_ring_matrix
from src.fk import check_star_symmetric, epsilon_sweep, fk_det_general, resolve_schedule
from src.groupring import RingMatrix, star
from src.groups import folner_box
from src.invariants import entropy_finite_group_oracle, entropy_principal, mahler_jensen, mahler_quadrature
from src.logger import get_logger
from src.models import (
    ApproximationTrace,
    CacheConfig,
    EntropyKind,
    JobConfig,
    Operation,
    OutputFormat,
    ReportRecord,
    ReportValue,
    Verdict,
)
from src.plots import emit_plot, spectrum_csv, write_atomic
from src.restrict import assemble
from src.spectral import eigs_sym, empirical_moments
from src.torsion import ChainComplex, load_complex, l2_torsion, weak_acyclicity

logger = get_logger(__name__)

MOMENTS = 4


class JobOutcome:
    """Values, verdict and artifacts produced by one operation."""

    def __init__(self, verdict: str):
        self.verdict = verdict
        self.values: Dict[str, ReportValue] = {}
        self.details: Dict[str, object] = {}
        self.warnings: List[str] = []
        self.nonconverged = False
        self.trace: Optional[ApproximationTrace] = None
        self.spectrum: Optional[str] = None

    def add(self, name: str, value: float, error: float = 0.0):
        self.values[name] = ReportValue(value=value, error=error)


def trace_details(trace: ApproximationTrace) -> dict:
    """Trace as plain data without wall-clock times, which would break determinism."""
    return trace.model_dump(mode="json", exclude={"points": {"__all__": {"wall_ms"}}})


class JobRunner:
    """Run a JobConfig through the matching pipeline, with caching and report files."""

    def __init__(self, config: JobConfig, cache: Optional[ReportCache] = None, use_cache: bool = True):
        """
        Initialize JobRunner with configuration.

        Args:
            config: JobConfig instance
            cache: ReportCache. If None, opens one in config.cache_dir (or the settings default)
            use_cache: look up and store reports
        """
        self.config = config
        self.use_cache = use_cache
        self.group = parse_group(config.group, config.theta)
        self.complex: Optional[ChainComplex] = None
        if config.operation == Operation.TORSION:
            self.complex = load_complex(config.complex_file)
        self.cache = cache
        if self.cache is None and use_cache:
            self.cache = ReportCache(CacheConfig(cache_dir=config.cache_dir or settings.cache_dir))
        logger.info(f"JobRunner initialized: {config.operation.value} over {self.group}")

    # ---- hashing ----

    def canonical_input(self) -> str:
        """Input text after a parse/print round, so equivalent spellings share a hash."""
        if self.complex is not None:
            lines = [f"group = {format_group(self.complex.group)}"]
            lines += [f"f{j} = {format_ring_expr(f)}" for j, f in enumerate(self.complex.boundaries, start=1)]
            return "\n".join(lines)
        if self.config.expr is None:
            return ""
        return format_ring_expr(parse_ring_matrix(self.config.expr, self.group))

    def job_hash(self) -> str:
        payload = self.config.model_dump(mode="json", exclude=JobConfig.HASH_EXCLUDE | {"group", "expr", "complex_file", "theta"})
        payload["group"] = format_group(self.complex.group if self.complex is not None else self.group)
        payload["input"] = self.canonical_input()
        payload["tool_version"] = __version__
        text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    # ---- operations ----

    def _matrix(self) -> RingMatrix:
        return parse_ring_matrix(self.config.expr, self.group)

    def _fkdet(self) -> JobOutcome:
        f = self._matrix()
        trace = fk_det_general(f, cap=self.config.cap, tol=self.config.tol)
        outcome = JobOutcome(trace.verdict.value)
        outcome.trace = trace
        outcome.add("log_det", trace.value, trace.est_error)
        outcome.add("running_inf", trace.running_inf)
        outcome.details["determinant"] = trace.determinant
        outcome.nonconverged = trace.verdict == Verdict.UPPER_BOUND_ONLY
        outcome.warnings.extend(trace.warnings)
        if self.config.eps_sweep:
            sweep = epsilon_sweep(star(f) @ f, self.config.eps_sweep, cap=self.config.cap, tol=2.0 * self.config.tol)
            # the sweep regularises f* f; halve to report det(f) scale
            outcome.details["epsilon_sweep"] = [
                {"epsilon": p.epsilon, "log_det": 0.5 * p.value, "verdict": p.verdict.value} for p in sweep
            ]
        return outcome

    def _mahler(self) -> JobOutcome:
        f = self._matrix()
        result = mahler_quadrature(f, tol=self.config.tol, seed=self.config.seed)
        outcome = JobOutcome("converged" if result.converged else "not_converged")
        outcome.add("log_mahler", result.value, result.error_estimate)
        outcome.details["quadrature"] = result.model_dump(mode="json")
        if self.group.rank == 1 and f.shape == (1, 1):
            jensen = mahler_jensen(f)
            outcome.add("jensen", jensen)
            outcome.verdict = "converged"
        else:
            outcome.nonconverged = not result.converged
        return outcome

    def _entropy(self) -> JobOutcome:
        f = self._matrix()
        result = entropy_principal(f, cap=self.config.cap, tol=self.config.tol)
        outcome = JobOutcome(result.kind.value)
        outcome.add("entropy", result.value, result.est_error)
        outcome.details["method"] = result.method
        outcome.details["kernel_fraction"] = result.kernel_fraction
        if result.trace is not None:
            outcome.trace = result.trace
            outcome.warnings.extend(result.trace.warnings)
            outcome.nonconverged = result.trace.verdict == Verdict.UPPER_BOUND_ONLY
        if self.group.is_finite and f.is_square and result.kind != EntropyKind.INFINITE:
            outcome.details["cokernel_order"] = entropy_finite_group_oracle(f).cokernel_order
        return outcome

    def _torsion(self) -> JobOutcome:
        complex_ = self.complex
        levels = weak_acyclicity(complex_, cap=self.config.cap)
        outcome = JobOutcome("weakly_acyclic")
        outcome.details["acyclicity"] = [v.model_dump(mode="json") for v in levels]
        failing = [v.level for v in levels if not v.acyclic]
        if failing:
            outcome.verdict = "not_weakly_acyclic"
            outcome.warnings.append(f"Laplacian kernels at levels {failing}; torsion undefined")
            return outcome
        report = l2_torsion(complex_, cap=self.config.cap, tol=self.config.tol, method=self.config.method, check_acyclic=False)
        outcome.add("rho", report.rho, report.rho_error)
        if report.laplacian_rho is not None:
            outcome.add("laplacian_rho", report.laplacian_rho, report.laplacian_error or 0.0)
        outcome.details["torsion"] = report.model_dump(mode="json")
        outcome.warnings.extend(report.notes)
        unconverged = [lvl.level for lvl in report.per_level if not lvl.converged]
        unconverged += [lvl.level for lvl in report.laplacian_levels if not lvl.converged]
        outcome.nonconverged = bool(unconverged)
        outcome.verdict = "interval" if unconverged else "converged"
        return outcome

    def _spectrum(self) -> JobOutcome:
        f = self._matrix()
        try:
            check_star_symmetric(f)
            g, label = f, "f"
        except (NotPositiveError, ShapeError):
            g, label = star(f) @ f, "f* f"
        n = resolve_schedule(self.group, g.rows, self.config.cap)[-1]
        summary = eigs_sym(assemble(g, folner_box(self.group, n)))
        outcome = JobOutcome("computed")
        outcome.spectrum = spectrum_csv(summary)
        outcome.details.update({"operator": label, "n": n, "size": summary.size, "keps": summary.keps})
        outcome.add("kernel_dim", float(summary.kernel_dim))
        outcome.add("logdet_per_site", summary.logdet / summary.sites if summary.sites else 0.0)
        for k, moment in enumerate(empirical_moments(summary, MOMENTS)):
            outcome.add(f"moment_{k}", moment)
        return outcome

    def _selftest(self) -> JobOutcome:
        from src.selftest import run_selftest

        results = run_selftest()
        failed = [r for r in results if not r.passed]
        outcome = JobOutcome("ok" if not failed else "failed")
        outcome.add("passed", float(len(results) - len(failed)))
        outcome.add("failed", float(len(failed)))
        outcome.details["cases"] = [r.model_dump(mode="json") for r in results]
        outcome.nonconverged = bool(failed)
        return outcome

    # ---- driver ----

    def dispatch(self) -> JobOutcome:
        handlers = {
            Operation.FKDET: self._fkdet,
            Operation.MAHLER: self._mahler,
            Operation.ENTROPY: self._entropy,
            Operation.TORSION: self._torsion,
            Operation.SPECTRUM: self._spectrum,
            Operation.SELFTEST: self._selftest,
        }
        return handlers[self.config.operation]()

    def report_paths(self, job_hash: str) -> Tuple[Path, Path]:
        stem = Path(self.config.out) / f"{self.config.operation.value}-{job_hash[:12]}"
        return stem.with_suffix(".json"), stem

    def emit_artifacts(
        self,
        record: ReportRecord,
        stem: Path,
        trace: Optional[ApproximationTrace] = None,
        spectrum: Optional[str] = None
    ) -> List[Path]:
        """
        Write the side files of a report next to its JSON.

        Args:
            record: the report, fresh or replayed
            stem: report path without suffix
            trace: live trace; if None, rebuilt from the report details (wall times read 0)
            spectrum: eigenvalue CSV; if None for a spectrum job, the section is recomputed

        Returns:
            Paths written
        """
        written = []
        if trace is None and "trace" in record.details:
            trace = ApproximationTrace.model_validate(record.details["trace"])
        if trace is not None and trace.points:
            svg = self.config.format == OutputFormat.SVG
            written += emit_plot(trace, stem.with_name(stem.name + "-trace"), svg=svg)
        if record.operation == Operation.SPECTRUM:
            if spectrum is None:
                spectrum = self._spectrum().spectrum
            written.append(write_atomic(stem.with_name(stem.name + "-spectrum.csv"), spectrum))
        if self.config.format == OutputFormat.CSV:
            written.append(write_atomic(stem.with_name(stem.name + "-values.csv"), values_csv(record)))
        return written

    def run(self) -> ReportRecord:
        """
        Run the job, or replay its cached report.

        Returns:
            ReportRecord; the JSON report and its side files are written under config.out,
            also on a replay
        """
        job_hash = self.job_hash()
        report_path, stem = self.report_paths(job_hash)
        if self.use_cache and self.cache is not None:
            payload = self.cache.lookup_payload(job_hash)
            record = self.cache.lookup(job_hash) if payload is not None else None
            if record is not None:
                write_atomic(report_path, payload)
                self.emit_artifacts(record, stem)
                logger.info(f"Replayed cached report {report_path}")
                return record

        started = datetime.now()
        try:
            outcome = self.dispatch()
        except Exception as e:
            logger.error(f"Error in {self.config.operation.value} pipeline: {e}")
            raise

        # side files are named relative to the report so a replay elsewhere stays byte-identical
        trace_path = None
        if outcome.trace is not None and outcome.trace.points:
            trace_path = f"{stem.name}-trace.csv"
            outcome.details["trace"] = trace_details(outcome.trace)
        if outcome.spectrum is not None:
            trace_path = f"{stem.name}-spectrum.csv"

        record = ReportRecord(
            job_hash=job_hash,
            operation=self.config.operation,
            group=format_group(self.complex.group if self.complex is not None else self.group),
            input=self.canonical_input(),
            verdict=outcome.verdict,
            values=outcome.values,
            details=outcome.details,
            trace_path=trace_path,
            warnings=outcome.warnings,
            tool_version=__version__,
            seed=self.config.seed,
            nonconverged=outcome.nonconverged,
            created_at=started,
            finished_at=datetime.now(),
        )
        payload = record.model_dump_json(indent=2)
        write_atomic(report_path, payload)
        self.emit_artifacts(record, stem, trace=outcome.trace, spectrum=outcome.spectrum)
        if self.use_cache and self.cache is not None:
            self.cache.store(record, payload)
        logger.info(f"Report written to {report_path} (verdict {record.verdict})")
        return record


def values_csv(record: ReportRecord) -> str:
    lines = ["name,value,error"]
    lines += [f"{name},{v.value!r},{v.error!r}" for name, v in record.values.items()]
    return "\n".join(lines) + "\n"


def format_summary(record: ReportRecord) -> str:
    """Aligned plain-text summary of a report."""
    rows = [
        ("operation", record.operation.value),
        ("group", record.group),
        ("input", record.input.replace("\n", "; ") or "-"),
        ("verdict", record.verdict),
    ]
    for name, v in record.values.items():
        text = f"{v.value:.10g}" if math.isfinite(v.value) else str(v.value)
        if v.error:
            text += f" ± {v.error:.2e}"
        rows.append((name, text))
    if record.trace_path:
        rows.append(("trace", record.trace_path))
    rows.append(("job", record.job_hash[:12]))
    width = max(len(key) for key, _ in rows)
    lines = [f"{key.ljust(width)}  {value}" for key, value in rows]
    lines += [f"warning: {w}" for w in record.warnings]
    return "\n".join(lines)


def run(config: JobConfig, use_cache: bool = True) -> ReportRecord:
    """Run one job with the default cache."""
    return JobRunner(config, use_cache=use_cache).run()
