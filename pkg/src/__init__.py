"""fkdet: Fuglede–Kadison determinants of group-ring operators.

Følner finite-section estimates of determinants, Mahler measures, entropies
of principal algebraic actions and L2-torsions, checked against exact oracles.
"""

__version__ = "0.1.0"

from .config import settings
from .models import (
    ApproximationTrace,
    EntropyResult,
    JobConfig,
    ReportRecord,
    TorsionReport,
    Verdict,
)

__all__ = [
    "ApproximationTrace",
    "EntropyResult",
    "JobConfig",
    "ReportRecord",
    "TorsionReport",
    "Verdict",
    "settings",
]
