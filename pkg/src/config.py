"""Configuration management using environment variables."""

import os
from pathlib import Path

from dotenv import load_dotenv

# Load .env file if it exists
load_dotenv()


class Settings:
    """Application settings loaded from environment variables."""

    def __init__(self):
        # Logging Configuration
        self.log_level = os.getenv("FKDET_LOG_LEVEL", "INFO")
        self.log_dir = os.getenv("FKDET_LOG_DIR", str(Path(__file__).parent / "logs"))

        # Cache Configuration
        self.cache_dir = os.getenv("FKDET_CACHE_DIR", ".fkdet_cache")

        # Estimator Configuration
        self.tol = float(os.getenv("FKDET_TOL", 5e-3))
        self.max_section_order = int(os.getenv("FKDET_MAX_SECTION_ORDER", 8192))
        self.workers = int(os.getenv("FKDET_WORKERS", 4))

        # Numerical kernel: keps = size * ||H|| * 2**-exponent
        self.kernel_eps_exponent = int(os.getenv("FKDET_KERNEL_EPS_EXPONENT", 45))
        self.kernel_fraction_floor = float(os.getenv("FKDET_KERNEL_FRACTION_FLOOR", 1e-3))
        self.singular_symbol_ratio = float(os.getenv("FKDET_SINGULAR_SYMBOL_RATIO", 1e-3))

        # Quadrature Configuration
        self.quadrature_tol = float(os.getenv("FKDET_QUADRATURE_TOL", 1e-9))

    @property
    def kernel_eps_scale(self) -> float:
        return 2.0 ** -self.kernel_eps_exponent


# Load settings
settings = Settings()
