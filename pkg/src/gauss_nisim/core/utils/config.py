import os
from typing import Optional

from dotenv import find_dotenv, load_dotenv
from pydantic import BaseModel, Field


class Settings(BaseModel):
    ENV: str = Field(default="dev")
    LOG_LEVEL: str = Field(default="INFO")

    THREADS: Optional[int] = Field(default=None, description="Worker threads for batch estimators")
    DEFAULT_SEED: int = Field(default=20240101)
    MC_SAMPLES: int = Field(default=100_000, description="Default Monte Carlo sample count")
    BATCHES: int = Field(default=100, description="Batch-means batches per estimate")
    INNER_SAMPLES: int = Field(default=256, description="Inner samples of black-box noise operators")

    REPORT_MULTIPLIER: float = Field(default=3.0, description="Constant c of O(k*delta) acceptance and SE multiplier")
    BERNSTEIN_DEGREE_CAP: int = Field(default=1_000_000, description="Max grid values of one factored evaluation")
    QUADRATURE_NODES: Optional[int] = Field(default=None, description="Gauss-Hermite nodes per axis (default 2d+4)")
    DECISION_TOLERANCE: float = Field(default=1e-6)

    def resolved_threads(self, override: Optional[int] = None) -> int:
        """Resolve worker count: explicit value, then env, then available parallelism."""
        return override or self.THREADS or (os.cpu_count() or 1)


def _get_env(name: str, default: str) -> str:
    value = os.getenv(name)
    if value is None or value == "":
        return default
    return value


def _optional_int(raw: str) -> Optional[int]:
    return int(raw) if raw else None


def _load_settings() -> Settings:
    load_dotenv(find_dotenv(), override=False)
    default_env = "test" if os.getenv("PYTEST_CURRENT_TEST") else "dev"
    return Settings(
        ENV=_get_env("NISIM_ENV", default_env),
        LOG_LEVEL=_get_env("NISIM_LOG_LEVEL", "INFO"),
        THREADS=_optional_int(_get_env("GAUSS_NISIM_THREADS", "")),
        DEFAULT_SEED=int(_get_env("NISIM_SEED", "20240101")),
        MC_SAMPLES=int(_get_env("NISIM_MC_SAMPLES", "100000")),
        BATCHES=int(_get_env("NISIM_BATCHES", "100")),
        INNER_SAMPLES=int(_get_env("NISIM_INNER_SAMPLES", "256")),
        REPORT_MULTIPLIER=float(_get_env("NISIM_REPORT_MULTIPLIER", "3.0")),
        BERNSTEIN_DEGREE_CAP=int(_get_env("NISIM_BERNSTEIN_DEGREE_CAP", "1000000")),
        QUADRATURE_NODES=_optional_int(_get_env("NISIM_QUADRATURE_NODES", "")),
        DECISION_TOLERANCE=float(_get_env("NISIM_DECISION_TOLERANCE", "1e-6")),
    )


settings = _load_settings()
