"""Application configuration using pydantic-settings."""

from collections.abc import Iterator
from contextlib import contextmanager
from typing import Literal

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Tolerances, limits and solver defaults loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="NETENT_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        validate_assignment=True,
    )

    # App
    environment: str = "development"
    log_level: str = "INFO"

    # Matrix invariants
    hermitian_tol: float = 1e-9
    trace_tol: float = 1e-9
    psd_floor: float = -1e-8
    eigen_residual_tol: float = 1e-8
    dichotomic_tol: float = 1e-8
    kraus_tol: float = 1e-8
    rank_tol: float = 1e-8
    purity_tol: float = 1e-9
    npt_tol: float = 1e-9
    symmetry_tol: float = 1e-8

    # Size limits
    max_total_dim: int = 256
    max_domination_nodes: int = 16

    # Cutting-plane LMI solver
    lmi_psd_tol: float = 1e-7
    lmi_max_cuts: int = 5000
    lp_pivot_tol: float = 1e-10
    cut_idle_limit: int = 50
    cuts_per_round: int = 8
    certificate_tol: float = 1e-10

    # Lower-bound estimators
    sn_restarts: int = 20
    sn_tol: float = 1e-9
    sn_max_sweeps: int = 500
    beta_form: Literal["min", "main_text"] = "min"

    # See-saw upper bound
    seesaw_restarts: int = 3
    seesaw_sweeps: int = 10
    seesaw_pool_size: int = 10
    seesaw_ansatz_size: int = 1
    seesaw_max_cuts: int = 800

    # Observability
    otel_service_name: str = "NetEnt"
    otel_exporter_endpoint: str = ""

    def override(self, assignments: dict[str, str]) -> None:
        """Apply ``KEY=VALUE`` overrides from the command line (validated)."""
        for key, value in assignments.items():
            if key not in type(self).model_fields:
                raise KeyError(f"Unknown setting: {key}")
            setattr(self, key, value)

    @contextmanager
    def overridden(self, assignments: dict[str, str]) -> Iterator[None]:
        """Apply overrides for the duration of one run."""
        saved = {key: getattr(self, key) for key in assignments if key in type(self).model_fields}
        try:
            self.override(assignments)
            yield
        finally:
            for key, value in saved.items():
                setattr(self, key, value)


settings = Settings()
