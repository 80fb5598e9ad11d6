"""Pydantic models for reports, plans, certificates and run configuration."""

from enum import StrEnum
from pathlib import Path
from typing import Any, Literal, Self

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.config import settings
from app.models.network import Hypergraph
from app.models.quantum import MatrixPayload, Observable

# Slack allowed between a lower bound and an upper bound before they are inconsistent
BRACKET_TOL = 1e-7


class Measure(StrEnum):
    """Network-entanglement quantifiers."""
    E_W = "E_w"
    E_TR = "E_tr"
    EBAR_TR = "Ebar_tr"
    E_BU = "E_bu"
    E_C = "E_c"
    E_R = "E_r"


class BoundMethod(StrEnum):
    WITNESS = "witness"
    NONLOCALITY = "nonlocality"
    COVARIANCE = "covariance"
    COVARIANCE_TIGHT = "covariance_tight"
    SEESAW = "seesaw"
    INTERVAL = "interval"


class BoundReport(BaseModel):
    """Estimator output: ``value`` is a lower bound, ``upper`` an optional upper bound."""
    measure: Measure
    method: BoundMethod
    value: float = Field(ge=0.0)
    upper: float | None = None
    k: int
    params: dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def bracket_ordered(self) -> Self:
        if self.upper is not None and self.value > self.upper + BRACKET_TOL:
            raise ValueError(f"Lower bound {self.value} exceeds upper bound {self.upper}")
        return self

    @property
    def is_interval(self) -> bool:
        return self.upper is not None


class GraphParams(BaseModel):
    """Graph parameters with witnesses; ``None`` encodes an infinite value."""
    n: int
    edges: list[list[int]]
    edge_radius: int | None
    central_edge: list[int] | None
    connected_domination: int | None
    dominating_set: list[int]
    diameter: int | None
    is_tree: bool
    distance_matrix: list[list[int]]  # -1 for unreachable pairs


class TeleportAction(BaseModel):
    """Forward the particle of party ``payload`` from ``sender`` to ``receiver``."""
    sender: int
    receiver: int
    payload: int


class PlanMode(StrEnum):
    STEPS = "steps"
    ROUNDS = "rounds"


class PreparationPlan(BaseModel):
    """Particle-routing schedule for preparing a state by LOCC plus teleportation."""
    mode: PlanMode
    anchor: list[int]
    initial_holdings: dict[int, list[int]]
    schedule: list[list[TeleportAction]]
    cost: int = Field(ge=0)

    @model_validator(mode="after")
    def cost_matches_schedule(self) -> Self:
        if self.cost != len(self.schedule):
            raise ValueError(f"Plan cost {self.cost} != phase count {len(self.schedule)}")
        return self


class HypothesisStatus(StrEnum):
    CERTIFIED = "certified"
    NOT_CERTIFIED = "not_certified"
    INCONCLUSIVE = "inconclusive"


class ExactnessClaim(BaseModel):
    measure: Measure
    value: float | None  # exact value when certified
    hypothesis_status: HypothesisStatus
    evidence: dict[str, Any] = Field(default_factory=dict)
    note: str = ""


class ExactnessReport(BaseModel):
    claims: list[ExactnessClaim] = Field(default_factory=list)

    def claim(self, measure: Measure) -> ExactnessClaim | None:
        return next((c for c in self.claims if c.measure == measure), None)


class SeesawConfig(BaseModel):
    """Parameters of a see-saw upper-bound run."""
    model_config = ConfigDict(extra="forbid")

    restarts: int = Field(default_factory=lambda: settings.seesaw_restarts, ge=1)
    sweeps: int = Field(default_factory=lambda: settings.seesaw_sweeps, ge=0)
    seed: int = 0
    ansatz_size: int = Field(default_factory=lambda: settings.seesaw_ansatz_size, ge=1)
    pool_size: int = Field(default_factory=lambda: settings.seesaw_pool_size, ge=0)
    include_maximally_mixed: bool = True
    source_dims: list[list[int]] | None = None


class IntervalConfig(BaseModel):
    """Which estimators feed the E_w bracket of ``measure_intervals``."""
    model_config = ConfigDict(extra="forbid")

    methods: list[BoundMethod] = Field(
        default_factory=lambda: [
            BoundMethod.WITNESS, BoundMethod.NONLOCALITY, BoundMethod.COVARIANCE
        ]
    )
    restarts: int = Field(default_factory=lambda: settings.sn_restarts, ge=1)
    seed: int = 0
    measurements: list[Observable] | None = None  # None: parity on every party
    seesaw: SeesawConfig | None = None  # None: trivial upper bound E_w <= 1


class SeesawCertificate(BaseModel):
    """Replayable witness of a see-saw upper bound.

    The mixture sum_l p_l (⊗ C_v^l)(⊗ rho_e^l) is a network state and
    ``rho - mixture`` has minimum eigenvalue ``min_eigenvalue``; the bound is
    ``1 - sum(weights)``.
    """
    graph: Hypergraph
    target_dims: list[int]
    source_dims: list[list[int]]
    weights: list[float]
    sources: list[list[MatrixPayload]]
    channels: list[list[dict[str, Any]]]
    min_eigenvalue: float
    upper_bound: float = Field(ge=0.0, le=1.0)
    seed_chain: list[int] = Field(default_factory=list)


class Figure3Row(BaseModel):
    """One CSV row of the noisy-GHZ lower-bound curves."""
    p: float
    witness: float
    nonlocality: float
    covariance: float


FIGURE3_COLUMNS = ("p", "witness", "nonlocality", "covariance")


class DemoReport(BaseModel):
    """Outcome of a state-level preparation demo."""
    network: str
    fidelity: float
    rounds_used: int
    connected_domination: int
    edge_radius: int
    target_dims: list[int]


class RunConfig(BaseModel):
    """Validated command-line flags."""
    model_config = ConfigDict(extra="forbid")

    command: Literal["graph", "bounds", "figure3", "seesaw", "plan", "demo-c4", "demo-c5"]
    state: Path | None = None
    graph: Path | None = None
    measurements: Path | None = None
    verify: Path | None = None
    k: int | None = Field(default=None, ge=2)
    d: int | None = Field(default=None, ge=2)  # None stands for the d -> infinity limit
    n: int | None = Field(default=None, ge=2)
    p_grid: list[float] = Field(default_factory=list)
    methods: list[BoundMethod] = Field(default_factory=list)
    mode: PlanMode = PlanMode.STEPS
    restarts: int | None = Field(default=None, ge=1)
    sweeps: int | None = Field(default=None, ge=0)
    seed: int = 0
    output_format: Literal["json", "csv", "svg"] = "json"
    out: Path | None = None
    source_dims: list[list[int]] | None = None
    tol: dict[str, str] = Field(default_factory=dict)

    @field_validator("p_grid")
    @classmethod
    def grid_in_unit_interval(cls, v: list[float]) -> list[float]:
        if any(not 0.0 <= p <= 1.0 for p in v):
            raise ValueError("Visibilities must lie in [0, 1]")
        return v
