"""Linear objectives under affine PSD constraints, solved by spectral cutting planes.

The LP core is a revised simplex on the dual of the cut LP

    max c·y  s.t.  A y <= b,  y >= 0        (y = x - lower)

namely ``min b·z  s.t.  A^T z - s = c,  z, s >= 0``. The dual has one equality
row per variable, so its basis size never changes when cuts are added and a
basis stays feasible across cut rounds. The primal optimum is read off as the
simplex multipliers.
"""

import math
from enum import StrEnum
from typing import Any, Self

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.config import settings
from app.core.exceptions import DimensionError, SolverError
from app.core.qstate import hermitian_eigh
from app.observability.metrics import LMI_CUTS, LMI_SOLVES, OPERATION_DURATION
from app.observability.tracing import get_tracer

logger = structlog.get_logger()
tracer = get_tracer(__name__)

MAX_PIVOTS = 100_000


class LmiStatus(StrEnum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    ITERATION_LIMIT = "iteration_limit"


class PsdConstraint(BaseModel):
    """Affine Hermitian map x -> f0 + sum_i x_i coeffs[i], required to be PSD."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    f0: np.ndarray
    coeffs: np.ndarray  # shape (num_vars, N, N)

    @field_validator("f0", "coeffs", mode="before")
    @classmethod
    def as_complex(cls, v: Any) -> np.ndarray:
        return np.asarray(v, dtype=complex)

    @model_validator(mode="after")
    def check_hermitian(self) -> Self:
        side = self.f0.shape[0]
        if self.f0.shape != (side, side) or self.coeffs.shape[1:] != (side, side):
            raise ValueError("Constraint matrices must be square and of equal size")
        stacked = np.concatenate([self.f0[None], self.coeffs])
        if np.max(np.abs(stacked - stacked.conj().transpose(0, 2, 1))) > settings.hermitian_tol:
            raise ValueError("Constraint matrices must be Hermitian")
        return self

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return self.f0 + np.tensordot(x, self.coeffs, axes=1)


class LinearMatrixProgram(BaseModel):
    """maximize c·x subject to lower <= x <= upper and every PSD constraint."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    objective: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    constraints: tuple[PsdConstraint, ...]

    @field_validator("objective", "lower", "upper", mode="before")
    @classmethod
    def as_real(cls, v: Any) -> np.ndarray:
        return np.asarray(v, dtype=float)

    @model_validator(mode="after")
    def check_shapes(self) -> Self:
        m = self.objective.shape[0]
        if self.lower.shape != (m,) or self.upper.shape != (m,):
            raise ValueError("Box bounds must have one entry per variable")
        if not (np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper))):
            raise ValueError("Box bounds must be finite")
        if np.any(self.lower > self.upper):
            raise ValueError("Box lower bound exceeds upper bound")
        for c in self.constraints:
            if c.coeffs.shape[0] != m:
                raise ValueError("Every constraint needs one coefficient matrix per variable")
        return self

    @property
    def num_vars(self) -> int:
        return int(self.objective.shape[0])


class LmiSolution(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    x: np.ndarray
    objective_value: float
    status: LmiStatus
    max_psd_violation: float
    cuts: int = 0
    rounds: int = 0
    trace: list[dict[str, float]] = Field(default_factory=list)


class HermitianParametrization:
    """Real coordinates of an N x N Hermitian matrix.

    Order: the N diagonal entries, then for each i < j the real and the
    imaginary part of entry (i, j). Box bounds follow from |X_ij| <= 1 for
    PSD matrices of trace at most one.
    """

    def __init__(self, dim: int) -> None:
        self.dim = dim
        basis = []
        for i in range(dim):
            e = np.zeros((dim, dim), dtype=complex)
            e[i, i] = 1.0
            basis.append(e)
        for i in range(dim):
            for j in range(i + 1, dim):
                re = np.zeros((dim, dim), dtype=complex)
                re[i, j] = re[j, i] = 1.0
                im = np.zeros((dim, dim), dtype=complex)
                im[i, j], im[j, i] = 1j, -1j
                basis.extend([re, im])
        self.basis = np.array(basis)

    @property
    def num_vars(self) -> int:
        return self.dim * self.dim

    def box(self) -> tuple[np.ndarray, np.ndarray]:
        lower = -np.ones(self.num_vars)
        lower[: self.dim] = 0.0
        return lower, np.ones(self.num_vars)

    def to_matrix(self, x: np.ndarray) -> np.ndarray:
        return np.tensordot(x, self.basis, axes=1)

    def from_matrix(self, m: np.ndarray) -> np.ndarray:
        coords = list(np.real(np.diag(m)))
        for i in range(self.dim):
            for j in range(i + 1, self.dim):
                coords.extend([m[i, j].real, m[i, j].imag])
        return np.array(coords)

    def trace_row(self) -> np.ndarray:
        return np.concatenate([np.ones(self.dim), np.zeros(self.num_vars - self.dim)])


class DualSimplex:
    """Warm-startable revised simplex for max c·y s.t. A y <= b, 0 <= y.

    Rows of A enter as dual columns. Columns are kept in insertion order,
    which is the order Bland's rule uses for the entering choice.
    """

    def __init__(self, objective: np.ndarray, upper: np.ndarray, pivot_tol: float) -> None:
        self.c = np.asarray(objective, dtype=float)
        self.m = self.c.shape[0]
        self.tol = pivot_tol
        self._cols: dict[int, np.ndarray] = {}
        self._costs: dict[int, float] = {}
        self._next_id = 0
        self.idle: dict[int, int] = {}
        for j in range(self.m):
            self._add_column(-np.eye(self.m)[j], 0.0)
        self.box_ids = [self._add_column(np.eye(self.m)[j], float(upper[j])) for j in range(self.m)]
        # Feasible start: z_j = c_j on the box row when c_j > 0, else surplus s_j = -c_j
        self.basis = [self.box_ids[j] if self.c[j] > 0 else j for j in range(self.m)]
        self.pivots = 0

    def _add_column(self, column: np.ndarray, cost: float) -> int:
        cid = self._next_id
        self._next_id += 1
        self._cols[cid] = column
        self._costs[cid] = cost
        return cid

    def add_row(self, a: np.ndarray, b: float) -> int:
        cid = self._add_column(np.asarray(a, dtype=float), float(b))
        self.idle[cid] = 0
        return cid

    @property
    def num_cuts(self) -> int:
        return len(self.idle)

    def solve(self) -> tuple[LmiStatus, np.ndarray | None]:
        ids = list(self._cols)
        columns = np.array([self._cols[i] for i in ids])
        costs = np.array([self._costs[i] for i in ids])
        position = {cid: k for k, cid in enumerate(ids)}
        for _ in range(MAX_PIVOTS):
            basis_pos = [position[cid] for cid in self.basis]
            b_mat = columns[basis_pos].T
            x_b = np.linalg.solve(b_mat, self.c)
            pi = np.linalg.solve(b_mat.T, costs[basis_pos])
            reduced = costs - columns @ pi
            reduced[basis_pos] = 0.0
            candidates = np.flatnonzero(reduced < -self.tol)
            if candidates.size == 0:
                self._update_idle(x_b)
                return LmiStatus.OPTIMAL, pi
            entering = int(candidates[0])
            direction = np.linalg.solve(b_mat, columns[entering])
            rows = np.flatnonzero(direction > self.tol)
            if rows.size == 0:
                # Dual unbounded: the cut LP has no feasible point
                return LmiStatus.INFEASIBLE, None
            ratios = np.clip(x_b[rows], 0.0, None) / direction[rows]
            best = ratios.min()
            tied = rows[ratios <= best + self.tol]
            leaving = min(tied, key=lambda r: self.basis[r])
            self.basis[leaving] = ids[entering]
            self.pivots += 1
        raise SolverError(f"Simplex exceeded {MAX_PIVOTS} pivots")

    def _update_idle(self, x_b: np.ndarray) -> None:
        binding = {cid for cid, value in zip(self.basis, x_b, strict=True) if value > self.tol}
        for cid in self.idle:
            self.idle[cid] = 0 if cid in binding else self.idle[cid] + 1

    def prune(self, idle_limit: int) -> int:
        """Drop nonbasic cuts idle for ``idle_limit`` consecutive solves."""
        basic = set(self.basis)
        stale = [cid for cid, age in self.idle.items() if age >= idle_limit and cid not in basic]
        for cid in stale:
            del self._cols[cid], self._costs[cid], self.idle[cid]
        return len(stale)


def lp_solve(
    rows: list[tuple[np.ndarray, float]],
    lower: np.ndarray,
    upper: np.ndarray,
    objective: np.ndarray,
) -> np.ndarray | None:
    """Maximize objective·x over the box cut by rows a·x <= b; ``None`` when infeasible."""
    lower = np.asarray(lower, dtype=float)
    simplex = DualSimplex(objective, np.asarray(upper, dtype=float) - lower, settings.lp_pivot_tol)
    for a, b in rows:
        a = np.asarray(a, dtype=float)
        simplex.add_row(a, b - float(a @ lower))
    status, y = simplex.solve()
    if status == LmiStatus.INFEASIBLE or y is None:
        return None
    return lower + np.clip(y, 0.0, upper - lower)


def _spectral_cuts(
    prog: LinearMatrixProgram, x: np.ndarray, psd_tol: float, per_round: int
) -> tuple[float, list[tuple[np.ndarray, float]]]:
    """Minimum eigenvalue over all constraints and cuts a·x <= b for the violated ones."""
    worst = math.inf
    cuts: list[tuple[np.ndarray, float]] = []
    for constraint in prog.constraints:
        vals, vecs = hermitian_eigh(constraint.evaluate(x))
        worst = min(worst, float(vals[0]))
        for idx in np.flatnonzero(vals < -psd_tol)[:per_round]:
            v = vecs[:, idx]
            gradient = np.real(np.einsum("i,kij,j->k", v.conj(), constraint.coeffs, v))
            offset = float(np.real(v.conj() @ constraint.f0 @ v))
            # v^dag F(x) v >= 0  <=>  -gradient·x <= offset
            cuts.append((-gradient, offset))
    return worst, cuts


def solve(
    prog: LinearMatrixProgram,
    psd_tol: float | None = None,
    max_cuts: int | None = None,
    *,
    verbose: bool = False,
) -> LmiSolution:
    """Cutting-plane solve; on ``optimal`` the objective is an upper bound on the SDP optimum."""
    psd_tol = settings.lmi_psd_tol if psd_tol is None else psd_tol
    max_cuts = settings.lmi_max_cuts if max_cuts is None else max_cuts
    lower, upper = prog.lower, prog.upper
    simplex = DualSimplex(prog.objective, upper - lower, settings.lp_pivot_tol)
    trace: list[dict[str, float]] = []
    added = rounds = 0

    with (
        tracer.start_as_current_span("lmi.solve") as span,
        OPERATION_DURATION.labels(operation="lmi_solve").time(),
    ):
        span.set_attribute("lmi.num_vars", prog.num_vars)
        while True:
            rounds += 1
            status, y = simplex.solve()
            if status == LmiStatus.INFEASIBLE or y is None:
                solution = LmiSolution(
                    x=lower.copy(), objective_value=-math.inf, status=LmiStatus.INFEASIBLE,
                    max_psd_violation=math.inf, cuts=added, rounds=rounds, trace=trace,
                )
                break
            x = lower + np.clip(y, 0.0, upper - lower)
            objective = float(prog.objective @ x)
            worst, cuts = _spectral_cuts(prog, x, psd_tol, settings.cuts_per_round)
            if verbose:
                trace.append(
                    {"round": rounds, "objective": objective, "min_eigenvalue": worst,
                     "cuts": simplex.num_cuts}
                )
            logger.debug("Cut round", round=rounds, objective=objective, min_eigenvalue=worst)
            if not cuts or added >= max_cuts:
                status = LmiStatus.OPTIMAL if not cuts else LmiStatus.ITERATION_LIMIT
                solution = LmiSolution(
                    x=x, objective_value=objective, status=status,
                    max_psd_violation=max(0.0, -worst), cuts=added, rounds=rounds, trace=trace,
                )
                break
            batch = cuts[: max_cuts - added]
            for a, b in batch:
                shifted = b - float(a @ lower)
                scale = float(np.linalg.norm(a))
                scale = scale if scale > 1e-12 else max(abs(shifted), 1.0)
                simplex.add_row(a / scale, shifted / scale)
                added += 1
            LMI_CUTS.inc(len(batch))
            simplex.prune(settings.cut_idle_limit)
        span.set_attribute("lmi.status", solution.status.value)

    LMI_SOLVES.labels(status=solution.status.value).inc()
    logger.debug(
        "LMI solved",
        status=solution.status.value,
        objective=solution.objective_value,
        cuts=added,
        pivots=simplex.pivots,
    )
    return solution


def build_program(
    objective: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    constraints: list[tuple[np.ndarray, np.ndarray]],
) -> LinearMatrixProgram:
    """Convenience constructor from (f0, coeffs) pairs."""
    m = np.asarray(objective).shape[0]
    for _, coeffs in constraints:
        if np.asarray(coeffs).shape[0] != m:
            raise DimensionError("Coefficient stack does not match the number of variables")
    return LinearMatrixProgram(
        objective=objective,
        lower=lower,
        upper=upper,
        constraints=tuple(PsdConstraint(f0=f0, coeffs=coeffs) for f0, coeffs in constraints),
    )
