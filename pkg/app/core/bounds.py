"""Lower bounds on the network-entanglement weight and the trace-distance measures.

Every estimator returns a :class:`BoundReport` whose ``value`` is a valid
lower bound for states of any network whose sources join at most ``k``
parties. ``measure_intervals`` combines them with a see-saw upper bound and
the graph parameters into brackets for E_w, E_c and E_r.
"""

import math
from collections.abc import Sequence
from itertools import combinations
from typing import Literal

import numpy as np
import structlog
from scipy.sparse.linalg import LinearOperator, eigsh

from app.config import settings
from app.core import netgraph
from app.core.exceptions import DimensionError, DomainError, SolverError
from app.core.qstate import (
    apply_row_op,
    as_generator,
    as_tensor,
    embed_operator,
    flip_observable,
    hermitian_eigh,
    ghz_vector,
    parity_observable,
    purity,
    random_unitary,
    trace_except,
)
from app.models.network import Hypergraph
from app.models.quantum import DensityMatrix, DichotomicObservable, Observable
from app.models.schemas import (
    BRACKET_TOL,
    BoundMethod,
    BoundReport,
    Figure3Row,
    IntervalConfig,
    Measure,
)
from app.observability.metrics import BOUND_EVALUATIONS, OPERATION_DURATION
from app.observability.tracing import get_tracer

logger = structlog.get_logger()
tracer = get_tracer(__name__)

SQRT2 = math.sqrt(2.0)
# S_n gap between the quantum maximum on GHZ and the network bound 2k
NONLOCALITY_GAP = 2.0 * SQRT2 - 2.0
# Dense eigensolver up to this many rows of the doubled-copy operator
DENSE_EIGEN_LIMIT = 1024

SnSettings = list[tuple[DichotomicObservable, DichotomicObservable]]

_A, _B = 0, 1


def _equal_local_dim(rho: DensityMatrix) -> int:
    dims = set(rho.local_dims)
    if len(dims) != 1:
        raise DimensionError(f"All local dimensions must be equal, got {rho.local_dims}")
    return dims.pop()


def _check_k(k: int) -> None:
    if k < 2:
        raise DomainError(f"Source size k must be at least 2 (got {k})")


def _settings_payload(sn_settings: SnSettings) -> list[dict[str, object]]:
    return [
        {
            "A": a.to_payload().model_dump(),
            "B": b.to_payload().model_dump(),
        }
        for a, b in sn_settings
    ]


# --- witness -----------------------------------------------------------------

def ghz_overlap(rho: DensityMatrix) -> float:
    """tr(GHZ rho) for the GHZ state matching rho's local dimension."""
    d = _equal_local_dim(rho)
    psi = ghz_vector(d, rho.num_parties)
    return float(np.real(psi.conj() @ rho.data @ psi))


def witness_bound(rho: DensityMatrix, k: int) -> BoundReport:
    """w_k = max{0, (k+1) tr(GHZ rho) - k}, from W_k = k - (k+1) GHZ."""
    _check_k(k)
    overlap = ghz_overlap(rho)
    value = max(0.0, (k + 1) * overlap - k)
    BOUND_EVALUATIONS.labels(method=BoundMethod.WITNESS.value).inc()
    logger.debug("Witness bound", k=k, ghz_overlap=overlap, value=value)
    return BoundReport(
        measure=Measure.E_W,
        method=BoundMethod.WITNESS,
        value=min(value, 1.0),
        k=k,
        params={"ghz_overlap": overlap, "d": rho.local_dims[0], "n": rho.num_parties},
    )


# --- nonlocality -------------------------------------------------------------

def _sn_terms(n: int, k: int) -> list[tuple[float, dict[int, int]]]:
    """Correlators of S_n as (coefficient, {party: A or B})."""
    rest = range(1, n)
    terms = [
        (1.0, {0: _A} | {p: _B for p in rest}),
        (-1.0, {0: _B} | {p: _B for p in rest}),
        (1.0, {0: _A, 1: _A}),
        (1.0, {0: _B, 1: _A}),
    ]
    pair = 4.0 * (k - 1) / ((n - 1) * (n - 2))
    terms.extend((pair, {i: _A, j: _A}) for i, j in combinations(rest, 2))
    return terms


def _chsh_block(d: int, sign: float) -> np.ndarray:
    """(Z + sign*X)/sqrt2 on each level pair; the unpaired level of odd d stays +1."""
    z = parity_observable(d).data
    x = flip_observable(d).data
    m = (z + sign * x) / SQRT2
    if d % 2:
        m[d - 1, d - 1] = 1.0
    return m


def ghz_optimal_settings(dims: Sequence[int]) -> SnSettings:
    """A_1 = (Z+X)/√2, B_1 = (Z-X)/√2, A_i = Z, B_i = X for i > 1.

    These reach 2√2 + 2(k-1) on GHZ states of even local dimension; Z is the
    parity observable and X swaps neighbouring levels.
    """
    out: SnSettings = []
    for party, d in enumerate(dims):
        if party == 0:
            a = DichotomicObservable(local_dims=(d,), data=_chsh_block(d, 1.0))
            b = DichotomicObservable(local_dims=(d,), data=_chsh_block(d, -1.0))
        else:
            a, b = parity_observable(d), flip_observable(d)
        out.append((a, b))
    return out


def _random_dichotomic(d: int, rng: np.random.Generator) -> np.ndarray:
    u = random_unitary(d, rng)
    signs = np.array([(-1.0) ** j for j in range(d)])
    return (u * signs) @ u.conj().T


class SnOptimizer:
    """See-saw ascent of S_n over local dichotomic settings.

    With every other observable fixed, S_n = tr(T X) + const for the updated
    observable X, so X <- sign(T) is the exact block maximizer and the value
    never decreases.
    """

    def __init__(
        self,
        rho: DensityMatrix,
        k: int,
        *,
        tol: float | None = None,
        max_sweeps: int | None = None,
    ) -> None:
        if rho.num_parties < 3:
            raise DomainError(f"S_n needs at least 3 parties (got {rho.num_parties})")
        _check_k(k)
        self.rho = rho
        self.k = k
        self.n = rho.num_parties
        self.tol = settings.sn_tol if tol is None else tol
        self.max_sweeps = settings.sn_max_sweeps if max_sweeps is None else max_sweeps
        self.terms = _sn_terms(self.n, k)
        self._tensor = as_tensor(rho.data, rho.local_dims)
        self.history: list[list[float]] = []

    def _apply(self, ops: dict[int, np.ndarray]) -> np.ndarray:
        t = self._tensor
        for party, op in ops.items():
            t = apply_row_op(t, op, party)
        return t

    def value(self, arrays: list[list[np.ndarray]]) -> float:
        total = 0.0
        side = self.rho.dim
        for coef, choice in self.terms:
            t = self._apply({p: arrays[p][w] for p, w in choice.items()})
            total += coef * float(np.real(np.trace(t.reshape(side, side))))
        return total

    def _update(self, arrays: list[list[np.ndarray]], party: int, which: int) -> None:
        d = self.rho.local_dims[party]
        local = np.zeros((d, d), dtype=complex)
        for coef, choice in self.terms:
            if choice.get(party) != which:
                continue
            ops = {p: arrays[p][w] for p, w in choice.items() if p != party}
            local += coef * trace_except(self._apply(ops), self.n, [party])
        local = (local + local.conj().T) / 2
        vals, vecs = hermitian_eigh(local)
        signs = np.where(vals < -1e-12, -1.0, 1.0)
        arrays[party][which] = (vecs * signs) @ vecs.conj().T

    def ascend(self, arrays: list[list[np.ndarray]]) -> tuple[float, list[float]]:
        """Sweep parties until the gain drops below ``tol``; updates ``arrays`` in place."""
        trace = [self.value(arrays)]
        for _ in range(self.max_sweeps):
            for party in range(self.n):
                for which in (_A, _B):
                    self._update(arrays, party, which)
            trace.append(self.value(arrays))
            if trace[-1] - trace[-2] < self.tol:
                break
        return trace[-1], trace

    def optimize(self, restarts: int, seed: int) -> tuple[float, SnSettings]:
        best_value = -math.inf
        best_arrays: list[list[np.ndarray]] = []
        self.history = []
        for r in range(restarts):
            with tracer.start_as_current_span("sn.restart") as span:
                span.set_attribute("sn.restart", r)
                if r == 0:
                    arrays = [[a.data.copy(), b.data.copy()]
                              for a, b in ghz_optimal_settings(self.rho.local_dims)]
                else:
                    rng = as_generator(seed + r)
                    arrays = [
                        [_random_dichotomic(d, rng), _random_dichotomic(d, rng)]
                        for d in self.rho.local_dims
                    ]
                value, trace = self.ascend(arrays)
            self.history.append(trace)
            logger.debug("S_n restart finished", restart=r, value=value, sweeps=len(trace) - 1)
            # Strict improvement keeps the lowest restart index on ties
            if value > best_value:
                best_value, best_arrays = value, arrays
        found = [
            (
                DichotomicObservable(local_dims=(d,), data=(a + a.conj().T) / 2),
                DichotomicObservable(local_dims=(d,), data=(b + b.conj().T) / 2),
            )
            for d, (a, b) in zip(self.rho.local_dims, best_arrays, strict=True)
        ]
        return best_value, found


def _settings_arrays(rho: DensityMatrix, sn_settings: SnSettings) -> list[list[np.ndarray]]:
    if len(sn_settings) != rho.num_parties:
        raise DimensionError("Need one (A, B) pair per party")
    arrays = []
    for d, pair in zip(rho.local_dims, sn_settings, strict=True):
        for obs in pair:
            if obs.local_dims != (d,):
                raise DimensionError(f"Observable dims {obs.local_dims} != ({d},)")
            if not obs.is_dichotomic():
                raise DomainError("S_n settings must be dichotomic observables")
        arrays.append([pair[0].data, pair[1].data])
    return arrays


def sn_value(rho: DensityMatrix, k: int, sn_settings: SnSettings) -> float:
    """S_n = <(A1-B1)B2..Bn> + <(A1+B1)A2> + 4(k-1)/((n-1)(n-2)) sum_{1<i<j} <AiAj>."""
    optimizer = SnOptimizer(rho, k)
    return optimizer.value(_settings_arrays(rho, sn_settings))


def sn_optimize(
    rho: DensityMatrix, k: int, restarts: int | None = None, seed: int = 0
) -> tuple[float, SnSettings]:
    restarts = settings.sn_restarts if restarts is None else restarts
    with OPERATION_DURATION.labels(operation="sn_optimize").time():
        return SnOptimizer(rho, k).optimize(restarts, seed)


def nonlocality_bound(
    rho: DensityMatrix,
    k: int,
    restarts: int | None = None,
    seed: int = 0,
    optimum: tuple[float, SnSettings] | None = None,
) -> BoundReport:
    """max{0, (S_n - 2k)/(2√2 - 2)} with S_n from the see-saw optimum.

    ``optimum`` is a result of :func:`sn_optimize` for the same state and k,
    reused instead of optimizing again.
    """
    value, found = optimum if optimum is not None else sn_optimize(rho, k, restarts, seed)
    bound = min(1.0, max(0.0, (value - 2 * k) / NONLOCALITY_GAP))
    BOUND_EVALUATIONS.labels(method=BoundMethod.NONLOCALITY.value).inc()
    logger.debug("Nonlocality bound", k=k, s_n=value, value=bound)
    return BoundReport(
        measure=Measure.E_W,
        method=BoundMethod.NONLOCALITY,
        value=bound,
        k=k,
        params={
            "s_n": value,
            "restarts": settings.sn_restarts if restarts is None else restarts,
            "seed": seed,
            "settings": _settings_payload(found),
        },
    )


# --- covariance --------------------------------------------------------------

def _check_measurements(rho: DensityMatrix, measurements: Sequence[Observable]) -> None:
    if len(measurements) != rho.num_parties:
        raise DimensionError(
            f"Need one measurement per party ({rho.num_parties}), got {len(measurements)}"
        )
    for d, m in zip(rho.local_dims, measurements, strict=True):
        if m.local_dims != (d,):
            raise DimensionError(f"Measurement dims {m.local_dims} != ({d},)")
        if not m.is_dichotomic():
            raise DomainError("Covariance measurements must square to the identity")


def default_measurements(rho: DensityMatrix) -> list[DichotomicObservable]:
    """Parity (Pauli Z for qubits) on every party."""
    return [parity_observable(d) for d in rho.local_dims]


def covariance_matrix(rho: DensityMatrix, measurements: Sequence[Observable]) -> np.ndarray:
    """Gamma_ij = <M_i M_j> - <M_i><M_j>, Gamma_ii = 1 - <M_i>^2."""
    _check_measurements(rho, measurements)
    n = rho.num_parties
    t = as_tensor(rho.data, rho.local_dims)
    side = rho.dim
    singles = [apply_row_op(t, m.data, i) for i, m in enumerate(measurements)]
    means = np.array([np.real(np.trace(s.reshape(side, side))) for s in singles])
    gamma = np.diag(1.0 - means**2)
    for i, j in combinations(range(n), 2):
        both = apply_row_op(singles[i], measurements[j].data, j)
        corr = float(np.real(np.trace(both.reshape(side, side))))
        gamma[i, j] = gamma[j, i] = corr - means[i] * means[j]
    return gamma


def _rank(rho: DensityMatrix) -> int:
    return int(np.sum(np.linalg.eigvalsh(rho.data) > settings.rank_tol))


def _beta_from(tau: float, rank: float, form: Literal["min", "main_text"]) -> float:
    tau = min(tau, 1.0)
    smooth = 2.0 * math.sqrt(max(0.0, 1.0 - tau**2))
    if form == "main_text":
        return smooth
    return min(rank * (1.0 - tau), smooth)


def beta(rho: DensityMatrix, form: Literal["min", "main_text"] | None = None) -> float:
    """min{r(1 - tau), 2 sqrt(1 - tau^2)} with tau = tr(rho^2) and r = rank(rho)."""
    return _beta_from(purity(rho), _rank(rho), form or settings.beta_form)


def omega(gamma: np.ndarray, k: int) -> float:
    return float(np.sum(gamma) - k * np.trace(gamma))


def covariance_bound(
    rho: DensityMatrix, k: int, measurements: Sequence[Observable] | None = None
) -> BoundReport:
    """max{0, omega/(n(n-k)) - beta}."""
    _check_k(k)
    n = rho.num_parties
    if n <= k:
        raise DomainError(f"Covariance bound needs n > k (got n={n}, k={k})")
    measurements = list(measurements) if measurements is not None else default_measurements(rho)
    gamma = covariance_matrix(rho, measurements)
    w = omega(gamma, k)
    b = beta(rho)
    value = max(0.0, w / (n * (n - k)) - b)
    BOUND_EVALUATIONS.labels(method=BoundMethod.COVARIANCE.value).inc()
    logger.debug("Covariance bound", k=k, omega=w, beta=b, value=value)
    return BoundReport(
        measure=Measure.E_W,
        method=BoundMethod.COVARIANCE,
        value=min(value, 1.0),
        k=k,
        params={"omega": w, "beta": b, "n": n, "gamma": gamma.tolist()},
    )


def _spectral_radius(apply: LinearOperator | np.ndarray) -> float:
    if isinstance(apply, np.ndarray):
        return float(np.max(np.abs(np.linalg.eigvalsh(apply))))
    vals = eigsh(apply, k=1, which="LM", return_eigenvectors=False)
    return float(np.max(np.abs(vals)))


def measurement_operator_norms(
    rho: DensityMatrix, k: int, measurements: Sequence[Observable]
) -> tuple[float, float]:
    """Largest singular values of (sum M_i)^2 - k sum M_i^2 and its two-copy analogue."""
    _check_measurements(rho, measurements)
    dims = rho.local_dims
    embedded = [embed_operator(m.data, i, dims) for i, m in enumerate(measurements)]
    total = sum(embedded)
    side = rho.dim
    one_copy = total @ total - k * sum(e @ e for e in embedded)
    lam1 = _spectral_radius((one_copy + one_copy.conj().T) / 2)

    if side * side <= DENSE_EIGEN_LIMIT:
        two_copy = np.kron(total, total) - k * sum(np.kron(e, e) for e in embedded)
        lam2 = _spectral_radius((two_copy + two_copy.conj().T) / 2)
    else:
        # (A ⊗ B) vec(V) = vec(A V B^T) for row-major vec
        def matvec(v: np.ndarray) -> np.ndarray:
            block = v.reshape(side, side)
            out = total @ block @ total.T - k * sum(e @ block @ e.T for e in embedded)
            return out.reshape(-1)

        op = LinearOperator((side * side, side * side), matvec=matvec, dtype=complex)
        lam2 = _spectral_radius(op)
    return lam1, lam2


def covariance_tight_bound(
    rho: DensityMatrix, k: int, measurements: Sequence[Observable] | None = None
) -> BoundReport:
    """Ebar_tr >= omega / (6 lambda) - beta / 6 with lambda = (lambda_1 + 2 lambda_2) / 3."""
    _check_k(k)
    measurements = list(measurements) if measurements is not None else default_measurements(rho)
    with OPERATION_DURATION.labels(operation="covariance_tight").time():
        lam1, lam2 = measurement_operator_norms(rho, k, measurements)
    w = omega(covariance_matrix(rho, measurements), k)
    b = beta(rho)
    lam = (lam1 + 2.0 * lam2) / 3.0
    value = max(0.0, w / (6.0 * lam) - b / 6.0) if lam > 0 else 0.0
    BOUND_EVALUATIONS.labels(method=BoundMethod.COVARIANCE_TIGHT.value).inc()
    return BoundReport(
        measure=Measure.EBAR_TR,
        method=BoundMethod.COVARIANCE_TIGHT,
        value=min(value, 1.0),
        k=k,
        params={"omega": w, "beta": b, "lambda_1": lam1, "lambda_2": lam2, "lambda": lam},
    )


# --- trace-distance family ---------------------------------------------------

def tr_measure_bounds(
    rho: DensityMatrix,
    k: int,
    restarts: int | None = None,
    seed: int = 0,
    measurements: Sequence[Observable] | None = None,
    optimum: tuple[float, SnSettings] | None = None,
) -> list[BoundReport]:
    """E_tr (witness), E_tr (nonlocality), Ebar_tr (covariance) and E_bu bounds."""
    n = rho.num_parties
    witness = witness_bound(rho, k)
    e_tr_witness = witness.model_copy(update={"measure": Measure.E_TR})

    s_value, _ = optimum if optimum is not None else sn_optimize(rho, k, restarts, seed)
    algebraic_gap = 4.0 * (k + 1)
    e_tr_nonlocal = BoundReport(
        measure=Measure.E_TR,
        method=BoundMethod.NONLOCALITY,
        value=min(1.0, max(0.0, (s_value - 2 * k) / algebraic_gap)),
        k=k,
        params={"s_n": s_value, "seed": seed},
    )

    best_tr = max((e_tr_witness, e_tr_nonlocal), key=lambda r: r.value)

    measurements = list(measurements) if measurements is not None else default_measurements(rho)
    w = omega(covariance_matrix(rho, measurements), k)
    b = beta(rho)
    raw = w / (6.0 * n * (n + k - 2)) - b / 6.0
    ebar = BoundReport(
        measure=Measure.EBAR_TR,
        method=BoundMethod.COVARIANCE,
        value=min(1.0, max(0.0, raw, best_tr.value)),
        k=k,
        params={"omega": w, "beta": b, "raw": raw, "inherited_from": best_tr.method.value},
    )

    e_bu = BoundReport(
        measure=Measure.E_BU,
        method=best_tr.method,
        value=best_tr.value**2 / 2.0,
        k=k,
        params={"e_tr_lower": best_tr.value},
    )
    return [e_tr_witness, e_tr_nonlocal, ebar, e_bu]


# --- intervals ---------------------------------------------------------------

LOWER_BOUND_METHODS = frozenset(
    {
        BoundMethod.WITNESS,
        BoundMethod.NONLOCALITY,
        BoundMethod.COVARIANCE,
        BoundMethod.COVARIANCE_TIGHT,
    }
)


def lower_bounds(
    rho: DensityMatrix,
    k: int,
    methods: Sequence[BoundMethod],
    restarts: int | None = None,
    seed: int = 0,
    measurements: Sequence[Observable] | None = None,
    optimum: tuple[float, SnSettings] | None = None,
) -> list[BoundReport]:
    """Run every requested lower-bound estimator that applies to ``rho``.

    Methods that are not lower bounds (see-saw, interval) are ignored.
    """
    n = rho.num_parties
    equal_dims = len(set(rho.local_dims)) == 1
    reports: list[BoundReport] = []
    for method in methods:
        if method not in LOWER_BOUND_METHODS:
            continue
        if method == BoundMethod.WITNESS and equal_dims:
            reports.append(witness_bound(rho, k))
        elif method == BoundMethod.NONLOCALITY and n >= 3:
            reports.append(nonlocality_bound(rho, k, restarts, seed, optimum))
        elif method == BoundMethod.COVARIANCE and n > k:
            reports.append(covariance_bound(rho, k, measurements))
        elif method == BoundMethod.COVARIANCE_TIGHT and n > k:
            reports.append(covariance_tight_bound(rho, k, measurements))
        else:
            logger.info("Estimator not applicable, skipped", method=method.value, n=n, k=k)
    return reports


def measure_intervals(
    rho: DensityMatrix,
    g: Hypergraph,
    cfg: IntervalConfig | None = None,
    lower: list[BoundReport] | None = None,
) -> list[BoundReport]:
    """E_w <= E_c <= r_c(G) E_w and E_w <= E_r <= d_c(G) E_w applied to an E_w bracket.

    ``lower`` holds estimator reports already computed for ``rho`` at
    k = max edge size; only its E_w reports enter the bracket.
    """
    from app.core.seesaw import seesaw_run

    cfg = cfg or IntervalConfig()
    netgraph.require_connected(g)
    if rho.num_parties != g.n:
        raise DimensionError(f"State has {rho.num_parties} parties, network has {g.n} nodes")
    k = g.max_edge_size
    radius, _ = netgraph.edge_radius(g)
    domination, _ = netgraph.connected_domination_number(g)

    if k >= g.n:
        # A source shared by all parties prepares any state
        lower = []
        hi = 0.0
        upper_method = "full_hyperedge"
    else:
        if lower is None:
            lower = lower_bounds(
                rho, k, cfg.methods, cfg.restarts, cfg.seed, cfg.measurements
            )
        lower = [r for r in lower if r.measure == Measure.E_W]
        if cfg.seesaw is not None:
            hi = seesaw_run(rho, g, cfg.seesaw).upper or 0.0
            upper_method = BoundMethod.SEESAW.value
        else:
            hi = 1.0
            upper_method = "trivial"

    best = max(lower, key=lambda r: r.value, default=None)
    lo = best.value if best is not None else 0.0
    if lo > hi + BRACKET_TOL:
        raise SolverError(f"Lower bound {lo} exceeds upper bound {hi}")
    hi = max(hi, lo)
    common = {
        "lower_method": best.method.value if best is not None else None,
        "upper_method": upper_method,
    }
    reports = [
        BoundReport(
            measure=Measure.E_W, method=BoundMethod.INTERVAL, value=lo, upper=hi, k=k,
            params=common | {"lower_bounds": [r.model_dump(exclude={"params"}) for r in lower]},
        ),
        BoundReport(
            measure=Measure.E_C, method=BoundMethod.INTERVAL, value=lo, upper=radius * hi, k=k,
            params=common | {"factor": radius, "factor_name": "edge_radius"},
        ),
        BoundReport(
            measure=Measure.E_R, method=BoundMethod.INTERVAL, value=lo,
            upper=domination * hi, k=k,
            params=common | {"factor": domination, "factor_name": "connected_domination"},
        ),
    ]
    logger.info("Measure intervals", k=k, e_w=[lo, hi], edge_radius=radius,
                connected_domination=domination)
    return reports


# --- noisy GHZ family in closed form -----------------------------------------

def _ghz_family_sn(d: int | None, n: int, k: int) -> tuple[float, float]:
    """S_n of GHZ and of the maximally mixed state under the GHZ-tailored settings."""
    if d is None:
        return 2.0 * SQRT2 + 2.0 * (k - 1), 0.0
    singles = ghz_optimal_settings([d] * n)
    on_ghz = on_mixed = 0.0
    for coef, choice in _sn_terms(n, k):
        ops = [singles[p][choice[p]].data if p in choice else np.eye(d) for p in range(n)]
        # <i..i| ⊗ O_p |j..j> = prod_p O_p[i, j]
        product = np.ones((d, d), dtype=complex)
        for op in ops:
            product = product * op
        on_ghz += coef * float(np.real(product.sum())) / d
        on_mixed += coef * float(np.prod([np.real(np.trace(op)) / d for op in ops]))
    return on_ghz, on_mixed


def noisy_ghz_curves(
    d: int | None, k: int, n: int, grid: Sequence[float]
) -> list[Figure3Row]:
    """Witness, nonlocality and covariance bounds along p GHZ + (1-p) 1/d^n.

    ``d=None`` is the d -> infinity limit: exact for the witness; the other two
    curves drop the 1/d^n terms of the qubit-block constructions.
    """
    _check_k(k)
    if n <= k:
        raise DomainError(f"The curves need n > k (got n={n}, k={k})")
    if d is not None and d < 2:
        raise DomainError(f"Local dimension must be at least 2 (got {d})")
    s_ghz, s_mixed = _ghz_family_sn(d, n, k)
    # <parity> is the same on GHZ and on the maximally mixed state
    mu = 0.0 if d is None or d % 2 == 0 else 1.0 / d
    mixed_weight = 0.0 if d is None else float(d) ** (-n)
    rows = []
    for p in grid:
        if not 0.0 <= p <= 1.0:
            raise DomainError(f"Visibility p must lie in [0, 1] (got {p})")
        witness = max(0.0, (k + 1) * (p + (1 - p) * mixed_weight) - k)
        s_value = p * s_ghz + (1 - p) * s_mixed
        nonlocality = max(0.0, (s_value - 2 * k) / NONLOCALITY_GAP)
        w = (1 - mu**2) * (n + n * (n - 1) * p - k * n)
        tau = p**2 + (1 - p**2) * mixed_weight
        rank = math.inf if d is None else (1 if p >= 1.0 else d**n)
        b = 0.0 if p >= 1.0 else _beta_from(tau, rank, settings.beta_form)
        covariance = max(0.0, w / (n * (n - k)) - b)
        rows.append(
            Figure3Row(
                p=p,
                witness=min(1.0, witness),
                nonlocality=min(1.0, nonlocality),
                covariance=min(1.0, covariance),
            )
        )
    return rows


def p_grid(start: float, stop: float, step: float) -> list[float]:
    """Inclusive grid rounded to suppress accumulation error."""
    if step <= 0:
        raise DomainError("Grid step must be positive")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(count)]

