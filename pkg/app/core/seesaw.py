"""Upper bounds on the network-entanglement weight from explicit network states.

A candidate ``sigma = sum_l p_l (⊗_v C_v^l)(⊗_e rho_e^l)`` with ``rho - sigma``
positive semidefinite shows ``E_w(rho) <= 1 - sum_l p_l``. Two refinements are
used: a mixture solve over a pool of random network states, and see-saw
sweeps that re-optimize one source at a time as a linear matrix program.
Every reported bound is certified by rescaling the candidate until
``rho - sigma`` passes a fresh eigenvalue check.
"""

import math
from functools import reduce
from typing import NamedTuple

import numpy as np
import structlog
from pydantic import ValidationError

from app.config import settings
from app.core import lmi, netgraph
from app.core.exceptions import DimensionError, DomainError, SolverError
from app.core.qstate import (
    apply_channel,
    apply_kraus_data,
    as_generator,
    compose_channels,
    partial_trace_data,
    permute_subsystems,
    random_state,
    random_unitary,
)
from app.models.network import Hypergraph, NetworkAnsatz
from app.models.quantum import DensityMatrix, KrausChannel
from app.models.schemas import BoundMethod, BoundReport, Measure, SeesawCertificate, SeesawConfig
from app.observability.metrics import BOUND_EVALUATIONS, OPERATION_DURATION, SEESAW_UPPER_BOUND
from app.observability.tracing import get_tracer

logger = structlog.get_logger()
tracer = get_tracer(__name__)

BISECTION_STEPS = 60
# Soundness check used when replaying a stored certificate
VERIFY_TOL = 1e-7

Term = tuple[tuple[DensityMatrix, ...], tuple[KrausChannel, ...]]


class CertificateCheck(NamedTuple):
    valid: bool
    min_eigenvalue: float
    upper_bound: float


# --- ansatz plumbing ---------------------------------------------------------

def default_source_dims(g: Hypergraph, target_dims: tuple[int, ...]) -> list[list[int]]:
    """Equal split d_e,v = d_v^(1/deg v); raises when a root is not integral."""
    shares = []
    for v, d in enumerate(target_dims):
        deg = g.degree(v)
        root = round(d ** (1.0 / deg)) if deg else 1
        if deg and root**deg != d:
            raise DomainError(
                f"Node {v} has dimension {d} and degree {deg}: no integral equal split; "
                "configure source_dims explicitly"
            )
        shares.append(root)
    return [[shares[v] for v in e] for e in g.edges]


def _slot_layout(ansatz: NetworkAnsatz) -> tuple[list[int], list[int]]:
    """Slot dims in edge order and the permutation grouping slots by node."""
    slots = [
        (e_idx, v, d)
        for e_idx, e in enumerate(ansatz.graph.edges)
        for v, d in zip(e, ansatz.source_dims[e_idx], strict=True)
    ]
    order = sorted(range(len(slots)), key=lambda s: (slots[s][1], slots[s][0]))
    return [d for _, _, d in slots], order


def _is_identity(ch: KrausChannel) -> bool:
    return ch.is_unitary() and bool(np.allclose(ch.kraus_ops[0], np.eye(ch.input_dim)))


def _assemble_raw(
    ansatz: NetworkAnsatz,
    sources: list[np.ndarray],
    channels: tuple[KrausChannel, ...],
) -> np.ndarray:
    """Linear in each source matrix, so it also maps non-state operators."""
    big = reduce(np.kron, sources)
    slot_dims, order = _slot_layout(ansatz)
    data = permute_subsystems(big, slot_dims, order)
    dims = [ansatz.node_input_dim(v) for v in range(ansatz.graph.n)]
    for v, ch in enumerate(channels):
        if _is_identity(ch):
            continue
        data = apply_kraus_data(data, dims, v, ch.kraus_ops)
        dims[v] = ch.output_dim
    return data


def assemble_network_state(ansatz: NetworkAnsatz, lam: int) -> DensityMatrix:
    """(⊗_v C_v^lam)(⊗_e rho_e^lam) over the target local dims."""
    if not 0 <= lam < ansatz.size:
        raise DimensionError(f"Term index {lam} out of range")
    data = _assemble_raw(
        ansatz, [s.data for s in ansatz.sources[lam]], ansatz.channels[lam]
    )
    return DensityMatrix(local_dims=ansatz.target_dims, data=(data + data.conj().T) / 2)


def mixture(ansatz: NetworkAnsatz) -> np.ndarray:
    """sum_l p_l sigma_l as a raw matrix."""
    side = math.prod(ansatz.target_dims)
    total = np.zeros((side, side), dtype=complex)
    for lam, p in enumerate(ansatz.weights):
        if p > 0:
            total += p * assemble_network_state(ansatz, lam).data
    return total


def build_ansatz(
    g: Hypergraph,
    target_dims: tuple[int, ...],
    source_dims: list[list[int]],
    terms: list[Term],
    weights: list[float],
) -> NetworkAnsatz:
    return NetworkAnsatz(
        graph=g,
        target_dims=target_dims,
        source_dims=tuple(tuple(d) for d in source_dims),
        sources=tuple(t[0] for t in terms),
        channels=tuple(t[1] for t in terms),
        weights=tuple(weights),
    )


def _random_channel(a: int, b: int, rng: np.random.Generator) -> KrausChannel:
    """Unitary when a == b; otherwise row blocks of a Haar unitary."""
    if a == b:
        return KrausChannel.unitary(random_unitary(a, rng))
    if a < b:
        return KrausChannel(input_dim=a, output_dim=b, kraus_ops=(random_unitary(b, rng)[:, :a],))
    u = random_unitary(a, rng)
    blocks = []
    for start in range(0, a, b):
        block = np.zeros((b, a), dtype=complex)
        rows = u[start:start + b]
        block[: rows.shape[0]] = rows
        blocks.append(block)
    return KrausChannel(input_dim=a, output_dim=b, kraus_ops=tuple(blocks))


def _replacement_channel(a: int, b: int) -> KrausChannel:
    """X -> tr(X) 1/b; the identity when a == b."""
    if a == b:
        return KrausChannel.identity(a)
    ops = []
    for i in range(b):
        for j in range(a):
            k = np.zeros((b, a), dtype=complex)
            k[i, j] = 1.0 / math.sqrt(b)
            ops.append(k)
    return KrausChannel(input_dim=a, output_dim=b, kraus_ops=tuple(ops))


# --- certification -----------------------------------------------------------

def _min_eig(m: np.ndarray) -> float:
    return float(np.linalg.eigvalsh((m + m.conj().T) / 2)[0])


def largest_feasible_scale(rho: np.ndarray, sigma: np.ndarray) -> tuple[float, float]:
    """Largest t in [0, 1] with lambda_min(rho - t sigma) >= -certificate_tol.

    lambda_min(rho - t sigma) is concave in t, so the feasible t form an interval
    containing 0 and bisection applies.
    """
    floor = min(-settings.certificate_tol, _min_eig(rho))
    at_one = _min_eig(rho - sigma)
    if at_one >= floor:
        return 1.0, at_one
    lo, hi = 0.0, 1.0
    for _ in range(BISECTION_STEPS):
        mid = (lo + hi) / 2
        if _min_eig(rho - mid * sigma) >= floor:
            lo = mid
        else:
            hi = mid
    return lo, _min_eig(rho - lo * sigma)


def certify(rho: DensityMatrix, ansatz: NetworkAnsatz) -> tuple[NetworkAnsatz, float, float]:
    """Rescale the weights so that ``rho - sigma`` is PSD; returns (ansatz, min eig, ub)."""
    scale, min_eig = largest_feasible_scale(rho.data, mixture(ansatz))
    scaled = ansatz.model_copy(update={"weights": tuple(scale * p for p in ansatz.weights)})
    return scaled, min_eig, 1.0 - sum(scaled.weights)


def maximally_mixed_certificate(rho: DensityMatrix) -> float:
    """Weight q = D lambda_min(rho) of 1/D that fits under rho; the bound is 1 - q."""
    q = rho.dim * max(0.0, _min_eig(rho.data))
    return 1.0 - min(1.0, q)


# --- version 1: mixture over fixed network states ----------------------------

def _mixture_weights(rho: np.ndarray, states: list[np.ndarray]) -> np.ndarray:
    m = len(states)
    prog = lmi.build_program(
        objective=np.ones(m),
        lower=np.zeros(m),
        upper=np.ones(m),
        constraints=[
            (rho, -np.array(states)),
            (np.ones((1, 1)), -np.ones((m, 1, 1))),
        ],
    )
    solution = lmi.solve(prog, max_cuts=settings.seesaw_max_cuts)
    if solution.status == lmi.LmiStatus.INFEASIBLE:
        raise SolverError("Mixture program reported infeasible")
    if solution.status == lmi.LmiStatus.ITERATION_LIMIT:
        logger.warning("Mixture solve hit the cut budget", violation=solution.max_psd_violation)
    weights = np.clip(solution.x, 0.0, 1.0)
    total = weights.sum()
    return weights / total if total > 1.0 else weights


def mixture_weight_bound(rho: DensityMatrix, states: list[DensityMatrix]) -> float:
    """1 - max sum_l p_l subject to rho - sum_l p_l sigma_l PSD (certified)."""
    if not states:
        return 1.0
    for s in states:
        if s.local_dims != rho.local_dims:
            raise DimensionError(f"State dims {s.local_dims} != {rho.local_dims}")
    matrices = [s.data for s in states]
    weights = _mixture_weights(rho.data, matrices)
    sigma = np.tensordot(weights, np.array(matrices), axes=1)
    scale, _ = largest_feasible_scale(rho.data, sigma)
    return 1.0 - scale * float(weights.sum())


# --- version 2: one source at a time -----------------------------------------

def _project_psd(m: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh((m + m.conj().T) / 2)
    out = (vecs * np.clip(vals, 0.0, None)) @ vecs.conj().T
    return (out + out.conj().T) / 2


def optimize_source(
    rho: DensityMatrix, ansatz: NetworkAnsatz, lam: int, e: int
) -> NetworkAnsatz:
    """Re-optimize source ``e`` of term ``lam`` (weight absorbed) with the rest fixed.

    Maximizes tr X subject to rho - others - Phi(X) PSD, X PSD and
    tr X + sum of the other weights <= 1, where Phi is the affine
    assembly map; X / tr X becomes the new source and tr X its weight.
    The returned ansatz is uncertified.
    """
    dims = ansatz.source_dims[e]
    side = math.prod(dims)
    param = lmi.HermitianParametrization(side)
    fixed = [s.data for s in ansatz.sources[lam]]
    channels = ansatz.channels[lam]

    images = []
    for basis_element in param.basis:
        fixed[e] = basis_element
        images.append(_assemble_raw(ansatz, fixed, channels))
    others = mixture(ansatz.replace_term(lam, weight=0.0))
    other_weight = sum(ansatz.weights) - ansatz.weights[lam]
    lower, upper = param.box()

    prog = lmi.build_program(
        objective=param.trace_row(),
        lower=lower,
        upper=upper,
        constraints=[
            (rho.data - others, -np.array(images)),
            (np.zeros((side, side)), param.basis),
            (np.array([[1.0 - other_weight]]), -param.trace_row()[:, None, None]),
        ],
    )
    solution = lmi.solve(prog, max_cuts=settings.seesaw_max_cuts)
    if solution.status == lmi.LmiStatus.INFEASIBLE:
        logger.warning("Source update infeasible, keeping the current source", term=lam, edge=e)
        return ansatz

    x = _project_psd(param.to_matrix(solution.x))
    weight = float(np.real(np.trace(x)))
    if weight <= 1e-12:
        return ansatz.replace_term(lam, weight=0.0)
    weight = min(weight, max(0.0, 1.0 - other_weight))
    state = DensityMatrix(local_dims=dims, data=x / np.real(np.trace(x)))
    sources = list(ansatz.sources[lam])
    sources[e] = state
    return ansatz.replace_term(lam, sources=tuple(sources), weight=weight)


# --- driver ------------------------------------------------------------------

class SeesawOptimizer:
    """Random restarts of the mixture solve followed by source see-saw sweeps."""

    def __init__(self, rho: DensityMatrix, g: Hypergraph, cfg: SeesawConfig) -> None:
        netgraph.require_connected(g)
        if rho.num_parties != g.n:
            raise DimensionError(f"State has {rho.num_parties} parties, network has {g.n} nodes")
        self.rho = rho
        self.g = g
        self.cfg = cfg
        self.target_dims = rho.local_dims
        self.source_dims = (
            cfg.source_dims if cfg.source_dims is not None
            else default_source_dims(g, self.target_dims)
        )
        # Validates the layout once; also the template for new ansätze
        try:
            self.template = build_ansatz(g, self.target_dims, self.source_dims, [], [])
        except ValidationError as exc:
            raise DimensionError(
                f"source_dims {self.source_dims} do not fit the network: {exc.errors()[0]['msg']}"
            ) from exc
        self.history: list[float] = []

    def _input_dim(self, v: int) -> int:
        return self.template.node_input_dim(v)

    def random_term(self, rng: np.random.Generator) -> Term:
        sources = tuple(
            random_state(math.prod(dims), rng, local_dims=dims) for dims in self.source_dims
        )
        channels = tuple(
            _random_channel(self._input_dim(v), d, rng) for v, d in enumerate(self.target_dims)
        )
        return sources, channels

    def marginal_term(self) -> Term | None:
        """Sources read off rho's slot marginals, identity channels.

        Exact for rho itself when rho is a single-term network state with
        identity channels. Needs every node's share product to equal its dimension.
        """
        if any(self._input_dim(v) != d for v, d in enumerate(self.target_dims)):
            return None
        slot_dims, order = _slot_layout(self.template)
        grouped_dims = [slot_dims[s] for s in order]
        sources = []
        for e_idx, dims in enumerate(self.source_dims):
            first = sum(len(e) for e in self.g.edges[:e_idx])
            slots = range(first, first + len(dims))
            keep = sorted(order.index(s) for s in slots)
            data = _project_psd(partial_trace_data(self.rho.data, grouped_dims, keep))
            sources.append(DensityMatrix(local_dims=tuple(dims), data=data / np.real(np.trace(data))))
        channels = tuple(KrausChannel.identity(d) for d in self.target_dims)
        return tuple(sources), channels

    def mixed_term(self) -> Term:
        sources = tuple(
            DensityMatrix(local_dims=tuple(dims), data=np.eye(math.prod(dims)) / math.prod(dims))
            for dims in self.source_dims
        )
        channels = tuple(
            _replacement_channel(self._input_dim(v), d) for v, d in enumerate(self.target_dims)
        )
        return sources, channels

    def _ansatz(self, terms: list[Term], weights: list[float]) -> NetworkAnsatz:
        return build_ansatz(self.g, self.target_dims, self.source_dims, terms, weights)

    def _solve_mixture(self, terms: list[Term]) -> tuple[NetworkAnsatz, float, float]:
        unit = self._ansatz(terms, [0.0] * len(terms))
        states = [assemble_network_state(unit, lam).data for lam in range(len(terms))]
        weights = _mixture_weights(self.rho.data, states)
        return certify(self.rho, self._ansatz(terms, list(weights)))

    def version_one(self, rng: np.random.Generator, pool_size: int) -> tuple[NetworkAnsatz, float, float]:
        """Mixture over ``pool_size`` random network states."""
        terms = [self.random_term(rng) for _ in range(max(pool_size, 1))]
        return self._solve_mixture(terms)

    def version_two(
        self, start: NetworkAnsatz, min_eig: float, ub: float
    ) -> tuple[NetworkAnsatz, float, float, list[float]]:
        """Source sweeps; a step is kept only when its certified bound does not grow."""
        trace = [ub]
        current = (start, min_eig, ub)
        for sweep in range(self.cfg.sweeps):
            for lam in range(current[0].size):
                for e in range(len(self.g.edges)):
                    candidate = certify(self.rho, optimize_source(self.rho, current[0], lam, e))
                    if candidate[2] <= current[2] + 1e-12:
                        current = candidate
                    trace.append(current[2])
            logger.debug("See-saw sweep", sweep=sweep, upper_bound=current[2])
            if current[2] <= settings.certificate_tol:
                break
        return current[0], current[1], current[2], trace

    def restart(self, index: int) -> tuple[NetworkAnsatz, float, float]:
        rng = as_generator(self.cfg.seed + index)
        free: list[Term] = []
        if index == 0 and (marginal := self.marginal_term()) is not None:
            free.append(marginal)
        while len(free) < self.cfg.ansatz_size:
            free.append(self.random_term(rng))

        best = self.version_one(rng, self.cfg.pool_size) if self.cfg.pool_size else None

        terms = free + ([self.mixed_term()] if self.cfg.include_maximally_mixed else [])
        start = self._solve_mixture(terms)
        ansatz, min_eig, ub, trace = self.version_two(*start)
        self.history = trace
        if best is not None and best[2] < ub:
            return best
        return ansatz, min_eig, ub

    def run(self) -> tuple[BoundReport, SeesawCertificate]:
        winner: tuple[NetworkAnsatz, float, float] | None = None
        winner_index = 0
        with OPERATION_DURATION.labels(operation="seesaw").time():
            for r in range(self.cfg.restarts):
                with tracer.start_as_current_span("seesaw.restart") as span:
                    span.set_attribute("seesaw.restart", r)
                    result = self.restart(r)
                logger.info("See-saw restart finished", restart=r, upper_bound=result[2])
                if winner is None or result[2] < winner[2]:
                    winner, winner_index = result, r

        assert winner is not None
        ansatz, min_eig, ub = winner
        if self.cfg.include_maximally_mixed:
            closed_form = maximally_mixed_certificate(self.rho)
            if closed_form < ub:
                q = 1.0 - closed_form
                ansatz = self._ansatz([self.mixed_term()], [q])
                min_eig = _min_eig(self.rho.data - mixture(ansatz))
                ub = closed_form
                winner_index = -1

        # The closed-form certificate uses no random draws
        seed_chain = [self.cfg.seed] if winner_index < 0 else [self.cfg.seed, self.cfg.seed + winner_index]
        certificate = to_certificate(ansatz, min_eig, ub, seed_chain)
        SEESAW_UPPER_BOUND.set(ub)
        BOUND_EVALUATIONS.labels(method=BoundMethod.SEESAW.value).inc()
        report = BoundReport(
            measure=Measure.E_W,
            method=BoundMethod.SEESAW,
            value=0.0,
            upper=ub,
            k=self.g.max_edge_size,
            params={
                "restarts": self.cfg.restarts,
                "sweeps": self.cfg.sweeps,
                "seed": self.cfg.seed,
                "winning_restart": winner_index,
                "min_eigenvalue": min_eig,
                "certificate": certificate.model_dump(mode="json"),
            },
        )
        logger.info("See-saw upper bound", upper_bound=ub, winning_restart=winner_index)
        return report, certificate


def seesaw_run(rho: DensityMatrix, g: Hypergraph, cfg: SeesawConfig | None = None) -> BoundReport:
    """Best certified upper bound on E_w(rho | G) over all restarts."""
    report, _ = SeesawOptimizer(rho, g, cfg or SeesawConfig()).run()
    return report


# --- certificates ------------------------------------------------------------

def to_certificate(
    ansatz: NetworkAnsatz, min_eig: float, ub: float, seed_chain: list[int]
) -> SeesawCertificate:
    return SeesawCertificate(
        graph=ansatz.graph,
        target_dims=list(ansatz.target_dims),
        source_dims=[list(d) for d in ansatz.source_dims],
        weights=list(ansatz.weights),
        sources=[[s.to_payload() for s in term] for term in ansatz.sources],
        channels=[[ch.to_payload() for ch in term] for term in ansatz.channels],
        min_eigenvalue=min_eig,
        upper_bound=min(1.0, max(0.0, ub)),
        seed_chain=seed_chain,
    )


def certificate_ansatz(cert: SeesawCertificate) -> NetworkAnsatz:
    """Rebuild (and re-validate) the ansatz stored in a certificate."""
    return NetworkAnsatz(
        graph=cert.graph,
        target_dims=tuple(cert.target_dims),
        source_dims=tuple(tuple(d) for d in cert.source_dims),
        sources=tuple(tuple(DensityMatrix.from_payload(s) for s in term) for term in cert.sources),
        channels=tuple(
            tuple(KrausChannel.from_payload(ch) for ch in term) for term in cert.channels
        ),
        weights=tuple(cert.weights),
    )


def verify_certificate(rho: DensityMatrix, cert: SeesawCertificate) -> CertificateCheck:
    """Independent replay: rho - sigma PSD within 1e-7 and the bound equals 1 - sum p."""
    ansatz = certificate_ansatz(cert)
    if tuple(cert.target_dims) != rho.local_dims:
        raise DimensionError(f"Certificate dims {cert.target_dims} != state dims {rho.local_dims}")
    min_eig = _min_eig(rho.data - mixture(ansatz))
    ub = 1.0 - sum(ansatz.weights)
    valid = min_eig >= -VERIFY_TOL and abs(ub - cert.upper_bound) <= 1e-9
    return CertificateCheck(valid=valid, min_eigenvalue=min_eig, upper_bound=ub)


def transform_certificate(
    rho: DensityMatrix, cert: SeesawCertificate, channel: KrausChannel, party: int
) -> SeesawCertificate:
    """Certificate for C(rho) obtained by composing ``channel`` into node ``party``."""
    ansatz = certificate_ansatz(cert)
    channels = tuple(
        tuple(compose_channels(ch, channel) if v == party else ch for v, ch in enumerate(term))
        for term in ansatz.channels
    )
    target_dims = list(ansatz.target_dims)
    target_dims[party] = channel.output_dim
    moved = NetworkAnsatz(
        graph=ansatz.graph,
        target_dims=tuple(target_dims),
        source_dims=ansatz.source_dims,
        sources=ansatz.sources,
        channels=channels,
        weights=ansatz.weights,
    )
    transformed = apply_channel(rho, channel, party)
    min_eig = _min_eig(transformed.data - mixture(moved))
    return to_certificate(moved, min_eig, cert.upper_bound, cert.seed_chain)


def convergence_trace(
    rho: DensityMatrix,
    g: Hypergraph,
    cfg: SeesawConfig | None = None,
    pool_steps: int = 15,
    pool_unit: int = 10,
) -> tuple[list[tuple[int, float]], list[float]]:
    """Upper bounds of the mixture version for pools of pool_unit * i random states
    and of the source see-saw after every source update."""
    cfg = cfg or SeesawConfig()
    optimizer = SeesawOptimizer(rho, g, cfg)
    version_one = []
    for i in range(1, pool_steps + 1):
        rng = as_generator(cfg.seed)
        _, _, ub = optimizer.version_one(rng, pool_unit * i)
        version_one.append((pool_unit * i, ub))
        logger.info("Mixture pool solved", pool=pool_unit * i, upper_bound=ub)
    optimizer.restart(0)
    return version_one, optimizer.history

