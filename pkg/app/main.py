"""Command-line entry point: ``netent <command> [flags]``."""

import argparse
import json
import sys
from collections.abc import Callable, Sequence
from contextlib import ExitStack
from pathlib import Path
from typing import Any

import structlog
from pydantic import TypeAdapter, ValidationError
from pydantic_core import to_json

from app.config import settings
from app.core import bounds, figures, netgraph, protocols, seesaw
from app.core.exceptions import (
    DimensionError,
    DomainError,
    GraphPreconditionError,
    InputError,
    NetEntError,
    SolverError,
)
from app.models.network import Hypergraph
from app.models.quantum import DensityMatrix, MatrixPayload, Observable
from app.models.schemas import (
    BoundMethod,
    IntervalConfig,
    PlanMode,
    RunConfig,
    SeesawCertificate,
    SeesawConfig,
)
from app.observability.logging import setup_logging
from app.observability.metrics import dump_metrics
from app.observability.tracing import setup_tracing

logger = structlog.get_logger()

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_PARSE = 2
EXIT_GRAPH = 3
EXIT_DOMAIN = 4

DEFAULT_METHODS = [BoundMethod.WITNESS, BoundMethod.NONLOCALITY, BoundMethod.COVARIANCE]


# --- flag parsing ------------------------------------------------------------

def _local_dim(text: str) -> int | None:
    """An integer >= 2, or ``inf`` for the d -> infinity limit."""
    if text.lower() in {"inf", "infinity"}:
        return None
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'inf', got {text!r}") from None


def _grid(text: str) -> list[float]:
    try:
        start, stop, step = (float(part) for part in text.split(":"))
        return bounds.p_grid(start, stop, step)
    except (ValueError, DomainError) as exc:
        raise argparse.ArgumentTypeError(f"expected start:stop:step, got {text!r} ({exc})") from None


def _assignment(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    return key.strip(), value.strip()


def _json_list(text: str) -> list[list[int]]:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"invalid JSON: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", type=Path, help="write the result here instead of stdout")
    common.add_argument("--tol", type=_assignment, action="append", default=[],
                        metavar="KEY=VALUE", help="override a setting for this run")
    common.add_argument("--log-level", default=None)
    common.add_argument("--metrics-file", type=Path, default=None,
                        help="write Prometheus metrics in text format after the run")

    parser = argparse.ArgumentParser(
        prog="netent", description="Network entanglement bounds, graph parameters and plans."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    graph = sub.add_parser("graph", parents=[common], help="edge radius, connected domination")
    graph.add_argument("--graph", type=Path, required=True)

    bound = sub.add_parser("bounds", parents=[common], help="lower bounds and measure intervals")
    bound.add_argument("--state", type=Path, required=True)
    bound.add_argument("--graph", type=Path)
    bound.add_argument("--measurements", type=Path)
    bound.add_argument("--k", type=int)
    bound.add_argument("--method", action="append", choices=[m.value for m in BoundMethod],
                       dest="methods")
    bound.add_argument("--restarts", type=int)
    bound.add_argument("--sweeps", type=int)

    fig = sub.add_parser("figure3", parents=[common], help="noisy-GHZ lower-bound curves")
    fig.add_argument("--d", type=_local_dim, default=2, help="local dimension or 'inf'")
    fig.add_argument("--k", type=int, required=True)
    fig.add_argument("--n", type=int, required=True)
    fig.add_argument("--p-grid", type=_grid, default=None, metavar="START:STOP:STEP")
    fig.add_argument("--format", choices=["json", "csv", "svg"], default="csv",
                     dest="output_format")

    see = sub.add_parser("seesaw", parents=[common], help="certified upper bound on E_w")
    see.add_argument("--state", type=Path, required=True)
    see.add_argument("--graph", type=Path)
    see.add_argument("--restarts", type=int)
    see.add_argument("--sweeps", type=int)
    see.add_argument("--source-dims", type=_json_list, default=None,
                     help='JSON list of per-edge member dims, e.g. "[[2,2],[1,2],[1,1]]"')
    see.add_argument("--verify", type=Path, help="replay a certificate instead of searching")

    plan = sub.add_parser("plan", parents=[common], help="preparation schedule")
    plan.add_argument("--graph", type=Path, required=True)
    plan.add_argument("--mode", choices=[m.value for m in PlanMode], default=PlanMode.STEPS.value)

    sub.add_parser("demo-c4", parents=[common], help="one-round C4 preparation")
    sub.add_parser("demo-c5", parents=[common], help="one-step C5 preparation")
    return parser


def _run_config(args: argparse.Namespace) -> RunConfig:
    fields = {
        key: value
        for key, value in vars(args).items()
        if key in RunConfig.model_fields and value is not None
    }
    fields["tol"] = dict(args.tol)
    unknown = sorted(set(fields["tol"]) - set(type(settings).model_fields))
    if unknown:
        raise InputError(f"Unknown setting(s): {', '.join(unknown)}")
    fields.pop("d", None)
    if args.command == "figure3":
        fields["d"] = args.d
        fields["p_grid"] = args.p_grid if args.p_grid is not None else bounds.p_grid(0, 1, 0.01)
    try:
        return RunConfig.model_validate(fields)
    except ValidationError as exc:
        raise InputError(f"Invalid flags: {exc}") from exc


# --- inputs ------------------------------------------------------------------

def _read[T](path: Path, parse: Callable[[str], T]) -> T:
    """Parse one input file; any read or validation failure is an input error."""
    try:
        return parse(path.read_text())
    except NetEntError:
        raise
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InputError(f"Cannot read {path}: {exc}") from exc


def load_state(path: Path) -> DensityMatrix:
    return _read(path, DensityMatrix.from_json)


def _parse_measurements(text: str) -> list[Observable]:
    payloads = TypeAdapter(list[MatrixPayload]).validate_json(text)
    return [Observable.from_payload(p) for p in payloads]


def load_measurements(path: Path) -> list[Observable]:
    return _read(path, _parse_measurements)


def _parse_certificate(text: str) -> SeesawCertificate:
    cert = SeesawCertificate.model_validate_json(text)
    # Rebuilding the ansatz validates the stored matrices and channels
    seesaw.certificate_ansatz(cert)
    return cert


def load_certificate(path: Path) -> SeesawCertificate:
    return _read(path, _parse_certificate)


def _graph(config: RunConfig) -> Hypergraph:
    assert config.graph is not None
    return _read(config.graph, netgraph.parse_hypergraph)


# --- commands ----------------------------------------------------------------

def cmd_graph(config: RunConfig) -> str:
    g = _graph(config)
    netgraph.require_connected(g)
    return netgraph.graph_params(g).model_dump_json(indent=2)


def _seesaw_config(config: RunConfig) -> SeesawConfig:
    overrides: dict[str, Any] = {"seed": config.seed, "source_dims": config.source_dims}
    if config.restarts is not None:
        overrides["restarts"] = config.restarts
    if config.sweeps is not None:
        overrides["sweeps"] = config.sweeps
    return SeesawConfig(**overrides)


def cmd_bounds(config: RunConfig) -> str:
    assert config.state is not None
    rho = load_state(config.state)
    measurements = load_measurements(config.measurements) if config.measurements else None
    g = _graph(config) if config.graph else None
    if g is not None and g.n != rho.num_parties:
        raise DimensionError(f"State has {rho.num_parties} parties, network has {g.n} nodes")
    k = config.k if config.k is not None else (g.max_edge_size if g is not None else None)
    if k is None:
        raise DomainError("bounds needs --k or --graph")

    methods = config.methods or DEFAULT_METHODS
    with_trace_distance = rho.num_parties >= 3 and len(set(rho.local_dims)) == 1
    # One S_n optimization serves every estimator below
    optimum = None
    if rho.num_parties >= 3 and (with_trace_distance or BoundMethod.NONLOCALITY in methods):
        optimum = bounds.sn_optimize(rho, k, config.restarts, config.seed)

    lower = bounds.lower_bounds(
        rho, k, methods, config.restarts, config.seed, measurements, optimum
    )
    result: dict[str, Any] = {"k": k, "lower_bounds": lower}
    if with_trace_distance:
        result["trace_distance_bounds"] = bounds.tr_measure_bounds(
            rho, k, config.restarts, config.seed, measurements, optimum
        )
    if g is not None:
        interval_fields: dict[str, Any] = {
            "methods": methods,
            "seed": config.seed,
            "measurements": measurements,
            "seesaw": _seesaw_config(config) if BoundMethod.SEESAW in methods else None,
        }
        if config.restarts is not None:
            interval_fields["restarts"] = config.restarts
        interval_cfg = IntervalConfig(**interval_fields)
        reuse = lower if k == g.max_edge_size else None
        result["intervals"] = bounds.measure_intervals(rho, g, interval_cfg, reuse)
        result["exactness"] = protocols.exact_measure_report(rho, g)
    return to_json(result, indent=2).decode()


def cmd_figure3(config: RunConfig) -> str:
    assert config.k is not None and config.n is not None
    rows = bounds.noisy_ghz_curves(config.d, config.k, config.n, config.p_grid)
    if config.output_format == "json":
        return to_json(rows, indent=2).decode()
    table = figures.curves_to_csv(rows)
    if config.output_format == "csv":
        return table
    label = "inf" if config.d is None else str(config.d)
    return figures.curves_to_svg(
        figures.curves_from_csv(table), title=f"d={label}, k={config.k}, n={config.n}"
    )


def cmd_seesaw(config: RunConfig) -> str:
    assert config.state is not None
    rho = load_state(config.state)
    if config.verify is not None:
        cert = load_certificate(config.verify)
        check = seesaw.verify_certificate(rho, cert)
        if not check.valid:
            raise SolverError(
                f"Certificate rejected: min eigenvalue {check.min_eigenvalue:.3e}, "
                f"upper bound {check.upper_bound:.9f} vs {cert.upper_bound:.9f}"
            )
        return to_json(check._asdict(), indent=2).decode()
    if config.graph is None:
        raise DomainError("seesaw needs --graph unless --verify is given")
    report, certificate = seesaw.SeesawOptimizer(rho, _graph(config), _seesaw_config(config)).run()
    summary = {key: value for key, value in report.params.items() if key != "certificate"}
    result = {"report": report.model_copy(update={"params": summary}), "certificate": certificate}
    return to_json(result, indent=2).decode()


def cmd_plan(config: RunConfig) -> str:
    g = _graph(config)
    plan = protocols.plan_steps(g) if config.mode == PlanMode.STEPS else protocols.plan_rounds(g)
    problems = protocols.verify_plan(g, plan)
    if problems:
        logger.warning("Plan failed verification", problems=problems)
    return plan.model_dump_json(indent=2)


def cmd_demo_c4(config: RunConfig) -> str:
    return protocols.demo_report("c4").model_dump_json(indent=2)


def cmd_demo_c5(config: RunConfig) -> str:
    return protocols.demo_report("c5").model_dump_json(indent=2)


COMMANDS: dict[str, Callable[[RunConfig], str]] = {
    "graph": cmd_graph,
    "bounds": cmd_bounds,
    "figure3": cmd_figure3,
    "seesaw": cmd_seesaw,
    "plan": cmd_plan,
    "demo-c4": cmd_demo_c4,
    "demo-c5": cmd_demo_c5,
}


def _emit(text: str, out: Path | None) -> None:
    if not text.endswith("\n"):
        text += "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        try:
            out.write_text(text)
        except OSError as exc:
            raise InputError(f"Cannot write {out}: {exc}") from exc
        logger.info("Output written", path=str(out))


def main(argv: Sequence[str] | None = None) -> int:
    """Run one command; returns the process exit code."""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_PARSE

    setup_logging(args.log_level or settings.log_level, settings.environment)
    setup_tracing(settings.otel_service_name, settings.otel_exporter_endpoint)
    structlog.contextvars.clear_contextvars()
    structlog.contextvars.bind_contextvars(command=args.command, seed=args.seed)

    try:
        config = _run_config(args)
        with ExitStack() as scope:
            try:
                scope.enter_context(settings.overridden(config.tol))
            except ValidationError as exc:
                raise InputError(f"Invalid setting override: {exc}") from exc
            _emit(COMMANDS[config.command](config), config.out)
        return EXIT_OK
    except InputError as exc:
        logger.error("Invalid input", error=str(exc))
        return EXIT_PARSE
    except GraphPreconditionError as exc:
        logger.error("Graph precondition failed", error=str(exc))
        return EXIT_GRAPH
    except (DimensionError, DomainError) as exc:
        logger.error("Dimension or domain error", error=str(exc))
        return EXIT_DOMAIN
    except NetEntError as exc:
        logger.error("Computation failed", error=str(exc), kind=type(exc).__name__)
        return EXIT_FAILURE
    finally:
        if args.metrics_file is not None:
            dump_metrics(args.metrics_file)


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
