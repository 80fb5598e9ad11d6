"""CSV and SVG rendering of the noisy-GHZ lower-bound curves."""

import csv
import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import structlog  # noqa: E402

from app.models.schemas import FIGURE3_COLUMNS, Figure3Row  # noqa: E402

logger = structlog.get_logger()

_STYLES = {
    "witness": {"label": "fidelity witness", "linestyle": "-"},
    "nonlocality": {"label": "S_n nonlocality", "linestyle": "--"},
    "covariance": {"label": "covariance", "linestyle": ":"},
}


def curves_to_csv(rows: list[Figure3Row]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=FIGURE3_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({key: f"{value:.10g}" for key, value in row.model_dump().items()})
    return buffer.getvalue()


def curves_from_csv(text: str) -> list[Figure3Row]:
    reader = csv.DictReader(io.StringIO(text))
    return [Figure3Row.model_validate({k: float(v) for k, v in line.items()}) for line in reader]


def curves_to_svg(rows: list[Figure3Row], title: str = "") -> str:
    """Line plot of each lower bound against the visibility p."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    try:
        ps = [row.p for row in rows]
        for column, style in _STYLES.items():
            ax.plot(ps, [getattr(row, column) for row in rows], **style)
        ax.set_xlabel("p")
        ax.set_ylabel("lower bound on E_w")
        ax.set_xlim(0.0, 1.0)
        ax.set_ylim(0.0, 1.05)
        if title:
            ax.set_title(title)
        ax.legend(loc="upper left")
        buffer = io.StringIO()
        # Labels as <text> elements; fixed ids, no date stamp
        with plt.rc_context({"svg.fonttype": "none", "svg.hashsalt": "netent"}):
            fig.savefig(buffer, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)
    logger.debug("Rendered curves", points=len(rows))
    return buffer.getvalue()
