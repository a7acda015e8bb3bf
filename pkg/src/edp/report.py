"""Plot-ready CSV reports and matplotlib renderings of the benchmark and of
the comparison experiment.

Every CSV number is written with 6 significant digits and columns come in a
fixed order, so the same report always produces the same bytes.

License
-------
This file is part of edgeplanner
BSD 3-Clause License
"""
import logging
from pathlib import Path
from typing import Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.axes import Axes  # noqa: E402

from edp.codecs import csv_text, atomic_write_text, write_json  # noqa: E402
from edp.evaluation import BenchReport  # noqa: E402
from edp.experiment import (  # noqa: E402
    MIGRATION_METRICS, OFFLOADING_METRICS, SCENARIOS, ComparisonReport,
)

logger = logging.getLogger(__name__)

BENCH_COLUMNS = (
    "algorithm", "mean_accuracy", "ci95_accuracy", "mean_train_s",
    "mean_test_s", "ci95_time",
)
FIGURE_FORMATS = ("png", "pdf", "svg")
# Keeps vector outputs free of creation dates.
_METADATA = {"png": None, "pdf": {"CreationDate": None}, "svg": {"Date": None}}


def fmt(value) -> str:
    """Six significant digits."""
    if value is None:
        return ""
    return f"{float(value):.6g}"


def round_sig(data):
    """Copy of a JSON-like structure with floats rounded to 6 significant
    digits."""
    if isinstance(data, float):
        return float(f"{data:.6g}")
    if isinstance(data, dict):
        return {key: round_sig(value) for key, value in data.items()}
    if isinstance(data, list):
        return [round_sig(value) for value in data]
    return data


def bench_csv(report: BenchReport) -> str:
    return csv_text(
        BENCH_COLUMNS,
        (
            (
                row.algorithm, fmt(row.mean_accuracy), fmt(row.ci95_accuracy),
                fmt(row.mean_train_s), fmt(row.mean_test_s), fmt(row.ci95_time),
            )
            for row in report.rows
        ),
    )


def _bench_tables(report: BenchReport) -> dict[str, str]:
    return {
        "fig2a_accuracy.csv": csv_text(
            ("algorithm", "mean_accuracy", "ci95_accuracy"),
            (
                (row.algorithm, fmt(row.mean_accuracy), fmt(row.ci95_accuracy))
                for row in report.rows
            ),
        ),
        "fig2b_model_size.csv": csv_text(
            ("algorithm", "mean_model_size", "ci95_model_size"),
            (
                (row.algorithm, fmt(row.mean_model_size), fmt(row.ci95_model_size))
                for row in report.rows
            ),
        ),
        "fig2c_time.csv": csv_text(
            ("algorithm", "mean_train_s", "mean_test_s", "ci95_time"),
            (
                (
                    row.algorithm, fmt(row.mean_train_s), fmt(row.mean_test_s),
                    fmt(row.ci95_time),
                )
                for row in report.rows
            ),
        ),
    }


def _comparison_table(aggregate: dict, group: str, metrics) -> str:
    header = ["event"]
    for scenario in SCENARIOS:
        header += [f"{scenario}_mean", f"{scenario}_ci95"]
    rows = []
    for metric in metrics:
        row = [metric]
        for scenario in SCENARIOS:
            cell = aggregate[scenario][group][metric]
            row += [fmt(cell["mean"]), fmt(cell["ci95"])]
        rows.append(row)
    return csv_text(header, rows)


def _comparison_tables(report: ComparisonReport) -> dict[str, str]:
    aggregate = report.aggregate()
    return {
        "fig3a_offloading.csv": _comparison_table(
            aggregate, "offloading", list(OFFLOADING_METRICS)
        ),
        "fig3b_migration.csv": _comparison_table(
            aggregate, "migration", [*MIGRATION_METRICS, "ongoing"]
        ),
    }


class MakeFigure:
    """Grouped bar chart with 95% confidence interval error bars.

    Attributes
    ----------
    categories : list[str]
        Labels of the x axis.
    series : dict[str, tuple[list[float], list[float]]]
        Series name -> (means, ci95 half widths), one value per category.
    title, ylabel : str
    figure_name : Path
        Output path with the figure's name.
    figure_format : str
        `png`, `pdf` or `svg` (default: `png`).
    figure_width, figure_height : float
        Size in inches (default: matplotlib's 6.4 x 4.8).
    dpi : float
        Resolution in dots per inch (default: 300.0).
    """

    def __init__(
        self,
        categories,
        series,
        title: str = "",
        ylabel: str = "",
        figure_name: Path = (Path.cwd() / "figure.png"),
        figure_format: str = "png",
        figure_width: float = 6.4,
        figure_height: float = 4.8,
        dpi: float = 300.0,
    ):
        self.categories = list(categories)
        self.series = dict(series)
        self.title = title
        self.ylabel = ylabel
        self.figure_name = Path(figure_name)
        self.figure_format = figure_format
        self.figure_width = figure_width
        self.figure_height = figure_height
        self.dpi = dpi
        self.fig = None

    def plot_bars(self, ax: Axes) -> None:
        width = 0.8 / max(len(self.series), 1)
        for i, (name, (means, errors)) in enumerate(self.series.items()):
            positions = [
                c - 0.4 + width * (i + 0.5) for c in range(len(self.categories))
            ]
            ax.bar(positions, means, width, yerr=errors, capsize=3, label=name)
        ax.set_xticks(range(len(self.categories)))
        ax.set_xticklabels(self.categories, rotation=20)
        if len(self.series) > 1:
            ax.legend()

    def make_figure(self):
        """Make figure with matplotlib."""
        self.fig, ax = plt.subplots(
            figsize=(self.figure_width, self.figure_height), layout="constrained"
        )
        self.plot_bars(ax)
        ax.set_title(self.title)
        ax.set_ylabel(self.ylabel)
        return self.fig

    def save_plot(self) -> Path:
        """Save plot and close the figure."""
        self.fig.savefig(
            fname=self.figure_name,
            format=self.figure_format,
            dpi=self.dpi,
            metadata=_METADATA[self.figure_format],
        )
        plt.close(self.fig)
        return self.figure_name


def _bench_figures(report: BenchReport, out_dir: Path, figure_format, dpi):
    names = [row.algorithm for row in report.rows]
    panels = (
        ("fig2a_accuracy", "Accuracy", "accuracy",
         [r.mean_accuracy for r in report.rows], [r.ci95_accuracy for r in report.rows]),
        ("fig2b_model_size", "Model size", "instances / parameters / nodes",
         [r.mean_model_size for r in report.rows], [r.ci95_model_size for r in report.rows]),
        ("fig2c_time", "Train + test time", "seconds",
         [r.mean_train_s + r.mean_test_s for r in report.rows], [r.ci95_time for r in report.rows]),
    )
    for stem, title, ylabel, means, errors in panels:
        figure = MakeFigure(
            names, {title: (means, errors)}, title=title, ylabel=ylabel,
            figure_name=out_dir / f"{stem}.{figure_format}",
            figure_format=figure_format, dpi=dpi,
        )
        figure.make_figure()
        yield figure.save_plot()


def _comparison_figures(report: ComparisonReport, out_dir: Path, figure_format, dpi):
    aggregate = report.aggregate()
    for stem, title, group, metrics in (
        ("fig3a_offloading", "Offloading events", "offloading", list(OFFLOADING_METRICS)),
        ("fig3b_migration", "Migration events", "migration", [*MIGRATION_METRICS, "ongoing"]),
    ):
        series = {
            scenario: (
                [aggregate[scenario][group][m]["mean"] for m in metrics],
                [aggregate[scenario][group][m]["ci95"] for m in metrics],
            )
            for scenario in SCENARIOS
        }
        figure = MakeFigure(
            metrics, series, title=title, ylabel="mean events per run",
            figure_name=out_dir / f"{stem}.{figure_format}",
            figure_format=figure_format, dpi=dpi,
        )
        figure.make_figure()
        yield figure.save_plot()


def emit_report(
    out_dir: Union[str, Path],
    bench: Union[BenchReport, None] = None,
    comparison: Union[ComparisonReport, None] = None,
    figure_format: Union[str, None] = None,
    dpi: float = 300.0,
) -> list[Path]:
    """Write `report.json`, one plot-ready CSV per panel and optional figures.

    Returns the written paths in a fixed order.
    """
    out_dir = Path(out_dir)
    if figure_format is not None and figure_format not in FIGURE_FORMATS:
        raise ValueError(
            f"figure format `{figure_format}` is not one of {', '.join(FIGURE_FORMATS)}"
        )
    tables = {}
    document = {}
    if bench is not None:
        tables.update(_bench_tables(bench))
        document["bench"] = {
            **bench.to_dict(),
            "summary": [
                dict(zip(BENCH_COLUMNS, (
                    row.algorithm, row.mean_accuracy, row.ci95_accuracy,
                    row.mean_train_s, row.mean_test_s, row.ci95_time,
                )))
                for row in bench.rows
            ],
        }
    if comparison is not None:
        tables.update(_comparison_tables(comparison))
        document["comparison"] = comparison.to_dict()
    written = [write_json(out_dir / "report.json", round_sig(document))]
    for name, text in tables.items():
        written.append(atomic_write_text(out_dir / name, text))
    if figure_format is not None:
        if bench is not None:
            written.extend(_bench_figures(bench, out_dir, figure_format, dpi))
        if comparison is not None:
            written.extend(_comparison_figures(comparison, out_dir, figure_format, dpi))
    logger.info("report: %d files in %s", len(written), out_dir)
    return written
