import json

import pytest

from edp.evaluation import BenchReport, BenchRow
from edp.experiment import ComparisonReport
from edp.report import BENCH_COLUMNS, MakeFigure, bench_csv, emit_report, fmt, round_sig


def bench():
    report = BenchReport(repetitions=2, k_folds=10, seed=0, instances=100)
    report.rows = [
        BenchRow("ZeroR", [0.3, 0.3], [0.001, 0.002], [0.001, 0.001], [1, 1]),
        BenchRow("KNN", [0.91, 0.89], [0.01, 0.02], [0.5, 0.7], [90, 90]),
    ]
    return report


def comparison():
    def counts(success, migration_success):
        return {
            "offloading": {"request": 10, "success": success, "failure": 10 - success},
            "migration": {
                "triggered": 4, "success": migration_success, "failure": 0,
                "aborted": 4 - migration_success, "ongoing": 0,
            },
        }

    return ComparisonReport(1, 2, [
        {"service_seed": 2, "baseline": counts(7, 2), "predicted": counts(9, 3)},
        {"service_seed": 3, "baseline": counts(6, 1), "predicted": counts(8, 3)},
    ])


def test_fmt():
    assert fmt(1 / 3) == "0.333333"
    assert fmt(123456789.0) == "1.23457e+08"
    assert fmt(2) == "2"
    assert fmt(None) == ""


def test_round_sig():
    assert round_sig({"a": [1 / 3, 2], "b": "x"}) == {"a": [0.333333, 2], "b": "x"}


def test_bench_csv():
    lines = bench_csv(bench()).splitlines()
    assert lines[0] == ",".join(BENCH_COLUMNS)
    assert lines[2].startswith("KNN,0.9,")


def test_bench_only(tmp_path):
    written = emit_report(tmp_path, bench=bench())
    assert [p.name for p in written] == [
        "report.json", "fig2a_accuracy.csv", "fig2b_model_size.csv", "fig2c_time.csv",
    ]
    report = json.loads((tmp_path / "report.json").read_text())
    assert "comparison" not in report
    assert report["bench"]["summary"][1]["algorithm"] == "KNN"
    size = (tmp_path / "fig2b_model_size.csv").read_text().splitlines()
    assert size[2] == "KNN,90,0"


def test_comparison_tables(tmp_path):
    emit_report(tmp_path, comparison=comparison())
    offloading = (tmp_path / "fig3a_offloading.csv").read_text().splitlines()
    assert offloading[0] == "event,baseline_mean,baseline_ci95,predicted_mean,predicted_ci95"
    assert offloading[2].startswith("success,6.5,")
    migration = (tmp_path / "fig3b_migration.csv").read_text().splitlines()
    assert [line.split(",")[0] for line in migration[1:]] == [
        "triggered", "success", "failure", "aborted", "ongoing",
    ]


def test_same_input_same_bytes(tmp_path):
    first = emit_report(tmp_path / "a", bench(), comparison())
    second = emit_report(tmp_path / "b", bench(), comparison())
    for a, b in zip(first, second):
        assert a.read_bytes() == b.read_bytes()


def test_figures(tmp_path):
    written = emit_report(tmp_path, bench(), comparison(), figure_format="svg", dpi=50)
    figures = [p.name for p in written if p.suffix == ".svg"]
    assert figures == [
        "fig2a_accuracy.svg", "fig2b_model_size.svg", "fig2c_time.svg",
        "fig3a_offloading.svg", "fig3b_migration.svg",
    ]
    assert all((tmp_path / name).stat().st_size > 0 for name in figures)


def test_unknown_figure_format(tmp_path):
    with pytest.raises(ValueError):
        emit_report(tmp_path, bench(), figure_format="gif")


def test_make_figure(tmp_path):
    figure = MakeFigure(
        ["a", "b"], {"s": ([1.0, 2.0], [0.1, 0.2])},
        figure_name=tmp_path / "bars.png", dpi=40,
    )
    figure.make_figure()
    assert figure.save_plot().exists()
