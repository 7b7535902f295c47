import json
import logging
from pathlib import Path
from typing import Dict, List, Sequence, Union

import pandas as pd

from ..eval.metrics import aggregate_by_family
from ..models.metrics_models import MetricsReport, SweepResult
from .checkpoint_manager import atomic_write_bytes

# Configure logging
logging.basicConfig(
    level=logging.INFO, format="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)

REPORT_COLUMNS = ["dataset", "family", "n_real", "n_fake", "ap", "acc"]
SWEEP_COLUMNS = ["perturbation", "parameter", "family", "ap", "acc", "error"]

Report = Union[MetricsReport, SweepResult, Dict[str, MetricsReport], Sequence[MetricsReport]]


def percent(frame: pd.DataFrame, columns: Sequence[str]) -> pd.DataFrame:
    """Scale metric columns to percent with two decimals"""
    frame = frame.copy()
    for column in columns:
        frame[column] = (frame[column].astype(float) * 100.0).round(2)
    return frame


def report_frame(report: MetricsReport) -> pd.DataFrame:
    """Per-dataset rows plus the ``average`` aggregate row, metrics in percent"""
    frame = pd.DataFrame([row.model_dump() for row in report.rows], columns=REPORT_COLUMNS)
    aggregate = {
        "dataset": "average",
        "family": "all",
        "n_real": int(frame["n_real"].sum()),
        "n_fake": int(frame["n_fake"].sum()),
        "ap": report.map,
        "acc": report.mean_acc,
    }
    frame = pd.concat([frame, pd.DataFrame([aggregate])], ignore_index=True)
    return percent(frame, ["ap", "acc"])


def sweep_frame(result: SweepResult) -> pd.DataFrame:
    frame = pd.DataFrame([cell.model_dump() for cell in result.cells], columns=SWEEP_COLUMNS)
    return percent(frame, ["ap", "acc"])


def sweep_plot_frame(result: SweepResult) -> pd.DataFrame:
    """x/y series per family: x is the perturbation parameter (0 for the baseline)"""
    rows = [
        {
            "family": cell.family,
            "series": cell.perturbation,
            "x": 0.0 if cell.parameter is None else cell.parameter,
            "ap": cell.ap,
            "acc": cell.acc,
        }
        for cell in result.cells
    ]
    frame = pd.DataFrame(rows, columns=["family", "series", "x", "ap", "acc"])
    return percent(frame, ["ap", "acc"]).sort_values(["family", "series", "x"], kind="stable")


class ReportManager:
    """
    Writes reports into one output directory, every file atomically
    """

    def __init__(self, out_dir: Union[str, Path]):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def write_text(self, name: str, text: str) -> Path:
        path = atomic_write_bytes(self.out_dir / name, text.encode("utf-8"))
        logger.info(f"Wrote {path}")
        return path

    def write_frame(self, name: str, frame: pd.DataFrame) -> Path:
        return self.write_text(name, frame.to_csv(index=False, float_format="%.2f", lineterminator="\n"))

    def write_raw_frame(self, name: str, frame: pd.DataFrame) -> Path:
        """CSV at full float precision (feature exports, loss curves)"""
        return self.write_text(name, frame.to_csv(index=False, float_format="%.9g", lineterminator="\n"))

    def emit_metrics(self, report: MetricsReport, stem: str = "report") -> List[Path]:
        families = percent(aggregate_by_family(report), ["ap", "acc"])
        plot = percent(
            pd.DataFrame(
                [{"family": row.family, "x": row.dataset, "ap": row.ap, "acc": row.acc} for row in report.rows]
            ),
            ["ap", "acc"],
        )
        return [
            self.write_frame(f"{stem}.csv", report_frame(report)),
            self.write_text(f"{stem}.json", report.model_dump_json(indent=2) + "\n"),
            self.write_frame(f"{stem}_families.csv", families),
            self.write_frame(f"{stem}_plot.csv", plot),
        ]

    def emit_sweep(self, result: SweepResult, stem: str = "robustness") -> List[Path]:
        return [
            self.write_frame(f"{stem}.csv", sweep_frame(result)),
            self.write_text(f"{stem}.json", result.model_dump_json(indent=2) + "\n"),
            self.write_frame(f"{stem}_plot.csv", sweep_plot_frame(result)),
        ]

    def emit_comparison(self, reports: Dict[str, MetricsReport], stem: str = "report") -> List[Path]:
        paths: List[Path] = []
        for name, report in reports.items():
            paths += self.emit_metrics(report, f"{stem}_{name}")
        summary = pd.DataFrame(
            [{"strategy": name, "map": r.map, "mean_acc": r.mean_acc} for name, r in reports.items()]
        )
        paths.append(self.write_frame(f"{stem}_summary.csv", percent(summary, ["map", "mean_acc"])))
        return paths

    def emit_ablation(self, reports: Sequence[MetricsReport], stem: str = "ablation") -> List[Path]:
        rows = []
        for report in reports:
            for row in report.rows:
                rows.append(
                    {"train_size": report.metadata.train_size, "family": row.family, "ap": row.ap, "acc": row.acc}
                )
            rows.append(
                {"train_size": report.metadata.train_size, "family": "average", "ap": report.map, "acc": report.mean_acc}
            )
        document = json.dumps([json.loads(r.model_dump_json()) for r in reports], indent=2)
        return [
            self.write_frame(f"{stem}.csv", percent(pd.DataFrame(rows), ["ap", "acc"])),
            self.write_text(f"{stem}.json", document + "\n"),
        ]


def emit_report(report: Report, out_dir: Union[str, Path], stem: str = "report") -> List[Path]:
    """
    Write CSV, JSON and plot-data files for any report shape.

    Args:
        report: MetricsReport, SweepResult, {strategy: MetricsReport} or an
            ablation list of MetricsReport
        out_dir: Target directory, created when missing
        stem: File name prefix

    Returns:
        Paths of the files written
    """
    manager = ReportManager(out_dir)
    if isinstance(report, MetricsReport):
        return manager.emit_metrics(report, stem)
    if isinstance(report, SweepResult):
        return manager.emit_sweep(report, stem)
    if isinstance(report, dict):
        return manager.emit_comparison(report, stem)
    return manager.emit_ablation(list(report), stem)
