"""
Report writers for evaluation results (TSV table, plot series, log summary)
"""
import logging
from abc import ABC, abstractmethod
from typing import List, Optional, TextIO

from .baselines import EvalReport

logger = logging.getLogger(__name__)


class ReportWriter(ABC):
    """Abstract base class for report output formats"""

    @abstractmethod
    def write(self, report: EvalReport, stream: TextIO) -> None:
        """Write the report to an open text stream"""
        pass


class TsvReportWriter(ReportWriter):
    """Per-action table followed by a `# key=value` summary block"""

    def write(self, report: EvalReport, stream: TextIO) -> None:
        stream.write("action\ttrue_count\tmcd_estimate\tcd_estimate\n")
        for action, row in sorted(report.per_action.items()):
            cd = "" if row.cd_estimate is None else f"{row.cd_estimate:.6f}"
            stream.write(f"{action}\t{row.true_count}\t{row.mcd_estimate:.6f}\t{cd}\n")
        stream.write(f"# rng_algorithm={report.rng_algorithm}\n")
        for key, value in report.summary().items():
            stream.write(f"# {key}={value:.6g}\n")
        for model, seeds in sorted(report.seeds.items()):
            stream.write(f"# seeds[{model}]={','.join(str(s) for s in seeds)}\n")


class PlotSeriesWriter(ReportWriter):
    """CSV series ordered by increasing popularity, for bar charts of estimate vs truth"""

    def write(self, report: EvalReport, stream: TextIO) -> None:
        stream.write("rank,action,true_count,mcd_estimate,cd_estimate\n")
        ordered = sorted(report.per_action.items(), key=lambda item: (item[1].true_count, item[0]))
        for rank, (action, row) in enumerate(ordered, 1):
            cd = "" if row.cd_estimate is None else f"{row.cd_estimate:.6f}"
            stream.write(f"{rank},{action},{row.true_count},{row.mcd_estimate:.6f},{cd}\n")


class LogReportWriter(ReportWriter):
    """Summary lines to the logger; the stream is unused"""

    def write(self, report: EvalReport, stream: Optional[TextIO] = None) -> None:
        for key, value in report.summary().items():
            logger.info(f"{key}: {value:.6g}")


def write_report(report: EvalReport, path: str, plot_path: Optional[str] = None) -> List[str]:
    """Write the TSV report (and optional plot series); returns the paths written"""
    written = []
    with open(path, "w") as f:
        TsvReportWriter().write(report, f)
    written.append(path)
    if plot_path:
        with open(plot_path, "w") as f:
            PlotSeriesWriter().write(report, f)
        written.append(plot_path)
    LogReportWriter().write(report)
    return written
