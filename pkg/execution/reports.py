"""
Reports - Run Summaries and CSV Output
Every float is written with six significant digits so that identical runs
produce identical bytes regardless of locale.
"""

import csv
import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, TextIO

from execution import __version__
from execution.analysis import jain_index
from execution.netsim import FlowStats, Scenario

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = [
    "scenario", "seed", "flow", "protocol", "start_s", "goodput_bps", "efficiency",
    "completion_s", "packets_sent", "lost_model", "lost_overflow", "packets_delivered",
    "app_packets", "innovative", "redundant", "timeouts", "mean_window", "jain", "version",
]
TIMESERIES_COLUMNS = ["scenario", "seed", "flow", "t", "window", "delivered_packets", "rtt"]
SWEEP_METRICS = ["flows", "goodput_bps", "efficiency", "jain", "completion_s",
                 "mean_window", "timeouts", "lost_model", "lost_overflow"]


def format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return format(value, ".6g")
    return str(value)


@dataclass
class RunReport:
    scenario_id: str
    seed: int
    capacity_bps: float
    flows: List[FlowStats]
    version: str = __version__

    @property
    def total_goodput_bps(self) -> float:
        return sum(f.goodput_bps for f in self.flows)

    @property
    def efficiency(self) -> float:
        """Aggregate goodput as a fraction of link capacity."""
        return self.total_goodput_bps / self.capacity_bps

    @property
    def jain(self) -> Optional[float]:
        goodputs = [f.goodput_bps for f in self.flows]
        if not goodputs or not any(goodputs):
            return None
        return jain_index(goodputs)

    @property
    def completion_s(self) -> Optional[float]:
        """Time until the last flow finished, when every flow finished."""
        times = [f.completion_s for f in self.flows]
        if not times or any(t is None for t in times):
            return None
        return max(times)

    def flow_efficiency(self, stats: FlowStats) -> float:
        return stats.goodput_bps / self.capacity_bps

    def summary_rows(self) -> List[Dict[str, Any]]:
        jain = self.jain
        return [{
            "scenario": self.scenario_id,
            "seed": self.seed,
            "flow": f.flow_id,
            "protocol": f.protocol,
            "start_s": float(f.start_s),
            "goodput_bps": float(f.goodput_bps),
            "efficiency": self.flow_efficiency(f),
            "completion_s": f.completion_s,
            "packets_sent": f.packets_sent,
            "lost_model": f.lost_model,
            "lost_overflow": f.lost_overflow,
            "packets_delivered": f.packets_delivered,
            "app_packets": f.app_packets,
            "innovative": f.innovative,
            "redundant": f.redundant,
            "timeouts": f.timeouts,
            "mean_window": float(f.mean_window),
            "jain": jain,
            "version": self.version,
        } for f in self.flows]

    def timeseries_rows(self) -> Iterable[Dict[str, Any]]:
        for f in self.flows:
            for t, window, delivered, rtt in f.series:
                yield {
                    "scenario": self.scenario_id, "seed": self.seed, "flow": f.flow_id,
                    "t": t, "window": window, "delivered_packets": delivered, "rtt": rtt,
                }

    def sweep_metrics(self) -> Dict[str, Any]:
        return {
            "flows": len(self.flows),
            "goodput_bps": float(self.total_goodput_bps),
            "efficiency": float(self.efficiency),
            "jain": self.jain,
            "completion_s": self.completion_s,
            "mean_window": float(self.flows[0].mean_window) if self.flows else None,
            "timeouts": sum(f.timeouts for f in self.flows),
            "lost_model": sum(f.lost_model for f in self.flows),
            "lost_overflow": sum(f.lost_overflow for f in self.flows),
        }


def build_report(scenario: Scenario, stats: List[FlowStats]) -> RunReport:
    return RunReport(scenario.scenario_id, scenario.rng_seed, scenario.link.rate_bps, stats)


# =============================================================================
# CSV
# =============================================================================

def write_csv(rows: Iterable[Dict[str, Any]], columns: Sequence[str], out: TextIO):
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row.get(c)) for c in columns])


def csv_text(rows: Iterable[Dict[str, Any]], columns: Sequence[str]) -> str:
    buffer = io.StringIO()
    write_csv(rows, columns, buffer)
    return buffer.getvalue()


def write_report(report: RunReport, out_dir: Path, timeseries: bool = False) -> List[Path]:
    """Write <id>_summary.csv (and <id>_timeseries.csv) into out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    summary = out_dir / f"{report.scenario_id}_summary.csv"
    with open(summary, "w", newline="", encoding="utf-8") as f:
        write_csv(report.summary_rows(), SUMMARY_COLUMNS, f)
    written.append(summary)

    if timeseries:
        series = out_dir / f"{report.scenario_id}_timeseries.csv"
        with open(series, "w", newline="", encoding="utf-8") as f:
            write_csv(report.timeseries_rows(), TIMESERIES_COLUMNS, f)
        written.append(series)

    for path in written:
        logger.info(f"✓ Wrote {path}")
    return written
