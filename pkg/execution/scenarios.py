"""
Scenario Files - TOML Experiment Descriptions
Parses, validates and overrides scenario files into netsim.Scenario objects
"""

import copy
import logging
import re
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import fields
from pathlib import Path
from typing import Any, Dict, Optional, Union

from execution.loss_models import LossModel
from execution.netsim import FlowSpec, LinkConfig, Scenario
from execution.reno import RenoConfig
from execution.sender import SenderConfig

logger = logging.getLogger(__name__)

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"

TOP_KEYS = {"id", "seed", "duration_s", "sample_interval_s", "tick_interval_s",
            "check_conservation", "serialize_frames", "link", "flows"}
LINK_KEYS = {"rate_mbps", "rtt_ms", "prop_delay_ms", "queue_bdp", "queue_pkts",
             "segment_bytes", "loss", "ack_loss"}
LOSS_KEYS = {"kind", "p", "period_ms", "width_ms", "phase_ms", "parts", "rate_pps", "frame_ms"}
# keys each loss kind reads besides "kind"
LOSS_KIND_KEYS = {
    "none": set(),
    "iid": {"p"},
    "periodic_burst": {"period_ms", "width_ms", "phase_ms"},
    "hidden_terminal": {"rate_pps", "frame_ms"},
    "composite": {"parts"},
}
FLOW_KEYS = {"protocol", "start_s", "file_bytes", "duration_s", "segment_bytes",
             "payload_bytes", "config"}

# short names accepted by `sweep --param`
PARAM_ALIASES = {
    "p": "link.loss.p",
    "loss": "link.loss.p",
    "queue_bdp": "link.queue_bdp",
    "queue_pkts": "link.queue_pkts",
    "rtt_ms": "link.rtt_ms",
    "rate_mbps": "link.rate_mbps",
    "ack_p": "link.ack_loss.p",
}
_TABLE_KEYS = {"": TOP_KEYS, "link": LINK_KEYS, "loss": LOSS_KEYS, "ack_loss": LOSS_KEYS}
# setting one of these drops its alternative
_EXCLUSIVE = {"rtt_ms": "prop_delay_ms", "prop_delay_ms": "rtt_ms",
              "queue_bdp": "queue_pkts", "queue_pkts": "queue_bdp"}
_TOML_POSITION = re.compile(r"at line (\d+), column (\d+)")


class ScenarioError(ValueError):
    """A scenario file that cannot be turned into a Scenario."""

    def __init__(self, source: str, field: str, message: str,
                 line: Optional[int] = None, column: Optional[int] = None):
        self.source = source
        self.field = field
        self.line = line
        self.column = column
        where = source
        if line is not None:
            where += f":{line}" + (f":{column}" if column is not None else "")
        super().__init__(f"{where}: {field}: {message}" if field else f"{where}: {message}")


# =============================================================================
# LOADING
# =============================================================================

def read_scenario_file(path: Union[str, Path]) -> Dict[str, Any]:
    """Raw TOML table of a scenario file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise
    except OSError as e:
        raise ScenarioError(str(path), "", f"cannot read file: {e}") from e
    return parse_toml(text, str(path))


def parse_toml(text: str, source: str = "<string>") -> Dict[str, Any]:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        line, column = getattr(e, "lineno", None), getattr(e, "colno", None)
        if line is None:
            # older tomllib only reports the position inside the message
            match = _TOML_POSITION.search(str(e))
            if match:
                line, column = int(match.group(1)), int(match.group(2))
        raise ScenarioError(source, "", f"TOML syntax error: {e}", line, column) from e


def load_scenario(path: Union[str, Path], seed: Optional[int] = None) -> Scenario:
    """Read, validate and build a scenario; `seed` replaces the file's seed."""
    data = read_scenario_file(path)
    if seed is not None:
        data["seed"] = seed
    scenario = build_scenario(data, str(path))
    logger.info(f"✓ Loaded scenario {scenario.scenario_id} from {path}")
    return scenario


def bundled_scenarios() -> Dict[str, Path]:
    """Scenario id -> file for everything shipped in scenarios/."""
    return {path.stem: path for path in sorted(SCENARIO_DIR.glob("*.toml"))}


# =============================================================================
# VALIDATION HELPERS
# =============================================================================

class _Reader:
    """Typed access to one TOML table with field-path error messages."""

    def __init__(self, table: Any, path: str, source: str, allowed: set):
        if not isinstance(table, dict):
            raise ScenarioError(source, path or "<root>", "expected a table")
        self.table = table
        self.path = path
        self.source = source
        unknown = sorted(set(table) - allowed)
        if unknown:
            raise ScenarioError(source, self.field(unknown[0]), "unknown key")

    def field(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def fail(self, key: str, message: str):
        raise ScenarioError(self.source, self.field(key), message)

    def has(self, key: str) -> bool:
        return key in self.table

    def number(self, key: str, default: Any = None, required: bool = False,
               minimum: Optional[float] = None, positive: bool = False) -> Optional[float]:
        if key not in self.table:
            if required:
                self.fail(key, "required")
            return default
        value = self.table[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(key, f"expected a number, got {value!r}")
        if positive and value <= 0:
            self.fail(key, f"must be positive, got {value}")
        if minimum is not None and value < minimum:
            self.fail(key, f"must be >= {minimum}, got {value}")
        return value

    def integer(self, key: str, default: Any = None, required: bool = False,
                minimum: Optional[int] = None) -> Optional[int]:
        value = self.number(key, default, required, minimum)
        if value is not None and not isinstance(value, int):
            self.fail(key, f"expected an integer, got {value!r}")
        return value

    def boolean(self, key: str, default: bool) -> bool:
        value = self.table.get(key, default)
        if not isinstance(value, bool):
            self.fail(key, f"expected true or false, got {value!r}")
        return value

    def string(self, key: str, default: Optional[str] = None, required: bool = False) -> Optional[str]:
        if key not in self.table:
            if required:
                self.fail(key, "required")
            return default
        value = self.table[key]
        if not isinstance(value, str):
            self.fail(key, f"expected a string, got {value!r}")
        return value


def _build_loss(table: Any, path: str, source: str, frame_s: float) -> LossModel:
    r = _Reader(table, path, source, LOSS_KEYS)
    kind = r.string("kind", "iid" if r.has("p") else "none")
    if kind not in LOSS_KIND_KEYS:
        r.fail("kind", f"unknown loss kind {kind!r}")
    unused = sorted(set(table) - LOSS_KIND_KEYS[kind] - {"kind"})
    if unused:
        r.fail(unused[0], f"not used by {kind} loss")
    try:
        if kind == "none":
            return LossModel.none()
        if kind == "iid":
            return LossModel.iid(r.number("p", required=True, minimum=0))
        if kind == "periodic_burst":
            return LossModel.periodic_burst(
                r.number("period_ms", required=True, positive=True) / 1000,
                r.number("width_ms", required=True, minimum=0) / 1000,
                r.number("phase_ms", 0.0) / 1000,
            )
        if kind == "hidden_terminal":
            frame_ms = r.number("frame_ms", frame_s * 1000, positive=True)
            return LossModel.hidden_terminal(r.number("rate_pps", required=True, minimum=0), frame_ms / 1000)
        if kind == "composite":
            parts = table.get("parts")
            if not isinstance(parts, list) or not parts:
                r.fail("parts", "composite loss needs a non-empty list of tables")
            return LossModel.composite(*(
                _build_loss(part, f"{path}.parts[{i}]", source, frame_s) for i, part in enumerate(parts)
            ))
    except ValueError as e:
        if isinstance(e, ScenarioError):
            raise
        raise ScenarioError(source, path, str(e)) from e


def _build_config(table: Any, path: str, source: str, protocol: str):
    config_cls = SenderConfig if protocol == "ctcp" else RenoConfig
    names = {f.name for f in fields(config_cls)}
    _Reader(table, path, source, names)
    try:
        if protocol == "ctcp":
            return SenderConfig.from_secrets(**table)
        return RenoConfig(**table)
    except (TypeError, ValueError) as e:
        raise ScenarioError(source, path, str(e)) from e


def _build_link(table: Any, source: str) -> LinkConfig:
    r = _Reader(table, "link", source, LINK_KEYS)
    rate_bps = r.number("rate_mbps", required=True, positive=True) * 1e6
    if r.has("rtt_ms") == r.has("prop_delay_ms"):
        r.fail("rtt_ms", "give exactly one of rtt_ms or prop_delay_ms")
    if r.has("rtt_ms"):
        prop_delay_s = r.number("rtt_ms", positive=True) / 2000
    else:
        prop_delay_s = r.number("prop_delay_ms", positive=True) / 1000
    segment_bytes = r.integer("segment_bytes", 1500, minimum=1)

    if r.has("queue_bdp") and r.has("queue_pkts"):
        r.fail("queue_pkts", "give at most one of queue_bdp or queue_pkts")
    if r.has("queue_pkts"):
        queue_pkts = r.integer("queue_pkts", minimum=1)
    else:
        bdp = rate_bps * 2 * prop_delay_s / (8 * segment_bytes)
        queue_pkts = max(1, round(r.number("queue_bdp", 1.0, positive=True) * bdp))

    frame_s = segment_bytes * 8 / rate_bps
    loss = _build_loss(table.get("loss", {}), "link.loss", source, frame_s)
    ack_loss = _build_loss(table.get("ack_loss", {}), "link.ack_loss", source, frame_s)
    return LinkConfig(rate_bps, prop_delay_s, queue_pkts, loss, ack_loss)


def _build_flow(table: Any, path: str, source: str, segment_bytes: int) -> FlowSpec:
    r = _Reader(table, path, source, FLOW_KEYS)
    protocol = r.string("protocol", "ctcp")
    if protocol not in ("ctcp", "reno"):
        r.fail("protocol", f"expected 'ctcp' or 'reno', got {protocol!r}")
    config = _build_config(table.get("config", {}), f"{path}.config", source, protocol)
    return FlowSpec(
        protocol=protocol,
        start_s=r.number("start_s", 0.0, minimum=0),
        file_bytes=r.integer("file_bytes", minimum=1),
        duration_s=r.number("duration_s", positive=True),
        segment_bytes=r.integer("segment_bytes", segment_bytes, minimum=1),
        payload_bytes=r.integer("payload_bytes", 16, minimum=1),
        sender_config=config if protocol == "ctcp" else None,
        reno_config=config if protocol == "reno" else None,
    )


def build_scenario(data: Dict[str, Any], source: str = "<string>") -> Scenario:
    """Validate a raw TOML table and build the Scenario it describes."""
    r = _Reader(data, "", source, TOP_KEYS)
    scenario_id = r.string("id", required=True)
    if "link" not in data:
        r.fail("link", "required")
    link = _build_link(data["link"], source)
    segment_bytes = data["link"].get("segment_bytes", 1500)

    flows = data.get("flows")
    if not isinstance(flows, list) or not flows:
        r.fail("flows", "at least one [[flows]] entry is required")
    specs = tuple(_build_flow(flow, f"flows[{i}]", source, segment_bytes) for i, flow in enumerate(flows))

    return Scenario(
        scenario_id=scenario_id,
        link=link,
        flows=specs,
        rng_seed=r.integer("seed", 1, minimum=0),
        sim_duration_s=r.number("duration_s", required=True, minimum=0),
        sample_interval_s=r.number("sample_interval_s", 0.1, positive=True),
        tick_interval_s=r.number("tick_interval_s", 0.005, positive=True),
        check_conservation=r.boolean("check_conservation", False),
        serialize_frames=r.boolean("serialize_frames", False),
    )


# =============================================================================
# OVERRIDES (sweeps and the dashboard)
# =============================================================================

def resolve_param(name: str) -> str:
    return PARAM_ALIASES.get(name, name)


def with_override(data: Dict[str, Any], name: str, value: Any, source: str = "<string>") -> Dict[str, Any]:
    """
    Copy of a raw scenario table with one dotted field replaced.

    Paths look like "link.loss.p", "seed" or "flows.1.start_s"; missing
    loss and config tables are created on the way down.
    """
    path = resolve_param(name)
    parts = path.split(".")
    data = copy.deepcopy(data)
    table = data
    allowed = TOP_KEYS
    for depth, key in enumerate(parts[:-1]):
        here = ".".join(parts[:depth + 1])
        if isinstance(table, list):
            if not key.isdigit() or int(key) >= len(table):
                raise ScenarioError(source, here, f"no such entry in {len(table)} flows")
            table = table[int(key)]
            allowed = FLOW_KEYS
            continue
        if key not in allowed:
            raise ScenarioError(source, here, f"unknown parameter {name!r}")
        if key == "flows":
            table = table.get("flows", [])
            continue
        table = table.setdefault(key, {})
        allowed = _TABLE_KEYS.get(key)
        if allowed is None:
            # per-flow [config]: checked by the config dataclass on rebuild
            allowed = {f.name for f in fields(SenderConfig)} | {f.name for f in fields(RenoConfig)}

    last = parts[-1]
    if isinstance(table, list) or last not in allowed:
        raise ScenarioError(source, path, f"unknown parameter {name!r}")
    table[last] = value
    if table is data.get("link"):
        table.pop(_EXCLUSIVE.get(last, ""), None)
    return data
