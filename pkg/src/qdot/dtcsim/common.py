"""Configuration loading and validation for the dtcsim modules"""

import copy
import logging
import math
import re
from dataclasses import dataclass, field, replace
from os import environ
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import yaml

from .analysis import BlochMeasure
from .floquet import SamplingMode
from .spinmodel import (
    Axis,
    ChainSpec,
    DriveProtocol,
    ErrorSense,
    GlobalRotation,
    InitialStateSpec,
    Model,
    ProductBloch,
    ProductZ,
    ProtocolEvent,
    SetFloquetAxis,
    SetH2IAxis,
    neel_state,
)
from .sweep import (
    DEFAULT_REALIZATIONS,
    GridAxis,
    Observable,
    ObservableKind,
    SweepPlan,
)

DOCS_REFERENCE = "docs/dtcsim.rst"
OUTPUT_ENV_VAR = "DTCSIM_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "dtcsim_output"
KINDS = ("sweep", "trace", "protocol", "purity", "verify")
FORMATS = ("csv", "svg", "both")

TOP_KEYS = {"kind", "model", "chain", "drive", "initial", "output", *KINDS}
CHAIN_KEYS = {
    "n_sites",
    "geometry",
    "j_mean",
    "j_width",
    "field_mean",
    "field_width",
}
DRIVE_KEYS = {
    "floquet_axis",
    "floquet_error",
    "floquet_pulse",
    "h2i_count",
    "h2i_axis",
    "h2i_error",
    "h2i_error_sense",
    "h2i_targets",
    "events",
}
EVENT_ACTIONS = {"rotate", "floquet_axis", "h2i_axis"}
SWEEP_KEYS = {
    "x",
    "y",
    "realizations",
    "master_seed",
    "observable",
    "ell",
    "bloch_grid",
    "bloch_measure",
}
TRACE_KEYS = {"n_periods", "sampling", "realizations", "master_seed"}
PROTOCOL_KEYS = TRACE_KEYS | {"control_j_mean", "n_sites_scan"}
OUTPUT_KEYS = {"directory", "format", "name"}

ANGLE_PATTERN = re.compile(
    r"^\s*(?P<sign>-)?\s*(?P<factor>\d*\.?\d*)\s*\*?\s*pi"
    r"\s*(?:/\s*(?P<divisor>\d+\.?\d*))?\s*$"
)


class ConfigError(ValueError):
    """Invalid configuration, with the offending key path and line

    Args:
        message (str): what is wrong
        path (str): dotted key path, e.g. chain.n_sites
        line (int|None): 1-based line in the document
        section (str): documentation section to point to
    """

    def __init__(
        self,
        message: str,
        path: str = "",
        line: Optional[int] = None,
        section: Optional[str] = None,
    ):
        self.message = message
        self.path = path
        self.line = line
        self.section = section or (path.split(".")[0] if path else "kind")
        location = f" at line {line}" if line is not None else ""
        where = f" ({path})" if path else ""
        super().__init__(
            f"Config error{location}{where}: {message}."
            f" See {DOCS_REFERENCE}, section '{self.section}'"
        )


class LineMap:
    """Maps dotted key paths to 1-based document lines"""

    def __init__(self, lines: Optional[Dict[str, int]] = None):
        self._lines = dict(lines or {})

    @classmethod
    def from_node(cls, node: Optional[yaml.Node]) -> "LineMap":
        """Collect key lines from a composed YAML node

        Args:
            node (yaml.Node): root node from yaml.compose

        Returns:
            LineMap: the map
        """
        lines = {}

        def walk(current, path):
            if isinstance(current, yaml.MappingNode):
                for key_node, value_node in current.value:
                    key_path = f"{path}.{key_node.value}" if path else key_node.value
                    lines[key_path] = key_node.start_mark.line + 1
                    walk(value_node, key_path)
            elif isinstance(current, yaml.SequenceNode):
                for index, item in enumerate(current.value):
                    item_path = f"{path}.{index}"
                    lines[item_path] = item.start_mark.line + 1
                    walk(item, item_path)

        if node is not None:
            walk(node, "")
        return cls(lines)

    def line(self, path: str) -> Optional[int]:
        """Line of the path, or of its closest recorded parent"""
        parts = path.split(".")
        while parts:
            candidate = ".".join(parts)
            if candidate in self._lines:
                return self._lines[candidate]
            parts.pop()
        return None


def yaml_load(file_name) -> Tuple[Dict[str, Any], LineMap]:
    """Load a yaml config file with the lines of its keys

    Args:
        file_name (str|Path): name of yaml file

    Returns:
        tuple: (document, LineMap)
    """
    logger = logging.getLogger(__name__ + ".yaml_load")
    try:
        with open(file_name, "r", encoding="utf-8") as yam:
            text = yam.read()
    except OSError as err:
        raise ConfigError(f"cannot read {file_name}: {err.strerror}") from err
    logger.debug("Read %s characters from %s", len(text), file_name)
    return yaml_loads(text)


def yaml_loads(text: str) -> Tuple[Dict[str, Any], LineMap]:
    """Parse a yaml document with the lines of its keys

    Args:
        text (str): the document

    Returns:
        tuple: (document, LineMap)
    """
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        document = yaml.safe_load(text)
    except yaml.YAMLError as err:
        mark = getattr(err, "problem_mark", None)
        raise ConfigError(
            f"not valid YAML: {getattr(err, 'problem', err)}",
            line=mark.line + 1 if mark is not None else None,
        ) from err
    if document is None:
        document = {}
    if not isinstance(document, dict):
        raise ConfigError("the document must be a mapping", line=1)
    return document, LineMap.from_node(node)


@dataclass(frozen=True)
class OutputSettings:
    directory: Path
    format: str = "both"
    name: str = "dtcsim"

    @property
    def wants_csv(self) -> bool:
        return self.format in ("csv", "both")

    @property
    def wants_svg(self) -> bool:
        return self.format in ("svg", "both")


@dataclass(frozen=True)
class TraceRequest:
    """Disorder-averaged run_protocol request"""

    n_periods: int
    sampling: SamplingMode = SamplingMode.EVERY_PERIOD
    realizations: int = DEFAULT_REALIZATIONS
    master_seed: int = 0


@dataclass(frozen=True)
class ProtocolRequest:
    """Trace with a coupling-free control run and an optional N scan"""

    trace: TraceRequest
    control_j_mean: float = 0.0
    n_sites_scan: Tuple[int, ...] = ()


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration document

    Args:
        kind (str): sweep, trace, protocol, purity or verify
        model (Model): static interaction
        chain (ChainSpec|None): ensemble, None for verify
        protocol (DriveProtocol): pulse schedule
        initial (InitialStateSpec|None): initial state
        plan (SweepPlan|None): for sweep and purity
        trace (TraceRequest|None): for trace
        protocol_run (ProtocolRequest|None): for protocol
        verify_seed (int): seed of the verification suite
        output (OutputSettings): where and how to write
        document (dict): the validated document, echoed to run_config.yml
    """

    kind: str
    model: Model
    output: OutputSettings
    document: Dict[str, Any] = field(default_factory=dict)
    chain: Optional[ChainSpec] = None
    protocol: DriveProtocol = field(default_factory=DriveProtocol)
    initial: Optional[InitialStateSpec] = None
    plan: Optional[SweepPlan] = None
    trace: Optional[TraceRequest] = None
    protocol_run: Optional[ProtocolRequest] = None
    verify_seed: int = 0

    @property
    def master_seed(self) -> int:
        if self.plan is not None:
            return self.plan.master_seed
        if self.trace is not None:
            return self.trace.master_seed
        if self.protocol_run is not None:
            return self.protocol_run.trace.master_seed
        return self.verify_seed


class _Checker:
    """Typed accessors that raise ConfigError with line numbers"""

    def __init__(self, lines: LineMap):
        self._lines = lines

    def error(self, path: str, message: str) -> ConfigError:
        return ConfigError(message, path, self._lines.line(path))

    def mapping(self, value, path, allowed) -> Dict[str, Any]:
        if value is None:
            return {}
        if not isinstance(value, dict):
            raise self.error(path, "must be a mapping")
        unknown = sorted(set(value) - set(allowed))
        if unknown:
            raise self.error(
                f"{path}.{unknown[0]}" if path else unknown[0],
                f"unknown key {unknown[0]!r}, allowed keys are"
                f" {sorted(allowed)}",
            )
        return value

    def number(self, section, key, path, default=None, minimum=None):
        value = section.get(key, default)
        key_path = f"{path}.{key}"
        if value is None:
            raise self.error(key_path, f"{key} is required")
        if isinstance(value, str):
            value = self.angle(value, key_path)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.error(key_path, f"{key} must be a number, got {value!r}")
        if minimum is not None and value < minimum:
            raise self.error(key_path, f"{key} must be >= {minimum}, got {value}")
        return float(value)

    def integer(self, section, key, path, default=None, minimum=None):
        value = section.get(key, default)
        key_path = f"{path}.{key}"
        if value is None:
            raise self.error(key_path, f"{key} is required")
        if isinstance(value, bool) or not isinstance(value, int):
            raise self.error(key_path, f"{key} must be an integer, got {value!r}")
        if minimum is not None and value < minimum:
            raise self.error(key_path, f"{key} must be >= {minimum}, got {value}")
        return value

    def choice(self, section, key, path, choices, default=None):
        value = section.get(key, default)
        if value not in choices:
            raise self.error(
                f"{path}.{key}" if path else key,
                f"{key} must be one of {list(choices)}, got {value!r}",
            )
        return value

    def triple(self, section, key, path):
        value = section.get(key, [0.0, 0.0, 0.0])
        key_path = f"{path}.{key}"
        if not isinstance(value, list) or len(value) != 3:
            raise self.error(key_path, f"{key} needs three numbers (x, y, z)")
        return tuple(
            self.number({"v": item}, "v", f"{key_path}.{index}")
            for index, item in enumerate(value)
        )

    def angle(self, text, path):
        """Number from strings such as 'pi/2', '-3pi/4' or '0.5*pi'"""
        match = ANGLE_PATTERN.match(text)
        if match is None:
            raise self.error(path, f"cannot read {text!r} as a number")
        factor = float(match["factor"]) if match["factor"] else 1.0
        divisor = float(match["divisor"]) if match["divisor"] else 1.0
        sign = -1.0 if match["sign"] else 1.0
        return sign * factor * math.pi / divisor


def _chain(check: _Checker, document) -> ChainSpec:
    section = check.mapping(document.get("chain"), "chain", CHAIN_KEYS)
    if "chain" not in document:
        raise check.error("chain", "chain section is required")
    try:
        return ChainSpec(
            n_sites=check.integer(section, "n_sites", "chain", minimum=1),
            geometry=check.choice(
                section, "geometry", "chain", ("open", "loop"), "open"
            ),
            j_mean=check.number(section, "j_mean", "chain", 0.0),
            j_width=check.number(section, "j_width", "chain", 0.0, minimum=0),
            field_mean=check.triple(section, "field_mean", "chain"),
            field_width=check.triple(section, "field_width", "chain"),
        )
    except ValueError as err:
        if isinstance(err, ConfigError):
            raise
        raise check.error("chain", str(err)) from err


def _axis(check, section, key, path, default):
    return Axis(check.choice(section, key, path, ("x", "y", "z"), default))


def _event(check: _Checker, item, path) -> Tuple[ProtocolEvent, ...]:
    item = check.mapping(item, path, {"period"} | EVENT_ACTIONS)
    period = check.integer(item, "period", path, minimum=0)
    actions = [key for key in item if key in EVENT_ACTIONS]
    if len(actions) != 1:
        raise check.error(
            path, f"an event needs exactly one of {sorted(EVENT_ACTIONS)}"
        )
    action = actions[0]
    if action == "rotate":
        rotate = check.mapping(item["rotate"], f"{path}.rotate", {"axis", "angle"})
        built = GlobalRotation(
            _axis(check, rotate, "axis", f"{path}.rotate", None),
            check.number(rotate, "angle", f"{path}.rotate"),
        )
    elif action == "floquet_axis":
        built = SetFloquetAxis(_axis(check, item, action, path, None))
    else:
        built = SetH2IAxis(_axis(check, item, action, path, None))
    return (ProtocolEvent(period, built),)


def _drive(check: _Checker, document) -> DriveProtocol:
    section = check.mapping(document.get("drive"), "drive", DRIVE_KEYS)
    targets = section.get("h2i_targets")
    if targets is not None and (
        not isinstance(targets, list)
        or not all(isinstance(site, int) for site in targets)
    ):
        raise check.error("drive.h2i_targets", "h2i_targets must be a list of sites")
    pulse = section.get("floquet_pulse", True)
    if not isinstance(pulse, bool):
        raise check.error("drive.floquet_pulse", "floquet_pulse must be true or false")
    events = section.get("events") or []
    if not isinstance(events, list):
        raise check.error("drive.events", "events must be a list")
    built_events = ()
    for index, item in enumerate(events):
        try:
            built_events += _event(check, item, f"drive.events.{index}")
        except ValueError as err:
            if isinstance(err, ConfigError):
                raise
            raise check.error(f"drive.events.{index}", str(err)) from err
    try:
        return DriveProtocol(
            floquet_axis=_axis(check, section, "floquet_axis", "drive", "x"),
            floquet_error=check.number(section, "floquet_error", "drive", 0.0),
            h2i_count=check.integer(section, "h2i_count", "drive", 0, minimum=0),
            h2i_axis=_axis(check, section, "h2i_axis", "drive", "z"),
            h2i_error=check.number(section, "h2i_error", "drive", 0.0),
            h2i_error_sense=ErrorSense(
                check.choice(
                    section,
                    "h2i_error_sense",
                    "drive",
                    tuple(sense.value for sense in ErrorSense),
                    "opposed",
                )
            ),
            h2i_targets=tuple(targets) if targets is not None else None,
            events=built_events,
            floquet_pulse=pulse,
        )
    except ValueError as err:
        if isinstance(err, ConfigError):
            raise
        raise check.error("drive", str(err)) from err


def _initial(check: _Checker, document, n_sites: int) -> InitialStateSpec:
    if "initial" not in document:
        return neel_state(n_sites)
    section = check.mapping(document["initial"], "initial", {"product_z", "bloch"})
    if len(section) != 1:
        raise check.error("initial", "give exactly one of product_z or bloch")
    try:
        if "product_z" in section:
            spins = section["product_z"]
            if not isinstance(spins, str):
                raise check.error("initial.product_z", "product_z must be a string")
            initial = ProductZ(spins)
            initial.validate(n_sites)
            return initial
        bloch = check.mapping(section["bloch"], "initial.bloch", {"theta", "chi"})
        return ProductBloch(
            check.number(bloch, "theta", "initial.bloch"),
            check.number(bloch, "chi", "initial.bloch", 0.0),
        )
    except ValueError as err:
        if isinstance(err, ConfigError):
            raise
        raise check.error("initial", str(err)) from err


def _grid_axis(check: _Checker, value, path) -> GridAxis:
    section = check.mapping(value, path, {"name", "values", "start", "stop", "num"})
    if "name" not in section:
        raise check.error(path, "a grid axis needs a name")
    try:
        if "values" in section:
            if set(section) != {"name", "values"}:
                raise check.error(path, "give either values or start/stop/num")
            values = section["values"]
            if not isinstance(values, list):
                raise check.error(f"{path}.values", "values must be a list")
            return GridAxis(
                section["name"],
                tuple(
                    check.number({"v": item}, "v", f"{path}.values.{index}")
                    for index, item in enumerate(values)
                ),
            )
        return GridAxis.linspace(
            section["name"],
            check.number(section, "start", path),
            check.number(section, "stop", path),
            check.integer(section, "num", path, minimum=1),
        )
    except ValueError as err:
        if isinstance(err, ConfigError):
            raise
        raise check.error(path, str(err)) from err


def _plan(check, document, kind, model, chain, protocol, initial) -> SweepPlan:
    section = check.mapping(document.get(kind), kind, SWEEP_KEYS)
    purity = kind == "purity"
    default_kind = "bloch_purity" if purity else "time_average_z"
    observable = check.mapping(
        section.get("observable"), f"{kind}.observable", {"kind", "site"}
    )
    if purity:
        x_default = {"name": "j_mean", "values": [chain.j_mean]}
        y_default = {"name": "epsilon", "values": [protocol.floquet_error]}
    else:
        x_default = y_default = None
    for key, default in (("x", x_default), ("y", y_default)):
        if section.get(key, default) is None:
            raise check.error(f"{kind}.{key}", f"{kind}.{key} is required")
    bloch = section.get("bloch_grid", [8, 8])
    if (
        not isinstance(bloch, list)
        or len(bloch) != 2
        or not all(isinstance(size, int) and size >= 2 for size in bloch)
    ):
        raise check.error(
            f"{kind}.bloch_grid", "bloch_grid needs two integers >= 2"
        )
    try:
        return SweepPlan(
            model=model,
            chain=chain,
            protocol=protocol,
            initial=initial,
            x_axis=_grid_axis(check, section.get("x", x_default), f"{kind}.x"),
            y_axis=_grid_axis(check, section.get("y", y_default), f"{kind}.y"),
            realizations=check.integer(
                section, "realizations", kind, DEFAULT_REALIZATIONS, minimum=1
            ),
            master_seed=check.integer(section, "master_seed", kind, 0, minimum=0),
            observable=Observable(
                ObservableKind(
                    check.choice(
                        observable,
                        "kind",
                        f"{kind}.observable",
                        [item.value for item in ObservableKind],
                        default_kind,
                    )
                ),
                check.integer(observable, "site", f"{kind}.observable", 1, minimum=1),
            ),
            ell=check.integer(section, "ell", kind, 100, minimum=1),
            bloch_grid=tuple(bloch),
            bloch_measure=BlochMeasure(
                check.choice(
                    section,
                    "bloch_measure",
                    kind,
                    [measure.value for measure in BlochMeasure],
                    "sphere",
                )
            ),
        )
    except ValueError as err:
        if isinstance(err, ConfigError):
            raise
        raise check.error(kind, str(err)) from err


def _trace(check: _Checker, section, path) -> TraceRequest:
    return TraceRequest(
        n_periods=check.integer(section, "n_periods", path, 200, minimum=1),
        sampling=SamplingMode(
            check.choice(
                section,
                "sampling",
                path,
                [mode.value for mode in SamplingMode],
                SamplingMode.EVERY_PERIOD.value,
            )
        ),
        realizations=check.integer(
            section, "realizations", path, DEFAULT_REALIZATIONS, minimum=1
        ),
        master_seed=check.integer(section, "master_seed", path, 0, minimum=0),
    )


def _protocol_run(check: _Checker, document) -> ProtocolRequest:
    section = check.mapping(document.get("protocol"), "protocol", PROTOCOL_KEYS)
    scan = section.get("n_sites_scan") or []
    if not isinstance(scan, list) or not all(
        isinstance(size, int) and size >= 1 for size in scan
    ):
        raise check.error(
            "protocol.n_sites_scan", "n_sites_scan must be a list of chain lengths"
        )
    return ProtocolRequest(
        trace=_trace(check, section, "protocol"),
        control_j_mean=check.number(section, "control_j_mean", "protocol", 0.0),
        n_sites_scan=tuple(scan),
    )


def _output(check: _Checker, document) -> OutputSettings:
    section = check.mapping(document.get("output"), "output", OUTPUT_KEYS)
    directory = section.get(
        "directory", environ.get(OUTPUT_ENV_VAR, DEFAULT_OUTPUT_DIR)
    )
    name = section.get("name", document.get("kind", "dtcsim"))
    if not isinstance(name, str) or not re.fullmatch(r"[\w.-]+", name):
        raise check.error("output.name", "name must be a plain file name stem")
    return OutputSettings(
        directory=Path(str(directory)),
        format=check.choice(section, "format", "output", FORMATS, "both"),
        name=name,
    )


def validate_run_config(
    document: Dict[str, Any], lines: Optional[LineMap] = None
) -> RunConfig:
    """Validate a configuration document and build the run objects

    Args:
        document (dict): parsed document
        lines (LineMap, optional): key lines for error messages

    Returns:
        RunConfig: the validated configuration
    """
    logger = logging.getLogger(__name__ + ".validate_run_config")
    check = _Checker(lines or LineMap())
    document = check.mapping(document, "", TOP_KEYS)
    kind = check.choice(document, "kind", "", KINDS)
    extra = [name for name in KINDS if name in document and name != kind]
    if extra:
        raise check.error(extra[0], f"section {extra[0]!r} does not match kind {kind!r}")
    model = Model(
        check.choice(document, "model", "", ("ising", "heisenberg"), "ising")
    )
    output = _output(check, document)
    if kind == "verify":
        section = check.mapping(document.get("verify"), "verify", {"seed"})
        logger.debug("Validated verify config")
        return RunConfig(
            kind=kind,
            model=model,
            output=output,
            document=document,
            verify_seed=check.integer(section, "seed", "verify", 0, minimum=0),
        )
    chain = _chain(check, document)
    protocol = _drive(check, document)
    initial = _initial(check, document, chain.n_sites)
    config = RunConfig(
        kind=kind,
        model=model,
        output=output,
        document=document,
        chain=chain,
        protocol=protocol,
        initial=initial,
    )
    if kind in ("sweep", "purity"):
        config = replace(
            config,
            plan=_plan(check, document, kind, model, chain, protocol, initial),
        )
    elif kind == "trace":
        section = check.mapping(document.get("trace"), "trace", TRACE_KEYS)
        config = replace(config, trace=_trace(check, section, "trace"))
    else:
        config = replace(config, protocol_run=_protocol_run(check, document))
    logger.debug("Validated %s config for %s sites", kind, chain.n_sites)
    return config


def apply_overrides(
    document: Dict[str, Any],
    grid: Optional[str] = None,
    realizations: Optional[int] = None,
    seed: Optional[int] = None,
    out: Optional[str] = None,
    fmt: Optional[str] = None,
) -> Dict[str, Any]:
    """Return a copy of the document with command line overrides applied

    Args:
        document (dict): parsed document
        grid (str, optional): "AxB", A x points and B y points
        realizations (int, optional): realizations per cell or trace
        seed (int, optional): master seed, or verification seed
        out (str, optional): output directory
        fmt (str, optional): csv, svg or both

    Returns:
        dict: the updated document
    """
    document = copy.deepcopy(document)
    kind = document.get("kind")
    section = document.setdefault(kind, {}) if kind in KINDS else {}
    if section is None:
        section = document[kind] = {}
    if grid is not None:
        match = re.fullmatch(r"\s*(\d+)\s*[xX]\s*(\d+)\s*", grid)
        if match is None or kind not in ("sweep", "purity"):
            raise ConfigError(
                f"--grid {grid!r} needs the form AxB and a sweep or purity run",
                "grid",
                section=kind if kind in ("sweep", "purity") else "sweep",
            )
        for key, num in zip(("x", "y"), match.groups()):
            axis = section.get(key)
            if not isinstance(axis, dict) or "start" not in axis:
                raise ConfigError(
                    "--grid needs axes given as start/stop/num",
                    f"{kind}.{key}",
                )
            axis["num"] = int(num)
    if realizations is not None and kind != "verify":
        section["realizations"] = realizations
    if seed is not None:
        section["seed" if kind == "verify" else "master_seed"] = seed
    output = document.setdefault("output", {}) or {}
    document["output"] = output
    if out is not None:
        output["directory"] = str(out)
    if fmt is not None:
        output["format"] = fmt
    return document
