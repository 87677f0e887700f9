"""Result tables, figures and provenance written by the command line tool

Tables go to RFC-4180 CSV with full float precision, figures to SVG. Every
file gets a <file>.yml provenance sidecar; SVG files also carry the block
in their metadata. CSV content depends on the configuration only.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import arrow
import matplotlib
import numpy as np
import pandas as pd
import yaml
from matplotlib.figure import Figure

from . import TOOL_NAME, __version__
from .common import OutputSettings
from .floquet import SampleTag
from .spinmodel import Axis
from .sweep import EnsembleTrace, PhaseDiagram, plain

DIAGRAM_COLUMNS = ["x_param", "y_param", "value", "stderr", "n_realizations"]
LINE_TERMINATOR = "\r\n"
SVG_SALT = TOOL_NAME
CUT_ROWS = 4
AXIS_LABELS = {
    "j_mean": "J T",
    "epsilon": "epsilon",
    "j_width": "dJ T",
    "field_width_x": "dh_x T",
    "field_width_y": "dh_y T",
    "field_width_z": "dh_z T",
    "field_mean_z": "h_z T",
    "h2i_count": "H2I pulses per period",
    "h2i_error": "H2I error",
    "n_sites": "N",
}


@dataclass
class ResultBundle:
    """Tables and figures of one run with their provenance

    Args:
        name (str): file name stem
        tables (dict): table name -> DataFrame
        figures (dict): figure name -> Figure
        provenance (dict): block echoed into every file
    """

    name: str
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)
    figures: Dict[str, Figure] = field(default_factory=dict)
    provenance: Dict[str, Any] = field(default_factory=dict)


def make_provenance(
    document: Dict[str, Any], master_seed: int, **extra: Any
) -> Dict[str, Any]:
    """Provenance block of a run

    Args:
        document (dict): the validated configuration, echoed in full
        master_seed (int): seed of the run
        extra: further plain-data entries

    Returns:
        dict: the block
    """
    provenance = {
        "tool": TOOL_NAME,
        "version": __version__,
        "created": arrow.utcnow().isoformat(),
        "master_seed": master_seed,
        "config": plain(document),
    }
    provenance.update(plain(extra))
    return provenance


def diagram_frame(diagram: PhaseDiagram) -> pd.DataFrame:
    """One row per cell, rows of the grid outer and columns inner

    Args:
        diagram (PhaseDiagram): the diagram

    Returns:
        pd.DataFrame: x_param, y_param, value, stderr, n_realizations
    """
    x_grid, y_grid = np.meshgrid(diagram.x_values, diagram.y_values)
    return pd.DataFrame(
        {
            "x_param": x_grid.ravel(),
            "y_param": y_grid.ravel(),
            "value": diagram.values.ravel(),
            "stderr": diagram.stderr.ravel(),
            "n_realizations": diagram.n_realizations.ravel(),
        },
        columns=DIAGRAM_COLUMNS,
    )


def trace_frame(trace: EnsembleTrace) -> pd.DataFrame:
    """One row per recorded sample of a disorder-averaged trace

    Columns s<k>_<axis> hold the averaged spin components of site k,
    err_s<k>_<axis> their standard errors and s1_length the end-spin
    vector length.

    Args:
        trace (EnsembleTrace): the averaged trace

    Returns:
        pd.DataFrame: the samples
    """
    record = trace.record
    frame = pd.DataFrame(
        {
            "period": [time.period for time in record.times],
            "tag": [time.tag.value for time in record.times],
            "step": [time.step for time in record.times],
            "time": [time.time for time in record.times],
        }
    )
    columns = {}
    for site in range(1, record.n_sites + 1):
        for axis in Axis:
            columns[f"s{site}_{axis.value}"] = record.spin_vectors[
                :, site - 1, axis.index
            ]
    for site in range(1, record.n_sites + 1):
        for axis in Axis:
            columns[f"err_s{site}_{axis.value}"] = trace.stderr[
                :, site - 1, axis.index
            ]
    columns["s1_length"] = record.end_site_length
    return pd.concat([frame, pd.DataFrame(columns)], axis=1)


def purity_frame(traces: Dict[str, EnsembleTrace]) -> pd.DataFrame:
    """End-spin vector length after every pulse, one column per run

    Args:
        traces (dict): label -> averaged trace, all over the same periods

    Returns:
        pd.DataFrame: period plus one column per label
    """
    frame = None
    for label, trace in traces.items():
        post = trace.record.select(SampleTag.POST_PULSE)
        column = pd.DataFrame(
            {
                "period": [time.period for time in post.times],
                label: post.end_site_length,
            }
        )
        frame = column if frame is None else frame.merge(column, on="period")
    if frame is None:
        raise ValueError("No traces to tabulate")
    return frame


def color_scale(diagram: PhaseDiagram) -> Tuple[float, float]:
    """Data-normalized color bounds, the observable range if nothing is valid"""
    valid = diagram.values[~np.isnan(diagram.values)]
    if valid.size == 0:
        return diagram.plan.observable.value_range
    low, high = float(valid.min()), float(valid.max())
    if low == high:
        low, high = low - 0.5, high + 0.5
    return low, high


def _extent(values: Sequence[float]) -> Tuple[float, float]:
    if len(values) == 1:
        return values[0] - 0.5, values[0] + 0.5
    step = (values[-1] - values[0]) / (len(values) - 1)
    return values[0] - step / 2, values[-1] + step / 2


def heatmap_figure(
    diagram: PhaseDiagram, title: str, scale: Tuple[float, float]
) -> Figure:
    """Heatmap of a phase diagram with a colorbar

    Args:
        diagram (PhaseDiagram): the diagram
        title (str): figure title
        scale (tuple): (vmin, vmax)

    Returns:
        Figure: the figure
    """
    plan = diagram.plan
    fig = Figure(figsize=(7, 5))
    ax = fig.add_subplot()
    image = ax.imshow(
        diagram.values,
        origin="lower",
        aspect="auto",
        extent=(*_extent(diagram.x_values), *_extent(diagram.y_values)),
        vmin=scale[0],
        vmax=scale[1],
        interpolation="nearest",
    )
    fig.colorbar(image, ax=ax, label=str(plan.observable.kind))
    ax.set_title(title)
    ax.set_xlabel(AXIS_LABELS[plan.x_axis.name])
    ax.set_ylabel(AXIS_LABELS[plan.y_axis.name])
    fig.tight_layout()
    return fig


def cut_figure(diagram: PhaseDiagram, title: str) -> Figure:
    """One line per grid row, value against the x parameter"""
    plan = diagram.plan
    fig = Figure(figsize=(7, 5))
    ax = fig.add_subplot()
    for row, y_value in enumerate(diagram.y_values):
        ax.errorbar(
            diagram.x_values,
            diagram.values[row],
            yerr=diagram.stderr[row],
            marker="o",
            capsize=2,
            label=f"{AXIS_LABELS[plan.y_axis.name]} = {y_value:.4g}",
        )
    ax.set_title(title)
    ax.set_xlabel(AXIS_LABELS[plan.x_axis.name])
    ax.set_ylabel(str(plan.observable.kind))
    ax.legend()
    fig.tight_layout()
    return fig


def trace_figure(trace: EnsembleTrace, title: str, site: int = 1) -> Figure:
    """Averaged spin components and vector length of one site over time"""
    record = trace.record
    times = [time.time for time in record.times]
    fig = Figure(figsize=(8, 5))
    ax = fig.add_subplot()
    for axis in Axis:
        ax.plot(
            times,
            record.spin_vectors[:, site - 1, axis.index],
            marker=".",
            linewidth=0.8,
            label=f"<s{site}_{axis.value}>",
        )
    ax.plot(
        times,
        record.site_lengths(site),
        color="black",
        linewidth=1.0,
        label=f"|s{site}|",
    )
    ax.set_ylim(-1.05, 1.05)
    ax.set_title(title)
    ax.set_xlabel("t / T")
    ax.legend(loc="lower left")
    fig.tight_layout()
    return fig


def purity_figure(frame: pd.DataFrame, title: str) -> Figure:
    """End-spin vector length per period, one line per column"""
    fig = Figure(figsize=(8, 5))
    ax = fig.add_subplot()
    for label in frame.columns.drop("period"):
        ax.plot(frame["period"], frame[label], linewidth=1.0, label=label)
    ax.set_ylim(0.0, 1.05)
    ax.set_title(title)
    ax.set_xlabel("period")
    ax.set_ylabel("end-spin vector length")
    ax.legend()
    fig.tight_layout()
    return fig


def diagram_bundle(
    diagram: PhaseDiagram,
    name: str,
    document: Dict[str, Any],
    title: Optional[str] = None,
) -> ResultBundle:
    """Table, heatmap and, for few rows, line cuts of a phase diagram"""
    scale = color_scale(diagram)
    title = title or name
    figures = {"heatmap": heatmap_figure(diagram, title, scale)}
    if len(diagram.y_values) <= CUT_ROWS:
        figures["cuts"] = cut_figure(diagram, title)
    return ResultBundle(
        name=name,
        tables={"diagram": diagram_frame(diagram)},
        figures=figures,
        provenance=make_provenance(
            document,
            diagram.plan.master_seed,
            color_scale={"vmin": scale[0], "vmax": scale[1]},
            sweep=diagram.provenance,
            failures=[str(failure) for failure in diagram.failures],
        ),
    )


def _yaml_text(data: Dict[str, Any]) -> str:
    return yaml.safe_dump(data, sort_keys=False, default_flow_style=False)


def _write_sidecar(path: Path, provenance: Dict[str, Any]) -> Path:
    sidecar = path.with_name(path.name + ".yml")
    sidecar.write_text(_yaml_text(provenance), encoding="utf-8")
    return sidecar


def _file_name(name: str, part: str, single: bool, suffix: str) -> str:
    return f"{name}{suffix}" if single else f"{name}_{part}{suffix}"


def write_bundle(bundle: ResultBundle, settings: OutputSettings) -> List[Path]:
    """Write tables, figures, sidecars and run_config.yml

    Args:
        bundle (ResultBundle): what to write
        settings (OutputSettings): directory and format

    Returns:
        list: paths written
    """
    logger = logging.getLogger(__name__ + ".write_bundle")
    directory = Path(settings.directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    if settings.wants_csv:
        for part, frame in bundle.tables.items():
            path = directory / _file_name(
                bundle.name, part, len(bundle.tables) == 1, ".csv"
            )
            frame.to_csv(path, index=False, lineterminator=LINE_TERMINATOR)
            written.extend([path, _write_sidecar(path, bundle.provenance)])
    if settings.wants_svg:
        metadata = {"Description": _yaml_text(bundle.provenance), "Date": None}
        with matplotlib.rc_context({"svg.hashsalt": SVG_SALT}):
            for part, fig in bundle.figures.items():
                path = directory / _file_name(
                    bundle.name, part, len(bundle.figures) == 1, ".svg"
                )
                fig.savefig(path, format="svg", metadata=metadata)
                written.extend([path, _write_sidecar(path, bundle.provenance)])
    config_path = directory / "run_config.yml"
    config_path.write_text(
        _yaml_text(bundle.provenance["config"]), encoding="utf-8"
    )
    written.append(config_path)
    for path in written:
        logger.info("Wrote %s", path)
    return written
