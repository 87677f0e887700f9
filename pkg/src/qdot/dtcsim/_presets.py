"""Named built-in configurations

Every preset is a plain configuration document and goes through the same
validation as a file given with --config. Grids and realization counts are
desk-scale; --grid and --realizations scale them up.
"""

import copy
import math
from typing import Dict, List, Tuple

ISING_WEAK = {"field_mean": [0.0, 0.0, 0.05], "field_width": [0.0, 0.0, 0.05]}
ISING_STRONG = {"field_mean": [0.0, 0.0, 0.5], "field_width": [0.0, 0.0, 0.5]}
GAAS = {"field_mean": [0.0, 0.0, 2.0e4], "field_width": [0.0, 0.0, 50.0]}
ALL_AXES_NOISE = {"field_mean": [0.0, 0.0, 0.0], "field_width": [10.0, 10.0, 10.0]}

DESK_GRID = 20
DESK_REALIZATIONS = 20


def _chain(n_sites=4, geometry="open", j_mean=0.0, j_width=0.0, fields=None):
    chain = {
        "n_sites": n_sites,
        "geometry": geometry,
        "j_mean": j_mean,
        "j_width": j_width,
    }
    chain.update(copy.deepcopy(fields or ISING_WEAK))
    return chain


def _axes(j_stop, eps_stop=0.5):
    return {
        "x": {"name": "j_mean", "start": 0.0, "stop": j_stop, "num": DESK_GRID},
        "y": {"name": "epsilon", "start": 0.0, "stop": eps_stop, "num": DESK_GRID},
    }


def _sweep(model, chain, drive, initial, j_stop, observable="time_average_z"):
    sweep = _axes(j_stop)
    sweep.update(
        {
            "realizations": DESK_REALIZATIONS,
            "master_seed": 0,
            "observable": {"kind": observable, "site": 1},
            "ell": 100,
        }
    )
    return {
        "kind": "sweep",
        "model": model,
        "chain": chain,
        "drive": drive,
        "initial": initial,
        "sweep": sweep,
    }


def _trace(model, chain, drive, initial, sampling="stroboscopic_2t"):
    return {
        "kind": "trace",
        "model": model,
        "chain": chain,
        "drive": drive,
        "initial": initial,
        "trace": {
            "n_periods": 200,
            "sampling": sampling,
            "realizations": DESK_REALIZATIONS,
            "master_seed": 0,
        },
    }


def _h2i(count, axis="z"):
    return {"floquet_axis": "x", "h2i_count": count, "h2i_axis": axis}


NEEL = {"product_z": "udud"}
UP_X = {"bloch": {"theta": math.pi / 4, "chi": 0.0}}

ROTATION_EVENTS = [
    {"period": 66, "rotate": {"axis": "y", "angle": math.pi / 2}},
    {"period": 66, "floquet_axis": "y"},
    {"period": 66, "h2i_axis": "x"},
    {"period": 132, "rotate": {"axis": "z", "angle": math.pi / 2}},
    {"period": 132, "floquet_axis": "z"},
    {"period": 132, "h2i_axis": "y"},
]


def _rotation_protocol(n_sites_scan=()):
    document = {
        "kind": "protocol",
        "model": "heisenberg",
        "chain": _chain(j_mean=math.pi, fields=ALL_AXES_NOISE),
        "drive": {
            "floquet_axis": "x",
            "floquet_error": 0.05,
            "h2i_count": 128,
            "h2i_axis": "z",
            "h2i_error": 0.05,
            "h2i_error_sense": "same",
            "events": copy.deepcopy(ROTATION_EVENTS),
        },
        "initial": {"product_z": "uuuu"},
        "protocol": {
            "n_periods": 200,
            "sampling": "every_period",
            "realizations": DESK_REALIZATIONS,
            "master_seed": 0,
            "control_j_mean": 0.0,
        },
    }
    if n_sites_scan:
        document["protocol"]["n_sites_scan"] = list(n_sites_scan)
    return document


def _purity(j_axis, eps_stop=0.5):
    return {
        "kind": "purity",
        "model": "heisenberg",
        "chain": _chain(fields=GAAS),
        "drive": _h2i(128),
        "purity": {
            "x": {"name": "epsilon", "start": 0.0, "stop": eps_stop, "num": 11},
            "y": j_axis,
            "realizations": 10,
            "master_seed": 0,
            "observable": {"kind": "bloch_purity", "site": 1},
            "ell": 100,
            "bloch_grid": [8, 8],
            "bloch_measure": "angles",
        },
    }


def _build() -> Dict[str, Tuple[str, dict]]:
    presets = {
        "fig2a": (
            "Ising N=4 open chain, h=dh=0.05, <<s1z>> over (J, eps)",
            _sweep("ising", _chain(), {}, NEEL, math.pi),
        ),
        "fig2b": (
            "Ising N=4 open chain, h=1, dh=0.05, <<s1z>> over (J, eps)",
            _sweep(
                "ising",
                _chain(
                    fields={
                        "field_mean": [0.0, 0.0, 1.0],
                        "field_width": [0.0, 0.0, 0.05],
                    }
                ),
                {},
                NEEL,
                math.pi,
            ),
        ),
        "fig2c": (
            "Ising four-site loop (square plaquette), h=dh=0.05",
            _sweep("ising", _chain(geometry="loop"), {}, NEEL, math.pi),
        ),
    }
    for suffix, (j_mean, epsilon, label) in zip(
        "abc",
        ((0.6, 0.1, "time crystal"), (1.5, 0.2, "thermal"), (0.05, 0.2, "MBL")),
    ):
        presets[f"fig3{suffix}"] = (
            f"Ising N=4 stroboscopic trace at the {label} point"
            f" J={j_mean}, eps={epsilon}",
            _trace("ising", _chain(j_mean=j_mean), {"floquet_error": epsilon}, NEEL),
        )
    for suffix, fields in zip("ab", (ISING_WEAK, ISING_STRONG)):
        presets[f"fig4{suffix}"] = (
            "Ising N=4 with the coupling switched off, eps=0.1,"
            f" h=dh={fields['field_mean'][2]}",
            _trace("ising", _chain(fields=fields), {"floquet_error": 0.1}, NEEL),
        )
    for suffix, count in zip("abcde", (0, 2, 16, 64, 128)):
        presets[f"fig6{suffix}"] = (
            f"Heisenberg N=4, {count} H2I pulses about z, h=dh=0.05",
            _sweep("heisenberg", _chain(), _h2i(count), NEEL, 2 * math.pi),
        )
        presets[f"fig7{suffix}"] = (
            f"Heisenberg N=4, {count} H2I pulses about z, GaAs fields",
            _sweep(
                "heisenberg", _chain(fields=GAAS), _h2i(count), NEEL, 2 * math.pi
            ),
        )
    for suffix, spins in zip("abcd", ("uddu", "uudd", "uuud", "uuuu")):
        presets[f"fig8{suffix}"] = (
            f"Heisenberg N=4, 16 H2I pulses, GaAs fields, initial {spins}",
            _sweep(
                "heisenberg",
                _chain(fields=GAAS),
                _h2i(16),
                {"product_z": spins},
                2 * math.pi,
            ),
        )
    presets["fig9"] = (
        "Axis-switching rotations at periods 66 and 132, J=pi against J=0",
        _rotation_protocol(),
    )
    presets["fig9c"] = (
        "Axis-switching rotations, end-spin purity for N = 1..8",
        _rotation_protocol(n_sites_scan=range(1, 9)),
    )
    coherence_drives = (
        {"floquet_pulse": False},
        {"floquet_axis": "x"},
        _h2i(128, "z"),
        _h2i(128, "x"),
    )
    coherence_labels = (
        "no pulses",
        "Floquet pulse about x",
        "128 H2I pulses about z",
        "128 H2I pulses about x",
    )
    for suffix, drive, label in zip("abcd", coherence_drives, coherence_labels):
        presets[f"fig10{suffix}"] = (
            f"Heisenberg coherence <<s1x>> from |+x>^4, {label}, GaAs fields",
            _sweep(
                "heisenberg",
                _chain(fields=GAAS),
                drive,
                UP_X,
                math.pi,
                observable="time_average_x",
            ),
        )
    presets["fig11"] = (
        "Bloch-averaged end-spin purity over (J, eps), 128 H2I pulses",
        _purity({"name": "j_mean", "start": 0.0, "stop": math.pi, "num": 11}),
    )
    presets["fig11b"] = (
        "Bloch-averaged purity against eps at J=0 and J=0.8",
        _purity({"name": "j_mean", "values": [0.0, 0.8]}),
    )
    presets["fig12a"] = (
        "Ising N=4 at J=0.6, eps=0.1, every segment boundary",
        _trace(
            "ising",
            _chain(j_mean=0.6),
            {"floquet_error": 0.1},
            NEEL,
            sampling="intra_period",
        ),
    )
    presets["fig12b"] = (
        "Heisenberg N=4, 64 H2I pulses, GaAs fields, J=0.6, eps=0.1,"
        " every segment boundary",
        _trace(
            "heisenberg",
            _chain(j_mean=0.6, fields=GAAS),
            dict(_h2i(64), floquet_error=0.1),
            NEEL,
            sampling="intra_period",
        ),
    )
    for suffix, n_sites in zip("abcde", range(2, 7)):
        presets[f"fig13{suffix}"] = (
            f"Heisenberg N={n_sites} Neel state, 128 H2I pulses, GaAs fields",
            _sweep(
                "heisenberg",
                _chain(n_sites=n_sites, fields=GAAS),
                _h2i(128),
                {"product_z": "ud" * (n_sites // 2) + "u" * (n_sites % 2)},
                2 * math.pi,
            ),
        )
    for suffix, j_width in zip("abcd", (0.1, 0.5, 1.0, 5.0)):
        presets[f"fig14{suffix}"] = (
            f"Heisenberg N=4 |uuuu>, 128 H2I pulses, charge noise dJ={j_width}",
            _sweep(
                "heisenberg",
                _chain(j_width=j_width, fields=GAAS),
                _h2i(128),
                {"product_z": "uuuu"},
                2 * math.pi,
            ),
        )
    return presets


PRESETS = _build()
ALIASES = {
    "fig12": "fig12a",
    "fig13": "fig13c",
    "fig14": "fig14a",
}


def preset_names() -> List[str]:
    """Names of all presets, aliases included"""
    return sorted([*PRESETS, *ALIASES])


def describe_presets() -> List[Tuple[str, str, str]]:
    """(name, kind, description) for every preset"""
    rows = []
    for name in preset_names():
        description, document = PRESETS[ALIASES.get(name, name)]
        if name in ALIASES:
            description = f"same as {ALIASES[name]}"
        rows.append((name, document["kind"], description))
    return rows


def get_preset(name: str) -> dict:
    """Copy of a preset document, named after the preset

    Args:
        name (str): preset name or alias

    Returns:
        dict: the configuration document
    """
    key = ALIASES.get(name, name)
    if key not in PRESETS:
        raise KeyError(
            f"Unknown preset {name!r}, run 'dtcsim presets' for the list"
        )
    document = copy.deepcopy(PRESETS[key][1])
    document.setdefault("output", {})["name"] = name
    return document
