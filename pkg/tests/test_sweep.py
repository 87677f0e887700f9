"""Test grids, dispatch and disorder-averaged sweeps"""

import math
from dataclasses import replace

import numpy as np
import pytest

from qdot.dtcsim._presets import get_preset
from qdot.dtcsim.common import validate_run_config
from qdot.dtcsim.floquet import SampleTag, SamplingMode
from qdot.dtcsim.spinmodel import (
    Axis,
    ChainSpec,
    DriveProtocol,
    Model,
    ProductBloch,
    ProductZ,
)
from qdot.dtcsim.sweep import (
    CellFailure,
    GridAxis,
    MissingCellsError,
    Observable,
    ObservableKind,
    PhaseDiagram,
    SweepDispatcher,
    SweepPlan,
    apply_parameter,
    area_fraction,
    evaluate_unit,
    h2i_saturation_curve,
    plain,
    run_sweep,
    run_trajectory_ensemble,
    trajectory_unit,
    unit_bytes,
)


def test_linspace():
    axis = GridAxis.linspace("j_mean", 0.0, math.pi, 5)
    assert len(axis) == 5
    assert axis.values[0] == 0.0
    assert axis.values[-1] == pytest.approx(math.pi)


@pytest.mark.parametrize(
    "name, values",
    [
        ("j_mean", (0.0, 0.5, 0.2)),
        ("epsilon", (0.1, 0.1)),
        ("temperature", (0.0, 1.0)),
        ("epsilon", ()),
    ],
)
def test_bad_axes(name, values):
    with pytest.raises(ValueError):
        GridAxis(name, values)


def test_integer_axes():
    axis = GridAxis("h2i_count", (0.0, 2.0, 16.0))
    assert axis.values == (0, 2, 16)
    assert all(isinstance(value, int) for value in axis.values)


def test_descending_axis():
    assert GridAxis("epsilon", (0.5, 0.2, 0.0)).values == (0.5, 0.2, 0.0)


@pytest.mark.parametrize(
    "name, value, check",
    [
        ("j_mean", 1.2, lambda c, p: c.j_mean == 1.2),
        ("j_width", 0.3, lambda c, p: c.j_width == 0.3),
        ("field_width_x", 2.0, lambda c, p: c.field_width[0] == 2.0),
        ("field_mean_z", 5.0, lambda c, p: c.field_mean[2] == 5.0),
        ("epsilon", 0.2, lambda c, p: p.floquet_error == 0.2),
        ("h2i_error", 0.01, lambda c, p: p.h2i_error == 0.01),
        ("h2i_count", 16, lambda c, p: p.h2i_count == 16),
    ],
)
def test_apply_parameter(chain, neel, name, value, check):
    new_chain, protocol, initial = apply_parameter(
        chain, DriveProtocol(), neel, name, value
    )
    assert check(new_chain, protocol), f"{name} was not set to {value}"
    assert initial == neel


def test_apply_n_sites(chain):
    protocol = DriveProtocol(h2i_targets=(1, 3, 5))
    new_chain, new_protocol, initial = apply_parameter(
        replace(chain, n_sites=6), protocol, ProductZ("uudd"), "n_sites", 3
    )
    assert new_chain.n_sites == 3
    assert new_protocol.h2i_targets == (1, 3)
    assert initial == ProductZ("uud")
    with pytest.raises(ValueError):
        apply_parameter(chain, protocol, ProductZ("u"), "volume", 1.0)


def test_plan_validation(small_plan):
    assert small_plan.shape == (2, 2)
    assert small_plan.n_cells == 4
    assert small_plan.n_periods == 6
    assert list(small_plan.units())[:3] == [(0, 1), (0, 2), (1, 1)]
    assert small_plan.cell_position(3) == (1, 1)
    with pytest.raises(ValueError):
        replace(small_plan, y_axis=GridAxis("j_mean", (0.1,)))
    with pytest.raises(ValueError):
        replace(small_plan, realizations=0)


def test_configure(small_plan):
    chain, protocol, _ = small_plan.configure(1)
    assert chain.j_mean == pytest.approx(0.6)
    assert protocol.floquet_error == 0.0
    chain, protocol, _ = small_plan.configure(2)
    assert chain.j_mean == 0.0
    assert protocol.floquet_error == pytest.approx(0.1)


def test_evaluate_unit_reproducible(small_plan):
    first = evaluate_unit(small_plan, 3, 2)
    second = evaluate_unit(small_plan, 3, 2)
    assert first == second
    assert -1.0 <= first <= 1.0


def test_run_sweep(small_plan):
    diagram = run_sweep(small_plan)
    assert diagram.values.shape == (2, 2)
    assert (diagram.n_realizations == 2).all()
    assert not diagram.failures
    assert np.allclose(diagram.values[0], 1.0, atol=1e-8), (
        f"Perfect pulses should return the Neel state, got {diagram.values[0]}"
    )
    assert (np.abs(diagram.values) <= 1.0).all()
    assert diagram.provenance["master_seed"] == 3
    assert diagram.cell(0.6, 0.1) == (diagram.values[1, 1], diagram.stderr[1, 1])


def test_sweep_is_deterministic(small_plan):
    first = run_sweep(small_plan)
    second = run_sweep(small_plan)
    assert np.array_equal(first.values, second.values)
    assert np.array_equal(first.stderr, second.stderr)


def test_worker_count_invariance(small_plan):
    serial = run_sweep(small_plan, workers=1)
    parallel = run_sweep(small_plan, workers=2)
    assert np.array_equal(serial.values, parallel.values)
    assert np.array_equal(serial.stderr, parallel.stderr)


def test_seed_changes_result(small_plan):
    first = run_sweep(small_plan)
    other = run_sweep(replace(small_plan, master_seed=4))
    assert not np.array_equal(first.values[1], other.values[1])


def test_failed_cells_are_missing(chain, neel):
    plan = SweepPlan(
        model=Model.ISING,
        chain=chain,
        protocol=DriveProtocol(),
        initial=neel,
        x_axis=GridAxis("n_sites", (2, 4)),
        y_axis=GridAxis("epsilon", (0.0,)),
        realizations=2,
        observable=Observable(ObservableKind.TIME_AVERAGE_Z, site=3),
        ell=2,
    )
    diagram = run_sweep(plan)
    assert np.isnan(diagram.values[0, 0])
    assert diagram.values[0, 1] == pytest.approx(1.0, abs=1e-8)
    assert diagram.missing_cells == [0]
    assert len(diagram.failures) == 2
    assert all(isinstance(failure, CellFailure) for failure in diagram.failures)
    assert diagram.n_realizations[0, 0] == 0
    assert "ValueError" in str(MissingCellsError(diagram.failures))


def test_mean_end_purity(neel):
    plan = SweepPlan(
        model=Model.ISING,
        chain=ChainSpec(4),
        protocol=DriveProtocol(),
        initial=neel,
        x_axis=GridAxis("j_mean", (0.0,)),
        y_axis=GridAxis("epsilon", (0.0,)),
        realizations=2,
        observable=Observable(ObservableKind.MEAN_END_PURITY),
        ell=2,
    )
    diagram = run_sweep(plan)
    assert diagram.values[0, 0] == pytest.approx(1.0)
    assert Observable(ObservableKind.MEAN_END_PURITY).value_range == (0.0, 1.0)


def test_time_average_x(chain):
    plan = SweepPlan(
        model=Model.HEISENBERG,
        chain=replace(chain, j_mean=0.0, field_mean=(0.0, 0.0, 0.0), field_width=(0.0, 0.0, 0.0)),
        protocol=DriveProtocol(floquet_pulse=False),
        initial=ProductBloch(math.pi / 4, 0.0),
        x_axis=GridAxis("j_mean", (0.0,)),
        y_axis=GridAxis("epsilon", (0.0,)),
        realizations=1,
        observable=Observable(ObservableKind.TIME_AVERAGE_X),
        ell=2,
    )
    assert run_sweep(plan).values[0, 0] == pytest.approx(1.0)


def test_area_fraction(small_plan):
    diagram = PhaseDiagram(
        plan=small_plan,
        values=np.array([[0.95, 0.5], [np.nan, 0.99]]),
        stderr=np.zeros((2, 2)),
        n_realizations=np.full((2, 2), 2),
    )
    assert area_fraction(diagram) == pytest.approx(2 / 3)
    assert area_fraction(diagram, threshold=0.96) == pytest.approx(1 / 3)


def test_saturation_curve_checks(small_plan):
    with pytest.raises(ValueError):
        h2i_saturation_curve(small_plan, [0, 3])
    with pytest.raises(ValueError):
        h2i_saturation_curve(small_plan, [4, 2])
    sweeping = replace(small_plan, x_axis=GridAxis("h2i_count", (0, 2)))
    with pytest.raises(ValueError):
        h2i_saturation_curve(sweeping, [0, 2])


def test_saturation_curve(small_plan):
    curve = h2i_saturation_curve(
        replace(small_plan, model=Model.HEISENBERG, realizations=1), [0, 2]
    )
    assert sorted(curve) == [0, 2]
    assert all(0.0 <= value <= 1.0 for value in curve.values())


def test_dispatcher():
    dispatcher = SweepDispatcher(workers=1, n_sites=4)
    assert list(dispatcher.map(pow, [2, 3], [2, 2])) == [4, 9]
    assert dispatcher.count == 2
    assert dispatcher.mem_frac > 0
    with pytest.raises(ValueError):
        SweepDispatcher(workers=0)


def test_unit_bytes():
    assert unit_bytes(4) == 12 * 16 * 256
    assert unit_bytes(5) == 4 * unit_bytes(4)


def test_ensemble_without_disorder(neel):
    spec = ChainSpec(4, j_mean=0.6)
    trace = run_trajectory_ensemble(
        Model.ISING,
        spec,
        DriveProtocol(floquet_error=0.1),
        neel,
        4,
        SamplingMode.EVERY_PERIOD,
        realizations=3,
    )
    assert trace.realizations == 3
    assert trace.record.spin_vectors.shape == (9, 4, 3)
    assert np.allclose(trace.stderr, 0.0, atol=1e-7)
    assert trace.record.times[0].period == 0


def test_ensemble_single_run(chain, neel):
    trace = run_trajectory_ensemble(
        Model.ISING, chain, DriveProtocol(), neel, 4, realizations=1
    )
    assert np.isnan(trace.stderr).all()


def test_plain():
    data = plain({"axis": Axis.X, "values": (np.float64(0.5), 1)})
    assert data == {"axis": "x", "values": [0.5, 1]}
    described = plain(GridAxis("epsilon", (0.1,)))
    assert described == {"type": "GridAxis", "name": "epsilon", "values": [0.1]}


def test_ensemble_stderr_matches_sample_std(chain, neel):
    realizations = 5
    trace = run_trajectory_ensemble(
        Model.ISING,
        chain,
        DriveProtocol(floquet_error=0.02),
        neel,
        6,
        SamplingMode.EVERY_PERIOD,
        realizations=realizations,
        master_seed=11,
    )
    runs = np.stack(
        [
            trajectory_unit(
                Model.ISING,
                chain,
                DriveProtocol(floquet_error=0.02),
                neel,
                6,
                SamplingMode.EVERY_PERIOD,
                11,
                index,
            ).spin_vectors
            for index in range(1, realizations + 1)
        ]
    )
    expected = runs.std(axis=0, ddof=1) / math.sqrt(realizations)
    assert np.isfinite(trace.stderr).all()
    assert (trace.stderr >= 0.0).all()
    assert np.allclose(trace.stderr, expected, atol=1e-12)
    assert np.allclose(trace.record.spin_vectors, runs.mean(axis=0), atol=1e-12)


GAAS_FIELDS = {"field_mean": (0.0, 0.0, 2.0e4), "field_width": (0.0, 0.0, 50.0)}


def h2i_plan(chain, neel, count, j_values, eps_values, realizations=10):
    """Heisenberg diagram with count H2I pulses about z"""
    return SweepPlan(
        model=Model.HEISENBERG,
        chain=chain,
        protocol=DriveProtocol(h2i_count=count),
        initial=neel,
        x_axis=GridAxis("j_mean", tuple(j_values)),
        y_axis=GridAxis("epsilon", tuple(eps_values)),
        realizations=realizations,
        master_seed=0,
    )


def test_ising_phase_cells(small_plan):
    plan = replace(
        small_plan,
        x_axis=GridAxis("j_mean", (0.05, 0.6, math.pi - 0.05)),
        y_axis=GridAxis("epsilon", (0.1, 0.2)),
        realizations=20,
        ell=100,
    )
    diagram = run_sweep(plan)
    crystal, _ = diagram.cell(0.6, 0.1)
    assert crystal > 0.9, f"Time crystal cell gave {crystal}"
    for j_mean in (0.05, math.pi - 0.05):
        localized, _ = diagram.cell(j_mean, 0.2)
        assert localized < 0.3, f"MBL cell at J={j_mean} gave {localized}"


def test_h2i_pulses_are_needed(chain, neel):
    j_values, eps_values = (0.3, 0.6, 1.0), (0.05, 0.1, 0.2)
    without = run_sweep(h2i_plan(chain, neel, 0, j_values, eps_values))
    assert (np.abs(without.values) < 0.5).all(), f"n=0 gave {without.values}"
    with_pulses = run_sweep(h2i_plan(chain, neel, 128, j_values, eps_values))
    crystal, _ = with_pulses.cell(0.6, 0.1)
    assert crystal > 0.9, f"n=128 time crystal cell gave {crystal}"


@pytest.mark.parametrize("count", [128, 256])
def test_gaas_robust_region(neel, count):
    spec = ChainSpec(4, **GAAS_FIELDS)
    diagram = run_sweep(h2i_plan(spec, neel, count, (1.2, 2.0), (0.05,)))
    assert (diagram.values > 0.9).all(), f"n={count} gave {diagram.values}"


def test_gaas_decoupled_point(neel):
    # exp(-i pi/2 s^z s^z) factorizes, so the chain acts like J = 0
    spec = ChainSpec(4, **GAAS_FIELDS)
    diagram = run_sweep(h2i_plan(spec, neel, 128, (math.pi / 2,), (0.05,)))
    value, _ = diagram.cell(math.pi / 2, 0.05)
    assert value < 0.3, f"J=pi/2 gave {value}"


def test_ising_period_doubling(chain, neel):
    trace = run_trajectory_ensemble(
        Model.ISING,
        chain,
        DriveProtocol(floquet_error=0.1),
        neel,
        200,
        SamplingMode.EVERY_PERIOD,
        realizations=20,
    )
    post = trace.record.select(SampleTag.POST_PULSE).spin_vectors[:, 0, 2]
    assert len(post) == 201
    assert (np.abs(post) > 0.8).all(), f"|<s1z>| fell to {np.abs(post).min()}"
    signs = np.sign(post)
    assert (signs[1:] == -signs[:-1]).all(), "<s1z> does not alternate"


def rotation_lengths(config, chain, protocol, initial, realizations=30):
    """End-spin length after every pulse of the axis-switching run"""
    trace = run_trajectory_ensemble(
        config.model,
        chain,
        protocol,
        initial,
        config.protocol_run.trace.n_periods,
        SamplingMode.EVERY_PERIOD,
        realizations=realizations,
    )
    return trace.record.select(SampleTag.POST_PULSE).end_site_length


def test_rotation_protocol_keeps_end_spin():
    config = validate_run_config(get_preset("fig9"))
    coupled = rotation_lengths(
        config, config.chain, config.protocol, config.initial
    )
    control = rotation_lengths(
        config,
        replace(config.chain, j_mean=0.0),
        config.protocol,
        config.initial,
    )
    assert len(coupled) == 201
    margin = coupled[-1] - control[-1]
    assert margin >= 0.3, (
        f"J=pi ended at {coupled[-1]:.3f}, J=0 at {control[-1]:.3f}"
    )
    single, protocol, initial = apply_parameter(
        config.chain, config.protocol, config.initial, "n_sites", 1
    )
    alone = rotation_lengths(config, single, protocol, initial)
    assert coupled[-1] > alone[-1]


def coherence_diagram(drive, j_values):
    """<<s1x>> from |+x>^4 at GaAs fields and eps = 0.1"""
    return run_sweep(
        SweepPlan(
            model=Model.HEISENBERG,
            chain=ChainSpec(4, **GAAS_FIELDS),
            protocol=drive,
            initial=ProductBloch(math.pi / 4, 0.0),
            x_axis=GridAxis("j_mean", tuple(j_values)),
            y_axis=GridAxis("epsilon", (0.1,)),
            realizations=10,
            observable=Observable(ObservableKind.TIME_AVERAGE_X),
        )
    )


def test_coherence_needs_pulses():
    free = coherence_diagram(DriveProtocol(floquet_pulse=False), (0.0,))
    echoed = coherence_diagram(DriveProtocol(), (0.0,))
    free_value, _ = free.cell(0.0, 0.1)
    echoed_value, _ = echoed.cell(0.0, 0.1)
    assert abs(free_value) < 0.2, f"Free precession kept {free_value}"
    assert echoed_value > 0.35, f"Floquet pulses kept only {echoed_value}"


def test_coherence_with_x_pulses():
    diagram = coherence_diagram(
        DriveProtocol(h2i_count=128, h2i_axis=Axis.X), (0.0, 1.0)
    )
    uncoupled, _ = diagram.cell(0.0, 0.1)
    coupled, _ = diagram.cell(1.0, 0.1)
    # x pulses on the end spin refocus its z field exactly
    assert uncoupled == pytest.approx(1.0, abs=1e-8)
    assert coupled < uncoupled
