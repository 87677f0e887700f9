"""Test chains, disorder draws and protocol descriptions"""

import math

import numpy as np
import pytest

from qdot.dtcsim.spinmodel import (
    MAX_SITES,
    Axis,
    ChainSpec,
    DriveProtocol,
    Geometry,
    GlobalRotation,
    ProductBloch,
    ProductZ,
    ProtocolError,
    ProtocolEvent,
    SetFloquetAxis,
    derive_seed,
    estimate_pulse_error,
    neel_state,
    sample_disorder,
)


@pytest.mark.parametrize(
    "geometry, n_sites, expected",
    [
        (Geometry.OPEN, 1, ()),
        (Geometry.OPEN, 3, ((1, 2), (2, 3))),
        (Geometry.LOOP, 4, ((1, 2), (2, 3), (3, 4), (4, 1))),
    ],
)
def test_bonds(geometry, n_sites, expected):
    spec = ChainSpec(n_sites, geometry)
    assert spec.bonds == expected, f"Bonds of {spec} are {spec.bonds}"
    assert spec.n_bonds == len(expected)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"n_sites": 0},
        {"n_sites": MAX_SITES + 1},
        {"n_sites": 2, "geometry": "loop"},
        {"n_sites": 4, "j_width": -0.1},
        {"n_sites": 4, "field_width": (0.0, -1.0, 0.0)},
        {"n_sites": 4, "field_mean": (0.0, 1.0)},
    ],
)
def test_chain_rejects(kwargs):
    with pytest.raises(ValueError):
        ChainSpec(**kwargs)


@pytest.mark.parametrize("seed", [0, 1, 12345, 2**63])
def test_sample_disorder_reproducible(chain, seed):
    first = sample_disorder(chain, seed)
    second = sample_disorder(chain, seed)
    assert first == second, f"Seed {seed} gave two different draws"
    assert first.seed == seed


def test_sample_disorder_bounds():
    spec = ChainSpec(
        6,
        Geometry.LOOP,
        j_mean=1.0,
        j_width=0.2,
        field_mean=(0.0, 0.0, 2.0),
        field_width=(0.1, 0.0, 0.5),
    )
    real = sample_disorder(spec, 11)
    assert len(real.couplings) == spec.n_bonds
    assert all(0.8 <= value <= 1.2 for value in real.couplings)
    fields = real.field_array
    assert fields.shape == (6, 3)
    assert (abs(fields[:, 0]) <= 0.1).all()
    assert (fields[:, 1] == 0.0).all()
    assert ((fields[:, 2] >= 1.5) & (fields[:, 2] <= 2.5)).all()


def test_sample_disorder_seeds_differ(chain):
    draws = {sample_disorder(chain, seed).fields for seed in range(10)}
    assert len(draws) == 10, "Different seeds gave identical fields"


def test_sample_disorder_seed_pairs_differ(chain):
    for seed in range(100):
        first = sample_disorder(chain, seed).field_array
        second = sample_disorder(chain, seed + 1).field_array
        assert (first != second).any(), f"Seeds {seed} and {seed + 1} agree"


def test_sample_disorder_mean_converges():
    spec = ChainSpec(
        4,
        j_mean=0.6,
        j_width=0.2,
        field_mean=(0.0, 0.0, 0.05),
        field_width=(0.1, 0.0, 0.3),
    )
    draws = [sample_disorder(spec, seed) for seed in range(10_000)]
    couplings = np.array([draw.couplings for draw in draws]).ravel()
    # uniform on [m - w, m + w] has standard deviation w / sqrt(3)
    stderr = 0.2 / math.sqrt(3) / math.sqrt(couplings.size)
    assert abs(couplings.mean() - 0.6) < 4 * stderr
    fields = np.array([draw.field_array for draw in draws]).reshape(-1, 3)
    stderr = np.array(spec.field_width) / math.sqrt(3 * len(fields))
    offsets = np.abs(fields.mean(axis=0) - np.array(spec.field_mean))
    assert (offsets <= 4 * stderr).all(), f"Field means off by {offsets}"


def test_derive_seed():
    seeds = {
        derive_seed(master, cell, realization)
        for master in range(3)
        for cell in range(5)
        for realization in range(1, 6)
    }
    assert len(seeds) == 75, "Derived seeds collide"
    assert derive_seed(4, 2, 1) == derive_seed(4, 2, 1)


def test_shifted_keeps_fields(realization):
    shifted = realization.shifted(math.pi)
    assert shifted.fields == realization.fields
    assert shifted.seed == realization.seed
    for before, after in zip(realization.couplings, shifted.couplings):
        assert after == pytest.approx(before + math.pi)


def test_estimate_pulse_error():
    assert estimate_pulse_error(1.0, 1.0) == pytest.approx(
        2 * math.log(2) / math.pi
    )
    assert estimate_pulse_error(0.0, 3.0) == 0.0
    ratio = estimate_pulse_error(2.0, 10.0) / estimate_pulse_error(1.0, 10.0)
    assert ratio == pytest.approx(4.0), f"Error does not scale as tau**2: {ratio}"
    with pytest.raises(ValueError):
        estimate_pulse_error(1.0, 0.0)


@pytest.mark.parametrize("angle", [-math.pi, 3.5, -4.0])
def test_rotation_angle_range(angle):
    with pytest.raises(ProtocolError):
        GlobalRotation(Axis.X, angle)


def test_rotation_accepts_pi():
    assert GlobalRotation("y", math.pi).axis is Axis.Y


@pytest.mark.parametrize("count", [-2, 1, 3])
def test_odd_h2i_count(count):
    with pytest.raises(ProtocolError):
        DriveProtocol(h2i_count=count)


@pytest.mark.parametrize(
    "n_sites, expected", [(1, (1,)), (4, (1, 3)), (5, (1, 3, 5))]
)
def test_default_targets(n_sites, expected):
    assert DriveProtocol().targets_for(n_sites) == expected


def test_explicit_targets():
    protocol = DriveProtocol(h2i_targets=(3, 1, 3))
    assert protocol.h2i_targets == (1, 3)
    assert protocol.targets_for(4) == (1, 3)
    with pytest.raises(ProtocolError):
        protocol.targets_for(2)


def test_events_by_period():
    first = ProtocolEvent(2, GlobalRotation(Axis.Y, math.pi / 2))
    second = ProtocolEvent(2, SetFloquetAxis(Axis.Y))
    third = ProtocolEvent(5, SetFloquetAxis(Axis.Z))
    protocol = DriveProtocol(events=(first, second, third))
    grouped = protocol.events_by_period()
    assert grouped == {
        2: (first.action, second.action),
        5: (third.action,),
    }


def test_events_must_be_ordered():
    with pytest.raises(ProtocolError):
        DriveProtocol(
            events=(
                ProtocolEvent(5, SetFloquetAxis(Axis.Z)),
                ProtocolEvent(2, SetFloquetAxis(Axis.Y)),
            )
        )
    with pytest.raises(ProtocolError):
        ProtocolEvent(-1, SetFloquetAxis(Axis.Y))


def test_product_z():
    assert ProductZ("UdUd").spins == "udud"
    assert ProductZ("ud").resized(5).spins == "ududu"
    assert neel_state(4) == ProductZ("udud")
    with pytest.raises(ValueError):
        ProductZ("uxd")
    with pytest.raises(ValueError):
        ProductZ("")
    with pytest.raises(ValueError):
        ProductZ("udu").site_amplitudes(4)


@pytest.mark.parametrize("theta, chi", [(-0.1, 0.0), (2.0, 0.0), (0.3, 7.0)])
def test_product_bloch_ranges(theta, chi):
    with pytest.raises(ValueError):
        ProductBloch(theta, chi)


def test_product_bloch_any_length():
    state = ProductBloch(math.pi / 4, 0.0)
    assert state.resized(7) is state
    assert len(state.site_amplitudes(3)) == 3
