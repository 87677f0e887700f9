import math

import pytest

from qdot.dtcsim.common import OUTPUT_ENV_VAR
from qdot.dtcsim.spinmodel import (
    ChainSpec,
    DriveProtocol,
    Model,
    ProductZ,
    sample_disorder,
)
from qdot.dtcsim.sweep import GridAxis, Observable, SweepPlan

WEAK_FIELDS = {"field_mean": (0.0, 0.0, 0.05), "field_width": (0.0, 0.0, 0.05)}
TIME_CRYSTAL_J = 0.6
HALF_PI = math.pi / 2


def sweep_text(observable="time_average_z", site=1, realizations=2, ell=3):
    """Small sweep config with a 2 x 2 grid"""
    return f"""kind: sweep
model: ising
chain:
  n_sites: 4
  j_mean: 0.6
  field_mean: [0.0, 0.0, 0.05]
  field_width: [0.0, 0.0, 0.05]
drive:
  floquet_error: 0.1
initial:
  product_z: udud
sweep:
  x: {{name: j_mean, start: 0.0, stop: 0.6, num: 2}}
  y: {{name: epsilon, start: 0.0, stop: 0.1, num: 2}}
  realizations: {realizations}
  master_seed: 3
  observable: {{kind: {observable}, site: {site}}}
  ell: {ell}
"""


@pytest.fixture(scope="session", name="chain")
def _fix_chain():
    return ChainSpec(4, j_mean=TIME_CRYSTAL_J, **WEAK_FIELDS)


@pytest.fixture(scope="session", name="realization")
def _fix_realization(chain):
    return sample_disorder(chain, 7)


@pytest.fixture(name="neel")
def _fix_neel():
    return ProductZ("udud")


@pytest.fixture(name="small_plan")
def _fix_small_plan(chain, neel):
    return SweepPlan(
        model=Model.ISING,
        chain=chain,
        protocol=DriveProtocol(floquet_error=0.1),
        initial=neel,
        x_axis=GridAxis("j_mean", (0.0, TIME_CRYSTAL_J)),
        y_axis=GridAxis("epsilon", (0.0, 0.1)),
        realizations=2,
        master_seed=3,
        observable=Observable(),
        ell=3,
    )


@pytest.fixture(autouse=True, scope="function", name="clean_env")
def _fix_clean_env(monkeypatch):
    monkeypatch.delenv(OUTPUT_ENV_VAR, raising=False)
