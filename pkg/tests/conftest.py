import json
from pathlib import Path

import numpy as np
import pytest

from rlab.flow import FlowParams, FlowState, Schedule, run
from rlab.instances import verification_initial_data
from rlab.mesh import build_grid

MANIFEST_PATH = Path(__file__).parent / "manifest.json"

RHF = FlowParams(2.0)
GENERAL = FlowParams(1.0, 0.0, 0.5, -0.3)

# coupled refinement family: dt scales like h^2
LEVELS = ((16, 2e-3), (32, 5e-4), (64, 1.25e-4))
T_END = 0.016
T_EVAL = 0.012


@pytest.fixture(scope="session")
def manifest():
    return json.loads(MANIFEST_PATH.read_text())


def make_verification_run(res, dt, params, t_end=T_END, diagnostics=False):
    grid = build_grid("torus", 2, [res, res], [2 * np.pi] * 2)
    metric, u0 = verification_initial_data(grid)
    sched = Schedule(t_end=t_end, dt=dt, cadence=1, diagnostics=diagnostics)
    return run(FlowState(grid, metric, u0), params, sched)


def eval_index(traj):
    return int(round(T_EVAL / traj.dt))


@pytest.fixture(scope="session")
def rhf_runs():
    return {res: make_verification_run(res, dt, RHF) for res, dt in LEVELS}


@pytest.fixture(scope="session")
def general_runs():
    return {res: make_verification_run(res, dt, GENERAL) for res, dt in LEVELS}


@pytest.fixture(scope="session")
def rhf_run_16(rhf_runs):
    return rhf_runs[16]
