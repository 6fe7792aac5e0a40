"""Method-of-lines integration of the coupled metric/potential flow

    d/dt g = -2 Ric + 2 a1 du x du,      d/dt u = Lap u + b1 |du|^2 + b2 u,

the (a1, 0, b1, b2) family; (2, 0, 0, 0) is the harmonic-map coupled flow
and u == 0 reduces to Ricci flow.  Integration is ungauged explicit
(euler or rk4) on near-flat torus data at desk scale; loss of positive
definiteness aborts the run with a diagnostic snapshot.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .mesh import Grid, MetricField, SPDError, grad_stack, integrate
from .tensor import CurvatureBundle, curvature, hessian, norm_sq, sm_tensor

DIAG_COLUMNS = ("t", "max_rm", "max_grad_u_sq", "min_Sg", "vol",
                "int_hess_sq_cum", "int_lap_u_sq", "int_sic_sq", "int_sic_p4",
                "int_rm_sq", "int_sm_sq")


@dataclass(frozen=True)
class FlowParams:
    alpha1: float
    alpha2: float = 0.0
    beta1: float = 0.0
    beta2: float = 0.0
    reduced: bool = False

    def astuple(self):
        return (self.alpha1, self.alpha2, self.beta1, self.beta2)


def reduce_parameters(params: FlowParams) -> FlowParams:
    """(a1, a2, b1, b2) -> (a1, 0, b1 - a2, b2); idempotent."""
    if params.reduced or params.alpha2 == 0.0:
        return replace(params, alpha2=0.0, reduced=True)
    return FlowParams(params.alpha1, 0.0, params.beta1 - params.alpha2,
                      params.beta2, reduced=True)


def is_regular(params: FlowParams, c0: float) -> bool:
    """Parameter condition guaranteeing a gradient bound for the potential.

    (i)  b2 <= 0 and a1 >= b1^2;
    (ii) b2 >  0 and b2/c0 + b1^2 >= a1 > b1^2,
    with c0 = max |grad u_0|^2 of the initial data.
    """
    if not c0 > 0:
        raise ValueError("c0 must be positive")
    p = reduce_parameters(params)
    a1, b1, b2 = p.alpha1, p.beta1, p.beta2
    if b2 <= 0:
        return a1 >= b1 * b1
    return (b2 / c0 + b1 * b1 >= a1) and (a1 > b1 * b1)


@dataclass(frozen=True)
class FlowState:
    grid: Grid
    metric: MetricField
    u: np.ndarray
    t: float = 0.0
    step_count: int = 0


class BlowUpError(RuntimeError):
    def __init__(self, msg, state=None):
        super().__init__(msg)
        self.state = state


def flow_rhs(state: FlowState, params: FlowParams,
             curv: CurvatureBundle | None = None):
    """Right-hand sides (dg/dt, du/dt); params must be reduced."""
    if not params.reduced:
        raise ValueError("flow_rhs requires reduced parameters")
    grid = state.grid
    cb = curv if curv is not None else curvature(state.metric)
    du = grad_stack(state.u, grid)
    gdot = -2.0 * cb.ric + 2.0 * params.alpha1 * np.einsum("i...,j...->ij...", du, du)
    H = hessian(state.u, grid, cb.gamma)
    lap = np.einsum("ij...,ij...->...", state.metric.inv, H)
    gsq = np.einsum("ij...,i...,j...->...", state.metric.inv, du, du)
    udot = lap + params.beta1 * gsq + params.beta2 * state.u
    return gdot, udot


def rhf_rhs(state: FlowState):
    """Harmonic-map coupled flow right-hand side; same code path, gated at (2,0,0,0)."""
    return flow_rhs(state, FlowParams(2.0, 0.0, 0.0, 0.0, reduced=True))


def ricci_flow_rhs(state: FlowState):
    """Pure Ricci flow right-hand side: the u terms vanish at (0,0,0,0) with u = 0."""
    return flow_rhs(state, FlowParams(0.0, 0.0, 0.0, 0.0, reduced=True))


def cfl_dt(state: FlowState, safety: float = 0.8,
           curv: CurvatureBundle | None = None) -> float:
    """Parabolic step bound dt = safety * min h^2 / (4 n max(1, |Rm|, |Hess u|))."""
    if not 0 < safety <= 1:
        raise ValueError("safety must lie in (0, 1]")
    grid = state.grid
    cb = curv if curv is not None else curvature(state.metric)
    H = hessian(state.u, grid, cb.gamma)
    mrm = float(np.sqrt(np.max(norm_sq(cb.rm4, state.metric, 0, 4))))
    mh = float(np.sqrt(np.max(norm_sq(H, state.metric, 0, 2))))
    hmin = min(grid.spacing)
    return safety * hmin * hmin / (4.0 * grid.n * max(1.0, mrm, mh))


def _advance(state: FlowState, gdot, udot, dt, check=True) -> FlowState:
    m = MetricField(state.grid, state.metric.values + dt * gdot, check=check)
    return FlowState(state.grid, m, state.u + dt * udot,
                     state.t + dt, state.step_count + 1)


def step(state: FlowState, params: FlowParams, dt: float,
         method: str = "rk4") -> FlowState:
    """One explicit step; SPD is re-checked on the accepted state."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    p = reduce_parameters(params)
    try:
        if method == "euler":
            gdot, udot = flow_rhs(state, p)
            return _advance(state, gdot, udot, dt)
        if method == "rk4":
            k1g, k1u = flow_rhs(state, p)
            s2 = _advance(state, k1g, k1u, 0.5 * dt, check=False)
            k2g, k2u = flow_rhs(s2, p)
            s3 = _advance(state, k2g, k2u, 0.5 * dt, check=False)
            k3g, k3u = flow_rhs(s3, p)
            s4 = _advance(state, k3g, k3u, dt, check=False)
            k4g, k4u = flow_rhs(s4, p)
            gdot = (k1g + 2 * k2g + 2 * k3g + k4g) / 6.0
            udot = (k1u + 2 * k2u + 2 * k3u + k4u) / 6.0
            return _advance(state, gdot, udot, dt)
    except SPDError as e:
        raise BlowUpError(f"metric lost positive definiteness at t={state.t + dt:.6g}: {e}",
                          state=state) from e
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class Schedule:
    t_end: float
    dt: float | None = None          # None: fixed dt from the initial CFL bound
    safety: float = 0.8
    cadence: int = 1                 # snapshot every ``cadence`` steps
    method: str = "rk4"
    diagnostics: bool = True


@dataclass
class Trajectory:
    grid: Grid
    params: FlowParams
    dt: float
    times: list = field(default_factory=list)
    metrics: list = field(default_factory=list)      # MetricField snapshots
    potentials: list = field(default_factory=list)   # u snapshots
    diagnostics: dict = field(default_factory=dict)  # column -> list, per step
    aborted: str | None = None

    def state(self, k: int) -> FlowState:
        return FlowState(self.grid, self.metrics[k], self.potentials[k],
                         self.times[k], k)

    @property
    def nsnapshots(self) -> int:
        return len(self.times)

    def diag_rows(self):
        cols = [self.diagnostics[c] for c in DIAG_COLUMNS]
        return list(zip(*cols))


def _diagnose(state: FlowState, params: FlowParams, cum_hess: float, dt: float):
    grid = state.grid
    cb = curvature(state.metric)
    du = grad_stack(state.u, grid)
    H = hessian(state.u, grid, cb.gamma)
    lap = np.einsum("ij...,ij...->...", state.metric.inv, H)
    gsq = np.einsum("ij...,i...,j...->...", state.metric.inv, du, du)
    sic = cb.ric - params.alpha1 * np.einsum("i...,j...->ij...", du, du)
    S = cb.scalar - params.alpha1 * gsq
    sm = sm_tensor(cb.rm4, du, state.metric.values, params.alpha1)
    sic_sq = norm_sq(sic, state.metric, 0, 2)
    hess_sq = norm_sq(H, state.metric, 0, 2)
    row = {
        "t": state.t,
        "max_rm": float(np.sqrt(np.max(norm_sq(cb.rm4, state.metric, 0, 4)))),
        "max_grad_u_sq": float(np.max(gsq)),
        "min_Sg": float(np.min(S)),
        "vol": integrate(np.ones(grid.shape), state.metric),
        "int_hess_sq_cum": cum_hess + dt * integrate(hess_sq, state.metric),
        "int_lap_u_sq": integrate(lap * lap, state.metric),
        "int_sic_sq": integrate(sic_sq, state.metric),
        "int_sic_p4": integrate(sic_sq * sic_sq, state.metric),
        "int_rm_sq": integrate(norm_sq(cb.rm4, state.metric, 0, 4), state.metric),
        "int_sm_sq": integrate(norm_sq(sm, state.metric, 0, 4), state.metric),
    }
    return row


def rm_lp_series(traj: Trajectory, p: float):
    """Time series of int |Rm|^p dV from the recorded snapshots.

    Monitored against the local L^p bound shape (functionals.lp_curvature_bound)
    with user-supplied constants; never asserted.
    """
    out = []
    for k in range(traj.nsnapshots):
        s = traj.state(k)
        cb = curvature(s.metric)
        rm_sq = norm_sq(cb.rm4, s.metric, 0, 4)
        out.append((s.t, integrate(rm_sq ** (p / 2.0), s.metric)))
    return out


def run(initial_state: FlowState, params: FlowParams, schedule: Schedule) -> Trajectory:
    """Integrate to t_end, recording snapshots and per-step diagnostics."""
    p = reduce_parameters(params)
    du0 = grad_stack(initial_state.u, initial_state.grid)
    c0 = float(np.max(np.einsum("ij...,i...,j...->...",
                                initial_state.metric.inv, du0, du0)))
    if c0 > 0 and not is_regular(p, c0):
        warnings.warn("flow parameters are not regular; gradient bound not guaranteed",
                      RuntimeWarning)
    dt = schedule.dt if schedule.dt is not None else cfl_dt(initial_state, schedule.safety)
    nsteps = max(1, int(round(schedule.t_end / dt)))
    traj = Trajectory(initial_state.grid, p, dt)
    state = initial_state
    cum_hess = 0.0

    def record(s: FlowState):
        traj.times.append(s.t)
        traj.metrics.append(s.metric)
        traj.potentials.append(s.u)

    record(state)
    if schedule.diagnostics:
        row = _diagnose(state, p, cum_hess, 0.0)
        cum_hess = row["int_hess_sq_cum"]
        for k, v in row.items():
            traj.diagnostics.setdefault(k, []).append(v)
    for k in range(nsteps):
        try:
            state = step(state, p, dt, schedule.method)
        except BlowUpError as e:
            traj.aborted = str(e)
            record(e.state)
            break
        if (k + 1) % schedule.cadence == 0 or k == nsteps - 1:
            record(state)
        if schedule.diagnostics:
            row = _diagnose(state, p, cum_hess, dt)
            cum_hess = row["int_hess_sq_cum"]
            for kk, v in row.items():
                traj.diagnostics.setdefault(kk, []).append(v)
    return traj
