"""Residual verification of the evolution and structure identities.

Every identity is registered as Q and RHS callables over a per-snapshot
``Frame`` cache.  For heat-operator identities the residual is

    (d/dt Q by centered snapshot differencing) - (rough Laplacian of Q) - RHS,

with the time derivative taken componentwise at fixed coordinates and the
Laplacian/RHS evaluated at the middle snapshot.  Identities marked
``time_only`` compare d/dt Q against an RHS that already contains any
Laplacian.  Each identity also carries a mutation (sign-flipped RHS) used
as a negative control: the mutated residual must stay O(1) under
refinement, guarding against vacuously-zero tests.

Registry contents: the coupled-flow evolution equations at (2,0,0,0)
("A.*"), their generalized-parameter versions ("C.*"), the evolution of the
coupled scalar/Ricci quantities ("3.11"/"3.12"), the nine static relations
between the weighted-connection curvature and the coupled curvature
("5.7".."5.15"), and the two-trajectory difference identities
("6.50"/"6.51"/"6.53").
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .flow import FlowParams, FlowState, Trajectory
from .mesh import MetricField, grad_stack, integrate
from .tensor import (cov_d, curvature, hessian, lower_rm, max_norm, norm_sq,
                     raise_index, riemann_13, rough_laplacian, sm_tensor,
                     weighted_christoffel)


class Frame:
    """Cached geometric quantities of one flow snapshot."""

    def __init__(self, state: FlowState, params: FlowParams):
        self.state = state
        self.grid = state.grid
        self.metric = state.metric
        self.g = state.metric.values
        self.ginv = state.metric.inv
        self.u = state.u
        self.params = params

    @cached_property
    def cb(self):
        return curvature(self.metric)

    @property
    def gamma(self):
        return self.cb.gamma

    @property
    def rm4(self):
        return self.cb.rm4

    @property
    def rm13(self):
        return self.cb.rm13

    @property
    def ric(self):
        return self.cb.ric

    @property
    def scalar(self):
        return self.cb.scalar

    @cached_property
    def ric_up(self):       # Ric^{pq}
        return raise_index(raise_index(self.ric, self.metric, 0), self.metric, 1)

    @cached_property
    def ric_mixed(self):    # Ric_i{}^p
        return raise_index(self.ric, self.metric, 1)

    @cached_property
    def du(self):
        return grad_stack(self.u, self.grid)

    @cached_property
    def du_up(self):
        return np.einsum("ij...,j...->i...", self.ginv, self.du)

    @cached_property
    def hess(self):
        return hessian(self.u, self.grid, self.gamma)

    @cached_property
    def hess_mixed(self):   # H_i{}^p
        return raise_index(self.hess, self.metric, 1)

    @cached_property
    def hess_up(self):
        return raise_index(self.hess_mixed, self.metric, 0)

    @cached_property
    def d3u(self):          # nabla_a H_{ij}
        return cov_d(self.hess, self.grid, self.gamma, 0, 2)

    @cached_property
    def lap_u(self):
        return np.einsum("ij...,ij...->...", self.ginv, self.hess)

    @cached_property
    def grad_sq(self):
        return np.einsum("ij...,i...,j...->...", self.ginv, self.du, self.du)

    @cached_property
    def sic(self):
        return self.ric - self.params.alpha1 * np.einsum("i...,j...->ij...",
                                                         self.du, self.du)

    @cached_property
    def sic_mixed(self):
        return raise_index(self.sic, self.metric, 1)

    @cached_property
    def sic_up(self):
        return raise_index(self.sic_mixed, self.metric, 0)

    @cached_property
    def S(self):
        return self.scalar - self.params.alpha1 * self.grad_sq

    @cached_property
    def sm(self):
        return sm_tensor(self.rm4, self.du, self.g, self.params.alpha1)

    @cached_property
    def grad_ric(self):     # nabla_a R_{ij}
        return cov_d(self.ric, self.grid, self.gamma, 0, 2)

    @cached_property
    def grad_rm13(self):    # nabla_a R^l_{ijk}
        return cov_d(self.rm13, self.grid, self.gamma, 1, 3)

    @cached_property
    def ln_sqrt_det(self):
        return np.log(self.metric.sqrt_det)


# --------------------------------------------------------------------------
# right-hand sides

def _b_tensor(f: Frame):
    """B_{ijkl} = -g^{pr} g^{qs} R_{ipjq} R_{krls}."""
    up = raise_index(raise_index(f.rm4, f.metric, 1), f.metric, 3)  # R_i{}^r{}_j{}^s
    return -np.einsum("irjs...,krls...->ijkl...", up, f.rm4)


def rhs_ric(f: Frame):
    a1 = f.params.alpha1
    out = -2.0 * np.einsum("ip...,jp...->ij...", f.ric, f.ric_mixed)
    out += 2.0 * np.einsum("pijq...,pq...->ij...", f.rm4, f.ric_up)
    out -= 2.0 * a1 * np.einsum("pijq...,p...,q...->ij...", f.rm4, f.du_up, f.du_up)
    out += 2.0 * a1 * f.lap_u * f.hess
    out -= 2.0 * a1 * np.einsum("ik...,jk...->ij...", f.hess, f.hess_mixed)
    return out


def rhs_gamma(f: Frame):
    a1 = f.params.alpha1
    D = f.grad_ric
    term = (-D
            - np.moveaxis(D, [0, 1, 2], [1, 0, 2])
            + np.moveaxis(D, [0, 1, 2], [2, 0, 1])
            + 2.0 * a1 * np.einsum("ij...,l...->ijl...", f.hess, f.du))
    return np.einsum("kl...,ijl...->kij...", f.ginv, term)


def rhs_du(f: Frame):
    # Bochner commutator term is flow-independent; the b-terms come from
    # differentiating the potential equation.
    b1, b2 = f.params.beta1, f.params.beta2
    out = -np.einsum("ij...,j...->i...", f.ric, f.du_up)
    out += b2 * f.du + 2.0 * b1 * np.einsum("k...,ki...->i...", f.du_up, f.hess)
    return out


def rhs_hess(f: Frame):
    a1, b1, b2 = f.params.alpha1, f.params.beta1, f.params.beta2
    out = 2.0 * np.einsum("pijq...,pq...->ij...", f.rm4, f.hess_up)
    out += b2 * f.hess
    out -= np.einsum("ip...,jp...->ij...", f.ric, f.hess_mixed)
    out -= np.einsum("jp...,ip...->ij...", f.ric, f.hess_mixed)
    out -= 2.0 * a1 * f.grad_sq * f.hess
    out += 2.0 * b1 * np.einsum("k...,kij...->ij...", f.du_up, f.d3u)
    out += 2.0 * b1 * np.einsum("ik...,jk...->ij...", f.hess, f.hess_mixed)
    out += 2.0 * b1 * np.einsum("pijq...,p...,q...->ij...", f.rm4, f.du_up, f.du_up)
    return out


def rhs_rm4(f: Frame):
    a1 = f.params.alpha1
    B = _b_tensor(f)
    # B_{ijkl} - B_{ijlk} - B_{iljk} + B_{ikjl}
    out = 2.0 * (B - np.swapaxes(B, 2, 3)
                 - np.transpose(B, (0, 2, 3, 1) + tuple(range(4, B.ndim)))
                 + np.transpose(B, (0, 2, 1, 3) + tuple(range(4, B.ndim))))
    rm = f.rm4
    out -= np.einsum("ip...,pjkl...->ijkl...", f.ric_mixed, rm)
    out -= np.einsum("jp...,ipkl...->ijkl...", f.ric_mixed, rm)
    out -= np.einsum("kp...,ijpl...->ijkl...", f.ric_mixed, rm)
    out -= np.einsum("lp...,ijkp...->ijkl...", f.ric_mixed, rm)
    out += 2.0 * a1 * (np.einsum("il...,jk...->ijkl...", f.hess, f.hess)
                       - np.einsum("ik...,jl...->ijkl...", f.hess, f.hess))
    return out


def rhs_scalar(f: Frame):
    a1 = f.params.alpha1
    return (2.0 * np.einsum("ij...,ij...->...", f.ric, f.ric_up)
            + 2.0 * a1 * f.lap_u ** 2
            - 2.0 * a1 * norm_sq(f.hess, f.metric, 0, 2)
            - 4.0 * a1 * np.einsum("ij...,i...,j...->...", f.ric, f.du_up, f.du_up))


def rhs_grad_sq(f: Frame):
    a1, b1, b2 = f.params.alpha1, f.params.beta1, f.params.beta2
    hess_du_du = np.einsum("ij...,i...,j...->...", f.hess, f.du_up, f.du_up)
    return (2.0 * b2 * f.grad_sq - 2.0 * norm_sq(f.hess, f.metric, 0, 2)
            - 2.0 * a1 * f.grad_sq ** 2 + 4.0 * b1 * hess_du_du)


def rhs_S_direct(f: Frame):
    a1, b1, b2 = f.params.alpha1, f.params.beta1, f.params.beta2
    hess_du_du = np.einsum("ij...,i...,j...->...", f.hess, f.du_up, f.du_up)
    return (2.0 * norm_sq(f.sic, f.metric, 0, 2) + 2.0 * a1 * f.lap_u ** 2
            - 2.0 * a1 * b2 * f.grad_sq - 4.0 * a1 * b1 * hess_du_du)


def rhs_sic(f: Frame):
    a1, b1, b2 = f.params.alpha1, f.params.beta1, f.params.beta2
    out = 2.0 * np.einsum("kijl...,kl...->ij...", f.sm, f.sic_up)
    out -= 2.0 * np.einsum("ik...,jk...->ij...", f.sic, f.sic_mixed)
    out += 2.0 * a1 * f.lap_u * f.hess
    out -= 2.0 * a1 * b2 * np.einsum("i...,j...->ij...", f.du, f.du)
    mix = np.einsum("k...,i...,jk...->ij...", f.du_up, f.du, f.hess)
    out -= 2.0 * a1 * b1 * (mix + np.swapaxes(mix, 0, 1))
    return out


def rhs_dudu(f: Frame):
    b1, b2 = f.params.beta1, f.params.beta2
    ric_term = np.einsum("k...,ik...,j...->ij...", f.du_up, f.ric, f.du)
    out = -(ric_term + np.swapaxes(ric_term, 0, 1))
    out -= 2.0 * np.einsum("ik...,jk...->ij...", f.hess, f.hess_mixed)
    out += 2.0 * b2 * np.einsum("i...,j...->ij...", f.du, f.du)
    mix = np.einsum("k...,i...,jk...->ij...", f.du_up, f.du, f.hess)
    out += 2.0 * b1 * (mix + np.swapaxes(mix, 0, 1))
    return out


def rhs_lnvol(f: Frame):
    return -f.S


def rhs_rm13(f: Frame):
    """d/dt of the (1,3) curvature: Laplacian + raised box-RHS + metric-motion term."""
    lap = rough_laplacian(f.rm13, f.grid, f.gamma, f.metric, 1, 3)
    raised = np.einsum("lm...,ijkm...->lijk...", f.ginv, rhs_rm4(f))
    a1 = f.params.alpha1
    dginv = 2.0 * f.ric_up - 2.0 * a1 * np.einsum("l...,m...->lm...", f.du_up, f.du_up)
    motion = np.einsum("lm...,ijkm...->lijk...", dginv, f.rm4)
    return lap + raised + motion


def rhs_grad_rm13(f: Frame):
    """d/dt of nabla Rm: nabla of the d/dt identity plus connection-motion terms."""
    dA12 = cov_d(rhs_rm13(f), f.grid, f.gamma, 1, 3)     # [l,a,i,j,k]
    dtG = rhs_gamma(f)                                   # d/dt Gamma^k_{ij}
    W = f.rm13
    out = dA12
    out = out + np.einsum("lap...,pijk...->laijk...", dtG, W)
    out = out - np.einsum("pai...,lpjk...->laijk...", dtG, W)
    out = out - np.einsum("paj...,lipk...->laijk...", dtG, W)
    out = out - np.einsum("pak...,lijp...->laijk...", dtG, W)
    return out


def quantity_rm13(f: Frame):
    return f.rm13, 1, 3


# quantity extractors: (array, con, cov)
QUANTITIES = {
    "ric": lambda f: (f.ric, 0, 2),
    "gamma": lambda f: (f.gamma, 1, 2),
    "du": lambda f: (f.du, 0, 1),
    "hess": lambda f: (f.hess, 0, 2),
    "rm4": lambda f: (f.rm4, 0, 4),
    "scalar": lambda f: (f.scalar, 0, 0),
    "grad_sq": lambda f: (f.grad_sq, 0, 0),
    "S": lambda f: (f.S, 0, 0),
    "sic": lambda f: (f.sic, 0, 2),
    "dudu": lambda f: (np.einsum("i...,j...->ij...", f.du, f.du), 0, 2),
    "ln_sqrt_det": lambda f: (f.ln_sqrt_det, 0, 0),
    "rm13": quantity_rm13,
    "grad_rm13": lambda f: (f.grad_rm13, 1, 4),
}


@dataclass(frozen=True)
class Identity:
    id: str
    quantity: str
    rhs: callable
    time_only: bool = False
    family: str = "general"      # "rhf": requires (2,0,0,0)


REGISTRY = {
    "A.2": Identity("A.2", "ric", rhs_ric, family="rhf"),
    "A.3": Identity("A.3", "gamma", rhs_gamma, time_only=True, family="rhf"),
    "A.4": Identity("A.4", "du", rhs_du, family="rhf"),
    "A.5": Identity("A.5", "hess", rhs_hess, family="rhf"),
    "A.6": Identity("A.6", "rm4", rhs_rm4, family="rhf"),
    "A.7": Identity("A.7", "scalar", rhs_scalar, family="rhf"),
    "A.8": Identity("A.8", "grad_sq", rhs_grad_sq, family="rhf"),
    "A.9": Identity("A.9", "S", rhs_S_direct, family="rhf"),
    "A.10": Identity("A.10", "ln_sqrt_det", rhs_lnvol, time_only=True, family="rhf"),
    "A.12": Identity("A.12", "rm13", rhs_rm13, time_only=True, family="rhf"),
    "A.13": Identity("A.13", "grad_rm13", rhs_grad_rm13, time_only=True, family="rhf"),
    "C.3": Identity("C.3", "ric", rhs_ric),
    "C.4": Identity("C.4", "scalar", rhs_scalar),
    "C.5": Identity("C.5", "rm4", rhs_rm4),
    "C.6": Identity("C.6", "grad_sq", rhs_grad_sq),
    "C.7": Identity("C.7", "hess", rhs_hess),
    "C.8": Identity("C.8", "dudu", rhs_dudu),
    "3.11": Identity("3.11", "S", rhs_S_direct),
    "3.12": Identity("3.12", "sic", rhs_sic),
}

APPENDIX_A_IDS = ("A.2", "A.3", "A.4", "A.5", "A.6", "A.7", "A.8", "A.9", "A.10")
APPENDIX_C_IDS = ("C.3", "C.4", "C.5", "C.6", "C.7", "C.8")
LEMMA31_IDS = ("3.11", "3.12")
LEMMA52_IDS = tuple(f"5.{k}" for k in range(7, 16))
PAIR_IDS = ("6.50", "6.51", "6.53")


@dataclass(frozen=True)
class ResidualReport:
    identity: str
    t: float
    h: float
    dt: float
    max_res: float
    l2_res: float
    order: float | None = None

    def to_dict(self):
        d = {"identity": self.identity, "t": self.t, "h": self.h,
             "dt": self.dt, "max_res": self.max_res, "l2_res": self.l2_res}
        if self.order is not None:
            d["order"] = self.order
        return d


def _norms(res: np.ndarray, metric: MetricField, con: int, cov: int):
    nsq = norm_sq(res, metric, con, cov)
    return float(np.sqrt(np.max(nsq))), float(np.sqrt(integrate(nsq, metric)))


def _frames(traj: Trajectory, t_index: int):
    if not 0 < t_index < traj.nsnapshots - 1:
        raise IndexError("t_index must have both time neighbors")
    p = traj.params
    return (Frame(traj.state(t_index - 1), p),
            Frame(traj.state(t_index), p),
            Frame(traj.state(t_index + 1), p))


def residual_field(traj: Trajectory, ident: Identity, t_index: int,
                   frames=None, mutate: bool = False):
    """The pointwise residual field of one registered identity."""
    fm, f0, fp = frames if frames is not None else _frames(traj, t_index)
    q = QUANTITIES[ident.quantity]
    Qm, con, cov = q(fm)
    Qp = q(fp)[0]
    dtq = (Qp - Qm) / (fp.state.t - fm.state.t)
    rhs = ident.rhs(f0)
    if mutate:
        rhs = -rhs
    res = dtq - rhs
    if not ident.time_only:
        Q0 = q(f0)[0]
        res = res - rough_laplacian(Q0, f0.grid, f0.gamma, f0.metric, con, cov)
    return res, con, cov, f0


def box_residual(traj: Trajectory, quantity_extractor, rhs_formula,
                 t_index: int, time_only: bool = False) -> np.ndarray:
    """General heat-operator residual for a user-supplied quantity/RHS pair."""
    fm, f0, fp = _frames(traj, t_index)
    Qm, con, cov = quantity_extractor(fm)
    Qp = quantity_extractor(fp)[0]
    dtq = (Qp - Qm) / (fp.state.t - fm.state.t)
    res = dtq - rhs_formula(f0)
    if not time_only:
        Q0 = quantity_extractor(f0)[0]
        res = res - rough_laplacian(Q0, f0.grid, f0.gamma, f0.metric, con, cov)
    return res


def evaluate_identity(traj: Trajectory, ident_id: str, t_index: int,
                      frames=None, mutate: bool = False) -> ResidualReport:
    ident = REGISTRY[ident_id]
    if ident.family == "rhf":
        a = traj.params
        if (a.alpha1, a.alpha2, a.beta1, a.beta2) != (2.0, 0.0, 0.0, 0.0):
            raise ValueError(f"identity {ident_id} requires a (2,0,0,0) trajectory")
    res, con, cov, f0 = residual_field(traj, ident, t_index, frames, mutate)
    mx, l2 = _norms(res, f0.metric, con, cov)
    return ResidualReport(ident_id, f0.state.t, max(traj.grid.spacing),
                          traj.dt, mx, l2)


def _default_index(traj: Trajectory, t_index):
    if t_index is not None:
        return t_index
    return max(1, min(traj.nsnapshots - 2, (traj.nsnapshots - 1) * 3 // 4))


def verify_appendix_A(traj: Trajectory, t_index: int | None = None,
                      ids=APPENDIX_A_IDS):
    t_index = _default_index(traj, t_index)
    frames = _frames(traj, t_index)
    return [evaluate_identity(traj, i, t_index, frames) for i in ids]


def verify_appendix_C(traj: Trajectory, t_index: int | None = None,
                      ids=APPENDIX_C_IDS):
    t_index = _default_index(traj, t_index)
    frames = _frames(traj, t_index)
    return [evaluate_identity(traj, i, t_index, frames) for i in ids]


def verify_lemma_31(traj: Trajectory, t_index: int | None = None,
                    C: float = 0.0):
    # C enters the shifted quantities of the pinching machinery, not these
    # two evolution identities; accepted for interface parity.
    t_index = _default_index(traj, t_index)
    frames = _frames(traj, t_index)
    return [evaluate_identity(traj, i, t_index, frames) for i in LEMMA31_IDS]


def a11_norm_bound(traj: Trajectory, t_index: int, c_id: float):
    """Schematic bound |d/dt Rm| <= C (|nabla^2 Ric| + |Ric||Rm| + |H|^2 + |Rm||du|^2)."""
    fm, f0, fp = _frames(traj, t_index)
    dtq = (fp.rm13 - fm.rm13) / (fp.state.t - fm.state.t)
    lhs = max_norm(dtq, f0.metric, 1, 3)
    dd_ric = cov_d(f0.grad_ric, f0.grid, f0.gamma, 0, 3)
    m = f0.metric
    rmn = max_norm(f0.rm4, m, 0, 4)
    bound = (max_norm(dd_ric, m, 0, 4) + max_norm(f0.ric, m, 0, 2) * rmn
             + float(np.max(norm_sq(f0.hess, m, 0, 2)))
             + rmn * float(np.max(f0.grad_sq)))
    return lhs, c_id * bound


# --------------------------------------------------------------------------
# static weighted-curvature identities
#
# The lowered curvature of the weighted connection lacks the last-pair
# antisymmetry and pair-exchange symmetry; each relation below states an
# index-rearrangement defect.  The reference Riemann tensor entering the
# normalization is recomputed through the *same* Gamma-form pipeline as the
# weighted curvature so that every residual vanishes to rounding at
# constant u and measures genuine O(h^2) discretization content otherwise.

def _lemma52_fields(metric: MetricField, u: np.ndarray):
    grid = metric.grid
    cb = curvature(metric)
    du = grad_stack(u, grid)
    H = hessian(u, grid, cb.gamma)
    gamma_u = weighted_christoffel(cb.gamma, du, grid.n)
    rm_wy = lower_rm(riemann_13(gamma_u, grid), metric)
    rm_ref = lower_rm(riemann_13(cb.gamma, grid), metric)
    rm_l = sm_tensor(rm_ref, du, metric.values, 2.0)
    return cb, du, H, rm_wy, rm_ref, rm_l


def _pairs(g, a, b):
    """outer products a_i b_j g_{kl}-style helper: term[i,j,k,l] = a_i b_j g_kl."""
    return np.einsum("i...,j...,kl...->ijkl...", a, b, g)


def lemma52_defects(metric: MetricField, u: np.ndarray,
                    mutate: bool = False) -> dict:
    """Nine pointwise defect fields, keyed '5.7'..'5.15'.

    ``mutate`` flips the sign of each formula right side (negative control):
    the mutated defects stay O(1) under refinement.
    """
    grid = metric.grid
    g = metric.values
    cb, du, H, wy, ref, rl = _lemma52_fields(metric, u)
    sgn = -1.0 if mutate else 1.0

    def T(arr, perm):
        return np.transpose(arr, perm + tuple(range(4, arr.ndim)))

    out = {}
    # 5.7: WY - L difference
    rhs7 = (np.einsum("i...,j...,kl...->ijkl...", du, du, g)
            + np.einsum("k...,j...,il...->ijkl...", du, du, g)
            + np.einsum("jk...,il...->ijkl...", H, g)
            - np.einsum("ik...,jl...->ijkl...", H, g))
    out["5.7"] = (wy - rl) - sgn * rhs7
    # 5.8: first-pair rearrangement, beyond the Riemann part
    rhs8 = 2.0 * (np.einsum("jk...,il...->ijkl...", H, g)
                  - np.einsum("ik...,jl...->ijkl...", H, g)
                  + np.einsum("j...,k...,il...->ijkl...", du, du, g)
                  - np.einsum("i...,k...,jl...->ijkl...", du, du, g))
    out["5.8"] = (wy - T(wy, (1, 0, 2, 3))) - (ref - T(ref, (1, 0, 2, 3))) - sgn * rhs8
    # 5.9: last-pair rearrangement
    rhs9 = (np.einsum("il...,jk...->ijkl...", H, g)
            + np.einsum("jk...,il...->ijkl...", H, g)
            - np.einsum("ik...,jl...->ijkl...", H, g)
            - np.einsum("jl...,ik...->ijkl...", H, g)
            + np.einsum("i...,l...,jk...->ijkl...", du, du, g)
            + np.einsum("j...,k...,il...->ijkl...", du, du, g)
            - np.einsum("i...,k...,jl...->ijkl...", du, du, g)
            - np.einsum("j...,l...,ik...->ijkl...", du, du, g))
    out["5.9"] = (wy - T(wy, (0, 1, 3, 2))) - (ref - T(ref, (0, 1, 3, 2))) - sgn * rhs9
    # 5.10: pair exchange
    rhs10 = (np.einsum("jk...,il...->ijkl...", H, g)
             - np.einsum("li...,jk...->ijkl...", H, g)
             + np.einsum("j...,k...,il...->ijkl...", du, du, g)
             - np.einsum("l...,i...,jk...->ijkl...", du, du, g))
    out["5.10"] = (wy - T(wy, (2, 3, 0, 1))) - (ref - T(ref, (2, 3, 0, 1))) - sgn * rhs10
    # 5.11: first-pair rearrangement of the coupled curvature
    rhs11 = (np.einsum("j...,k...,il...->ijkl...", du, du, g)
             - np.einsum("i...,k...,jl...->ijkl...", du, du, g))
    out["5.11"] = (rl - T(rl, (1, 0, 2, 3))) - (ref - T(ref, (1, 0, 2, 3))) - sgn * rhs11
    # 5.12: last-pair rearrangement of the coupled curvature
    rhs12 = (np.einsum("i...,l...,jk...->ijkl...", du, du, g)
             - np.einsum("i...,k...,jl...->ijkl...", du, du, g))
    out["5.12"] = (rl - T(rl, (0, 1, 3, 2))) - (ref - T(ref, (0, 1, 3, 2))) - sgn * rhs12
    # 5.13: pair exchange of the coupled curvature
    rhs13 = (np.einsum("k...,l...,ij...->ijkl...", du, du, g)
             - np.einsum("i...,j...,kl...->ijkl...", du, du, g))
    out["5.13"] = (rl - T(rl, (2, 3, 0, 1))) - (ref - T(ref, (2, 3, 0, 1))) - sgn * rhs13
    # 5.14: half the WY rearrangement vs the coupled one
    rhs14 = (np.einsum("jk...,il...->ijkl...", H, g)
             - np.einsum("ik...,jl...->ijkl...", H, g))
    out["5.14"] = (0.5 * (wy - T(wy, (1, 0, 2, 3))) + 0.5 * (ref - T(ref, (1, 0, 2, 3)))
                   - (rl - T(rl, (1, 0, 2, 3))) - sgn * rhs14)
    # 5.15: the two traces of the weighted curvature
    ginv = metric.inv
    tr_hat = np.einsum("il...,jilk...->jk...", ginv, wy)
    tr_ric = np.einsum("il...,ijkl...->jk...", ginv, wy)
    tr_hat_ref = np.einsum("il...,jilk...->jk...", ginv, ref)
    tr_ric_ref = np.einsum("il...,ijkl...->jk...", ginv, ref)
    lap = np.einsum("ij...,ij...->...", ginv, H)
    gsq = np.einsum("ij...,i...,j...->...", ginv, du, du)
    n = grid.n
    rhs15 = ((lap + gsq) * g
             - n * (H + np.einsum("i...,j...->ij...", du, du)))
    out["5.15"] = (tr_hat - tr_ric) - (tr_hat_ref - tr_ric_ref) - sgn * rhs15
    return out


def verify_lemma_52(metric: MetricField, u: np.ndarray):
    """Reports for the nine static identities on a torus grid."""
    defects = lemma52_defects(metric, u)
    reports = []
    for key in LEMMA52_IDS:
        res = defects[key]
        cov = 2 if key == "5.15" else 4
        mx, l2 = _norms(res, metric, 0, cov)
        reports.append(ResidualReport(key, 0.0, max(metric.grid.spacing), 0.0, mx, l2))
    return reports


# --------------------------------------------------------------------------
# two-trajectory difference identities

def pair_residual(traj1: Trajectory, traj2: Trajectory, ident_id: str,
                  t_index: int, c_id: float = 1.0, mutate: bool = False):
    """Residual norms of the difference-tensor evolution identities."""
    if traj1.grid is not traj2.grid and traj1.grid != traj2.grid:
        raise ValueError("trajectories must share a grid")
    if traj1.times[t_index] != traj2.times[t_index]:
        raise ValueError("trajectories must share snapshot times")
    p = traj1.params
    f1m, f10, f1p = _frames(traj1, t_index)
    f2m, f20, f2p = _frames(traj2, t_index)
    dtt = f1p.state.t - f1m.state.t
    m = f10.metric
    if ident_id == "6.50":
        def h_of(fa, fb):
            return fa.g - fb.g
        dth = (h_of(f1p, f2p) - h_of(f1m, f2m)) / dtt
        T13 = f10.rm13 - f20.rm13
        trT = np.einsum("llij...->ij...", T13)
        w = f10.du - f20.du
        coef = 2.0 * p.alpha1
        rhs = -2.0 * trT + coef * (np.einsum("i...,j...->ij...", w, w)
                                   + np.einsum("i...,j...->ij...", w, f20.du)
                                   + np.einsum("j...,i...->ij...", w, f20.du))
        if mutate:
            rhs = -rhs
        res = dth - rhs
        mx, l2 = _norms(res, m, 0, 2)
        return ResidualReport(ident_id, f10.state.t, max(m.grid.spacing),
                              traj1.dt, mx, l2)
    if ident_id == "6.51":
        dtA = ((f1p.gamma - f2p.gamma) - (f1m.gamma - f2m.gamma)) / dtt
        UC = f10.grad_ric - f20.grad_ric              # nabla_a Ric - tilde version
        dginv = f20.metric.inv - f10.metric.inv       # tilde g^{-1} - g^{-1}
        P2 = (np.einsum("ijm...->ijm...", f20.grad_ric)
              + np.moveaxis(f20.grad_ric, [0, 1, 2], [1, 0, 2])
              - np.moveaxis(f20.grad_ric, [0, 1, 2], [2, 0, 1]))
        y = f10.hess - f20.hess
        w = f10.du - f20.du
        rhs = -np.einsum("mk...,ijm...->kij...",
                         f10.ginv, UC + np.moveaxis(UC, [0, 1, 2], [1, 0, 2])
                         - np.moveaxis(UC, [0, 1, 2], [2, 0, 1]))
        rhs += np.einsum("mk...,ijm...->kij...", dginv, P2)
        a1 = p.alpha1
        rhs += 2.0 * a1 * np.einsum("mk...,m...,ij...->kij...",
                                    f10.ginv, f10.du, y)
        rhs += 2.0 * a1 * np.einsum("mk...,m...,ij...->kij...",
                                    f10.ginv, w, f20.hess)
        rhs -= 2.0 * a1 * np.einsum("mk...,m...,ij...->kij...",
                                    dginv, f20.du, f20.hess)
        if mutate:
            rhs = -rhs
        res = dtA - rhs
        mx, l2 = _norms(res, m, 1, 2)
        return ResidualReport(ident_id, f10.state.t, max(m.grid.spacing),
                              traj1.dt, mx, l2)
    if ident_id == "6.53":
        T13 = {k: fr1.rm13 - fr2.rm13
               for k, (fr1, fr2) in enumerate(((f1m, f2m), (f10, f20), (f1p, f2p)))}
        dtT = (T13[2] - T13[0]) / dtt
        lapT = rough_laplacian(T13[1], m.grid, f10.gamma, m, 1, 3)
        lhs = max_norm(dtT - lapT, m, 1, 3)
        bundle = (max_norm(f10.g - f20.g, m, 0, 2)
                  + max_norm(f10.gamma - f20.gamma, m, 1, 2)
                  + max_norm(cov_d(f10.gamma - f20.gamma, m.grid, f10.gamma, 1, 2),
                             m, 1, 3)
                  + max_norm(T13[1], m, 1, 3)
                  + max_norm(f10.du - f20.du, m, 0, 1)
                  + max_norm(f10.hess - f20.hess, m, 0, 2))
        bound = (1e-3 if mutate else 1.0) * c_id * bundle
        return lhs, bound
    raise KeyError(ident_id)


# --------------------------------------------------------------------------
# refinement orders and negative controls

def refinement_order(reports) -> float:
    """Least-squares slope of log(max_res) against log(h); needs >= 3 levels."""
    if len(reports) < 3:
        raise ValueError("order estimation requires at least 3 resolutions")
    hs = np.array([r.h for r in reports])
    res = np.array([max(r.max_res, 1e-300) for r in reports])
    slope = np.polyfit(np.log(hs), np.log(res), 1)[0]
    return float(slope)


def with_order(reports_by_level):
    """Attach the measured order to the finest-level report of each identity."""
    out = []
    ids = [r.identity for r in reports_by_level[0]]
    for idx, ident in enumerate(ids):
        seq = [level[idx] for level in reports_by_level]
        order = refinement_order(seq)
        fin = seq[-1]
        out.append(ResidualReport(fin.identity, fin.t, fin.h, fin.dt,
                                  fin.max_res, fin.l2_res, order))
    return out
