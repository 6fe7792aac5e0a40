import numpy as np
import pytest

from conftest import RHF, eval_index
from rlab.flow import FlowParams, FlowState, Schedule, run
from rlab.identities import (APPENDIX_A_IDS, APPENDIX_C_IDS, LEMMA31_IDS,
                             REGISTRY, a11_norm_bound, box_residual,
                             evaluate_identity, pair_residual,
                             refinement_order, residual_field,
                             verify_appendix_A, verify_lemma_52, with_order)
from rlab.instances import random_instance, verification_initial_data
from rlab.mesh import MetricField, build_grid, flat_metric
from rlab.tensor import norm_sq


def test_flat_stationary_residuals_zero(manifest):
    g = build_grid("torus", 2, [16, 16], [2 * np.pi] * 2)
    st = FlowState(g, flat_metric(g), np.zeros(g.shape))
    traj = run(st, RHF, Schedule(t_end=0.01, dt=2e-3, diagnostics=False))
    for rep in verify_appendix_A(traj, 2):
        assert rep.max_res < 1e-12, rep.identity


def test_registry_orders_two_levels(rhf_runs, general_runs, manifest):
    # order on the 16 -> 32 pair for every box identity; the full three-level
    # study lives in the acceptance suite
    for ident in APPENDIX_A_IDS + ("A.12", "A.13"):
        seq = [evaluate_identity(rhf_runs[r], ident, eval_index(rhf_runs[r]))
               for r in (16, 32)]
        ratio = seq[0].max_res / max(seq[1].max_res, 1e-300)
        assert ratio > 2.8 or seq[1].max_res < 1e-10, (ident, ratio)
    for ident in APPENDIX_C_IDS + LEMMA31_IDS:
        seq = [evaluate_identity(general_runs[r], ident, eval_index(general_runs[r]))
               for r in (16, 32)]
        ratio = seq[0].max_res / max(seq[1].max_res, 1e-300)
        assert ratio > 2.8, (ident, ratio)


def test_residual_thresholds_from_manifest(rhf_runs, general_runs, manifest):
    # max-residual <= C_id (h^2 + dt^2), C_id frozen on the 16-grid baseline
    for runs, ids in ((rhf_runs, APPENDIX_A_IDS + ("A.12", "A.13")),
                      (general_runs, APPENDIX_C_IDS + LEMMA31_IDS)):
        for res in (16, 32):
            traj = runs[res]
            bound = manifest["c_id"]
            h2dt2 = max(traj.grid.spacing) ** 2 + traj.dt ** 2
            for ident in ids:
                rep = evaluate_identity(traj, ident, eval_index(traj))
                assert rep.max_res <= bound[ident] * h2dt2 * 1.01, ident


def test_negative_controls_box(rhf_runs, general_runs):
    # flipped RHS destroys convergence: residual stays O(1) relative to truth
    for runs, ids in ((rhf_runs, APPENDIX_A_IDS + ("A.12", "A.13")),
                      (general_runs, APPENDIX_C_IDS + LEMMA31_IDS)):
        for ident in ids:
            good = [evaluate_identity(runs[r], ident, eval_index(runs[r]))
                    for r in (16, 32)]
            bad = [evaluate_identity(runs[r], ident, eval_index(runs[r]),
                                     mutate=True) for r in (16, 32)]
            assert bad[1].max_res > 5.0 * good[1].max_res, ident
            ratio = bad[0].max_res / bad[1].max_res
            assert ratio < 2.0, (ident, ratio)  # non-convergent


def test_a11_norm_bound(rhf_runs, manifest):
    traj = rhf_runs[16]
    lhs, bound = a11_norm_bound(traj, eval_index(traj), manifest["c_id"]["A.11"])
    assert lhs <= bound
    lhs2, bound2 = a11_norm_bound(traj, eval_index(traj),
                                  manifest["c_id"]["A.11"] * 1e-3)
    assert lhs2 > bound2  # negative control


def test_c_identities_coincide_with_a_at_rhf(rhf_runs):
    # C.6 is A.8 and 3.11 is A.9 at (2,0,0,0): identical residuals bitwise
    traj = rhf_runs[16]
    k = eval_index(traj)
    frames = None
    a8, _, _, f0 = residual_field(traj, REGISTRY["A.8"], k)
    c6, _, _, _ = residual_field(traj, REGISTRY["C.6"], k)
    assert np.array_equal(a8, c6)
    a9 = residual_field(traj, REGISTRY["A.9"], k)[0]
    l311 = residual_field(traj, REGISTRY["3.11"], k)[0]
    assert np.array_equal(a9, l311)


def test_u_zero_reduces_to_ricci_flow_identities():
    g = build_grid("torus", 2, [16, 16], [2 * np.pi] * 2)
    m, _ = verification_initial_data(g)
    st = FlowState(g, m, np.zeros(g.shape))
    traj = run(st, FlowParams(2.0), Schedule(t_end=0.01, dt=1e-3, diagnostics=False))
    k = 5
    # u-dependent quantities vanish exactly along the run
    for rep in verify_appendix_A(traj, k, ids=("A.4", "A.8")):
        assert rep.max_res < 1e-13
    # remaining identities still close
    for rep in verify_appendix_A(traj, k, ids=("A.2", "A.6", "A.7")):
        assert rep.max_res < 0.2


def test_rejects_wrong_params_for_a_family(general_runs):
    with pytest.raises(ValueError):
        evaluate_identity(general_runs[16], "A.2", 3)


def test_rejects_boundary_snapshot(rhf_runs):
    with pytest.raises(IndexError):
        evaluate_identity(rhf_runs[16], "A.8", 0)
    with pytest.raises(IndexError):
        evaluate_identity(rhf_runs[16], "A.8", rhf_runs[16].nsnapshots - 1)


def test_residual_translation_invariance():
    # rolling the initial data along the torus leaves residual norms unchanged
    def rolled(shift):
        g = build_grid("torus", 2, [16, 16], [2 * np.pi] * 2)
        m, u0 = verification_initial_data(g)
        vals = np.roll(m.values, shift, axis=-1)
        st = FlowState(g, MetricField(g, vals), np.roll(u0, shift, axis=-1))
        return run(st, RHF, Schedule(t_end=0.008, dt=2e-3, diagnostics=False))

    r0 = verify_appendix_A(rolled(0), 2, ids=("A.2", "A.8"))
    r1 = verify_appendix_A(rolled(5), 2, ids=("A.2", "A.8"))
    for a, b in zip(r0, r1):
        assert abs(a.max_res - b.max_res) < 1e-11 * max(a.max_res, 1e-30)
        assert abs(a.l2_res - b.l2_res) < 1e-11 * max(a.l2_res, 1e-30)


def test_box_residual_public_api(rhf_runs):
    # a user-supplied quantity/RHS pair: the gradient-squared identity
    traj = rhf_runs[16]

    def q(frame):
        return frame.grad_sq, 0, 0

    def rhs(frame):
        return (-2.0 * norm_sq(frame.hess, frame.metric, 0, 2)
                - 4.0 * frame.grad_sq ** 2)

    res = box_residual(traj, q, rhs, eval_index(traj))
    rep = evaluate_identity(traj, "A.8", eval_index(traj))
    assert abs(float(np.max(np.abs(res))) - rep.max_res) < 1e-12


def test_verify_lemma_52_const_u_exact():
    grid, m, _ = random_instance(3, 12, seed=101)
    for rep in verify_lemma_52(m, np.zeros(grid.shape)):
        assert rep.max_res == 0.0, rep.identity


def test_lemma52_negative_controls():
    from rlab.identities import lemma52_defects
    grid, m, u = random_instance(3, 12, seed=103)
    defects = lemma52_defects(m, u)
    # a deliberate sign flip of one formula term produces an O(1) defect
    from rlab.tensor import christoffel, hessian
    gamma = christoffel(m)
    H = hessian(u, grid, gamma)
    g = m.values
    wrong = defects["5.7"] + 2.0 * np.einsum("jk...,il...->ijkl...", H, g)
    good_norm = np.max(np.abs(defects["5.7"]))
    assert np.max(np.abs(wrong)) > 10.0 * good_norm


def test_reports_serialize():
    levels = []
    for res in (8, 12, 16):
        grid, m, u = random_instance(3, res, seed=102)
        levels.append(verify_lemma_52(m, u))
    d = levels[0][0].to_dict()
    assert set(d) == {"identity", "t", "h", "dt", "max_res", "l2_res"}
    ordered = with_order(levels)
    assert ordered[0].order is not None
    assert "order" in ordered[0].to_dict()


def test_refinement_order_requires_three():
    grid, m, u = random_instance(3, 8, seed=102)
    reps = verify_lemma_52(m, u)[:1]
    with pytest.raises(ValueError):
        refinement_order([reps[0], reps[0]])


# --------------------------------------------------------------------------
# pair identities

@pytest.fixture(scope="module")
def trajectory_pair():
    g = build_grid("torus", 2, [16, 16], [2 * np.pi] * 2)
    m, u0 = verification_initial_data(g)
    pm = m.values.copy()
    pm[0, 0] = pm[0, 0] + 1e-3 * np.sin(g.coords()[1])
    sched = Schedule(t_end=0.016, dt=2e-3, diagnostics=False)
    t1 = run(FlowState(g, m, u0), RHF, sched)
    t2 = run(FlowState(g, MetricField(g, pm), u0), RHF, sched)
    return t1, t2


def test_pair_identities(trajectory_pair, manifest):
    t1, t2 = trajectory_pair
    h2dt2 = max(t1.grid.spacing) ** 2 + t1.dt ** 2
    for ident in ("6.50", "6.51"):
        rep = pair_residual(t1, t2, ident, 6)
        assert rep.max_res <= manifest["c_id"][ident] * h2dt2 * 1.01, ident
        bad = pair_residual(t1, t2, ident, 6, mutate=True)
        assert bad.max_res > 5.0 * max(rep.max_res, 1e-30), ident
    lhs, bound = pair_residual(t1, t2, "6.53", 6, c_id=manifest["c_id"]["6.53"])
    assert 0 < lhs <= bound
    lhs2, bound2 = pair_residual(t1, t2, "6.53", 6,
                                 c_id=manifest["c_id"]["6.53"], mutate=True)
    assert lhs2 > bound2


def test_pair_rejects_mismatch(trajectory_pair):
    t1, _ = trajectory_pair
    g = build_grid("torus", 2, [24, 24], [2 * np.pi] * 2)
    m, u0 = verification_initial_data(g)
    other = run(FlowState(g, m, u0), RHF,
                Schedule(t_end=0.004, dt=2e-3, diagnostics=False))
    with pytest.raises(ValueError):
        pair_residual(t1, other, "6.50", 1)


def test_a4_a8_magnitudes_comparable(rhf_runs):
    # the two gradient-coupled identities see the same run; their residual
    # scales should sit within an order of magnitude of each other
    traj = rhf_runs[32]
    k = eval_index(traj)
    a4 = evaluate_identity(traj, "A.4", k).max_res
    a8 = evaluate_identity(traj, "A.8", k).max_res
    assert a8 / 10.0 <= a4 <= a8 * 10.0
