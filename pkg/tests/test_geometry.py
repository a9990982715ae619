import numpy as np
import pytest

from filamentlab import geometry
from filamentlab.errors import (
    GridMismatch,
    GridNonUniform,
    InvalidParameter,
    NonFiniteCoefficient,
)
from filamentlab.geometry import Curve, FrenetFrame, SolverConfig, frenet_integrate

ONES = lambda s: np.ones(np.shape(s))
ZERO = lambda s: np.zeros(np.shape(s))


def helix_tangent(s):
    # unit-speed helix with c = tau = 1/2: chi = (cos(s/r2), sin(s/r2), s/r2), r2 = sqrt2
    r2 = np.sqrt(2.0)
    return np.column_stack([-np.sin(s / r2) / r2, np.cos(s / r2) / r2, np.full(np.shape(s), 1 / r2)])


def helix_curve(s):
    r2 = np.sqrt(2.0)
    return np.column_stack([np.cos(s / r2), np.sin(s / r2), s / r2])


@pytest.mark.parametrize("method", ["rk4", "magnus4"])
def test_circle_closes(method):
    cfg = SolverConfig(step=1e-3, renorm_every=16)
    traj = frenet_integrate(ONES, ZERO, FrenetFrame.identity(), (0, 2 * np.pi), cfg,
                            method=method)
    assert np.linalg.norm(traj.T[-1] - traj.T[0]) < 1e-6
    s0, fr0 = next(iter(traj))
    assert s0 == 0.0
    assert isinstance(fr0, FrenetFrame)
    assert np.array_equal(traj.frame_at(0).matrix(), traj.frames[0])


def test_zero_coefficients_freeze_frame():
    cfg = SolverConfig(step=1e-2, renorm_every=8)
    traj = frenet_integrate(ZERO, ZERO, FrenetFrame.identity(), (0, 5.0), cfg)
    assert np.max(np.abs(traj.frames - np.eye(3)[None])) < 1e-14


@pytest.mark.parametrize("method", ["rk4", "magnus4"])
def test_helix_matches_closed_form(method):
    cfg = SolverConfig(step=5e-4, renorm_every=16)
    half = lambda s: 0.5 * np.ones(np.shape(s))
    frame0 = FrenetFrame(
        helix_tangent(np.array([0.0]))[0],
        np.array([-1.0, 0.0, 0.0]),
        np.cross(helix_tangent(np.array([0.0]))[0], [-1.0, 0.0, 0.0]),
    )
    traj = frenet_integrate(half, half, frame0, (0, 12.0), cfg, method=method)
    assert np.max(np.abs(traj.T - helix_tangent(traj.s))) < 1e-6


@pytest.mark.parametrize("method", ["rk4", "magnus4"])
def test_orthonormality_long_span(method):
    cfg = SolverConfig(step=1e-3, renorm_every=16)
    traj = frenet_integrate(lambda s: 1 + 0.3 * np.sin(s), lambda s: s / 2,
                            FrenetFrame.identity(), (0, 100.0), cfg, method=method)
    assert geometry.frame_orthonormality_defect(traj.frames) <= 1e-8


def test_rk4_convergence_order_at_least_4():
    frame0 = FrenetFrame.identity()
    errs = []
    for step in (2e-2, 1e-2):
        cfg = SolverConfig(step=step, renorm_every=4)
        traj = frenet_integrate(ONES, ZERO, frame0, (0, 2 * np.pi), cfg)
        # circle tangent: (cos s, sin s, 0)
        exact = np.column_stack([np.cos(traj.s), np.sin(traj.s), np.zeros(len(traj.s))])
        errs.append(np.max(np.abs(traj.T - exact)))
    order = np.log2(errs[0] / errs[1])
    assert order >= 3.9


def test_curve_from_tangent_line_and_circle():
    s = np.linspace(0, 5, 101)
    T = np.tile([1.0, 0.0, 0.0], (101, 1))
    line = geometry.curve_from_tangent((s, T), np.zeros(3))
    assert np.max(np.abs(line.points - np.column_stack([s, 0 * s, 0 * s]))) < 1e-12

    s = np.linspace(0, 2 * np.pi, 2049)
    T = np.column_stack([-np.sin(s), np.cos(s), 0 * s])
    circ = geometry.curve_from_tangent((s, T), np.array([1.0, 0.0, 0.0]))
    assert np.linalg.norm(circ.points[-1] - circ.points[0]) <= 1e-6
    assert circ.unit_speed_defect() < 1e-3


def test_curve_from_tangent_reproduces_profile():
    from filamentlab import selfsimilar

    prof = selfsimilar.profile(0.7, 20.0, SolverConfig(step=1e-3, renorm_every=8))
    sg = prof.curve.s_grid
    pos = sg >= 0
    rebuilt = geometry.curve_from_tangent((sg[pos], prof.curve.frames[pos, 0]),
                                          np.array([0.0, 0.0, 1.4]))
    assert np.max(np.linalg.norm(rebuilt.points - prof.curve.points[pos], axis=1)) < 1e-5


def test_curve_from_tangent_rejects_nonuniform():
    s = np.array([0.0, 0.1, 0.3, 0.4])
    T = np.tile([1.0, 0, 0], (4, 1))
    with pytest.raises(GridNonUniform):
        geometry.curve_from_tangent((s, T), np.zeros(3))


def test_curvature_torsion_circle_and_helix():
    s = np.linspace(0, 2 * np.pi, 401)
    circ = Curve(s, np.column_stack([np.cos(s), np.sin(s), 0 * s]))
    out = geometry.curvature_torsion_from_curve(circ)
    assert np.max(np.abs(out.c - 1)) < 1e-4
    assert np.max(np.abs(out.tau)) < 1e-4

    s = np.linspace(0, 20, 2001)
    hel = Curve(s, helix_curve(s))
    out = geometry.curvature_torsion_from_curve(hel)
    assert np.max(np.abs(out.c - 0.5)) < 1e-4
    assert np.max(np.abs(out.tau - 0.5)) < 1e-4


def test_curvature_torsion_selfsimilar_slice():
    from filamentlab import selfsimilar

    prof = selfsimilar.profile(0.8, 5.0, SolverConfig(step=5e-4, renorm_every=8))
    out = geometry.curvature_torsion_from_curve(prof.curve)
    assert np.max(np.abs(out.c - 0.8)) < 1e-4
    assert np.max(np.abs(out.tau - out.s_grid / 2)) < 1e-4


def test_torsion_flagged_where_curvature_vanishes():
    s = np.linspace(0, 1, 51)
    line = Curve(s, np.column_stack([s, 0 * s, 0 * s]))
    out = geometry.curvature_torsion_from_curve(line)
    assert not out.tau_defined.any()
    assert np.isnan(out.tau).all()


def test_inversion_round_trip_second_order():
    c_fn = lambda s: 1 + 0.3 * np.sin(s)
    tau_fn = lambda s: 0.5 * np.cos(s)
    errs = []
    for m in (8, 4):
        cfg = SolverConfig(step=2.5e-4, renorm_every=m)
        traj = frenet_integrate(c_fn, tau_fn, FrenetFrame.identity(), (0, 10.0), cfg,
                                method="magnus4", position0=np.zeros(3))
        curve = Curve(traj.s, traj.points)
        out = geometry.curvature_torsion_from_curve(curve)
        errs.append(max(np.max(np.abs(out.c - c_fn(out.s_grid))),
                        np.max(np.abs(out.tau - tau_fn(out.s_grid)))))
    assert errs[0] < 4e-5
    assert errs[0] / errs[1] > 3.0  # ~second order in the sample spacing


def _selfsimilar_snapshots(a, t, dt, smax, n):
    from filamentlab import selfsimilar

    prof = selfsimilar.profile(a, smax / np.sqrt(t - dt) + 1.0)
    s = np.linspace(-smax, smax, n)
    return [Curve(s, selfsimilar.chi(prof, s, tt)) for tt in (t - dt, t, t + dt)], prof


def test_bf_residual_selfsimilar_converges():
    res = []
    for dt, n in ((0.02, 201), (0.01, 401)):
        (c0, c1, c2), _ = _selfsimilar_snapshots(0.6, 1.0, dt, 4.0, n)
        res.append(geometry.bf_residual(c0, c1, c2, dt))
    assert res[0] / res[1] > 3.0


def test_bf_residual_static_line_and_detector():
    s = np.linspace(-3, 3, 151)
    line_pts = np.column_stack([s, 0 * s, 0 * s])
    line = [Curve(s, line_pts) for _ in range(3)]
    assert geometry.bf_residual(*line, dt=0.1) < 1e-12

    # translating curved arc is not a binormal flow
    arc = np.column_stack([np.cos(s), np.sin(s), 0 * s])
    snaps = [Curve(s, arc + t * np.array([1.0, 0, 0])) for t in (-0.1, 0.0, 0.1)]
    assert geometry.bf_residual(*snaps, dt=0.1) > 0.5


def test_bf_residual_grid_mismatch():
    s1 = np.linspace(0, 1, 51)
    s2 = np.linspace(0, 1.1, 51)
    c1 = Curve(s1, np.column_stack([s1, 0 * s1, 0 * s1]))
    c2 = Curve(s2, np.column_stack([s2, 0 * s2, 0 * s2]))
    with pytest.raises(GridMismatch):
        geometry.bf_residual(c1, c2, c1, dt=0.1)


def test_nonfinite_coefficient_raises():
    cfg = SolverConfig(step=1e-2, renorm_every=4)
    bad = lambda s: np.where(s > 1, np.inf, 1.0)
    with pytest.raises(NonFiniteCoefficient):
        frenet_integrate(bad, ZERO, FrenetFrame.identity(), (0, 2.0), cfg)


def test_step_limit_enforced():
    from filamentlab.errors import StepLimitExceeded

    cfg = SolverConfig(step=1e-6, renorm_every=4, max_steps=1000)
    with pytest.raises(StepLimitExceeded):
        frenet_integrate(ONES, ZERO, FrenetFrame.identity(), (0, 10.0), cfg)


def test_frame_validation():
    with pytest.raises(InvalidParameter):
        FrenetFrame(np.array([1.0, 0, 0]), np.array([1.0, 0, 0]), np.array([0, 0, 1.0]))
    with pytest.raises(InvalidParameter):
        FrenetFrame(np.array([2.0, 0, 0]), np.array([0, 1.0, 0]), np.array([0, 0, 1.0]))
    # left-handed triple rejected
    with pytest.raises(InvalidParameter):
        FrenetFrame(np.array([1.0, 0, 0]), np.array([0, 1.0, 0]), np.array([0, 0, -1.0]))


def test_curve_csv_roundtrip(tmp_path):
    cfg = SolverConfig(step=1e-3, renorm_every=16)
    traj = frenet_integrate(ONES, ZERO, FrenetFrame.identity(), (0, 3.0), cfg,
                            position0=np.array([0.0, -1.0, 0.0]))
    curve = Curve(traj.s, traj.points, traj.frames)
    path = tmp_path / "curve.csv"
    curve.write_csv(path)
    back = Curve.read_csv(path)
    assert np.array_equal(back.s_grid, curve.s_grid)
    assert np.array_equal(back.points, curve.points)
    assert np.array_equal(back.frames, curve.frames)


def test_solver_config_validation():
    with pytest.raises(InvalidParameter):
        SolverConfig(step=-1.0)
    with pytest.raises(InvalidParameter):
        SolverConfig(tol_abs=0.0)
