"""Core 3-vector and frame types, Frenet integration, curve reconstruction,
and binormal-flow residual diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson

from .errors import (
    CurvatureBelowThreshold,
    GridMismatch,
    GridNonUniform,
    GridTooCoarse,
    InvalidParameter,
)
from .integrators import mgs_rows, propagate_frame

TOL_UNIT = 1e-9
TOL_FRAME = 1e-8
TOL_CURVATURE = 1e-6  # below this torsion is flagged, not invented


def vec3(x, y, z):
    v = np.array([x, y, z], dtype=float)
    if not np.all(np.isfinite(v)):
        raise InvalidParameter("vector components must be finite")
    return v


def unit_vec3(v):
    v = np.asarray(v, dtype=float)
    if abs(np.linalg.norm(v) - 1.0) > TOL_UNIT:
        raise InvalidParameter(f"|v| = {np.linalg.norm(v)!r} is not 1 within {TOL_UNIT}")
    return v


@dataclass(frozen=True)
class FrenetFrame:
    """Right-handed orthonormal triple (T, n, b)."""

    T: np.ndarray
    n: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        for v in (self.T, self.n, self.b):
            unit_vec3(v)
        M = self.matrix()
        if np.max(np.abs(M @ M.T - np.eye(3))) > TOL_FRAME:
            raise InvalidParameter("frame vectors not orthonormal")
        if abs(np.linalg.det(M) - 1.0) > TOL_FRAME:
            raise InvalidParameter("frame not right-handed")

    def matrix(self):
        """Rows (T, n, b)."""
        return np.stack([self.T, self.n, self.b])

    @staticmethod
    def identity():
        return FrenetFrame(np.eye(3)[0], np.eye(3)[1], np.eye(3)[2])

    @staticmethod
    def from_matrix(M):
        return FrenetFrame(np.array(M[0]), np.array(M[1]), np.array(M[2]))


@dataclass
class Curve:
    """Sampled arclength-parametrized curve, optionally with frames.

    ``frames`` has shape (N, 3, 3) with rows (T, n, b) per sample.
    """

    s_grid: np.ndarray
    points: np.ndarray
    frames: np.ndarray | None = None

    def __post_init__(self):
        self.s_grid = np.asarray(self.s_grid, dtype=float)
        self.points = np.asarray(self.points, dtype=float)
        if np.any(np.diff(self.s_grid) <= 0):
            raise InvalidParameter("s_grid must be strictly increasing")
        if len(self.points) != len(self.s_grid):
            raise GridMismatch("points and s_grid lengths differ")

    def unit_speed_defect(self):
        ds = np.diff(self.s_grid)
        seg = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
        return float(np.max(np.abs(seg / ds - 1.0)))

    def frame_at(self, i):
        return FrenetFrame.from_matrix(self.frames[i])

    def write_csv(self, path):
        cols = [self.s_grid] + [self.points[:, j] for j in range(3)]
        header = "s,x,y,z"
        if self.frames is not None:
            header += ",Tx,Ty,Tz,nx,ny,nz,bx,by,bz"
            for r in range(3):
                cols += [self.frames[:, r, j] for j in range(3)]
        data = np.column_stack(cols)
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for row in data:
                fh.write(",".join("%.17g" % x for x in row) + "\n")

    @staticmethod
    def read_csv(path):
        raw = np.genfromtxt(path, delimiter=",", names=True)
        s = np.atleast_1d(raw["s"])
        pts = np.column_stack([np.atleast_1d(raw[k]) for k in ("x", "y", "z")])
        frames = None
        if "Tx" in raw.dtype.names:
            mats = [
                np.column_stack([np.atleast_1d(raw[p + ax]) for ax in "xyz"])
                for p in ("T", "n", "b")
            ]
            frames = np.stack(mats, axis=1)
        return Curve(s, pts, frames)


@dataclass
class SolverConfig:
    """Fixed-step integrator knobs.

    ``renorm_every`` counts fine steps between re-orthonormalizations of the
    frame (RK4 path); it also sets the output spacing of trajectories, since
    states are materialized exactly at those nodes.
    """

    step: float = 1e-3
    tol_abs: float = 1e-10
    tol_rel: float = 1e-10
    max_steps: int = 50_000_000
    renorm_every: int = 16

    def __post_init__(self):
        if self.step <= 0:
            raise InvalidParameter("step must be positive")
        if self.tol_abs <= 0 or self.tol_rel <= 0:
            raise InvalidParameter("tolerances must be positive")


@dataclass
class FrameTrajectory:
    """Frames (rows T,n,b) sampled along s; points present when integrated."""

    s: np.ndarray
    frames: np.ndarray
    points: np.ndarray | None = None

    def __iter__(self):
        for i in range(len(self.s)):
            yield self.s[i], FrenetFrame.from_matrix(self.frames[i])

    def frame_at(self, i):
        return FrenetFrame.from_matrix(self.frames[i])

    @property
    def T(self):
        return self.frames[:, 0]

    @property
    def n(self):
        return self.frames[:, 1]

    @property
    def b(self):
        return self.frames[:, 2]


@dataclass
class IntrinsicData:
    """Curvature/torsion samples on a (t, s) grid; single slice allowed."""

    s_grid: np.ndarray
    t_grid: np.ndarray
    c: np.ndarray
    tau: np.ndarray
    tau_defined: np.ndarray | None = None

    def __post_init__(self):
        self.s_grid = np.asarray(self.s_grid, dtype=float)
        self.t_grid = np.atleast_1d(np.asarray(self.t_grid, dtype=float))
        self.c = np.atleast_2d(np.asarray(self.c, dtype=float))
        self.tau = np.atleast_2d(np.asarray(self.tau, dtype=float))
        if self.c.shape != (len(self.t_grid), len(self.s_grid)):
            raise GridMismatch("c must be (n_t, n_s)")
        if self.tau.shape != self.c.shape:
            raise GridMismatch("tau must match c")


def frenet_integrate(c, tau, frame0, s_span, cfg=None, *, method="rk4",
                     position0=None):
    """Integrate T' = c n, n' = -c T + tau b, b' = -tau n over s_span.

    ``c`` and ``tau`` are scalar functions accepting ndarray arguments.
    Output nodes land every ``cfg.renorm_every`` fine steps; with
    method="rk4" the frame is re-orthonormalized (modified Gram-Schmidt) at
    each output node, with method="magnus4" every step is an exact rotation
    so no renormalization is applied.  When ``position0`` is given the curve
    point (chi' = T) is carried in the same linear system.
    """
    cfg = cfg or SolverConfig()
    F0 = frame0.matrix() if isinstance(frame0, FrenetFrame) else np.asarray(frame0)
    s_out, frames, points = propagate_frame(
        c, tau, float(s_span[0]), float(s_span[1]), F0,
        step=cfg.step, out_every=cfg.renorm_every, method=method,
        position0=position0, max_steps=cfg.max_steps,
    )
    return FrameTrajectory(s_out, frames, points)


def curve_from_tangent(tangents, base):
    """Antiderivative of the tangent field: chi(s) = base + int T.

    ``tangents`` is (s_grid, T) with T of shape (N, 3) on a uniform grid.
    """
    s, T = tangents
    s = np.asarray(s, dtype=float)
    T = np.asarray(T, dtype=float)
    ds = np.diff(s)
    if len(s) < 3 or np.max(np.abs(ds - ds[0])) > 1e-9 * abs(ds[0]):
        raise GridNonUniform("tangent samples must sit on a uniform grid")
    pts = np.asarray(base, dtype=float)[None] + cumulative_simpson(
        T, x=s, axis=0, initial=0.0
    )
    return Curve(s, pts)


def curvature_torsion_from_curve(curve, *, tol_c=TOL_CURVATURE, strict=False):
    """Second-order finite-difference inversion of the Frenet relations.

    c = |chi_ss|; torsion from the triple-product formula
    tau = det(chi', chi'', chi''') / |chi' x chi''|^2, reported only where
    c > tol_c (flagged samples carry NaN and tau_defined=False).
    """
    s = curve.s_grid
    if len(s) < 5:
        raise GridTooCoarse("need at least 5 samples")
    ds = np.diff(s)
    if np.max(np.abs(ds - ds[0])) > 1e-9 * abs(ds[0]):
        raise GridNonUniform("curve grid must be uniform")
    h = ds[0]
    p = curve.points
    d1 = (p[2:] - p[:-2]) / (2 * h)
    d2 = (p[2:] - 2 * p[1:-1] + p[:-2]) / (h * h)
    # third derivative needs two neighbours each side
    d3 = (p[4:] - 2 * p[3:-1] + 2 * p[1:-3] - p[:-4]) / (2 * h**3)
    inner = slice(2, len(s) - 2)
    d1i, d2i = d1[1:-1], d2[1:-1]
    c = np.linalg.norm(d2i, axis=1)
    cross = np.cross(d1i, d2i)
    denom = np.sum(cross * cross, axis=1)
    defined = c > tol_c
    if strict and not np.all(defined):
        raise CurvatureBelowThreshold("torsion undefined at some samples")
    tau = np.full(len(c), np.nan)
    ok = defined & (denom > 0)
    tau[ok] = np.einsum("ij,ij->i", cross[ok], d3[ok]) / denom[ok]
    return IntrinsicData(s[inner], np.array([0.0]), c[None], tau[None],
                         tau_defined=defined[None])


def bf_residual(curve_prev, curve_mid, curve_next, dt):
    """Max-norm central-difference residual of chi_t = chi_s x chi_ss.

    The three snapshots sample times t-dt, t, t+dt on identical s grids.
    """
    for other in (curve_prev, curve_next):
        if len(other.s_grid) != len(curve_mid.s_grid) or np.max(
            np.abs(other.s_grid - curve_mid.s_grid)
        ) > 1e-12 * max(1.0, np.max(np.abs(curve_mid.s_grid))):
            raise GridMismatch("snapshots must share the s grid")
    s = curve_mid.s_grid
    ds = np.diff(s)
    if np.max(np.abs(ds - ds[0])) > 1e-9 * abs(ds[0]):
        raise GridNonUniform("bf_residual needs a uniform s grid")
    h = ds[0]
    p = curve_mid.points
    chi_t = (curve_next.points[1:-1] - curve_prev.points[1:-1]) / (2 * dt)
    chi_s = (p[2:] - p[:-2]) / (2 * h)
    chi_ss = (p[2:] - 2 * p[1:-1] + p[:-2]) / (h * h)
    res = chi_t - np.cross(chi_s, chi_ss)
    return float(np.max(np.linalg.norm(res, axis=1)))


def frame_orthonormality_defect(frames):
    """Max deviation of F F^T from the identity plus determinant defect."""
    frames = np.asarray(frames)
    gram = frames @ np.swapaxes(frames, -1, -2)
    d1 = np.max(np.abs(gram - np.eye(3)))
    d2 = np.max(np.abs(np.linalg.det(frames) - 1.0))
    return float(max(d1, d2))


def orthonormalize_frame(M):
    return mgs_rows(np.asarray(M, dtype=float))
