"""Spectral solver for the cubic family and the 1/t-coefficient equation.

The filament function u = c exp(i int tau) turns binormal-flow data into a
cubic Schrodinger state; the pseudo-conformal transform
u(s,t) = e^{i s^2/4t}/sqrt(t) conj(v)(s/t, 1/t) conjugates the delta-datum
problem to large-time perturbations of the constant a, governed by

    i v_t + v_ss + sign * coeff * (1/t)(|v|^2 - a^2) v = 0.

Evolution is Strang splitting: the Fourier half-step is exact for the free
part and the (possibly 1/t-weighted) cubic phase is integrated in closed
form over each substep, so mass is conserved to roundoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AliasingDetected,
    GridNonUniform,
    InvalidParameter,
    ResampleOutOfRange,
    TimeSpanCrossesZero,
)

ALIAS_FRACTION = 1e-6


@dataclass
class ComplexField:
    """Complex samples on a uniform periodic grid of power-of-two size."""

    domain_length: float
    n_points: int
    values: np.ndarray
    s0: float | None = None  # left endpoint; default centers the box at 0

    def __post_init__(self):
        n = self.n_points
        if n < 16 or (n & (n - 1)) != 0:
            raise InvalidParameter("n_points must be a power of two >= 16")
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (n,):
            raise InvalidParameter("values shape must match n_points")
        if not np.all(np.isfinite(self.values.view(float))):
            raise InvalidParameter("values must be finite")
        if self.s0 is None:
            self.s0 = -self.domain_length / 2

    def grid(self):
        return self.s0 + self.domain_length * np.arange(self.n_points) / self.n_points

    def xi(self):
        return 2 * np.pi * np.fft.fftfreq(self.n_points, d=self.domain_length / self.n_points)

    def mass(self):
        return float(self.domain_length * np.mean(np.abs(self.values) ** 2))

    def l2_norm(self):
        return math.sqrt(self.mass())

    def derivative(self):
        return ComplexField(
            self.domain_length, self.n_points,
            np.fft.ifft(1j * self.xi() * np.fft.fft(self.values)), self.s0,
        )

    def alias_fraction(self):
        """Spectral energy fraction carried by the top third of |xi|."""
        spec = np.abs(np.fft.fft(self.values)) ** 2
        k = np.abs(np.fft.fftfreq(self.n_points)) * self.n_points
        tail = spec[k >= self.n_points / 3].sum()
        tot = spec.sum()
        return float(tail / tot) if tot > 0 else 0.0

    def copy_with(self, values):
        return ComplexField(self.domain_length, self.n_points, values, self.s0)


def gaussian_field(domain_length, n_points, l2_norm, width=2.0, center=0.0):
    """Gaussian bump normalized to the requested L2 norm."""
    f = ComplexField(domain_length, n_points,
                     np.zeros(n_points, dtype=complex))
    x = f.grid()
    vals = np.exp(-((x - center) ** 2) / (2 * width**2)).astype(complex)
    f = f.copy_with(vals)
    cur = f.l2_norm()
    if l2_norm > 0 and cur == 0:
        raise InvalidParameter("gaussian underflowed on this grid")
    return f.copy_with(vals * (l2_norm / cur if cur else 0.0))


@dataclass
class NlsProblem:
    """Equation selector: 'gp' has the 1/t (|v|^2-a^2) coefficient, 'none'
    the autonomous cubic.  The cubic coefficient defaults to the form cited
    by each experiment: 1 for the 1/t equation, 1/2 for the autonomous one.
    """

    sign: int = -1
    background_a: float = 0.0
    potential: str = "gp"
    t_span: tuple = (1.0, 10.0)
    coeff: float | None = None

    def __post_init__(self):
        if self.sign not in (-1, 1):
            raise InvalidParameter("sign must be +1 or -1")
        if self.background_a < 0:
            raise InvalidParameter("background_a must be nonnegative")
        if self.potential not in ("gp", "none"):
            raise InvalidParameter("potential must be 'gp' or 'none'")
        t0, t1 = self.t_span
        if self.potential == "gp" and (t0 <= 0 or t1 <= 0):
            raise TimeSpanCrossesZero("the 1/t equation needs 0 < t_lo <= t_hi")
        if self.coeff is None:
            self.coeff = 1.0 if self.potential == "gp" else 0.5


def time_grid(problem, n_steps):
    t0, t1 = problem.t_span
    if problem.potential == "gp":
        return t0 * (t1 / t0) ** (np.arange(n_steps + 1) / n_steps)
    return np.linspace(t0, t1, n_steps + 1)


@dataclass
class EvolveResult:
    problem: NlsProblem
    times: np.ndarray
    fields: list
    mass: np.ndarray

    def mass_drift(self):
        return float(np.max(np.abs(self.mass - self.mass[0])) / self.mass[0])


def evolve(problem, v0, n_steps, *, store_every=None, check_alias=True):
    """Strang-split run over the problem's time span.

    Returns snapshots every ``store_every`` steps (always including both
    endpoints); mass is tracked at every stored snapshot.
    """
    ts = time_grid(problem, n_steps)
    xi2 = v0.xi() ** 2
    v = v0.values.copy()
    a2 = problem.background_a**2
    kap = problem.coeff
    sgn = problem.sign
    stored_t = [ts[0]]
    stored_v = [v0.copy_with(v.copy())]
    for k in range(n_steps):
        dt = ts[k + 1] - ts[k]
        v = np.fft.ifft(np.fft.fft(v) * np.exp(-1j * xi2 * dt / 2))
        if problem.potential == "gp":
            phase = sgn * kap * (np.abs(v) ** 2 - a2) * math.log(ts[k + 1] / ts[k])
        else:
            phase = sgn * kap * np.abs(v) ** 2 * dt
        v = v * np.exp(1j * phase)
        v = np.fft.ifft(np.fft.fft(v) * np.exp(-1j * xi2 * dt / 2))
        if (store_every and (k + 1) % store_every == 0) or k == n_steps - 1:
            stored_t.append(ts[k + 1])
            stored_v.append(v0.copy_with(v.copy()))
    fields = stored_v
    if check_alias:
        frac = max(f.alias_fraction() for f in fields)
        if frac > ALIAS_FRACTION:
            raise AliasingDetected(f"top-third spectral energy fraction {frac:.2e}")
    mass = np.array([f.mass() for f in fields])
    return EvolveResult(problem, np.array(stored_t), fields, mass)


def hasimoto(intrinsic, slice_index=0):
    """Filament function u = c exp(i int_0^s tau) from one (c, tau) slice."""
    s = intrinsic.s_grid
    ds = np.diff(s)
    if np.max(np.abs(ds - ds[0])) > 1e-9 * abs(ds[0]):
        raise GridNonUniform("hasimoto needs a uniform grid")
    c = intrinsic.c[slice_index]
    tau = intrinsic.tau[slice_index]
    phi = np.concatenate([[0.0], np.cumsum((tau[1:] + tau[:-1]) / 2 * ds)])
    phi = phi - np.interp(0.0, s, phi)  # phase reference at s = 0
    n = len(s)
    return ComplexField(n * ds[0], n, c * np.exp(1j * phi), s0=float(s[0]))


def pseudo_conformal(v_slice, t):
    """u(s,t) = e^{i s^2/(4t)}/sqrt(t) conj(v)(s/t, 1/t) on the rescaled grid."""
    if t <= 0:
        raise InvalidParameter("t must be positive")
    x = v_slice.grid()
    s = t * x
    u = np.exp(1j * s * s / (4 * t)) / math.sqrt(t) * np.conj(v_slice.values)
    return ComplexField(t * v_slice.domain_length, v_slice.n_points, u,
                        s0=float(t * v_slice.s0))


def pseudo_conformal_inverse(u_slice, t):
    """Inverse of :func:`pseudo_conformal` at the same time t."""
    if t <= 0:
        raise InvalidParameter("t must be positive")
    s = u_slice.grid()
    v = math.sqrt(t) * np.exp(1j * s * s / (4 * t)) * np.conj(u_slice.values)
    return ComplexField(u_slice.domain_length / t, u_slice.n_points,
                        v, s0=float(u_slice.s0 / t))


def resample(field, target_grid):
    """Evaluate the trigonometric interpolant at arbitrary points."""
    target_grid = np.asarray(target_grid, dtype=float)
    lo, hi = field.s0, field.s0 + field.domain_length
    if target_grid.min() < lo - 1e-9 or target_grid.max() > hi + 1e-9:
        raise ResampleOutOfRange("target grid outside the source period")
    spec = np.fft.fft(field.values) / field.n_points
    xi = field.xi()
    phase = np.exp(1j * np.outer(target_grid - field.s0, xi))
    return phase @ spec


def free_evolution(field, t):
    """exp(i t d^2/ds^2) applied spectrally."""
    return field.copy_with(
        np.fft.ifft(np.fft.fft(field.values) * np.exp(-1j * field.xi() ** 2 * t))
    )


def long_range_ansatz(u_plus, a, sign, t, coeff=1.0):
    """v1(t) = a + e^{i sign coeff a^2 log t} (free evolution of u_plus)."""
    if t <= 0:
        raise InvalidParameter("t must be positive")
    w1 = free_evolution(u_plus, t).values * np.exp(1j * sign * coeff * a * a * math.log(t))
    return u_plus.copy_with(a + w1)


def gp_energy(v, t, a, sign, coeff=1.0):
    """E(t) = (1/2) int |v_s|^2 - sign*coeff/(4t) int (|v|^2-a^2)^2."""
    if t <= 0:
        raise InvalidParameter("t must be positive")
    vs = v.derivative().values
    L = v.domain_length
    kin = 0.5 * L * np.mean(np.abs(vs) ** 2)
    pot = L * np.mean((np.abs(v.values) ** 2 - a * a) ** 2)
    return float(kin - sign * coeff * pot / (4 * t))


def gp_energy_law_defect(times, fields, a, sign, coeff=1.0):
    """Central-difference defect of dE/dt = sign*coeff/(4 t^2) int (|v|^2-a^2)^2."""
    times = np.asarray(times, dtype=float)
    E = np.array([gp_energy(f, t, a, sign, coeff) for f, t in zip(fields, times)])
    P = np.array(
        [f.domain_length * np.mean((np.abs(f.values) ** 2 - a * a) ** 2) for f in fields]
    )
    hp = times[1:-1] - times[:-2]
    hn = times[2:] - times[1:-1]
    dE = (hp**2 * E[2:] + (hn**2 - hp**2) * E[1:-1] - hn**2 * E[:-2]) / (
        hp * hn * (hp + hn)
    )
    defect = np.abs(dE - sign * coeff * P[1:-1] / (4 * times[1:-1] ** 2))
    return float(np.max(defect))


def galilean_transform(field, m, t, wavenumber_base=None):
    """u_N(s,t) = e^{-i t N^2 + i N s} u(s - 2 N t, t) with N = m * 2 pi / L."""
    N = (wavenumber_base or 2 * np.pi / field.domain_length) * m
    xi = field.xi()
    shifted = np.fft.ifft(np.fft.fft(field.values) * np.exp(-1j * xi * 2 * N * t))
    s = field.grid()
    return field.copy_with(np.exp(1j * (N * s - t * N * N)) * shifted)


def long_range_comparison(a, u_plus, sign, t_span, n_steps, *, coeff=1.0,
                          n_checks=24):
    """One GP run from v1(t0); ansatz defects with and without the log phase.

    Returns a dict with the endpoint defects, their ratio, and fitted
    log-log decay slopes of ||v - v1|| and its derivative.
    """
    t0, t1 = t_span
    v0 = long_range_ansatz(u_plus, a, sign, t0, coeff)
    problem = NlsProblem(sign=sign, background_a=a, potential="gp",
                         t_span=(t0, t1), coeff=coeff)
    store = max(1, n_steps // n_checks)
    res = evolve(problem, v0, n_steps, store_every=store)
    d_phase, d_free, d_deriv = [], [], []
    for t, f in zip(res.times, res.fields):
        v1 = long_range_ansatz(u_plus, a, sign, t, coeff)
        v1_free = u_plus.copy_with(a + free_evolution(u_plus, t).values)
        diff = f.copy_with(f.values - v1.values)
        d_phase.append(diff.l2_norm())
        d_free.append(f.copy_with(f.values - v1_free.values).l2_norm())
        d_deriv.append(diff.derivative().l2_norm())
    d_phase, d_free, d_deriv = map(np.array, (d_phase, d_free, d_deriv))
    half = len(res.times) // 2
    lt = np.log(res.times[half:])

    def slope(d):
        y = np.log(np.maximum(d[half:], 1e-300))
        return float(np.polyfit(lt, y, 1)[0])

    return {
        "t_final": float(res.times[-1]),
        "defect_with_phase": float(d_phase[-1]),
        "defect_without_phase": float(d_free[-1]),
        "ratio": float(d_phase[-1] / d_free[-1]) if d_free[-1] else float("nan"),
        "slope_l2": slope(d_phase),
        "slope_deriv_l2": slope(d_deriv),
        "mass_drift": res.mass_drift(),
        "times": res.times.tolist(),
        "defects_with_phase": d_phase.tolist(),
        "defects_without_phase": d_free.tolist(),
    }
