"""Particle trajectories, their Jacobians, and the deformation functionals.

Tracers carry positions X and Jacobians J = grad X, advanced by RK4 on

    dX/dt = u(X),   dJ/dt = grad u(X) J.

Velocity samplers are callables ``points -> (u, grad_u)`` with ``u`` of
shape (m, 2) and ``grad_u[i, a, b] = d u_a / d x_b`` of shape (m, 2, 2).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .field import GridField, wavenumbers
from .initdata import quadrant_kernel

Sampler = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class TracerSet:
    seeds: np.ndarray
    positions: np.ndarray
    jacobians: np.ndarray
    flagged: np.ndarray

    @classmethod
    def from_points(cls, points) -> "TracerSet":
        p = np.array(points, dtype=np.float64).reshape(-1, 2)
        m = len(p)
        return cls(p.copy(), p.copy(), np.repeat(np.eye(2)[None], m, axis=0),
                   np.zeros(m, dtype=bool))

    def __len__(self) -> int:
        return len(self.seeds)

    def det(self) -> np.ndarray:
        J = self.jacobians
        return J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]

    def flag_outside(self, radius: float) -> "TracerSet":
        far = np.hypot(self.positions[:, 0], self.positions[:, 1]) > radius
        return replace(self, flagged=self.flagged | far)

    def rows(self, t: float) -> list[tuple]:
        """Rows t, seed_x1, seed_x2, x1, x2, j11, j12, j21, j22, detj."""
        d = self.det()
        J = self.jacobians
        return [(t, *self.seeds[i], *self.positions[i], J[i, 0, 0], J[i, 0, 1],
                 J[i, 1, 0], J[i, 1, 1], d[i]) for i in range(len(self))]


TRACER_COLUMNS = ("t", "seed_x1", "seed_x2", "x1", "x2", "j11", "j12", "j21", "j22", "detj")


def lattice_points(lo: float, hi: float, spacing: float) -> np.ndarray:
    """Square lattice on [lo, hi]^2 anchored at 0 (so axis points are exact)."""
    i0, i1 = math.ceil(lo / spacing - 1e-9), math.floor(hi / spacing + 1e-9)
    x = np.arange(i0, i1 + 1) * spacing
    a, b = np.meshgrid(x, x, indexing="ij")
    return np.column_stack([a.ravel(), b.ravel()])


def quadrant_seeds(extent: float, spacing: float, ring: float | None = None) -> np.ndarray:
    """Lattice covering [0, extent]^2 plus an optional ring of radius ``ring`` about the origin."""
    pts = lattice_points(0.0, extent, spacing)
    if ring:
        th = np.linspace(0.0, 0.5 * np.pi, 9)
        pts = np.vstack([pts, np.column_stack([ring * np.cos(th), ring * np.sin(th)])])
    return pts


# --- samplers -------------------------------------------------------------------

def rotation_sampler(points: np.ndarray):
    p = np.asarray(points)
    u = np.column_stack([-p[:, 1], p[:, 0]])
    g = np.broadcast_to(np.array([[0.0, -1.0], [1.0, 0.0]]), (len(p), 2, 2)).copy()
    return u, g


def strain_sampler(points: np.ndarray):
    p = np.asarray(points)
    u = np.column_stack([p[:, 0], -p[:, 1]])
    g = np.broadcast_to(np.array([[1.0, 0.0], [0.0, -1.0]]), (len(p), 2, 2)).copy()
    return u, g


def _lagrange_weights(frac: np.ndarray, width: int) -> np.ndarray:
    """Weights of the ``width``-point Lagrange stencil at offsets -width/2+1 .. width/2."""
    nodes = np.arange(-width // 2 + 1, width // 2 + 1, dtype=np.float64)
    w = np.ones((len(frac), width))
    for a in range(width):
        for b in range(width):
            if a != b:
                w[:, a] *= (frac - nodes[b]) / (nodes[a] - nodes[b])
    return w


class SpectralSampler:
    """Velocity and velocity gradient of a stream function given by rfft coefficients.

    Off-grid values come from a refined tile: the band-limited fields are
    summed exactly on a ``refine``-times finer grid covering the query points,
    then a ``stencil``-point Lagrange rule interpolates on that tile.
    ``exact`` sums the Fourier series directly (the oracle).
    """

    def __init__(self, psi_hat: np.ndarray, n: int, box: float, refine: int = 4,
                 stencil: int = 8) -> None:
        self.n, self.box = n, float(box)
        self.h = 2.0 * math.pi * box / n
        self.x0 = -math.pi * box
        self.refine, self.stencil = refine, stencil
        cut = n // 3
        m = np.fft.fftfreq(n, d=1.0 / n)
        rows = np.nonzero(np.abs(m) <= cut)[0]
        k = wavenumbers(n, box)
        self.k1 = k[rows]
        self.k2 = np.arange(cut + 1) / box
        # real-part weights: interior rfft columns stand for two conjugate modes
        w2 = np.full(cut + 1, 2.0)
        w2[0] = 1.0
        c = psi_hat[np.ix_(rows, np.arange(cut + 1))] * w2[None, :] / n ** 2
        K1, K2 = self.k1[:, None], self.k2[None, :]
        # u1 = -psi_2, u2 = psi_1, grad u from second derivatives of psi
        self.coeffs = np.stack([
            -1j * K2 * c, 1j * K1 * c,
            K1 * K2 * c, K2 * K2 * c, -K1 * K1 * c,
        ])

    def _assemble(self, vals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        u1, u2, d1u1, d2u1, d1u2 = vals
        u = np.column_stack([u1, u2])
        g = np.empty((len(u1), 2, 2))
        g[:, 0, 0], g[:, 0, 1] = d1u1, d2u1
        g[:, 1, 0], g[:, 1, 1] = d1u2, -d1u1
        return u, g

    def exact(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        E1 = np.exp(1j * np.outer(p[:, 0] - self.x0, self.k1))
        E2 = np.exp(1j * np.outer(p[:, 1] - self.x0, self.k2))
        vals = np.stack([np.einsum("pi,ij,pj->p", E1, c, E2).real for c in self.coeffs])
        return self._assemble(vals)

    def __call__(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        if len(p) == 0:
            return np.zeros((0, 2)), np.zeros((0, 2, 2))
        hf = self.h / self.refine
        half = self.stencil // 2
        idx = (p - self.x0) / hf
        base = np.floor(idx).astype(np.int64)
        frac = idx - base
        lo = base.min(axis=0) - half + 1
        hi = base.max(axis=0) + half
        t1 = self.x0 + np.arange(lo[0], hi[0] + 1) * hf
        t2 = self.x0 + np.arange(lo[1], hi[1] + 1) * hf
        E1 = np.exp(1j * np.outer(t1 - self.x0, self.k1))
        E2 = np.exp(1j * np.outer(self.k2, t2 - self.x0))
        w1 = _lagrange_weights(frac[:, 0], self.stencil)
        w2 = _lagrange_weights(frac[:, 1], self.stencil)
        r1 = (base[:, 0] - lo[0])[:, None] + np.arange(-half + 1, half + 1)[None, :]
        r2 = (base[:, 1] - lo[1])[:, None] + np.arange(-half + 1, half + 1)[None, :]
        out = []
        for c in self.coeffs:
            tile = ((E1 @ c) @ E2).real
            patch = tile[r1[:, :, None], r2[:, None, :]]
            out.append(np.einsum("pa,pab,pb->p", w1, patch, w2))
        return self._assemble(np.stack(out))


# --- advection ------------------------------------------------------------------

def tracer_rates(positions: np.ndarray, jacobians: np.ndarray, sampler: Sampler,
                 active: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    dX = np.zeros_like(positions)
    dJ = np.zeros_like(jacobians)
    sel = np.ones(len(positions), dtype=bool) if active is None else active
    if sel.any():
        u, g = sampler(positions[sel])
        dX[sel] = u
        dJ[sel] = g @ jacobians[sel]
    return dX, dJ


def advect(tracers: TracerSet, sampler: Sampler, dt: float,
           trusted_radius: float | None = None) -> TracerSet:
    """One RK4 step with a frozen velocity sampler; flagged tracers stay put."""
    active = ~tracers.flagged
    X, J = tracers.positions, tracers.jacobians
    k1 = tracer_rates(X, J, sampler, active)
    k2 = tracer_rates(X + 0.5 * dt * k1[0], J + 0.5 * dt * k1[1], sampler, active)
    k3 = tracer_rates(X + 0.5 * dt * k2[0], J + 0.5 * dt * k2[1], sampler, active)
    k4 = tracer_rates(X + dt * k3[0], J + dt * k3[1], sampler, active)
    X = X + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    J = J + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    out = replace(tracers, positions=X, jacobians=J)
    return out.flag_outside(trusted_radius) if trusted_radius else out


# --- deformation functionals ------------------------------------------------------

def deformation_norm(tracers: TracerSet, region: Callable[[np.ndarray], np.ndarray] | None = None) -> float:
    """max over unflagged tracers with seeds in ``region`` of max_ij |J_ij|."""
    sel = ~tracers.flagged
    if region is not None:
        sel &= region(tracers.seeds)
    if not sel.any():
        raise ValueError("no tracers in the requested region")
    return float(np.abs(tracers.jacobians[sel]).max())


def ball_region(radius: float, center=(0.0, 0.0)):
    c = np.asarray(center, dtype=np.float64)
    return lambda seeds: np.hypot(*(seeds - c).T) <= radius


def fd_jacobian(tracers: TracerSet, spacing: float) -> tuple[np.ndarray, np.ndarray]:
    """Central differences of neighbouring tracer positions on the seed lattice.

    Returns (indices, jacobians) for tracers whose four lattice neighbours exist.
    """
    key = {tuple(np.round(s / spacing).astype(np.int64)): i for i, s in enumerate(tracers.seeds)}
    idx, jac = [], []
    X = tracers.positions
    for (a, b), i in key.items():
        nb = [key.get((a + 1, b)), key.get((a - 1, b)), key.get((a, b + 1)), key.get((a, b - 1))]
        if any(j is None for j in nb):
            continue
        J = np.empty((2, 2))
        J[:, 0] = (X[nb[0]] - X[nb[1]]) / (2 * spacing)
        J[:, 1] = (X[nb[2]] - X[nb[3]]) / (2 * spacing)
        idx.append(i)
        jac.append(J)
    return np.array(idx, dtype=np.int64), np.array(jac)


def velocity_gradient_at_origin(omega: GridField, warn_tol: float = 1e-6) -> float:
    """(4/pi) * integral over x1, x2 > 0 of omega x1 x2 / |x|^4, by grid quadrature."""
    if omega.symmetry_residual() > warn_tol and np.abs(omega.values).max() > 0:
        warnings.warn(f"vorticity is not odd-odd (defect {omega.symmetry_residual():.2e})")
    x1, x2 = omega.mesh()
    mask = (x1 > 0) & (x2 > 0)
    integral = np.sum(np.where(mask, omega.values * quadrant_kernel(x1, x2), 0.0)) * omega.h ** 2
    return float(4.0 / np.pi * integral)


@dataclass(frozen=True)
class LowerBoundReport:
    times: np.ndarray
    gradu_origin: np.ndarray
    deformation: np.ndarray
    bound: np.ndarray
    slack: np.ndarray
    min_slack: float
    advisory: bool


def deformation_lower_bound_check(times, gradu_origin, deformation, IM: float,
                                  coverage_ok: bool = True) -> LowerBoundReport:
    """Check |grad u(0,t)|_inf >= (4/pi) ||grad X^t||^-4 I_M at each sample."""
    times = np.asarray(times, dtype=np.float64)
    g = np.abs(np.asarray(gradu_origin, dtype=np.float64))
    D = np.asarray(deformation, dtype=np.float64)
    bound = 4.0 / np.pi * D ** -4.0 * IM
    with np.errstate(divide="ignore", invalid="ignore"):
        slack = np.where(bound > 0, g / bound, np.inf)
    return LowerBoundReport(times, g, D, bound, slack, float(slack.min()), not coverage_ok)


def integrated_origin_growth(times, gradu_origin) -> np.ndarray:
    """exp(int_0^t |grad u(0,s)|_inf ds) by the trapezoid rule."""
    t = np.asarray(times, dtype=np.float64)
    g = np.abs(np.asarray(gradu_origin, dtype=np.float64))
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (g[1:] + g[:-1]) * np.diff(t))])
    return np.exp(cum)
