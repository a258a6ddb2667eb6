"""Pseudo-spectral solver for the 2D vorticity equation on the periodic box.

    d_t omega + u . grad omega = 0,   u = grad^perp (-Lap)^{-1} omega,

with the sign convention omega = d_2 u_1 - d_1 u_2.  With the stream
function psi = (-Lap)^{-1} omega this gives u = (-d_2 psi, d_1 psi), so in
Fourier space u1_hat = -i xi_2 omega_hat / |xi|^2 and
u2_hat = i xi_1 omega_hat / |xi|^2.

Time stepping is classical RK4 with a CFL-limited step; products are
dealiased by the 2/3 rule and the state is kept inside the retained band,
which makes the semi-discrete system conserve energy and enstrophy exactly.
Passive scalars are co-advected by the same velocity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .field import GridField, _nyquist_free, irfft2, rfft2
from .lagrangian import SpectralSampler, TracerSet, tracer_rates
from .norms import log1p_, log_

DIAG_COLUMNS = ("t", "dt", "energy", "enstrophy", "l1", "l4", "linf", "grad_l4", "h2",
                "h1alpha", "gradu_inf", "bkm_ratio", "tail_fraction")


class SolverAbort(RuntimeError):
    """Raised when the run leaves the trusted regime; carries the last diagnostics."""

    def __init__(self, message: str, diagnostics: list | None = None) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics or []


@dataclass(frozen=True)
class SolverConfig:
    cfl: float = 0.5
    dt_max: float = 0.02
    tail_threshold: float = 1e-4
    max_halvings: int = 10
    alpha: float = 0.25
    refine: int = 4
    stencil: int = 8


class _Ops:
    """Wavenumber tables for rfft-layout coefficient arrays."""

    def __init__(self, n: int, box: float) -> None:
        self.n, self.box = n, float(box)
        self.h = 2.0 * math.pi * box / n
        k = _nyquist_free(n, box)
        self.k1 = k[:, None]
        k2 = np.abs(k[: n // 2 + 1])
        k2[-1] = 0.0
        self.k2 = k2[None, :]
        ksq = self.k1 ** 2 + self.k2 ** 2
        with np.errstate(divide="ignore"):
            self.inv_ksq = np.where(ksq > 0, 1.0 / np.where(ksq > 0, ksq, 1.0), 0.0)
        m1 = np.abs(np.fft.fftfreq(n, d=1.0 / n))[:, None]
        m2 = np.arange(n // 2 + 1)[None, :]
        mmax = np.maximum(m1, m2)
        self.mask = mmax <= n // 3
        self.tail = (mmax > n // 4) & self.mask
        # interior rfft columns represent two conjugate modes
        self.colw = np.full(n // 2 + 1, 2.0)
        self.colw[0] = 1.0
        self.colw[-1] = 1.0
        self.abs_xi = np.hypot(np.fft.fftfreq(n, 1.0 / n)[:, None], m2) / box
        self.parity = np.where((np.fft.fftfreq(n, 1.0 / n).astype(int)[:, None] + m2) % 2 == 0, 1.0, -1.0)

    def spectral_sum(self, weight: np.ndarray, c: np.ndarray) -> float:
        """Plancherel-normalized sum of weight * |fhat|^2 for rfft coefficients c."""
        return float(np.sum(self.colw * weight * np.abs(c) ** 2) * self.h ** 4 / (2 * math.pi * self.box) ** 2)

    def velocity_hat(self, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        psi = w * self.inv_ksq
        return -1j * self.k2 * psi, 1j * self.k1 * psi

    def transport(self, u1: np.ndarray, u2: np.ndarray, c: np.ndarray) -> np.ndarray:
        g1 = irfft2(1j * self.k1 * c, self.n)
        g2 = irfft2(1j * self.k2 * c, self.n)
        return -rfft2(u1 * g1 + u2 * g2) * self.mask


@dataclass(frozen=True)
class EulerState:
    omega: GridField
    time: float = 0.0
    passive: tuple[GridField, ...] = ()

    @property
    def n(self) -> int:
        return self.omega.n

    @property
    def box(self) -> float:
        return self.omega.box


@dataclass(frozen=True)
class VelocityField:
    u1: GridField
    u2: GridField


def _check_mean(omega: GridField) -> None:
    scale = max(np.abs(omega.values).max(), 1e-300)
    if abs(omega.values.mean()) > 1e-12 * scale:
        raise ValueError("vorticity must have zero mean for Biot-Savart inversion")


def biot_savart(omega: GridField) -> VelocityField:
    _check_mean(omega)
    ops = _Ops(omega.n, omega.box)
    u1h, u2h = ops.velocity_hat(rfft2(omega.values))
    return VelocityField(GridField(irfft2(u1h, ops.n), omega.box),
                         GridField(irfft2(u2h, ops.n), omega.box))


def velocity_gradient(omega: GridField) -> np.ndarray:
    """Grid samples of grad u, shape (2, 2, n, n) with [a, b] = d_b u_a."""
    _check_mean(omega)
    ops = _Ops(omega.n, omega.box)
    u1h, u2h = ops.velocity_hat(rfft2(omega.values))
    out = np.empty((2, 2, ops.n, ops.n))
    for a, uh in enumerate((u1h, u2h)):
        out[a, 0] = irfft2(1j * ops.k1 * uh, ops.n)
        out[a, 1] = irfft2(1j * ops.k2 * uh, ops.n)
    return out


def project(f: GridField) -> GridField:
    """Restrict a field to the dealiased band."""
    ops = _Ops(f.n, f.box)
    return GridField(irfft2(rfft2(f.values) * ops.mask, ops.n), f.box)


def rhs(state: EulerState) -> tuple[GridField, tuple[GridField, ...]]:
    """-(u . grad) applied to omega and to every passive field, dealiased."""
    ops = _Ops(state.n, state.box)
    w = rfft2(state.omega.values)
    u1h, u2h = ops.velocity_hat(w)
    u1, u2 = irfft2(u1h, ops.n), irfft2(u2h, ops.n)
    out = [GridField(irfft2(ops.transport(u1, u2, rfft2(f.values)), ops.n), state.box)
           for f in (state.omega, *state.passive)]
    return out[0], tuple(out[1:])


class _Integrator:
    """RK4 on the coefficient arrays of omega, the passive fields and the tracers."""

    def __init__(self, ops: _Ops, cfg: SolverConfig) -> None:
        self.ops, self.cfg = ops, cfg

    def stage(self, fields: list[np.ndarray], X, J, active):
        ops = self.ops
        u1h, u2h = ops.velocity_hat(fields[0])
        u1, u2 = irfft2(u1h, ops.n), irfft2(u2h, ops.n)
        d = [ops.transport(u1, u2, c) for c in fields]
        if X is None:
            return d, None, None, (u1, u2)
        sampler = SpectralSampler(fields[0] * ops.inv_ksq, ops.n, ops.box,
                                  self.cfg.refine, self.cfg.stencil)
        dX, dJ = tracer_rates(X, J, sampler, active)
        return d, dX, dJ, (u1, u2)

    def step(self, fields, X, J, active, dt):
        def add(base, inc, a):
            return [b + a * i for b, i in zip(base, inc)]

        k1 = self.stage(fields, X, J, active)
        s2 = add(fields, k1[0], 0.5 * dt)
        k2 = self.stage(s2, None if X is None else X + 0.5 * dt * k1[1],
                        None if J is None else J + 0.5 * dt * k1[2], active)
        s3 = add(fields, k2[0], 0.5 * dt)
        k3 = self.stage(s3, None if X is None else X + 0.5 * dt * k2[1],
                        None if J is None else J + 0.5 * dt * k2[2], active)
        s4 = add(fields, k3[0], dt)
        k4 = self.stage(s4, None if X is None else X + dt * k3[1],
                        None if J is None else J + dt * k3[2], active)
        new = [f + dt / 6.0 * (a + 2 * b + 2 * c + e)
               for f, a, b, c, e in zip(fields, k1[0], k2[0], k3[0], k4[0])]
        if X is not None:
            X = X + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            J = J + dt / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        return new, X, J


def step(state: EulerState, dt: float, config: SolverConfig = SolverConfig()) -> EulerState:
    ops = _Ops(state.n, state.box)
    fields = [rfft2(f.values) * ops.mask for f in (state.omega, *state.passive)]
    new, _, _ = _Integrator(ops, config).step(fields, None, None, None, dt)
    out = [GridField(irfft2(c, ops.n), state.box) for c in new]
    return EulerState(out[0], state.time + dt, tuple(out[1:]))


# --- diagnostics ------------------------------------------------------------------

def _origin_gradient(ops: _Ops, w: np.ndarray) -> float:
    """|grad u(0)|_inf from the spectrum: at the origin grad u is diagonal for odd-odd data."""
    u1h, _ = ops.velocity_hat(w)
    d1u1 = np.sum(ops.colw * (1j * ops.k1 * u1h * ops.parity).real) / ops.n ** 2
    d2u1 = np.sum(ops.colw * (1j * ops.k2 * u1h * ops.parity).real) / ops.n ** 2
    return float(max(abs(d1u1), abs(d2u1)))


def origin_velocity_gradient(omega: GridField) -> float:
    """Spectral |grad u(0)|_inf (max-abs entry of the 2x2 matrix at the origin)."""
    g = velocity_gradient(omega)[:, :, omega.n // 2, omega.n // 2]
    return float(np.abs(g).max())


@dataclass(frozen=True)
class InitialNorms:
    l2: float
    linf: float


def _diagnostics(ops: _Ops, w: np.ndarray, t: float, dt: float, init: InitialNorms,
                 alpha: float) -> dict:
    n, h = ops.n, ops.h
    omega = irfft2(w, n)
    u1h, u2h = ops.velocity_hat(w)
    energy = 0.5 * (ops.spectral_sum(1.0, u1h) + ops.spectral_sum(1.0, u2h))
    enstrophy = ops.spectral_sum(1.0, w)
    g1 = irfft2(1j * ops.k1 * w, n)
    g2 = irfft2(1j * ops.k2 * w, n)
    grad_l4 = (np.sum((g1 * g1 + g2 * g2) ** 2) * h * h) ** 0.25
    r = ops.abs_xi
    h2 = math.sqrt(enstrophy + ops.spectral_sum(r ** 4, w))
    h1a = math.sqrt(enstrophy + ops.spectral_sum(r ** 2 * log1p_(r) ** (2 * alpha), w))
    gu = 0.0
    for uh in (u1h, u2h):
        gu = max(gu, np.abs(irfft2(1j * ops.k1 * uh, n)).max(), np.abs(irfft2(1j * ops.k2 * uh, n)).max())
    bkm = gu / (1.0 + init.l2 + init.linf * float(log_(2.0 + grad_l4)))
    tail = ops.spectral_sum(ops.tail, w) / enstrophy if enstrophy > 0 else 0.0
    a = np.abs(omega)
    return {
        "t": t, "dt": dt, "energy": energy, "enstrophy": enstrophy,
        "l1": float(np.sum(a) * h * h), "l4": float((np.sum(a ** 4) * h * h) ** 0.25),
        "linf": float(a.max()), "grad_l4": float(grad_l4), "h2": h2, "h1alpha": h1a,
        "gradu_inf": float(gu), "bkm_ratio": float(bkm), "tail_fraction": float(tail),
    }


def diagnostics_norm_timeseries(state: EulerState, initial: EulerState | None = None,
                                alpha: float = 0.25) -> dict:
    ops = _Ops(state.n, state.box)
    w0 = (initial or state).omega.values
    init = InitialNorms(float(np.sqrt(np.sum(w0 ** 2)) * ops.h), float(np.abs(w0).max()))
    return _diagnostics(ops, rfft2(state.omega.values), state.time, 0.0, init, alpha)


# --- runs ---------------------------------------------------------------------------

@dataclass
class RunResult:
    state: EulerState
    diagnostics: list[dict]
    snapshots: list[EulerState]
    origin_times: np.ndarray
    origin_gradient: np.ndarray
    tracers: list[tuple[float, TracerSet]] = field(default_factory=list)
    steps: int = 0


def cfl_dt(ops: _Ops, w: np.ndarray, cfl: float) -> float:
    u1h, u2h = ops.velocity_hat(w)
    umax = max(np.abs(irfft2(u1h, ops.n)).max(), np.abs(irfft2(u2h, ops.n)).max())
    return math.inf if umax == 0 else cfl * ops.h / umax


def run(state: EulerState, t_end: float, config: SolverConfig = SolverConfig(),
        sample_times: Sequence[float] | None = None, tracers: TracerSet | None = None,
        dt: float | None = None, project_initial: bool = True,
        callback: Callable[[EulerState], None] | None = None) -> RunResult:
    """Integrate from ``state.time`` to ``t_end`` (which may be earlier: backward run).

    Diagnostics and snapshots are taken at ``sample_times`` (default: start
    and end).  A fixed ``dt`` above the CFL limit is halved up to
    ``config.max_halvings`` times before aborting.
    """
    ops = _Ops(state.n, state.box)
    _check_mean(state.omega)
    t0 = state.time
    direction = 1.0 if t_end >= t0 else -1.0
    samples = sorted(set([t0, t_end] if sample_times is None else [t0, *sample_times, t_end]),
                     reverse=direction < 0)
    samples = [s for s in samples if (s - t0) * direction >= 0 and (t_end - s) * direction >= 0]

    fields = [rfft2(f.values) for f in (state.omega, *state.passive)]
    if project_initial:
        fields = [c * ops.mask for c in fields]
    w0 = irfft2(fields[0], ops.n)
    init = InitialNorms(float(np.sqrt(np.sum(w0 ** 2)) * ops.h), float(np.abs(w0).max()))

    X = J = active = None
    trusted = math.pi * ops.box / 2.0
    if tracers is not None:
        X, J = tracers.positions.copy(), tracers.jacobians.copy()
        active = ~tracers.flagged
    integ = _Integrator(ops, config)

    def snapshot(t):
        out = [GridField(irfft2(c, ops.n), ops.box) for c in fields]
        return EulerState(out[0], t, tuple(out[1:]))

    def tracer_snapshot():
        return TracerSet(tracers.seeds, X.copy(), J.copy(), ~active)

    diags: list[dict] = []
    snaps: list[EulerState] = []
    tr_hist: list[tuple[float, TracerSet]] = []
    ot, og = [t0], [_origin_gradient(ops, fields[0])]
    t, steps, last_dt = t0, 0, 0.0

    def record(t):
        d = _diagnostics(ops, fields[0], t, last_dt, init, config.alpha)
        diags.append(d)
        snaps.append(snapshot(t))
        if tracers is not None:
            tr_hist.append((t, tracer_snapshot()))
        if d["tail_fraction"] > config.tail_threshold:
            raise SolverAbort(f"spectral tail {d['tail_fraction']:.2e} exceeds "
                              f"{config.tail_threshold:.0e} at t={t:.4g}", diags)

    for target in samples:
        while (target - t) * direction > 1e-14 * max(1.0, abs(target)):
            limit = min(config.dt_max, cfl_dt(ops, fields[0], config.cfl))
            if dt is None:
                h = limit
            else:
                h, halvings = dt, 0
                while h > limit:
                    h *= 0.5
                    halvings += 1
                    if halvings > config.max_halvings:
                        raise SolverAbort(f"CFL violation persists after {config.max_halvings} "
                                          f"halvings at t={t:.4g}", diags)
            remaining = abs(target - t)
            last = h >= remaining
            h = min(h, remaining)
            fields, X, J = integ.step(fields, X, J, active, direction * h)
            t = target if last else t + direction * h
            last_dt = direction * h
            steps += 1
            ot.append(t)
            og.append(_origin_gradient(ops, fields[0]))
            if X is not None:
                far = np.hypot(X[:, 0], X[:, 1]) > trusted
                active = active & ~far
            if callback is not None:
                callback(snapshot(t))
        record(target)

    return RunResult(snaps[-1], diags, snaps, np.array(ot), np.array(og), tr_hist, steps)
