"""Explicit initial-data families: bump, quadrupole, multiscale lattice, perturbation.

Bump profile (closed form)::

    psi(t)  = exp(-1/t) for t > 0, else 0
    step(t) = psi(t) / (psi(t) + psi(1 - t))          (0 on t <= 0, 1 on t >= 1)
    chi(x)  = step(2 - 2|x|)

so chi = 1 on |x| <= 1/2, chi = 0 on |x| >= 1, chi is radial, monotone and C^inf.

All data is a finite signed sum of dilated bumps ``w * chi(|x - c| / rho)``
(a :class:`BumpSum`).  That structure is what the quadrature oracles use.

Two desk-scale knobs keep the formulas literal while making the data
resolvable on a grid:

* ``sharpness`` replaces the factor 64 inside the quadrupole
  (bump radius ``1/sharpness`` around ``(+-1, +-1)``);
* ``scale`` dilates the whole lattice, ``f(x) -> f(x / scale)``.

Dilation leaves ``I_M`` and the gradient L2 norm unchanged; sharpness only
changes the constant ``I`` of the quadrupole.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import integrate
from scipy.special import expit

from .field import GridField

DEFAULT_SHARPNESS = 64.0


def smooth_step(t: np.ndarray) -> np.ndarray:
    t = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
    inner = (t > 0.0) & (t < 1.0)
    safe = np.where(inner, t, 0.5)
    with np.errstate(divide="ignore", over="ignore"):  # subnormal t: expit(-inf) = 0
        out = expit(1.0 / (1.0 - safe) - 1.0 / safe)
    return np.where(inner, out, t)


def chi_radial(r: np.ndarray) -> np.ndarray:
    return smooth_step(2.0 - 2.0 * np.asarray(r, dtype=np.float64))


def chi(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    return chi_radial(np.hypot(x1, x2))


def make_chi() -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    return chi


@dataclass(frozen=True)
class Bump:
    """``weight * chi(|x - center| / radius)``."""

    center: tuple[float, float]
    radius: float
    weight: float


@dataclass(frozen=True)
class BumpSum:
    """Finite sum of dilated bumps, usable as a sampler ``f(x1, x2)``."""

    bumps: tuple[Bump, ...]

    def __call__(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        x1 = np.asarray(x1, dtype=np.float64)
        x2 = np.asarray(x2, dtype=np.float64)
        out = np.zeros(np.broadcast(x1, x2).shape)
        for b in self.bumps:
            out += b.weight * chi_radial(np.hypot(x1 - b.center[0], x2 - b.center[1]) / b.radius)
        return out

    def scaled(self, factor: float) -> "BumpSum":
        return BumpSum(tuple(Bump(b.center, b.radius, b.weight * factor) for b in self.bumps))

    @property
    def support_radius(self) -> float:
        if not self.bumps:
            return 0.0
        return max(math.hypot(*b.center) + b.radius for b in self.bumps)

    @property
    def min_radius(self) -> float:
        return min(b.radius for b in self.bumps)

    def sample(self, n: int, box: float) -> GridField:
        return GridField.from_function(self, n, box)


def quadrupole(sharpness: float = DEFAULT_SHARPNESS, scale: float = 1.0,
               weight: float = 1.0) -> BumpSum:
    """sum_{a1,a2 = +-1} a1 a2 chi(sharpness (x/scale - a)), times ``weight``."""
    bumps = tuple(
        Bump((a1 * scale, a2 * scale), scale / sharpness, weight * a1 * a2)
        for a1 in (1, -1) for a2 in (1, -1)
    )
    return BumpSum(bumps)


def make_eta(sharpness: float = DEFAULT_SHARPNESS) -> BumpSum:
    return quadrupole(sharpness)


# --- index windows and lattice --------------------------------------------

def _int_power(base: int, exponent: float, rounding: Callable[[float], int]) -> int:
    value = float(base) ** exponent
    nearest = round(value)
    if abs(value - nearest) <= 1e-9 * max(1.0, value):
        return int(nearest)
    return int(rounding(value))


def index_window(M: int, alpha: float) -> tuple[int, int]:
    """(M, 2^M + M) at alpha = 1/2, else (floor(2^M)^p, ceil(2^M + M)^p), p = 1/(1 - 2 alpha)."""
    if M < 2:
        raise ValueError(f"M must be >= 2, got {M}")
    if not (0.0 < alpha <= 0.5):
        raise ValueError(f"alpha must lie in (0, 1/2], got {alpha}")
    if alpha == 0.5:
        return M, 2 ** M + M
    p = 1.0 / (1.0 - 2.0 * alpha)
    return _int_power(2 ** M, p, math.floor), _int_power(2 ** M + M, p, math.ceil)


def weight_sum(a: int, b: int, alpha: float) -> float:
    k = np.arange(a, b + 1, dtype=np.float64)
    return float(np.sum(k ** (-2.0 * alpha)))


def weight_sum_lower_bound(a: int, b: int, alpha: float) -> float:
    """Integral of k^(-2 alpha) over [a, b] (natural log at alpha = 1/2)."""
    if alpha == 0.5:
        return math.log(b) - math.log(a)
    e = 1.0 - 2.0 * alpha
    return (b ** e - a ** e) / e


def lattice_prefactor(M: int) -> float:
    return 1.0 / (math.sqrt(M) * math.log2(M))


@dataclass(frozen=True)
class LatticeSpec:
    """Multiscale lattice f_M = amplitude / (sqrt(M) log2 M) sum_k k^(-2 alpha) eta(2^k x / scale).

    ``k_range`` overrides the literal index window; ``amplitude`` is a
    time-rescaling knob for solver runs (1 reproduces the literal data).
    """

    M: int
    alpha: float
    k_range: tuple[int, int] | None = None
    sharpness: float = DEFAULT_SHARPNESS
    scale: float = 1.0
    amplitude: float = 1.0

    def __post_init__(self) -> None:
        if self.M < 2:
            raise ValueError(f"M must be >= 2, got {self.M}")
        if not (0.0 < self.alpha <= 0.5):
            raise ValueError(f"alpha must lie in (0, 1/2], got {self.alpha}")
        a, b = self.window
        if not (1 <= a <= b):
            raise ValueError(f"index window must satisfy 1 <= a <= b, got {(a, b)}")
        # distinct dyadic scales are disjoint iff (sqrt2 + 1/s) < 2 (sqrt2 - 1/s)
        if 3.0 / self.sharpness >= math.sqrt(2.0) and b > a:
            raise ValueError(f"sharpness {self.sharpness} makes neighbouring scales overlap")
        if self.sharpness < 1.0:
            raise ValueError("sharpness below 1 makes the four bumps cross the axes")

    @property
    def window(self) -> tuple[int, int]:
        if self.k_range is not None:
            return int(self.k_range[0]), int(self.k_range[1])
        return index_window(self.M, self.alpha)

    def weights(self) -> dict[int, float]:
        a, b = self.window
        pre = self.amplitude * lattice_prefactor(self.M)
        return {k: pre * k ** (-2.0 * self.alpha) for k in range(a, b + 1)}

    def bumps(self) -> BumpSum:
        out: list[Bump] = []
        for k, w in self.weights().items():
            out.extend(quadrupole(self.sharpness, self.scale * 2.0 ** -k, w).bumps)
        return BumpSum(tuple(out))

    def finest_radius(self) -> float:
        return self.scale * 2.0 ** -self.window[1] / self.sharpness

    def support_radius(self) -> float:
        return self.scale * 2.0 ** -self.window[0] * (math.sqrt(2.0) + 1.0 / self.sharpness)


def make_fM(spec: LatticeSpec, n: int, box: float) -> GridField:
    h = 2.0 * math.pi * box / n
    if h > spec.finest_radius() / 8.0:
        raise ValueError(
            f"finest bump radius {spec.finest_radius():.3g} needs grid spacing <= "
            f"{spec.finest_radius() / 8:.3g} (have {h:.3g}); override k_range, sharpness or scale"
        )
    if spec.support_radius() >= box * math.pi:
        raise ValueError("lattice support does not fit in the periodic box")
    return spec.bumps().sample(n, box)


def sample_on_grid(sampler: Callable, n: int, box: float) -> GridField:
    return GridField.from_function(sampler, n, box)


# --- quadrature of the deformation functional ------------------------------

def quadrant_kernel(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    r2 = x1 * x1 + x2 * x2
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(r2 > 0, x1 * x2 / (r2 * r2), 0.0)


def _bump_integral(b: Bump, g: Callable[[np.ndarray, np.ndarray], np.ndarray],
                   tol: float = 1e-11) -> float:
    """integral of chi(|y|/rho) g(c + y) dy in polar coordinates about the bump center.

    The angular integral is periodic and smooth, so the trapezoid rule is
    refined by doubling until it stops changing; the radial integral is
    adaptive Gauss-Kronrod split at the edge of the plateau.
    """
    cx, cy = b.center

    def angular(r: float, m: int) -> float:
        th = (np.arange(m) + 0.5) * (2.0 * np.pi / m)
        return float(np.mean(g(cx + r * np.cos(th), cy + r * np.sin(th)))) * 2.0 * np.pi

    def radial(r: float) -> float:
        m, prev = 32, angular(r, 32)
        while m < 4096:
            m *= 2
            cur = angular(r, m)
            if abs(cur - prev) <= 1e-14 * max(1.0, abs(cur)):
                return cur * r * float(chi_radial(r / b.radius))
            prev = cur
        return prev * r * float(chi_radial(r / b.radius))

    rho = b.radius
    total = 0.0
    for lo, hi in ((0.0, 0.5 * rho), (0.5 * rho, rho)):
        val, _ = integrate.quad(radial, lo, hi, epsabs=0.0, epsrel=tol, limit=200)
        total += val
    return b.weight * total


def bump_integral(f: BumpSum, g: Callable[[np.ndarray, np.ndarray], np.ndarray],
                  select: Callable[[Bump], bool] | None = None) -> float:
    return float(sum(_bump_integral(b, g) for b in f.bumps if select is None or select(b)))


def _in_first_quadrant(b: Bump) -> bool:
    return b.center[0] - b.radius >= 0.0 and b.center[1] - b.radius >= 0.0


def symmetry_defect(sampler: Callable, radius: float, n_points: int = 10_000,
                    seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    x1 = rng.uniform(-radius, radius, n_points)
    x2 = rng.uniform(-radius, radius, n_points)
    v = sampler(x1, x2)
    d = max(np.abs(v + sampler(-x1, x2)).max(), np.abs(v + sampler(x1, -x2)).max())
    return float(d / max(np.abs(v).max(), 1e-300))


def compute_IM(f) -> float:
    """integral over x1, x2 > 0 of f(x) x1 x2 / |x|^4.

    ``f`` may be a :class:`BumpSum` (adaptive quadrature over the
    first-quadrant bumps), a :class:`GridField` (grid quadrature) or a
    generic callable with a ``support_radius`` attribute.
    """
    if isinstance(f, GridField):
        x1, x2 = f.mesh()
        mask = (x1 > 0) & (x2 > 0)
        return float(np.sum(np.where(mask, f.values * quadrant_kernel(x1, x2), 0.0)) * f.h ** 2)
    if isinstance(f, BumpSum):
        straddle = [b for b in f.bumps if not _in_first_quadrant(b)
                    and b.center[0] + b.radius > 0 and b.center[1] + b.radius > 0]
        if straddle:
            raise ValueError("bumps straddling the axes are not supported by the bump quadrature")
        return bump_integral(f, quadrant_kernel, _in_first_quadrant)
    radius = float(getattr(f, "support_radius"))

    def integrand(x2, x1):
        return float(f(np.array(x1), np.array(x2)) * quadrant_kernel(np.array(x1), np.array(x2)))

    val, _ = integrate.dblquad(integrand, 0.0, radius, 0.0, radius, epsabs=1e-13, epsrel=1e-10)
    return float(val)


@lru_cache(maxsize=None)
def eta_functional(sharpness: float = DEFAULT_SHARPNESS) -> float:
    """I = integral over the first quadrant of eta x1 x2 / |x|^4 (scale invariant)."""
    return compute_IM(quadrupole(sharpness))


def lattice_IM_closed_form(spec: LatticeSpec) -> float:
    a, b = spec.window
    return (eta_functional(spec.sharpness) * spec.amplitude * lattice_prefactor(spec.M)
            * weight_sum(a, b, spec.alpha))


def amplitude_for_strain(spec: LatticeSpec, strain: float) -> float:
    """Amplitude giving |grad u(0)|_inf = strain at t=0, i.e. (4/pi) I_M = strain."""
    unit = LatticeSpec(spec.M, spec.alpha, spec.window, spec.sharpness, spec.scale, 1.0)
    return strain * math.pi / (4.0 * lattice_IM_closed_form(unit))


# --- radial oracles ---------------------------------------------------------

def chi_moment(power: int = 1) -> float:
    """2 pi int_0^1 chi(r)^power r dr = integral of chi^power over the plane."""
    val = 0.0
    for lo, hi in ((0.0, 0.5), (0.5, 1.0)):
        v, _ = integrate.quad(lambda r: float(chi_radial(r)) ** power * r, lo, hi,
                              epsabs=0.0, epsrel=1e-13)
        val += v
    return 2.0 * math.pi * val


def chi_l2_norm() -> float:
    return math.sqrt(chi_moment(2))


def chi_gradient_l2_norm() -> float:
    """||grad chi||_L2 from the radial profile (2 pi int chi'(r)^2 r dr)."""
    def dchi(r: float) -> float:
        t = 2.0 - 2.0 * r
        if t <= 0.0 or t >= 1.0:
            return 0.0
        s = float(smooth_step(t))
        dlog = 1.0 / (1.0 - t) ** 2 + 1.0 / t ** 2
        return -2.0 * s * (1.0 - s) * dlog

    v, _ = integrate.quad(lambda r: dchi(r) ** 2 * r, 0.5, 1.0, epsabs=0.0, epsrel=1e-13, limit=200)
    return math.sqrt(2.0 * math.pi * v)


# --- perturbation -------------------------------------------------------------

@dataclass(frozen=True)
class PerturbationSpec:
    """beta = sin(k x1) phi(x) / (k log2^alpha(k+1) sqrt(L)).

    ``phi`` carries bumps of radius ``delta`` at (+-x0_1, +-x0_2) with sign a2
    and height 1/delta: even in x1, odd in x2.
    """

    k: float
    x0: tuple[float, float]
    L: float
    delta: float | None = None
    r0: float | None = None
    R0: float | None = None

    def __post_init__(self) -> None:
        if self.k <= 0:
            raise ValueError("k must be positive")
        if self.x0[0] * self.x0[1] == 0.0:
            raise ValueError("x0 must lie off the axes")
        if self.L <= 0:
            raise ValueError("L must be positive")
        d = self.width
        if d <= 0:
            raise ValueError("delta must be positive")
        if d >= min(abs(self.x0[0]), abs(self.x0[1])):
            raise ValueError("delta too large: the four bumps overlap")
        if self.R0 is not None and math.hypot(*self.x0) + d > self.R0:
            raise ValueError("delta too large: bumps escape B_R0")

    @property
    def width(self) -> float:
        if self.delta is not None:
            return float(self.delta)
        cands = [abs(self.x0[0]), abs(self.x0[1])]
        if self.r0 is not None:
            cands.append(self.r0)
        return min(cands) / 8.0

    def prefactor(self, alpha: float) -> float:
        return 1.0 / (self.k * math.log2(self.k + 1.0) ** alpha * math.sqrt(self.L))


def phi_bumps(delta: float, x0: Sequence[float]) -> BumpSum:
    bumps = tuple(
        Bump((a1 * abs(x0[0]), a2 * abs(x0[1])), delta, a2 / delta)
        for a1 in (1, -1) for a2 in (1, -1)
    )
    return BumpSum(bumps)


@dataclass(frozen=True)
class BetaSampler:
    phi: BumpSum
    k: float
    amplitude: float

    def __call__(self, x1, x2):
        return self.amplitude * np.sin(self.k * np.asarray(x1)) * self.phi(x1, x2)

    @property
    def support_radius(self) -> float:
        return self.phi.support_radius


def beta_sampler(spec: PerturbationSpec, alpha: float) -> BetaSampler:
    return BetaSampler(phi_bumps(spec.width, spec.x0), float(spec.k), spec.prefactor(alpha))


def _check_resolves(n: int, box: float, radius: float, what: str) -> None:
    h = 2.0 * math.pi * box / n
    if h > radius / 8.0:
        raise ValueError(f"{what}: bump radius {radius:.3g} needs grid spacing <= {radius / 8:.3g}")


def make_phi(delta: float, x0: Sequence[float], n: int, box: float) -> GridField:
    if x0[0] * x0[1] == 0.0:
        raise ValueError("x0 must lie off the axes")
    if delta >= min(abs(x0[0]), abs(x0[1])):
        raise ValueError("delta too large: the four bumps overlap")
    _check_resolves(n, box, delta, "phi")
    return phi_bumps(delta, x0).sample(n, box)


def make_beta(spec: PerturbationSpec, alpha: float, n: int, box: float) -> GridField:
    h = 2.0 * math.pi * box / n
    if 2.0 * math.pi / spec.k < 8.0 * h:
        raise ValueError(f"k={spec.k} needs at least 8 grid points per oscillation "
                         f"(n >= {int(math.ceil(8 * spec.k * box))})")
    _check_resolves(n, box, spec.width, "beta")
    s = beta_sampler(spec, alpha)
    if s.support_radius >= box * math.pi:
        raise ValueError("perturbation support does not fit in the periodic box")
    return GridField.from_function(s, n, box)
