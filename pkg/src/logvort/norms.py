"""Classical and logarithmic Sobolev norms in Fourier and real-variable form.

Conventions: the logarithm is base 2 unless ``use_natural_log(True)`` is set;
mode sums use the Plancherel measure of :mod:`logvort.field`, so
``|f|_{H^1} = ||grad f||_{L^2}`` and ``|f|_{H^0} = ||f||_{L^2}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_legendre

from .field import (GridField, SpectralField, _nyquist_free, irfft2, rfft2, to_grid,
                    to_spectral, wavenumbers)

_NATURAL_LOG = False


def use_natural_log(flag: bool) -> None:
    """Switch every log weight to the natural logarithm (default is base 2)."""
    global _NATURAL_LOG
    _NATURAL_LOG = bool(flag)


def log_(x: np.ndarray) -> np.ndarray:
    return np.log(x) if _NATURAL_LOG else np.log2(x)


def log1p_(x: np.ndarray) -> np.ndarray:
    """log(1 + x) in the active base, accurate for small x."""
    v = np.log1p(x)
    return v if _NATURAL_LOG else v / math.log(2.0)


@dataclass(frozen=True)
class NormParams:
    s: float
    alpha: float = 0.0

    def __post_init__(self) -> None:
        if self.s < 0:
            raise ValueError(f"Sobolev order must be >= 0, got {self.s}")


def lp_norm(f: GridField, p: float) -> float:
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    a = np.abs(f.values)
    if math.isinf(p):
        return float(a.max())
    return float((np.sum(a ** p) * f.h ** 2) ** (1.0 / p))


def _power(r: np.ndarray, s: float) -> np.ndarray:
    if s == 0:
        return np.ones_like(r)
    return np.where(r > 0, r, 1.0) ** (2.0 * s) * (r > 0)


def _spec(f) -> SpectralField:
    return f if isinstance(f, SpectralField) else to_spectral(f)


def sobolev_seminorm(f, s: float) -> float:
    """(sum |xi|^{2s} |fhat|^2)^{1/2}; the zero mode is ignored for s > 0."""
    F = _spec(f)
    return math.sqrt(F.weighted_sum(_power(F.abs_xi(), s)))


def sobolev_norm(f, s: float) -> float:
    F = _spec(f)
    return math.sqrt(F.l2_norm() ** 2 + sobolev_seminorm(F, s) ** 2)


def inhomogeneous_sobolev_norm(f, s: float) -> float:
    """(sum (1 + |xi|^2)^s |fhat|^2)^{1/2}."""
    F = _spec(f)
    return math.sqrt(F.weighted_sum((1.0 + F.abs_xi() ** 2) ** s))


def log_weight(r: np.ndarray, params: NormParams) -> np.ndarray:
    """|xi|^{2s} log^{2 alpha}(|xi| + 1)."""
    return _power(r, params.s) * log1p_(r) ** (2.0 * params.alpha)


def log_sobolev_seminorm(f, params: NormParams) -> float:
    F = _spec(f)
    return math.sqrt(F.weighted_sum(log_weight(F.abs_xi(), params)))


def log_sobolev_norm(f, params: NormParams) -> float:
    F = _spec(f)
    return math.sqrt(F.l2_norm() ** 2 + log_sobolev_seminorm(F, params) ** 2)


# --- real-variable form ------------------------------------------------------

def gagliardo_seminorm(f: GridField, alpha: float, radial_nodes: int = 16,
                       angular_nodes: int = 24) -> float:
    """Square root of the double integral

        int int_{|x-y| <= 1/2} |grad f(x) - grad f(y)|^2 / (|x-y|^2 log^{1-2 alpha}(1/|x-y|)) dy dx.

    The offset d = y - x runs over polar nodes: Gauss-Legendre in log|d| on
    [2h, 1/2] and the midpoint rule in angle over a half turn (the integrand
    is even in d).  Gradients at off-grid offsets come from exact spectral
    translation.  The disc |d| < 2h is dropped; its contribution is O(h^2).
    """
    if alpha > 0.5:
        raise ValueError("alpha > 1/2 is outside the supported range")
    rho_min = 2.0 * f.h
    if rho_min >= 0.5:
        raise ValueError("grid too coarse for the offset disc |x-y| <= 1/2")
    n = f.n
    k = _nyquist_free(n, f.box)
    kr = k[: n // 2 + 1].copy()
    kr[-1] = 0.0
    F = rfft2(f.values)
    G = (1j * k[:, None] * F, 1j * kr[None, :] * F)
    g = [irfft2(c, n) for c in G]

    u, wu = roots_legendre(radial_nodes)
    lo, hi = math.log(rho_min), math.log(0.5)
    logr = 0.5 * (hi - lo) * u + 0.5 * (hi + lo)
    wr = 0.5 * (hi - lo) * wu
    theta = (np.arange(angular_nodes) + 0.5) * (np.pi / angular_nodes)
    wt = 2.0 * np.pi / angular_nodes  # half turn counted twice

    total = 0.0
    for lr, w_r in zip(logr, wr):
        rho = math.exp(lr)
        # rho dr / rho^2 = d(log rho); weight 1 / log^{1-2a}(1/rho)
        weight = w_r * log_(1.0 / rho) ** (2.0 * alpha - 1.0)
        for th in theta:
            d1, d2 = rho * math.cos(th), rho * math.sin(th)
            phase = np.exp(1j * (k[:, None] * d1 + kr[None, :] * d2))
            acc = 0.0
            for comp, c in zip(g, G):
                shifted = irfft2(c * phase, n)
                acc += float(np.sum((comp - shifted) ** 2))
            total += weight * wt * acc * f.h ** 2
    return math.sqrt(total)


# --- interpolation inequality --------------------------------------------------

@dataclass(frozen=True)
class InterpolationReport:
    lhs: float
    rhs: float
    ratio: float


def check_interpolation(f, s: float, t: float, alpha: float) -> InterpolationReport:
    """|f|_{H^{t,alpha}} <= (2s-2t)^{-alpha} |f|_{H^t} log^alpha(3^s ||f||_{H^s}^2 / |f|_{H^t}^2)."""
    if not (0 <= t < s):
        raise ValueError(f"need 0 <= t < s, got s={s}, t={t}")
    if not (0 < alpha < 1):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    F = _spec(f)
    r = F.abs_xi()
    semi_t2 = F.weighted_sum(_power(r, t))
    if math.sqrt(semi_t2) < 1e-13:
        raise ValueError("degenerate input: |f|_{H^t} vanishes")
    lhs = math.sqrt(F.weighted_sum(log_weight(r, NormParams(t, alpha))))
    full_s2 = F.weighted_sum((1.0 + r ** 2) ** s)
    rhs = ((2 * s - 2 * t) ** (-alpha) * math.sqrt(semi_t2)
           * float(log_(3.0 ** s * full_s2 / semi_t2)) ** alpha)
    return InterpolationReport(lhs, rhs, lhs / rhs)


def random_band_limited(n: int, box: float, rng: np.random.Generator,
                        max_index: int | None = None) -> GridField:
    """Random real field with modes |m_i| <= max_index (default n/4)."""
    cut = n // 4 if max_index is None else max_index
    noise = rng.standard_normal((n, n))
    F = rfft2(noise)
    m = np.abs(np.fft.fftfreq(n, d=1.0 / n))
    mr = np.arange(n // 2 + 1)
    F = F * ((m[:, None] <= cut) & (mr[None, :] <= cut))
    # random spectral slope so that low and high modes both matter
    slope = rng.uniform(0.0, 3.0)
    r = np.hypot(m[:, None], mr[None, :])
    F = F / (1.0 + r) ** slope
    return GridField(irfft2(F, n), box)


def interpolation_sweep(cases, count: int = 1000, n: int = 256, box: float = 1.0,
                        seed: int = 0) -> dict:
    """Worst ratio per (s, t, alpha) over ``count`` random band-limited fields."""
    rng = np.random.default_rng(seed)
    worst = {tuple(c): 0.0 for c in cases}
    for _ in range(count):
        F = to_spectral(random_band_limited(n, box, rng))
        for c in cases:
            rep = check_interpolation(F, *c)
            worst[tuple(c)] = max(worst[tuple(c)], rep.ratio)
    return worst


def h_function(x: np.ndarray, alpha: float) -> np.ndarray:
    return x * log1p_(1.0 / x) ** alpha


def h_monotone_check(alpha: float, x: np.ndarray | None = None, slack: float = 1e-14) -> bool:
    """True iff h(x) = x log^alpha(1/x + 1) never decreases along the grid."""
    if x is None:
        x = np.logspace(-8, 8, 10_000)
    h = h_function(np.asarray(x, dtype=np.float64), alpha)
    drop = h[:-1] - h[1:]
    return bool(np.all(drop <= slack * np.maximum(1.0, np.abs(h[:-1]))))


# --- W^{N,1} -------------------------------------------------------------------

def wN1_norm(f: GridField, N: int) -> float:
    """Sum of ||D^sigma f||_{L^1} over all multi-indices with |sigma| <= N."""
    if N not in (1, 2, 3):
        raise ValueError(f"N must be 1, 2 or 3, got {N}")
    F = to_spectral(f).modes
    k = wavenumbers(f.n, f.box)
    total = lp_norm(f, 1)
    for order in range(1, N + 1):
        for i in range(order + 1):
            e1, e2 = order - i, i
            mult = (1j * k[:, None]) ** e1 * (1j * k[None, :]) ** e2
            if e1 % 2:
                mult[f.n // 2, :] = 0.0
            if e2 % 2:
                mult[:, f.n // 2] = 0.0
            total += lp_norm(to_grid(SpectralField(mult * F, f.box)), 1)
    return float(total)


def norm_rows(experiment_id: str, field_id: str, f: GridField, params: NormParams) -> list[tuple]:
    """Rows (experiment_id, field_id, s, alpha, norm_kind, value) for the norm report CSV."""
    F = to_spectral(f)
    rows = [
        ("l1", lp_norm(f, 1)), ("l2", lp_norm(f, 2)), ("linf", lp_norm(f, math.inf)),
        ("hs_semi", sobolev_seminorm(F, params.s)), ("hs", sobolev_norm(F, params.s)),
        ("hs_log_semi", log_sobolev_seminorm(F, params)), ("hs_log", log_sobolev_norm(F, params)),
    ]
    return [(experiment_id, field_id, params.s, params.alpha, kind, val) for kind, val in rows]

