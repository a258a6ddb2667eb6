"""Oscillatory integrals int f exp(-i phi): quadrature, a constructive nonstationary
phase bound, and the frequency-shift study for area-preserving linear maps.

Conventions
-----------
* ``|g|_{C^N}`` for a vector field g is the max over components of the sum over
  multi-indices |s| <= N of sup |d^s g_j|; sups are taken over B_{R+1}(0),
  which contains every cover ball used by the bound.
* The bound constant K_N is obtained by tracing the integration-by-parts
  chain (see :func:`traced_bound`) and evaluating it at lambda = G = 1.
  Every term of the chain is a monomial lambda^{-N-p} G^p with p <= N, so
  for G >= lambda it is dominated by K_N G^N lambda^{-2N}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .field import GridField, to_spectral
from .initdata import chi
from .norms import log1p_, wN1_norm

Amplitude = Callable[[np.ndarray, np.ndarray], np.ndarray]

# sup_x |d_1^i chi(x)| for i = 0..4, measured on a 1/800 lattice, inflated by 1.1
CHI_DERIVATIVE_SUP = (1.0, 4.4, 43.3, 973.0, 40104.0)

# a point lies in at most this many cover balls B_r(x_k): the centres within r
# are s-separated, s = (sqrt3/2) r, so (2r/s + 1)^2 = (4/sqrt3 + 1)^2 < 11 bounds them
MAX_OVERLAP = 10

STUDY_COLUMNS = ("k", "L", "xi_cut", "max_low_freq", "total_mass", "high_mass_fraction",
                 "h1alpha_proxy")


# --- phases ----------------------------------------------------------------------

class Phase:
    """A smooth phase with analytic partial derivatives.

    ``partial(x1, x2, i, j)`` returns d_1^i d_2^j phi.
    """

    def __call__(self, x1, x2):
        return self.partial(x1, x2, 0, 0)

    def partial(self, x1, x2, i: int, j: int):  # pragma: no cover - interface
        raise NotImplementedError

    def gradient(self, x1, x2):
        return self.partial(x1, x2, 1, 0), self.partial(x1, x2, 0, 1)


@dataclass(frozen=True)
class LinearPhase(Phase):
    """phi = a . x"""

    a: tuple[float, float]

    def partial(self, x1, x2, i, j):
        x1 = np.asarray(x1, dtype=np.float64)
        if i + j == 0:
            return self.a[0] * x1 + self.a[1] * np.asarray(x2)
        if i + j == 1:
            return np.full_like(x1, self.a[0] if i else self.a[1])
        return np.zeros_like(x1)


@dataclass(frozen=True)
class QuadraticPhase(Phase):
    """phi = a . x + (q11 x1^2 + 2 q12 x1 x2 + q22 x2^2) / 2"""

    a: tuple[float, float] = (0.0, 0.0)
    q: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def partial(self, x1, x2, i, j):
        x1 = np.asarray(x1, dtype=np.float64)
        x2 = np.asarray(x2, dtype=np.float64)
        q11, q12, q22 = self.q
        if i + j == 0:
            return (self.a[0] * x1 + self.a[1] * x2
                    + 0.5 * (q11 * x1 * x1 + 2 * q12 * x1 * x2 + q22 * x2 * x2))
        if (i, j) == (1, 0):
            return self.a[0] + q11 * x1 + q12 * x2
        if (i, j) == (0, 1):
            return self.a[1] + q12 * x1 + q22 * x2
        if i + j == 2:
            return np.full_like(x1, {(2, 0): q11, (1, 1): q12, (0, 2): q22}[(i, j)])
        return np.zeros_like(x1)


@dataclass(frozen=True)
class SinePhase(Phase):
    """phi = a . x + eps sin(b . x): a phase with nonzero derivatives of every order."""

    a: tuple[float, float]
    eps: float
    b: tuple[float, float]

    def partial(self, x1, x2, i, j):
        x1 = np.asarray(x1, dtype=np.float64)
        x2 = np.asarray(x2, dtype=np.float64)
        arg = self.b[0] * x1 + self.b[1] * x2
        order = i + j
        # d^order/d(arg)^order sin = sin(arg + order pi/2)
        osc = self.eps * self.b[0] ** i * self.b[1] ** j * np.sin(arg + order * math.pi / 2)
        if order == 0:
            return self.a[0] * x1 + self.a[1] * x2 + osc
        if order == 1:
            return (self.a[0] if i else self.a[1]) + osc
        return osc


@dataclass(frozen=True)
class OscProblem:
    """Data of a nonstationary phase estimate: int f exp(-i phi) over B_R(0)."""

    f: Amplitude
    phi: Phase
    lam: float
    R: float
    N: int = 1

    def __post_init__(self) -> None:
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if self.R <= 0:
            raise ValueError(f"support radius must be positive, got {self.R}")
        if self.N not in (1, 2, 3):
            raise ValueError(f"N must be 1, 2 or 3, got {self.N}")


def radial_amplitude(profile: Callable[[np.ndarray], np.ndarray], radius: float,
                     center=(0.0, 0.0)) -> Amplitude:
    c1, c2 = center

    def f(x1, x2):
        return profile(np.hypot(np.asarray(x1) - c1, np.asarray(x2) - c2) / radius)
    return f


def bump_amplitude(radius: float = 1.0, center=(0.0, 0.0)) -> Amplitude:
    c1, c2 = center
    return lambda x1, x2: chi((np.asarray(x1) - c1) / radius, (np.asarray(x2) - c2) / radius)


# --- sampling certification ---------------------------------------------------------

def _disc_lattice(radius: float, spacing: float, center=(0.0, 0.0)):
    m = int(math.ceil(radius / spacing))
    g = np.arange(-m, m + 1) * spacing
    x1, x2 = np.meshgrid(g + center[0], g + center[1], indexing="ij")
    keep = np.hypot(x1 - center[0], x2 - center[1]) <= radius
    return x1[keep], x2[keep]


def _sample_spacing(problem: OscProblem, count: int = 400) -> float:
    return 2.0 * (problem.R + 1.0) / count


def phase_gradient_norm(phi: Phase, radius: float, N: int, spacing: float,
                        margin: float = 1.1) -> float:
    """Sampled |grad phi|_{C^N} over B_radius(0), times ``margin``."""
    x1, x2 = _disc_lattice(radius, spacing)
    best = 0.0
    for comp in ((1, 0), (0, 1)):
        total = 0.0
        for order in range(N + 1):
            for i in range(order + 1):
                total += float(np.abs(phi.partial(x1, x2, comp[0] + order - i, comp[1] + i)).max())
        best = max(best, total)
    return margin * best


def certify_lambda(problem: OscProblem, spacing: float | None = None, margin: float = 1.1) -> float:
    """Smallest sampled |grad phi|_inf on supp f, divided by ``margin``.

    Raises if this falls below the claimed lambda or if f does not vanish
    outside B_R.
    """
    h = spacing or _sample_spacing(problem)
    x1, x2 = _disc_lattice(problem.R + 4 * h, h)
    fv = np.abs(problem.f(x1, x2))
    outside = np.hypot(x1, x2) > problem.R
    if np.any(fv[outside] > 0):
        raise ValueError(f"amplitude does not vanish outside B_{problem.R:g}")
    s1, s2 = x1[fv > 0], x2[fv > 0]
    if s1.size == 0:
        return math.inf
    g1, g2 = problem.phi.gradient(s1, s2)
    measured = float(np.maximum(np.abs(g1), np.abs(g2)).min()) / margin
    if measured < problem.lam:
        raise ValueError(f"|grad phi|_inf drops to {measured:.4g} < lambda = {problem.lam:g} on supp f")
    return measured


# --- quadrature ------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureResult:
    value: complex
    error: float
    nodes: int


def osc_quadrature(problem: OscProblem, points_per_wave: int = 10,
                   max_nodes: int = 4096, min_nodes: int = 64) -> QuadratureResult:
    """Midpoint rule for int f exp(-i phi) over [-R, R]^2.

    The integrand is smooth and vanishes near the boundary, so the rule
    converges faster than any power; the error estimate compares spacing
    h with 2h.  Refuses if the phase needs more than ``max_nodes`` per axis.
    """
    R = problem.R
    gmax = phase_gradient_norm(problem.phi, R, 0, _sample_spacing(problem), margin=1.0)
    need = max(min_nodes, int(math.ceil(2 * R * gmax * points_per_wave / (2 * math.pi))))
    need += need % 2
    if 2 * need > max_nodes:
        raise ValueError(f"phase too fast for the node budget: need {2 * need} nodes per axis, "
                         f"budget is {max_nodes}")

    def rule(m: int) -> complex:
        h = 2 * R / m
        g = -R + (np.arange(m) + 0.5) * h
        total = 0j
        for row in np.array_split(np.arange(m), max(1, m // 256)):
            x1, x2 = np.meshgrid(g[row], g, indexing="ij")
            total += np.sum(problem.f(x1, x2) * np.exp(-1j * problem.phi(x1, x2)))
        return total * h * h

    coarse, fine = rule(need), rule(2 * need)
    return QuadratureResult(complex(fine), float(abs(fine - coarse)), 2 * need)


# --- the traced bound ----------------------------------------------------------------

def _b_bounds(B0: float, A: list[float], N: int) -> list[float]:
    """Bounds on |d^m (1/a)| from a (1/a) = 1 and |d^i a| <= A[i]."""
    B = [B0]
    for m in range(1, N + 1):
        B.append(B0 * sum(math.comb(m, i) * A[i] * B[m - i] for i in range(1, m + 1)))
    return B


def _chain_coefficients(B: list[float], N: int) -> list[float]:
    """Bounds c_m with |T^N F| <= sum_m c_m |d^m F| for T F = d(bF)."""
    b0, b1 = B[0], B[1]
    if N == 1:
        return [b1, b0]
    b2 = B[2]
    if N == 2:
        return [b1 * b1 + b0 * b2, 3 * b0 * b1, b0 * b0]
    b3 = B[3]
    return [b1 ** 3 + 4 * b0 * b1 * b2 + b0 * b0 * b3,
            7 * b0 * b1 * b1 + 4 * b0 * b0 * b2,
            6 * b0 * b0 * b1,
            b0 ** 3]


def _partition_bounds(r: float, N: int) -> list[float]:
    """Gamma_i >= sum_k |d^i g_k| on supp f, where g_k = h_k / S, S = sum_l h_l >= 1.

    With H_l >= sum_k |d^l h_k| and P_m >= S |d^m (1/S)| (from S (1/S) = 1),
    Leibniz gives sum_k |d^i g_k| <= P_i + sum_{l>=1} C(i,l) H_l P_{i-l} = 2 P_i
    for i >= 1, using sum_k h_k = S and |d^m (1/S)| <= S |d^m (1/S)|.
    """
    H = [MAX_OVERLAP * CHI_DERIVATIVE_SUP[i] / r ** i for i in range(N + 1)]
    P = [1.0]
    for m in range(1, N + 1):
        P.append(sum(math.comb(m, l) * H[l] * P[m - l] for l in range(1, m + 1)))
    return [1.0] + [2.0 * P[i] for i in range(1, N + 1)]


def traced_bound(lam: float, A: list[float], G1: float, N: int, fnorm: float) -> float:
    """Integration-by-parts bound sum_k int |T^N (f g_k)| <= this value.

    A[i] bounds |d_j^{i+1} phi| near the support, G1 = |grad phi|_{C^1}, and
    fnorm = |f|_{W^{N,1}}.  On each cover ball the chosen direction has
    |d_j phi| >= lambda/4, hence |1/d_j phi| <= 4/lambda.
    """
    r = lam / (2.0 * G1)
    B = _b_bounds(4.0 / lam, [0.0] + list(A[1:]), N)
    c = _chain_coefficients(B, N)
    gam = _partition_bounds(r, N)
    total = 0.0
    for m, cm in enumerate(c):
        total += cm * sum(math.comb(m, i) * gam[i] for i in range(m + 1))
    return total * fnorm


@lru_cache(maxsize=None)
def bound_constant(N: int) -> float:
    """K_N: the traced bound at lambda = |grad phi|_{C^N} = 1 and unit |f|_{W^{N,1}}."""
    return traced_bound(1.0, [1.0] * (N + 1), 1.0, N, 1.0)


def amplitude_wN1(problem: OscProblem, n: int = 512) -> float:
    """|f|_{W^{N,1}} by spectral differentiation on a box containing B_R."""
    box = 1.25 * problem.R / math.pi
    f = GridField.from_function(problem.f, n, box)
    return wN1_norm(f, problem.N)


@dataclass(frozen=True)
class BoundReport:
    bound: float
    K: float
    G_N: float
    G_1: float
    fnorm: float
    lam: float


def nsp_bound(problem: OscProblem, fnorm: float | None = None) -> BoundReport:
    """K_N |grad phi|_{C^N}^N lambda^{-2N} |f|_{W^{N,1}} (1 + R |grad phi|_{C^1} / lambda)^{N+4}."""
    certify_lambda(problem)
    h = _sample_spacing(problem) / 4
    radius = problem.R + 1.0
    GN = phase_gradient_norm(problem.phi, radius, problem.N, h)
    G1 = phase_gradient_norm(problem.phi, radius, 1, h)
    fn = amplitude_wN1(problem) if fnorm is None else fnorm
    K = bound_constant(problem.N)
    lam, N = problem.lam, problem.N
    value = K * GN ** N * lam ** (-2 * N) * fn * (1.0 + problem.R * G1 / lam) ** (N + 4)
    return BoundReport(value, K, GN, G1, fn, lam)


# --- soundness sweep ---------------------------------------------------------------

SWEEP_COLUMNS = ("index", "phase", "N", "lam", "R", "bound", "abs_integral", "quad_error", "sound")


def random_problem(rng: np.random.Generator) -> OscProblem:
    """A bump amplitude on B_R with a linear, quadratic or sinusoidal phase whose
    gradient stays away from zero; lambda is the certified lower bound."""
    R = float(rng.uniform(0.5, 1.0))
    N = int(rng.integers(1, 4))
    kind = int(rng.integers(0, 3))
    speed = float(rng.uniform(2.0, 40.0))
    theta = float(rng.uniform(0.0, 2 * math.pi))
    a = (speed * math.cos(theta), speed * math.sin(theta))
    if kind == 0:
        phi: Phase = LinearPhase(a)
    elif kind == 1:
        q = tuple(float(v) for v in rng.uniform(-1.0, 1.0, 3) * 0.3 * speed / R)
        phi = QuadraticPhase(a, q)
    else:
        b = tuple(float(v) for v in rng.uniform(-4.0, 4.0, 2))
        eps = 0.3 * speed / (1.0 + math.hypot(*b)) / math.sqrt(2)
        phi = SinePhase(a, eps, b)
    probe = OscProblem(bump_amplitude(R), phi, 1e-12, R, N)
    return OscProblem(probe.f, phi, certify_lambda(probe), R, N)


def soundness_sweep(count: int, seed: int = 0) -> list[tuple]:
    """Rows of SWEEP_COLUMNS; ``sound`` means bound >= |quadrature| + its error estimate."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(count):
        p = random_problem(rng)
        q = osc_quadrature(p)
        b = nsp_bound(p).bound
        name = type(p.phi).__name__.removesuffix("Phase").lower()
        rows.append((i, name, p.N, p.lam, p.R, b, abs(q.value), q.error, b >= abs(q.value) + q.error))
    return rows


# --- partition of unity ---------------------------------------------------------------

@dataclass
class Partition:
    centers: np.ndarray
    radius: float
    K1: list[int] = field(default_factory=list)
    K2: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.centers)

    def bumps(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        """h_k(x) = chi((x - x_k) / r), shape (len, *x.shape)."""
        c = self.centers
        return chi((x1[None] - c[:, 0, None]) / self.radius, (x2[None] - c[:, 1, None]) / self.radius)

    def functions(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        """g_k = h_k / sum_l h_l (0 where no ball covers x)."""
        h = self.bumps(np.ravel(x1), np.ravel(x2))
        s = h.sum(axis=0)
        g = np.divide(h, s, out=np.zeros_like(h), where=s > 0)
        return g.reshape((len(self),) + np.shape(x1))


def build_partition(problem: OscProblem, spacing: float | None = None) -> Partition:
    """Hexagonal cover by balls B_{r/2}(x_k) of supp f, r = lambda / (2 |grad phi|_{C^1}).

    Each centre is assigned to K_1 and/or K_2 by sampling |d_j phi| >= lambda/2
    on B_{r/2}(x_k); a centre in neither set means lambda was wrong.
    """
    G1 = phase_gradient_norm(problem.phi, problem.R + 1.0, 1, _sample_spacing(problem) / 4)
    r = problem.lam / (2.0 * G1)
    h = spacing or min(r / 8, _sample_spacing(problem))
    x1, x2 = _disc_lattice(problem.R, h)
    on = np.abs(problem.f(x1, x2)) > 0
    sx, sy = x1[on], x2[on]
    s = math.sqrt(3.0) / 2.0 * r
    rows = int(math.ceil((problem.R + r) / (s * math.sqrt(3) / 2))) + 1
    cols = int(math.ceil((problem.R + r) / s)) + 1
    cand = []
    for a in range(-rows, rows + 1):
        y = a * s * math.sqrt(3) / 2
        off = 0.5 * s if a % 2 else 0.0
        for b in range(-cols, cols + 1):
            cand.append((b * s + off, y))
    cand = np.array(cand)
    cand = cand[np.hypot(cand[:, 0], cand[:, 1]) <= problem.R + r / 2]
    keep = []
    for c in cand:
        if np.any(np.hypot(sx - c[0], sy - c[1]) < r / 2):
            keep.append(c)
    part = Partition(np.array(keep).reshape(-1, 2), r)
    half = max(r / 16, h / 4)
    for idx, c in enumerate(part.centers):
        px, py = _disc_lattice(r / 2, half, c)
        g1, g2 = problem.phi.gradient(px, py)
        in1 = bool(np.abs(g1).min() >= problem.lam / 2)
        in2 = bool(np.abs(g2).min() >= problem.lam / 2)
        if not (in1 or in2):
            raise ValueError(f"cover ball at {c} is in neither K_1 nor K_2: lambda is not a valid bound")
        if in1:
            part.K1.append(idx)
        if in2:
            part.K2.append(idx)
    return part


# --- frequency-shift study ---------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticMap:
    """Area-preserving linear map X(x) = A x standing in for a flow map.

    kind "diagonal": A = diag(1/L, L); kind "sheared": X = (x1/L, L x2 + shear x1).
    """

    L: float
    kind: str = "diagonal"
    shear: float = 0.0

    def __post_init__(self) -> None:
        if self.L < 1:
            raise ValueError(f"stretch factor must be >= 1, got {self.L}")
        if self.kind not in ("diagonal", "sheared"):
            raise ValueError(f"unknown map kind {self.kind!r}")

    @property
    def matrix(self) -> np.ndarray:
        c = self.shear if self.kind == "sheared" else 0.0
        return np.array([[1.0 / self.L, 0.0], [c, self.L]])

    def __call__(self, x1, x2):
        A = self.matrix
        return A[0, 0] * x1 + A[0, 1] * x2, A[1, 0] * x1 + A[1, 1] * x2

    def inverse(self, y1, y2):
        A = np.linalg.inv(self.matrix)
        return A[0, 0] * y1 + A[0, 1] * y2, A[1, 0] * y1 + A[1, 1] * y2

    def jacobian_det(self) -> float:
        A = self.matrix
        return float(A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0])

    def phase_constant(self, k: float) -> float:
        """c_0 = min |grad phi^+-_xi|_inf / k over |xi| <= kL/4, phi^+-_xi = X . xi +- k x1."""
        A = self.matrix
        rho = np.linspace(0.0, 1.0, 201)[:, None] * k * self.L / 4
        th = np.linspace(0.0, 2 * np.pi, 721)[None, :]
        xi1, xi2 = rho * np.cos(th), rho * np.sin(th)
        g1 = A[0, 0] * xi1 + A[1, 0] * xi2
        g2 = A[0, 1] * xi1 + A[1, 1] * xi2
        best = min(float(np.maximum(np.abs(g1 + s * k), np.abs(g2)).min()) for s in (1, -1))
        return best / k


@dataclass(frozen=True)
class StudyReport:
    k: float
    L: float
    xi_cut: float
    max_low_freq: float
    total_mass: float
    high_mass_fraction: float
    h1alpha_proxy: float
    c0: float

    def row(self) -> tuple:
        return (self.k, self.L, self.xi_cut, self.max_low_freq, self.total_mass,
                self.high_mass_fraction, self.h1alpha_proxy)


def frequency_shift_study(beta: GridField, smap: SyntheticMap, k: float, L: float,
                          alpha: float) -> StudyReport:
    """Spectral analysis of q = beta o X^{-1} for a linear area-preserving X.

    For X = A x, q_hat(xi) = beta_hat(A^T xi), so everything is evaluated on
    beta's own frequency grid eta with xi = A^{-T} eta (a measure-preserving
    change of variables).  F = k log^alpha(k+1) sqrt(L) q_hat.
    """
    nyq = beta.n / (2.0 * beta.box)
    if nyq < 2 * k:
        need = int(2 ** math.ceil(math.log2(4 * k * beta.box)))
        raise ValueError(f"grid resolves |eta| <= {nyq:g} < 2k = {2 * k:g}; need n >= {need}")
    B = to_spectral(beta)
    e1, e2 = B.wavevectors()
    Ainv_T = np.linalg.inv(smap.matrix).T
    xi1 = Ainv_T[0, 0] * e1 + Ainv_T[0, 1] * e2
    xi2 = Ainv_T[1, 0] * e1 + Ainv_T[1, 1] * e2
    r = np.hypot(xi1, xi2)
    F = k * float(log1p_(np.array(k))) ** alpha * math.sqrt(L) * B.modes
    dxi2 = 1.0 / beta.box ** 2
    power = np.abs(F) ** 2
    total = float(power.sum() * dxi2)
    cut = k * L / 4.0
    low = r <= cut
    high = float(power[~low].sum() * dxi2)
    max_low = float(np.abs(F[low]).max()) if low.any() else 0.0
    h1 = math.sqrt(B.l2_norm() ** 2 + B.weighted_sum(r ** 2 * log1p_(r) ** (2 * alpha)))
    return StudyReport(k, L, cut, max_low, total, high / total if total else 0.0, h1,
                       smap.phase_constant(k))


def fit_exponent(x, y) -> float:
    """Least-squares slope of log y against log x."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def tracer_transform(values_at_seeds: np.ndarray, positions: np.ndarray, spacing: float,
                     xi: np.ndarray) -> np.ndarray:
    """int beta(x) exp(-i X(x) . xi) dx from samples of beta on a seed lattice and the
    tracked positions X(seed); advisory stand-in for the Euler flow map."""
    phase = positions @ np.asarray(xi, dtype=np.float64).reshape(-1, 2).T
    return (values_at_seeds[:, None] * np.exp(-1j * phase)).sum(axis=0) * spacing ** 2
