"""End-to-end experiments: deformation growth, local norm inflation, patch interaction,
and the small-data composition with its certificate.

Every report is a pure function of the run outputs, so recomputing it from the
same snapshots gives identical numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize_scalar

from .euler import EulerState, RunResult, SolverAbort, SolverConfig, run
from .field import GridField, to_spectral
from .initdata import (BumpSum, LatticeSpec, PerturbationSpec, beta_sampler, compute_IM,
                       make_beta, make_fM, smooth_step)
from .lagrangian import (TracerSet, ball_region, deformation_lower_bound_check,
                         deformation_norm, integrated_origin_growth, quadrant_seeds)
from .norms import NormParams, log1p_, log_sobolev_norm, lp_norm, sobolev_norm

KINDS = ("deformation", "inflation", "patches", "interpolation-suite", "oscillatory-suite")


@dataclass(frozen=True)
class ExperimentPlan:
    kind: str
    n: int = 256
    box: float = 8.0
    t_end: float = 0.5
    samples: int = 11
    lattice: LatticeSpec | None = None
    perturbation: PerturbationSpec | None = None
    k_values: tuple[float, ...] = ()
    alpha: float = 0.25
    solver: SolverConfig = SolverConfig()
    seed_spacing: float | None = None
    site_margin: float = 0.0
    always_perturb: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")
        if self.samples < 2:
            raise ValueError("need at least two sample times")
        if self.kind in ("deformation", "inflation") and self.lattice is None:
            raise ValueError(f"{self.kind} plan needs a lattice spec")

    @property
    def sample_times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.samples)

    def base_field(self) -> GridField:
        return make_fM(self.lattice, self.n, self.box)


def _h(plan: ExperimentPlan) -> float:
    return 2.0 * math.pi * plan.box / plan.n


# --- deformation ---------------------------------------------------------------

@dataclass
class DeformationReport:
    times: np.ndarray
    deformation: np.ndarray
    origin_jacobian: np.ndarray
    origin_growth: np.ndarray
    gradu_origin: np.ndarray
    IM: float
    min_slack: float
    max_origin_mismatch: float
    monotone: bool
    fitted_C: float
    tracer_count: int
    max_det_defect: float
    max_origin_drift: float
    run: RunResult | None = None

    def rows(self) -> list[tuple]:
        return [(t, d, j, g, gu) for t, d, j, g, gu in zip(
            self.times, self.deformation, self.origin_jacobian, self.origin_growth, self.gradu_origin)]


DEFORMATION_COLUMNS = ("t", "deformation", "origin_jacobian", "origin_growth", "gradu_origin")


def _fit_growth_constant(times, deformation, IM) -> float:
    """C minimising the log misfit of D(t) against (C I t / log(1 + C I t))^(1/4)."""
    t = np.asarray(times)[1:]
    D = np.asarray(deformation)[1:]
    if IM <= 0 or len(t) == 0:
        return 0.0

    def shape(C):
        z = C * IM * t
        return (z / np.log1p(z)) ** 0.25

    def misfit(logC):
        return float(np.sum((np.log(shape(math.exp(logC))) - np.log(D)) ** 2))

    res = minimize_scalar(misfit, bounds=(-10.0, 10.0), method="bounded")
    return float(math.exp(res.x))


def run_deformation(plan: ExperimentPlan, omega0: GridField | None = None) -> DeformationReport:
    """Evolve the lattice data with a quadrant tracer cloud and check the lower-bound chain."""
    w0 = plan.base_field() if omega0 is None else omega0
    spacing = plan.seed_spacing or _h(plan) / 2
    extent = plan.lattice.support_radius() if plan.lattice else w0.box * math.pi / 2
    seeds = quadrant_seeds(extent, spacing)
    tracers = TracerSet.from_points(seeds)
    IM = compute_IM(plan.lattice.bumps()) if plan.lattice else compute_IM(w0)
    result = run(EulerState(w0), plan.t_end, plan.solver, sample_times=plan.sample_times,
                 tracers=tracers)
    region = ball_region(extent)
    origin = int(np.argmin(np.hypot(seeds[:, 0], seeds[:, 1])))
    times, D, J0 = [], [], []
    det_defect, drift = 0.0, 0.0
    for t, ts in result.tracers:
        times.append(t)
        D.append(deformation_norm(ts, region))
        J0.append(float(np.abs(ts.jacobians[origin]).max()))
        det_defect = max(det_defect, float(np.abs(ts.det()[~ts.flagged] - 1).max()))
        drift = max(drift, float(np.abs(ts.positions[origin]).max()))
    times = np.array(times)
    ot, og = result.origin_times, np.abs(result.origin_gradient)
    growth = np.interp(times, ot, integrated_origin_growth(ot, og))
    g_at = np.interp(times, ot, og)
    check = deformation_lower_bound_check(times, g_at, np.array(D), IM)
    mismatch = float(np.max(np.abs(np.array(J0) / growth - 1)))
    D = np.array(D)
    return DeformationReport(
        times, D, np.array(J0), growth, g_at, IM, check.min_slack, mismatch,
        bool(np.all(np.diff(D) > 0)), _fit_growth_constant(times, D, IM), len(seeds),
        det_defect, drift, result)


# --- site detection and inflation -----------------------------------------------------

@dataclass(frozen=True)
class Site:
    t0: float
    x0: tuple[float, float]
    r0: float
    L: float
    entry: tuple[int, int]
    history: tuple[float, ...]


def detect_site(report: DeformationReport, margin: float = 0.0,
                max_radius: float | None = None) -> Site:
    """t0 = argmax of the deformation; x0 = off-axis tracer attaining it; r0 = largest
    radius about x0 on which the same Jacobian entry keeps its sign and stays within
    [max/2, max].  ``history`` is |J_entry(x0)| at every sampled time up to t0.

    Candidates keep both seed coordinates above ``margin`` and, if given, |seed|
    at most ``max_radius``."""
    run_ = report.run
    i0 = int(np.argmax(report.deformation))
    t0, ts = run_.tracers[i0]
    seeds = ts.seeds
    off = (~ts.flagged) & (np.minimum(seeds[:, 0], seeds[:, 1]) > margin)
    if max_radius is not None:
        off &= np.hypot(seeds[:, 0], seeds[:, 1]) <= max_radius
    if not off.any():
        raise SolverAbort("site detection failed: no off-axis tracers")
    J = ts.jacobians
    flat = np.abs(J.reshape(len(J), 4))
    flat[~off] = -1.0
    best = int(np.argmax(flat.max(axis=1)))
    e = int(np.argmax(flat[best]))
    a, b = divmod(e, 2)
    peak = J[best, a, b]
    x0 = seeds[best]
    d = np.hypot(seeds[:, 0] - x0[0], seeds[:, 1] - x0[1])
    vals = J[:, a, b] * np.sign(peak)
    good = (vals >= abs(peak) / 2) & ~ts.flagged
    bad_d = d[~good]
    r0 = float(bad_d.min()) if bad_d.size else float(d.max())
    if r0 <= 0:
        raise SolverAbort("site detection failed: no ball with a one-signed large Jacobian entry")
    hist = tuple(float(abs(s.jacobians[best, a, b])) for _, s in run_.tracers[: i0 + 1])
    return Site(float(t0), (float(x0[0]), float(x0[1])), r0, float(abs(peak)), (a, b), hist)


@dataclass
class InflationRow:
    k: float
    t: float
    L_t: float
    h1a_perturbed: float
    h1a_base: float
    h1a_p: float
    h1a_W: float
    W_minus_omega_h1a: float
    omega_diff_l2: float
    eta_l2: float
    inflation_ratio: float

    def row(self) -> tuple:
        return (self.k, self.t, self.L_t, self.h1a_perturbed, self.h1a_base, self.h1a_p,
                self.h1a_W, self.W_minus_omega_h1a, self.omega_diff_l2, self.eta_l2,
                self.inflation_ratio)


INFLATION_COLUMNS = ("k", "t", "L_t", "h1a_perturbed", "h1a_base", "h1a_p", "h1a_W",
                     "W_minus_omega_h1a", "omega_diff_l2", "eta_l2", "inflation_ratio")


@dataclass
class InflationReport:
    site: Site
    delta: float
    branch: str
    near_threshold: bool
    rows: list[InflationRow]
    base_h1a_t0: float

    def at_t0(self, k: float) -> InflationRow:
        return [r for r in self.rows if r.k == k][-1]


def _h1a(f: GridField, alpha: float) -> float:
    return log_sobolev_norm(f, NormParams(1.0, alpha))


def run_inflation(plan: ExperimentPlan, deformation: DeformationReport | None = None) -> InflationReport:
    """Base run, site detection, then one perturbed run per k sharing one unperturbed run.

    The unperturbed run carries every q_k = beta_k o X^{-t} as a passive field;
    each perturbed run carries W (the base data) and p (the perturbation).
    """
    alpha = plan.alpha
    base = plan.base_field()
    report = deformation or run_deformation(plan, base)
    R0 = plan.lattice.support_radius()
    fixed = plan.perturbation.delta if plan.perturbation is not None else None
    if fixed is None:
        site = detect_site(report, plan.site_margin)
    else:
        # a fixed width needs x0 at least that far from the axes and from the edge of B_R0
        site = detect_site(report, max(plan.site_margin, fixed), R0 - fixed)
    h = _h(plan)
    times = plan.sample_times[plan.sample_times <= site.t0 + 1e-12]
    L_of_t = np.array(site.history)

    ks = plan.k_values or ((plan.perturbation.k,) if plan.perturbation else ())
    if not ks:
        raise ValueError("inflation plan needs k values")
    template = plan.perturbation or PerturbationSpec(k=ks[0], x0=site.x0, L=site.L, r0=site.r0)
    specs = [replace(template, k=k, x0=site.x0, L=site.L, r0=site.r0,
                     R0=max(R0, template.R0 or 0.0)) for k in ks]
    delta = specs[0].width
    if delta < 8 * h:
        raise SolverAbort(f"site radius gives delta={delta:.3g}, below 8 grid cells ({8 * h:.3g})")

    sub = plan.solver
    base_run = run(EulerState(base), site.t0, sub, sample_times=times)
    base_h1a = [_h1a(s.omega, alpha) for s in base_run.snapshots]
    threshold = site.L ** (1.0 / 3.0)
    branch = "perturb" if base_h1a[-1] <= threshold else "base-large"
    near = abs(base_h1a[-1] / threshold - 1) < 0.1
    use_beta = branch == "perturb" or plan.always_perturb

    betas = [make_beta(s, alpha, plan.n, plan.box) if use_beta else GridField.zeros(plan.n, plan.box)
             for s in specs]
    unpert = run(EulerState(base, passive=tuple(betas)), site.t0, sub, sample_times=times)
    rows: list[InflationRow] = []
    for k, spec, beta, qi in zip(ks, specs, betas, range(len(betas))):
        pert = run(EulerState(base + beta, passive=(base, beta)), site.t0, sub, sample_times=times)
        scale = 1.0 / spec.prefactor(alpha)
        h0 = None
        for j, (sp, su) in enumerate(zip(pert.snapshots, unpert.snapshots)):
            wt, W, p = sp.omega, sp.passive[0], sp.passive[1]
            w, q = su.omega, su.passive[qi]
            hp = _h1a(wt, alpha)
            h0 = hp if h0 is None else h0
            rows.append(InflationRow(
                k, sp.time, float(L_of_t[j]) if j < len(L_of_t) else site.L, hp, _h1a(w, alpha),
                _h1a(p, alpha), _h1a(W, alpha), _h1a(W - w, alpha), lp_norm(wt - w, 2),
                scale * lp_norm(p - q, 2), hp / h0))
    return InflationReport(site, delta, branch, near, rows, base_h1a[-1])


# --- synthetic-map inflation harness ---------------------------------------------------

@dataclass(frozen=True)
class SyntheticInflationRow:
    k: float
    L: float
    omega_diff_l2: float
    h1a_initial: float
    h1a_final: float
    inflation_ratio: float


def synthetic_inflation(base: BumpSum, spec: PerturbationSpec, L: float, alpha: float,
                        n: int, box: float) -> SyntheticInflationRow:
    """Kinematic stand-in: both data are carried by the same map X = diag(1/L, L),
    so the perturbed and base vorticities differ by q = beta o X^{-1} exactly.

    Norms at the final time are evaluated on the transformed spectrum
    (q_hat(xi) = beta_hat(A^T xi)), which needs no resampling.
    """
    spec = replace(spec, L=L)
    beta = make_beta(spec, alpha, n, box)
    w0 = base.sample(n, box)
    pert0 = w0 + beta
    F = to_spectral(pert0)
    e1, e2 = F.wavevectors()
    # X = diag(1/L, L): xi = (L eta1, eta2 / L)
    r = np.hypot(L * e1, e2 / L)
    final = math.sqrt(F.l2_norm() ** 2 + F.weighted_sum(r ** 2 * log1p_(r) ** (2 * alpha)))
    initial = _h1a(pert0, alpha)
    return SyntheticInflationRow(spec.k, L, lp_norm(beta, 2), initial, final, final / initial)


# --- patches ------------------------------------------------------------------------

@dataclass(frozen=True)
class PatchLayout:
    """Translated copies of one odd-odd patch; centres must be grid points."""

    patch: BumpSum
    centers: tuple[tuple[float, float], ...]
    min_separation: float = 8.0  # in support radii

    def __post_init__(self) -> None:
        rho = self.patch.support_radius
        c = np.asarray(self.centers, dtype=np.float64).reshape(-1, 2)
        for i in range(len(c)):
            for j in range(i + 1, len(c)):
                d = float(np.hypot(*(c[i] - c[j])))
                if d < self.min_separation * rho:
                    raise ValueError(f"patches {i} and {j} are {d / rho:.2f} support radii apart; "
                                     f"need >= {self.min_separation}")

    @property
    def rho(self) -> float:
        return self.patch.support_radius


def _grid_shift(center, n: int, box: float) -> tuple[int, int]:
    h = 2.0 * math.pi * box / n
    s = np.asarray(center, dtype=np.float64) / h
    r = np.round(s)
    if np.abs(s - r).max() > 1e-9:
        raise ValueError(f"patch centre {tuple(center)} is not a grid point (spacing {h:.6g})")
    return int(r[0]), int(r[1])


def _check_images(centers, box: float) -> None:
    """Reject layouts where a periodic image sits closer than a direct neighbour."""
    S = 2.0 * math.pi * box
    c = np.asarray(centers, dtype=np.float64).reshape(-1, 2)
    shifts = S * np.array([(a, b) for a in (-1, 0, 1) for b in (-1, 0, 1) if (a, b) != (0, 0)])
    direct = [float(np.hypot(*(c[i] - c[j]))) for i in range(len(c)) for j in range(len(c)) if i != j]
    far = max(direct, default=0.0)
    for i in range(len(c)):
        for j in range(len(c)):
            img = float(np.hypot(*(c[i] - c[j] + shifts).T).min())
            if img <= (float(np.hypot(*(c[i] - c[j]))) if i != j else far):
                raise ValueError(f"a periodic image of patch {j} lies {img:.4g} from patch {i}; "
                                 "enlarge the box")


def local_cutoff(center, rho: float, n: int, box: float) -> GridField:
    """1 on B_{4 rho}(center), 0 outside B_{5 rho}(center)."""
    c1, c2 = center
    return GridField.from_function(
        lambda x1, x2: smooth_step(5.0 - np.hypot(x1 - c1, x2 - c2) / rho), n, box)


@dataclass
class PatchReport:
    layout: PatchLayout
    differences: list[float]  # max over sampled times of the local H^2 difference, per patch
    symmetry_residual: float
    isolated: RunResult | None = field(default=None, repr=False)


def run_patches(layout: PatchLayout, n: int, box: float, t_end: float, samples: int = 3,
                solver: SolverConfig = SolverConfig(), isolated: RunResult | None = None) -> PatchReport:
    """Superposed run versus translated copies of one isolated run at the origin."""
    _check_images(layout.centers, box)
    shifts = [_grid_shift(c, n, box) for c in layout.centers]
    times = np.linspace(0.0, t_end, samples)
    if isolated is None:
        isolated = run(EulerState(layout.patch.sample(n, box)), t_end, solver, sample_times=times)
    w0 = sum((np.roll(isolated.snapshots[0].omega.values, s, axis=(0, 1)) for s in shifts),
             np.zeros((n, n)))
    sup = run(EulerState(GridField(w0, box)), t_end, solver, sample_times=times)
    diffs = []
    for c, s in zip(layout.centers, shifts):
        cut = local_cutoff(c, layout.rho, n, box)
        worst = 0.0
        for si, ss in zip(isolated.snapshots, sup.snapshots):
            wj = np.roll(si.omega.values, s, axis=(0, 1))
            worst = max(worst, sobolev_norm(cut * GridField(wj - ss.omega.values, box), 2.0))
        diffs.append(worst)
    return PatchReport(layout, diffs, sup.snapshots[-1].omega.symmetry_residual(), isolated)


# --- small data -------------------------------------------------------------------

@dataclass
class SmallDataCertificate:
    epsilon: float
    linf: float
    h1a: float
    support_radius: float
    feasible: bool
    plan: ExperimentPlan | None
    omega0: GridField | None = field(repr=False, default=None)

    @property
    def value(self) -> float:
        return self.linf + self.h1a


def compose_small_data(epsilon: float, tau: float, plan: ExperimentPlan) -> SmallDataCertificate:
    """omega0 = f + beta with a measured ||.||_inf + ||.||_{H^{1,alpha}} < epsilon certificate.

    The lattice and the perturbation must sit inside B_1(0).  When the measured
    value is not below epsilon no run is attached and ``feasible`` is False;
    the measured value is then the smallest the plan's data achieves.
    """
    if plan.lattice is None:
        raise ValueError("small-data composition needs a lattice spec")
    bumps = list(plan.lattice.bumps().bumps)
    f = make_fM(plan.lattice, plan.n, plan.box)
    w0 = f
    if plan.perturbation is not None:
        s = beta_sampler(plan.perturbation, plan.alpha)
        bumps.extend(s.phi.bumps)
        w0 = f + make_beta(plan.perturbation, plan.alpha, plan.n, plan.box)
    support = max(math.hypot(*b.center) + b.radius for b in bumps)
    if support >= 1.0:
        raise ValueError(f"data support reaches |x| = {support:.4g}; it must lie inside B_1(0)")
    linf = lp_norm(w0, math.inf)
    h1a = _h1a(w0, plan.alpha)
    ok = linf + h1a < epsilon
    attached = replace(plan, kind="inflation", t_end=tau) if ok else None
    return SmallDataCertificate(epsilon, linf, h1a, support, ok, attached, w0)
