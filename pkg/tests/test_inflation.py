import math

import numpy as np
import pytest

from logvort.euler import SolverAbort
from logvort.initdata import LatticeSpec, PerturbationSpec, quadrupole
from logvort.inflation import (ExperimentPlan, PatchLayout, _check_images, compose_small_data,
                               detect_site, local_cutoff, run_deformation, run_inflation,
                               run_patches, synthetic_inflation)
from logvort.oscint import fit_exponent

LATTICE = LatticeSpec(M=2, alpha=0.25, k_range=(3, 3), sharpness=1.0, scale=32.0, amplitude=8.0)


@pytest.fixture(scope="module")
def coarse_plan():
    return ExperimentPlan("inflation", n=256, box=8.0, t_end=0.1, samples=3, lattice=LATTICE,
                          k_values=(2.0,), seed_spacing=0.5, site_margin=2.0,
                          perturbation=PerturbationSpec(k=2.0, x0=(3.0, 3.0), L=1.0, delta=1.6))


@pytest.fixture(scope="module")
def coarse_deformation(coarse_plan):
    return run_deformation(coarse_plan)


def test_plan_validation():
    with pytest.raises(ValueError, match="kind"):
        ExperimentPlan("bogus")
    with pytest.raises(ValueError, match="lattice"):
        ExperimentPlan("deformation")
    with pytest.raises(ValueError):
        ExperimentPlan("patches", samples=1)


def test_deformation_report(coarse_deformation):
    rep = coarse_deformation
    assert rep.monotone
    assert rep.deformation[0] == 1.0
    assert rep.min_slack > 0.95
    assert rep.max_origin_mismatch < 1e-3
    assert rep.max_det_defect < 1e-6
    assert len(rep.rows()) == 3


def test_site_respects_constraints(coarse_deformation):
    s = detect_site(coarse_deformation, margin=2.0, max_radius=8.0)
    assert min(s.x0) > 2.0 and math.hypot(*s.x0) <= 8.0
    assert s.t0 == pytest.approx(0.1)
    assert s.history[0] == 1.0 and s.history[-1] == pytest.approx(s.L)


def test_zero_perturbation_reduces_to_base(coarse_plan, coarse_deformation):
    rep = run_inflation(coarse_plan, coarse_deformation)
    assert rep.branch == "base-large"
    assert all(r.omega_diff_l2 == 0.0 for r in rep.rows)
    assert all(r.h1a_perturbed == r.h1a_base for r in rep.rows)


def test_unresolvable_width_aborts(coarse_deformation):
    plan = ExperimentPlan("inflation", n=256, box=8.0, t_end=0.1, samples=3, lattice=LATTICE,
                          k_values=(2.0,), seed_spacing=0.5)
    with pytest.raises(SolverAbort, match="8 grid cells"):
        run_inflation(plan, coarse_deformation)


def test_synthetic_harness_trends():
    base = LatticeSpec(2, 0.25, (3, 3), 1.0, 3.2).bumps()
    ratios = []
    for L in (16.0, 256.0):
        rows = [synthetic_inflation(base, PerturbationSpec(k=k, x0=(0.5, 0.5), L=L, delta=0.2),
                                    L, 0.25, 512, 0.5) for k in (32.0, 64.0, 128.0)]
        e = fit_exponent([32, 64, 128], [r.omega_diff_l2 for r in rows])
        assert abs(e + 1) < 0.2
        ratios.append(rows[0].inflation_ratio)
    assert ratios[1] > ratios[0] > 1


def test_patch_layout_guards():
    p = quadrupole(1.0, 0.5)
    with pytest.raises(ValueError, match="support radii"):
        PatchLayout(p, ((0.0, 0.0), (1.0, 1.0)))
    with pytest.raises(ValueError, match="periodic image"):
        _check_images(((10.0, 10.0), (-10.0, -10.0)), 4.0)
    _check_images(((1.0, 1.0), (-1.0, -1.0)), 4.0)


def test_local_cutoff():
    c = local_cutoff((1.0, 0.0), 0.2, 128, 1.0)
    x1, x2 = c.mesh()
    d = np.hypot(x1 - 1.0, x2)
    assert np.all(c.values[d <= 0.8] == 1.0)
    assert np.all(c.values[d >= 1.0] == 0.0)


def test_single_patch_difference_vanishes():
    p = quadrupole(1.0, 1.0)
    rep = run_patches(PatchLayout(p, ((0.0, 0.0),)), 128, 1.0, 0.1, samples=2)
    assert rep.differences[0] < 1e-10
    assert rep.symmetry_residual < 1e-12


def test_patch_centre_must_be_grid_point():
    p = quadrupole(1.0, 1.0)
    with pytest.raises(ValueError, match="grid point"):
        run_patches(PatchLayout(p, ((0.01, 0.0),)), 128, 1.0, 0.1)


def small_plan(**kw):
    spec = LatticeSpec(M=2, alpha=0.5, k_range=(2, 2), sharpness=4.0)
    pert = PerturbationSpec(k=32, x0=(0.5, 0.5), L=4, delta=0.1)
    return ExperimentPlan("inflation", n=256, box=0.3, lattice=spec, perturbation=pert, **kw)


def test_small_data_certificate():
    c = compose_small_data(10.0, 0.1, small_plan())
    assert c.feasible and c.value < 10.0
    assert c.support_radius < 1.0
    assert c.plan.t_end == 0.1


def test_small_data_infeasible():
    c = compose_small_data(1e-3, 0.1, small_plan())
    assert not c.feasible and c.plan is None
    assert c.value > 1e-3


def test_small_data_support_check():
    plan = ExperimentPlan("inflation", n=256, box=1.0, lattice=LatticeSpec(2, 0.5, (1, 1), 4.0, 2.0))
    with pytest.raises(ValueError, match="B_1"):
        compose_small_data(10.0, 0.1, plan)
