import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from logvort.field import GridField
from logvort.initdata import (LatticeSpec, PerturbationSpec, amplitude_for_strain, beta_sampler,
                              chi, chi_gradient_l2_norm, chi_l2_norm, chi_moment, compute_IM,
                              eta_functional, lattice_IM_closed_form, make_beta, make_fM,
                              make_phi, index_window, quadrupole, smooth_step,
                              symmetry_defect, weight_sum, weight_sum_lower_bound)
from logvort.norms import lp_norm


def test_smooth_step_limits():
    t = np.array([-1.0, 0.0, 0.5, 1.0, 2.0])
    assert np.array_equal(smooth_step(t), [0.0, 0.0, 0.5, 1.0, 1.0])


@given(st.floats(0.0, 1.0))
def test_smooth_step_symmetry(t):
    assert smooth_step(t) + smooth_step(1 - t) == pytest.approx(1.0, abs=1e-15)


def test_chi_profile():
    assert chi(np.array(0.3), np.array(0.0)) == 1.0
    assert chi(np.array(0.0), np.array(1.0)) == 0.0
    assert 0 < chi(np.array(0.75), np.array(0.0)) < 1


def test_chi_oracles():
    # frozen from adaptive radial quadrature
    assert chi_moment(1) == pytest.approx(1.7882877731736548, rel=1e-10)
    assert chi_l2_norm() == pytest.approx(1.2514435701637312, rel=1e-10)
    assert chi_gradient_l2_norm() == pytest.approx(3.929419355236292, rel=1e-8)


def test_chi_moment_against_grid():
    f = GridField.from_function(chi, 256, 0.5)
    assert lp_norm(f, 1) == pytest.approx(chi_moment(1), rel=1e-8)


@pytest.mark.parametrize("M,alpha,window", [
    (2, 0.5, (2, 6)), (3, 0.5, (3, 11)), (4, 0.5, (4, 20)),
    (2, 0.25, (16, 36)), (3, 0.25, (64, 121)), (2, 0.1, (5, 10)), (3, 0.1, (13, 21)),
])
def test_index_windows(M, alpha, window):
    assert index_window(M, alpha) == window


def test_index_window_guards():
    with pytest.raises(ValueError):
        index_window(1, 0.25)
    with pytest.raises(ValueError):
        index_window(2, 0.7)


def test_weight_sum_dominates_integral():
    for a, b, al in ((2, 6, 0.5), (16, 36, 0.25), (5, 10, 0.1)):
        assert weight_sum(a, b, al) >= weight_sum_lower_bound(a, b, al)


def test_quadrupole_is_odd_odd():
    q = quadrupole(1.0, 2.0)
    assert symmetry_defect(q, q.support_radius) < 1e-15
    f = q.sample(128, 2.0)
    assert f.symmetry_residual() < 1e-14


def test_eta_functional_frozen():
    assert eta_functional(1.0) == pytest.approx(0.4470719432934137, rel=1e-9)
    assert eta_functional(64.0) == pytest.approx(1.0914842365561857e-4, rel=1e-9)


@pytest.mark.parametrize("M,alpha", [(2, 0.5), (3, 0.5), (2, 0.25), (2, 0.1)])
def test_IM_identity(M, alpha):
    spec = LatticeSpec(M, alpha)
    assert compute_IM(spec.bumps()) == pytest.approx(lattice_IM_closed_form(spec), rel=1e-6)


def test_IM_grid_quadrature_agrees():
    spec = LatticeSpec(2, 0.25, k_range=(3, 3), sharpness=1.0, scale=32.0)
    f = make_fM(spec, 256, 8.0)
    assert compute_IM(f) == pytest.approx(lattice_IM_closed_form(spec), rel=1e-4)


def test_amplitude_for_strain():
    spec = LatticeSpec(2, 0.25, k_range=(3, 3), sharpness=1.0, scale=32.0)
    amp = amplitude_for_strain(spec, 1.0)
    s = LatticeSpec(2, 0.25, (3, 3), 1.0, 32.0, amp)
    assert 4 / math.pi * lattice_IM_closed_form(s) == pytest.approx(1.0, rel=1e-12)


def test_lattice_guards():
    with pytest.raises(ValueError, match="overlap"):
        LatticeSpec(2, 0.5, sharpness=2.0)
    with pytest.raises(ValueError):
        LatticeSpec(2, 0.5, sharpness=0.5, k_range=(3, 3))
    with pytest.raises(ValueError, match="grid spacing"):
        make_fM(LatticeSpec(2, 0.5), 64, 8.0)


def test_perturbation_validation():
    with pytest.raises(ValueError):
        PerturbationSpec(k=8, x0=(0.0, 1.0), L=4)
    with pytest.raises(ValueError, match="overlap"):
        PerturbationSpec(k=8, x0=(0.5, 1.0), L=4, delta=0.6)
    with pytest.raises(ValueError, match="B_R0"):
        PerturbationSpec(k=8, x0=(0.5, 0.5), L=4, delta=0.3, R0=0.8)
    assert PerturbationSpec(k=8, x0=(0.8, 0.4), L=4, r0=1.6).width == pytest.approx(0.05)


def test_beta_symmetry_and_prefactor():
    spec = PerturbationSpec(k=32, x0=(0.5, 0.5), L=16.0, delta=0.2)
    s = beta_sampler(spec, 0.25)
    assert s.amplitude == pytest.approx(1 / (32 * math.log2(33) ** 0.25 * 4))
    b = make_beta(spec, 0.25, 256, 0.5)
    # phi is even in x1 and odd in x2, so sin(k x1) phi is odd-odd
    assert b.symmetry_residual() < 1e-14


def test_beta_resolution_guard():
    spec = PerturbationSpec(k=128, x0=(0.5, 0.5), L=16.0, delta=0.2)
    with pytest.raises(ValueError, match="8 grid points"):
        make_beta(spec, 0.25, 256, 0.5)
    with pytest.raises(ValueError):
        make_phi(0.01, (0.5, 0.5), 64, 1.0)


def test_beta_l2_scaling():
    vals = []
    for k in (32, 64, 128):
        spec = PerturbationSpec(k=k, x0=(0.5, 0.5), L=2.0 ** 14, delta=0.2)
        b = make_beta(spec, 0.25, 512, 0.5)
        vals.append(lp_norm(b, 2) * k * math.log2(k + 1) ** 0.25 * math.sqrt(spec.L))
    assert max(vals) / min(vals) - 1 < 0.03
