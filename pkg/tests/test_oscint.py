import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, special

from logvort.initdata import PerturbationSpec, chi_moment, chi_radial, make_beta
from logvort.oscint import (LinearPhase, OscProblem, QuadraticPhase, SinePhase, SyntheticMap,
                            bound_constant, build_partition, bump_amplitude, certify_lambda,
                            fit_exponent, frequency_shift_study, nsp_bound, osc_quadrature,
                            random_problem, soundness_sweep, tracer_transform)

DISC = bump_amplitude(1.0)


def hankel_chi(k):
    v, _ = integrate.quad(lambda r: float(chi_radial(r)) * special.j0(k * r) * r, 0, 1,
                          epsabs=1e-14, limit=200)
    return 2 * math.pi * v


@given(st.floats(-2, 2), st.floats(-2, 2), st.integers(0, 2), st.integers(0, 2))
def test_phase_partials_match_differences(x1, x2, i, j):
    eps = 1e-5
    for phi in (QuadraticPhase((1.0, -2.0), (0.5, 0.3, -0.7)), SinePhase((3.0, 1.0), 0.4, (2.0, -1.0))):
        lo = phi.partial(np.array(x1 - eps), np.array(x2), i, j)
        hi = phi.partial(np.array(x1 + eps), np.array(x2), i, j)
        fd = (hi - lo) / (2 * eps)
        assert float(phi.partial(np.array(x1), np.array(x2), i + 1, j)) == pytest.approx(float(fd), abs=1e-5)


def test_problem_validation():
    with pytest.raises(ValueError):
        OscProblem(DISC, LinearPhase((1.0, 0.0)), 0.0, 1.0)
    with pytest.raises(ValueError):
        OscProblem(DISC, LinearPhase((1.0, 0.0)), 1.0, 1.0, N=4)


def test_certify_lambda():
    p = OscProblem(DISC, LinearPhase((10.0, 0.0)), 1.0, 1.0)
    assert certify_lambda(p) == pytest.approx(10 / 1.1)
    with pytest.raises(ValueError, match="drops"):
        certify_lambda(OscProblem(DISC, LinearPhase((10.0, 0.0)), 10.0, 1.0))
    with pytest.raises(ValueError, match="vanish"):
        certify_lambda(OscProblem(bump_amplitude(2.0), LinearPhase((10.0, 0.0)), 1.0, 1.0))


def test_quadrature_against_hankel_transform():
    assert osc_quadrature(OscProblem(DISC, LinearPhase((0.0, 1e-9)), 1e-10, 1.0)).value.real == \
        pytest.approx(chi_moment(1), rel=1e-10)
    for k in (7.0, 20.0):
        q = osc_quadrature(OscProblem(DISC, LinearPhase((k / math.sqrt(2), k / math.sqrt(2))), 1.0, 1.0))
        assert abs(q.value - hankel_chi(k)) < 1e-9
        assert q.error < 1e-6


def test_quadrature_budget():
    p = OscProblem(DISC, LinearPhase((5000.0, 0.0)), 1.0, 1.0)
    with pytest.raises(ValueError, match="budget"):
        osc_quadrature(p)


def test_bound_constants_frozen():
    assert [bound_constant(N) for N in (1, 2, 3)] == pytest.approx([724.0, 591504.0, 713449792.0])


def test_higher_order_pays_only_at_large_lambda():
    def ratio(lam):
        b = [nsp_bound(OscProblem(DISC, LinearPhase((1.21 * lam, 0.0)), lam, 1.0, N)).bound
             for N in (1, 2)]
        return b[0] / b[1]
    assert ratio(64.0) < 0.01
    assert ratio(1.3e5) > 6


@pytest.mark.parametrize("phi,lam", [
    (LinearPhase((10.0, 0.0)), 9.0),
    (QuadraticPhase((6.0, 6.0), (2.0, 0.5, 1.0)), 1.0),
    (SinePhase((8.0, 3.0), 0.3, (2.0, 1.0)), 5.0),
])
def test_partition_of_unity(phi, lam, rng):
    p = OscProblem(DISC, phi, lam, 1.0)
    part = build_partition(p)
    pts = rng.uniform(-1, 1, (2000, 2))
    pts = pts[np.hypot(*pts.T) < 0.99]
    g = part.functions(pts[:, 0], pts[:, 1])
    assert np.abs(g.sum(axis=0) - 1).max() < 1e-12
    assert set(part.K1) | set(part.K2) == set(range(len(part)))


def test_bound_dominates_quadrature():
    for N in (1, 2, 3):
        p = OscProblem(DISC, SinePhase((12.0, 5.0), 0.5, (1.0, 2.0)), 8.0, 1.0, N)
        assert nsp_bound(p).bound >= abs(osc_quadrature(p).value)


def test_random_problems_certified():
    rng = np.random.default_rng(5)
    for _ in range(5):
        p = random_problem(rng)
        assert certify_lambda(p) >= p.lam * (1 - 1e-12)


def test_sweep_rows_and_determinism():
    a = soundness_sweep(4, seed=11)
    assert a == soundness_sweep(4, seed=11)
    assert all(r[-1] for r in a)


def test_synthetic_map():
    m = SyntheticMap(16.0)
    assert m.jacobian_det() == pytest.approx(1.0)
    y = m(np.array(2.0), np.array(3.0))
    assert np.allclose(m.inverse(*y), (2.0, 3.0))
    assert m.phase_constant(32) == pytest.approx(0.75)
    sh = SyntheticMap(4.0, "sheared", 0.5)
    assert sh.jacobian_det() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        SyntheticMap(0.5)


def test_study_refuses_coarse_grid():
    beta = make_beta(PerturbationSpec(k=32, x0=(1.0, 1.0), L=16, delta=0.25), 0.25, 256, 1.0)
    with pytest.raises(ValueError, match="need n"):
        frequency_shift_study(beta, SyntheticMap(16.0), 128, 16.0, 0.25)


def test_study_mass_is_conserved():
    beta = make_beta(PerturbationSpec(k=32, x0=(1.0, 1.0), L=16, delta=0.25), 0.25, 512, 1.0)
    a = frequency_shift_study(beta, SyntheticMap(16.0), 32, 16.0, 0.25)
    b = frequency_shift_study(beta, SyntheticMap(4.0), 32, 16.0, 0.25)
    # the map only relabels frequencies
    assert a.total_mass == pytest.approx(b.total_mass, rel=1e-12)
    assert a.high_mass_fraction > b.high_mass_fraction


def test_fit_exponent_exact():
    x = np.array([16.0, 32.0, 64.0])
    assert fit_exponent(x, 3 * x ** -2.5) == pytest.approx(-2.5)


def test_tracer_transform_identity_map():
    h = 0.025
    g = np.arange(-40, 41) * h
    X1, X2 = np.meshgrid(g, g, indexing="ij")
    pts = np.column_stack([X1.ravel(), X2.ravel()])
    vals = DISC(pts[:, 0], pts[:, 1])
    out = tracer_transform(vals, pts, h, np.array([[7.0, 0.0]]))
    assert out[0] == pytest.approx(hankel_chi(7.0), abs=1e-8)
