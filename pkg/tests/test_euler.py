import math

import numpy as np
import pytest

from logvort.euler import (DIAG_COLUMNS, EulerState, SolverAbort, SolverConfig, biot_savart,
                           diagnostics_norm_timeseries, origin_velocity_gradient, project, rhs,
                           run, step, velocity_gradient)
from logvort.field import GridField
from logvort.initdata import compute_IM, quadrupole
from logvort.lagrangian import TracerSet, quadrant_seeds


def cell(n=32, box=1.0):
    return GridField.from_function(lambda x1, x2: 2 * np.sin(x1) * np.sin(x2), n, box)


@pytest.fixture(scope="module")
def blob():
    return quadrupole(1.0, 1.5).sample(64, 1.0)


def test_biot_savart_sign_convention():
    u = biot_savart(cell())
    x1, x2 = cell().mesh()
    assert np.allclose(u.u1.values, -np.sin(x1) * np.cos(x2), atol=1e-13)
    assert np.allclose(u.u2.values, np.cos(x1) * np.sin(x2), atol=1e-13)


def test_velocity_gradient_layout():
    g = velocity_gradient(cell())
    x1, x2 = cell().mesh()
    assert g.shape == (2, 2, 32, 32)
    assert np.allclose(g[0, 0], -np.cos(x1) * np.cos(x2), atol=1e-13)  # d1 u1
    assert np.allclose(g[0, 1], np.sin(x1) * np.sin(x2), atol=1e-13)  # d2 u1


def test_nonzero_mean_rejected():
    with pytest.raises(ValueError, match="zero mean"):
        biot_savart(GridField(np.ones((16, 16))))


def test_cellular_flow_is_steady():
    res = run(EulerState(cell()), 0.5)
    assert np.abs(res.state.omega.values - cell().values).max() < 1e-12
    # nonlinear term vanishes identically
    assert np.abs(rhs(EulerState(cell()))[0].values).max() < 1e-12


def test_origin_gradient_matches_grid(blob):
    g = velocity_gradient(blob)[:, :, 32, 32]
    assert abs(g[0, 1]) < 1e-12 and abs(g[1, 0]) < 1e-12
    assert origin_velocity_gradient(blob) == pytest.approx(np.abs(g).max(), rel=1e-12)


def test_origin_strain_from_IM():
    # the whole-plane identity holds up to periodic images and grid error
    q = quadrupole(1.0, 2.0)
    w = q.sample(512, 8.0)
    assert origin_velocity_gradient(w) == pytest.approx(4 / math.pi * compute_IM(q), rel=2e-4)


def test_short_run_conserves(blob):
    res = run(EulerState(blob), 0.3, sample_times=[0.1, 0.2])
    d0, d1 = res.diagnostics[0], res.diagnostics[-1]
    assert [set(d) for d in res.diagnostics] == [set(DIAG_COLUMNS)] * 4
    assert abs(d1["energy"] / d0["energy"] - 1) < 1e-8
    assert abs(d1["enstrophy"] / d0["enstrophy"] - 1) < 1e-8
    assert res.state.omega.symmetry_residual() < 1e-12
    assert [s.time for s in res.snapshots] == pytest.approx([0, 0.1, 0.2, 0.3])


def test_backward_run_returns(blob):
    start = EulerState(project(blob))
    fwd = run(start, 0.2)
    back = run(fwd.state, 0.0)
    assert back.state.time == 0.0
    assert np.abs(back.state.omega.values - start.omega.values).max() < 1e-8


def test_fixed_dt_and_step_agree(blob):
    st = EulerState(project(blob))
    a = run(st, 0.01, dt=0.01)
    b = step(st, 0.01)
    assert a.steps == 1
    assert np.allclose(a.state.omega.values, b.omega.values, atol=1e-14)


def test_fixed_dt_halving_limit(blob):
    cfg = SolverConfig(max_halvings=0)
    with pytest.raises(SolverAbort, match="CFL"):
        run(EulerState(blob * 50.0), 0.1, cfg, dt=0.5)


def test_unresolved_data_aborts():
    sharp = quadrupole(1.0, 0.3).sample(64, 1.0)
    with pytest.raises(SolverAbort, match="tail") as info:
        run(EulerState(sharp), 0.1)
    assert info.value.diagnostics


def test_passive_copy_tracks_vorticity(blob):
    res = run(EulerState(blob, passive=(blob, GridField.zeros(64, 1.0))), 0.2)
    assert np.abs(res.state.passive[0].values - res.state.omega.values).max() < 1e-12
    assert np.abs(res.state.passive[1].values).max() == 0.0


def test_tracers_follow_flow(blob):
    seeds = np.vstack([[0.0, 0.0], quadrant_seeds(1.0, 0.25)])
    res = run(EulerState(blob), 0.2, tracers=TracerSet.from_points(seeds))
    ts = res.tracers[-1][1]
    assert np.abs(ts.positions[0]).max() < 1e-14
    assert np.abs(ts.det() - 1).max() < 1e-6


def test_diagnostics_timeseries_columns(blob):
    d = diagnostics_norm_timeseries(EulerState(blob))
    assert set(d) == set(DIAG_COLUMNS)
    assert d["tail_fraction"] < 1e-4
