import numpy as np
import pytest

from modules.energy import LimitState, elastic_limit
from modules.field_grid import BoundarySpec, Grid
from modules.recovery import (COLUMNS, RecoveryError, boundary_defect, build_recovery, gamma_study, interface_distance,
                              observed_order, richardson_limit)
from modules.tensor_core import AnisotropySpec, MaterialLaw


LAW = MaterialLaw()
UNIAXIAL = AnisotropySpec.uniaxial()
SIGMA = np.array([[0.0, 2.0], [2.0, 0.0]])


def split_state(n):
    grid = Grid(n)
    m = np.ones(grid.n, dtype=int)
    m[n//2:] = 2
    return LimitState(grid, grid.zeros(3), m)


def test_interface_distance():
    limit = split_state(8)
    distance, neighbour = interface_distance(limit.grid, limit.m)
    # the interface is the face x1 = 0.5
    assert np.allclose(distance[3], 1/16)
    assert np.allclose(distance[4], 1/16)
    assert np.allclose(distance[0], 0.5 - 1/16)
    assert np.all(neighbour[:4] == 2) and np.all(neighbour[4:] == 1)
    constant = np.ones((8, 8, 8), dtype=int)
    distance, neighbour = interface_distance(limit.grid, constant)
    assert np.all(np.isinf(distance)) and np.all(neighbour == 0)


def test_recovery_of_constant_state():
    grid = Grid(8)
    limit = LimitState(grid, grid.zeros(3), np.ones(grid.n, dtype=int))
    state = build_recovery(limit, 0.05, 0.5, UNIAXIAL, LAW, level=3)
    assert np.array_equal(state.mu, limit.magnetization(UNIAXIAL))
    table = gamma_study(limit, [0.1, 0.05], 0.5, LAW, UNIAXIAL, sigma=SIGMA, level=3, verbose=False)
    assert list(table.columns) == COLUMNS
    assert np.all(table['E_m_eps'] == 0)
    assert np.all(table['W12_u'] == 0)
    assert np.all(table['L1_mu'] == 0)
    assert np.all(table['layer_volume'] == 0)
    assert np.allclose(table['young_gap'], 0.0)
    assert np.all(np.isnan(table['c0_d']))


def test_uncertified_recovery_raises():
    grid = Grid(8)
    limit = LimitState(grid, 5*grid.centers(), np.ones(grid.n, dtype=int))
    with pytest.raises(RecoveryError):
        build_recovery(limit, 0.2, 0.5, UNIAXIAL, LAW, level=3)


def test_schedule_must_decrease():
    limit = split_state(8)
    for schedule in ([0.1, 0.1], [0.05, 0.1], [], [0.1, -0.05]):
        with pytest.raises(RecoveryError):
            gamma_study(limit, schedule, 0.5, LAW, UNIAXIAL, sigma=SIGMA, level=3, verbose=False)


def test_recovery_keeps_limit_displacement():
    limit = split_state(16)
    limit.u[...] = 0.1*np.sin(np.pi*limit.grid.centers())
    state = build_recovery(limit, 0.01, 0.5, UNIAXIAL, LAW, level=4)
    assert np.array_equal(state.u, limit.u)
    assert np.allclose(np.linalg.norm(state.mu, axis=-1), 1.0)
    assert boundary_defect(state, BoundarySpec(('x0',), datum=lambda x: 0.1*np.sin(np.pi*x))) == pytest.approx(0.0)


def test_layer_volume_scales_with_width():
    limit = split_state(32)
    beta = 0.5
    profiles = {}
    volumes = []
    for eps in (0.01, 0.005, 0.0025):
        state = build_recovery(limit, eps, beta, UNIAXIAL, LAW, level=4, profiles=profiles)
        offset = np.linalg.norm(state.mu - limit.magnetization(UNIAXIAL), axis=-1)
        volumes.append(np.count_nonzero(offset > 1e-12)*limit.grid.cell_volume/eps**beta)
        # the layer is the slab of half-width 4 eps^beta around the interface
        assert np.count_nonzero(offset > 1e-12) > 0
    assert len(profiles) == 3
    assert max(volumes)/min(volumes) < 2.0
    assert all(v == pytest.approx(8.0, rel=0.3) for v in volumes)


def test_young_gap_of_recovery_profiles():
    limit = split_state(32)
    table = gamma_study(limit, [0.05, 0.02, 0.01], 0.5, LAW, UNIAXIAL, sigma=SIGMA, level=4, verbose=False)
    assert np.all(table['young_gap'] >= -1e-9)
    assert np.all(table['lub'] > 0)


def test_elastic_energy_converges_at_first_order():
    grid = Grid(32)
    c = (LAW.a + 2*LAW.b)/3
    limit = LimitState(grid, c*grid.centers(), np.ones(grid.n, dtype=int))
    schedule = [0.2, 0.1, 0.05, 0.025]
    table = gamma_study(limit, schedule, 0.5, LAW, UNIAXIAL, sigma=SIGMA, level=3, verbose=False)
    target = elastic_limit(limit, LAW, UNIAXIAL)
    assert table['E_e'].to_numpy() == pytest.approx(target)
    gaps = np.abs(table['E_e_eps'] - table['E_e']).to_numpy()
    assert np.all(np.diff(gaps) < 0)
    assert observed_order(schedule, gaps) >= 0.8
    assert richardson_limit(schedule, table['E_e_eps']) == pytest.approx(target, rel=0.02)


def test_observed_order_and_extrapolation():
    eps = np.array([0.1, 0.05, 0.025, 0.0125])
    values = 3.0 + 2*eps
    assert observed_order(eps, values - 3.0) == pytest.approx(1.0)
    assert richardson_limit(eps, values) == pytest.approx(3.0)
    assert richardson_limit(eps, 1.0 + eps**2) == pytest.approx(1.0)
    with pytest.raises(RecoveryError):
        richardson_limit(eps[:2], values[:2])


@pytest.mark.slow
def test_magnetic_energy_of_sharp_split():
    limit = split_state(64)
    beta = 0.5
    schedule = [0.01, 0.005, 0.0025]
    table = gamma_study(limit, schedule, beta, LAW, UNIAXIAL, sigma=SIGMA, level=4, verbose=False)
    assert table['E_m'].to_numpy() == pytest.approx(2.0)
    per_area = table['E_m_per_area'].to_numpy()
    assert abs(per_area[-1] - per_area[-2]) <= 0.05*per_area[-1]
    assert per_area[-1] == pytest.approx(table['c0_d'].iloc[-1], rel=0.1)
    assert np.all(table['young_gap'] >= -1e-9)
    assert observed_order(schedule, table['L1_mu']) == pytest.approx(beta, rel=0.2)
    assert np.all(table['W12_u'] == 0)
    elastic = np.abs(table['E_e_eps'] - table['E_e']).to_numpy()
    assert np.all(np.diff(elastic) < 0)
    assert observed_order(schedule, elastic) >= 0.8
