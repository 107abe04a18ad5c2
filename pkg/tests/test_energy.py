import numpy as np
import pytest

from modules.energy import (DiffuseState, EnergyError, LimitState, check_beta, elastic_diffuse, elastic_limit,
                            lub_estimator, magnetic_diffuse, magnetic_limit, total_diffuse, total_limit,
                            zeeman_energy, zeeman_reference)
from modules.field_grid import Grid, gradient, integrate, interface_area
from modules.recovery import observed_order
from modules.sphere_geodesy import sphere_mesh
from modules.tensor_core import AnisotropySpec, MaterialLaw, anisotropy_density, spontaneous_strain


LAW = MaterialLaw()
UNIAXIAL = AnisotropySpec.uniaxial()
SIGMA = np.array([[0.0, 2.0], [2.0, 0.0]])


def constant_state(grid, eps, u=None, well=(1.0, 0.0, 0.0)):
    u = grid.zeros(3) if u is None else u
    return DiffuseState(grid, u, np.broadcast_to(np.asarray(well), grid.n + (3,)).copy(), eps, 0.5, LAW)


def rotation(angle, axis):
    axis = np.asarray(axis, dtype=float)/np.linalg.norm(axis)
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle)*K + (1 - np.cos(angle))*K @ K


def test_beta_regime():
    check_beta(0.5, 2.0)
    for beta in (0.0, 1.0, 1.2):
        with pytest.raises(EnergyError):
            check_beta(beta, 2.0)
    with pytest.raises(EnergyError):
        check_beta(0.7, 1.5)


def test_state_validation():
    grid = Grid(4)
    with pytest.raises(EnergyError):
        DiffuseState(grid, grid.zeros(3), 2*np.ones(grid.n + (3,)), 0.1, 0.5, LAW)
    with pytest.raises(EnergyError):
        constant_state(grid, 0.0)
    with pytest.raises(EnergyError):
        LimitState(grid, grid.zeros(3), np.zeros(grid.n, dtype=int))
    with pytest.raises(EnergyError):
        LimitState(grid, grid.zeros(3), 3*np.ones(grid.n, dtype=int)).magnetization(UNIAXIAL)


def test_elastic_ground_state():
    grid = Grid(4)
    Lam = spontaneous_strain(np.array([1.0, 0.0, 0.0]), LAW)
    state = constant_state(grid, 0.1, u=grid.centers() @ Lam.T)
    assert elastic_diffuse(state, LAW) == pytest.approx(0.0, abs=1e-10)


def test_constant_state_approaches_limit():
    grid = Grid(4)
    assert elastic_diffuse(constant_state(grid, 1e-3), LAW) == pytest.approx(0.07, rel=1e-2)
    limit = LimitState(grid, grid.zeros(3), np.ones(grid.n, dtype=int))
    assert elastic_limit(limit, LAW, UNIAXIAL) == pytest.approx(0.07, rel=1e-12)
    eps = np.array([0.02, 0.01, 0.005])
    gaps = [elastic_diffuse(constant_state(grid, e), LAW) - 0.07 for e in eps]
    assert observed_order(eps, gaps) >= 0.8


def test_uncertified_deformation_raises():
    grid = Grid(4)
    u = 5*grid.centers()
    with pytest.raises(EnergyError):
        elastic_diffuse(constant_state(grid, 0.2, u=u), LAW)


def test_frame_indifference():
    grid = Grid(8)
    x = grid.centers()
    mu = np.stack([np.cos(x[..., 1]), np.sin(x[..., 1])*np.cos(x[..., 2]), np.sin(x[..., 1])*np.sin(x[..., 2])],
                  axis=-1)
    eps = 0.05
    state = DiffuseState(grid, grid.zeros(3), mu, eps, 0.5, LAW)
    Q = rotation(0.2, (1.0, 2.0, 3.0))
    # y' = Q y and m' = Q m give F' = QF and μ' = Qμ
    rotated = DiffuseState(grid, (x @ Q.T - x)/eps, mu @ Q.T, eps, 0.5, LAW)
    assert elastic_diffuse(rotated, LAW) == pytest.approx(elastic_diffuse(state, LAW), rel=1e-9)
    assert magnetic_diffuse(rotated, UNIAXIAL) == pytest.approx(magnetic_diffuse(state, UNIAXIAL), rel=1e-9)


def test_magnetic_diffuse_of_well():
    grid = Grid(4)
    assert magnetic_diffuse(constant_state(grid, 0.1), UNIAXIAL) == 0.0
    assert magnetic_diffuse(constant_state(grid, 0.1, well=(0.0, 1.0, 0.0)), UNIAXIAL) == \
        pytest.approx(0.1**-0.5)



def wavy_magnetization(points):
    m = np.stack([np.ones(points.shape[:-1]), 0.5*np.sin(2*np.pi*points[..., 1]),
                  0.4*np.cos(2*np.pi*points[..., 2])], axis=-1)
    return m/np.linalg.norm(m, axis=-1, keepdims=True)


def test_magnetic_diffuse_against_deformed_configuration():
    eps, beta = 0.1, 0.5
    A = np.array([[0.5, 0.3, 0.2], [0.2, -0.3, 0.4], [0.3, 0.2, 0.2]])
    F = np.eye(3) + eps*A
    grid = Grid(64)
    x = grid.centers()
    state = DiffuseState(grid, x @ A.T, wavy_magnetization(x @ F.T), eps, beta, LAW)
    reference = magnetic_diffuse(state, UNIAXIAL)

    # rasterize y(Ω) on a grid of the same spacing and integrate in ξ
    corners = np.array(np.meshgrid([0.0, 1.0], [0.0, 1.0], [0.0, 1.0], indexing='ij')).reshape(3, -1).T @ F.T
    lower = corners.min(axis=0)
    n = tuple(int(k) for k in np.ceil((corners.max(axis=0) - lower)*64))
    euler = Grid(n, lower=lower, upper=lower + np.array(n)/64)
    xi = euler.centers()
    inside = np.zeros(euler.n)
    for shift in np.array(np.meshgrid([-1, 1], [-1, 1], [-1, 1], indexing='ij')).reshape(3, -1).T:
        back = (xi + shift/256) @ np.linalg.inv(F).T
        inside += np.all((back >= 0) & (back <= 1), axis=-1)/8
    m = wavy_magnetization(xi)
    density = (eps**(-beta)*anisotropy_density(m @ F, UNIAXIAL)
               + eps**beta*np.sum(gradient(euler, m)**2, axis=(-2, -1)))
    eulerian = integrate(euler, density*inside)
    assert reference == pytest.approx(eulerian, rel=0.03)


def test_magnetization_reversal_symmetry():
    grid = Grid(8)
    x = grid.centers()
    mu = np.stack([np.cos(3*x[..., 0]), np.sin(3*x[..., 0]), np.zeros(grid.n)], axis=-1)
    u = 0.1*np.sin(x)
    state = DiffuseState(grid, u, mu, 0.1, 0.5, LAW)
    flipped = state.replace(mu=-mu)
    assert elastic_diffuse(flipped, LAW) == pytest.approx(elastic_diffuse(state, LAW), rel=1e-12)
    assert magnetic_diffuse(flipped, UNIAXIAL) == pytest.approx(magnetic_diffuse(state, UNIAXIAL), rel=1e-12)


def test_elastic_limit_compatible_and_skew():
    grid = Grid(6)
    m = np.ones(grid.n, dtype=int)
    m[:, :3] = 2
    Lam = spontaneous_strain(np.array([1.0, 0.0, 0.0]), LAW)
    x = grid.centers()
    assert elastic_limit(LimitState(grid, x @ Lam.T, m), LAW, UNIAXIAL) == pytest.approx(0.0, abs=1e-24)
    u = 0.1*np.sin(3*x) + x[..., ::-1]**2
    W = np.array([[0.0, 0.3, -0.1], [-0.3, 0.0, 0.2], [0.1, -0.2, 0.0]])
    base = elastic_limit(LimitState(grid, u, m), LAW, UNIAXIAL)
    assert elastic_limit(LimitState(grid, u + x @ W.T, m), LAW, UNIAXIAL) == pytest.approx(base, rel=1e-12)


def test_magnetic_limit():
    grid = Grid(8)
    m = np.ones(grid.n, dtype=int)
    assert magnetic_limit(grid, m, SIGMA) == 0.0
    m[4:] = 2
    assert magnetic_limit(grid, m, SIGMA) == pytest.approx(2.0)
    with pytest.raises(EnergyError):
        magnetic_limit(grid, m, np.array([[1.0, 2.0], [2.0, 0.0]]))
    with pytest.raises(EnergyError):
        magnetic_limit(grid, m, np.array([[0.0, 2.0], [1.0, 0.0]]))


def test_magnetic_limit_three_labels_and_relabeling():
    grid = Grid(6)
    m = np.random.default_rng(0).integers(1, 4, size=grid.n)
    sigma = np.array([[0.0, 0.5, 1.0], [0.5, 0.0, 0.7], [1.0, 0.7, 0.0]])
    expected = sum(sigma[i - 1, j - 1]*interface_area(grid, m, i, j) for i, j in ((1, 2), (1, 3), (2, 3)))
    assert magnetic_limit(grid, m, sigma) == pytest.approx(expected)
    order = np.array([2, 0, 1])
    relabeled = np.argsort(order)[m - 1] + 1
    assert magnetic_limit(grid, relabeled, sigma[np.ix_(order, order)]) == pytest.approx(expected)


def test_zeeman_energy():
    grid = Grid(32)
    m = np.broadcast_to([1.0, 0.0, 0.0], grid.n + (3,))
    assert zeeman_energy(grid, m, None) == 0.0
    assert zeeman_energy(grid, m, [1.0, 0.0, 0.0]) == pytest.approx(1.0)
    assert zeeman_energy(grid, m, [0.0, 1.0, 0.0]) == 0.0
    ball = np.linalg.norm(grid.centers() - 0.5, axis=-1) < 0.25
    assert zeeman_energy(grid, m, [1.0, 0.0, 0.0], mask=ball) == pytest.approx(4/3*np.pi*0.25**3, rel=0.03)


def test_zeeman_reference_of_dilation():
    grid = Grid(8)
    eps = 0.1
    state = constant_state(grid, eps, u=grid.centers())
    # the image of the unit box has volume (1+ε)³
    assert zeeman_reference(state, [1.0, 0.0, 0.0]) == pytest.approx((1 + eps)**3, rel=1e-12)
    assert zeeman_reference(state, lambda y: y*[1.0, 0.0, 0.0]) == pytest.approx(0.5*(1 + eps)**4, rel=1e-12)


def test_totals_without_stray_field():
    grid = Grid(6)
    state = constant_state(grid, 0.1)
    parts = total_diffuse(state, LAW, UNIAXIAL)
    assert np.isnan(parts['H'])
    assert parts['G'] == pytest.approx(parts['E_e'] + parts['E_m'])
    pulled = total_diffuse(state, LAW, UNIAXIAL, f=[0.5, 0.0, 0.0])
    assert pulled['G'] < parts['G']
    m = np.ones(grid.n, dtype=int)
    m[3:] = 2
    limit = total_limit(LimitState(grid, grid.zeros(3), m), LAW, UNIAXIAL, SIGMA, f=[1.0, 0.0, 0.0])
    assert limit['E_m'] == pytest.approx(2.0)
    assert limit['F'] == pytest.approx(0.0, abs=1e-14)
    assert limit['G'] == pytest.approx(limit['E_e'] + 2.0)
    with pytest.raises(EnergyError):
        total_limit(LimitState(grid, grid.zeros(3), m), LAW, UNIAXIAL, SIGMA, lam=-1.0)


def test_totals_with_stray_field():
    grid = Grid(16)
    m = np.ones(grid.n, dtype=int)
    parts = total_limit(LimitState(grid, grid.zeros(3), m), LAW, UNIAXIAL, SIGMA, lam=2.0)
    # uniformly magnetized cube: demagnetizing factor 1/3
    assert parts['H'] == pytest.approx(1/3, rel=0.05)
    assert parts['G'] == pytest.approx(parts['E_e'] + 2*parts['H'])
    m[:, 8:] = 2
    split = total_limit(LimitState(grid, grid.zeros(3), m), LAW, UNIAXIAL, SIGMA, lam=2.0)
    assert split['H'] < parts['H']


def test_lub_estimator():
    spec = UNIAXIAL
    mesh = sphere_mesh(5, anchors=spec.wells)
    grid = Grid(8)
    mu = np.broadcast_to(spec.wells[0], grid.n + (3,)).copy()
    assert lub_estimator(grid, mu, spec, mesh) == pytest.approx(0.0, abs=1e-12)
    mu[4:] = spec.wells[1]
    # one-cell transition: σ times the interface area
    assert lub_estimator(grid, mu, spec, mesh, chain=False) == pytest.approx(2.0, rel=0.02)
    # both cells at the jump sit in a well
    assert lub_estimator(grid, mu, spec, mesh) == pytest.approx(0.0, abs=1e-12)


def test_lub_estimator_of_resolved_transition():
    spec = UNIAXIAL
    mesh = sphere_mesh(5, anchors=spec.wells)
    grid = Grid(32)
    s = np.clip((grid.centers()[..., 0] - 0.25)/0.5, 0.0, 1.0)
    theta = np.pi*s**2*(3 - 2*s)
    mu = np.stack([np.cos(theta), np.sin(theta), np.zeros_like(theta)], axis=-1)
    capped = lub_estimator(grid, mu, spec, mesh)
    assert capped == pytest.approx(2.0, rel=0.03)
    assert capped <= lub_estimator(grid, mu, spec, mesh, chain=False) + 1e-12
    for eps in (0.5, 0.05, 0.005):
        state = DiffuseState(grid, grid.zeros(3), mu, eps, 0.5, LAW)
        assert capped <= 0.5*magnetic_diffuse(state, spec) + 1e-9


def test_young_bound_on_rough_fields():
    spec = UNIAXIAL
    mesh = sphere_mesh(5, anchors=spec.wells)
    grid = Grid(8)
    rng = np.random.default_rng(1)
    for eps in (0.1, 0.01):
        mu = rng.normal(size=grid.n + (3,))
        mu /= np.linalg.norm(mu, axis=-1, keepdims=True)
        state = DiffuseState(grid, grid.zeros(3), mu, eps, 0.5, LAW)
        assert lub_estimator(grid, mu, spec, mesh) <= 0.5*magnetic_diffuse(state, spec) + 1e-9
