import numpy as np
import pytest

from modules.field_grid import (BoundarySpec, Grid, GridError, build_deformation, determinant_expansion, gradient,
                                gradient_adjoint, integrate, interface_area, lipschitz_bound, symmetric_gradient)
from modules.tensor_core import det3


def test_grid_geometry():
    grid = Grid(8, lower=(0.0, 0.0, 0.0), upper=(1.0, 2.0, 1.0))
    assert grid.n == (8, 8, 8)
    assert np.allclose(grid.spacing, [0.125, 0.25, 0.125])
    assert grid.cell_volume == pytest.approx(0.125*0.25*0.125)
    assert grid.face_area(1) == pytest.approx(0.125**2)
    assert grid.centers().shape == (8, 8, 8, 3)
    assert np.allclose(grid.centers()[0, 0, 0], [0.0625, 0.125, 0.0625])


def test_grid_validation():
    with pytest.raises(GridError):
        Grid(3)
    with pytest.raises(GridError):
        Grid(8, lower=(0.0, 0.0, 0.0), upper=(1.0, 0.0, 1.0))


def test_gradient_of_linear_field_is_exact():
    grid = Grid((6, 7, 8))
    A = np.random.default_rng(0).normal(size=(3, 3))
    u = grid.centers() @ A.T + np.array([0.1, -0.2, 0.3])
    assert np.allclose(gradient(grid, u), A, atol=1e-12)
    assert np.allclose(symmetric_gradient(grid, u), 0.5*(A + A.T), atol=1e-12)
    assert np.allclose(gradient(grid, u[..., 0]), A[0], atol=1e-12)


def test_gradient_adjoint():
    grid = Grid((5, 6, 7))
    rng = np.random.default_rng(1)
    u = rng.normal(size=grid.n + (3,))
    S = rng.normal(size=grid.n + (3, 3))
    lhs = np.sum(gradient(grid, u)*S)
    rhs = np.sum(u*gradient_adjoint(grid, S))
    assert lhs == pytest.approx(rhs, rel=1e-12)



def test_gradient_order():
    errors = []
    for n in (16, 32, 64):
        grid = Grid(n)
        x = grid.centers()
        u = np.zeros(grid.n + (3,))
        u[..., 0] = np.sin(2*np.pi*x[..., 0])
        exact = np.zeros(grid.n + (3, 3))
        exact[..., 0, 0] = 2*np.pi*np.cos(2*np.pi*x[..., 0])
        errors.append(np.max(np.abs(gradient(grid, u) - exact)))
    orders = np.log2(np.array(errors[:-1])/np.array(errors[1:]))
    assert np.all(orders >= 1.9)


def test_summation_by_parts():
    grid = Grid(16)
    x = grid.centers()
    r2 = np.sum((x - 0.5)**2, axis=-1)
    # smooth bump vanishing on the outer three layers of cells
    phi = np.where(r2 < 0.09, np.exp(-1/np.maximum(0.09 - r2, 1e-300)), 0.0)
    assert np.all(phi[:3] == 0) and np.all(phi[-3:] == 0)
    D = gradient(grid, phi)
    for k in range(3):
        assert abs(integrate(grid, D[..., k])) <= 1e-12*integrate(grid, np.abs(D[..., k]))


def test_integrate():
    grid = Grid(8, upper=(2.0, 1.0, 1.0))
    assert integrate(grid, np.ones(grid.n)) == pytest.approx(2.0)
    x = grid.centers()[..., 0]
    assert integrate(grid, x) == pytest.approx(2.0)
    values = np.ones(grid.n)
    values[0, 0, 0] = np.nan
    with pytest.raises(GridError):
        integrate(grid, values)


def test_interface_area_of_half_split():
    grid = Grid(8)
    m = np.ones(grid.n, dtype=int)
    m[4:] = 2
    assert interface_area(grid, m, 1, 2) == pytest.approx(1.0)
    assert interface_area(grid, m, 2, 1) == pytest.approx(1.0)
    with pytest.raises(GridError):
        interface_area(grid, m, 1, 1)


def test_interface_area_against_face_count():
    grid = Grid(6)
    m = np.random.default_rng(2).integers(1, 4, size=grid.n)
    h2 = grid.face_area(0)
    for i, j in ((1, 2), (1, 3), (2, 3)):
        count = 0
        for a in range(6):
            for b in range(6):
                for c in range(6):
                    for d in ((1, 0, 0), (0, 1, 0), (0, 0, 1)):
                        p, q, r = a + d[0], b + d[1], c + d[2]
                        if p < 6 and q < 6 and r < 6 and {m[a, b, c], m[p, q, r]} == {i, j}:
                            count += 1
        assert interface_area(grid, m, i, j) == pytest.approx(count*h2)


def test_injectivity_certificate_on_random_fields():
    grid = Grid(8)
    rng = np.random.default_rng(3)
    x = grid.centers()
    for target in np.linspace(0.5, 4.0, 10):
        k = rng.integers(1, 3, size=3)
        phase = rng.uniform(0, 2*np.pi, size=3)
        u = np.stack([np.sin(2*np.pi*k[i]*x[..., (i + 1) % 3] + phase[i])/(2*np.pi*k[i]) for i in range(3)], axis=-1)
        u *= target/np.max(np.linalg.norm(gradient(grid, u), ord=2, axis=(-2, -1)))
        L = lipschitz_bound(grid, u)
        eps = 1/(2*L)
        deformation = build_deformation(grid, u, eps)
        assert deformation.certified
        assert np.all(det3(np.eye(3) + eps*gradient(grid, u)) > 0)
        assert not build_deformation(grid, u, 1.1/L).certified


def test_determinant_expansion():
    G = np.random.default_rng(4).normal(size=(50, 3, 3))
    for eps in (0.5, 0.1, 0.01):
        P1, P2, P3, det = determinant_expansion(G, eps)
        expanded = 1 + eps*P1 + eps**2*P2 + eps**3*P3
        assert np.allclose(expanded, det, rtol=1e-13, atol=1e-13)
        assert np.allclose(det, np.linalg.det(np.eye(3) + eps*G), rtol=1e-12, atol=1e-12)


def test_boundary_spec():
    grid = Grid(4)
    boundary = BoundarySpec(faces=('x0', 'y1'), datum=np.diag([1.0, 2.0, 3.0]))
    mask = boundary.mask(grid)
    assert mask[0].all() and mask[:, -1].all()
    assert np.count_nonzero(mask) == 16 + 16 - 4
    values = boundary.values(grid)
    assert np.allclose(values[..., 1], 2*grid.centers()[..., 1])
    assert np.allclose(BoundarySpec().values(grid), 0.0)
    with pytest.raises(GridError):
        BoundarySpec(faces=())
    with pytest.raises(GridError):
        BoundarySpec(faces=('w0',))
