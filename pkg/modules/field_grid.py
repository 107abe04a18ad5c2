""" Module for cell-centered fields on a box, their finite differences and quadrature.

Fields are plain arrays over the cells with the tensor axes last:
scalar `(N1, N2, N3)`, vector `(N1, N2, N3, 3)`, matrix `(N1, N2, N3, 3, 3)`
and label `(N1, N2, N3)` of integers in 1..M.
For a matrix field obtained by `gradient`, entry [i, j] is ∂_j u_i.
"""
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import sparse

from modules.tensor_core import det3


FACES = {'x0': (0, 0), 'x1': (0, 1), 'y0': (1, 0), 'y1': (1, 1), 'z0': (2, 0), 'z1': (2, 1)}


class Grid:
    """ Uniform cell-centered grid on the box [lower, upper].
    """

    def __init__(self, n=(32, 32, 32), lower=(0.0, 0.0, 0.0), upper=(1.0, 1.0, 1.0)):
        """ Set the box and the number of cells.

        Parameters
        ----------
        n : `int` or `tuple` of `int`
            Cells per axis, at least 4.
        lower : `tuple` of `float`
            Lower corner of the box.
        upper : `tuple` of `float`
            Upper corner of the box.

        Raise
        -------
        GridError :
            When an axis has fewer than 4 cells or the box is empty.
        """
        self.n = tuple(int(k) for k in np.broadcast_to(n, (3,)))
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        if min(self.n) < 4:
            raise GridError(msg="The grid needs at least 4 cells per axis. (n={})".format(self.n))
        if np.any(self.upper <= self.lower):
            raise GridError(msg="Upper corner must exceed the lower corner.")
        self.spacing = (self.upper - self.lower)/np.array(self.n)

    def __repr__(self):
        return 'Grid(n={}, lower={}, upper={})'.format(self.n, self.lower.tolist(), self.upper.tolist())

    @property
    def shape(self):
        return self.n

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    @property
    def volume(self):
        return float(np.prod(self.upper - self.lower))

    def face_area(self, axis: int):
        """ Area of a cell face normal to the given axis.
        """
        return float(np.prod(np.delete(self.spacing, axis)))

    def axes(self):
        """ Cell-center coordinates along every axis.
        """
        return [self.lower[k] + (np.arange(self.n[k]) + 0.5)*self.spacing[k] for k in range(3)]

    def centers(self):
        """ Cell centers, shape (N1, N2, N3, 3).
        """
        return np.stack(np.meshgrid(*self.axes(), indexing='ij'), axis=-1)

    def zeros(self, *tail):
        return np.zeros(self.n + tail)


def derivative_matrix(n: int, h: float):
    """ Sparse first-derivative matrix on n cell centers.

    Centered (−1, 0, 1)/2h inside, second-order one-sided (−3, 4, −1)/2h and
    (1, −4, 3)/2h on the first and last rows, matching `numpy.gradient(edge_order=2)`.
    """
    D = sparse.lil_matrix((n, n))
    for i in range(1, n - 1):
        D[i, i - 1], D[i, i + 1] = -1.0, 1.0
    D[0, 0], D[0, 1], D[0, 2] = -3.0, 4.0, -1.0
    D[n - 1, n - 3], D[n - 1, n - 2], D[n - 1, n - 1] = 1.0, -4.0, 3.0
    return (D/(2*h)).tocsr()


@lru_cache(maxsize=16)
def _operators(n, spacing):
    eye = [sparse.identity(k, format='csr') for k in n]
    d = [derivative_matrix(n[k], spacing[k]) for k in range(3)]
    return (
        sparse.kron(sparse.kron(d[0], eye[1]), eye[2]).tocsr(),
        sparse.kron(sparse.kron(eye[0], d[1]), eye[2]).tocsr(),
        sparse.kron(sparse.kron(eye[0], eye[1]), d[2]).tocsr(),
    )


def gradient_operator(grid: Grid):
    """ Sparse partial-derivative operators (D1, D2, D3) acting on C-order flattened scalar fields.
    """
    return _operators(grid.n, tuple(float(h) for h in grid.spacing))


def gradient(grid: Grid, field):
    """ Finite-difference gradient of a scalar or vector field.

    Centered differences inside, second-order one-sided differences on boundary cells.

    Returns
    -------
    `ndarray`
        (..., 3) for a scalar field, (..., 3, 3) with [i, j] = ∂_j u_i for a vector field.
    """
    field = np.asarray(field, dtype=float)
    if field.shape == grid.n:
        return np.stack(np.gradient(field, *grid.spacing, edge_order=2), axis=-1)
    return np.stack([np.stack(np.gradient(field[..., i], *grid.spacing, edge_order=2), axis=-1)
                     for i in range(field.shape[-1])], axis=-2)


def gradient_adjoint(grid: Grid, S):
    """ Transpose of `gradient` for vector fields: component i is Σ_j D_jᵀ S[..., i, j].
    """
    D = gradient_operator(grid)
    out = np.empty(S.shape[:-1])
    for i in range(S.shape[-2]):
        out[..., i] = sum(D[j].T @ S[..., i, j].ravel() for j in range(3)).reshape(grid.n)
    return out


def symmetric_gradient(grid: Grid, u):
    """ Symmetrized gradient Eu = sym Du of a vector field.
    """
    G = gradient(grid, u)
    return 0.5*(G + np.swapaxes(G, -1, -2))


def integrate(grid: Grid, values):
    """ Midpoint-rule integral of a cell field over the box.

    Summation is exactly rounded (`math.fsum`) in C order, so the result does not
    depend on how the values were computed in parallel.

    Raise
    -------
    GridError :
        When the field contains non-finite values.
    """
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise GridError(msg="Cannot integrate a field with non-finite values.")
    return math.fsum(values.ravel())*grid.cell_volume


def interface_area(grid: Grid, m, i: int, j: int):
    """ Area of the interior cell faces separating label i from label j.
    """
    if i == j:
        raise GridError(msg="Interface area needs two different labels.")
    m = np.asarray(m)
    area = 0.0
    for axis in range(3):
        a = np.take(m, np.arange(m.shape[axis] - 1), axis=axis)
        b = np.take(m, np.arange(1, m.shape[axis]), axis=axis)
        count = np.count_nonzero(((a == i) & (b == j)) | ((a == j) & (b == i)))
        area += count*grid.face_area(axis)
    return area


@dataclass
class Deformation:
    """ Deformation y = id + εu sampled at the cell centers.

    Attributes
    ----------
    y : `ndarray`
        Deformed cell centers.
    certified : `bool`
        True when ε ≤ 1/(2L); the map is then injective with det Dy > 0.
    lipschitz : `float`
        L = max over cells of the operator norm of Du, and at least 1.
    """
    y: np.ndarray
    certified: bool
    lipschitz: float


def lipschitz_bound(grid: Grid, u):
    """ L = (max cellwise spectral norm of Du) ∨ 1.
    """
    norms = np.linalg.norm(gradient(grid, u), ord=2, axis=(-2, -1))
    return max(float(np.max(norms)), 1.0)


def build_deformation(grid: Grid, u, eps: float):
    """ Deformation y = id + εu with the injectivity certificate ε ≤ 1/(2L).

    An uncertified result is returned, not raised; the caller decides.
    """
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise GridError(msg="Displacement contains non-finite values.")
    L = lipschitz_bound(grid, u)
    return Deformation(grid.centers() + eps*u, bool(eps <= 1/(2*L)), L)


def determinant_expansion(G, eps: float):
    """ Coefficients of det(I + εG) = 1 + εP1 + ε²P2 + ε³P3.

    Returns
    -------
    `tuple`
        (P1, P2, P3, det) with P1 = tr G, P2 = ((tr G)² − tr G²)/2, P3 = det G and
        det = det(I + εG) from the exact cubic polynomial.
    """
    G = np.asarray(G, dtype=float)
    tr = np.trace(G, axis1=-2, axis2=-1)
    tr2 = np.trace(G @ G, axis1=-2, axis2=-1)
    return tr, 0.5*(tr**2 - tr2), det3(G), det3(np.eye(3) + eps*G)


class BoundarySpec:
    """ Dirichlet part Δ of the boundary (a union of box faces) and the datum d.
    """

    def __init__(self, faces=('x0',), datum=None):
        """ Set the faces and the datum.

        Parameters
        ----------
        faces : `list` of `str`
            Face identifiers among 'x0', 'x1', 'y0', 'y1', 'z0', 'z1'
            ('x0' is the face {x1 = lower}).
        datum : `callable`, `ndarray` or None
            d as a function of points (..., 3) -> (..., 3), a matrix A for d(x) = Ax,
            a sampled vector field, or None for d = 0.

        Raise
        -------
        GridError :
            When no face or an unknown face is given.
        """
        self.faces = tuple(faces)
        if len(self.faces) == 0:
            raise GridError(msg="At least one Dirichlet face is required.")
        for face in self.faces:
            if face not in FACES:
                raise GridError(msg="Unknown face '{}'.".format(face))
        self.datum = datum

    def mask(self, grid: Grid):
        """ Boolean mask of the cells adjacent to the Dirichlet faces.
        """
        mask = np.zeros(grid.n, dtype=bool)
        for face in self.faces:
            axis, side = FACES[face]
            index = [slice(None)]*3
            index[axis] = 0 if side == 0 else grid.n[axis] - 1
            mask[tuple(index)] = True
        return mask

    def values(self, grid: Grid):
        """ Datum d sampled at every cell center, shape (N1, N2, N3, 3).
        """
        x = grid.centers()
        if self.datum is None:
            return np.zeros_like(x)
        if callable(self.datum):
            return np.asarray(self.datum(x), dtype=float)
        datum = np.asarray(self.datum, dtype=float)
        if datum.shape == (3, 3):
            return x @ datum.T
        if datum.shape != x.shape:
            raise GridError(msg="Sampled datum does not match the grid.")
        return datum


class GridError(Exception):
    """ Base exception class for this modules.

    Attributes
    ----------
    msg : `str`
        Human readable string describing the exception.
    """

    def __init__(self, msg: str):
        """Set the error message.

        Parameters
        ----------
        msg : `str`
            Human readable string describing the exception.
        """
        self.msg = msg

    def __str__(self):
        """Return the error message."""
        return self.msg
