""" Module for the magnetostatic stray field.

The Maxwell system div(h + ζ) = 0, curl h = 0 is reduced to the scalar potential
h = −Dv with Δv = div ζ, which is solved in free space by convolution with the
Newtonian kernel on a zero-padded grid (Hockney's method).

The cell magnetization is piecewise constant, so div ζ is a surface density
on the cell faces (the jump of the normal component). Each face orientation has
its own kernel, sampled at the offsets between cell centres and face centres and
averaged over the face in the near field.
"""
import math

import numpy as np
from scipy import fft
from scipy.interpolate import RegularGridInterpolator

from modules.field_grid import Grid, gradient
from modules.tensor_core import det3


# face averages of the kernel within this many cells of the face
_NEAR = 2
_GAUSS = np.polynomial.legendre.leggauss(4)


class StrayProblem:
    """ Stray-field problem on a zero-padded Eulerian grid.

    Attributes
    ----------
    grid : `Grid`
        Reference grid; the magnetization datum lives in its box.
    padding : `int`
        Ratio of the padded box to the reference box (per axis).
    euler : `Grid`
        Padded Eulerian grid with the same spacing, centred on the reference box.
    offset : `tuple` of `int`
        Index of the first reference cell inside the padded grid.
    zeta : `ndarray`
        Magnetization datum on the padded grid.
    v : `ndarray`
        Potential after `solve_stray_field`, zero mean.
    h : `ndarray`
        Stray field h = −Dv on the cells after `solve_stray_field`.
    faces : `list` of `ndarray`
        Normal components of h on the interior faces of each axis.
    exterior : `float`
        Dipole estimate of ∫|h|² outside the padded box, after `stray_energy`.
    dual : `float`
        −∫ζ·h after `stray_energy`.
    identity_residual : `float`
        Relative mismatch of ∫|h|² and −∫ζ·h after `stray_energy`.
    """

    def __init__(self, grid: Grid, padding=2, threads=1):
        """ Build the padded grid and the transformed kernels.

        Raise
        -------
        MaxwellError :
            When the padding factor is below 2.
        """
        if padding < 2:
            raise MaxwellError(msg="Padding factor must be at least 2. (padding={})".format(padding))
        self.grid = grid
        self.padding = int(padding)
        self.threads = int(threads)
        n = np.array(grid.n)
        m = self.padding*n
        self.offset = tuple(int(k) for k in (m - n)//2)
        lower = grid.lower - np.array(self.offset)*grid.spacing
        self.euler = Grid(tuple(m), lower, lower + m*grid.spacing)
        # sources occupy the reference box widened by a margin, targets the whole padded box
        self.margin = tuple(min(max(2, k//8), o) for k, o in zip(grid.n, self.offset))
        self.__source = tuple(slice(o - w, o + k + w) for o, k, w in zip(self.offset, grid.n, self.margin))
        self.__length = tuple(fft.next_fast_len(int(mk + nk + 2*w), real=True)
                              for mk, nk, w in zip(m, n, self.margin))
        self.__kernels = [fft.rfftn(self.__green(k), workers=self.threads) for k in range(3)]
        self.zeta = self.euler.zeros(3)
        self.v = None
        self.h = None
        self.faces = None
        self.exterior = np.nan
        self.dual = np.nan
        self.identity_residual = np.nan

    def __displacements(self, axis):
        """ Offsets from the lower faces (normal `axis`) of the source cells to the target centres.
        """
        coords = []
        for k in range(3):
            L = self.__length[k]
            index = np.arange(L)
            signed = np.where(index < self.euler.n[k], index, index - L)
            c = (signed - (self.offset[k] - self.margin[k]))*self.grid.spacing[k]
            if k == axis:
                c = c + 0.5*self.grid.spacing[k]
            coords.append(c)
        return coords

    def __green(self, axis):
        """ Kernel G = −1/(4π|x|) from unit faces of normal `axis`, arranged for a linear convolution.
        """
        coords = self.__displacements(axis)
        X = np.meshgrid(*coords, indexing='ij')
        G = -1/(4*np.pi*np.sqrt(X[0]**2 + X[1]**2 + X[2]**2))
        # near field: face average by tensor Gauss quadrature over the two in-plane axes
        near = [np.flatnonzero(np.abs(c) <= (_NEAR + 0.5)*self.grid.spacing[k]) for k, c in enumerate(coords)]
        index = np.ix_(*near)
        P = np.meshgrid(*[c[i] for c, i in zip(coords, near)], indexing='ij')
        nodes, weights = _GAUSS
        plane = [k for k in range(3) if k != axis]
        average = np.zeros(P[0].shape)
        for s, ws in zip(nodes, weights):
            for t, wt in zip(nodes, weights):
                Q = [p.copy() for p in P]
                Q[plane[0]] = Q[plane[0]] - 0.5*s*self.grid.spacing[plane[0]]
                Q[plane[1]] = Q[plane[1]] - 0.5*t*self.grid.spacing[plane[1]]
                average += 0.25*ws*wt/np.sqrt(Q[0]**2 + Q[1]**2 + Q[2]**2)
        G[index] = -average/(4*np.pi)
        return G

    def embed(self, field):
        """ Place a reference-grid field into the padded grid (zero outside).
        """
        out = self.euler.zeros(*np.shape(field)[3:])
        index = tuple(slice(o, o + k) for o, k in zip(self.offset, self.grid.n))
        out[index] = field
        return out

    def restrict(self, field):
        """ Values of a padded-grid field on the reference cells.
        """
        index = tuple(slice(o, o + k) for o, k in zip(self.offset, self.grid.n))
        return field[index]

    def potential(self, zeta):
        """ Potential of the face charges of a datum supported near the reference box.

        The surface density on the lower face of every cell is the jump of the
        normal component of ζ across it; v sums their face-averaged kernels.
        """
        window = np.asarray(zeta)[self.__source]
        values = 0
        for k in range(3):
            density = np.diff(window[..., k], axis=k, prepend=0)
            area = self.grid.cell_volume/self.grid.spacing[k]
            values = values + area*fft.rfftn(density, s=self.__length, workers=self.threads)*self.__kernels[k]
        values = fft.irfftn(values, s=self.__length, workers=self.threads)
        m = self.euler.n
        return values[:m[0], :m[1], :m[2]]


def magnetization_datum(problem: StrayProblem, mu, u=None, eps=0.0):
    """ Eulerian magnetization datum ζ = χ_{y(Ω)} m / det(Dy)∘y⁻¹ on the padded grid.

    For the identity deformation ζ = χ_Ω μ exactly. Otherwise every Eulerian cell
    centre ξ is pulled back by the fixed-point iteration x ← ξ − εu(x) and
    ζ(ξ) = χ_Ω(x) μ(x)/det F(x) with F = I + εDu. μ is taken from the nearest reference
    cell, so ζ stays unit up to 1/det F across sharp walls.

    Parameters
    ----------
    problem : `StrayProblem`, required
    mu : `ndarray`, required
        Reference magnetization μ = m∘y per reference cell.
    u : `ndarray`
        Displacement; None for the identity.
    eps : `float`
        Scale of the deformation y = id + εu.

    Returns
    -------
    `ndarray`
        ζ on the padded grid; also stored in `problem.zeta`.

    Raise
    -------
    MaxwellError :
        When the deformed body leaves the padded box.
    """
    grid = problem.grid
    mu = np.asarray(mu, dtype=float)
    if u is None or eps == 0:
        problem.zeta = problem.embed(mu)
        return problem.zeta
    u = np.asarray(u, dtype=float)
    y = grid.centers() + eps*u
    margin = grid.spacing
    # the charges div ζ must stay inside the source window of the convolution
    window = (np.array(problem.margin) - 1)*grid.spacing
    lo, hi = grid.lower - window, grid.upper + window
    if np.any(y.min(axis=(0, 1, 2)) - margin < lo) or np.any(y.max(axis=(0, 1, 2)) + margin > hi):
        raise MaxwellError(msg="The deformed body leaves the padded grid. Increase the grid size or padding.")
    F = np.eye(3) + eps*gradient(grid, u)
    J = det3(F)
    axes = grid.axes()
    interp = {
        'u': RegularGridInterpolator(axes, u, bounds_error=False, fill_value=None),
        'mu': RegularGridInterpolator(axes, mu, method='nearest', bounds_error=False, fill_value=None),
        'J': RegularGridInterpolator(axes, J, bounds_error=False, fill_value=None),
    }
    xi = problem.euler.centers()
    box = np.all((xi >= y.min(axis=(0, 1, 2)) - 2*margin) & (xi <= y.max(axis=(0, 1, 2)) + 2*margin), axis=-1)
    points = xi[box]
    x = points.copy()
    for _ in range(60):
        x_new = points - eps*interp['u'](x)
        change = np.max(np.abs(x_new - x)) if len(x) else 0.0
        x = x_new
        if change < 1e-13:
            break
    inside = np.all((x >= grid.lower) & (x <= grid.upper), axis=-1)
    m = interp['mu'](x)
    zeta = np.zeros_like(xi)
    zeta[box] = np.where(inside[:, None], m/interp['J'](x)[:, None], 0.0)
    problem.zeta = zeta
    return zeta


def solve_stray_field(problem: StrayProblem):
    """ Solve Δv = div ζ in R³ and return (v, h) with h = −Dv.

    The potential is normalized to zero mean over the padded grid. Besides the
    cell field, the normal components on the faces are kept in `problem.faces`.
    """
    v = problem.potential(problem.zeta)
    v = v - np.mean(v)
    problem.v = v
    problem.h = -gradient(problem.euler, v)
    problem.faces = [-np.diff(v, axis=k)/problem.euler.spacing[k] for k in range(3)]
    return problem.v, problem.h


def exterior_energy(problem: StrayProblem):
    """ ∫|h|² outside the padded box, from the dipole far field of the datum.

    The dipole p = ∫ζ sits at the centre of the reference box. Outside the largest
    ball inside the padded box the dipole energy is |p|²/(6πr³); the part of that
    shell still inside the box is subtracted cell by cell.
    """
    euler = problem.euler
    p = np.sum(problem.zeta, axis=(0, 1, 2))*euler.cell_volume
    if not np.any(p):
        return 0.0
    centre = 0.5*(problem.grid.lower + problem.grid.upper)
    radius = float(np.min(np.minimum(centre - euler.lower, euler.upper - centre)))
    x = euler.centers() - centre
    r = np.linalg.norm(x, axis=-1)
    shell = r > radius
    e = x[shell]/r[shell, None]
    field = (3*(e @ p)[:, None]*e - p)/(4*np.pi*r[shell, None]**3)
    inside = math.fsum(np.sum(field**2, axis=-1))*euler.cell_volume
    return float(p @ p/(6*np.pi*radius**3) - inside)


def stray_energy(problem: StrayProblem, check=True):
    """ Magnetostatic energy H = ∫|h|².

    The face field is integrated over the padded grid and completed by the dipole
    estimate of the exterior. The weak form of div(h + ζ) = 0 gives
    ∫|h|² = −∫ζ·h; the relative mismatch is stored in `problem.identity_residual`.

    Raise
    -------
    MaxwellError :
        When the problem was not solved, the energy is not finite, or the identity is violated
        by more than 10% (under-resolved datum).
    """
    if problem.h is None:
        raise MaxwellError(msg="Solve the stray field before evaluating its energy.")
    dv = problem.euler.cell_volume
    inner = math.fsum(math.fsum(f.ravel()**2) for f in problem.faces)*dv
    problem.exterior = exterior_energy(problem)
    energy = inner + problem.exterior
    problem.dual = -math.fsum((problem.zeta*problem.h).ravel())*dv
    if not (np.isfinite(energy) and np.isfinite(problem.dual)):
        raise MaxwellError(msg="Stray energy is not finite. Check the magnetization datum.")
    if energy == 0 and problem.dual == 0:
        problem.identity_residual = 0.0
        return 0.0
    problem.identity_residual = abs(energy - problem.dual)/max(abs(energy), abs(problem.dual))
    if check and problem.identity_residual > 0.10:
        raise MaxwellError(msg="Stray energy identity violated by {:.1%}. The datum is under-resolved."
                           .format(problem.identity_residual))
    return energy


def stray_field_energy(grid: Grid, mu, u=None, eps=0.0, padding=2, threads=1):
    """ Convenience wrapper: datum, solve and energy in one call.

    Returns
    -------
    energy : `float`
    problem : `StrayProblem`
    """
    problem = StrayProblem(grid, padding, threads)
    magnetization_datum(problem, mu, u, eps)
    solve_stray_field(problem)
    return stray_energy(problem), problem


class MaxwellError(Exception):
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
