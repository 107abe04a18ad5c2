""" Module for the energy functionals of the diffuse and the sharp-interface model.

Deformed-configuration integrals are evaluated in reference coordinates by the
change-of-variables identities, with F = I + εDu and J = det F.
"""
from dataclasses import dataclass

import numpy as np

from modules.field_grid import (Grid, build_deformation, gradient, integrate,
                                interface_area, symmetric_gradient)
from modules.maxwell import StrayProblem, magnetization_datum, solve_stray_field, stray_energy
from modules.sphere_geodesy import SphereMesh, interpolate_on_mesh, well_distance_field
from modules.tensor_core import (AnisotropySpec, MaterialLaw, anisotropy_density, default_stored_energy,
                                 det3, inv3, quadratic_form, spontaneous_strain, spontaneous_strain_scaled)


def check_beta(beta: float, q: float):
    """ Check the layer exponent against the regime 0 < β < min(2(q−1)/q, 1).

    Raise
    -------
    EnergyError :
        When β is outside the regime.
    """
    limit = min(2*(q - 1)/q, 1.0)
    if not 0 < beta < limit:
        raise EnergyError(msg="beta={} is outside the regime 0 < beta < min(2(q-1)/q, 1) = {:g} for q={}."
                          .format(beta, limit, q))


@dataclass
class DiffuseState:
    """ Diffuse state (y, m) in reference coordinates: y = id + εu and μ = m∘y.

    Attributes
    ----------
    grid : `Grid`
    u : `ndarray`
        Displacement, shape (N1, N2, N3, 3).
    mu : `ndarray`
        Reference magnetization, unit vectors per cell.
    eps : `float`
        Scale ε > 0.
    beta : `float`
        Layer exponent, checked against the law at construction.
    law : `MaterialLaw`
    """
    grid: Grid
    u: np.ndarray
    mu: np.ndarray
    eps: float
    beta: float
    law: MaterialLaw

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.mu = np.asarray(self.mu, dtype=float)
        if self.u.shape != self.grid.n + (3,) or self.mu.shape != self.grid.n + (3,):
            raise EnergyError(msg="Fields do not match the grid.")
        if not self.eps > 0:
            raise EnergyError(msg="Scale eps must be positive.")
        if np.any(np.abs(np.linalg.norm(self.mu, axis=-1) - 1) > 1e-9):
            raise EnergyError(msg="Magnetization must have unit length in every cell.")
        check_beta(self.beta, self.law.q)

    def deformation_gradient(self):
        return np.eye(3) + self.eps*gradient(self.grid, self.u)

    def replace(self, u=None, mu=None):
        """ Copy of the state with new fields.
        """
        return DiffuseState(self.grid, self.u if u is None else u, self.mu if mu is None else mu,
                            self.eps, self.beta, self.law)


@dataclass
class LimitState:
    """ Sharp-interface state (u, m) with m given by well labels 1..M.
    """
    grid: Grid
    u: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.m = np.asarray(self.m, dtype=int)
        if self.u.shape != self.grid.n + (3,) or self.m.shape != self.grid.n:
            raise EnergyError(msg="Fields do not match the grid.")
        if not np.all(np.isfinite(self.u)):
            raise EnergyError(msg="Displacement contains non-finite values.")
        if np.any(self.m < 1):
            raise EnergyError(msg="Labels must be 1..M.")

    def magnetization(self, spec: AnisotropySpec):
        """ Well vectors b_m per cell.
        """
        if np.any(self.m > spec.n_wells):
            raise EnergyError(msg="Labels exceed the number of wells ({}).".format(spec.n_wells))
        return spec.wells[self.m - 1]


def elastic_diffuse(state: DiffuseState, law: MaterialLaw):
    """ E_ε^e = (1/ε²) ∫ W(Λ_ε⁻¹(μ)(I + εDu)) dx.

    Returns `numpy.inf` when some cell has det ≤ 0.

    Raise
    -------
    EnergyError :
        When the deformation is not certified injective (ε > 1/(2L)).
    """
    deformation = build_deformation(state.grid, state.u, state.eps)
    if not deformation.certified:
        raise EnergyError(msg="Deformation is not certified injective at eps={} (L={:.3g})."
                          .format(state.eps, deformation.lipschitz))
    A = spontaneous_strain_scaled(state.mu, state.eps, law, inverse=True) @ state.deformation_gradient()
    density = default_stored_energy(A, law)
    if np.any(np.isinf(density)):
        return np.inf
    return integrate(state.grid, density)/state.eps**2


def magnetic_diffuse(state: DiffuseState, spec: AnisotropySpec):
    """ E_ε^m = ε^{−β} ∫ Φ(Fᵀμ) J dx + ε^β ∫ |Dμ F⁻¹|² J dx.

    Raise
    -------
    EnergyError :
        When F is singular or inverts orientation in some cell.
    """
    F = state.deformation_gradient()
    J = det3(F)
    if np.any(J <= 0):
        raise EnergyError(msg="Deformation gradient is singular.")
    z = np.einsum('...ji,...j->...i', F, state.mu)
    exchange = gradient(state.grid, state.mu) @ inv3(F)
    anisotropy = integrate(state.grid, anisotropy_density(z, spec)*J)
    return (state.eps**(-state.beta)*anisotropy
            + state.eps**state.beta*integrate(state.grid, np.sum(exchange**2, axis=(-2, -1))*J))


def elastic_limit(state: LimitState, law: MaterialLaw, spec: AnisotropySpec):
    """ E^e = ½ ∫ Q_W(Eu − Λ(b_m)) dx with the closed-form Q_W.
    """
    strain = symmetric_gradient(state.grid, state.u) - spontaneous_strain(state.magnetization(spec), law)
    return 0.5*integrate(state.grid, quadratic_form(strain, law))


def magnetic_limit(grid: Grid, m, sigma):
    """ E^m = ½ Σ_{i≠j} σ^{ij} H²(interface between i and j), with face-counted areas.
    """
    sigma = np.asarray(sigma, dtype=float)
    if not np.allclose(sigma, sigma.T) or np.any(np.diag(sigma) != 0):
        raise EnergyError(msg="Surface tensions must be symmetric with zero diagonal.")
    total = 0.0
    labels = np.unique(m)
    for a, i in enumerate(labels):
        for j in labels[a + 1:]:
            total += sigma[i - 1, j - 1]*interface_area(grid, m, i, j)
    return total


def lub_estimator(grid: Grid, mu, spec: AnisotropySpec, mesh: SphereMesh, fields=None, chain=True):
    """ Least-upper-bound estimator ∫ max_i |D(f_i∘μ)| dx with f_i = d_Φ(·, b_i).

    With `chain` the integrand is capped cellwise by √Φ(μ)|Dμ| on the same stencil, and the estimate never
    exceeds half the diffuse magnetic energy of the undeformed state for any ε. Without it a sharp jump between
    two wells counts its full surface tension.

    Parameters
    ----------
    fields : `list` of `ndarray`
        Precomputed `well_distance_field` values per well, reused across calls.
    chain : `bool`
        Cap by the discrete chain rule.
    """
    if fields is None:
        fields = [well_distance_field(spec, i, mesh) for i in range(1, spec.n_wells + 1)]
    best = np.zeros(grid.n)
    for f in fields:
        w = interpolate_on_mesh(mesh, f, mu)
        best = np.maximum(best, np.linalg.norm(gradient(grid, w), axis=-1))
    if chain:
        best = np.minimum(best, np.sqrt(np.maximum(anisotropy_density(mu, spec), 0.0))
                          * np.linalg.norm(gradient(grid, mu), axis=(-2, -1)))
    return integrate(grid, best)


def applied_field(f, points):
    """ Applied field f sampled at points (..., 3); f is a constant 3-vector or a callable.
    """
    if f is None:
        return np.zeros_like(points)
    if callable(f):
        return np.asarray(f(points), dtype=float)
    return np.broadcast_to(np.asarray(f, dtype=float), points.shape)


def zeeman_energy(grid: Grid, m, f, mask=None):
    """ Zeeman energy ∫ f·m over a region mask (the whole box by default).
    """
    density = np.sum(applied_field(f, grid.centers())*m, axis=-1)
    if mask is not None:
        density = density*mask
    return integrate(grid, density)


def zeeman_reference(state: DiffuseState, f):
    """ Zeeman energy of a deformed state in reference coordinates, ∫ f(y)·μ J dx.
    """
    y = state.grid.centers() + state.eps*state.u
    J = det3(state.deformation_gradient())
    return integrate(state.grid, np.sum(applied_field(f, y)*state.mu, axis=-1)*J)


def total_diffuse(state: DiffuseState, law: MaterialLaw, spec: AnisotropySpec, lam=0.0, f=None,
                  padding=2, threads=1):
    """ G_ε = E_ε^e + E_ε^m + λH − F for a diffuse state.

    Returns
    -------
    `dict`
        Keys 'E_e', 'E_m', 'H', 'F', 'G'. H is NaN when λ = 0 (not computed).
    """
    if lam < 0:
        raise EnergyError(msg="Stray-field weight lambda must be nonnegative.")
    parts = {'E_e': elastic_diffuse(state, law), 'E_m': magnetic_diffuse(state, spec), 'H': np.nan}
    if lam > 0:
        problem = StrayProblem(state.grid, padding, threads)
        magnetization_datum(problem, state.mu, state.u, state.eps)
        solve_stray_field(problem)
        parts['H'] = stray_energy(problem)
    parts['F'] = zeeman_reference(state, f)
    parts['G'] = parts['E_e'] + parts['E_m'] + (lam*parts['H'] if lam > 0 else 0.0) - parts['F']
    return parts


def total_limit(state: LimitState, law: MaterialLaw, spec: AnisotropySpec, sigma, lam=0.0, f=None,
                padding=2, threads=1):
    """ G = E^e + E^m + λH(id, m) − F(id, m) for a sharp-interface state.

    Returns
    -------
    `dict`
        Keys 'E_e', 'E_m', 'H', 'F', 'G'. H is NaN when λ = 0 (not computed).
    """
    if lam < 0:
        raise EnergyError(msg="Stray-field weight lambda must be nonnegative.")
    b = state.magnetization(spec)
    parts = {'E_e': elastic_limit(state, law, spec), 'E_m': magnetic_limit(state.grid, state.m, sigma),
             'H': np.nan}
    if lam > 0:
        problem = StrayProblem(state.grid, padding, threads)
        magnetization_datum(problem, b)
        solve_stray_field(problem)
        parts['H'] = stray_energy(problem)
    parts['F'] = zeeman_energy(state.grid, b, f)
    parts['G'] = parts['E_e'] + parts['E_m'] + (lam*parts['H'] if lam > 0 else 0.0) - parts['F']
    return parts


class EnergyError(Exception):
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
