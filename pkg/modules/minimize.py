""" Module for minimizers of the limit and the diffuse energies.

`solve_elastic_equilibrium` solves the linear eigenstrain problem by matrix-free
conjugate gradients, `minimize_limit_alternating` alternates it with label sweeps
(iterated conditional modes), and `minimize_diffuse_descent` runs a projected
gradient descent with backtracking on the diffuse total energy.
"""
import math
import warnings

import numpy as np
import pandas as pd
from tqdm import tqdm

from modules.energy import DiffuseState, EnergyError, LimitState, applied_field, total_diffuse, total_limit
from modules.field_grid import (BoundarySpec, Grid, build_deformation, gradient, gradient_adjoint, integrate,
                                symmetric_gradient)
from modules.maxwell import MaxwellError, stray_field_energy
from modules.tensor_core import (AnisotropySpec, MaterialLaw, apply_elasticity, det3, inv3, quadratic_form,
                                 spontaneous_strain, spontaneous_strain_scaled, stored_energy_stress)


SHIFT = 1e-10


def _elastic_energy(grid, u, strain, law):
    return 0.5*integrate(grid, quadratic_form(symmetric_gradient(grid, u) - strain, law))


def solve_elastic_equilibrium(grid: Grid, m, boundary: BoundarySpec, law: MaterialLaw, spec: AnisotropySpec,
                              tol=1e-8, maxiter=5000, u0=None, return_trace=False, verbose=False):
    """ Equilibrium displacement of the eigenstrain problem with u = d on the Dirichlet cells.

    Minimizes ½∫Q_W(Eu − Λ(b_m)) by conjugate gradients on the free cells. The
    operator Gᵀ C_W G is applied matrix-free with the sparse difference matrices.

    Parameters
    ----------
    grid : `Grid`, required
    m : `ndarray`, required
        Label field.
    boundary : `BoundarySpec`, required
        Dirichlet faces and datum d.
    law : `MaterialLaw`, required
    spec : `AnisotropySpec`, required
        Source of the well vectors.
    tol : `float`
        Relative tolerance on the energy gradient of the free cells.
    maxiter : `int`
        Iteration cap.
    u0 : `ndarray`
        Initial guess; the datum d sampled on all cells by default.
    return_trace : `bool`
        If True, the energy per iteration is returned as well.

    Returns
    -------
    u : `ndarray`
        Displacement, equal to d on the Dirichlet cells.
    trace : `pandas.DataFrame`
        Columns 'iteration', 'energy', 'residual'. Only if `return_trace`.

    Raise
    -------
    MinimizeError :
        When tol is not positive, or the iteration cap is reached. The final
        relative residual is kept in `residual`.
    """
    if not tol > 0:
        raise MinimizeError(msg="Tolerance must be positive. (tol={})".format(tol))
    m = np.asarray(m, dtype=int)
    strain = spontaneous_strain(spec.wells[m - 1], law)
    mask = boundary.mask(grid)
    free = ~mask
    d = boundary.values(grid)
    u = d.copy() if u0 is None else np.array(u0, dtype=float)
    u[mask] = d[mask]
    dv = grid.cell_volume
    shift = SHIFT*law.c_w*dv

    def stiffness(v):
        return gradient_adjoint(grid, apply_elasticity(gradient(grid, v), law))*dv

    def operator(p):
        v = np.zeros_like(u)
        v[free] = p.reshape(-1, 3)
        return stiffness(v)[free].ravel() + shift*p

    load = gradient_adjoint(grid, apply_elasticity(strain, law))*dv
    x = u[free].ravel()
    r = (load - stiffness(u))[free].ravel() - shift*x
    scale = max(np.linalg.norm(load[free]), np.linalg.norm(stiffness(u)[free]), 1e-300)
    p = r.copy()
    rr = float(r @ r)
    energy = _elastic_energy(grid, u, strain, law)
    trace = [{'iteration': 0, 'energy': energy, 'residual': math.sqrt(rr)/scale}]
    bar = tqdm(total=maxiter, disable=not verbose)
    for k in range(1, maxiter + 1):
        if math.sqrt(rr) <= tol*scale:
            break
        Ap = operator(p)
        pAp = float(p @ Ap)
        if not pAp > 0:
            bar.close()
            raise MinimizeError(msg="Elastic operator is not positive on the free cells.",
                                residual=math.sqrt(rr)/scale)
        alpha = rr/pAp
        x += alpha*p
        r -= alpha*Ap
        # exact decrease of the quadratic along the search direction
        energy -= 0.5*alpha*rr
        rr_new = float(r @ r)
        p = r + (rr_new/rr)*p
        rr = rr_new
        trace.append({'iteration': k, 'energy': energy, 'residual': math.sqrt(rr)/scale})
        bar.update()
    bar.close()
    if math.sqrt(rr) > tol*scale:
        raise MinimizeError(msg="Conjugate gradients did not converge in {} iterations (residual {:.3e})."
                            .format(maxiter, math.sqrt(rr)/scale), residual=math.sqrt(rr)/scale)
    u[free] = x.reshape(-1, 3)
    if return_trace:
        return u, pd.DataFrame(trace)
    return u


_DIRECTIONS = [(axis, step) for axis in range(3) for step in (-1, 1)]


def _neighbours(m, axis, step):
    """ Label of the face neighbour in one direction, 0 outside the box.
    """
    out = np.zeros_like(m)
    src = [slice(None)]*3
    dst = [slice(None)]*3
    if step > 0:
        src[axis], dst[axis] = slice(1, None), slice(None, -1)
    else:
        src[axis], dst[axis] = slice(None, -1), slice(1, None)
    out[tuple(dst)] = m[tuple(src)]
    return out


def _sweep(grid, m, u, law, spec, sigma, lam, h, f):
    """ One red-black sweep of single-cell label flips. Returns the number of flips.
    """
    M = spec.n_wells
    dv = grid.cell_volume
    table = np.zeros((M + 1, M + 1))
    table[1:, 1:] = sigma
    strain = symmetric_gradient(grid, u)
    elastic = np.stack([0.5*dv*quadratic_form(strain - spontaneous_strain(spec.wells[l], law), law)
                        for l in range(M)], axis=-1)
    drive = applied_field(f, grid.centers()) + (2*lam*h if h is not None else 0.0)
    gain = dv*drive @ spec.wells.T
    colour = np.indices(grid.n).sum(axis=0) % 2
    flips = 0
    for c in (0, 1):
        face = np.zeros(grid.n + (M,))
        for axis, step in _DIRECTIONS:
            face += grid.face_area(axis)*table[1:, _neighbours(m, axis, step)].transpose(1, 2, 3, 0)
        local = elastic + face - gain
        current = np.take_along_axis(local, (m - 1)[..., None], axis=-1)[..., 0]
        best = np.argmin(local, axis=-1)
        delta = local[tuple(np.indices(grid.n)) + (best,)] - current
        flip = (colour == c) & (delta < -1e-14)
        m[flip] = best[flip] + 1
        flips += int(np.count_nonzero(flip))
    return flips


def minimize_limit_alternating(init: LimitState, boundary: BoundarySpec, law: MaterialLaw, spec: AnisotropySpec,
                               sigma, lam=0.0, f=None, sweeps=20, tol=1e-8, padding=2, threads=1, verbose=True):
    """ Alternating minimization of the limit total energy G.

    Every round solves the elastic equilibrium for the current labels and then
    flips single cells to the label of lowest local energy (elastic density,
    surface tension of the faces, frozen stray-field increment and Zeeman gain).
    A round that raises the recomputed G is rejected and ends the iteration.

    Returns
    -------
    state : `LimitState`
    trace : `pandas.DataFrame`
        Columns 'round', 'flips', 'E_e', 'E_m', 'H', 'F', 'G'.
    """
    grid = init.grid
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (spec.n_wells, spec.n_wells):
        raise MinimizeError(msg="Surface tension table does not match the number of wells.")
    m = init.m.copy()
    u = solve_elastic_equilibrium(grid, m, boundary, law, spec, tol)
    state = LimitState(grid, u, m)
    parts = total_limit(state, law, spec, sigma, lam, f, padding, threads)
    trace = [dict(round=0, flips=0, **parts)]
    for k in tqdm(range(1, sweeps + 1), disable=not verbose):
        h = None
        if lam > 0:
            _, problem = stray_field_energy(grid, spec.wells[m - 1], padding=padding, threads=threads)
            h = problem.restrict(problem.h)
        trial = m.copy()
        flips = _sweep(grid, trial, u, law, spec, sigma, lam, h, f)
        if flips == 0:
            break
        u_trial = solve_elastic_equilibrium(grid, trial, boundary, law, spec, tol, u0=u)
        candidate = LimitState(grid, u_trial, trial)
        new = total_limit(candidate, law, spec, sigma, lam, f, padding, threads)
        if new['G'] > parts['G'] + 1e-12*max(1.0, abs(parts['G'])):
            warnings.warn("Label round {} raised the total energy from {:.6g} to {:.6g} and was rejected."
                          .format(k, parts['G'], new['G']))
            break
        m, u, state, parts = trial, u_trial, candidate, new
        trace.append(dict(round=k, flips=flips, **parts))
    if verbose:
        print("Alternating minimization finished. (G={:.6g}, rounds={})".format(parts['G'], len(trace) - 1))
    return state, pd.DataFrame(trace)


def diffuse_gradient(state: DiffuseState, law: MaterialLaw, spec: AnisotropySpec, lam=0.0, f=None, h=None):
    """ L² gradient of G_ε with respect to u and μ.

    The applied field is treated as constant in y and the stray field enters
    through its derivative −2h at the identity deformation.

    Returns
    -------
    grad_u : `ndarray`
    grad_mu : `ndarray`
        Not projected on the tangent spaces of S².
    """
    grid, eps, beta, mu = state.grid, state.eps, state.beta, state.mu
    F = state.deformation_gradient()
    Ft = np.swapaxes(F, -1, -2)
    J = det3(F)
    FinvT = np.swapaxes(inv3(F), -1, -2)
    Linv = spontaneous_strain_scaled(mu, eps, law, inverse=True)
    P = stored_energy_stress(Linv @ F, law)
    k = 1/(1 + eps*law.a) - 1/(1 + eps*law.b)
    S = P @ Ft
    grad_u = gradient_adjoint(grid, Linv @ P)/eps
    grad_mu = k/eps**2*np.einsum('...ij,...j->...i', S + np.swapaxes(S, -1, -2), mu)

    weight = eps**(-beta)
    z = np.einsum('...ji,...j->...i', F, mu)
    phi, dphi = spec(z), spec.gradient(z)
    grad_mu += weight*J[..., None]*np.einsum('...ij,...j->...i', F, dphi)
    grad_u += eps*weight*gradient_adjoint(
        grid, J[..., None, None]*mu[..., :, None]*dphi[..., None, :] + (phi*J)[..., None, None]*FinvT)

    weight = eps**beta
    X = gradient(grid, mu) @ inv3(F)
    grad_mu += weight*gradient_adjoint(grid, 2*J[..., None, None]*(X @ FinvT))
    X2 = np.sum(X**2, axis=(-2, -1))
    grad_u += eps*weight*gradient_adjoint(
        grid, J[..., None, None]*(-2*np.swapaxes(X, -1, -2) @ X @ FinvT + X2[..., None, None]*FinvT))

    field = applied_field(f, grid.centers() + eps*state.u)
    grad_mu -= field*J[..., None]
    grad_u -= eps*gradient_adjoint(grid, (np.sum(field*mu, axis=-1)*J)[..., None, None]*FinvT)
    if lam > 0 and h is not None:
        grad_mu -= 2*lam*h
    return grad_u, grad_mu


def _objective(state, law, spec, lam, f, padding, threads):
    if not build_deformation(state.grid, state.u, state.eps).certified:
        return None
    try:
        return total_diffuse(state, law, spec, lam, f, padding, threads)
    except (EnergyError, MaxwellError):
        return None


def minimize_diffuse_descent(init: DiffuseState, law: MaterialLaw, spec: AnisotropySpec, boundary=None, lam=0.0,
                             f=None, steps=200, step=1e-2, padding=2, threads=1, verbose=True):
    """ Projected gradient descent on G_ε with backtracking.

    Each iteration moves u (Dirichlet cells frozen) and then μ (tangent step,
    renormalized to S² per cell). A trial step is accepted when the deformation stays
    certified and G_ε does not increase; otherwise the step is halved. Accepted
    steps grow by a factor 1.5.

    Parameters
    ----------
    init : `DiffuseState`, required
        Certified initial state.
    boundary : `BoundarySpec`
        Dirichlet cells of u; no frozen cells if not given.
    steps : `int`
        Number of iterations.
    step : `float`
        Initial step size.

    Returns
    -------
    state : `DiffuseState`
    trace : `pandas.DataFrame`
        Columns 'step', 'E_e', 'E_m', 'H', 'F', 'G', 'step_u', 'step_mu'.

    Raise
    -------
    MinimizeError :
        When the step size is not positive or the initial state is not certified.
    """
    if not step > 0:
        raise MinimizeError(msg="Step size must be positive. (step={})".format(step))
    grid = init.grid
    state = init
    parts = _objective(state, law, spec, lam, f, padding, threads)
    if parts is None:
        raise MinimizeError(msg="Initial state of the descent is not certified.")
    frozen = boundary.mask(grid) if boundary is not None else np.zeros(grid.n, dtype=bool)
    size = {'u': step, 'mu': step}
    trace = [dict(step=0, **parts, step_u=0.0, step_mu=0.0)]

    def direction(current, block):
        h = None
        if lam > 0:
            _, problem = stray_field_energy(grid, current.mu, padding=padding, threads=threads)
            h = problem.restrict(problem.h)
        grad_u, grad_mu = diffuse_gradient(current, law, spec, lam, f, h)
        if block == 'u':
            grad_u[frozen] = 0.0
            return grad_u
        return grad_mu - np.sum(grad_mu*current.mu, axis=-1, keepdims=True)*current.mu

    def move(current, block, g, s):
        if block == 'u':
            return current.replace(u=current.u - s*g)
        mu = current.mu - s*g
        return current.replace(mu=mu/np.linalg.norm(mu, axis=-1, keepdims=True))

    for k in tqdm(range(1, steps + 1), disable=not verbose):
        taken = {'u': 0.0, 'mu': 0.0}
        for block in ('u', 'mu'):
            g = direction(state, block)
            s = size[block]
            for _ in range(40):
                candidate = move(state, block, g, s)
                new = _objective(candidate, law, spec, lam, f, padding, threads)
                if new is not None and new['G'] <= parts['G']:
                    state, parts = candidate, new
                    taken[block] = s
                    size[block] = 1.5*s
                    break
                s *= 0.5
            else:
                size[block] = s
        trace.append(dict(step=k, **parts, step_u=taken['u'], step_mu=taken['mu']))
        if taken['u'] == 0 and taken['mu'] == 0:
            break
    if verbose:
        print("Gradient descent finished. (G_eps={:.6g}, steps={})".format(parts['G'], len(trace) - 1))
    return state, pd.DataFrame(trace)


class MinimizeError(Exception):
    """ Base exception class for this modules.

    Attributes
    ----------
    msg : `str`
        Human readable string describing the exception.
    residual : `float`
        Final relative residual of a failed solve, if any.
    """

    def __init__(self, msg: str, residual=None):
        """Set the error message.

        Parameters
        ----------
        msg : `str`
            Human readable string describing the exception.
        residual : `float`
            Final relative residual.
        """
        self.msg = msg
        self.residual = residual

    def __str__(self):
        """Return the error message."""
        return self.msg
