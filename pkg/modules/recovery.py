""" Module for recovery families and convergence studies of the diffuse energies.

A recovery state keeps the displacement of the limit state (y_ε = id + εu) and
replaces the sharp magnetization near every interface by the transition profile
of the pair of wells it separates.
"""
import math
import os

import numpy as np
import pandas as pd
from scipy import ndimage
from tqdm import tqdm

from modules.data_handler import save_vtk
from modules.energy import DiffuseState, LimitState, check_beta, lub_estimator, magnetic_diffuse, total_diffuse, total_limit
from modules.field_grid import BoundarySpec, Grid, build_deformation, gradient, integrate, interface_area
from modules.sphere_geodesy import (measure_profile_constant, optimal_profile, sphere_mesh, surface_tension_table,
                                    well_distance_field)
from modules.tensor_core import AnisotropySpec, MaterialLaw


COLUMNS = ['eps', 'E_e_eps', 'E_m_eps', 'H_eps', 'F_eps', 'E_e', 'E_m', 'H', 'F', 'G_eps', 'G',
           'L1_mu', 'W12_u', 'lub', 'young_gap', 'layer_volume', 'E_m_per_area', 'c0_d', 'sigma_ratio']


def interface_distance(grid: Grid, m):
    """ Distance of every cell centre to the nearest interface and the label across it.

    The exact Euclidean distance from a cell of label l to the nearest cell of
    another label is reduced by half a cell spacing along the dominant direction,
    which places the interface on the shared face.

    Returns
    -------
    distance : `ndarray`
        Unsigned distance; `numpy.inf` for labels without a neighbouring label.
    neighbour : `ndarray`
        Label on the other side of the nearest interface (0 where there is none).
    """
    m = np.asarray(m)
    distance = np.full(grid.n, np.inf)
    neighbour = np.zeros(grid.n, dtype=int)
    labels = np.unique(m)
    if len(labels) < 2:
        return distance, neighbour
    cells = np.indices(grid.n)
    for label in labels:
        region = m == label
        edt, index = ndimage.distance_transform_edt(region, sampling=grid.spacing, return_indices=True)
        delta = np.abs(index - cells)*grid.spacing[:, None, None, None]
        half = 0.5*grid.spacing[np.argmax(delta, axis=0)]
        distance[region] = (edt - half)[region]
        neighbour[region] = m[tuple(index)][region]
    return distance, neighbour


def build_recovery(limit: LimitState, eps: float, beta: float, spec: AnisotropySpec, law: MaterialLaw,
                   theta=4.0, level=5, profiles=None):
    """ Recovery state of a limit state at scale ε.

    Parameters
    ----------
    limit : `LimitState`, required
        Limit state (u, m) with Lipschitz u.
    eps : `float`, required
        Scale ε; must satisfy ε ≤ 1/(2L).
    beta : `float`, required
        Layer exponent.
    spec : `AnisotropySpec`, required
    law : `MaterialLaw`, required
    theta : `float`
        Half-width of the layers in units of ε^β.
    level : `int`
        Mesh level of the geodesics behind the profiles.
    profiles : `dict`
        Cache of `TransitionProfile` per well pair; filled on demand.

    Returns
    -------
    `DiffuseState`
        State with the same u and μ_ε built from the transition profiles.

    Raise
    -------
    RecoveryError :
        When the deformation id + εu is not certified injective.
    """
    check_beta(beta, law.q)
    deformation = build_deformation(limit.grid, limit.u, eps)
    if not deformation.certified:
        raise RecoveryError(msg="Deformation is not certified injective at eps={} (needs eps <= {:.4g})."
                            .format(eps, 1/(2*deformation.lipschitz)))
    profiles = {} if profiles is None else profiles
    mu = limit.magnetization(spec).copy()
    distance, neighbour = interface_distance(limit.grid, limit.m)
    width = theta*eps**beta
    layer = distance < width
    for pair in {tuple(sorted(p)) for p in zip(limit.m[layer], neighbour[layer])}:
        lo, hi = pair
        key = (lo, hi, eps, beta, theta, level)
        if key not in profiles:
            profiles[key] = optimal_profile(spec, lo, hi, eps, beta, level=level, theta=theta)
        profile = profiles[key]
        low = layer & (limit.m == lo) & (neighbour == hi)
        high = layer & (limit.m == hi) & (neighbour == lo)
        # negative side of the profile is the lower label
        mu[low] = profile(-distance[low])
        mu[high] = profile(distance[high])
    return DiffuseState(limit.grid, limit.u.copy(), mu, eps, beta, law)


def boundary_defect(state: DiffuseState, boundary: BoundarySpec):
    """ max |y_ε − (id + εd)| over the cells next to the Dirichlet faces.
    """
    mask = boundary.mask(state.grid)
    gap = state.u[mask] - boundary.values(state.grid)[mask]
    return float(state.eps*np.max(np.linalg.norm(gap, axis=-1)))


def _sobolev_norm(grid: Grid, w):
    return math.sqrt(integrate(grid, np.sum(w**2, axis=-1) + np.sum(gradient(grid, w)**2, axis=(-2, -1))))


def gamma_study(limit: LimitState, schedule, beta: float, law: MaterialLaw, spec: AnisotropySpec, lam=0.0, f=None,
                sigma=None, theta=4.0, level=5, padding=2, threads=1, snapshots=None, verbose=True):
    """ Evaluate a recovery family along a schedule of scales against the limit energies.

    Parameters
    ----------
    limit : `LimitState`, required
    schedule : `list` of `float`, required
        Strictly decreasing scales ε.
    beta : `float`, required
    law : `MaterialLaw`, required
    spec : `AnisotropySpec`, required
    lam : `float`
        Weight λ ≥ 0 of the stray-field energy.
    f : `ndarray` or `callable`
        Applied field.
    sigma : `ndarray`
        Surface tension table; computed from the geodesics if not given.
    snapshots : `str`
        Directory for VTK snapshots of μ_ε; no snapshots if not given.

    Returns
    -------
    `pandas.DataFrame`
        One row per ε with the columns in `COLUMNS`.

    Raise
    -------
    RecoveryError :
        When the schedule is not strictly decreasing, or a scale is not certified.
    """
    schedule = [float(e) for e in schedule]
    if len(schedule) == 0 or any(e <= 0 for e in schedule) or any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise RecoveryError(msg="Scale schedule must be positive and strictly decreasing. ({})".format(schedule))
    check_beta(beta, law.q)
    grid = limit.grid
    if sigma is None:
        sigma = surface_tension_table(spec, level)
    reference = total_limit(limit, law, spec, sigma, lam, f, padding, threads)
    pairs = [(i, j) for i in range(1, spec.n_wells + 1) for j in range(i + 1, spec.n_wells + 1)]
    areas = {p: interface_area(grid, limit.m, *p) for p in pairs}
    areas = {p: a for p, a in areas.items() if a > 0}
    area = sum(areas.values())
    c0 = {p: measure_profile_constant(spec, *p, level=level) for p in areas}
    c0_d = sum(c0[p]*sigma[p[0] - 1, p[1] - 1]*a for p, a in areas.items())/area if area > 0 else np.nan

    mesh = sphere_mesh(level, anchors=spec.wells)
    fields = [well_distance_field(spec, i, mesh) for i in range(1, spec.n_wells + 1)]
    wells = limit.magnetization(spec)
    profiles = {}
    rows = []
    for eps in tqdm(schedule, disable=not verbose):
        state = build_recovery(limit, eps, beta, spec, law, theta, level, profiles)
        parts = total_diffuse(state, law, spec, lam, f, padding, threads)
        lub = lub_estimator(grid, state.mu, spec, mesh, fields)
        rest = state.replace(u=np.zeros_like(state.u))
        offset = np.linalg.norm(state.mu - wells, axis=-1)
        rows.append({
            'eps': eps, 'E_e_eps': parts['E_e'], 'E_m_eps': parts['E_m'], 'H_eps': parts['H'],
            'F_eps': parts['F'], 'E_e': reference['E_e'], 'E_m': reference['E_m'], 'H': reference['H'],
            'F': reference['F'], 'G_eps': parts['G'], 'G': reference['G'],
            'L1_mu': integrate(grid, offset),
            'W12_u': _sobolev_norm(grid, state.u - limit.u),
            'lub': lub,
            'young_gap': 0.5*magnetic_diffuse(rest, spec) - lub,
            'layer_volume': np.count_nonzero(offset > 1e-12)*grid.cell_volume,
            'E_m_per_area': parts['E_m']/area if area > 0 else np.nan,
            'c0_d': c0_d,
            'sigma_ratio': parts['E_m']/reference['E_m'] if reference['E_m'] > 0 else np.nan,
        })
        if snapshots is not None:
            save_vtk(os.path.join(snapshots, 'recovery_eps{:.6g}.vtk'.format(eps)), grid,
                     {'mu': state.mu, 'u': state.u, 'label': limit.m})
    return pd.DataFrame(rows, columns=COLUMNS)


def observed_order(eps, gaps):
    """ Least-squares slope of log(gap) against log(ε).
    """
    eps, gaps = np.asarray(eps, dtype=float), np.abs(np.asarray(gaps, dtype=float))
    return float(np.polyfit(np.log(eps), np.log(gaps), 1)[0])


def richardson_limit(eps, values):
    """ Extrapolate the last two values of a table to ε → 0 with the observed order of the last three.
    """
    eps, values = np.asarray(eps, dtype=float), np.asarray(values, dtype=float)
    if len(eps) < 3:
        raise RecoveryError(msg="Richardson extrapolation needs at least three scales.")
    order = observed_order(eps[-2:], np.diff(values[-3:]))
    ratio = (eps[-2]/eps[-1])**order
    return float((ratio*values[-1] - values[-2])/(ratio - 1))


class RecoveryError(Exception):
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
