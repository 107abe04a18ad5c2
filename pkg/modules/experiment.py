""" Module for the configuration and the orchestration of the numerical experiments.

An experiment is described by an `ExperimentConfig` (read from JSON) and run by
`run_experiment`, which writes `results.csv`, `manifest.json` and optional VTK
snapshots to the output directory and returns the exit status.
"""
import os
import dataclasses
from dataclasses import asdict, dataclass, fields
import json
import numbers

import numpy as np
import pandas as pd

import modules.data_handler as dh
from modules.energy import EnergyError, LimitState, check_beta
from modules.field_grid import FACES, BoundarySpec, Grid, GridError
from modules.maxwell import MaxwellError, stray_field_energy
from modules.minimize import (MinimizeError, minimize_diffuse_descent, minimize_limit_alternating,
                              solve_elastic_equilibrium)
from modules.recovery import RecoveryError, build_recovery, gamma_study
from modules.sphere_geodesy import (GeodesyError, geodesic_distance, great_circle, measure_profile_constant, path_action,
                                    surface_tension_table)
from modules.tensor_core import AnisotropySpec, MaterialLaw, TensorError


__version__ = '1.0.0'

KINDS = ('gamma-study', 'stray-check', 'geodesic', 'minimize-limit', 'minimize-diffuse', 'almost-min-study')
LAYOUTS = ('split', 'constant', 'laminate', 'random')
NUMERIC_ERRORS = (TensorError, GeodesyError, GridError, EnergyError, MaxwellError, RecoveryError, MinimizeError)


@dataclass
class ExperimentConfig:
    """ Resolved configuration of one experiment. Every field has a default.

    Attributes
    ----------
    kind : `str`
        One of `KINDS`.
    n : `int`
        Cells per axis of the unit cube.
    p, q, c_w, a, b : `float`
        Material law.
    anisotropy : `str`
        'uniaxial', 'cubic' or 'multiwell'.
    kappa : `list` of `float`
        κ (uniaxial, multiwell) or (κ1, κ2) (cubic).
    axes : `list`
        Easy axes as rows; identity if None.
    wells : `list`
        Wells of a 'multiwell' anisotropy.
    beta : `float`
        Layer exponent.
    eps : `list` of `float`
        Strictly decreasing scales.
    lam : `float`
        Weight of the stray-field energy.
    field : `list` of `float`
        Constant applied field.
    faces : `list` of `str`
        Dirichlet faces.
    datum : `list`
        Matrix A of the datum d(x) = Ax; d = 0 if None.
    layout : `str`
        Initial or limit label layout, one of `LAYOUTS`.
    """
    kind: str = 'gamma-study'
    n: int = 32
    p: float = 4.0
    q: float = 2.0
    c_w: float = 1.0
    a: float = 0.3
    b: float = -0.1
    anisotropy: str = 'uniaxial'
    kappa: list = dataclasses.field(default_factory=lambda: [1.0])
    axes: list = None
    wells: list = None
    beta: float = 0.5
    eps: list = dataclasses.field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025])
    lam: float = 0.0
    field: list = dataclasses.field(default_factory=lambda: [0.0, 0.0, 0.0])
    faces: list = dataclasses.field(default_factory=lambda: ['x0'])
    datum: list = None
    level: int = 5
    padding: int = 2
    theta: float = 4.0
    sweeps: int = 20
    steps: int = 100
    step: float = 1e-2
    seed: int = 0
    threads: int = 1
    out: str = None
    snapshots: bool = False
    stray_n: int = 64
    radius: float = 0.25
    layout: str = 'split'

    @classmethod
    def from_dict(cls, data: dict):
        """ Build a configuration from a mapping, rejecting unknown keys.

        Raise
        -------
        ConfigError :
            When a key is unknown.
        """
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(msg="Unknown configuration keys: {}".format(', '.join(unknown)))
        return cls(**data)

    @classmethod
    def from_json(cls, file_path):
        """ Read a configuration file or a manifest written by a previous run.
        """
        try:
            data = dh.load_manifest(file_path)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(msg="Configuration file can not be read: {}".format(e))
        if not isinstance(data, dict):
            raise ConfigError(msg="Configuration must be a JSON object.")
        return cls.from_dict(data)

    def to_dict(self):
        return asdict(self)

    def validate(self):
        """ Check the configuration.

        Raise
        -------
        ConfigError :
            When a field is invalid. The layer exponent is checked against the
            regime 0 < β < min(2(q−1)/q, 1).
        """
        for f in fields(self):
            value = getattr(self, f.name)
            if f.type is int and (isinstance(value, bool) or not isinstance(value, numbers.Integral)):
                raise ConfigError(msg="Field '{}' must be an integer. ({!r})".format(f.name, value))
            if f.type is float and (isinstance(value, bool) or not isinstance(value, numbers.Real)):
                raise ConfigError(msg="Field '{}' must be a number. ({!r})".format(f.name, value))
        try:
            if self.kind not in KINDS:
                raise ConfigError(msg="Unknown experiment kind '{}'. Choose from {}."
                                  .format(self.kind, ', '.join(KINDS)))
            if self.layout not in LAYOUTS:
                raise ConfigError(msg="Unknown layout '{}'.".format(self.layout))
            if int(self.n) < 4 or int(self.stray_n) < 4:
                raise ConfigError(msg="Grids need at least 4 cells per axis.")
            try:
                law = self.law()
                check_beta(self.beta, law.q)
                self.spec()
            except (TensorError, EnergyError) as e:
                raise ConfigError(msg=str(e))
            eps = [float(e) for e in self.eps]
            if len(eps) == 0 or any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
                raise ConfigError(msg="Scale schedule must be positive and strictly decreasing. ({})"
                                  .format(self.eps))
            if self.lam < 0:
                raise ConfigError(msg="Stray-field weight lam must be nonnegative.")
            if len(self.field) != 3:
                raise ConfigError(msg="Applied field must be a 3-vector.")
            if len(self.faces) == 0 or any(face not in FACES for face in self.faces):
                raise ConfigError(msg="Dirichlet faces must be a nonempty subset of {}."
                                  .format(', '.join(FACES)))
            if self.datum is not None and np.shape(self.datum) != (3, 3):
                raise ConfigError(msg="Datum must be a 3x3 matrix.")
            if self.padding < 2 or self.threads < 1 or self.level < 0:
                raise ConfigError(msg="Padding must be at least 2, threads at least 1 and level nonnegative.")
            if not 0 < self.radius < 0.5:
                raise ConfigError(msg="Ball radius must lie in (0, 0.5).")
            if self.sweeps < 1 or self.steps < 1 or not self.step > 0:
                raise ConfigError(msg="Sweeps, steps and step size must be positive.")
        except (TypeError, ValueError) as e:
            raise ConfigError(msg="Invalid configuration value: {}".format(e))

    def law(self):
        return MaterialLaw(self.p, self.q, self.c_w, self.a, self.b)

    def spec(self):
        """ Anisotropy of the configuration.
        """
        if self.anisotropy == 'uniaxial':
            axis = (1.0, 0.0, 0.0) if self.axes is None else self.axes[0]
            return AnisotropySpec.uniaxial(self.kappa[0], axis)
        if self.anisotropy == 'cubic':
            kappa = list(self.kappa) + [0.0]
            return AnisotropySpec.cubic(kappa[0], kappa[1], self.axes)
        if self.anisotropy == 'multiwell':
            if self.wells is None:
                raise TensorError(msg="A multiwell anisotropy needs wells.")
            return AnisotropySpec.multiwell(self.wells, self.kappa[0])
        raise TensorError(msg="Unknown anisotropy '{}'.".format(self.anisotropy))

    def grid(self):
        return Grid(self.n)

    def boundary(self):
        return BoundarySpec(self.faces, None if self.datum is None else np.asarray(self.datum, dtype=float))


def initial_labels(config: ExperimentConfig, grid: Grid, spec: AnisotropySpec):
    """ Label field of the configured layout.

    'split' puts the first well on x1 < 1/2 and the second on the rest, 'laminate'
    does the same across the plane x1 + x2 = 1, 'random' draws labels with the seed.
    """
    x = grid.centers()
    if config.layout == 'constant':
        return np.ones(grid.n, dtype=int)
    if config.layout == 'split':
        return np.where(x[..., 0] < 0.5, 1, 2)
    if config.layout == 'laminate':
        return np.where(x[..., 0] + x[..., 1] < 1.0, 1, 2)
    rng = np.random.default_rng(config.seed)
    return rng.integers(1, spec.n_wells + 1, size=grid.n)


def isotropic_displacement(grid: Grid, law: MaterialLaw):
    """ u = c x with c = (a + 2b)/3, the strain of best fit to every Λ(z).
    """
    return (law.a + 2*law.b)/3*grid.centers()


def _gamma_study(config, out):
    law, spec, grid = config.law(), config.spec(), config.grid()
    limit = LimitState(grid, isotropic_displacement(grid, law), initial_labels(config, grid, spec))
    snapshots = os.path.join(out, 'snapshots') if config.snapshots else None
    return gamma_study(limit, config.eps, config.beta, law, spec, config.lam, config.field,
                       theta=config.theta, level=config.level, padding=config.padding,
                       threads=config.threads, snapshots=snapshots)


def _stray_check(config, out):
    grid = Grid(config.stray_n)
    x = grid.centers() - 0.5
    r = np.linalg.norm(x, axis=-1)
    ball = r < config.radius
    m = np.zeros(grid.n + (3,))
    m[ball] = (1.0, 0.0, 0.0)
    energy, problem = stray_field_energy(grid, m, padding=config.padding, threads=config.threads)
    h = problem.restrict(problem.h)
    inner = r < config.radius - 2*grid.spacing[0]
    error = np.linalg.norm(h[inner] + m[inner]/3, axis=-1)*3
    exact = 4*np.pi/9*config.radius**3
    if config.snapshots:
        dh.save_vtk(os.path.join(out, 'snapshots', 'stray.vtk'), grid, {'m': m, 'h': h})
    return pd.DataFrame([{
        'N': config.stray_n, 'padding': config.padding, 'radius': config.radius,
        'interior_error': float(np.max(error)), 'mean_interior_error': float(np.mean(error)),
        'energy': energy, 'energy_exact': exact, 'energy_error': abs(energy - exact)/exact,
        'identity_residual': problem.identity_residual,
    }])


def _geodesic(config, out):
    spec = config.spec()
    rows = []
    for i in range(1, spec.n_wells + 1):
        for j in range(i + 1, spec.n_wells + 1):
            z0, z1 = spec.wells[i - 1], spec.wells[j - 1]
            arc = path_action(spec, great_circle(z0, z1))
            distance = geodesic_distance(spec, z0, z1, config.level)
            c0 = measure_profile_constant(spec, i, j, level=config.level)
            rows.append({'i': i, 'j': j, 'level': config.level, 'distance': distance,
                         'great_circle': arc, 'c0': c0, 'profile_cost': c0*distance})
    return pd.DataFrame(rows)


def _minimize_limit(config, out):
    law, spec, grid = config.law(), config.spec(), config.grid()
    sigma = surface_tension_table(spec, config.level)
    init = LimitState(grid, np.zeros(grid.n + (3,)), initial_labels(config, grid, spec))
    state, trace = minimize_limit_alternating(init, config.boundary(), law, spec, sigma, config.lam, config.field,
                                              config.sweeps, padding=config.padding, threads=config.threads)
    if config.snapshots:
        dh.save_vtk(os.path.join(out, 'snapshots', 'limit.vtk'), grid, {'u': state.u, 'label': state.m})
    return trace


def _limit_equilibrium(config, law, spec, grid):
    m = initial_labels(config, grid, spec)
    u = solve_elastic_equilibrium(grid, m, config.boundary(), law, spec)
    return LimitState(grid, u, m)


def _minimize_diffuse(config, out):
    law, spec, grid = config.law(), config.spec(), config.grid()
    limit = _limit_equilibrium(config, law, spec, grid)
    init = build_recovery(limit, config.eps[0], config.beta, spec, law, config.theta, config.level)
    state, trace = minimize_diffuse_descent(init, law, spec, config.boundary(), config.lam, config.field,
                                            config.steps, config.step, config.padding, config.threads)
    if config.snapshots:
        dh.save_vtk(os.path.join(out, 'snapshots', 'diffuse.vtk'), grid, {'u': state.u, 'mu': state.mu})
    return trace


def _almost_min_study(config, out):
    law, spec, grid = config.law(), config.spec(), config.grid()
    sigma = surface_tension_table(spec, config.level)
    init = LimitState(grid, np.zeros(grid.n + (3,)), initial_labels(config, grid, spec))
    limit, trace = minimize_limit_alternating(init, config.boundary(), law, spec, sigma, config.lam, config.field,
                                              config.sweeps, padding=config.padding, threads=config.threads)
    G = float(trace['G'].iloc[-1])
    rows = []
    for eps in config.eps:
        start = build_recovery(limit, eps, config.beta, spec, law, config.theta, config.level)
        state, descent = minimize_diffuse_descent(start, law, spec, config.boundary(), config.lam, config.field,
                                                  config.steps, config.step, config.padding, config.threads)
        G_eps = float(descent['G'].iloc[-1])
        rows.append({'eps': eps, 'G': G, 'G_eps_start': float(descent['G'].iloc[0]), 'G_eps': G_eps,
                     'gap': abs(G_eps - G), 'relative_gap': abs(G_eps - G)/max(abs(G), 1e-300)})
        if config.snapshots:
            dh.save_vtk(os.path.join(out, 'snapshots', 'almost_min_eps{:.6g}.vtk'.format(eps)), grid,
                        {'u': state.u, 'mu': state.mu, 'label': limit.m})
    return pd.DataFrame(rows)


RUNNERS = {
    'gamma-study': _gamma_study,
    'stray-check': _stray_check,
    'geodesic': _geodesic,
    'minimize-limit': _minimize_limit,
    'minimize-diffuse': _minimize_diffuse,
    'almost-min-study': _almost_min_study,
}


def run_experiment(config: ExperimentConfig):
    """ Run one experiment and write its outputs.

    Returns
    -------
    `int`
        0 on success, 2 when the configuration is invalid, 3 on a numerical failure.
    """
    try:
        config.validate()
    except ConfigError as e:
        print('\033[31m' + 'Error:' + str(e) + '\033[0m')
        return 2
    out = config.out if config.out is not None else dh.generate_dirname()
    os.makedirs(out, exist_ok=True)
    resolved = config.to_dict()
    resolved['out'] = out
    try:
        table = RUNNERS[config.kind](config, out)
    except NUMERIC_ERRORS as e:
        print('\033[31m' + 'Error:' + str(e) + '\033[0m')
        return 3
    dh.save_table(table, os.path.join(out, 'results.csv'))
    dh.save_manifest(os.path.join(out, 'manifest.json'), resolved, __version__)
    return 0


class ConfigError(Exception):
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
