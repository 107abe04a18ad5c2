""" Module for 3x3 tensor algebra, the stored-energy density and the anisotropy densities.

All functions accept a single 3x3 matrix (or 3-vector) as well as stacks of them
with the tensor axes last, e.g. `(N1, N2, N3, 3, 3)` for a matrix field.
"""
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation


IDENTITY = np.eye(3)


@dataclass(frozen=True)
class MaterialLaw:
    """ Material constants of the magnetoelastic body.

    Attributes
    ----------
    p : `float`
        Growth exponent of the distance to SO(3). Must be greater than 2.
    q : `float`
        Growth exponent of the determinant. Must be greater than 1.
    c_w : `float`
        Growth constant of the stored energy. Must be positive.
    a : `float`
        Axial spontaneous strain constant.
    b : `float`
        Transverse spontaneous strain constant.
    """
    p: float = 4.0
    q: float = 2.0
    c_w: float = 1.0
    a: float = 0.3
    b: float = -0.1

    def __post_init__(self):
        if not self.p > 2:
            raise TensorError(msg="Growth exponent p must be greater than 2. (p={})".format(self.p))
        if not self.q > 1:
            raise TensorError(msg="Determinant exponent q must be greater than 1. (q={})".format(self.q))
        if not self.c_w > 0:
            raise TensorError(msg="Growth constant c_W must be positive. (c_W={})".format(self.c_w))

    def beta_limit(self):
        """ Upper end of the admissible range of the layer exponent beta.
        """
        return min(2*(self.q - 1)/self.q, 1.0)

    def density(self, A):
        """ Stored energy W(A) of this law. Shortcut of `default_stored_energy`.
        """
        return default_stored_energy(A, self)


def det3(A):
    """ Determinant of (stacks of) 3x3 matrices as the exact cubic polynomial of the entries.
    """
    A = np.asarray(A, dtype=float)
    return (A[..., 0, 0]*(A[..., 1, 1]*A[..., 2, 2] - A[..., 1, 2]*A[..., 2, 1])
            - A[..., 0, 1]*(A[..., 1, 0]*A[..., 2, 2] - A[..., 1, 2]*A[..., 2, 0])
            + A[..., 0, 2]*(A[..., 1, 0]*A[..., 2, 1] - A[..., 1, 1]*A[..., 2, 0]))


def cofactor(A):
    """ Cofactor matrix cof A = det(A) A^{-T}, computed without division.
    """
    A = np.asarray(A, dtype=float)
    C = np.empty_like(A)
    C[..., 0, 0] = A[..., 1, 1]*A[..., 2, 2] - A[..., 1, 2]*A[..., 2, 1]
    C[..., 0, 1] = A[..., 1, 2]*A[..., 2, 0] - A[..., 1, 0]*A[..., 2, 2]
    C[..., 0, 2] = A[..., 1, 0]*A[..., 2, 1] - A[..., 1, 1]*A[..., 2, 0]
    C[..., 1, 0] = A[..., 0, 2]*A[..., 2, 1] - A[..., 0, 1]*A[..., 2, 2]
    C[..., 1, 1] = A[..., 0, 0]*A[..., 2, 2] - A[..., 0, 2]*A[..., 2, 0]
    C[..., 1, 2] = A[..., 0, 1]*A[..., 2, 0] - A[..., 0, 0]*A[..., 2, 1]
    C[..., 2, 0] = A[..., 0, 1]*A[..., 1, 2] - A[..., 0, 2]*A[..., 1, 1]
    C[..., 2, 1] = A[..., 0, 2]*A[..., 1, 0] - A[..., 0, 0]*A[..., 1, 2]
    C[..., 2, 2] = A[..., 0, 0]*A[..., 1, 1] - A[..., 0, 1]*A[..., 1, 0]
    return C


def inv3(A):
    """ Inverse of (stacks of) 3x3 matrices by the adjugate formula.

    Raise
    -------
    TensorError :
        When one of the matrices is singular.
    """
    det = det3(A)
    if np.any(det == 0):
        raise TensorError(msg="Singular matrix can not be inverted.")
    return np.swapaxes(cofactor(A), -1, -2)/det[..., None, None]


def sym(B):
    """ Symmetric part of (stacks of) square matrices.
    """
    B = np.asarray(B, dtype=float)
    return 0.5*(B + np.swapaxes(B, -1, -2))


def _check_unit(z, tol=1e-9):
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != 3:
        raise TensorError(msg="Direction must be a 3-vector.")
    if np.any(np.abs(np.linalg.norm(z, axis=-1) - 1) > tol):
        raise TensorError(msg="Direction must be a unit vector.")
    return z


def spontaneous_strain(z, law: MaterialLaw):
    """ Spontaneous strain Λ(z) = a z⊗z + b(I − z⊗z).

    Parameters
    ----------
    z : `ndarray`, required
        Unit vector(s) with the component axis last.
    law : `MaterialLaw`, required
        Source of the strain constants a, b.

    Returns
    -------
    `ndarray`
        Symmetric matrix (stack) of shape `z.shape + (3,)`.

    Raise
    -------
    TensorError :
        When z is not a unit vector within 1e-9.
    """
    z = _check_unit(z)
    zz = z[..., :, None]*z[..., None, :]
    return law.a*zz + law.b*(IDENTITY - zz)


def spontaneous_strain_scaled(z, eps: float, law: MaterialLaw, inverse=False):
    """ Near-identity spontaneous strain Λ_ε(z) = I + εΛ(z) or its inverse.

    Parameters
    ----------
    z : `ndarray`, required
        Unit vector(s) with the component axis last.
    eps : `float`, required
        Scale ε > 0.
    law : `MaterialLaw`, required
        Source of the strain constants a, b.
    inverse : `bool`
        If True, Λ_ε^{-1}(z) = (1/a_ε) z⊗z + (1/b_ε)(I − z⊗z) is returned.

    Raise
    -------
    TensorError :
        When z is not a unit vector, or when a_ε = 1+εa or b_ε = 1+εb is not positive.
    """
    z = _check_unit(z)
    a_eps, b_eps = 1 + eps*law.a, 1 + eps*law.b
    if a_eps <= 0 or b_eps <= 0:
        raise TensorError(msg="Scaled strain is not admissible (a_eps={}, b_eps={}).".format(a_eps, b_eps))
    zz = z[..., :, None]*z[..., None, :]
    if inverse:
        return zz/a_eps + (IDENTITY - zz)/b_eps
    return a_eps*zz + b_eps*(IDENTITY - zz)


def reference_growth_gp(t, p: float):
    """ Growth function g_p(t): t²/2 for t ≤ 1, t^p/p + 1/2 − 1/p otherwise.

    Raise
    -------
    TensorError :
        When t is negative.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise TensorError(msg="g_p is defined for nonnegative arguments only.")
    s = np.maximum(t, 1.0)
    return np.where(t <= 1, 0.5*t**2, s**p/p + 0.5 - 1/p)


def determinant_growth_hq(t, q: float):
    """ Growth function h_q(t) = t^q/q + 1/t − (q+1)/q, minimal (= 0) at t = 1.

    Raise
    -------
    TensorError :
        When t is not positive.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise TensorError(msg="h_q is defined for positive arguments only.")
    return t**q/q + 1/t - (q + 1)/q


def closest_rotation(A):
    """ Rotation closest to A in the Frobenius norm (det-corrected polar factor).
    """
    U, _, Vt = np.linalg.svd(np.asarray(A, dtype=float))
    d = np.sign(det3(U @ Vt))
    d = np.where(d == 0, 1.0, d)
    U = U.copy()
    U[..., :, 2] *= d[..., None]
    return U @ Vt


def dist_SO3(A):
    """ Frobenius distance of A to SO(3).

    The singular values are compared with 1 after flipping the sign of the smallest
    one when det A < 0.
    """
    A = np.asarray(A, dtype=float)
    s = np.linalg.svd(A, compute_uv=False)
    s = s.copy()
    s[..., 2] *= np.where(det3(A) < 0, -1.0, 1.0)
    return np.sqrt(np.sum((s - 1)**2, axis=-1))


def default_stored_energy(A, law: MaterialLaw):
    """ Stored energy W(A) = c_W (g_p(dist(A, SO(3))) + h_q(det A)).

    Matrices with det A ≤ 0 get `numpy.inf`. Integrators must reject such states.
    """
    A = np.asarray(A, dtype=float)
    det = det3(A)
    ok = det > 0
    safe_det = np.where(ok, det, 1.0)
    energy = law.c_w*(reference_growth_gp(dist_SO3(A), law.p) + determinant_growth_hq(safe_det, law.q))
    return np.where(ok, energy, np.inf)


def stored_energy_stress(A, law: MaterialLaw):
    """ First Piola stress ∂W/∂A of the default stored energy.

    ∂W/∂A = c_W [ g_p'(d)/d (A − R) + h_q'(det A) cof A ], with R the closest rotation
    and d = |A − R|. Only meaningful where det A > 0.
    """
    A = np.asarray(A, dtype=float)
    R = closest_rotation(A)
    d = np.linalg.norm(A - R, axis=(-2, -1))
    # g_p'(d)/d equals 1 below d = 1
    coef = np.where(d <= 1, 1.0, np.maximum(d, 1.0)**(law.p - 2))
    det = det3(A)
    det = np.where(det > 0, det, np.nan)
    dh = det**(law.q - 1) - 1/det**2
    return law.c_w*(coef[..., None, None]*(A - R) + dh[..., None, None]*cofactor(A))


def quadratic_form(B, law: MaterialLaw):
    """ Closed-form Q_W(B) = c_W (|sym B|² + (q+1)(tr B)²) of the default stored energy.
    """
    B = np.asarray(B, dtype=float)
    S = sym(B)
    tr = np.trace(B, axis1=-2, axis2=-1)
    return law.c_w*(np.sum(S**2, axis=(-2, -1)) + (law.q + 1)*tr**2)


def elasticity_tensor(law: MaterialLaw):
    """ Fourth-order elasticity tensor C_W with C_W B : B = Q_W(B).

    Returns
    -------
    `ndarray`
        Array of shape (3, 3, 3, 3). The Lamé constants are c_W/2 and c_W(q+1).
    """
    d = IDENTITY
    shear = 0.5*(np.einsum('ik,jl->ijkl', d, d) + np.einsum('il,jk->ijkl', d, d))
    bulk = np.einsum('ij,kl->ijkl', d, d)
    return law.c_w*(shear + (law.q + 1)*bulk)


def apply_elasticity(B, law: MaterialLaw):
    """ C_W B = c_W (sym B + (q+1) tr(B) I) for (stacks of) matrices.
    """
    B = np.asarray(B, dtype=float)
    tr = np.trace(B, axis1=-2, axis2=-1)
    return law.c_w*(sym(B) + (law.q + 1)*tr[..., None, None]*IDENTITY)


def extract_elastic_form(W, B, h=1e-4):
    """ Quadratic form Q_W(B) of an arbitrary density by centered second differences.

    The bracket W(I+hB) + W(I−hB) − 2W(I) equals h² Q_W(B) up to O(h⁴), so the
    quotient by h² is taken at h and h/2 and combined by one Richardson step.

    Parameters
    ----------
    W : `callable`, required
        Density taking a 3x3 matrix and returning a scalar.
    B : `ndarray`, required
        Direction matrix.
    h : `float`
        Step in [1e-5, 1e-2].

    Raise
    -------
    TensorError :
        When h is out of range or a density evaluation is not finite.
    """
    if not 1e-5 <= h <= 1e-2:
        raise TensorError(msg="Second-difference step must be in [1e-5, 1e-2]. (h={})".format(h))
    B = np.asarray(B, dtype=float)
    w0 = float(W(IDENTITY))

    def second_difference(step):
        values = [float(W(IDENTITY + step*B)), float(W(IDENTITY - step*B)), w0]
        if not np.all(np.isfinite(values)):
            raise TensorError(msg="Density evaluation near the identity is not finite.")
        return (values[0] + values[1] - 2*values[2])/step**2

    coarse, fine = second_difference(h), second_difference(h/2)
    return (4*fine - coarse)/3


def random_rotations(n: int, seed=None):
    """ Uniformly distributed rotation matrices, shape (n, 3, 3).
    """
    return Rotation.random(n, random_state=seed).as_matrix()


def fibonacci_sphere(n: int):
    """ Nearly uniform sample of n points on S².
    """
    k = np.arange(n) + 0.5
    polar = np.arccos(1 - 2*k/n)
    azimuth = np.pi*(1 + 5**0.5)*k
    return np.stack([np.cos(azimuth)*np.sin(polar), np.sin(azimuth)*np.sin(polar), np.cos(polar)], axis=-1)


class AnisotropySpec:
    """ Anisotropy density Φ and its set of wells on S².

    Use the factories `uniaxial`, `cubic` and `multiwell` for the common cases.
    A tabulated density is any callable acting on arrays of 3-vectors.
    """
    kinds = ('uniaxial', 'cubic', 'tabulated')

    def __init__(self, wells, kind='uniaxial', kappa=(1.0,), axes=None, density=None):
        """ Validate the wells against the density.

        Parameters
        ----------
        wells : `ndarray`, required
            Well directions b_1, ..., b_M, shape (M, 3).
        kind : `str`
            'uniaxial', 'cubic' or 'tabulated'.
        kappa : `tuple` of `float`
            κ for uniaxial, (κ1, κ2) for cubic, scaling factor for tabulated.
        axes : `ndarray`
            Easy axes as rows of an orthonormal matrix (uniaxial uses the first row).
        density : `callable`
            Density for the 'tabulated' kind.

        Raise
        -------
        TensorError :
            When fewer than two wells are given, a well is not unit-norm within 1e-12,
            Φ does not vanish on a well within 1e-10 or Φ is negative on the sphere.
        """
        if kind not in AnisotropySpec.kinds:
            raise TensorError(msg="Unknown anisotropy kind '{}'.".format(kind))
        self.wells = np.atleast_2d(np.asarray(wells, dtype=float))
        self.kind = kind
        self.kappa = tuple(float(k) for k in np.atleast_1d(kappa))
        self.axes = IDENTITY.copy() if axes is None else np.asarray(axes, dtype=float)
        self.__density = density
        self.geodesic_cache = {}
        if any(k < 0 for k in self.kappa):
            raise TensorError(msg="Anisotropy constants must be nonnegative.")
        if kind == 'tabulated' and density is None:
            raise TensorError(msg="A tabulated anisotropy needs a density.")
        if kind == 'cubic' and len(self.kappa) == 1:
            self.kappa = (self.kappa[0], 0.0)
        if not np.allclose(self.axes @ self.axes.T, IDENTITY, atol=1e-10):
            raise TensorError(msg="Easy axes must be orthonormal.")
        if self.wells.shape[0] < 2 or self.wells.shape[1] != 3:
            raise TensorError(msg="At least two wells in R^3 are required.")
        if np.any(np.abs(np.linalg.norm(self.wells, axis=1) - 1) > 1e-12):
            raise TensorError(msg="Wells must be unit vectors.")
        if np.any(self(self.wells) > 1e-10):
            raise TensorError(msg="The density does not vanish on every well.")
        if np.any(self(fibonacci_sphere(2000)) < -1e-12):
            raise TensorError(msg="The density is negative on the sphere.")

    @property
    def n_wells(self):
        return self.wells.shape[0]

    @classmethod
    def uniaxial(cls, kappa=1.0, axis=(1.0, 0.0, 0.0)):
        """ Φ(z) = κ |z × a|², equal to κ(1 − (a·z)²) on S². Wells ±a.
        """
        axis = np.asarray(axis, dtype=float)
        axis = axis/np.linalg.norm(axis)
        helper = IDENTITY[np.argmin(np.abs(axis))]
        second = helper - (helper @ axis)*axis
        second = second/np.linalg.norm(second)
        frame = np.stack([axis, second, np.cross(axis, second)])
        return cls([axis, -axis], kind='uniaxial', kappa=(kappa,), axes=frame)

    @classmethod
    def cubic(cls, kappa1=1.0, kappa2=0.0, axes=None):
        """ Φ(z) = κ1 Σ_{i<j} w_i²w_j² + κ2 w1²w2²w3² in axis coordinates w. Wells ±a_i.

        Requires κ1 > 0 so that Φ vanishes only on the six axis directions.
        """
        if not kappa1 > 0:
            raise TensorError(msg="Cubic anisotropy needs kappa1 > 0.")
        axes = IDENTITY.copy() if axes is None else np.asarray(axes, dtype=float)
        wells = np.concatenate([axes, -axes])[[0, 3, 1, 4, 2, 5]]
        return cls(wells, kind='cubic', kappa=(kappa1, kappa2), axes=axes)

    @classmethod
    def multiwell(cls, wells, kappa=1.0):
        """ Tabulated density κ ∏_i |z − b_i|² / 4^{M−1}, vanishing exactly on the given wells.
        """
        wells = np.atleast_2d(np.asarray(wells, dtype=float))
        scale = kappa/4.0**(wells.shape[0] - 1)

        def density(z):
            z = np.asarray(z, dtype=float)
            out = np.full(z.shape[:-1], scale)
            for w in wells:
                out = out*np.sum((z - w)**2, axis=-1)
            return out
        return cls(wells, kind='tabulated', kappa=(kappa,), density=density)

    def __call__(self, z):
        return anisotropy_density(z, self)

    def gradient(self, z):
        """ Gradient ∇Φ(z), analytic for uniaxial and cubic densities.
        """
        z = np.asarray(z, dtype=float)
        if self.kind == 'uniaxial':
            a = self.axes[0]
            return 2*self.kappa[0]*(z - (z @ a)[..., None]*a)
        if self.kind == 'cubic':
            w = z @ self.axes.T
            w2 = w**2
            k1, k2 = self.kappa
            dw = np.stack([
                2*k1*w[..., 0]*(w2[..., 1] + w2[..., 2]) + 2*k2*w[..., 0]*w2[..., 1]*w2[..., 2],
                2*k1*w[..., 1]*(w2[..., 0] + w2[..., 2]) + 2*k2*w[..., 1]*w2[..., 0]*w2[..., 2],
                2*k1*w[..., 2]*(w2[..., 0] + w2[..., 1]) + 2*k2*w[..., 2]*w2[..., 0]*w2[..., 1],
            ], axis=-1)
            return dw @ self.axes
        step = 1e-6
        grad = np.empty_like(z)
        for k in range(3):
            e = np.zeros(3)
            e[k] = step
            grad[..., k] = (self.__density(z + e) - self.__density(z - e))/(2*step)
        return grad

    def tabulated(self, z):
        return self.__density(z)


def anisotropy_density(z, spec: AnisotropySpec):
    """ Anisotropy density Φ(z) for (stacks of) 3-vectors.

    Φ is defined on all of R³ and is nonnegative. On S² it vanishes exactly on the wells.
    """
    z = np.asarray(z, dtype=float)
    if spec.kind == 'uniaxial':
        a = spec.axes[0]
        return spec.kappa[0]*(np.sum(z**2, axis=-1) - (z @ a)**2)
    if spec.kind == 'cubic':
        w2 = (z @ spec.axes.T)**2
        k1, k2 = spec.kappa
        return (k1*(w2[..., 0]*w2[..., 1] + w2[..., 1]*w2[..., 2] + w2[..., 2]*w2[..., 0])
                + k2*w2[..., 0]*w2[..., 1]*w2[..., 2])
    return spec.tabulated(z)


class TensorError(Exception):
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
