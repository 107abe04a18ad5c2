""" Module for geodesic well distances on the unit sphere.

The conformal metric √Φ |dz| is discretized on an icosahedral mesh. Distances between
two directions come from a shortest path on the mesh graph, relaxed by L-BFGS, and
are always evaluated as the action of a piecewise great-circle path.
"""
import heapq
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import optimize, sparse
from scipy.sparse import csgraph
from scipy.spatial import cKDTree

from modules.tensor_core import AnisotropySpec, anisotropy_density


# Gauss-Legendre nodes on [0, 1] for the arc quadrature of the action
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(6)
_GL_NODES = 0.5*(_GL_NODES + 1)
_GL_WEIGHTS = 0.5*_GL_WEIGHTS


@dataclass(frozen=True, eq=False)
class SphereMesh:
    """ Icosahedral triangulation of S².

    Attributes
    ----------
    vertices : `ndarray`
        Unit vectors, shape (V, 3).
    faces : `ndarray`
        Vertex indices of the triangles, shape (F, 3).
    edges : `ndarray`
        Unique vertex pairs, shape (E, 2).
    lengths : `ndarray`
        Euclidean edge lengths, shape (E,).
    level : `int`
        Subdivision level; the mesh has 20·4^level faces.
    anchors : `ndarray`
        Vertex index of every anchored direction (wells), in the given order.
    """
    vertices: np.ndarray
    faces: np.ndarray
    edges: np.ndarray
    lengths: np.ndarray
    level: int
    anchors: np.ndarray

    @property
    def tree(self):
        return _vertex_tree(self)

    def vertex_faces(self):
        """ Faces incident to every vertex, padded by repetition to six columns.
        """
        return _vertex_faces(self)


def _icosahedron():
    phi = (1 + 5**0.5)/2
    vertices = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=float)
    faces = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ])
    return vertices/np.linalg.norm(vertices, axis=1, keepdims=True), faces


@lru_cache(maxsize=None)
def _subdivided(level: int):
    vertices, faces = _icosahedron()
    vertices = list(vertices)
    for _ in range(level):
        cache = {}

        def midpoint(i, j):
            key = (i, j) if i < j else (j, i)
            if key not in cache:
                m = vertices[i] + vertices[j]
                vertices.append(m/np.linalg.norm(m))
                cache[key] = len(vertices) - 1
            return cache[key]
        refined = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            refined += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = np.array(refined)
    return np.array(vertices), faces


@lru_cache(maxsize=32)
def _build_mesh(level: int, anchors: tuple):
    vertices, faces = _subdivided(level)
    vertices = vertices.copy()
    anchor_index = []
    if anchors:
        nearest = cKDTree(vertices).query(np.array(anchors))[1]
        if len(set(nearest.tolist())) != len(anchors):
            raise GeodesyError(msg="Two anchors fall on the same mesh vertex. Refine the mesh.")
        vertices[nearest] = np.array(anchors)
        anchor_index = nearest.tolist()
    edges = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    edges = np.unique(np.sort(edges, axis=1), axis=0)
    lengths = np.linalg.norm(vertices[edges[:, 0]] - vertices[edges[:, 1]], axis=1)
    return SphereMesh(vertices, faces, edges, lengths, level, np.array(anchor_index, dtype=int))


def sphere_mesh(level: int, anchors=None):
    """ Icosahedral mesh of S², optionally with given directions moved onto mesh vertices.

    Parameters
    ----------
    level : `int`, required
        Subdivision level ≥ 0.
    anchors : `ndarray`
        Unit vectors (typically the wells) that must be mesh vertices.

    Returns
    -------
    `SphereMesh`
        Cached immutable mesh.
    """
    if level < 0:
        raise GeodesyError(msg="Subdivision level must be nonnegative.")
    key = () if anchors is None else tuple(tuple(float(c) for c in a) for a in np.atleast_2d(anchors))
    return _build_mesh(int(level), key)


@lru_cache(maxsize=32)
def _vertex_tree(mesh):
    return cKDTree(mesh.vertices)


@lru_cache(maxsize=32)
def _vertex_faces(mesh):
    incident = [[] for _ in range(len(mesh.vertices))]
    for f, tri in enumerate(mesh.faces):
        for v in tri:
            incident[v].append(f)
    table = np.empty((len(incident), 6), dtype=int)
    for v, faces in enumerate(incident):
        table[v] = (faces*2)[:6]
    return table


def _normalize(x):
    return x/np.linalg.norm(x, axis=-1, keepdims=True)


def _slerp(p, q, t):
    """ Points at fractions t along the short great-circle arcs from p to q.
    """
    cos = np.clip(np.sum(p*q, axis=-1), -1.0, 1.0)
    angle = np.arccos(cos)[..., None]
    sin = np.sin(angle)
    small = sin[..., 0] < 1e-12
    sin = np.where(small[..., None], 1.0, sin)
    out = (np.sin((1 - t)*angle)*p + np.sin(t*angle)*q)/sin
    linear = _normalize((1 - t)*p + t*q)
    return np.where(small[..., None], linear, out)


def path_action(spec: AnisotropySpec, points):
    """ Action ∫ √Φ(γ) |γ'| of the piecewise great-circle path through the given points.
    """
    points = np.asarray(points, dtype=float)
    p, q = points[:-1], points[1:]
    angle = np.arccos(np.clip(np.sum(p*q, axis=-1), -1.0, 1.0))
    t = _GL_NODES[:, None, None]
    samples = _slerp(p[None], q[None], t)
    root = np.sqrt(np.maximum(anisotropy_density(samples, spec), 0.0))
    return float(np.sum(angle*np.tensordot(_GL_WEIGHTS, root, axes=1)))


def great_circle(z0, z1, n=129):
    """ Points on a shortest great-circle arc from z0 to z1 (any meridian for antipodes).
    """
    z0, z1 = np.asarray(z0, dtype=float), np.asarray(z1, dtype=float)
    t = np.linspace(0, 1, n)[:, None]
    if np.dot(z0, z1) < -1 + 1e-12:
        helper = np.eye(3)[np.argmin(np.abs(z0))]
        mid = _normalize(helper - np.dot(helper, z0)*z0)
        half = np.linspace(0, 1, n//2 + 1)[:, None]
        first = _slerp(z0[None], mid[None], half)
        second = _slerp(mid[None], z1[None], half)
        return np.concatenate([first, second[1:]])
    return _slerp(z0[None], z1[None], t)


def _graph_path(spec, mesh, z0, z1, k=6):
    """ Dijkstra shortest path with z0 and z1 linked to their k nearest mesh vertices.
    """
    nodes = np.concatenate([mesh.vertices, [z0, z1]])
    V = len(mesh.vertices)
    root = np.sqrt(np.maximum(anisotropy_density(nodes, spec), 0.0))
    near0 = mesh.tree.query(z0, k=k)[1]
    near1 = mesh.tree.query(z1, k=k)[1]
    edges = np.concatenate([
        mesh.edges,
        np.stack([np.full(k, V), near0], axis=1),
        np.stack([np.full(k, V + 1), near1], axis=1),
    ])
    chord = np.linalg.norm(nodes[edges[:, 0]] - nodes[edges[:, 1]], axis=1)
    weight = 0.5*(root[edges[:, 0]] + root[edges[:, 1]])*chord
    # zero weights would be dropped by the sparse format
    weight = np.maximum(weight, 1e-300)
    graph = sparse.coo_matrix((weight, (edges[:, 0], edges[:, 1])), shape=(V + 2, V + 2)).tocsr()
    _, predecessors = csgraph.dijkstra(graph, directed=False, indices=V, return_predecessors=True)
    path = [V + 1]
    while path[-1] != V:
        prev = predecessors[path[-1]]
        if prev < 0:
            raise GeodesyError(msg="Mesh graph is not connected.")
        path.append(prev)
    return nodes[path[::-1]]


def _resample(points, n):
    """ Resample a polyline to n points evenly spaced in chord length, projected to S².
    """
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    target = np.linspace(0, s[-1], n)
    out = np.stack([np.interp(target, s, points[:, k]) for k in range(3)], axis=1)
    out = _normalize(out)
    out[0], out[-1] = points[0], points[-1]
    return out


def _relax(spec, points, maxiter=200):
    """ Minimize the chordal discrete action over the interior points, kept on S² by normalization.
    """
    ends = points[[0, -1]]
    n = len(points)

    def action(x):
        X = x.reshape(n - 2, 3)
        norm = np.linalg.norm(X, axis=1, keepdims=True)
        P = np.concatenate([ends[:1], X/norm, ends[1:]])
        phi = np.maximum(anisotropy_density(P, spec), 0.0)
        root = np.sqrt(phi)
        diff = np.diff(P, axis=0)
        length = np.maximum(np.linalg.norm(diff, axis=1), 1e-300)
        weight = 0.5*(root[:-1] + root[1:])
        value = np.sum(weight*length)
        grad_root = spec.gradient(P)/(2*np.maximum(root, 1e-150)[:, None])
        grad_root[root == 0] = 0.0
        unit = diff/length[:, None]
        g = 0.5*grad_root[1:-1]*(length[:-1] + length[1:])[:, None]
        g += weight[:-1, None]*unit[:-1] - weight[1:, None]*unit[1:]
        p = P[1:-1]
        g = (g - np.sum(g*p, axis=1, keepdims=True)*p)/norm
        return value, g.ravel()

    result = optimize.minimize(action, points[1:-1].ravel(), jac=True, method='L-BFGS-B',
                               options={'maxiter': maxiter, 'ftol': 1e-10})
    X = result.x.reshape(n - 2, 3)
    return np.concatenate([ends[:1], _normalize(X), ends[1:]])


def _canonical(z0, z1):
    z0, z1 = np.asarray(z0, dtype=float), np.asarray(z1, dtype=float)
    if tuple(z1) < tuple(z0):
        return z1, z0, True
    return z0, z1, False


def geodesic_path(spec: AnisotropySpec, z0, z1, level=5, n=129):
    """ Best admissible path between two directions and its action.

    The candidates are the relaxed mesh path of every level from 2 up to `level`
    and the great-circle arc. The returned action is the minimum over all of them,
    so it never exceeds the great-circle value and is nonincreasing in the level.

    Parameters
    ----------
    spec : `AnisotropySpec`, required
        Anisotropy density defining the metric.
    z0, z1 : `ndarray`, required
        Unit endpoints.
    level : `int`
        Finest mesh level ≥ 2.
    n : `int`
        Number of path points after resampling.

    Returns
    -------
    points : `ndarray`
        Path from z0 to z1, shape (n, 3).
    action : `float`
        Arc-quadrature action of the path.

    Raise
    -------
    GeodesyError :
        When the level is below 2 or the endpoints are not unit vectors.
    """
    if level < 2:
        raise GeodesyError(msg="Mesh level {} is too coarse for a meaningful distance (minimum 2).".format(level))
    for z in (z0, z1):
        if abs(np.linalg.norm(z) - 1) > 1e-9:
            raise GeodesyError(msg="Endpoints must be unit vectors.")
    a, b, swapped = _canonical(z0, z1)
    if np.allclose(a, b, rtol=0, atol=1e-15):
        return np.stack([a, b]), 0.0
    key = (tuple(a), tuple(b), int(level), int(n))
    if key not in spec.geodesic_cache:
        if level == 2:
            best = great_circle(a, b, n)
            best_action = path_action(spec, best)
        else:
            best, best_action = geodesic_path(spec, a, b, level - 1, n)
        mesh = sphere_mesh(level)
        relaxed = _relax(spec, _resample(_graph_path(spec, mesh, a, b), n))
        value = path_action(spec, relaxed)
        if value < best_action:
            best, best_action = relaxed, value
        spec.geodesic_cache[key] = (best, best_action)
    points, action = spec.geodesic_cache[key]
    return (points[::-1].copy() if swapped else points.copy()), action


def geodesic_distance(spec: AnisotropySpec, z0, z1, level=5):
    """ Geodesic distance d_Φ(z0, z1) of the conformal metric √Φ |dz|.

    See `geodesic_path` for the construction.
    """
    return geodesic_path(spec, z0, z1, level)[1]


def surface_tension_table(spec: AnisotropySpec, level=5):
    """ Surface tensions σ^{ij} = d_Φ(b_i, b_j) between all pairs of wells.

    Returns
    -------
    `ndarray`
        Symmetric M×M matrix with zero diagonal (0-based well indices).
    """
    M = spec.n_wells
    sigma = np.zeros((M, M))
    for i in range(M):
        for j in range(i + 1, M):
            sigma[i, j] = sigma[j, i] = geodesic_distance(spec, spec.wells[i], spec.wells[j], level)
    return sigma


def well_distance_field(spec: AnisotropySpec, i: int, mesh: SphereMesh):
    """ Distance f_i(z) = d_Φ(z, b_i) at every vertex of the mesh.

    The field is the first-arrival solution of the eikonal equation |∇f| = √Φ computed
    by fast marching on the triangles, with edge updates as a fallback. It never
    exceeds the graph distance of the same mesh.

    Parameters
    ----------
    spec : `AnisotropySpec`, required
        Anisotropy density defining the metric.
    i : `int`, required
        Well index, 1 ≤ i ≤ M.
    mesh : `SphereMesh`, required
        Mesh built with the wells as anchors, so that b_i is a vertex.

    Returns
    -------
    `ndarray`
        Values per mesh vertex.
    """
    if not 1 <= i <= spec.n_wells:
        raise GeodesyError(msg="Well index {} out of range 1..{}.".format(i, spec.n_wells))
    if len(mesh.anchors) < i or not np.allclose(mesh.vertices[mesh.anchors[i - 1]], spec.wells[i - 1]):
        raise GeodesyError(msg="The mesh must be anchored at the wells.")
    return _fast_marching(mesh, np.sqrt(np.maximum(anisotropy_density(mesh.vertices, spec), 0.0)),
                          int(mesh.anchors[i - 1]))


def _triangle_update(x, ta, tb, sa, sb, sc, a, b):
    """ Smallest arrival time at x through the edge ab of a flat triangle.
    """
    e = b - a
    r = x - a
    ee = e @ e
    re = r @ e
    height2 = max(r @ r - re*re/ee, 0.0)
    delta = tb - ta
    lam = 0.5
    best = min(ta + 0.5*(sa + sc)*np.linalg.norm(r), tb + 0.5*(sb + sc)*np.linalg.norm(x - b))
    for _ in range(2):
        w = 0.5*(sc + (1 - lam)*sa + lam*sb)
        denom = w*w - delta*delta/ee
        if denom <= 0:
            break
        u = -np.sign(delta)*abs(delta)*np.sqrt(height2/denom)
        lam = min(max((u + re)/ee, 0.0), 1.0)
        value = ta + lam*delta + w*np.linalg.norm(r - lam*e)
        best = min(best, value)
    return best


def _fast_marching(mesh: SphereMesh, speed, source: int):
    V = len(mesh.vertices)
    X = mesh.vertices
    T = np.full(V, np.inf)
    done = np.zeros(V, dtype=bool)
    T[source] = 0.0
    vertex_faces = mesh.vertex_faces()
    heap = [(0.0, source)]
    while heap:
        t, v = heapq.heappop(heap)
        if done[v]:
            continue
        done[v] = True
        for f in set(vertex_faces[v].tolist()):
            tri = mesh.faces[f]
            for c in tri:
                if done[c]:
                    continue
                others = [o for o in tri if o != c]
                a, b = others
                if done[a] and done[b]:
                    value = _triangle_update(X[c], T[a], T[b], speed[a], speed[b], speed[c], X[a], X[b])
                else:
                    k = a if done[a] else b
                    value = T[k] + 0.5*(speed[k] + speed[c])*np.linalg.norm(X[c] - X[k])
                if value < T[c]:
                    T[c] = value
                    heapq.heappush(heap, (value, c))
    return T


def interpolate_on_mesh(mesh: SphereMesh, values, z):
    """ Piecewise-linear interpolation of vertex values at directions z, shape (..., 3).
    """
    z = np.asarray(z, dtype=float)
    flat = z.reshape(-1, 3)
    nearest = mesh.tree.query(flat)[1]
    candidates = mesh.vertex_faces()[nearest]
    tri = mesh.faces[candidates]
    corners = mesh.vertices[tri]
    # barycentric weights of the ray through z in every candidate triangle
    weights = np.linalg.solve(np.swapaxes(corners, -1, -2), np.broadcast_to(flat[:, None, :], corners.shape[:2] + (3,))[..., None])[..., 0]
    pick = np.argmax(np.min(weights, axis=-1), axis=-1)
    rows = np.arange(len(flat))
    w = np.clip(weights[rows, pick], 0.0, None)
    w = w/np.sum(w, axis=-1, keepdims=True)
    out = np.sum(w*np.asarray(values)[tri[rows, pick]], axis=-1)
    return out.reshape(z.shape[:-1])


class PathCurve:
    """ Arc-length parametrization of a piecewise great-circle path.
    """

    def __init__(self, points):
        self.points = np.asarray(points, dtype=float)
        angle = np.arccos(np.clip(np.sum(self.points[:-1]*self.points[1:], axis=-1), -1.0, 1.0))
        self.breaks = np.concatenate([[0.0], np.cumsum(angle)])
        self.length = float(self.breaks[-1])

    def __call__(self, s):
        s = np.clip(np.asarray(s, dtype=float), 0.0, self.length)
        k = np.clip(np.searchsorted(self.breaks, s, side='right') - 1, 0, len(self.points) - 2)
        span = self.breaks[k + 1] - self.breaks[k]
        t = np.where(span > 0, (s - self.breaks[k])/np.where(span > 0, span, 1.0), 0.0)
        return _slerp(self.points[k], self.points[k + 1], t[..., None])


@dataclass
class TransitionProfile:
    """ One-dimensional transition layer between two wells.

    Attributes
    ----------
    tau : `ndarray`
        Scaled coordinate τ = t/ε^β of the samples, increasing over [−Θ, Θ].
    points : `ndarray`
        Profile values on S² at the samples, from well i to well j.
    t : `ndarray`
        Physical signed distance t = ε^β τ of the samples.
    cost : `float`
        Per-area diffuse cost ∫(ε^{−β}Φ + ε^β|p'|²) dt = ∫(Φ + |dp/dτ|²) dτ.
    eps : `float`
    beta : `float`
    theta : `float`
        Half-width of the layer in units of ε^β.
    """
    tau: np.ndarray
    points: np.ndarray
    t: np.ndarray
    cost: float
    eps: float
    beta: float
    theta: float

    @property
    def n(self):
        return len(self.tau)

    @property
    def width(self):
        """ Half-width Θ ε^β of the layer.
        """
        return self.theta*self.eps**self.beta

    def __call__(self, t):
        """ Profile value at signed distances t (negative side is well i).
        """
        tau = np.clip(np.asarray(t, dtype=float)/self.eps**self.beta, self.tau[0], self.tau[-1])
        out = np.stack([np.interp(tau, self.tau, self.points[:, k]) for k in range(3)], axis=-1)
        return _normalize(out)


def _check_interior(spec, points, i, j):
    interior = points[1:-1]
    spacing = np.max(np.linalg.norm(np.diff(points, axis=0), axis=1))
    for k, well in enumerate(spec.wells, start=1):
        if k in (i, j):
            continue
        if np.min(np.linalg.norm(interior - well, axis=1)) < 1.5*spacing:
            raise GeodesyError(msg="The geodesic from well {} to well {} passes through well {}; "
                                   "the equipartition profile does not exist.".format(i, j, k))
    if np.min(anisotropy_density(interior[1:-1], spec)) <= 1e-12:
        raise GeodesyError(msg="The density vanishes inside the path; the profile does not exist.")


def optimal_profile(spec: AnisotropySpec, i: int, j: int, eps: float, beta: float,
                    n=2001, level=5, theta=4.0):
    """ Equipartition transition profile from well i to well j.

    The geodesic is traversed with |dp/dτ| = √Φ(p), centred at half of its weighted
    length. It is cut at |τ| = 0.95Θ and joined to the wells along great circles over
    the outer 5% of the layer.

    Parameters
    ----------
    spec : `AnisotropySpec`, required
    i, j : `int`, required
        Distinct well indices (1-based).
    eps : `float`, required
        Scale ε > 0.
    beta : `float`, required
        Layer exponent; the layer width scales as ε^β.
    n : `int`
        Number of samples of the profile.
    level : `int`
        Mesh level of the geodesic.
    theta : `float`
        Half-width Θ of the layer in units of ε^β.

    Raise
    -------
    GeodesyError :
        When i = j or Φ vanishes inside the path.
    """
    if i == j:
        raise GeodesyError(msg="A transition profile needs two different wells.")
    if eps <= 0 or beta <= 0:
        raise GeodesyError(msg="Scale and layer exponent must be positive.")
    points, _ = geodesic_path(spec, spec.wells[i - 1], spec.wells[j - 1], level)
    _check_interior(spec, points, i, j)
    curve = PathCurve(points)
    s = np.linspace(0, curve.length, 8001)
    mid = 0.5*(s[1:] + s[:-1])
    root = np.sqrt(np.maximum(anisotropy_density(curve(mid), spec), 0.0))
    ds = np.diff(s)
    weighted = np.concatenate([[0.0], np.cumsum(root*ds)])
    with np.errstate(divide='ignore'):
        slow = np.concatenate([[0.0], np.cumsum(ds/root)])
    s_mid = np.interp(0.5*weighted[-1], weighted, s)
    tau_s = slow - np.interp(s_mid, s, slow)

    cut = 0.95*theta
    lo, hi = max(tau_s[0], -cut), min(tau_s[-1], cut)
    tau = np.linspace(-theta, theta, n)
    core = (tau >= lo) & (tau <= hi)
    prof = np.empty((n, 3))
    prof[core] = curve(np.interp(tau[core], tau_s, s))
    start, end = curve(np.interp(lo, tau_s, s)), curve(np.interp(hi, tau_s, s))
    left, right = tau < lo, tau > hi
    if np.any(left):
        frac = (lo - tau[left])/(lo + theta)
        prof[left] = _slerp(start[None], points[0][None], frac[:, None])
    if np.any(right):
        frac = (tau[right] - hi)/(theta - hi)
        prof[right] = _slerp(end[None], points[-1][None], frac[:, None])
    prof[0], prof[-1] = points[0], points[-1]

    dtau = np.diff(tau)
    half = _normalize(prof[1:] + prof[:-1])
    cost = float(np.sum((anisotropy_density(half, spec)
                         + np.sum(np.diff(prof, axis=0)**2, axis=1)/dtau**2)*dtau))
    return TransitionProfile(tau, prof, eps**beta*tau, cost, eps, beta, theta)


def measure_profile_constant(spec: AnisotropySpec, i: int, j: int, level=5, n=400, span=12.0):
    """ Constant c₀ of the minimal one-dimensional transition cost, cost = c₀ d_Φ(b_i, b_j).

    A piecewise-linear profile s(τ) along the geodesic on [−span, span] is optimized
    directly, independently of the equipartition construction.

    Returns
    -------
    `float`
        Measured c₀, which is also the ratio of the per-area diffuse cost to σ^{ij} = d_Φ
        (2 by Young's inequality).
    """
    points, distance = geodesic_path(spec, spec.wells[i - 1], spec.wells[j - 1], level)
    curve = PathCurve(points)
    tau = np.linspace(-span, span, n + 1)
    dtau = tau[1] - tau[0]
    S = curve.length

    def phi(s):
        return anisotropy_density(curve(s), spec)

    def cost(x):
        s = np.concatenate([[0.0], x, [S]])
        m = 0.5*(s[1:] + s[:-1])
        step = 1e-7*max(S, 1.0)
        dphi = (phi(m + step) - phi(m - step))/(2*step)
        diff = np.diff(s)
        value = np.sum(phi(m))*dtau + np.sum(diff**2)/dtau
        grad = 0.5*dtau*(dphi[:-1] + dphi[1:]) + 2*(diff[:-1] - diff[1:])/dtau
        return value, grad

    start = S*(np.tanh(tau[1:-1]) + 1)/2
    result = optimize.minimize(cost, start, jac=True, method='L-BFGS-B',
                               bounds=[(0.0, S)]*(n - 1), options={'maxiter': 2000, 'ftol': 1e-13})
    c0 = float(result.fun/distance)
    if abs(c0 - 1) > 0.05:
        warnings.warn("Diffuse transition cost between wells {} and {} is {:.4f} times the surface tension."
                      .format(i, j, c0))
    return c0


class GeodesyError(Exception):
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
