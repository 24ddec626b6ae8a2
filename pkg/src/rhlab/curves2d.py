"""Topology of random plane curves on RP^2 and sign-grid contour extraction.

The sphere carries an antipodally symmetric icosahedral triangulation. A
sample's zero set is traced through triangles whose vertices carry both
signs; cycles on S^2 merge across the antipodal map into RP^2 components,
one self-antipodal cycle being a non-contractible component (pseudoline)
and a swapped pair being a contractible oval. The same walk on a planar
grid (open chains allowed) powers the in-ball census and the barrier
pipeline's presence test.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .ensembles import EnsembleSpec, HomogeneousPolynomial, monomial_matrix, multi_indices
from .errors import InsufficientResolution

__all__ = [
    "SphericalGrid",
    "CurveTopology",
    "BettiStats",
    "CensusStats",
    "spherical_grid",
    "required_level",
    "extract_topology",
    "betti_statistics",
    "component_census_in_balls",
    "plane_curve_components",
    "nesting_depths",
    "nesting_signature",
    "PlaneCurveComponent",
    "harnack_bound",
]

MAX_LEVEL = 8
# one fixed pseudo-random rotation applied to every grid, so that no sample
# polynomial vanishes exactly on a vertex of the unrotated lattice
_GRID_ROTATION_SEED = 117771
# cycles shorter than this are treated as potentially under-resolved: a
# genuine oval at the 1/(4d) resolution rule spans well over this many cells
MIN_CYCLE_TRIANGLES = 16


def harnack_bound(d: int) -> int:
    return (d - 1) * (d - 2) // 2 + 1


def _icosahedron():
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    verts = []
    for a in (-1.0, 1.0):
        for b in (-phi, phi):
            verts += [(0.0, a, b), (a, b, 0.0), (b, 0.0, a)]
    V = np.array(verts)
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    from scipy.spatial import ConvexHull

    hull = ConvexHull(V)
    return V, hull.simplices.astype(np.int64)


@dataclass(frozen=True)
class SphericalGrid:
    level: int
    vertices: np.ndarray = field(repr=False)
    triangles: np.ndarray = field(repr=False)
    antipode: np.ndarray = field(repr=False)
    max_edge: float
    # per-triangle edge endpoints, neighbor triangle across each edge, and
    # the shared edge's local index inside the neighbor
    tri_edge_verts: np.ndarray = field(repr=False)
    tri_neighbors: np.ndarray = field(repr=False)
    tri_neighbor_edge: np.ndarray = field(repr=False)
    edges: np.ndarray = field(repr=False)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)


def _build_adjacency(tris: np.ndarray):
    T = len(tris)
    tri_edge_verts = np.empty((T, 3, 2), np.int64)
    tri_edge_verts[:, 0] = tris[:, [0, 1]]
    tri_edge_verts[:, 1] = tris[:, [1, 2]]
    tri_edge_verts[:, 2] = tris[:, [2, 0]]
    owner = {}
    nbr = np.full((T, 3), -1, np.int64)
    nbr_edge = np.full((T, 3), -1, np.int8)
    for t in range(T):
        for k in range(3):
            a, b = tri_edge_verts[t, k]
            key = (a, b) if a < b else (b, a)
            if key in owner:
                t2, k2 = owner.pop(key)
                nbr[t, k] = t2
                nbr_edge[t, k] = k2
                nbr[t2, k2] = t
                nbr_edge[t2, k2] = k
            else:
                owner[key] = (t, k)
    return tri_edge_verts, nbr, nbr_edge


@lru_cache(maxsize=None)
def spherical_grid(level: int) -> SphericalGrid:
    if level > MAX_LEVEL:
        raise InsufficientResolution(
            f"subdivision level {level} exceeds the memory cap {MAX_LEVEL}"
        )
    V, F = _icosahedron()
    verts = [tuple(v) for v in V]
    vindex = {v: i for i, v in enumerate(verts)}
    tris = F.tolist()
    for _ in range(level):
        midpoint = {}

        def mid(i, j):
            key = (i, j) if i < j else (j, i)
            if key in midpoint:
                return midpoint[key]
            m = np.array(verts[i]) + np.array(verts[j])
            m = m / np.linalg.norm(m)
            tm = tuple(m)
            idx = vindex.get(tm)
            if idx is None:
                idx = len(verts)
                verts.append(tm)
                vindex[tm] = idx
            midpoint[key] = idx
            return idx

        new_tris = []
        for a, b, c in tris:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_tris += [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
        tris = new_tris

    Va = np.array(verts)
    tris = np.array(tris, np.int64)
    # antipodal pairing: negation of a vertex is exactly a vertex (canonical
    # +0.0 keeps -0.0 byte patterns from breaking the hash)
    def zkey(v):
        return np.where(v == 0.0, 0.0, v).tobytes()

    lookup = {zkey(v): i for i, v in enumerate(Va)}
    anti = np.empty(len(Va), np.int64)
    for i, v in enumerate(Va):
        j = lookup.get(zkey(-v))
        if j is None:
            raise RuntimeError("triangulation lost antipodal symmetry")
        anti[i] = j

    rng = np.random.default_rng(_GRID_ROTATION_SEED)
    M = rng.normal(size=(3, 3))
    q, r = np.linalg.qr(M)
    rot = q * np.sign(np.diag(r))
    Va = Va @ rot.T

    tri_edge_verts, nbr, nbr_edge = _build_adjacency(tris)
    e = Va[tri_edge_verts[:, :, 0]] - Va[tri_edge_verts[:, :, 1]]
    max_edge = float(np.linalg.norm(e, axis=2).max())
    pairs = np.vstack([tri_edge_verts[:, k] for k in range(3)])
    pairs = np.unique(np.sort(pairs, axis=1), axis=0)
    Va.setflags(write=False)
    tris.setflags(write=False)
    return SphericalGrid(
        level=level, vertices=Va, triangles=tris, antipode=anti,
        max_edge=max_edge, tri_edge_verts=tri_edge_verts,
        tri_neighbors=nbr, tri_neighbor_edge=nbr_edge, edges=pairs,
    )


def required_level(d: int) -> int:
    """Smallest level whose longest edge is at most 1/(4d) radians.

    Chord length bounds arc length from below closely at these scales; the
    factor-4 oversampling absorbs the difference.
    """
    target = 1.0 / (4.0 * d)
    for level in range(2, MAX_LEVEL + 1):
        if spherical_grid(level).max_edge <= target:
            return level
    dmax = int(1.0 / (4.0 * spherical_grid(MAX_LEVEL).max_edge))
    raise InsufficientResolution(
        f"degree {d} needs a finer grid than level {MAX_LEVEL} (max feasible degree {dmax})"
    )


@dataclass(frozen=True)
class CurveTopology:
    b0: int
    n_noncontractible: int
    components: tuple  # (n_triangles_on_S2, contractible) per RP^2 component
    flagged: bool
    level: int


def evaluate_on_vertices(Q: HomogeneousPolynomial, V: np.ndarray, chunk: int = 30000) -> np.ndarray:
    out = np.empty(len(V))
    E = Q.exponents
    for i in range(0, len(V), chunk):
        out[i : i + chunk] = monomial_matrix(E, V[i : i + chunk]) @ Q.coeffs
    return out


def _trace_cycles(crossed_edges: np.ndarray, grid: SphericalGrid, crossed_tris: np.ndarray):
    """Closed cycles of crossed triangles on the sphere.

    Returns (label, sizes, pos): component label per triangle, cycle lengths,
    and each triangle's step index along its cycle.
    """
    label = np.full(grid.n_triangles, -1, np.int64)
    pos = np.full(grid.n_triangles, -1, np.int64)
    sizes = []
    nbr = grid.tri_neighbors
    nbr_edge = grid.tri_neighbor_edge
    comp = 0
    for t0 in crossed_tris:
        if label[t0] != -1:
            continue
        ce = np.flatnonzero(crossed_edges[t0])
        t, k = int(t0), int(ce[0])
        size = 0
        while label[t] == -1:
            label[t] = comp
            pos[t] = size
            size += 1
            t_next = int(nbr[t, k])
            k_in = int(nbr_edge[t, k])
            e = crossed_edges[t_next]
            k = 0 if (e[0] and k_in != 0) else (1 if (e[1] and k_in != 1) else 2)
            t = t_next
        sizes.append(size)
        comp += 1
    return label, sizes, pos


def extract_topology(Q: HomogeneousPolynomial, grid: SphericalGrid) -> CurveTopology:
    """Connected components of Q = 0 on RP^2 from the sign grid on S^2."""
    if Q.nvars != 3:
        raise ValueError("extract_topology expects nvars = 3")
    if not np.any(Q.coeffs):
        raise ValueError("zero polynomial")
    vals = evaluate_on_vertices(Q, grid.vertices)
    signs = vals > 0  # exact zeros (measure zero) land on the negative side
    ev = grid.tri_edge_verts
    crossed_edges = signs[ev[:, :, 0]] != signs[ev[:, :, 1]]
    crossed = crossed_edges.any(axis=1)
    crossed_tris = np.flatnonzero(crossed)

    if len(crossed_tris) == 0:
        return CurveTopology(b0=0, n_noncontractible=0, components=(), flagged=False,
                             level=grid.level)

    label, sizes, pos = _trace_cycles(crossed_edges, grid, crossed_tris)

    # flag 1: isolated sign islands (vertex disagreeing with every neighbor)
    e0, e1 = grid.edges[:, 0], grid.edges[:, 1]
    agree = signs[e0] == signs[e1]
    has_same = np.zeros(grid.n_vertices, bool)
    np.logical_or.at(has_same, e0, agree)
    np.logical_or.at(has_same, e1, agree)
    flagged = bool((~has_same).any())
    # flag 2: distinct cycles through edge-adjacent triangles, or tiny cycles
    if not flagged:
        nb = grid.tri_neighbors[crossed_tris]
        lab_here = label[crossed_tris][:, None]
        lab_nb = label[nb]
        flagged = bool(((lab_nb != -1) & (lab_nb != lab_here)).any())
    if not flagged:
        flagged = any(s < MIN_CYCLE_TRIANGLES for s in sizes)
    # flag 3: one cycle doubling back through edge-adjacent triangles (a
    # near-tangency merged below grid scale looks exactly like this)
    if not flagged:
        nb = grid.tri_neighbors[crossed_tris]
        same = label[nb] == label[crossed_tris][:, None]
        sz = np.array(sizes)[label[crossed_tris]][:, None]
        dp = np.abs(pos[nb] - pos[crossed_tris][:, None])
        dp = np.minimum(dp, sz - dp)
        flagged = bool((same & (dp > 2)).any())

    # antipodal merge: cycle -> cycle through the vertex antipode map
    tri_index = {}
    for t in crossed_tris:
        tri_index[tuple(sorted(grid.triangles[t]))] = t
    reps = {}
    for t in crossed_tris:
        c = label[t]
        if c not in reps:
            reps[c] = t
    pair = {}
    for c, t in reps.items():
        at = tri_index.get(tuple(sorted(grid.antipode[grid.triangles[t]])))
        if at is None:
            raise InsufficientResolution("antipodal image of a crossed triangle is not crossed")
        pair[c] = int(label[at])

    seen = set()
    comps = []
    n_noncontract = 0
    for c, c2 in pair.items():
        if c in seen:
            continue
        if c2 == c:
            comps.append((sizes[c], False))
            n_noncontract += 1
            seen.add(c)
        else:
            comps.append((sizes[c] + sizes[c2], True))
            seen.add(c)
            seen.add(c2)
    return CurveTopology(
        b0=len(comps), n_noncontractible=n_noncontract,
        components=tuple(comps), flagged=flagged, level=grid.level,
    )


@dataclass(frozen=True)
class BettiStats:
    d: int
    trials: int
    mean_b0: float
    std_error: float
    max_b0_observed: int
    harnack_bound: int
    flagged_fraction: float
    level: int


def betti_statistics(d: int, trials: int, level: int | None = None, seed: int = 0,
                     spec_kind: str = "kostlan") -> BettiStats:
    """Monte Carlo b_0 statistics of degree-d Kostlan curves on RP^2.

    Trials flagged at the base level are re-run one level finer; trials still
    flagged there are excluded and reported in flagged_fraction. Per-sample
    hard assertions: the Harnack bound and the pseudoline parity rule.
    """
    if level is None:
        level = required_level(d)
    grid = spherical_grid(level)
    fine = None
    spec = EnsembleSpec(spec_kind, 3, d, seed=seed)
    b0s = []
    residual_flagged = 0
    from .ensembles import sample

    for t in range(trials):
        Q = sample(spec, t)
        topo = extract_topology(Q, grid)
        if topo.flagged:
            if fine is None:
                fine = spherical_grid(level + 1)
            topo = extract_topology(Q, fine)
            if topo.flagged:
                residual_flagged += 1
                continue
        if topo.b0 > harnack_bound(d):
            raise AssertionError(
                f"b0 = {topo.b0} exceeds the Harnack bound {harnack_bound(d)}: extraction bug"
            )
        if topo.n_noncontractible != d % 2:
            raise AssertionError(
                f"pseudoline parity violated at degree {d}: {topo.n_noncontractible}"
            )
        b0s.append(topo.b0)
    arr = np.array(b0s, float)
    mean = float(arr.mean())
    se = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return BettiStats(
        d=d, trials=trials, mean_b0=mean, std_error=se,
        max_b0_observed=int(arr.max()), harnack_bound=harnack_bound(d),
        flagged_fraction=residual_flagged / trials, level=level,
    )


# ------------------------------------------------------------- planar walker

@dataclass(frozen=True)
class PlaneCurveComponent:
    points: np.ndarray  # ordered crossing points along the chain
    closed: bool
    n_triangles: int


@lru_cache(maxsize=32)
def _plane_triangulation(H: int, W: int):
    """Cached split-cell triangulation of an H x W vertex grid."""
    idx = np.arange(H * W).reshape(H, W)
    v00 = idx[:-1, :-1].ravel()
    v10 = idx[1:, :-1].ravel()
    v01 = idx[:-1, 1:].ravel()
    v11 = idx[1:, 1:].ravel()
    tris = np.empty((2 * len(v00), 3), np.int64)
    tris[0::2] = np.stack([v00, v10, v11], axis=1)
    tris[1::2] = np.stack([v00, v11, v01], axis=1)
    return (tris,) + _build_adjacency(tris)


def plane_curve_components(values: np.ndarray, xs: np.ndarray, ys: np.ndarray,
                           domain: np.ndarray | None = None):
    """Zero-curve chains of a scalar field sampled on a rectangular grid.

    The grid cells are split into two triangles each; chains are traced
    through sign-crossing triangles. Chains hitting the domain boundary are
    open; the rest are closed cycles. `domain` masks grid vertices (points
    outside take no part).
    """
    H, W = values.shape
    if domain is None:
        domain = np.ones((H, W), bool)
    signs = values > 0

    tris, tev, nbr, nbr_edge = _plane_triangulation(H, W)
    dom_flat = domain.ravel()
    active = dom_flat[tris].all(axis=1)
    s_flat = signs.ravel()
    crossed_edges = (s_flat[tev[:, :, 0]] != s_flat[tev[:, :, 1]]) & active[:, None]
    crossed = crossed_edges.any(axis=1) & active

    pts = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1).reshape(-1, 2)
    vflat = values.ravel()

    def crossing_point(a, b):
        va, vb = vflat[a], vflat[b]
        t = va / (va - vb)
        return pts[a] + t * (pts[b] - pts[a])

    visited = np.zeros(len(tris), bool)
    comps = []
    for t0 in np.flatnonzero(crossed):
        if visited[t0]:
            continue

        def walk(start_edge):
            chain_pts = []
            t, k = int(t0), int(start_edge)
            ntris = 0
            while True:
                visited[t] = True
                ntris += 1
                a, b = tev[t, k]
                chain_pts.append(crossing_point(a, b))
                t_next = int(nbr[t, k])
                if t_next == -1 or not active[t_next]:
                    return chain_pts, ntris, False
                if t_next == t0:
                    return chain_pts, ntris, True
                k_in = int(nbr_edge[t, k])
                e = crossed_edges[t_next]
                nxt = [kk for kk in range(3) if e[kk] and kk != k_in]
                if not nxt:
                    return chain_pts, ntris, False
                t, k = t_next, nxt[0]

        ce = np.flatnonzero(crossed_edges[t0])
        fwd, n1, closed = walk(ce[0])
        if closed:
            comps.append(PlaneCurveComponent(np.array(fwd), True, n1))
            continue
        back, n2, _ = walk(ce[1]) if len(ce) > 1 else ([], 0, False)
        pts_all = list(reversed(back)) + fwd
        comps.append(PlaneCurveComponent(np.array(pts_all), False, n1 + n2))
    return comps


def _point_in_polygon(p, poly: np.ndarray) -> bool:
    x, y = p
    xs_, ys_ = poly[:, 0], poly[:, 1]
    x2, y2 = np.roll(xs_, -1), np.roll(ys_, -1)
    straddle = (ys_ > y) != (y2 > y)
    denom = np.where(y2 == ys_, 1.0, y2 - ys_)  # horizontal edges never straddle
    cross = straddle & (x < xs_ + (y - ys_) * (x2 - xs_) / denom)
    return bool(cross.sum() % 2)


def nesting_depths(components) -> list:
    """Containment depth of each closed component among the closed ones."""
    closed = [c for c in components if c.closed]
    depths = []
    for a in closed:
        p = a.points[0]
        depth = 0
        for b in closed:
            if b is a:
                continue
            if _point_in_polygon(p, b.points):
                depth += 1
        depths.append(depth)
    return depths


def nesting_signature(components) -> tuple:
    return tuple(sorted(nesting_depths(components)))


# ------------------------------------------------------------------ census

@dataclass(frozen=True)
class CensusStats:
    d: int
    trials: int
    ball_radius_factor: float
    n_balls: int
    counts: dict
    flagged_fraction: float


def _chart_ball_eval_matrices(centers: np.ndarray, r0: float, res: int, d: int):
    """Per-center (grid shape, sphere-point monomial matrix, disk mask)."""
    from .fubini import ProjectivePoint, rotation_to

    lin = np.linspace(-r0, r0, res)
    Z1, Z2 = np.meshgrid(lin, lin, indexing="ij")
    zs = np.stack([Z1.ravel(), Z2.ravel()], axis=-1)
    disk = (zs**2).sum(axis=1) <= r0 * r0
    E = multi_indices(3, d)
    out = []
    for c in centers:
        r = rotation_to(ProjectivePoint(c))
        U = np.concatenate([np.ones((len(zs), 1)), zs], axis=1)
        U /= np.linalg.norm(U, axis=1, keepdims=True)
        U = U @ r.T
        out.append((monomial_matrix(E, U), disk.reshape(res, res)))
    return lin, out


def ball_signature(values: np.ndarray, lin: np.ndarray, disk_mask: np.ndarray):
    """Nesting signature of the closed components fully inside the disk.

    Returns (signature, flagged): flagged when a closed component is too
    small for the grid to resolve reliably (fewer than 8 triangles).
    """
    comps = plane_curve_components(values, lin, lin, disk_mask)
    closed = [c for c in comps if c.closed]
    flagged = any(c.n_triangles < 8 for c in closed)
    return nesting_signature(closed), flagged


def component_census_in_balls(d: int, trials: int, ball_radius_factor: float,
                              seed: int = 0, catalog: dict | None = None,
                              oversample: float = 2.0) -> CensusStats:
    """Count, per sample and per packing ball, the configurations of fully
    contained components matching each catalog nesting signature."""
    from .packing import Manifold, greedy_separated_set

    if catalog is None:
        catalog = {"one_oval": (0,), "two_nonnested": (0, 0), "two_nested": (0, 1)}
    R = ball_radius_factor
    r0 = R / math.sqrt(d)
    eps = math.atan(r0)  # chart ball radius in unit-sphere radians
    if eps >= math.pi / 4:
        raise ValueError(
            f"R/sqrt(d) = {r0:.3f} puts the separation radius past pi/4 on RP^2; "
            "increase d or decrease the ball radius factor"
        )
    lam = greedy_separated_set(Manifold.projective(2), eps, seed=seed,
                               guard=math.pi / 4)
    centers = lam.points
    res = max(24, int(2 * R * math.sqrt(d) * oversample))
    lin, mats = _chart_ball_eval_matrices(centers, r0, res, d)
    spec = EnsembleSpec("kostlan", 3, d, seed=seed)
    from .ensembles import sample

    counts = {k: 0 for k in catalog}
    flagged = 0
    for t in range(trials):
        Q = sample(spec, t)
        trial_flag = False
        for M, disk in mats:
            vals = (M @ Q.coeffs).reshape(res, res)
            sig, fl = ball_signature(vals, lin, disk)
            trial_flag |= fl
            for name, target in catalog.items():
                if sig == tuple(target):
                    counts[name] += 1
        flagged += trial_flag
    return CensusStats(
        d=d, trials=trials, ball_radius_factor=R, n_balls=len(centers),
        counts=counts, flagged_fraction=flagged / trials,
    )
