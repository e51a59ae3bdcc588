"""Triangulated tube surfaces: mesh distances, curve shortening, distortion.

The mesh oracle routes queries through mesh-edge Dijkstra for the combinatorial
path and then relaxes that polyline on the analytic piecewise-smooth surface
(tension steps with exact nearest-point projection; the solid is convex, so
the projection is closed form).  Lengths of relaxed paths are measured
region-exactly: within a flat face or an unrolled cylinder chart the chord is
the geodesic, and within a sphere sector the great arc is.  The declared
oracle error is calibrated on flat-face pairs where the exact answer is the
straight chord.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as sparse_dijkstra
from scipy.spatial import Delaunay, cKDTree

from .polygon import GeometryError, exact_oracle
from .tube import (CYLINDER, FACE_BOTTOM, FACE_TOP, SECTOR, TubePoint,
                   TubeSurface, correspond_to_base)
from .verify import TWO_PI, ClosedCurve, DistanceOracle

_KEY_DECIMALS = 9


@dataclass
class TubeMesh:
    """Watertight triangulation of a TubeSurface with region tags."""

    tube: TubeSurface
    h: float
    vertices: np.ndarray          # (N, 3)
    triangles: np.ndarray         # (M, 3) outward-oriented
    vertex_region: list           # (kind, index) per vertex
    area: float
    euler: int
    _graph: Optional[csr_matrix] = field(default=None, repr=False)
    _kdtree: Optional[cKDTree] = field(default=None, repr=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def graph(self) -> csr_matrix:
        if self._graph is None:
            tri = self.triangles
            e = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
            e = np.unique(np.sort(e, axis=1), axis=0)
            w = np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]],
                               axis=1)
            n = self.n_vertices
            self._graph = csr_matrix(
                (np.concatenate([w, w]),
                 (np.concatenate([e[:, 0], e[:, 1]]),
                  np.concatenate([e[:, 1], e[:, 0]]))), shape=(n, n))
        return self._graph

    @property
    def kdtree(self) -> cKDTree:
        if self._kdtree is None:
            self._kdtree = cKDTree(self.vertices)
        return self._kdtree

    def to_off(self) -> str:
        """ASCII OFF export, counterclockwise (outward) triangles."""
        lines = ["OFF", f"{self.n_vertices} {len(self.triangles)} 0"]
        lines += [f"{v[0]:.12g} {v[1]:.12g} {v[2]:.12g}" for v in self.vertices]
        lines += [f"3 {t[0]} {t[1]} {t[2]}" for t in self.triangles]
        return "\n".join(lines) + "\n"


def build_mesh(tube: TubeSurface, h: float,
               vertex_cap: int = 1_500_000) -> TubeMesh:
    """Region-conforming triangulation with target edge length h.

    Seam vertices are shared exactly between faces, cylinders and sectors;
    the result is validated watertight, outward-oriented, of genus 0, and
    its area must sit within O(h^2) of the closed form.
    """
    eps = tube.eps
    b = tube.base
    if not (0.0 < h <= eps / 3.0):
        raise GeometryError(f"need 0 < h <= eps/3 = {eps / 3.0:.6g}, got {h}")

    verts: list[np.ndarray] = []
    regions: list[tuple] = []
    index: dict[tuple, int] = {}

    def add(pt: np.ndarray, region: tuple) -> int:
        key = tuple(np.round(pt, _KEY_DECIMALS))
        i = index.get(key)
        if i is None:
            i = len(verts)
            index[key] = i
            verts.append(np.asarray(pt, dtype=float))
            regions.append(region)
        return i

    tris: list[tuple] = []

    m_edge = int(math.ceil(b.side / h))
    q = int(math.ceil(math.pi * eps / h))

    # flat faces: shared boundary samples + interior lattice, Delaunay'd
    boundary2d = []
    for j in range(b.n):
        A, B = b.edge_endpoints(j)
        for k in range(m_edge):
            boundary2d.append(A + (k / m_edge) * (B - A))
    boundary2d = np.array(boundary2d)

    R = b.circumradius
    dy = h * math.sqrt(3.0) / 2.0
    rows = np.arange(-R, R + dy, dy)
    pts = []
    for r_i, y in enumerate(rows):
        x0 = -R - (0.5 * h if r_i % 2 else 0.0)
        pts.append(np.stack([np.arange(x0, R + h, h),
                             np.full_like(np.arange(x0, R + h, h), y)], axis=1))
    lattice = np.concatenate(pts)
    margin = 0.45 * h
    inside = np.all(lattice @ b.edge_normals.T <= b.apothem - margin, axis=1)
    face2d = np.concatenate([boundary2d, lattice[inside]])
    dela = Delaunay(face2d)

    for top in (True, False):
        region = (FACE_TOP if top else FACE_BOTTOM, -1)
        ids = [add(tube.face_xyz(p, top), region) for p in face2d]
        for simplex in dela.simplices:
            ia, ib, ic = (ids[simplex[0]], ids[simplex[1]], ids[simplex[2]])
            tris.append((ia, ib, ic))

    # half-cylinders along the edges
    for j in range(b.n):
        grid = np.empty((m_edge + 1, q + 1), dtype=int)
        for iu in range(m_edge + 1):
            for ip in range(q + 1):
                pt = tube.cylinder_xyz(j, iu / m_edge, math.pi * ip / q)
                grid[iu, ip] = add(pt, (CYLINDER, j))
        for iu in range(m_edge):
            for ip in range(q):
                a_, b_, c_, d_ = (grid[iu, ip], grid[iu + 1, ip],
                                  grid[iu + 1, ip + 1], grid[iu, ip + 1])
                tris.append((a_, b_, c_))
                tris.append((a_, c_, d_))

    # sphere sectors at the vertices
    r_az = max(1, int(math.ceil((TWO_PI / b.n) * eps / h)))
    for k in range(b.n):
        a0, a1 = tube.sector_azimuths(k)
        grid = np.empty((r_az + 1, q + 1), dtype=int)
        for ia in range(r_az + 1):
            psi = a0 + (a1 - a0) * ia / r_az
            for ip in range(q + 1):
                pt = tube.sector_xyz(k, psi, math.pi * ip / q)
                grid[ia, ip] = add(pt, (SECTOR, k))
        for ia in range(r_az):
            for ip in range(q):
                a_, b_, c_, d_ = (grid[ia, ip], grid[ia + 1, ip],
                                  grid[ia + 1, ip + 1], grid[ia, ip + 1])
                if a_ == b_:      # collapsed pole row
                    tris.append((a_, c_, d_))
                elif c_ == d_:
                    tris.append((a_, b_, c_))
                else:
                    tris.append((a_, b_, c_))
                    tris.append((a_, c_, d_))

    V = np.array(verts)
    if len(V) > vertex_cap:
        raise GeometryError(f"mesh needs {len(V)} vertices (cap {vertex_cap})")
    T = np.array(tris, dtype=np.int64)

    # orient every triangle outward: the radial projection direction is the
    # outward normal of the convex solid
    cent = V[T].mean(axis=1)
    foot2 = tube._foot_on_polygon(cent[:, :2])
    outward = cent - np.concatenate([foot2, np.zeros((len(cent), 1))], axis=1)
    nrm = np.cross(V[T[:, 1]] - V[T[:, 0]], V[T[:, 2]] - V[T[:, 0]])
    flip = np.einsum("ij,ij->i", nrm, outward) < 0
    T[flip] = T[flip][:, [0, 2, 1]]

    mesh_area = float(
        0.5 * np.linalg.norm(np.cross(V[T[:, 1]] - V[T[:, 0]],
                                      V[T[:, 2]] - V[T[:, 0]]), axis=1).sum())

    # watertight + Euler validation
    de = np.concatenate([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]])
    und, counts = np.unique(np.sort(de, axis=1), axis=0, return_counts=True)
    if not np.all(counts == 2):
        raise GeometryError("mesh is not watertight")
    directed = {}
    for a_, b_ in map(tuple, de):
        directed[(a_, b_)] = directed.get((a_, b_), 0) + 1
    if any(v != 1 for v in directed.values()):
        raise GeometryError("inconsistent triangle orientation")
    euler = len(V) - len(und) + len(T)
    if euler != 2:
        raise GeometryError(f"mesh genus is not 0 (V-E+F={euler})")
    if abs(mesh_area - tube.area) > 0.05 * tube.area:
        raise GeometryError("mesh area deviates grossly from the closed form")

    return TubeMesh(tube=tube, h=h, vertices=V, triangles=T,
                    vertex_region=regions, area=mesh_area, euler=euler)


# ---------------------------------------------------------------------------
# tension flow on the analytic surface


def _resample(nodes: np.ndarray, count: int, closed: bool) -> np.ndarray:
    pts = np.vstack([nodes, nodes[:1]]) if closed else nodes
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    if total <= 0:
        return np.repeat(nodes[:1], count, axis=0)
    want = (np.linspace(0.0, total, count, endpoint=False) if closed
            else np.linspace(0.0, total, count))
    out = np.empty((len(want), 3))
    for d in range(3):
        out[:, d] = np.interp(want, s, pts[:, d])
    return out


def _safe_k(tube: TubeSurface, polys: list, closed: bool,
            target_nodes: int) -> int:
    """Node count whose spacing stays well below the slab thickness.

    Consecutive nodes farther apart than ~2*eps can sit on opposite faces,
    letting a discrete flow pinch a path through the solid; keeping the
    spacing under 0.6*eps makes that geometrically impossible.
    """
    longest = max(path_length_on_tube(tube, p, closed=closed) for p in polys)
    k0 = int(np.clip(math.ceil(longest / (0.6 * tube.eps)), 16, 1200))
    return max(target_nodes, k0)


def _implicit_smooth(arr: np.ndarray, c: np.ndarray, closed: bool
                     ) -> np.ndarray:
    """One implicit heat step (I + c*Laplacian)^-1 per path, spectrally.

    arr: (B, K, 3); c: (B,) diffusion strengths in node units.  Open paths
    hold their endpoints fixed (Dirichlet); closed paths are circulant.
    The implicit solve damps every mode unconditionally, so long-wavelength
    bow decays in O(1) rounds regardless of the node count.
    """
    from scipy.fft import dst, idst, rfft, irfft

    B, K, _ = arr.shape
    if closed:
        lam = 2.0 - 2.0 * np.cos(TWO_PI * np.arange(K // 2 + 1) / K)
        spec = rfft(arr, axis=1)
        spec /= (1.0 + c[:, None, None] * lam[None, :, None])
        return irfft(spec, n=K, axis=1)
    # Dirichlet: solve for the K-2 interior nodes, endpoints feed the RHS
    inner = arr[:, 1:-1].copy()
    inner[:, 0] += c[:, None] * arr[:, 0]
    inner[:, -1] += c[:, None] * arr[:, -1]
    m = K - 2
    lam = 2.0 - 2.0 * np.cos(math.pi * np.arange(1, m + 1) / (m + 1))
    spec = dst(inner, type=1, axis=1)
    spec /= (1.0 + c[:, None, None] * lam[None, :, None])
    out = arr.copy()
    out[:, 1:-1] = idst(spec, type=1, axis=1)
    return out


def _relax_batch(tube: TubeSurface, polys: list, closed: bool,
                 target_nodes: int = 192, tau_scale: float = 1.5,
                 rounds: Optional[int] = None) -> np.ndarray:
    """Curve-shortening relaxation of a batch of paths, shape (B, K, 3).

    Alternates an implicit smoothing step of physical width ~tau_scale*eps
    (local enough not to mix opposite faces) with exact projection back to
    the surface; open paths keep their endpoints pinned.  The round count
    is chosen so the longest wavelength present decays by at least e^-6.
    """
    polys = [np.asarray(p, dtype=float) for p in polys]
    ends = [(p[0].copy(), p[-1].copy()) for p in polys]
    K = _safe_k(tube, polys, closed, target_nodes)
    lens = np.array([path_length_on_tube(tube, p, closed=closed)
                     for p in polys])
    lens = np.maximum(lens, 1e-9)
    arr = np.stack([_resample(p, K, closed) for p in polys])
    tau = (tau_scale * tube.eps) ** 2
    spacing = lens / K
    c = tau / spacing ** 2
    move_cap = 0.3 * tube.eps   # keep each step small vs the slab thickness
    if rounds is None:
        worst = float(np.max(lens))
        f = 1.0 / (1.0 + tau * (TWO_PI / worst) ** 2)
        rounds = int(np.clip(math.ceil(6.0 / -math.log(f)), 100, 420))
    B = arr.shape[0]
    for r in range(rounds):
        want = _implicit_smooth(arr, c, closed)
        move = want - arr
        norms = np.linalg.norm(move, axis=2, keepdims=True)
        scale = np.minimum(1.0, move_cap / np.maximum(norms, 1e-300))
        arr = arr + move * scale
        if not closed:
            for i, (a0, a1) in enumerate(ends):
                arr[i, 0], arr[i, -1] = a0, a1
        arr = tube.project(arr.reshape(B * K, 3)).reshape(B, K, 3)
        if not closed:
            for i, (a0, a1) in enumerate(ends):
                arr[i, 0], arr[i, -1] = a0, a1
        if closed and (r + 1) % 40 == 0:
            arr = np.stack([_resample(p, K, closed=True) for p in arr])
            arr = tube.project(arr.reshape(B * K, 3)).reshape(B, K, 3)
    return arr


def relax_path(tube: TubeSurface, nodes: np.ndarray, closed: bool,
               target_nodes: int = 192) -> np.ndarray:
    return _relax_batch(tube, [np.asarray(nodes, dtype=float)], closed,
                        target_nodes)[0]


def has_slab_pinch(tube: TubeSurface, nodes: np.ndarray,
                   closed: bool = False) -> bool:
    """Detect a polyline jumping between opposite faces with no node between.

    At the enforced node spacing every genuine face-to-face crossing places
    several nodes inside the cylinder or sector strip, so directly adjacent
    top/bottom face nodes can only come from a path pinched through the
    solid slab (a discrete artifact, not a surface path).
    """
    pts = np.vstack([nodes, nodes[:1]]) if closed else np.asarray(nodes)
    kinds, _ = tube.classify_arrays(pts)
    k = np.array([0 if x == FACE_TOP else 1 if x == FACE_BOTTOM else 2
                  for x in kinds])
    return bool(np.any(k[:-1] + k[1:] == 1))


def path_length_on_tube(tube: TubeSurface, nodes: np.ndarray,
                        closed: bool = False) -> float:
    """Region-exact length: chart geodesics within a region, chords across."""
    b = tube.base
    eps = tube.eps
    pts = np.vstack([nodes, nodes[:1]]) if closed else np.asarray(nodes)
    kinds, idxs = tube.classify_arrays(pts)
    kk = np.array([{FACE_TOP: 0, FACE_BOTTOM: 1, CYLINDER: 2, SECTOR: 3}[x]
                   for x in kinds])
    p, q_ = pts[:-1], pts[1:]
    chord = np.linalg.norm(q_ - p, axis=1)
    seg = chord.copy()
    same = (kk[:-1] == kk[1:]) & (idxs[:-1] == idxs[1:])

    cyl = np.flatnonzero(same & (kk[:-1] == 2))
    if len(cyl):
        j = idxs[cyl]
        A = b.vertices[j]
        tang = b.edge_tangents[j]
        nrm = b.edge_normals[j]
        u1 = np.einsum("ij,ij->i", p[cyl, :2] - A, tang)
        u2 = np.einsum("ij,ij->i", q_[cyl, :2] - A, tang)
        r1 = np.maximum(0.0, np.einsum("ij,ij->i", p[cyl, :2] - A, nrm))
        r2 = np.maximum(0.0, np.einsum("ij,ij->i", q_[cyl, :2] - A, nrm))
        phi1 = np.arctan2(r1, p[cyl, 2])
        phi2 = np.arctan2(r2, q_[cyl, 2])
        seg[cyl] = np.hypot(u2 - u1, eps * (phi2 - phi1))

    sec = np.flatnonzero(same & (kk[:-1] == 3))
    if len(sec):
        V = np.concatenate([b.vertices[idxs[sec]],
                            np.zeros((len(sec), 1))], axis=1)
        r1 = (p[sec] - V) / eps
        r2 = (q_[sec] - V) / eps
        ang = np.arctan2(np.linalg.norm(np.cross(r1, r2), axis=1),
                         np.einsum("ij,ij->i", r1, r2))
        seg[sec] = eps * ang
    return float(seg.sum())


# ---------------------------------------------------------------------------
# distance oracle


class _FieldCache:
    def __init__(self, cap: int = 24):
        self.cap = cap
        self.data: dict = {}
        self.order: list = []

    def get(self, key):
        return self.data.get(key)

    def put(self, key, value):
        if key in self.data:
            return
        if len(self.order) >= self.cap:
            old = self.order.pop(0)
            self.data.pop(old, None)
        self.data[key] = value
        self.order.append(key)


def _as_xyz(p) -> np.ndarray:
    if isinstance(p, TubePoint):
        return p.coords
    return np.asarray(p, dtype=float)


def mesh_distance_oracle(mesh: TubeMesh, calibration_pairs: int = 48,
                         rng_seed: int = 0, err_safety: float = 2.0,
                         target_nodes: int = 192) -> DistanceOracle:
    """Distance backend: mesh Dijkstra path, relaxed on the smooth surface.

    The declared error is calibrated on flat-face vertex pairs (exact answer:
    the straight chord) and scaled by `err_safety` to cover the curved
    regions the calibration cannot see.
    """
    if mesh.graph.shape[0] != mesh.n_vertices:
        raise GeometryError("mesh graph is inconsistent")
    n_comp = _connected_components(mesh)
    if n_comp != 1:
        raise GeometryError(f"mesh has {n_comp} components; expected 1")
    tube = mesh.tube
    cache = _FieldCache()

    def field_for(src: int):
        got = cache.get(src)
        if got is None:
            dist, pred = sparse_dijkstra(mesh.graph, indices=src,
                                         return_predecessors=True)
            got = (dist, pred)
            cache.put(src, got)
        return got

    def _initial_polyline(pz, qz):
        sp = int(mesh.kdtree.query(pz)[1])
        tq = int(mesh.kdtree.query(qz)[1])
        dist, pred = field_for(sp)
        chain = []
        v = tq
        while v != sp and v >= 0:
            chain.append(v)
            v = int(pred[v])
        chain.append(sp)
        poly = np.vstack([pz[None, :], mesh.vertices[chain[::-1]], qz[None, :]])
        graph_len = float(dist[tq]) + 2.0 * mesh.h
        # resolve region crossings against the curvature scale 1/eps
        k_target = int(min(1024, max(target_nodes,
                                     8.0 * graph_len / tube.eps)))
        return poly, k_target, graph_len

    def _finish(relaxed, graph_len):
        if has_slab_pinch(tube, relaxed):
            # discrete artifact; fall back to the honest graph upper bound
            return graph_len
        return path_length_on_tube(tube, relaxed, closed=False)

    def fn(p, q) -> float:
        pz, qz = _as_xyz(p), _as_xyz(q)
        if float(np.linalg.norm(pz - qz)) < 1e-12:
            return 0.0
        poly, k_target, graph_len = _initial_polyline(pz, qz)
        relaxed = relax_path(tube, poly, closed=False, target_nodes=k_target)
        return _finish(relaxed, graph_len)

    def batch(pairs):
        out = np.zeros(len(pairs))
        polys, idxs, k_targets, graph_lens = [], [], [], []
        for i, (p, q) in enumerate(pairs):
            pz, qz = _as_xyz(p), _as_xyz(q)
            if float(np.linalg.norm(pz - qz)) < 1e-12:
                continue
            poly, k_target, graph_len = _initial_polyline(pz, qz)
            polys.append(poly)
            idxs.append(i)
            k_targets.append(k_target)
            graph_lens.append(graph_len)
        if polys:
            arr = _relax_batch(tube, polys, closed=False,
                               target_nodes=max(k_targets))
            for j, i in enumerate(idxs):
                out[i] = _finish(arr[j], graph_lens[j])
        return out

    oracle = DistanceOracle(surface_id=tube.surface_id, err=0.0, fn=fn,
                            batch_fn=batch)

    # calibrate on same-face pairs where the chord is the exact distance
    rng = np.random.default_rng(rng_seed)
    b = tube.base
    worst = 0.0
    count = 0
    R = b.circumradius
    while count < calibration_pairs:
        a_ = rng.uniform(-R, R, 2)
        c_ = rng.uniform(-R, R, 2)
        if not (b.contains(a_, 0.05 * b.side) and b.contains(c_, 0.05 * b.side)):
            continue
        p = tube.face_xyz(a_, True)
        q_ = tube.face_xyz(c_, True)
        got = fn(p, q_)
        worst = max(worst, abs(got - float(np.linalg.norm(p - q_))))
        count += 1
    oracle.err = max(err_safety * worst, mesh.h / 50.0)
    oracle.calibration_worst = worst
    return oracle


def _connected_components(mesh: TubeMesh) -> int:
    from scipy.sparse.csgraph import connected_components
    return int(connected_components(mesh.graph, directed=False)[0])


# ---------------------------------------------------------------------------
# curve shortening probe


@dataclass
class ShorteningResult:
    initial_length: float
    final_length: float
    stages: int
    converged: bool
    contracted: bool
    nodes: np.ndarray

    def curve(self, tube: TubeSurface, n_breakpoints: int = 256
              ) -> ClosedCurve:
        """Constant-speed closed curve over the final loop polyline."""
        if self.contracted:
            raise GeometryError("contracted loop has no curve representation")
        pts = _resample(self.nodes, n_breakpoints, closed=True)
        pts = tube.project(pts)
        seg = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
        L = float(seg.sum())
        cum = np.concatenate([[0.0], np.cumsum(seg)])[:-1]
        ts = TWO_PI * cum / L
        tags = tube.classify(pts)
        handles = [TubePoint(k, i, tuple(p)) for (k, i), p in zip(tags, pts)]

        def interp(i, frac, _pts=pts, _tube=tube):
            raw = (1 - frac) * _pts[i] + frac * _pts[(i + 1) % len(_pts)]
            xyz = _tube.project(raw[None, :])[0]
            kind, idx = _tube.classify(xyz[None, :])[0]
            return TubePoint(kind, idx, tuple(xyz))

        def seglen(i, _seg=seg):
            return float(_seg[i])

        return ClosedCurve(surface_id=tube.surface_id, total_length=L,
                           ts=ts, points=handles, segment_interp=interp,
                           segment_length_fn=seglen, cs_tol=1e-6,
                           meta={"kind": "shortened-loop"})


def birkhoff_shorten(mesh: TubeMesh, initial_loop: np.ndarray,
                     max_stages: int = 60, tol: float = 1e-7,
                     contract_threshold: Optional[float] = None,
                     target_nodes: int = 192) -> ShorteningResult:
    """Iterative loop shortening on the tube: tension steps + resampling.

    Runs relaxation stages until the length stabilizes (relative decrease
    below tol), the loop contracts below the threshold, or the stage budget
    is exhausted (reported via converged=False, never silently).  The mesh
    supplies the length scales; moves use the exact surface projection.
    """
    results = shortening_survey(mesh, [np.asarray(initial_loop, dtype=float)],
                                max_stages=max_stages, tol=tol,
                                contract_threshold=contract_threshold,
                                target_nodes=target_nodes)
    return results[0]


def shortening_survey(mesh: TubeMesh, loops: list, max_stages: int = 60,
                      tol: float = 1e-7,
                      contract_threshold: Optional[float] = None,
                      target_nodes: int = 192) -> list:
    """Shorten a batch of loops together; one ShorteningResult per loop."""
    tube = mesh.tube
    if contract_threshold is None:
        contract_threshold = 0.2 * tube.base.side
    loops = [tube.project(np.asarray(lp, dtype=float)) for lp in loops]
    for lp in loops:
        if len(lp) < 8:
            raise GeometryError("initial loops need at least 8 nodes")
    init_lens = np.array([path_length_on_tube(tube, lp, closed=True)
                          for lp in loops])
    arr = _relax_batch(tube, loops, closed=True, target_nodes=target_nodes)
    B = len(loops)
    lens = np.array([path_length_on_tube(tube, arr[i], closed=True)
                     for i in range(B)])
    # a slab pinch means the flow left every geodesic basin; its continuum
    # counterpart is contraction
    pinched = np.array([has_slab_pinch(tube, arr[i], closed=True)
                        for i in range(B)])
    contracted = (lens < contract_threshold) | pinched
    converged = contracted.copy()
    stages = np.ones(B, dtype=int)
    active = ~converged
    for _ in range(max_stages - 1):
        if not np.any(active):
            break
        sub = _relax_batch(tube, list(arr[active]), closed=True,
                           target_nodes=arr.shape[1], rounds=120)
        sub = np.stack([_resample(p, target_nodes, closed=True) for p in sub])
        Bs, K, _ = sub.shape
        sub = tube.project(sub.reshape(Bs * K, 3)).reshape(Bs, K, 3)
        arr[active] = sub
        idx = np.flatnonzero(active)
        for j, i in enumerate(idx):
            cur = path_length_on_tube(tube, arr[i], closed=True)
            stages[i] += 1
            if cur < contract_threshold or has_slab_pinch(tube, arr[i],
                                                          closed=True):
                contracted[i] = True
                converged[i] = True
                active[i] = False
            elif abs(lens[i] - cur) < tol * max(lens[i], 1e-12):
                converged[i] = True
                active[i] = False
            lens[i] = cur
    return [ShorteningResult(initial_length=float(init_lens[i]),
                             final_length=float(lens[i]),
                             stages=int(stages[i]),
                             converged=bool(converged[i]),
                             contracted=bool(contracted[i]),
                             nodes=arr[i]) for i in range(B)]


def random_plane_loop(tube: TubeSurface, rng: np.random.Generator,
                      n_rays: int = 96) -> np.ndarray:
    """Closed loop: intersection of the tube with a random plane.

    The plane passes through a random interior point of the medial polygon;
    since the solid is convex the slice is a convex closed curve, found by
    bisection along rays in the plane.
    """
    b = tube.base
    while True:
        c2 = rng.uniform(-b.circumradius, b.circumradius, 2)
        if b.contains(c2, 0.1 * b.side):
            break
    c = np.array([c2[0], c2[1], 0.0])
    nu = rng.normal(size=3)
    nu /= np.linalg.norm(nu)
    b1 = np.cross(nu, [1.0, 0.0, 0.0])
    if np.linalg.norm(b1) < 1e-6:
        b1 = np.cross(nu, [0.0, 1.0, 0.0])
    b1 /= np.linalg.norm(b1)
    b2 = np.cross(nu, b1)

    thetas = TWO_PI * np.arange(n_rays) / n_rays
    dirs = np.outer(np.cos(thetas), b1) + np.outer(np.sin(thetas), b2)

    def signed(pts):
        foot = tube._foot_on_polygon(pts[:, :2])
        foot3 = np.concatenate([foot, np.zeros((len(pts), 1))], axis=1)
        return np.linalg.norm(pts - foot3, axis=1) - tube.eps

    lo = np.zeros(n_rays)
    hi = np.full(n_rays, b.circumradius + 2 * tube.eps + np.linalg.norm(c))
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        s = signed(c[None, :] + mid[:, None] * dirs)
        inside = s < 0
        lo[inside] = mid[inside]
        hi[~inside] = mid[~inside]
    t = 0.5 * (lo + hi)
    return c[None, :] + t[:, None] * dirs


# ---------------------------------------------------------------------------
# Gromov-Hausdorff distortion measurement


@dataclass
class DistortionReport:
    eps: float
    h: float
    sample_pairs: int
    max_raw: float
    err_allowance: float
    value: float
    note: str = ("sector samples are excluded: they project onto cone "
                 "points, which the exact base backend cannot host; nearby "
                 "cylinder and face samples cover them within eps")

    def to_dict(self) -> dict:
        return {"eps": self.eps, "h": self.h, "samples": self.sample_pairs,
                "max_raw_difference": self.max_raw,
                "err_allowance": self.err_allowance,
                "max_distortion": self.value, "note": self.note}


def gh_distortion(tube: TubeSurface, mesh: TubeMesh, sample_count: int = 150,
                  rng_seed: int = 0,
                  oracle: Optional[DistanceOracle] = None) -> DistortionReport:
    """Compare tube distances with base distances of corresponding points.

    Samples mesh vertices away from the sectors (sources reused across a
    block of targets), projects them to the doubled polygon and returns
    max |d_tube - d_base| minus the tube oracle's error allowance, floored
    at zero.  Deterministic for a fixed seed.
    """
    if oracle is None:
        oracle = mesh_distance_oracle(mesh)
    base_oracle = exact_oracle(tube.base)
    rng = np.random.default_rng(rng_seed)

    eligible = []
    margin = 0.02 * tube.base.side
    for i, (kind, idx) in enumerate(mesh.vertex_region):
        if kind in (FACE_TOP, FACE_BOTTOM):
            depth = float(np.max(mesh.vertices[i, :2]
                                 @ tube.base.edge_normals.T) - tube.base.apothem)
            if depth < -margin:
                eligible.append(i)
        elif kind == CYLINDER:
            A, _ = tube.base.edge_endpoints(idx)
            u = float((mesh.vertices[i, :2] - A)
                      @ tube.base.edge_tangents[idx] / tube.base.side)
            if 0.05 < u < 0.95:
                eligible.append(i)
    eligible = np.array(eligible)

    targets_per_source = 10
    n_sources = max(1, int(math.ceil(sample_count / targets_per_source)))
    worst = 0.0
    pairs = 0
    for _ in range(n_sources):
        s, *ts = rng.choice(eligible, size=targets_per_source + 1,
                            replace=False)
        ps = mesh.vertices[int(s)]
        bs = correspond_to_base(tube, ps[None, :])[0]
        for t in ts:
            if pairs >= sample_count:
                break
            pt = mesh.vertices[int(t)]
            bt = correspond_to_base(tube, pt[None, :])[0]
            d_y = oracle.distance(ps, pt)
            d_x, _ = (0.0, None) if bs is None or bt is None else \
                (base_oracle.distance(bs, bt), None)
            worst = max(worst, abs(d_y - d_x))
            pairs += 1
    return DistortionReport(eps=tube.eps, h=mesh.h, sample_pairs=pairs,
                            max_raw=float(worst),
                            err_allowance=float(oracle.err),
                            value=float(max(0.0, worst - oracle.err)))
