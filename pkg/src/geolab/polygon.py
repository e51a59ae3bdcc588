"""Doubled regular n-gon backend: exact distances, meridians, clearance test.

The model space is two copies (faces) of a regular n-gon glued along the
boundary.  Both faces share one planar chart (the reference polygon with
centroid at the origin and the midpoint of edge 0 on the positive x axis);
edge points belong to both faces, vertices are cone points and are not
representable as query points.

Exact distances use two facts, both consequences of the fold map that
identifies the two faces (an onto, length-preserving map to the single
polygon chart):

* if p and q admit a common chart placement (same face, or either point on
  an edge) then d(p, q) is the straight chart chord;
* for interior points on opposite faces, any connecting path crosses some
  edge first, at a point x, and its length is at least |p-x| + |x-q| by the
  chart triangle inequality; conversely every edge point x gives an actual
  two-segment path of exactly that length.  Hence

      d(p, q) = min over edges e of  min_{x in e} (|p-x| + |x-q|),

  and the inner minimum has the reflection closed form.  The minimizing
  configuration bends nowhere (equal angles), so it is the true geodesic,
  and its crossing never sits at a vertex (cone angles are below 2*pi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .verify import TWO_PI, ClosedCurve, DistanceOracle

TOP = "top"
BOTTOM = "bottom"

_INSIDE_MARGIN = 1e-12


class GeometryError(ValueError):
    """Invalid geometric construction or query."""


@dataclass(frozen=True)
class DoubledNgon:
    """Doubled regular n-gon with side length `side`."""

    n: int
    side: float

    def __post_init__(self):
        if self.n < 3:
            raise GeometryError(f"need n >= 3, got {self.n}")
        if not (self.side > 0):
            raise GeometryError("side must be positive")

    @cached_property
    def apothem(self) -> float:
        return self.side / (2.0 * math.tan(math.pi / self.n))

    @cached_property
    def circumradius(self) -> float:
        return self.side / (2.0 * math.sin(math.pi / self.n))

    @property
    def width(self) -> float:
        """Distance across parallel edge pairs (even n only)."""
        if self.n % 2:
            raise GeometryError("width across flats requires even n")
        return 2.0 * self.apothem

    @property
    def perimeter(self) -> float:
        return self.n * self.side

    @cached_property
    def face_area(self) -> float:
        return 0.5 * self.perimeter * self.apothem

    @property
    def interior_angle(self) -> float:
        return (self.n - 2) * math.pi / self.n

    @property
    def cone_angle(self) -> float:
        """Total angle at a doubled vertex; always below 2*pi."""
        return 2.0 * self.interior_angle

    @cached_property
    def vertices(self) -> np.ndarray:
        """Vertex coordinates, (n, 2); edge j runs vertices[j] -> vertices[j+1]."""
        j = np.arange(self.n)
        ang = (2.0 * j - 1.0) * math.pi / self.n
        return self.circumradius * np.stack([np.cos(ang), np.sin(ang)], axis=1)

    @cached_property
    def edge_normals(self) -> np.ndarray:
        """Outward unit normal of edge j, (n, 2); edge line is n.x = apothem."""
        j = np.arange(self.n)
        ang = 2.0 * j * math.pi / self.n
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)

    @cached_property
    def edge_tangents(self) -> np.ndarray:
        t = self.vertices[(np.arange(self.n) + 1) % self.n] - self.vertices
        return t / self.side

    def edge_endpoints(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices[j % self.n], self.vertices[(j + 1) % self.n]

    def edge_chart(self, j: int, u: float) -> np.ndarray:
        A, B = self.edge_endpoints(j)
        return A + u * (B - A)

    @property
    def surface_id(self) -> str:
        return f"doubled-ngon:{self.n}:{self.side:.12g}"

    def contains(self, xy, margin: float = 0.0) -> bool:
        xy = np.asarray(xy, dtype=float)
        return bool(np.all(self.edge_normals @ xy <= self.apothem - margin))

    def reflection(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        """Affine reflection (M, b) across the line of edge j."""
        nrm = self.edge_normals[j % self.n]
        M = np.eye(2) - 2.0 * np.outer(nrm, nrm)
        b = 2.0 * self.apothem * nrm
        return M, b


def build_ngon(n: int, side: float) -> DoubledNgon:
    return DoubledNgon(n=int(n), side=float(side))


@dataclass(frozen=True)
class PolygonPoint:
    """Point of the doubled polygon: interior of a face, or an edge point.

    Edge points are shared by both faces and carry (edge index, parameter
    u strictly inside (0, 1)); vertices are not representable.
    """

    kind: str                      # "interior" | "edge"
    xy: tuple[float, float]
    face: Optional[str] = None     # TOP/BOTTOM for interior points
    edge: Optional[int] = None
    u: Optional[float] = None

    @property
    def chart(self) -> np.ndarray:
        return np.array(self.xy, dtype=float)

    def on_face(self, face: str) -> bool:
        return self.kind == "edge" or self.face == face

    def describe(self) -> dict:
        if self.kind == "edge":
            return {"edge": self.edge, "u": self.u}
        return {"face": self.face, "coords": [self.xy[0], self.xy[1]]}


def interior_point(ngon: DoubledNgon, face: str, x: float, y: float) -> PolygonPoint:
    if face not in (TOP, BOTTOM):
        raise GeometryError(f"face must be {TOP!r} or {BOTTOM!r}")
    xy = np.array([x, y], dtype=float)
    if not ngon.contains(xy, margin=_INSIDE_MARGIN * max(1.0, ngon.side)):
        raise GeometryError(f"point {xy} is not strictly inside the face")
    return PolygonPoint(kind="interior", xy=(float(x), float(y)), face=face)


def edge_point(ngon: DoubledNgon, edge: int, u: float) -> PolygonPoint:
    edge = int(edge) % ngon.n
    if not (0.0 < u < 1.0):
        raise GeometryError("edge parameter must lie strictly in (0, 1); "
                            "vertices are not representable")
    xy = ngon.edge_chart(edge, float(u))
    return PolygonPoint(kind="edge", xy=(float(xy[0]), float(xy[1])),
                        edge=edge, u=float(u))


@dataclass
class GeodesicPath:
    """Shortest path between two points, as chart data.

    crossings holds one (edge, u, chart point) per edge crossing; for
    common-chart pairs the path is a single face chord and crossings is
    empty.  vertex_margin reports how far every crossing parameter stays
    from the vertices {0, 1}.
    """

    p: PolygonPoint
    q: PolygonPoint
    length: float
    edges: tuple[int, ...]
    crossings: list = field(default_factory=list)
    face_hint: Optional[str] = None

    @property
    def vertex_margin(self) -> float:
        if not self.crossings:
            return math.inf
        return min(min(u, 1.0 - u) for _, u, _ in self.crossings)

    def to_dict(self) -> dict:
        return {"length": self.length,
                "edges": list(self.edges),
                "crossings": [{"edge": e, "u": u,
                               "coords": [float(x[0]), float(x[1])]}
                              for e, u, x in self.crossings],
                "p": self.p.describe(), "q": self.q.describe()}


def _single_crossing_values(ngon: DoubledNgon, P: np.ndarray, Q: np.ndarray):
    """Vectorized best bent path through each edge.

    P, Q: (N, 2) chart coordinates of opposite-face interior pairs.
    Returns (values (N, n_edges), u params (N, n_edges)).
    """
    a = ngon.apothem
    N = P.shape[0]
    nrm = ngon.edge_normals            # (n, 2)
    A = ngon.vertices                  # (n, 2)
    tang = ngon.edge_tangents          # (n, 2)

    # reflect Q across each edge line: R = Q - 2 (n.Q - a) n
    nQ = Q @ nrm.T                     # (N, n)
    R = Q[:, None, :] - 2.0 * (nQ - a)[:, :, None] * nrm[None, :, :]
    nP = P @ nrm.T
    # crossing of segment [P, R] with the edge line, s in (0, 1)
    nR = np.einsum("ink,nk->in", R, nrm)
    s = (a - nP) / np.where(np.abs(nR - nP) < 1e-300, 1.0, nR - nP)
    X = P[:, None, :] + s[:, :, None] * (R - P[:, None, :])
    u = np.einsum("ink,nk->in", X - A[None, :, :], tang) / ngon.side
    u = np.clip(u, 0.0, 1.0)
    Xc = A[None, :, :] + u[:, :, None] * (tang * ngon.side)[None, :, :]
    vals = (np.linalg.norm(Xc - P[:, None, :], axis=2)
            + np.linalg.norm(Xc - Q[:, None, :], axis=2))
    return vals, u


def exact_distance(p: PolygonPoint, q: PolygonPoint, ngon: DoubledNgon
                   ) -> tuple[float, GeodesicPath]:
    """Globally minimal distance and the realizing path (exact backend)."""
    pc, qc = p.chart, q.chart
    same_chart = (p.kind == "edge" or q.kind == "edge" or p.face == q.face)
    if same_chart:
        d = float(np.linalg.norm(pc - qc))
        face = p.face if p.kind == "interior" else (
            q.face if q.kind == "interior" else TOP)
        return d, GeodesicPath(p=p, q=q, length=d, edges=(), face_hint=face)

    vals, us = _single_crossing_values(ngon, pc[None, :], qc[None, :])
    e = int(np.argmin(vals[0]))
    d = float(vals[0, e])
    u = float(us[0, e])
    xc = ngon.edge_chart(e, u)
    path = GeodesicPath(p=p, q=q, length=d, edges=(e,),
                        crossings=[(e, u, xc)], face_hint=p.face)
    return d, path


def exact_oracle(ngon: DoubledNgon) -> DistanceOracle:
    """Exact distance oracle (err = 0) over PolygonPoint handles."""

    def fn(p, q):
        return exact_distance(p, q, ngon)[0]

    def batch(pairs):
        out = np.empty(len(pairs))
        # split same-chart pairs from opposite-face interior pairs
        same_idx, opp_idx = [], []
        for i, (p, q) in enumerate(pairs):
            if p.kind == "edge" or q.kind == "edge" or p.face == q.face:
                same_idx.append(i)
            else:
                opp_idx.append(i)
        if same_idx:
            Pc = np.array([pairs[i][0].xy for i in same_idx])
            Qc = np.array([pairs[i][1].xy for i in same_idx])
            out[same_idx] = np.linalg.norm(Pc - Qc, axis=1)
        if opp_idx:
            Pc = np.array([pairs[i][0].xy for i in opp_idx])
            Qc = np.array([pairs[i][1].xy for i in opp_idx])
            vals, _ = _single_crossing_values(ngon, Pc, Qc)
            out[opp_idx] = vals.min(axis=1)
        return out

    return DistanceOracle(surface_id=ngon.surface_id, err=0.0,
                          fn=fn, batch_fn=batch)


# ---------------------------------------------------------------------------
# curves


def polygon_curve(ngon: DoubledNgon, breakpoints: Sequence[tuple[float, PolygonPoint]],
                  segment_faces: Sequence[str], total_length: Optional[float] = None,
                  meta: Optional[dict] = None) -> ClosedCurve:
    """Closed curve from chart-straight segments, one face tag per segment."""
    ts = [t for t, _ in breakpoints]
    pts = [pt for _, pt in breakpoints]
    m = len(pts)
    if len(segment_faces) != m:
        raise GeometryError("need one face tag per segment")
    charts = np.array([pt.chart for pt in pts])
    seglens = np.linalg.norm(np.roll(charts, -1, axis=0) - charts, axis=1)
    for i in range(m):
        for pt in (pts[i], pts[(i + 1) % m]):
            if pt.kind == "interior" and pt.face != segment_faces[i]:
                raise GeometryError(
                    f"segment {i} tagged {segment_faces[i]} but touches an "
                    f"interior point on {pt.face}")
    length = float(seglens.sum()) if total_length is None else float(total_length)

    def interp(i, frac):
        xy = charts[i] + frac * (charts[(i + 1) % m] - charts[i])
        return PolygonPoint(kind="interior", xy=(float(xy[0]), float(xy[1])),
                            face=segment_faces[i])

    def seglen(i):
        return float(seglens[i])

    full_meta = {"surface": {"n": ngon.n, "side": ngon.side},
                 "breakpoints": [dict(t=float(t), **pt.describe())
                                 for t, pt in breakpoints]}
    if meta:
        full_meta.update(meta)
    return ClosedCurve(surface_id=ngon.surface_id, total_length=length,
                       ts=ts, points=pts, segment_interp=interp,
                       segment_length_fn=seglen, meta=full_meta)


def meridians(ngon: DoubledNgon) -> list:
    """The distinguished closed curves through both face centers.

    For even n there are n/2 of them, one per parallel edge pair, crossing
    the pair perpendicularly at the midpoints; for odd n the list is empty
    (no parallel edges exist).  Returns ClosedGeodesic records.
    """
    from .billiards import ClosedGeodesic  # local import to avoid a cycle

    if ngon.n % 2:
        return []
    out = []
    h = ngon.n // 2
    for j in range(h):
        bps = [(0.0, edge_point(ngon, j, 0.5)),
               (0.5 * math.pi, interior_point(ngon, TOP, 0.0, 0.0)),
               (math.pi, edge_point(ngon, j + h, 0.5)),
               (1.5 * math.pi, interior_point(ngon, BOTTOM, 0.0, 0.0))]
        curve = polygon_curve(ngon, bps, [TOP, TOP, BOTTOM, BOTTOM],
                              total_length=2.0 * ngon.width,
                              meta={"kind": "meridian", "pair_index": j})
        out.append(ClosedGeodesic(curve=curve, word=(j, j + h),
                                  length=2.0 * ngon.width, period=2,
                                  band=(0.0, 1.0), anchor_edge=j, member_u=0.5,
                                  tag="MERIDIAN", is_representative=(j == 0)))
    return out


# ---------------------------------------------------------------------------
# inscribed-ellipse clearance criterion


@dataclass
class ClearanceResult:
    ok: bool
    threshold: float
    witness_edge: int
    witness_u: float
    witness_xy: tuple[float, float]
    witness_value: float
    per_edge: list

    def __bool__(self):
        return self.ok

    def to_dict(self) -> dict:
        return {"ok": self.ok, "threshold": self.threshold,
                "witness": {"edge": self.witness_edge, "u": self.witness_u,
                            "coords": list(self.witness_xy),
                            "value": self.witness_value},
                "per_edge": self.per_edge}


def _golden_min(f, lo: float, hi: float, tol: float = 1e-12) -> tuple[float, float]:
    """Golden-section minimum of a scalar unimodal function on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    u = 0.5 * (a + b)
    return u, f(u)


def ellipse_clearance_check(p: PolygonPoint, q: PolygonPoint, ngon: DoubledNgon,
                            L_half: float, pass_tol: float = 1e-9) -> ClearanceResult:
    """Inscribed-ellipse criterion on the single-sided polygon.

    Projects p and q to the chart and checks that every edge keeps a total
    focal distance of at least L_half: the ellipse with foci p, q and major
    axis L_half then fits inside the polygon, touching it only along the
    major axis.  The per-edge minimum is a 1-D convex problem solved by
    golden section over the full edge bracket; p = q degenerates to the
    inscribed-circle case and needs no special handling.
    """
    pc, qc = p.chart, q.chart
    chord = float(np.linalg.norm(pc - qc))
    if L_half <= chord - pass_tol:
        raise GeometryError(f"L_half={L_half} is below the focal chord {chord}")
    per_edge = []
    worst = None
    for e in range(ngon.n):
        A, B = ngon.edge_endpoints(e)

        def f(u, A=A, B=B):
            x = A + u * (B - A)
            return float(np.linalg.norm(x - pc) + np.linalg.norm(x - qc))

        u, val = _golden_min(f, 0.0, 1.0)
        per_edge.append({"edge": e, "u": u, "value": val})
        if worst is None or val < worst[2]:
            worst = (e, u, val)
    e, u, val = worst
    xy = ngon.edge_chart(e, u)
    return ClearanceResult(ok=bool(val >= L_half - pass_tol), threshold=L_half,
                           witness_edge=e, witness_u=u,
                           witness_xy=(float(xy[0]), float(xy[1])),
                           witness_value=val, per_edge=per_edge)


# ---------------------------------------------------------------------------
# independent mesh oracle (Dijkstra over glued boundary Steiner chords)


def mesh_oracle(ngon: DoubledNgon, h: float, node_cap: int = 20000) -> DistanceOracle:
    """Brute-force oracle: shortest paths through edge Steiner points.

    Steiner nodes are spaced h along every glued edge; within either flat
    face any two points are joined by the straight chord, so the path graph
    has one chord per node pair and Dijkstra closure gives boundary-to-
    boundary distances.  A query attaches p and q to every node by in-face
    chords.  The only error is snapping edge crossings to the Steiner grid,
    at most h per crossing of the true minimizer, hence declared err = h
    (shortest paths here cross one edge; see exact_distance).
    """
    from scipy.sparse.csgraph import shortest_path

    if not (0.0 < h < ngon.side / 4.0):
        raise GeometryError(f"need 0 < h < side/4, got h={h}")
    m = int(math.ceil(ngon.side / h))
    N = ngon.n * m
    if N > node_cap:
        raise GeometryError(f"mesh oracle would need {N} nodes (cap {node_cap})")
    nodes = np.concatenate([
        np.stack([ngon.edge_chart(e, (k + 0.5) / m) for k in range(m)])
        for e in range(ngon.n)])
    chords = np.linalg.norm(nodes[:, None, :] - nodes[None, :, :], axis=2)
    D = shortest_path(chords, method="D", directed=False)

    def _attach(pt: PolygonPoint) -> np.ndarray:
        return np.linalg.norm(nodes - pt.chart[None, :], axis=1)

    def fn(p, q):
        best = float(np.min(_attach(p)[:, None] + D + _attach(q)[None, :]))
        if p.kind == "edge" or q.kind == "edge" or p.face == q.face:
            best = min(best, float(np.linalg.norm(p.chart - q.chart)))
        return best

    def batch(pairs):
        return np.array([fn(p, q) for p, q in pairs])

    oracle = DistanceOracle(surface_id=ngon.surface_id, err=float(h),
                            fn=fn, batch_fn=batch)
    oracle.nodes = nodes  # exposed for inspection/tests
    return oracle


# ---------------------------------------------------------------------------
# diameter estimate


@dataclass
class DiameterEstimate:
    value: float
    error_bound: float
    grid: int
    sample_count: int

    @property
    def upper(self) -> float:
        return self.value + self.error_bound


def _face_samples(ngon: DoubledNgon, grid: int) -> tuple[np.ndarray, np.ndarray]:
    """(interior chart samples, edge chart samples) for one face."""
    R = ngon.circumradius
    xs = np.linspace(-R, R, grid)
    gx, gy = np.meshgrid(xs, xs)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    inside = np.all(pts @ ngon.edge_normals.T <= ngon.apothem - 1e-9, axis=1)
    interior = pts[inside]
    # k/grid spacing keeps sample sets nested when the grid is refined by an
    # integer factor, which makes the estimate monotone under refinement
    us = np.arange(1, grid) / grid
    edges = np.concatenate([
        np.stack([ngon.edge_chart(e, u) for u in us]) for e in range(ngon.n)])
    return interior, edges


def approximate_diameter(ngon: DoubledNgon, grid: int = 32) -> DiameterEstimate:
    """Sampled diameter with a Lipschitz covering error bound.

    Takes the max of exact distances over a grid of interior points on both
    faces plus edge samples.  d is 1-Lipschitz in each argument, so the true
    diameter exceeds the sampled max by at most twice the covering radius of
    the sample set, which is measured against a 4x finer probe grid.
    """
    if grid < 8:
        raise GeometryError("grid must be >= 8")
    interior, edges = _face_samples(ngon, grid)
    charts = np.concatenate([interior, edges])

    # same-chart pairs realize their chart distance
    best = 0.0
    for i in range(0, len(charts), 512):
        blk = charts[i:i + 512]
        best = max(best, float(np.max(
            np.linalg.norm(blk[:, None, :] - charts[None, :, :], axis=2))))

    # interior pairs on opposite faces, exact closed form
    if len(interior):
        for i in range(0, len(interior), 128):
            blk = interior[i:i + 128]
            P = np.repeat(blk, len(interior), axis=0)
            Q = np.tile(interior, (len(blk), 1))
            vals, _ = _single_crossing_values(ngon, P, Q)
            best = max(best, float(vals.min(axis=1).max()))

    # covering radius against a finer probe set
    probe_grid = 4 * grid
    p_int, p_edge = _face_samples(ngon, probe_grid)
    probes = np.concatenate([p_int, p_edge])
    tree = cKDTree(charts)
    cover = float(tree.query(probes)[0].max())
    probe_cell = 2.0 * ngon.circumradius / (probe_grid - 1)
    cover += probe_cell * math.sqrt(2.0) / 2.0
    return DiameterEstimate(value=best, error_bound=2.0 * cover, grid=grid,
                            sample_count=2 * len(interior) + len(edges))


# ---------------------------------------------------------------------------
# the off-center halfway pair


def off_center_pair(ngon: DoubledNgon, pair_index: int, delta: float
                    ) -> tuple[PolygonPoint, PolygonPoint]:
    """Halfway points of the off-center parallel curve, on opposite faces.

    The straight closed curve crossing the parallel edge pair `pair_index`
    at offset delta from the midpoints passes halfway between the pair at
    the same chart point on both faces; that point sits delta away from the
    center along the edge direction.  These pairs break minimality: a path
    over a nearby third edge is shorter than half the curve length.
    """
    if ngon.n % 2:
        raise GeometryError("parallel edge pairs require even n")
    if not (abs(delta) < ngon.side / 2.0):
        raise GeometryError("offset must keep the curve on the edge pair")
    t = ngon.edge_tangents[pair_index % ngon.n]
    c = delta * t
    return (interior_point(ngon, TOP, c[0], c[1]),
            interior_point(ngon, BOTTOM, c[0], c[1]))
