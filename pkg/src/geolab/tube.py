"""Boundary surface of the epsilon-neighborhood of a doubled polygon.

For eps below half the apothem the boundary decomposes into two flat faces
(each isometric to the polygon face, at height +-eps), one half-cylinder of
radius eps along every edge, and one sphere sector of radius eps and
azimuthal width 2*pi/n around every vertex; the n sectors assemble to a
round sphere.  The enclosed solid is convex, so closed-form nearest-point
projection onto the surface is available everywhere and drives both the
curve-shortening flow and the mesh validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from .polygon import (BOTTOM, TOP, DiameterEstimate, DoubledNgon,
                      GeometryError, PolygonPoint, approximate_diameter)
from .verify import TWO_PI, ClosedCurve

FACE_TOP = "face-top"
FACE_BOTTOM = "face-bottom"
CYLINDER = "cylinder"
SECTOR = "sector"


@dataclass(frozen=True)
class TubeSurface:
    """Piecewise-smooth offset surface at distance eps from the doubled n-gon."""

    base: DoubledNgon
    eps: float

    def __post_init__(self):
        if not (0.0 < self.eps < self.base.apothem / 2.0):
            raise GeometryError(
                f"eps must satisfy 0 < eps < apothem/2 = "
                f"{self.base.apothem / 2.0:.6g}, got {self.eps}")

    @property
    def surface_id(self) -> str:
        return (f"tube:{self.base.n}:{self.base.side:.12g}:{self.eps:.12g}")

    @cached_property
    def area(self) -> float:
        """Closed form: two faces + n half-cylinders + one assembled sphere."""
        b = self.base
        return (2.0 * b.face_area + math.pi * self.eps * b.perimeter
                + 4.0 * math.pi * self.eps ** 2)

    def sector_angles_total(self) -> float:
        return self.base.n * (TWO_PI / self.base.n)

    # -- charts -----------------------------------------------------------
    def face_xyz(self, xy, top: bool) -> np.ndarray:
        xy = np.asarray(xy, dtype=float)
        z = self.eps if top else -self.eps
        return np.array([xy[0], xy[1], z])

    def cylinder_xyz(self, j: int, u: float, phi: float) -> np.ndarray:
        """Edge-j half-cylinder; phi runs 0 (top seam) to pi (bottom seam)."""
        b = self.base
        A, _ = b.edge_endpoints(j)
        foot = A + u * b.edge_tangents[j] * b.side
        nrm = b.edge_normals[j]
        off = self.eps * math.sin(phi)
        return np.array([foot[0] + off * nrm[0], foot[1] + off * nrm[1],
                         self.eps * math.cos(phi)])

    def sector_xyz(self, k: int, psi: float, phi: float) -> np.ndarray:
        """Vertex-k sphere sector; psi is the azimuth in the base plane."""
        V = self.base.vertices[k]
        s, c = math.sin(phi), math.cos(phi)
        return np.array([V[0] + self.eps * s * math.cos(psi),
                         V[1] + self.eps * s * math.sin(psi),
                         self.eps * c])

    def sector_azimuths(self, k: int) -> tuple[float, float]:
        """Azimuth range of vertex k's sector, width exactly 2*pi/n."""
        n = self.base.n
        # the sector at vertex k spans between the normals of edges k-1 and k
        a0 = TWO_PI * ((k - 1) % n) / n
        return a0, a0 + TWO_PI / n

    # -- projection and region classification ------------------------------
    def project(self, pts: np.ndarray, hint: Optional[np.ndarray] = None
                ) -> np.ndarray:
        """Nearest-point projection of ambient points onto the surface.

        The solid neighborhood is convex; the projection is foot-point on
        the flat polygon slab plus radial offset.  Points exactly on the
        medial polygon use `hint` normals (or +z) to pick a side.
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        foot = self._foot_on_polygon(pts[:, :2])
        foot3 = np.concatenate([foot, np.zeros((len(pts), 1))], axis=1)
        d = pts - foot3
        r = np.linalg.norm(d, axis=1)
        deg = r < 1e-12
        if np.any(deg):
            if hint is None:
                d[deg] = np.array([0.0, 0.0, 1.0])
            else:
                d[deg] = hint[deg]
            r = np.linalg.norm(d, axis=1)
        return foot3 + self.eps * d / r[:, None]

    def _foot_on_polygon(self, xy: np.ndarray) -> np.ndarray:
        """Nearest point of the solid polygon to each planar point."""
        b = self.base
        out = xy.copy()
        depth = xy @ b.edge_normals.T - b.apothem   # > 0 means outside edge j
        outside = depth.max(axis=1) > 0
        if not np.any(outside):
            return out
        sub = xy[outside]
        best_d = np.full(len(sub), np.inf)
        best_p = np.zeros_like(sub)
        for j in range(b.n):
            A, B = b.edge_endpoints(j)
            t = np.clip((sub - A) @ (B - A) / (b.side ** 2), 0.0, 1.0)
            proj = A + t[:, None] * (B - A)
            dd = np.linalg.norm(sub - proj, axis=1)
            better = dd < best_d
            best_d[better] = dd[better]
            best_p[better] = proj[better]
        out[outside] = best_p
        return out

    def classify(self, pts: np.ndarray) -> list[tuple]:
        """Region tag per surface point: (kind, index) with chart coords."""
        kinds, idxs = self.classify_arrays(pts)
        return list(zip(kinds, idxs))

    def classify_arrays(self, pts: np.ndarray) -> tuple[list, np.ndarray]:
        """Vectorized region classification: (kind list, index array)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        b = self.base
        N = len(pts)
        depth = pts[:, :2] @ b.edge_normals.T - b.apothem     # (N, n)
        on_face = depth.max(axis=1) <= 1e-9
        kinds = [FACE_TOP] * N
        idxs = np.full(N, -1, dtype=int)
        for i in np.flatnonzero(on_face & (pts[:, 2] <= 0)):
            kinds[i] = FACE_BOTTOM
        off = np.flatnonzero(~on_face)
        if len(off):
            foot = self._foot_on_polygon(pts[off, :2])
            vd = np.linalg.norm(foot[:, None, :] - b.vertices[None, :, :],
                                axis=2)
            kmin = np.argmin(vd, axis=1)
            at_vertex = vd[np.arange(len(off)), kmin] <= 1e-9
            edge_idx = np.argmax(foot @ b.edge_normals.T - b.apothem, axis=1)
            for j, i in enumerate(off):
                if at_vertex[j]:
                    kinds[i] = SECTOR
                    idxs[i] = int(kmin[j])
                else:
                    kinds[i] = CYLINDER
                    idxs[i] = int(edge_idx[j])
        return kinds, idxs

    def contains_point(self, p: np.ndarray, tol: float = 1e-8) -> bool:
        q = self.project(np.asarray(p, dtype=float)[None, :])[0]
        return bool(np.linalg.norm(q - p) <= tol)


def build_tube(ngon: DoubledNgon, eps: float) -> TubeSurface:
    return TubeSurface(base=ngon, eps=float(eps))


# ---------------------------------------------------------------------------
# correspondence with the base polygon


def correspond_to_base(tube: TubeSurface, pts: np.ndarray) -> list:
    """Nearest-point map onto the doubled polygon, as PolygonPoint handles.

    Faces project along z, cylinders collapse onto their edge, sectors onto
    their vertex.  Vertices are cone points of the base and are not valid
    exact-backend endpoints, so sector points are returned as None; every
    non-None image is within eps ambient distance of its source.
    """
    b = tube.base
    out = []
    for p, (kind, idx) in zip(np.atleast_2d(pts), tube.classify(pts)):
        if kind in (FACE_TOP, FACE_BOTTOM):
            face = TOP if kind == FACE_TOP else BOTTOM
            xy = tube._foot_on_polygon(p[None, :2])[0]
            out.append(PolygonPoint(kind="interior", xy=(xy[0], xy[1]),
                                    face=face))
        elif kind == CYLINDER:
            A, _ = b.edge_endpoints(idx)
            u = float((p[:2] - A) @ b.edge_tangents[idx] / b.side)
            u = min(max(u, 1e-9), 1.0 - 1e-9)
            xy = A + u * b.edge_tangents[idx] * b.side
            out.append(PolygonPoint(kind="edge", xy=(xy[0], xy[1]),
                                    edge=idx, u=u))
        else:
            out.append(None)
    return out


def projection_displacement(tube: TubeSurface, pts: np.ndarray) -> np.ndarray:
    """Ambient displacement of the correspondence map; always <= eps."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    foot = tube._foot_on_polygon(pts[:, :2])
    foot3 = np.concatenate([foot, np.zeros((len(pts), 1))], axis=1)
    return np.linalg.norm(pts - foot3, axis=1)


# ---------------------------------------------------------------------------
# distinguished curves


@dataclass(frozen=True)
class TubePoint:
    """Surface point handle: region tag plus ambient coordinates."""

    region: str
    index: int
    xyz: tuple[float, float, float]

    @property
    def coords(self) -> np.ndarray:
        return np.array(self.xyz, dtype=float)


def meridian_on_tube(tube: TubeSurface, pair_index: int) -> ClosedCurve:
    """Closed curve through both face centers, crossing a parallel edge pair
    perpendicularly: two face chords plus two half-circle cylinder arcs.

    Total length 2*width + 2*pi*eps; it is a geodesic of the piecewise-
    smooth surface (each piece is straight in its chart and the pieces meet
    the seams perpendicularly, so the development is a straight line).
    """
    b = tube.base
    if b.n % 2:
        raise GeometryError("meridians require an even-sided base")
    h = b.n // 2
    j = int(pair_index)
    if not (0 <= j < h):
        raise GeometryError(f"pair index must lie in [0, {h})")
    jo = j + h
    eps = tube.eps
    a = b.apothem
    L = 2.0 * b.width + 2.0 * math.pi * eps
    mj = b.edge_chart(j, 0.5)
    mo = b.edge_chart(jo, 0.5)

    def cyl(jj, phi):
        return TubePoint(CYLINDER, jj,
                         tuple(tube.cylinder_xyz(jj, 0.5, phi)))

    def face(xy, top):
        return TubePoint(FACE_TOP if top else FACE_BOTTOM, -1,
                         tuple(tube.face_xyz(xy, top)))

    # breakpoints at the seams and the face centers; arc lengths: chords of
    # length a (apothem) and cylinder arcs of length pi*eps
    arcs = [a, a, math.pi * eps, a, a, math.pi * eps]
    pts = [cyl(j, 0.0), face((0.0, 0.0), True), cyl(jo, 0.0),
           cyl(jo, math.pi), face((0.0, 0.0), False), cyl(j, math.pi)]
    cum = np.concatenate([[0.0], np.cumsum(arcs)])
    ts = TWO_PI * cum[:-1] / L

    segment_kind = ["face-top", "face-top", ("cyl", jo),
                    "face-bottom", "face-bottom", ("cyl", j)]

    def interp(i, frac):
        kind = segment_kind[i]
        p0 = np.array(pts[i].xyz)
        p1 = np.array(pts[(i + 1) % 6].xyz)
        if kind == "face-top" or kind == "face-bottom":
            xy = (1 - frac) * p0[:2] + frac * p1[:2]
            top = kind == "face-top"
            return TubePoint(FACE_TOP if top else FACE_BOTTOM, -1,
                             tuple(tube.face_xyz(xy, top)))
        jj = kind[1]
        phi0 = 0.0 if i in (2,) else math.pi
        phi1 = math.pi - phi0
        phi = phi0 + frac * (phi1 - phi0)
        return TubePoint(CYLINDER, jj, tuple(tube.cylinder_xyz(jj, 0.5, phi)))

    def seglen(i):
        return arcs[i]

    meta = {"surface": {"n": b.n, "side": b.side, "eps": eps},
            "kind": "tube-meridian", "pair_index": j,
            "breakpoints": [{"t": float(t), "region": p.region,
                             "coords": [round(c, 15) for c in p.xyz]}
                            for t, p in zip(ts, pts)]}
    return ClosedCurve(surface_id=tube.surface_id, total_length=L, ts=ts,
                       points=pts, segment_interp=interp,
                       segment_length_fn=seglen, meta=meta)


# ---------------------------------------------------------------------------
# curvature/volume/diameter inputs for the no-short-geodesics bound


@dataclass
class CheegerInputs:
    """Uniform bounds feeding the closed-geodesic length floor.

    diam_upper bounds the intrinsic diameter: any surface point reaches a
    flat face within (pi/2 + pi/n)*eps along its cylinder and sector arcs,
    and face-to-face distances are at most the base diameter because the
    faces embed isometrically.  vol_lower is the exact area; the sectional
    curvature is 0 on faces and cylinders and 1/eps^2 > 0 on sectors, so 0
    is a uniform lower bound for the whole family.
    """

    diam_upper: float
    vol_lower: float
    curvature_lower: float

    def to_dict(self) -> dict:
        return {"diam_upper": self.diam_upper, "vol_lower": self.vol_lower,
                "curvature_lower": self.curvature_lower}


def geometry_summary(tube: TubeSurface,
                     diam_est: Optional[DiameterEstimate] = None
                     ) -> tuple[CheegerInputs, float]:
    """(CheegerInputs, area) for the tube; see CheegerInputs for the bounds."""
    if diam_est is None:
        diam_est = approximate_diameter(tube.base, grid=17)
    pad = (math.pi + TWO_PI / tube.base.n) * tube.eps
    diam_upper = diam_est.value + diam_est.error_bound + pad
    return (CheegerInputs(diam_upper=float(diam_upper),
                          vol_lower=float(tube.area),
                          curvature_lower=0.0),
            tube.area)
