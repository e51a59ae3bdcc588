"""Closed-geodesic enumeration on doubled regular polygons.

Closed geodesics correspond to billiard trajectories: developing the faces
across the crossed edges turns a closed geodesic into a straight segment,
and the cyclic crossing word (e_1, ..., e_m), m even, closes up exactly when
the composed edge reflections leave no rotation part, i.e. act as a pure
translation v.  Each admissible word then carries a one-parameter band of
parallel closed geodesics of common length |v|, parameterized by the anchor
crossing on edge e_1; the admissible anchor interval comes from requiring
every development crossing to hit its edge copy strictly inside and in
order, all of which are affine constraints in the anchor parameter.

The search enumerates words anchored at edge 0 (the dihedral group acts
transitively on edges), prunes branches whose unfolded edge copies admit no
ordered common transversal line or already spread farther apart than the
length budget, and finally expands each found band over the dihedral orbit
to the full list of geometrically distinct closed geodesics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .polygon import (BOTTOM, TOP, DoubledNgon, GeometryError, edge_point,
                      exact_oracle, polygon_curve, approximate_diameter)
from .verify import PASS, ClosedCurve, ToleranceConfig, verify_one_over_k

_ROT_TOL = 1e-9
_PARALLEL_TOL = 1e-12
_T_MARGIN = 1e-12


class SearchBudgetExceeded(RuntimeError):
    """Enumeration ran out of node or depth budget before exhausting the tree."""


@dataclass
class GeodesicFamily:
    """A band of parallel closed geodesics sharing one crossing word.

    Members are indexed by the anchor parameter u on edge word[0]; crossing
    parameters on the later edges and positions along the chord are affine
    in u (arrays s_a + s_b*u and t_a + t_b*u, entry i for crossing i+2).
    """

    word: tuple[int, ...]
    length: float
    v: np.ndarray
    u_lo: float
    u_hi: float
    s_a: np.ndarray
    s_b: np.ndarray
    t_a: np.ndarray
    t_b: np.ndarray

    @property
    def anchor_edge(self) -> int:
        return self.word[0]

    @property
    def u_center(self) -> float:
        return 0.5 * (self.u_lo + self.u_hi)

    @property
    def period(self) -> int:
        return len(self.word)

    def crossings(self, u: float) -> list[tuple[int, float, float]]:
        """(edge, edge parameter, chord fraction) per crossing, at anchor u."""
        out = [(self.word[0], float(u), 0.0)]
        ss = self.s_a + self.s_b * u
        tt = self.t_a + self.t_b * u
        for i, w in enumerate(self.word[1:]):
            out.append((w, float(ss[i]), float(tt[i])))
        return out

    def member(self, ngon: DoubledNgon, u: float, tag: Optional[str] = None,
               is_representative: bool = False) -> "ClosedGeodesic":
        if not (self.u_lo <= u <= self.u_hi):
            raise GeometryError(f"anchor {u} outside band "
                                f"({self.u_lo}, {self.u_hi})")
        m = len(self.word)
        cross = self.crossings(u)
        bps = [(2.0 * math.pi * t, edge_point(ngon, e, s))
               for e, s, t in cross]
        faces = [(TOP if i % 2 == 0 else BOTTOM) for i in range(m)]
        curve = polygon_curve(ngon, bps, faces, total_length=self.length,
                              meta={"kind": "closed-geodesic",
                                    "word": list(self.word)})
        if tag is None:
            tag = ("MERIDIAN" if self.is_meridian_band(ngon)
                   and abs(u - 0.5) < 1e-9 else "OTHER")
        return ClosedGeodesic(curve=curve, word=self.word, length=self.length,
                              period=m, band=(self.u_lo, self.u_hi),
                              anchor_edge=self.anchor_edge, member_u=float(u),
                              tag=tag, is_representative=is_representative)

    def is_meridian_band(self, ngon: DoubledNgon) -> bool:
        return (ngon.n % 2 == 0 and len(self.word) == 2
                and (self.word[1] - self.word[0]) % ngon.n == ngon.n // 2)


@dataclass
class ClosedGeodesic:
    """One closed geodesic: a specific member of a family band."""

    curve: ClosedCurve
    word: tuple[int, ...]
    length: float
    period: int
    band: tuple[float, float]
    anchor_edge: int
    member_u: float
    tag: str = "OTHER"
    is_representative: bool = False
    verification: object = None

    def to_dict(self) -> dict:
        d = {"word": list(self.word), "length": self.length,
             "period": self.period, "tag": self.tag,
             "band": [self.band[0], self.band[1]],
             "anchor_edge": self.anchor_edge, "member_u": self.member_u,
             "is_representative": self.is_representative,
             "curve": self.curve.to_dict()}
        if self.verification is not None:
            d["verification"] = self.verification.to_dict()
        return d


def _canonical_cyclic(word: Sequence[int]) -> tuple[int, ...]:
    """Minimal tuple over cyclic rotations of the word and its reversal."""
    w = tuple(word)
    m = len(w)
    cands = [w[i:] + w[:i] for i in range(m)]
    r = w[::-1]
    cands += [r[i:] + r[:i] for i in range(m)]
    return min(cands)


def _word_period(word: Sequence[int]) -> int:
    """Smallest cyclic period of the word."""
    w = tuple(word)
    m = len(w)
    for d in range(1, m):
        if m % d == 0 and w == w[d:] + w[:d]:
            return d
    return m


def _is_iterate(ngon: DoubledNgon, word: Sequence[int]) -> bool:
    """True when the word retraces a shorter closed geodesic.

    Odd sub-periods never close on the doubled surface (an odd reflection
    count reverses orientation), so e.g. the doubled odd billiard orbits
    are primitive curves even though their words are squares.
    """
    w = tuple(word)
    m = len(w)
    d = _word_period(w)
    while d < m:
        if solve_family(ngon, w[:d]) is not None:
            return True
        # next multiple of the fundamental period that divides m
        d += _word_period(w)
        while d < m and m % d:
            d += _word_period(w)
    return False


def solve_family(ngon: DoubledNgon, word: Sequence[int],
                 vertex_margin: float = 1e-9) -> Optional[GeodesicFamily]:
    """Band of closed geodesics with the given cyclic crossing word, if any.

    Returns None when the word composition has a rotation part, when the
    chord runs parallel to a required edge copy, or when the affine
    admissibility constraints leave no anchor interval.
    """
    word = tuple(int(w) % ngon.n for w in word)
    m = len(word)
    if m < 2 or m % 2:
        return None
    if any(word[i] == word[(i + 1) % m] for i in range(m)):
        return None

    # develop the faces; S_i for i >= 2 lives in the face before crossing i
    E_M, E_b = np.eye(2), np.zeros(2)
    segs = []
    for w in word[1:]:
        A, B = ngon.edge_endpoints(w)
        segs.append((E_M @ A + E_b, E_M @ B + E_b))
        Mw, bw = ngon.reflection(w)
        E_M, E_b = E_M @ Mw, E_M @ bw + E_b
    Mw, bw = ngon.reflection(word[0])
    U_M, U_b = E_M @ Mw, E_M @ bw + E_b
    if np.max(np.abs(U_M - np.eye(2))) > _ROT_TOL:
        return None
    v = U_b
    L = float(np.linalg.norm(v))
    if L < 1e-9:
        return None

    A0, B0 = ngon.edge_endpoints(word[0])
    e0 = B0 - A0
    lo, hi = vertex_margin, 1.0 - vertex_margin
    s_a, s_b, t_a, t_b = [], [], [], []
    t_prev = (0.0, 0.0)

    def tighten(g0, g1):
        # affine constraint g0 + g1*u >= 0
        nonlocal lo, hi
        if g1 > _PARALLEL_TOL:
            lo = max(lo, -g0 / g1)
        elif g1 < -_PARALLEL_TOL:
            hi = min(hi, -g0 / g1)
        elif g0 < 0.0:
            lo, hi = 1.0, 0.0

    for (P, Q) in segs:
        d = Q - P
        nrm = np.array([-d[1], d[0]])
        nrm /= np.linalg.norm(nrm)
        dn = float(nrm @ v)
        if abs(dn) < _PARALLEL_TOL:
            return None
        alpha = float((nrm @ P - nrm @ A0) / dn)
        beta = float(-(nrm @ e0) / dn)
        base = A0 + alpha * v - P
        lin = e0 + beta * v
        dd = float(d @ d)
        sa = float(base @ d) / dd
        sb = float(lin @ d) / dd
        s_a.append(sa); s_b.append(sb)
        t_a.append(alpha); t_b.append(beta)
        # chord fraction strictly inside (0, 1) and ahead of the previous one
        tighten(alpha - _T_MARGIN, beta)
        tighten(1.0 - _T_MARGIN - alpha, -beta)
        tighten(alpha - t_prev[0] - _T_MARGIN, beta - t_prev[1])
        # edge parameter strictly inside (vertex avoidance)
        tighten(sa - vertex_margin, sb)
        tighten(1.0 - vertex_margin - sa, -sb)
        t_prev = (alpha, beta)

    if hi - lo < 1e-9:
        return None
    return GeodesicFamily(word=word, length=L, v=v, u_lo=float(lo),
                          u_hi=float(hi), s_a=np.array(s_a), s_b=np.array(s_b),
                          t_a=np.array(t_a), t_b=np.array(t_b))


# ---------------------------------------------------------------------------
# corridor feasibility (prune test)


def _has_ordered_transversal(segs: np.ndarray, clearance_tol: float = 1e-12) -> bool:
    """Exact test for a line crossing all segments transversally, in order.

    segs: (m, 2, 2).  A development chord of a closed geodesic crosses every
    corridor segment strictly inside, so there is a direction where both

      gap(d)   = min_i max-offset_i - max_i min-offset_i       (common line)
      order(d) = min_i (max-position_i - runmax of min-position) (in order)

    are strictly positive.  Both are piecewise sinusoids of the direction
    angle whose pieces break or turn exactly where some endpoint difference
    is parallel or perpendicular to the direction, so the maximum of
    min(gap, order) is attained on that finite candidate set; evaluating
    there decides feasibility exactly.  Lines running along an edge copy
    (the vertex-churn corridors) reach clearance 0, never above, and are
    pruned, which is correct: their chords would pass through cone points.
    """
    m = segs.shape[0]
    if m < 2:
        return True
    E = segs.reshape(-1, 2)
    diff = E[:, None, :] - E[None, :, :]
    phi = np.arctan2(diff[..., 1], diff[..., 0]).ravel()
    th = np.concatenate([phi, phi + 0.5 * math.pi,
                         phi + math.pi, phi + 1.5 * math.pi])
    th = np.unique(np.mod(th, 2.0 * math.pi))
    d = np.stack([np.cos(th), np.sin(th)], axis=1)        # (T, 2)
    nrm = np.stack([-d[:, 1], d[:, 0]], axis=1)

    off = (E @ nrm.T).reshape(m, 2, -1)                   # offsets along n
    gap = off.max(axis=1).min(axis=0) - off.min(axis=1).max(axis=0)

    pos = (E @ d.T).reshape(m, 2, -1)                     # positions along d
    pos_lo = pos.min(axis=1)
    # each crossing must be reachable after all earlier ones (self excluded)
    prev = np.vstack([np.full((1, pos_lo.shape[1]), -np.inf),
                      np.maximum.accumulate(pos_lo, axis=0)[:-1]])
    order = (pos.max(axis=1) - prev).min(axis=0)

    scale = max(1.0, float(np.max(np.abs(E))))
    return bool(np.max(np.minimum(gap, order)) > clearance_tol * scale)


def _seg_seg_distance(a0, a1, b0, b1) -> float:
    """Euclidean distance between two planar segments."""
    def pt_seg(p, s0, s1):
        d = s1 - s0
        dd = float(d @ d)
        t = 0.0 if dd == 0 else float(np.clip((p - s0) @ d / dd, 0.0, 1.0))
        return float(np.linalg.norm(s0 + t * d - p))

    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    # proper intersection means distance zero
    d1, d2 = orient(a0, a1, b0), orient(a0, a1, b1)
    d3, d4 = orient(b0, b1, a0), orient(b0, b1, a1)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)):
        return 0.0
    return min(pt_seg(b0, a0, a1), pt_seg(b1, a0, a1),
               pt_seg(a0, b0, b1), pt_seg(a1, b0, b1))


@dataclass(frozen=True)
class EnumConfig:
    clearance_tol: float = 1e-12   # relative transversal clearance floor
    max_nodes: int = 400_000
    max_depth: int = 28
    vertex_margin: float = 1e-9


@dataclass
class Certificate:
    """Search-exhaustion certificate for an enumeration run."""

    complete: bool
    nodes_explored: int
    max_depth_seen: int
    L_max: float
    pruned_infeasible: int = 0
    pruned_length: int = 0
    depth_cap_hits: int = 0

    def to_dict(self) -> dict:
        return {"complete": self.complete,
                "nodes_explored": self.nodes_explored,
                "max_depth_seen": self.max_depth_seen,
                "L_max": self.L_max,
                "pruned_infeasible": self.pruned_infeasible,
                "pruned_length": self.pruned_length,
                "depth_cap_hits": self.depth_cap_hits}


@dataclass
class EnumerationResult:
    geodesics: list          # expanded, one representative member per band
    families: list           # distinct geometric bands (GeodesicFamily)
    certificate: Certificate

    def __iter__(self):
        return iter(self.geodesics)

    def __len__(self):
        return len(self.geodesics)


def _dihedral_maps(n: int):
    maps = []
    for k in range(n):
        maps.append(lambda e, k=k: (e + k) % n)
        maps.append(lambda e, k=k: (k - e) % n)
    return maps


def enumerate_closed_geodesics(ngon: DoubledNgon, L_max: float,
                               cfg: EnumConfig = EnumConfig()) -> EnumerationResult:
    """All closed geodesics of length <= L_max, as family bands.

    Searches crossing words anchored at edge 0 with the corridor prunes,
    then expands every band found over the dihedral group, deduplicating by
    the cyclic/reversal canonical word.  The certificate records whether the
    pruned tree was exhausted; a depth or node budget hit is reported, never
    silently treated as completeness.
    """
    if L_max <= 0:
        raise GeometryError("L_max must be positive")
    n = ngon.n
    cert = Certificate(complete=True, nodes_explored=0, max_depth_seen=1,
                       L_max=float(L_max))
    found: dict[tuple, GeodesicFamily] = {}

    A0, B0 = ngon.edge_endpoints(0)
    root_seg = np.array([A0, B0])
    # stack entries: word, face embedding after the last crossing, corridor
    # segments so far, running max pairwise corridor distance
    stack = [((0,), np.eye(2), np.zeros(2), [root_seg], 0.0)]
    while stack:
        word, E_M, E_b, segs, maxpair = stack.pop()
        cert.nodes_explored += 1
        if cert.nodes_explored > cfg.max_nodes:
            cert.complete = False
            raise SearchBudgetExceeded(
                f"enumeration exceeded {cfg.max_nodes} nodes "
                f"(depth {len(word)}); partial results unreliable")
        cert.max_depth_seen = max(cert.max_depth_seen, len(word))
        for e in range(n):
            if e == word[-1]:
                continue
            A, B = ngon.edge_endpoints(e)
            S_new = np.array([E_M @ A + E_b, E_M @ B + E_b])
            # length prune: any closed geodesic through the corridor is at
            # least as long as the largest gap between corridor segments
            gap = max((_seg_seg_distance(S_new[0], S_new[1], s[0], s[1])
                       for s in segs), default=0.0)
            maxpair2 = max(maxpair, gap)
            if maxpair2 > L_max:
                cert.pruned_length += 1
                continue
            segs2 = segs + [S_new]
            if not _has_ordered_transversal(np.array(segs2), cfg.clearance_tol):
                cert.pruned_infeasible += 1
                continue
            word2 = word + (e,)
            if (len(word2) % 2 == 0 and e != word2[0]
                    and not _is_iterate(ngon, word2)):
                fam = solve_family(ngon, word2, cfg.vertex_margin)
                if fam is not None and fam.length <= L_max:
                    found.setdefault(_canonical_cyclic(word2), fam)
            if len(word2) < cfg.max_depth:
                Mw, bw = ngon.reflection(e)
                stack.append((word2, E_M @ Mw, E_M @ bw + E_b, segs2, maxpair2))
            else:
                cert.depth_cap_hits += 1
                cert.complete = False

    # expand each band over the dihedral orbit to the full geometric list
    families: dict[tuple, GeodesicFamily] = {}
    orbit_rep: dict[tuple, tuple] = {}
    for key, fam in sorted(found.items()):
        orbit_keys = set()
        for g in _dihedral_maps(n):
            w2 = tuple(g(e) for e in fam.word)
            k2 = _canonical_cyclic(w2)
            if k2 not in orbit_keys:
                orbit_keys.add(k2)
                if k2 not in families:
                    fam2 = solve_family(ngon, k2, cfg.vertex_margin)
                    if fam2 is None:  # numerically impossible by symmetry
                        raise GeometryError(
                            f"dihedral image {k2} of {fam.word} failed to close")
                    families[k2] = fam2
        rep = min(orbit_keys)
        for k2 in orbit_keys:
            orbit_rep[k2] = rep

    geodesics = []
    for k2 in sorted(families):
        fam = families[k2]
        geodesics.append(fam.member(ngon, fam.u_center,
                                    is_representative=(orbit_rep[k2] == k2)))
    geodesics.sort(key=lambda g: (g.length, g.word))
    return EnumerationResult(geodesics=geodesics,
                             families=[families[k] for k in sorted(families)],
                             certificate=cert)


def brute_force_families(ngon: DoubledNgon, max_period: int,
                         L_max: Optional[float] = None) -> dict[tuple, GeodesicFamily]:
    """Unpruned reference enumeration over all words up to max_period.

    Walks every consecutive-distinct word (any starting edge) of even length
    up to max_period and solves the closure directly.  Exponential; only for
    cross-checking the pruned search on small instances.
    """
    out: dict[tuple, GeodesicFamily] = {}

    def rec(word):
        if len(word) >= 2 and len(word) % 2 == 0 and word[-1] != word[0] \
                and not _is_iterate(ngon, word):
            fam = solve_family(ngon, word)
            if fam is not None and (L_max is None or fam.length <= L_max):
                out.setdefault(_canonical_cyclic(word), fam)
        if len(word) < max_period:
            for e in range(ngon.n):
                if e != word[-1]:
                    rec(word + (e,))

    for start in range(ngon.n):
        rec((start,))
    return out


# ---------------------------------------------------------------------------
# half-geodesic classification


@dataclass
class ClassificationResult:
    half_geodesics: list
    families_tested: int
    members_tested: int
    certificate: Certificate
    L_max: float
    diameter_estimate: object

    @property
    def count(self) -> int:
        return len(self.half_geodesics)

    def to_dict(self) -> dict:
        return {"count": self.count,
                "half_geodesics": [g.to_dict() for g in self.half_geodesics],
                "families_tested": self.families_tested,
                "members_tested": self.members_tested,
                "certificate": self.certificate.to_dict(),
                "L_max": self.L_max,
                "diameter": {"value": self.diameter_estimate.value,
                             "error_bound": self.diameter_estimate.error_bound}}


def classify_half_geodesics(ngon: DoubledNgon,
                            cfg: ToleranceConfig = ToleranceConfig(),
                            diameter_grid: int = 32,
                            margin_frac: float = 0.01,
                            enum_cfg: EnumConfig = EnumConfig()
                            ) -> ClassificationResult:
    """Enumerate candidates up to 2*diam and keep the verified half-geodesics.

    Every closed geodesic band below the length cutoff is sampled across its
    anchor interval (an odd count, so the symmetric center member is always
    included) and each member is checked for 1/2-minimality against the
    exact oracle; only PASS members are returned.
    """
    est = approximate_diameter(ngon, diameter_grid)
    L_max = 2.0 * est.upper * (1.0 + margin_frac)
    enum = enumerate_closed_geodesics(ngon, L_max, enum_cfg)
    oracle = exact_oracle(ngon)
    passes = []
    members = 0
    for fam in enum.families:
        us = np.linspace(fam.u_lo, fam.u_hi, cfg.band_samples + 2)[1:-1]
        rep_key = None
        for g in enum.geodesics:
            if g.word == fam.word:
                rep_key = g.is_representative
        for u in us:
            geod = fam.member(ngon, float(u),
                              is_representative=bool(rep_key))
            members += 1
            report = verify_one_over_k(geod.curve, oracle, 2, cfg)
            if report.verdict == PASS:
                geod.verification = report
                passes.append(geod)
    passes.sort(key=lambda g: (g.length, g.word, g.member_u))
    return ClassificationResult(half_geodesics=passes,
                                families_tested=len(enum.families),
                                members_tested=members,
                                certificate=enum.certificate,
                                L_max=L_max, diameter_estimate=est)
