import math

import numpy as np
import pytest

from geolab.polygon import (BOTTOM, TOP, DiameterEstimate, GeometryError,
                            approximate_diameter, build_ngon, edge_point,
                            ellipse_clearance_check, exact_distance,
                            exact_oracle, interior_point, meridians,
                            mesh_oracle, off_center_pair)
from geolab.verify import (PASS, FAIL, ToleranceConfig, curve_length,
                           metric_axiom_check, verify_one_over_k)

SQ = build_ngon(4, 1.0)
HEX = build_ngon(6, 1.0)


def _random_interior_pairs(ngon, count, seed, opposite=True):
    rng = np.random.default_rng(seed)
    R = ngon.circumradius
    pairs = []
    while len(pairs) < count:
        a, b = rng.uniform(-R, R, 2), rng.uniform(-R, R, 2)
        if ngon.contains(a, 1e-6) and ngon.contains(b, 1e-6):
            pairs.append((interior_point(ngon, TOP, *a),
                          interior_point(ngon, BOTTOM if opposite else TOP, *b)))
    return pairs


# -- construction -----------------------------------------------------------

def test_square_derived_quantities():
    assert SQ.apothem == pytest.approx(0.5)
    assert SQ.perimeter == pytest.approx(4.0)
    assert SQ.face_area == pytest.approx(1.0)
    assert SQ.width == pytest.approx(1.0)


def test_hexagon_derived_quantities():
    assert HEX.apothem == pytest.approx(math.sqrt(3) / 2)
    assert HEX.width == pytest.approx(math.sqrt(3))


def test_bad_ngon_rejected():
    with pytest.raises(GeometryError):
        build_ngon(2, 1.0)
    with pytest.raises(GeometryError):
        build_ngon(5, 0.0)


def test_reference_frame():
    # edge 0 midpoint sits on the positive x axis at apothem distance
    mid = SQ.edge_chart(0, 0.5)
    assert mid == pytest.approx([SQ.apothem, 0.0])
    # cone angle below 2*pi for every n
    for n in range(3, 12):
        assert build_ngon(n, 1.0).cone_angle < 2 * math.pi


def test_point_validation():
    with pytest.raises(GeometryError):
        interior_point(SQ, TOP, 0.7, 0.0)          # outside
    with pytest.raises(GeometryError):
        interior_point(SQ, "side", 0.0, 0.0)       # bad face
    with pytest.raises(GeometryError):
        edge_point(SQ, 0, 0.0)                     # vertex
    with pytest.raises(GeometryError):
        edge_point(SQ, 0, 1.0)


# -- exact distance ---------------------------------------------------------

def test_center_to_center():
    p = interior_point(SQ, TOP, 0.0, 0.0)
    q = interior_point(SQ, BOTTOM, 0.0, 0.0)
    d, path = exact_distance(p, q, SQ)
    assert d == pytest.approx(1.0, abs=1e-12)
    assert len(path.crossings) == 1
    _, u, _ = path.crossings[0]
    assert u == pytest.approx(0.5, abs=1e-12)      # edge midpoint
    assert path.vertex_margin > 0.49


def test_identity():
    p = interior_point(SQ, TOP, 0.1, -0.2)
    assert exact_distance(p, p, SQ)[0] == 0.0


def test_same_face_is_chord():
    p = interior_point(SQ, TOP, 0.3, 0.1)
    q = interior_point(SQ, TOP, -0.2, -0.4)
    d, path = exact_distance(p, q, SQ)
    assert d == pytest.approx(np.linalg.norm(p.chart - q.chart), abs=1e-15)
    assert path.edges == ()


def test_edge_points_use_chart_distance():
    e = edge_point(SQ, 0, 0.25)
    q = interior_point(SQ, BOTTOM, -0.3, 0.2)
    d, _ = exact_distance(e, q, SQ)
    assert d == pytest.approx(np.linalg.norm(e.chart - q.chart), abs=1e-15)


def test_off_center_pair_distances():
    # the halfway pair of the off-center parallel curve: a path over a
    # third edge beats half the curve length, with gap growing in delta
    for delta, expect in [(0.05, 0.9), (0.1, 0.8), (0.2, 0.6)]:
        p, q = off_center_pair(SQ, 0, delta)
        d, path = exact_distance(p, q, SQ)
        assert d == pytest.approx(expect, abs=1e-12)
        assert d < 1.0
    with pytest.raises(GeometryError):
        off_center_pair(build_ngon(5, 1.0), 0, 0.1)


def test_chart_lower_bound():
    # folding both faces to one chart is 1-Lipschitz
    for p, q in _random_interior_pairs(SQ, 50, 3):
        d, _ = exact_distance(p, q, SQ)
        assert d >= np.linalg.norm(p.chart - q.chart) - 1e-12


def test_dihedral_equivariance():
    rng = np.random.default_rng(11)
    c, s = math.cos(2 * math.pi / 4), math.sin(2 * math.pi / 4)
    rot = np.array([[c, -s], [s, c]])
    refl = np.diag([1.0, -1.0])  # reflection across the x axis
    for M in (rot, refl):
        for p, q in _random_interior_pairs(SQ, 25, 5):
            d1, _ = exact_distance(p, q, SQ)
            p2 = interior_point(SQ, p.face, *(M @ p.chart))
            q2 = interior_point(SQ, q.face, *(M @ q.chart))
            d2, _ = exact_distance(p2, q2, SQ)
            assert d2 == pytest.approx(d1, rel=1e-12, abs=1e-12)


def test_no_vertex_crossings_on_random_pairs():
    for p, q in _random_interior_pairs(HEX, 200, 17):
        _, path = exact_distance(p, q, HEX)
        assert path.vertex_margin > 0.0


# -- mesh oracle ------------------------------------------------------------

def test_mesh_oracle_guards():
    with pytest.raises(GeometryError):
        mesh_oracle(SQ, 0.3)          # h >= side/4
    with pytest.raises(GeometryError):
        mesh_oracle(SQ, -0.01)
    with pytest.raises(GeometryError):
        mesh_oracle(SQ, 0.001, node_cap=100)


def test_mesh_oracle_center_pair():
    orc = mesh_oracle(SQ, 0.02)
    p = interior_point(SQ, TOP, 0.0, 0.0)
    q = interior_point(SQ, BOTTOM, 0.0, 0.0)
    d = orc.distance(p, q)
    assert 1.0 <= d <= 1.0 + orc.err
    assert orc.distance(p, p) == 0.0


def test_mesh_oracle_agreement():
    exact = exact_oracle(SQ)
    pairs = _random_interior_pairs(SQ, 200, 42)
    de = exact.distance_many(pairs)
    for h in (0.05, 0.02):
        orc = mesh_oracle(SQ, h)
        dm = orc.distance_many(pairs)
        assert np.all(dm >= de - 1e-12)           # graph paths are realizable
        assert np.max(np.abs(dm - de)) <= orc.err


def test_mesh_oracle_error_shrinks_when_h_halves():
    # frozen study (seed 7, 100 pairs): per-halving ratios 0.61, 0.43, 0.36
    # and a three-halving factor 0.096 vs the linear 0.125, i.e. the observed
    # worst error tracks h at least linearly and roughly halves per step
    exact = exact_oracle(SQ)
    pairs = _random_interior_pairs(SQ, 100, 7)
    de = exact.distance_many(pairs)
    errs = []
    for h in (0.08, 0.04, 0.02, 0.01):
        dm = mesh_oracle(SQ, h).distance_many(pairs)
        errs.append(np.max(np.abs(dm - de)))
    for a, b in zip(errs, errs[1:]):
        assert b <= 0.65 * a
    assert errs[-1] <= errs[0] / 8 * 1.1


def test_mesh_oracle_metric_axioms():
    orc = mesh_oracle(SQ, 0.05)
    rng = np.random.default_rng(1)
    pts = []
    while len(pts) < 12:
        a = rng.uniform(-0.5, 0.5, 2)
        if SQ.contains(a, 1e-6):
            pts.append(interior_point(SQ, TOP if len(pts) % 2 else BOTTOM, *a))
    rep = metric_axiom_check(orc, pts)
    assert rep.ok


def test_exact_oracle_metric_axioms():
    orc = exact_oracle(SQ)
    pts = [p for p, _ in _random_interior_pairs(SQ, 25, 9)]
    pts += [q for _, q in _random_interior_pairs(SQ, 25, 10)]
    rep = metric_axiom_check(orc, pts)
    assert rep.identity_worst <= 1e-12
    assert rep.symmetry_worst <= 1e-12
    assert rep.triangle_worst <= 1e-12


# -- meridians --------------------------------------------------------------

def test_meridian_counts_and_lengths():
    ms4 = meridians(SQ)
    assert len(ms4) == 2
    assert all(m.length == pytest.approx(2.0) for m in ms4)
    ms6 = meridians(HEX)
    assert len(ms6) == 3
    assert all(m.length == pytest.approx(2 * math.sqrt(3)) for m in ms6)
    assert meridians(build_ngon(5, 1.0)) == []


def test_meridian_curve_length_consistency():
    for m in meridians(SQ):
        assert curve_length(m.curve) == pytest.approx(2.0, abs=1e-12)


@pytest.mark.parametrize("ngon", [SQ, HEX])
def test_meridian_minimality(ngon):
    orc = exact_oracle(ngon)
    for m in meridians(ngon):
        rep = verify_one_over_k(m.curve, orc, 2)
        assert rep.verdict == PASS
        assert rep.max_deviation <= 1e-9


def test_meridian_cross_checked_against_mesh_oracle():
    orc = mesh_oracle(SQ, 0.02)
    m = meridians(SQ)[0]
    rep = verify_one_over_k(m.curve, orc, 2, ToleranceConfig(sample_count=90))
    assert rep.verdict != FAIL
    assert rep.max_deviation <= 5 * orc.err


# -- inscribed-ellipse criterion --------------------------------------------

def test_clearance_midpoint_foci_tangent_edges():
    p, q = edge_point(SQ, 0, 0.5), edge_point(SQ, 2, 0.5)
    res = ellipse_clearance_check(p, q, SQ, 1.0)
    assert res.ok
    by_edge = {e["edge"]: e["value"] for e in res.per_edge}
    assert by_edge[0] == pytest.approx(1.0, abs=1e-9)   # tangency edges
    assert by_edge[2] == pytest.approx(1.0, abs=1e-9)
    assert by_edge[1] > 1.0 + 0.1


def test_clearance_symmetric_meridian_pair():
    p = interior_point(SQ, TOP, 0.3, 0.0)
    q = interior_point(SQ, BOTTOM, -0.3, 0.0)
    assert ellipse_clearance_check(p, q, SQ, 1.0).ok


def test_clearance_off_center_fails_on_third_edge():
    p, q = off_center_pair(SQ, 0, 0.2)
    res = ellipse_clearance_check(p, q, SQ, 1.0)
    assert not res.ok
    assert res.witness_edge in (1, 3)                  # a third edge
    assert res.witness_value == pytest.approx(0.6, abs=1e-9)


def test_clearance_degenerate_foci_circle_case():
    c = interior_point(SQ, TOP, 0.0, 0.0)
    res = ellipse_clearance_check(c, c, SQ, 1.0)
    assert res.ok
    for e in res.per_edge:
        assert e["value"] == pytest.approx(1.0, abs=1e-9)


def test_clearance_matches_exact_distance_on_meridian_families():
    # criterion: clearance true exactly when the pair is at full half-length
    rng = np.random.default_rng(2024)
    for ngon in (SQ, HEX):
        w = ngon.width
        h = ngon.n // 2
        for _ in range(100):
            j = int(rng.integers(0, h))
            x = rng.uniform(-ngon.apothem * 0.98, ngon.apothem * 0.98)
            delta = rng.uniform(-0.45, 0.45) * ngon.side
            mhat = ngon.edge_normals[j]
            that = ngon.edge_tangents[j]
            c1 = x * mhat + delta * that
            c2 = -x * mhat + delta * that
            p = interior_point(ngon, TOP, *c1)
            q = interior_point(ngon, BOTTOM, *c2)
            d, _ = exact_distance(p, q, ngon)
            res = ellipse_clearance_check(p, q, ngon, w)
            assert res.ok == (d >= w - 1e-9), (j, x, delta, d, res.ok)


# -- diameter ---------------------------------------------------------------

def test_diameter_square():
    est = approximate_diameter(SQ, grid=17)
    assert isinstance(est, DiameterEstimate)
    assert 1.3 <= est.value <= math.sqrt(2) + 1e-12
    assert est.upper >= math.sqrt(2)                   # bound covers the truth


def test_diameter_scaling():
    e1 = approximate_diameter(SQ, grid=9)
    e2 = approximate_diameter(build_ngon(4, 2.0), grid=9)
    assert e2.value == pytest.approx(2 * e1.value, rel=1e-9)


def test_diameter_monotone_in_nested_grids():
    vals = [approximate_diameter(SQ, grid=g).value for g in (9, 17, 65)]
    assert vals[0] <= vals[1] + 1e-15 <= vals[2] + 2e-15


def test_diameter_grid_guard():
    with pytest.raises(GeometryError):
        approximate_diameter(SQ, grid=4)
